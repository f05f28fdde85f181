use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{PatchMap, StateLayout};
use crate::assembly::{InitMethod, MassVariant};
use crate::error::{Error, Result};
use crate::scenarios::{Gaussian, GaussianStart, Scenario};
use crate::solvers::{run_partitioned, CoupledProblem, FullTrajectory, IvrSync, RunOptions, TrajectorySink};

/// Origin of the columns contributed by one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub scenario: String,
    pub mu: [f64; 2],
    pub columns: usize,
}

/// Snapshot pairs `(Y, Y')`: column `j` of `Y'` is the successor of column
/// `j` of `Y` within one trajectory.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    layout: StateLayout,
    y: Vec<f64>,
    y_next: Vec<f64>,
    provenance: Vec<Provenance>,
}

impl SnapshotSet {
    pub fn new(layout: StateLayout) -> Self {
        Self {
            layout,
            y: Vec::new(),
            y_next: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn columns(&self) -> usize {
        self.y.len() / self.layout.n_fs()
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    /// Append one trajectory of consecutive states `y_0, …, y_{q-1}` stored
    /// column-major; it contributes `q - 1` pairs.
    pub fn push_trajectory(&mut self, states: &[f64], provenance: Provenance) -> Result<()> {
        let n = self.layout.n_fs();
        if states.len() % n != 0 {
            return Err(Error::Layout(format!(
                "trajectory data of length {} is not a multiple of N_FS = {n}",
                states.len()
            )));
        }
        let q = states.len() / n;
        if q >= 2 {
            self.y.extend_from_slice(&states[..(q - 1) * n]);
            self.y_next.extend_from_slice(&states[n..]);
        }
        self.provenance.push(Provenance {
            columns: q.saturating_sub(1),
            ..provenance
        });
        Ok(())
    }

    /// Concatenate another set with the same layout.
    pub fn append(&mut self, other: SnapshotSet) -> Result<()> {
        self.layout.check(&other.layout)?;
        self.y.extend(other.y);
        self.y_next.extend(other.y_next);
        self.provenance.extend(other.provenance);
        Ok(())
    }

    pub fn y(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.layout.n_fs(), self.columns(), &self.y)
    }

    pub fn y_next(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.layout.n_fs(), self.columns(), &self.y_next)
    }

    /// Column `j` of `Y` and `Y'`.
    pub fn pair(&self, j: usize) -> (&[f64], &[f64]) {
        let n = self.layout.n_fs();
        (&self.y[j * n..(j + 1) * n], &self.y_next[j * n..(j + 1) * n])
    }
}

/// Records the staggered states `y_k = (λ_k, u_{1,k+1}|patch, u_{2,k+1}|patch)`
/// of a running IVR(C) trajectory.
#[derive(Debug, Clone)]
pub struct StaggeredRecorder {
    patches: PatchMap,
    states: Vec<f64>,
}

impl StaggeredRecorder {
    pub fn new(patches: PatchMap) -> Self {
        Self {
            patches,
            states: Vec::new(),
        }
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn into_states(self) -> Vec<f64> {
        self.states
    }
}

impl TrajectorySink for StaggeredRecorder {
    fn initial(&mut self, _t: f64, _u: [&DVector<f64>; 2]) {
        self.states.clear();
    }

    fn step(&mut self, _k: usize, _t: f64, lambda: &DVector<f64>, u_next: [&DVector<f64>; 2]) {
        let n = self.patches.layout().n_fs();
        let start = self.states.len();
        self.states.resize(start + n, 0.0);
        self.patches.gather(lambda.as_slice(), u_next, &mut self.states[start..]);
    }
}

/// Snapshot set from stored trajectories (`λ_k` recorded for every step).
pub fn collect_snapshots(
    trajectories: &[(FullTrajectory, Provenance)],
    patches: &PatchMap,
) -> Result<SnapshotSet> {
    let layout = patches.layout();
    let mut set = SnapshotSet::new(layout);
    let n = layout.n_fs();
    for (traj, prov) in trajectories {
        let q = traj.states.len().saturating_sub(1);
        let mut data = vec![0.0; q * n];
        for j in 0..q {
            let lambda = traj.states[j]
                .lambda
                .as_ref()
                .ok_or_else(|| Error::Layout(format!("state {j} has no multiplier")))?;
            let next = &traj.states[j + 1];
            if lambda.len() != layout.n_gamma {
                return Err(Error::Layout(format!(
                    "multiplier of length {} does not match n_γ = {}",
                    lambda.len(),
                    layout.n_gamma
                )));
            }
            patches.gather(lambda.as_slice(), [&next.u[0], &next.u[1]], &mut data[j * n..(j + 1) * n]);
        }
        set.push_trajectory(&data, prov.clone())?;
    }
    Ok(set)
}

/// Training run configuration.
#[derive(Debug, Clone, Copy)]
pub struct TrainingOptions {
    pub k_patch: usize,
    pub run: RunOptions,
}

/// IVR(C) runs of `problem` started from each Gaussian (sources and boundary
/// data of the problem's scenario are kept), harvested into one snapshot set.
/// Trajectories run in parallel; columns are concatenated in input order.
pub fn simulate_training(
    problem: &CoupledProblem,
    starts: &[Gaussian],
    options: TrainingOptions,
) -> Result<SnapshotSet> {
    let patches = PatchMap::for_problem(problem, options.k_patch)?;
    let mut set = SnapshotSet::new(patches.layout());
    if starts.is_empty() {
        return Ok(set);
    }
    let schur = problem.build_schur(MassVariant::Consistent)?;
    let base = problem.scenario().clone();
    let runs: Vec<Result<(Vec<f64>, Provenance)>> = starts
        .par_iter()
        .map(|g| {
            let sc: Arc<dyn Scenario> = Arc::new(GaussianStart::new(base.clone(), *g));
            let instance = problem.with_scenario(sc.clone());
            let mut sync = IvrSync::new(schur.clone());
            let mut rec = StaggeredRecorder::new(patches.clone());
            let run = RunOptions {
                init: InitMethod::Projection,
                ..options.run
            };
            run_partitioned(&instance, &mut sync, run, MassVariant::Consistent, &mut rec)?;
            let prov = Provenance {
                scenario: sc.name(),
                mu: sc.mu(),
                columns: 0,
            };
            Ok((rec.into_states(), prov))
        })
        .collect();
    for r in runs {
        let (states, prov) = r?;
        set.push_trajectory(&states, prov)?;
    }
    Ok(set)
}
