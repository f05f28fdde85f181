//! Explicit synchronous partitioned time stepping with pluggable
//! synchronization, the IVR Schur reconstruction, and the monolithic
//! reference solver.

mod monolithic;
mod schur;

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;

pub use monolithic::{run_monolithic, MonolithicOutcome, MonolithicProblem};
pub use schur::{build_schur, schur_sync, IvrSync, SchurSystem};

use crate::assembly::{InitMethod, MassVariant, SubdomainOperators};
use crate::error::{Error, Result};
use crate::linalg::BandedCholesky;
use crate::mesh::{build_meshes, DomainSpec, QuadMesh, Subdomain};
use crate::scenarios::Scenario;

/// Default time step per grid, from the stability-limited values used for
/// the reference runs.
pub fn default_dt(n: usize) -> Option<f64> {
    match n {
        16 => Some(1.42e-2),
        32 => Some(6.84e-3),
        64 => Some(3.37e-3),
        128 => Some(1.67e-3),
        _ => None,
    }
}

/// Number of forward Euler steps to reach `t_final`.
pub fn step_count(t_final: f64, dt: f64) -> usize {
    (t_final / dt).round() as usize
}

/// Snapshot of the coupled solution at `t_k`. `lambda` is the multiplier
/// used to advance from `t_k`; the final state has none.
#[derive(Debug, Clone)]
pub struct CoupledState {
    pub t: f64,
    pub u: [DVector<f64>; 2],
    pub lambda: Option<DVector<f64>>,
}

/// Receives the trajectory of a partitioned run as it is produced.
pub trait TrajectorySink {
    fn initial(&mut self, _t: f64, _u: [&DVector<f64>; 2]) {}

    /// Called after step `k`: `lambda` advanced the state from `t_k` to `t_next`.
    fn step(&mut self, _k: usize, _t_next: f64, _lambda: &DVector<f64>, _u_next: [&DVector<f64>; 2]) {}
}

impl TrajectorySink for () {}

/// Keeps every state; only meant for small grids.
#[derive(Debug, Clone, Default)]
pub struct FullTrajectory {
    pub states: Vec<CoupledState>,
}

impl TrajectorySink for FullTrajectory {
    fn initial(&mut self, t: f64, u: [&DVector<f64>; 2]) {
        self.states.clear();
        self.states.push(CoupledState {
            t,
            u: [u[0].clone(), u[1].clone()],
            lambda: None,
        });
    }

    fn step(&mut self, k: usize, t_next: f64, lambda: &DVector<f64>, u: [&DVector<f64>; 2]) {
        self.states[k].lambda = Some(lambda.clone());
        self.states.push(CoupledState {
            t: t_next,
            u: [u[0].clone(), u[1].clone()],
            lambda: None,
        });
    }
}

/// Records the multiplier of every step.
#[derive(Debug, Clone, Default)]
pub struct LambdaHistory {
    pub lambdas: Vec<DVector<f64>>,
}

impl TrajectorySink for LambdaHistory {
    fn step(&mut self, _k: usize, _t: f64, lambda: &DVector<f64>, _u: [&DVector<f64>; 2]) {
        self.lambdas.push(lambda.clone());
    }
}

/// Inputs available to a synchronization operator at step `k`.
pub struct SyncInput<'a> {
    pub step: usize,
    pub t: f64,
    /// Current subdomain states `u_{i,k}`.
    pub u: [&'a DVector<f64>; 2],
    /// Loads `b_{i,k} = f_{i,k} - K_i u_{i,k}`.
    pub b: [&'a DVector<f64>; 2],
    /// Multiplier of the previous step (zero before the first step).
    pub lambda_prev: &'a DVector<f64>,
}

/// Produces the interface multiplier `λ_k`; each subdomain then receives the
/// Neumann load `(-1)^i G_iᵀ λ_k`.
pub trait Synchronizer {
    fn name(&self) -> &'static str;

    fn synchronize(&mut self, input: &SyncInput<'_>, lambda: &mut DVector<f64>) -> Result<()>;
}

/// Inverse mass application for the forward Euler update.
#[derive(Debug, Clone)]
pub enum MassSolver {
    Consistent(BandedCholesky),
    Lumped(DVector<f64>),
}

impl MassSolver {
    pub fn new(ops: &SubdomainOperators, variant: MassVariant) -> Result<Self> {
        Ok(match variant {
            MassVariant::Consistent => MassSolver::Consistent(ops.factor_mass()?),
            MassVariant::Lumped => MassSolver::Lumped(ops.lumped.clone()),
        })
    }

    pub fn variant(&self) -> MassVariant {
        match self {
            MassSolver::Consistent(_) => MassVariant::Consistent,
            MassSolver::Lumped(_) => MassVariant::Lumped,
        }
    }

    /// `x <- M⁻¹ x`; `work` must have the length of `x`.
    pub fn apply_inverse(&self, x: &mut [f64], work: &mut [f64]) {
        match self {
            MassSolver::Consistent(chol) => chol.solve_into(x, work),
            MassSolver::Lumped(m) => x.iter_mut().zip(m.iter()).for_each(|(v, d)| *v /= d),
        }
    }
}

/// `u_{k+1} = u_k + Δt M⁻¹ (b_k + λ-load)`, where `lambda_load` is the
/// interface load `(-1)^i G_iᵀ λ_k` on the first `n_γ` free DoFs.
pub fn euler_step(
    mass: &MassSolver,
    u: &mut DVector<f64>,
    b: &DVector<f64>,
    lambda_load: &DVector<f64>,
    dt: f64,
    scratch: &mut Vec<f64>,
) {
    let n = u.len();
    scratch.resize(2 * n, 0.0);
    let (rhs, work) = scratch.split_at_mut(n);
    rhs.copy_from_slice(b.as_slice());
    for (r, l) in rhs.iter_mut().zip(lambda_load.iter()) {
        *r += l;
    }
    mass.apply_inverse(rhs, work);
    for (ui, r) in u.iter_mut().zip(rhs.iter()) {
        *ui += dt * *r;
    }
}

/// Offline data shared by every partitioned scheme on one problem instance.
pub struct CoupledProblem {
    spec: DomainSpec,
    meshes: [QuadMesh; 2],
    ops: [SubdomainOperators; 2],
    scenario: Arc<dyn Scenario>,
}

impl CoupledProblem {
    pub fn new(spec: DomainSpec, scenario: Arc<dyn Scenario>) -> Result<Self> {
        let (m1, m2) = build_meshes(spec);
        let o1 = SubdomainOperators::assemble(&m1, Some(&m2), scenario.as_ref())?;
        let o2 = SubdomainOperators::assemble(&m2, Some(&m1), scenario.as_ref())?;
        Ok(Self {
            spec,
            meshes: [m1, m2],
            ops: [o1, o2],
            scenario,
        })
    }

    /// Same meshes and operators with another scenario's data. The diffusion
    /// coefficients and velocity must agree, only sources, boundary and initial
    /// data may differ.
    pub fn with_scenario(&self, scenario: Arc<dyn Scenario>) -> Self {
        Self {
            spec: self.spec,
            meshes: self.meshes.clone(),
            ops: self.ops.clone(),
            scenario,
        }
    }

    pub fn spec(&self) -> DomainSpec {
        self.spec
    }

    pub fn mesh(&self, side: Subdomain) -> &QuadMesh {
        &self.meshes[side.index()]
    }

    pub fn ops(&self, side: Subdomain) -> &SubdomainOperators {
        &self.ops[side.index()]
    }

    pub fn scenario(&self) -> &Arc<dyn Scenario> {
        &self.scenario
    }

    pub fn n_interface(&self) -> usize {
        self.ops[0].n_interface()
    }

    pub fn build_schur(&self, variant: MassVariant) -> Result<SchurSystem> {
        build_schur(&self.ops[0], &self.ops[1], variant)
    }

    /// Initial coefficients. Projection is the L² projection onto pairs of
    /// subdomain functions that agree on the interface, computed with the
    /// consistent Schur system; it coincides with the restriction of the
    /// full-domain projection.
    pub fn initial_state(&self, method: InitMethod) -> Result<[DVector<f64>; 2]> {
        let sc = self.scenario.as_ref();
        let u0 = |s: Subdomain, x: f64, y: f64| sc.initial(s, x, y);
        match method {
            InitMethod::Interpolation => Ok([
                crate::assembly::interpolate(&self.meshes[0], &u0),
                crate::assembly::interpolate(&self.meshes[1], &u0),
            ]),
            InitMethod::Projection => {
                let r: Vec<DVector<f64>> = self
                    .ops
                    .iter()
                    .map(|ops| {
                        let g0 = ops.load.dirichlet_values(|s, x, y| sc.dirichlet(s, x, y, 0.0));
                        ops.projection_rhs(&u0, Some(&g0))
                    })
                    .collect();
                let schur = self.build_schur(MassVariant::Consistent)?;
                let lambda = schur_sync(&schur, &r[0], &r[1]);
                let mut out = [r[0].clone(), r[1].clone()];
                for side in Subdomain::BOTH {
                    let i = side.index();
                    let load = self.interface_load(side, &lambda);
                    let mass = MassSolver::new(&self.ops[i], MassVariant::Consistent)?;
                    let x = out[i].as_mut_slice();
                    for (v, l) in x.iter_mut().zip(load.iter()) {
                        *v += l;
                    }
                    let mut work = vec![0.0; x.len()];
                    mass.apply_inverse(x, &mut work);
                }
                Ok(out)
            }
        }
    }

    /// `(-1)^i G_iᵀ λ` restricted to the interface DoFs.
    pub fn interface_load(&self, side: Subdomain, lambda: &DVector<f64>) -> DVector<f64> {
        self.ops[side.index()].constraint.tr_mul(lambda) * side.sign()
    }

    /// Nodal values over all mesh nodes: free coefficients plus the Dirichlet
    /// interpolant at time `t`.
    pub fn nodal(&self, side: Subdomain, u: &DVector<f64>, t: f64) -> DVector<f64> {
        nodal_values(&self.meshes[side.index()], &self.ops[side.index()], self.scenario.as_ref(), u, t)
    }
}

pub(crate) fn nodal_values(
    mesh: &QuadMesh,
    ops: &SubdomainOperators,
    scenario: &dyn Scenario,
    u: &DVector<f64>,
    t: f64,
) -> DVector<f64> {
    let g = ops.load.dirichlet_values(|s, x, y| scenario.dirichlet(s, x, y, t));
    DVector::from_iterator(
        mesh.num_nodes(),
        (0..mesh.num_nodes()).map(|node| match mesh.dof(node) {
            crate::mesh::Dof::Free(i) => u[i],
            crate::mesh::Dof::Fixed(d) => g[d],
        }),
    )
}

/// Run options shared by the time steppers.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub dt: f64,
    pub init: InitMethod,
}

/// Summary of a finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub steps: usize,
    pub t_final: f64,
    pub u: [DVector<f64>; 2],
    /// Time spent inside synchronization calls.
    pub sync_seconds: f64,
    /// Time of the whole online loop (synchronization plus Euler updates).
    pub online_seconds: f64,
}

/// Magnitudes beyond this are treated as a blow-up even while finite, so
/// norms of the state cannot overflow.
const BLOWUP: f64 = 1e150;

fn check_finite(v: &DVector<f64>, step: usize, t: f64) -> Result<()> {
    if v.iter().all(|x| x.abs() <= BLOWUP) {
        Ok(())
    } else {
        Err(Error::Unstable { step, t })
    }
}

/// Explicit synchronous partitioned framework: at each step synchronize, then
/// advance both subdomains with forward Euler using `variant` mass matrices.
pub fn run_partitioned(
    problem: &CoupledProblem,
    sync: &mut dyn Synchronizer,
    options: RunOptions,
    variant: MassVariant,
    sink: &mut dyn TrajectorySink,
) -> Result<RunOutcome> {
    if !(options.dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {}", options.dt)));
    }
    let scenario = problem.scenario.as_ref();
    let steps = step_count(scenario.final_time(), options.dt);
    let dt = options.dt;
    let n_gamma = problem.n_interface();

    let mass = [
        MassSolver::new(&problem.ops[0], variant)?,
        MassSolver::new(&problem.ops[1], variant)?,
    ];
    let [mut u1, mut u2] = problem.initial_state(options.init)?;
    let mut b = [DVector::zeros(u1.len()), DVector::zeros(u2.len())];
    let mut ku = [vec![0.0; u1.len()], vec![0.0; u2.len()]];
    let mut lambda = DVector::zeros(n_gamma);
    let mut lambda_prev = DVector::zeros(n_gamma);
    let mut load = [DVector::zeros(n_gamma), DVector::zeros(n_gamma)];
    let mut scratch = Vec::new();
    sink.initial(0.0, [&u1, &u2]);

    let mut sync_seconds = 0.0;
    let online = Instant::now();
    for k in 0..steps {
        let t = k as f64 * dt;
        for (i, u) in [&u1, &u2].into_iter().enumerate() {
            problem.ops[i].assemble_load(scenario, t, variant, &mut b[i]);
            crate::assembly::spmv(&problem.ops[i].stiffness.ff, u.as_slice(), &mut ku[i]);
            for (bi, kui) in b[i].iter_mut().zip(&ku[i]) {
                *bi -= kui;
            }
        }

        let started = Instant::now();
        sync.synchronize(
            &SyncInput {
                step: k,
                t,
                u: [&u1, &u2],
                b: [&b[0], &b[1]],
                lambda_prev: &lambda_prev,
            },
            &mut lambda,
        )?;
        sync_seconds += started.elapsed().as_secs_f64();
        check_finite(&lambda, k, t)?;

        for side in Subdomain::BOTH {
            let i = side.index();
            load[i].gemv_tr(side.sign(), &problem.ops[i].constraint, &lambda, 0.0);
        }
        euler_step(&mass[0], &mut u1, &b[0], &load[0], dt, &mut scratch);
        euler_step(&mass[1], &mut u2, &b[1], &load[1], dt, &mut scratch);
        check_finite(&u1, k, t)?;
        check_finite(&u2, k, t)?;

        sink.step(k, (k + 1) as f64 * dt, &lambda, [&u1, &u2]);
        std::mem::swap(&mut lambda, &mut lambda_prev);
    }
    let online_seconds = online.elapsed().as_secs_f64();
    Ok(RunOutcome {
        steps,
        t_final: steps as f64 * dt,
        u: [u1, u2],
        sync_seconds,
        online_seconds,
    })
}
