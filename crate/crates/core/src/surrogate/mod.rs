//! DMD flux surrogate: staggered interface states, snapshot sets, the
//! row-truncated DMD operator, its use as a synchronization operator, and
//! parametric interpolation of operators (rKOI).
//!
//! The staggered state paired with step `k` is
//! `y_{k-1} = (λ_{k-1}, u_{1,k}|patch, u_{2,k}|patch)`; the flux operator maps
//! it to `λ_k`.

mod operator;
mod rkoi;
mod snapshots;
mod sync;

pub use operator::{train_flux_operator, DmdFluxOperator, OperatorRepr};
pub use rkoi::{lagrange_weights, rkoi, ParameterGrid, RkoiOptions};
pub use snapshots::{
    collect_snapshots, simulate_training, Provenance, SnapshotSet, StaggeredRecorder, TrainingOptions,
};
pub use sync::{Bootstrap, DmdSync};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mesh::{DomainSpec, QuadMesh, Subdomain};
use crate::solvers::CoupledProblem;

/// Shape of a staggered state: `n_γ` multiplier entries followed by two
/// patches of `K` grid lines with `n_γ` nodes each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateLayout {
    pub n_gamma: usize,
    pub k_patch: usize,
    pub grid_n: usize,
}

impl StateLayout {
    pub fn new(spec: DomainSpec, k_patch: usize) -> Result<Self> {
        if k_patch == 0 || k_patch > spec.n() / 2 {
            return Err(Error::Layout(format!(
                "patch size {k_patch} must lie in 1..={} for N = {}",
                spec.n() / 2,
                spec.n()
            )));
        }
        Ok(Self {
            n_gamma: spec.n_interface(),
            k_patch,
            grid_n: spec.n(),
        })
    }

    /// Length of one patch, `K n_γ`.
    pub fn patch_len(&self) -> usize {
        self.k_patch * self.n_gamma
    }

    /// `N_FS = (2K + 1) n_γ`.
    pub fn n_fs(&self) -> usize {
        (2 * self.k_patch + 1) * self.n_gamma
    }

    pub fn check(&self, other: &StateLayout) -> Result<()> {
        if self != other {
            return Err(Error::Layout(format!(
                "layout (n_γ={}, K={}, N={}) does not match (n_γ={}, K={}, N={})",
                self.n_gamma, self.k_patch, self.grid_n, other.n_gamma, other.k_patch, other.grid_n
            )));
        }
        Ok(())
    }
}

/// A staggered state `(λ_prev, p_1, p_2)` stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredState {
    layout: StateLayout,
    data: DVector<f64>,
}

impl StaggeredState {
    pub fn assemble(layout: StateLayout, lambda_prev: &[f64], p_1: &[f64], p_2: &[f64]) -> Result<Self> {
        if lambda_prev.len() != layout.n_gamma || p_1.len() != layout.patch_len() || p_2.len() != layout.patch_len()
        {
            return Err(Error::Layout(format!(
                "state parts of lengths ({}, {}, {}) do not fit n_γ={} and K={}",
                lambda_prev.len(),
                p_1.len(),
                p_2.len(),
                layout.n_gamma,
                layout.k_patch
            )));
        }
        let data = DVector::from_iterator(
            layout.n_fs(),
            lambda_prev.iter().chain(p_1).chain(p_2).copied(),
        );
        Ok(Self { layout, data })
    }

    pub fn from_vector(layout: StateLayout, data: DVector<f64>) -> Result<Self> {
        if data.len() != layout.n_fs() {
            return Err(Error::Layout(format!(
                "state of length {} does not match N_FS = {}",
                data.len(),
                layout.n_fs()
            )));
        }
        Ok(Self { layout, data })
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.data.as_slice()[..self.layout.n_gamma]
    }

    pub fn patch(&self, side: Subdomain) -> &[f64] {
        let start = self.layout.n_gamma + side.index() * self.layout.patch_len();
        &self.data.as_slice()[start..start + self.layout.patch_len()]
    }

    /// `(λ_prev, p_1, p_2)`.
    pub fn disassemble(&self) -> (&[f64], &[f64], &[f64]) {
        (self.lambda(), self.patch(Subdomain::Left), self.patch(Subdomain::Right))
    }
}

/// Free-DoF indices of the interface patches of both subdomains.
#[derive(Debug, Clone)]
pub struct PatchMap {
    layout: StateLayout,
    indices: [Vec<usize>; 2],
}

impl PatchMap {
    pub fn new(meshes: [&QuadMesh; 2], k_patch: usize) -> Result<Self> {
        let layout = StateLayout::new(meshes[0].spec(), k_patch)?;
        let indices = [meshes[0].patch_indices(k_patch)?, meshes[1].patch_indices(k_patch)?];
        Ok(Self { layout, indices })
    }

    pub fn for_problem(problem: &CoupledProblem, k_patch: usize) -> Result<Self> {
        Self::new(
            [problem.mesh(Subdomain::Left), problem.mesh(Subdomain::Right)],
            k_patch,
        )
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn indices(&self, side: Subdomain) -> &[usize] {
        &self.indices[side.index()]
    }

    /// Write `(λ, u_1|patch, u_2|patch)` into `out` (length `N_FS`).
    pub fn gather(&self, lambda: &[f64], u: [&DVector<f64>; 2], out: &mut [f64]) {
        let n = self.layout.n_gamma;
        out[..n].copy_from_slice(lambda);
        let mut pos = n;
        for (idx, ui) in self.indices.iter().zip(u) {
            for &j in idx {
                out[pos] = ui[j];
                pos += 1;
            }
        }
    }

    pub fn state(&self, lambda: &DVector<f64>, u: [&DVector<f64>; 2]) -> StaggeredState {
        let mut data = DVector::zeros(self.layout.n_fs());
        self.gather(lambda.as_slice(), u, data.as_mut_slice());
        StaggeredState {
            layout: self.layout,
            data,
        }
    }
}
