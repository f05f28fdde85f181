use nalgebra::{DMatrix, DVector, DVectorView};

use super::{SnapshotSet, StateLayout};
use crate::error::{Error, Result};
use crate::linalg::{select_rank, thin_svd};

/// Singular values below this fraction of the largest are treated as zero.
const PINV_RTOL: f64 = 1e-14;

/// Storage of `A_λ`.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorRepr {
    /// `A_λ = P Q` with `P: n_γ x k`, `Q: k x N_FS`.
    Factored { p: DMatrix<f64>, q: DMatrix<f64> },
    Dense(DMatrix<f64>),
}

/// Row-truncated DMD operator `A_λ: y_{k-1} ↦ λ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DmdFluxOperator {
    layout: StateLayout,
    mu: [f64; 2],
    eps: f64,
    rank: usize,
    repr: OperatorRepr,
}

impl DmdFluxOperator {
    pub fn new(layout: StateLayout, mu: [f64; 2], eps: f64, rank: usize, repr: OperatorRepr) -> Result<Self> {
        let (rows, cols) = match &repr {
            OperatorRepr::Factored { p, q } => {
                if p.ncols() != rank || q.nrows() != rank {
                    return Err(Error::Layout(format!(
                        "factors {}x{} and {}x{} do not share rank {rank}",
                        p.nrows(),
                        p.ncols(),
                        q.nrows(),
                        q.ncols()
                    )));
                }
                (p.nrows(), q.ncols())
            }
            OperatorRepr::Dense(a) => a.shape(),
        };
        if rows != layout.n_gamma || cols != layout.n_fs() {
            return Err(Error::Layout(format!(
                "operator is {rows}x{cols}, layout needs {}x{}",
                layout.n_gamma,
                layout.n_fs()
            )));
        }
        if rank == 0 {
            return Err(Error::Layout("operator rank must be positive".into()));
        }
        Ok(Self {
            layout,
            mu,
            eps,
            rank,
            repr,
        })
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn mu(&self) -> [f64; 2] {
        self.mu
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn repr(&self) -> &OperatorRepr {
        &self.repr
    }

    pub fn is_factored(&self) -> bool {
        matches!(self.repr, OperatorRepr::Factored { .. })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.repr {
            OperatorRepr::Factored { p, q } => p * q,
            OperatorRepr::Dense(a) => a.clone(),
        }
    }

    /// Same operator stored densely.
    pub fn densified(&self) -> Self {
        Self {
            repr: OperatorRepr::Dense(self.to_dense()),
            ..self.clone()
        }
    }

    /// `out = A_λ y`; `work` holds the rank-sized intermediate of the
    /// factored form.
    pub fn apply_into(&self, y: &[f64], work: &mut DVector<f64>, out: &mut DVector<f64>) -> Result<()> {
        if y.len() != self.layout.n_fs() || out.len() != self.layout.n_gamma {
            return Err(Error::Layout(format!(
                "input of length {} / output of length {} do not match N_FS = {}, n_γ = {}",
                y.len(),
                out.len(),
                self.layout.n_fs(),
                self.layout.n_gamma
            )));
        }
        let y = DVectorView::from_slice(y, y.len());
        match &self.repr {
            OperatorRepr::Factored { p, q } => {
                if work.len() != self.rank {
                    *work = DVector::zeros(self.rank);
                }
                work.gemv(1.0, q, &y, 0.0);
                out.gemv(1.0, p, &*work, 0.0);
            }
            OperatorRepr::Dense(a) => out.gemv(1.0, a, &y, 0.0),
        }
        Ok(())
    }

    pub fn apply(&self, y: &[f64]) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.layout.n_gamma);
        self.apply_into(y, &mut DVector::zeros(self.rank), &mut out)?;
        Ok(out)
    }

    /// Open-loop fit on recorded pairs: for each column `j`, the relative ℓ²
    /// error of `A_λ y_j` against the multiplier block of `y'_j` (absolute
    /// when that block is zero).
    pub fn replay_errors(&self, snap: &SnapshotSet) -> Result<Vec<f64>> {
        self.layout.check(&snap.layout())?;
        let n = self.layout.n_gamma;
        let mut work = DVector::zeros(self.rank);
        let mut out = DVector::zeros(n);
        (0..snap.columns())
            .map(|j| {
                let (y, next) = snap.pair(j);
                self.apply_into(y, &mut work, &mut out)?;
                let target = DVectorView::from_slice(&next[..n], n);
                let scale = target.norm();
                let diff = (&out - target).norm();
                Ok(if scale > 0.0 { diff / scale } else { diff })
            })
            .collect()
    }

    /// Multiply-adds of one application.
    pub fn apply_cost(&self) -> usize {
        match &self.repr {
            OperatorRepr::Factored { p, q } => q.len() + p.len(),
            OperatorRepr::Dense(a) => a.len(),
        }
    }
}

/// DMD on the snapshot pairs with energy truncation, keeping only the
/// multiplier rows: `P = Y'_λ V_k Σ_k⁻¹`, `Q = U_kᵀ`.
///
/// The rank is the energy-selected one, capped at the numerical rank of `Y`.
pub fn train_flux_operator(snap: &SnapshotSet, eps: f64, mu: [f64; 2]) -> Result<DmdFluxOperator> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "energy tolerance must lie in (0, 1), got {eps}"
        )));
    }
    let layout = snap.layout();
    if snap.columns() == 0 {
        return Err(Error::EmptyTraining("snapshot set has no columns".into()));
    }
    let y = snap.y();
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::EmptyTraining("all snapshots are zero".into()));
    }
    let svd = thin_svd(&y)?;
    drop(y);
    let sigma = svd.sigma.as_slice();
    let numerical = sigma.iter().take_while(|&&s| s > PINV_RTOL * sigma[0]).count();
    let k = select_rank(sigma, eps)?.min(numerical).max(1);

    let n = layout.n_gamma;
    let y_next = snap.y_next();
    let y_lambda = y_next.rows(0, n);
    let mut vk = svd.v.columns(0, k).into_owned();
    for j in 0..k {
        vk.column_mut(j).scale_mut(1.0 / sigma[j]);
    }
    let p = y_lambda * vk;
    let q = svd.u.columns(0, k).transpose();
    DmdFluxOperator::new(layout, mu, eps, k, OperatorRepr::Factored { p, q })
}
