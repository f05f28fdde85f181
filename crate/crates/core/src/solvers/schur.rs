use nalgebra::{DMatrix, DVector};

use super::{SyncInput, Synchronizer};
use crate::assembly::{MassVariant, SubdomainOperators};
use crate::error::{Error, Result};
use crate::linalg::{spd_factor, SpdFactor};

/// Dual Schur complement `S = Σ G_i M_i⁻¹ G_iᵀ` with its Cholesky factor and
/// the precomputed `H_i = G_i M_i⁻¹`.
///
/// For the consistent variant `H_i` is `n_γ x n_free`; for the lumped variant
/// the interface block of `M_i` decouples from the interior, so only the
/// `n_γ x n_γ` interface block is kept and applied to `(b_i)_γ`.
#[derive(Debug, Clone)]
pub struct SchurSystem {
    variant: MassVariant,
    s: DMatrix<f64>,
    factor: SpdFactor,
    h: [DMatrix<f64>; 2],
}

/// Offline stage of the IVR scheme.
pub fn build_schur(
    ops_1: &SubdomainOperators,
    ops_2: &SubdomainOperators,
    variant: MassVariant,
) -> Result<SchurSystem> {
    let n = ops_1.n_interface();
    if ops_2.n_interface() != n || ops_1.constraint.shape() != (n, n) {
        return Err(Error::Layout("interface sizes of the two subdomains differ".into()));
    }
    let g = &ops_1.constraint;
    let mut h = [DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)];
    for (i, ops) in [ops_1, ops_2].into_iter().enumerate() {
        h[i] = match variant {
            MassVariant::Consistent => {
                // columns of M⁻¹ G_iᵀ, where G_iᵀ is Gᵀ padded with interior zeros
                let chol = ops.factor_mass()?;
                let nf = ops.n_free();
                let mut x = DMatrix::zeros(nf, n);
                let mut work = vec![0.0; nf];
                let mut col = vec![0.0; nf];
                for j in 0..n {
                    col.iter_mut().for_each(|v| *v = 0.0);
                    for r in 0..n {
                        col[r] = g[(j, r)];
                    }
                    chol.solve_into(&mut col, &mut work);
                    x.column_mut(j).copy_from_slice(&col);
                }
                x.transpose()
            }
            MassVariant::Lumped => {
                let mut hi = g.clone();
                for c in 0..n {
                    hi.column_mut(c).scale_mut(1.0 / ops.lumped[c]);
                }
                hi
            }
        };
    }
    let s = h[0].columns(0, n) * g.transpose() + h[1].columns(0, n) * g.transpose();
    // symmetrize the rounding so the SPD check sees an exactly symmetric matrix
    let s = (&s + s.transpose()) * 0.5;
    let factor = spd_factor(&s)?;
    Ok(SchurSystem {
        variant,
        s,
        factor,
        h,
    })
}

impl SchurSystem {
    pub fn variant(&self) -> MassVariant {
        self.variant
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn h(&self, i: usize) -> &DMatrix<f64> {
        &self.h[i]
    }

    pub fn n_interface(&self) -> usize {
        self.s.nrows()
    }

    /// Right-hand side `H_1 b_1 - H_2 b_2`.
    pub fn rhs_into(&self, b_1: &DVector<f64>, b_2: &DVector<f64>, out: &mut DVector<f64>) {
        match self.variant {
            MassVariant::Consistent => {
                out.gemv(1.0, &self.h[0], b_1, 0.0);
                out.gemv(-1.0, &self.h[1], b_2, 1.0);
            }
            MassVariant::Lumped => {
                let n = self.n_interface();
                out.gemv(1.0, &self.h[0], &b_1.rows(0, n), 0.0);
                out.gemv(-1.0, &self.h[1], &b_2.rows(0, n), 1.0);
            }
        }
    }

    /// Solve `S λ = H_1 b_1 - H_2 b_2` into `lambda`.
    pub fn sync_into(&self, b_1: &DVector<f64>, b_2: &DVector<f64>, lambda: &mut DVector<f64>) {
        self.rhs_into(b_1, b_2, lambda);
        self.factor.solve_mut(lambda);
    }

    /// Relative residual `‖S λ - rhs‖ / ‖rhs‖`.
    pub fn residual(&self, lambda: &DVector<f64>, b_1: &DVector<f64>, b_2: &DVector<f64>) -> f64 {
        let mut rhs = DVector::zeros(self.n_interface());
        self.rhs_into(b_1, b_2, &mut rhs);
        let r = &self.s * lambda - &rhs;
        let scale = rhs.norm();
        if scale == 0.0 {
            r.norm()
        } else {
            r.norm() / scale
        }
    }
}

/// Multiplier of the IVR reconstruction for the given load vectors.
pub fn schur_sync(schur: &SchurSystem, b_1: &DVector<f64>, b_2: &DVector<f64>) -> DVector<f64> {
    let mut lambda = DVector::zeros(schur.n_interface());
    schur.sync_into(b_1, b_2, &mut lambda);
    lambda
}

/// IVR(C) or IVR(L) synchronization, depending on the Schur system's variant.
#[derive(Debug, Clone)]
pub struct IvrSync {
    schur: SchurSystem,
}

impl IvrSync {
    pub fn new(schur: SchurSystem) -> Self {
        Self { schur }
    }

    pub fn schur(&self) -> &SchurSystem {
        &self.schur
    }
}

impl Synchronizer for IvrSync {
    fn name(&self) -> &'static str {
        match self.schur.variant {
            MassVariant::Consistent => "ivrc",
            MassVariant::Lumped => "ivrl",
        }
    }

    fn synchronize(&mut self, input: &SyncInput<'_>, lambda: &mut DVector<f64>) -> Result<()> {
        self.schur.sync_into(input.b[0], input.b[1], lambda);
        Ok(())
    }
}
