use nalgebra::DMatrix;

use super::{DmdFluxOperator, OperatorRepr};
use crate::error::{Error, Result};

/// Tensor grid of parameter samples `κ1 x κ2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    pub kappa_1: Vec<f64>,
    pub kappa_2: Vec<f64>,
}

impl ParameterGrid {
    /// Both axes strictly increasing and positive.
    pub fn new(mut kappa_1: Vec<f64>, mut kappa_2: Vec<f64>) -> Result<Self> {
        for axis in [&mut kappa_1, &mut kappa_2] {
            axis.sort_by(f64::total_cmp);
            if axis.is_empty() || axis.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
                return Err(Error::InvalidArgument(
                    "parameter axes need at least one positive value".into(),
                ));
            }
            if axis.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument("parameter axis has repeated values".into()));
            }
        }
        Ok(Self { kappa_1, kappa_2 })
    }

    /// The four corners of `[lo_1, hi_1] x [lo_2, hi_2]`.
    pub fn corners(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        if !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(Error::InvalidArgument(format!(
                "parameter box bounds {lo:?} and {hi:?} are not ordered"
            )));
        }
        Self::new(vec![lo[0], hi[0]], vec![lo[1], hi[1]])
    }

    /// Samples in row-major order over `(κ1, κ2)`.
    pub fn points(&self) -> Vec<[f64; 2]> {
        self.kappa_1
            .iter()
            .flat_map(|&a| self.kappa_2.iter().map(move |&b| [a, b]))
            .collect()
    }

    pub fn contains(&self, mu: [f64; 2]) -> bool {
        let inside = |axis: &[f64], x: f64| {
            let (lo, hi) = (axis[0], axis[axis.len() - 1]);
            let tol = 1e-12 * hi.abs();
            x >= lo - tol && x <= hi + tol
        };
        inside(&self.kappa_1, mu[0]) && inside(&self.kappa_2, mu[1])
    }
}

/// Values at `x` of the Lagrange basis polynomials of the nodes `axis`.
pub fn lagrange_weights(axis: &[f64], x: f64) -> Vec<f64> {
    (0..axis.len())
        .map(|i| {
            axis.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| (x - xj) / (axis[i] - xj))
                .product()
        })
        .collect()
}

/// Sample selection for the interpolation.
#[derive(Debug, Clone, Copy, Default)]
pub struct RkoiOptions {
    /// Keep only samples within this distance of the query; `None` keeps all.
    /// The kept samples must still form a tensor grid.
    pub radius: Option<f64>,
}

/// Interpolated flux operator `A_λ(μ) = Σ_j ℓ_j(μ) A_λ(μ_j)`, stored densely.
///
/// The samples are the operators' parameter tags and must form a complete
/// tensor grid. Queries outside the grid's hull are rejected.
pub fn rkoi(operators: &[DmdFluxOperator], mu: [f64; 2], options: RkoiOptions) -> Result<DmdFluxOperator> {
    let first = operators
        .first()
        .ok_or_else(|| Error::EmptyTraining("no operators to interpolate".into()))?;
    let layout = first.layout();
    for op in operators {
        layout.check(&op.layout())?;
    }
    let selected: Vec<&DmdFluxOperator> = match options.radius {
        None => operators.iter().collect(),
        Some(r) => operators
            .iter()
            .filter(|op| {
                let d = [op.mu()[0] - mu[0], op.mu()[1] - mu[1]];
                d[0].hypot(d[1]) <= r
            })
            .collect(),
    };
    if selected.is_empty() {
        return Err(Error::OutsideHull { mu });
    }
    let axis = |c: usize| {
        let mut v: Vec<f64> = selected.iter().map(|op| op.mu()[c]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let grid = ParameterGrid::new(axis(0), axis(1))?;
    if selected.len() != grid.kappa_1.len() * grid.kappa_2.len() {
        return Err(Error::InvalidArgument(format!(
            "{} operator samples do not form a {}x{} tensor grid",
            selected.len(),
            grid.kappa_1.len(),
            grid.kappa_2.len()
        )));
    }
    if !grid.contains(mu) {
        return Err(Error::OutsideHull { mu });
    }
    let w1 = lagrange_weights(&grid.kappa_1, mu[0]);
    let w2 = lagrange_weights(&grid.kappa_2, mu[1]);

    let mut a = DMatrix::zeros(layout.n_gamma, layout.n_fs());
    let mut seen = vec![false; selected.len()];
    let mut total = 0.0;
    for op in &selected {
        let i = grid.kappa_1.iter().position(|&k| k == op.mu()[0]).unwrap_or(usize::MAX);
        let j = grid.kappa_2.iter().position(|&k| k == op.mu()[1]).unwrap_or(usize::MAX);
        let slot = i * grid.kappa_2.len() + j;
        if seen[slot] {
            return Err(Error::InvalidArgument(format!("duplicate operator sample at {:?}", op.mu())));
        }
        seen[slot] = true;
        let w = w1[i] * w2[j];
        total += w;
        if w != 0.0 {
            a += op.to_dense() * w;
        }
    }
    debug_assert!((total - 1.0).abs() <= 1e-14);

    let rank = selected.iter().map(|op| op.rank()).sum::<usize>().min(layout.n_gamma);
    let eps = selected.iter().map(|op| op.eps()).fold(0.0, f64::max);
    DmdFluxOperator::new(layout, mu, eps, rank, OperatorRepr::Dense(a))
}
