//! Dense kernels (thin SVD, energy-based rank selection, Cholesky) and a
//! banded Cholesky for the Q1 mass matrices.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};

/// Thin singular value decomposition `A = U diag(σ) Vᵀ`, `σ` nonincreasing.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

const SVD_MAX_ITER: usize = 100_000;

fn svd_square(a: DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (rows, cols) = a.shape();
    let svd = a
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(Error::SvdNoConvergence { rows, cols })?;
    let u = svd.u.ok_or(Error::SvdNoConvergence { rows, cols })?;
    let vt = svd.v_t.ok_or(Error::SvdNoConvergence { rows, cols })?;
    Ok((u, svd.singular_values, vt.transpose()))
}

/// Thin SVD of an arbitrary finite matrix.
///
/// The matrix is first reduced to its square triangular factor by a
/// Householder QR of whichever orientation is tall, so the iterative part only
/// ever sees a `min(m, n)` square matrix. Snapshot matrices here are very wide.
pub fn thin_svd(a: &DMatrix<f64>) -> Result<ThinSvd> {
    let (m, n) = a.shape();
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("thin_svd: non-finite entry".into()));
    }
    if m == 0 || n == 0 {
        return Ok(ThinSvd {
            u: DMatrix::zeros(m, 0),
            sigma: DVector::zeros(0),
            v: DMatrix::zeros(n, 0),
        });
    }

    let (u, sigma, v) = if m >= n {
        // A = Q R, R = U' Σ Vᵀ  =>  U = Q U'
        let qr = a.clone().qr();
        let (q, r) = (qr.q(), qr.r());
        let (ur, s, vr) = svd_square(r)?;
        (q * ur, s, vr)
    } else {
        // Aᵀ = Q R, Rᵀ = U Σ Wᵀ  =>  V = Q W
        let qr = a.transpose().qr();
        let (q, r) = (qr.q(), qr.r());
        let (ur, s, wr) = svd_square(r.transpose())?;
        (ur, s, q * wr)
    };

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    let k = order.len();
    let mut su = DMatrix::zeros(u.nrows(), k);
    let mut sv = DMatrix::zeros(v.nrows(), k);
    let mut ss = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        su.set_column(dst, &u.column(src));
        sv.set_column(dst, &v.column(src));
        ss[dst] = sigma[src].max(0.0);
    }
    Ok(ThinSvd {
        u: su,
        sigma: ss,
        v: sv,
    })
}

/// Relative energy left out by the leading `k` singular values,
/// `1 - Σ_{i≤k} σ_i² / Σ_i σ_i²`, computed from the tail to avoid cancellation.
pub fn energy_deficit(sigma: &[f64], k: usize) -> f64 {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    let tail: f64 = sigma[k.min(sigma.len())..].iter().rev().map(|s| s * s).sum();
    tail / total
}

/// Smallest positive `k` whose energy deficit is at most `eps`.
pub fn select_rank(sigma: &[f64], eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "energy tolerance must lie in (0, 1), got {eps}"
        )));
    }
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument(
            "select_rank: all singular values are zero".into(),
        ));
    }
    // tails[k] = Σ_{i≥k} σ_i²
    let mut tails = vec![0.0; sigma.len() + 1];
    for i in (0..sigma.len()).rev() {
        tails[i] = tails[i + 1] + sigma[i] * sigma[i];
    }
    let k = (1..=sigma.len())
        .find(|&k| tails[k] / total <= eps)
        .unwrap_or(sigma.len());
    Ok(k)
}

/// Dense Cholesky factor `S = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

/// Asserts symmetry to `1e-12` relative and factors.
pub fn spd_factor(s: &DMatrix<f64>) -> Result<SpdFactor> {
    if !s.is_square() {
        return Err(Error::NotSpd(format!("{}x{} is not square", s.nrows(), s.ncols())));
    }
    let scale = s.amax();
    let asym = (s - s.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::NotSpd(format!(
            "asymmetry {asym:.3e} exceeds 1e-12 relative"
        )));
    }
    let chol = nalgebra::Cholesky::new(s.clone())
        .ok_or_else(|| Error::NotSpd("non-positive pivot".into()))?;
    Ok(SpdFactor { chol })
}

impl SpdFactor {
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn solve_mut(&self, rhs: &mut DVector<f64>) {
        self.chol.solve_mut(rhs)
    }
}

pub fn spd_solve(factor: &SpdFactor, rhs: &DVector<f64>) -> DVector<f64> {
    factor.solve(rhs)
}

/// Banded Cholesky factor of a sparse SPD matrix under a symmetric
/// permutation `P A Pᵀ`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// Row-major lower band; row `i` holds columns `i-bw ..= i`.
    band: Vec<f64>,
    /// Band position of each original index.
    pos: Vec<usize>,
}

impl BandedCholesky {
    /// Factor `a` reordered so that original index `r` sits at `pos[r]`.
    pub fn factor(a: &CsrMatrix<f64>, pos: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || pos.len() != n {
            return Err(Error::NotSpd("banded factor: shape mismatch".into()));
        }
        let mut bw = 0;
        for (r, c, _) in a.triplet_iter() {
            bw = bw.max(pos[r].abs_diff(pos[c]));
        }
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for (r, c, &v) in a.triplet_iter() {
            let (i, j) = (pos[r], pos[c]);
            if j <= i {
                band[i * w + (j + bw - i)] += v;
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = band[i * w + (j + bw - i)];
                for k in k0..j {
                    s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NotSpd(format!("non-positive pivot at row {i}")));
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band, pos })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Solve in place; `work` must have length `dim()`.
    pub fn solve_into(&self, rhs: &mut [f64], work: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for (r, &p) in self.pos.iter().enumerate() {
            work[p] = rhs[r];
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let row = &self.band[i * w..(i + 1) * w];
            let mut s = work[i];
            for j in j0..i {
                s -= row[j + bw - i] * work[j];
            }
            work[i] = s / row[bw];
        }
        for i in (0..n).rev() {
            let mut s = work[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.band[k * w + (i + bw - k)] * work[k];
            }
            work[i] = s / self.band[i * w + bw];
        }
        for (r, &p) in self.pos.iter().enumerate() {
            rhs[r] = work[p];
        }
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = rhs.clone();
        let mut work = vec![0.0; self.n];
        self.solve_into(x.as_mut_slice(), &mut work);
        x
    }
}
