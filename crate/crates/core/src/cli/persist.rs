//! Binary operator files.
//!
//! Layout, little-endian: `"DMDF"`, version `u32`, payload kind `u32`
//! (1 factored, 2 dense), `n_γ, N_FS, k, K, N` as `u32`, `μ_1, μ_2, ε` as
//! `f64`, the column-major `f64` payload (`P` then `Q` when factored), then
//! the FNV-1a 64 hash of every preceding byte.

use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::DomainSpec;
use crate::surrogate::{DmdFluxOperator, OperatorRepr, StateLayout};

pub const MAGIC: [u8; 4] = *b"DMDF";
pub const FORMAT_VERSION: u32 = 1;
const KIND_FACTORED: u32 = 1;
const KIND_DENSE: u32 = 2;
/// Magic, version, kind, five sizes and three floats.
const HEADER_LEN: usize = 4 + 4 * 7 + 8 * 3;

fn checksum(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_matrix(out: &mut Vec<u8>, m: &DMatrix<f64>) {
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serialized form of `op`.
pub fn operator_to_bytes(op: &DmdFluxOperator) -> Vec<u8> {
    let layout = op.layout();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * op.apply_cost() + 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let kind = if op.is_factored() { KIND_FACTORED } else { KIND_DENSE };
    out.extend_from_slice(&kind.to_le_bytes());
    for v in [layout.n_gamma, layout.n_fs(), op.rank(), layout.k_patch, layout.grid_n] {
        put_u32(&mut out, v);
    }
    for v in [op.mu()[0], op.mu()[1], op.eps()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    match op.repr() {
        OperatorRepr::Factored { p, q } => {
            put_matrix(&mut out, p);
            put_matrix(&mut out, q);
        }
        OperatorRepr::Dense(a) => put_matrix(&mut out, a),
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const L: usize>(&mut self) -> Result<[u8; L]> {
        let end = self.pos + L;
        let chunk = self.bytes.get(self.pos..end).ok_or(Error::Truncated)?;
        self.pos = end;
        Ok(chunk.try_into().expect("chunk length"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Ok(DMatrix::from_vec(rows, cols, data))
    }
}

/// Parse an operator file image. The checksum is verified before any payload
/// is decoded.
pub fn operator_from_bytes(bytes: &[u8]) -> Result<DmdFluxOperator> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take::<4>().map_err(|_| Error::BadMagic)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::BadVersion(version));
    }
    let kind = r.u32()?;
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let [n_gamma, n_fs, rank, k_patch, grid_n] = dims;
    let payload = match kind {
        KIND_FACTORED => rank.checked_mul(n_gamma + n_fs),
        KIND_DENSE => n_gamma.checked_mul(n_fs),
        other => return Err(Error::Layout(format!("unknown payload kind {other}"))),
    }
    .and_then(|v| v.checked_mul(8))
    .ok_or(Error::Truncated)?;
    let body_end = HEADER_LEN.checked_add(payload).ok_or(Error::Truncated)?;
    if bytes.len() < body_end + 8 {
        return Err(Error::Truncated);
    }
    let stored = u64::from_le_bytes(bytes[body_end..body_end + 8].try_into().expect("8 bytes"));
    if bytes.len() != body_end + 8 || stored != checksum(&bytes[..body_end]) {
        return Err(Error::Checksum);
    }

    let layout = StateLayout::new(DomainSpec::new(grid_n)?, k_patch)?;
    if layout.n_gamma != n_gamma || layout.n_fs() != n_fs {
        return Err(Error::Layout(format!(
            "header sizes n_γ={n_gamma}, N_FS={n_fs} do not match N={grid_n}, K={k_patch}"
        )));
    }
    let mu = [r.f64()?, r.f64()?];
    let eps = r.f64()?;
    let repr = if kind == KIND_FACTORED {
        let p = r.matrix(n_gamma, rank)?;
        let q = r.matrix(rank, n_fs)?;
        OperatorRepr::Factored { p, q }
    } else {
        OperatorRepr::Dense(r.matrix(n_gamma, n_fs)?)
    };
    DmdFluxOperator::new(layout, mu, eps, rank, repr)
}

pub fn save_operator(op: &DmdFluxOperator, path: &Path) -> Result<()> {
    std::fs::write(path, operator_to_bytes(op)).map_err(|e| Error::io(path, e))
}

pub fn load_operator(path: &Path) -> Result<DmdFluxOperator> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    operator_from_bytes(&bytes)
}
