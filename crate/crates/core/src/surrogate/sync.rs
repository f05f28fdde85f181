use nalgebra::DVector;

use super::{DmdFluxOperator, PatchMap};
use crate::error::Result;
use crate::solvers::{SchurSystem, SyncInput, Synchronizer};

/// Choice of `λ_{-1}` for the first surrogate step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bootstrap {
    #[default]
    Zero,
    /// One IVR(C) Schur solve at `t_0`.
    Schur,
}

impl Bootstrap {
    pub fn as_str(self) -> &'static str {
        match self {
            Bootstrap::Zero => "zero",
            Bootstrap::Schur => "schur",
        }
    }
}

impl std::str::FromStr for Bootstrap {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Bootstrap::Zero),
            "schur" => Ok(Bootstrap::Schur),
            other => Err(crate::Error::Config(format!("unknown bootstrap mode '{other}'"))),
        }
    }
}

/// DMD-FS synchronization: `λ_k = A_λ (λ_{k-1}, u_{1,k}|patch, u_{2,k}|patch)`.
pub struct DmdSync {
    op: DmdFluxOperator,
    patches: PatchMap,
    start: Option<SchurSystem>,
    state: Vec<f64>,
    work: DVector<f64>,
}

impl DmdSync {
    /// `schur` is required for [`Bootstrap::Schur`] and ignored otherwise.
    pub fn new(op: DmdFluxOperator, patches: PatchMap, bootstrap: Bootstrap, schur: Option<SchurSystem>) -> Result<Self> {
        op.layout().check(&patches.layout())?;
        let start = match bootstrap {
            Bootstrap::Zero => None,
            Bootstrap::Schur => Some(schur.ok_or_else(|| {
                crate::Error::InvalidArgument("Schur bootstrap needs the consistent Schur system".into())
            })?),
        };
        let n = op.layout().n_fs();
        let rank = op.rank();
        Ok(Self {
            op,
            patches,
            start,
            state: vec![0.0; n],
            work: DVector::zeros(rank),
        })
    }

    pub fn operator(&self) -> &DmdFluxOperator {
        &self.op
    }
}

impl Synchronizer for DmdSync {
    fn name(&self) -> &'static str {
        "dmdfs"
    }

    fn synchronize(&mut self, input: &SyncInput<'_>, lambda: &mut DVector<f64>) -> Result<()> {
        match (&self.start, input.step) {
            (Some(schur), 0) => {
                let mut first = DVector::zeros(schur.n_interface());
                schur.sync_into(input.b[0], input.b[1], &mut first);
                self.patches.gather(first.as_slice(), input.u, &mut self.state);
            }
            _ => self.patches.gather(input.lambda_prev.as_slice(), input.u, &mut self.state),
        }
        self.op.apply_into(&self.state, &mut self.work, lambda)
    }
}
