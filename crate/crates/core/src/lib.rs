//! Partitioned solvers for a two-subdomain advection-diffusion transmission
//! problem: a monolithic reference, Schur-complement interface reconstruction
//! with consistent or lumped mass, and a data-driven DMD flux surrogate.

pub mod assembly;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod scenarios;
pub mod solvers;
pub mod surrogate;

pub use error::{Error, Result};
