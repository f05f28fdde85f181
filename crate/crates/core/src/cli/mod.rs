//! Experiment driver behind the `partflux` binary: configuration files,
//! operator persistence, and the `train`, `solve`, `compare` and `bench`
//! commands.

mod config;
mod persist;
mod run;

pub use config::{default_eps, RunConfig, Scheme};
pub use persist::{load_operator, operator_from_bytes, operator_to_bytes, save_operator, FORMAT_VERSION, MAGIC};
pub use run::{
    bench, compare, median, read_manifest, solve, train, write_manifest, BenchRow, CompareRow, Experiment,
    ManifestEntry, SchemeRun, SolveReport, BENCH_HEADER, COMPARE_HEADER, MANIFEST,
};
