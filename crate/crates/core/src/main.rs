use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use partflux::cli::{self, RunConfig};
use partflux::Result;

#[derive(Parser)]
#[command(name = "partflux", version, about = "Partitioned advection-diffusion solvers and DMD flux surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train flux operators for each parameter sample and write a manifest.
    Train(Opts),
    /// Run the configured scheme and write the solution and multipliers.
    Solve(Opts),
    /// Compare every scheme against the monolithic benchmark.
    Compare(Opts),
    /// Time the synchronization step of the partitioned schemes.
    Bench(Opts),
}

/// Flags mirror the config keys and override values from `--config`.
#[derive(Args)]
struct Opts {
    /// `key = value` configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<String>,
    /// patch | combination
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    mu1: Option<String>,
    #[arg(long)]
    mu2: Option<String>,
    /// monolithic | ivrc | ivrl | dmdfs
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    patch: Option<String>,
    /// Lower parameter corner, `a,b`.
    #[arg(long = "corner-lo", allow_hyphen_values = true)]
    corner_lo: Option<String>,
    /// Upper parameter corner, `a,b`.
    #[arg(long = "corner-hi", allow_hyphen_values = true)]
    corner_hi: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    /// zero | schur
    #[arg(long)]
    bootstrap: Option<String>,
    /// projection | interpolation
    #[arg(long)]
    init: Option<String>,
    #[arg(short, long)]
    output: Option<String>,
    #[arg(long)]
    operators: Option<String>,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

impl Opts {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("n", &self.n),
            ("scenario", &self.scenario),
            ("mu1", &self.mu1),
            ("mu2", &self.mu2),
            ("scheme", &self.scheme),
            ("dt", &self.dt),
            ("eps", &self.eps),
            ("patch", &self.patch),
            ("corner_lo", &self.corner_lo),
            ("corner_hi", &self.corner_hi),
            ("radius", &self.radius),
            ("bootstrap", &self.bootstrap),
            ("init", &self.init),
            ("output", &self.output),
            ("operators", &self.operators),
            ("runs", &self.runs),
            ("seed", &self.seed),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train(o) => {
            let cfg = o.config()?;
            for e in cli::train(&cfg)? {
                println!("{} mu=({:e}, {:e}) rank={} eps={:e}", e.file, e.mu[0], e.mu[1], e.rank, e.eps);
            }
        }
        Command::Solve(o) => {
            let cfg = o.config()?;
            let report = cli::solve(&cfg)?;
            println!(
                "{} steps={} online={:.6e}s sync={:.6e}s",
                report.run.scheme.as_str(),
                report.run.steps,
                report.run.online_seconds,
                report.run.sync_seconds
            );
            for f in report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Compare(o) => {
            println!("{}", cli::COMPARE_HEADER);
            for row in cli::compare(&o.config()?)? {
                println!("{}", row.csv());
            }
        }
        Command::Bench(o) => {
            println!("{}", cli::BENCH_HEADER);
            for row in cli::bench(&o.config()?)? {
                println!("{}", row.csv());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::FAILURE
        }
    }
}
