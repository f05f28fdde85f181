use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::assembly::InitMethod;
use crate::error::{Error, Result};
use crate::mesh::DomainSpec;
use crate::scenarios::ScenarioKind;
use crate::solvers::{default_dt, RunOptions};
use crate::surrogate::{Bootstrap, ParameterGrid, RkoiOptions};

/// Time integration scheme of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Monolithic,
    Ivrc,
    Ivrl,
    Dmdfs,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Monolithic, Scheme::Ivrc, Scheme::Ivrl, Scheme::Dmdfs];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Monolithic => "monolithic",
            Scheme::Ivrc => "ivrc",
            Scheme::Ivrl => "ivrl",
            Scheme::Dmdfs => "dmdfs",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

/// Energy tolerance used for each grid when none is configured.
pub fn default_eps(scenario: ScenarioKind, n: usize) -> Option<f64> {
    match (scenario, n) {
        (ScenarioKind::Patch, 16) => Some(1e-8),
        (ScenarioKind::Patch, 32) => Some(1e-11),
        (ScenarioKind::Patch, 64) => Some(1e-13),
        (ScenarioKind::Patch, 128) => Some(1e-15),
        (ScenarioKind::Combination, 16 | 32 | 64) => Some(1e-8),
        (ScenarioKind::Combination, 128) => Some(1e-9),
        _ => None,
    }
}

/// Settings of one CLI invocation. Keys of the text form match the field
/// names; `mu` is written as `mu1`/`mu2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub scenario: ScenarioKind,
    /// Diffusion coefficients of the run; also the rKOI query.
    pub mu: [f64; 2],
    pub scheme: Scheme,
    pub dt: Option<f64>,
    pub eps: Option<f64>,
    pub patch: usize,
    pub corner_lo: Option<[f64; 2]>,
    pub corner_hi: Option<[f64; 2]>,
    pub radius: Option<f64>,
    pub bootstrap: Bootstrap,
    pub init: InitMethod,
    pub output: PathBuf,
    /// Directory holding trained operators and their manifest; defaults to
    /// `output`.
    pub operators: Option<PathBuf>,
    /// Repetitions of timed online loops.
    pub runs: usize,
    /// Reserved; the numerics are deterministic.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 32,
            scenario: ScenarioKind::Patch,
            mu: [1e-3, 1e-3],
            scheme: Scheme::Ivrc,
            dt: None,
            eps: None,
            patch: 2,
            corner_lo: None,
            corner_hi: None,
            radius: None,
            bootstrap: Bootstrap::Zero,
            init: InitMethod::Projection,
            output: PathBuf::from("out"),
            operators: None,
            runs: 3,
            seed: 0,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: '{value}' is not a number")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: '{value}' is not a non-negative integer")))
}

fn parse_pair(key: &str, value: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok([parse_f64(key, a)?, parse_f64(key, b)?]),
        _ => Err(Error::Config(format!("{key}: expected two comma-separated numbers, got '{value}'"))),
    }
}

impl RunConfig {
    pub const KEYS: [&'static str; 17] = [
        "n",
        "scenario",
        "mu1",
        "mu2",
        "scheme",
        "dt",
        "eps",
        "patch",
        "corner_lo",
        "corner_hi",
        "radius",
        "bootstrap",
        "init",
        "output",
        "operators",
        "runs",
        "seed",
    ];

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "n" => self.n = parse_usize(key, value)?,
            "scenario" => self.scenario = value.parse()?,
            "mu1" => self.mu[0] = parse_f64(key, value)?,
            "mu2" => self.mu[1] = parse_f64(key, value)?,
            "scheme" => self.scheme = value.parse()?,
            "dt" => self.dt = Some(parse_f64(key, value)?),
            "eps" => self.eps = Some(parse_f64(key, value)?),
            "patch" => self.patch = parse_usize(key, value)?,
            "corner_lo" => self.corner_lo = Some(parse_pair(key, value)?),
            "corner_hi" => self.corner_hi = Some(parse_pair(key, value)?),
            "radius" => self.radius = Some(parse_f64(key, value)?),
            "bootstrap" => self.bootstrap = value.parse()?,
            "init" => {
                self.init = match value {
                    "projection" => InitMethod::Projection,
                    "interpolation" => InitMethod::Interpolation,
                    other => return Err(Error::Config(format!("unknown init method '{other}'"))),
                }
            }
            "output" => self.output = PathBuf::from(value),
            "operators" => self.operators = Some(PathBuf::from(value)),
            "runs" => self.runs = parse_usize(key, value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("seed: '{value}' is not an integer")))?
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parse `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            cfg.set(key.trim(), value)?;
        }
        Ok(cfg)
    }

    /// Text form; unset optional keys are omitted.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("n", self.n.to_string());
        line("scenario", self.scenario.as_str().into());
        line("mu1", self.mu[0].to_string());
        line("mu2", self.mu[1].to_string());
        line("scheme", self.scheme.as_str().into());
        if let Some(dt) = self.dt {
            line("dt", dt.to_string());
        }
        if let Some(eps) = self.eps {
            line("eps", eps.to_string());
        }
        line("patch", self.patch.to_string());
        if let Some([a, b]) = self.corner_lo {
            line("corner_lo", format!("{a}, {b}"));
        }
        if let Some([a, b]) = self.corner_hi {
            line("corner_hi", format!("{a}, {b}"));
        }
        if let Some(r) = self.radius {
            line("radius", r.to_string());
        }
        line("bootstrap", self.bootstrap.as_str().into());
        line(
            "init",
            match self.init {
                InitMethod::Projection => "projection",
                InitMethod::Interpolation => "interpolation",
            }
            .into(),
        );
        line("output", self.output.display().to_string());
        if let Some(dir) = &self.operators {
            line("operators", dir.display().to_string());
        }
        line("runs", self.runs.to_string());
        line("seed", self.seed.to_string());
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn spec(&self) -> Result<DomainSpec> {
        DomainSpec::new(self.n)
    }

    pub fn dt(&self) -> Result<f64> {
        let dt = self
            .dt
            .or_else(|| default_dt(self.n))
            .ok_or_else(|| Error::Config(format!("no default time step for N = {}; set dt", self.n)))?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        Ok(dt)
    }

    pub fn eps(&self) -> Result<f64> {
        self.eps
            .or_else(|| default_eps(self.scenario, self.n))
            .ok_or_else(|| Error::Config(format!("no default energy tolerance for N = {}; set eps", self.n)))
    }

    pub fn run_options(&self) -> Result<RunOptions> {
        Ok(RunOptions {
            dt: self.dt()?,
            init: self.init,
        })
    }

    pub fn operator_dir(&self) -> &Path {
        self.operators.as_deref().unwrap_or(&self.output)
    }

    /// Parameter samples for training: the corner grid when both corners are
    /// set, otherwise `mu` alone.
    pub fn training_points(&self) -> Result<Vec<[f64; 2]>> {
        match (self.corner_lo, self.corner_hi) {
            (Some(lo), Some(hi)) => Ok(ParameterGrid::corners(lo, hi)?.points()),
            (None, None) => Ok(vec![self.mu]),
            _ => Err(Error::Config("corner_lo and corner_hi must be set together".into())),
        }
    }

    pub fn rkoi_options(&self) -> RkoiOptions {
        RkoiOptions { radius: self.radius }
    }

    /// Checks that do not touch the file system.
    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        self.dt()?;
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.patch == 0 || self.patch > self.n / 2 {
            return Err(Error::Config(format!("patch must lie in 1..={} for N = {}", self.n / 2, self.n)));
        }
        if !(self.mu[0] > 0.0 && self.mu[1] > 0.0) {
            return Err(Error::Config(format!("mu must be positive, got {:?}", self.mu)));
        }
        self.training_points()?;
        Ok(())
    }
}
