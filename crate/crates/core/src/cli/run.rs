use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use super::config::{RunConfig, Scheme};
use super::persist::{load_operator, save_operator};
use crate::assembly::MassVariant;
use crate::error::{Error, Result};
use crate::mesh::Subdomain;
use crate::scenarios::{gaussian_training_set, relative_errors, GaussianFamily};
use crate::solvers::{
    run_monolithic, run_partitioned, CoupledProblem, IvrSync, LambdaHistory, MonolithicProblem, RunOptions,
    Synchronizer, TrajectorySink,
};
use crate::surrogate::{
    rkoi, simulate_training, train_flux_operator, Bootstrap, DmdFluxOperator, DmdSync, PatchMap, TrainingOptions,
};

/// File listing the trained operators of a directory.
pub const MANIFEST: &str = "manifest.txt";

/// One trained operator recorded in the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// File name relative to the manifest's directory.
    pub file: String,
    pub mu: [f64; 2],
    pub rank: usize,
    pub eps: f64,
}

pub fn write_manifest(dir: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut s = String::from("# file mu1 mu2 rank eps\n");
    for e in entries {
        let _ = writeln!(s, "{} {} {} {} {}", e.file, e.mu[0], e.mu[1], e.rank, e.eps);
    }
    write_text(&dir.join(MANIFEST), &s)
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let bad = |line: usize| Error::Config(format!("{}: malformed line {line}", path.display()));
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(bad(i + 1));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 1));
        entries.push(ManifestEntry {
            file: f[0].to_string(),
            mu: [num(f[1])?, num(f[2])?],
            rank: f[3].parse().map_err(|_| bad(i + 1))?,
            eps: num(f[4])?,
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyTraining(format!("{} lists no operators", path.display())));
    }
    Ok(entries)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Offline phase: one operator per training parameter, plus the manifest.
/// Corners are trained one after another; the trajectories of each corner
/// run in parallel.
pub fn train(cfg: &RunConfig) -> Result<Vec<ManifestEntry>> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let eps = cfg.eps()?;
    let options = TrainingOptions {
        k_patch: cfg.patch,
        run: cfg.run_options()?,
    };
    let starts = gaussian_training_set(spec, GaussianFamily::default());
    let dir = cfg.operator_dir();
    create_dir(dir)?;
    let mut entries = Vec::new();
    for (j, mu) in cfg.training_points()?.into_iter().enumerate() {
        let problem = CoupledProblem::new(spec, cfg.scenario.training_base(mu)?)?;
        let snap = simulate_training(&problem, &starts, options)?;
        let op = train_flux_operator(&snap, eps, mu)?;
        let file = format!("op_{j}.dmdf");
        save_operator(&op, &dir.join(&file))?;
        entries.push(ManifestEntry {
            file,
            mu,
            rank: op.rank(),
            eps,
        });
    }
    write_manifest(dir, &entries)?;
    Ok(entries)
}

/// Final-time result of one scheme.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub steps: usize,
    pub t_final: f64,
    /// Nodal values on every node of each subdomain mesh.
    pub nodal: [DVector<f64>; 2],
    pub online_seconds: f64,
    pub sync_seconds: f64,
}

/// A configured problem instance that can run every scheme.
pub struct Experiment {
    cfg: RunConfig,
    problem: CoupledProblem,
    options: RunOptions,
}

impl Experiment {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let scenario = cfg.scenario.build(cfg.mu)?;
        Ok(Self {
            cfg: cfg.clone(),
            problem: CoupledProblem::new(cfg.spec()?, scenario)?,
            options: cfg.run_options()?,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn problem(&self) -> &CoupledProblem {
        &self.problem
    }

    pub fn options(&self) -> RunOptions {
        self.options
    }

    /// True when the operator directory has a manifest.
    pub fn has_operators(&self) -> bool {
        self.cfg.operator_dir().join(MANIFEST).is_file()
    }

    /// Flux operator for `mu`: a single stored operator trained at `mu` is
    /// used as is, otherwise the stored samples are interpolated.
    pub fn surrogate(&self) -> Result<DmdFluxOperator> {
        let dir = self.cfg.operator_dir();
        let ops = read_manifest(dir)?
            .iter()
            .map(|e| load_operator(&dir.join(&e.file)))
            .collect::<Result<Vec<_>>>()?;
        match ops.as_slice() {
            [op] if op.mu() == self.cfg.mu => Ok(op.clone()),
            _ => rkoi(&ops, self.cfg.mu, self.cfg.rkoi_options()),
        }
    }

    fn synchronizer(&self, scheme: Scheme, surrogate: Option<&DmdFluxOperator>) -> Result<Box<dyn Synchronizer>> {
        Ok(match scheme {
            Scheme::Ivrc => Box::new(IvrSync::new(self.problem.build_schur(MassVariant::Consistent)?)),
            Scheme::Ivrl => Box::new(IvrSync::new(self.problem.build_schur(MassVariant::Lumped)?)),
            Scheme::Dmdfs => {
                let op = surrogate
                    .ok_or_else(|| Error::InvalidArgument("the dmdfs scheme needs a flux operator".into()))?;
                let schur = match self.cfg.bootstrap {
                    Bootstrap::Schur => Some(self.problem.build_schur(MassVariant::Consistent)?),
                    Bootstrap::Zero => None,
                };
                let patches = PatchMap::for_problem(&self.problem, self.cfg.patch)?;
                Box::new(DmdSync::new(op.clone(), patches, self.cfg.bootstrap, schur)?)
            }
            Scheme::Monolithic => unreachable!("the monolithic scheme has no synchronizer"),
        })
    }

    /// Run `scheme` to the final time. `sink` sees partitioned trajectories
    /// only.
    pub fn run(
        &self,
        scheme: Scheme,
        surrogate: Option<&DmdFluxOperator>,
        sink: &mut dyn TrajectorySink,
    ) -> Result<SchemeRun> {
        if scheme == Scheme::Monolithic {
            let mono = MonolithicProblem::new(self.problem.spec(), self.problem.scenario().clone())?;
            let out = run_monolithic(&mono, self.options, &mut |_, _, _| {})?;
            let full = mono.nodal(&out.u, out.t_final);
            let nodal = [
                mono.restrict_nodal(&full, self.problem.mesh(Subdomain::Left))?,
                mono.restrict_nodal(&full, self.problem.mesh(Subdomain::Right))?,
            ];
            return Ok(SchemeRun {
                scheme,
                steps: out.steps,
                t_final: out.t_final,
                nodal,
                online_seconds: out.online_seconds,
                sync_seconds: 0.0,
            });
        }
        let mut sync = self.synchronizer(scheme, surrogate)?;
        let variant = if scheme == Scheme::Ivrl {
            MassVariant::Lumped
        } else {
            MassVariant::Consistent
        };
        let out = run_partitioned(&self.problem, sync.as_mut(), self.options, variant, sink)?;
        let nodal = [
            self.problem.nodal(Subdomain::Left, &out.u[0], out.t_final),
            self.problem.nodal(Subdomain::Right, &out.u[1], out.t_final),
        ];
        Ok(SchemeRun {
            scheme,
            steps: out.steps,
            t_final: out.t_final,
            nodal,
            online_seconds: out.online_seconds,
            sync_seconds: out.sync_seconds,
        })
    }

    /// `(E⁰, E¹)` of `run` against `benchmark`.
    pub fn errors(&self, run: &SchemeRun, benchmark: &SchemeRun) -> Result<(f64, f64)> {
        relative_errors(
            [&run.nodal[0], &run.nodal[1]],
            [&benchmark.nodal[0], &benchmark.nodal[1]],
            [self.problem.ops(Subdomain::Left), self.problem.ops(Subdomain::Right)],
        )
    }

    fn surrogate_for(&self, scheme: Scheme) -> Result<Option<DmdFluxOperator>> {
        if scheme == Scheme::Dmdfs {
            Ok(Some(self.surrogate()?))
        } else {
            Ok(None)
        }
    }
}

/// Output of [`solve`].
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub run: SchemeRun,
    pub files: Vec<PathBuf>,
}

/// Online phase of the configured scheme. Writes `solution.csv` (final nodal
/// values), `lambda.csv` (per-step multipliers, partitioned schemes only)
/// and `summary.txt` to the output directory.
pub fn solve(cfg: &RunConfig) -> Result<SolveReport> {
    let exp = Experiment::new(cfg)?;
    let surrogate = exp.surrogate_for(cfg.scheme)?;
    let mut history = LambdaHistory::default();
    let run = exp.run(cfg.scheme, surrogate.as_ref(), &mut history)?;
    create_dir(&cfg.output)?;
    let mut files = Vec::new();

    let mut s = String::from("side,x,y,u\n");
    for side in Subdomain::BOTH {
        let name = if side == Subdomain::Left { "left" } else { "right" };
        for (c, u) in exp.problem.mesh(side).coords().iter().zip(run.nodal[side.index()].iter()) {
            let _ = writeln!(s, "{name},{:.6e},{:.6e},{:.16e}", c[0], c[1], u);
        }
    }
    files.push(cfg.output.join("solution.csv"));
    write_text(files.last().unwrap(), &s)?;

    if !history.lambdas.is_empty() {
        let n = exp.problem.n_interface();
        let mut s = String::from("step,t");
        for i in 0..n {
            let _ = write!(s, ",lambda_{i}");
        }
        s.push('\n');
        for (k, l) in history.lambdas.iter().enumerate() {
            let _ = write!(s, "{k},{:.16e}", k as f64 * exp.options.dt);
            for v in l.iter() {
                let _ = write!(s, ",{v:.16e}");
            }
            s.push('\n');
        }
        files.push(cfg.output.join("lambda.csv"));
        write_text(files.last().unwrap(), &s)?;
    }

    let summary = format!(
        "scheme = {}\nn = {}\nmu1 = {}\nmu2 = {}\nsteps = {}\nt_final = {}\nonline_seconds = {:.6e}\nsync_seconds = {:.6e}\n",
        run.scheme.as_str(),
        cfg.n,
        cfg.mu[0],
        cfg.mu[1],
        run.steps,
        run.t_final,
        run.online_seconds,
        run.sync_seconds
    );
    files.push(cfg.output.join("summary.txt"));
    write_text(files.last().unwrap(), &summary)?;
    Ok(SolveReport { run, files })
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub scheme: Scheme,
    pub n: usize,
    pub mu: [f64; 2],
    pub e0: f64,
    pub e1: f64,
    /// Median online time over the repeated runs.
    pub online_seconds: f64,
    /// Median IVR(C) online time divided by this scheme's.
    pub speedup: f64,
}

pub const COMPARE_HEADER: &str = "scheme,N,mu1,mu2,E0,E1,online_time,speedup";

impl CompareRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
            self.scheme.as_str(),
            self.n,
            self.mu[0],
            self.mu[1],
            self.e0,
            self.e1,
            self.online_seconds,
            self.speedup
        )
    }
}

/// Schemes covered by `compare` and `bench`: DMD-FS joins when operators are
/// available or when it is the configured scheme.
fn candidate_schemes(exp: &Experiment, with_monolithic: bool) -> Vec<Scheme> {
    let mut v = Vec::new();
    if with_monolithic {
        v.push(Scheme::Monolithic);
    }
    v.extend([Scheme::Ivrc, Scheme::Ivrl]);
    if exp.has_operators() || exp.cfg.scheme == Scheme::Dmdfs {
        v.push(Scheme::Dmdfs);
    }
    v
}

/// Errors of every scheme against the monolithic benchmark plus median
/// online times; writes `compare.csv`.
pub fn compare(cfg: &RunConfig) -> Result<Vec<CompareRow>> {
    let exp = Experiment::new(cfg)?;
    let benchmark = exp.run(Scheme::Monolithic, None, &mut ())?;
    let mut measured = Vec::new();
    for scheme in candidate_schemes(&exp, true) {
        let surrogate = exp.surrogate_for(scheme)?;
        let mut times = Vec::with_capacity(cfg.runs);
        let mut errors = (0.0, 0.0);
        for r in 0..cfg.runs {
            let run = exp.run(scheme, surrogate.as_ref(), &mut ())?;
            if r == 0 {
                errors = exp.errors(&run, &benchmark)?;
            }
            times.push(run.online_seconds);
        }
        measured.push((scheme, errors, median(&times)));
    }
    let reference = measured
        .iter()
        .find(|m| m.0 == Scheme::Ivrc)
        .map(|m| m.2)
        .expect("ivrc is always compared");
    let rows: Vec<CompareRow> = measured
        .into_iter()
        .map(|(scheme, (e0, e1), t)| CompareRow {
            scheme,
            n: cfg.n,
            mu: cfg.mu,
            e0,
            e1,
            online_seconds: t,
            speedup: reference / t,
        })
        .collect();
    create_dir(&cfg.output)?;
    let mut s = format!("{COMPARE_HEADER}\n");
    for row in &rows {
        s.push_str(&row.csv());
        s.push('\n');
    }
    write_text(&cfg.output.join("compare.csv"), &s)?;
    Ok(rows)
}

/// Synchronization timing of one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub scheme: Scheme,
    pub n: usize,
    pub steps: usize,
    /// Median total time inside synchronization calls.
    pub sync_seconds: f64,
    /// Median online loop time.
    pub online_seconds: f64,
}

pub const BENCH_HEADER: &str = "scheme,N,steps,sync_time,online_time,sync_per_step";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{:.6e},{:.6e},{:.6e}",
            self.scheme.as_str(),
            self.n,
            self.steps,
            self.sync_seconds,
            self.online_seconds,
            self.sync_seconds / self.steps.max(1) as f64
        )
    }
}

/// Median synchronization and online times of the partitioned schemes;
/// writes `bench.csv`.
pub fn bench(cfg: &RunConfig) -> Result<Vec<BenchRow>> {
    let exp = Experiment::new(cfg)?;
    let mut rows = Vec::new();
    for scheme in candidate_schemes(&exp, false) {
        let surrogate = exp.surrogate_for(scheme)?;
        let mut sync = Vec::with_capacity(cfg.runs);
        let mut online = Vec::with_capacity(cfg.runs);
        let mut steps = 0;
        for _ in 0..cfg.runs {
            let run = exp.run(scheme, surrogate.as_ref(), &mut ())?;
            sync.push(run.sync_seconds);
            online.push(run.online_seconds);
            steps = run.steps;
        }
        rows.push(BenchRow {
            scheme,
            n: cfg.n,
            steps,
            sync_seconds: median(&sync),
            online_seconds: median(&online),
        });
    }
    create_dir(&cfg.output)?;
    let mut s = format!("{BENCH_HEADER}\n");
    for row in &rows {
        s.push_str(&row.csv());
        s.push('\n');
    }
    write_text(&cfg.output.join("bench.csv"), &s)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::ScenarioKind;

    fn small(dir: &Path) -> RunConfig {
        RunConfig {
            n: 8,
            dt: Some(0.05),
            eps: Some(1e-8),
            output: dir.to_path_buf(),
            runs: 1,
            ..RunConfig::default()
        }
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn manifest_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let entries = vec![
            ManifestEntry { file: "op_0.dmdf".into(), mu: [1e-3, 3e-3], rank: 41, eps: 1e-8 },
            ManifestEntry { file: "op_1.dmdf".into(), mu: [2e-3, 4e-3], rank: 40, eps: 1e-8 },
        ];
        write_manifest(dir.path(), &entries).unwrap();
        assert_eq!(read_manifest(dir.path()).unwrap(), entries);
        write_text(&dir.path().join(MANIFEST), "# nothing\n").unwrap();
        assert!(matches!(read_manifest(dir.path()), Err(Error::EmptyTraining(_))));
        write_text(&dir.path().join(MANIFEST), "op 1 2 x 1e-8\n").unwrap();
        assert!(matches!(read_manifest(dir.path()), Err(Error::Config(_))));
    }

    #[test]
    fn train_then_solve_at_the_training_point() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        let entries = train(&cfg).unwrap();
        assert_eq!(entries.len(), 1);
        cfg.scheme = Scheme::Dmdfs;
        let exp = Experiment::new(&cfg).unwrap();
        let op = exp.surrogate().unwrap();
        assert!(op.is_factored());
        let report = solve(&cfg).unwrap();
        assert_eq!(report.files.len(), 3);
        let lambda = std::fs::read_to_string(dir.path().join("lambda.csv")).unwrap();
        assert_eq!(lambda.lines().count(), report.run.steps + 1);
        let solution = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
        assert_eq!(solution.lines().count(), 1 + 2 * 9 * 5);

        // a different μ is outside the one-point hull
        cfg.mu = [2e-3, 1e-3];
        assert!(matches!(Experiment::new(&cfg).unwrap().surrogate(), Err(Error::OutsideHull { .. })));
        // an operator from another grid is rejected by layout
        cfg.mu = [1e-3, 1e-3];
        cfg.n = 10;
        assert!(matches!(solve(&cfg), Err(Error::Layout(_))));
    }

    #[test]
    fn compare_rows_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            scenario: ScenarioKind::Patch,
            mu: [1e-3, 2e-3],
            ..small(dir.path())
        };
        let rows = compare(&cfg).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.scheme.as_str()).collect();
        assert_eq!(names, vec!["monolithic", "ivrc", "ivrl"]);
        assert_eq!((rows[0].e0, rows[0].e1), (0.0, 0.0));
        assert!(rows[1].e0 < 1e-10);
        assert_eq!(rows[1].speedup, 1.0);
        let text = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(COMPARE_HEADER));
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 8);
            // scientific notation with seven significant digits
            assert!(fields[4].contains('e') && fields[4].split('e').next().unwrap().len() >= 8);
        }
        // error digits are reproducible
        let again = compare(&cfg).unwrap();
        for (a, b) in rows.iter().zip(&again) {
            assert_eq!((a.e0, a.e1), (b.e0, b.e1));
        }
        let dmd = RunConfig { scheme: Scheme::Dmdfs, ..cfg };
        assert!(matches!(compare(&dmd), Err(Error::Io { .. })));
    }
}
