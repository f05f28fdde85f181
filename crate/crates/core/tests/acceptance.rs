//! Acceptance suite: one PASS/FAIL line per criterion. Failing criteria are
//! reported, not asserted, so the binary exits 0 unless something panics
//! outside a criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use partflux::assembly::MassVariant;
use partflux::cli::{operator_from_bytes, operator_to_bytes, median};
use partflux::linalg::{energy_deficit, select_rank};
use partflux::mesh::{DomainSpec, Subdomain};
use partflux::scenarios::{
    gaussian_training_set, relative_errors, CombinationScenario, GaussianFamily, PatchScenario, Scenario, ScenarioKind,
};
use partflux::solvers::{run_partitioned, CoupledProblem, IvrSync, RunOutcome, Synchronizer};
use partflux::surrogate::{
    rkoi, simulate_training, train_flux_operator, Bootstrap, DmdFluxOperator, DmdSync, ParameterGrid, PatchMap,
    RkoiOptions, SnapshotSet, TrainingOptions,
};
use partflux::Result;

type Outcome = Result<(bool, String)>;

/// A problem instance with its monolithic benchmark at the final time.
struct Case {
    problem: CoupledProblem,
    reference: [DVector<f64>; 2],
    n: usize,
}

impl Case {
    fn new(n: usize, scenario: Arc<dyn Scenario>) -> Result<Self> {
        let spec = DomainSpec::new(n)?;
        let history = common::monolithic_history(spec, scenario.clone(), common::options(n));
        let reference = history.last().expect("at least one step").clone();
        Ok(Self {
            problem: CoupledProblem::new(spec, scenario)?,
            reference,
            n,
        })
    }

    fn run(&self, sync: &mut dyn Synchronizer, variant: MassVariant) -> Result<(RunOutcome, (f64, f64))> {
        let out = run_partitioned(&self.problem, sync, common::options(self.n), variant, &mut ())?;
        let nodal = Subdomain::BOTH.map(|s| self.problem.nodal(s, &out.u[s.index()], out.t_final));
        let e = relative_errors(
            [&nodal[0], &nodal[1]],
            [&self.reference[0], &self.reference[1]],
            Subdomain::BOTH.map(|s| self.problem.ops(s)),
        )?;
        Ok((out, e))
    }

    fn ivr(&self, variant: MassVariant) -> Result<(RunOutcome, (f64, f64))> {
        let mut sync = IvrSync::new(self.problem.build_schur(variant)?);
        self.run(&mut sync, variant)
    }

    fn dmd(&self, op: &DmdFluxOperator) -> Result<(RunOutcome, (f64, f64))> {
        let patches = PatchMap::for_problem(&self.problem, op.layout().k_patch)?;
        let mut sync = DmdSync::new(op.clone(), patches, Bootstrap::Zero, None)?;
        self.run(&mut sync, MassVariant::Consistent)
    }
}

fn patch(mu: [f64; 2]) -> Arc<dyn Scenario> {
    Arc::new(PatchScenario::new(mu[0], mu[1]).unwrap())
}

fn training(n: usize, kind: ScenarioKind, mu: [f64; 2]) -> Result<SnapshotSet> {
    let spec = DomainSpec::new(n)?;
    let problem = CoupledProblem::new(spec, kind.training_base(mu)?)?;
    let starts = gaussian_training_set(spec, GaussianFamily::default());
    simulate_training(
        &problem,
        &starts,
        TrainingOptions {
            k_patch: 2,
            run: common::options(n),
        },
    )
}

/// Single-material patch training at N = 64, shared by criteria 5, 9, 10.
struct Fine {
    snap: SnapshotSet,
    op: DmdFluxOperator,
}

const SINGLE: [f64; 2] = [1e-3, 1e-3];

fn fine() -> Result<Fine> {
    let snap = training(64, ScenarioKind::Patch, SINGLE)?;
    let op = train_flux_operator(&snap, 1e-13, SINGLE)?;
    Ok(Fine { snap, op })
}

fn c1() -> Outcome {
    let case = Case::new(64, patch([1.5e-3, 2.5e-3]))?;
    let (_, (e0, e1)) = case.ivr(MassVariant::Consistent)?;
    Ok((e0 <= 1e-10 && e1 <= 1e-8, format!("E0={e0:.3e} E1={e1:.3e}")))
}

fn c2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for n in [16, 32] {
        for (name, sc) in [
            ("patch", patch([1.5e-3, 2.5e-3])),
            ("combination", Arc::new(CombinationScenario::new(1.5e-3, 3.5e-3)?) as Arc<dyn Scenario>),
        ] {
            let d = common::ivrc_vs_monolithic(n, sc);
            worst = worst.max(d);
            parts.push(format!("{name} N={n}: {d:.2e}"));
        }
    }
    Ok((worst <= 1e-10, parts.join(", ")))
}

fn c3() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [16, 32, 64] {
        let (_, (e0, _)) = Case::new(n, patch(SINGLE))?.ivr(MassVariant::Consistent)?;
        ok &= e0 <= 1e-10;
        parts.push(format!("N={n}: {e0:.3e}"));
    }
    Ok((ok, parts.join(", ")))
}

fn c4() -> Outcome {
    let published = [1.16e-3, 4.17e-4, 1.49e-4];
    let mut e = Vec::new();
    for n in [16, 32, 64] {
        e.push(Case::new(n, patch(SINGLE))?.ivr(MassVariant::Lumped)?.1 .0);
    }
    let ratios = [e[0] / e[1], e[1] / e[2]];
    let ratios_ok = ratios.iter().all(|r| (1.5..=4.0).contains(r));
    let band_ok = e.iter().zip(published).all(|(x, p)| *x >= p / 3.0 && *x <= 3.0 * p);
    Ok((
        ratios_ok && band_ok,
        format!(
            "E0={:.3e}/{:.3e}/{:.3e}, ratios {:.2}/{:.2}",
            e[0], e[1], e[2], ratios[0], ratios[1]
        ),
    ))
}

fn c5(fine: &Fine) -> Outcome {
    let errs = fine.op.replay_errors(&fine.snap)?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok((
        worst <= 1e-6,
        format!(
            "N=64 rank {}: worst step {worst:.3e}, median {:.3e} over {} steps",
            fine.op.rank(),
            median(&errs),
            errs.len()
        ),
    ))
}

fn c6() -> Outcome {
    let op = train_flux_operator(&training(32, ScenarioKind::Patch, SINGLE)?, 1e-11, SINGLE)?;
    let (_, (e0, e1)) = Case::new(32, patch(SINGLE))?.dmd(&op)?;
    Ok((e0 <= 1e-4, format!("rank {} E0={e0:.3e} E1={e1:.3e}", op.rank())))
}

/// Four-corner combination operators at N = 64.
fn corners() -> Result<Vec<DmdFluxOperator>> {
    ParameterGrid::corners([1e-3, 3e-3], [2e-3, 4e-3])?
        .points()
        .into_iter()
        .map(|mu| train_flux_operator(&training(64, ScenarioKind::Combination, mu)?, 1e-8, mu))
        .collect()
}

fn c7(ops: &[DmdFluxOperator]) -> Outcome {
    let q = [1.5e-3, 3.5e-3];
    let op = rkoi(ops, q, RkoiOptions::default())?;
    let case = Case::new(64, Arc::new(CombinationScenario::new(q[0], q[1])?))?;
    let (_, (d0, d1)) = case.dmd(&op)?;
    let (_, (l0, _)) = case.ivr(MassVariant::Lumped)?;
    let ranks: Vec<usize> = ops.iter().map(|o| o.rank()).collect();
    Ok((
        d0 <= 3e-2 && d0 < l0,
        format!("corner ranks {ranks:?}: DMD-FS E0={d0:.3e} E1={d1:.3e}, IVR(L) E0={l0:.3e}"),
    ))
}

fn c8(ops: &[DmdFluxOperator]) -> Outcome {
    let mut worst: f64 = 0.0;
    for op in ops {
        let a = op.to_dense();
        let r = rkoi(ops, op.mu(), RkoiOptions::default())?.to_dense();
        worst = worst.max((r - &a).norm() / a.norm());
    }
    Ok((worst <= 1e-12, format!("max relative Frobenius difference {worst:.2e}")))
}

fn c9(fine: &Fine) -> Outcome {
    let k = fine.op.rank();
    // oracle spectrum: eigenvalues of the Gram matrix Y Yᵀ are σ²
    let y = fine.snap.y();
    let gram = &y * y.transpose();
    let mut lam: Vec<f64> = gram.symmetric_eigenvalues().iter().map(|v| v.max(0.0)).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = lam.iter().sum();
    let deficit = |k: usize| lam[k..].iter().sum::<f64>() / total;
    let eps = 1e-13;
    let minimal = deficit(k) <= eps && (k == 1 || deficit(k - 1) > eps);
    Ok((
        (25..=65).contains(&k) && minimal,
        format!(
            "rank {k}, deficit(k)={:.2e}, deficit(k-1)={:.2e}",
            deficit(k),
            deficit(k - 1)
        ),
    ))
}

fn c10(fine: &Fine) -> Outcome {
    let case = Case::new(64, patch(SINGLE))?;
    let mut t = [Vec::new(), Vec::new(), Vec::new()];
    for _ in 0..3 {
        t[0].push(case.dmd(&fine.op)?.0.sync_seconds);
        t[1].push(case.ivr(MassVariant::Lumped)?.0.sync_seconds);
        t[2].push(case.ivr(MassVariant::Consistent)?.0.sync_seconds);
    }
    let [dmd, ivrl, ivrc] = t.map(|v| median(&v));
    let speedup = ivrc / dmd;
    Ok((
        dmd < ivrl && ivrl < ivrc && speedup >= 3.0,
        format!("sync DMD-FS {dmd:.4}s, IVR(L) {ivrl:.4}s, IVR(C) {ivrc:.4}s, speedup {speedup:.1}x"),
    ))
}

fn c11(ops: &[DmdFluxOperator]) -> Outcome {
    let mut failures = Vec::new();
    for n in [16, 32, 64, 128] {
        let p = CoupledProblem::new(DomainSpec::new(n)?, patch([1.5e-3, 2.5e-3]))?;
        for v in [MassVariant::Consistent, MassVariant::Lumped] {
            if p.build_schur(v).is_err() {
                failures.push(format!("Schur {v:?} N={n}"));
            }
        }
        if p.ops(Subdomain::Left).constraint != p.ops(Subdomain::Right).constraint {
            failures.push(format!("G1 != G2 at N={n}"));
        }
    }

    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..500 {
        let mut sigma: Vec<f64> = (0..40).map(|_| 10f64.powf(-12.0 * next())).collect();
        sigma.sort_by(|a, b| b.total_cmp(a));
        let mut prev = 0;
        for e in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12, 1e-14] {
            let k = select_rank(&sigma, e)?;
            if k < prev || energy_deficit(&sigma, k) > e {
                failures.push(format!("select_rank at eps={e:e}"));
            }
            prev = k;
        }
    }

    for op in ops.iter().take(1).chain(ops.iter().take(1).map(|o| o.densified()).collect::<Vec<_>>().iter()) {
        let bytes = operator_to_bytes(op);
        let back = operator_from_bytes(&bytes)?;
        if back != *op || operator_to_bytes(&back) != bytes {
            failures.push("persistence round trip".into());
        }
    }

    let p = CoupledProblem::new(DomainSpec::new(16)?, patch(SINGLE))?;
    let u = Subdomain::BOTH.map(|s| {
        let m = p.mesh(s);
        DVector::from_iterator(m.num_nodes(), m.coords().iter().map(|c| 1.0 + c[0] + c[1] * c[1]))
    });
    let twice = [&u[0] * 2.0, &u[1] * 2.0];
    let (e0, e1) = relative_errors([&twice[0], &twice[1]], [&u[0], &u[1]], Subdomain::BOTH.map(|s| p.ops(s)))?;
    if (e0 - 1.0).abs() > 1e-14 || (e1 - 1.0).abs() > 1e-14 {
        failures.push(format!("homogeneity gave ({e0}, {e1})"));
    }

    let ok = failures.is_empty();
    let detail = if ok {
        "Schur SPD N=16..128 both variants, G1=G2, select_rank monotone and within eps, bit-exact persistence, error homogeneity".to_string()
    } else {
        failures.join("; ")
    };
    Ok((ok, detail))
}

fn report(id: u32, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let secs = started.elapsed().as_secs_f64();
    let (ok, detail) = match result {
        Ok(Ok(v)) => v,
        Ok(Err(e)) => (false, format!("error[{}]: {e}", e.class())),
        Err(p) => (
            false,
            format!(
                "panic: {}",
                p.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default()
            ),
        ),
    };
    println!("{} {id:>2} {title}: {detail} [{secs:.1}s]", if ok { "PASS" } else { "FAIL" });
    ok
}

fn main() {
    let started = Instant::now();
    let mut passed = 0;
    let mut total = 0;
    let mut tally = |ok: bool| {
        total += 1;
        passed += ok as usize;
    };

    tally(report(1, "IVR(C) multi-material patch test, N=64", c1));
    tally(report(2, "monolithic and IVR(C) coincide, N=16/32", c2));
    tally(report(3, "IVR(C) single-material patch test, N=16/32/64", c3));
    tally(report(4, "IVR(L) first-order convergence and magnitude", c4));

    let fine = fine();
    match &fine {
        Ok(f) => {
            tally(report(5, "open-loop training fit at eps=1e-13", || c5(f)));
            tally(report(6, "DMD-FS single-material patch test, N=32", c6));
            let ops = corners();
            match &ops {
                Ok(ops) => {
                    tally(report(7, "parametric DMD-FS combination test, N=64", || c7(ops)));
                    tally(report(8, "rKOI cardinality at the corners", || c8(ops)));
                    tally(report(9, "rank selection at N=64, eps=1e-13", || c9(f)));
                    tally(report(10, "synchronization cost ordering at N=64", || c10(f)));
                    tally(report(11, "property suite", || c11(ops)));
                }
                Err(e) => {
                    for id in [7, 8] {
                        tally(report(id, "corner training", || Err(e.clone_lite())));
                    }
                    tally(report(9, "rank selection at N=64, eps=1e-13", || c9(f)));
                    tally(report(10, "synchronization cost ordering at N=64", || c10(f)));
                    tally(report(11, "property suite", || c11(&[])));
                }
            }
        }
        Err(e) => {
            for id in [5, 9, 10] {
                tally(report(id, "N=64 patch training", || Err(e.clone_lite())));
            }
            tally(report(6, "DMD-FS single-material patch test, N=32", c6));
        }
    }
    println!(
        "acceptance: {passed}/{total} criteria passed in {:.0}s",
        started.elapsed().as_secs_f64()
    );
}

trait CloneLite {
    fn clone_lite(&self) -> partflux::Error;
}

impl CloneLite for partflux::Error {
    fn clone_lite(&self) -> partflux::Error {
        partflux::Error::InvalidArgument(format!("[{}] {self}", self.class()))
    }
}
