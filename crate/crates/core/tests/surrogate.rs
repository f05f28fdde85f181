mod common;

use nalgebra::DMatrix;
use partflux::assembly::{InitMethod, MassVariant};
use partflux::mesh::{DomainSpec, Subdomain};
use partflux::scenarios::{gaussian_training_set, relative_errors, GaussianFamily, ScenarioKind};
use partflux::solvers::{default_dt, run_partitioned, CoupledProblem, IvrSync, MonolithicProblem, RunOptions};
use partflux::surrogate::{
    rkoi, simulate_training, train_flux_operator, Bootstrap, DmdFluxOperator, DmdSync, ParameterGrid, PatchMap,
    RkoiOptions, SnapshotSet, TrainingOptions,
};

fn snapshots(n: usize, kind: ScenarioKind, mu: [f64; 2]) -> SnapshotSet {
    let spec = DomainSpec::new(n).unwrap();
    let problem = CoupledProblem::new(spec, kind.training_base(mu).unwrap()).unwrap();
    // N = 8 has no tabulated step; 0.05 is stable there
    let run = RunOptions {
        dt: default_dt(n).unwrap_or(0.05),
        init: InitMethod::Projection,
    };
    let starts = gaussian_training_set(spec, GaussianFamily::default());
    let options = TrainingOptions { k_patch: 2, run };
    simulate_training(&problem, &starts, options).unwrap()
}

#[test]
fn trained_operator_matches_pseudoinverse_oracle() {
    let snap = snapshots(8, ScenarioKind::Patch, [1e-3, 2e-3]);
    let eps = 1e-8;
    let op = train_flux_operator(&snap, eps, [1e-3, 2e-3]).unwrap();
    // oracle: nalgebra's SVD of Y without the QR reduction
    let y = snap.y();
    let svd = y.clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    let deficit = |k: usize| sigma[k..].iter().map(|s| s * s).sum::<f64>() / total;
    let k = op.rank();
    assert!(deficit(k) <= eps);
    assert!(k == 1 || deficit(k - 1) > eps, "rank {k} is not minimal");

    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let n_gamma = op.layout().n_gamma;
    let mut pinv = DMatrix::zeros(y.ncols(), y.nrows());
    for &i in &order[..k] {
        pinv += vt.row(i).transpose() * u.column(i).transpose() / svd.singular_values[i];
    }
    let oracle = snap.y_next().rows(0, n_gamma) * pinv;
    let a = op.to_dense();
    assert!((&a - &oracle).norm() <= 1e-8 * oracle.norm(), "{:e}", (&a - &oracle).norm() / oracle.norm());
}

#[test]
fn rkoi_is_cardinal_on_trained_corners() {
    let grid = ParameterGrid::corners([1e-3, 2e-3], [2e-3, 3e-3]).unwrap();
    let ops: Vec<DmdFluxOperator> = grid
        .points()
        .into_iter()
        .map(|mu| train_flux_operator(&snapshots(8, ScenarioKind::Patch, mu), 1e-8, mu).unwrap())
        .collect();
    for op in &ops {
        let r = rkoi(&ops, op.mu(), RkoiOptions::default()).unwrap();
        let a = op.to_dense();
        assert!((r.to_dense() - &a).norm() <= 1e-12 * a.norm());
    }
    let mid = rkoi(&ops, [1.5e-3, 2.5e-3], RkoiOptions::default()).unwrap();
    let avg = ops.iter().map(|o| o.to_dense()).fold(DMatrix::zeros(mid.layout().n_gamma, mid.layout().n_fs()), |s, a| s + a) / 4.0;
    assert!((mid.to_dense() - avg).amax() <= 1e-14 * mid.to_dense().amax());
}

/// `(E⁰ DMD-FS, E⁰ IVR(L))` on the single-material `kind` test at `n`.
fn closed_loop(n: usize, kind: ScenarioKind, eps: f64, bootstrap: Bootstrap) -> (f64, f64) {
    let mu = [1e-3, 1e-3];
    let spec = DomainSpec::new(n).unwrap();
    let opts = common::options(n);
    let op = train_flux_operator(&snapshots(n, kind, mu), eps, mu).unwrap();
    let scenario = kind.build(mu).unwrap();
    let problem = CoupledProblem::new(spec, scenario.clone()).unwrap();
    let mono = MonolithicProblem::new(spec, scenario).unwrap();
    let m = partflux::solvers::run_monolithic(&mono, opts, &mut |_, _, _| {}).unwrap();
    let full = mono.nodal(&m.u, m.t_final);
    let reference = Subdomain::BOTH.map(|s| mono.restrict_nodal(&full, problem.mesh(s)).unwrap());
    let e0 = |u: &[nalgebra::DVector<f64>; 2], t: f64| {
        let nodal = Subdomain::BOTH.map(|s| problem.nodal(s, &u[s.index()], t));
        relative_errors(
            [&nodal[0], &nodal[1]],
            [&reference[0], &reference[1]],
            Subdomain::BOTH.map(|s| problem.ops(s)),
        )
        .unwrap()
        .0
    };
    let schur = problem.build_schur(MassVariant::Consistent).unwrap();
    let mut dmd = DmdSync::new(op, PatchMap::for_problem(&problem, 2).unwrap(), bootstrap, Some(schur)).unwrap();
    let out = run_partitioned(&problem, &mut dmd, opts, MassVariant::Consistent, &mut ()).unwrap();
    let mut ivrl = IvrSync::new(problem.build_schur(MassVariant::Lumped).unwrap());
    let lumped = run_partitioned(&problem, &mut ivrl, opts, MassVariant::Lumped, &mut ()).unwrap();
    (e0(&out.u, out.t_final), e0(&lumped.u, lumped.t_final))
}

#[test]
fn surrogate_patch_test_is_accurate() {
    let (zero, _) = closed_loop(16, ScenarioKind::Patch, 1e-8, Bootstrap::Zero);
    let (schur, _) = closed_loop(16, ScenarioKind::Patch, 1e-8, Bootstrap::Schur);
    assert!(zero <= 1e-3, "{zero:e}");
    assert!(schur <= 1e-3, "{schur:e}");
}

#[test]
fn surrogate_beats_lumped_on_combination() {
    let (dmd, lumped) = closed_loop(32, ScenarioKind::Combination, 1e-6, Bootstrap::Zero);
    assert!(dmd < lumped, "{dmd:e} vs {lumped:e}");
    assert!(dmd <= 1e-2, "{dmd:e}");
}

#[test]
fn combination_training_is_source_free() {
    let base = ScenarioKind::Combination.training_base([1e-3, 3e-3]).unwrap();
    assert!(!base.has_forcing());
    assert_eq!(base.mu(), [1e-3, 3e-3]);
    let patch = ScenarioKind::Patch.training_base([1e-3, 3e-3]).unwrap();
    assert!(patch.has_forcing());
}
