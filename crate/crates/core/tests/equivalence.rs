mod common;

use std::sync::Arc;

use partflux::scenarios::{CombinationScenario, PatchScenario};

#[test]
fn ivrc_tracks_monolithic_patch() {
    for n in [16, 32] {
        let d = common::ivrc_vs_monolithic(n, Arc::new(PatchScenario::new(1.5e-3, 2.5e-3).unwrap()));
        assert!(d <= 1e-10, "N={n}: {d:e}");
    }
}

#[test]
fn ivrc_tracks_monolithic_combination() {
    for n in [16, 32] {
        let d = common::ivrc_vs_monolithic(n, Arc::new(CombinationScenario::new(1.5e-3, 3.5e-3).unwrap()));
        assert!(d <= 1e-10, "N={n}: {d:e}");
    }
}

#[test]
fn single_step_matches_monolithic() {
    use nalgebra::DVector;
    use partflux::assembly::MassVariant;
    use partflux::mesh::{DomainSpec, Subdomain};
    use partflux::solvers::{run_partitioned, CoupledProblem, IvrSync, TrajectorySink};

    #[derive(Default)]
    struct First(Option<(f64, [DVector<f64>; 2])>);
    impl TrajectorySink for First {
        fn step(&mut self, k: usize, t: f64, _l: &DVector<f64>, u: [&DVector<f64>; 2]) {
            if k == 0 {
                self.0 = Some((t, [u[0].clone(), u[1].clone()]));
            }
        }
    }

    let spec = DomainSpec::new(16).unwrap();
    let sc = Arc::new(PatchScenario::new(1e-3, 1e-3).unwrap());
    let opts = common::options(16);
    let reference = common::monolithic_history(spec, sc.clone(), opts);
    let problem = CoupledProblem::new(spec, sc).unwrap();
    let mut sync = IvrSync::new(problem.build_schur(MassVariant::Consistent).unwrap());
    let mut first = First::default();
    run_partitioned(&problem, &mut sync, opts, MassVariant::Consistent, &mut first).unwrap();
    let (t, u) = first.0.unwrap();
    for side in Subdomain::BOTH {
        let i = side.index();
        let nodal = problem.nodal(side, &u[i], t);
        let d = (&nodal - &reference[0][i]).amax();
        assert!(d <= 1e-12, "{d:e}");
    }
}
