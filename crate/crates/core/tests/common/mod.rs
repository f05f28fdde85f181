#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DVector;
use partflux::assembly::{InitMethod, MassVariant};
use partflux::mesh::{DomainSpec, Subdomain};
use partflux::scenarios::Scenario;
use partflux::solvers::{
    default_dt, run_monolithic, run_partitioned, CoupledProblem, IvrSync, MonolithicProblem, RunOptions,
    TrajectorySink,
};

pub fn options(n: usize) -> RunOptions {
    RunOptions {
        dt: default_dt(n).expect("tabulated grid"),
        init: InitMethod::Projection,
    }
}

/// Nodal values of the monolithic run restricted to both subdomains, after
/// every step.
pub fn monolithic_history(spec: DomainSpec, scenario: Arc<dyn Scenario>, opts: RunOptions) -> Vec<[DVector<f64>; 2]> {
    let mono = MonolithicProblem::new(spec, scenario.clone()).unwrap();
    let coupled = CoupledProblem::new(spec, scenario).unwrap();
    let mut out = Vec::new();
    run_monolithic(&mono, opts, &mut |_, t, u| {
        let full = mono.nodal(u, t);
        out.push([
            mono.restrict_nodal(&full, coupled.mesh(Subdomain::Left)).unwrap(),
            mono.restrict_nodal(&full, coupled.mesh(Subdomain::Right)).unwrap(),
        ]);
    })
    .unwrap();
    out
}

/// Largest nodal difference to a reference history, relative to the
/// reference's largest nodal value at the same step.
struct Compare<'a> {
    problem: &'a CoupledProblem,
    reference: &'a [[DVector<f64>; 2]],
    worst: f64,
    steps: usize,
}

impl TrajectorySink for Compare<'_> {
    fn step(&mut self, k: usize, t: f64, _l: &DVector<f64>, u: [&DVector<f64>; 2]) {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for side in Subdomain::BOTH {
            let i = side.index();
            let nodal = self.problem.nodal(side, u[i], t);
            diff = diff.max((&nodal - &self.reference[k][i]).amax());
            scale = scale.max(self.reference[k][i].amax());
        }
        self.worst = self.worst.max(diff / scale);
        self.steps += 1;
    }
}

/// Max over steps of the relative nodal difference between IVR(C) and the
/// monolithic solver.
pub fn ivrc_vs_monolithic(n: usize, scenario: Arc<dyn Scenario>) -> f64 {
    let spec = DomainSpec::new(n).unwrap();
    let opts = options(n);
    let reference = monolithic_history(spec, scenario.clone(), opts);
    let problem = CoupledProblem::new(spec, scenario).unwrap();
    let mut cmp = Compare {
        problem: &problem,
        reference: &reference,
        worst: 0.0,
        steps: 0,
    };
    let mut sync = IvrSync::new(problem.build_schur(MassVariant::Consistent).unwrap());
    run_partitioned(&problem, &mut sync, opts, MassVariant::Consistent, &mut cmp).unwrap();
    assert_eq!(cmp.steps, reference.len());
    cmp.worst
}
