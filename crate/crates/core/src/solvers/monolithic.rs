use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;

use super::{euler_step, nodal_values, step_count, MassSolver, RunOptions};
use crate::assembly::{MassVariant, SubdomainOperators};
use crate::error::{Error, Result};
use crate::mesh::{Dof, DomainSpec, QuadMesh};
use crate::scenarios::Scenario;

/// Single-domain discretization of the transmission problem on the full mesh.
pub struct MonolithicProblem {
    spec: DomainSpec,
    mesh: QuadMesh,
    ops: SubdomainOperators,
    scenario: Arc<dyn Scenario>,
}

/// Result of a monolithic run; `u` is over the free DoFs of the full mesh.
#[derive(Debug, Clone)]
pub struct MonolithicOutcome {
    pub steps: usize,
    pub t_final: f64,
    pub u: DVector<f64>,
    pub online_seconds: f64,
}

impl MonolithicProblem {
    pub fn new(spec: DomainSpec, scenario: Arc<dyn Scenario>) -> Result<Self> {
        let mesh = QuadMesh::full(spec);
        let ops = SubdomainOperators::assemble(&mesh, None, scenario.as_ref())?;
        Ok(Self {
            spec,
            mesh,
            ops,
            scenario,
        })
    }

    pub fn spec(&self) -> DomainSpec {
        self.spec
    }

    pub fn mesh(&self) -> &QuadMesh {
        &self.mesh
    }

    pub fn ops(&self) -> &SubdomainOperators {
        &self.ops
    }

    pub fn initial_state(&self, options: RunOptions) -> Result<DVector<f64>> {
        let sc = self.scenario.as_ref();
        let g0 = self.ops.load.dirichlet_values(|s, x, y| sc.dirichlet(s, x, y, 0.0));
        self.ops
            .set_initial(&self.mesh, &|s, x, y| sc.initial(s, x, y), options.init, Some(&g0))
    }

    /// Nodal values of the full mesh at time `t`.
    pub fn nodal(&self, u: &DVector<f64>, t: f64) -> DVector<f64> {
        nodal_values(&self.mesh, &self.ops, self.scenario.as_ref(), u, t)
    }

    /// Restriction of full-mesh nodal values to the nodes of a subdomain mesh.
    pub fn restrict_nodal(&self, nodal: &DVector<f64>, sub: &QuadMesh) -> Result<DVector<f64>> {
        if sub.spec() != self.spec || nodal.len() != self.mesh.num_nodes() {
            return Err(Error::Layout("subdomain mesh does not match the full mesh".into()));
        }
        let rows = self.spec.n() + 1;
        Ok(DVector::from_iterator(
            sub.num_nodes(),
            (0..sub.num_nodes()).map(|node| {
                let (gx, gy) = sub.lattice(node);
                nodal[gx * rows + gy]
            }),
        ))
    }

    /// Restriction of full-mesh free coefficients to a subdomain's free DoFs.
    pub fn restrict(&self, u: &DVector<f64>, sub: &QuadMesh) -> Result<DVector<f64>> {
        if sub.spec() != self.spec || u.len() != self.mesh.n_free() {
            return Err(Error::Layout("subdomain mesh does not match the full mesh".into()));
        }
        let rows = self.spec.n() + 1;
        let mut out = DVector::zeros(sub.n_free());
        for node in sub.free_nodes() {
            let (gx, gy) = sub.lattice(node);
            if let (Dof::Free(i), Dof::Free(j)) = (sub.dof(node), self.mesh.dof(gx * rows + gy)) {
                out[i] = u[j];
            }
        }
        Ok(out)
    }
}

/// Forward Euler with the consistent mass matrix on the full mesh. `observer`
/// sees the free coefficients after every step.
pub fn run_monolithic(
    problem: &MonolithicProblem,
    options: RunOptions,
    observer: &mut dyn FnMut(usize, f64, &DVector<f64>),
) -> Result<MonolithicOutcome> {
    if !(options.dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {}", options.dt)));
    }
    let sc = problem.scenario.as_ref();
    let dt = options.dt;
    let steps = step_count(sc.final_time(), dt);
    let mass = MassSolver::new(&problem.ops, MassVariant::Consistent)?;
    let mut u = problem.initial_state(options)?;
    let n = u.len();
    let mut b = DVector::zeros(n);
    let mut ku = vec![0.0; n];
    let none = DVector::zeros(0);
    let mut scratch = Vec::new();

    let online = Instant::now();
    for k in 0..steps {
        let t = k as f64 * dt;
        problem.ops.assemble_load(sc, t, MassVariant::Consistent, &mut b);
        crate::assembly::spmv(&problem.ops.stiffness.ff, u.as_slice(), &mut ku);
        for (bi, kui) in b.iter_mut().zip(&ku) {
            *bi -= kui;
        }
        euler_step(&mass, &mut u, &b, &none, dt, &mut scratch);
        super::check_finite(&u, k, t)?;
        observer(k, (k + 1) as f64 * dt, &u);
    }
    Ok(MonolithicOutcome {
        steps,
        t_final: steps as f64 * dt,
        u,
        online_seconds: online.elapsed().as_secs_f64(),
    })
}
