//! Problem instances: the manufactured patch test, the combination test and
//! the Gaussian-hill training family.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;

use crate::assembly::{quad_form, SubdomainOperators};
use crate::error::{Error, Result};
use crate::mesh::{DomainSpec, Subdomain, INTERFACE_X};

/// Rotating velocity field about the domain center.
pub fn rotating_velocity(x: f64, y: f64) -> [f64; 2] {
    [0.5 - y, x - 0.5]
}

/// Data of one transmission-problem instance.
///
/// Fields are evaluated per subdomain; points on the interface may be queried
/// from either side.
pub trait Scenario: Send + Sync {
    fn name(&self) -> String;

    fn kappa(&self, side: Subdomain) -> f64;

    fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        rotating_velocity(x, y)
    }

    fn source(&self, side: Subdomain, x: f64, y: f64, t: f64) -> f64;

    fn dirichlet(&self, side: Subdomain, x: f64, y: f64, t: f64) -> f64;

    fn dirichlet_rate(&self, side: Subdomain, x: f64, y: f64, t: f64) -> f64;

    fn initial(&self, side: Subdomain, x: f64, y: f64) -> f64;

    fn final_time(&self) -> f64 {
        2.0 * PI
    }

    /// False when source and boundary data vanish identically, which lets the
    /// solvers skip per-step load assembly.
    fn has_forcing(&self) -> bool {
        true
    }

    fn mu(&self) -> [f64; 2] {
        [self.kappa(Subdomain::Left), self.kappa(Subdomain::Right)]
    }
}

fn check_kappa(k1: f64, k2: f64) -> Result<()> {
    if !(k1 > 0.0 && k2 > 0.0) || !k1.is_finite() || !k2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "diffusion coefficients must be positive, got ({k1}, {k2})"
        )));
    }
    Ok(())
}

/// Side of the interface a point belongs to; points on the interface count as
/// left, which is harmless because all scenario fields are continuous there.
pub fn side_of(x: f64) -> Subdomain {
    if x <= INTERFACE_X {
        Subdomain::Left
    } else {
        Subdomain::Right
    }
}

/// Manufactured solution, linear in time and piecewise linear in space with a
/// kink at the interface that balances the diffusive fluxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchScenario {
    k1: f64,
    k2: f64,
}

impl PatchScenario {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        check_kappa(k1, k2)?;
        Ok(Self { k1, k2 })
    }

    /// Spatial profile `u / t`.
    fn profile(&self, side: Subdomain, x: f64, y: f64) -> f64 {
        match side {
            Subdomain::Left => x + 2.0 * y + 3.0,
            Subdomain::Right => {
                let a = self.k1 / self.k2;
                let c = (self.k2 - self.k1) / (2.0 * self.k2);
                a * x + 2.0 * y + c + 3.0
            }
        }
    }

    fn gradient(&self, side: Subdomain) -> [f64; 2] {
        match side {
            Subdomain::Left => [1.0, 2.0],
            Subdomain::Right => [self.k1 / self.k2, 2.0],
        }
    }

    pub fn exact(&self, side: Subdomain, x: f64, y: f64, t: f64) -> f64 {
        t * self.profile(side, x, y)
    }
}

impl Scenario for PatchScenario {
    fn name(&self) -> String {
        "patch".into()
    }

    fn kappa(&self, side: Subdomain) -> f64 {
        match side {
            Subdomain::Left => self.k1,
            Subdomain::Right => self.k2,
        }
    }

    // u is spatially linear and v divergence free, so the diffusion term
    // vanishes and f = u_t + v·∇u.
    fn source(&self, side: Subdomain, x: f64, y: f64, t: f64) -> f64 {
        let [vx, vy] = self.velocity(x, y);
        let [gx, gy] = self.gradient(side);
        self.profile(side, x, y) + t * (vx * gx + vy * gy)
    }

    fn dirichlet(&self, side: Subdomain, x: f64, y: f64, t: f64) -> f64 {
        self.exact(side, x, y, t)
    }

    fn dirichlet_rate(&self, side: Subdomain, x: f64, y: f64, _t: f64) -> f64 {
        self.profile(side, x, y)
    }

    fn initial(&self, _side: Subdomain, _x: f64, _y: f64) -> f64 {
        0.0
    }
}

const BODY_RADIUS: f64 = 0.15;

/// Which of the four bodies of the combination test sits in a quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Body {
    SlottedCylinder,
    Cone,
    Hill,
    Staircase,
}

/// Body centers: slotted cylinder upper left, cone lower left, hill lower
/// right, staircase upper right.
pub const BODIES: [(Body, [f64; 2]); 4] = [
    (Body::SlottedCylinder, [0.25, 0.75]),
    (Body::Cone, [0.25, 0.25]),
    (Body::Hill, [0.75, 0.25]),
    (Body::Staircase, [0.75, 0.75]),
];

impl Body {
    /// Value at `(x, y)` for a body centered at `c`; zero outside radius 0.15.
    pub fn eval(self, c: [f64; 2], x: f64, y: f64) -> f64 {
        let dx = x - c[0];
        let dy = y - c[1];
        let r = (dx * dx + dy * dy).sqrt() / BODY_RADIUS;
        if r > 1.0 {
            return 0.0;
        }
        match self {
            Body::SlottedCylinder => {
                // slot of width 0.05 cut from the bottom up to 0.1 above center
                if dx.abs() < 0.025 && y < c[1] + 0.1 {
                    0.0
                } else {
                    1.0
                }
            }
            Body::Cone => 1.0 - r,
            Body::Hill => 0.5 * (1.0 + (PI * r).cos()),
            Body::Staircase => {
                if r <= 0.25 {
                    1.0
                } else if r <= 0.5 {
                    0.75
                } else if r <= 0.75 {
                    0.5
                } else {
                    0.25
                }
            }
        }
    }
}

/// Superposition of the four combination-test bodies.
pub fn combination_initial(x: f64, y: f64) -> f64 {
    BODIES.iter().map(|&(b, c)| b.eval(c, x, y)).sum()
}

/// Homogeneous source and boundary data, four-body initial condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinationScenario {
    k1: f64,
    k2: f64,
}

impl CombinationScenario {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        check_kappa(k1, k2)?;
        Ok(Self { k1, k2 })
    }
}

impl Scenario for CombinationScenario {
    fn name(&self) -> String {
        "combination".into()
    }

    fn kappa(&self, side: Subdomain) -> f64 {
        match side {
            Subdomain::Left => self.k1,
            Subdomain::Right => self.k2,
        }
    }

    fn source(&self, _: Subdomain, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }

    fn dirichlet(&self, _: Subdomain, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }

    fn dirichlet_rate(&self, _: Subdomain, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }

    fn initial(&self, _: Subdomain, x: f64, y: f64) -> f64 {
        combination_initial(x, y)
    }

    fn has_forcing(&self) -> bool {
        false
    }
}

/// Everything zero; the trivial fixed point of every scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroScenario {
    pub k1: f64,
    pub k2: f64,
}

impl Scenario for ZeroScenario {
    fn name(&self) -> String {
        "zero".into()
    }

    fn kappa(&self, side: Subdomain) -> f64 {
        match side {
            Subdomain::Left => self.k1,
            Subdomain::Right => self.k2,
        }
    }

    fn source(&self, _: Subdomain, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }

    fn dirichlet(&self, _: Subdomain, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }

    fn dirichlet_rate(&self, _: Subdomain, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }

    fn initial(&self, _: Subdomain, _: f64, _: f64) -> f64 {
        0.0
    }

    fn has_forcing(&self) -> bool {
        false
    }
}

/// Isotropic Gaussian `exp(-|x - c|² / 2σ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub center: [f64; 2],
    pub sigma: f64,
}

impl Gaussian {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        (-(dx * dx + dy * dy) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Spacing and width of the training hills in units of the mesh size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFamily {
    pub spacing_h: f64,
    pub width_h: f64,
}

impl Default for GaussianFamily {
    fn default() -> Self {
        Self {
            spacing_h: 2.0,
            width_h: 2.0,
        }
    }
}

/// Hills centered on `y = 0.5` strictly inside `0 < x < 0.5`.
pub fn gaussian_training_set(spec: DomainSpec, family: GaussianFamily) -> Vec<Gaussian> {
    let h = spec.h();
    let spacing = family.spacing_h * h;
    let sigma = family.width_h * h;
    (1..)
        .map(|j| j as f64 * spacing)
        .take_while(|&x0| x0 < INTERFACE_X - 1e-12)
        .map(|x0| Gaussian {
            center: [x0, 0.5],
            sigma,
        })
        .collect()
}

/// A base scenario with its initial condition replaced by a Gaussian hill.
#[derive(Clone)]
pub struct GaussianStart {
    base: Arc<dyn Scenario>,
    hill: Gaussian,
}

impl GaussianStart {
    pub fn new(base: Arc<dyn Scenario>, hill: Gaussian) -> Self {
        Self { base, hill }
    }
}

impl Scenario for GaussianStart {
    fn name(&self) -> String {
        format!("{}+gauss({:.4})", self.base.name(), self.hill.center[0])
    }

    fn kappa(&self, side: Subdomain) -> f64 {
        self.base.kappa(side)
    }

    fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        self.base.velocity(x, y)
    }

    fn source(&self, side: Subdomain, x: f64, y: f64, t: f64) -> f64 {
        self.base.source(side, x, y, t)
    }

    fn dirichlet(&self, side: Subdomain, x: f64, y: f64, t: f64) -> f64 {
        self.base.dirichlet(side, x, y, t)
    }

    fn dirichlet_rate(&self, side: Subdomain, x: f64, y: f64, t: f64) -> f64 {
        self.base.dirichlet_rate(side, x, y, t)
    }

    fn initial(&self, _side: Subdomain, x: f64, y: f64) -> f64 {
        self.hill.eval(x, y)
    }

    fn final_time(&self) -> f64 {
        self.base.final_time()
    }

    fn has_forcing(&self) -> bool {
        self.base.has_forcing()
    }
}

/// Named scenario families selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Patch,
    Combination,
}

impl ScenarioKind {
    pub fn build(self, mu: [f64; 2]) -> Result<Arc<dyn Scenario>> {
        Ok(match self {
            ScenarioKind::Patch => Arc::new(PatchScenario::new(mu[0], mu[1])?),
            ScenarioKind::Combination => Arc::new(CombinationScenario::new(mu[0], mu[1])?),
        })
    }

    /// Scenario whose sources and boundary data the training runs keep; the
    /// Gaussian hills replace its initial condition.
    pub fn training_base(self, mu: [f64; 2]) -> Result<Arc<dyn Scenario>> {
        Ok(match self {
            ScenarioKind::Patch => Arc::new(PatchScenario::new(mu[0], mu[1])?),
            ScenarioKind::Combination => {
                check_kappa(mu[0], mu[1])?;
                Arc::new(ZeroScenario { k1: mu[0], k2: mu[1] })
            }
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Patch => "patch",
            ScenarioKind::Combination => "combination",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "patch" => Ok(ScenarioKind::Patch),
            "combination" => Ok(ScenarioKind::Combination),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

/// Relative errors `(E⁰, E¹)` of a partitioned solution against a benchmark:
/// `E^r = ½ Σ_i ‖u_X,i - u_M,i‖_r / ‖u_M,i‖_r` over all nodes of each
/// subdomain. The L² norm uses the consistent mass matrix; the H¹ norm adds
/// the seminorm from the `κ = 1` diffusion matrix.
pub fn relative_errors(
    u_x: [&DVector<f64>; 2],
    u_m: [&DVector<f64>; 2],
    ops: [&SubdomainOperators; 2],
) -> Result<(f64, f64)> {
    let mut e = (0.0, 0.0);
    for i in 0..2 {
        let mass = &ops[i].mass.all;
        if u_x[i].len() != mass.nrows() || u_m[i].len() != mass.nrows() {
            return Err(Error::Layout(format!(
                "nodal vectors of length {} and {} do not match {} mesh nodes",
                u_x[i].len(),
                u_m[i].len(),
                mass.nrows()
            )));
        }
        if u_x[i].iter().chain(u_m[i].iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("nodal values are not finite".into()));
        }
        let d = u_x[i] - u_m[i];
        let l2_d = quad_form(mass, &d).max(0.0);
        let l2_m = quad_form(mass, u_m[i]).max(0.0);
        let h1_d = l2_d + quad_form(&ops[i].laplacian, &d).max(0.0);
        let h1_m = l2_m + quad_form(&ops[i].laplacian, u_m[i]).max(0.0);
        if !(l2_m > 0.0) {
            return Err(Error::InvalidArgument("benchmark solution has zero norm".into()));
        }
        e.0 += 0.5 * (l2_d / l2_m).sqrt();
        e.1 += 0.5 * (h1_d / h1_m).sqrt();
    }
    Ok(e)
}
