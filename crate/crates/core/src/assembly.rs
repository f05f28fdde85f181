//! Bilinear (Q1) finite-element assembly on the structured meshes.
//!
//! Element integrals use 2x2 Gauss quadrature, which is exact for the mass
//! matrix and for every term of the stiffness matrix with the rotating
//! (affine) velocity field on rectangular elements.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::linalg::BandedCholesky;
use crate::mesh::{Dof, QuadMesh, Subdomain};
use crate::scenarios::{side_of, Scenario};

/// Mass matrix variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MassVariant {
    Consistent,
    Lumped,
}

/// How discrete initial data is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMethod {
    Interpolation,
    #[default]
    Projection,
}

const GAUSS: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Q1 shape values and reference gradients at one quadrature point.
#[derive(Debug, Clone, Copy)]
struct QuadPoint {
    xi: [f64; 2],
    n: [f64; 4],
    dn: [[f64; 2]; 4],
}

fn quad_points() -> [QuadPoint; 4] {
    let mut out = [QuadPoint {
        xi: [0.0; 2],
        n: [0.0; 4],
        dn: [[0.0; 2]; 4],
    }; 4];
    let mut q = 0;
    for &eta in &GAUSS {
        for &xi in &GAUSS {
            let mut p = QuadPoint {
                xi: [xi, eta],
                n: [0.0; 4],
                dn: [[0.0; 2]; 4],
            };
            for (a, c) in CORNERS.iter().enumerate() {
                p.n[a] = 0.25 * (1.0 + c[0] * xi) * (1.0 + c[1] * eta);
                p.dn[a] = [
                    0.25 * c[0] * (1.0 + c[1] * eta),
                    0.25 * c[1] * (1.0 + c[0] * xi),
                ];
            }
            out[q] = p;
            q += 1;
        }
    }
    out
}

/// Geometry of an axis-aligned square element with lower-left corner `origin`.
#[derive(Debug, Clone, Copy)]
struct Element {
    origin: [f64; 2],
    h: f64,
}

impl Element {
    fn of(mesh: &QuadMesh, e: usize) -> Self {
        Element {
            origin: mesh.coords()[mesh.elements()[e][0]],
            h: mesh.h(),
        }
    }

    fn point(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + 0.5 * (xi[0] + 1.0) * self.h,
            self.origin[1] + 0.5 * (xi[1] + 1.0) * self.h,
        ]
    }

    fn det_j(&self) -> f64 {
        0.25 * self.h * self.h
    }

    fn grad(&self, dn: [f64; 2]) -> [f64; 2] {
        let s = 2.0 / self.h;
        [dn[0] * s, dn[1] * s]
    }
}

/// Consistent element mass matrix.
pub fn element_mass(h: f64) -> [[f64; 4]; 4] {
    let el = Element {
        origin: [0.0, 0.0],
        h,
    };
    let mut m = [[0.0; 4]; 4];
    for q in quad_points() {
        let w = el.det_j();
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] += w * q.n[a] * q.n[b];
            }
        }
    }
    m
}

/// Element matrix of `(κ∇u - v u, ∇w)` for an element at `origin`.
pub fn element_stiffness(
    origin: [f64; 2],
    h: f64,
    kappa: f64,
    velocity: &dyn Fn(f64, f64) -> [f64; 2],
) -> [[f64; 4]; 4] {
    let el = Element { origin, h };
    let mut k = [[0.0; 4]; 4];
    for q in quad_points() {
        let w = el.det_j();
        let [x, y] = el.point(q.xi);
        let v = velocity(x, y);
        let g: [[f64; 2]; 4] = std::array::from_fn(|a| el.grad(q.dn[a]));
        for a in 0..4 {
            let v_dot_ga = v[0] * g[a][0] + v[1] * g[a][1];
            for b in 0..4 {
                let diff = kappa * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                k[a][b] += w * (diff - q.n[b] * v_dot_ga);
            }
        }
    }
    k
}

/// A nodal matrix split into its free-free and free-Dirichlet blocks.
#[derive(Debug, Clone)]
pub struct SplitMatrix {
    pub ff: CsrMatrix<f64>,
    pub fd: CsrMatrix<f64>,
    /// The same matrix over all nodes, in node order.
    pub all: CsrMatrix<f64>,
}

fn assemble_split(mesh: &QuadMesh, mut element: impl FnMut(usize) -> [[f64; 4]; 4]) -> SplitMatrix {
    let nf = mesh.n_free();
    let nd = mesh.n_dirichlet();
    let nn = mesh.num_nodes();
    let mut ff = CooMatrix::new(nf, nf);
    let mut fd = CooMatrix::new(nf, nd);
    let mut all = CooMatrix::new(nn, nn);
    for (e, nodes) in mesh.elements().iter().enumerate() {
        let ke = element(e);
        for a in 0..4 {
            for b in 0..4 {
                let v = ke[a][b];
                all.push(nodes[a], nodes[b], v);
                if let Dof::Free(i) = mesh.dof(nodes[a]) {
                    match mesh.dof(nodes[b]) {
                        Dof::Free(j) => ff.push(i, j, v),
                        Dof::Fixed(j) => fd.push(i, j, v),
                    }
                }
            }
        }
    }
    SplitMatrix {
        ff: CsrMatrix::from(&ff),
        fd: CsrMatrix::from(&fd),
        all: CsrMatrix::from(&all),
    }
}

/// Mass matrix over free DoFs. The lumped variant is assembled from
/// element row sums, so its diagonal equals the full-row sums (Dirichlet
/// columns included) of the consistent matrix and its free-Dirichlet block
/// vanishes.
pub fn assemble_mass(mesh: &QuadMesh, variant: MassVariant) -> SplitMatrix {
    let me = element_mass(mesh.h());
    match variant {
        MassVariant::Consistent => assemble_split(mesh, |_| me),
        MassVariant::Lumped => {
            let mut ml = [[0.0; 4]; 4];
            for a in 0..4 {
                ml[a][a] = me[a].iter().sum();
            }
            assemble_split(mesh, |_| ml)
        }
    }
}

/// Diffusion coefficient of an element of a (sub)domain mesh.
fn element_side(mesh: &QuadMesh, e: usize) -> Subdomain {
    mesh.subdomain()
        .unwrap_or_else(|| side_of(mesh.coords()[mesh.elements()[e][0]][0] + 0.5 * mesh.h()))
}

/// Stiffness matrix of `(κ∇u - v u, ∇w)` with constant `κ ≥ 0`.
pub fn assemble_stiffness(
    mesh: &QuadMesh,
    kappa: f64,
    velocity: &dyn Fn(f64, f64) -> [f64; 2],
) -> Result<SplitMatrix> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "diffusion coefficient must be nonnegative, got {kappa}"
        )));
    }
    Ok(assemble_split(mesh, |e| {
        element_stiffness(Element::of(mesh, e).origin, mesh.h(), kappa, velocity)
    }))
}

/// Stiffness with the scenario's per-side diffusion and velocity.
fn assemble_scenario_stiffness(mesh: &QuadMesh, scenario: &dyn Scenario) -> SplitMatrix {
    let v = |x: f64, y: f64| scenario.velocity(x, y);
    assemble_split(mesh, |e| {
        let kappa = scenario.kappa(element_side(mesh, e));
        element_stiffness(Element::of(mesh, e).origin, mesh.h(), kappa, &v)
    })
}

/// Interface mass matrix realizing `⟨λ, w⟩_γ` on the free interface nodes.
///
/// The multiplier lives in the trace space of `mesh_l`; with matching nodes the
/// result is the same for either side.
pub fn assemble_constraint(mesh_l: &QuadMesh, mesh_i: &QuadMesh) -> Result<DMatrix<f64>> {
    let n = mesh_l.n_interface();
    if mesh_l.subdomain().is_none() || mesh_i.subdomain().is_none() {
        return Err(Error::Mesh("constraint needs two subdomain meshes".into()));
    }
    if n != mesh_i.n_interface() {
        return Err(Error::Mesh(format!(
            "interface node counts differ: {n} vs {}",
            mesh_i.n_interface()
        )));
    }
    let h = mesh_l.h();
    // 1D linear elements between consecutive trace nodes, endpoints excluded
    let mut g = DMatrix::zeros(n, n);
    let local = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
    for seg in 0..=n {
        let ends = [seg.checked_sub(1), (seg < n).then_some(seg)];
        for a in 0..2 {
            for b in 0..2 {
                if let (Some(i), Some(j)) = (ends[a], ends[b]) {
                    g[(i, j)] += local[a][b];
                }
            }
        }
    }
    Ok(g)
}

/// Precomputed quadrature data for load assembly.
#[derive(Debug, Clone)]
pub struct LoadAssembler {
    /// Per element: side, node ids, physical quadrature points.
    elements: Vec<(Subdomain, [usize; 4], [[f64; 2]; 4])>,
    shape: [[f64; 4]; 4],
    weight: f64,
    dirichlet_coords: Vec<[f64; 2]>,
    dirichlet_sides: Vec<Subdomain>,
    dofs: Vec<Dof>,
    n_free: usize,
}

impl LoadAssembler {
    pub fn new(mesh: &QuadMesh) -> Self {
        let qps = quad_points();
        let elements = (0..mesh.elements().len())
            .map(|e| {
                let el = Element::of(mesh, e);
                (
                    element_side(mesh, e),
                    mesh.elements()[e],
                    std::array::from_fn(|q| el.point(qps[q].xi)),
                )
            })
            .collect();
        let dirichlet_coords: Vec<[f64; 2]> =
            mesh.dirichlet_nodes().iter().map(|&d| mesh.coords()[d]).collect();
        let dirichlet_sides = dirichlet_coords
            .iter()
            .map(|c| mesh.subdomain().unwrap_or_else(|| side_of(c[0])))
            .collect();
        Self {
            elements,
            shape: std::array::from_fn(|q| qps[q].n),
            weight: 0.25 * mesh.h() * mesh.h(),
            dirichlet_coords,
            dirichlet_sides,
            dofs: (0..mesh.num_nodes()).map(|i| mesh.dof(i)).collect(),
            n_free: mesh.n_free(),
        }
    }

    /// `(f, φ_a)` over free DoFs.
    pub fn source_load(&self, f: impl Fn(Subdomain, f64, f64) -> f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (side, nodes, pts) in &self.elements {
            let fq: [f64; 4] = std::array::from_fn(|q| f(*side, pts[q][0], pts[q][1]));
            for (a, &node) in nodes.iter().enumerate() {
                if let Dof::Free(i) = self.dofs[node] {
                    let s: f64 = (0..4).map(|q| self.shape[q][a] * fq[q]).sum();
                    out[i] += self.weight * s;
                }
            }
        }
    }

    pub fn dirichlet_values(&self, g: impl Fn(Subdomain, f64, f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(
            self.dirichlet_coords.len(),
            self.dirichlet_coords
                .iter()
                .zip(&self.dirichlet_sides)
                .map(|(c, &s)| g(s, c[0], c[1])),
        )
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }
}

/// All operators of one (sub)domain semi-discrete system
/// `M u̇ + K u = b(t) + interface load`.
#[derive(Debug, Clone)]
pub struct SubdomainOperators {
    pub mass: SplitMatrix,
    /// Diagonal of the lumped mass over free DoFs.
    pub lumped: DVector<f64>,
    pub stiffness: SplitMatrix,
    /// Pure diffusion (`κ = 1`, `v = 0`) matrix over all nodes, for H¹ seminorms.
    pub laplacian: CsrMatrix<f64>,
    /// Interface mass matrix `G` (`n_γ x n_γ`); zero-sized on the full mesh.
    pub constraint: DMatrix<f64>,
    pub load: LoadAssembler,
    band_order: Vec<usize>,
    n_interface: usize,
}

impl SubdomainOperators {
    /// Assemble everything for `mesh` with the scenario's coefficients.
    /// `partner` is the other subdomain, used for the constraint matrix.
    pub fn assemble(mesh: &QuadMesh, partner: Option<&QuadMesh>, scenario: &dyn Scenario) -> Result<Self> {
        let mass = assemble_mass(mesh, MassVariant::Consistent);
        let lumped_split = assemble_mass(mesh, MassVariant::Lumped);
        let lumped = DVector::from_iterator(
            mesh.n_free(),
            (0..mesh.n_free()).map(|i| {
                let row = lumped_split.ff.row(i);
                row.get_entry(i).map(|e| e.into_value()).unwrap_or(0.0)
            }),
        );
        let stiffness = assemble_scenario_stiffness(mesh, scenario);
        let laplacian = assemble_stiffness(mesh, 1.0, &|_, _| [0.0, 0.0])?.all;
        let constraint = match partner {
            Some(p) => assemble_constraint(mesh, p)?,
            None => DMatrix::zeros(0, 0),
        };
        Ok(Self {
            mass,
            lumped,
            stiffness,
            laplacian,
            constraint,
            load: LoadAssembler::new(mesh),
            band_order: mesh.band_order(),
            n_interface: mesh.n_interface(),
        })
    }

    pub fn n_free(&self) -> usize {
        self.lumped.len()
    }

    pub fn n_interface(&self) -> usize {
        self.n_interface
    }

    /// Banded Cholesky of the consistent free-free mass matrix.
    pub fn factor_mass(&self) -> Result<BandedCholesky> {
        BandedCholesky::factor(&self.mass.ff, self.band_order.clone())
    }

    /// `b(t) = (f, φ) - K_fd g(t) - M_fd ġ(t)` over free DoFs. The mass lift
    /// term is absent for the lumped variant, whose free-Dirichlet block is zero.
    pub fn assemble_load(
        &self,
        scenario: &dyn Scenario,
        t: f64,
        variant: MassVariant,
        out: &mut DVector<f64>,
    ) {
        if !scenario.has_forcing() {
            out.fill(0.0);
            return;
        }
        self.load
            .source_load(|s, x, y| scenario.source(s, x, y, t), out.as_mut_slice());
        let g = self.load.dirichlet_values(|s, x, y| scenario.dirichlet(s, x, y, t));
        spmv_sub(&self.stiffness.fd, &g, out);
        if variant == MassVariant::Consistent {
            let gdot = self
                .load
                .dirichlet_values(|s, x, y| scenario.dirichlet_rate(s, x, y, t));
            spmv_sub(&self.mass.fd, &gdot, out);
        }
    }

    /// Discrete initial data over free DoFs. `lift` holds the Dirichlet nodal
    /// values the projection is taken relative to; by default the nodal values
    /// of `u0` itself.
    pub fn set_initial(
        &self,
        mesh: &QuadMesh,
        u0: &dyn Fn(Subdomain, f64, f64) -> f64,
        method: InitMethod,
        lift: Option<&DVector<f64>>,
    ) -> Result<DVector<f64>> {
        match method {
            InitMethod::Interpolation => Ok(interpolate(mesh, u0)),
            InitMethod::Projection => {
                let mut rhs = self.projection_rhs(u0, lift);
                let chol = self.factor_mass()?;
                let mut work = vec![0.0; chol.dim()];
                chol.solve_into(rhs.as_mut_slice(), &mut work);
                Ok(rhs)
            }
        }
    }

    /// `(u0, φ_a) - M_fd lift` over free DoFs.
    pub fn projection_rhs(
        &self,
        u0: &dyn Fn(Subdomain, f64, f64) -> f64,
        lift: Option<&DVector<f64>>,
    ) -> DVector<f64> {
        let mut rhs = DVector::zeros(self.n_free());
        self.load.source_load(u0, rhs.as_mut_slice());
        let own;
        let lift = match lift {
            Some(l) => l,
            None => {
                own = self.load.dirichlet_values(u0);
                &own
            }
        };
        spmv_sub(&self.mass.fd, lift, &mut rhs);
        rhs
    }
}

/// Nodal interpolant over free DoFs.
pub fn interpolate(mesh: &QuadMesh, u0: &dyn Fn(Subdomain, f64, f64) -> f64) -> DVector<f64> {
    let mut out = DVector::zeros(mesh.n_free());
    for node in 0..mesh.num_nodes() {
        if let Dof::Free(i) = mesh.dof(node) {
            let [x, y] = mesh.coords()[node];
            let side = mesh.subdomain().unwrap_or_else(|| side_of(x));
            out[i] = u0(side, x, y);
        }
    }
    out
}

/// `out -= A x`.
pub fn spmv_sub(a: &CsrMatrix<f64>, x: &DVector<f64>, out: &mut DVector<f64>) {
    for (i, row) in a.row_iter().enumerate() {
        let s: f64 = row
            .col_indices()
            .iter()
            .zip(row.values())
            .map(|(&j, &v)| v * x[j])
            .sum();
        out[i] -= s;
    }
}

/// `out = A x`.
pub fn spmv(a: &CsrMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (i, row) in a.row_iter().enumerate() {
        out[i] = row
            .col_indices()
            .iter()
            .zip(row.values())
            .map(|(&j, &v)| v * x[j])
            .sum();
    }
}

/// Quadratic form `xᵀ A x`.
pub fn quad_form(a: &CsrMatrix<f64>, x: &DVector<f64>) -> f64 {
    let mut ax = vec![0.0; a.nrows()];
    spmv(a, x.as_slice(), &mut ax);
    ax.iter().zip(x.iter()).map(|(p, q)| p * q).sum()
}
