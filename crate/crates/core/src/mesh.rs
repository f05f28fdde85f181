//! Structured Q1 meshes of the unit square split at `x = 0.5`.
//!
//! Nodes live on the global `(N+1) x (N+1)` lattice. Every mesh classifies its
//! nodes as interface (`γ`), interior, or Dirichlet; free degrees of freedom are
//! numbered interface first, then interior, each class lexicographically
//! (x-major, then y).

use crate::error::{Error, Result};

/// Abscissa of the interface line.
pub const INTERFACE_X: f64 = 0.5;

/// Uniform `N x N` partition of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DomainSpec {
    n: usize,
}

impl DomainSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::Mesh(format!(
                "elements per side must be a positive even integer, got {n}"
            )));
        }
        Ok(Self { n })
    }

    /// Elements per side of the full mesh.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of free interface nodes, `N - 1`.
    pub fn n_interface(&self) -> usize {
        self.n - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subdomain {
    Left,
    Right,
}

impl Subdomain {
    pub const BOTH: [Subdomain; 2] = [Subdomain::Left, Subdomain::Right];

    /// `(-1)^i` for subdomain `i`: the sign of the interface load `G_i^T λ`.
    pub fn sign(self) -> f64 {
        match self {
            Subdomain::Left => -1.0,
            Subdomain::Right => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Subdomain::Left => 0,
            Subdomain::Right => 1,
        }
    }
}

/// How a node enters the discrete system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dof {
    /// Index into the free coefficient vector.
    Free(usize),
    /// Index into the Dirichlet coefficient vector.
    Fixed(usize),
}

/// Node classes of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interface,
    Interior,
    Dirichlet,
}

/// A structured quadrilateral mesh over a column range of the global lattice.
///
/// Used both for the two subdomains and for the full-domain monolithic mesh;
/// the latter has no interface class.
#[derive(Debug, Clone)]
pub struct QuadMesh {
    spec: DomainSpec,
    subdomain: Option<Subdomain>,
    /// First and last global lattice column covered by the mesh.
    col_range: (usize, usize),
    coords: Vec<[f64; 2]>,
    lattice: Vec<(usize, usize)>,
    elements: Vec<[usize; 4]>,
    element_cols: Vec<usize>,
    dofs: Vec<Dof>,
    interface: Vec<usize>,
    interior: Vec<usize>,
    dirichlet: Vec<usize>,
}

/// Mesh of one subdomain.
pub type SubdomainMesh = QuadMesh;

impl QuadMesh {
    fn build(spec: DomainSpec, subdomain: Option<Subdomain>) -> Self {
        let n = spec.n();
        let half = n / 2;
        let (c0, c1) = match subdomain {
            Some(Subdomain::Left) => (0, half),
            Some(Subdomain::Right) => (half, n),
            None => (0, n),
        };
        let ncols = c1 - c0 + 1;
        let nrows = n + 1;
        let h = spec.h();

        let mut coords = Vec::with_capacity(ncols * nrows);
        let mut lattice = Vec::with_capacity(ncols * nrows);
        for gx in c0..=c1 {
            for gy in 0..=n {
                coords.push([gx as f64 * h, gy as f64 * h]);
                lattice.push((gx, gy));
            }
        }
        let node = |gx: usize, gy: usize| (gx - c0) * nrows + gy;

        let mut elements = Vec::with_capacity((ncols - 1) * n);
        let mut element_cols = Vec::with_capacity((ncols - 1) * n);
        for gx in c0..c1 {
            for gy in 0..n {
                // counterclockwise from the lower-left corner
                elements.push([
                    node(gx, gy),
                    node(gx + 1, gy),
                    node(gx + 1, gy + 1),
                    node(gx, gy + 1),
                ]);
                element_cols.push(gx);
            }
        }

        let classify = |gx: usize, gy: usize| -> NodeClass {
            if gy == 0 || gy == n || gx == 0 || gx == n {
                NodeClass::Dirichlet
            } else if subdomain.is_some() && gx == half {
                NodeClass::Interface
            } else {
                NodeClass::Interior
            }
        };

        let mut interface = Vec::new();
        let mut interior = Vec::new();
        let mut dirichlet = Vec::new();
        // Lattice order is already x-major then y.
        for (id, &(gx, gy)) in lattice.iter().enumerate() {
            match classify(gx, gy) {
                NodeClass::Interface => interface.push(id),
                NodeClass::Interior => interior.push(id),
                NodeClass::Dirichlet => dirichlet.push(id),
            }
        }

        let mut dofs = vec![Dof::Fixed(0); lattice.len()];
        for (k, &id) in interface.iter().chain(interior.iter()).enumerate() {
            dofs[id] = Dof::Free(k);
        }
        for (k, &id) in dirichlet.iter().enumerate() {
            dofs[id] = Dof::Fixed(k);
        }

        Self {
            spec,
            subdomain,
            col_range: (c0, c1),
            coords,
            lattice,
            elements,
            element_cols,
            dofs,
            interface,
            interior,
            dirichlet,
        }
    }

    /// Mesh of the whole unit square, used by the monolithic benchmark.
    pub fn full(spec: DomainSpec) -> Self {
        Self::build(spec, None)
    }

    pub fn spec(&self) -> DomainSpec {
        self.spec
    }

    pub fn h(&self) -> f64 {
        self.spec.h()
    }

    pub fn subdomain(&self) -> Option<Subdomain> {
        self.subdomain
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    /// Global lattice column of the element's left edge.
    pub fn element_column(&self, e: usize) -> usize {
        self.element_cols[e]
    }

    /// Global lattice position `(column, row)` of a node.
    pub fn lattice(&self, node: usize) -> (usize, usize) {
        self.lattice[node]
    }

    pub fn dof(&self, node: usize) -> Dof {
        self.dofs[node]
    }

    pub fn interface_nodes(&self) -> &[usize] {
        &self.interface
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn n_interface(&self) -> usize {
        self.interface.len()
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_dirichlet(&self) -> usize {
        self.dirichlet.len()
    }

    pub fn n_free(&self) -> usize {
        self.interface.len() + self.interior.len()
    }

    /// Node ids of the free DoFs, in free-index order.
    pub fn free_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.interface.iter().chain(self.interior.iter()).copied()
    }

    /// Free indices of the interface nodes and the `k - 1` grid lines next to
    /// them inside the subdomain. Lines are ordered by distance from the
    /// interface, nodes within a line bottom to top.
    pub fn patch_indices(&self, k: usize) -> Result<Vec<usize>> {
        let side = self
            .subdomain
            .ok_or_else(|| Error::Mesh("patches are defined on subdomain meshes only".into()))?;
        let half = self.spec.n() / 2;
        if k == 0 || k > half {
            return Err(Error::Mesh(format!(
                "patch size {k} must lie in 1..={half} for N = {}",
                self.spec.n()
            )));
        }
        let nrows = self.spec.n() + 1;
        let mut out = Vec::with_capacity(k * (self.spec.n() - 1));
        for d in 0..k {
            let gx = match side {
                Subdomain::Left => half - d,
                Subdomain::Right => half + d,
            };
            for gy in 1..self.spec.n() {
                let id = (gx - self.col_range.0) * nrows + gy;
                match self.dofs[id] {
                    Dof::Free(f) => out.push(f),
                    Dof::Fixed(_) => unreachable!("patch lines never touch the boundary"),
                }
            }
        }
        Ok(out)
    }

    /// Band position of every free DoF: free DoFs sorted geometrically
    /// (x-major, then y), which keeps Q1 matrices within a half-bandwidth of
    /// `N` regardless of the class-wise free numbering.
    pub(crate) fn band_order(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.free_nodes().collect();
        nodes.sort_by_key(|&id| self.lattice[id]);
        let mut pos = vec![0; self.n_free()];
        for (p, id) in nodes.into_iter().enumerate() {
            if let Dof::Free(f) = self.dofs[id] {
                pos[f] = p;
            }
        }
        pos
    }
}

/// Build the two subdomain meshes induced by the full `N x N` partition.
pub fn build_meshes(spec: DomainSpec) -> (SubdomainMesh, SubdomainMesh) {
    (
        QuadMesh::build(spec, Some(Subdomain::Left)),
        QuadMesh::build(spec, Some(Subdomain::Right)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_zero() {
        assert!(DomainSpec::new(0).is_err());
        assert!(DomainSpec::new(5).is_err());
        assert!(DomainSpec::new(2).is_ok());
    }

    #[test]
    fn n4_counts() {
        let (m1, m2) = build_meshes(DomainSpec::new(4).unwrap());
        for m in [&m1, &m2] {
            assert_eq!(m.elements().len(), 8);
            assert_eq!(m.num_nodes(), 15);
            assert_eq!(m.n_interface(), 3);
            // 3 x 5 lattice: one interior column of 3 nodes, the rest fixed
            assert_eq!(m.n_interior(), 3);
            assert_eq!(m.n_dirichlet(), 9);
        }
    }

    #[test]
    fn n2_smallest() {
        let (m1, _) = build_meshes(DomainSpec::new(2).unwrap());
        assert_eq!(m1.n_interface(), 1);
        assert_eq!(m1.n_interior(), 0);
    }

    #[test]
    fn n64_interface() {
        let spec = DomainSpec::new(64).unwrap();
        let (m1, m2) = build_meshes(spec);
        assert_eq!(m1.n_interface(), 63);
        assert_eq!(m2.n_interface(), 63);
        assert_eq!(spec.h(), 1.0 / 64.0);
    }

    #[test]
    fn interface_nodes_match() {
        let (m1, m2) = build_meshes(DomainSpec::new(16).unwrap());
        for (&a, &b) in m1.interface_nodes().iter().zip(m2.interface_nodes()) {
            assert_eq!(m1.coords()[a], m2.coords()[b]);
            assert_eq!(m1.coords()[a][0], INTERFACE_X);
        }
        // endpoints of the interface are Dirichlet nodes
        let ends = m1
            .dirichlet_nodes()
            .iter()
            .filter(|&&d| m1.coords()[d][0] == INTERFACE_X)
            .count();
        assert_eq!(ends, 2);
    }

    #[test]
    fn classes_partition_nodes() {
        for n in [2, 4, 8, 16] {
            let (m1, m2) = build_meshes(DomainSpec::new(n).unwrap());
            for m in [&m1, &m2, &QuadMesh::full(DomainSpec::new(n).unwrap())] {
                let mut seen = vec![0u8; m.num_nodes()];
                for &id in m
                    .interface_nodes()
                    .iter()
                    .chain(m.interior_nodes())
                    .chain(m.dirichlet_nodes())
                {
                    seen[id] += 1;
                }
                assert!(seen.iter().all(|&c| c == 1));
            }
        }
    }

    #[test]
    fn elements_are_counterclockwise() {
        let (m1, _) = build_meshes(DomainSpec::new(4).unwrap());
        for el in m1.elements() {
            let p: Vec<[f64; 2]> = el.iter().map(|&i| m1.coords()[i]).collect();
            let mut area2 = 0.0;
            for a in 0..4 {
                let b = (a + 1) % 4;
                area2 += p[a][0] * p[b][1] - p[b][0] * p[a][1];
            }
            assert!(area2 > 0.0);
            assert!(p[0][0] < p[1][0] && p[0][1] < p[3][1]);
        }
    }

    #[test]
    fn patch_sizes() {
        let (m1, m2) = build_meshes(DomainSpec::new(64).unwrap());
        assert_eq!(m1.patch_indices(2).unwrap().len(), 126);
        assert_eq!(m2.patch_indices(2).unwrap().len(), 126);
        let (s1, _) = build_meshes(DomainSpec::new(4).unwrap());
        assert_eq!(s1.patch_indices(2).unwrap().len(), 6);
        assert!(s1.patch_indices(3).is_err());
        assert!(s1.patch_indices(0).is_err());
    }

    #[test]
    fn patch_of_one_line_is_interface() {
        let (m1, m2) = build_meshes(DomainSpec::new(16).unwrap());
        for m in [&m1, &m2] {
            let p = m.patch_indices(1).unwrap();
            assert_eq!(p, (0..m.n_interface()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn patch_second_line_at_distance_h() {
        let spec = DomainSpec::new(8).unwrap();
        let (m1, m2) = build_meshes(spec);
        for (m, x) in [(&m1, 0.5 - spec.h()), (&m2, 0.5 + spec.h())] {
            let free: Vec<usize> = m.free_nodes().collect();
            let p = m.patch_indices(2).unwrap();
            let second = &p[m.n_interface()..];
            let mut last_y = 0.0;
            for &f in second {
                let c = m.coords()[free[f]];
                assert!((c[0] - x).abs() < 1e-15);
                assert!(c[1] > last_y);
                last_y = c[1];
            }
        }
    }

    #[test]
    fn band_order_is_permutation() {
        let (m1, _) = build_meshes(DomainSpec::new(8).unwrap());
        let mut pos = m1.band_order();
        pos.sort_unstable();
        assert_eq!(pos, (0..m1.n_free()).collect::<Vec<_>>());
    }
}
