use crate::error::{invalid, BemError, Result};
use crate::geometry::{BcTag, TriangleMesh, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Formulation {
    Collocation,
    Galerkin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// Piecewise constant, one dof per element.
    P0,
    /// Continuous piecewise linear, one dof per vertex.
    P1,
}

/// Scalar basis on a mesh. Vector fields use three components per dof.
#[derive(Clone, Debug)]
pub struct BasisSpace {
    pub kind: BasisKind,
    /// Element centroid (P0) or vertex (P1) per dof.
    pub centers: Vec<Vec3>,
    /// Elements in the support of each dof.
    pub supports: Vec<Vec<usize>>,
}

impl BasisSpace {
    pub fn p0(mesh: &TriangleMesh) -> Self {
        BasisSpace {
            kind: BasisKind::P0,
            centers: mesh.elements().iter().map(|e| e.centroid).collect(),
            supports: (0..mesh.num_triangles()).map(|k| vec![k]).collect(),
        }
    }

    pub fn p1(mesh: &TriangleMesh) -> Self {
        BasisSpace { kind: BasisKind::P1, centers: mesh.vertices.clone(), supports: mesh.vertex_stars() }
    }

    pub fn dof_count(&self) -> usize {
        self.centers.len()
    }

    /// Value of basis function `dof` at the point with reference
    /// coordinates (u, v) of element `elem`.
    pub fn eval(&self, mesh: &TriangleMesh, dof: usize, elem: usize, u: f64, v: f64) -> f64 {
        match self.kind {
            BasisKind::P0 => f64::from(u8::from(dof == elem)),
            BasisKind::P1 => {
                let t = mesh.triangles[elem];
                let lam = [1.0 - u - v, u, v];
                (0..3).filter(|&i| t[i] == dof).map(|i| lam[i]).sum()
            }
        }
    }

    /// Largest distance from a dof center to a point of its support.
    pub fn support_radius(&self, mesh: &TriangleMesh) -> f64 {
        let mut r: f64 = 0.0;
        for (c, sup) in self.centers.iter().zip(&self.supports) {
            for &e in sup {
                for p in &mesh.element(e).p {
                    r = r.max((p - c).norm());
                }
            }
        }
        r
    }
}

/// Element and vertex partition induced by the boundary condition tags.
#[derive(Clone, Debug)]
pub struct MixedLayout {
    pub dirichlet_elements: Vec<usize>,
    pub neumann_elements: Vec<usize>,
    /// Vertices touching at least one Dirichlet element.
    pub dirichlet_nodes: Vec<usize>,
    /// Vertices whose star is entirely Neumann; these carry unknowns.
    pub unknown_nodes: Vec<usize>,
    pub node_is_dirichlet: Vec<bool>,
}

impl MixedLayout {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        if mesh.tags.len() != mesh.num_triangles() {
            return Err(BemError::DimensionMismatch { expected: mesh.num_triangles(), got: mesh.tags.len() });
        }
        if mesh.num_triangles() == 0 {
            return Err(BemError::InvalidProblem("mesh has no elements".into()));
        }
        let mut node_is_dirichlet = vec![false; mesh.num_vertices()];
        let mut dirichlet_elements = Vec::new();
        let mut neumann_elements = Vec::new();
        for (k, tag) in mesh.tags.iter().enumerate() {
            match tag {
                BcTag::Dirichlet => {
                    dirichlet_elements.push(k);
                    for &i in &mesh.triangles[k] {
                        node_is_dirichlet[i] = true;
                    }
                }
                BcTag::Neumann => neumann_elements.push(k),
            }
        }
        let dirichlet_nodes = (0..mesh.num_vertices()).filter(|&i| node_is_dirichlet[i]).collect();
        let unknown_nodes = (0..mesh.num_vertices()).filter(|&i| !node_is_dirichlet[i]).collect();
        Ok(MixedLayout { dirichlet_elements, neumann_elements, dirichlet_nodes, unknown_nodes, node_is_dirichlet })
    }

    pub fn is_pure_neumann(&self) -> bool {
        self.dirichlet_elements.is_empty()
    }

    /// Number of scalar unknowns: three per Dirichlet element and per free node.
    pub fn unknown_count(&self) -> usize {
        3 * (self.dirichlet_elements.len() + self.unknown_nodes.len())
    }
}

/// Boundary data and solution coefficients, three components per dof.
///
/// `g_d` is the P1 extension of the Dirichlet data (zero on nodes whose
/// star is Neumann); `g_n` is the P0 extension of the Neumann data (zero on
/// Dirichlet elements). `u` and `t` hold the complete Cauchy data once
/// solved.
#[derive(Clone, Debug)]
pub struct MixedTraceData {
    pub u: Vec<f64>,
    pub t: Vec<f64>,
    pub g_d: Vec<f64>,
    pub g_n: Vec<f64>,
    pub u_known: Vec<bool>,
    pub t_known: Vec<bool>,
}

impl MixedTraceData {
    /// Interpolates `g_d` at Dirichlet nodes and averages `g_n` over
    /// Neumann elements with the given triangle rule degree.
    pub fn from_boundary_data(
        mesh: &TriangleMesh,
        layout: &MixedLayout,
        g_d: impl Fn(&Vec3) -> Vec3,
        g_n: impl Fn(&Vec3, &Vec3) -> Vec3,
        order: usize,
    ) -> Result<Self> {
        let rule = crate::quadrature::triangle_rule(order)?;
        let nv = mesh.num_vertices();
        let ne = mesh.num_triangles();
        let mut gd = vec![0.0; 3 * nv];
        for &i in &layout.dirichlet_nodes {
            let v = g_d(&mesh.vertices[i]);
            gd[3 * i..3 * i + 3].copy_from_slice(v.as_slice());
        }
        let mut gn = vec![0.0; 3 * ne];
        for &k in &layout.neumann_elements {
            let el = mesh.element(k);
            let mut acc = Vec3::zeros();
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                acc += g_n(&el.map(p[0], p[1]), &el.normal) * (2.0 * w);
            }
            gn[3 * k..3 * k + 3].copy_from_slice(acc.as_slice());
        }
        Ok(Self::from_extensions(layout, gd, gn))
    }

    pub fn from_extensions(layout: &MixedLayout, g_d: Vec<f64>, g_n: Vec<f64>) -> Self {
        let u_known = layout.node_is_dirichlet.clone();
        let mut t_known = vec![true; g_n.len() / 3];
        for &k in &layout.dirichlet_elements {
            t_known[k] = false;
        }
        MixedTraceData { u: g_d.clone(), t: g_n.clone(), g_d, g_n, u_known, t_known }
    }

    pub fn check(&self, mesh: &TriangleMesh) -> Result<()> {
        if self.g_d.len() != 3 * mesh.num_vertices() {
            return Err(BemError::DimensionMismatch { expected: 3 * mesh.num_vertices(), got: self.g_d.len() });
        }
        if self.g_n.len() != 3 * mesh.num_triangles() {
            return Err(BemError::DimensionMismatch { expected: 3 * mesh.num_triangles(), got: self.g_n.len() });
        }
        Ok(())
    }

    /// Packs the unknown parts of (t, u) in layout order.
    pub fn pack_unknowns(&self, layout: &MixedLayout) -> Vec<f64> {
        let mut x = Vec::with_capacity(layout.unknown_count());
        for &k in &layout.dirichlet_elements {
            x.extend_from_slice(&self.t[3 * k..3 * k + 3]);
        }
        for &i in &layout.unknown_nodes {
            x.extend_from_slice(&self.u[3 * i..3 * i + 3]);
        }
        x
    }

    /// Writes unknowns back: u = ũ + g̃_D, t = t̃ + g̃_N.
    pub fn unpack_unknowns(&mut self, layout: &MixedLayout, x: &[f64]) -> Result<()> {
        if x.len() != layout.unknown_count() {
            return invalid(format!("expected {} unknowns, got {}", layout.unknown_count(), x.len()));
        }
        self.u = self.g_d.clone();
        self.t = self.g_n.clone();
        let nd = layout.dirichlet_elements.len();
        for (a, &k) in layout.dirichlet_elements.iter().enumerate() {
            for c in 0..3 {
                self.t[3 * k + c] += x[3 * a + c];
            }
        }
        for (a, &i) in layout.unknown_nodes.iter().enumerate() {
            for c in 0..3 {
                self.u[3 * i + c] += x[3 * (nd + a) + c];
            }
        }
        Ok(())
    }
}

pub(crate) fn restrict(idx: &[usize], full: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * idx.len());
    for &i in idx {
        out.extend_from_slice(&full[3 * i..3 * i + 3]);
    }
    out
}
