use rayon::prelude::*;

use crate::error::{BemError, Result};
use crate::geometry::{open_boundary, EdgeSet, Mat3, TriangleMesh, Vec3};
use crate::kernels::{kelvin_coefficients, MaterialParams};
use crate::linalg::{DenseMatrix, LinearMap};
use crate::quadrature::QuadConfig;

use super::dofs::MixedLayout;
use super::lines::{k_line_block, k_surface_block, point_edge_integrals, sym_to_mat};
use super::local::{point_element, PointLocation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CollocationPoint {
    Node(usize),
    Centroid(usize),
}

impl CollocationPoint {
    pub fn position(&self, mesh: &TriangleMesh) -> Vec3 {
        match *self {
            CollocationPoint::Node(i) => mesh.vertices[i],
            CollocationPoint::Centroid(k) => mesh.element(k).centroid,
        }
    }

    pub(crate) fn location(&self, mesh: &TriangleMesh, elem: usize) -> PointLocation {
        match *self {
            CollocationPoint::Node(i) => match mesh.triangles[elem].iter().position(|&v| v == i) {
                Some(local) => PointLocation::Vertex(local),
                None => PointLocation::Off,
            },
            CollocationPoint::Centroid(k) if k == elem => PointLocation::Interior([1.0 / 3.0, 1.0 / 3.0]),
            CollocationPoint::Centroid(_) => PointLocation::Off,
        }
    }

    /// P1 hat weights (node, value) at this point.
    pub fn p1_weights(&self, mesh: &TriangleMesh) -> Vec<(usize, f64)> {
        match *self {
            CollocationPoint::Node(i) => vec![(i, 1.0)],
            CollocationPoint::Centroid(k) => mesh.triangles[k].iter().map(|&i| (i, 1.0 / 3.0)).collect(),
        }
    }
}

/// Centroids of Dirichlet elements followed by the free nodes.
pub fn mixed_collocation_points(layout: &MixedLayout) -> Vec<CollocationPoint> {
    layout
        .dirichlet_elements
        .iter()
        .map(|&k| CollocationPoint::Centroid(k))
        .chain(layout.unknown_nodes.iter().map(|&i| CollocationPoint::Node(i)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FreeTerm {
    /// −Σ_j K_ij, exact for rigid translations; closed surfaces.
    RowSum,
    /// ½ I; smooth points and flat open sheets.
    Half,
}

#[derive(Clone, Debug)]
pub struct CollocationOptions {
    pub line_integrals: bool,
    /// `None` picks row sums on closed meshes and ½ I otherwise.
    pub free_term: Option<FreeTerm>,
    /// Element columns kept in V; `None` keeps all.
    pub v_elements: Option<Vec<usize>>,
    pub assemble_k: bool,
}

impl Default for CollocationOptions {
    fn default() -> Self {
        CollocationOptions { line_integrals: false, free_term: None, v_elements: None, assemble_k: true }
    }
}

/// Collocation blocks: single layer V (3P × 3|v_elements|), double layer K
/// without free term (3P × 3N) and the free term per point.
#[derive(Clone, Debug)]
pub struct CollocationOperators {
    pub points: Vec<CollocationPoint>,
    pub v_elements: Vec<usize>,
    pub v: DenseMatrix,
    pub k: DenseMatrix,
    pub free_terms: Vec<Mat3>,
}

impl CollocationOperators {
    /// Adds the free terms to `k` in place, turning it into C + K.
    pub fn add_free_terms(&mut self, mesh: &TriangleMesh) {
        for (i, pt) in self.points.iter().enumerate() {
            for (node, w) in pt.p1_weights(mesh) {
                self.k.add_block(i, node, &(self.free_terms[i] * w));
            }
        }
    }

    pub fn bytes(&self) -> usize {
        self.v.bytes() + self.k.bytes()
    }
}

/// Row sums −Σ_j K_ij as 3×3 blocks.
pub fn row_sum_free_terms(k: &dyn LinearMap) -> Vec<Mat3> {
    let np = k.nrows() / 3;
    let nn = k.ncols() / 3;
    let mut c = vec![Mat3::zeros(); np];
    for b in 0..3 {
        let mut ones = vec![0.0; 3 * nn];
        for i in 0..nn {
            ones[3 * i + b] = 1.0;
        }
        let y = k.apply_vec(&ones);
        for (i, ci) in c.iter_mut().enumerate() {
            for a in 0..3 {
                ci[(a, b)] = -y[3 * i + a];
            }
        }
    }
    c
}

fn row_chunks(data: &mut [f64], chunk: usize, n: usize) -> Vec<&mut [f64]> {
    if chunk == 0 {
        (0..n).map(|_| <&mut [f64]>::default()).collect()
    } else {
        data.chunks_mut(chunk).collect()
    }
}

/// Collocation operators on arbitrary points. Line integrals run over the
/// open boundary of the mesh when enabled.
pub fn assemble_collocation(
    mesh: &TriangleMesh,
    points: &[CollocationPoint],
    mat: &MaterialParams,
    cfg: &QuadConfig,
    opts: &CollocationOptions,
) -> Result<CollocationOperators> {
    let ne = mesh.num_triangles();
    let nn = mesh.num_vertices();
    for p in points {
        let ok = match *p {
            CollocationPoint::Node(i) => i < nn,
            CollocationPoint::Centroid(k) => k < ne,
        };
        if !ok {
            return Err(BemError::InvalidArgument(format!("collocation point {p:?} out of range")));
        }
    }
    let v_elements: Vec<usize> = opts.v_elements.clone().unwrap_or_else(|| (0..ne).collect());
    let mut v_col = vec![usize::MAX; ne];
    for (c, &k) in v_elements.iter().enumerate() {
        if k >= ne {
            return Err(BemError::InvalidArgument(format!("element {k} out of range")));
        }
        v_col[k] = c;
    }
    let edges = if opts.line_integrals { open_boundary(mesh, None) } else { EdgeSet::default() };
    let ab = kelvin_coefficients(mat);
    let mu = mat.mu;
    let np = points.len();
    let vcols = 3 * v_elements.len();
    let kcols = if opts.assemble_k { 3 * nn } else { 0 };
    let mut v = DenseMatrix::zeros(3 * np, vcols);
    let mut k = DenseMatrix::zeros(3 * np, kcols);
    let rows: Vec<(usize, &mut [f64], &mut [f64])> = row_chunks(v.data_mut(), 3 * vcols, np)
        .into_iter()
        .zip(row_chunks(k.data_mut(), 3 * kcols, np))
        .enumerate()
        .map(|(i, (a, b))| (i, a, b))
        .collect();
    rows.into_par_iter().try_for_each(|(i, vrow, krow)| -> Result<()> {
        let pt = points[i];
        let x = pt.position(mesh);
        let put = |row: &mut [f64], cols: usize, col_block: usize, b: &Mat3| {
            for p in 0..3 {
                for q in 0..3 {
                    row[p * cols + 3 * col_block + q] += b[(p, q)];
                }
            }
        };
        for (e, el) in mesh.elements().iter().enumerate() {
            let need_v = v_col[e] != usize::MAX;
            if !need_v && !opts.assemble_k {
                continue;
            }
            let loc = pt.location(mesh, e);
            let pi = point_element(&x, el, loc, cfg, ab)?;
            let u = sym_to_mat(&pi.u);
            if need_v {
                put(vrow, vcols, v_col[e], &u);
            }
            if opts.assemble_k {
                let tri = mesh.triangles[e];
                for b in 0..3 {
                    let s = el.normal.cross(&el.grads[b]);
                    put(krow, kcols, tri[b], &k_surface_block(&u, pi.g, &s, pi.dng[b], mu));
                }
            }
        }
        if opts.assemble_k {
            for edge in &edges.edges {
                let (p1, p2) = (mesh.vertices[edge.a], mesh.vertices[edge.b]);
                let ei = point_edge_integrals(&x, &p1, &p2, mat, cfg)?;
                let d = p2 - p1;
                for (j, node) in [edge.a, edge.b].into_iter().enumerate() {
                    put(krow, kcols, node, &k_line_block(&sym_to_mat(&ei.u[j]), ei.g[j], &d, mu));
                }
            }
        }
        Ok(())
    })?;
    let free_terms = if opts.assemble_k {
        let kind = opts.free_term.unwrap_or(if mesh.is_closed() { FreeTerm::RowSum } else { FreeTerm::Half });
        match kind {
            FreeTerm::RowSum => row_sum_free_terms(&k),
            FreeTerm::Half => vec![Mat3::identity() * 0.5; np],
        }
    } else {
        vec![Mat3::identity() * 0.5; np]
    };
    Ok(CollocationOperators { points: points.to_vec(), v_elements, v, k, free_terms })
}

/// Applies (C + K) given any K and the per-point free terms.
pub struct FreeTermMap<'a> {
    pub k: &'a dyn LinearMap,
    pub free_terms: &'a [Mat3],
    pub weights: Vec<Vec<(usize, f64)>>,
}

impl<'a> FreeTermMap<'a> {
    pub fn new(mesh: &TriangleMesh, points: &[CollocationPoint], k: &'a dyn LinearMap, free_terms: &'a [Mat3]) -> Self {
        FreeTermMap { k, free_terms, weights: points.iter().map(|p| p.p1_weights(mesh)).collect() }
    }
}

impl LinearMap for FreeTermMap<'_> {
    fn nrows(&self) -> usize {
        self.k.nrows()
    }

    fn ncols(&self) -> usize {
        self.k.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.k.apply(x, y);
        for (i, (c, ws)) in self.free_terms.iter().zip(&self.weights).enumerate() {
            let mut u = Vec3::zeros();
            for &(node, w) in ws {
                u += Vec3::new(x[3 * node], x[3 * node + 1], x[3 * node + 2]) * w;
            }
            let cu = c * u;
            for a in 0..3 {
                y[3 * i + a] += cu[a];
            }
        }
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.k.apply_transpose(x, y);
        for (i, (c, ws)) in self.free_terms.iter().zip(&self.weights).enumerate() {
            let ct = c.transpose() * Vec3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
            for &(node, w) in ws {
                for a in 0..3 {
                    y[3 * node + a] += w * ct[a];
                }
            }
        }
    }
}

/// Double-layer line-term contributions (3P × 3N) for an arbitrary edge set.
pub fn collocation_line_terms(
    mesh: &TriangleMesh,
    edges: &EdgeSet,
    points: &[CollocationPoint],
    mat: &MaterialParams,
    cfg: &QuadConfig,
) -> Result<DenseMatrix> {
    let nn = mesh.num_vertices();
    let mut k = DenseMatrix::zeros(3 * points.len(), 3 * nn);
    let cols = 3 * nn;
    row_chunks(k.data_mut(), 3 * cols, points.len()).into_par_iter().zip(points.par_iter()).try_for_each(
        |(row, pt)| -> Result<()> {
            let x = pt.position(mesh);
            for edge in &edges.edges {
                let (p1, p2) = (mesh.vertices[edge.a], mesh.vertices[edge.b]);
                let ei = point_edge_integrals(&x, &p1, &p2, mat, cfg)?;
                for (j, node) in [edge.a, edge.b].into_iter().enumerate() {
                    let b = k_line_block(&sym_to_mat(&ei.u[j]), ei.g[j], &(p2 - p1), mat.mu);
                    for p in 0..3 {
                        for q in 0..3 {
                            row[p * cols + 3 * node + q] += b[(p, q)];
                        }
                    }
                }
            }
            Ok(())
        },
    )?;
    Ok(k)
}
