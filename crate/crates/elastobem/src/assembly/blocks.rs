//! Operator sub-blocks between dof subsets, with the same quadrature as
//! the dense assembly. Used for the near field of the fast multipole
//! method.

use std::collections::HashSet;

use crate::error::Result;
use crate::geometry::{open_boundary, Edge, Mat3, TriangleMesh, Vec3};
use crate::kernels::{kelvin_coefficients, MaterialParams};
use crate::linalg::DenseMatrix;
use crate::quadrature::QuadConfig;

use super::collocation::CollocationPoint;
use super::lines::{hyper_contract, k_line_block, k_surface_block, point_edge_integrals, surface_edge_integrals, sym_to_mat};
use super::local::{pair_integrals, point_element, PairIntegrals};

/// Which boundary line integrals enter a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineMode {
    None,
    /// Edges of the open boundary of the mesh.
    OpenBoundary,
    /// Every element edge, each with its element's orientation. Interior
    /// edges cancel pairwise.
    ElementEdges,
}

pub(crate) struct BlockBuilder<'a> {
    mesh: &'a TriangleMesh,
    mat: MaterialParams,
    cfg: QuadConfig,
    ab: (f64, f64),
    mode: LineMode,
    stars: Vec<Vec<usize>>,
    curls: Vec<[Vec3; 3]>,
    /// Edges carrying line terms, grouped by endpoint.
    edges_at: Vec<Vec<Edge>>,
}

impl<'a> BlockBuilder<'a> {
    pub fn new(mesh: &'a TriangleMesh, mat: &MaterialParams, cfg: &QuadConfig, mode: LineMode) -> Self {
        let curls = mesh.elements().iter().map(|e| [0, 1, 2].map(|b| e.normal.cross(&e.grads[b]))).collect();
        let mut edges_at = vec![Vec::new(); mesh.num_vertices()];
        let edges: Vec<Edge> = match mode {
            LineMode::None => Vec::new(),
            LineMode::OpenBoundary => open_boundary(mesh, None).edges,
            LineMode::ElementEdges => super::lines::element_edges(mesh).edges,
        };
        for e in edges {
            edges_at[e.a].push(e);
            edges_at[e.b].push(e);
        }
        BlockBuilder {
            mesh,
            mat: *mat,
            cfg: cfg.clone(),
            ab: kelvin_coefficients(mat),
            mode,
            stars: mesh.vertex_stars(),
            curls,
            edges_at,
        }
    }

    fn star_elements(&self, nodes: &[usize]) -> Vec<usize> {
        let mut set: Vec<usize> = nodes.iter().flat_map(|&b| self.stars[b].iter().copied()).collect();
        set.sort_unstable();
        set.dedup();
        set
    }

    fn edges_touching(&self, nodes: &[usize]) -> Vec<Edge> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &b in nodes {
            for e in &self.edges_at[b] {
                if seen.insert((e.a, e.b, e.owner)) {
                    out.push(*e);
                }
            }
        }
        out
    }

    fn column_map(n: usize, cols: &[usize]) -> Vec<usize> {
        let mut m = vec![usize::MAX; n];
        for (c, &j) in cols.iter().enumerate() {
            m[j] = c;
        }
        m
    }

    /// Pair integrals in the element order used by the dense assembly;
    /// the flag marks a swapped pair.
    fn pair(&self, t: usize, s: usize) -> Result<(PairIntegrals, bool)> {
        let (tris, mesh) = (&self.mesh.triangles, self.mesh);
        if t <= s {
            Ok((pair_integrals(mesh.element(t), &tris[t], mesh.element(s), &tris[s], &self.cfg, self.ab)?, false))
        } else {
            Ok((pair_integrals(mesh.element(s), &tris[s], mesh.element(t), &tris[t], &self.cfg, self.ab)?, true))
        }
    }

    /// Collocation single layer, points × P0 elements.
    pub fn colloc_v(&self, pts: &[CollocationPoint], elems: &[usize]) -> Result<DenseMatrix> {
        let mut m = DenseMatrix::zeros(3 * pts.len(), 3 * elems.len());
        for (i, pt) in pts.iter().enumerate() {
            let x = pt.position(self.mesh);
            for (c, &e) in elems.iter().enumerate() {
                let pi = point_element(&x, self.mesh.element(e), pt.location(self.mesh, e), &self.cfg, self.ab)?;
                m.add_block(i, c, &sym_to_mat(&pi.u));
            }
        }
        Ok(m)
    }

    /// Collocation double layer without free term, points × P1 nodes.
    pub fn colloc_k(&self, pts: &[CollocationPoint], nodes: &[usize]) -> Result<DenseMatrix> {
        let mut m = DenseMatrix::zeros(3 * pts.len(), 3 * nodes.len());
        let col = Self::column_map(self.mesh.num_vertices(), nodes);
        let elems = self.star_elements(nodes);
        let edges = self.edges_touching(nodes);
        for (i, pt) in pts.iter().enumerate() {
            let x = pt.position(self.mesh);
            for &e in &elems {
                let el = self.mesh.element(e);
                let pi = point_element(&x, el, pt.location(self.mesh, e), &self.cfg, self.ab)?;
                let u = sym_to_mat(&pi.u);
                for (b, &node) in self.mesh.triangles[e].iter().enumerate() {
                    if col[node] != usize::MAX {
                        m.add_block(i, col[node], &k_surface_block(&u, pi.g, &self.curls[e][b], pi.dng[b], self.mat.mu));
                    }
                }
            }
            for edge in &edges {
                let (p1, p2) = (self.mesh.vertices[edge.a], self.mesh.vertices[edge.b]);
                let ei = point_edge_integrals(&x, &p1, &p2, &self.mat, &self.cfg)?;
                for (j, node) in [edge.a, edge.b].into_iter().enumerate() {
                    if col[node] != usize::MAX {
                        let blk = k_line_block(&sym_to_mat(&ei.u[j]), ei.g[j], &(p2 - p1), self.mat.mu);
                        m.add_block(i, col[node], &blk);
                    }
                }
            }
        }
        Ok(m)
    }

    /// Galerkin single layer, P0 × P0.
    pub fn gal_v(&self, test: &[usize], trial: &[usize]) -> Result<DenseMatrix> {
        let mut m = DenseMatrix::zeros(3 * test.len(), 3 * trial.len());
        for (r, &t) in test.iter().enumerate() {
            for (c, &s) in trial.iter().enumerate() {
                let (pi, _) = self.pair(t, s)?;
                m.add_block(r, c, &sym_to_mat(&pi.u));
            }
        }
        Ok(m)
    }

    /// Galerkin double layer, P0 test × P1 trial.
    pub fn gal_k(&self, test: &[usize], trial: &[usize]) -> Result<DenseMatrix> {
        let mut m = DenseMatrix::zeros(3 * test.len(), 3 * trial.len());
        let col = Self::column_map(self.mesh.num_vertices(), trial);
        let elems = self.star_elements(trial);
        let edges = self.edges_touching(trial);
        let tris = &self.mesh.triangles;
        let mu = self.mat.mu;
        for (r, &t) in test.iter().enumerate() {
            let et = self.mesh.element(t);
            for &s in &elems {
                let (pi, swapped) = self.pair(t, s)?;
                let u = sym_to_mat(&pi.u);
                for (b, &node) in tris[s].iter().enumerate() {
                    if col[node] != usize::MAX {
                        let dn = if swapped { pi.dn_test[b] } else { pi.dn_trial[b] };
                        m.add_block(r, col[node], &k_surface_block(&u, pi.g, &self.curls[s][b], dn, mu));
                    }
                }
            }
            for edge in &edges {
                let (p1, p2) = (self.mesh.vertices[edge.a], self.mesh.vertices[edge.b]);
                let si = surface_edge_integrals(et, &p1, &p2, &self.mat, &self.cfg, false)?;
                for (j, node) in [edge.a, edge.b].into_iter().enumerate() {
                    if col[node] != usize::MAX {
                        m.add_block(r, col[node], &k_line_block(&si.u[j], si.g[j], &(p2 - p1), mu));
                    }
                }
            }
        }
        Ok(m)
    }

    /// ½(X − SL) blocks of element τ against one edge, indexed [a][j].
    fn d_line_blocks(&self, t: usize, edge: &Edge) -> Result<[[Mat3; 2]; 3]> {
        let el = self.mesh.element(t);
        let (p1, p2) = (self.mesh.vertices[edge.a], self.mesh.vertices[edge.b]);
        let si = surface_edge_integrals(el, &p1, &p2, &self.mat, &self.cfg, true)?;
        let d = p2 - p1;
        let mu = self.mat.mu;
        let mut out = [[Mat3::zeros(); 2]; 3];
        for (a, row) in out.iter_mut().enumerate() {
            for (j, blk) in row.iter_mut().enumerate() {
                let sl = hyper_contract(&self.curls[t][a], &d, si.g[j], &si.u[j], mu);
                let mut x = Mat3::zeros();
                for beta in 0..3 {
                    let dir = el.normal.cross(&Vec3::ith(beta, 1.0));
                    x += hyper_contract(&dir, &d, si.dg[a][j][beta], &si.du[a][j][beta], mu);
                }
                *blk = (x - sl) * 0.5;
            }
        }
        Ok(out)
    }

    /// Galerkin hypersingular operator, P1 × P1.
    pub fn gal_d(&self, test: &[usize], trial: &[usize]) -> Result<DenseMatrix> {
        let nn = self.mesh.num_vertices();
        let mut m = DenseMatrix::zeros(3 * test.len(), 3 * trial.len());
        let row = Self::column_map(nn, test);
        let col = Self::column_map(nn, trial);
        let et = self.star_elements(test);
        let es = self.star_elements(trial);
        let tris = &self.mesh.triangles;
        let mu = self.mat.mu;
        for &t in &et {
            for &s in &es {
                let (pi, swapped) = self.pair(t, s)?;
                let u = sym_to_mat(&pi.u);
                for (a, &na) in tris[t].iter().enumerate() {
                    if row[na] == usize::MAX {
                        continue;
                    }
                    for (b, &nb) in tris[s].iter().enumerate() {
                        if col[nb] == usize::MAX {
                            continue;
                        }
                        let blk = if t == s {
                            let ab = hyper_contract(&self.curls[t][a], &self.curls[t][b], pi.g, &u, mu);
                            let ba = hyper_contract(&self.curls[t][b], &self.curls[t][a], pi.g, &u, mu);
                            (ab + ba.transpose()) * 0.5
                        } else if swapped {
                            hyper_contract(&self.curls[s][b], &self.curls[t][a], pi.g, &u, mu).transpose()
                        } else {
                            hyper_contract(&self.curls[t][a], &self.curls[s][b], pi.g, &u, mu)
                        };
                        m.add_block(row[na], col[nb], &blk);
                    }
                }
            }
        }
        if self.mode != LineMode::None {
            // test element against trial-side edges
            let trial_edges = self.edges_touching(trial);
            let test_edges = self.edges_touching(test);
            for &t in &et {
                for edge in &trial_edges {
                    let blocks = self.d_line_blocks(t, edge)?;
                    for (a, &na) in tris[t].iter().enumerate() {
                        for (j, nb) in [edge.a, edge.b].into_iter().enumerate() {
                            if row[na] != usize::MAX && col[nb] != usize::MAX {
                                m.add_block(row[na], col[nb], &blocks[a][j]);
                            }
                        }
                    }
                }
            }
            // transposed part: trial element against test-side edges
            for &s in &es {
                for edge in &test_edges {
                    let blocks = self.d_line_blocks(s, edge)?;
                    for (b, &nb) in tris[s].iter().enumerate() {
                        for (j, na) in [edge.a, edge.b].into_iter().enumerate() {
                            if row[na] != usize::MAX && col[nb] != usize::MAX {
                                m.add_block(row[na], col[nb], &blocks[b][j].transpose());
                            }
                        }
                    }
                }
            }
        }
        Ok(m)
    }
}
