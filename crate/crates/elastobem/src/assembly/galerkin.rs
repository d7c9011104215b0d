use rayon::prelude::*;

use crate::error::{BemError, Result};
use crate::geometry::{open_boundary, EdgeSet, Mat3, TriangleMesh, Vec3};
use crate::kernels::{kelvin_coefficients, MaterialParams};
use crate::linalg::DenseMatrix;
use crate::quadrature::QuadConfig;

use super::lines::{hyper_contract, k_line_block, k_surface_block, surface_edge_integrals, sym_to_mat};
use super::local::{pair_integrals, PairIntegrals};

#[derive(Clone, Debug)]
pub struct GalerkinOptions {
    pub line_integrals: bool,
    pub v: bool,
    pub k: bool,
    /// Test elements for which K̂ rows are assembled; `None` means all.
    pub k_rows: Option<Vec<usize>>,
    pub d: bool,
}

impl Default for GalerkinOptions {
    fn default() -> Self {
        GalerkinOptions { line_integrals: false, v: true, k: true, k_rows: None, d: true }
    }
}

/// Galerkin matrices: V̂ (3E × 3E, P0 × P0), K̂ (3E × 3N, P0 test, P1
/// trial) and D̂ (3N × 3N, P1 × P1). The adjoint double layer is K̂ᵀ.
#[derive(Clone, Debug, Default)]
pub struct GalerkinOperators {
    pub v: Option<DenseMatrix>,
    pub k: Option<DenseMatrix>,
    pub d: Option<DenseMatrix>,
}

impl GalerkinOperators {
    pub fn bytes(&self) -> usize {
        [&self.v, &self.k, &self.d].iter().filter_map(|m| m.as_ref().map(DenseMatrix::bytes)).sum()
    }
}

fn curls(mesh: &TriangleMesh) -> Vec<[Vec3; 3]> {
    mesh.elements().iter().map(|e| [0, 1, 2].map(|b| e.normal.cross(&e.grads[b]))).collect()
}

const CHUNK: usize = 16;

pub fn assemble_galerkin(
    mesh: &TriangleMesh,
    mat: &MaterialParams,
    cfg: &QuadConfig,
    opts: &GalerkinOptions,
) -> Result<GalerkinOperators> {
    let ne = mesh.num_triangles();
    let nn = mesh.num_vertices();
    let mu = mat.mu;
    let ab = kelvin_coefficients(mat);
    let mut krow = vec![opts.k; ne];
    if let (true, Some(rows)) = (opts.k, &opts.k_rows) {
        krow = vec![false; ne];
        for &r in rows {
            if r >= ne {
                return Err(BemError::InvalidArgument(format!("element {r} out of range")));
            }
            krow[r] = true;
        }
    }
    let mut v = opts.v.then(|| DenseMatrix::zeros(3 * ne, 3 * ne));
    let mut k = opts.k.then(|| DenseMatrix::zeros(3 * ne, 3 * nn));
    let mut d = opts.d.then(|| DenseMatrix::zeros(3 * nn, 3 * nn));
    let s = curls(mesh);
    let els = mesh.elements();
    let tris = &mesh.triangles;

    let mut start = 0;
    while start < ne {
        let end = (start + CHUNK).min(ne);
        let batch: Vec<Vec<(usize, PairIntegrals)>> = (start..end)
            .into_par_iter()
            .map(|t| {
                let mut out = Vec::with_capacity(ne - t);
                for sg in t..ne {
                    if !(opts.v || opts.d || krow[t] || krow[sg]) {
                        continue;
                    }
                    out.push((sg, pair_integrals(&els[t], &tris[t], &els[sg], &tris[sg], cfg, ab)?));
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        for (t, list) in (start..end).zip(batch) {
            let tv = tris[t];
            for (sg, pi) in list {
                let sv = tris[sg];
                let u = sym_to_mat(&pi.u);
                let same = t == sg;
                if let Some(v) = v.as_mut() {
                    v.add_block(t, sg, &u);
                    if !same {
                        v.add_block(sg, t, &u);
                    }
                }
                if let Some(k) = k.as_mut() {
                    if krow[t] {
                        for b in 0..3 {
                            k.add_block(t, sv[b], &k_surface_block(&u, pi.g, &s[sg][b], pi.dn_trial[b], mu));
                        }
                    }
                    if !same && krow[sg] {
                        for a in 0..3 {
                            k.add_block(sg, tv[a], &k_surface_block(&u, pi.g, &s[t][a], pi.dn_test[a], mu));
                        }
                    }
                }
                if let Some(d) = d.as_mut() {
                    if same {
                        let blocks: Vec<Vec<Mat3>> = (0..3)
                            .map(|a| (0..3).map(|b| hyper_contract(&s[t][a], &s[t][b], pi.g, &u, mu)).collect())
                            .collect();
                        for a in 0..3 {
                            for b in 0..3 {
                                let sym = (blocks[a][b] + blocks[b][a].transpose()) * 0.5;
                                d.add_block(tv[a], tv[b], &sym);
                            }
                        }
                    } else {
                        for a in 0..3 {
                            for b in 0..3 {
                                let blk = hyper_contract(&s[t][a], &s[sg][b], pi.g, &u, mu);
                                d.add_block(tv[a], sv[b], &blk);
                                d.add_block(sv[b], tv[a], &blk.transpose());
                            }
                        }
                    }
                }
            }
        }
        start = end;
    }

    if opts.line_integrals {
        let edges = open_boundary(mesh, None);
        add_line_terms(mesh, &edges, mat, cfg, &krow, k.as_mut(), d.as_mut())?;
    }
    Ok(GalerkinOperators { v, k, d })
}

fn add_line_terms(
    mesh: &TriangleMesh,
    edges: &EdgeSet,
    mat: &MaterialParams,
    cfg: &QuadConfig,
    krow: &[bool],
    mut k: Option<&mut DenseMatrix>,
    mut d: Option<&mut DenseMatrix>,
) -> Result<()> {
    if edges.is_empty() || (k.is_none() && d.is_none()) {
        return Ok(());
    }
    let mu = mat.mu;
    let ne = mesh.num_triangles();
    let s = curls(mesh);
    let with_d = d.is_some();
    let with_k = k.is_some();
    let ids: Vec<usize> = (0..ne).filter(|&t| with_d || krow[t]).collect();
    for chunk in ids.chunks(64) {
        let batch: Vec<Vec<_>> = chunk
            .par_iter()
            .map(|&t| {
                edges
                    .edges
                    .iter()
                    .map(|e| {
                        surface_edge_integrals(mesh.element(t), &mesh.vertices[e.a], &mesh.vertices[e.b], mat, cfg, with_d)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        for (&t, list) in chunk.iter().zip(batch) {
            let el = mesh.element(t);
            let tv = mesh.triangles[t];
            for (e, si) in edges.edges.iter().zip(list) {
                let dvec = mesh.vertices[e.b] - mesh.vertices[e.a];
                let nodes = [e.a, e.b];
                if let (true, Some(k)) = (with_k && krow[t], k.as_deref_mut()) {
                    for j in 0..2 {
                        k.add_block(t, nodes[j], &k_line_block(&si.u[j], si.g[j], &dvec, mu));
                    }
                }
                if let Some(d) = d.as_deref_mut() {
                    for a in 0..3 {
                        for j in 0..2 {
                            let sl = hyper_contract(&s[t][a], &dvec, si.g[j], &si.u[j], mu);
                            let mut x = Mat3::zeros();
                            for beta in 0..3 {
                                let dir = el.normal.cross(&Vec3::ith(beta, 1.0));
                                x += hyper_contract(&dir, &dvec, si.dg[a][j][beta], &si.du[a][j][beta], mu);
                            }
                            let blk = (x - sl) * 0.5;
                            d.add_block(tv[a], nodes[j], &blk);
                            d.add_block(nodes[j], tv[a], &blk.transpose());
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Line-term contributions to K̂ (3E × 3N) and D̂ (3N × 3N) for an
/// arbitrary edge set.
pub fn galerkin_line_terms(
    mesh: &TriangleMesh,
    edges: &EdgeSet,
    mat: &MaterialParams,
    cfg: &QuadConfig,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let ne = mesh.num_triangles();
    let nn = mesh.num_vertices();
    let mut k = DenseMatrix::zeros(3 * ne, 3 * nn);
    let mut d = DenseMatrix::zeros(3 * nn, 3 * nn);
    add_line_terms(mesh, edges, mat, cfg, &vec![true; ne], Some(&mut k), Some(&mut d))?;
    Ok((k, d))
}

/// P1–P0 mass matrix entries ∫ φ_j over element k: area/3 per vertex.
pub fn p1_p0_mass(mesh: &TriangleMesh) -> Vec<[(usize, f64); 3]> {
    mesh.elements()
        .iter()
        .zip(&mesh.triangles)
        .map(|(el, t)| [0, 1, 2].map(|i| (t[i], el.area / 3.0)))
        .collect()
}
