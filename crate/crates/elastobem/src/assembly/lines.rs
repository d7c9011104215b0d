//! Boundary line integrals of the regularized double-layer and
//! hypersingular operators.

use std::f64::consts::PI;

use crate::error::{BemError, Result};
use crate::geometry::{point_triangle_distance, Edge, EdgeSet, Element, Mat3, TriangleMesh, Vec3};
use crate::kernels::{cross_matrix, kelvin_grad_r, kelvin_sym, MaterialParams};
use crate::quadrature::{paget_cached, segment_rule, triangle_rule, QuadConfig};

use super::local::shape;

#[inline]
pub(crate) fn sym_to_mat(u: &[f64; 6]) -> Mat3 {
    Mat3::new(u[0], u[3], u[4], u[3], u[1], u[5], u[4], u[5], u[2])
}

/// Every edge of every element, oriented as in its triangle. On a closed
/// surface each geometric edge appears twice with opposite orientation.
pub fn element_edges(mesh: &TriangleMesh) -> EdgeSet {
    let mut edges = Vec::with_capacity(3 * mesh.num_triangles());
    for (k, t) in mesh.triangles.iter().enumerate() {
        for i in 0..3 {
            edges.push(Edge { a: t[i], b: t[(i + 1) % 3], owner: k });
        }
    }
    EdgeSet { edges }
}

/// ∫₀¹ k(x − y(ξ)) φ(ξ) dξ along y(ξ) = p₁ + ξ(p₂ − p₁) for φ = 1 − ξ
/// (index 0) and φ = ξ (index 1), with k = 1/r and the Kelvin tensor.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EdgeIntegrals {
    pub g: [f64; 2],
    pub u: [[f64; 6]; 2],
}

impl EdgeIntegrals {
    #[inline]
    fn add(&mut self, r: &Vec3, scale: f64, xi: f64, ab: (f64, f64)) {
        let inv = 1.0 / r.norm();
        let u = kelvin_sym(r, ab.0, ab.1);
        let phi = [1.0 - xi, xi];
        for j in 0..2 {
            let w = scale * phi[j];
            self.g[j] += w * inv;
            for k in 0..6 {
                self.u[j][k] += w * u[k];
            }
        }
    }
}

fn point_segment_distance(x: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let d = b - a;
    let t = ((x - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
    (x - (a + d * t)).norm()
}

#[allow(clippy::too_many_arguments)]
fn edge_regular(
    x: &Vec3,
    p1: &Vec3,
    p2: &Vec3,
    lo: f64,
    hi: f64,
    depth: usize,
    cfg: &QuadConfig,
    ab: (f64, f64),
    acc: &mut EdgeIntegrals,
) -> Result<()> {
    let d = p2 - p1;
    let a = p1 + d * lo;
    let b = p1 + d * hi;
    let len = (b - a).norm();
    let dist = point_segment_distance(x, &a, &b);
    if dist < cfg.near_ratio * len && depth < cfg.max_subdivision + 4 {
        let mid = 0.5 * (lo + hi);
        edge_regular(x, p1, p2, lo, mid, depth + 1, cfg, ab, acc)?;
        return edge_regular(x, p1, p2, mid, hi, depth + 1, cfg, ab, acc);
    }
    let n = if dist >= cfg.far_ratio * len {
        2
    } else if dist >= cfg.mid_ratio * len {
        4
    } else {
        cfg.line_order
    };
    let rule = segment_rule(n)?;
    for (s, w) in rule.points.iter().zip(&rule.weights) {
        let xi = lo + (hi - lo) * s;
        acc.add(&(x - (p1 + d * xi)), w * (hi - lo), xi, ab);
    }
    Ok(())
}

/// Edge integrals for a collocation point. When `x` is an endpoint the
/// 1/ξ singularity is integrated in the finite-part sense (or by plain
/// Gauss when `cfg.naive_singular_lines` is set).
pub fn point_edge_integrals(
    x: &Vec3,
    p1: &Vec3,
    p2: &Vec3,
    mat: &MaterialParams,
    cfg: &QuadConfig,
) -> Result<EdgeIntegrals> {
    let ab = crate::kernels::kelvin_coefficients(mat);
    let d = p2 - p1;
    let len = d.norm();
    let tol = 1e-10 * len;
    let mut acc = EdgeIntegrals::default();
    let at_start = (x - p1).norm() < tol;
    let at_end = (x - p2).norm() < tol;
    if at_start || at_end {
        if cfg.naive_singular_lines {
            let rule = segment_rule(cfg.line_order)?;
            for (s, w) in rule.points.iter().zip(&rule.weights) {
                acc.add(&(x - (p1 + d * *s)), *w, *s, ab);
            }
            return Ok(acc);
        }
        let rule = paget_cached(cfg.paget_n)?;
        for (&eta, &w) in rule.points.iter().zip(&rule.weights) {
            // distance to the singular end is η |p₂ − p₁|
            let xi = if at_start { eta } else { 1.0 - eta };
            acc.add(&(x - (p1 + d * xi)), w * eta, xi, ab);
        }
        return Ok(acc);
    }
    if point_segment_distance(x, p1, p2) < tol {
        return Err(BemError::Unsupported("collocation point inside a boundary edge".into()));
    }
    edge_regular(x, p1, p2, 0.0, 1.0, 0, cfg, ab, &mut acc)?;
    Ok(acc)
}

/// Integrals over a test element τ (x) and an edge (y) used by the
/// Galerkin line terms.
#[derive(Clone, Debug, Default)]
pub(crate) struct SurfaceEdgeIntegrals {
    /// ∫∫ k φ_b(y) for the two edge hat functions.
    pub g: [f64; 2],
    pub u: [Mat3; 2],
    /// ∫∫ φ_a(x) φ_b(y) ∂k/∂x_β, indexed [a][b][β].
    pub dg: [[[f64; 3]; 2]; 3],
    pub du: [[[Mat3; 3]; 2]; 3],
}

pub(crate) fn surface_edge_integrals(
    el: &Element,
    p1: &Vec3,
    p2: &Vec3,
    mat: &MaterialParams,
    cfg: &QuadConfig,
    with_gradients: bool,
) -> Result<SurfaceEdgeIntegrals> {
    let ab = crate::kernels::kelvin_coefficients(mat);
    let d = p2 - p1;
    let len = d.norm();
    let size = el.diameter.max(len);
    let mid = 0.5 * (p1 + p2);
    let dist = point_triangle_distance(p1, &el.p)
        .min(point_triangle_distance(p2, &el.p))
        .min(point_triangle_distance(&mid, &el.p));
    let ratio = dist / size;
    let (tri_order, line_n) = if ratio >= cfg.far_ratio {
        (cfg.tri_order_far, 2)
    } else if ratio >= cfg.mid_ratio {
        (cfg.tri_order_mid, 4)
    } else {
        (cfg.tri_order, cfg.line_order)
    };
    let tri = triangle_rule(tri_order)?;
    let line = segment_rule(line_n)?;
    let mut acc = SurfaceEdgeIntegrals::default();
    let jx = 2.0 * el.area;
    for (p, wx) in tri.points.iter().zip(&tri.weights) {
        let x = el.map(p[0], p[1]);
        let phi_x = shape(p[0], p[1]);
        for (&xi, wy) in line.points.iter().zip(&line.weights) {
            let y = p1 + d * xi;
            let r = x - y;
            let w = wx * jx * wy;
            let phi_y = [1.0 - xi, xi];
            let r2 = r.norm_squared();
            let inv = 1.0 / r2.sqrt();
            let u = sym_to_mat(&kelvin_sym(&r, ab.0, ab.1));
            for b in 0..2 {
                acc.g[b] += w * phi_y[b] * inv;
                acc.u[b] += u * (w * phi_y[b]);
            }
            if with_gradients {
                let gg = -r * (inv / r2);
                let gu = kelvin_grad_r(&r, mat);
                for a in 0..3 {
                    for b in 0..2 {
                        let ww = w * phi_x[a] * phi_y[b];
                        for beta in 0..3 {
                            acc.dg[a][b][beta] += ww * gg[beta];
                            acc.du[a][b][beta] += gu[beta] * ww;
                        }
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// Bilinear kernel of the regularized hypersingular form for slot vectors
/// `a` (test) and `b` (trial); entry (p, q) couples components p and q.
#[inline]
pub(crate) fn hyper_contract(a: &Vec3, b: &Vec3, g: f64, u: &Mat3, mu: f64) -> Mat3 {
    let t1 = mu / (2.0 * PI) * a.dot(b) * g;
    let mut m = a * b.transpose() * (-mu / (4.0 * PI) * g);
    m[(0, 0)] += t1;
    m[(1, 1)] += t1;
    m[(2, 2)] += t1;
    let mut w = u * (-4.0 * mu * mu);
    let lap = mu / (2.0 * PI) * g;
    w[(0, 0)] += lap;
    w[(1, 1)] += lap;
    w[(2, 2)] += lap;
    m + cross_matrix(a).transpose() * w * cross_matrix(b)
}

/// Regularized double-layer block (2μU − G/4π)·S + ∂_nG φ/4π for one
/// trial hat function with surface curl `s`.
#[inline]
pub(crate) fn k_surface_block(u: &Mat3, g: f64, s: &Vec3, dng: f64, mu: f64) -> Mat3 {
    let mut w = u * (2.0 * mu);
    let c = g / (4.0 * PI);
    w[(0, 0)] -= c;
    w[(1, 1)] -= c;
    w[(2, 2)] -= c;
    let mut m = w * cross_matrix(s);
    let dn = dng / (4.0 * PI);
    m[(0, 0)] += dn;
    m[(1, 1)] += dn;
    m[(2, 2)] += dn;
    m
}

/// Line block of the double layer: column q is (2μU − G/4π)(e_q × d).
#[inline]
pub(crate) fn k_line_block(u: &Mat3, g: f64, d: &Vec3, mu: f64) -> Mat3 {
    let mut w = u * (2.0 * mu);
    let c = g / (4.0 * PI);
    w[(0, 0)] -= c;
    w[(1, 1)] -= c;
    w[(2, 2)] -= c;
    -(w * cross_matrix(d))
}
