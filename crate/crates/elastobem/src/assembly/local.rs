//! Integrals of 1/r, ∂_n(1/r) and the Kelvin tensor over one element
//! (collocation) or a pair of elements (Galerkin).

use crate::error::Result;
use crate::geometry::{point_triangle_distance, Element, Vec3};
use crate::kernels::kelvin_sym;
use crate::quadrature::{duffy_rule, pair_rule, triangle_rule, PairCase, QuadConfig, QuadRule};

/// Sub-triangle given by reference coordinates of its vertices.
pub(crate) type Sub = [[f64; 2]; 3];
pub(crate) const UNIT: Sub = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

#[inline]
pub(crate) fn sub_map(s: &Sub, p: [f64; 2]) -> [f64; 2] {
    [
        s[0][0] + (s[1][0] - s[0][0]) * p[0] + (s[2][0] - s[0][0]) * p[1],
        s[0][1] + (s[1][1] - s[0][1]) * p[0] + (s[2][1] - s[0][1]) * p[1],
    ]
}

#[inline]
pub(crate) fn sub_jacobian(s: &Sub) -> f64 {
    ((s[1][0] - s[0][0]) * (s[2][1] - s[0][1]) - (s[2][0] - s[0][0]) * (s[1][1] - s[0][1])).abs()
}

pub(crate) fn split4(s: &Sub) -> [Sub; 4] {
    let mid = |a: [f64; 2], b: [f64; 2]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let m01 = mid(s[0], s[1]);
    let m12 = mid(s[1], s[2]);
    let m20 = mid(s[2], s[0]);
    [[s[0], m01, m20], [m01, s[1], m12], [m20, m12, s[2]], [m01, m12, m20]]
}

fn physical(el: &Element, s: &Sub) -> [Vec3; 3] {
    [el.map(s[0][0], s[0][1]), el.map(s[1][0], s[1][1]), el.map(s[2][0], s[2][1])]
}

fn diameter(p: &[Vec3; 3]) -> f64 {
    (p[1] - p[0]).norm().max((p[2] - p[1]).norm()).max((p[0] - p[2]).norm())
}

pub(crate) fn band_order(cfg: &QuadConfig, ratio: f64) -> usize {
    if ratio >= cfg.far_ratio {
        cfg.tri_order_far
    } else if ratio >= cfg.mid_ratio {
        cfg.tri_order_mid
    } else {
        cfg.tri_order
    }
}

#[inline]
pub(crate) fn shape(u: f64, v: f64) -> [f64; 3] {
    [1.0 - u - v, u, v]
}

/// Where the evaluation point sits relative to an element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointLocation {
    Off,
    /// At local vertex i.
    Vertex(usize),
    /// Inside, at the given reference coordinates.
    Interior([f64; 2]),
}

/// ∫ 1/r, ∫ U (symmetric storage) and ∫ ∂_{n_y}(1/r) φ_b over an element.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointIntegrals {
    pub g: f64,
    pub u: [f64; 6],
    pub dng: [f64; 3],
}

fn accumulate_point(x: &Vec3, el: &Element, sub: &Sub, rule: &QuadRule, ab: (f64, f64), acc: &mut PointIntegrals) {
    let scale = 2.0 * el.area * sub_jacobian(sub);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let r = sub_map(sub, *p);
        let d = x - el.map(r[0], r[1]);
        let d2 = d.norm_squared();
        let inv = 1.0 / d2.sqrt();
        let wt = w * scale;
        acc.g += wt * inv;
        let u = kelvin_sym(&d, ab.0, ab.1);
        for k in 0..6 {
            acc.u[k] += wt * u[k];
        }
        let dn = wt * d.dot(&el.normal) * inv / d2;
        let phi = shape(r[0], r[1]);
        for b in 0..3 {
            acc.dng[b] += dn * phi[b];
        }
    }
}

fn point_off(
    x: &Vec3,
    el: &Element,
    sub: &Sub,
    depth: usize,
    cfg: &QuadConfig,
    ab: (f64, f64),
    acc: &mut PointIntegrals,
) -> Result<()> {
    let p = physical(el, sub);
    let diam = diameter(&p);
    let dist = point_triangle_distance(x, &p);
    if dist >= cfg.near_ratio * diam || depth >= cfg.max_subdivision {
        let rule = triangle_rule(band_order(cfg, dist / diam))?;
        accumulate_point(x, el, sub, &rule, ab, acc);
        return Ok(());
    }
    for child in split4(sub) {
        point_off(x, el, &child, depth + 1, cfg, ab, acc)?;
    }
    Ok(())
}

pub(crate) fn point_element(
    x: &Vec3,
    el: &Element,
    loc: PointLocation,
    cfg: &QuadConfig,
    ab: (f64, f64),
) -> Result<PointIntegrals> {
    let mut acc = PointIntegrals::default();
    match loc {
        PointLocation::Off => point_off(x, el, &UNIT, 0, cfg, ab, &mut acc)?,
        PointLocation::Vertex(v) => {
            let rule = duffy_rule(v, cfg.duffy_order)?;
            accumulate_point(x, el, &UNIT, &rule, ab, &mut acc);
        }
        PointLocation::Interior(c) => {
            let rule = duffy_rule(0, cfg.duffy_order)?;
            for i in 0..3 {
                let sub = [c, UNIT[i], UNIT[(i + 1) % 3]];
                accumulate_point(x, el, &sub, &rule, ab, &mut acc);
            }
        }
    }
    Ok(acc)
}

/// Double integrals over a test element τ (x) and trial element σ (y).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairIntegrals {
    pub g: f64,
    pub u: [f64; 6],
    /// ∫∫ ∂_{n_y}(1/r) φ_b(y), normal of σ.
    pub dn_trial: [f64; 3],
    /// ∫∫ ∂_{n_x}(1/r) φ_a(x), normal of τ, with τ acting as trial.
    pub dn_test: [f64; 3],
}

/// Vertex-sharing classification with the local reorderings required by
/// the pair rules.
pub(crate) fn classify(tv: &[usize; 3], sv: &[usize; 3]) -> (PairCase, [usize; 3], [usize; 3]) {
    let mut shared = Vec::with_capacity(3);
    for i in 0..3 {
        for j in 0..3 {
            if tv[i] == sv[j] {
                shared.push((i, j));
            }
        }
    }
    match shared.len() {
        3 => (PairCase::Coincident, [0, 1, 2], [0, 1, 2]),
        2 => {
            let (i0, j0) = shared[0];
            let (i1, j1) = shared[1];
            (PairCase::CommonEdge, [i0, i1, 3 - i0 - i1], [j0, j1, 3 - j0 - j1])
        }
        1 => {
            let (i, j) = shared[0];
            (PairCase::CommonVertex, [i, (i + 1) % 3, (i + 2) % 3], [j, (j + 1) % 3, (j + 2) % 3])
        }
        _ => (PairCase::Separated, [0, 1, 2], [0, 1, 2]),
    }
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn accumulate_pair_point(
    x: &Vec3,
    y: &Vec3,
    phi_x: &[f64; 3],
    phi_y: &[f64; 3],
    w: f64,
    nt: &Vec3,
    ns: &Vec3,
    ab: (f64, f64),
    acc: &mut PairIntegrals,
) {
    let d = x - y;
    let d2 = d.norm_squared();
    let inv = 1.0 / d2.sqrt();
    acc.g += w * inv;
    let u = kelvin_sym(&d, ab.0, ab.1);
    for k in 0..6 {
        acc.u[k] += w * u[k];
    }
    let inv3 = w * inv / d2;
    let dn_s = d.dot(ns) * inv3;
    let dn_t = -d.dot(nt) * inv3;
    for b in 0..3 {
        acc.dn_trial[b] += dn_s * phi_y[b];
        acc.dn_test[b] += dn_t * phi_x[b];
    }
}

fn pair_touching(
    t: &Element,
    s: &Element,
    case: PairCase,
    pt: &[usize; 3],
    ps: &[usize; 3],
    cfg: &QuadConfig,
    ab: (f64, f64),
) -> Result<PairIntegrals> {
    let rule = pair_rule(case, cfg.sauter_order)?;
    let scale = 4.0 * t.area * s.area;
    let (t0, t1, t2) = (t.p[pt[0]], t.p[pt[1]], t.p[pt[2]]);
    let (s0, s1, s2) = (s.p[ps[0]], s.p[ps[1]], s.p[ps[2]]);
    let mut acc = PairIntegrals::default();
    for q in rule.iter() {
        let x = t0 + (t1 - t0) * q.x[0] + (t2 - t0) * q.x[1];
        let y = s0 + (s1 - s0) * q.y[0] + (s2 - s0) * q.y[1];
        let lx = shape(q.x[0], q.x[1]);
        let ly = shape(q.y[0], q.y[1]);
        let mut phi_x = [0.0; 3];
        let mut phi_y = [0.0; 3];
        for k in 0..3 {
            phi_x[pt[k]] = lx[k];
            phi_y[ps[k]] = ly[k];
        }
        accumulate_pair_point(&x, &y, &phi_x, &phi_y, q.w * scale, &t.normal, &s.normal, ab, &mut acc);
    }
    Ok(acc)
}

fn triangle_gap(a: &[Vec3; 3], b: &[Vec3; 3]) -> f64 {
    let mut d = f64::INFINITY;
    for p in a {
        d = d.min(point_triangle_distance(p, b));
    }
    for p in b {
        d = d.min(point_triangle_distance(p, a));
    }
    d
}

#[allow(clippy::too_many_arguments)]
fn pair_separated(
    t: &Element,
    st: &Sub,
    s: &Element,
    ss: &Sub,
    depth: usize,
    cfg: &QuadConfig,
    ab: (f64, f64),
    acc: &mut PairIntegrals,
) -> Result<()> {
    let ptx = physical(t, st);
    let psx = physical(s, ss);
    let dt = diameter(&ptx);
    let ds = diameter(&psx);
    let dmax = dt.max(ds);
    let ct = (ptx[0] + ptx[1] + ptx[2]) / 3.0;
    let cs = (psx[0] + psx[1] + psx[2]) / 3.0;
    let mut dist = (ct - cs).norm() - dt - ds;
    if dist < cfg.near_ratio * dmax {
        dist = triangle_gap(&ptx, &psx);
    }
    if dist < cfg.near_ratio * dmax && depth < cfg.max_subdivision {
        if dt >= ds {
            for c in split4(st) {
                pair_separated(t, &c, s, ss, depth + 1, cfg, ab, acc)?;
            }
        } else {
            for c in split4(ss) {
                pair_separated(t, st, s, &c, depth + 1, cfg, ab, acc)?;
            }
        }
        return Ok(());
    }
    let rule = triangle_rule(band_order(cfg, dist / dmax))?;
    let jt = 2.0 * t.area * sub_jacobian(st);
    let js = 2.0 * s.area * sub_jacobian(ss);
    let ys: Vec<(Vec3, [f64; 3], f64)> = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| {
            let r = sub_map(ss, *p);
            (s.map(r[0], r[1]), shape(r[0], r[1]), w * js)
        })
        .collect();
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let r = sub_map(st, *p);
        let x = t.map(r[0], r[1]);
        let phi_x = shape(r[0], r[1]);
        let wx = w * jt;
        for (y, phi_y, wy) in &ys {
            accumulate_pair_point(&x, y, &phi_x, phi_y, wx * wy, &t.normal, &s.normal, ab, acc);
        }
    }
    Ok(())
}

pub(crate) fn pair_integrals(
    t: &Element,
    tv: &[usize; 3],
    s: &Element,
    sv: &[usize; 3],
    cfg: &QuadConfig,
    ab: (f64, f64),
) -> Result<PairIntegrals> {
    let (case, pt, ps) = classify(tv, sv);
    if case == PairCase::Separated {
        let mut acc = PairIntegrals::default();
        pair_separated(t, &UNIT, s, &UNIT, 0, cfg, ab, &mut acc)?;
        Ok(acc)
    } else {
        pair_touching(t, s, case, &pt, &ps, cfg, ab)
    }
}
