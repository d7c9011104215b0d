#![allow(dead_code)]

use elastobem::Vec3;

/// ∫_T 1/|x − y| dS_y in closed form for a flat triangle.
pub fn potential_one_over_r(x: &Vec3, p: &[Vec3; 3]) -> f64 {
    let n = (p[1] - p[0]).cross(&(p[2] - p[0])).normalize();
    let h = (x - p[0]).dot(&n);
    let rho = x - n * h;
    let ah = h.abs();
    let mut sum = 0.0;
    for i in 0..3 {
        let pm = p[i];
        let pp = p[(i + 1) % 3];
        let t = (pp - pm).normalize();
        let m = t.cross(&n);
        let p0 = (pm - rho).dot(&m);
        let lp = (pp - rho).dot(&t);
        let lm = (pm - rho).dot(&t);
        let rp = (x - pp).norm();
        let rm = (x - pm).norm();
        let r0sq = p0 * p0 + h * h;
        if p0.abs() > 1e-14 {
            sum += p0 * ((rp + lp) / (rm + lm)).ln();
            if ah > 0.0 {
                sum -= ah * ((p0 * lp / (r0sq + ah * rp)).atan() - (p0 * lm / (r0sq + ah * rm)).atan());
            }
        }
    }
    sum
}

/// Adaptive integration of `f` over a triangle (7-point rule vs. its
/// quadrisection).
pub fn adaptive_triangle(f: &dyn Fn(&Vec3) -> f64, p: [Vec3; 3], tol: f64, depth: usize) -> f64 {
    let coarse = rule7(f, &p);
    let m01 = 0.5 * (p[0] + p[1]);
    let m12 = 0.5 * (p[1] + p[2]);
    let m20 = 0.5 * (p[2] + p[0]);
    let kids = [[p[0], m01, m20], [m01, p[1], m12], [m20, m12, p[2]], [m01, m12, m20]];
    let fine: f64 = kids.iter().map(|k| rule7(f, k)).sum();
    if depth == 0 || (fine - coarse).abs() <= tol {
        return fine;
    }
    kids.iter().map(|k| adaptive_triangle(f, *k, tol / 2.0, depth - 1)).sum()
}

fn rule7(f: &dyn Fn(&Vec3) -> f64, p: &[Vec3; 3]) -> f64 {
    let s = 15f64.sqrt();
    let (a1, b1) = ((6.0 - s) / 21.0, (9.0 + 2.0 * s) / 21.0);
    let (a2, b2) = ((6.0 + s) / 21.0, (9.0 - 2.0 * s) / 21.0);
    let (w1, w2) = ((155.0 - s) / 1200.0, (155.0 + s) / 1200.0);
    let pts = [
        (1.0 / 3.0, 1.0 / 3.0, 0.225),
        (a1, a1, w1),
        (b1, a1, w1),
        (a1, b1, w1),
        (a2, a2, w2),
        (b2, a2, w2),
        (a2, b2, w2),
    ];
    let area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
    pts.iter().map(|&(u, v, w)| w * f(&(p[0] + (p[1] - p[0]) * u + (p[2] - p[0]) * v))).sum::<f64>() * area
}

/// Composite Gauss–Legendre on [a, b] with `pieces` panels of 10 points.
pub fn composite_gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    // 10-point nodes/weights on [-1, 1]
    const X: [f64; 5] = [0.1488743389816312, 0.4333953941292472, 0.6794095682990244, 0.8650633666889845, 0.9739065285171717];
    const W: [f64; 5] = [0.2955242247147529, 0.2692667193099963, 0.2190863625159820, 0.1494513491505806, 0.0666713443086881];
    let h = (b - a) / pieces as f64;
    let mut s = 0.0;
    for k in 0..pieces {
        let c = a + (k as f64 + 0.5) * h;
        for i in 0..5 {
            s += W[i] * (f(c - 0.5 * h * X[i]) + f(c + 0.5 * h * X[i]));
        }
    }
    0.5 * h * s
}

/// Composite 7-point rule on `levels` uniform quadrisections of a triangle.
pub fn triangle_points(p: [Vec3; 3], levels: usize) -> Vec<(Vec3, f64)> {
    let mut tris = vec![p];
    for _ in 0..levels {
        tris = tris
            .iter()
            .flat_map(|p| {
                let m01 = 0.5 * (p[0] + p[1]);
                let m12 = 0.5 * (p[1] + p[2]);
                let m20 = 0.5 * (p[2] + p[0]);
                [[p[0], m01, m20], [m01, p[1], m12], [m20, m12, p[2]], [m01, m12, m20]]
            })
            .collect();
    }
    let s = 15f64.sqrt();
    let (a1, b1) = ((6.0 - s) / 21.0, (9.0 + 2.0 * s) / 21.0);
    let (a2, b2) = ((6.0 + s) / 21.0, (9.0 - 2.0 * s) / 21.0);
    let (w1, w2) = ((155.0 - s) / 1200.0, (155.0 + s) / 1200.0);
    let pts = [
        (1.0 / 3.0, 1.0 / 3.0, 0.225),
        (a1, a1, w1),
        (b1, a1, w1),
        (a1, b1, w1),
        (a2, a2, w2),
        (b2, a2, w2),
        (a2, b2, w2),
    ];
    let mut out = Vec::new();
    for t in &tris {
        let area = 0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm();
        for &(u, v, w) in &pts {
            out.push((t[0] + (t[1] - t[0]) * u + (t[2] - t[0]) * v, w * area));
        }
    }
    out
}

/// Barycentric coordinates of a point in the plane of a triangle.
pub fn barycentric(y: &Vec3, p: &[Vec3; 3]) -> [f64; 3] {
    let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
    let a2 = n.norm_squared();
    let l1 = (y - p[0]).cross(&(p[2] - p[0])).dot(&n) / a2;
    let l2 = (p[1] - p[0]).cross(&(y - p[0])).dot(&n) / a2;
    [1.0 - l1 - l2, l1, l2]
}
