//! Point kernels: Kelvin tensor, traction kernel, Laplace kernels and the
//! tangential operators of the regularized forms. The 1/(4π) factors of the
//! regularized operators live in `assembly`; `newton` is the bare 1/r.

use std::f64::consts::PI;

use crate::error::{invalid, BemError, Result};
use crate::geometry::{Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    pub lambda: f64,
    pub mu: f64,
}

impl MaterialParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !(lambda + 2.0 * mu > 0.0) || !lambda.is_finite() || !mu.is_finite() {
            return invalid(format!("inadmissible Lamé parameters λ={lambda}, μ={mu}"));
        }
        Ok(MaterialParams { lambda, mu })
    }

    pub fn poisson(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.mu))
    }

    /// Prefactor and the two coefficients of the Kelvin tensor.
    #[inline]
    fn kelvin_coeffs(&self) -> (f64, f64) {
        let c = 1.0 / (8.0 * PI * self.mu * (self.lambda + 2.0 * self.mu));
        (c * (self.lambda + 3.0 * self.mu), c * (self.lambda + self.mu))
    }
}

fn check_distinct(x: &Vec3, y: &Vec3) -> Result<Vec3> {
    let r = x - y;
    if r.norm_squared() == 0.0 {
        return Err(BemError::SingularEvaluation);
    }
    Ok(r)
}

/// Kelvin tensor from the offset `r = x − y`.
#[inline]
pub fn kelvin_r(r: &Vec3, mat: &MaterialParams) -> Mat3 {
    let (a, b) = mat.kelvin_coeffs();
    let d2 = r.norm_squared();
    let d = d2.sqrt();
    let inv = 1.0 / d;
    let inv3 = inv / d2;
    let mut m = r * r.transpose() * (b * inv3);
    let diag = a * inv;
    m[(0, 0)] += diag;
    m[(1, 1)] += diag;
    m[(2, 2)] += diag;
    m
}

/// Symmetric Kelvin tensor as (U11, U22, U33, U12, U13, U23).
#[inline]
pub fn kelvin_sym(r: &Vec3, a: f64, b: f64) -> [f64; 6] {
    let d2 = r.norm_squared();
    let inv = 1.0 / d2.sqrt();
    let bi3 = b * inv / d2;
    let ai = a * inv;
    [
        ai + bi3 * r.x * r.x,
        ai + bi3 * r.y * r.y,
        ai + bi3 * r.z * r.z,
        bi3 * r.x * r.y,
        bi3 * r.x * r.z,
        bi3 * r.y * r.z,
    ]
}

/// The two Kelvin coefficients (λ+3μ)/(8πμ(λ+2μ)) and (λ+μ)/(8πμ(λ+2μ)).
pub fn kelvin_coefficients(mat: &MaterialParams) -> (f64, f64) {
    mat.kelvin_coeffs()
}

pub fn kelvin(x: &Vec3, y: &Vec3, mat: &MaterialParams) -> Result<Mat3> {
    Ok(kelvin_r(&check_distinct(x, y)?, mat))
}

/// ∂U/∂x_k for k = 0, 1, 2, from `r = x − y`.
pub fn kelvin_grad_r(r: &Vec3, mat: &MaterialParams) -> [Mat3; 3] {
    let (a, b) = mat.kelvin_coeffs();
    let d2 = r.norm_squared();
    let d = d2.sqrt();
    let inv3 = 1.0 / (d * d2);
    let inv5 = inv3 / d2;
    let mut out = [Mat3::zeros(); 3];
    for (k, m) in out.iter_mut().enumerate() {
        for p in 0..3 {
            for q in 0..3 {
                let mut v = -3.0 * r[p] * r[q] * r[k] * inv5;
                if p == k {
                    v += r[q] * inv3;
                }
                if q == k {
                    v += r[p] * inv3;
                }
                let mut val = b * v;
                if p == q {
                    val -= a * r[k] * inv3;
                }
                m[(p, q)] = val;
            }
        }
    }
    out
}

/// (T_y U)ᵀ(x, y) from `r = x − y`: entry (k, i) is the i-th traction
/// component at y, normal `n_y`, of the field of a unit force e_k at x.
#[inline]
pub fn traction_kernel_r(r: &Vec3, n_y: &Vec3, mat: &MaterialParams) -> Mat3 {
    let d2 = r.norm_squared();
    let d = d2.sqrt();
    // unit vector from x to y
    let e = -r / d;
    let dn = e.dot(n_y);
    let one_m2nu = mat.mu / (mat.lambda + mat.mu);
    let c = -(mat.lambda + mat.mu) / (4.0 * PI * (mat.lambda + 2.0 * mat.mu)) / d2;
    let mut t = Mat3::zeros();
    for k in 0..3 {
        for i in 0..3 {
            let delta = if i == k { 1.0 } else { 0.0 };
            let v = (one_m2nu * delta + 3.0 * e[i] * e[k]) * dn - one_m2nu * (e[k] * n_y[i] - e[i] * n_y[k]);
            t[(k, i)] = c * v;
        }
    }
    t
}

pub fn traction_kernel(x: &Vec3, y: &Vec3, n_y: &Vec3, mat: &MaterialParams) -> Result<Mat3> {
    Ok(traction_kernel_r(&check_distinct(x, y)?, n_y, mat))
}

/// 1/|x − y|.
pub fn newton(x: &Vec3, y: &Vec3) -> Result<f64> {
    Ok(1.0 / check_distinct(x, y)?.norm())
}

/// ∂/∂n_y of 1/|x − y| = (x − y)·n_y / |x − y|³.
pub fn newton_normal(x: &Vec3, y: &Vec3, n_y: &Vec3) -> Result<f64> {
    let r = check_distinct(x, y)?;
    let d2 = r.norm_squared();
    Ok(r.dot(n_y) / (d2 * d2.sqrt()))
}

/// Günter matrix with entries n_j g_i − n_i g_j for a function with
/// surface gradient `g`.
pub fn gunter_apply(grad_phi: &Vec3, n: &Vec3) -> Mat3 {
    grad_phi * n.transpose() - n * grad_phi.transpose()
}

/// n × grad φ.
pub fn surface_curl(grad_phi: &Vec3, n: &Vec3) -> Vec3 {
    n.cross(grad_phi)
}

/// Matrix whose k-th column is (column k of U) × u.
pub fn u_star_cross(u_mat: &Mat3, u: &Vec3) -> Mat3 {
    let mut out = Mat3::zeros();
    for k in 0..3 {
        let c: Vec3 = u_mat.column(k).into_owned();
        out.set_column(k, &c.cross(u));
    }
    out
}

/// Matrix `S` with `S e_q = s × e_q`.
#[inline]
pub fn cross_matrix(s: &Vec3) -> Mat3 {
    Mat3::new(0.0, -s.z, s.y, s.z, 0.0, -s.x, -s.y, s.x, 0.0)
}
