//! Reference solutions and error measures.

use std::f64::consts::PI;

use crate::error::{invalid, BemError, Result};
use crate::geometry::{TriangleMesh, Vec3};
use crate::kernels::{kelvin, traction_kernel, MaterialParams};
use crate::quadrature::triangle_rule;

/// Surface displacement (u1, u3) of a half-space under a unit-direction
/// normal point load `f` at the origin, for a surface point `x`.
pub fn boussinesq(x: &Vec3, f: f64, mat: &MaterialParams) -> Result<(f64, f64)> {
    let r = x.x.hypot(x.y);
    if r == 0.0 {
        return Err(BemError::SingularEvaluation);
    }
    let (l, m) = (mat.lambda, mat.mu);
    let u1 = -f * x.x / (4.0 * PI * (l + m) * r * r);
    let u3 = f * (l + 2.0 * m) / (4.0 * PI * m * (l + m) * r);
    Ok((u1, u3))
}

/// Point force at `location` acting along the unit vector `direction`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointSource {
    pub location: Vec3,
    pub direction: Vec3,
}

impl PointSource {
    pub fn new(location: Vec3, direction: Vec3) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0) {
            return invalid("source direction must be nonzero");
        }
        Ok(PointSource { location, direction: direction / n })
    }

    /// Source with direction (1, 1, 1)/√3.
    pub fn diagonal(location: Vec3) -> Self {
        PointSource { location, direction: Vec3::repeat(1.0 / 3f64.sqrt()) }
    }
}

/// Displacement and traction of the field radiated by a point source.
#[derive(Clone, Copy, Debug)]
pub struct ManufacturedSolution {
    pub source: PointSource,
    pub mat: MaterialParams,
}

impl ManufacturedSolution {
    /// Fails when the source lies on the mesh.
    pub fn new(source: PointSource, mat: MaterialParams, mesh: &TriangleMesh) -> Result<Self> {
        let h = mesh.h();
        let dist = mesh.elements().iter().map(|e| e.distance_to(&source.location)).fold(f64::INFINITY, f64::min);
        if dist <= 1e-9 * h.max(1.0) {
            return invalid(format!("source {:?} lies on the boundary", source.location));
        }
        Ok(ManufacturedSolution { source, mat })
    }

    pub fn displacement(&self, x: &Vec3) -> Vec3 {
        kelvin(x, &self.source.location, &self.mat).map(|u| u * self.source.direction).unwrap_or(Vec3::zeros())
    }

    /// Traction on a surface with normal `n` at `x`.
    pub fn traction(&self, x: &Vec3, n: &Vec3) -> Vec3 {
        traction_kernel(&self.source.location, x, n, &self.mat)
            .map(|t| t.transpose() * self.source.direction)
            .unwrap_or(Vec3::zeros())
    }
}

/// Relative surface L2 errors of a P1 displacement and a P0 traction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub err_u: f64,
    pub err_t: f64,
    /// Set when the exact norm vanishes and the absolute error is reported.
    pub absolute_u: bool,
    pub absolute_t: bool,
}

/// ‖u_h − u‖/‖u‖ and ‖t_h − t‖/‖t‖ over the surface with a triangle rule
/// of the given degree.
pub fn rel_l2_error(
    mesh: &TriangleMesh,
    u: &[f64],
    t: &[f64],
    exact_u: impl Fn(&Vec3) -> Vec3,
    exact_t: impl Fn(&Vec3, &Vec3) -> Vec3,
    order: usize,
) -> Result<ErrorNorms> {
    if u.len() != 3 * mesh.num_vertices() {
        return Err(BemError::DimensionMismatch { expected: 3 * mesh.num_vertices(), got: u.len() });
    }
    if t.len() != 3 * mesh.num_triangles() {
        return Err(BemError::DimensionMismatch { expected: 3 * mesh.num_triangles(), got: t.len() });
    }
    let rule = triangle_rule(order)?;
    let (mut du, mut nu, mut dt, mut nt) = (0.0, 0.0, 0.0, 0.0);
    for (k, (el, tri)) in mesh.elements().iter().zip(&mesh.triangles).enumerate() {
        let th = Vec3::new(t[3 * k], t[3 * k + 1], t[3 * k + 2]);
        let nodal = tri.map(|i| Vec3::new(u[3 * i], u[3 * i + 1], u[3 * i + 2]));
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let x = el.map(p[0], p[1]);
            let lam = [1.0 - p[0] - p[1], p[0], p[1]];
            let uh = nodal[0] * lam[0] + nodal[1] * lam[1] + nodal[2] * lam[2];
            let ue = exact_u(&x);
            let te = exact_t(&x, &el.normal);
            let ww = 2.0 * el.area * w;
            du += ww * (uh - ue).norm_squared();
            nu += ww * ue.norm_squared();
            dt += ww * (th - te).norm_squared();
            nt += ww * te.norm_squared();
        }
    }
    let ratio = |d: f64, n: f64| if n > 0.0 { ((d / n).sqrt(), false) } else { (d.sqrt(), true) };
    let (err_u, absolute_u) = ratio(du, nu);
    let (err_t, absolute_t) = ratio(dt, nt);
    Ok(ErrorNorms { err_u, err_t, absolute_u, absolute_t })
}

/// log₂(err_k / err_{k+1}).
pub fn eoc(err_k: f64, err_k1: f64) -> Result<f64> {
    if !(err_k > 0.0 && err_k1 > 0.0) {
        return invalid(format!("errors must be positive, got {err_k} and {err_k1}"));
    }
    Ok((err_k / err_k1).log2())
}
