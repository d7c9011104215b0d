use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::geometry::Vec3;

/// Chebyshev roots cos((2n − 1)π / 2p), n = 1..p.
pub fn cheb_nodes(p: usize) -> Vec<f64> {
    (1..=p).map(|n| ((2 * n - 1) as f64 * PI / (2 * p) as f64).cos()).collect()
}

/// S_p(x, x̄_n) = 1/p + 2/p Σ_{k=1}^{p−1} T_k(x) T_k(x̄_n).
pub fn cheb_interp(p: usize, x: f64, n: usize) -> Result<f64> {
    if p < 2 {
        return invalid(format!("interpolation order must be at least 2, got {p}"));
    }
    if n >= p {
        return invalid(format!("node index {n} out of range for order {p}"));
    }
    if !(x.abs() <= 1.0) {
        return invalid(format!("{x} outside [-1, 1]"));
    }
    Ok(ChebyshevBasis::new(p)?.values(x)[n])
}

/// Lagrange basis of the Chebyshev roots in one and three dimensions.
#[derive(Clone, Debug)]
pub struct ChebyshevBasis {
    pub p: usize,
    pub nodes: Vec<f64>,
    /// T_k(x̄_n), indexed [n][k].
    tk_nodes: Vec<Vec<f64>>,
}

impl ChebyshevBasis {
    pub fn new(p: usize) -> Result<Self> {
        if p < 2 {
            return invalid(format!("interpolation order must be at least 2, got {p}"));
        }
        let nodes = cheb_nodes(p);
        let tk_nodes = nodes.iter().map(|&x| chebyshev_t(p, x)).collect();
        Ok(ChebyshevBasis { p, nodes, tk_nodes })
    }

    /// Number of tensor nodes p³.
    pub fn len3(&self) -> usize {
        self.p * self.p * self.p
    }

    /// Reference coordinates of tensor node `n = i + p (j + p k)`.
    pub fn node3(&self, n: usize) -> Vec3 {
        let p = self.p;
        Vec3::new(self.nodes[n % p], self.nodes[(n / p) % p], self.nodes[n / (p * p)])
    }

    /// S_p(x, x̄_n) for all n.
    pub fn values(&self, x: f64) -> Vec<f64> {
        let x = x.clamp(-1.0, 1.0);
        let t = chebyshev_t(self.p, x);
        let p = self.p as f64;
        self.tk_nodes
            .iter()
            .map(|tn| 1.0 / p + 2.0 / p * (1..self.p).map(|k| t[k] * tn[k]).sum::<f64>())
            .collect()
    }

    /// Values and x-derivatives of S_p(·, x̄_n).
    pub fn values_and_derivatives(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let x = x.clamp(-1.0, 1.0);
        let t = chebyshev_t(self.p, x);
        let dt = chebyshev_dt(self.p, x);
        let p = self.p as f64;
        let mut v = Vec::with_capacity(self.p);
        let mut d = Vec::with_capacity(self.p);
        for tn in &self.tk_nodes {
            v.push(1.0 / p + 2.0 / p * (1..self.p).map(|k| t[k] * tn[k]).sum::<f64>());
            d.push(2.0 / p * (1..self.p).map(|k| dt[k] * tn[k]).sum::<f64>());
        }
        (v, d)
    }

    /// Tensor basis values at a reference point.
    pub fn values3(&self, xi: &Vec3) -> Vec<f64> {
        let (vx, vy, vz) = (self.values(xi.x), self.values(xi.y), self.values(xi.z));
        let p = self.p;
        let mut out = Vec::with_capacity(p * p * p);
        for c in &vz {
            for b in &vy {
                for a in &vx {
                    out.push(a * b * c);
                }
            }
        }
        out
    }

    /// Tensor basis values and reference gradients.
    pub fn values_and_gradients3(&self, xi: &Vec3) -> (Vec<f64>, Vec<Vec3>) {
        let (vx, dx) = self.values_and_derivatives(xi.x);
        let (vy, dy) = self.values_and_derivatives(xi.y);
        let (vz, dz) = self.values_and_derivatives(xi.z);
        let p = self.p;
        let mut val = Vec::with_capacity(p * p * p);
        let mut grad = Vec::with_capacity(p * p * p);
        for k in 0..p {
            for j in 0..p {
                for i in 0..p {
                    val.push(vx[i] * vy[j] * vz[k]);
                    grad.push(Vec3::new(dx[i] * vy[j] * vz[k], vx[i] * dy[j] * vz[k], vx[i] * vy[j] * dz[k]));
                }
            }
        }
        (val, grad)
    }
}

/// T_0..T_{p−1} at x.
fn chebyshev_t(p: usize, x: f64) -> Vec<f64> {
    let mut t = vec![0.0; p.max(2)];
    t[0] = 1.0;
    t[1] = x;
    for k in 2..p {
        t[k] = 2.0 * x * t[k - 1] - t[k - 2];
    }
    t.truncate(p);
    t
}

/// T_k'(x) = k U_{k−1}(x) for k = 0..p−1.
fn chebyshev_dt(p: usize, x: f64) -> Vec<f64> {
    let mut u = vec![0.0; p.max(2)];
    u[0] = 1.0;
    u[1] = 2.0 * x;
    for k in 2..p {
        u[k] = 2.0 * x * u[k - 1] - u[k - 2];
    }
    let mut d = vec![0.0; p];
    for k in 1..p {
        d[k] = k as f64 * u[k - 1];
    }
    d
}
