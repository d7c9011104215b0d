//! BiCGSTAB and the block systems of the mixed boundary value problem.

use crate::assembly::MixedLayout;
use crate::error::{BemError, Result};
use crate::linalg::{check_dims, dot, norm2, LinearMap};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iter: 500 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// ‖b − A x‖ / ‖b‖ recomputed from the returned iterate.
    pub residual: f64,
    pub converged: bool,
    pub breakdown: bool,
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

fn true_residual(a: &dyn LinearMap, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = a.apply_vec(x);
    b.iter().zip(ax).map(|(b, ax)| b - ax).collect()
}

/// Right-preconditioned BiCGSTAB. The returned stats always carry the true
/// relative residual; breakdown or non-convergence is flagged, not raised.
pub fn bicgstab(
    a: &dyn LinearMap,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
    precond: Option<&dyn LinearMap>,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    check_dims(a.nrows(), n)?;
    check_dims(a.ncols(), n)?;
    if !(opts.tol > 0.0) {
        return Err(BemError::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if let Some(m) = precond {
        check_dims(m.nrows(), n)?;
        check_dims(m.ncols(), n)?;
    }
    let mut x = match x0 {
        Some(x0) => {
            check_dims(n, x0.len())?;
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveStats { converged: true, ..Default::default() }));
    }
    let pc = |v: &[f64]| -> Vec<f64> {
        match precond {
            Some(m) => m.apply_vec(v),
            None => v.to_vec(),
        }
    };
    let mut r = true_residual(a, b, &x);
    let mut stats = SolveStats { residual: norm2(&r) / bnorm, ..Default::default() };
    if stats.residual <= opts.tol {
        stats.converged = true;
        return Ok((x, stats));
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let tiny = f64::EPSILON * f64::EPSILON;
    for it in 1..=opts.max_iter {
        stats.iterations = it;
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() <= tiny * bnorm * bnorm {
            stats.breakdown = true;
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = pc(&p);
        a.apply(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() <= tiny * bnorm * bnorm {
            stats.breakdown = true;
            break;
        }
        alpha = rho / denom;
        let mut s = r.clone();
        axpy(-alpha, &v, &mut s);
        axpy(alpha, &p_hat, &mut x);
        if norm2(&s) / bnorm <= opts.tol {
            break;
        }
        let s_hat = pc(&s);
        let t = a.apply_vec(&s_hat);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            stats.breakdown = true;
            break;
        }
        omega = dot(&t, &s) / tt;
        axpy(omega, &s_hat, &mut x);
        r = s;
        axpy(-omega, &t, &mut r);
        if norm2(&r) / bnorm <= opts.tol {
            break;
        }
        if omega.abs() <= f64::EPSILON {
            stats.breakdown = true;
            break;
        }
    }
    stats.residual = norm2(&true_residual(a, b, &x)) / bnorm;
    stats.converged = stats.residual <= opts.tol * 1.5;
    Ok((x, stats))
}

/// Scatters packed P0 unknowns on `idx` into a full vector.
fn scatter(full: &mut [f64], idx: &[usize], x: &[f64]) {
    for (a, &i) in idx.iter().enumerate() {
        full[3 * i..3 * i + 3].copy_from_slice(&x[3 * a..3 * a + 3]);
    }
}

fn gather(full: &[f64], idx: &[usize], out: &mut [f64]) {
    for (a, &i) in idx.iter().enumerate() {
        out[3 * a..3 * a + 3].copy_from_slice(&full[3 * i..3 * i + 3]);
    }
}

/// Mixed collocation system [V_D, −(C + K)_U] acting on (t̃, ũ).
/// The columns of `v` are the elements `v_elements` (a superset of the
/// Dirichlet elements); `c_plus_k` has full P1 columns.
pub struct CollocationSystem<'a> {
    pub v: &'a dyn LinearMap,
    pub c_plus_k: &'a dyn LinearMap,
    pub layout: &'a MixedLayout,
    d_cols: Vec<usize>,
}

impl<'a> CollocationSystem<'a> {
    pub fn new(
        v: &'a dyn LinearMap,
        v_elements: &[usize],
        c_plus_k: &'a dyn LinearMap,
        layout: &'a MixedLayout,
    ) -> Result<Self> {
        check_dims(v.nrows(), layout.unknown_count())?;
        check_dims(v.ncols(), 3 * v_elements.len())?;
        check_dims(c_plus_k.nrows(), layout.unknown_count())?;
        let d_cols = layout
            .dirichlet_elements
            .iter()
            .map(|k| {
                v_elements
                    .iter()
                    .position(|e| e == k)
                    .ok_or_else(|| BemError::InvalidArgument(format!("Dirichlet element {k} missing from V columns")))
            })
            .collect::<Result<_>>()?;
        Ok(CollocationSystem { v, c_plus_k, layout, d_cols })
    }

    fn nd(&self) -> usize {
        3 * self.layout.dirichlet_elements.len()
    }
}

impl LinearMap for CollocationSystem<'_> {
    fn nrows(&self) -> usize {
        self.layout.unknown_count()
    }

    fn ncols(&self) -> usize {
        self.layout.unknown_count()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nd = self.nd();
        let mut t = vec![0.0; self.v.ncols()];
        scatter(&mut t, &self.d_cols, &x[..nd]);
        let mut u = vec![0.0; self.c_plus_k.ncols()];
        scatter(&mut u, &self.layout.unknown_nodes, &x[nd..]);
        self.v.apply(&t, y);
        let cu = self.c_plus_k.apply_vec(&u);
        y.iter_mut().zip(cu).for_each(|(y, c)| *y -= c);
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        let nd = self.nd();
        let vt = {
            let mut out = vec![0.0; self.v.ncols()];
            self.v.apply_transpose(x, &mut out);
            out
        };
        let ct = {
            let mut out = vec![0.0; self.c_plus_k.ncols()];
            self.c_plus_k.apply_transpose(x, &mut out);
            out
        };
        gather(&vt, &self.d_cols, &mut y[..nd]);
        gather(&ct, &self.layout.unknown_nodes, &mut y[nd..]);
        y[nd..].iter_mut().for_each(|v| *v = -*v);
    }
}

/// Mixed Galerkin system [V̂, −K̂; K̂ᵀ, D̂] restricted to Dirichlet elements
/// and free nodes. `v` may be absent for purely Neumann problems.
pub struct GalerkinSystem<'a> {
    pub v: Option<&'a dyn LinearMap>,
    pub k: &'a dyn LinearMap,
    pub d: &'a dyn LinearMap,
    pub layout: &'a MixedLayout,
}

impl<'a> GalerkinSystem<'a> {
    pub fn new(
        v: Option<&'a dyn LinearMap>,
        k: &'a dyn LinearMap,
        d: &'a dyn LinearMap,
        layout: &'a MixedLayout,
    ) -> Result<Self> {
        check_dims(k.ncols(), d.ncols())?;
        if let Some(v) = v {
            check_dims(v.nrows(), k.nrows())?;
        } else if !layout.dirichlet_elements.is_empty() {
            return Err(BemError::InvalidProblem("single layer required for Dirichlet data".into()));
        }
        Ok(GalerkinSystem { v, k, d, layout })
    }

    fn nd(&self) -> usize {
        3 * self.layout.dirichlet_elements.len()
    }

    fn run(&self, x: &[f64], y: &mut [f64], transpose: bool) {
        let nd = self.nd();
        let ne = self.k.nrows();
        let nn = self.k.ncols();
        let mut t = vec![0.0; ne];
        scatter(&mut t, &self.layout.dirichlet_elements, &x[..nd]);
        let mut u = vec![0.0; nn];
        scatter(&mut u, &self.layout.unknown_nodes, &x[nd..]);
        // K̂ enters as −K̂ in the first row and K̂ᵀ in the second; the
        // transpose swaps the signs.
        let s = if transpose { -1.0 } else { 1.0 };
        let mut top = vec![0.0; ne];
        if let Some(v) = self.v {
            if nd > 0 {
                if transpose {
                    v.apply_transpose(&t, &mut top);
                } else {
                    v.apply(&t, &mut top);
                }
            }
        }
        let ku = self.k.apply_vec(&u);
        axpy(-s, &ku, &mut top);
        let mut bottom = vec![0.0; nn];
        if transpose {
            self.d.apply_transpose(&u, &mut bottom);
        } else {
            self.d.apply(&u, &mut bottom);
        }
        let mut ktt = vec![0.0; nn];
        self.k.apply_transpose(&t, &mut ktt);
        axpy(s, &ktt, &mut bottom);
        gather(&top, &self.layout.dirichlet_elements, &mut y[..nd]);
        gather(&bottom, &self.layout.unknown_nodes, &mut y[nd..]);
    }
}

impl LinearMap for GalerkinSystem<'_> {
    fn nrows(&self) -> usize {
        self.layout.unknown_count()
    }

    fn ncols(&self) -> usize {
        self.layout.unknown_count()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.run(x, y, false)
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.run(x, y, true)
    }
}

/// 3×3 block-Jacobi preconditioner from the diagonal blocks of a map.
pub struct BlockJacobi {
    inv: Vec<crate::geometry::Mat3>,
}

impl BlockJacobi {
    pub fn from_blocks(blocks: Vec<crate::geometry::Mat3>) -> Result<Self> {
        let inv = blocks
            .into_iter()
            .enumerate()
            .map(|(i, b)| {
                b.try_inverse().ok_or_else(|| BemError::Numerical(format!("singular diagonal block {i}")))
            })
            .collect::<Result<_>>()?;
        Ok(BlockJacobi { inv })
    }
}

impl LinearMap for BlockJacobi {
    fn nrows(&self) -> usize {
        3 * self.inv.len()
    }

    fn ncols(&self) -> usize {
        3 * self.inv.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, m) in self.inv.iter().enumerate() {
            let v = m * crate::geometry::Vec3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
            y[3 * i..3 * i + 3].copy_from_slice(v.as_slice());
        }
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        for (i, m) in self.inv.iter().enumerate() {
            let v = m.transpose() * crate::geometry::Vec3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
            y[3 * i..3 * i + 3].copy_from_slice(v.as_slice());
        }
    }
}
