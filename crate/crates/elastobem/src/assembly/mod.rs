//! Discrete boundary integral operators, free terms and right-hand sides
//! for the collocation and symmetric Galerkin formulations.

mod blocks;
mod collocation;
mod dofs;
mod galerkin;
mod lines;
mod local;

pub use collocation::{
    assemble_collocation, collocation_line_terms, mixed_collocation_points, row_sum_free_terms, CollocationOperators,
    CollocationOptions, CollocationPoint, FreeTerm, FreeTermMap,
};
pub use dofs::{BasisKind, BasisSpace, Formulation, MixedLayout, MixedTraceData};
pub use galerkin::{assemble_galerkin, galerkin_line_terms, p1_p0_mass, GalerkinOperators, GalerkinOptions};
pub use lines::{element_edges, point_edge_integrals, EdgeIntegrals};
pub use local::{PairIntegrals, PointIntegrals, PointLocation};

pub use blocks::LineMode;
pub(crate) use blocks::BlockBuilder;
pub(crate) use dofs::restrict;

use crate::error::Result;
use crate::geometry::TriangleMesh;
use crate::linalg::{check_dims, LinearMap};

/// Collocation right-hand side (C + K) g̃_D − V g̃_N over the given points.
/// `c_plus_k` maps full P1 vectors, `v` maps P0 vectors on `v_elements`.
pub fn collocation_rhs(
    c_plus_k: &dyn LinearMap,
    v: &dyn LinearMap,
    v_elements: &[usize],
    data: &MixedTraceData,
) -> Result<Vec<f64>> {
    check_dims(c_plus_k.ncols(), data.g_d.len())?;
    check_dims(v.ncols(), 3 * v_elements.len())?;
    check_dims(c_plus_k.nrows(), v.nrows())?;
    for (k, known) in data.t_known.iter().enumerate() {
        let nonzero = data.g_n[3 * k..3 * k + 3].iter().any(|&x| x != 0.0);
        if *known && nonzero && !v_elements.contains(&k) {
            return Err(crate::BemError::InvalidArgument(format!("Neumann element {k} missing from V columns")));
        }
    }
    let mut f = c_plus_k.apply_vec(&data.g_d);
    let gn = restrict(v_elements, &data.g_n);
    let vg = v.apply_vec(&gn);
    for (a, b) in f.iter_mut().zip(vg) {
        *a -= b;
    }
    Ok(f)
}

/// ∫ (P1 field) over each element, per component: ½ M g̃_D uses this.
pub fn p1_to_p0_moments(mesh: &TriangleMesh, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 3 * mesh.num_triangles()];
    for (k, entries) in p1_p0_mass(mesh).iter().enumerate() {
        for &(j, m) in entries {
            for c in 0..3 {
                out[3 * k + c] += m * u[3 * j + c];
            }
        }
    }
    out
}

/// Nodal moments ∫ φ_j t of a P0 field.
pub fn p0_to_p1_moments(mesh: &TriangleMesh, t: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 3 * mesh.num_vertices()];
    for (k, entries) in p1_p0_mass(mesh).iter().enumerate() {
        for &(j, m) in entries {
            for c in 0..3 {
                out[3 * j + c] += m * t[3 * k + c];
            }
        }
    }
    out
}

/// Galerkin right-hand sides, f_D on Dirichlet elements then f_N on free
/// nodes:
/// f_D = ⟨(½I + K)g̃_D − V g̃_N, τ⟩, f_N = ⟨(½I − K')g̃_N − D g̃_D, φ⟩.
pub fn galerkin_rhs(
    mesh: &TriangleMesh,
    layout: &MixedLayout,
    v: Option<&dyn LinearMap>,
    k: &dyn LinearMap,
    d: &dyn LinearMap,
    data: &MixedTraceData,
) -> Result<Vec<f64>> {
    data.check(mesh)?;
    check_dims(3 * mesh.num_triangles(), k.nrows())?;
    check_dims(3 * mesh.num_vertices(), d.nrows())?;
    let mut f = Vec::with_capacity(layout.unknown_count());
    if !layout.dirichlet_elements.is_empty() {
        let v = v.ok_or_else(|| crate::BemError::InvalidProblem("single layer required for Dirichlet data".into()))?;
        let mut fd = p1_to_p0_moments(mesh, &data.g_d);
        fd.iter_mut().for_each(|x| *x *= 0.5);
        let kg = k.apply_vec(&data.g_d);
        let vg = v.apply_vec(&data.g_n);
        for i in 0..fd.len() {
            fd[i] += kg[i] - vg[i];
        }
        f.extend(restrict(&layout.dirichlet_elements, &fd));
    }
    let mut fneu = p0_to_p1_moments(mesh, &data.g_n);
    fneu.iter_mut().for_each(|x| *x *= 0.5);
    let mut ktg = vec![0.0; k.ncols()];
    k.apply_transpose(&data.g_n, &mut ktg);
    let dg = d.apply_vec(&data.g_d);
    for i in 0..fneu.len() {
        fneu[i] -= ktg[i] + dg[i];
    }
    f.extend(restrict(&layout.unknown_nodes, &fneu));
    Ok(f)
}
