//! End-to-end solution of mixed boundary value problems.

use std::time::Instant;

use crate::assembly::{
    assemble_collocation, assemble_galerkin, collocation_rhs, galerkin_rhs, mixed_collocation_points, CollocationOptions,
    FreeTerm, FreeTermMap, Formulation, GalerkinOptions, MixedLayout, MixedTraceData,
};
use crate::error::{BemError, Result};
use crate::fmm::{FmmOperators, FmmOptions};
use crate::geometry::{Mat3, TriangleMesh};
use crate::kernels::MaterialParams;
use crate::linalg::LinearMap;
use crate::quadrature::QuadConfig;
use crate::solver::{bicgstab, BlockJacobi, CollocationSystem, GalerkinSystem, SolveStats, SolverOptions};

#[derive(Clone, Debug)]
pub enum Backend {
    Dense,
    Fmm(FmmOptions),
}

#[derive(Clone, Debug)]
pub struct ProblemOptions {
    pub formulation: Formulation,
    pub line_integrals: bool,
    pub quad: QuadConfig,
    pub solver: SolverOptions,
    pub backend: Backend,
    /// 3×3 block-Jacobi preconditioning (dense backend only).
    pub block_jacobi: bool,
    /// Collocation free term; `None` picks row sums on closed meshes.
    pub free_term: Option<FreeTerm>,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        ProblemOptions {
            formulation: Formulation::Collocation,
            line_integrals: false,
            quad: QuadConfig::default(),
            solver: SolverOptions::default(),
            backend: Backend::Dense,
            block_jacobi: false,
            free_term: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub data: MixedTraceData,
    pub stats: SolveStats,
    /// Bytes held by the operators (dense matrices or far-field operators).
    pub bytes: usize,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
}

fn nonzero_elements(layout: &MixedLayout, data: &MixedTraceData) -> Vec<usize> {
    let mut out: Vec<usize> = layout.dirichlet_elements.clone();
    for &k in &layout.neumann_elements {
        if data.g_n[3 * k..3 * k + 3].iter().any(|&x| x != 0.0) {
            out.push(k);
        }
    }
    out.sort_unstable();
    out
}

fn check_problem(mesh: &TriangleMesh, layout: &MixedLayout) -> Result<()> {
    if layout.is_pure_neumann() && mesh.is_closed() {
        return Err(BemError::InvalidProblem(
            "pure Neumann problem on a closed surface: rigid body motions are not determined".into(),
        ));
    }
    if layout.unknown_count() == 0 {
        return Err(BemError::InvalidProblem("no unknowns".into()));
    }
    Ok(())
}

/// Solves the mixed problem for the boundary data in `data` and returns
/// the completed Cauchy data.
pub fn solve_mixed(
    mesh: &TriangleMesh,
    mat: &MaterialParams,
    data: &MixedTraceData,
    opts: &ProblemOptions,
) -> Result<Solution> {
    data.check(mesh)?;
    let layout = MixedLayout::new(mesh)?;
    check_problem(mesh, &layout)?;
    if opts.block_jacobi && !matches!(opts.backend, Backend::Dense) {
        return Err(BemError::Unsupported("block-Jacobi preconditioning needs the dense backend".into()));
    }
    match opts.formulation {
        Formulation::Collocation => solve_collocation(mesh, mat, &layout, data, opts),
        Formulation::Galerkin => solve_galerkin(mesh, mat, &layout, data, opts),
    }
}

fn finish(
    system: &dyn LinearMap,
    rhs: &[f64],
    precond: Option<&dyn LinearMap>,
    layout: &MixedLayout,
    data: &MixedTraceData,
    opts: &ProblemOptions,
    bytes: usize,
    assembly_seconds: f64,
) -> Result<Solution> {
    let start = Instant::now();
    let (x, stats) = bicgstab(system, rhs, None, &opts.solver, precond)?;
    let mut out = data.clone();
    out.unpack_unknowns(layout, &x)?;
    Ok(Solution { data: out, stats, bytes, assembly_seconds, solve_seconds: start.elapsed().as_secs_f64() })
}

fn solve_collocation(
    mesh: &TriangleMesh,
    mat: &MaterialParams,
    layout: &MixedLayout,
    data: &MixedTraceData,
    opts: &ProblemOptions,
) -> Result<Solution> {
    let start = Instant::now();
    let points = mixed_collocation_points(layout);
    match &opts.backend {
        Backend::Dense => {
            let v_elements = nonzero_elements(layout, data);
            let copts = CollocationOptions {
                line_integrals: opts.line_integrals,
                free_term: opts.free_term,
                v_elements: Some(v_elements.clone()),
                assemble_k: true,
            };
            let mut ops = assemble_collocation(mesh, &points, mat, &opts.quad, &copts)?;
            ops.add_free_terms(mesh);
            let ck = &ops.k;
            let rhs = collocation_rhs(ck, &ops.v, &v_elements, data)?;
            let system = CollocationSystem::new(&ops.v, &v_elements, ck, layout)?;
            let precond = if opts.block_jacobi {
                let nd = layout.dirichlet_elements.len();
                let blocks = (0..points.len())
                    .map(|i| {
                        if i < nd {
                            let col = v_elements.iter().position(|&e| e == layout.dirichlet_elements[i]).unwrap_or(0);
                            ops.v.block(i, col)
                        } else {
                            -ck.block(i, layout.unknown_nodes[i - nd])
                        }
                    })
                    .collect();
                Some(BlockJacobi::from_blocks(blocks)?)
            } else {
                None
            };
            let bytes = ops.v.bytes() + ck.bytes();
            let asm = start.elapsed().as_secs_f64();
            finish(&system, &rhs, precond.as_ref().map(|p| p as &dyn LinearMap), layout, data, opts, bytes, asm)
        }
        Backend::Fmm(fopts) => {
            let fmm = FmmOperators::collocation(mesh, &points, mat, &opts.quad, fopts, opts.line_integrals)?;
            let free_terms: Vec<Mat3> = match opts.free_term.map_or(mesh.is_closed(), |f| f == FreeTerm::RowSum) {
                true => crate::assembly::row_sum_free_terms(fmm.k()),
                false => vec![Mat3::identity() * 0.5; points.len()],
            };
            let ck = FreeTermMap::new(mesh, &points, fmm.k(), &free_terms);
            let all: Vec<usize> = (0..mesh.num_triangles()).collect();
            let v = fmm.v().ok_or_else(|| BemError::Numerical("single layer missing".into()))?;
            let rhs = collocation_rhs(&ck, v, &all, data)?;
            let system = CollocationSystem::new(v, &all, &ck, layout)?;
            let asm = start.elapsed().as_secs_f64();
            finish(&system, &rhs, None, layout, data, opts, fmm.bytes(), asm)
        }
    }
}

fn solve_galerkin(
    mesh: &TriangleMesh,
    mat: &MaterialParams,
    layout: &MixedLayout,
    data: &MixedTraceData,
    opts: &ProblemOptions,
) -> Result<Solution> {
    let start = Instant::now();
    let need_v = !layout.dirichlet_elements.is_empty();
    match &opts.backend {
        Backend::Dense => {
            let gopts = GalerkinOptions {
                line_integrals: opts.line_integrals,
                v: need_v,
                k: true,
                k_rows: Some(nonzero_elements(layout, data)),
                d: true,
            };
            let ops = assemble_galerkin(mesh, mat, &opts.quad, &gopts)?;
            let k = ops.k.as_ref().ok_or_else(|| BemError::Numerical("double layer missing".into()))?;
            let d = ops.d.as_ref().ok_or_else(|| BemError::Numerical("hypersingular operator missing".into()))?;
            let v = ops.v.as_ref().map(|v| v as &dyn LinearMap);
            let rhs = galerkin_rhs(mesh, layout, v, k, d, data)?;
            let system = GalerkinSystem::new(v, k, d, layout)?;
            let precond = if opts.block_jacobi {
                let mut blocks: Vec<Mat3> = Vec::with_capacity(layout.unknown_count() / 3);
                if let Some(v) = &ops.v {
                    blocks.extend(layout.dirichlet_elements.iter().map(|&e| v.block(e, e)));
                }
                blocks.extend(layout.unknown_nodes.iter().map(|&i| d.block(i, i)));
                Some(BlockJacobi::from_blocks(blocks)?)
            } else {
                None
            };
            let asm = start.elapsed().as_secs_f64();
            finish(&system, &rhs, precond.as_ref().map(|p| p as &dyn LinearMap), layout, data, opts, ops.bytes(), asm)
        }
        Backend::Fmm(fopts) => {
            let fmm = FmmOperators::galerkin(mesh, mat, &opts.quad, fopts, opts.line_integrals, need_v)?;
            let d = fmm.d().ok_or_else(|| BemError::Numerical("hypersingular operator missing".into()))?;
            let rhs = galerkin_rhs(mesh, layout, fmm.v(), fmm.k(), d, data)?;
            let system = GalerkinSystem::new(fmm.v(), fmm.k(), d, layout)?;
            let asm = start.elapsed().as_secs_f64();
            finish(&system, &rhs, None, layout, data, opts, fmm.bytes(), asm)
        }
    }
}
