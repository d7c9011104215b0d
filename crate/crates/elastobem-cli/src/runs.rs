//! Experiment drivers: convergence studies, the half-space profile, FMM
//! variant comparison and mesh export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use elastobem::analytic::{boussinesq, eoc, rel_l2_error, ManufacturedSolution, PointSource};
use elastobem::assembly::{Formulation, MixedLayout, MixedTraceData};
use elastobem::fmm::{FmmOptions, FmmVariant};
use elastobem::geometry::{make_cuboid, make_fichera_with, make_sheet, QuadSplit};
use elastobem::problem::{solve_mixed, Backend, ProblemOptions, Solution};
use elastobem::quadrature::QuadConfig;
use elastobem::solver::SolverOptions;
use elastobem::{MaterialParams, TriangleMesh, Vec3};
use log::info;

use crate::config::{FmmMode, Geometry, Method, RunConfig, Split};

pub const CONVERGE_HEADER: &str = "level,dof,h,err_u,eoc_u,err_t,eoc_t,iters,seconds,bytes";
pub const HALFSPACE_HEADER: &str = "x1,u1,u3,u1_exact,u3_exact";
pub const COMPARE_HEADER: &str = "level,variant,p,f_lvl,dof,err_u,err_t,iters,seconds,bytes";

/// Triangle rule degree for boundary data and error norms.
const DATA_ORDER: usize = 5;

/// Shortest round-trip scientific notation.
fn sci(v: f64) -> String {
    format!("{v:e}")
}

/// Cuboid edge lengths.
pub const CUBOID_DIMS: [f64; 3] = [2.0, 1.0, 1.0];

pub fn source_point(geometry: Geometry) -> Vec3 {
    match geometry {
        Geometry::Cuboid => Vec3::new(3.0, 0.5, 0.5),
        Geometry::Fichera => Vec3::new(0.75, -0.15, 0.1),
        Geometry::Sheet => Vec3::zeros(),
    }
}

pub fn material(cfg: &RunConfig) -> Result<MaterialParams> {
    Ok(MaterialParams::new(cfg.lambda, cfg.mu)?)
}

/// Mesh of a refinement level with its boundary condition tags: Dirichlet
/// on the cuboid face x = 0, Neumann on the Fichera face x = −1/2, all
/// Neumann on the sheet.
pub fn build_mesh(cfg: &RunConfig, level: usize) -> Result<TriangleMesh> {
    let mesh = match cfg.geometry {
        Geometry::Cuboid => make_cuboid(Vec3::from(CUBOID_DIMS), level)?.with_tags(|c, n| c.x.abs() < 1e-9 && n.x > 0.5),
        Geometry::Fichera => {
            let split = match cfg.fichera_split {
                Split::Center => QuadSplit::Center4,
                Split::Diagonal => QuadSplit::Diagonal2,
            };
            make_fichera_with(1.0, level, split, cfg.fichera_cells)?.with_tags(|_, n| n.x > -0.5)
        }
        Geometry::Sheet => {
            let mesh = make_sheet(cfg.sheet_length, cfg.sheet_n)?;
            elastobem::geometry::refine_times(mesh, level).with_tags(|_, _| false)
        }
    };
    Ok(mesh)
}

fn variant(mode: FmmMode) -> Option<FmmVariant> {
    match mode {
        FmmMode::Dense => None,
        FmmMode::Standard => Some(FmmVariant::Standard),
        FmmMode::Lines => Some(FmmVariant::StandardWithLines),
        FmmMode::Regularized => Some(FmmVariant::Regularized),
    }
}

pub fn problem_options(cfg: &RunConfig, level: usize, mode: FmmMode) -> ProblemOptions {
    let (order, depth) = cfg.fmm_params(level);
    let backend = match variant(mode) {
        None => Backend::Dense,
        Some(variant) => Backend::Fmm(FmmOptions { variant, order, depth, eta: cfg.eta, ..Default::default() }),
    };
    let quad = QuadConfig { naive_singular_lines: !cfg.paget, ..QuadConfig::default() };
    ProblemOptions {
        formulation: match cfg.method {
            Method::Collocation => Formulation::Collocation,
            Method::Galerkin => Formulation::Galerkin,
        },
        line_integrals: cfg.line_integrals,
        quad,
        solver: SolverOptions { tol: cfg.tol, max_iter: cfg.max_iter },
        backend,
        ..Default::default()
    }
}

/// Outcome of one refinement level of a manufactured-solution study.
#[derive(Clone, Debug)]
pub struct LevelResult {
    pub level: usize,
    pub dof: usize,
    pub h: f64,
    pub err_u: f64,
    pub err_t: f64,
    pub iters: usize,
    pub seconds: f64,
    pub bytes: usize,
    pub converged: bool,
}

/// Solves the manufactured problem on one level.
pub fn solve_level(cfg: &RunConfig, level: usize, mode: FmmMode) -> Result<LevelResult> {
    if cfg.geometry == Geometry::Sheet {
        anyhow::bail!("manufactured solutions need a closed geometry");
    }
    let mat = material(cfg)?;
    let mesh = build_mesh(cfg, level)?;
    let source = PointSource::diagonal(source_point(cfg.geometry));
    let exact = ManufacturedSolution::new(source, mat, &mesh)?;
    let layout = MixedLayout::new(&mesh)?;
    let data = MixedTraceData::from_boundary_data(
        &mesh,
        &layout,
        |x| exact.displacement(x),
        |x, n| exact.traction(x, n),
        DATA_ORDER,
    )?;
    let sol = solve_mixed(&mesh, &mat, &data, &problem_options(cfg, level, mode))
        .with_context(|| format!("level {level}"))?;
    let norms = rel_l2_error(
        &mesh,
        &sol.data.u,
        &sol.data.t,
        |x| exact.displacement(x),
        |x, n| exact.traction(x, n),
        DATA_ORDER,
    )?;
    Ok(LevelResult {
        level,
        dof: layout.unknown_count(),
        h: mesh.h(),
        err_u: norms.err_u,
        err_t: norms.err_t,
        iters: sol.stats.iterations,
        seconds: sol.assembly_seconds + sol.solve_seconds,
        bytes: sol.bytes,
        converged: sol.stats.converged,
    })
}

#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub result: LevelResult,
    pub eoc_u: Option<f64>,
    pub eoc_t: Option<f64>,
}

/// Per-level errors and rates; failed levels carry NaN errors.
#[derive(Clone, Debug, Default)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub failures: Vec<String>,
}

impl ConvergenceReport {
    pub fn err_u(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.result.err_u).collect()
    }

    pub fn err_t(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.result.err_t).collect()
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{CONVERGE_HEADER}")?;
        let opt = |e: Option<f64>| e.map_or("X".to_string(), |v| format!("{v:.4}"));
        for row in &self.rows {
            let r = &row.result;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.level,
                r.dof,
                sci(r.h),
                sci(r.err_u),
                opt(row.eoc_u),
                sci(r.err_t),
                opt(row.eoc_t),
                r.iters,
                format!("{:.3}", r.seconds),
                r.bytes
            )?;
        }
        Ok(())
    }
}

fn failed_level(level: usize) -> LevelResult {
    LevelResult {
        level,
        dof: 0,
        h: f64::NAN,
        err_u: f64::NAN,
        err_t: f64::NAN,
        iters: 0,
        seconds: 0.0,
        bytes: 0,
        converged: false,
    }
}

/// Convergence study over the configured levels. A failing level is
/// recorded and the study continues.
pub fn run_converge(cfg: &RunConfig) -> Result<ConvergenceReport> {
    if cfg.geometry == Geometry::Sheet {
        anyhow::bail!("converge needs geometry=cuboid or geometry=fichera");
    }
    let mut report = ConvergenceReport::default();
    for level in cfg.levels.iter() {
        let result = match solve_level(cfg, level, cfg.fmm) {
            Ok(r) => {
                if !r.converged {
                    report.failures.push(format!("level {level}: solver did not converge"));
                }
                r
            }
            Err(e) => {
                report.failures.push(format!("{e:#}"));
                failed_level(level)
            }
        };
        let prev = report.rows.last().map(|r| &r.result);
        let rate = |a: Option<f64>, b: f64| a.and_then(|a| eoc(a, b).ok());
        let eoc_u = rate(prev.map(|p| p.err_u), result.err_u);
        let eoc_t = rate(prev.map(|p| p.err_t), result.err_t);
        info!(
            "level {level}: err_u {:.3e} err_t {:.3e} iters {} {:.1} s",
            result.err_u, result.err_t, result.iters, result.seconds
        );
        report.rows.push(ConvergenceRow { result, eoc_u, eoc_t });
    }
    Ok(report)
}

/// Displacements along the line x2 = 0 of the loaded sheet.
#[derive(Clone, Debug, Default)]
pub struct HalfspaceProfile {
    pub x1: Vec<f64>,
    pub u1: Vec<f64>,
    pub u3: Vec<f64>,
    pub u1_exact: Vec<f64>,
    pub u3_exact: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    pub seconds: f64,
}

impl HalfspaceProfile {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{HALFSPACE_HEADER}")?;
        for i in 0..self.x1.len() {
            let row = [self.x1[i], self.u1[i], self.u3[i], self.u1_exact[i], self.u3_exact[i]].map(sci);
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Largest relative deviation |u3 − u3_exact| / |u3_exact| for
    /// `lo ≤ |x1| ≤ hi`.
    pub fn max_rel_dev_u3(&self, lo: f64, hi: f64) -> f64 {
        self.window(lo, hi).map(|i| ((self.u3[i] - self.u3_exact[i]) / self.u3_exact[i]).abs()).fold(0.0, f64::max)
    }

    /// Largest |u3| / |u3_exact| for `lo ≤ |x1| ≤ hi`.
    pub fn max_ratio_u3(&self, lo: f64, hi: f64) -> f64 {
        self.window(lo, hi).map(|i| (self.u3[i] / self.u3_exact[i]).abs()).fold(0.0, f64::max)
    }

    /// Largest |u3 − u3_exact| for `lo ≤ x1 ≤ hi`.
    pub fn max_abs_dev_u3(&self, lo: f64, hi: f64) -> f64 {
        (0..self.x1.len())
            .filter(|&i| self.x1[i] >= lo && self.x1[i] <= hi)
            .map(|i| (self.u3[i] - self.u3_exact[i]).abs())
            .fold(0.0, f64::max)
    }

    fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.x1.len()).filter(move |&i| self.x1[i].abs() >= lo && self.x1[i].abs() <= hi)
    }
}

/// Unit normal pressure on the square |y1|, |y2| ≤ 1/2: total force 1 N
/// along +x3.
pub fn patch_traction(mesh: &TriangleMesh, layout: &MixedLayout) -> MixedTraceData {
    let mut g_n = vec![0.0; 3 * mesh.num_triangles()];
    for (k, el) in mesh.elements().iter().enumerate() {
        if el.centroid.x.abs() < 0.5 && el.centroid.y.abs() < 0.5 {
            g_n[3 * k + 2] = 1.0;
        }
    }
    MixedTraceData::from_extensions(layout, vec![0.0; 3 * mesh.num_vertices()], g_n)
}

/// Pure Neumann problem on the sheet loaded by the unit patch.
pub fn run_halfspace(cfg: &RunConfig) -> Result<HalfspaceProfile> {
    if cfg.geometry != Geometry::Sheet {
        anyhow::bail!("halfspace needs geometry=sheet");
    }
    let level = cfg.levels.first;
    let mat = material(cfg)?;
    let mesh = build_mesh(cfg, level)?;
    let layout = MixedLayout::new(&mesh)?;
    let data = patch_traction(&mesh, &layout);
    let sol: Solution = solve_mixed(&mesh, &mat, &data, &problem_options(cfg, level, cfg.fmm))?;
    let tol = 1e-9 * cfg.sheet_length;
    let mut nodes: Vec<usize> = (0..mesh.num_vertices()).filter(|&i| mesh.vertices[i].y.abs() < tol).collect();
    nodes.sort_by(|&a, &b| mesh.vertices[a].x.total_cmp(&mesh.vertices[b].x));
    let mut out = HalfspaceProfile {
        iters: sol.stats.iterations,
        converged: sol.stats.converged,
        seconds: sol.assembly_seconds + sol.solve_seconds,
        ..Default::default()
    };
    for i in nodes {
        let x = mesh.vertices[i];
        let (e1, e3) = boussinesq(&x, 1.0, &mat).unwrap_or((f64::NAN, f64::NAN));
        out.x1.push(x.x);
        out.u1.push(sol.data.u[3 * i]);
        out.u3.push(sol.data.u[3 * i + 2]);
        out.u1_exact.push(e1);
        out.u3_exact.push(e3);
    }
    info!("halfspace: {} iterations, {:.1} s", out.iters, out.seconds);
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct CompareRow {
    pub level: usize,
    pub mode: FmmMode,
    pub p: usize,
    pub f_lvl: usize,
    pub result: LevelResult,
}

pub fn write_compare_csv(rows: &[CompareRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{COMPARE_HEADER}")?;
    for r in rows {
        let s = &r.result;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.level,
            r.mode,
            r.p,
            r.f_lvl,
            s.dof,
            sci(s.err_u),
            sci(s.err_t),
            s.iters,
            format!("{:.3}", s.seconds),
            s.bytes
        )?;
    }
    Ok(())
}

/// The three FMM variants on every configured level.
pub fn run_fmm_compare(cfg: &RunConfig) -> Result<Vec<CompareRow>> {
    if cfg.geometry == Geometry::Sheet {
        anyhow::bail!("fmm-compare needs a closed geometry");
    }
    let mut rows = Vec::new();
    for level in cfg.levels.iter() {
        let (p, f_lvl) = cfg.fmm_params(level);
        for mode in [FmmMode::Standard, FmmMode::Lines, FmmMode::Regularized] {
            let result = solve_level(cfg, level, mode)?;
            info!("level {level} {mode}: err_u {:.3e} err_t {:.3e} bytes {}", result.err_u, result.err_t, result.bytes);
            rows.push(CompareRow { level, mode, p, f_lvl, result });
        }
    }
    Ok(rows)
}

/// Writes the mesh of the first configured level in OFF format.
pub fn run_mesh(cfg: &RunConfig) -> Result<TriangleMesh> {
    build_mesh(cfg, cfg.levels.first)
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Writes the resolved configuration next to the output file.
pub fn write_sidecar(cfg: &RunConfig) -> Result<()> {
    let mut w = create(&cfg.sidecar_path())?;
    w.write_all(cfg.echo().as_bytes())?;
    w.flush()?;
    Ok(())
}
