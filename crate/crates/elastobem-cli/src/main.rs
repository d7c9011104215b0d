use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use elastobem_cli::runs::{create, write_compare_csv, write_sidecar};
use elastobem_cli::{run_converge, run_fmm_compare, run_halfspace, run_mesh, ConfigError, Geometry, RawConfig, RunConfig};

#[derive(Parser)]
#[command(name = "elastobem", version, about = "Boundary element experiments for 3D elastostatics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured-solution convergence study.
    Converge(RunArgs),
    /// Loaded sheet compared with the Boussinesq solution.
    Halfspace(RunArgs),
    /// Standard, line-corrected and regularized FMM side by side.
    FmmCompare(RunArgs),
    /// Export the mesh of the first level in OFF format.
    Mesh(RunArgs),
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    geometry: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    fmm: Option<String>,
    #[arg(long)]
    line_integrals: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    f_lvl: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long, short)]
    output: Option<String>,
    #[arg(long)]
    paget: Option<String>,
    #[arg(long)]
    sheet_n: Option<String>,
    #[arg(long)]
    deep: Option<String>,
}

impl RunArgs {
    fn resolve(&self, default_geometry: Geometry) -> Result<RunConfig, ConfigError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        let flags = [
            ("geometry", &self.geometry),
            ("method", &self.method),
            ("fmm", &self.fmm),
            ("line_integrals", &self.line_integrals),
            ("levels", &self.levels),
            ("lambda", &self.lambda),
            ("mu", &self.mu),
            ("p", &self.p),
            ("f_lvl", &self.f_lvl),
            ("eta", &self.eta),
            ("tol", &self.tol),
            ("max_iter", &self.max_iter),
            ("output", &self.output),
            ("paget", &self.paget),
            ("sheet_n", &self.sheet_n),
            ("deep", &self.deep),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                raw.set(key, v)?;
            }
        }
        for pair in &self.set {
            raw.set_pair(pair)?;
        }
        if !raw.contains("geometry") {
            raw.set("geometry", &default_geometry.to_string())?;
        }
        raw.resolve()
    }
}

enum Failure {
    Usage(String),
    Numerical(anyhow::Error),
}

fn run(command: Command) -> Result<(), Failure> {
    let (args, kind) = match &command {
        Command::Converge(a) => (a, "converge"),
        Command::Halfspace(a) => (a, "halfspace"),
        Command::FmmCompare(a) => (a, "fmm-compare"),
        Command::Mesh(a) => (a, "mesh"),
    };
    let default_geometry = if kind == "halfspace" { Geometry::Sheet } else { Geometry::Cuboid };
    let cfg = args.resolve(default_geometry).map_err(|e| Failure::Usage(e.to_string()))?;
    let usage = |msg: &str| Failure::Usage(format!("{kind}: {msg}"));
    match kind {
        "halfspace" if cfg.geometry != Geometry::Sheet => return Err(usage("needs geometry=sheet")),
        "converge" | "fmm-compare" if cfg.geometry == Geometry::Sheet => {
            return Err(usage("needs geometry=cuboid or geometry=fichera"))
        }
        _ => {}
    }
    write_sidecar(&cfg).map_err(Failure::Numerical)?;
    let numerical = Failure::Numerical;
    match command {
        Command::Converge(_) => {
            let report = run_converge(&cfg).map_err(numerical)?;
            let mut w = create(&cfg.output).map_err(Failure::Numerical)?;
            report.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| Failure::Numerical(e.into()))?;
            if !report.failures.is_empty() {
                return Err(Failure::Numerical(anyhow::anyhow!(report.failures.join("; "))));
            }
        }
        Command::Halfspace(_) => {
            let profile = run_halfspace(&cfg).map_err(numerical)?;
            let mut w = create(&cfg.output).map_err(Failure::Numerical)?;
            profile.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| Failure::Numerical(e.into()))?;
            if !profile.converged {
                return Err(Failure::Numerical(anyhow::anyhow!("solver did not converge")));
            }
        }
        Command::FmmCompare(_) => {
            let rows = run_fmm_compare(&cfg).map_err(numerical)?;
            let mut w = create(&cfg.output).map_err(Failure::Numerical)?;
            write_compare_csv(&rows, &mut w).and_then(|_| w.flush()).map_err(|e| Failure::Numerical(e.into()))?;
        }
        Command::Mesh(_) => {
            let mesh = run_mesh(&cfg).map_err(numerical)?;
            let mut w = create(&cfg.output).map_err(Failure::Numerical)?;
            mesh.write_off(&mut w).map_err(|e| Failure::Numerical(e.into()))?;
            w.flush().map_err(|e| Failure::Numerical(e.into()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
