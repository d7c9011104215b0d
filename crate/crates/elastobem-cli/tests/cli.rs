use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elastobem")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_or_unknown_arguments_are_usage_errors() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["solve"])), 2);
    assert_eq!(code(&run(&["converge", "--set", "colour=red"])), 2);
    assert_eq!(code(&run(&["converge", "--set", "noequals"])), 2);
    assert_eq!(code(&run(&["converge", "--geometry", "torus"])), 2);
    assert_eq!(code(&run(&["converge", "--levels", "0-9"])), 2);
}

#[test]
fn geometry_must_fit_the_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    assert_eq!(code(&run(&["converge", "--geometry", "sheet", "-o", path_str(&out)])), 2);
    assert_eq!(code(&run(&["halfspace", "--geometry", "cuboid", "-o", path_str(&out)])), 2);
    assert_eq!(code(&run(&["halfspace", "--method", "galerkin", "--paget", "off", "-o", path_str(&out)])), 2);
}

#[test]
fn converge_writes_the_table_and_the_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# cuboid study\ngeometry = cuboid\nlevels = 0-1\n").unwrap();
    let out = dir.path().join("nested/conv.csv");
    let res = run(&["converge", "--config", path_str(&cfg), "--set", "tol=1e-10", "-o", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,dof,h,err_u,eoc_u,err_t,eoc_t,iters,seconds,bytes");
    assert_eq!(lines.len(), 3);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[0], "0");
    assert_eq!(first[1], "63");
    assert_eq!(first[4], "X");
    let second: Vec<&str> = lines[2].split(',').collect();
    let eoc: f64 = second[4].parse().unwrap();
    assert!(eoc > 1.0);
    let echo = std::fs::read_to_string(dir.path().join("nested/conv.csv.config")).unwrap();
    assert!(echo.contains("geometry=cuboid"));
    assert!(echo.contains("tol=1e-10"));
    assert!(echo.contains("levels=0-1"));
}

#[test]
fn solver_failure_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv.csv");
    let res = run(&["converge", "--levels", "0", "--max-iter", "1", "--tol", "1e-14", "-o", path_str(&out)]);
    assert_eq!(code(&res), 1);
    assert!(out.exists());
}

#[test]
fn halfspace_profile_has_the_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hs.csv");
    let res = run(&["halfspace", "--set", "sheet_length=8", "--sheet-n", "8", "-o", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x1,u1,u3,u1_exact,u3_exact");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));
    assert!(dir.path().join("hs.csv.config").exists());
}

#[test]
fn mesh_export_writes_off() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.off");
    let res = run(&["mesh", "--geometry", "fichera", "--levels", "1", "-o", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "OFF");
    let counts: Vec<usize> = lines.next().unwrap().split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert_eq!(counts[1], 768);
}
