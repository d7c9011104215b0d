use elastobem::solver::{bicgstab, BlockJacobi, SolverOptions};
use elastobem::{BemError, DenseMatrix, LinearMap, Mat3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Diagonally dominant nonsymmetric matrix.
fn test_matrix(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0) / n as f64).collect();
    let mut a = DenseMatrix::from_fn(n, n, |i, j| vals[i * n + j]);
    for i in 0..n {
        a.add(i, i, 2.0 + i as f64 / n as f64);
    }
    a
}

fn residual(a: &DenseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.apply_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
    (r / b.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

#[test]
fn solves_a_nonsymmetric_system() {
    let a = test_matrix(60, 1);
    let b: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
    let (x, stats) = bicgstab(&a, &b, None, &SolverOptions { tol: 1e-10, max_iter: 200 }, None).unwrap();
    assert!(stats.converged && !stats.breakdown);
    assert!(residual(&a, &x, &b) <= 1.5e-10);
    assert!((stats.residual - residual(&a, &x, &b)).abs() < 1e-14);
}

#[test]
fn zero_rhs_gives_zero_solution() {
    let a = test_matrix(9, 2);
    let (x, stats) = bicgstab(&a, &[0.0; 9], None, &SolverOptions::default(), None).unwrap();
    assert!(stats.converged);
    assert_eq!(stats.iterations, 0);
    assert!(x.iter().all(|&v| v == 0.0));
}

#[test]
fn exact_initial_guess_returns_immediately() {
    let a = test_matrix(12, 3);
    let x0: Vec<f64> = (0..12).map(|i| i as f64).collect();
    let b = a.apply_vec(&x0);
    let (x, stats) = bicgstab(&a, &b, Some(&x0), &SolverOptions::default(), None).unwrap();
    assert_eq!(stats.iterations, 0);
    assert_eq!(x, x0);
}

#[test]
fn iteration_cap_is_reported_not_raised() {
    let a = test_matrix(80, 4);
    let b = vec![1.0; 80];
    let (_, stats) = bicgstab(&a, &b, None, &SolverOptions { tol: 1e-15, max_iter: 2 }, None).unwrap();
    assert!(!stats.converged);
    assert_eq!(stats.iterations, 2);
}

#[test]
fn rejects_bad_arguments() {
    let a = test_matrix(6, 5);
    let opts = SolverOptions::default();
    assert!(matches!(bicgstab(&a, &[1.0; 5], None, &opts, None), Err(BemError::DimensionMismatch { .. })));
    assert!(bicgstab(&a, &[1.0; 6], Some(&[0.0; 4]), &opts, None).is_err());
    assert!(bicgstab(&a, &[1.0; 6], None, &SolverOptions { tol: 0.0, max_iter: 10 }, None).is_err());
    let rect = DenseMatrix::zeros(6, 3);
    assert!(bicgstab(&rect, &[1.0; 6], None, &opts, None).is_err());
}

#[test]
fn block_jacobi_inverts_block_diagonal_systems() {
    let blocks: Vec<Mat3> = (0..4)
        .map(|i| Mat3::new(2.0 + i as f64, 0.3, 0.0, -0.1, 1.5, 0.2, 0.0, 0.4, 3.0))
        .collect();
    let mut a = DenseMatrix::zeros(12, 12);
    for (i, b) in blocks.iter().enumerate() {
        a.add_block(i, i, b);
    }
    let pc = BlockJacobi::from_blocks(blocks).unwrap();
    let b: Vec<f64> = (0..12).map(|i| 1.0 + i as f64).collect();
    let (x, stats) = bicgstab(&a, &b, None, &SolverOptions { tol: 1e-12, max_iter: 10 }, Some(&pc)).unwrap();
    assert!(stats.converged);
    assert!(stats.iterations <= 1);
    assert!(residual(&a, &x, &b) < 1e-12);
    assert!(BlockJacobi::from_blocks(vec![Mat3::zeros()]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn preconditioning_does_not_change_the_solution(seed in 0u64..1000) {
        let a = test_matrix(30, seed);
        let b: Vec<f64> = (0..30).map(|i| ((i + 1) as f64).ln()).collect();
        let blocks = (0..10).map(|i| a.block(i, i)).collect();
        let pc = BlockJacobi::from_blocks(blocks).unwrap();
        let opts = SolverOptions { tol: 1e-11, max_iter: 300 };
        let (x1, s1) = bicgstab(&a, &b, None, &opts, None).unwrap();
        let (x2, s2) = bicgstab(&a, &b, None, &opts, Some(&pc)).unwrap();
        prop_assert!(s1.converged && s2.converged);
        let d: f64 = x1.iter().zip(&x2).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(d < 1e-9);
    }
}
