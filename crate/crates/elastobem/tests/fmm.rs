use elastobem::assembly::*;
use elastobem::fmm::*;
use elastobem::geometry::make_cuboid;
use elastobem::quadrature::QuadConfig;
use elastobem::{LinearMap, MaterialParams, TriangleMesh, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mat() -> MaterialParams {
    MaterialParams::new(0.2778, 0.4167).unwrap()
}

fn cuboid(level: usize) -> TriangleMesh {
    make_cuboid(Vec3::new(2.0, 1.0, 1.0), level).unwrap()
}

/// Uniform triangle rules so that dense and fast operators integrate the
/// far field identically.
fn uniform_quad(order: usize) -> QuadConfig {
    QuadConfig { tri_order: order, tri_order_mid: order, tri_order_far: order, ..QuadConfig::default() }
}

fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (d / b.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn node_points(mesh: &TriangleMesh) -> Vec<CollocationPoint> {
    (0..mesh.num_vertices()).map(CollocationPoint::Node).collect()
}

#[test]
fn interpolant_is_cardinal_on_the_nodes() {
    for p in 2..9 {
        let nodes = cheb_nodes(p);
        for (m, &x) in nodes.iter().enumerate() {
            for n in 0..p {
                let s = cheb_interp(p, x, n).unwrap();
                let want = if m == n { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-13, "p {p} m {m} n {n}: {s}");
            }
        }
    }
}

#[test]
fn interpolant_rejects_bad_arguments() {
    assert!(cheb_interp(1, 0.0, 0).is_err());
    assert!(cheb_interp(4, 0.0, 4).is_err());
    assert!(cheb_interp(4, 1.5, 0).is_err());
    assert!(cheb_interp(4, f64::NAN, 0).is_err());
}

proptest! {
    #[test]
    fn interpolant_sums_to_one(p in 2usize..10, x in -1.0f64..1.0) {
        let s: f64 = (0..p).map(|n| cheb_interp(p, x, n).unwrap()).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_interpolation_reproduces_low_degree_polynomials(
        x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
    ) {
        let basis = ChebyshevBasis::new(4).unwrap();
        let f = |v: &Vec3| 1.0 + v.x * v.x * v.x - 2.0 * v.x * v.y * v.z * v.z + 0.5 * v.y * v.y;
        let xi = Vec3::new(x, y, z);
        let (val, grad) = basis.values_and_gradients3(&xi);
        let interp: f64 = (0..basis.len3()).map(|n| val[n] * f(&basis.node3(n))).sum();
        prop_assert!((interp - f(&xi)).abs() < 1e-12);
        let g: Vec3 = (0..basis.len3()).map(|n| grad[n] * f(&basis.node3(n))).sum();
        let exact = Vec3::new(3.0 * x * x - 2.0 * y * z * z, -2.0 * x * z * z + y, -4.0 * x * y * z);
        prop_assert!((g - exact).norm() < 1e-11);
    }
}

#[test]
fn every_point_lands_in_a_leaf_that_contains_it() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<Vec3> = (0..200).map(|_| Vec3::new(rng.gen(), 2.0 * rng.gen::<f64>(), 0.5 * rng.gen::<f64>())).collect();
    let tree = ClusterTree::new(&pts, 3).unwrap();
    let assign = tree.assign(&pts).unwrap();
    let half = 0.5 * tree.width(3) * (1.0 + 1e-12);
    for (p, &leaf) in pts.iter().zip(&assign.leaf) {
        let cell = &tree.cells[leaf];
        assert_eq!(cell.level, 3);
        assert!((p - cell.center).amax() <= half);
    }
    assert!(ClusterTree::new(&pts, 0).is_err());
    assert!(ClusterTree::new(&[], 2).is_err());
}

#[test]
fn interaction_lists_cover_every_leaf_pair_once() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<Vec3> = (0..300).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
    let tree = ClusterTree::new(&pts, 3).unwrap();
    let assign = tree.assign(&pts).unwrap();
    let lists = tree.interactions(&assign, &assign, 0.5, 0.0, 0.02);
    assert!(!lists.far.is_empty());
    let leaves_below = |c: usize| -> Vec<usize> {
        let mut stack = vec![c];
        let mut out = Vec::new();
        while let Some(c) = stack.pop() {
            if tree.cells[c].level == tree.depth {
                if assign.members.contains_key(&c) {
                    out.push(c);
                }
            } else {
                stack.extend(&tree.cells[c].children);
            }
        }
        out
    };
    let mut seen = std::collections::HashMap::new();
    for &(t, s) in lists.far.iter().chain(&lists.near) {
        for a in leaves_below(t) {
            for b in leaves_below(s) {
                *seen.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    let n = assign.members.len();
    assert_eq!(seen.len(), n * n);
    assert!(seen.values().all(|&c| c == 1));
    for &(t, s) in &lists.far {
        assert!(tree.admissible(t, s, 0.5, 0.0, 0.02));
        assert!(tree.admissible(s, t, 0.5, 0.02, 0.0));
    }
}

#[test]
fn options_are_validated() {
    let mesh = cuboid(0);
    let pts = node_points(&mesh);
    let quad = QuadConfig::default();
    for bad in [
        FmmOptions { order: 1, ..Default::default() },
        FmmOptions { depth: 0, ..Default::default() },
        FmmOptions { eta: -1.0, ..Default::default() },
    ] {
        assert!(FmmOperators::collocation(&mesh, &pts, &mat(), &quad, &bad, false).is_err());
    }
}

#[test]
fn collocation_operators_match_dense_products() {
    let mesh = cuboid(1);
    let pts = node_points(&mesh);
    let quad = uniform_quad(5);
    let dense = assemble_collocation(&mesh, &pts, &mat(), &quad, &CollocationOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for variant in [FmmVariant::Standard, FmmVariant::StandardWithLines, FmmVariant::Regularized] {
        let opts = FmmOptions { variant, order: 6, depth: 3, eta: 0.5, quad_order: 5 };
        let fmm = FmmOperators::collocation(&mesh, &pts, &mat(), &quad, &opts, false).unwrap();
        assert!(fmm.far_pairs() > 0);
        let x = random(dense.v.ncols(), &mut rng);
        let ev = rel(&fmm.v().unwrap().apply_vec(&x), &dense.v.apply_vec(&x));
        let x = random(dense.k.ncols(), &mut rng);
        let ek = rel(&fmm.k().apply_vec(&x), &dense.k.apply_vec(&x));
        assert!(ev < 1e-4 && ek < 1e-3, "{variant:?}: V {ev:.2e} K {ek:.2e}");
    }
}

#[test]
fn galerkin_operators_match_dense_products_and_transposes() {
    let mesh = cuboid(2);
    let quad = uniform_quad(5);
    let dense = assemble_galerkin(&mesh, &mat(), &quad, &GalerkinOptions::default()).unwrap();
    let (dv, dk, dd) = (dense.v.unwrap(), dense.k.unwrap(), dense.d.unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for variant in [FmmVariant::Standard, FmmVariant::Regularized] {
        let opts = FmmOptions { variant, order: 6, depth: 2, eta: 0.5, quad_order: 5 };
        let fmm = FmmOperators::galerkin(&mesh, &mat(), &quad, &opts, false, true).unwrap();
        assert!(fmm.far_pairs() > 0);
        let (v, k, d) = (fmm.v().unwrap(), fmm.k(), fmm.d().unwrap());
        let x0 = random(v.ncols(), &mut rng);
        let x1 = random(k.ncols(), &mut rng);
        assert!(rel(&v.apply_vec(&x0), &dv.apply_vec(&x0)) < 1e-4);
        assert!(rel(&k.apply_vec(&x1), &dk.apply_vec(&x1)) < 1e-3);
        assert!(rel(&d.apply_vec(&x1), &dd.apply_vec(&x1)) < 1e-3);
        let mut kt = vec![0.0; k.ncols()];
        k.apply_transpose(&x0, &mut kt);
        let lhs = dot(&x0, &k.apply_vec(&x1));
        assert!((lhs - dot(&kt, &x1)).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}

#[test]
fn line_terms_cancel_on_a_closed_surface() {
    let mesh = cuboid(1);
    let pts = node_points(&mesh);
    let quad = QuadConfig::default();
    let base = FmmOptions { order: 4, depth: 3, ..Default::default() };
    let plain = FmmOperators::collocation(&mesh, &pts, &mat(), &quad, &base, false).unwrap();
    let lines = FmmOptions { variant: FmmVariant::StandardWithLines, ..base };
    let with_lines = FmmOperators::collocation(&mesh, &pts, &mat(), &quad, &lines, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = random(plain.k().ncols(), &mut rng);
    assert!(rel(&with_lines.k().apply_vec(&x), &plain.k().apply_vec(&x)) < 1e-10);
}

#[test]
fn regularized_far_field_needs_more_storage() {
    let mesh = cuboid(1);
    let pts = node_points(&mesh);
    let quad = QuadConfig::default();
    let bytes = |variant| {
        let opts = FmmOptions { variant, order: 4, depth: 3, ..Default::default() };
        let fmm = FmmOperators::collocation(&mesh, &pts, &mat(), &quad, &opts, false).unwrap();
        assert!(fmm.far_pairs() > 0);
        fmm.bytes()
    };
    let (standard, regularized) = (bytes(FmmVariant::Standard), bytes(FmmVariant::Regularized));
    assert!(regularized as f64 > 1.3 * standard as f64, "{regularized} vs {standard}");
}

#[test]
fn accuracy_improves_with_the_order() {
    let mesh = cuboid(1);
    let pts = node_points(&mesh);
    let quad = uniform_quad(5);
    let dense = assemble_collocation(&mesh, &pts, &mat(), &quad, &CollocationOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let x = random(dense.v.ncols(), &mut rng);
    let want = dense.v.apply_vec(&x);
    let err = |order| {
        let opts = FmmOptions { order, depth: 3, quad_order: 5, ..Default::default() };
        let fmm = FmmOperators::collocation(&mesh, &pts, &mat(), &quad, &opts, false).unwrap();
        rel(&fmm.v().unwrap().apply_vec(&x), &want)
    };
    let errs: Vec<f64> = [2, 4, 6].into_iter().map(err).collect();
    assert!(errs[1] < 0.2 * errs[0] && errs[2] < 0.2 * errs[1], "{errs:?}");
}
