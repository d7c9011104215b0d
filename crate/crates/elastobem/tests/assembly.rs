mod common;

use common::{barycentric, triangle_points};
use elastobem::assembly::*;
use elastobem::geometry::{make_cuboid, make_fichera, open_boundary};
use elastobem::kernels::{kelvin, traction_kernel};
use elastobem::quadrature::QuadConfig;
use elastobem::{DenseMatrix, LinearMap, Mat3, MaterialParams, TriangleMesh, Vec3};

fn mat() -> MaterialParams {
    MaterialParams::new(0.2778, 0.4167).unwrap()
}

fn two_triangles() -> TriangleMesh {
    let v = vec![
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.3, 0.2, 1.5),
        Vec3::new(1.4, 0.1, 1.2),
        Vec3::new(0.5, 1.3, 1.8),
    ];
    TriangleMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap()
}

fn tri(mesh: &TriangleMesh, k: usize) -> [Vec3; 3] {
    mesh.triangles[k].map(|i| mesh.vertices[i])
}

/// Double-layer potential ∫_σ T(x, y) φ_b(y) e_q dS_y, returned as the 3×3
/// matrix with column q.
fn double_layer(x: &Vec3, sigma: &[Vec3; 3], b: usize, m: &MaterialParams, pts: &[(Vec3, f64)]) -> Mat3 {
    let n = (sigma[1] - sigma[0]).cross(&(sigma[2] - sigma[0])).normalize();
    let mut acc = Mat3::zeros();
    for (y, w) in pts {
        let phi = barycentric(y, sigma)[b];
        acc += traction_kernel(x, y, &n, m).unwrap() * (w * phi);
    }
    acc
}

/// −T_x applied to the double-layer potential by fourth-order differences.
fn hypersingular(x: &Vec3, nx: &Vec3, sigma: &[Vec3; 3], b: usize, m: &MaterialParams, pts: &[(Vec3, f64)]) -> Mat3 {
    let h = 1e-3;
    let mut grad = [Mat3::zeros(); 3];
    for (k, g) in grad.iter_mut().enumerate() {
        let e = Vec3::ith(k, h);
        let f = |s: f64| double_layer(&(x + e * s), sigma, b, m, pts);
        *g = (f(-2.0) - f(2.0) + (f(1.0) - f(-1.0)) * 8.0) / (12.0 * h);
    }
    let mut out = Mat3::zeros();
    for q in 0..3 {
        // displacement gradient ∂w_i/∂x_k of column q
        let du = Mat3::from_fn(|i, k| grad[k][(i, q)]);
        let div = du.trace();
        let stress = Mat3::identity() * (m.lambda * div) + (du + du.transpose()) * m.mu;
        let t = stress * nx;
        for p in 0..3 {
            out[(p, q)] = -t[p];
        }
    }
    out
}

fn block(m: &DenseMatrix, i: usize, j: usize) -> Mat3 {
    m.block(i, j)
}

fn rel(a: &Mat3, b: &Mat3) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn collocation_double_layer_with_lines_matches_direct_kernel() {
    let mesh = two_triangles();
    let m = mat();
    let pts = triangle_points(tri(&mesh, 1), 4);
    let opts = CollocationOptions { line_integrals: true, free_term: Some(FreeTerm::Half), ..Default::default() };
    let ops = assemble_collocation(&mesh, &[CollocationPoint::Node(0), CollocationPoint::Centroid(0)], &m, &QuadConfig::high(), &opts)
        .unwrap();
    for (row, pt) in ops.points.iter().enumerate() {
        let x = pt.position(&mesh);
        for b in 0..3 {
            let expect = double_layer(&x, &tri(&mesh, 1), b, &m, &pts);
            let got = block(&ops.k, row, 3 + b);
            assert!(rel(&got, &expect) < 1e-8, "row {row} node {b}: {got} vs {expect}");
        }
    }
}

#[test]
fn collocation_double_layer_without_lines_differs_on_open_surface() {
    let mesh = two_triangles();
    let m = mat();
    let pts = triangle_points(tri(&mesh, 1), 4);
    let ops = assemble_collocation(&mesh, &[CollocationPoint::Node(0)], &m, &QuadConfig::high(), &CollocationOptions::default())
        .unwrap();
    let expect = double_layer(&mesh.vertices[0], &tri(&mesh, 1), 0, &m, &pts);
    assert!(rel(&block(&ops.k, 0, 3), &expect) > 1e-3);
}

#[test]
fn galerkin_single_layer_matches_direct_kernel() {
    let mesh = two_triangles();
    let m = mat();
    let ops = assemble_galerkin(&mesh, &m, &QuadConfig::high(), &GalerkinOptions { k: false, d: false, ..Default::default() })
        .unwrap();
    let v = ops.v.unwrap();
    let (pa, pb) = (triangle_points(tri(&mesh, 0), 3), triangle_points(tri(&mesh, 1), 3));
    let mut expect = Mat3::zeros();
    for (x, wx) in &pa {
        for (y, wy) in &pb {
            expect += kelvin(x, y, &m).unwrap() * (wx * wy);
        }
    }
    assert!(rel(&v.block(0, 1), &expect) < 1e-8);
    assert!(rel(&v.block(1, 0), &expect) < 1e-8);
}

#[test]
fn galerkin_regularized_operators_with_lines_match_direct_kernels() {
    let mesh = two_triangles();
    let m = mat();
    let opts = GalerkinOptions { line_integrals: true, v: false, ..Default::default() };
    let ops = assemble_galerkin(&mesh, &m, &QuadConfig::high(), &opts).unwrap();
    let (k, d) = (ops.k.unwrap(), ops.d.unwrap());
    let (ta, tb) = (tri(&mesh, 0), tri(&mesh, 1));
    let outer = triangle_points(ta, 2);
    let inner = triangle_points(tb, 3);
    let na = mesh.element(0).normal;
    for b in 0..3 {
        let mut ke = Mat3::zeros();
        let mut de = [Mat3::zeros(); 3];
        for (x, wx) in &outer {
            ke += double_layer(x, &tb, b, &m, &inner) * *wx;
            let hyp = hypersingular(x, &na, &tb, b, &m, &inner);
            let lam = barycentric(x, &ta);
            for a in 0..3 {
                de[a] += hyp * (wx * lam[a]);
            }
        }
        assert!(rel(&k.block(0, 3 + b), &ke) < 1e-7, "K node {b}");
        for a in 0..3 {
            let got = d.block(a, 3 + b);
            assert!(rel(&got, &de[a]) < 1e-6, "D ({a},{b}): {got} vs {}", de[a]);
        }
    }
}

#[test]
fn line_terms_cancel_on_closed_meshes() {
    let m = mat();
    let cfg = QuadConfig::default();
    for mesh in [make_cuboid(Vec3::new(2.0, 1.0, 1.0), 0).unwrap(), make_fichera(1.0, 0).unwrap()] {
        let all = element_edges(&mesh);
        let mut half = all.clone();
        half.edges.retain(|e| e.a < e.b);
        let (k, d) = galerkin_line_terms(&mesh, &all, &m, &cfg).unwrap();
        let (kh, dh) = galerkin_line_terms(&mesh, &half, &m, &cfg).unwrap();
        assert!(k.frobenius_norm() <= 1e-12 * kh.frobenius_norm());
        assert!(d.frobenius_norm() <= 1e-12 * dh.frobenius_norm());
        let layout_pts: Vec<_> = (0..mesh.num_vertices()).map(CollocationPoint::Node).collect();
        let c = collocation_line_terms(&mesh, &all, &layout_pts, &m, &cfg).unwrap();
        let ch = collocation_line_terms(&mesh, &half, &layout_pts, &m, &cfg).unwrap();
        assert!(c.frobenius_norm() <= 1e-12 * ch.frobenius_norm());
    }
}

#[test]
fn paget_edge_integrals_at_endpoints() {
    let m = mat();
    let (p1, p2) = (Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0));
    let cfg = QuadConfig::default();
    let at_start = point_edge_integrals(&p1, &p1, &p2, &m, &cfg).unwrap();
    assert!((at_start.g[0] + 0.5).abs() < 1e-12);
    assert!((at_start.g[1] - 0.5).abs() < 1e-12);
    let at_end = point_edge_integrals(&p2, &p1, &p2, &m, &cfg).unwrap();
    assert!((at_end.g[0] - 0.5).abs() < 1e-12);
    assert!((at_end.g[1] + 0.5).abs() < 1e-12);
    let inside = point_edge_integrals(&Vec3::new(1.0, 0.0, 0.0), &p1, &p2, &m, &cfg);
    assert!(inside.is_err());
}

#[test]
fn row_sum_free_term_is_half_at_smooth_node() {
    let mesh = make_cuboid(Vec3::new(2.0, 1.0, 1.0), 1).unwrap();
    let m = mat();
    // a node in the interior of the face x = -2
    let node = (0..mesh.num_vertices())
        .find(|&i| {
            let p = mesh.vertices[i];
            (p.x + 2.0).abs() < 1e-12 && p.y > 0.1 && p.y < 0.9 && p.z > 0.1 && p.z < 0.9
        })
        .unwrap();
    let opts = CollocationOptions { v_elements: Some(vec![]), ..Default::default() };
    let ops = assemble_collocation(&mesh, &[CollocationPoint::Node(node)], &m, &QuadConfig::high(), &opts).unwrap();
    let c = ops.free_terms[0];
    assert!((c - Mat3::identity() * 0.5).norm() < 1e-6, "{c}");
}

fn rigid_fields(mesh: &TriangleMesh) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for k in 0..3 {
        out.push((0..mesh.num_vertices()).flat_map(|_| Vec3::ith(k, 1.0).iter().copied().collect::<Vec<_>>()).collect());
        out.push(mesh.vertices.iter().flat_map(|p| Vec3::ith(k, 1.0).cross(p).iter().copied().collect::<Vec<_>>()).collect());
    }
    out
}

#[test]
fn hypersingular_annihilates_rigid_motions() {
    let mesh = make_cuboid(Vec3::new(2.0, 1.0, 1.0), 0).unwrap();
    let m = mat();
    let opts = GalerkinOptions { v: false, k: false, ..Default::default() };
    let d = assemble_galerkin(&mesh, &m, &QuadConfig::high(), &opts).unwrap().d.unwrap();
    let scale = d.frobenius_norm();
    for u in rigid_fields(&mesh) {
        let r = elastobem::linalg::norm2(&d.apply_vec(&u));
        assert!(r <= 1e-7 * scale * elastobem::linalg::norm2(&u), "{r}");
    }
}

#[test]
fn collocation_operator_annihilates_translations() {
    let mesh = make_fichera(1.0, 0).unwrap();
    let m = mat();
    let pts: Vec<_> = (0..mesh.num_vertices()).map(CollocationPoint::Node).collect();
    let opts = CollocationOptions { v_elements: Some(vec![]), ..Default::default() };
    let mut ops = assemble_collocation(&mesh, &pts, &m, &QuadConfig::default(), &opts).unwrap();
    ops.add_free_terms(&mesh);
    let ck = &ops.k;
    for u in rigid_fields(&mesh).iter().step_by(2) {
        let y = ck.apply_vec(u);
        for i in 0..pts.len() {
            let row: f64 = (0..3 * mesh.num_vertices()).map(|j| ck.get(3 * i, j).abs()).sum();
            assert!(y[3 * i].abs() <= 1e-8 * row);
        }
    }
}

#[test]
fn galerkin_matrices_are_symmetric_and_v_is_positive() {
    let mesh = make_fichera(1.0, 0).unwrap();
    let m = mat();
    let ops = assemble_galerkin(&mesh, &m, &QuadConfig::default(), &GalerkinOptions::default()).unwrap();
    let v = ops.v.unwrap();
    let d = ops.d.unwrap();
    assert!(v.asymmetry() <= 1e-10 * v.frobenius_norm());
    assert!(d.asymmetry() <= 1e-10 * d.frobenius_norm());
    assert!(v.to_nalgebra().cholesky().is_some());
}

#[test]
fn p1_basis_is_a_partition_of_unity() {
    let mesh = make_fichera(1.0, 0).unwrap();
    let space = BasisSpace::p1(&mesh);
    for e in [0, 7, 40] {
        for (u, v) in [(0.2, 0.3), (0.0, 0.0), (0.5, 0.5)] {
            let s: f64 = (0..space.dof_count()).map(|d| space.eval(&mesh, d, e, u, v)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }
    let p0 = BasisSpace::p0(&mesh);
    assert_eq!(p0.dof_count(), mesh.num_triangles());
    assert!(space.support_radius(&mesh) >= mesh.h() - 1e-12);
}

#[test]
fn mixed_layout_and_packing_round_trip() {
    let mesh = make_cuboid(Vec3::new(2.0, 1.0, 1.0), 0).unwrap().with_tags(|c, _| c.x.abs() < 1e-9);
    let layout = MixedLayout::new(&mesh).unwrap();
    assert!(!layout.is_pure_neumann());
    assert_eq!(layout.dirichlet_nodes.len() + layout.unknown_nodes.len(), mesh.num_vertices());
    let data = MixedTraceData::from_boundary_data(&mesh, &layout, |x| *x, |_, n| *n, 4).unwrap();
    let x: Vec<f64> = (0..layout.unknown_count()).map(|i| i as f64).collect();
    let mut d2 = data.clone();
    d2.unpack_unknowns(&layout, &x).unwrap();
    let packed = d2.pack_unknowns(&layout);
    let base = data.pack_unknowns(&layout);
    for i in 0..x.len() {
        assert!((packed[i] - base[i] - x[i]).abs() < 1e-14);
    }
    assert!(d2.unpack_unknowns(&layout, &x[1..]).is_err());
}

#[test]
fn open_sheet_has_boundary_edges_only_on_rim() {
    let mesh = two_triangles();
    assert_eq!(open_boundary(&mesh, None).len(), 6);
    assert_eq!(element_edges(&mesh).len(), 6);
}
