//! Benchmark fixtures.

use elastobem::assembly::CollocationPoint;
use elastobem::geometry::make_cuboid;
use elastobem::{MaterialParams, TriangleMesh, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn material() -> MaterialParams {
    MaterialParams::new(0.2778, 0.4167).expect("valid material")
}

/// The 2 × 1 × 1 cuboid at a refinement level.
pub fn cuboid(level: usize) -> TriangleMesh {
    make_cuboid(Vec3::new(2.0, 1.0, 1.0), level).expect("valid cuboid")
}

pub fn node_points(mesh: &TriangleMesh) -> Vec<CollocationPoint> {
    (0..mesh.num_vertices()).map(CollocationPoint::Node).collect()
}

/// Uniform entries in [−1, 1) from a fixed seed.
pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Point pairs at distances spread over two decades.
pub fn point_pairs(n: usize, seed: u64) -> Vec<(Vec3, Vec3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let d = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            (x, x + d.normalize() * 10f64.powf(rng.gen_range(-1.0..1.0)))
        })
        .collect()
}
