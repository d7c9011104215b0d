use super::gauss::{gauss_segment, gauss_triangle, LineRule, QuadRule};
use crate::error::{invalid, Result};

const REF: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Duffy rule on the reference triangle, singular vertex `vertex`.
/// The base rule is tensorized on the unit square; the Jacobian `s`
/// cancels a 1/r singularity at the vertex.
pub fn duffy_points(vertex: usize, base: &LineRule) -> Result<QuadRule> {
    if vertex > 2 {
        return invalid(format!("Duffy vertex index {vertex} out of range"));
    }
    let o = REF[vertex];
    let a = REF[(vertex + 1) % 3];
    let b = REF[(vertex + 2) % 3];
    let mut points = Vec::with_capacity(base.len() * base.len());
    let mut weights = Vec::with_capacity(base.len() * base.len());
    for (s, ws) in base.points.iter().zip(&base.weights) {
        for (t, wt) in base.points.iter().zip(&base.weights) {
            let u = o[0] + s * ((a[0] - o[0]) + t * (b[0] - a[0]));
            let v = o[1] + s * ((a[1] - o[1]) + t * (b[1] - a[1]));
            points.push([u, v]);
            weights.push(ws * wt * s);
        }
    }
    Ok(QuadRule { points, weights })
}

/// Vertex-sharing pattern of a triangle pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairCase {
    Coincident,
    CommonEdge,
    CommonVertex,
    Separated,
}

/// A point of a four-dimensional pair rule. `x` and `y` are reference
/// coordinates in the respective triangles; the weights of a rule sum to
/// 1/4 (product of reference areas).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairPoint {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub w: f64,
}

/// Singularity-removing rules for triangle pairs. Vertex conventions:
/// coincident pairs use identical vertex order; edge pairs share local
/// vertices 0 and 1 in the same order; vertex pairs share local vertex 0.
pub fn sauter_rule(case: PairCase, order: usize) -> Result<Vec<PairPoint>> {
    if order == 0 || order > 32 {
        return invalid(format!("unsupported pair rule order {order}"));
    }
    if case == PairCase::Separated {
        let t = gauss_triangle(order)?;
        let mut out = Vec::with_capacity(t.len() * t.len());
        for (px, wx) in t.points.iter().zip(&t.weights) {
            for (py, wy) in t.points.iter().zip(&t.weights) {
                out.push(PairPoint { x: *px, y: *py, w: wx * wy });
            }
        }
        return Ok(out);
    }
    let g = gauss_segment(order)?;
    let mut out = Vec::new();
    // (x1, x2) on {0 ≤ x2 ≤ x1 ≤ 1} with vertices (0,0), (1,0), (1,1)
    let to_ref = |p: [f64; 2]| [p[0] - p[1], p[1]];
    let mut push = |x: [f64; 2], y: [f64; 2], w: f64| out.push(PairPoint { x: to_ref(x), y: to_ref(y), w });
    for (&xi, &wa) in g.points.iter().zip(&g.weights) {
        for (&e1, &wb) in g.points.iter().zip(&g.weights) {
            for (&e2, &wc) in g.points.iter().zip(&g.weights) {
                for (&e3, &wd) in g.points.iter().zip(&g.weights) {
                    let w = wa * wb * wc * wd;
                    match case {
                        PairCase::Coincident => {
                            let j = w * xi.powi(3) * e1 * e1 * e2;
                            let a = [xi, xi * (1.0 - e1 + e1 * e2)];
                            let b = [xi * (1.0 - e1 * e2 * e3), xi * (1.0 - e1)];
                            push(a, b, j);
                            push(b, a, j);
                            let a = [xi, xi * e1 * (1.0 - e2 + e2 * e3)];
                            let b = [xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)];
                            push(a, b, j);
                            push(b, a, j);
                            let a = [xi * (1.0 - e1 * e2 * e3), xi * e1 * (1.0 - e2 * e3)];
                            let b = [xi, xi * e1 * (1.0 - e2)];
                            push(a, b, j);
                            push(b, a, j);
                        }
                        PairCase::CommonEdge => {
                            let j1 = w * xi.powi(3) * e1 * e1;
                            let j = j1 * e2;
                            push([xi, xi * e1 * e3], [xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)], j1);
                            push([xi, xi * e1], [xi * (1.0 - e1 * e2 * e3), xi * e1 * e2 * (1.0 - e3)], j);
                            push([xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)], [xi, xi * e1 * e2 * e3], j);
                            push([xi * (1.0 - e1 * e2 * e3), xi * e1 * e2 * (1.0 - e3)], [xi, xi * e1], j);
                            push([xi * (1.0 - e1 * e2 * e3), xi * e1 * (1.0 - e2 * e3)], [xi, xi * e1 * e2], j);
                        }
                        PairCase::CommonVertex => {
                            let j = w * xi.powi(3) * e2;
                            push([xi, xi * e1], [xi * e2, xi * e2 * e3], j);
                            push([xi * e2, xi * e2 * e3], [xi, xi * e1], j);
                        }
                        PairCase::Separated => unreachable!(),
                    }
                }
            }
        }
    }
    Ok(out)
}
