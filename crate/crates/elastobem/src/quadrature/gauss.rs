use crate::error::{invalid, Result};

/// Rule on the reference triangle {(u, v): u, v ≥ 0, u + v ≤ 1}.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p[0], p[1])).sum()
    }
}

/// Rule on the unit interval [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, w)| w * f(p)).sum()
    }
}

/// Gauss–Legendre rule with `n` points on [0, 1], exact to degree 2n − 1.
pub fn gauss_segment(n: usize) -> Result<LineRule> {
    if n == 0 || n > 64 {
        return invalid(format!("unsupported Gauss segment order {n}"));
    }
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = 0.5 * (1.0 - x);
        points[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    Ok(LineRule { points, weights })
}

/// P_n(x) and P_n'(x).
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Triangle rule exact for total degree ≤ `order`.
pub fn gauss_triangle(order: usize) -> Result<QuadRule> {
    match order {
        0 => invalid("triangle rule order must be at least 1"),
        1 => Ok(QuadRule { points: vec![[1.0 / 3.0, 1.0 / 3.0]], weights: vec![0.5] }),
        2 => {
            let (a, b) = (1.0 / 6.0, 2.0 / 3.0);
            Ok(QuadRule { points: vec![[a, a], [b, a], [a, b]], weights: vec![1.0 / 6.0; 3] })
        }
        3..=5 => {
            let s = 15f64.sqrt();
            let (a1, b1) = ((6.0 - s) / 21.0, (9.0 + 2.0 * s) / 21.0);
            let (a2, b2) = ((6.0 + s) / 21.0, (9.0 - 2.0 * s) / 21.0);
            let (w1, w2) = ((155.0 - s) / 2400.0, (155.0 + s) / 2400.0);
            Ok(QuadRule {
                points: vec![[1.0 / 3.0, 1.0 / 3.0], [a1, a1], [b1, a1], [a1, b1], [a2, a2], [b2, a2], [a2, b2]],
                weights: vec![9.0 / 80.0, w1, w1, w1, w2, w2, w2],
            })
        }
        o if o <= 60 => collapsed(o.div_ceil(2) + 1),
        o => invalid(format!("unsupported triangle rule order {o}")),
    }
}

/// Conical product rule with `n` points per direction.
pub fn collapsed(n: usize) -> Result<QuadRule> {
    let g = gauss_segment(n)?;
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (s, ws) in g.points.iter().zip(&g.weights) {
        for (t, wt) in g.points.iter().zip(&g.weights) {
            points.push([s * (1.0 - t), s * t]);
            weights.push(ws * wt * s);
        }
    }
    Ok(QuadRule { points, weights })
}
