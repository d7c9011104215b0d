use super::gauss::gauss_segment;
use crate::error::{invalid, Result};

/// Interpolatory rule for the Hadamard finite part of ∫₀¹ f(y)/y dy on the
/// Gauss–Legendre nodes, with the convention fp∫₀¹ dy/y = 0. Weights may be
/// negative.
#[derive(Clone, Debug, PartialEq)]
pub struct PagetRule {
    pub n: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Builds the order-`n` rule. Weights come from the discrete orthogonality
/// of shifted Legendre polynomials on the Gauss nodes together with the
/// closed-form moments fp∫₀¹ P̃_k(y)/y dy = (−1)^{k+1}·2·H_k.
pub fn paget_rule(n: usize) -> Result<PagetRule> {
    if n < 2 {
        return invalid(format!("Paget rule needs n ≥ 2, got {n}"));
    }
    let g = gauss_segment(n)?;
    let mut moments = vec![0.0; n];
    let mut harmonic = 0.0;
    for (k, m) in moments.iter_mut().enumerate().skip(1) {
        harmonic += 1.0 / k as f64;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        *m = sign * 2.0 * harmonic;
    }
    let weights = g
        .points
        .iter()
        .zip(&g.weights)
        .map(|(&y, &lambda)| {
            let x = 2.0 * y - 1.0;
            let (mut p0, mut p1) = (1.0, x);
            let mut acc = moments[0] * p0;
            for (k, m) in moments.iter().enumerate().skip(1) {
                if k > 1 {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                acc += (2 * k + 1) as f64 * m * p1;
            }
            lambda * acc
        })
        .collect();
    Ok(PagetRule { n, points: g.points, weights })
}

impl PagetRule {
    /// fp∫₀¹ f(y)/y dy.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&y, w)| w * f(y)).sum()
    }

    /// fp∫₀¹ f(ξ)/(1 − ξ) dξ, via ξ → 1 − ξ.
    pub fn apply_flipped(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.apply(|y| f(1.0 - y))
    }
}

pub fn paget_apply_flipped(rule: &PagetRule, f: impl Fn(f64) -> f64) -> f64 {
    rule.apply_flipped(f)
}
