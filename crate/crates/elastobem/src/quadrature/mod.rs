//! Integration rules: Gauss on triangles and segments, Duffy, pair rules
//! for the four vertex-sharing cases, and finite-part rules.

mod gauss;
mod paget;
mod singular;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub use gauss::{collapsed, gauss_segment, gauss_triangle, LineRule, QuadRule};
pub use paget::{paget_apply_flipped, paget_rule, PagetRule};
pub use singular::{duffy_points, sauter_rule, PairCase, PairPoint};

use crate::error::Result;

/// Quadrature orders and thresholds used by assembly.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadConfig {
    /// Triangle rule degree for near regular integrals.
    pub tri_order: usize,
    /// Triangle rule degree for the middle distance band.
    pub tri_order_mid: usize,
    /// Triangle rule degree for well separated integrals.
    pub tri_order_far: usize,
    /// Gauss points per Duffy direction.
    pub duffy_order: usize,
    /// Gauss points per direction of the four-dimensional pair rules.
    pub sauter_order: usize,
    /// Paget rule size.
    pub paget_n: usize,
    /// Gauss points on regular line integrals.
    pub line_order: usize,
    /// Subdivide when distance < `near_ratio` × diameter.
    pub near_ratio: f64,
    /// Use `tri_order_mid` beyond `mid_ratio` × diameter.
    pub mid_ratio: f64,
    /// Use `tri_order_far` beyond `far_ratio` × diameter.
    pub far_ratio: f64,
    /// Maximal recursive subdivision depth for near-singular integrals.
    pub max_subdivision: usize,
    /// Evaluate singular collocation line integrals with plain Gauss instead
    /// of finite-part rules (comparison mode).
    pub naive_singular_lines: bool,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            tri_order: 5,
            tri_order_mid: 2,
            tri_order_far: 1,
            duffy_order: 8,
            sauter_order: 4,
            paget_n: 8,
            line_order: 8,
            near_ratio: 1.0,
            mid_ratio: 4.0,
            far_ratio: 10.0,
            max_subdivision: 4,
            naive_singular_lines: false,
        }
    }
}

impl QuadConfig {
    /// High-order settings for reference computations.
    pub fn high() -> Self {
        QuadConfig {
            tri_order: 12,
            tri_order_mid: 12,
            tri_order_far: 8,
            duffy_order: 16,
            sauter_order: 10,
            paget_n: 12,
            line_order: 16,
            near_ratio: 2.0,
            mid_ratio: 1e9,
            far_ratio: 1e9,
            max_subdivision: 6,
            naive_singular_lines: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Key {
    Triangle(usize),
    Segment(usize),
    Duffy(usize, usize),
    Pair(PairCase, usize),
    Paget(usize),
}

#[derive(Clone)]
enum Cached {
    Tri(Arc<QuadRule>),
    Seg(Arc<LineRule>),
    Pair(Arc<Vec<PairPoint>>),
    Paget(Arc<PagetRule>),
}

fn cache() -> &'static Mutex<HashMap<Key, Cached>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Cached>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(key: Key, build: impl FnOnce() -> Result<Cached>) -> Result<Cached> {
    if let Some(c) = cache().lock().expect("rule cache poisoned").get(&key) {
        return Ok(c.clone());
    }
    let c = build()?;
    cache().lock().expect("rule cache poisoned").insert(key, c.clone());
    Ok(c)
}

pub fn triangle_rule(order: usize) -> Result<Arc<QuadRule>> {
    match cached(Key::Triangle(order), || Ok(Cached::Tri(Arc::new(gauss_triangle(order)?))))? {
        Cached::Tri(r) => Ok(r),
        _ => unreachable!(),
    }
}

pub fn segment_rule(n: usize) -> Result<Arc<LineRule>> {
    match cached(Key::Segment(n), || Ok(Cached::Seg(Arc::new(gauss_segment(n)?))))? {
        Cached::Seg(r) => Ok(r),
        _ => unreachable!(),
    }
}

pub fn duffy_rule(vertex: usize, n: usize) -> Result<Arc<QuadRule>> {
    match cached(Key::Duffy(vertex, n), || Ok(Cached::Tri(Arc::new(duffy_points(vertex, &gauss_segment(n)?)?))))? {
        Cached::Tri(r) => Ok(r),
        _ => unreachable!(),
    }
}

pub fn pair_rule(case: PairCase, order: usize) -> Result<Arc<Vec<PairPoint>>> {
    match cached(Key::Pair(case, order), || Ok(Cached::Pair(Arc::new(sauter_rule(case, order)?))))? {
        Cached::Pair(r) => Ok(r),
        _ => unreachable!(),
    }
}

pub fn paget_cached(n: usize) -> Result<Arc<PagetRule>> {
    match cached(Key::Paget(n), || Ok(Cached::Paget(Arc::new(paget_rule(n)?))))? {
        Cached::Paget(r) => Ok(r),
        _ => unreachable!(),
    }
}
