//! Chebyshev interpolation fast multipole method for the single layer,
//! double layer and hypersingular operators.
//!
//! Sources and targets are clustered by their dof centers in a uniform
//! octree. Element-based dof families see the cells widened by their
//! largest support radius, so that the extended boxes enclose the
//! supports; collocation points see the plain cells. The far
//! field uses P2M, M2M, M2L, L2L and L2P operators built from tensor
//! Chebyshev interpolation of the Kelvin tensor (and, for the regularized
//! variant, of M* = 4μU − 2/(4π r) I). The near field is assembled with the
//! dense quadrature.

mod chebyshev;
mod tree;

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

pub use chebyshev::{cheb_interp, cheb_nodes, ChebyshevBasis};
pub use tree::{Assignment, Cell, ClusterTree, Interactions};

use crate::assembly::{BlockBuilder, CollocationPoint, LineMode};
use crate::error::{invalid, Result};
use crate::geometry::{Mat3, TriangleMesh, Vec3};
use crate::kernels::{cross_matrix, kelvin_r, MaterialParams};
use crate::linalg::{check_dims, DenseMatrix, LinearMap};
use crate::quadrature::{triangle_rule, QuadConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FmmVariant {
    /// Far field from the unregularized kernels.
    Standard,
    /// Standard far field with line integrals over every element edge in
    /// the near field.
    StandardWithLines,
    /// Far field from the regularized kernels.
    Regularized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FmmOptions {
    pub variant: FmmVariant,
    /// Interpolation order per axis.
    pub order: usize,
    /// Octree depth.
    pub depth: usize,
    /// Admissibility ratio: gap between extended boxes ≥ `eta` × box width.
    pub eta: f64,
    /// Triangle rule degree for P2M and L2P integrals.
    pub quad_order: usize,
}

impl Default for FmmOptions {
    fn default() -> Self {
        FmmOptions { variant: FmmVariant::Standard, order: 4, depth: 2, eta: 0.5, quad_order: 5 }
    }
}

impl FmmOptions {
    fn check(&self) -> Result<()> {
        if self.order < 2 {
            return invalid(format!("interpolation order must be at least 2, got {}", self.order));
        }
        if self.depth < 1 {
            return invalid("tree depth must be at least 1");
        }
        if !(self.eta >= 0.0) {
            return invalid(format!("admissibility ratio must be nonnegative, got {}", self.eta));
        }
        Ok(())
    }
}

/// Kernel interpolated by an M2L operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Kelvin,
    /// 4μU − 2/(4π r) I.
    Modified,
}

/// Kernel family, level, cell offset, target grid, source grid.
type M2lKey = (Family, usize, [i64; 3], usize, usize);

/// Margin of one dof family and its child-to-parent interpolation
/// matrices.
struct Grid {
    delta: f64,
    /// Per child level, 1D matrices for the lower and upper child, entry
    /// [N p + n] = S_N(ξ of child node n).
    m2m: Vec<[Vec<f64>; 2]>,
}

/// Tree, interpolation basis and translation operators shared by the
/// operators of one discretization.
pub struct Scheme {
    pub tree: ClusterTree,
    pub basis: ChebyshevBasis,
    pub eta: f64,
    grids: Vec<Grid>,
    m2l: HashMap<M2lKey, DenseMatrix>,
    mat: MaterialParams,
    /// Margin shared by all element-based dof sets.
    element_margin: f64,
}

impl Scheme {
    fn new(centers: &[Vec3], opts: &FmmOptions, mat: &MaterialParams) -> Result<Self> {
        let tree = ClusterTree::new(centers, opts.depth)?;
        let basis = ChebyshevBasis::new(opts.order)?;
        Ok(Scheme { tree, basis, eta: opts.eta, grids: Vec::new(), m2l: HashMap::new(), mat: *mat, element_margin: 0.0 })
    }

    /// Grid id for a margin, created on first use.
    fn grid(&mut self, delta: f64) -> usize {
        if let Some(g) = self.grids.iter().position(|g| g.delta == delta) {
            return g;
        }
        let (tree, basis) = (&self.tree, &self.basis);
        let p = basis.p;
        let mut m2m = vec![[Vec::new(), Vec::new()]];
        for l in 1..=tree.depth {
            let (e_c, e_p) = (tree.extended_half(l, delta), tree.extended_half(l - 1, delta));
            let half = 0.5 * tree.width(l);
            let side = |sign: f64| {
                let mut m = vec![0.0; p * p];
                for (n, &x) in basis.nodes.iter().enumerate() {
                    let s = basis.values((sign * half + e_c * x) / e_p);
                    for (big, v) in s.into_iter().enumerate() {
                        m[big * p + n] = v;
                    }
                }
                m
            };
            m2m.push([side(-1.0), side(1.0)]);
        }
        self.grids.push(Grid { delta, m2m });
        self.grids.len() - 1
    }

    fn margin(&self, set: &DofSet) -> f64 {
        match set.space {
            Space::Points(_) => 0.0,
            _ => self.element_margin,
        }
    }

    fn delta(&self, grid: usize) -> f64 {
        self.grids[grid].delta
    }

    /// Key of the M2L operator from source cell `s` to target cell `t`;
    /// the flag tells that the stored operator is the transpose.
    fn key(&self, family: Family, t: usize, s: usize, gt: usize, gs: usize) -> (M2lKey, bool) {
        let o = self.tree.offset(t, s);
        let level = self.tree.cells[t].level;
        let neg = o.map(|c| -c);
        // K(−r) = K(r)ᵀ for both families
        if (o, gt, gs) <= (neg, gs, gt) {
            ((family, level, o, gt, gs), false)
        } else {
            ((family, level, neg, gs, gt), true)
        }
    }

    fn len(&self) -> usize {
        3 * self.basis.len3()
    }

    fn kernel(&self, family: Family, r: &Vec3) -> Mat3 {
        match family {
            Family::Kelvin => kelvin_r(r, &self.mat),
            Family::Modified => {
                kelvin_r(r, &self.mat) * (4.0 * self.mat.mu) - Mat3::identity() * (2.0 / (4.0 * PI * r.norm()))
            }
        }
    }

    fn build_m2l(&self, key: &M2lKey) -> DenseMatrix {
        let (family, level, o, gt, gs) = *key;
        let w = self.tree.width(level);
        let et = self.tree.extended_half(level, self.delta(gt));
        let es = self.tree.extended_half(level, self.delta(gs));
        let shift = Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64) * w;
        let n3 = self.basis.len3();
        let xs: Vec<Vec3> = (0..n3).map(|n| self.basis.node3(n) * et).collect();
        let ys: Vec<Vec3> = (0..n3).map(|n| self.basis.node3(n) * es).collect();
        let mut m = DenseMatrix::zeros(3 * n3, 3 * n3);
        for (a, xa) in xs.iter().enumerate() {
            for (b, yb) in ys.iter().enumerate() {
                m.add_block(a, b, &self.kernel(family, &(shift + xa - yb)));
            }
        }
        m
    }

    fn fill_m2l(&mut self, keys: impl IntoIterator<Item = M2lKey>) {
        let mut missing: Vec<M2lKey> = keys.into_iter().filter(|k| !self.m2l.contains_key(k)).collect();
        missing.sort();
        missing.dedup();
        let built: Vec<DenseMatrix> = missing.par_iter().map(|k| self.build_m2l(k)).collect();
        self.m2l.extend(missing.into_iter().zip(built));
    }

    /// Number of distinct M2L operators held.
    pub fn m2l_count(&self) -> usize {
        self.m2l.len()
    }

    /// Bytes of the M2L and M2M operators.
    pub fn bytes(&self) -> usize {
        let m2m: usize = self.grids.iter().flat_map(|g| &g.m2m).map(|s| (s[0].len() + s[1].len()) * 8).sum();
        m2m + self.m2l.values().map(|m| m.bytes()).sum::<usize>()
    }

    /// parent[3N + c] += Σ_n M[N, n] child[3n + c] (or the transpose).
    fn tensor_apply(&self, grid: usize, level: usize, index: &[i64; 3], input: &[f64], out: &mut [f64], transpose: bool) {
        let p = self.basis.p;
        let m2m = &self.grids[grid].m2m[level];
        let mats: [&Vec<f64>; 3] = [0, 1, 2].map(|a| &m2m[(index[a].rem_euclid(2)) as usize]);
        let get = |m: &Vec<f64>, big: usize, small: usize| if transpose { m[small * p + big] } else { m[big * p + small] };
        let idx = |i: usize, j: usize, k: usize| 3 * (i + p * (j + p * k));
        let mut t1 = vec![0.0; input.len()];
        for k in 0..p {
            for j in 0..p {
                for bi in 0..p {
                    for i in 0..p {
                        let a = get(mats[0], bi, i);
                        for c in 0..3 {
                            t1[idx(bi, j, k) + c] += a * input[idx(i, j, k) + c];
                        }
                    }
                }
            }
        }
        let mut t2 = vec![0.0; input.len()];
        for k in 0..p {
            for bj in 0..p {
                for j in 0..p {
                    let a = get(mats[1], bj, j);
                    for i in 0..p {
                        for c in 0..3 {
                            t2[idx(i, bj, k) + c] += a * t1[idx(i, j, k) + c];
                        }
                    }
                }
            }
        }
        for bk in 0..p {
            for k in 0..p {
                let a = get(mats[2], bk, k);
                for j in 0..p {
                    for i in 0..p {
                        for c in 0..3 {
                            out[idx(i, j, bk) + c] += a * t2[idx(i, j, k) + c];
                        }
                    }
                }
            }
        }
    }

    /// Accumulates child expansions into their parents, deepest level first.
    fn upward(&self, buf: &mut [f64], occupied: &[bool], grid: usize) {
        let len = self.len();
        for level in (1..=self.tree.depth).rev() {
            for &c in &self.tree.levels[level] {
                if !occupied[c] {
                    continue;
                }
                let cell = &self.tree.cells[c];
                let parent = cell.parent.expect("non-root cell has a parent");
                let child: Vec<f64> = buf[c * len..(c + 1) * len].to_vec();
                self.tensor_apply(grid, level, &cell.index, &child, &mut buf[parent * len..(parent + 1) * len], false);
            }
        }
    }

    /// Passes parent expansions to their children, root first.
    fn downward(&self, buf: &mut [f64], occupied: &[bool], grid: usize) {
        let len = self.len();
        for level in 1..=self.tree.depth {
            for &c in &self.tree.levels[level] {
                if !occupied[c] {
                    continue;
                }
                let cell = &self.tree.cells[c];
                let parent = cell.parent.expect("non-root cell has a parent");
                let par: Vec<f64> = buf[parent * len..(parent + 1) * len].to_vec();
                self.tensor_apply(grid, level, &cell.index, &par, &mut buf[c * len..(c + 1) * len], true);
            }
        }
    }
}

/// Quadrature point on the support of one dof.
#[derive(Clone, Copy, Debug)]
struct SupportPoint {
    y: Vec3,
    w: f64,
    phi: f64,
    normal: Vec3,
    /// Surface curl of the hat function on this element.
    curl: Vec3,
}

/// Function spaces the operators act on.
#[derive(Clone, Debug)]
enum Space {
    Points(Vec<CollocationPoint>),
    P0,
    P1,
}

/// Shape of the 3×3 blocks of a cell-side × dof-side leaf matrix. Source
/// kinds give P2M blocks; target kinds give transposed L2P blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BlockKind {
    Mass,
    Traction,
    NegTraction,
    Curl,
    NormalDerivative,
    CurlComponent(usize),
    HyperComponent(usize),
    HyperCross,
}

fn traction_of(g: &Vec3, n: &Vec3, mat: &MaterialParams) -> Mat3 {
    g * n.transpose() * mat.lambda + Mat3::identity() * (mat.mu * g.dot(n)) + n * g.transpose() * mat.mu
}

fn block(kind: BlockKind, s: f64, g: &Vec3, pt: &SupportPoint, mat: &MaterialParams) -> Mat3 {
    let w = pt.w;
    let mu = mat.mu;
    match kind {
        BlockKind::Mass => Mat3::identity() * (w * pt.phi * s),
        BlockKind::Traction => traction_of(g, &pt.normal, mat) * (w * pt.phi),
        BlockKind::NegTraction => traction_of(g, &pt.normal, mat) * (-w * pt.phi),
        BlockKind::Curl => cross_matrix(&pt.curl) * (w * s),
        BlockKind::NormalDerivative => Mat3::identity() * (w * pt.phi * g.dot(&pt.normal)),
        BlockKind::CurlComponent(b) => Mat3::identity() * (w * s * pt.curl[b]),
        BlockKind::HyperComponent(b) => {
            let mut m = Mat3::identity() * (2.0 * mu * pt.curl[b]);
            let e = Vec3::ith(b, 1.0);
            m -= e * pt.curl.transpose() * mu;
            m * (w * s)
        }
        BlockKind::HyperCross => cross_matrix(&pt.curl) * (-w * s * mu),
    }
}

fn needs_gradient(kind: BlockKind) -> bool {
    matches!(kind, BlockKind::Traction | BlockKind::NegTraction | BlockKind::NormalDerivative)
}

/// Dof geometry: centers, support radii and quadrature points.
struct DofSet<'a> {
    mesh: &'a TriangleMesh,
    space: Space,
    stars: &'a [Vec<usize>],
    quad_order: usize,
}

impl DofSet<'_> {
    fn count(&self) -> usize {
        match &self.space {
            Space::Points(p) => p.len(),
            Space::P0 => self.mesh.num_triangles(),
            Space::P1 => self.mesh.num_vertices(),
        }
    }

    fn center(&self, i: usize) -> Vec3 {
        match &self.space {
            Space::Points(p) => p[i].position(self.mesh),
            Space::P0 => self.mesh.element(i).centroid,
            Space::P1 => self.mesh.vertices[i],
        }
    }

    /// Largest support radius over all dofs.
    fn delta(&self) -> f64 {
        (0..self.count()).map(|i| self.radius(i)).fold(0.0, f64::max)
    }

    /// Largest ∞-norm distance from the center to the support.
    fn radius(&self, i: usize) -> f64 {
        let c = self.center(i);
        let far = |e: usize| self.mesh.element(e).p.iter().map(|v| (v - c).amax()).fold(0.0, f64::max);
        match &self.space {
            Space::Points(_) => 0.0,
            Space::P0 => far(i),
            Space::P1 => self.stars[i].iter().map(|&e| far(e)).fold(0.0, f64::max),
        }
    }

    fn support(&self, i: usize) -> Result<Vec<SupportPoint>> {
        let mesh = self.mesh;
        match &self.space {
            Space::Points(p) => Ok(vec![SupportPoint {
                y: p[i].position(mesh),
                w: 1.0,
                phi: 1.0,
                normal: Vec3::zeros(),
                curl: Vec3::zeros(),
            }]),
            Space::P0 => {
                let rule = triangle_rule(self.quad_order)?;
                let el = mesh.element(i);
                Ok(rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(q, w)| SupportPoint {
                        y: el.map(q[0], q[1]),
                        w: 2.0 * el.area * w,
                        phi: 1.0,
                        normal: el.normal,
                        curl: Vec3::zeros(),
                    })
                    .collect())
            }
            Space::P1 => {
                let rule = triangle_rule(self.quad_order)?;
                let mut out = Vec::new();
                for &e in &self.stars[i] {
                    let el = mesh.element(e);
                    let a = mesh.triangles[e].iter().position(|&v| v == i).expect("star element contains its node");
                    let curl = el.normal.cross(&el.grads[a]);
                    for (q, w) in rule.points.iter().zip(&rule.weights) {
                        let lam = [1.0 - q[0] - q[1], q[0], q[1]];
                        out.push(SupportPoint {
                            y: el.map(q[0], q[1]),
                            w: 2.0 * el.area * w,
                            phi: lam[a],
                            normal: el.normal,
                            curl,
                        });
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Dofs grouped by leaf, in ascending cell order.
#[derive(Clone, Debug)]
struct Leaves {
    cells: Vec<usize>,
    dofs: Vec<Vec<usize>>,
    occupied: Vec<bool>,
}

impl Leaves {
    fn new(assign: Assignment) -> Self {
        let mut pairs: Vec<(usize, Vec<usize>)> = assign.members.into_iter().collect();
        pairs.sort_by_key(|p| p.0);
        let (cells, dofs) = pairs.into_iter().unzip();
        Leaves { cells, dofs, occupied: assign.occupied }
    }

    fn position(&self, cell: usize) -> Option<usize> {
        self.cells.binary_search(&cell).ok()
    }
}

/// Cell-side × dof-side matrices of one leaf for every channel.
fn leaf_matrices(
    scheme: &Scheme,
    dofs: &DofSet,
    grid: usize,
    leaves: &Leaves,
    kinds: &[BlockKind],
) -> Result<Vec<Vec<DenseMatrix>>> {
    let tree = &scheme.tree;
    let e = tree.extended_half(tree.depth, scheme.delta(grid));
    let basis = &scheme.basis;
    let n3 = basis.len3();
    let grad = kinds.iter().any(|&k| needs_gradient(k));
    let per_leaf: Vec<Vec<DenseMatrix>> = leaves
        .cells
        .par_iter()
        .zip(&leaves.dofs)
        .map(|(&cell, members)| {
            let center = tree.cells[cell].center;
            let mut mats: Vec<DenseMatrix> = kinds.iter().map(|_| DenseMatrix::zeros(3 * n3, 3 * members.len())).collect();
            for (j, &dof) in members.iter().enumerate() {
                for pt in dofs.support(dof)? {
                    let xi = (pt.y - center) / e;
                    let (vals, grads) = if grad {
                        let (v, g) = basis.values_and_gradients3(&xi);
                        (v, g.into_iter().map(|g| g / e).collect())
                    } else {
                        (basis.values3(&xi), vec![Vec3::zeros(); n3])
                    };
                    for (kind, m) in kinds.iter().zip(mats.iter_mut()) {
                        for n in 0..n3 {
                            m.add_block(n, j, &block(*kind, vals[n], &grads[n], &pt, &scheme.mat));
                        }
                    }
                }
            }
            Ok(mats)
        })
        .collect::<Result<_>>()?;
    // regroup as [channel][leaf]
    let mut out: Vec<Vec<DenseMatrix>> = kinds.iter().map(|_| Vec::with_capacity(per_leaf.len())).collect();
    for mats in per_leaf {
        for (c, m) in mats.into_iter().enumerate() {
            out[c].push(m);
        }
    }
    Ok(out)
}

/// y += α A x
fn mv_add(a: &DenseMatrix, x: &[f64], y: &mut [f64], alpha: f64) {
    let cols = a.cols();
    for (yi, row) in y.iter_mut().zip(a.data().chunks_exact(cols.max(1))) {
        *yi += alpha * row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
    }
}

/// y += α Aᵀ x
fn mtv_add(a: &DenseMatrix, x: &[f64], y: &mut [f64], alpha: f64) {
    let cols = a.cols();
    for (&xi, row) in x.iter().zip(a.data().chunks_exact(cols.max(1))) {
        if xi == 0.0 {
            continue;
        }
        for (yj, p) in y.iter_mut().zip(row) {
            *yj += alpha * xi * p;
        }
    }
}

fn gather(x: &[f64], dofs: &[usize]) -> Vec<f64> {
    dofs.iter().flat_map(|&d| [x[3 * d], x[3 * d + 1], x[3 * d + 2]]).collect()
}

fn scatter_add(y: &mut [f64], dofs: &[usize], v: &[f64]) {
    for (k, &d) in dofs.iter().enumerate() {
        for c in 0..3 {
            y[3 * d + c] += v[3 * k + c];
        }
    }
}

/// M2L term: source channel, target channel, kernel family, coefficient.
#[derive(Clone, Copy, Debug)]
struct Term {
    src: usize,
    tgt: usize,
    family: Family,
    coef: f64,
}

struct NearBlock {
    tgt: usize,
    src: usize,
    mat: DenseMatrix,
}

/// One boundary operator in fast multipole form.
pub struct FmmMatrix {
    scheme: Arc<Scheme>,
    rows: usize,
    cols: usize,
    src: Leaves,
    tgt: Leaves,
    p2m: Vec<Vec<DenseMatrix>>,
    l2p: Vec<Vec<DenseMatrix>>,
    terms: Vec<Term>,
    /// Target and source grids.
    grids: (usize, usize),
    far_count: usize,
    batches: Vec<Batch>,
    near: Vec<NearBlock>,
}

/// Far pairs (target cell, source cell) that share one term and one
/// stored M2L operator.
struct Batch {
    term: usize,
    key: M2lKey,
    flipped: bool,
    pairs: Vec<(usize, usize)>,
}

/// Operator description before the shared scheme is finalized.
struct Plan {
    rows: usize,
    cols: usize,
    src: Leaves,
    tgt: Leaves,
    p2m: Vec<Vec<DenseMatrix>>,
    l2p: Vec<Vec<DenseMatrix>>,
    terms: Vec<Term>,
    grids: (usize, usize),
    far: Vec<(usize, usize)>,
    near: Vec<NearBlock>,
}

impl Plan {
    fn keys(&self, scheme: &Scheme) -> Vec<M2lKey> {
        let mut fams: Vec<Family> = self.terms.iter().map(|t| t.family).collect();
        fams.sort();
        fams.dedup();
        let mut out = Vec::new();
        for &(t, s) in &self.far {
            for &f in &fams {
                out.push(scheme.key(f, t, s, self.grids.0, self.grids.1).0);
            }
        }
        out
    }

    fn finish(self, scheme: Arc<Scheme>) -> FmmMatrix {
        let mut groups: BTreeMap<(usize, M2lKey, bool), Vec<(usize, usize)>> = BTreeMap::new();
        for &(t, s) in &self.far {
            for (i, term) in self.terms.iter().enumerate() {
                let (key, flipped) = scheme.key(term.family, t, s, self.grids.0, self.grids.1);
                groups.entry((i, key, flipped)).or_default().push((t, s));
            }
        }
        let batches = groups.into_iter().map(|((term, key, flipped), pairs)| Batch { term, key, flipped, pairs }).collect();
        FmmMatrix {
            scheme,
            rows: self.rows,
            cols: self.cols,
            src: self.src,
            tgt: self.tgt,
            p2m: self.p2m,
            l2p: self.l2p,
            terms: self.terms,
            grids: self.grids,
            far_count: self.far.len(),
            batches,
            near: self.near,
        }
    }
}

/// Which near-field block routine an operator uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum NearKind {
    CollocationV,
    CollocationK,
    GalerkinV,
    GalerkinK,
    GalerkinD,
}

#[allow(clippy::too_many_arguments)]
fn plan(
    scheme: &mut Scheme,
    builder: &BlockBuilder,
    tgt: &DofSet,
    src: &DofSet,
    near_kind: NearKind,
    tgt_kinds: &[BlockKind],
    src_kinds: &[BlockKind],
    terms: Vec<Term>,
) -> Result<Plan> {
    let (dt, ds) = (scheme.margin(tgt), scheme.margin(src));
    let grids = (scheme.grid(dt), scheme.grid(ds));
    let scheme = &*scheme;
    let tree = &scheme.tree;
    let t_assign = tree.assign(&(0..tgt.count()).map(|i| tgt.center(i)).collect::<Vec<_>>())?;
    let s_assign = tree.assign(&(0..src.count()).map(|i| src.center(i)).collect::<Vec<_>>())?;
    let lists = tree.interactions(&t_assign, &s_assign, scheme.eta, dt, ds);
    let t_leaves = Leaves::new(t_assign);
    let s_leaves = Leaves::new(s_assign);
    let points = match &tgt.space {
        Space::Points(p) => p.clone(),
        _ => Vec::new(),
    };
    let near = lists
        .near
        .par_iter()
        .map(|&(t, s)| {
            let ti = t_leaves.position(t).expect("near target leaf is occupied");
            let si = s_leaves.position(s).expect("near source leaf is occupied");
            let (rows, cols) = (&t_leaves.dofs[ti], &s_leaves.dofs[si]);
            let mat = match near_kind {
                NearKind::CollocationV | NearKind::CollocationK => {
                    let pts: Vec<CollocationPoint> = rows.iter().map(|&i| points[i]).collect();
                    if near_kind == NearKind::CollocationV {
                        builder.colloc_v(&pts, cols)?
                    } else {
                        builder.colloc_k(&pts, cols)?
                    }
                }
                NearKind::GalerkinV => builder.gal_v(rows, cols)?,
                NearKind::GalerkinK => builder.gal_k(rows, cols)?,
                NearKind::GalerkinD => builder.gal_d(rows, cols)?,
            };
            Ok(NearBlock { tgt: ti, src: si, mat })
        })
        .collect::<Result<Vec<_>>>()?;
    let (p2m, l2p) = if lists.far.is_empty() {
        (vec![Vec::new(); src_kinds.len()], vec![Vec::new(); tgt_kinds.len()])
    } else {
        (
            leaf_matrices(scheme, src, grids.1, &s_leaves, src_kinds)?,
            leaf_matrices(scheme, tgt, grids.0, &t_leaves, tgt_kinds)?,
        )
    };
    Ok(Plan {
        rows: 3 * tgt.count(),
        cols: 3 * src.count(),
        src: s_leaves,
        tgt: t_leaves,
        p2m,
        l2p,
        terms,
        grids,
        far: lists.far,
        near,
    })
}

impl FmmMatrix {
    /// Number of admissible (M2L) cluster pairs.
    pub fn far_pairs(&self) -> usize {
        self.far_count
    }

    /// Number of near-field leaf pairs.
    pub fn near_pairs(&self) -> usize {
        self.near.len()
    }

    /// Bytes of the P2M and L2P operators.
    pub fn far_bytes(&self) -> usize {
        self.p2m.iter().chain(&self.l2p).flatten().map(|m| m.bytes()).sum()
    }

    pub fn near_bytes(&self) -> usize {
        self.near.iter().map(|b| b.mat.bytes()).sum()
    }

    /// Applies one batch to the upward moments: per pair, the M2L operator
    /// maps the input cell's moments to the output cell's local expansion.
    fn apply_batch(&self, batch: &Batch, up: &[Vec<f64>], down: &mut [Vec<f64>], transpose: bool) {
        let len = self.scheme.len();
        let term = &self.terms[batch.term];
        let m = self.scheme.m2l.get(&batch.key).expect("M2L operator precomputed");
        let (from, to) = if transpose { (term.tgt, term.src) } else { (term.src, term.tgt) };
        let cells = |&(t, s): &(usize, usize)| if transpose { (t, s) } else { (s, t) };
        let n = batch.pairs.len();
        // inputs and outputs as columns of len × n column-major blocks
        let mut x = vec![0.0; len * n];
        for (col, pair) in x.chunks_exact_mut(len).zip(&batch.pairs) {
            let c = cells(pair).0;
            col.copy_from_slice(&up[from][c * len..(c + 1) * len]);
        }
        // strides (len, 1) read the row-major operator, (1, len) its transpose
        let (rs, cs) = if batch.flipped != transpose { (1, len as isize) } else { (len as isize, 1) };
        let mut y = vec![0.0; len * n];
        // SAFETY: all three buffers hold len × len or len × n elements and
        // the strides stay inside them.
        unsafe {
            matrixmultiply::dgemm(
                len,
                len,
                n,
                term.coef,
                m.data().as_ptr(),
                rs,
                cs,
                x.as_ptr(),
                1,
                len as isize,
                0.0,
                y.as_mut_ptr(),
                1,
                len as isize,
            );
        }
        for (col, pair) in y.chunks_exact(len).zip(&batch.pairs) {
            let c = cells(pair).1;
            down[to][c * len..(c + 1) * len].iter_mut().zip(col).for_each(|(d, v)| *d += v);
        }
    }

    fn run(&self, x: &[f64], y: &mut [f64], transpose: bool) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let sc = &*self.scheme;
        let len = sc.len();
        let nc = sc.tree.cells.len();
        let (in_leaves, in_mats, out_leaves, out_mats) = if transpose {
            (&self.tgt, &self.l2p, &self.src, &self.p2m)
        } else {
            (&self.src, &self.p2m, &self.tgt, &self.l2p)
        };
        let (g_in, g_out) = if transpose { (self.grids.0, self.grids.1) } else { (self.grids.1, self.grids.0) };
        if !self.batches.is_empty() {
            let mut up: Vec<Vec<f64>> = in_mats
                .iter()
                .map(|mats| {
                    let mut buf = vec![0.0; nc * len];
                    for ((cell, dofs), m) in in_leaves.cells.iter().zip(&in_leaves.dofs).zip(mats) {
                        mv_add(m, &gather(x, dofs), &mut buf[cell * len..(cell + 1) * len], 1.0);
                    }
                    buf
                })
                .collect();
            for buf in up.iter_mut() {
                sc.upward(buf, &in_leaves.occupied, g_in);
            }
            let n_out = out_mats.len();
            let down = self
                .batches
                .par_iter()
                .fold(
                    || vec![vec![0.0; nc * len]; n_out],
                    |mut down, batch| {
                        self.apply_batch(batch, &up, &mut down, transpose);
                        down
                    },
                )
                .reduce_with(|mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
                    }
                    a
                });
            let mut down = down.unwrap_or_else(|| vec![vec![0.0; nc * len]; n_out]);
            for buf in down.iter_mut() {
                sc.downward(buf, &out_leaves.occupied, g_out);
            }
            for (buf, mats) in down.iter().zip(out_mats) {
                for ((cell, dofs), m) in out_leaves.cells.iter().zip(&out_leaves.dofs).zip(mats) {
                    let mut v = vec![0.0; 3 * dofs.len()];
                    mtv_add(m, &buf[cell * len..(cell + 1) * len], &mut v, 1.0);
                    scatter_add(y, dofs, &v);
                }
            }
        }
        let parts: Vec<(usize, Vec<f64>)> = self
            .near
            .par_iter()
            .map(|b| {
                if transpose {
                    let mut v = vec![0.0; b.mat.cols()];
                    mtv_add(&b.mat, &gather(x, &self.tgt.dofs[b.tgt]), &mut v, 1.0);
                    (b.src, v)
                } else {
                    let mut v = vec![0.0; b.mat.rows()];
                    mv_add(&b.mat, &gather(x, &self.src.dofs[b.src]), &mut v, 1.0);
                    (b.tgt, v)
                }
            })
            .collect();
        for (leaf, v) in parts {
            let dofs = if transpose { &self.src.dofs[leaf] } else { &self.tgt.dofs[leaf] };
            scatter_add(y, dofs, &v);
        }
    }
}

impl LinearMap for FmmMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        self.run(x, y, false);
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(y.len(), self.cols);
        self.run(x, y, true);
    }
}

impl FmmMatrix {
    /// Checked product.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.cols, x.len())?;
        Ok(self.apply_vec(x))
    }
}

fn kelvin_term() -> Vec<Term> {
    vec![Term { src: 0, tgt: 0, family: Family::Kelvin, coef: 1.0 }]
}

fn double_layer_far(variant: FmmVariant, mu: f64) -> (Vec<BlockKind>, Vec<Term>) {
    match variant {
        FmmVariant::Standard | FmmVariant::StandardWithLines => (vec![BlockKind::Traction], kelvin_term()),
        FmmVariant::Regularized => (
            vec![BlockKind::Curl, BlockKind::NormalDerivative],
            vec![
                Term { src: 0, tgt: 0, family: Family::Modified, coef: 0.5 },
                Term { src: 1, tgt: 0, family: Family::Kelvin, coef: 2.0 * mu },
                Term { src: 1, tgt: 0, family: Family::Modified, coef: -0.5 },
            ],
        ),
    }
}

fn hypersingular_far(variant: FmmVariant, mu: f64) -> (Vec<BlockKind>, Vec<BlockKind>, Vec<Term>) {
    match variant {
        FmmVariant::Standard | FmmVariant::StandardWithLines => {
            (vec![BlockKind::NegTraction], vec![BlockKind::Traction], kelvin_term())
        }
        FmmVariant::Regularized => {
            let mut tgt: Vec<BlockKind> = (0..3).map(BlockKind::HyperComponent).collect();
            tgt.push(BlockKind::HyperCross);
            let mut src: Vec<BlockKind> = (0..3).map(BlockKind::CurlComponent).collect();
            src.push(BlockKind::Curl);
            let mut terms = Vec::new();
            for b in 0..3 {
                terms.push(Term { src: b, tgt: b, family: Family::Kelvin, coef: 2.0 * mu });
                terms.push(Term { src: b, tgt: b, family: Family::Modified, coef: -0.5 });
            }
            terms.push(Term { src: 3, tgt: 3, family: Family::Modified, coef: 1.0 });
            (tgt, src, terms)
        }
    }
}

fn line_mode(variant: FmmVariant, line_integrals: bool) -> LineMode {
    match (variant, line_integrals) {
        (FmmVariant::StandardWithLines, _) => LineMode::ElementEdges,
        (_, true) => LineMode::OpenBoundary,
        (_, false) => LineMode::None,
    }
}

/// The operators of one discretization sharing a tree and M2L cache.
pub struct FmmOperators {
    scheme: Arc<Scheme>,
    v: Option<FmmMatrix>,
    k: FmmMatrix,
    d: Option<FmmMatrix>,
}

impl FmmOperators {
    /// V (points × P0) and K (points × P1) for collocation.
    pub fn collocation(
        mesh: &TriangleMesh,
        points: &[CollocationPoint],
        mat: &MaterialParams,
        quad: &QuadConfig,
        opts: &FmmOptions,
        line_integrals: bool,
    ) -> Result<Self> {
        opts.check()?;
        let stars = mesh.vertex_stars();
        let set = |space| DofSet { mesh, space, stars: &stars, quad_order: opts.quad_order };
        let (pts, p0, p1) = (set(Space::Points(points.to_vec())), set(Space::P0), set(Space::P1));
        let mut scheme = build_scheme(&[&pts, &p0, &p1], opts, mat)?;
        let builder = BlockBuilder::new(mesh, mat, quad, line_mode(opts.variant, line_integrals));
        let mass = [BlockKind::Mass];
        let v = plan(&mut scheme, &builder, &pts, &p0, NearKind::CollocationV, &mass, &mass, kelvin_term())?;
        let (k_src, k_terms) = double_layer_far(opts.variant, mat.mu);
        let k = plan(&mut scheme, &builder, &pts, &p1, NearKind::CollocationK, &mass, &k_src, k_terms)?;
        let keys: Vec<M2lKey> = v.keys(&scheme).into_iter().chain(k.keys(&scheme)).collect();
        scheme.fill_m2l(keys);
        warn_if_dense(&[&v, &k]);
        let scheme = Arc::new(scheme);
        Ok(FmmOperators { v: Some(v.finish(scheme.clone())), k: k.finish(scheme.clone()), d: None, scheme })
    }

    /// V̂ (P0 × P0, when `need_v`), K̂ (P0 × P1) and D̂ (P1 × P1).
    pub fn galerkin(
        mesh: &TriangleMesh,
        mat: &MaterialParams,
        quad: &QuadConfig,
        opts: &FmmOptions,
        line_integrals: bool,
        need_v: bool,
    ) -> Result<Self> {
        opts.check()?;
        let stars = mesh.vertex_stars();
        let set = |space| DofSet { mesh, space, stars: &stars, quad_order: opts.quad_order };
        let (p0, p1) = (set(Space::P0), set(Space::P1));
        let mut scheme = build_scheme(&[&p0, &p1], opts, mat)?;
        let builder = BlockBuilder::new(mesh, mat, quad, line_mode(opts.variant, line_integrals));
        let mass = [BlockKind::Mass];
        let v = match need_v {
            true => Some(plan(&mut scheme, &builder, &p0, &p0, NearKind::GalerkinV, &mass, &mass, kelvin_term())?),
            false => None,
        };
        let (k_src, k_terms) = double_layer_far(opts.variant, mat.mu);
        let k = plan(&mut scheme, &builder, &p0, &p1, NearKind::GalerkinK, &mass, &k_src, k_terms)?;
        let (d_tgt, d_src, d_terms) = hypersingular_far(opts.variant, mat.mu);
        let d = plan(&mut scheme, &builder, &p1, &p1, NearKind::GalerkinD, &d_tgt, &d_src, d_terms)?;
        let mut keys = k.keys(&scheme);
        keys.extend(d.keys(&scheme));
        if let Some(v) = &v {
            keys.extend(v.keys(&scheme));
        }
        scheme.fill_m2l(keys);
        let mut all: Vec<&Plan> = vec![&k, &d];
        all.extend(v.iter());
        warn_if_dense(&all);
        let scheme = Arc::new(scheme);
        Ok(FmmOperators {
            v: v.map(|v| v.finish(scheme.clone())),
            k: k.finish(scheme.clone()),
            d: Some(d.finish(scheme.clone())),
            scheme,
        })
    }

    pub fn v(&self) -> Option<&dyn LinearMap> {
        self.v.as_ref().map(|m| m as &dyn LinearMap)
    }

    pub fn k(&self) -> &dyn LinearMap {
        &self.k
    }

    pub fn d(&self) -> Option<&dyn LinearMap> {
        self.d.as_ref().map(|m| m as &dyn LinearMap)
    }

    pub fn v_matrix(&self) -> Option<&FmmMatrix> {
        self.v.as_ref()
    }

    pub fn k_matrix(&self) -> &FmmMatrix {
        &self.k
    }

    pub fn d_matrix(&self) -> Option<&FmmMatrix> {
        self.d.as_ref()
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    fn matrices(&self) -> impl Iterator<Item = &FmmMatrix> {
        self.v.iter().chain(std::iter::once(&self.k)).chain(self.d.iter())
    }

    /// Bytes of the far-field operators: P2M, L2P, M2M and M2L.
    pub fn bytes(&self) -> usize {
        self.scheme.bytes() + self.matrices().map(|m| m.far_bytes()).sum::<usize>()
    }

    /// Bytes of the dense near-field blocks.
    pub fn near_bytes(&self) -> usize {
        self.matrices().map(|m| m.near_bytes()).sum()
    }

    /// Total number of M2L cluster pairs over all operators.
    pub fn far_pairs(&self) -> usize {
        self.matrices().map(|m| m.far_pairs()).sum()
    }
}

fn build_scheme(sets: &[&DofSet], opts: &FmmOptions, mat: &MaterialParams) -> Result<Scheme> {
    let centers: Vec<Vec3> = sets.iter().flat_map(|s| (0..s.count()).map(|i| s.center(i))).collect();
    let mut scheme = Scheme::new(&centers, opts, mat)?;
    scheme.element_margin = sets.iter().map(|s| s.delta()).fold(0.0, f64::max);
    Ok(scheme)
}

fn warn_if_dense(plans: &[&Plan]) {
    if plans.iter().all(|p| p.far.is_empty()) {
        log::warn!("no admissible cluster pairs: the fast multipole operators are dense");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m2l_of_reversed_pair_is_transpose() {
        let mat = MaterialParams::new(1.0, 1.0).unwrap();
        let pts = [Vec3::zeros(), Vec3::repeat(1.0)];
        let opts = FmmOptions { order: 3, depth: 2, ..Default::default() };
        let mut s = Scheme::new(&pts, &opts, &mat).unwrap();
        let (g0, g1) = (s.grid(0.0), s.grid(0.1));
        for family in [Family::Kelvin, Family::Modified] {
            let a = s.build_m2l(&(family, 2, [3, 1, 0], g0, g1));
            let b = s.build_m2l(&(family, 2, [-3, -1, 0], g1, g0));
            let diff = a.transpose().data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-14 * a.max_abs());
        }
    }
}
