use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::geometry::Vec3;

/// A cell of the uniform octree.
#[derive(Clone, Debug)]
pub struct Cell {
    pub level: usize,
    pub index: [i64; 3],
    pub center: Vec3,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Uniform octree over a cube. Cells at `depth` are leaves. A family of
/// dofs with support radius δ (∞-norm, from the dof center) sees every
/// cell extended by δ in each direction.
#[derive(Clone, Debug)]
pub struct ClusterTree {
    pub depth: usize,
    pub origin: Vec3,
    /// Side length of the root cube.
    pub side: f64,
    pub cells: Vec<Cell>,
    /// Cell ids per level.
    pub levels: Vec<Vec<usize>>,
    lookup: Vec<HashMap<[i64; 3], usize>>,
}

impl ClusterTree {
    /// Builds the tree over the bounding cube of `points`, creating every
    /// cell that contains one of them.
    pub fn new(points: &[Vec3], depth: usize) -> Result<Self> {
        if depth < 1 {
            return invalid("tree depth must be at least 1");
        }
        if points.is_empty() {
            return invalid("cannot build a cluster tree without points");
        }
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let ext = hi - lo;
        let side = ext.max() * (1.0 + 1e-9) + 1e-12;
        let origin = (lo + hi) * 0.5 - Vec3::repeat(side * 0.5);
        let mut tree = ClusterTree {
            depth,
            origin,
            side,
            cells: Vec::new(),
            levels: vec![Vec::new(); depth + 1],
            lookup: vec![HashMap::new(); depth + 1],
        };
        tree.insert_cell(0, [0, 0, 0]);
        for p in points {
            tree.insert_point(p);
        }
        Ok(tree)
    }

    fn insert_cell(&mut self, level: usize, index: [i64; 3]) -> usize {
        if let Some(&id) = self.lookup[level].get(&index) {
            return id;
        }
        let parent = (level > 0).then(|| self.insert_cell(level - 1, index.map(|i| i.div_euclid(2))));
        let w = self.width(level);
        let center = self.origin + Vec3::new(index[0] as f64 + 0.5, index[1] as f64 + 0.5, index[2] as f64 + 0.5) * w;
        let id = self.cells.len();
        self.cells.push(Cell { level, index, center, parent, children: Vec::new() });
        if let Some(p) = parent {
            self.cells[p].children.push(id);
        }
        self.levels[level].push(id);
        self.lookup[level].insert(index, id);
        id
    }

    fn leaf_index(&self, p: &Vec3) -> [i64; 3] {
        let n = 1i64 << self.depth;
        let w = self.width(self.depth);
        let rel = (p - self.origin) / w;
        [rel.x, rel.y, rel.z].map(|r| (r.floor() as i64).clamp(0, n - 1))
    }

    fn insert_point(&mut self, p: &Vec3) -> usize {
        let idx = self.leaf_index(p);
        self.insert_cell(self.depth, idx)
    }

    /// Cell width at a level.
    pub fn width(&self, level: usize) -> f64 {
        self.side / (1u64 << level) as f64
    }

    /// Half-width of a cluster box at a level extended by `delta`.
    pub fn extended_half(&self, level: usize, delta: f64) -> f64 {
        0.5 * self.width(level) + delta
    }

    /// Leaf cell of a point; `None` when it lies outside the tree's cells.
    pub fn leaf_of(&self, p: &Vec3) -> Option<usize> {
        self.lookup[self.depth].get(&self.leaf_index(p)).copied()
    }

    /// Leaf per point together with the point lists of every leaf.
    pub fn assign(&self, points: &[Vec3]) -> Result<Assignment> {
        let mut leaf = Vec::with_capacity(points.len());
        let mut members: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            let Some(c) = self.leaf_of(p) else {
                return invalid(format!("point {i} outside the cluster tree"));
            };
            leaf.push(c);
            members.entry(c).or_default().push(i);
        }
        let mut occupied = vec![false; self.cells.len()];
        for &c in members.keys() {
            let mut cur = Some(c);
            while let Some(id) = cur {
                if occupied[id] {
                    break;
                }
                occupied[id] = true;
                cur = self.cells[id].parent;
            }
        }
        Ok(Assignment { leaf, members, occupied })
    }

    /// Far-field test for a target cell `a` with margin `da` and a source
    /// cell `b` with margin `db`: the gap between the extended boxes is at
    /// least `eta` times their mean width.
    pub fn admissible(&self, a: usize, b: usize, eta: f64, da: f64, db: f64) -> bool {
        let (ca, cb) = (&self.cells[a], &self.cells[b]);
        let ea = self.extended_half(ca.level, da);
        let eb = self.extended_half(cb.level, db);
        let dist = (ca.center - cb.center).abs().max();
        dist - ea - eb >= eta * (ea + eb)
    }

    /// Multilevel interaction lists for the given target and source
    /// occupancy and margins: far pairs (M2L) and near leaf pairs.
    pub fn interactions(&self, tgt: &Assignment, src: &Assignment, eta: f64, dt: f64, ds: f64) -> Interactions {
        let mut out = Interactions::default();
        if tgt.occupied[0] && src.occupied[0] {
            self.recurse(0, 0, tgt, src, (eta, dt, ds), &mut out);
        }
        out
    }

    fn recurse(&self, t: usize, s: usize, tgt: &Assignment, src: &Assignment, adm: (f64, f64, f64), out: &mut Interactions) {
        if self.admissible(t, s, adm.0, adm.1, adm.2) {
            out.far.push((t, s));
            return;
        }
        if self.cells[t].level == self.depth {
            out.near.push((t, s));
            return;
        }
        for &ct in &self.cells[t].children {
            if !tgt.occupied[ct] {
                continue;
            }
            for &cs in &self.cells[s].children {
                if src.occupied[cs] {
                    self.recurse(ct, cs, tgt, src, adm, out);
                }
            }
        }
    }

    /// Integer offset between two cells of one level.
    pub fn offset(&self, t: usize, s: usize) -> [i64; 3] {
        let (a, b) = (&self.cells[t].index, &self.cells[s].index);
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }
}

/// Leaf membership of one family of points.
#[derive(Clone, Debug)]
pub struct Assignment {
    pub leaf: Vec<usize>,
    pub members: HashMap<usize, Vec<usize>>,
    /// Cells with at least one member below them.
    pub occupied: Vec<bool>,
}

#[derive(Clone, Debug, Default)]
pub struct Interactions {
    pub far: Vec<(usize, usize)>,
    pub near: Vec<(usize, usize)>,
}
