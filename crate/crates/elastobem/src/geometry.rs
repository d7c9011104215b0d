//! Flat triangle surface meshes, the three benchmark geometries, refinement
//! and open-boundary extraction.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{invalid, BemError, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BcTag {
    Dirichlet,
    Neumann,
}

/// Per-element geometry, precomputed once per mesh.
#[derive(Clone, Debug)]
pub struct Element {
    pub p: [Vec3; 3],
    pub normal: Vec3,
    pub area: f64,
    pub centroid: Vec3,
    /// Gradients of the three barycentric (P1) shape functions.
    pub grads: [Vec3; 3],
    /// Longest edge.
    pub diameter: f64,
}

impl Element {
    fn new(p: [Vec3; 3]) -> Option<Self> {
        let e1 = p[1] - p[0];
        let e2 = p[2] - p[0];
        let c = e1.cross(&e2);
        let twice_area = c.norm();
        if !(twice_area > 0.0) || !twice_area.is_finite() {
            return None;
        }
        let normal = c / twice_area;
        // grad λ_i = n × (edge opposite to i) / (2A), edge oriented along the cycle
        let mut grads = [Vec3::zeros(); 3];
        for i in 0..3 {
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            grads[i] = normal.cross(&(b - a)) / twice_area;
        }
        let diameter = (p[1] - p[0]).norm().max((p[2] - p[1]).norm()).max((p[0] - p[2]).norm());
        Some(Element {
            p,
            normal,
            area: 0.5 * twice_area,
            centroid: (p[0] + p[1] + p[2]) / 3.0,
            grads,
            diameter,
        })
    }

    /// Point from reference coordinates (u, v) on {u, v ≥ 0, u + v ≤ 1}.
    #[inline]
    pub fn map(&self, u: f64, v: f64) -> Vec3 {
        self.p[0] + (self.p[1] - self.p[0]) * u + (self.p[2] - self.p[0]) * v
    }

    /// Euclidean distance from `x` to the closed triangle.
    pub fn distance_to(&self, x: &Vec3) -> f64 {
        point_triangle_distance(x, &self.p)
    }
}

/// Oriented boundary edge `a → b` of triangle `owner`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub owner: usize,
}

#[derive(Clone, Debug, Default)]
pub struct EdgeSet {
    pub edges: Vec<Edge>,
}

impl EdgeSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn endpoints(&self, mesh: &TriangleMesh, k: usize) -> (Vec3, Vec3) {
        let e = self.edges[k];
        (mesh.vertices[e.a], mesh.vertices[e.b])
    }
}

#[derive(Clone, Debug)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub tags: Vec<BcTag>,
    elements: Vec<Element>,
}

impl TriangleMesh {
    /// Builds a mesh, checking the triangle invariants. All elements start
    /// out Neumann-tagged.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return invalid("non-finite vertex coordinate");
        }
        let mut elements = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= vertices.len()) {
                return invalid(format!("triangle {k} references a missing vertex"));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return invalid(format!("triangle {k} has repeated vertices"));
            }
            let el = Element::new([vertices[t[0]], vertices[t[1]], vertices[t[2]]])
                .ok_or_else(|| BemError::InvalidArgument(format!("triangle {k} is degenerate")))?;
            elements.push(el);
        }
        let mesh = TriangleMesh { tags: vec![BcTag::Neumann; triangles.len()], vertices, triangles, elements };
        mesh.check_conforming()?;
        Ok(mesh)
    }

    fn check_conforming(&self) -> Result<()> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        if let Some((e, _)) = count.iter().find(|(_, &c)| c > 2) {
            return invalid(format!("edge {e:?} shared by more than two triangles"));
        }
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn element(&self, k: usize) -> &Element {
        &self.elements[k]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn normals(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.elements.iter().map(|e| e.normal)
    }

    pub fn total_area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }

    /// Mesh size: the longest edge over all elements.
    pub fn h(&self) -> f64 {
        self.elements.iter().map(|e| e.diameter).fold(0.0, f64::max)
    }

    pub fn is_closed(&self) -> bool {
        open_boundary(self, None).is_empty()
    }

    /// Assigns tags from a predicate on (centroid, normal); `true` means Dirichlet.
    pub fn with_tags(mut self, dirichlet: impl Fn(&Vec3, &Vec3) -> bool) -> Self {
        for (tag, el) in self.tags.iter_mut().zip(&self.elements) {
            *tag = if dirichlet(&el.centroid, &el.normal) { BcTag::Dirichlet } else { BcTag::Neumann };
        }
        self
    }

    /// Element indices incident to each vertex.
    pub fn vertex_stars(&self) -> Vec<Vec<usize>> {
        let mut stars = vec![Vec::new(); self.vertices.len()];
        for (k, t) in self.triangles.iter().enumerate() {
            for &i in t {
                stars[i].push(k);
            }
        }
        stars
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn write_off(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "OFF")?;
        writeln!(w, "{} {} 0", self.vertices.len(), self.triangles.len())?;
        for v in &self.vertices {
            writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
        }
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn read_off(r: impl BufRead) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("");
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        let mut it = tokens.into_iter();
        let bad = |m: &str| BemError::Format(m.to_owned());
        if it.next().as_deref() != Some("OFF") {
            return Err(bad("missing OFF header"));
        }
        let mut num = |what: &str| -> Result<f64> {
            it.next().ok_or_else(|| bad(what))?.parse::<f64>().map_err(|_| bad(what))
        };
        let nv = num("vertex count")? as usize;
        let nt = num("face count")? as usize;
        let _ne = num("edge count")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            vertices.push(Vec3::new(num("x")?, num("y")?, num("z")?));
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            if num("face arity")? as usize != 3 {
                return Err(bad("only triangular faces are supported"));
            }
            triangles.push([num("index")? as usize, num("index")? as usize, num("index")? as usize]);
        }
        TriangleMesh::new(vertices, triangles)
    }
}

/// Split of a structured quad into triangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadSplit {
    /// Four triangles around the quad center.
    Center4,
    /// Two triangles across the first diagonal.
    Diagonal2,
}

/// Surface of a union of axis-aligned voxels, outward oriented.
fn voxel_surface(
    n: [usize; 3],
    spacing: [f64; 3],
    origin: Vec3,
    solid: impl Fn([usize; 3]) -> bool,
    split: QuadSplit,
) -> Result<TriangleMesh> {
    let is_solid = |c: [i64; 3]| -> bool {
        (0..3).all(|d| c[d] >= 0 && (c[d] as usize) < n[d]) && solid([c[0] as usize, c[1] as usize, c[2] as usize])
    };
    // doubled lattice so face centers stay integral
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vid = |key: [i64; 3], vertices: &mut Vec<Vec3>| -> usize {
        *index.entry(key).or_insert_with(|| {
            vertices.push(Vec3::new(
                origin.x + 0.5 * key[0] as f64 * spacing[0],
                origin.y + 0.5 * key[1] as f64 * spacing[1],
                origin.z + 0.5 * key[2] as f64 * spacing[2],
            ));
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::new();
    for i in 0..n[0] as i64 {
        for j in 0..n[1] as i64 {
            for k in 0..n[2] as i64 {
                let c = [i, j, k];
                if !is_solid(c) {
                    continue;
                }
                for d in 0..3 {
                    for s in [-1i64, 1] {
                        let mut nb = c;
                        nb[d] += s;
                        if is_solid(nb) {
                            continue;
                        }
                        let (e1, e2) = ((d + 1) % 3, (d + 2) % 3);
                        let mut base = [2 * c[0], 2 * c[1], 2 * c[2]];
                        if s > 0 {
                            base[d] += 2;
                        }
                        let corner = |a: i64, b: i64| {
                            let mut q = base;
                            q[e1] += 2 * a;
                            q[e2] += 2 * b;
                            q
                        };
                        let mut quad = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                        if s < 0 {
                            quad.reverse();
                        }
                        let q: Vec<usize> = quad.iter().map(|&key| vid(key, &mut vertices)).collect();
                        match split {
                            QuadSplit::Center4 => {
                                let mut m = base;
                                m[e1] += 1;
                                m[e2] += 1;
                                let cm = vid(m, &mut vertices);
                                for t in 0..4 {
                                    triangles.push([q[t], q[(t + 1) % 4], cm]);
                                }
                            }
                            QuadSplit::Diagonal2 => {
                                triangles.push([q[0], q[1], q[2]]);
                                triangles.push([q[0], q[2], q[3]]);
                            }
                        }
                    }
                }
            }
        }
    }
    TriangleMesh::new(vertices, triangles)
}

fn check_level(level: usize) -> Result<()> {
    if level > 8 {
        return invalid(format!("refinement level {level} is beyond the supported range"));
    }
    Ok(())
}

/// Closed box `[-a, 0] × [0, b] × [0, c]`: the right face `x = 0` has its
/// bottom-left corner at the origin. Level 0 uses cubic cells of the
/// shortest side, each face quad split into four around its center.
pub fn make_cuboid(dims: Vec3, level: usize) -> Result<TriangleMesh> {
    if !dims.iter().all(|&d| d > 0.0 && d.is_finite()) {
        return invalid("cuboid dimensions must be positive");
    }
    check_level(level)?;
    let hmin = dims.min();
    let n = [0, 1, 2].map(|d| ((dims[d] / hmin).round() as usize).max(1));
    let spacing = [0, 1, 2].map(|d| dims[d] / n[d] as f64);
    let mesh = voxel_surface(n, spacing, Vec3::new(-dims.x, 0.0, 0.0), |_| true, QuadSplit::Center4)?;
    Ok(refine_times(mesh, level))
}

/// Cube `[-s/2, s/2]³` with the positive octant `[0, s/2]³` removed.
pub fn make_fichera(side: f64, level: usize) -> Result<TriangleMesh> {
    make_fichera_with(side, level, QuadSplit::Center4, 1)
}

/// Fichera variant: each octant cell is cut into `cells_per_half`³ voxels
/// and every face quad is split by `split`.
pub fn make_fichera_with(side: f64, level: usize, split: QuadSplit, cells_per_half: usize) -> Result<TriangleMesh> {
    if !(side > 0.0 && side.is_finite()) {
        return invalid("side must be positive");
    }
    if cells_per_half == 0 {
        return invalid("cells_per_half must be at least 1");
    }
    check_level(level)?;
    let m = cells_per_half;
    let h = side / (2 * m) as f64;
    let mesh = voxel_surface(
        [2 * m; 3],
        [h; 3],
        Vec3::repeat(-0.5 * side),
        |c| !(c[0] >= m && c[1] >= m && c[2] >= m),
        split,
    )?;
    Ok(refine_times(mesh, level))
}

/// Flat square sheet `[-L/2, L/2]²` in the plane `x3 = 0`, `n × n` quads
/// each split into two triangles. The normal is `-e3`: outward for the
/// half-space `x3 > 0`.
pub fn make_sheet(length: f64, n: usize) -> Result<TriangleMesh> {
    if !(length > 0.0 && length.is_finite()) {
        return invalid("length must be positive");
    }
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let h = length / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Vec3::new(-0.5 * length + i as f64 * h, -0.5 * length + j as f64 * h, 0.0));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            // clockwise seen from +x3
            triangles.push([a, c, b]);
            triangles.push([a, d, c]);
        }
    }
    TriangleMesh::new(vertices, triangles)
}

/// Midpoint quadrisection; tags are inherited.
pub fn refine(mesh: &TriangleMesh) -> TriangleMesh {
    let mut vertices = mesh.vertices.clone();
    let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
        *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
            vertices.push(0.5 * (vertices[a] + vertices[b]));
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    let mut tags = Vec::with_capacity(4 * mesh.triangles.len());
    for (t, &tag) in mesh.triangles.iter().zip(&mesh.tags) {
        let [a, b, c] = *t;
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        triangles.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        tags.extend_from_slice(&[tag; 4]);
    }
    let mut out = TriangleMesh::new(vertices, triangles).expect("refinement of a valid mesh is valid");
    out.tags = tags;
    out
}

pub fn refine_times(mut mesh: TriangleMesh, times: usize) -> TriangleMesh {
    for _ in 0..times {
        mesh = refine(&mesh);
    }
    mesh
}

/// Edges that belong to exactly one triangle of `subset` (all triangles
/// when `None`), oriented as in the owning triangle.
pub fn open_boundary(mesh: &TriangleMesh, subset: Option<&[usize]>) -> EdgeSet {
    let all: Vec<usize>;
    let subset = match subset {
        Some(s) => s,
        None => {
            all = (0..mesh.num_triangles()).collect();
            &all
        }
    };
    let mut seen: HashMap<(usize, usize), (usize, Edge)> = HashMap::new();
    let mut order = Vec::new();
    for &k in subset {
        let t = mesh.triangles[k];
        for i in 0..3 {
            let (a, b) = (t[i], t[(i + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let entry = seen.entry(key).or_insert_with(|| {
                order.push(key);
                (0, Edge { a, b, owner: k })
            });
            entry.0 += 1;
        }
    }
    let edges = order
        .into_iter()
        .filter_map(|key| {
            let (count, e) = seen[&key];
            (count == 1).then_some(e)
        })
        .collect();
    EdgeSet { edges }
}

/// Distance from a point to a closed triangle.
pub fn point_triangle_distance(x: &Vec3, p: &[Vec3; 3]) -> f64 {
    // Ericson, closest point on triangle
    let (a, b, c) = (p[0], p[1], p[2]);
    let ab = b - a;
    let ac = c - a;
    let ap = x - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = x - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (x - (a + ab * v)).norm();
    }
    let cp = x - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (x - (a + ac * w)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (x - (b + (c - b) * w)).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (x - (a + ab * v + ac * w)).norm()
}
