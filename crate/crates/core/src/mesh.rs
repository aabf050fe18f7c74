//! Conforming triangulations with edge connectivity.
//!
//! Triangles are stored counter-clockwise. Edges are numbered in
//! lexicographic order of their sorted vertex pair, and every interior edge
//! carries a degree of freedom index (the midpoint of a nonconforming P1
//! function). Local edge `i` of a triangle is the edge opposite its vertex `i`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quadrature::tri_area;

pub type Point = [f64; 2];

/// Sentinel for the missing second neighbour of a boundary edge.
pub const NO_TRIANGLE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Endpoints, smaller index first.
    pub v: [usize; 2],
    pub midpoint: Point,
    /// Adjacent triangles; the second is [`NO_TRIANGLE`] on the boundary.
    pub tris: [usize; 2],
    pub boundary: bool,
    /// Interior-edge dof index.
    pub dof: Option<usize>,
}

/// Triangle layout inside each square cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SquarePattern {
    /// Four triangles around the cell centre.
    #[default]
    Crossed,
    /// Two triangles split along the (lo, hi) diagonal.
    Diagonal,
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// `tri_edges[t][i]` is the edge opposite vertex `i` of triangle `t`.
    pub tri_edges: Vec<[usize; 3]>,
    pub areas: Vec<f64>,
    pub centroids: Vec<Point>,
    pub diameters: Vec<f64>,
    /// Gradients of the barycentric coordinates, per triangle.
    pub grad_lambda: Vec<[[f64; 2]; 3]>,
    pub boundary_vertex: Vec<bool>,
    /// Edge index of each dof.
    pub dof_edges: Vec<usize>,
    pub h_max: f64,
}

impl TriMesh {
    /// Build a mesh from vertices and triangles. Clockwise triangles are
    /// reoriented; degenerate ones are rejected.
    pub fn new(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Mesh("mesh has no triangles".into()));
        }
        let nv = vertices.len();
        let mut areas = Vec::with_capacity(triangles.len());
        let mut centroids = Vec::with_capacity(triangles.len());
        let mut diameters = Vec::with_capacity(triangles.len());
        let mut grad_lambda = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Mesh(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Mesh(format!("triangle {t} repeats a vertex")));
            }
            let mut p = tri.map(|v| vertices[v]);
            let mut a = tri_area(&p);
            if a < 0.0 {
                tri.swap(1, 2);
                p.swap(1, 2);
                a = -a;
            }
            let scale = (0..3).map(|i| dist(p[i], p[(i + 1) % 3])).fold(0.0, f64::max);
            if !(a > 1e-14 * scale * scale) {
                return Err(Error::Mesh(format!("triangle {t} is degenerate")));
            }
            areas.push(a);
            centroids.push([(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]);
            diameters.push(scale);
            grad_lambda.push(std::array::from_fn(|i| {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                [(p[j][1] - p[k][1]) / (2.0 * a), (p[k][0] - p[j][0]) / (2.0 * a)]
            }));
        }
        let h_max = diameters.iter().copied().fold(0.0, f64::max);
        let (edges, tri_edges) = build_edges(&vertices, &triangles)?;
        let mut boundary_vertex = vec![false; nv];
        let mut dof_edges = Vec::new();
        for (k, e) in edges.iter().enumerate() {
            if e.boundary {
                boundary_vertex[e.v[0]] = true;
                boundary_vertex[e.v[1]] = true;
            } else {
                dof_edges.push(k);
            }
        }
        Ok(Self {
            vertices,
            triangles,
            edges,
            tri_edges,
            areas,
            centroids,
            diameters,
            grad_lambda,
            boundary_vertex,
            dof_edges,
            h_max,
        })
    }

    /// Structured mesh of the rectangle `[lo, hi]` with `n` cells per side.
    pub fn square(lo: Point, hi: Point, n: usize, pattern: SquarePattern) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("square mesh needs n >= 1".into()));
        }
        if !(hi[0] > lo[0] && hi[1] > lo[1]) || lo.iter().chain(&hi).any(|c| !c.is_finite()) {
            return Err(Error::Config(format!("invalid square bounds {lo:?}..{hi:?}")));
        }
        let hx = (hi[0] - lo[0]) / n as f64;
        let hy = (hi[1] - lo[1]) / n as f64;
        let coord = |i: usize, lo: f64, hi: f64, h: f64| if i == n { hi } else { lo + i as f64 * h };
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1) + n * n);
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([coord(i, lo[0], hi[0], hx), coord(j, lo[1], hi[1], hy)]);
            }
        }
        let g = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::new();
        match pattern {
            SquarePattern::Crossed => {
                let base = vertices.len();
                for j in 0..n {
                    for i in 0..n {
                        vertices.push([lo[0] + (i as f64 + 0.5) * hx, lo[1] + (j as f64 + 0.5) * hy]);
                    }
                }
                for j in 0..n {
                    for i in 0..n {
                        let c = base + j * n + i;
                        let (v00, v10, v11, v01) = (g(i, j), g(i + 1, j), g(i + 1, j + 1), g(i, j + 1));
                        triangles.extend([[v00, v10, c], [v10, v11, c], [v11, v01, c], [v01, v00, c]]);
                    }
                }
            }
            SquarePattern::Diagonal => {
                for j in 0..n {
                    for i in 0..n {
                        let (v00, v10, v11, v01) = (g(i, j), g(i + 1, j), g(i + 1, j + 1), g(i, j + 1));
                        triangles.extend([[v00, v10, v11], [v00, v11, v01]]);
                    }
                }
            }
        }
        Self::new(vertices, triangles)
    }

    /// Polygonal approximation of the disc of `radius` about the origin,
    /// built from concentric rings of roughly `target_h` spacing.
    pub fn disc(radius: f64, target_h: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("disc radius must be positive, got {radius}")));
        }
        if !(target_h > 0.0 && target_h < radius) {
            return Err(Error::Config(format!("disc mesh needs 0 < h < radius, got h = {target_h}")));
        }
        let n_boundary = ring_count(radius, target_h);
        if n_boundary < 8 {
            return Err(Error::Config(format!(
                "h = {target_h} resolves the circle with only {n_boundary} boundary vertices (need 8)"
            )));
        }
        let rings = (radius / (0.9 * target_h)).ceil() as usize;
        let mut vertices = vec![[0.0, 0.0]];
        let mut ring_start = vec![0usize];
        let mut ring_len = vec![1usize];
        let mut ring_phase = vec![0.0];
        for k in 1..=rings {
            let r = if k == rings { radius } else { radius * k as f64 / rings as f64 };
            let m = ring_count(r, target_h).max(6);
            let dtheta = 2.0 * PI / m as f64;
            let phase = if k % 2 == 1 { 0.5 * dtheta } else { 0.0 };
            ring_start.push(vertices.len());
            ring_len.push(m);
            ring_phase.push(phase);
            for i in 0..m {
                let th = phase + i as f64 * dtheta;
                vertices.push([r * th.cos(), r * th.sin()]);
            }
        }
        let mut triangles = Vec::new();
        for k in 1..=rings {
            let (sa, na, pa) = (ring_start[k - 1], ring_len[k - 1], ring_phase[k - 1]);
            let (sb, nb, pb) = (ring_start[k], ring_len[k], ring_phase[k]);
            if na == 1 {
                for j in 0..nb {
                    triangles.push([sa, sb + j, sb + (j + 1) % nb]);
                }
                continue;
            }
            zipper(&mut triangles, &vertices, (sa, na, pa), (sb, nb, pb));
        }
        let mesh = Self::new(vertices, triangles)?;
        if mesh.h_max > 1.5 * target_h {
            return Err(Error::Mesh(format!("disc mesh h_max = {} exceeds 1.5 h = {}", mesh.h_max, 1.5 * target_h)));
        }
        Ok(mesh)
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Total area, with compensated summation.
    pub fn area(&self) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for &a in &self.areas {
            let t = sum + a;
            comp += if sum.abs() >= a.abs() { (sum - t) + a } else { (a - t) + sum };
            sum = t;
        }
        sum + comp
    }

    pub fn tri_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Dofs of the three local edges (`None` on boundary edges).
    pub fn tri_dofs(&self, t: usize) -> [Option<usize>; 3] {
        self.tri_edges[t].map(|e| self.edges[e].dof)
    }

    /// Gradient of the nonconforming basis function attached to local edge `i`.
    pub fn cr_basis_grad(&self, t: usize, i: usize) -> [f64; 2] {
        let g = self.grad_lambda[t][i];
        [-2.0 * g[0], -2.0 * g[1]]
    }

    pub fn n_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.boundary).count()
    }

    /// SHA-256 over the exact vertex bits and triangle indices.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.vertices.len() as u64).to_le_bytes());
        for p in &self.vertices {
            h.update(p[0].to_bits().to_le_bytes());
            h.update(p[1].to_bits().to_le_bytes());
        }
        h.update((self.triangles.len() as u64).to_le_bytes());
        for t in &self.triangles {
            for &v in t {
                h.update((v as u64).to_le_bytes());
            }
        }
        h.finalize().into()
    }

    /// Plain-text form: `V T`, then `x y` lines, then `i j k` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.vertices.len(), self.triangles.len());
        for p in &self.vertices {
            let _ = writeln!(s, "{:.16e} {:.16e}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Mesh(format!("mesh text: {msg}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| bad("empty input"))?;
        let counts: Vec<usize> =
            header.split_whitespace().map(|t| t.parse().map_err(|_| bad("malformed header"))).collect::<Result<_>>()?;
        let [nv, nt] = counts[..] else { return Err(bad("header must be `V T`")) };
        let mut vertices = Vec::with_capacity(nv);
        for k in 0..nv {
            let line = lines.next().ok_or_else(|| bad("missing vertex lines"))?;
            let xy: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(&format!("vertex {k} is not numeric"))))
                .collect::<Result<_>>()?;
            let [x, y] = xy[..] else { return Err(bad(&format!("vertex {k} needs two coordinates"))) };
            vertices.push([x, y]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for k in 0..nt {
            let line = lines.next().ok_or_else(|| bad("missing triangle lines"))?;
            let ijk: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(&format!("triangle {k} is not an index triple"))))
                .collect::<Result<_>>()?;
            let [i, j, l] = ijk[..] else { return Err(bad(&format!("triangle {k} needs three indices"))) };
            triangles.push([i, j, l]);
        }
        if lines.next().is_some() {
            return Err(bad("trailing data after triangles"));
        }
        Self::new(vertices, triangles)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read mesh file {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn ring_count(r: f64, h: f64) -> usize {
    (2.0 * PI * r / h).ceil() as usize
}

/// Triangulate the annulus between two rings by merging their vertices in
/// angular order, taking the shorter diagonal at each step.
fn zipper(tris: &mut Vec<[usize; 3]>, verts: &[Point], inner: (usize, usize, f64), outer: (usize, usize, f64)) {
    let (sa, na, pa) = inner;
    let (sb, nb, pb) = outer;
    let da = 2.0 * PI / na as f64;
    let db = 2.0 * PI / nb as f64;
    // Outer vertex closest in angle to inner vertex 0, with its unwrapped angle.
    let mut j0 = (((pa - pb) / db).round() as i64).rem_euclid(nb as i64) as usize;
    let mut b0 = pb + j0 as f64 * db;
    while b0 - pa > PI {
        b0 -= 2.0 * PI;
    }
    while pa - b0 > PI {
        b0 += 2.0 * PI;
    }
    if (b0 - pa).abs() > db {
        j0 = 0;
        b0 = pb;
    }
    let (mut i, mut j) = (0usize, 0usize);
    while i < na || j < nb {
        let ai = sa + i % na;
        let bj = sb + (j0 + j) % nb;
        let na_v = sa + (i + 1) % na;
        let nb_v = sb + (j0 + j + 1) % nb;
        let dist = |p: usize, q: usize| (verts[p][0] - verts[q][0]).hypot(verts[p][1] - verts[q][1]);
        let advance_inner = if j == nb {
            true
        } else if i == na {
            false
        } else {
            let (next_a, next_b) = (pa + (i + 1) as f64 * da, b0 + (j + 1) as f64 * db);
            // Stay monotone in angle; otherwise prefer the shorter diagonal.
            if next_a > next_b + db {
                false
            } else if next_b > next_a + da {
                true
            } else {
                dist(na_v, bj) <= dist(ai, nb_v)
            }
        };
        if advance_inner {
            tris.push([ai, bj, na_v]);
            i += 1;
        } else {
            tris.push([ai, bj, nb_v]);
            j += 1;
        }
    }
}

/// Derive the edge table. Returns the edges (lexicographically sorted by
/// vertex pair) and, per triangle, the edge opposite each local vertex.
pub fn build_edges(vertices: &[Point], triangles: &[[usize; 3]]) -> Result<(Vec<Edge>, Vec<[usize; 3]>)> {
    let mut half: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(3 * triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        for i in 0..3 {
            let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
            half.push((a.min(b), a.max(b), t, i));
        }
    }
    half.sort_unstable();
    let mut edges: Vec<Edge> = Vec::new();
    let mut tri_edges = vec![[usize::MAX; 3]; triangles.len()];
    let mut k = 0;
    while k < half.len() {
        let (a, b, t, i) = half[k];
        let mut m = k + 1;
        while m < half.len() && half[m].0 == a && half[m].1 == b {
            m += 1;
        }
        if m - k > 2 {
            return Err(Error::Mesh(format!("edge ({a}, {b}) is shared by {} triangles", m - k)));
        }
        let id = edges.len();
        tri_edges[t][i] = id;
        let mut tris = [t, NO_TRIANGLE];
        if m - k == 2 {
            let (_, _, t2, i2) = half[k + 1];
            tri_edges[t2][i2] = id;
            tris[1] = t2;
        }
        let (pa, pb) = (vertices[a], vertices[b]);
        edges.push(Edge {
            v: [a, b],
            midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
            tris,
            boundary: m - k == 1,
            dof: None,
        });
        k = m;
    }
    for (next, e) in edges.iter_mut().filter(|e| !e.boundary).enumerate() {
        e.dof = Some(next);
    }
    Ok((edges, tri_edges))
}
