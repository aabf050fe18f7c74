//! Dense nonlocal form `c(∇_h χ, ∇_h η)` and Biot–Savart post-processing.
//!
//! The inner integral `V_T(x) = ∫_T |x − y|⁻¹ dy` is evaluated in closed form
//! by splitting the triangle into signed edge contributions. Pair integrals
//! `I(σ, σ') = ∫_σ V_σ'(x) dx` use a collapsed Gauss rule for the outer
//! integral, with a 4-fold subdivision of `σ` when the pair is close, and the
//! exact formula for `σ = σ'`.
//!
//! # Cache format
//!
//! [`PairwisePotential::write_cache`] stores, little endian:
//! the 8 magic bytes `QVIPAIR1`, `u64` triangle count, `u64` quadrature
//! order, the 32-byte mesh hash, then `I(i, j)` for `i ≥ j` in row order as
//! `f64`.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::femspace::CellVecField;
use crate::mesh::{Point, TriMesh};
use crate::quadrature::{collapsed_points_for_order, collapsed_rule, tri_area, TriangleRule};

const MAGIC: &[u8; 8] = b"QVIPAIR1";

/// Default outer quadrature order.
pub const DEFAULT_QUAD_ORDER: usize = 6;

/// Pairs closer than this many diameters get a subdivided outer rule.
pub const NEAR_FACTOR: f64 = 2.0;

struct EdgeFrame {
    d: f64,
    s1: f64,
    s2: f64,
    /// Inward unit normal.
    n: [f64; 2],
    len: f64,
}

fn edge_frames(tri: &[Point; 3], x: Point) -> Result<[EdgeFrame; 3]> {
    let a = tri_area(tri);
    let scale =
        (0..3).map(|i| (tri[(i + 1) % 3][0] - tri[i][0]).hypot(tri[(i + 1) % 3][1] - tri[i][1])).fold(0.0, f64::max);
    if !(a.abs() > 1e-14 * scale * scale) {
        return Err(Error::Geometry("degenerate triangle".into()));
    }
    let orient = a.signum();
    Ok(std::array::from_fn(|e| {
        let (p, q) = (tri[e], tri[(e + 1) % 3]);
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        let t = [(q[0] - p[0]) / len, (q[1] - p[1]) / len];
        let n = [-orient * t[1], orient * t[0]];
        EdgeFrame {
            d: (x[0] - p[0]) * n[0] + (x[1] - p[1]) * n[1],
            s1: (p[0] - x[0]) * t[0] + (p[1] - x[1]) * t[1],
            s2: (q[0] - x[0]) * t[0] + (q[1] - x[1]) * t[1],
            n,
            len,
        }
    }))
}

/// `∫_T |x − y|⁻¹ dy` in closed form; finite everywhere.
pub fn newtonian_potential(tri: &[Point; 3], x: Point) -> Result<f64> {
    Ok(edge_frames(tri, x)?
        .iter()
        .filter(|f| f.d.abs() > 1e-14 * f.len)
        .map(|f| f.d * ((f.s2 / f.d.abs()).asinh() - (f.s1 / f.d.abs()).asinh()))
        .sum())
}

/// `∇_x ∫_T |x − y|⁻¹ dy`. Points on the closed edges are rejected.
pub fn potential_gradient(tri: &[Point; 3], x: Point) -> Result<[f64; 2]> {
    let mut g = [0.0; 2];
    for f in edge_frames(tri, x)? {
        let line = if f.d.abs() > 1e-12 * f.len {
            (f.s2 / f.d.abs()).asinh() - (f.s1 / f.d.abs()).asinh()
        } else if f.s1 > 1e-12 * f.len {
            (f.s2 / f.s1).ln()
        } else if f.s2 < -1e-12 * f.len {
            (f.s1 / f.s2).ln()
        } else {
            return Err(Error::Evaluation(format!("point {x:?} lies on a triangle edge")));
        };
        g[0] += f.n[0] * line;
        g[1] += f.n[1] * line;
    }
    Ok(g)
}

/// `∫_T ∫_T |x − y|⁻¹ dy dx` in closed form.
pub fn self_potential(tri: &[Point; 3]) -> f64 {
    let l: [f64; 3] = std::array::from_fn(|i| {
        let (p, q) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    });
    let s = 0.5 * (l[0] + l[1] + l[2]);
    let a = tri_area(tri).abs();
    4.0 * a * a / 3.0 * l.iter().map(|&li| (s / (s - li)).ln() / li).sum::<f64>()
}

/// Split a triangle at its edge midpoints.
pub fn subdivide(tri: &[Point; 3]) -> [[Point; 3]; 4] {
    let m = |a: Point, b: Point| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let (m01, m12, m20) = (m(tri[0], tri[1]), m(tri[1], tri[2]), m(tri[2], tri[0]));
    [[tri[0], m01, m20], [m01, tri[1], m12], [m20, m12, tri[2]], [m01, m12, m20]]
}

/// `∫_σ V_σ'(x) dx` by an outer rule over `sigma`, subdivided `levels` times.
pub fn pair_integral(sigma: &[Point; 3], other: &[Point; 3], rule: &TriangleRule, levels: u32) -> Result<f64> {
    if levels == 0 {
        let mut s = 0.0;
        for (x, w) in rule.on(sigma) {
            s += w * newtonian_potential(other, x)?;
        }
        return Ok(s);
    }
    subdivide(sigma).iter().map(|c| pair_integral(c, other, rule, levels - 1)).sum()
}

/// Symmetric table of `I(σ, σ')` over all triangle pairs.
#[derive(Clone, Debug)]
pub struct PairwisePotential {
    pub n: usize,
    pub quad_order: usize,
    /// Row-major `n × n`, exactly symmetric.
    data: Vec<f64>,
}

impl PairwisePotential {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn write_cache(&self, path: &Path, mesh_hash: &[u8; 32]) -> Result<()> {
        let mut buf = Vec::with_capacity(56 + 4 * self.n * (self.n + 1));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.n as u64).to_le_bytes());
        buf.extend_from_slice(&(self.quad_order as u64).to_le_bytes());
        buf.extend_from_slice(mesh_hash);
        for i in 0..self.n {
            for j in 0..=i {
                buf.extend_from_slice(&self.get(i, j).to_le_bytes());
            }
        }
        let tmp = path.with_extension("tmp");
        std::fs::File::create(&tmp)?.write_all(&buf)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    /// Load a cache file; `Ok(None)` when it belongs to another mesh or order.
    pub fn read_cache(path: &Path, mesh_hash: &[u8; 32], n: usize, quad_order: usize) -> Result<Option<Self>> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 56 || &bytes[..8] != MAGIC {
            return Err(Error::Config(format!("{} is not a pairwise-potential cache", path.display())));
        }
        let u = |k: usize| u64::from_le_bytes(bytes[k..k + 8].try_into().unwrap()) as usize;
        if u(8) != n || u(16) != quad_order || &bytes[24..56] != mesh_hash {
            return Ok(None);
        }
        if bytes.len() != 56 + 4 * n * (n + 1) {
            return Err(Error::Config(format!("{} is truncated", path.display())));
        }
        let mut data = vec![0.0; n * n];
        let mut k = 56;
        for i in 0..n {
            for j in 0..=i {
                let v = f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
                data[i * n + j] = v;
                data[j * n + i] = v;
                k += 8;
            }
        }
        Ok(Some(Self { n, quad_order, data }))
    }
}

/// Compute `I(σ, σ')` for all pairs. Rows are computed in parallel; each
/// unordered pair is evaluated once and mirrored.
pub fn assemble_pairwise(mesh: &TriMesh, quad_order: usize) -> Result<PairwisePotential> {
    let n = mesh.n_triangles();
    let rule = collapsed_rule(collapsed_points_for_order(quad_order));
    let tris: Vec<[Point; 3]> = (0..n).map(|t| mesh.tri_points(t)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..=i)
                .map(|j| {
                    if i == j {
                        return Ok(self_potential(&tris[i]));
                    }
                    let (ci, cj) = (mesh.centroids[i], mesh.centroids[j]);
                    let near =
                        (ci[0] - cj[0]).hypot(ci[1] - cj[1]) < NEAR_FACTOR * mesh.diameters[i].max(mesh.diameters[j]);
                    pair_integral(&tris[i], &tris[j], &rule, u32::from(near))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut data = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    Ok(PairwisePotential { n, quad_order, data })
}

/// Load the pair table from `cache_dir` if present, otherwise assemble and store it.
pub fn pairwise_cached(mesh: &TriMesh, quad_order: usize, cache_dir: Option<&Path>) -> Result<PairwisePotential> {
    let Some(dir) = cache_dir else { return assemble_pairwise(mesh, quad_order) };
    let hash = mesh.content_hash();
    let name: String = hash[..12].iter().map(|b| format!("{b:02x}")).collect();
    let path = dir.join(format!("pairs-{name}-q{quad_order}.bin"));
    if path.exists() {
        if let Some(p) = PairwisePotential::read_cache(&path, &hash, mesh.n_triangles(), quad_order)? {
            return Ok(p);
        }
    }
    let p = assemble_pairwise(mesh, quad_order)?;
    std::fs::create_dir_all(dir)?;
    p.write_cache(&path, &hash)?;
    Ok(p)
}

/// Dense matrix of `c(∇_h φ_e, ∇_h φ_f)` over interior-edge dofs.
#[derive(Clone, Debug)]
pub struct NonlocalMatrix {
    pub a: Mat<f64>,
    pub quad_order: usize,
    pub near_factor: f64,
}

/// The (at most two) triangles of each dof with the basis gradient there.
pub fn dof_support(mesh: &TriMesh) -> Vec<Vec<(usize, [f64; 2])>> {
    let mut sup = vec![Vec::with_capacity(2); mesh.n_dofs()];
    for t in 0..mesh.n_triangles() {
        for (i, d) in mesh.tri_dofs(t).into_iter().enumerate() {
            if let Some(k) = d {
                sup[k].push((t, mesh.cr_basis_grad(t, i)));
            }
        }
    }
    sup
}

pub fn assemble_nonlocal_form(mesh: &TriMesh, p: &PairwisePotential) -> Result<NonlocalMatrix> {
    if p.n != mesh.n_triangles() {
        return Err(Error::Assembly(format!("pair table has {} triangles, mesh has {}", p.n, mesh.n_triangles())));
    }
    let nd = mesh.n_dofs();
    let nt = mesh.n_triangles();
    let sup = dof_support(mesh);
    let scale = 1.0 / (4.0 * PI);
    let cols: Vec<Vec<f64>> = (0..nd)
        .into_par_iter()
        .map(|f| {
            // h_c(σ) = Σ_{σ' ∋ f} g_{f,σ'}[c] I(σ, σ')
            let mut h = vec![[0.0; 2]; nt];
            for &(t, g) in &sup[f] {
                for (hs, &v) in h.iter_mut().zip(p.row(t)) {
                    hs[0] += g[0] * v;
                    hs[1] += g[1] * v;
                }
            }
            sup.iter().map(|se| scale * se.iter().map(|&(t, g)| g[0] * h[t][0] + g[1] * h[t][1]).sum::<f64>()).collect()
        })
        .collect();
    let mut a = Mat::<f64>::from_fn(nd, nd, |i, j| cols[j][i]);
    // Exact symmetry.
    for j in 0..nd {
        for i in 0..j {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(NonlocalMatrix { a, quad_order: p.quad_order, near_factor: NEAR_FACTOR })
}

/// `b₃(x) = b_e + (1/4π) ∇ × ∫ J(y)/|x − y| dy` for piecewise constant `J`.
pub fn biot_savart_field(mesh: &TriMesh, j: &CellVecField, points: &[Point], b_e: f64) -> Result<Vec<f64>> {
    let tris: Vec<[Point; 3]> = (0..mesh.n_triangles()).map(|t| mesh.tri_points(t)).collect();
    points
        .par_iter()
        .map(|&x| {
            let mut s = 0.0;
            for (t, tri) in tris.iter().enumerate() {
                let jv = j.0[t];
                if jv == [0.0, 0.0] {
                    continue;
                }
                let g = potential_gradient(tri, x)?;
                s += jv[1] * g[0] - jv[0] * g[1];
            }
            Ok(b_e + s / (4.0 * PI))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equilateral_unit_area() -> [Point; 3] {
        let a = (4.0 / 3f64.sqrt()).sqrt();
        [[0.0, 0.0], [a, 0.0], [0.5 * a, 0.5 * 3f64.sqrt() * a]]
    }

    #[test]
    fn far_field_monopole() {
        let tri = equilateral_unit_area();
        let diam = (4.0 / 3f64.sqrt()).sqrt();
        let c = [(tri[0][0] + tri[1][0] + tri[2][0]) / 3.0, (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0];
        let r = 100.0 * diam;
        for ang in [0.0, 1.0, 2.5] {
            let x = [c[0] + r * f64::cos(ang), c[1] + r * f64::sin(ang)];
            let v = newtonian_potential(&tri, x).unwrap();
            assert!((v * r - 1.0).abs() < 1e-4, "{}", v * r);
        }
    }

    #[test]
    fn translation_and_rotation_invariance() {
        let tri = [[0.1, 0.2], [1.3, -0.1], [0.4, 0.9]];
        let x = [0.5, 0.3];
        let v0 = newtonian_potential(&tri, x).unwrap();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let mv = |p: Point| [c * p[0] - s * p[1] + 5.0, s * p[0] + c * p[1] - 2.0];
        let v1 = newtonian_potential(&tri.map(mv), mv(x)).unwrap();
        assert!((v0 - v1).abs() < 1e-13);
        // Orientation does not matter.
        let v2 = newtonian_potential(&[tri[0], tri[2], tri[1]], x).unwrap();
        assert!((v0 - v2).abs() < 1e-14);
    }

    #[test]
    fn degenerate_triangle_is_an_error() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(matches!(newtonian_potential(&tri, [0.0, 1.0]), Err(Error::Geometry(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let tri = [[0.1, 0.2], [1.3, -0.1], [0.4, 0.9]];
        for x in [[0.5, 0.3], [2.0, 1.0], [-0.4, 0.1], [0.6, 0.05]] {
            let g = potential_gradient(&tri, x).unwrap();
            let h = 1e-6;
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (newtonian_potential(&tri, xp).unwrap() - newtonian_potential(&tri, xm).unwrap()) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-7, "{x:?}: {fd} vs {}", g[k]);
            }
        }
        // On an edge line, outside the segment.
        assert!(potential_gradient(&tri, [2.5, -0.35]).is_ok());
        assert!(matches!(potential_gradient(&tri, [0.7, 0.05]), Err(Error::Evaluation(_))));
        assert!(matches!(potential_gradient(&tri, tri[1]), Err(Error::Evaluation(_))));
    }

    #[test]
    fn equilateral_self_term() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.5 * 3f64.sqrt()]];
        assert!((self_potential(&tri) - 0.75 * 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn far_pair_is_product_over_distance() {
        let a = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let b = a.map(|p| [p[0] + 1000.0, p[1]]);
        let rule = collapsed_rule(4);
        let i = pair_integral(&a, &b, &rule, 0).unwrap();
        assert!((i * 1000.0 / 0.25 - 1.0).abs() < 1e-6);
        let j = pair_integral(&b, &a, &rule, 0).unwrap();
        assert!((i - j).abs() < 1e-9 * i);
    }

    // Polar form around x: ∫_T |x − y|⁻¹ dy = ∫ ρ(θ) dθ, ρ the distance to ∂T
    // along direction θ. Smooth between vertex directions.
    fn polar_potential(tri: &[Point; 3], x: Point) -> f64 {
        let gl = crate::quadrature::gauss_legendre01(80);
        let mut ang: Vec<f64> = tri.iter().map(|v| (v[1] - x[1]).atan2(v[0] - x[0])).collect();
        ang.sort_by(f64::total_cmp);
        ang.push(ang[0] + 2.0 * PI);
        let rho = |th: f64| {
            let d = [th.cos(), th.sin()];
            (0..3)
                .filter_map(|e| {
                    let (p, q) = (tri[e], tri[(e + 1) % 3]);
                    let m = [[d[0], p[0] - q[0]], [d[1], p[1] - q[1]]];
                    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                    if det.abs() < 1e-300 {
                        return None;
                    }
                    let b = [p[0] - x[0], p[1] - x[1]];
                    let r = (b[0] * m[1][1] - m[0][1] * b[1]) / det;
                    let s = (m[0][0] * b[1] - b[0] * m[1][0]) / det;
                    (r > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s)).then_some(r)
                })
                .fold(0.0, f64::max)
        };
        let mut v = 0.0;
        for k in 0..3 {
            let (a, b) = (ang[k], ang[k + 1]);
            for &(u, w) in &gl {
                v += (b - a) * w * rho(a + (b - a) * u);
            }
        }
        v
    }

    #[test]
    fn potential_matches_polar_oracle() {
        let reference = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let c = [1.0 / 3.0, 1.0 / 3.0];
        assert!((newtonian_potential(&reference, c).unwrap() - polar_potential(&reference, c)).abs() < 1e-10);
        let tri = [[0.1, 0.2], [1.3, -0.1], [0.4, 0.9]];
        for x in [[0.5, 0.3], [0.3, 0.25], [0.9, 0.1]] {
            let (a, b) = (newtonian_potential(&tri, x).unwrap(), polar_potential(&tri, x));
            assert!((a - b).abs() < 1e-10, "{x:?} {a} {b}");
        }
    }

    #[test]
    fn self_term_matches_subdivided_polar_oracle() {
        for tri in [[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0.0, 0.0], [2.0, 0.1], [0.3, 0.4]]] {
            let rule = collapsed_rule(8);
            let mut cells = vec![tri];
            for _ in 0..4 {
                cells = cells.iter().flat_map(subdivide).collect();
            }
            let oracle: f64 = cells
                .iter()
                .flat_map(|c| rule.on(c).map(|(x, w)| w * polar_potential(&tri, x)).collect::<Vec<_>>())
                .sum();
            let exact = self_potential(&tri);
            assert!((exact / oracle - 1.0).abs() < 1e-6, "{exact} vs {oracle}");
        }
    }

    #[test]
    fn self_term_exceeds_neighbour_of_same_shape() {
        let a = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let b = a.map(|p| [p[0] + 1.0, p[1]]);
        let rule = collapsed_rule(collapsed_points_for_order(DEFAULT_QUAD_ORDER));
        let near = pair_integral(&a, &b, &rule, 1).unwrap();
        assert!(near > 0.0 && self_potential(&a) > near);
    }

    fn bump_form(mesh: &TriMesh, order: usize) -> f64 {
        let a = assemble_nonlocal_form(mesh, &assemble_pairwise(mesh, order).unwrap()).unwrap().a;
        let w = crate::femspace::interpolate_cr(mesh, |x| (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0).powi(2));
        crate::linalg::dot(&crate::linalg::dense_matvec(a.as_ref(), &w.0), &w.0)
    }

    #[test]
    fn nonlocal_matrix_is_symmetric_positive_definite() {
        let mesh = TriMesh::disc(1.0, 0.25).unwrap();
        let a = assemble_nonlocal_form(&mesh, &assemble_pairwise(&mesh, DEFAULT_QUAD_ORDER).unwrap()).unwrap().a;
        let n = a.nrows();
        let scale = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
        for i in 0..n {
            for j in 0..n {
                assert!((a[(i, j)] - a[(j, i)]).abs() <= 1e-12 * scale);
            }
        }
        assert!(a.llt(faer::Side::Lower).is_ok());
    }

    #[test]
    fn quadratic_form_converges_in_quadrature_order() {
        let mesh = TriMesh::disc(1.0, 0.25).unwrap();
        let f: Vec<f64> = [3, 6, 12].iter().map(|&o| bump_form(&mesh, o)).collect();
        assert!(((f[1] - f[2]) / f[2]).abs() < 1e-3, "{f:?}");
        assert!(((f[0] - f[2]) / f[2]).abs() < 0.1, "{f:?}");
    }

    #[test]
    fn entries_scale_linearly_with_mesh_size() {
        let mesh = TriMesh::disc(1.0, 0.4).unwrap();
        let s = 0.3;
        let small =
            TriMesh::new(mesh.vertices.iter().map(|p| [s * p[0], s * p[1]]).collect(), mesh.triangles.clone()).unwrap();
        let a = assemble_nonlocal_form(&mesh, &assemble_pairwise(&mesh, 6).unwrap()).unwrap().a;
        let b = assemble_nonlocal_form(&small, &assemble_pairwise(&small, 6).unwrap()).unwrap().a;
        let scale = (0..a.nrows()).map(|i| a[(i, i)]).fold(0.0, f64::max);
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                assert!((b[(i, j)] - s * a[(i, j)]).abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn cache_round_trip_and_mismatch() {
        let mesh = TriMesh::disc(1.0, 0.4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = pairwise_cached(&mesh, 6, Some(dir.path())).unwrap();
        let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
        let q = pairwise_cached(&mesh, 6, Some(dir.path())).unwrap();
        assert_eq!(p.data, q.data);
        let path = files[0].as_ref().unwrap().path();
        assert!(PairwisePotential::read_cache(&path, &[0; 32], mesh.n_triangles(), 6).unwrap().is_none());
        std::fs::write(&path, b"garbage").unwrap();
        assert!(PairwisePotential::read_cache(&path, &mesh.content_hash(), mesh.n_triangles(), 6).is_err());
    }

    fn hat_current(mesh: &TriMesh, v: usize) -> CellVecField {
        let mut w = vec![0.0; mesh.vertices.len()];
        w[v] = 1.0;
        crate::femspace::curl_of_lift(mesh, &crate::femspace::P1Field(w))
    }

    fn nearest_vertex(mesh: &TriMesh, x: Point) -> usize {
        (0..mesh.vertices.len())
            .min_by(|&a, &b| {
                let d = |v: usize| (mesh.vertices[v][0] - x[0]).hypot(mesh.vertices[v][1] - x[1]);
                d(a).total_cmp(&d(b))
            })
            .unwrap()
    }

    #[test]
    fn biot_savart_zero_current_and_dipole_decay() {
        let mesh = TriMesh::square([-1.0, -1.0], [1.0, 1.0], 4, crate::mesh::SquarePattern::Crossed).unwrap();
        let pts = [[0.13, 0.41], [-0.77, 0.29]];
        let b = biot_savart_field(&mesh, &CellVecField::zeros(&mesh), &pts, 0.7).unwrap();
        assert!(b.iter().all(|&v| v == 0.7));
        let j = hat_current(&mesh, nearest_vertex(&mesh, [0.0, 0.0]));
        let far = biot_savart_field(&mesh, &j, &[[20.0, 7.0], [40.0, 14.0]], 0.0).unwrap();
        let ratio = far[0] / far[1];
        assert!((ratio / 8.0 - 1.0).abs() < 0.15, "{ratio}");
    }

    #[test]
    fn biot_savart_mirror_symmetry() {
        let mesh = TriMesh::square([-1.0, -1.0], [1.0, 1.0], 4, crate::mesh::SquarePattern::Crossed).unwrap();
        let v = nearest_vertex(&mesh, [0.25, 0.5]);
        let vm = nearest_vertex(&mesh, [0.25, -0.5]);
        let (j, jm) = (hat_current(&mesh, v), hat_current(&mesh, vm));
        for x in [[0.1, 0.33], [-0.6, 0.71], [1.7, -0.2]] {
            let b = biot_savart_field(&mesh, &j, &[x], 0.0).unwrap()[0];
            let bm = biot_savart_field(&mesh, &jm, &[[x[0], -x[1]]], 0.0).unwrap()[0];
            assert!((b - bm).abs() < 1e-12 * b.abs().max(1e-3), "{b} {bm}");
        }
    }
}
