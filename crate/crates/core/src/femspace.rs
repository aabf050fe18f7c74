//! Discrete spaces and operators on a [`TriMesh`].
//!
//! * [`CrField`]: nonconforming P1, one value per interior edge midpoint,
//!   zero at boundary midpoints. The basis function of local edge `i` is
//!   `1 - 2λ_i`, so the element mass matrix is `(|σ|/3) I`.
//! * [`CellField`] / [`CellVecField`]: piecewise constants.
//! * [`P1Field`]: continuous P1, zero on boundary vertices.

use crate::error::{Error, Result};
use crate::linalg::{SparseCholesky, SymCsc, SymPattern};
use crate::mesh::{Point, TriMesh};
use crate::quadrature::TriangleRule;

#[derive(Clone, Debug, PartialEq)]
pub struct CrField(pub Vec<f64>);

#[derive(Clone, Debug, PartialEq)]
pub struct CellField(pub Vec<f64>);

#[derive(Clone, Debug, PartialEq)]
pub struct CellVecField(pub Vec<[f64; 2]>);

#[derive(Clone, Debug, PartialEq)]
pub struct P1Field(pub Vec<f64>);

impl CrField {
    pub fn zeros(mesh: &TriMesh) -> Self {
        Self(vec![0.0; mesh.n_dofs()])
    }

    /// Values at the three local edge midpoints of triangle `t`.
    pub fn local(&self, mesh: &TriMesh, t: usize) -> [f64; 3] {
        mesh.tri_dofs(t).map(|d| d.map_or(0.0, |k| self.0[k]))
    }

    /// Evaluate the local affine function of triangle `t` at `x`.
    pub fn eval_in(&self, mesh: &TriMesh, t: usize, x: Point) -> f64 {
        let l = barycentric(mesh, t, x);
        let v = self.local(mesh, t);
        (0..3).map(|i| v[i] * (1.0 - 2.0 * l[i])).sum()
    }
}

impl CellField {
    pub fn constant(mesh: &TriMesh, c: f64) -> Self {
        Self(vec![c; mesh.n_triangles()])
    }
}

impl CellVecField {
    pub fn zeros(mesh: &TriMesh) -> Self {
        Self(vec![[0.0; 2]; mesh.n_triangles()])
    }

    pub fn norms(&self) -> CellField {
        CellField(self.0.iter().map(|v| v[0].hypot(v[1])).collect())
    }
}

/// Barycentric coordinates of `x` with respect to triangle `t`.
pub fn barycentric(mesh: &TriMesh, t: usize, x: Point) -> [f64; 3] {
    let c = mesh.centroids[t];
    let g = &mesh.grad_lambda[t];
    std::array::from_fn(|i| 1.0 / 3.0 + g[i][0] * (x[0] - c[0]) + g[i][1] * (x[1] - c[1]))
}

/// Per-triangle gradient of the local affine function (exact).
pub fn broken_gradient(mesh: &TriMesh, w: &CrField) -> CellVecField {
    CellVecField(
        (0..mesh.n_triangles())
            .map(|t| {
                let v = w.local(mesh, t);
                let mut g = [0.0; 2];
                for (i, vi) in v.iter().enumerate() {
                    let b = mesh.cr_basis_grad(t, i);
                    g[0] += vi * b[0];
                    g[1] += vi * b[1];
                }
                g
            })
            .collect(),
    )
}

/// Per-triangle rotated gradient `(∂w/∂x₂, −∂w/∂x₁)` of a nonconforming field.
pub fn broken_curl(mesh: &TriMesh, w: &CrField) -> CellVecField {
    CellVecField(broken_gradient(mesh, w).0.into_iter().map(|g| [g[1], -g[0]]).collect())
}

/// Mean over each triangle; for a nonconforming field, the centroid value.
pub fn project_cr(mesh: &TriMesh, w: &CrField) -> CellField {
    CellField(
        (0..mesh.n_triangles())
            .map(|t| {
                let v = w.local(mesh, t);
                (v[0] + v[1] + v[2]) / 3.0
            })
            .collect(),
    )
}

/// Per-triangle mean of a function, by the degree-5 rule.
pub fn project_fn(mesh: &TriMesh, f: impl Fn(Point) -> f64) -> CellField {
    let rule = TriangleRule::degree5();
    CellField(
        (0..mesh.n_triangles())
            .map(|t| {
                let s: f64 = rule.on(&mesh.tri_points(t)).map(|(x, w)| w * f(x)).sum();
                s / mesh.areas[t]
            })
            .collect(),
    )
}

/// Per-triangle mean of a vector function, by the degree-5 rule.
pub fn project_vec_fn(mesh: &TriMesh, f: impl Fn(Point) -> [f64; 2]) -> CellVecField {
    let rule = TriangleRule::degree5();
    CellVecField(
        (0..mesh.n_triangles())
            .map(|t| {
                let mut s = [0.0; 2];
                for (x, w) in rule.on(&mesh.tri_points(t)) {
                    let v = f(x);
                    s[0] += w * v[0];
                    s[1] += w * v[1];
                }
                [s[0] / mesh.areas[t], s[1] / mesh.areas[t]]
            })
            .collect(),
    )
}

/// Sample `f` at interior edge midpoints.
pub fn interpolate_cr(mesh: &TriMesh, f: impl Fn(Point) -> f64) -> CrField {
    CrField(mesh.dof_edges.iter().map(|&e| f(mesh.edges[e].midpoint)).collect())
}

/// Sample `f` at vertices, forcing zero on the boundary.
pub fn interpolate_p1(mesh: &TriMesh, f: impl Fn(Point) -> f64) -> P1Field {
    P1Field(mesh.vertices.iter().zip(&mesh.boundary_vertex).map(|(&p, &b)| if b { 0.0 } else { f(p) }).collect())
}

/// Diagonal of the nonconforming mass matrix: `Σ_{σ ∋ e} |σ|/3`.
pub fn cr_mass_diagonal(mesh: &TriMesh) -> Vec<f64> {
    let mut d = vec![0.0; mesh.n_dofs()];
    for t in 0..mesh.n_triangles() {
        for k in mesh.tri_dofs(t).into_iter().flatten() {
            d[k] += mesh.areas[t] / 3.0;
        }
    }
    d
}

/// Exact `(u, v)` in L²(Ω) of two nonconforming fields.
pub fn cr_mass_apply(mesh: &TriMesh, u: &CrField, v: &CrField) -> Result<f64> {
    if u.0.len() != mesh.n_dofs() || v.0.len() != mesh.n_dofs() {
        return Err(Error::Mesh(format!(
            "field lengths {} and {} do not match {} dofs",
            u.0.len(),
            v.0.len(),
            mesh.n_dofs()
        )));
    }
    Ok(cr_mass_diagonal(mesh).iter().zip(&u.0).zip(&v.0).map(|((m, a), b)| m * a * b).sum())
}

/// Exact `(g, φ_e)` for a piecewise constant `g`, for every dof `e`.
pub fn cell_load(mesh: &TriMesh, g: &CellField) -> Vec<f64> {
    let mut b = vec![0.0; mesh.n_dofs()];
    for t in 0..mesh.n_triangles() {
        for k in mesh.tri_dofs(t).into_iter().flatten() {
            b[k] += g.0[t] * mesh.areas[t] / 3.0;
        }
    }
    b
}

/// `(v, ∇_h φ_e)` for a piecewise constant vector field `v`.
pub fn divergence_load(mesh: &TriMesh, v: &CellVecField) -> Vec<f64> {
    let mut b = vec![0.0; mesh.n_dofs()];
    for t in 0..mesh.n_triangles() {
        for (i, d) in mesh.tri_dofs(t).into_iter().enumerate() {
            if let Some(k) = d {
                let g = mesh.cr_basis_grad(t, i);
                b[k] += mesh.areas[t] * (v.0[t][0] * g[0] + v.0[t][1] * g[1]);
            }
        }
    }
    b
}

/// Sparsity pattern of nonconforming element matrices.
pub fn cr_pattern(mesh: &TriMesh) -> SymPattern {
    let elems: Vec<_> = (0..mesh.n_triangles()).map(|t| mesh.tri_dofs(t)).collect();
    SymPattern::from_elements(mesh.n_dofs(), &elems)
}

/// Element matrix `coef |σ| ∇φ_i·∇φ_j` for the nonconforming basis.
pub fn cr_element_stiffness(mesh: &TriMesh, t: usize, coef: f64) -> [[f64; 3]; 3] {
    let g: [[f64; 2]; 3] = std::array::from_fn(|i| mesh.cr_basis_grad(t, i));
    let s = coef * mesh.areas[t];
    std::array::from_fn(|i| std::array::from_fn(|j| s * (g[i][0] * g[j][0] + g[i][1] * g[j][1])))
}

/// Assemble `(coef ∇_h u, ∇_h v)` into `pattern`. Coefficients must be positive.
pub fn weighted_stiffness_assemble(mesh: &TriMesh, pattern: &SymPattern, coef: &CellField) -> Result<SymCsc> {
    let mut m = pattern.zeros();
    for (t, &c) in coef.0.iter().enumerate() {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Assembly(format!("coefficient {c} on triangle {t} is not positive")));
        }
        pattern.add_element(&mut m, t, &cr_element_stiffness(mesh, t, c));
    }
    Ok(m)
}

/// Vertex-to-dof map of the continuous P1 space (boundary vertices excluded).
pub fn p1_dofs(mesh: &TriMesh) -> (Vec<Option<usize>>, usize) {
    let mut next = 0;
    let map = mesh
        .boundary_vertex
        .iter()
        .map(|&b| {
            if b {
                None
            } else {
                next += 1;
                Some(next - 1)
            }
        })
        .collect();
    (map, next)
}

/// Per-triangle gradient of a continuous P1 field.
pub fn p1_gradient(mesh: &TriMesh, w: &P1Field) -> CellVecField {
    CellVecField(
        (0..mesh.n_triangles())
            .map(|t| {
                let tri = mesh.triangles[t];
                let g = &mesh.grad_lambda[t];
                let mut out = [0.0; 2];
                for i in 0..3 {
                    out[0] += w.0[tri[i]] * g[i][0];
                    out[1] += w.0[tri[i]] * g[i][1];
                }
                out
            })
            .collect(),
    )
}

/// Continuous P1 field `Ŵ` with `(∇Ŵ, ∇χ) = (∇_h w, ∇χ)` for all `χ` in P1₀.
pub fn conforming_lift(mesh: &TriMesh, w: &CrField) -> Result<P1Field> {
    let (map, n) = p1_dofs(mesh);
    if n == 0 {
        return Ok(P1Field(vec![0.0; mesh.vertices.len()]));
    }
    let elems: Vec<[Option<usize>; 3]> = mesh.triangles.iter().map(|tri| tri.map(|v| map[v])).collect();
    let pattern = SymPattern::from_elements(n, &elems);
    let mut k = pattern.zeros();
    let gw = broken_gradient(mesh, w);
    let mut rhs = vec![0.0; n];
    for (t, dofs) in elems.iter().enumerate() {
        let g = &mesh.grad_lambda[t];
        let a = mesh.areas[t];
        let local = std::array::from_fn(|i| std::array::from_fn(|j| a * (g[i][0] * g[j][0] + g[i][1] * g[j][1])));
        pattern.add_element(&mut k, t, &local);
        for (i, d) in dofs.iter().enumerate() {
            if let Some(d) = d {
                rhs[*d] += a * (gw.0[t][0] * g[i][0] + gw.0[t][1] * g[i][1]);
            }
        }
    }
    let x = SparseCholesky::new(&pattern)?.factor(&k)?.solve(&rhs);
    Ok(P1Field(map.iter().map(|d| d.map_or(0.0, |k| x[k])).collect()))
}

/// `J = (∂w/∂x₂, −∂w/∂x₁)` per triangle of a continuous P1 field.
pub fn curl_of_lift(mesh: &TriMesh, w: &P1Field) -> CellVecField {
    CellVecField(p1_gradient(mesh, w).0.into_iter().map(|g| [g[1], -g[0]]).collect())
}

/// `‖f − w‖_{L²}` for a nonconforming field, by the degree-5 rule.
pub fn cr_l2_error(mesh: &TriMesh, w: &CrField, f: impl Fn(Point) -> f64) -> f64 {
    let rule = TriangleRule::degree5();
    (0..mesh.n_triangles())
        .map(|t| rule.on(&mesh.tri_points(t)).map(|(x, q)| q * (f(x) - w.eval_in(mesh, t, x)).powi(2)).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// `‖f − w‖_{L²}` for a continuous P1 field, by the degree-5 rule.
pub fn p1_l2_error(mesh: &TriMesh, w: &P1Field, f: impl Fn(Point) -> f64) -> f64 {
    let rule = TriangleRule::degree5();
    (0..mesh.n_triangles())
        .map(|t| {
            let tri = mesh.triangles[t];
            rule.on(&mesh.tri_points(t))
                .map(|(x, q)| {
                    let l = barycentric(mesh, t, x);
                    let wh: f64 = (0..3).map(|i| l[i] * w.0[tri[i]]).sum();
                    q * (f(x) - wh).powi(2)
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// `|v|_{0,1}` of a piecewise constant field.
pub fn cell_l1(mesh: &TriMesh, v: &CellField) -> f64 {
    v.0.iter().zip(&mesh.areas).map(|(x, a)| a * x.abs()).sum()
}

/// `|v|_{0,1}` of a piecewise constant vector field.
pub fn cell_vec_l1(mesh: &TriMesh, v: &CellVecField) -> f64 {
    v.0.iter().zip(&mesh.areas).map(|(x, a)| a * x[0].hypot(x[1])).sum()
}

/// `|π_N |w||_{0,1}`: midpoint quadrature of `|w|`.
pub fn cr_abs_l1(mesh: &TriMesh, w: &CrField) -> f64 {
    (0..mesh.n_triangles()).map(|t| mesh.areas[t] / 3.0 * w.local(mesh, t).iter().map(|v| v.abs()).sum::<f64>()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SquarePattern;

    fn unit(n: usize) -> TriMesh {
        TriMesh::square([0.0, 0.0], [1.0, 1.0], n, SquarePattern::Crossed).unwrap()
    }

    #[test]
    fn gradient_of_zero_and_affine() {
        let m = unit(4);
        assert!(broken_gradient(&m, &CrField::zeros(&m)).0.iter().all(|g| *g == [0.0, 0.0]));
        // x₁ does not vanish on ∂Ω; use the affine representation with boundary values directly.
        for t in 0..m.n_triangles() {
            let vals: [f64; 3] = std::array::from_fn(|i| m.edges[m.tri_edges[t][i]].midpoint[0]);
            let g = (0..3).fold([0.0; 2], |acc, i| {
                let b = m.cr_basis_grad(t, i);
                [acc[0] + vals[i] * b[0], acc[1] + vals[i] * b[1]]
            });
            assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_gradient_matches_symbolic_difference() {
        let m = unit(4);
        let f = |p: Point| p[0] * p[0] + p[1] * p[1];
        let w = interpolate_cr(&m, f);
        let g = broken_gradient(&m, &w);
        // Interior triangles only: all three midpoints are dofs.
        for t in (0..m.n_triangles()).filter(|&t| m.tri_dofs(t).iter().all(Option::is_some)) {
            let p = m.tri_points(t);
            let mid: [Point; 3] = std::array::from_fn(|i| {
                let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
            });
            // Affine through (mid_i, f(mid_i)): solve 2x2 system for the slope.
            let (d1, d2) =
                ([mid[1][0] - mid[0][0], mid[1][1] - mid[0][1]], [mid[2][0] - mid[0][0], mid[2][1] - mid[0][1]]);
            let (r1, r2) = (f(mid[1]) - f(mid[0]), f(mid[2]) - f(mid[0]));
            let det = d1[0] * d2[1] - d1[1] * d2[0];
            let slope = [(r1 * d2[1] - r2 * d1[1]) / det, (d1[0] * r2 - d2[0] * r1) / det];
            assert!((g.0[t][0] - slope[0]).abs() < 1e-12 && (g.0[t][1] - slope[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_of_affine_is_centroid_value() {
        let m = unit(3);
        let p = project_fn(&m, |x| 2.0 * x[0] - 3.0 * x[1] + 0.5);
        for t in 0..m.n_triangles() {
            let c = m.centroids[t];
            assert!((p.0[t] - (2.0 * c[0] - 3.0 * c[1] + 0.5)).abs() < 1e-13);
        }
        let c = project_fn(&m, |_| 7.0);
        assert!(c.0.iter().all(|v| (v - 7.0).abs() < 1e-13));
    }

    #[test]
    fn projection_of_cr_field_is_centroid_evaluation() {
        let m = unit(3);
        let w = interpolate_cr(&m, |p| (3.0 * p[0]).sin() * p[1]);
        let ph = project_cr(&m, &w);
        for t in 0..m.n_triangles() {
            assert!((ph.0[t] - w.eval_in(&m, t, m.centroids[t])).abs() < 1e-14);
        }
    }

    #[test]
    fn mass_of_single_dof() {
        let m = unit(2);
        let mut u = CrField::zeros(&m);
        let k = 3;
        u.0[k] = 1.0;
        let e = &m.edges[m.dof_edges[k]];
        let want = (m.areas[e.tris[0]] + m.areas[e.tris[1]]) / 3.0;
        assert!((cr_mass_apply(&m, &u, &u).unwrap() - want).abs() < 1e-15);
        let mut v = CrField::zeros(&m);
        v.0[k + 1] = 1.0;
        assert_eq!(cr_mass_apply(&m, &u, &v).unwrap(), 0.0);
    }

    #[test]
    fn mass_apply_matches_quadrature() {
        let m = unit(5);
        let u = interpolate_cr(&m, |p| p[0] * (1.0 - p[0]) * p[1]);
        let v = interpolate_cr(&m, |p| (p[0] + 2.0 * p[1]).cos());
        let rule = TriangleRule::degree5();
        let q: f64 = (0..m.n_triangles())
            .map(|t| rule.on(&m.tri_points(t)).map(|(x, w)| w * u.eval_in(&m, t, x) * v.eval_in(&m, t, x)).sum::<f64>())
            .sum();
        assert!((cr_mass_apply(&m, &u, &v).unwrap() - q).abs() < 1e-14);
        assert!(cr_mass_apply(&m, &u, &CrField(vec![0.0; 3])).is_err());
    }

    #[test]
    fn two_triangle_stiffness_by_hand() {
        let m = TriMesh::square([0.0, 0.0], [1.0, 1.0], 1, SquarePattern::Diagonal).unwrap();
        let p = cr_pattern(&m);
        let k = weighted_stiffness_assemble(&m, &p, &CellField::constant(&m, 1.0)).unwrap();
        // The single dof sits on the diagonal. On each half λ = ±(x₁ − x₂) for the
        // opposite vertex, so |∇φ|² = 4 · 2 over area 1/2, twice.
        assert!((p.get(&k, 0, 0) - 8.0).abs() < 1e-14);
        assert!(weighted_stiffness_assemble(&m, &p, &CellField::constant(&m, 0.0)).is_err());
    }

    #[test]
    fn lift_of_conforming_field_is_vertex_interpolant() {
        let m = unit(6);
        let g = |p: Point| p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]);
        let g_h = interpolate_p1(&m, g);
        // CR interpolant of the P1 function: midpoint values of the piecewise affine g_h.
        let w = CrField(m.dof_edges.iter().map(|&e| 0.5 * (g_h.0[m.edges[e].v[0]] + g_h.0[m.edges[e].v[1]])).collect());
        let lift = conforming_lift(&m, &w).unwrap();
        for (a, b) in lift.0.iter().zip(&g_h.0) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(conforming_lift(&m, &CrField::zeros(&m)).unwrap().0.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn curl_of_linear_patch() {
        let m = unit(2);
        let w = P1Field(m.vertices.iter().map(|p| p[1]).collect());
        assert!(curl_of_lift(&m, &w).0.iter().all(|j| (j[0] - 1.0).abs() < 1e-13 && j[1].abs() < 1e-13));
    }
}
