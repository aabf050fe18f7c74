//! Quadrature rules on intervals and triangles.
//!
//! Triangle rules are given in barycentric coordinates with weights summing
//! to one, so `∫_T f ≈ |T| Σ w_k f(x_k)`.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::mesh::Point;

/// A rule on a triangle: barycentric points and weights (sum 1).
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Edge-midpoint rule, exact for quadratics.
    pub fn midpoint() -> Self {
        Self { points: vec![[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]], weights: vec![1.0 / 3.0; 3] }
    }

    /// Seven-point degree-5 rule.
    pub fn degree5() -> Self {
        let a1 = 0.059_715_871_789_769_82;
        let b1 = 0.470_142_064_105_115_1;
        let a2 = 0.797_426_985_353_087_3;
        let b2 = 0.101_286_507_323_456_34;
        let w0 = 0.225;
        let w1 = 0.132_394_152_788_506_2;
        let w2 = 0.125_939_180_544_827_15;
        Self {
            points: vec![
                [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                [a1, b1, b1],
                [b1, a1, b1],
                [b1, b1, a1],
                [a2, b2, b2],
                [b2, a2, b2],
                [b2, b2, a2],
            ],
            weights: vec![w0, w1, w1, w1, w2, w2, w2],
        }
    }

    /// Map the rule onto a physical triangle; weights are scaled by the area.
    pub fn on(&self, p: &[Point; 3]) -> impl Iterator<Item = (Point, f64)> + '_ {
        let area = tri_area(p).abs();
        let p = *p;
        self.points.iter().zip(&self.weights).map(move |(l, w)| {
            let x =
                [l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0], l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1]];
            (x, w * area)
        })
    }
}

/// Signed area, positive for counter-clockwise vertices.
pub fn tri_area(p: &[Point; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre01(n: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n.max(1)).expect("n >= 1");
    let rule = GaussLegendre::new(n);
    rule.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
}

/// Points per direction of the collapsed rule for a requested polynomial order.
pub fn collapsed_points_for_order(order: usize) -> usize {
    (order + 3) / 2
}

/// Collapsed (Duffy) tensor Gauss rule on a triangle in barycentric form.
///
/// With `n` points per direction the rule integrates polynomials of degree
/// `2n - 2` exactly.
pub fn collapsed_rule(n: usize) -> TriangleRule {
    let g = gauss_legendre01(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            // x = p0 + u[(1 - v)(p1 - p0) + v(p2 - p0)], Jacobian 2|T| u
            points.push([1.0 - u, u * (1.0 - v), u * v]);
            weights.push(2.0 * u * wu * wv);
        }
    }
    TriangleRule { points, weights }
}
