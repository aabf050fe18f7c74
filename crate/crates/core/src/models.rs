//! The three model problems as data.
//!
//! Each case supplies the per-triangle coefficient `𝔐^{h,n}(P^h W)`, the load
//! `(ℱⁿ, η)` over nonconforming test functions, the initial field and the
//! choice of time-derivative form (L² mass or the nonlocal form).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::femspace::{broken_gradient, cell_load, interpolate_cr, project_cr, CellField, CrField};
use crate::mesh::{Point, TriMesh};

/// Which bilinear form multiplies the time derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormKind {
    Mass,
    Nonlocal,
}

/// Cone-shaped support surface `max(height − slope |x − apex|, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cone {
    pub apex: Point,
    pub height: f64,
    pub slope: f64,
}

impl Cone {
    pub fn eval(&self, x: Point) -> f64 {
        (self.height - self.slope * (x[0] - self.apex[0]).hypot(x[1] - self.apex[1])).max(0.0)
    }
}

/// Source uniform on a disc, with total rate `total`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscSource {
    pub center: Point,
    pub radius: f64,
    pub total: f64,
}

impl DiscSource {
    pub fn density(&self) -> f64 {
        self.total / (std::f64::consts::PI * self.radius * self.radius)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sandpile {
    /// Internal friction (maximal stable slope).
    pub k0: f64,
    /// Height of the blend between the support slope and `k0`.
    pub eps: f64,
    pub support: Cone,
    pub source: DiscSource,
}

/// Kim model: `𝔐 = k / (1 + |w + b_e| / B₀)` with `b_e(t) = ramp · t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cylinder {
    pub k: f64,
    pub b0: f64,
    pub ramp: f64,
}

/// Bean model thin film: `𝔐 = k`, `b_e(t) = ramp · t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinFilm {
    pub k: f64,
    pub ramp: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemCase {
    Sandpile(Sandpile),
    Cylinder(Cylinder),
    ThinFilm(ThinFilm),
}

impl ProblemCase {
    /// The sandpile of the growing-pile experiment on (−1, 1)².
    pub fn sandpile_cone() -> Self {
        Self::Sandpile(Sandpile {
            k0: 0.4,
            eps: 0.01,
            support: Cone { apex: [0.0, 0.0], height: 0.4, slope: 1.0 },
            source: DiscSource { center: [0.0, 0.0], radius: 0.2, total: 1.0 },
        })
    }

    pub fn cylinder_kim() -> Self {
        Self::Cylinder(Cylinder { k: 1.0, b0: 0.05, ramp: 1.0 })
    }

    pub fn thinfilm_disc() -> Self {
        Self::ThinFilm(ThinFilm { k: 1.0, ramp: 1.0 })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sandpile(_) => "sandpile",
            Self::Cylinder(_) => "cylinder",
            Self::ThinFilm(_) => "thinfilm",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            Self::Sandpile(s) => {
                pos("k0", s.k0)?;
                pos("eps", s.eps)?;
                pos("source radius", s.source.radius)?;
                if !(s.source.total >= 0.0) {
                    return Err(Error::Config("source total must be nonnegative".into()));
                }
                if !(s.support.height >= 0.0 && s.support.slope >= 0.0) {
                    return Err(Error::Config("support height and slope must be nonnegative".into()));
                }
            }
            Self::Cylinder(c) => {
                pos("k", c.k)?;
                pos("b0", c.b0)?;
                if !(c.ramp >= 0.0) {
                    return Err(Error::Config("ramp must be nonnegative".into()));
                }
            }
            Self::ThinFilm(f) => {
                pos("k", f.k)?;
                if !(f.ramp >= 0.0) {
                    return Err(Error::Config("ramp must be nonnegative".into()));
                }
            }
        }
        Ok(())
    }

    pub fn form(&self) -> FormKind {
        match self {
            Self::ThinFilm(_) => FormKind::Nonlocal,
            _ => FormKind::Mass,
        }
    }

    /// External field `b_e(t)`; zero for the sandpile.
    pub fn b_e(&self, t: f64) -> f64 {
        match self {
            Self::Sandpile(_) => 0.0,
            Self::Cylinder(c) => c.ramp * t,
            Self::ThinFilm(f) => f.ramp * t,
        }
    }

    /// Precompute the mesh-dependent data of this case.
    pub fn prepare(&self, mesh: &TriMesh) -> Result<Prepared> {
        self.validate()?;
        let (aux, source) = match self {
            Self::Sandpile(s) => {
                (Some(sandpile_m_init(mesh, |x| s.support.eval(x), s.k0)), Some(disc_source_field(mesh, &s.source)))
            }
            _ => (None, None),
        };
        Ok(Prepared { case: self.clone(), aux, source })
    }
}

/// Projected support surface and slope bound per triangle.
#[derive(Clone, Debug)]
pub struct SandpileAux {
    /// `P^h π_N w₀`.
    pub w0h: CellField,
    /// `max(k₀, |∇_h π_N w₀|)`.
    pub k1: CellField,
}

pub fn sandpile_m_init(mesh: &TriMesh, w0: impl Fn(Point) -> f64, k0: f64) -> SandpileAux {
    let w = interpolate_cr(mesh, w0);
    let g = broken_gradient(mesh, &w);
    SandpileAux { w0h: project_cr(mesh, &w), k1: CellField(g.0.iter().map(|v| k0.max(v[0].hypot(v[1]))).collect()) }
}

/// Blend from `k1` (at or below the support) to `k0` (at least `eps` above it).
pub fn sandpile_m(k0: f64, eps: f64, w0h: f64, k1: f64, eta: f64) -> f64 {
    if eta >= w0h + eps {
        k0
    } else if eta <= w0h {
        k1
    } else {
        k1 + (k0 - k1) * (eta - w0h) / eps
    }
}

/// Kim critical current `k / (1 + |b| / B₀)`.
pub fn kim_m(k: f64, b0: f64, b: f64) -> f64 {
    k / (1.0 + b.abs() / b0)
}

/// Case data bound to a mesh.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub case: ProblemCase,
    pub aux: Option<SandpileAux>,
    /// Per-triangle source density, exact cell averages of the disc indicator.
    pub source: Option<CellField>,
}

impl Prepared {
    /// `𝔐^{h,n}(P^h W)` with `b_e` taken at `t_n`.
    pub fn discrete_m(&self, t_n: f64, phw: &CellField) -> CellField {
        match &self.case {
            ProblemCase::Sandpile(s) => {
                let aux = self.aux.as_ref().expect("sandpile data prepared");
                CellField(
                    phw.0
                        .iter()
                        .zip(aux.w0h.0.iter().zip(&aux.k1.0))
                        .map(|(&eta, (&w0, &k1))| sandpile_m(s.k0, s.eps, w0, k1, eta))
                        .collect(),
                )
            }
            ProblemCase::Cylinder(c) => {
                let be = self.case.b_e(t_n);
                CellField(phw.0.iter().map(|&eta| kim_m(c.k, c.b0, eta + be)).collect())
            }
            ProblemCase::ThinFilm(f) => CellField(vec![f.k; phw.0.len()]),
        }
    }

    /// Time-averaged forcing over `(t_prev, t_n)` as a cell field.
    pub fn forcing(&self, mesh: &TriMesh, t_prev: f64, t_n: f64) -> CellField {
        match &self.case {
            ProblemCase::Sandpile(_) => self.source.clone().expect("sandpile data prepared"),
            _ => {
                let rate = -(self.case.b_e(t_n) - self.case.b_e(t_prev)) / (t_n - t_prev);
                CellField::constant(mesh, rate)
            }
        }
    }

    /// `(ℱⁿ, φ_e)` for every dof.
    pub fn load(&self, mesh: &TriMesh, t_prev: f64, t_n: f64) -> Vec<f64> {
        cell_load(mesh, &self.forcing(mesh, t_prev, t_n))
    }

    /// `W⁰ = π_N w⁰`.
    pub fn initial_w(&self, mesh: &TriMesh) -> CrField {
        match &self.case {
            ProblemCase::Sandpile(s) => interpolate_cr(mesh, |x| s.support.eval(x)),
            _ => CrField::zeros(mesh),
        }
    }
}

/// Strictly increasing times `0 = t₀ < t₁ < … < t_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimePartition {
    pub times: Vec<f64>,
}

impl TimePartition {
    pub fn from_steps(steps: &[f64]) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Config("at least one time step is required".into()));
        }
        let mut times = vec![0.0];
        for &tau in steps {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::Config(format!("time steps must be positive, got {tau}")));
            }
            times.push(times.last().unwrap() + tau);
        }
        Ok(Self { times })
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn tau(&self, n: usize) -> f64 {
        self.times[n] - self.times[n - 1]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn tau_max(&self) -> f64 {
        (1..=self.n_steps()).map(|n| self.tau(n)).fold(0.0, f64::max)
    }
}

/// Exact per-triangle average of a uniform disc source.
pub fn disc_source_field(mesh: &TriMesh, src: &DiscSource) -> CellField {
    let f = src.density();
    CellField(
        (0..mesh.n_triangles())
            .map(|t| f * disc_triangle_overlap(src.center, src.radius, &mesh.tri_points(t)) / mesh.areas[t])
            .collect(),
    )
}

/// Area of the intersection of a disc with a counter-clockwise triangle.
pub fn disc_triangle_overlap(center: Point, radius: f64, tri: &[Point; 3]) -> f64 {
    let p = tri.map(|v| [v[0] - center[0], v[1] - center[1]]);
    let a: f64 = (0..3).map(|i| sector_segment_area(p[i], p[(i + 1) % 3], radius)).sum();
    let full = crate::quadrature::tri_area(tri);
    if full < 0.0 {
        (-a).clamp(0.0, -full)
    } else {
        a.clamp(0.0, full)
    }
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

// Signed area of the disc of radius r (at the origin) intersected with the
// triangle (0, a, b).
fn sector_segment_area(a: Point, b: Point, r: f64) -> f64 {
    let sector = |u: Point, v: Point| 0.5 * r * r * cross(u, v).atan2(u[0] * v[0] + u[1] * v[1]);
    let d = [b[0] - a[0], b[1] - a[1]];
    let qa = d[0] * d[0] + d[1] * d[1];
    if qa == 0.0 {
        return 0.0;
    }
    let qb = a[0] * d[0] + a[1] * d[1];
    let qc = a[0] * a[0] + a[1] * a[1] - r * r;
    let disc = qb * qb - qa * qc;
    if disc <= 0.0 {
        return sector(a, b);
    }
    let s = disc.sqrt();
    let (t1, t2) = ((-qb - s) / qa, (-qb + s) / qa);
    if t2 <= 0.0 || t1 >= 1.0 {
        return sector(a, b);
    }
    let (t1, t2) = (t1.max(0.0), t2.min(1.0));
    let p1 = [a[0] + t1 * d[0], a[1] + t1 * d[1]];
    let p2 = [a[0] + t2 * d[0], a[1] + t2 * d[1]];
    let head = if t1 > 0.0 { sector(a, p1) } else { 0.0 };
    let tail = if t2 < 1.0 { sector(p2, b) } else { 0.0 };
    head + 0.5 * cross(p1, p2) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SquarePattern;
    use std::f64::consts::PI;

    #[test]
    fn sandpile_blend_branches() {
        let (k0, eps, w0, k1) = (0.4, 0.01, 0.2, 1.0);
        assert_eq!(sandpile_m(k0, eps, w0, k1, w0 + eps), k0);
        assert_eq!(sandpile_m(k0, eps, w0, k1, w0 + 1.0), k0);
        assert_eq!(sandpile_m(k0, eps, w0, k1, w0), k1);
        assert_eq!(sandpile_m(k0, eps, w0, k1, w0 - 0.3), k1);
        assert!((sandpile_m(k0, eps, w0, k1, w0 + eps / 2.0) - 0.5 * (k0 + k1)).abs() < 1e-15);
    }

    #[test]
    fn kim_values() {
        assert_eq!(kim_m(1.0, 0.05, 0.0), 1.0);
        assert!((kim_m(1.0, 0.05, 0.05) - 0.5).abs() < 1e-15);
        assert!((kim_m(1.0, 0.05, -0.05) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn thin_film_m_ignores_field() {
        let m = TriMesh::disc(1.0, 0.3).unwrap();
        let p = ProblemCase::thinfilm_disc().prepare(&m).unwrap();
        let c = p.discrete_m(0.6, &CellField::constant(&m, -3.0));
        assert!(c.0.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_support_gives_k0() {
        let m = TriMesh::square([-1.0, -1.0], [1.0, 1.0], 4, SquarePattern::Crossed).unwrap();
        let aux = sandpile_m_init(&m, |_| 0.0, 0.4);
        assert!(aux.w0h.0.iter().all(|&v| v == 0.0));
        assert!(aux.k1.0.iter().all(|&v| v == 0.4));
    }

    #[test]
    fn cone_slope_inside_support() {
        let m = TriMesh::square([-1.0, -1.0], [1.0, 1.0], 50, SquarePattern::Crossed).unwrap();
        let cone = Cone { apex: [0.0, 0.0], height: 0.4, slope: 1.0 };
        let aux = sandpile_m_init(&m, |x| cone.eval(x), 0.4);
        for t in 0..m.n_triangles() {
            let p = m.tri_points(t);
            let rho: Vec<f64> = p.iter().map(|v| v[0].hypot(v[1])).collect();
            let (lo, hi) = (rho.iter().cloned().fold(f64::MAX, f64::min), rho.iter().cloned().fold(0.0, f64::max));
            // Edge midpoints lie within the triangle; one neighbourhood away from apex and rim
            // the interpolant is exact up to the cone's curvature.
            if lo > 0.1 && hi < 0.35 {
                assert!((aux.k1.0[t] - 1.0).abs() < 0.05, "t={t}, k1={}", aux.k1.0[t]);
            }
            if lo > 0.45 {
                assert_eq!(aux.k1.0[t], 0.4);
            }
        }
    }

    #[test]
    fn disc_overlap_limits() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!((disc_triangle_overlap([0.25, 0.25], 10.0, &tri) - 0.5).abs() < 1e-15);
        let big = [[-10.0, -10.0], [10.0, -10.0], [0.0, 10.0]];
        assert!((disc_triangle_overlap([0.0, 0.0], 1.0, &big) - PI).abs() < 1e-13);
        // Quarter disc of radius 0.5 at the right-angle corner.
        assert!((disc_triangle_overlap([0.0, 0.0], 0.5, &tri) - PI * 0.25 / 4.0).abs() < 1e-15);
        assert_eq!(disc_triangle_overlap([5.0, 5.0], 1.0, &tri), 0.0);
    }

    #[test]
    fn disc_overlap_matches_sampling() {
        let tri = [[0.1, -0.3], [0.9, 0.2], [-0.2, 0.6]];
        let (c, r) = ([0.2, 0.1], 0.45);
        let side = |p: Point, q: Point, x: Point| cross([q[0] - p[0], q[1] - p[1]], [x[0] - p[0], x[1] - p[1]]);
        let n = 1500;
        let mut hits = 0usize;
        for i in 0..n {
            for j in 0..n {
                let x = [-0.3 + 1.3 * (i as f64 + 0.5) / n as f64, -0.4 + 1.1 * (j as f64 + 0.5) / n as f64];
                let inside = (0..3).all(|k| side(tri[k], tri[(k + 1) % 3], x) >= 0.0);
                if inside && (x[0] - c[0]).hypot(x[1] - c[1]) <= r {
                    hits += 1;
                }
            }
        }
        let cell = 1.3 * 1.1 / (n * n) as f64;
        assert!((disc_triangle_overlap(c, r, &tri) - hits as f64 * cell).abs() < 2e-4);
        let cw = [tri[0], tri[2], tri[1]];
        assert!((disc_triangle_overlap(c, r, &cw) - disc_triangle_overlap(c, r, &tri)).abs() < 1e-15);
    }

    #[test]
    fn source_integrates_to_total() {
        let m = TriMesh::square([-1.0, -1.0], [1.0, 1.0], 25, SquarePattern::Crossed).unwrap();
        let src = DiscSource { center: [0.0, 0.0], radius: 0.2, total: 1.0 };
        let f = disc_source_field(&m, &src);
        let total: f64 = f.0.iter().zip(&m.areas).map(|(v, a)| v * a).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!(f.0.iter().all(|&v| v >= 0.0));
        assert!((f.0.iter().cloned().fold(0.0, f64::max) - 1.0 / (0.04 * PI)).abs() < 1e-9);
    }

    #[test]
    fn field_forcing_is_minus_ramp() {
        let m = TriMesh::square([0.0, 0.0], [1.0, 1.0], 4, SquarePattern::Crossed).unwrap();
        let p = ProblemCase::cylinder_kim().prepare(&m).unwrap();
        for (a, b) in [(0.0, 0.09), (0.09, 0.1)] {
            assert!(p.forcing(&m, a, b).0.iter().all(|&v| (v + 1.0).abs() < 1e-12));
        }
        assert!(p.initial_w(&m).0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn time_partition() {
        let tp = TimePartition::from_steps(&[0.19, 0.01]).unwrap();
        assert_eq!(tp.n_steps(), 2);
        assert!((tp.end() - 0.2).abs() < 1e-15);
        assert!((tp.tau(1) - 0.19).abs() < 1e-15);
        assert!(TimePartition::from_steps(&[0.1, 0.0]).is_err());
        assert!(TimePartition::from_steps(&[]).is_err());
    }
}
