//! Time stepping with the linearized fixed-point iteration.
//!
//! Each step solves, for `W ∈ N₀ʰ` and piecewise constant `Q`,
//!
//! ```text
//! 𝒜((W − W_prev)/τ, η) − (Q, ∇_h η) = (ℱ, η)        for all η
//! 𝔐(P^h W) |Q|^{r−2} Q + ∇_h W = 0                   on every triangle
//! ```
//!
//! by freezing `|Q|^{r−2}` at the previous iterate (smoothed by δ), solving
//! the resulting symmetric positive definite system for `W`, and updating `Q`
//! triangle by triangle. The flux is relaxed with factor `α` between
//! iterates. On convergence the unrelaxed flux is returned, so the first
//! equation holds to linear-solver accuracy.

use std::time::Instant;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IterResidual, NonConvergence, Result};
use crate::femspace::{
    broken_curl, broken_gradient, conforming_lift, cr_abs_l1, cr_element_stiffness, cr_mass_diagonal, cr_pattern,
    divergence_load, project_cr, CellField, CellVecField, CrField, P1Field,
};
use crate::linalg::{dense_cholesky_solve, dense_matvec, dot, SparseCholesky, SymPattern};
use crate::mesh::TriMesh;
use crate::models::{FormKind, Prepared, TimePartition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    /// Power-law exponent, in (1, 2).
    pub r: f64,
    /// Flux smoothing in `|v|_δ = (|v|² + δ²)^{1/2}`.
    pub delta: f64,
    /// Relaxation factor for the flux.
    pub alpha: f64,
    pub tol_w: f64,
    pub tol_q: f64,
    pub max_iters: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { r: 1.0 + 1e-9, delta: 1e-10, alpha: 1.0, tol_w: 1e-6, tol_q: 2e-5, max_iters: 10_000 }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.r > 1.0 && self.r < 2.0) {
            return bad(format!("r must lie in (1, 2), got {}", self.r));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.tol_w > 0.0 && self.tol_q > 0.0) {
            return bad("stopping tolerances must be positive".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        Ok(())
    }
}

/// The form multiplying the time derivative.
#[derive(Clone, Debug)]
pub enum TimeForm {
    /// Diagonal nonconforming mass matrix.
    Mass(Vec<f64>),
    /// Dense symmetric positive definite matrix.
    Dense(Mat<f64>),
}

impl TimeForm {
    pub fn mass(mesh: &TriMesh) -> Self {
        Self::Mass(cr_mass_diagonal(mesh))
    }

    pub fn kind(&self) -> FormKind {
        match self {
            Self::Mass(_) => FormKind::Mass,
            Self::Dense(_) => FormKind::Nonlocal,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Mass(d) => d.iter().zip(x).map(|(a, b)| a * b).collect(),
            Self::Dense(a) => dense_matvec(a.as_ref(), x),
        }
    }

    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        dot(&self.apply(x), x)
    }
}

/// Terms of the discrete energy identity
/// `‖Wⁿ‖² + ‖Wⁿ − Wⁿ⁻¹‖² + 2τ(𝔐, |Qⁿ|^r) = ‖Wⁿ⁻¹‖² + 2τ(ℱⁿ, Wⁿ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyTerms {
    pub norm_w: f64,
    pub norm_dw: f64,
    pub dissipation: f64,
    pub norm_w_prev: f64,
    pub work: f64,
}

impl EnergyTerms {
    pub fn lhs(&self) -> f64 {
        self.norm_w + self.norm_dw + self.dissipation
    }

    pub fn rhs(&self) -> f64 {
        self.norm_w_prev + self.work
    }

    /// `|lhs − rhs| / max(|lhs|, |rhs|)`, zero when both vanish.
    pub fn relative_defect(&self) -> f64 {
        let scale = self.lhs().abs().max(self.rhs().abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.lhs() - self.rhs()).abs() / scale
        }
    }
}

/// One iterate as seen by an observer.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IterRecord {
    pub step: usize,
    pub m: usize,
    pub rel_w: f64,
    pub rel_q: f64,
}

/// Everything known about one step at its start.
pub struct StepInput<'a> {
    pub step: usize,
    pub tau: f64,
    pub w_prev: &'a CrField,
    pub q_prev: &'a CellVecField,
    /// `(ℱⁿ, φ_e)` per dof.
    pub load: &'a [f64],
    /// `𝔐^{h,n}` as a function of `P^h W`.
    pub coefficient: &'a dyn Fn(&CellField) -> CellField,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub w: CrField,
    pub q: CellVecField,
    /// `𝔐^{h,n}(P^h Wⁿ)`.
    pub m: CellField,
    pub iterations: usize,
    pub history: Vec<IterResidual>,
    pub energy: EnergyTerms,
    pub assembly_secs: f64,
    pub solve_secs: f64,
}

/// `|v|^{r−2} v` with the value 0 at `v = 0`.
pub fn power_flux(v: [f64; 2], r: f64) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    if n == 0.0 {
        return [0.0, 0.0];
    }
    let s = n.powf(r - 2.0);
    [s * v[0], s * v[1]]
}

/// Frozen coefficient `|Qo|_δ^{2−r} / 𝔐` and correction
/// `[1 − |Qo|_δ^{2−r} |Qo|^{r−2}] Qo` of one triangle.
pub fn linearization(q_old: [f64; 2], m: f64, r: f64, delta: f64) -> (f64, [f64; 2]) {
    let nq = q_old[0].hypot(q_old[1]);
    let nd = nq.hypot(delta);
    let coef = nd.powf(2.0 - r) / m;
    if nq == 0.0 {
        return (coef, [0.0, 0.0]);
    }
    let f = 1.0 - (nd / nq).powf(2.0 - r);
    (coef, [f * q_old[0], f * q_old[1]])
}

/// Unrelaxed flux update
/// `Q = Qo − (|Qo|^{r−2} Qo + 𝔐⁻¹ ∇_h W) / |Qo|_δ^{r−2}` on every triangle.
pub fn flux_update(grad_w: &CellVecField, q_old: &CellVecField, m: &CellField, r: f64, delta: f64) -> CellVecField {
    CellVecField(
        q_old
            .0
            .iter()
            .zip(&grad_w.0)
            .zip(&m.0)
            .map(|((&qo, g), &mt)| {
                let (coef, corr) = linearization(qo, mt, r, delta);
                [corr[0] - coef * g[0], corr[1] - coef * g[1]]
            })
            .collect(),
    )
}

/// `α Q_new + (1 − α) Q_old`.
pub fn relax(q_new: &CellVecField, q_old: &CellVecField, alpha: f64) -> CellVecField {
    CellVecField(
        q_new
            .0
            .iter()
            .zip(&q_old.0)
            .map(|(a, b)| [alpha * a[0] + (1.0 - alpha) * b[0], alpha * a[1] + (1.0 - alpha) * b[1]])
            .collect(),
    )
}

/// Max-norm of `∇_h W + 𝔐 |Q|^{r−2} Q` and of `∇_h W`.
pub fn constitutive_residual(mesh: &TriMesh, w: &CrField, q: &CellVecField, m: &CellField, r: f64) -> (f64, f64) {
    let g = broken_gradient(mesh, w);
    let mut res: f64 = 0.0;
    let mut gmax: f64 = 0.0;
    for t in 0..mesh.n_triangles() {
        let p = power_flux(q.0[t], r);
        let v = [g.0[t][0] + m.0[t] * p[0], g.0[t][1] + m.0[t] * p[1]];
        res = res.max(v[0].hypot(v[1]));
        gmax = gmax.max(g.0[t][0].hypot(g.0[t][1]));
    }
    (res, gmax)
}

/// Largest `|∇_h W| / 𝔐` over triangles where `|Q| ≤ 1`; zero if there are none.
pub fn bounded_flux_slope(mesh: &TriMesh, w: &CrField, q: &CellVecField, m: &CellField) -> f64 {
    let g = broken_gradient(mesh, w);
    (0..mesh.n_triangles())
        .filter(|&t| q.0[t][0].hypot(q.0[t][1]) <= 1.0)
        .map(|t| g.0[t][0].hypot(g.0[t][1]) / m.0[t])
        .fold(0.0, f64::max)
}

/// Assembles and solves the per-iteration linear systems of one mesh.
pub struct Stepper<'a> {
    pub mesh: &'a TriMesh,
    pub form: &'a TimeForm,
    pattern: SymPattern,
    sparse: Option<SparseCholesky>,
}

impl<'a> Stepper<'a> {
    pub fn new(mesh: &'a TriMesh, form: &'a TimeForm) -> Result<Self> {
        let pattern = cr_pattern(mesh);
        let sparse = match form {
            TimeForm::Mass(_) => Some(SparseCholesky::new(&pattern)?),
            TimeForm::Dense(a) => {
                if a.nrows() != mesh.n_dofs() || a.ncols() != mesh.n_dofs() {
                    return Err(Error::Assembly("nonlocal matrix does not match the mesh dofs".into()));
                }
                None
            }
        };
        Ok(Self { mesh, form, pattern, sparse })
    }

    /// `(1/τ) 𝒜(x, η) + (coef ∇_h x, ∇_h η)` applied to `x`.
    pub fn system_apply(&self, tau: f64, coef: &CellField, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.form.apply(x).into_iter().map(|v| v / tau).collect();
        for t in 0..self.mesh.n_triangles() {
            let k = cr_element_stiffness(self.mesh, t, coef.0[t]);
            let d = self.mesh.tri_dofs(t);
            for a in 0..3 {
                for b in 0..3 {
                    if let (Some(i), Some(j)) = (d[a], d[b]) {
                        y[i] += k[a][b] * x[j];
                    }
                }
            }
        }
        y
    }

    /// Solve `(1/τ) 𝒜(W, η) + (coef ∇_h W, ∇_h η) = rhs(η)`.
    /// Returns the solution and the (assembly, solve) wall times.
    pub fn linear_solve(&self, tau: f64, coef: &CellField, rhs: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
        let t0 = Instant::now();
        if coef.0.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(Error::Linear("linearized coefficient is not positive".into()));
        }
        match self.form {
            TimeForm::Mass(d) => {
                let mut m = self.pattern.zeros();
                for t in 0..self.mesh.n_triangles() {
                    self.pattern.add_element(&mut m, t, &cr_element_stiffness(self.mesh, t, coef.0[t]));
                }
                let dt: Vec<f64> = d.iter().map(|v| v / tau).collect();
                self.pattern.add_diagonal(&mut m, &dt);
                let t1 = Instant::now();
                let x = self.sparse.as_ref().expect("sparse solver").factor(&m)?.solve(rhs);
                Ok((x, (t1 - t0).as_secs_f64(), t1.elapsed().as_secs_f64()))
            }
            TimeForm::Dense(a) => {
                let n = a.nrows();
                let mut s = Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)] / tau);
                for t in 0..self.mesh.n_triangles() {
                    let k = cr_element_stiffness(self.mesh, t, coef.0[t]);
                    let d = self.mesh.tri_dofs(t);
                    for p in 0..3 {
                        for q in 0..3 {
                            if let (Some(i), Some(j)) = (d[p], d[q]) {
                                s[(i, j)] += k[p][q];
                            }
                        }
                    }
                }
                let t1 = Instant::now();
                let x = dense_cholesky_solve(s.as_ref(), rhs)?;
                Ok((x, (t1 - t0).as_secs_f64(), t1.elapsed().as_secs_f64()))
            }
        }
    }

    /// Energy-identity terms for a converged pair.
    pub fn energy_terms(
        &self,
        input: &StepInput<'_>,
        w: &CrField,
        q: &CellVecField,
        m: &CellField,
        r: f64,
    ) -> EnergyTerms {
        let dw: Vec<f64> = w.0.iter().zip(&input.w_prev.0).map(|(a, b)| a - b).collect();
        let diss: f64 = (0..self.mesh.n_triangles())
            .map(|t| self.mesh.areas[t] * m.0[t] * q.0[t][0].hypot(q.0[t][1]).powf(r))
            .sum();
        EnergyTerms {
            norm_w: self.form.norm_sq(&w.0),
            norm_dw: self.form.norm_sq(&dw),
            dissipation: 2.0 * input.tau * diss,
            norm_w_prev: self.form.norm_sq(&input.w_prev.0),
            work: 2.0 * input.tau * dot(input.load, &w.0),
        }
    }

    /// Run the fixed-point iteration of one time step.
    pub fn step(
        &self,
        input: &StepInput<'_>,
        params: &SolverParams,
        observer: &mut dyn FnMut(&IterRecord),
    ) -> Result<StepOutput> {
        let mesh = self.mesh;
        let nt = mesh.n_triangles();
        let base: Vec<f64> =
            self.form.apply(&input.w_prev.0).into_iter().zip(input.load).map(|(a, l)| a / input.tau + l).collect();
        let mut w_old = input.w_prev.clone();
        let mut q_old = input.q_prev.clone();
        let mut history = Vec::new();
        let (mut t_asm, mut t_sol) = (0.0, 0.0);
        for m in 1..=params.max_iters {
            let mcoef = (input.coefficient)(&project_cr(mesh, &w_old));
            let mut coef = CellField(vec![0.0; nt]);
            let mut corr = CellVecField(vec![[0.0; 2]; nt]);
            for t in 0..nt {
                let (c, k) = linearization(q_old.0[t], mcoef.0[t], params.r, params.delta);
                coef.0[t] = c;
                corr.0[t] = k;
            }
            let rhs: Vec<f64> = base.iter().zip(divergence_load(mesh, &corr)).map(|(a, b)| a + b).collect();
            let (x, ta, ts) = self.linear_solve(input.tau, &coef, &rhs)?;
            t_asm += ta;
            t_sol += ts;
            let w_new = CrField(x);
            let g = broken_gradient(mesh, &w_new);
            let q_new = CellVecField(
                (0..nt).map(|t| [corr.0[t][0] - coef.0[t] * g.0[t][0], corr.0[t][1] - coef.0[t] * g.0[t][1]]).collect(),
            );
            let dw = CrField(w_new.0.iter().zip(&w_old.0).map(|(a, b)| a - b).collect());
            let dq = CellVecField(q_new.0.iter().zip(&q_old.0).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect());
            let rel_w = ratio(cr_abs_l1(mesh, &dw), cr_abs_l1(mesh, &w_new));
            let rel_q = ratio(crate::femspace::cell_vec_l1(mesh, &dq), crate::femspace::cell_vec_l1(mesh, &q_new));
            history.push(IterResidual { m, rel_w, rel_q });
            observer(&IterRecord { step: input.step, m, rel_w, rel_q });
            if rel_w < params.tol_w && rel_q < params.tol_q {
                let m_final = (input.coefficient)(&project_cr(mesh, &w_new));
                let energy = self.energy_terms(input, &w_new, &q_new, &m_final, params.r);
                return Ok(StepOutput {
                    w: w_new,
                    q: q_new,
                    m: m_final,
                    iterations: m,
                    history,
                    energy,
                    assembly_secs: t_asm,
                    solve_secs: t_sol,
                });
            }
            q_old = relax(&q_new, &q_old, params.alpha);
            w_old = w_new;
        }
        Err(Error::NonConvergence(Box::new(NonConvergence { step: input.step, iterations: params.max_iters, history })))
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Per-step summary.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub iterations: usize,
    pub final_rel_w: f64,
    pub final_rel_q: f64,
    pub energy: EnergyTerms,
    pub energy_defect: f64,
    pub constitutive_residual: f64,
    pub grad_max: f64,
    /// `max |∇_h W| / 𝔐` where `|Q| ≤ 1`.
    pub bounded_slope: f64,
    pub wall_secs: f64,
    pub assembly_secs: f64,
    pub solve_secs: f64,
}

/// Fields at the final time.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub w: CrField,
    pub phw: CellField,
    pub q: CellVecField,
    pub m: CellField,
    /// Time the flux is attributed to: `T − τ_N / 2`.
    pub t_q: f64,
    pub t_end: f64,
    pub lift: P1Field,
    /// Broken curl `∇_h × W`.
    pub j: CellVecField,
    pub steps: Vec<StepRecord>,
}

/// Advance from `W⁰ = π_N w⁰`, `Q⁰ = 0` over the whole partition.
pub fn run(
    mesh: &TriMesh,
    case: &Prepared,
    form: &TimeForm,
    tp: &TimePartition,
    params: &SolverParams,
    observer: &mut dyn FnMut(&IterRecord),
) -> Result<RunOutput> {
    params.validate()?;
    if form.kind() != case.case.form() {
        return Err(Error::Config(format!("{} needs a different time-derivative form", case.case.name())));
    }
    let stepper = Stepper::new(mesh, form)?;
    let mut w = case.initial_w(mesh);
    let mut q = CellVecField::zeros(mesh);
    let mut m = CellField::constant(mesh, 0.0);
    let mut steps = Vec::new();
    for n in 1..=tp.n_steps() {
        let (t_prev, t_n) = (tp.times[n - 1], tp.times[n]);
        let load = case.load(mesh, t_prev, t_n);
        let coefficient = |phw: &CellField| case.discrete_m(t_n, phw);
        let input =
            StepInput { step: n, tau: tp.tau(n), w_prev: &w, q_prev: &q, load: &load, coefficient: &coefficient };
        let start = Instant::now();
        let out = stepper.step(&input, params, observer)?;
        let wall = start.elapsed().as_secs_f64();
        let (res, gmax) = constitutive_residual(mesh, &out.w, &out.q, &out.m, params.r);
        let last = out.history.last().copied().expect("at least one iterate");
        steps.push(StepRecord {
            step: n,
            t: t_n,
            tau: tp.tau(n),
            iterations: out.iterations,
            final_rel_w: last.rel_w,
            final_rel_q: last.rel_q,
            energy: out.energy,
            energy_defect: out.energy.relative_defect(),
            constitutive_residual: res,
            grad_max: gmax,
            bounded_slope: bounded_flux_slope(mesh, &out.w, &out.q, &out.m),
            wall_secs: wall,
            assembly_secs: out.assembly_secs,
            solve_secs: out.solve_secs,
        });
        w = out.w;
        q = out.q;
        m = out.m;
    }
    let lift = conforming_lift(mesh, &w)?;
    Ok(RunOutput {
        phw: project_cr(mesh, &w),
        j: broken_curl(mesh, &w),
        t_q: tp.end() - 0.5 * tp.tau(tp.n_steps()),
        t_end: tp.end(),
        w,
        q,
        m,
        lift,
        steps,
    })
}
