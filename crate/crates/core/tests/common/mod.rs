#![allow(dead_code)]

use qvi_fem::biot_savart::{assemble_nonlocal_form, assemble_pairwise, newtonian_potential, DEFAULT_QUAD_ORDER};
use qvi_fem::femspace::{
    barycentric, broken_gradient, cr_l2_error, cr_mass_diagonal, divergence_load, interpolate_cr, project_cr,
    CellField, CellVecField, CrField,
};
use qvi_fem::linalg::dense_cholesky_solve;
use qvi_fem::mesh::{Point, SquarePattern, TriMesh};
use qvi_fem::quadrature::TriangleRule;
use qvi_fem::solver::{power_flux, SolverParams, StepInput, Stepper, TimeForm};

pub fn unit_square(n: usize) -> TriMesh {
    TriMesh::square([0.0, 0.0], [1.0, 1.0], n, SquarePattern::Crossed).unwrap()
}

/// Result of one manufactured-solution step.
pub struct Manufactured {
    /// `E(W − W*) / E(W*)` with `E(v)² = ‖v‖²/τ + ‖∇_h v‖²`.
    pub rel_energy_error: f64,
    pub abs_energy_error: f64,
    pub iterations: usize,
}

/// One step from `W⁰ = 0, Q⁰ = 0` with `𝔐 ≡ 1` and the load chosen so that
/// `W* = π_N sin(πx) sin(πy)`, `Q* = −|∇_h W*|^{(2−r)/(r−1)} ∇_h W*` solve
/// the discrete equations exactly.
pub fn manufactured_step(n: usize, r: f64, tau: f64) -> Manufactured {
    let mesh = unit_square(n);
    let pi = std::f64::consts::PI;
    let w_star = interpolate_cr(&mesh, |x| (pi * x[0]).sin() * (pi * x[1]).sin());
    let g = broken_gradient(&mesh, &w_star);
    let expo = (2.0 - r) / (r - 1.0);
    let q_star = CellVecField(
        g.0.iter()
            .map(|v| {
                let s = v[0].hypot(v[1]).powf(expo);
                [-s * v[0], -s * v[1]]
            })
            .collect(),
    );
    // The pair satisfies ∇W* = −|Q*|^{r−2}Q* triangle by triangle.
    for (gv, q) in g.0.iter().zip(&q_star.0) {
        let p = power_flux(*q, r);
        assert!((gv[0] + p[0]).abs() + (gv[1] + p[1]).abs() <= 1e-12 * (1.0 + gv[0].abs() + gv[1].abs()));
    }
    let mass = cr_mass_diagonal(&mesh);
    let div = divergence_load(&mesh, &q_star);
    let load: Vec<f64> = (0..mesh.n_dofs()).map(|e| mass[e] * w_star.0[e] / tau - div[e]).collect();
    let form = TimeForm::mass(&mesh);
    let stepper = Stepper::new(&mesh, &form).unwrap();
    let w0 = CrField::zeros(&mesh);
    let q0 = CellVecField::zeros(&mesh);
    let coefficient = |p: &CellField| CellField(vec![1.0; p.0.len()]);
    let input = StepInput { step: 1, tau, w_prev: &w0, q_prev: &q0, load: &load, coefficient: &coefficient };
    let params = SolverParams { r, alpha: 1.0, tol_w: 1e-13, tol_q: 1e-13, max_iters: 500, ..Default::default() };
    let out = stepper.step(&input, &params, &mut |_| {}).unwrap();
    let energy = |v: &[f64]| {
        let m: f64 = v.iter().zip(&mass).map(|(a, b)| a * a * b).sum::<f64>() / tau;
        let gv = broken_gradient(&mesh, &CrField(v.to_vec()));
        let k: f64 = gv.0.iter().zip(&mesh.areas).map(|(x, a)| a * (x[0] * x[0] + x[1] * x[1])).sum();
        (m + k).sqrt()
    };
    let diff: Vec<f64> = out.w.0.iter().zip(&w_star.0).map(|(a, b)| a - b).collect();
    let abs = energy(&diff);
    Manufactured { rel_energy_error: abs / energy(&w_star.0), abs_energy_error: abs, iterations: out.iterations }
}

/// Largest off-diagonal entry of the quadrature-assembled CR mass matrix,
/// and the largest mismatch of its diagonal with `|σ|/3`, both relative.
pub fn cr_mass_by_quadrature(mesh: &TriMesh) -> (f64, f64) {
    let rule = TriangleRule::degree5();
    let mut off: f64 = 0.0;
    let mut diag: f64 = 0.0;
    for t in 0..mesh.n_triangles() {
        let p = mesh.tri_points(t);
        let a = mesh.areas[t];
        let mut m = [[0.0; 3]; 3];
        for (x, w) in rule.on(&p) {
            let l = qvi_fem::femspace::barycentric(mesh, t, x);
            let phi = [1.0 - 2.0 * l[0], 1.0 - 2.0 * l[1], 1.0 - 2.0 * l[2]];
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += w * phi[i] * phi[j];
                }
            }
        }
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i == j {
                    diag = diag.max((v - a / 3.0).abs() / a);
                } else {
                    off = off.max(v.abs() / a);
                }
            }
        }
    }
    // The global diagonal is the sum of local ones.
    let d = cr_mass_diagonal(mesh);
    assert!(d.iter().all(|&v| v > 0.0));
    (off, diag)
}

/// Observed order of `‖f − π_N f‖_{L²}` between square meshes `n` and `2n`.
pub fn interpolation_rates(ns: &[usize]) -> Vec<f64> {
    let f = |x: Point| (3.0 * x[0]).sin() * (2.0 * x[1]).cos() + x[0] * x[1] * x[1];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let m = unit_square(n);
            // Boundary edges carry no dof, so use a function vanishing on ∂Ω.
            let g = |x: Point| f(x) * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
            cr_l2_error(&m, &interpolate_cr(&m, g), g)
        })
        .collect();
    errs.windows(2).map(|e| (e[0] / e[1]).log2()).collect()
}

/// Relative asymmetry of the nonlocal matrix on a disc, and whether it factors.
pub fn nonlocal_symmetry_and_spd(h: f64) -> (f64, bool) {
    let mesh = TriMesh::disc(1.0, h).unwrap();
    let p = assemble_pairwise(&mesh, DEFAULT_QUAD_ORDER).unwrap();
    let a = assemble_nonlocal_form(&mesh, &p).unwrap().a;
    let n = a.nrows();
    let mut asym: f64 = 0.0;
    let mut big: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
            big = big.max(a[(i, j)].abs());
        }
    }
    let b = vec![1.0; n];
    (asym / big, dense_cholesky_solve(a.as_ref(), &b).is_ok())
}

/// Worst relative deviation of `R · potential(σ, x)` from `|σ|` at distance
/// `R = 100 diam(σ)` over a few triangles and directions.
pub fn monopole_deviation() -> f64 {
    let tris: [[Point; 3]; 3] = [
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        [[0.2, -0.1], [1.1, 0.3], [0.4, 0.8]],
        [[0.0, 0.0], [2.0, 0.1], [1.0, 0.2]],
    ];
    let mut worst: f64 = 0.0;
    for tri in &tris {
        let area = 0.5
            * ((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1]))
                .abs();
        let c = [(tri[0][0] + tri[1][0] + tri[2][0]) / 3.0, (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0];
        let d = |a: Point, b: Point| (a[0] - b[0]).hypot(a[1] - b[1]);
        let diam = d(tri[0], tri[1]).max(d(tri[1], tri[2])).max(d(tri[0], tri[2]));
        let r = 100.0 * diam;
        for k in 0..8 {
            let ang = 0.3 + k as f64 * std::f64::consts::PI / 4.0;
            let x = [c[0] + r * ang.cos(), c[1] + r * ang.sin()];
            let v = newtonian_potential(tri, x).unwrap();
            worst = worst.max((v * r / area - 1.0).abs());
        }
    }
    worst
}

/// Crossed square mesh with interior vertices moved by up to `0.2 h` in each
/// coordinate, from a seed.
pub fn jittered_square(n: usize, seed: u64) -> TriMesh {
    use rand::{Rng, SeedableRng};
    let base = unit_square(n);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / n as f64;
    let vertices: Vec<Point> = base
        .vertices
        .iter()
        .zip(&base.boundary_vertex)
        .map(|(p, &b)| {
            if b {
                *p
            } else {
                [p[0] + 0.2 * h * rng.random_range(-1.0..1.0), p[1] + 0.2 * h * rng.random_range(-1.0..1.0)]
            }
        })
        .collect();
    TriMesh::new(vertices, base.triangles.clone()).unwrap()
}

pub fn random_cr(mesh: &TriMesh, seed: u64) -> CrField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    CrField((0..mesh.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Index of the triangle containing `x`, by barycentric coordinates.
pub fn locate(mesh: &TriMesh, x: Point) -> usize {
    (0..mesh.n_triangles())
        .find(|&t| barycentric(mesh, t, x).iter().all(|&l| l > -1e-12))
        .expect("point inside the mesh")
}

/// Per-triangle `L^s` norms of the local affine function and of its mean.
pub fn local_norms(mesh: &TriMesh, w: &CrField, t: usize) -> ([f64; 3], [f64; 3]) {
    let rule = TriangleRule::degree5();
    let a = mesh.areas[t];
    let mean = project_cr(mesh, w).0[t].abs();
    let (mut l1, mut l2, mut linf) = (0.0, 0.0, 0.0f64);
    for (x, q) in rule.on(&mesh.tri_points(t)) {
        let v = w.eval_in(mesh, t, x);
        l2 += q * v * v;
        l1 += q * v.abs();
    }
    // An affine function takes its extremes at the vertices.
    for p in mesh.tri_points(t) {
        linf = linf.max(w.eval_in(mesh, t, p).abs());
    }
    ([l1, l2.sqrt(), linf], [a * mean, a.sqrt() * mean, mean])
}

/// Worst violation of local `L¹`, `L²`, `L^∞` contractivity of `P^h` and of
/// its idempotence, over random fields on jittered meshes.
pub fn projection_defects(seeds: std::ops::Range<u64>) -> (f64, f64) {
    let mut contract: f64 = 0.0;
    let mut idem: f64 = 0.0;
    for seed in seeds {
        let mesh = jittered_square(2 + (seed % 5) as usize, seed);
        let w = random_cr(&mesh, seed ^ 0x5eed);
        for t in 0..mesh.n_triangles() {
            let (full, mean) = local_norms(&mesh, &w, t);
            for s in 0..3 {
                contract = contract.max((mean[s] - full[s]) / full[s].max(1e-300));
            }
        }
        let c = project_cr(&mesh, &w);
        let again = qvi_fem::femspace::project_fn(&mesh, |x| c.0[locate(&mesh, x)]);
        for (a, b) in again.0.iter().zip(&c.0) {
            idem = idem.max((a - b).abs());
        }
    }
    (contract, idem)
}
