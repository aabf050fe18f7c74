//! Running one configured experiment, and sweeps over the mesh size.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{RunConfig, SCHEMA_VERSION};
use super::output::{self, VtkData};
use crate::analytic::{validate_thinfilm_reference, Reference, ReferenceFields, RelativeErrors, ThinFilmValidation};
use crate::biot_savart::{assemble_nonlocal_form, pairwise_cached};
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::models::{FormKind, ProblemCase, TimePartition};
use crate::solver::{run, IterRecord, RunOutput, SolverParams, StepRecord, TimeForm};

/// Mesh size and grid of the thin-film reference cross-check.
pub const THINFILM_CHECK_H: f64 = 0.015;
pub const THINFILM_CHECK_GRID: usize = 20;
pub const THINFILM_CHECK_RHO_MAX: f64 = 0.95;

/// Settings that come from the command line rather than the config file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub trace: bool,
    pub emit_vtk: bool,
    /// Directory for the nonlocal pair tables; `None` uses the system temp dir.
    pub cache_dir: Option<PathBuf>,
}

impl RunOptions {
    /// Flags from the environment: `QVI_CACHE_DIR`.
    pub fn from_env() -> Self {
        Self { cache_dir: std::env::var_os("QVI_CACHE_DIR").map(PathBuf::from), ..Self::default() }
    }
}

/// A validated configuration with its mesh built.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: RunConfig,
    pub case: ProblemCase,
    pub mesh: TriMesh,
    pub time: TimePartition,
}

impl Experiment {
    /// Every failure here is a configuration error.
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mesh = config.mesh.build().map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(format!("mesh: {other}")),
        })?;
        let time = config.time_partition()?;
        Ok(Self { case: config.case.to_case(), mesh, time, config })
    }

    pub fn out_dir(&self, opts: &RunOptions) -> PathBuf {
        opts.out
            .clone()
            .or_else(|| self.config.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(self.case.name()))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeshSummary {
    pub h: Option<f64>,
    pub h_max: f64,
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub n_dofs: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TimeSummary {
    pub steps: Vec<f64>,
    pub t_end: f64,
    /// Time the computed flux is compared at.
    pub t_q: f64,
}

/// Wall times in seconds. `solve_secs` excludes all assembly.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Timing {
    pub nonlocal_assembly_secs: f64,
    pub assembly_secs: f64,
    pub solve_secs: f64,
    pub wall_secs: f64,
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub case: String,
    pub mesh: MeshSummary,
    pub time: TimeSummary,
    pub solver: SolverParams,
    /// Relative L¹ errors against the closed-form reference, when one applies.
    pub errors: Option<RelativeErrors>,
    pub iterations: Vec<usize>,
    pub timing: Timing,
    pub energy_defect_max: f64,
    pub constitutive_residual_max: f64,
    pub bounded_slope_max: f64,
    pub reference_validation: Option<ThinFilmValidation>,
    pub steps: Vec<StepRecord>,
}

/// Result of a successful run.
#[derive(Debug)]
pub struct Outcome {
    pub summary: Summary,
    pub output: RunOutput,
    pub reference: Option<ReferenceFields>,
    pub out_dir: PathBuf,
}

/// Solve, compare with the reference and write the artifacts.
///
/// On non-convergence the iteration trace is still written before the
/// error is returned. A failed thin-film reference cross-check is an error
/// too, after all outputs are written.
pub fn execute(exp: &Experiment, opts: &RunOptions) -> Result<Outcome> {
    let start = Instant::now();
    let mesh = &exp.mesh;
    let cfg = &exp.config;
    let dir = exp.out_dir(opts);
    std::fs::create_dir_all(&dir)?;

    let mut nonlocal_secs = 0.0;
    let form = match exp.case.form() {
        FormKind::Mass => TimeForm::mass(mesh),
        FormKind::Nonlocal => {
            let t0 = Instant::now();
            let cache = cfg.nonlocal.cache.then(|| opts.cache_dir.clone().unwrap_or_else(default_cache_dir));
            let pairs = pairwise_cached(mesh, cfg.nonlocal.quad_order, cache.as_deref())?;
            let a = assemble_nonlocal_form(mesh, &pairs)?;
            nonlocal_secs = t0.elapsed().as_secs_f64();
            TimeForm::Dense(a.a)
        }
    };
    let prepared = exp.case.prepare(mesh)?;
    let mut iters: Vec<IterRecord> = Vec::new();
    let result = run(mesh, &prepared, &form, &exp.time, &cfg.solver, &mut |r| iters.push(*r));
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            output::write(&dir, "trace.jsonl", &output::trace_jsonl(&iters, &[]))?;
            return Err(e);
        }
    };

    let reference = Reference::for_case(&exp.case, mesh);
    let (errors, ref_fields) = match &reference {
        Some(r) => {
            let fields = r.fields(mesh, out.t_end, out.t_q)?;
            (Some(r.relative_errors(mesh, &out)?), Some(fields))
        }
        None => (None, None),
    };
    let reference_validation = match &reference {
        Some(Reference::ThinFilm(f)) => Some(validate_thinfilm_reference(
            f,
            out.t_end,
            THINFILM_CHECK_H * f.radius,
            THINFILM_CHECK_GRID,
            THINFILM_CHECK_GRID,
            THINFILM_CHECK_RHO_MAX * f.radius,
        )?),
        _ => None,
    };

    let steps = &out.steps;
    let max = |f: fn(&StepRecord) -> f64| steps.iter().map(f).fold(0.0, f64::max);
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        case: exp.case.name().to_string(),
        mesh: MeshSummary {
            h: cfg.mesh.h(),
            h_max: mesh.h_max,
            n_vertices: mesh.vertices.len(),
            n_triangles: mesh.n_triangles(),
            n_dofs: mesh.n_dofs(),
        },
        time: TimeSummary { steps: cfg.time.steps.clone(), t_end: out.t_end, t_q: out.t_q },
        solver: cfg.solver.clone(),
        errors,
        iterations: steps.iter().map(|s| s.iterations).collect(),
        timing: Timing {
            nonlocal_assembly_secs: nonlocal_secs,
            assembly_secs: steps.iter().map(|s| s.assembly_secs).sum(),
            solve_secs: steps.iter().map(|s| s.solve_secs).sum(),
            wall_secs: start.elapsed().as_secs_f64(),
        },
        energy_defect_max: max(|s| s.energy_defect),
        constitutive_residual_max: max(|s| s.constitutive_residual),
        bounded_slope_max: max(|s| s.bounded_slope),
        reference_validation,
        steps: out.steps.clone(),
    };

    write_fields(&dir, mesh, &out, ref_fields.as_ref(), exp.case.form() == FormKind::Nonlocal)?;
    if opts.trace || cfg.output.trace {
        output::write(&dir, "trace.jsonl", &output::trace_jsonl(&iters, &out.steps))?;
    }
    if opts.emit_vtk || cfg.output.emit_vtk {
        let mut data = vec![VtkData::Scalar("w", &out.phw), VtkData::Vector("q", &out.q), VtkData::Scalar("m", &out.m)];
        if exp.case.form() == FormKind::Nonlocal {
            data.push(VtkData::Vector("j", &out.j));
        }
        output::write(&dir, "fields.vtk", &output::vtk(mesh, exp.case.name(), &data))?;
    }
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    output::write(&dir, "summary.json", &(json + "\n"))?;
    if let Some(v) = summary.reference_validation.as_ref().filter(|v| !v.passed) {
        return Err(Error::ReferenceValidation(format!(
            "thin-film reference cross-check: e-field {:.3e}, shielding {:.3e} (tolerance {:.1e})",
            v.rel_l1_e, v.shielding_defect, v.tolerance
        )));
    }
    Ok(Outcome { summary, output: out, reference: ref_fields, out_dir: dir })
}

fn default_cache_dir() -> PathBuf {
    std::env::temp_dir().join("qvi-fem-cache")
}

fn write_fields(dir: &Path, mesh: &TriMesh, out: &RunOutput, r: Option<&ReferenceFields>, with_j: bool) -> Result<()> {
    output::write(dir, "fields_w.csv", &output::scalar_csv(mesh, "w", &out.phw))?;
    output::write(dir, "fields_q.csv", &output::vector_csv(mesh, "q", &out.q))?;
    if with_j {
        output::write(dir, "fields_j.csv", &output::vector_csv(mesh, "j", &out.j))?;
    }
    if let Some(r) = r {
        if let Some(w) = &r.w {
            output::write(dir, "ref_w.csv", &output::scalar_csv(mesh, "w", w))?;
        }
        output::write(dir, "ref_q.csv", &output::vector_csv(mesh, "q", &r.q))?;
        if let Some(j) = &r.j {
            output::write(dir, "ref_j.csv", &output::vector_csv(mesh, "j", j))?;
        }
    }
    Ok(())
}

/// One row of a mesh-size sweep.
#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub h: f64,
    pub n_triangles: usize,
    pub n_dofs: usize,
    pub errors: Option<RelativeErrors>,
    pub iterations: Vec<usize>,
    pub assembly_secs: f64,
    pub solve_secs: f64,
    pub wall_secs: f64,
}

/// Run `base` once per mesh size, each into `<out>/h_<h>`, and write
/// `study.csv` and `study.json` to `out`. Runs proceed in parallel when
/// `parallel` is set.
pub fn convergence_study(
    base: &RunConfig,
    hs: &[f64],
    out: &Path,
    parallel: bool,
    opts: &RunOptions,
) -> Result<Vec<StudyRow>> {
    if hs.is_empty() {
        return Err(Error::Config("a study needs at least one mesh size".into()));
    }
    let exps: Vec<Experiment> = hs
        .iter()
        .map(|&h| {
            let mut c = base.clone();
            c.mesh = base.mesh.with_h(h)?;
            Experiment::new(c)
        })
        .collect::<Result<_>>()?;
    let one = |(h, exp): (&f64, &Experiment)| -> Result<StudyRow> {
        let o = RunOptions { out: Some(out.join(format!("h_{h}"))), ..opts.clone() };
        let res = execute(exp, &o)?;
        let s = &res.summary;
        Ok(StudyRow {
            h: *h,
            n_triangles: s.mesh.n_triangles,
            n_dofs: s.mesh.n_dofs,
            errors: s.errors,
            iterations: s.iterations.clone(),
            assembly_secs: s.timing.assembly_secs + s.timing.nonlocal_assembly_secs,
            solve_secs: s.timing.solve_secs,
            wall_secs: s.timing.wall_secs,
        })
    };
    let rows: Vec<StudyRow> = if parallel {
        hs.par_iter().zip(exps.par_iter()).map(one).collect::<Result<_>>()?
    } else {
        hs.iter().zip(exps.iter()).map(one).collect::<Result<_>>()?
    };
    std::fs::create_dir_all(out)?;
    output::write(out, "study.csv", &study_csv(&rows))?;
    output::write(out, "study.json", &(serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n"))?;
    Ok(rows)
}

pub fn study_csv(rows: &[StudyRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut s = String::from("h,n_triangles,n_dofs,delta_w,delta_q,delta_j,iterations,assembly_secs,solve_secs\n");
    for r in rows {
        let e = r.errors.unwrap_or_default();
        let its: Vec<String> = r.iterations.iter().map(usize::to_string).collect();
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{:.3},{:.3}\n",
            r.h,
            r.n_triangles,
            r.n_dofs,
            opt(e.w),
            r.errors.map_or(String::new(), |e| e.q.to_string()),
            opt(e.j),
            its.join(" "),
            r.assembly_secs,
            r.solve_secs
        ));
    }
    s
}
