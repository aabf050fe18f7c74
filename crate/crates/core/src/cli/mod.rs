//! The `qvi-fem` command line.
//!
//! Exit codes: 0 success, 1 internal or I/O failure, 2 configuration
//! error (nothing is written), 3 non-convergence (the trace is written),
//! 4 failed reference self-check.

pub mod config;
pub mod experiment;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analytic::reference_checks;
use crate::error::{Error, Result};
use crate::mesh::{SquarePattern, TriMesh};
pub use config::RunConfig;
pub use experiment::{convergence_study, execute, Experiment, RunOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_REFERENCE: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "qvi-fem",
    version,
    about = "Crouzeix–Raviart solver for sandpile and superconductor quasi-variational inequalities"
)]
pub struct Cli {
    /// Worker threads for assembly and dense algebra (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one experiment.
    Run(RunArgs),
    /// Repeat an experiment over several mesh sizes.
    Study(StudyArgs),
    /// Generate or inspect meshes.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Self-check the analytic references.
    ValidateRefs(ValidateArgs),
    /// Print a shipped preset config.
    Preset { name: String },
}

#[derive(Args, Debug)]
pub struct Source {
    /// TOML config file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Shipped preset: sandpile_cone, cylinder_kim or thinfilm_disc.
    #[arg(long)]
    pub preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<RunConfig> {
        match (&self.config, &self.preset) {
            (Some(p), _) => RunConfig::load(p),
            (None, Some(name)) => RunConfig::preset(name),
            (None, None) => Err(Error::Config("pass --config or --preset".into())),
        }
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write `trace.jsonl` with one record per iteration.
    #[arg(long)]
    pub trace: bool,
    /// Also write `fields.vtk`.
    #[arg(long)]
    pub emit_vtk: bool,
}

#[derive(Args, Debug)]
pub struct StudyArgs {
    #[command(flatten)]
    pub source: Source,
    /// Mesh sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub h: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run the mesh sizes concurrently.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Subcommand, Debug)]
pub enum MeshCommand {
    /// Write a generated mesh in the plain-text format.
    Generate(GenerateArgs),
    /// Print size and quality statistics of a mesh file.
    Inspect { path: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MeshKind {
    Square,
    Disc,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub kind: MeshKind,
    #[arg(long)]
    pub h: f64,
    /// Lower-left corner of a square mesh.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.0, 0.0])]
    pub lo: Vec<f64>,
    /// Upper-right corner of a square mesh.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1.0, 1.0])]
    pub hi: Vec<f64>,
    #[arg(long, value_enum, default_value_t = PatternArg::Crossed)]
    pub pattern: PatternArg,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PatternArg {
    Crossed,
    Diagonal,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Disc mesh size of the thin-film cross-check.
    #[arg(long, default_value_t = experiment::THINFILM_CHECK_H)]
    pub h: f64,
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        // Fails only if a pool already exists, e.g. in tests.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::NonConvergence(_) => EXIT_NO_CONVERGENCE,
        Error::ReferenceValidation(_) => EXIT_REFERENCE,
        _ => EXIT_FAILURE,
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run(a) => {
            let exp = Experiment::new(a.source.load()?)?;
            let opts = RunOptions { out: a.out, trace: a.trace, emit_vtk: a.emit_vtk, ..RunOptions::from_env() };
            let res = execute(&exp, &opts)?;
            let s = &res.summary;
            println!(
                "{}: {} triangles, {} dofs, iterations {:?}",
                s.case, s.mesh.n_triangles, s.mesh.n_dofs, s.iterations
            );
            if let Some(e) = s.errors {
                let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.3}%", 100.0 * v));
                println!("delta(w) {}  delta(q) {}  delta(j) {}", pct(e.w), pct(Some(e.q)), pct(e.j));
            }
            println!(
                "assembly {:.2}s (nonlocal {:.2}s), solve {:.2}s, wall {:.2}s",
                s.timing.assembly_secs, s.timing.nonlocal_assembly_secs, s.timing.solve_secs, s.timing.wall_secs
            );
            println!("wrote {}", res.out_dir.display());
            Ok(EXIT_OK)
        }
        Command::Study(a) => {
            let base = a.source.load()?;
            let out = a.out.or_else(|| base.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out/study"));
            let rows = convergence_study(&base, &a.h, &out, a.parallel, &RunOptions::from_env())?;
            print!("{}", experiment::study_csv(&rows));
            Ok(EXIT_OK)
        }
        Command::Mesh(MeshCommand::Generate(a)) => {
            let mesh = generate(&a).map_err(|e| match e {
                Error::Config(m) => Error::Config(m),
                other => Error::Config(other.to_string()),
            })?;
            mesh.write(&a.out)?;
            println!("{}", inspect(&mesh));
            Ok(EXIT_OK)
        }
        Command::Mesh(MeshCommand::Inspect { path }) => {
            let mesh = read_mesh(&path)?;
            println!("{}", inspect(&mesh));
            Ok(EXIT_OK)
        }
        Command::ValidateRefs(a) => {
            if !(a.h > 0.0) {
                return Err(Error::Config("--h must be positive".into()));
            }
            let checks = reference_checks(a.h)?;
            for c in &checks {
                println!(
                    "{} {:<28} {:.3e} (< {:.1e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance
                );
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                Ok(EXIT_OK)
            } else {
                Err(Error::ReferenceValidation(failed.join(", ")))
            }
        }
        Command::Preset { name } => {
            RunConfig::preset(&name)?;
            print!("{}", preset_text(&name));
            Ok(EXIT_OK)
        }
    }
}

fn preset_text(name: &str) -> &'static str {
    match name {
        "sandpile_cone" => include_str!("../../presets/sandpile_cone.toml"),
        "cylinder_kim" => include_str!("../../presets/cylinder_kim.toml"),
        _ => include_str!("../../presets/thinfilm_disc.toml"),
    }
}

fn generate(a: &GenerateArgs) -> Result<TriMesh> {
    if !(a.h > 0.0 && a.h.is_finite()) {
        return Err(Error::Config(format!("--h must be positive, got {}", a.h)));
    }
    match a.kind {
        MeshKind::Square => {
            let pattern = match a.pattern {
                PatternArg::Crossed => SquarePattern::Crossed,
                PatternArg::Diagonal => SquarePattern::Diagonal,
            };
            let spec = config::MeshSpec::Square { lo: [a.lo[0], a.lo[1]], hi: [a.hi[0], a.hi[1]], h: a.h, pattern };
            spec.build()
        }
        MeshKind::Disc => TriMesh::disc(a.radius, a.h),
    }
}

fn read_mesh(path: &Path) -> Result<TriMesh> {
    TriMesh::read(path).map_err(|e| match e {
        Error::Config(m) => Error::Config(m),
        other => Error::Config(format!("{}: {other}", path.display())),
    })
}

/// Size and quality statistics, one `key: value` per line.
pub fn inspect(mesh: &TriMesh) -> String {
    let mut min_angle = f64::INFINITY;
    for t in 0..mesh.n_triangles() {
        let p = mesh.tri_points(t);
        for i in 0..3 {
            let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            let ang = (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1]);
            min_angle = min_angle.min(ang);
        }
    }
    let hash: String = mesh.content_hash()[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!(
        "vertices: {}\ntriangles: {}\nedges: {}\nboundary edges: {}\ndofs: {}\narea: {}\nh_max: {}\nmin angle (deg): {:.2}\nhash: {hash}",
        mesh.vertices.len(),
        mesh.n_triangles(),
        mesh.edges.len(),
        mesh.n_boundary_edges(),
        mesh.n_dofs(),
        mesh.area(),
        mesh.h_max,
        min_angle.to_degrees()
    )
}
