//! Run configuration, read from TOML.
//!
//! ```toml
//! schema_version = 1
//!
//! [case]
//! kind = "cylinder"
//! k = 1.0
//! b0 = 0.05
//! ramp = 1.0
//!
//! [mesh]
//! kind = "square"
//! lo = [0.0, 0.0]
//! hi = [1.0, 1.0]
//! h = 0.02
//!
//! [time]
//! steps = [0.09, 0.01]
//!
//! [solver]
//! alpha = 1.8
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::biot_savart::DEFAULT_QUAD_ORDER;
use crate::error::{Error, Result};
use crate::mesh::{Point, SquarePattern, TriMesh};
use crate::models::{Cylinder, ProblemCase, Sandpile, ThinFilm, TimePartition};
use crate::solver::SolverParams;

pub const SCHEMA_VERSION: u32 = 1;

/// Names of the shipped presets, in the order they are listed.
pub const PRESETS: [&str; 3] = ["sandpile_cone", "cylinder_kim", "thinfilm_disc"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub case: CaseConfig,
    pub mesh: MeshSpec,
    pub time: TimeConfig,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub nonlocal: NonlocalConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CaseConfig {
    Sandpile(Sandpile),
    Cylinder(Cylinder),
    Thinfilm(ThinFilm),
}

impl CaseConfig {
    pub fn to_case(&self) -> ProblemCase {
        match self {
            Self::Sandpile(s) => ProblemCase::Sandpile(s.clone()),
            Self::Cylinder(c) => ProblemCase::Cylinder(c.clone()),
            Self::Thinfilm(f) => ProblemCase::ThinFilm(f.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshSpec {
    /// Uniform grid of `round((hi − lo) / h)` cells per side.
    Square {
        lo: Point,
        hi: Point,
        h: f64,
        #[serde(default)]
        pattern: SquarePattern,
    },
    Disc {
        #[serde(default = "unit")]
        radius: f64,
        h: f64,
    },
    /// Mesh in the plain-text format; relative paths resolve against the config file.
    File { path: PathBuf },
}

fn unit() -> f64 {
    1.0
}

impl MeshSpec {
    /// Nominal mesh size, if the description has one.
    pub fn h(&self) -> Option<f64> {
        match self {
            Self::Square { h, .. } | Self::Disc { h, .. } => Some(*h),
            Self::File { .. } => None,
        }
    }

    pub fn with_h(&self, h: f64) -> Result<Self> {
        match self {
            Self::Square { lo, hi, pattern, .. } => Ok(Self::Square { lo: *lo, hi: *hi, h, pattern: *pattern }),
            Self::Disc { radius, .. } => Ok(Self::Disc { radius: *radius, h }),
            Self::File { .. } => Err(Error::Config("a mesh file has no size to vary".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("mesh.{name} must be positive, got {v}")))
            }
        };
        match self {
            Self::Square { lo, hi, h, .. } => {
                positive("h", *h)?;
                if !(hi[0] > lo[0] && hi[1] > lo[1]) {
                    return Err(Error::Config("mesh.hi must exceed mesh.lo in both coordinates".into()));
                }
                let (nx, ny) = ((hi[0] - lo[0]) / h, (hi[1] - lo[1]) / h);
                if ((nx - ny) / nx).abs() > 1e-9 {
                    return Err(Error::Config("square meshes need equal sides".into()));
                }
                Ok(())
            }
            Self::Disc { radius, h } => {
                positive("radius", *radius)?;
                positive("h", *h)
            }
            Self::File { path } => {
                if path.is_file() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("mesh file {} does not exist", path.display())))
                }
            }
        }
    }

    pub fn build(&self) -> Result<TriMesh> {
        self.validate()?;
        match self {
            Self::Square { lo, hi, h, pattern } => {
                let n = ((hi[0] - lo[0]) / h).round().max(1.0) as usize;
                TriMesh::square(*lo, *hi, n, *pattern)
            }
            Self::Disc { radius, h } => TriMesh::disc(*radius, *h),
            Self::File { path } => {
                TriMesh::read(path).map_err(|e| Error::Config(format!("mesh file {}: {e}", path.display())))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Step lengths `τ₁, τ₂, …`, starting from t = 0.
    pub steps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlocalConfig {
    pub quad_order: usize,
    /// Keep the pair table between runs, under `QVI_CACHE_DIR`.
    pub cache: bool,
}

impl Default for NonlocalConfig {
    fn default() -> Self {
        Self { quad_order: DEFAULT_QUAD_ORDER, cache: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub trace: bool,
    pub emit_vtk: bool,
}

impl RunConfig {
    /// Parse and validate. `base` is the directory relative mesh paths resolve against.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let MeshSpec::File { path } = &mut cfg.mesh {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(dir) = &mut cfg.output.dir {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "sandpile_cone" => include_str!("../../presets/sandpile_cone.toml"),
            "cylinder_kim" => include_str!("../../presets/cylinder_kim.toml"),
            "thinfilm_disc" => include_str!("../../presets/thinfilm_disc.toml"),
            _ => return Err(Error::Config(format!("unknown preset `{name}`; known: {}", PRESETS.join(", ")))),
        };
        Self::from_toml(text, Path::new("."))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.case.to_case().validate()?;
        self.mesh.validate()?;
        self.time_partition()?;
        self.solver.validate()?;
        if self.nonlocal.quad_order == 0 {
            return Err(Error::Config("nonlocal.quad_order must be at least 1".into()));
        }
        Ok(())
    }

    pub fn time_partition(&self) -> Result<TimePartition> {
        TimePartition::from_steps(&self.time.steps).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("time.steps: {m}")),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }
}
