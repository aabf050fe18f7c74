use std::fmt;

/// Relative changes recorded for one fixed-point iterate.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct IterResidual {
    pub m: usize,
    pub rel_w: f64,
    pub rel_q: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("linear algebra error: {0}")]
    Linear(String),
    #[error("{0}")]
    NonConvergence(Box<NonConvergence>),
    #[error("reference validation failed: {0}")]
    ReferenceValidation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug)]
pub struct NonConvergence {
    pub step: usize,
    pub iterations: usize,
    pub history: Vec<IterResidual>,
}

impl fmt::Display for NonConvergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.history.last();
        write!(
            f,
            "step {} did not converge in {} iterations (last rel_w = {:.3e}, rel_q = {:.3e})",
            self.step,
            self.iterations,
            last.map_or(f64::NAN, |r| r.rel_w),
            last.map_or(f64::NAN, |r| r.rel_q)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
