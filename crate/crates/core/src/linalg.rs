//! Symmetric sparse storage for element assembly, backed by faer's Cholesky.
//!
//! Matrices keep only the lower triangle in compressed-column form. The
//! pattern is fixed per mesh and every element carries a slot map, so
//! reassembly with new coefficients is a scatter into `values`.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

const NO_SLOT: usize = usize::MAX;

/// Lower-triangular CSC pattern plus per-element slot maps.
#[derive(Clone, Debug)]
pub struct SymPattern {
    pub n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// `slots[e][a][b]` locates entry (dof a, dof b) of element `e` when
    /// dof a >= dof b.
    slots: Vec<[[usize; 3]; 3]>,
    diag: Vec<usize>,
}

impl SymPattern {
    pub fn from_elements(n: usize, elems: &[[Option<usize>; 3]]) -> Self {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, c) in cols.iter_mut().enumerate() {
            c.push(i);
        }
        for el in elems {
            for a in el.iter().flatten() {
                for b in el.iter().flatten() {
                    if a >= b {
                        cols[*b].push(*a);
                    }
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for c in &mut cols {
            c.sort_unstable();
            c.dedup();
            row_idx.extend_from_slice(c);
            col_ptr.push(row_idx.len());
        }
        let find = |row: usize, col: usize| {
            let r = &row_idx[col_ptr[col]..col_ptr[col + 1]];
            col_ptr[col] + r.binary_search(&row).expect("entry in pattern")
        };
        let slots = elems
            .iter()
            .map(|el| {
                let mut s = [[NO_SLOT; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        match (el[a], el[b]) {
                            (Some(i), Some(j)) if i >= j => s[a][b] = find(i, j),
                            _ => {}
                        }
                    }
                }
                s
            })
            .collect();
        let diag = (0..n).map(|i| find(i, i)).collect();
        Self { n, col_ptr, row_idx, slots, diag }
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn zeros(&self) -> SymCsc {
        SymCsc { values: vec![0.0; self.nnz()] }
    }

    /// Add a local element matrix; only lower entries are stored.
    pub fn add_element(&self, m: &mut SymCsc, e: usize, local: &[[f64; 3]; 3]) {
        let s = &self.slots[e];
        for a in 0..3 {
            for b in 0..3 {
                if s[a][b] != NO_SLOT {
                    m.values[s[a][b]] += local[a][b];
                }
            }
        }
    }

    pub fn add_diagonal(&self, m: &mut SymCsc, d: &[f64]) {
        for (i, &v) in d.iter().enumerate() {
            m.values[self.diag[i]] += v;
        }
    }

    /// `y = A x` using the symmetric lower storage.
    pub fn matvec(&self, m: &SymCsc, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[k];
                let v = m.values[k];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    /// Entry (i, j), zero outside the pattern.
    pub fn get(&self, m: &SymCsc, i: usize, j: usize) -> f64 {
        let (r, c) = (i.max(j), i.min(j));
        let rows = &self.row_idx[self.col_ptr[c]..self.col_ptr[c + 1]];
        rows.binary_search(&r).map_or(0.0, |k| m.values[self.col_ptr[c] + k])
    }

    /// Visit each stored lower entry `(row, col, value)`.
    pub fn for_each(&self, m: &SymCsc, mut f: impl FnMut(usize, usize, f64)) {
        for j in 0..self.n {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                f(self.row_idx[k], j, m.values[k]);
            }
        }
    }

    fn symbolic(&self) -> SymbolicSparseColMat<usize> {
        SymbolicSparseColMat::new_checked(self.n, self.n, self.col_ptr.clone(), None, self.row_idx.clone())
    }
}

/// Values of a matrix over a [`SymPattern`].
#[derive(Clone, Debug)]
pub struct SymCsc {
    pub values: Vec<f64>,
}

/// Sparse Cholesky with the symbolic analysis done once per pattern.
pub struct SparseCholesky {
    pattern_symbolic: SymbolicSparseColMat<usize>,
    symbolic: SymbolicLlt<usize>,
}

impl SparseCholesky {
    pub fn new(pattern: &SymPattern) -> Result<Self> {
        let pattern_symbolic = pattern.symbolic();
        let symbolic = SymbolicLlt::try_new(pattern_symbolic.as_ref(), Side::Lower)
            .map_err(|e| Error::Linear(format!("symbolic Cholesky failed: {e:?}")))?;
        Ok(Self { pattern_symbolic, symbolic })
    }

    pub fn factor(&self, m: &SymCsc) -> Result<SparseFactor> {
        let a = SparseColMat::new(self.pattern_symbolic.clone(), m.values.clone());
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), a.as_ref(), Side::Lower)
            .map_err(|e| Error::Linear(format!("matrix is not positive definite: {e:?}")))?;
        Ok(SparseFactor { llt })
    }
}

pub struct SparseFactor {
    llt: Llt<usize, f64>,
}

impl SparseFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.llt.solve_in_place(x.as_mut());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }
}

/// Dense Cholesky solve of a symmetric positive definite matrix.
pub fn dense_cholesky_solve(a: MatRef<'_, f64>, b: &[f64]) -> Result<Vec<f64>> {
    let llt = a.llt(Side::Lower).map_err(|e| Error::Linear(format!("matrix is not positive definite: {e:?}")))?;
    let mut x = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
    llt.solve_in_place(x.as_mut());
    Ok((0..b.len()).map(|i| x[(i, 0)]).collect())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dense_matvec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let xm = Mat::<f64>::from_fn(x.len(), 1, |i, _| x[i]);
    let y = a * &xm;
    (0..a.nrows()).map(|i| y[(i, 0)]).collect()
}
