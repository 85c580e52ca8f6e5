//! Sparse action of a discretized killed generator on interior nodes.

use std::io::{self, Write};

use thiserror::Error;

use crate::io::fmt_f64;
use crate::par;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("scheme lost monotonicity: off-diagonal {value:.3e} at row {row}, col {col}")]
    NonMonotoneScheme { row: usize, col: usize, value: f64 },
    #[error("row {row} has positive sum {sum:.3e}; generator must lose mass")]
    PositiveRowSum { row: usize, sum: f64 },
}

/// CSR matrix representing the generator `L_D` restricted to interior nodes
/// (absorbing exterior deleted). Perron structure is enforced at build time:
/// off-diagonals nonnegative, row sums nonpositive.
///
/// The transpose is stored as well; left eigen-iterations and adjoint
/// propagation use it so every matvec stays a per-row sequential reduction
/// (bitwise deterministic under any parallel partition).
#[derive(Debug, Clone)]
pub struct GridOperator {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    t_row_ptr: Vec<usize>,
    t_col_idx: Vec<usize>,
    t_vals: Vec<f64>,
    diag: Vec<f64>,
}

impl GridOperator {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// `max_i |L_ii|`, the stiffness scale used to pick semigroup steps.
    pub fn diag_sup(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |m, &d| m.max(d.abs()))
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.vals[r])
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        let (_, vals) = self.row(i);
        vals.iter().sum()
    }

    /// `y = L x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let row_ptr = &self.row_ptr;
        let col_idx = &self.col_idx;
        let vals = &self.vals;
        par::fill_indexed(y, |i| {
            let r = row_ptr[i]..row_ptr[i + 1];
            col_idx[r.clone()]
                .iter()
                .zip(&vals[r])
                .map(|(&j, &v)| v * x[j])
                .sum()
        });
    }

    /// `y = L^T x`.
    pub fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let row_ptr = &self.t_row_ptr;
        let col_idx = &self.t_col_idx;
        let vals = &self.t_vals;
        par::fill_indexed(y, |i| {
            let r = row_ptr[i]..row_ptr[i + 1];
            col_idx[r.clone()]
                .iter()
                .zip(&vals[r])
                .map(|(&j, &v)| v * x[j])
                .sum()
        });
    }

    /// Discrete quadratic form `<f, L f>`; equals `<f, S f>` for the
    /// symmetric part `S = (L + L^T)/2`.
    pub fn quadratic_form(&self, f: &[f64]) -> f64 {
        let mut lf = vec![0.0; self.n];
        self.apply(f, &mut lf);
        f.iter().zip(&lf).map(|(&a, &b)| a * b).sum()
    }

    /// Coordinate-triplet text export: one `row col value` line per entry.
    pub fn write_coo<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(out, "{} {} {}", i, j, fmt_f64(v))?;
            }
        }
        Ok(())
    }

    /// Largest off-diagonal violation and largest row sum, for invariant
    /// checks.
    pub fn perron_violations(&self) -> (f64, f64) {
        let mut min_off = f64::INFINITY;
        let mut max_sum = f64::NEG_INFINITY;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut sum = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                sum += v;
                if j != i && v < min_off {
                    min_off = v;
                }
            }
            if sum > max_sum {
                max_sum = sum;
            }
        }
        (min_off.min(0.0), max_sum)
    }
}

/// Accumulates triplets, merges duplicates, and freezes a `GridOperator`
/// with its transpose.
pub struct OperatorBuilder {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl OperatorBuilder {
    pub fn new(n: usize) -> Self {
        OperatorBuilder { n, rows: vec![Vec::new(); n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.rows[i].push((j, v));
        }
    }

    /// Row-sum tolerance: tiny positive sums from rounding are clamped, real
    /// violations are errors.
    pub fn build(mut self) -> Result<GridOperator, OperatorError> {
        let n = self.n;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        let mut diag = vec![0.0; n];
        row_ptr.push(0);
        for (i, row) in self.rows.iter_mut().enumerate() {
            row.sort_unstable_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                match merged.last_mut() {
                    Some((lj, lv)) if *lj == j => *lv += v,
                    _ => merged.push((j, v)),
                }
            }
            let mut scale = 0.0f64;
            for &(_, v) in &merged {
                scale = scale.max(v.abs());
            }
            let tol = 1e-13 * scale.max(1.0);
            let mut sum = 0.0;
            for &(j, v) in &merged {
                if j != i && v < 0.0 {
                    if v < -tol {
                        return Err(OperatorError::NonMonotoneScheme { row: i, col: j, value: v });
                    }
                    continue; // rounding dust
                }
                if j == i {
                    diag[i] = v;
                }
                sum += v;
                col_idx.push(j);
                vals.push(v);
            }
            if sum > tol {
                return Err(OperatorError::PositiveRowSum { row: i, sum });
            }
            row_ptr.push(col_idx.len());
        }

        // transpose
        let mut t_row_ptr = vec![0usize; n + 1];
        for &j in &col_idx {
            t_row_ptr[j + 1] += 1;
        }
        for k in 0..n {
            t_row_ptr[k + 1] += t_row_ptr[k];
        }
        let mut cursor = t_row_ptr.clone();
        let mut t_col_idx = vec![0usize; col_idx.len()];
        let mut t_vals = vec![0.0f64; vals.len()];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = col_idx[k];
                t_col_idx[cursor[j]] = i;
                t_vals[cursor[j]] = vals[k];
                cursor[j] += 1;
            }
        }

        Ok(GridOperator {
            n,
            row_ptr,
            col_idx,
            vals,
            t_row_ptr,
            t_col_idx,
            t_vals,
            diag,
        })
    }
}
