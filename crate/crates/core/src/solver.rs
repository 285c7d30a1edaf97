//! Linear solvers for `x = A·x + b` with `A` substochastic.

use std::ops::{Add, Div, Mul, Sub};

use num_rational::BigRational;
use num_traits::{One, Zero};

/// Field the elimination runs over.
pub(crate) trait Scalar:
    Clone
    + Zero
    + One
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    /// Rough working-memory cost of one stored matrix entry.
    const ENTRY_BYTES: usize;

    fn pivot_usable(&self) -> bool;
}

impl Scalar for f64 {
    const ENTRY_BYTES: usize = 32;

    fn pivot_usable(&self) -> bool {
        *self > f64::EPSILON
    }
}

impl Scalar for BigRational {
    const ENTRY_BYTES: usize = 96;

    fn pivot_usable(&self) -> bool {
        !self.is_zero()
    }
}

pub(crate) type SparseRow<S> = Vec<(usize, S)>;

/// Gaussian elimination in row order without pivoting, then back
/// substitution. Rows must be sorted by column. Returns `None` when the
/// fill-in exceeds `budget_bytes` or a pivot vanishes.
pub(crate) fn eliminate<S: Scalar>(
    mut rows: Vec<SparseRow<S>>,
    mut rhs: Vec<S>,
    budget_bytes: usize,
) -> Option<Vec<S>> {
    let n = rows.len();
    let max_entries = budget_bytes / S::ENTRY_BYTES;
    // users[k]: rows below k that still hold a coefficient for column k
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut nnz = 0usize;
    for (i, row) in rows.iter().enumerate() {
        nnz += row.len();
        for &(j, _) in row {
            if j < i {
                users[j].push(i);
            }
        }
    }
    if nnz > max_entries {
        return None;
    }

    for k in 0..n {
        let mut row_k = std::mem::take(&mut rows[k]);
        let diag = match row_k.binary_search_by_key(&k, |e| e.0) {
            Ok(pos) => {
                nnz -= 1;
                row_k.remove(pos).1
            }
            Err(_) => S::zero(),
        };
        let pivot = S::one() - diag;
        if !pivot.pivot_usable() {
            return None;
        }
        for e in &mut row_k {
            e.1 = e.1.clone() / pivot.clone();
        }
        rhs[k] = rhs[k].clone() / pivot;

        for i in std::mem::take(&mut users[k]) {
            let row_i = std::mem::take(&mut rows[i]);
            let mut merged = Vec::with_capacity(row_i.len() + row_k.len());
            let mut coef = S::zero();
            let mut a = row_i.into_iter().peekable();
            let mut b = row_k.iter().peekable();
            loop {
                let take_a = match (a.peek(), b.peek()) {
                    (None, None) => break,
                    (Some(_), None) => true,
                    (None, Some(_)) => false,
                    (Some(x), Some(y)) => x.0 <= y.0,
                };
                if take_a {
                    let (j, v) = a.next()?;
                    if j == k {
                        coef = v;
                        nnz -= 1;
                        continue;
                    }
                    // delay adding same-column terms until coef is known
                    merged.push((j, v, false));
                } else {
                    let (j, v) = b.next()?;
                    merged.push((*j, v.clone(), true));
                }
            }
            let mut out: SparseRow<S> = Vec::with_capacity(merged.len());
            for (j, v, from_pivot) in merged {
                let v = if from_pivot { coef.clone() * v } else { v };
                match out.last_mut() {
                    Some(last) if last.0 == j => last.1 = last.1.clone() + v,
                    _ => {
                        if from_pivot {
                            nnz += 1;
                            if j < i {
                                users[j].push(i);
                            }
                        }
                        out.push((j, v));
                    }
                }
            }
            rhs[i] = rhs[i].clone() + coef * rhs[k].clone();
            rows[i] = out;
        }
        rows[k] = row_k;
        if nnz > max_entries {
            return None;
        }
    }

    let mut x: Vec<S> = vec![S::zero(); n];
    for k in (0..n).rev() {
        let mut acc = rhs[k].clone();
        for (j, v) in &rows[k] {
            acc = acc + v.clone() * x[*j].clone();
        }
        x[k] = acc;
    }
    Some(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct IterationOutcome {
    pub sweeps: u64,
    pub residual: f64,
    pub converged: bool,
}

/// Gauss–Seidel from zero; stops once a sweep changes no entry by more
/// than `tol`.
pub(crate) fn gauss_seidel(
    rows: &[SparseRow<f64>],
    rhs: &[f64],
    tol: f64,
    max_sweeps: u64,
) -> (Vec<f64>, IterationOutcome) {
    let n = rows.len();
    let mut x = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        residual = 0.0;
        for i in 0..n {
            let mut acc = rhs[i];
            let mut diag = 0.0;
            for &(j, a) in &rows[i] {
                if j == i {
                    diag += a;
                } else {
                    acc += a * x[j];
                }
            }
            let next = acc / (1.0 - diag);
            residual = f64::max(residual, (next - x[i]).abs());
            x[i] = next;
        }
        if residual < tol {
            return (
                x,
                IterationOutcome {
                    sweeps,
                    residual,
                    converged: true,
                },
            );
        }
    }
    (
        x,
        IterationOutcome {
            sweeps,
            residual,
            converged: false,
        },
    )
}
