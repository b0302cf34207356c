//! Hermitian positive-definite solves.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Solves are refused beyond this 2-norm condition number.
pub const MAX_CONDITION: f64 = 1e12;

/// 2-norm condition number of a Hermitian matrix, from its eigenvalues.
pub fn hermitian_condition(g: &DMatrix<Complex64>) -> f64 {
    let eig = g.clone().symmetric_eigenvalues();
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0f64), |(lo, hi), &l| (lo.min(l.abs()), hi.max(l.abs())));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Solves `G X = rhs` for Hermitian positive-definite `G` by Cholesky
/// factorization.
pub fn solve_hpd(g: &DMatrix<Complex64>, rhs: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if !g.is_square() || g.nrows() != rhs.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "system matrix {}x{}, right-hand side {}x{}",
            g.nrows(),
            g.ncols(),
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    let cond = hermitian_condition(g);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let chol = g.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(rhs))
}
