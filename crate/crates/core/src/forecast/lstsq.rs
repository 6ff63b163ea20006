//! Minimum-norm least squares, solved through the Gram system.
//!
//! Rank-deficient systems (constant predictors, duplicated columns) get the
//! minimum-norm solution instead of an error, which keeps fitting total: any
//! design matrix yields coefficients.
//!
//! The minimizer is computed as `x = G⁺ Aᵀb` with `G = AᵀA`: the minimum-norm
//! solution always lies in the row space of `A`, which is exactly the range
//! of `G`, so pseudo-inverting the small symmetric `k×k` Gram matrix (via its
//! eigendecomposition) recovers it. Design matrices here are narrow — a few
//! predecessor columns plus an intercept — so squaring the condition number
//! costs nothing measurable, and the symmetric eigensolver is robust where
//! the general iterative SVD loses accuracy on tall degenerate inputs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue cutoff under which Gram directions are treated as
/// null space.
const RCOND: f64 = 1e-12;

/// Solve `min ||A x - b||` for the minimum-norm `x`.
///
/// `rows` are the rows of `A`; every row must have the same width and match
/// `targets` in count.
pub fn solve_least_squares(rows: &[Vec<f64>], targets: &[f64]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("least squares needs at least one row".into()));
    }
    let n = rows.len();
    let k = rows[0].len();
    if k == 0 {
        return Err(Error::EmptyInput("least squares needs at least one column".into()));
    }
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::Config("design matrix rows have unequal widths".into()));
    }
    if targets.len() != n {
        return Err(Error::Config(format!(
            "design matrix has {n} rows but {} targets",
            targets.len()
        )));
    }

    let a = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(targets);
    let gram = a.transpose() * &a;
    let rhs = a.transpose() * b;
    let eig = SymmetricEigen::new(gram);
    let lambda_max = eig.eigenvalues.iter().fold(0.0_f64, |acc, &l| acc.max(l));
    if lambda_max <= 0.0 {
        // A is the zero matrix: the minimum-norm minimizer is x = 0.
        return Ok(vec![0.0; k]);
    }
    let cutoff = lambda_max * RCOND;
    let mut x = DVector::zeros(k);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let v = eig.eigenvectors.column(i);
            x += v * (v.dot(&rhs) / lambda);
        }
    }
    Ok(x.iter().copied().collect())
}
