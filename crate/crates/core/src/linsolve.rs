//! Sparse direct solves for the Newton systems.

use faer::linalg::solvers::Solve;
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

/// Relative residual required of every linear solve.
pub const LINEAR_REL_TOL: f64 = 1e-10;

/// Solves `A x = b` for `A` given as `(row, col, value)` triplets (duplicates are
/// summed). One step of iterative refinement is applied if the first solve misses
/// [`LINEAR_REL_TOL`].
pub fn solve(n: usize, triplets: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != n {
        return Err(Error::Numeric(format!("rhs length {} != {n}", rhs.len())));
    }
    let t: Vec<Triplet<usize, usize, f64>> = triplets.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
        .map_err(|e| Error::Numeric(format!("sparse assembly failed: {e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::Numeric(format!("sparse LU failed: {e:?}")))?;
    let mut x = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    lu.solve_in_place(x.as_mut());
    let mut sol: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();

    let bnorm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut res = residual(n, triplets, &sol, rhs);
    let mut rel = res.iter().fold(0.0f64, |m, v| m.max(v.abs())) / bnorm;
    if rel > LINEAR_REL_TOL {
        let mut d = Mat::<f64>::from_fn(n, 1, |i, _| res[i]);
        lu.solve_in_place(d.as_mut());
        for (i, s) in sol.iter_mut().enumerate() {
            *s += d[(i, 0)];
        }
        res = residual(n, triplets, &sol, rhs);
        rel = res.iter().fold(0.0f64, |m, v| m.max(v.abs())) / bnorm;
    }
    if !rel.is_finite() || rel > LINEAR_REL_TOL {
        return Err(Error::Numeric(format!(
            "linear solve relative residual {rel:.3e} exceeds {LINEAR_REL_TOL:e}"
        )));
    }
    Ok(sol)
}

/// `b - A x`.
fn residual(n: usize, triplets: &[(usize, usize, f64)], x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = b.to_vec();
    debug_assert_eq!(r.len(), n);
    for &(i, j, v) in triplets {
        r[i] -= v * x[j];
    }
    r
}
