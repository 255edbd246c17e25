//! Dense linear-algebra helpers: exact symmetrization and positive-definite
//! solves with compensated iterative refinement.
//!
//! The regularized systems solved here can reach condition numbers around
//! 1e12 (a near-rank-one embedding matrix scaled by a large regularization
//! weight), where a single Cholesky solve keeps only ~4 correct digits.
//! Refinement with an error-free residual recovers near machine-precision
//! forward error at negligible cost, since the factorization is reused.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[inline]
fn neumaier_add(sum: &mut f64, comp: &mut f64, v: f64) {
    let t = *sum + v;
    if sum.abs() >= v.abs() {
        *comp += (*sum - t) + v;
    } else {
        *comp += (v - t) + *sum;
    }
    *sum = t;
}

/// Computes r = b - A·x, accumulating each row with exact FMA product errors
/// and Neumaier summation so the residual itself carries ~2x working precision.
pub fn residual_compensated(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    let m = a.ncols();
    let mut r = DVector::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        let mut c = 0.0;
        for j in 0..m {
            let aij = a[(i, j)];
            let xj = x[j];
            let p = aij * xj;
            let e = aij.mul_add(xj, -p);
            neumaier_add(&mut s, &mut c, -p);
            neumaier_add(&mut s, &mut c, -e);
        }
        r[i] = s + c;
    }
    r
}

/// Overwrites `m` with (m + mᵀ)/2. The result is bitwise symmetric.
pub fn mirror_symmetric(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Cholesky-based solver for symmetric positive-definite systems with
/// compensated iterative refinement. The matrix is kept alongside the
/// factorization so residuals can be recomputed exactly.
pub struct SpdSolver {
    a: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl SpdSolver {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(a.clone()).ok_or_else(|| {
            Error::NumericalFailure(
                "Cholesky factorization failed; matrix not positive definite (NaN or Inf inputs?)"
                    .into(),
            )
        })?;
        Ok(Self { a, chol })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Solves A·x = b, then refines until the correction stalls at the
    /// rounding floor (at most 25 sweeps; usually 2-4).
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.chol.solve(b);
        let mut prev = f64::INFINITY;
        for _ in 0..25 {
            let r = residual_compensated(&self.a, &x, b);
            let d = self.chol.solve(&r);
            let dn = d.amax();
            if !dn.is_finite() {
                break;
            }
            x += &d;
            let xn = x.amax();
            if dn <= 2.0 * f64::EPSILON * xn || dn >= 0.5 * prev {
                break;
            }
            prev = dn;
        }
        x
    }
}
