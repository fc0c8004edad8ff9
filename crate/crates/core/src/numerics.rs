//! Dense linear-algebra kernel.
//!
//! Matrices are plain `nalgebra` dense matrices. The SVD is delegated to
//! `faer`; everything layered on top of it (sign convention, truncated
//! pseudoinverse, matrix exponential, Gram–Schmidt) lives here.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const SVD_RECONSTRUCTION_TOL: f64 = 1e-10;

/// Thin singular value decomposition `a = u · diag(sigma) · vt`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub sigma: Vector,
    pub vt: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * &self.vt
    }

    /// Number of singular values above `rtol · sigma_max`.
    pub fn numerical_rank(&self, rtol: f64) -> usize {
        let smax = self.sigma.iter().copied().fold(0.0, f64::max);
        self.sigma.iter().filter(|&&s| s > rtol * smax && s > 0.0).count()
    }
}

pub fn ensure_finite(a: &Matrix) -> Result<()> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if !a[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Builds a matrix from row-major nested rows. Panics on ragged input.
pub fn from_rows(rows: &[&[f64]]) -> Matrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    assert!(rows.iter().all(|r| r.len() == ncols), "ragged rows");
    Matrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.norm()
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute error when `b` is zero.
pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Maximum absolute column sum.
pub fn norm_1(a: &Matrix) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Thin SVD with singular values sorted in descending order.
///
/// Each left singular vector is signed so that its largest-magnitude entry is
/// non-negative (the matching row of `vt` flips with it); the first index wins
/// on magnitude ties.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    ensure_finite(a)?;
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    let fa = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let dec = fa.thin_svd().map_err(|_| Error::SvdNoConvergence)?;
    let (fu, fs, fv) = (dec.U(), dec.S().column_vector(), dec.V());
    let mut u = Matrix::from_fn(rows, k, |i, j| fu[(i, j)]);
    let sigma = Vector::from_fn(k, |i, _| fs[i]);
    let mut vt = Matrix::from_fn(k, cols, |i, j| fv[(j, i)]);
    for j in 0..sigma.len() {
        let mut pivot = 0.0_f64;
        for &x in u.column(j).iter() {
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        if pivot < 0.0 {
            u.column_mut(j).neg_mut();
            vt.row_mut(j).neg_mut();
        }
    }
    let out = SvdResult { u, sigma, vt };
    if relative_error(&out.reconstruct(), a) > SVD_RECONSTRUCTION_TOL {
        return Err(Error::SvdNoConvergence);
    }
    Ok(out)
}

/// Default relative truncation tolerance for [`pinv`]: `max(rows, cols) · eps`.
pub fn default_pinv_rtol(a: &Matrix) -> f64 {
    a.nrows().max(a.ncols()) as f64 * f64::EPSILON
}

/// Moore–Penrose pseudoinverse. Singular values `≤ rtol · sigma_max` are
/// treated as zero.
pub fn pinv(a: &Matrix, rtol: f64) -> Result<Matrix> {
    let dec = svd(a)?;
    let smax = dec.sigma.iter().copied().fold(0.0, f64::max);
    let cutoff = rtol * smax;
    // A† = V · diag(1/σ) · Uᵀ over the retained singular triplets.
    let mut v_scaled = dec.vt.transpose();
    for (j, &s) in dec.sigma.iter().enumerate() {
        let inv = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        v_scaled.column_mut(j).scale_mut(inv);
    }
    Ok(v_scaled * dec.u.transpose())
}

/// [`pinv`] with [`default_pinv_rtol`].
pub fn pinv_default(a: &Matrix) -> Result<Matrix> {
    pinv(a, default_pinv_rtol(a))
}

const EXPM_TAYLOR_DEGREE: usize = 10;
const EXPM_SCALED_NORM: f64 = 0.25;

/// Matrix exponential by scaling and squaring with a degree-10 Taylor
/// polynomial. The input is scaled by `2^-s` until its 1-norm is at most 1/4.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!("expm needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    ensure_finite(a)?;
    let n = a.nrows();
    let norm = norm_1(a);
    if !norm.is_finite() {
        return Err(Error::ExpmOverflow { norm });
    }
    let squarings = if norm > EXPM_SCALED_NORM { (norm / EXPM_SCALED_NORM).log2().ceil() as i32 } else { 0 };
    let scaled = a * 2f64.powi(-squarings);

    // Horner: I + X(I + X/2(I + X/3(... (I + X/10))))
    let eye = Matrix::identity(n, n);
    let mut acc = eye.clone();
    for k in (1..=EXPM_TAYLOR_DEGREE).rev() {
        acc = &eye + (&scaled * acc) / k as f64;
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    if acc.iter().any(|x| !x.is_finite()) {
        return Err(Error::ExpmOverflow { norm });
    }
    Ok(acc)
}

const ORTHO_COLLAPSE_TOL: f64 = 1e-12;

/// Modified Gram–Schmidt with one re-orthogonalization pass, left to right,
/// so the direction of column 0 is kept.
pub fn orthonormalize(u: &Matrix) -> Result<Matrix> {
    ensure_finite(u)?;
    let mut q = u.clone();
    for j in 0..q.ncols() {
        let original = q.column(j).norm();
        for _pass in 0..2 {
            for k in 0..j {
                let proj = q.column(k).dot(&q.column(j));
                let qk = q.column(k).clone_owned();
                q.column_mut(j).axpy(-proj, &qk, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if original == 0.0 || norm < ORTHO_COLLAPSE_TOL * original.max(1.0) {
            return Err(Error::RankDeficient { column: j });
        }
        q.column_mut(j).unscale_mut(norm);
    }
    Ok(q)
}

/// Pearson correlation coefficient, clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("pearson inputs differ in length ({} vs {})", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Shape("pearson needs at least two samples".into()));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::ZeroVariance);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Row-major flattening (the optimizer's parameter layout).
pub fn flatten_row_major(a: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(a[(i, j)]);
        }
    }
    out
}

pub fn unflatten_row_major(x: &[f64], rows: usize, cols: usize) -> Matrix {
    assert_eq!(x.len(), rows * cols, "flattened length mismatch");
    Matrix::from_row_slice(rows, cols, x)
}

/// Seeded matrix with entries uniform in `[-1, 1)`; shared by tests.
#[cfg(test)]
pub(crate) fn seeded_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}
