//! Projection of the measurements onto a time-domain basis with a leading
//! constant column, plus the shift operator used to derive transition
//! matrices.

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};

/// Measurement matrix, wavenumber × timestep, finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrix(Matrix);

impl SpectralMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::Shape("spectral matrix must be non-empty".into()));
        }
        numerics::ensure_finite(&m)?;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] < 0.0 {
                    return Err(Error::Negative { row: i, col: j, value: m[(i, j)] });
                }
            }
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    /// Number of wavenumber bins.
    pub fn n_wavenumbers(&self) -> usize {
        self.0.nrows()
    }

    /// Number of timesteps.
    pub fn n_times(&self) -> usize {
        self.0.ncols()
    }
}

/// Everything the objective needs that does not depend on the transformation
/// matrix. Immutable once built.
#[derive(Debug, Clone)]
pub struct PccaContext {
    data: SpectralMatrix,
    /// m × r, orthonormal columns, column 0 constant.
    basis: Matrix,
    /// r × r shift operator `pinv(U₋) · U₊`.
    shift: Matrix,
    /// n × r product `M · U`, so that `W = M U A⁻ᵀ` needs no pseudoinverse.
    projected: Matrix,
}

impl PccaContext {
    pub fn data(&self) -> &SpectralMatrix {
        &self.data
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn shift(&self) -> &Matrix {
        &self.shift
    }

    pub fn projected(&self) -> &Matrix {
        &self.projected
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

pub fn drop_first_row(a: &Matrix) -> Result<Matrix> {
    if a.nrows() < 2 {
        return Err(Error::Shape(format!("cannot drop a row from a {}-row matrix", a.nrows())));
    }
    Ok(a.rows(1, a.nrows() - 1).clone_owned())
}

pub fn drop_last_row(a: &Matrix) -> Result<Matrix> {
    if a.nrows() < 2 {
        return Err(Error::Shape(format!("cannot drop a row from a {}-row matrix", a.nrows())));
    }
    Ok(a.rows(0, a.nrows() - 1).clone_owned())
}

/// Builds the rank-`r` context for `data`.
///
/// Every column of `Mᵀ` (one wavenumber over time) is centered by its mean,
/// the leading `r − 1` left singular vectors of the centered matrix are
/// appended to the constant vector, and the result is orthonormalized left to
/// right. `r = 1` yields the constant basis alone.
pub fn build_context(data: &SpectralMatrix, rank: usize) -> Result<PccaContext> {
    let m = data.matrix();
    let (n, times) = (m.nrows(), m.ncols());
    if rank == 0 {
        return Err(Error::config("rank", "must be at least 1"));
    }
    if rank > n.min(times) || times < rank + 1 {
        return Err(Error::RankTooHigh { requested: rank, achievable: n.min(times.saturating_sub(1)).max(1) });
    }

    let mut basis = Matrix::from_element(times, rank, 1.0);
    if rank > 1 {
        let mut centered = m.transpose();
        for mut col in centered.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        let dec = numerics::svd(&centered)?;
        let numerical_rank = dec.numerical_rank(numerics::default_pinv_rtol(&centered));
        if rank - 1 > numerical_rank {
            return Err(Error::RankTooHigh { requested: rank, achievable: numerical_rank + 1 });
        }
        basis.columns_mut(1, rank - 1).copy_from(&dec.u.columns(0, rank - 1));
    }
    let basis = numerics::orthonormalize(&basis)?;

    let shift = numerics::pinv_default(&drop_last_row(&basis)?)? * drop_first_row(&basis)?;
    let projected = m * &basis;
    Ok(PccaContext { data: data.clone(), basis, shift, projected })
}
