//! Inner-simplex initialization of the transformation matrix.
//!
//! The rows of the basis are points in an affine `(r−1)`-dimensional plane.
//! Picking `r` of them that span a large simplex and mapping those to the unit
//! vectors gives a starting `A` for which `U·A` is (nearly) a membership
//! matrix: exactly stochastic rows at the vertices, approximately elsewhere.

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, Vector};

const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SimplexInit {
    pub vertex_indices: Vec<usize>,
    pub a_init: Matrix,
    /// Smallest entry of `U·A` (negative when data lies outside the simplex).
    pub min_entry: f64,
    /// 2-norm condition number of `a_init`.
    pub condition: f64,
}

/// Greedy farthest-point selection of `r` simplex vertices among the rows of
/// `u` (m × r). The first vertex is the row of largest norm; each later one
/// maximizes the distance to the affine span of those already chosen. Ties go
/// to the lowest row index.
pub fn inner_simplex_indices(u: &Matrix) -> Result<Vec<usize>> {
    let (m, r) = u.shape();
    if m < r {
        return Err(Error::Shape(format!("need at least {r} rows to pick {r} vertices, got {m}")));
    }
    let rows: Vec<Vector> = (0..m).map(|i| u.row(i).transpose()).collect();

    let mut first = 0;
    for i in 1..m {
        if rows[i].norm() > rows[first].norm() {
            first = i;
        }
    }
    let mut chosen = vec![first];
    let mut directions: Vec<Vector> = Vec::with_capacity(r);

    while chosen.len() < r {
        let mut best: Option<(usize, f64, Vector)> = None;
        for (i, row) in rows.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let mut residual = row - &rows[first];
            for _pass in 0..2 {
                for q in &directions {
                    let c = q.dot(&residual);
                    residual.axpy(-c, q, 1.0);
                }
            }
            let dist = residual.norm();
            if best.as_ref().is_none_or(|(_, d, _)| dist > *d) {
                best = Some((i, dist, residual));
            }
        }
        let (idx, dist, residual) = best.expect("m >= r leaves a candidate");
        if dist < DEGENERATE_TOL {
            return Err(Error::DegenerateSimplex { chosen: chosen.len(), tol: DEGENERATE_TOL });
        }
        directions.push(residual / dist);
        chosen.push(idx);
    }
    Ok(chosen)
}

pub fn select_rows(u: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(idx.len(), u.ncols(), |i, j| u[(idx[i], j)])
}

/// `A = (u[idx, :])⁻¹`, so that the vertex rows of `u·A` are the unit vectors.
pub fn initial_transform(u: &Matrix, idx: &[usize]) -> Result<SimplexInit> {
    let r = u.ncols();
    if idx.len() != r {
        return Err(Error::Shape(format!("need {r} vertex indices, got {}", idx.len())));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= u.nrows()) {
        return Err(Error::Shape(format!("vertex index {bad} out of range")));
    }
    let vertices = select_rows(u, idx);
    let condition = condition_number(&vertices)?;
    if !condition.is_finite() || condition > 1.0 / (r as f64 * f64::EPSILON) {
        return Err(Error::Singular);
    }
    let a_init = vertices.try_inverse().ok_or(Error::Singular)?;
    let min_entry = (u * &a_init).min();
    Ok(SimplexInit { vertex_indices: idx.to_vec(), condition: condition_number(&a_init)?, a_init, min_entry })
}

pub(crate) fn condition_number(a: &Matrix) -> Result<f64> {
    let sv = numerics::svd(a)?.sigma;
    let smin = sv.min();
    Ok(if smin > 0.0 { sv.max() / smin } else { f64::INFINITY })
}
