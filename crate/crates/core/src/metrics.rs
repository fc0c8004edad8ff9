//! Recovery quality against ground truth: correlation-based matching of
//! recovered to true components, kinetics error, and feasibility deviations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};
use crate::objective::{max_column_sum_deviation, max_row_sum_deviation};

/// Largest rank for which matching is supported.
pub const MAX_MATCH_RANK: usize = 12;

/// Borrowed view of recovered factors.
#[derive(Debug, Clone, Copy)]
pub struct RecoveredFactors<'a> {
    pub w: &'a Matrix,
    pub h: &'a Matrix,
    pub p: &'a Matrix,
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub w: Matrix,
    pub h: Matrix,
    pub p: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMatch {
    /// `permutation[i]` is the true component matched to recovered component `i`.
    pub permutation: Vec<usize>,
    /// Correlation of each matched pair, in recovered order.
    pub correlations: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinEntries {
    pub w: f64,
    pub h: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlations: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kinetics_rmse: Option<Vec<f64>>,
    /// Max-entry error of `P_rec` against the permutation-aligned true `P`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max_error: Option<f64>,
    pub residual: f64,
    pub h_colsum_dev: f64,
    pub min_entries: MinEntries,
    pub p_rowsum_dev: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// `corr[i][j]` = Pearson correlation of recovered column `i` with true
/// column `j`; zero-variance pairs score −1 and add a warning.
pub fn correlation_matrix(w_rec: &Matrix, w_true: &Matrix) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    if w_rec.shape() != w_true.shape() {
        return Err(Error::Shape(format!(
            "recovered spectra are {}x{}, true spectra {}x{}",
            w_rec.nrows(),
            w_rec.ncols(),
            w_true.nrows(),
            w_true.ncols()
        )));
    }
    let r = w_rec.ncols();
    let mut warnings = Vec::new();
    let mut corr = vec![vec![0.0; r]; r];
    for (i, row) in corr.iter_mut().enumerate() {
        let a: Vec<f64> = w_rec.column(i).iter().copied().collect();
        for (j, c) in row.iter_mut().enumerate() {
            let b: Vec<f64> = w_true.column(j).iter().copied().collect();
            *c = match numerics::pearson(&a, &b) {
                Ok(v) => v,
                Err(Error::ZeroVariance) => {
                    warnings.push(format!("zero variance in pair (recovered {i}, true {j})"));
                    -1.0
                }
                Err(e) => return Err(e),
            };
        }
    }
    Ok((corr, warnings))
}

/// Bijection maximizing the summed correlation (exact, by dynamic
/// programming over subsets of true components).
pub fn optimal_assignment(score: &[Vec<f64>]) -> Vec<usize> {
    let r = score.len();
    let full = 1usize << r;
    let mut best = vec![f64::NEG_INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = 0.0;
    for mask in 0..full {
        if best[mask] == f64::NEG_INFINITY {
            continue;
        }
        let i = mask.count_ones() as usize;
        if i == r {
            continue;
        }
        for (j, &s) in score[i].iter().enumerate() {
            if mask & (1 << j) != 0 {
                continue;
            }
            let next = mask | (1 << j);
            let value = best[mask] + s;
            if value > best[next] {
                best[next] = value;
                choice[next] = j;
            }
        }
    }
    let mut perm = vec![0; r];
    let mut mask = full - 1;
    for i in (0..r).rev() {
        let j = choice[mask];
        perm[i] = j;
        mask &= !(1 << j);
    }
    perm
}

pub fn match_components(w_rec: &Matrix, w_true: &Matrix) -> Result<ComponentMatch> {
    let r = w_rec.ncols();
    if r > MAX_MATCH_RANK {
        return Err(Error::Shape(format!("matching supports up to {MAX_MATCH_RANK} components, got {r}")));
    }
    let (corr, warnings) = correlation_matrix(w_rec, w_true)?;
    let permutation = optimal_assignment(&corr);
    let correlations = permutation.iter().enumerate().map(|(i, &j)| corr[i][j]).collect();
    Ok(ComponentMatch { permutation, correlations, warnings })
}

/// True transition matrix expressed in the recovered component order.
pub fn align_transition(p_true: &Matrix, permutation: &[usize]) -> Matrix {
    let r = permutation.len();
    Matrix::from_fn(r, r, |i, j| p_true[(permutation[i], permutation[j])])
}

pub fn report(rec: RecoveredFactors<'_>, data: &Matrix, truth: Option<&GroundTruth>) -> Result<MatchReport> {
    if rec.w.nrows() != data.nrows() || rec.h.ncols() != data.ncols() || rec.w.ncols() != rec.h.nrows() {
        return Err(Error::Shape("recovered factors do not fit the data matrix".into()));
    }
    let residual = numerics::relative_error(&(rec.w * rec.h), data);
    let mut out = MatchReport {
        permutation: None,
        correlations: None,
        kinetics_rmse: None,
        p_max_error: None,
        residual,
        h_colsum_dev: max_column_sum_deviation(rec.h),
        min_entries: MinEntries { w: rec.w.min(), h: rec.h.min(), p: rec.p.min() },
        p_rowsum_dev: max_row_sum_deviation(rec.p),
        warnings: Vec::new(),
    };
    if let Some(truth) = truth {
        if truth.h.shape() != rec.h.shape() || truth.p.shape() != rec.p.shape() {
            return Err(Error::Shape("ground truth and recovered kinetics differ in shape".into()));
        }
        let m = match_components(rec.w, &truth.w)?;
        let rmse = m
            .permutation
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                let d = rec.h.row(i) - truth.h.row(j);
                (d.norm_squared() / d.len() as f64).sqrt()
            })
            .collect();
        out.p_max_error = Some((rec.p - align_transition(&truth.p, &m.permutation)).amax());
        out.kinetics_rmse = Some(rmse);
        out.correlations = Some(m.correlations);
        out.permutation = Some(m.permutation);
        out.warnings = m.warnings;
    }
    Ok(out)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    numerics::pearson(&ranks(x), &ranks(y))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && v[order[end + 1]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end) as f64 / 2.0;
        for &k in &order[start..=end] {
            out[k] = rank;
        }
        start = end + 1;
    }
    out
}
