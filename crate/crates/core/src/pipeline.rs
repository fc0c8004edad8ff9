//! End-to-end factorization: basis construction, inner-simplex start,
//! Nelder–Mead over the transformation matrix, and recovery of the factors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};
use crate::objective::{self, PenaltyBreakdown, PenaltyWeights};
use crate::optimizer::{nelder_mead, NmOptions, NmResult};
use crate::pcca;
use crate::preprocess::{build_context, PccaContext, SpectralMatrix};

/// Multiplicative perturbation range for restarts beyond the first.
const RESTART_JITTER: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub rank: usize,
    pub weights: PenaltyWeights,
    pub optimizer: NmOptions,
    pub restarts: usize,
    pub seed: u64,
    /// Also produce a clamped, column-renormalized copy of `H_rec`.
    pub project_feasible: bool,
}

impl PipelineConfig {
    pub fn new(rank: usize, weights: PenaltyWeights) -> Self {
        Self { rank, weights, optimizer: NmOptions::default(), restarts: 1, seed: 0, project_feasible: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::config("rank", "must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::config("restarts", "must be at least 1"));
        }
        if !self.weights.is_finite() {
            return Err(Error::config("weights", "must be finite"));
        }
        self.optimizer.validate()
    }
}

/// Summary of one optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub index: usize,
    pub psi_squared: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Factorization {
    pub w_rec: Matrix,
    pub h_rec: Matrix,
    pub p_rec: Matrix,
    pub a_opt: Matrix,
    pub a_init: Matrix,
    pub vertex_indices: Vec<usize>,
    pub breakdown: PenaltyBreakdown,
    pub optimizer: NmResult,
    /// `‖M − W_rec H_rec‖_F / ‖M‖_F`
    pub residual: f64,
    /// Restart that produced this result.
    pub best_restart: usize,
    pub restarts: Vec<RestartOutcome>,
    /// Present when feasibility projection was requested.
    pub h_feasible: Option<Matrix>,
}

/// `(W_rec, H_rec, P_rec)` for a final transformation matrix.
pub fn recover(a_opt: &Matrix, ctx: &PccaContext) -> Result<(Matrix, Matrix, Matrix)> {
    let f = objective::assemble(a_opt, ctx)?;
    Ok((f.w, f.h, f.p))
}

/// Clamps negative concentrations to zero and rescales each column to sum to
/// one; an all-zero column becomes uniform.
pub fn project_feasible(h: &Matrix) -> Matrix {
    let mut out = h.map(|x| x.max(0.0));
    let r = out.nrows() as f64;
    for mut col in out.column_iter_mut() {
        let s = col.sum();
        if s > 0.0 {
            col.unscale_mut(s);
        } else {
            col.fill(1.0 / r);
        }
    }
    out
}

pub fn factorize(data: &SpectralMatrix, cfg: &PipelineConfig) -> Result<Factorization> {
    cfg.validate()?;
    let ctx = build_context(data, cfg.rank)?;
    factorize_with_context(&ctx, cfg)
}

/// Starting transforms: the inner-simplex `A` followed by seeded entrywise
/// perturbations with factors in `[0.9, 1.1]`.
pub fn restart_starts(a_init: &Matrix, restarts: usize, seed: u64) -> Vec<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![a_init.clone()];
    for _ in 1..restarts {
        starts.push(a_init.map(|x| x * rng.random_range(1.0 - RESTART_JITTER..=1.0 + RESTART_JITTER)));
    }
    starts
}

fn run_one(start: &Matrix, ctx: &PccaContext, cfg: &PipelineConfig) -> Result<NmResult> {
    let f = objective::psi_squared_fn(&cfg.weights, ctx);
    nelder_mead(&f, &numerics::flatten_row_major(start), &cfg.optimizer)
}

#[cfg(not(target_arch = "wasm32"))]
fn run_all(starts: &[Matrix], ctx: &PccaContext, cfg: &PipelineConfig) -> Vec<Result<NmResult>> {
    if starts.len() == 1 {
        return vec![run_one(&starts[0], ctx, cfg)];
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = starts.iter().map(|s| scope.spawn(move || run_one(s, ctx, cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("restart thread panicked")).collect()
    })
}

#[cfg(target_arch = "wasm32")]
fn run_all(starts: &[Matrix], ctx: &PccaContext, cfg: &PipelineConfig) -> Vec<Result<NmResult>> {
    starts.iter().map(|s| run_one(s, ctx, cfg)).collect()
}

pub fn factorize_with_context(ctx: &PccaContext, cfg: &PipelineConfig) -> Result<Factorization> {
    cfg.validate()?;
    if ctx.rank() != cfg.rank {
        return Err(Error::Shape(format!("context has rank {}, config asks for {}", ctx.rank(), cfg.rank)));
    }
    let vertex_indices = pcca::inner_simplex_indices(ctx.basis())?;
    let init = pcca::initial_transform(ctx.basis(), &vertex_indices)?;
    log::debug!(
        "inner simplex at rows {:?}, min entry {:.3e}, cond {:.3e}",
        vertex_indices,
        init.min_entry,
        init.condition
    );

    let starts = restart_starts(&init.a_init, cfg.restarts, cfg.seed);
    let results = run_all(&starts, ctx, cfg);

    let mut outcomes = Vec::with_capacity(results.len());
    let mut best: Option<(usize, NmResult)> = None;
    for (index, res) in results.into_iter().enumerate() {
        match res {
            Ok(nm) => {
                log::info!("restart {index}: psi^2 = {:.6e} after {} evaluations", nm.f_opt, nm.fevals);
                outcomes.push(RestartOutcome { index, psi_squared: Some(nm.f_opt), error: None });
                if best.as_ref().is_none_or(|(_, b)| nm.f_opt < b.f_opt) {
                    best = Some((index, nm));
                }
            }
            Err(e) => {
                log::warn!("restart {index} failed: {e}");
                outcomes.push(RestartOutcome { index, psi_squared: None, error: Some(e.to_string()) });
            }
        }
    }
    let Some((best_restart, nm)) = best else {
        return Err(Error::AllRestartsFailed(
            outcomes.into_iter().filter_map(|o| o.error.map(|e| format!("restart {}: {e}", o.index))).collect(),
        ));
    };

    let r = cfg.rank;
    let a_opt = numerics::unflatten_row_major(&nm.x_opt, r, r);
    let (w_rec, h_rec, p_rec) = recover(&a_opt, ctx)?;
    let breakdown = objective::psi(&a_opt, &cfg.weights, ctx)?;
    let residual = numerics::relative_error(&(&w_rec * &h_rec), ctx.data().matrix());
    let h_feasible = cfg.project_feasible.then(|| project_feasible(&h_rec));
    Ok(Factorization {
        w_rec,
        h_rec,
        p_rec,
        a_opt,
        a_init: init.a_init,
        vertex_indices,
        breakdown,
        optimizer: nm,
        residual,
        best_restart,
        restarts: outcomes,
        h_feasible,
    })
}
