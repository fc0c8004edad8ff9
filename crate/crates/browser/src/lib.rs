//! WebAssembly entry points for the static page in `www/`.
//!
//! Each export takes a JSON request and returns a JSON document; errors come
//! back as a rejected string. The same functions are callable natively
//! through the `*_json` variants.

use serde::{Deserialize, Serialize};
use unmixer::metrics::{report, GroundTruth, RecoveredFactors};
use unmixer::numerics::{flatten_row_major, unflatten_row_major, Matrix};
use unmixer::objective::psi;
use unmixer::pcca::{initial_transform, inner_simplex_indices};
use unmixer::synth::{Dataset, DatasetConfig, PeaksConfig};
use unmixer::{build_context, factorize, PenaltyBreakdown, PenaltyWeights, PipelineConfig};
use wasm_bindgen::prelude::*;

const FOCALS: [f64; 3] = [500.0, 1000.0, 1500.0];

/// Knobs the page exposes on top of the shipped five-species dataset.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub peak_seed: u64,
    /// Pull of peak centers toward 500, 1000 and 1500 cm⁻¹, in `[0, 1]`.
    pub lambda: f64,
    pub noise: f64,
    pub noise_seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self { peak_seed: 2024, lambda: 0.0, noise: 0.0, noise_seed: 7 }
    }
}

impl Scenario {
    fn config(&self) -> DatasetConfig {
        let mut cfg = DatasetConfig::five_species();
        if let PeaksConfig::Random(peaks) = &mut cfg.peaks {
            peaks.seed = self.peak_seed;
        }
        if self.lambda > 0.0 {
            cfg = cfg.with_interference(self.lambda, FOCALS.to_vec());
        }
        if self.noise > 0.0 {
            cfg = cfg.with_noise(self.noise, self.noise_seed);
        }
        cfg
    }

    fn dataset(&self) -> Result<Dataset, String> {
        Dataset::generate(&self.config()).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorizeRequest {
    #[serde(flatten)]
    pub scenario: Scenario,
    pub preset: String,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FactorizeRequest {
    fn default() -> Self {
        Self { scenario: Scenario::default(), preset: "paper-4.2".into(), restarts: 1, seed: 0 }
    }
}

/// A line through the inner-simplex start along one entry of `A`.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceRequest {
    #[serde(flatten)]
    pub scenario: Scenario,
    pub preset: String,
    pub row: usize,
    pub col: usize,
    /// Half-width of the scanned interval, relative to `|A_init[row, col]|`.
    pub span: f64,
    pub points: usize,
}

impl Default for SliceRequest {
    fn default() -> Self {
        Self { scenario: Scenario::default(), preset: "paper-4.2".into(), row: 0, col: 0, span: 0.5, points: 81 }
    }
}

#[derive(Debug, Serialize)]
pub struct Simulation {
    pub wavenumbers: Vec<f64>,
    pub times: Vec<f64>,
    /// One entry per species.
    pub spectra: Vec<Vec<f64>>,
    pub kinetics: Vec<Vec<f64>>,
    /// Measured spectra at a handful of evenly spaced times.
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Serialize)]
pub struct Snapshot {
    pub time: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Recovery {
    pub wavenumbers: Vec<f64>,
    pub times: Vec<f64>,
    pub true_spectra: Vec<Vec<f64>>,
    pub true_kinetics: Vec<Vec<f64>>,
    /// Recovered components reordered to line up with the true ones.
    pub spectra: Vec<Vec<f64>>,
    pub kinetics: Vec<Vec<f64>>,
    pub correlations: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub breakdown: PenaltyBreakdown,
    pub residual: f64,
    pub evaluations: usize,
}

#[derive(Debug, Serialize)]
pub struct Slice {
    pub center: f64,
    pub values: Vec<f64>,
    pub terms: [Vec<f64>; 5],
    pub psi_squared: Vec<f64>,
}

fn columns(m: &Matrix) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn weights(preset: &str) -> Result<PenaltyWeights, String> {
    PenaltyWeights::preset(preset).ok_or_else(|| format!("unknown preset `{preset}`"))
}

fn parse<T: for<'de> Deserialize<'de> + Default>(request: &str) -> Result<T, String> {
    if request.trim().is_empty() {
        return Ok(T::default());
    }
    serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn simulate_json(request: &str) -> Result<String, String> {
    let scenario: Scenario = parse(request)?;
    let ds = scenario.dataset()?;
    let m = ds.measurements.matrix();
    let picks = 6.min(m.ncols());
    let snapshots = (0..picks)
        .map(|k| {
            let j = k * (m.ncols() - 1) / (picks - 1).max(1);
            Snapshot { time: ds.times[j], values: m.column(j).iter().copied().collect() }
        })
        .collect();
    to_json(&Simulation {
        spectra: columns(&ds.w),
        kinetics: rows(&ds.h),
        wavenumbers: ds.wavenumbers,
        times: ds.times,
        snapshots,
    })
}

pub fn factorize_json(request: &str) -> Result<String, String> {
    let req: FactorizeRequest = parse(request)?;
    let ds = req.scenario.dataset()?;
    let r = ds.h.nrows();
    let cfg = PipelineConfig {
        restarts: req.restarts.max(1),
        seed: req.seed,
        ..PipelineConfig::new(r, weights(&req.preset)?)
    };
    let fact = factorize(&ds.measurements, &cfg).map_err(|e| e.to_string())?;
    let truth = GroundTruth { w: ds.w.clone(), h: ds.h.clone(), p: ds.p.clone() };
    let rec = RecoveredFactors { w: &fact.w_rec, h: &fact.h_rec, p: &fact.p_rec };
    let rep = report(rec, ds.measurements.matrix(), Some(&truth)).map_err(|e| e.to_string())?;

    // slot j of the output holds the recovered component matched to species j
    let (perm, corr) = (rep.permutation.unwrap_or_default(), rep.correlations.unwrap_or_default());
    let mut order = vec![0; r];
    for (i, &j) in perm.iter().enumerate() {
        order[j] = i;
    }
    let w_rec = Matrix::from_fn(fact.w_rec.nrows(), r, |i, j| fact.w_rec[(i, order[j])]);
    let h_rec = Matrix::from_fn(r, fact.h_rec.ncols(), |i, j| fact.h_rec[(order[i], j)]);
    let p_rec = Matrix::from_fn(r, r, |i, j| fact.p_rec[(order[i], order[j])]);
    to_json(&Recovery {
        true_spectra: columns(&ds.w),
        true_kinetics: rows(&ds.h),
        spectra: columns(&w_rec),
        kinetics: rows(&h_rec),
        correlations: order.iter().map(|&i| corr[i]).collect(),
        transition: rows(&p_rec),
        breakdown: fact.breakdown,
        residual: rep.residual,
        evaluations: fact.optimizer.fevals,
        wavenumbers: ds.wavenumbers,
        times: ds.times,
    })
}

pub fn penalty_slice_json(request: &str) -> Result<String, String> {
    let req: SliceRequest = parse(request)?;
    let ds = req.scenario.dataset()?;
    let r = ds.h.nrows();
    if req.row >= r || req.col >= r {
        return Err(format!("entry ({}, {}) is outside the {r}x{r} transform", req.row, req.col));
    }
    if req.points < 2 || req.span.is_nan() || req.span <= 0.0 {
        return Err("need at least two points and a positive span".into());
    }
    let w = weights(&req.preset)?;
    let ctx = build_context(&ds.measurements, r).map_err(|e| e.to_string())?;
    let idx = inner_simplex_indices(ctx.basis()).map_err(|e| e.to_string())?;
    let init = initial_transform(ctx.basis(), &idx).map_err(|e| e.to_string())?;
    let mut x = flatten_row_major(&init.a_init);
    let slot = req.row * r + req.col;
    let center = x[slot];
    let half = req.span * center.abs().max(1e-3);

    let mut out = Slice {
        center,
        values: Vec::with_capacity(req.points),
        terms: Default::default(),
        psi_squared: Vec::with_capacity(req.points),
    };
    for k in 0..req.points {
        let v = center - half + 2.0 * half * k as f64 / (req.points - 1) as f64;
        x[slot] = v;
        out.values.push(v);
        // a singular transform leaves a gap (null) in the curve
        match psi(&unflatten_row_major(&x, r, r), &w, &ctx) {
            Ok(b) => {
                for (t, term) in out.terms.iter_mut().zip(b.terms()) {
                    t.push(term);
                }
                out.psi_squared.push(b.psi_squared);
            }
            Err(_) => {
                for t in out.terms.iter_mut() {
                    t.push(f64::NAN);
                }
                out.psi_squared.push(f64::NAN);
            }
        }
    }
    to_json(&out)
}

/// Ground-truth spectra, kinetics and a few measured spectra.
#[wasm_bindgen]
pub fn simulate(request: &str) -> Result<String, String> {
    simulate_json(request)
}

/// Runs the full factorization and returns recovered factors next to the truth.
#[wasm_bindgen]
pub fn factorize_scenario(request: &str) -> Result<String, String> {
    factorize_json(request)
}

/// The five penalty terms along one coordinate of the starting transform.
#[wasm_bindgen]
pub fn penalty_slice(request: &str) -> Result<String, String> {
    penalty_slice_json(request)
}
