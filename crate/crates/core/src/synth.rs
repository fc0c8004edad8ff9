//! Synthetic time-resolved Raman datasets: first-order (or Markov chain)
//! kinetics, Lorentzian component spectra with tunable overlap, and
//! half-normal additive noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};
use crate::preprocess::{drop_first_row, drop_last_row, SpectralMatrix};

const RATE_ROW_SUM_TOL: f64 = 1e-12;
const H0_SUM_TOL: f64 = 1e-12;

/// Five-species first-order scheme A..E; D is the sole absorbing product.
pub fn reference_rate_matrix() -> Matrix {
    numerics::from_rows(&[
        &[-0.53, 0.53, 0.0, 0.0, 0.0],
        &[0.02, -0.66, 0.43, 0.21, 0.0],
        &[0.0, 0.25, -0.36, 0.0, 0.11],
        &[0.0, 0.0, 0.0, 0.0, 0.0],
        &[0.0, 0.0, 0.1, 0.0, -0.1],
    ])
}

pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (count - 1) as f64;
            (0..count).map(|i| start + step * i as f64).collect()
        }
    }
}

/// Rate matrix, initial relative concentrations and sampling times.
#[derive(Debug, Clone)]
pub struct ReactionSpec {
    k: Matrix,
    h0: Vec<f64>,
    times: Vec<f64>,
}

impl ReactionSpec {
    pub fn new(k: Matrix, h0: Vec<f64>, times: Vec<f64>) -> Result<Self> {
        let r = k.nrows();
        if k.ncols() != r {
            return Err(Error::config("rate_matrix", "must be square"));
        }
        numerics::ensure_finite(&k)?;
        for i in 0..r {
            if k[(i, i)] > 0.0 {
                return Err(Error::config("rate_matrix", format!("diagonal entry {i} is positive")));
            }
            for j in 0..r {
                if i != j && k[(i, j)] < 0.0 {
                    return Err(Error::config("rate_matrix", format!("off-diagonal entry ({i}, {j}) is negative")));
                }
            }
            let sum: f64 = k.row(i).sum();
            if sum.abs() > RATE_ROW_SUM_TOL {
                return Err(Error::config("rate_matrix", format!("row {i} sums to {sum:e}, not 0")));
            }
        }
        validate_h0(&h0, r)?;
        validate_times(&times)?;
        Ok(Self { k, h0, times })
    }

    pub fn rate_matrix(&self) -> &Matrix {
        &self.k
    }

    pub fn h0(&self) -> &[f64] {
        &self.h0
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

fn validate_h0(h0: &[f64], r: usize) -> Result<()> {
    if h0.len() != r {
        return Err(Error::config("h0", format!("expected {r} entries, got {}", h0.len())));
    }
    if h0.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::config("h0", "entries must be finite and non-negative"));
    }
    let sum: f64 = h0.iter().sum();
    if (sum - 1.0).abs() > H0_SUM_TOL {
        return Err(Error::config("h0", format!("entries sum to {sum}, not 1")));
    }
    Ok(())
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::config("time", "grid is empty"));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("time", "grid must be finite and non-decreasing"));
    }
    Ok(())
}

/// Relative concentrations `h(t_j)ᵀ = h0ᵀ e^{K t_j}`, one column per time.
pub fn kinetics(spec: &ReactionSpec) -> Result<Matrix> {
    let r = spec.k.nrows();
    let h0 = Matrix::from_row_slice(1, r, &spec.h0);
    let mut h = Matrix::zeros(r, spec.times.len());
    for (j, &t) in spec.times.iter().enumerate() {
        let row = &h0 * numerics::expm(&(&spec.k * t))?;
        h.set_column(j, &row.transpose().column(0));
    }
    Ok(h)
}

/// Concentrations propagated by a row-stochastic transition matrix:
/// column `j` is `(h0ᵀ Pʲ)ᵀ`.
pub fn markov_kinetics(p: &Matrix, h0: &[f64], steps: usize) -> Result<Matrix> {
    let r = p.nrows();
    if p.ncols() != r {
        return Err(Error::config("transition", "must be square"));
    }
    numerics::ensure_finite(p)?;
    validate_h0(h0, r)?;
    if steps == 0 {
        return Err(Error::config("time.steps", "must be at least 1"));
    }
    let mut h = Matrix::zeros(r, steps);
    let mut state = Matrix::from_row_slice(1, r, h0);
    for j in 0..steps {
        h.set_column(j, &state.transpose().column(0));
        state = &state * p;
    }
    Ok(h)
}

/// Least-squares transition matrix `P = (H₋ᵀ)† H₊ᵀ` for kinetics `H`
/// (species × time).
pub fn transition_from_kinetics(h: &Matrix) -> Result<Matrix> {
    let ht = h.transpose();
    Ok(numerics::pinv_default(&drop_last_row(&ht)?)? * drop_first_row(&ht)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center: f64,
    pub amplitude: f64,
    pub width: f64,
}

impl Peak {
    /// Height-normalized Lorentzian: `amplitude` at the center, half of it one
    /// `width` away.
    pub fn eval(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        self.amplitude / (1.0 + z * z)
    }
}

/// Lorentzian peaks of each species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PeakList(pub Vec<Vec<Peak>>);

impl PeakList {
    pub fn species(&self) -> usize {
        self.0.len()
    }

    fn validate(&self) -> Result<()> {
        for (s, peaks) in self.0.iter().enumerate() {
            if peaks.is_empty() {
                return Err(Error::config(format!("peaks[{s}]"), "species has no peaks"));
            }
            for (k, p) in peaks.iter().enumerate() {
                if !(p.width > 0.0 && p.width.is_finite()) {
                    return Err(Error::config(format!("peaks[{s}][{k}].width"), "must be positive"));
                }
                if !(p.amplitude > 0.0 && p.amplitude.is_finite()) {
                    return Err(Error::config(format!("peaks[{s}][{k}].amplitude"), "must be positive"));
                }
                if !p.center.is_finite() {
                    return Err(Error::config(format!("peaks[{s}][{k}].center"), "must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// Component spectra sampled on `grid`, one column per species.
pub fn spectra(peaks: &PeakList, grid: &[f64]) -> Result<Matrix> {
    peaks.validate()?;
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("wavenumbers", "grid must be strictly increasing"));
    }
    if let (Some(&lo), Some(&hi)) = (grid.first(), grid.last()) {
        for (s, list) in peaks.0.iter().enumerate() {
            if let Some(k) = list.iter().position(|p| p.center < lo || p.center > hi) {
                return Err(Error::config(format!("peaks[{s}][{k}].center"), "lies outside the wavenumber grid"));
            }
        }
    }
    Ok(Matrix::from_fn(grid.len(), peaks.species(), |i, s| peaks.0[s].iter().map(|p| p.eval(grid[i])).sum()))
}

/// Moves every peak center a fraction `lambda` of the way towards its nearest
/// focal point (ties go to the lower focal value).
pub fn interfere(peaks: &PeakList, focals: &[f64], lambda: f64) -> Result<PeakList> {
    if focals.is_empty() {
        return Err(Error::config("interference.focals", "must not be empty"));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config("interference.lambda", "must lie in [0, 1]"));
    }
    let moved = peaks
        .0
        .iter()
        .map(|list| {
            list.iter()
                .map(|p| {
                    let focal = nearest_focal(focals, p.center);
                    Peak { center: (1.0 - lambda) * p.center + lambda * focal, ..*p }
                })
                .collect()
        })
        .collect();
    Ok(PeakList(moved))
}

fn nearest_focal(focals: &[f64], x: f64) -> f64 {
    let mut best = focals[0];
    for &f in &focals[1..] {
        let (d, db) = ((f - x).abs(), (best - x).abs());
        if d < db || (d == db && f < best) {
            best = f;
        }
    }
    best
}

/// `M = W · H`.
pub fn compose(w: &Matrix, h: &Matrix) -> Result<SpectralMatrix> {
    if w.ncols() != h.nrows() {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            w.nrows(),
            w.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let mut m = w * h;
    // products of non-negative factors can round to -0.0 or to -1e-17 when h
    // carries expm round-off; the data contract is non-negative.
    m.apply(|x| *x = x.max(0.0));
    SpectralMatrix::new(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

/// `M̃ = M + δ·|N|` with `N` i.i.d. standard normal from a seeded generator.
pub fn add_noise(m: &SpectralMatrix, noise: &NoiseSpec) -> Result<SpectralMatrix> {
    if !(noise.delta >= 0.0 && noise.delta.is_finite()) {
        return Err(Error::config("noise.delta", "must be finite and non-negative"));
    }
    if noise.delta == 0.0 {
        return Ok(m.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut out = m.matrix().clone();
    // column-major fill order is part of the determinism contract
    for x in out.iter_mut() {
        let n: f64 = rng.sample(StandardNormal);
        *x += noise.delta * n.abs();
    }
    SpectralMatrix::new(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn points(&self) -> Vec<f64> {
        linspace(self.start, self.end, self.steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavenumberGrid {
    pub start: f64,
    pub end: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum KineticsConfig {
    /// First-order kinetics `h0ᵀ e^{Kt}`.
    Rate { rate_matrix: Vec<Vec<f64>>, h0: Vec<f64>, time: TimeGrid },
    /// Discrete chain `h(t_i)ᵀ = h(t_{i-1})ᵀ P` on an equidistant grid.
    Markov { transition: Vec<Vec<f64>>, h0: Vec<f64>, time: TimeGrid },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPeaks {
    pub seed: u64,
    pub min_per_species: usize,
    pub max_per_species: usize,
    pub amplitude: [f64; 2],
    pub width: [f64; 2],
    /// Keeps centers this far inside the grid ends.
    #[serde(default)]
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PeaksConfig {
    Random(RandomPeaks),
    Explicit(PeakList),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceConfig {
    pub lambda: f64,
    pub focals: Vec<f64>,
}

pub const DATASET_SCHEMA_VERSION: u32 = 1;

/// Dataset recipe, as read from the `synth` command's JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub schema_version: u32,
    pub kinetics: KineticsConfig,
    pub wavenumbers: WavenumberGrid,
    pub peaks: PeaksConfig,
    #[serde(default)]
    pub interference: Option<InterferenceConfig>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
}

const DEFAULT_CONFIG: &str = include_str!("../configs/default.json");

impl DatasetConfig {
    /// The shipped five-species configuration (`configs/default.json`).
    pub fn five_species() -> Self {
        serde_json::from_str(DEFAULT_CONFIG).expect("shipped default config parses")
    }

    pub fn with_interference(mut self, lambda: f64, focals: Vec<f64>) -> Self {
        self.interference = Some(InterferenceConfig { lambda, focals });
        self
    }

    pub fn with_noise(mut self, delta: f64, seed: u64) -> Self {
        self.noise = Some(NoiseSpec { delta, seed });
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        if cfg.schema_version != DATASET_SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {} (expected {DATASET_SCHEMA_VERSION})", cfg.schema_version),
            ));
        }
        Ok(cfg)
    }

    pub fn species(&self) -> usize {
        match &self.kinetics {
            KineticsConfig::Rate { h0, .. } | KineticsConfig::Markov { h0, .. } => h0.len(),
        }
    }
}

fn matrix_from_nested(key: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    let r = rows.len();
    if r == 0 || rows.iter().any(|row| row.len() != r) {
        return Err(Error::config(key, "must be a non-empty square matrix"));
    }
    Ok(Matrix::from_fn(r, r, |i, j| rows[i][j]))
}

pub fn random_peaks(cfg: &RandomPeaks, species: usize, grid: &WavenumberGrid) -> Result<PeakList> {
    if cfg.min_per_species == 0 || cfg.max_per_species < cfg.min_per_species {
        return Err(Error::config("peaks.random.min_per_species", "need 1 <= min <= max"));
    }
    for (key, [lo, hi]) in [("amplitude", cfg.amplitude), ("width", cfg.width)] {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::config(format!("peaks.random.{key}"), "need 0 < lo <= hi"));
        }
    }
    let (lo, hi) = (grid.start + cfg.margin, grid.end - cfg.margin);
    if !(hi > lo) {
        return Err(Error::config("peaks.random.margin", "leaves no room for peak centers"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let list = (0..species)
        .map(|_| {
            let count = rng.random_range(cfg.min_per_species..=cfg.max_per_species);
            (0..count)
                .map(|_| Peak {
                    center: rng.random_range(lo..=hi),
                    amplitude: rng.random_range(cfg.amplitude[0]..=cfg.amplitude[1]),
                    width: rng.random_range(cfg.width[0]..=cfg.width[1]),
                })
                .collect()
        })
        .collect();
    Ok(PeakList(list))
}

/// A generated dataset together with its ground truth.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub wavenumbers: Vec<f64>,
    pub times: Vec<f64>,
    pub peaks: PeakList,
    /// n × r component spectra.
    pub w: Matrix,
    /// r × m relative concentrations.
    pub h: Matrix,
    /// r × r least-squares transition matrix of `h`.
    pub p: Matrix,
    /// Noiseless product `W·H`.
    pub clean: SpectralMatrix,
    /// `clean` plus noise, if any was configured.
    pub measurements: SpectralMatrix,
}

impl Dataset {
    pub fn generate(cfg: &DatasetConfig) -> Result<Self> {
        let (h, times) = match &cfg.kinetics {
            KineticsConfig::Rate { rate_matrix, h0, time } => {
                let spec = ReactionSpec::new(
                    matrix_from_nested("kinetics.rate_matrix", rate_matrix)?,
                    h0.clone(),
                    time.points(),
                )?;
                (kinetics(&spec)?, time.points())
            }
            KineticsConfig::Markov { transition, h0, time } => {
                let p = matrix_from_nested("kinetics.transition", transition)?;
                (markov_kinetics(&p, h0, time.steps)?, time.points())
            }
        };
        let species = h.nrows();
        let g = &cfg.wavenumbers;
        if g.bins < 2 || !(g.end > g.start) {
            return Err(Error::config("wavenumbers", "need at least 2 bins and end > start"));
        }
        let wavenumbers = linspace(g.start, g.end, g.bins);

        let mut peaks = match &cfg.peaks {
            PeaksConfig::Random(rp) => random_peaks(rp, species, g)?,
            PeaksConfig::Explicit(list) => list.clone(),
        };
        if peaks.species() != species {
            return Err(Error::config(
                "peaks",
                format!("{} species of peaks for {species} kinetic species", peaks.species()),
            ));
        }
        if let Some(inter) = &cfg.interference {
            peaks = interfere(&peaks, &inter.focals, inter.lambda)?;
        }
        let w = spectra(&peaks, &wavenumbers)?;
        let p = transition_from_kinetics(&h)?;
        let clean = compose(&w, &h)?;
        let measurements = match &cfg.noise {
            Some(noise) => add_noise(&clean, noise)?,
            None => clean.clone(),
        };
        Ok(Self { wavenumbers, times, peaks, w, h, p, clean, measurements })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn five_species_spec(times: Vec<f64>) -> ReactionSpec {
        ReactionSpec::new(reference_rate_matrix(), vec![1.0, 0.0, 0.0, 0.0, 0.0], times).unwrap()
    }

    #[test]
    fn kinetics_start_at_h0() {
        let h = kinetics(&five_species_spec(vec![0.0, 1.0])).unwrap();
        assert_eq!(h.column(0).as_slice(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn product_d_absorbs_everything() {
        // The slowest nonzero mode of K decays at about 0.029 per unit time,
        // so D only exceeds 0.999 well past t = 200.
        let times = linspace(0.0, 300.0, 31);
        let h = kinetics(&five_species_spec(times)).unwrap();
        for j in 1..h.ncols() {
            assert!(h[(3, j)] >= h[(3, j - 1)]);
        }
        assert!(h[(3, 30)] >= 0.999, "h_D(300) = {}", h[(3, 30)]);
        assert!((h[(3, 5)] - 0.850_024_551_191_981_7).abs() <= 1e-9, "h_D(50) = {}", h[(3, 5)]);
    }

    #[test]
    fn zero_rates_freeze_h0() {
        let h0 = vec![0.2, 0.3, 0.5];
        let spec = ReactionSpec::new(Matrix::zeros(3, 3), h0.clone(), linspace(0.0, 5.0, 6)).unwrap();
        let h = kinetics(&spec).unwrap();
        for col in h.column_iter() {
            assert_eq!(col.as_slice(), h0.as_slice());
        }
    }

    #[test]
    fn reaction_spec_validation() {
        let bad_rows = numerics::from_rows(&[&[-1.0, 0.5], &[0.0, 0.0]]);
        assert!(ReactionSpec::new(bad_rows, vec![1.0, 0.0], vec![0.0]).is_err());
        let neg_off = numerics::from_rows(&[&[0.5, -0.5], &[0.0, 0.0]]);
        assert!(ReactionSpec::new(neg_off, vec![1.0, 0.0], vec![0.0]).is_err());
        assert!(ReactionSpec::new(Matrix::zeros(2, 2), vec![0.5, 0.6], vec![0.0]).is_err());
        assert!(ReactionSpec::new(Matrix::zeros(2, 2), vec![1.0, 0.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn lorentzian_half_max() {
        let peaks = PeakList(vec![vec![Peak { center: 500.0, amplitude: 1.0, width: 10.0 }]]);
        let w = spectra(&peaks, &[490.0, 500.0, 510.0]).unwrap();
        assert_eq!(w.column(0).as_slice(), &[0.5, 1.0, 0.5]);
    }

    #[test]
    fn stacked_peaks_are_linear() {
        let p = Peak { center: 800.0, amplitude: 2.0, width: 15.0 };
        let grid = linspace(700.0, 900.0, 41);
        let single = spectra(&PeakList(vec![vec![p]]), &grid).unwrap();
        let double = spectra(&PeakList(vec![vec![p, p]]), &grid).unwrap();
        assert_eq!(double, single * 2.0);
    }

    #[test]
    fn empty_species_rejected() {
        let err = spectra(&PeakList(vec![vec![]]), &[1.0, 2.0]).unwrap_err();
        assert!(err.to_string().contains("peaks[0]"));
    }

    #[test]
    fn default_peaks_positive_with_expected_maxima() {
        let cfg = DatasetConfig::five_species();
        let PeaksConfig::Random(rp) = &cfg.peaks else { panic!("default uses random peaks") };
        let peaks = random_peaks(rp, 5, &cfg.wavenumbers).unwrap();
        let grid = linspace(cfg.wavenumbers.start, cfg.wavenumbers.end, cfg.wavenumbers.bins);
        let w = spectra(&peaks, &grid).unwrap();
        assert!(w.iter().all(|&x| x > 0.0));
        for (s, list) in peaks.0.iter().enumerate() {
            // direct evaluation at each peak's nearest grid point
            let stack = list
                .iter()
                .map(|p| {
                    let i = grid
                        .iter()
                        .enumerate()
                        .min_by(|a, b| (a.1 - p.center).abs().partial_cmp(&(b.1 - p.center).abs()).unwrap())
                        .unwrap()
                        .0;
                    list.iter().map(|q| q.eval(grid[i])).sum::<f64>()
                })
                .fold(0.0, f64::max);
            let col_max = w.column(s).max();
            assert!((col_max - stack).abs() <= 0.05 * stack, "species {s}: {col_max} vs {stack}");
        }
    }

    #[test]
    fn interference_examples() {
        let peaks = PeakList(vec![vec![
            Peak { center: 400.0, amplitude: 1.0, width: 5.0 },
            Peak { center: 590.0, amplitude: 2.0, width: 7.0 },
        ]]);
        let focals = [300.0, 600.0];
        assert_eq!(interfere(&peaks, &focals, 0.0).unwrap(), peaks);
        let full = interfere(&peaks, &focals, 1.0).unwrap();
        assert_eq!(full.0[0][0].center, 300.0);
        assert_eq!(full.0[0][1].center, 600.0);
        let half = interfere(&peaks, &focals, 0.5).unwrap();
        assert_eq!(half.0[0][0].center, 350.0);
        assert_eq!(half.0[0][1].amplitude, 2.0);
        assert_eq!(half.0[0][1].width, 7.0);
        // tie at 450 goes to the lower focal
        let tie = PeakList(vec![vec![Peak { center: 450.0, amplitude: 1.0, width: 1.0 }]]);
        assert_eq!(interfere(&tie, &focals, 1.0).unwrap().0[0][0].center, 300.0);
        assert!(interfere(&peaks, &[], 0.5).is_err());
    }

    #[test]
    fn compose_cases() {
        let w = numerics::seeded_matrix(10, 3, 1).abs();
        let eye = Matrix::identity(3, 3);
        assert_eq!(compose(&w, &eye).unwrap().matrix(), &w);

        let h = numerics::seeded_matrix(3, 7, 2).abs();
        let m = compose(&w, &h).unwrap();
        for i in 0..10 {
            for j in 0..7 {
                let mut naive = 0.0;
                for k in 0..3 {
                    naive += w[(i, k)] * h[(k, j)];
                }
                assert!((m.matrix()[(i, j)] - naive).abs() <= 1e-14);
            }
        }

        let col = Matrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let row = Matrix::from_row_slice(1, 3, &[0.5, 1.0, 2.0]);
        let m = compose(&col, &row).unwrap();
        for j in 1..3 {
            let ratio = m.matrix()[(0, j)] / m.matrix()[(0, 0)];
            for i in 0..4 {
                assert!((m.matrix()[(i, j)] - ratio * m.matrix()[(i, 0)]).abs() < 1e-14);
            }
        }
        assert!(matches!(compose(&w, &Matrix::zeros(2, 2)), Err(Error::Shape(_))));
    }

    #[test]
    fn noise_cases() {
        let m = SpectralMatrix::new(Matrix::from_element(1000, 200, 1.0)).unwrap();
        assert_eq!(add_noise(&m, &NoiseSpec { delta: 0.0, seed: 1 }).unwrap(), m);

        let noisy = add_noise(&m, &NoiseSpec { delta: 0.5, seed: 42 }).unwrap();
        let diff = noisy.matrix() - m.matrix();
        assert!(diff.iter().all(|&d| d >= 0.0));
        let expected = 0.5 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((diff.mean() - expected).abs() <= 0.02 * expected, "{}", diff.mean());

        let again = add_noise(&m, &NoiseSpec { delta: 0.5, seed: 42 }).unwrap();
        assert_eq!(noisy, again);
    }

    #[test]
    fn markov_kinetics_and_least_squares_transition() {
        let p = numerics::from_rows(&[&[0.9, 0.1, 0.0], &[0.0, 0.92, 0.08], &[0.0, 0.0, 1.0]]);
        let h = markov_kinetics(&p, &[1.0, 0.0, 0.0], 60).unwrap();
        assert_eq!(h.column(1).as_slice(), &[0.9, 0.1, 0.0]);
        let recovered = transition_from_kinetics(&h).unwrap();
        assert!((recovered - p).amax() <= 1e-10);
    }

    #[test]
    fn rate_kinetics_transition_is_expm_of_step() {
        let times = linspace(0.0, 20.0, 200);
        let dt = times[1] - times[0];
        let h = kinetics(&five_species_spec(times)).unwrap();
        let p = transition_from_kinetics(&h).unwrap();
        let step = numerics::expm(&(reference_rate_matrix() * dt)).unwrap();
        assert!((p - step).amax() <= 1e-8);
    }

    #[test]
    fn config_errors_name_the_key() {
        let mut cfg = DatasetConfig::five_species();
        cfg.interference = Some(InterferenceConfig { lambda: 1.5, focals: vec![500.0] });
        let err = Dataset::generate(&cfg).unwrap_err();
        assert!(err.to_string().contains("interference.lambda"), "{err}");

        let text = serde_json::to_string(&DatasetConfig::five_species()).unwrap();
        let text = text.replacen("\"schema_version\":1", "\"schema_version\":9", 1);
        let err = DatasetConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("schema_version"), "{err}");

        let err = DatasetConfig::from_json("{\"schema_version\":1,\"bogus\":3}").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn default_dataset_shape() {
        let ds = Dataset::generate(&DatasetConfig::five_species()).unwrap();
        assert_eq!(ds.measurements.matrix().shape(), (1000, 200));
        assert_eq!(ds.w.shape(), (1000, 5));
        assert_eq!(ds.h.shape(), (5, 200));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn kinetics_stay_stochastic(t in 0.0f64..60.0) {
            let h = kinetics(&five_species_spec(vec![t])).unwrap();
            prop_assert!((h.column(0).sum() - 1.0).abs() <= 1e-12);
            for &x in h.iter() {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&x));
            }
        }

        #[test]
        fn interference_is_monotone(center in 100.0f64..1800.0, l1 in 0.0f64..1.0, l2 in 0.0f64..1.0) {
            let focals = [500.0, 1000.0, 1500.0];
            let peaks = PeakList(vec![vec![Peak { center, amplitude: 1.0, width: 5.0 }]]);
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            let f = nearest_focal(&focals, center);
            let d_lo = (interfere(&peaks, &focals, lo).unwrap().0[0][0].center - f).abs();
            let d_hi = (interfere(&peaks, &focals, hi).unwrap().0[0][0].center - f).abs();
            prop_assert!(d_hi <= d_lo + 1e-9);
        }

        #[test]
        fn mixtures_are_convex_combinations(seed in any::<u64>(), t in 0.0f64..30.0) {
            let w = numerics::seeded_matrix(12, 5, seed).abs();
            let h = kinetics(&five_species_spec(vec![t])).unwrap();
            let m = compose(&w, &h).unwrap();
            for i in 0..12 {
                let (lo, hi) = (w.row(i).min(), w.row(i).max());
                let x = m.matrix()[(i, 0)];
                prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
            }
        }
    }
}
