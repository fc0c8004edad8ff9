//! Command-line surface: `synth`, `factorize` and `evaluate`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure. Failures also print one JSON object
//! `{"error": {"kind": ..., "message": ...}}` on stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::metrics::{self, GroundTruth, RecoveredFactors};
use crate::numerics::Matrix;
use crate::objective::{PenaltyBreakdown, PenaltyWeights};
use crate::optimizer::{NmOptions, NmResult};
use crate::pipeline::{self, PipelineConfig, RestartOutcome};
use crate::preprocess::SpectralMatrix;
use crate::synth::{Dataset, DatasetConfig, PeakList};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig { .. } => EXIT_CONFIG,
        Error::Parse { .. }
        | Error::Io(_)
        | Error::Json(_)
        | Error::Shape(_)
        | Error::NonFinite { .. }
        | Error::Negative { .. } => EXIT_DATA,
        Error::SvdNoConvergence
        | Error::ExpmOverflow { .. }
        | Error::RankDeficient { .. }
        | Error::ZeroVariance
        | Error::RankTooHigh { .. }
        | Error::DegenerateSimplex { .. }
        | Error::Singular
        | Error::InfiniteStart
        | Error::NanObjective { .. }
        | Error::AllRestartsFailed(_) => EXIT_NUMERICAL,
    }
}

#[derive(Debug, Parser)]
#[command(name = "unmixer", version, about = "Non-separable NMF for time-resolved Raman spectra")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with ground truth.
    Synth {
        /// Dataset config (JSON).
        #[arg(short = 'c', long = "config")]
        config: PathBuf,
        /// Output directory.
        #[arg(short = 'o', long = "out", default_value = ".")]
        out: PathBuf,
    },
    /// Factorize a measurement matrix.
    Factorize(FactorizeArgs),
    /// Compare a factorization with ground truth.
    Evaluate {
        /// Directory written by `factorize`.
        #[arg(short = 'r', long = "result")]
        result: PathBuf,
        /// Directory written by `synth`.
        #[arg(short = 't', long = "truth")]
        truth: PathBuf,
        /// Report path; overlay CSVs go next to it.
        #[arg(short = 'o', long = "out", default_value = "report.json")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct FactorizeArgs {
    #[arg(short = 'i', long = "input")]
    pub input: PathBuf,
    #[arg(short = 'r', long = "rank")]
    pub rank: usize,
    /// Weight preset: `paper-4.2` or `paper-4.4`.
    #[arg(long, default_value = "paper-4.2")]
    pub preset: String,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write a clamped, column-renormalized `H_rec_feasible.csv`.
    #[arg(long)]
    pub project_feasible: bool,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub max_feval: Option<usize>,
    #[arg(long)]
    pub tol_x: Option<f64>,
    #[arg(long)]
    pub tol_f: Option<f64>,
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

/// Everything a factorization run depends on; echoed into diagnostics.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub preset: String,
    pub pipeline: PipelineConfig,
}

impl RunConfig {
    pub fn from_args(args: &FactorizeArgs) -> Result<Self> {
        let mut weights = PenaltyWeights::preset(&args.preset)
            .ok_or_else(|| Error::config("preset", format!("unknown preset `{}`", args.preset)))?;
        for (slot, value) in [
            (&mut weights.alpha, args.alpha),
            (&mut weights.beta, args.beta),
            (&mut weights.gamma, args.gamma),
            (&mut weights.delta, args.delta),
            (&mut weights.mu, args.mu),
        ] {
            if let Some(v) = value {
                *slot = v;
            }
        }
        let defaults = NmOptions::default();
        let optimizer = NmOptions {
            max_iter: args.max_iter,
            max_feval: args.max_feval,
            tol_x: args.tol_x.unwrap_or(defaults.tol_x),
            tol_f: args.tol_f.unwrap_or(defaults.tol_f),
            ..defaults
        };
        let cfg = Self {
            input: args.input.clone(),
            output: args.out.clone(),
            preset: args.preset.clone(),
            pipeline: PipelineConfig {
                rank: args.rank,
                weights,
                optimizer,
                restarts: args.restarts,
                seed: args.seed,
                project_feasible: args.project_feasible,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::config("input", "path is empty"));
        }
        if self.output.as_os_str().is_empty() {
            return Err(Error::config("out", "path is empty"));
        }
        self.pipeline.validate()
    }
}

/// Written next to the synthetic matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config: DatasetConfig,
    pub species: usize,
    pub wavenumbers: Vec<f64>,
    pub times: Vec<f64>,
    /// Peaks after interference, as used for `W.csv`.
    pub peaks: PeakList,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub run_config: RunConfig,
    pub breakdown: PenaltyBreakdown,
    pub optimizer: NmResult,
    pub residual: f64,
    pub vertex_indices: Vec<usize>,
    pub best_restart: usize,
    pub restarts: Vec<RestartOutcome>,
}

pub fn cmd_synth(config_path: &Path, out_dir: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(config_path)?;
    let config = DatasetConfig::from_json(&text)?;
    let ds = Dataset::generate(&config)?;
    let files = ["M.csv", "W.csv", "H.csv", "P.csv"];
    io::write_matrix(&out_dir.join(files[0]), ds.measurements.matrix())?;
    io::write_matrix(&out_dir.join(files[1]), &ds.w)?;
    io::write_matrix(&out_dir.join(files[2]), &ds.h)?;
    io::write_matrix(&out_dir.join(files[3]), &ds.p)?;
    let manifest = Manifest {
        schema_version: crate::synth::DATASET_SCHEMA_VERSION,
        species: ds.h.nrows(),
        config,
        wavenumbers: ds.wavenumbers,
        times: ds.times,
        peaks: ds.peaks,
        files: files.iter().map(|s| s.to_string()).collect(),
    };
    io::write_json(&out_dir.join("manifest.json"), &manifest)?;
    log::info!("wrote dataset to {}", out_dir.display());
    Ok(manifest)
}

pub fn cmd_factorize(run: &RunConfig) -> Result<Diagnostics> {
    run.validate()?;
    let data = SpectralMatrix::new(io::read_matrix(&run.input)?)?;
    let fact = pipeline::factorize(&data, &run.pipeline)?;
    let out = &run.output;
    io::write_matrix(&out.join("W_rec.csv"), &fact.w_rec)?;
    io::write_matrix(&out.join("H_rec.csv"), &fact.h_rec)?;
    io::write_matrix(&out.join("P_rec.csv"), &fact.p_rec)?;
    io::write_matrix(&out.join("A_opt.csv"), &fact.a_opt)?;
    if let Some(h) = &fact.h_feasible {
        io::write_matrix(&out.join("H_rec_feasible.csv"), h)?;
    }
    let diag = Diagnostics {
        run_config: run.clone(),
        breakdown: fact.breakdown,
        optimizer: fact.optimizer,
        residual: fact.residual,
        vertex_indices: fact.vertex_indices,
        best_restart: fact.best_restart,
        restarts: fact.restarts,
    };
    io::write_json(&out.join("diagnostics.json"), &diag)?;
    Ok(diag)
}

fn read_in(dir: &Path, name: &str) -> Result<Matrix> {
    io::read_matrix(&dir.join(name))
}

fn check_shape(name: &str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::Shape(format!("{name} is {}x{}, expected {rows}x{cols}", m.nrows(), m.ncols())));
    }
    Ok(())
}

pub fn cmd_evaluate(result_dir: &Path, truth_dir: &Path, report_path: &Path) -> Result<metrics::MatchReport> {
    let w_rec = read_in(result_dir, "W_rec.csv")?;
    let h_rec = read_in(result_dir, "H_rec.csv")?;
    let p_rec = read_in(result_dir, "P_rec.csv")?;
    let truth = GroundTruth {
        w: read_in(truth_dir, "W.csv")?,
        h: read_in(truth_dir, "H.csv")?,
        p: read_in(truth_dir, "P.csv")?,
    };
    let data = read_in(truth_dir, "M.csv")?;
    let (n, m) = data.shape();
    let r = truth.w.ncols();
    check_shape("W.csv", &truth.w, n, r)?;
    check_shape("H.csv", &truth.h, r, m)?;
    check_shape("P.csv", &truth.p, r, r)?;
    check_shape("W_rec.csv", &w_rec, n, r)?;
    check_shape("H_rec.csv", &h_rec, r, m)?;
    check_shape("P_rec.csv", &p_rec, r, r)?;

    let rep = metrics::report(RecoveredFactors { w: &w_rec, h: &h_rec, p: &p_rec }, &data, Some(&truth))?;
    io::write_json(report_path, &rep)?;

    let manifest: Option<Manifest> =
        std::fs::read_to_string(truth_dir.join("manifest.json")).ok().and_then(|t| serde_json::from_str(&t).ok());
    let (wavenumbers, times) = match manifest {
        Some(mf) if mf.wavenumbers.len() == n && mf.times.len() == m => (mf.wavenumbers, mf.times),
        _ => ((0..n).map(|i| i as f64).collect(), (0..m).map(|j| j as f64).collect()),
    };
    let perm = rep.permutation.clone().unwrap_or_default();
    let overlay = |truth: &dyn Fn(usize) -> Vec<f64>, rec: &dyn Fn(usize) -> Vec<f64>| {
        let mut series = Vec::new();
        for j in 0..r {
            series.push((format!("true_s{j}"), truth(j)));
        }
        for (i, &j) in perm.iter().enumerate() {
            series.push((format!("recovered_s{j}"), rec(i)));
        }
        series
    };
    let spectra =
        overlay(&|j| truth.w.column(j).iter().copied().collect(), &|i| w_rec.column(i).iter().copied().collect());
    let kinetics = overlay(&|j| truth.h.row(j).iter().copied().collect(), &|i| h_rec.row(i).iter().copied().collect());
    let dir = report_path.parent().unwrap_or(Path::new("."));
    io::write_atomic(&dir.join("spectra_overlay.csv"), &io::long_format_csv("wavenumber", &wavenumbers, &spectra)?)?;
    io::write_atomic(&dir.join("kinetics_overlay.csv"), &io::long_format_csv("time", &times, &kinetics)?)?;
    Ok(rep)
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("UNMIXER_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, out } => cmd_synth(&config, &out).map(|_| ()),
        Command::Factorize(args) => {
            let run = RunConfig::from_args(&args)?;
            let diag = cmd_factorize(&run)?;
            println!(
                "psi = {:.6e}, residual = {:.3e}, {} evaluations ({:?})",
                diag.breakdown.psi, diag.residual, diag.optimizer.fevals, diag.optimizer.converged_on
            );
            Ok(())
        }
        Command::Evaluate { result, truth, out } => {
            let rep = cmd_evaluate(&result, &truth, &out)?;
            if let Some(c) = &rep.correlations {
                println!("matched correlations: {c:.4?}");
            }
            Ok(())
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            let payload = serde_json::json!({ "error": { "kind": err.kind(), "message": err.to_string() } });
            eprintln!("{payload}");
            exit_code(&err)
        }
    }
}
