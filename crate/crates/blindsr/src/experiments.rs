//! Monte-Carlo harness: sweeps over spike count, subspace dimension and
//! SNR, per-trial metrics, and result emission.
//!
//! Reproducibility contract: trial i always runs with seed
//! `seed_base + i`, results are collected by job index regardless of
//! worker scheduling, and every emitted byte except the `solve_ms`
//! column and `metadata.json` is a deterministic function of the config.

use crate::baseline::{localize_grid, GridSdp};
use crate::conic::{SolveOptions, SolveStatus};
use crate::localize::{estimate_rank, match_spikes, vandermonde_recover, LocalizationResult, MatchResult};
use crate::pswf::{build_basis, build_or_load, PswfBasis};
use crate::sdp::{gamma_default, AtomicSdp};
use crate::signal::{generate_instance, AmplitudeLaw, GenOptions, Instance, SamplingLaw, SubspaceLaw};
use crate::{Complex, Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A trial succeeds when every matched delay error is strictly below this
/// and the recovered spike count equals the truth.
pub const SUCCESS_TOL: f64 = 3e-4;

/// ‖Ẑ − Z‖_F² / ‖Z‖_F².
pub fn nmse(z_hat: &DMatrix<Complex>, z_true: &DMatrix<Complex>) -> Result<f64> {
    if z_hat.shape() != z_true.shape() {
        return Err(Error::invalid("nmse: shapes differ"));
    }
    let denom = z_true.norm_squared();
    if denom == 0.0 {
        return Err(Error::invalid("nmse: reference matrix is zero"));
    }
    Ok((z_hat - z_true).norm_squared() / denom)
}

/// Mean over trials of the squared ℓ₂ error of the matched spike pairs.
pub fn spike_mse(trials: &[Vec<(f64, f64)>]) -> Result<f64> {
    if trials.is_empty() {
        return Err(Error::invalid("spike_mse: no trials"));
    }
    let total: f64 =
        trials.iter().map(|t| t.iter().map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum();
    Ok(total / trials.len() as f64)
}

pub fn success_flag(max_error: f64, cardinality_match: bool) -> bool {
    cardinality_match && max_error < SUCCESS_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Pswf,
    Baseline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pswf => "pswf",
            Method::Baseline => "baseline",
        }
    }
}

/// Flat key–value experiment description. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Sweep axis: "k" | "l" | "snr" | "m" | "none" (default).
    #[serde(default)]
    pub sweep: Option<String>,
    #[serde(default)]
    pub k_values: Option<Vec<usize>>,
    #[serde(default)]
    pub l_values: Option<Vec<usize>>,
    #[serde(default)]
    pub snr_values: Option<Vec<f64>>,
    /// Second axis for phase-transition grids, or the primary axis when
    /// sweep = "m".
    #[serde(default)]
    pub m_values: Option<Vec<usize>>,
    pub m: usize,
    pub b_max: f64,
    pub k: usize,
    pub l: usize,
    pub min_sep: f64,
    pub trials: usize,
    pub seed_base: u64,
    /// "pswf" | "baseline" | "both".
    #[serde(default = "default_methods")]
    pub methods: String,
    /// "random" (default) | "uniform"; the baseline requires "uniform".
    #[serde(default)]
    pub sampling: Option<String>,
    /// dB; `inf` means noiseless (the default).
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub tol_gap: Option<f64>,
    #[serde(default)]
    pub tol_feas: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<u32>,
    /// Relative eigenvalue threshold for rank selection.
    #[serde(default)]
    pub tol_rank: Option<f64>,
    /// Basis accuracy (eigenvalue cut-off), default 1e-10.
    #[serde(default)]
    pub eps: Option<f64>,
    /// "unit" (default) | "gaussian".
    #[serde(default)]
    pub amp_law: Option<String>,
    /// "real" (default) | "complex".
    #[serde(default)]
    pub subspace_law: Option<String>,
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Basis cache directory; unset = rebuild in memory.
    #[serde(default)]
    pub cache_dir: Option<String>,
    // `full_*` values replace their counterparts when the --full flag asks
    // for the full-scale (non-desk) run of the same experiment
    #[serde(default)]
    pub full_trials: Option<usize>,
    #[serde(default)]
    pub full_b_max: Option<f64>,
    #[serde(default)]
    pub full_m: Option<usize>,
    #[serde(default)]
    pub full_m_values: Option<Vec<usize>>,
    #[serde(default)]
    pub full_k_values: Option<Vec<usize>>,
}

fn default_methods() -> String {
    "pswf".into()
}

/// One cell of the sweep: the complete instance dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    /// Value of the swept variable (as f64 so SNR fits), echoed in plot data.
    pub value: f64,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub snr_db: f64,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Swap in the `full_*` values (full-scale reproduction runs).
    pub fn apply_full(&mut self) {
        if let Some(t) = self.full_trials.take() {
            self.trials = t;
        }
        if let Some(b) = self.full_b_max.take() {
            self.b_max = b;
        }
        if let Some(m) = self.full_m.take() {
            self.m = m;
        }
        if let Some(ms) = self.full_m_values.take() {
            self.m_values = Some(ms);
        }
        if let Some(ks) = self.full_k_values.take() {
            self.k_values = Some(ks);
        }
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        match self.methods.as_str() {
            "pswf" => Ok(vec![Method::Pswf]),
            "baseline" => Ok(vec![Method::Baseline]),
            "both" => Ok(vec![Method::Pswf, Method::Baseline]),
            other => Err(Error::Config(format!(
                "methods must be \"pswf\", \"baseline\" or \"both\", got {other:?}"
            ))),
        }
    }

    pub fn gen_options(&self) -> Result<GenOptions> {
        let amp_law = match self.amp_law.as_deref() {
            None | Some("unit") => AmplitudeLaw::UnitModulus,
            Some("gaussian") => AmplitudeLaw::Gaussian,
            Some(o) => return Err(Error::Config(format!("amp_law must be \"unit\" or \"gaussian\", got {o:?}"))),
        };
        let subspace_law = match self.subspace_law.as_deref() {
            None | Some("real") => SubspaceLaw::RealGaussian,
            Some("complex") => SubspaceLaw::ComplexGaussian,
            Some(o) => {
                return Err(Error::Config(format!("subspace_law must be \"real\" or \"complex\", got {o:?}")))
            }
        };
        let sampling = match self.sampling.as_deref() {
            None | Some("random") => SamplingLaw::Random,
            Some("uniform") => SamplingLaw::Uniform,
            Some(o) => return Err(Error::Config(format!("sampling must be \"random\" or \"uniform\", got {o:?}"))),
        };
        Ok(GenOptions { amp_law, subspace_law, sampling })
    }

    pub fn solve_options(&self) -> SolveOptions {
        let mut o = SolveOptions::default();
        if let Some(g) = self.tol_gap {
            o.tol_gap = g;
        }
        if let Some(f) = self.tol_feas {
            o.tol_feas = f;
        }
        if let Some(i) = self.max_iter {
            o.max_iter = i;
        }
        o
    }

    pub fn rank_tol(&self) -> f64 {
        self.tol_rank.unwrap_or(crate::localize::RANK_REL_TOL)
    }

    pub fn basis_eps(&self) -> f64 {
        self.eps.unwrap_or(1e-10)
    }

    fn axis(&self) -> &str {
        self.sweep.as_deref().unwrap_or("none")
    }

    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        let snr = self.snr_db.unwrap_or(f64::INFINITY);
        let ms: Vec<usize> = match (self.axis(), &self.m_values) {
            ("m", _) => vec![self.m],
            (_, Some(v)) => v.clone(),
            (_, None) => vec![self.m],
        };
        let mut points = Vec::new();
        let need = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("sweep = \"{}\" needs a nonempty {name}", self.axis())))
            }
        };
        match self.axis() {
            "none" => {
                for &m in &ms {
                    points.push(SweepPoint { value: 0.0, k: self.k, l: self.l, m, snr_db: snr });
                }
            }
            "k" => {
                let ks = self.k_values.as_ref();
                need("k_values", ks.map_or(false, |v| !v.is_empty()))?;
                for &k in ks.unwrap() {
                    for &m in &ms {
                        points.push(SweepPoint { value: k as f64, k, l: self.l, m, snr_db: snr });
                    }
                }
            }
            "l" => {
                let ls = self.l_values.as_ref();
                need("l_values", ls.map_or(false, |v| !v.is_empty()))?;
                for &l in ls.unwrap() {
                    for &m in &ms {
                        points.push(SweepPoint { value: l as f64, k: self.k, l, m, snr_db: snr });
                    }
                }
            }
            "snr" => {
                let ss = self.snr_values.as_ref();
                need("snr_values", ss.map_or(false, |v| !v.is_empty()))?;
                for &s in ss.unwrap() {
                    for &m in &ms {
                        points.push(SweepPoint { value: s, k: self.k, l: self.l, m, snr_db: s });
                    }
                }
            }
            "m" => {
                let mv = self.m_values.as_ref();
                need("m_values", mv.map_or(false, |v| !v.is_empty()))?;
                for &m in mv.unwrap() {
                    points.push(SweepPoint { value: m as f64, k: self.k, l: self.l, m, snr_db: snr });
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "sweep must be one of \"k\", \"l\", \"snr\", \"m\", \"none\", got {other:?}"
                )))
            }
        }
        Ok(points)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be ≥ 1".into()));
        }
        if self.b_max <= 0.0 {
            return Err(Error::Config("b_max must be positive".into()));
        }
        let methods = self.methods()?;
        let gen = self.gen_options()?;
        if methods.contains(&Method::Baseline) && gen.sampling != SamplingLaw::Uniform {
            return Err(Error::Config(
                "the baseline method runs on uniform grids; set sampling = \"uniform\"".into(),
            ));
        }
        for pt in self.sweep_points()? {
            if pt.k == 0 {
                return Err(Error::Config("K must be ≥ 1".into()));
            }
            if pt.l >= pt.m {
                return Err(Error::Config(format!("need L < M, got L = {}, M = {}", pt.l, pt.m)));
            }
            if pt.k as f64 * self.min_sep >= 1.0 {
                return Err(Error::Config(format!(
                    "K·min_sep must stay below 1 (K = {}, min_sep = {})",
                    pt.k, self.min_sep
                )));
            }
            if pt.snr_db.is_nan() {
                return Err(Error::Config("snr values must be numbers or inf".into()));
            }
        }
        Ok(())
    }
}

/// Everything one method produced on one instance.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub status: SolveStatus,
    pub usable: bool,
    pub objective: f64,
    pub z_hat: DMatrix<Complex>,
    pub localization: Option<LocalizationResult>,
    /// The pencil could not separate the atoms; localization holds the
    /// partial result and the trial counts as failed.
    pub degenerate: bool,
    pub matched: Option<MatchResult>,
    pub nmse: f64,
    pub max_tau_err: f64,
    pub success: bool,
    pub solve_ms: f64,
    pub warnings: Vec<String>,
}

/// Solve one instance with one method and score it against the ground
/// truth carried by the instance.
pub fn run_method(
    inst: &Instance,
    method: Method,
    basis: Option<&PswfBasis>,
    opts: &SolveOptions,
    rank_tol: f64,
) -> Result<MethodRun> {
    let b_max = inst.scheme.b_max;
    let (status, usable, objective, z_hat, t, solve_ms, mut warnings) = match method {
        Method::Pswf => {
            let basis = basis.ok_or_else(|| Error::invalid("the pswf method needs a basis"))?;
            let sdp = AtomicSdp::new(basis, &inst.scheme, &inst.subspace.s_matrix)?;
            let sol = if inst.sigma == 0.0 {
                sdp.solve_noiseless(&inst.y, opts)?
            } else {
                let gamma = gamma_default(inst.sigma, inst.scheme.m(), b_max);
                sdp.solve_noisy(&inst.y, gamma, opts)?
            };
            (
                sol.report.status,
                sol.report.usable(),
                sol.objective,
                sol.z.clone(),
                sol.t(),
                sol.report.solve_ms,
                sol.warnings,
            )
        }
        Method::Baseline => {
            let sdp = GridSdp::new(&inst.scheme, &inst.subspace.s_matrix)?;
            let sol = if inst.sigma == 0.0 {
                sdp.solve_noiseless(&inst.y, opts)?
            } else {
                let gamma = gamma_default(inst.sigma, inst.scheme.m(), b_max);
                sdp.solve_noisy(&inst.y, gamma, opts)?
            };
            // localization consumes the conjugate internally; hand the raw
            // matrix through and let localize_grid deal with it below
            (
                sol.report.status,
                sol.report.usable(),
                sol.objective,
                sol.z.clone(),
                sol.t_u.clone(),
                sol.report.solve_ms,
                sol.warnings,
            )
        }
    };

    let (localization, degenerate) = if usable {
        let attempt = match method {
            Method::Pswf => match estimate_rank(&t, rank_tol)? {
                0 => Err(Error::numerical("moment matrix is numerically zero")),
                k_hat => vandermonde_recover(&t, k_hat, b_max),
            },
            Method::Baseline => localize_grid(&t, rank_tol, b_max),
        };
        match attempt {
            Ok(r) => (Some(r), false),
            Err(Error::DegenerateSpectrum { msg, partial }) => {
                warnings.push(format!("degenerate spectrum: {msg}"));
                (Some(*partial), true)
            }
            Err(Error::Numerical(msg)) => {
                warnings.push(format!("localization failed: {msg}"));
                (None, false)
            }
            Err(e) => return Err(e),
        }
    } else {
        (None, false)
    };

    let nmse_val = if usable { nmse(&z_hat, &inst.z_true)? } else { f64::NAN };
    let (matched, max_tau_err, success) = match &localization {
        Some(loc) if !loc.taus_hat.is_empty() => {
            let m = match_spikes(&loc.taus_hat, &inst.spikes.taus)?;
            let ok = usable && !degenerate && success_flag(m.max_error, m.cardinality_match);
            let err = m.max_error;
            (Some(m), err, ok)
        }
        _ => (None, f64::NAN, false),
    };

    Ok(MethodRun {
        method,
        status,
        usable,
        objective,
        z_hat,
        localization,
        degenerate,
        matched,
        nmse: nmse_val,
        max_tau_err,
        success,
        solve_ms,
        warnings,
    })
}

/// One row of the per-trial table. The CSV serialization writes the fixed
/// columns (trial, seed, method, K, L, M, snr_db, status, nmse,
/// max_tau_err, success, solve_ms); the extra fields feed the aggregates.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub method: &'static str,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub snr_db: f64,
    pub status: String,
    pub nmse: f64,
    pub max_tau_err: f64,
    pub success: bool,
    pub solve_ms: f64,
    /// Σ_k (τ̂_k − τ_k)² over the matched pairs (NaN without localization).
    pub tau_sq_err: f64,
    pub point_value: f64,
}

pub const CSV_HEADER: &str = "trial,seed,method,K,L,M,snr_db,status,nmse,max_tau_err,success,solve_ms";

impl TrialRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.seed,
            self.method,
            self.k,
            self.l,
            self.m,
            self.snr_db,
            self.status,
            self.nmse,
            self.max_tau_err,
            self.success,
            self.solve_ms
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointAggregate {
    pub method: &'static str,
    pub value: f64,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub snr_db: f64,
    pub trials: usize,
    /// Solver-usable trials: the NMSE pool.
    pub usable: usize,
    /// Trials excluded from the NMSE statistics (solver not usable).
    pub excluded: usize,
    /// Trials that produced matched spike pairs: the MSE pool.
    pub localized: usize,
    pub mean_nmse: f64,
    pub median_nmse: f64,
    pub success_rate: f64,
    pub spike_mse: f64,
    /// Standard error of the per-trial squared spike errors.
    pub spike_mse_stderr: f64,
    pub mean_solve_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<PointAggregate>,
}

fn median(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn aggregate_point(pt: &SweepPoint, method: Method, records: &[TrialRecord]) -> PointAggregate {
    let trials = records.len();
    let mut nmses: Vec<f64> = records.iter().filter(|r| r.nmse.is_finite()).map(|r| r.nmse).collect();
    nmses.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let usable = nmses.len();
    let sqerrs: Vec<f64> = records.iter().filter(|r| r.tau_sq_err.is_finite()).map(|r| r.tau_sq_err).collect();
    let localized = sqerrs.len();
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let spike = mean(&sqerrs);
    let stderr = if localized > 1 {
        let var = sqerrs.iter().map(|e| (e - spike).powi(2)).sum::<f64>() / (localized - 1) as f64;
        (var / localized as f64).sqrt()
    } else {
        f64::NAN
    };
    PointAggregate {
        method: method.name(),
        value: pt.value,
        k: pt.k,
        l: pt.l,
        m: pt.m,
        snr_db: pt.snr_db,
        trials,
        usable,
        excluded: trials - usable,
        localized,
        mean_nmse: mean(&nmses),
        median_nmse: median(&nmses),
        success_rate: records.iter().filter(|r| r.success).count() as f64 / trials.max(1) as f64,
        spike_mse: spike,
        spike_mse_stderr: stderr,
        mean_solve_ms: mean(&records.iter().map(|r| r.solve_ms).collect::<Vec<_>>()),
    }
}

fn run_trial(
    config: &ExperimentConfig,
    gen: GenOptions,
    opts: &SolveOptions,
    rank_tol: f64,
    basis: Option<&PswfBasis>,
    pt: SweepPoint,
    method: Method,
    trial: usize,
) -> TrialRecord {
    let seed = config.seed_base + trial as u64;
    let mut rec = TrialRecord {
        trial,
        seed,
        method: method.name(),
        k: pt.k,
        l: pt.l,
        m: pt.m,
        snr_db: pt.snr_db,
        status: String::new(),
        nmse: f64::NAN,
        max_tau_err: f64::NAN,
        success: false,
        solve_ms: f64::NAN,
        tau_sq_err: f64::NAN,
        point_value: pt.value,
    };
    let inst = match generate_instance(pt.k, pt.l, pt.m, config.b_max, config.min_sep, pt.snr_db, seed, gen) {
        Ok(i) => i,
        Err(_) => {
            rec.status = "generate-error".into();
            return rec;
        }
    };
    match run_method(&inst, method, basis, opts, rank_tol) {
        Ok(run) => {
            rec.status = run.status.to_string();
            rec.nmse = run.nmse;
            rec.max_tau_err = run.max_tau_err;
            rec.success = run.success;
            rec.solve_ms = run.solve_ms;
            rec.tau_sq_err = run.matched.as_ref().map_or(f64::NAN, |m| {
                m.errors.iter().map(|e| e * e).sum()
            });
        }
        Err(_) => {
            rec.status = "solver-error".into();
        }
    }
    rec
}

/// Run the whole sweep. Individual trial failures are recorded in their
/// rows and never abort the run; outputs are written when the config
/// names an output directory.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let points = config.sweep_points()?;
    let methods = config.methods()?;
    let gen = config.gen_options()?;
    let opts = config.solve_options();
    let rank_tol = config.rank_tol();
    let basis = if methods.contains(&Method::Pswf) {
        Some(match &config.cache_dir {
            Some(dir) => build_or_load(config.b_max, config.basis_eps(), Path::new(dir))?,
            None => build_basis(config.b_max, config.basis_eps())?,
        })
    } else {
        None
    };

    let jobs: Vec<(SweepPoint, Method, usize)> = points
        .iter()
        .flat_map(|&pt| {
            methods.iter().flat_map(move |&m| (0..config.trials).map(move |t| (pt, m, t)))
        })
        .collect();
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(pt, method, trial)| run_trial(config, gen, &opts, rank_tol, basis.as_ref(), pt, method, trial))
        .collect();

    let mut aggregates = Vec::new();
    let mut offset = 0;
    for &pt in &points {
        for &method in &methods {
            let slice = &records[offset..offset + config.trials];
            aggregates.push(aggregate_point(&pt, method, slice));
            offset += config.trials;
        }
    }

    let result = ExperimentResult { config: config.clone(), records, aggregates };
    if let Some(dir) = &config.out_dir {
        emit_outputs(&result, Path::new(dir))?;
    }
    Ok(result)
}

/// The per-trial table as one CSV string (fixed column order).
pub fn trials_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &result.records {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// NMSE-vs-sweep curve data, one row per (sweep value, M, method).
pub fn sweep_curve_csv(result: &ExperimentResult) -> String {
    let axis = result.config.sweep.as_deref().unwrap_or("none");
    let mut out = String::from(
        "axis,value,m,method,mean_nmse,median_nmse,success_rate,spike_mse,spike_mse_stderr,usable,localized,trials\n",
    );
    for a in &result.aggregates {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            axis,
            a.value,
            a.m,
            a.method,
            a.mean_nmse,
            a.median_nmse,
            a.success_rate,
            a.spike_mse,
            a.spike_mse_stderr,
            a.usable,
            a.localized,
            a.trials
        ));
    }
    out
}

/// Success-rate heatmap in long form (sweep value × M).
pub fn success_grid_csv(result: &ExperimentResult) -> String {
    let axis = result.config.sweep.as_deref().unwrap_or("none");
    let mut out = String::from("axis,value,m,method,success_rate\n");
    for a in &result.aggregates {
        out.push_str(&format!("{},{},{},{},{}\n", axis, a.value, a.m, a.method, a.success_rate));
    }
    out
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Render the sweep outputs: NMSE curves and the success-rate grid."""
import csv
import sys
from pathlib import Path

try:
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is required: pip install matplotlib")

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent

rows = list(csv.DictReader(open(out / "nmse_vs_sweep.csv")))
methods = sorted({r["method"] for r in rows})
fig, ax = plt.subplots()
for m in methods:
    pts = [(float(r["value"]), float(r["mean_nmse"])) for r in rows if r["method"] == m and r["mean_nmse"] != "NaN"]
    if pts:
        ax.semilogy(*zip(*sorted(pts)), marker="o", label=m)
ax.set_xlabel(rows[0]["axis"] if rows else "value")
ax.set_ylabel("mean NMSE")
ax.legend()
fig.savefig(out / "nmse_vs_sweep.png", dpi=150)

grid = list(csv.DictReader(open(out / "success_grid.csv")))
xs = sorted({float(r["m"]) for r in grid})
ys = sorted({float(r["value"]) for r in grid})
if len(xs) > 1 and len(ys) > 1:
    for m in sorted({r["method"] for r in grid}):
        img = [[0.0] * len(xs) for _ in ys]
        for r in grid:
            if r["method"] == m:
                img[ys.index(float(r["value"]))][xs.index(float(r["m"]))] = float(r["success_rate"])
        fig, ax = plt.subplots()
        pc = ax.imshow(img, origin="lower", aspect="auto",
                       extent=[min(xs), max(xs), min(ys), max(ys)], vmin=0, vmax=1)
        fig.colorbar(pc, label="success rate")
        ax.set_xlabel("M")
        ax.set_ylabel(grid[0]["axis"])
        fig.savefig(out / f"success_grid_{m}.png", dpi=150)
print("wrote plots to", out)
"#;

/// Write trials.csv, aggregate.json, the plot-data CSVs, the plotting
/// hook and metadata.json (the only file carrying timestamps).
pub fn emit_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("trials.csv"), trials_csv(result))?;
    let agg = serde_json::json!({
        "config": result.config,
        "aggregates": result.aggregates,
    });
    std::fs::write(dir.join("aggregate.json"), serde_json::to_string_pretty(&agg)?)?;
    std::fs::write(dir.join("nmse_vs_sweep.csv"), sweep_curve_csv(result))?;
    std::fs::write(dir.join("success_grid.csv"), success_grid_csv(result))?;
    std::fs::write(dir.join("plot.py"), PLOT_SCRIPT)?;
    let meta = serde_json::json!({
        "created_unix_s": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        "crate_version": env!("CARGO_PKG_VERSION"),
        "total_solve_ms": result.records.iter().map(|r| if r.solve_ms.is_finite() { r.solve_ms } else { 0.0 }).sum::<f64>(),
    });
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// The CSV with the timing column blanked — the part of the output that
/// must be byte-identical across reruns of the same config.
pub fn deterministic_csv(csv: &str) -> String {
    let mut out = String::new();
    for line in csv.lines() {
        match line.rsplit_once(',') {
            Some((head, _)) => {
                out.push_str(head);
                out.push('\n');
            }
            None => {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(m: usize, l: usize, f: impl Fn(usize, usize) -> Complex) -> DMatrix<Complex> {
        DMatrix::from_fn(m, l, |i, j| f(i, j))
    }

    #[test]
    fn nmse_trivial_values() {
        let a = z(3, 2, |i, j| Complex::new((i + j) as f64 + 1.0, 0.5));
        assert_eq!(nmse(&a, &a).unwrap(), 0.0);
        let zero = z(3, 2, |_, _| Complex::new(0.0, 0.0));
        assert_eq!(nmse(&zero, &a).unwrap(), 1.0);
        let double = a.map(|v| v * 2.0);
        assert!((nmse(&double, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!(nmse(&a, &zero).is_err());
    }

    #[test]
    fn spike_mse_trivial_values() {
        let perfect = vec![vec![(0.1, 0.1), (-0.2, -0.2)], vec![(0.3, 0.3)]];
        assert_eq!(spike_mse(&perfect).unwrap(), 0.0);
        let one = vec![vec![(0.2, 0.1)]];
        assert!((spike_mse(&one).unwrap() - 0.01).abs() < 1e-15);
        assert!(spike_mse(&[]).is_err());
    }

    #[test]
    fn success_threshold_is_strict() {
        assert!(success_flag(0.0, true));
        assert!(!success_flag(3e-4, true));
        assert!(success_flag(2.9e-4, true));
        assert!(!success_flag(2.9e-4, false));
    }

    const BASE_TOML: &str = r#"
m = 8
b_max = 4.0
k = 1
l = 1
min_sep = 0.1
trials = 2
seed_base = 100
"#;

    #[test]
    fn toml_round_trip_and_defaults() {
        let c = ExperimentConfig::from_toml_str(BASE_TOML).unwrap();
        assert_eq!(c.m, 8);
        assert_eq!(c.methods, "pswf");
        assert_eq!(c.sweep_points().unwrap().len(), 1);
        assert!(c.sweep_points().unwrap()[0].snr_db.is_infinite());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{BASE_TOML}\nnot_a_key = 3\n");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("not_a_key"), "{err}");
    }

    #[test]
    fn infinite_snr_parses_from_toml() {
        let text = format!("{BASE_TOML}\nsnr_db = inf\n");
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        assert!(c.snr_db.unwrap().is_infinite());
    }

    #[test]
    fn sweep_grid_enumerates_value_major_then_m() {
        let text = format!("{BASE_TOML}\nsweep = \"k\"\nk_values = [1, 2]\nm_values = [8, 10]\n");
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        let pts = c.sweep_points().unwrap();
        let got: Vec<(usize, usize)> = pts.iter().map(|p| (p.k, p.m)).collect();
        assert_eq!(got, vec![(1, 8), (1, 10), (2, 8), (2, 10)]);
    }

    #[test]
    fn validation_catches_model_violations() {
        let bad_l = format!("{BASE_TOML}\nl_values = [9]\nsweep = \"l\"\n");
        assert!(ExperimentConfig::from_toml_str(&bad_l).unwrap().validate().is_err());
        let bad_sep = BASE_TOML.replace("min_sep = 0.1", "min_sep = 0.5").replace("k = 1", "k = 2");
        assert!(ExperimentConfig::from_toml_str(&bad_sep).unwrap().validate().is_err());
        let baseline_random = format!("{BASE_TOML}\nmethods = \"baseline\"\n");
        assert!(ExperimentConfig::from_toml_str(&baseline_random).unwrap().validate().is_err());
    }

    #[test]
    fn full_overrides_swap_in() {
        let text = format!("{BASE_TOML}\nfull_trials = 50\nfull_b_max = 64.0\n");
        let mut c = ExperimentConfig::from_toml_str(&text).unwrap();
        c.apply_full();
        assert_eq!(c.trials, 50);
        assert_eq!(c.b_max, 64.0);
    }

    fn tiny_config() -> ExperimentConfig {
        let text = format!("{BASE_TOML}\nmethods = \"both\"\nsampling = \"uniform\"\n");
        ExperimentConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn monte_carlo_runs_both_methods_and_is_deterministic() {
        let config = tiny_config();
        let a = run_monte_carlo(&config).unwrap();
        let b = run_monte_carlo(&config).unwrap();
        assert_eq!(a.records.len(), 4); // 2 trials × 2 methods
        assert_eq!(
            deterministic_csv(&trials_csv(&a)),
            deterministic_csv(&trials_csv(&b)),
            "rerun with the same config must reproduce the CSV"
        );
        // the tiny instance is easy: everything should actually succeed
        for r in &a.records {
            assert!(r.success, "trial {} ({}) failed: status {}", r.trial, r.method, r.status);
            assert!(r.nmse < 1e-4, "nmse {}", r.nmse);
        }
    }

    #[test]
    fn single_trial_matches_a_direct_solve() {
        let config = tiny_config();
        let mut one = config.clone();
        one.trials = 1;
        one.methods = "pswf".into();
        let res = run_monte_carlo(&one).unwrap();
        assert_eq!(res.records.len(), 1);

        let gen = one.gen_options().unwrap();
        let inst = generate_instance(1, 1, 8, 4.0, 0.1, f64::INFINITY, 100, gen).unwrap();
        let basis = build_basis(4.0, 1e-10).unwrap();
        let direct =
            run_method(&inst, Method::Pswf, Some(&basis), &one.solve_options(), one.rank_tol()).unwrap();
        assert_eq!(res.records[0].nmse.to_bits(), direct.nmse.to_bits());
        assert_eq!(res.records[0].max_tau_err.to_bits(), direct.max_tau_err.to_bits());
    }

    #[test]
    fn aggregates_recompute_from_the_emitted_csv() {
        let dir = std::env::temp_dir().join(format!("blindsr-emit-{}", std::process::id()));
        let mut config = tiny_config();
        config.out_dir = Some(dir.to_string_lossy().into_owned());
        let res = run_monte_carlo(&config).unwrap();
        let text = std::fs::read_to_string(dir.join("trials.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        // recompute the pswf mean NMSE from the CSV column
        let mut vals = Vec::new();
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            if cols[2] == "pswf" {
                vals.push(cols[8].parse::<f64>().unwrap());
            }
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let agg = res.aggregates.iter().find(|a| a.method == "pswf").unwrap();
        assert_eq!(mean.to_bits(), agg.mean_nmse.to_bits());
        for f in ["aggregate.json", "nmse_vs_sweep.csv", "success_grid.csv", "plot.py", "metadata.json"] {
            assert!(dir.join(f).exists(), "{f} missing");
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
