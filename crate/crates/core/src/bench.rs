//! Monte Carlo experiment runner.
//!
//! A run sweeps privacy levels, tasks and mechanism families over a number
//! of replications. Each replication draws one path that is shared by every
//! `(α, task, mechanism)` cell, so comparisons at a fixed budget use common
//! random numbers. Noise streams are keyed by the cell and the replication,
//! which makes results independent of how replications are scheduled.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estim::{
    baseline_nonprivate, default_omega_grid, est_cov_ni, est_cov_si, est_cov_vector_global,
    est_cov_vector_ni, est_sdf_ni, est_sdf_point_si, sample_cov, BaselineTask,
};
use crate::mech::{privatize_ni, privatize_si_cov, privatize_si_global, privatize_si_point};
use crate::model::{
    bandwidth, cosine_sum, spectral_from_cov, truncation_schedule, BandwidthTask,
    CovarianceSequence, MechanismKind, PrivacyBudget, TruncationSchedule,
};
use crate::procgen::{covs_of, GaussianSampler, ProcessSpec, SeededRng};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "LDP_SPECTRAL_THREADS";

/// Frequencies on `[0, π]` used for the integrated error of `sdf_global`.
pub const GLOBAL_GRID_POINTS: usize = 64;

/// Lags kept beyond `n` when building the true covariance sequence.
const MIN_TRUTH_LAGS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Task {
    /// `σ_j`; `cov0` is `Cov(0)`.
    Cov(usize),
    SdfPoint(f64),
    SdfGlobal,
}

impl Task {
    pub fn is_spectral(&self) -> bool {
        !matches!(self, Task::Cov(_))
    }
}

fn parse_frequency(s: &str) -> Result<f64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.to_string(), parse_frequency(b)?),
        None => (s.clone(), 1.0),
    };
    let value = if let Some(coef) = num.strip_suffix("pi") {
        let coef = coef.trim_end_matches('*');
        let c = if coef.is_empty() {
            1.0
        } else {
            coef.parse::<f64>()
                .map_err(|e| Error::Config(format!("bad frequency {s:?}: {e}")))?
        };
        c * PI
    } else {
        num.parse::<f64>()
            .map_err(|e| Error::Config(format!("bad frequency {s:?}: {e}")))?
    };
    let w = value / den;
    if w.is_finite() {
        Ok(w)
    } else {
        Err(Error::Config(format!("bad frequency {s:?}")))
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let arg = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
        };
        if s == "cov0" {
            Ok(Task::Cov(0))
        } else if s == "sdf_global" {
            Ok(Task::SdfGlobal)
        } else if let Some(j) = arg("cov_j") {
            j.trim()
                .parse()
                .map(Task::Cov)
                .map_err(|e| Error::Config(format!("bad lag in {s:?}: {e}")))
        } else if let Some(w) = arg("sdf_point") {
            parse_frequency(w).map(Task::SdfPoint)
        } else {
            Err(Error::Config(format!("unknown task {s:?}")))
        }
    }
}

impl TryFrom<String> for Task {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Task> for String {
    fn from(t: Task) -> String {
        t.to_string()
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Cov(0) => write!(f, "cov0"),
            Task::Cov(j) => write!(f, "cov_j({j})"),
            Task::SdfPoint(w) => {
                let ratio = PI / w;
                if (ratio - ratio.round()).abs() < 1e-12 && ratio.round() != 0.0 {
                    if ratio.round() == 1.0 {
                        write!(f, "sdf_point(pi)")
                    } else {
                        write!(f, "sdf_point(pi/{})", ratio.round())
                    }
                } else {
                    write!(f, "sdf_point({w:?})")
                }
            }
            Task::SdfGlobal => write!(f, "sdf_global"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MechanismFamily {
    #[serde(rename = "NI")]
    Ni,
    #[serde(rename = "SI")]
    Si,
    #[serde(rename = "nonprivate")]
    NonPrivate,
}

impl MechanismFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            MechanismFamily::Ni => "NI",
            MechanismFamily::Si => "SI",
            MechanismFamily::NonPrivate => "nonprivate",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "NI" => Ok(MechanismFamily::Ni),
            "SI" => Ok(MechanismFamily::Si),
            "nonprivate" => Ok(MechanismFamily::NonPrivate),
            _ => Err(Error::Parse(format!("unknown mechanism {s:?}"))),
        }
    }
}

/// Scaling convention for spectral densities reported by the runner.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityNormalization {
    /// `f(ω) = (1/2π) Σ σ_j e^{−ijω}`.
    #[default]
    Eq1,
    /// The same sum without the `1/2π` factor.
    No2pi,
}

impl DensityNormalization {
    pub fn factor(self) -> f64 {
        match self {
            DensityNormalization::Eq1 => 1.0,
            DensityNormalization::No2pi => 2.0 * PI,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "eq1" => Ok(DensityNormalization::Eq1),
            "no2pi" => Ok(DensityNormalization::No2pi),
            _ => Err(Error::Config(format!(
                "unknown density normalization {s:?}"
            ))),
        }
    }
}

fn default_s() -> f64 {
    3.0
}

fn default_delta_log() -> f64 {
    0.001
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in example 1, 2 or 3; exclusive with `process`.
    #[serde(default)]
    pub example: Option<u8>,
    #[serde(default)]
    pub process: Option<ProcessSpec>,
    pub n: usize,
    pub replications: usize,
    pub alphas: Vec<f64>,
    pub tasks: Vec<Task>,
    pub mechanisms: Vec<MechanismFamily>,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_delta_log")]
    pub delta_log: f64,
    #[serde(default)]
    pub tau_override: Option<f64>,
    #[serde(default)]
    pub tau_tilde_override: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub density_normalization: DensityNormalization,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        match (&self.example, &self.process) {
            (Some(id), None) if (1..=3).contains(id) => {}
            (Some(id), None) => return fail(format!("example must be 1, 2 or 3, got {id}")),
            (None, Some(p)) => p.validate().map_err(|e| Error::Config(e.to_string()))?,
            _ => return fail("exactly one of `example` and `process` is required".into()),
        }
        if self.n < 4 {
            return fail(format!("n must be at least 4, got {}", self.n));
        }
        if self.replications == 0 || self.replications > u32::MAX as usize {
            return fail("replications must be in 1..=2^32-1".into());
        }
        if self.alphas.len() >= 1 << 16 {
            return fail("too many alphas".into());
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return fail("alphas must be positive and finite".into());
        }
        if self.alphas.windows(2).any(|w| w[0] >= w[1]) {
            return fail("alphas must be sorted in strictly ascending order".into());
        }
        if self.tasks.is_empty() || self.tasks.len() >= 1 << 8 {
            return fail("tasks must be non-empty".into());
        }
        if self.mechanisms.is_empty() {
            return fail("mechanisms must be non-empty".into());
        }
        for t in &self.tasks {
            if let Task::Cov(j) = t {
                if *j >= self.n {
                    return fail(format!("lag {j} must be below n = {}", self.n));
                }
            }
        }
        if !(self.s > 0.5) {
            return fail(format!("s must exceed 1/2, got {}", self.s));
        }
        if !(self.delta_log >= 0.0 && self.delta_log.is_finite()) {
            return fail("delta_log must be nonnegative".into());
        }
        for (name, v) in [
            ("tau_override", self.tau_override),
            ("tau_tilde_override", self.tau_tilde_override),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return fail(format!("{name} must be positive, got {v}"));
                }
            }
        }
        Ok(())
    }

    pub fn example_label(&self) -> String {
        match self.example {
            Some(id) => id.to_string(),
            None => "custom".into(),
        }
    }

    fn process_spec(&self, max_lag: usize) -> Result<ProcessSpec> {
        match (&self.example, &self.process) {
            (Some(id), _) => ProcessSpec::example(*id, max_lag),
            (None, Some(p)) => Ok(p.clone()),
            (None, None) => Err(Error::Config("no process configured".into())),
        }
    }

    /// Exact covariances with at least `max(n, 512)` lags.
    pub fn true_covariances(&self) -> Result<CovarianceSequence> {
        let covs = covs_of(&self.process_spec(self.n.max(MIN_TRUTH_LAGS))?)?;
        Ok(covs)
    }
}

/// Ground truth of a scalar task under the `1/2π` convention.
pub fn true_value(covs: &CovarianceSequence, task: Task) -> f64 {
    match task {
        Task::Cov(j) => covs.get(j as i64),
        Task::SdfPoint(w) => spectral_from_cov(covs, w),
        Task::SdfGlobal => {
            let grid = default_omega_grid(GLOBAL_GRID_POINTS);
            let ms = grid
                .iter()
                .map(|w| spectral_from_cov(covs, *w).powi(2))
                .sum::<f64>()
                / grid.len() as f64;
            ms.sqrt()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub example: String,
    pub task: Task,
    pub mechanism: MechanismFamily,
    /// `+∞` for non-private rows.
    pub alpha: f64,
    pub mse: f64,
    pub mse_se: f64,
    pub truth: f64,
    pub n: usize,
    pub replications: usize,
    pub tau: Option<f64>,
    pub tau_tilde: Option<f64>,
    pub bandwidth: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

/// Resolved settings of one `(α, task, mechanism)` cell.
#[derive(Clone, Copy, Debug)]
struct Cell {
    alpha_index: usize,
    task_index: usize,
    mechanism: MechanismFamily,
    alpha: f64,
    task: Task,
    sched: Option<TruncationSchedule>,
    bandwidth: Option<usize>,
}

fn mechanism_code(m: MechanismFamily) -> u64 {
    match m {
        MechanismFamily::Ni => 0,
        MechanismFamily::Si => 1,
        MechanismFamily::NonPrivate => 2,
    }
}

/// Stream of the shared path of replication `r`.
fn path_stream(r: usize) -> u64 {
    (r as u64) << 1
}

/// Stream of the privacy noise of one cell, disjoint from path streams.
fn noise_stream(cell: &Cell, r: usize) -> u64 {
    let code = (((r as u64) << 16 | cell.alpha_index as u64) << 8 | cell.task_index as u64) << 2
        | mechanism_code(cell.mechanism);
    code << 1 | 1
}

fn apply_overrides(
    cfg: &ExperimentConfig,
    mut s: TruncationSchedule,
) -> Result<TruncationSchedule> {
    if cfg.tau_override.is_some() || cfg.tau_tilde_override.is_some() {
        s = TruncationSchedule::custom(
            cfg.tau_override.unwrap_or(s.tau),
            cfg.tau_tilde_override.unwrap_or(s.tau_tilde),
            s.kind,
        )?;
    }
    Ok(s)
}

/// Non-private Fourier truncation `⌈n^{1/(2s+1)}⌉`.
fn nonprivate_order(n: usize, s: f64) -> usize {
    ((n as f64).powf(1.0 / (2.0 * s + 1.0)).ceil() as usize).clamp(1, n - 1)
}

fn resolve_cell(
    cfg: &ExperimentConfig,
    alpha_index: usize,
    task_index: usize,
    mechanism: MechanismFamily,
) -> Result<Cell> {
    let task = cfg.tasks[task_index];
    let alpha = if mechanism == MechanismFamily::NonPrivate {
        f64::INFINITY
    } else {
        cfg.alphas[alpha_index]
    };
    let n = cfg.n;
    let mut cell = Cell {
        alpha_index,
        task_index,
        mechanism,
        alpha,
        task,
        sched: None,
        bandwidth: None,
    };
    if mechanism == MechanismFamily::NonPrivate {
        if task.is_spectral() {
            cell.bandwidth = Some(nonprivate_order(n, cfg.s));
        }
        return Ok(cell);
    }
    let budget = PrivacyBudget::new(alpha, cfg.delta_log)?;
    let schedule = |kind, k| -> Result<TruncationSchedule> {
        apply_overrides(cfg, truncation_schedule(n, &budget, kind, k)?)
    };
    match (mechanism, task) {
        (MechanismFamily::Ni, Task::Cov(_)) => {
            cell.sched = Some(schedule(MechanismKind::Ni, None)?)
        }
        (MechanismFamily::Ni, Task::SdfPoint(_)) => {
            let s = schedule(MechanismKind::Ni, None)?;
            cell.bandwidth = Some(bandwidth(
                n,
                &budget,
                cfg.s,
                &s,
                BandwidthTask::NiPointHoelder,
            )?);
            cell.sched = Some(s);
        }
        (MechanismFamily::Ni, Task::SdfGlobal) => {
            let s = schedule(MechanismKind::Ni, None)?;
            cell.bandwidth = Some(bandwidth(n, &budget, cfg.s, &s, BandwidthTask::NiGlobal)?);
            cell.sched = Some(s);
        }
        (MechanismFamily::Si, Task::Cov(_)) => {
            cell.sched = Some(schedule(MechanismKind::SiCov, None)?)
        }
        (MechanismFamily::Si, Task::SdfPoint(_)) => {
            // the pointwise order depends on τ only, which does not depend on K
            let probe = schedule(MechanismKind::SiPoint, Some(1))?;
            let k = bandwidth(n, &budget, cfg.s, &probe, BandwidthTask::SiPointHoelder)?;
            cell.sched = Some(schedule(MechanismKind::SiPoint, Some(k))?);
            cell.bandwidth = Some(k);
        }
        (MechanismFamily::Si, Task::SdfGlobal) => {
            let s = schedule(MechanismKind::SiGlobal, None)?;
            let k = bandwidth(n, &budget, cfg.s, &s, BandwidthTask::SiGlobal)?
                .max(2)
                .min(n - 1);
            cell.sched = Some(s);
            cell.bandwidth = Some(k);
        }
        (MechanismFamily::NonPrivate, _) => unreachable!(),
    }
    Ok(cell)
}

fn cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let mut out = Vec::new();
    for (ti, _) in cfg.tasks.iter().enumerate() {
        for &m in &cfg.mechanisms {
            if m == MechanismFamily::NonPrivate {
                out.push(resolve_cell(cfg, 0, ti, m)?);
            } else {
                for ai in 0..cfg.alphas.len() {
                    out.push(resolve_cell(cfg, ai, ti, m)?);
                }
            }
        }
    }
    Ok(out)
}

/// Per-task reference values: a scalar, or the density on the global grid.
struct Truth {
    scalar: f64,
    curve: Vec<f64>,
}

fn squared_error_global(estimate_covs: &[f64], truth: &Truth, grid: &[f64], scale: f64) -> f64 {
    grid.iter()
        .zip(&truth.curve)
        .map(|(w, f)| (scale * cosine_sum(estimate_covs, *w) - f).powi(2))
        .sum::<f64>()
        / grid.len() as f64
}

fn cell_error(
    cell: &Cell,
    path: &[f64],
    truth: &Truth,
    grid: &[f64],
    scale: f64,
    rng: &mut SeededRng,
) -> Result<f64> {
    let sq = |est: f64| (est - truth.scalar).powi(2);
    let k = cell.bandwidth.unwrap_or(0);
    match cell.mechanism {
        MechanismFamily::NonPrivate => match cell.task {
            Task::Cov(j) => Ok(sq(baseline_nonprivate(path, BaselineTask::Cov { j })?)),
            Task::SdfPoint(omega) => {
                Ok(sq(scale
                    * baseline_nonprivate(
                        path,
                        BaselineTask::SpectralPoint { omega, k },
                    )?))
            }
            Task::SdfGlobal => {
                let covs = (0..=k)
                    .map(|j| sample_cov(path, j))
                    .collect::<Result<Vec<_>>>()?;
                Ok(squared_error_global(&covs, truth, grid, scale))
            }
        },
        MechanismFamily::Ni => {
            let sched = cell.sched.expect("private cell has a schedule");
            let t = privatize_ni(path, &sched, cell.alpha, rng)?;
            match cell.task {
                Task::Cov(j) => Ok(sq(est_cov_ni(&t, j as i64, &sched, cell.alpha)?)),
                Task::SdfPoint(w) => Ok(sq(scale * est_sdf_ni(&t, k, &sched, cell.alpha, w)?)),
                Task::SdfGlobal => {
                    let covs = est_cov_vector_ni(&t, k, &sched, cell.alpha)?;
                    Ok(squared_error_global(&covs, truth, grid, scale))
                }
            }
        }
        MechanismFamily::Si => {
            let sched = cell.sched.expect("private cell has a schedule");
            match cell.task {
                Task::Cov(j) => {
                    let t = privatize_si_cov(path, j, &sched, cell.alpha, rng)?;
                    Ok(sq(est_cov_si(&t, j)?))
                }
                Task::SdfPoint(w) => {
                    let t = privatize_si_point(path, w, k, &sched, cell.alpha, rng)?;
                    Ok(sq(scale * est_sdf_point_si(&t, k, w)?))
                }
                Task::SdfGlobal => {
                    let t = privatize_si_global(path, k, &sched, cell.alpha, rng)?;
                    let covs = est_cov_vector_global(&t, k)?;
                    Ok(squared_error_global(&covs, truth, grid, scale))
                }
            }
        }
    }
}

/// Pairwise (cascade) summation in index order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Mean and standard error of the mean (sample SD over `√R`; 0 when `R = 1`).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = pairwise_sum(values) / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let sd = (pairwise_sum(&dev) / (r - 1.0)).sqrt();
    (mean, sd / r.sqrt())
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs the experiment with the worker cap taken from the environment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with_threads(cfg, threads_from_env()?)
}

/// Runs the experiment on at most `threads` workers (all cores when `None`).
pub fn run_experiment_with_threads(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let covs = cfg.true_covariances()?;
    let sampler = GaussianSampler::new(&covs, cfg.n)?;
    let cells = cells(cfg)?;
    let grid = default_omega_grid(GLOBAL_GRID_POINTS);
    let scale = cfg.density_normalization.factor();
    let truths: Vec<Truth> = cfg
        .tasks
        .iter()
        .map(|&task| Truth {
            scalar: if task.is_spectral() { scale } else { 1.0 } * true_value(&covs, task),
            curve: match task {
                Task::SdfGlobal => grid
                    .iter()
                    .map(|w| scale * spectral_from_cov(&covs, *w))
                    .collect(),
                _ => Vec::new(),
            },
        })
        .collect();

    let replicate = |r: usize| -> Result<Vec<f64>> {
        let path = sampler.sample(&mut SeededRng::new(cfg.seed, path_stream(r)));
        cells
            .iter()
            .map(|cell| {
                let mut rng = SeededRng::new(cfg.seed, noise_stream(cell, r));
                cell_error(
                    cell,
                    &path,
                    &truths[cell.task_index],
                    &grid,
                    scale,
                    &mut rng,
                )
                .map_err(|e| {
                    Error::Runtime(format!(
                        "replication {r}, task {}, mechanism {}: {e}",
                        cell.task,
                        cell.mechanism.as_str()
                    ))
                })
            })
            .collect()
    };
    let errors: Vec<Vec<f64>> = {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.unwrap_or(0))
            .build()
            .map_err(|e| Error::Runtime(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..cfg.replications)
                .into_par_iter()
                .map(replicate)
                .collect::<Result<_>>()
        })?
    };

    let label = cfg.example_label();
    let rows = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let per_rep: Vec<f64> = errors.iter().map(|row| row[c]).collect();
            let (mse, mse_se) = mean_and_se(&per_rep);
            ResultRow {
                example: label.clone(),
                task: cell.task,
                mechanism: cell.mechanism,
                alpha: cell.alpha,
                mse,
                mse_se,
                truth: truths[cell.task_index].scalar,
                n: cfg.n,
                replications: cfg.replications,
                tau: cell.sched.map(|s| s.tau),
                tau_tilde: cell.sched.map(|s| s.tau_tilde),
                bandwidth: cell.bandwidth,
            }
        })
        .collect();
    Ok(ExperimentResult { rows })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares of `ln(mse)` on `ln(α)` over points with `α` in the window.
pub fn fit_loglog_slope(points: &[(f64, f64)], window: (f64, f64)) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(a, _)| *a >= window.0 && *a <= window.1)
        .map(|&(a, m)| {
            if a > 0.0 && m > 0.0 {
                Ok((a.ln(), m.ln()))
            } else {
                Err(invalid(format!(
                    "log-log fit needs positive values, got ({a}, {m})"
                )))
            }
        })
        .collect::<Result<_>>()?;
    if pts.len() < 3 {
        return Err(invalid(format!(
            "slope fit needs at least 3 points in the window, got {}",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("slope fit needs distinct alphas"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
    })
}

pub const CSV_COLUMNS: [&str; 12] = [
    "example",
    "task",
    "mechanism",
    "alpha",
    "mse",
    "mse_se",
    "truth",
    "n",
    "replications",
    "tau",
    "tau_tilde",
    "bandwidth",
];

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

pub fn write_csv<W: Write>(out: W, result: &ExperimentResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in &result.rows {
        w.write_record([
            r.example.clone(),
            r.task.to_string(),
            r.mechanism.as_str().to_string(),
            fmt17(r.alpha),
            fmt17(r.mse),
            fmt17(r.mse_se),
            fmt17(r.truth),
            r.n.to_string(),
            r.replications.to_string(),
            r.tau.map(fmt17).unwrap_or_default(),
            r.tau_tilde.map(fmt17).unwrap_or_default(),
            r.bandwidth.map(|b| b.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    write_csv(
        std::io::BufWriter::new(std::fs::File::create(path)?),
        result,
    )
}

pub fn parse_csv<R: Read>(input: R) -> Result<ExperimentResult> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Parse(format!("unexpected header {headers:?}")));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
    };
    let int = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|e| Error::Parse(format!("bad integer {s:?}: {e}")))
    };
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s).map(Some)
        }
    };
    let rows = r
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(ResultRow {
                example: rec[0].to_string(),
                task: rec[1]
                    .parse()
                    .map_err(|e: Error| Error::Parse(e.to_string()))?,
                mechanism: MechanismFamily::parse(&rec[2])?,
                alpha: num(&rec[3])?,
                mse: num(&rec[4])?,
                mse_se: num(&rec[5])?,
                truth: num(&rec[6])?,
                n: int(&rec[7])?,
                replications: int(&rec[8])?,
                tau: opt(&rec[9])?,
                tau_tilde: opt(&rec[10])?,
                bandwidth: if rec[11].is_empty() {
                    None
                } else {
                    Some(int(&rec[11])?)
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(mechanisms: Vec<MechanismFamily>, tasks: Vec<Task>, reps: usize) -> ExperimentConfig {
        ExperimentConfig {
            example: Some(1),
            process: None,
            n: 1000,
            replications: reps,
            alphas: vec![0.1, 1.0],
            tasks,
            mechanisms,
            s: 3.0,
            delta_log: 0.001,
            tau_override: None,
            tau_tilde_override: None,
            seed: 11,
            density_normalization: DensityNormalization::Eq1,
        }
    }

    #[test]
    fn task_strings_roundtrip() {
        for s in [
            "cov0",
            "cov_j(2)",
            "sdf_point(pi/5)",
            "sdf_global",
            "sdf_point(pi)",
        ] {
            assert_eq!(s.parse::<Task>().unwrap().to_string(), s);
        }
        assert_eq!(
            "sdf_point(pi/5)".parse::<Task>().unwrap(),
            Task::SdfPoint(PI / 5.0)
        );
        assert_eq!(
            "sdf_point(2*pi/5)".parse::<Task>().unwrap(),
            Task::SdfPoint(2.0 * PI / 5.0)
        );
        assert_eq!(
            "sdf_point(0.5)".parse::<Task>().unwrap(),
            Task::SdfPoint(0.5)
        );
        assert!("cov_j(x)".parse::<Task>().is_err());
        assert!("spectrum".parse::<Task>().is_err());
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let cfg = ExperimentConfig::from_json(
            r#"{"example":1,"n":100,"replications":2,"alphas":[0.1,0.5],
                "tasks":["cov0","sdf_point(pi/5)"],"mechanisms":["NI","SI","nonprivate"],"seed":3}"#,
        )
        .unwrap();
        assert_eq!(cfg.s, 3.0);
        assert_eq!(cfg.delta_log, 0.001);
        assert_eq!(cfg.density_normalization, DensityNormalization::Eq1);
        let bad = [
            r#"{"example":4,"n":100,"replications":2,"alphas":[0.1],"tasks":["cov0"],"mechanisms":["NI"],"seed":3}"#,
            r#"{"example":1,"n":100,"replications":0,"alphas":[0.1],"tasks":["cov0"],"mechanisms":["NI"],"seed":3}"#,
            r#"{"example":1,"n":100,"replications":2,"alphas":[0.5,0.1],"tasks":["cov0"],"mechanisms":["NI"],"seed":3}"#,
            r#"{"example":1,"n":100,"replications":2,"alphas":[0.1],"tasks":["cov0"],"mechanisms":["NI"],"seed":3,"tau_override":-1}"#,
            r#"{"example":1,"n":100,"replications":2,"alphas":[0.1],"tasks":["cov9x"],"mechanisms":["NI"],"seed":3}"#,
        ];
        for b in bad {
            assert!(
                matches!(ExperimentConfig::from_json(b), Err(Error::Config(_))),
                "{b}"
            );
        }
    }

    #[test]
    fn true_values_of_example_one() {
        let cfg = config(vec![MechanismFamily::Ni], vec![Task::Cov(0)], 1);
        let covs = cfg.true_covariances().unwrap();
        assert!((true_value(&covs, Task::Cov(0)) - 1.44).abs() < 1e-12);
        assert!((true_value(&covs, Task::Cov(2)) - 0.9216).abs() < 1e-12);
        assert!((true_value(&covs, Task::Cov(2)) * 100.0).round() / 100.0 == 0.92);
        let closed = 1.44 * (1.0 - 0.64) / (1.0 - 1.6 * (PI / 5.0).cos() + 0.64) / (2.0 * PI);
        assert!((true_value(&covs, Task::SdfPoint(PI / 5.0)) - closed).abs() < 1e-10);
    }

    #[test]
    fn stream_ids_are_injective() {
        let mut seen = std::collections::HashSet::new();
        for r in 0..20 {
            assert!(seen.insert(path_stream(r)));
            for ai in 0..5 {
                for ti in 0..4 {
                    for m in [
                        MechanismFamily::Ni,
                        MechanismFamily::Si,
                        MechanismFamily::NonPrivate,
                    ] {
                        let cell = Cell {
                            alpha_index: ai,
                            task_index: ti,
                            mechanism: m,
                            alpha: 1.0,
                            task: Task::Cov(0),
                            sched: None,
                            bandwidth: None,
                        };
                        assert!(seen.insert(noise_stream(&cell, r)));
                    }
                }
            }
        }
    }

    #[test]
    fn nonprivate_mse_matches_variance_oracle() {
        let cfg = config(vec![MechanismFamily::NonPrivate], vec![Task::Cov(0)], 300);
        let res = run_experiment_with_threads(&cfg, None).unwrap();
        assert_eq!(res.rows.len(), 1);
        let covs = cfg.true_covariances().unwrap();
        // Σ_{h∈Z} σ_h² for the AR(1) covariances
        let m1: f64 =
            covs.values()[0].powi(2) + 2.0 * covs.values()[1..].iter().map(|v| v * v).sum::<f64>();
        let oracle = 2.0 * m1 / cfg.n as f64;
        let ratio = res.rows[0].mse / oracle;
        assert!((1.0 / 3.0..=3.0).contains(&ratio), "ratio {ratio}");
        assert!(res.rows[0].alpha.is_infinite());
    }

    #[test]
    fn runs_are_reproducible_and_thread_invariant() {
        let mut cfg = config(
            vec![
                MechanismFamily::Ni,
                MechanismFamily::Si,
                MechanismFamily::NonPrivate,
            ],
            vec![Task::Cov(0), Task::SdfPoint(PI / 5.0), Task::SdfGlobal],
            4,
        );
        cfg.n = 200;
        let a = run_experiment_with_threads(&cfg, Some(1)).unwrap();
        let b = run_experiment_with_threads(&cfg, Some(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 3 * (2 * 2 + 1));
        cfg.replications = 1;
        let c = run_experiment_with_threads(&cfg, Some(2)).unwrap();
        let d = run_experiment_with_threads(&cfg, Some(2)).unwrap();
        assert_eq!(c, d);
        assert!(a.rows.iter().all(|r| r.mse >= 0.0 && r.mse_se >= 0.0));
    }

    #[test]
    fn si_beats_ni_for_variance_in_strong_privacy() {
        let mut cfg = config(
            vec![MechanismFamily::Ni, MechanismFamily::Si],
            vec![Task::Cov(0)],
            50,
        );
        cfg.alphas = vec![0.1];
        let res = run_experiment_with_threads(&cfg, None).unwrap();
        let get = |m| res.rows.iter().find(|r| r.mechanism == m).unwrap().mse;
        assert!(get(MechanismFamily::Si) < get(MechanismFamily::Ni));
    }

    #[test]
    fn slope_fit_exact_lines() {
        let line = |p: i32| -> Vec<(f64, f64)> {
            [0.05, 0.1, 0.2, 0.35, 0.5]
                .iter()
                .map(|a| (*a, 3.0 * f64::powi(*a, p)))
                .collect()
        };
        let w = (0.05, 0.5);
        assert!((fit_loglog_slope(&line(-4), w).unwrap().slope + 4.0).abs() < 1e-12);
        assert!((fit_loglog_slope(&line(-2), w).unwrap().slope + 2.0).abs() < 1e-12);
        let flat = fit_loglog_slope(&line(0), w).unwrap();
        assert!(flat.slope.abs() < 1e-12 && flat.r2 == 1.0);
        assert!(fit_loglog_slope(&line(-2), (0.3, 0.5)).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let empty = ExperimentResult::default();
        let mut buf = Vec::new();
        write_csv(&mut buf, &empty).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 1);
        assert_eq!(parse_csv(buf.as_slice()).unwrap(), empty);

        let row = ResultRow {
            example: "1".into(),
            task: Task::SdfPoint(PI / 5.0),
            mechanism: MechanismFamily::Si,
            alpha: 0.1,
            mse: 1.0 / 3.0,
            mse_se: 0.012345678901234568,
            truth: 0.239,
            n: 1000,
            replications: 300,
            tau: Some(7.5),
            tau_tilde: Some(1e5 / 7.0),
            bandwidth: Some(3),
        };
        let np = ResultRow {
            mechanism: MechanismFamily::NonPrivate,
            alpha: f64::INFINITY,
            tau: None,
            tau_tilde: None,
            ..row.clone()
        };
        let res = ExperimentResult {
            rows: vec![row, np],
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &res).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 3);
        assert_eq!(parse_csv(buf.as_slice()).unwrap(), res);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
        assert_eq!(mean_and_se(&[2.0]), (2.0, 0.0));
    }
}
