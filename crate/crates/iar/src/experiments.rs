//! Monte Carlo harness: scenario generation, repeated estimation runs,
//! summary metrics (final estimates, fitted-value MSE, trajectory bands)
//! and the batch-vs-online timing benchmark.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::batch::{fit_mle, SigmaSpec};
use crate::error::{IarError, Result};
use crate::model::{phi_pow, simulate_time_varying, TimeSeries};
use crate::online::{run_online, OnlineHyper, OnlineMethod};
use crate::sampling::{gen_times, TimeGapSpec};

/// True-parameter path used to generate each simulated series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// Constant parameter.
    SanityCheck { phi: f64 },
    /// `phi_a` before `change_index` (1-based), `phi_b` from it onward.
    AbruptChange { phi_a: f64, phi_b: f64, change_index: usize },
    /// Linear drift from `phi_start` at the first observation to `phi_end`
    /// at the last.
    ConstantChange { phi_start: f64, phi_end: f64 },
}

fn check_phi(phi: f64, what: &str) -> Result<()> {
    if phi <= 0.0 || phi >= 1.0 || !phi.is_finite() {
        return Err(IarError::invalid(format!("{what} must lie in (0,1), got {phi}")));
    }
    Ok(())
}

/// Expands a scenario into the per-index parameter path of length `n`.
pub fn make_phi_path(scenario: Scenario, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(IarError::invalid("make_phi_path: n must be >= 2"));
    }
    match scenario {
        Scenario::SanityCheck { phi } => {
            check_phi(phi, "phi")?;
            Ok(vec![phi; n])
        }
        Scenario::AbruptChange { phi_a, phi_b, change_index } => {
            check_phi(phi_a, "phi_a")?;
            check_phi(phi_b, "phi_b")?;
            if change_index < 2 || change_index > n - 1 {
                return Err(IarError::invalid(format!(
                    "change_index {change_index} out of range [2, {}]",
                    n - 1
                )));
            }
            Ok((1..=n).map(|j| if j < change_index { phi_a } else { phi_b }).collect())
        }
        Scenario::ConstantChange { phi_start, phi_end } => {
            check_phi(phi_start, "phi_start")?;
            check_phi(phi_end, "phi_end")?;
            Ok((0..n)
                .map(|j| phi_start + (phi_end - phi_start) * j as f64 / (n - 1) as f64)
                .collect())
        }
    }
}

/// Estimation methods compared in the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mle,
    Obr,
    Ogd,
    Ons,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mle, Method::Obr, Method::Ogd, Method::Ons];

    pub fn as_online(self) -> Option<OnlineMethod> {
        match self {
            Method::Mle => None,
            Method::Obr => Some(OnlineMethod::Obr),
            Method::Ogd => Some(OnlineMethod::Ogd),
            Method::Ons => Some(OnlineMethod::Ons),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::Obr => "obr",
            Method::Ogd => "ogd",
            Method::Ons => "ons",
        }
    }
}

fn default_n() -> usize {
    400
}
fn default_reps() -> usize {
    100
}
fn default_warm_fraction() -> f64 {
    0.5
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

/// One Monte Carlo experiment: a scenario crossed with a gap distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    pub gap_spec: TimeGapSpec,
    pub scenario: Scenario,
    /// Fraction of the series fitted in batch to warm-start the online
    /// methods (0.5 default; 0.625 in the abrupt-change experiment).
    #[serde(default = "default_warm_fraction")]
    pub warm_fraction: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub hyper: OnlineHyper,
    #[serde(default)]
    pub base_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(IarError::invalid("reps must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.warm_fraction) || self.warm_fraction <= 0.0 {
            return Err(IarError::invalid("warm_fraction must lie in (0,1)"));
        }
        if self.warm_count() < 2 {
            return Err(IarError::invalid("warm_fraction * n must be >= 2"));
        }
        if self.warm_count() >= self.n {
            return Err(IarError::invalid("warm_fraction leaves no online segment"));
        }
        if self.methods.is_empty() {
            return Err(IarError::invalid("methods must be non-empty"));
        }
        self.gap_spec.validate()?;
        make_phi_path(self.scenario, self.n)?;
        Ok(())
    }

    /// Number of warm-start observations (also the 0-based index of the
    /// first online update).
    pub fn warm_count(&self) -> usize {
        (self.warm_fraction * self.n as f64).round() as usize
    }
}

/// Per-method Monte Carlo aggregates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Mean over reps of the last trajectory value.
    pub mean_final_phi: f64,
    /// Mean over reps of the fitted-value MSE on the online segment.
    pub mean_mse: f64,
    /// Pointwise mean of the estimate trajectory.
    pub traj_mean: Vec<f64>,
    /// Pointwise 2.5% quantile over reps.
    pub traj_lo: Vec<f64>,
    /// Pointwise 97.5% quantile over reps.
    pub traj_hi: Vec<f64>,
}

/// Full experiment output. Timings are reported separately from the
/// deterministic statistical aggregates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub methods: Vec<MethodSummary>,
    /// Mean estimation wall-clock seconds per method, same order as `methods`.
    pub mean_seconds: Vec<f64>,
}

impl ExperimentSummary {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

struct RepOutcome {
    // per configured method: trajectory, final phi, mse, seconds
    trajectories: Vec<Vec<f64>>,
    finals: Vec<f64>,
    mses: Vec<f64>,
    seconds: Vec<f64>,
}

fn times_seed(base: u64, rep: u64) -> u64 {
    base.wrapping_add(2 * rep)
}

fn series_seed(base: u64, rep: u64) -> u64 {
    base.wrapping_add(2 * rep + 1)
}

/// Fitted-value MSE over the online segment `[start, n)`. The fitted value
/// at index `j` uses the estimate held at `j`, i.e. after the update
/// triggered by observing `y_j` (in-sample fit, the tables' metric).
fn segment_mse(series: &TimeSeries, trajectory: &[f64], start: usize) -> f64 {
    let y = series.values();
    let n = series.len();
    let mut sum = 0.0;
    for j in start..n {
        let fitted = phi_pow(trajectory[j], series.gap(j)) * y[j - 1];
        let e = y[j] - fitted;
        sum += e * e;
    }
    sum / (n - start) as f64
}

fn run_rep(config: &ExperimentConfig, rep: u64) -> Result<RepOutcome> {
    let times = gen_times(config.gap_spec, config.n, times_seed(config.base_seed, rep))?;
    let phi_path = make_phi_path(config.scenario, config.n)?;
    let series =
        simulate_time_varying(&phi_path, 1.0, &times, series_seed(config.base_seed, rep))?;
    let warm = config.warm_count();

    let warm_series = TimeSeries::new(
        series.times()[..warm].to_vec(),
        series.values()[..warm].to_vec(),
        None,
    )?;
    let warm_fit = fit_mle(&warm_series, SigmaSpec::FromSample)?;
    let phi_init = warm_fit.phi_hat;

    let mut outcome = RepOutcome {
        trajectories: Vec::with_capacity(config.methods.len()),
        finals: Vec::with_capacity(config.methods.len()),
        mses: Vec::with_capacity(config.methods.len()),
        seconds: Vec::with_capacity(config.methods.len()),
    };
    for &method in &config.methods {
        let (trajectory, secs) = match method.as_online() {
            None => {
                // Batch baseline: refit on the full series; its trajectory is
                // the constant full-series estimate.
                let t0 = Instant::now();
                let fit = fit_mle(&series, SigmaSpec::FromSample)?;
                let secs = t0.elapsed().as_secs_f64();
                (vec![fit.phi_hat; config.n], secs)
            }
            Some(online) => {
                let t0 = Instant::now();
                let traj = run_online(online, &series, phi_init, warm, &config.hyper)?;
                let secs = t0.elapsed().as_secs_f64();
                (traj, secs)
            }
        };
        outcome.finals.push(*trajectory.last().expect("non-empty trajectory"));
        outcome.mses.push(segment_mse(&series, &trajectory, warm));
        outcome.seconds.push(secs);
        outcome.trajectories.push(trajectory);
    }
    Ok(outcome)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    // linear interpolation between order statistics
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Runs the configured Monte Carlo experiment. Reps execute in parallel;
/// aggregation is ordered by rep index, so the statistical outputs are
/// fully determined by the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let outcomes: Vec<RepOutcome> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| {
            run_rep(config, rep).map_err(|e| IarError::Internal(format!("rep {rep}: {e}")))
        })
        .collect::<Result<_>>()?;

    let reps = config.reps as f64;
    let mut methods = Vec::with_capacity(config.methods.len());
    let mut mean_seconds = Vec::with_capacity(config.methods.len());
    for (mi, &method) in config.methods.iter().enumerate() {
        let mean_final_phi = outcomes.iter().map(|o| o.finals[mi]).sum::<f64>() / reps;
        let mean_mse = outcomes.iter().map(|o| o.mses[mi]).sum::<f64>() / reps;
        mean_seconds.push(outcomes.iter().map(|o| o.seconds[mi]).sum::<f64>() / reps);

        let mut traj_mean = vec![0.0; config.n];
        let mut traj_lo = vec![0.0; config.n];
        let mut traj_hi = vec![0.0; config.n];
        let mut column = vec![0.0; config.reps];
        for j in 0..config.n {
            for (r, o) in outcomes.iter().enumerate() {
                column[r] = o.trajectories[mi][j];
            }
            traj_mean[j] = column.iter().sum::<f64>() / reps;
            column.sort_by(|a, b| a.total_cmp(b));
            traj_lo[j] = quantile(&column, 0.025);
            traj_hi[j] = quantile(&column, 0.975);
        }
        methods.push(MethodSummary { method, mean_final_phi, mean_mse, traj_mean, traj_lo, traj_hi });
    }
    Ok(ExperimentSummary { config: config.clone(), methods, mean_seconds })
}

/// A table-style experiment: one scenario crossed with several gap
/// distributions. This is the JSON document the CLI consumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    pub gap_specs: Vec<TimeGapSpec>,
    pub scenario: Scenario,
    #[serde(default = "default_warm_fraction")]
    pub warm_fraction: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub hyper: OnlineHyper,
    #[serde(default)]
    pub base_seed: u64,
}

impl TableConfig {
    /// One `ExperimentConfig` per gap distribution.
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>> {
        if self.gap_specs.is_empty() {
            return Err(IarError::invalid("gap_specs must be non-empty"));
        }
        let configs: Vec<ExperimentConfig> = self
            .gap_specs
            .iter()
            .map(|&gap_spec| ExperimentConfig {
                n: self.n,
                reps: self.reps,
                gap_spec,
                scenario: self.scenario,
                warm_fraction: self.warm_fraction,
                methods: self.methods.clone(),
                hyper: self.hyper,
                base_seed: self.base_seed,
            })
            .collect();
        for c in &configs {
            c.validate()?;
        }
        Ok(configs)
    }
}

/// Mean estimation time per series size and method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub method: Method,
    pub mean_seconds: f64,
}

/// Times the full estimation pass per method (batch: one MLE on all `n`
/// points; online: the single-step updates over the stream), averaged over
/// `reps` freshly simulated series. Simulation stays outside the timers.
pub fn bench_runtime(
    sizes: &[usize],
    reps: usize,
    gap_spec: TimeGapSpec,
    methods: &[Method],
    hyper: &OnlineHyper,
) -> Result<Vec<BenchRow>> {
    if sizes.iter().any(|&n| n < 10) {
        return Err(IarError::invalid("bench sizes must all be >= 10"));
    }
    if reps < 1 || methods.is_empty() {
        return Err(IarError::invalid("bench needs reps >= 1 and at least one method"));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        // simulation stays outside the timed region
        let mut serieses = Vec::with_capacity(reps);
        for rep in 0..reps as u64 {
            let times = gen_times(gap_spec, n, times_seed(7, rep))?;
            let path = vec![0.5; n];
            serieses.push(simulate_time_varying(&path, 1.0, &times, series_seed(7, rep))?);
        }
        for &method in methods {
            // one untimed warmup pass, then all reps in a single timed block;
            // per-pass timing of microsecond passes is dominated by scheduler
            // noise on shared machines
            match method.as_online() {
                None => {
                    std::hint::black_box(fit_mle(&serieses[0], SigmaSpec::FromSample)?);
                    let t0 = Instant::now();
                    for series in &serieses {
                        std::hint::black_box(fit_mle(series, SigmaSpec::FromSample)?);
                    }
                    let mean_seconds = t0.elapsed().as_secs_f64() / reps as f64;
                    rows.push(BenchRow { n, method, mean_seconds });
                }
                Some(online) => {
                    std::hint::black_box(run_online(online, &serieses[0], 0.5, 1, hyper)?);
                    let t0 = Instant::now();
                    for series in &serieses {
                        std::hint::black_box(run_online(online, series, 0.5, 1, hyper)?);
                    }
                    let mean_seconds = t0.elapsed().as_secs_f64() / reps as f64;
                    rows.push(BenchRow { n, method, mean_seconds });
                }
            }
        }
    }
    Ok(rows)
}
