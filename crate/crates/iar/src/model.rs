//! The irregularly observed AR(1) process: simulation, one-step prediction,
//! innovations and the exact Gaussian negative log-likelihood.
//!
//! An iAR series observed at increasing instants `t_j` follows
//!
//! ```text
//! y_j = phi^(t_j - t_{j-1}) * y_{j-1} + sigma * sqrt(1 - phi^(2*(t_j - t_{j-1}))) * eps_j
//! ```
//!
//! with standard Gaussian innovations `eps_j`, so the autocorrelation between
//! consecutive observations decays as `phi` raised to the elapsed time gap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{IarError, Result};

/// Lower clamp for the autocorrelation parameter; `phi^(gap-1)` needs `phi > 0`.
pub const PHI_MIN: f64 = 1e-5;
/// Upper clamp for the autocorrelation parameter.
pub const PHI_MAX: f64 = 1.0 - 1e-5;

/// Clamps an autocorrelation estimate into the admissible open interval.
#[inline]
pub fn clamp_phi(phi: f64) -> f64 {
    phi.clamp(PHI_MIN, PHI_MAX)
}

/// `phi^exponent` computed as `exp(exponent * ln(phi))`; assumes `phi > 0`.
#[inline]
pub fn phi_pow(phi: f64, exponent: f64) -> f64 {
    (exponent * phi.ln()).exp()
}

/// An irregularly observed time series with optional per-point
/// measurement-error variances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    meas_err_var: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series, validating the invariants: strictly increasing times,
    /// equal lengths, non-negative measurement-error variances.
    pub fn new(times: Vec<f64>, values: Vec<f64>, meas_err_var: Option<Vec<f64>>) -> Result<Self> {
        if times.is_empty() {
            return Err(IarError::invalid("series must contain at least one observation"));
        }
        if times.len() != values.len() {
            return Err(IarError::invalid(format!(
                "times ({}) and values ({}) lengths differ",
                times.len(),
                values.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(IarError::invalid("times and values must be finite"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(IarError::invalid("times must be strictly increasing"));
        }
        let meas_err_var = match meas_err_var {
            Some(d) => {
                if d.len() != times.len() {
                    return Err(IarError::invalid("meas_err_var length differs from times"));
                }
                if d.iter().any(|&x| !x.is_finite() || x < 0.0) {
                    return Err(IarError::invalid("meas_err_var entries must be finite and >= 0"));
                }
                d
            }
            None => vec![0.0; times.len()],
        };
        Ok(TimeSeries { times, values, meas_err_var })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn meas_err_var(&self) -> &[f64] {
        &self.meas_err_var
    }

    /// Time gap preceding observation `j` (requires `j >= 1`).
    #[inline]
    pub fn gap(&self, j: usize) -> f64 {
        self.times[j] - self.times[j - 1]
    }

    /// Sample standard deviation of the values (n-1 denominator).
    pub fn sample_std(&self) -> f64 {
        sample_std(&self.values)
    }
}

pub(crate) fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (ss / (n - 1) as f64).sqrt()
}

/// Parameters of the iAR process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IarParams {
    pub phi: f64,
    pub sigma: f64,
}

impl IarParams {
    /// Validates `sigma > 0` and clamps `phi` into `[PHI_MIN, PHI_MAX]`.
    pub fn new(phi: f64, sigma: f64) -> Result<Self> {
        if !phi.is_finite() || !sigma.is_finite() {
            return Err(IarError::invalid("parameters must be finite"));
        }
        if sigma <= 0.0 {
            return Err(IarError::invalid(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(IarParams { phi: clamp_phi(phi), sigma })
    }
}

/// One-step predictions, innovations and innovation variances for a series.
#[derive(Clone, Debug, PartialEq)]
pub struct OneStepFit {
    pub predictions: Vec<f64>,
    pub innovations: Vec<f64>,
    pub innovation_vars: Vec<f64>,
}

impl OneStepFit {
    /// Mean squared innovation over the index range `[from, n)`.
    pub fn mse_from(&self, from: usize) -> f64 {
        let seg = &self.innovations[from..];
        if seg.is_empty() {
            return 0.0;
        }
        seg.iter().map(|e| e * e).sum::<f64>() / seg.len() as f64
    }
}

/// Conditional mean of the next observation: `phi^gap * y_prev`.
pub fn predict_one(phi: f64, y_prev: f64, gap: f64) -> Result<f64> {
    if !phi.is_finite() || !y_prev.is_finite() || !gap.is_finite() {
        return Err(IarError::invalid("predict_one: inputs must be finite"));
    }
    if gap <= 0.0 {
        return Err(IarError::invalid(format!("predict_one: gap must be > 0, got {gap}")));
    }
    if phi <= 0.0 || phi >= 1.0 {
        return Err(IarError::invalid(format!("predict_one: phi must lie in (0,1), got {phi}")));
    }
    Ok(phi_pow(phi, gap) * y_prev)
}

/// Conditional variance of the innovation: `sigma^2 * (1 - phi^(2*gap)) + delta2`.
pub fn innovation_variance(phi: f64, sigma: f64, gap: f64, delta2: f64) -> Result<f64> {
    if !phi.is_finite() || !sigma.is_finite() || !gap.is_finite() || !delta2.is_finite() {
        return Err(IarError::invalid("innovation_variance: inputs must be finite"));
    }
    if gap <= 0.0 {
        return Err(IarError::invalid(format!(
            "innovation_variance: gap must be > 0, got {gap}"
        )));
    }
    if delta2 < 0.0 {
        return Err(IarError::invalid("innovation_variance: delta2 must be >= 0"));
    }
    Ok(sigma * sigma * (1.0 - phi_pow(phi, 2.0 * gap)) + delta2)
}

/// Exact negative log-likelihood of the series under the iAR model.
///
/// The first observation contributes through its stationary marginal:
/// `e_1 = y_1`, `v_1 = sigma^2 + delta2_1`.
pub fn neg_log_likelihood(params: IarParams, series: &TimeSeries) -> Result<f64> {
    if series.is_empty() {
        return Err(IarError::invalid("neg_log_likelihood: empty series"));
    }
    // streamed rather than built on fitted_values: this is the optimizer's
    // hot path and must not allocate
    let y = series.values();
    let d2 = series.meas_err_var();
    let sigma2 = params.sigma * params.sigma;
    let phi = clamp_phi(params.phi);
    let log_phi = phi.ln();
    let mut log_det = (sigma2 + d2[0]).ln();
    let mut quad = y[0] * y[0] / (sigma2 + d2[0]);
    for j in 1..series.len() {
        let gap = series.gap(j);
        let decay = (gap * log_phi).exp();
        let e = y[j] - decay * y[j - 1];
        let v = sigma2 * (1.0 - decay * decay) + d2[j];
        log_det += v.ln();
        quad += e * e / v;
    }
    let n = series.len() as f64;
    Ok(0.5 * n * (2.0 * std::f64::consts::PI).ln() + 0.5 * log_det + 0.5 * quad)
}

/// Simulates the iAR recursion with a per-step autocorrelation path.
///
/// Step `j` applies `phi_path[j]` to both the decay and the innovation
/// standard deviation; a constant path reproduces the stationary process.
pub fn simulate_time_varying(
    phi_path: &[f64],
    sigma: f64,
    times: &[f64],
    seed: u64,
) -> Result<TimeSeries> {
    if phi_path.len() != times.len() {
        return Err(IarError::invalid(format!(
            "phi_path length {} does not match times length {}",
            phi_path.len(),
            times.len()
        )));
    }
    if phi_path.iter().any(|&p| !(0.0..=1.0).contains(&p) || p == 0.0 || p == 1.0) {
        return Err(IarError::invalid("phi_path entries must lie in (0,1)"));
    }
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(IarError::invalid("sigma must be > 0"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(IarError::invalid("times must be strictly increasing"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut values = Vec::with_capacity(times.len());
    // Stationary marginal for the first observation.
    values.push(sigma * std_normal.sample(&mut rng));
    for j in 1..times.len() {
        let gap = times[j] - times[j - 1];
        let decay = phi_pow(phi_path[j], gap);
        let innov_sd = sigma * (1.0 - decay * decay).sqrt();
        values.push(decay * values[j - 1] + innov_sd * std_normal.sample(&mut rng));
    }
    TimeSeries::new(times.to_vec(), values, None)
}

/// Simulates a stationary iAR series, optionally adding independent
/// measurement noise with the given per-point variances.
pub fn simulate(
    params: IarParams,
    times: &[f64],
    seed: u64,
    meas_err_var: Option<&[f64]>,
) -> Result<TimeSeries> {
    let phi_path = vec![params.phi; times.len()];
    let latent = simulate_time_varying(&phi_path, params.sigma, times, seed)?;
    match meas_err_var {
        None => Ok(latent),
        Some(d2) => {
            if d2.len() != times.len() {
                return Err(IarError::invalid("meas_err_var length differs from times"));
            }
            // Measurement noise comes from a separate stream so the latent
            // path is unchanged by its presence.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
            let noisy: Vec<f64> = latent
                .values()
                .iter()
                .zip(d2)
                .map(|(&y, &v)| y + v.sqrt() * std_normal.sample(&mut rng))
                .collect();
            TimeSeries::new(times.to_vec(), noisy, Some(d2.to_vec()))
        }
    }
}

/// One-step predictions, innovations and innovation variances under a
/// per-index parameter path (constant for batch fits, the estimate
/// trajectory for online fits).
pub fn fitted_values(phi_path: &[f64], sigma: f64, series: &TimeSeries) -> Result<OneStepFit> {
    let n = series.len();
    if phi_path.len() != n {
        return Err(IarError::invalid(format!(
            "phi_path length {} does not match series length {n}",
            phi_path.len()
        )));
    }
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(IarError::invalid("sigma must be > 0"));
    }
    let y = series.values();
    let d2 = series.meas_err_var();
    let mut predictions = Vec::with_capacity(n);
    let mut innovations = Vec::with_capacity(n);
    let mut innovation_vars = Vec::with_capacity(n);
    // Initial values: the unconditional mean and stationary variance.
    predictions.push(0.0);
    innovations.push(y[0]);
    innovation_vars.push(sigma * sigma + d2[0]);
    for j in 1..n {
        let gap = series.gap(j);
        let phi = clamp_phi(phi_path[j]);
        let pred = phi_pow(phi, gap) * y[j - 1];
        predictions.push(pred);
        innovations.push(y[j] - pred);
        innovation_vars.push(sigma * sigma * (1.0 - phi_pow(phi, 2.0 * gap)) + d2[j]);
    }
    Ok(OneStepFit { predictions, innovations, innovation_vars })
}
