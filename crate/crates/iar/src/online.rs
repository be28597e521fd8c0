//! Streaming parameter updates for the iAR model: Newton-step (ONS),
//! gradient-descent (OGD) and Bayesian-regression (OBR) recursions.
//!
//! All three consume one `(y_prev, y, gap)` triple per step in a single
//! pass, using constant memory per estimator.
//!
//! Rate convention: the ONS and OGD updates divide by the learning rate
//! (`phi - (1/eta) * step`), so a *larger* `eta` means *smaller* steps.

use serde::{Deserialize, Serialize};

use crate::error::{IarError, Result};
use crate::model::{clamp_phi, phi_pow, TimeSeries};

/// Quadratic one-step loss `(y - phi^gap * y_prev)^2` and its derivative
/// with respect to phi.
pub fn loss_and_gradient(phi: f64, y_prev: f64, y: f64, gap: f64) -> Result<(f64, f64)> {
    if !phi.is_finite() || !y_prev.is_finite() || !y.is_finite() || !gap.is_finite() {
        return Err(IarError::invalid("loss_and_gradient: inputs must be finite"));
    }
    if gap <= 0.0 {
        return Err(IarError::invalid(format!("loss_and_gradient: gap must be > 0, got {gap}")));
    }
    if phi <= 0.0 || phi >= 1.0 {
        return Err(IarError::invalid(format!(
            "loss_and_gradient: phi must lie in (0,1), got {phi}"
        )));
    }
    let prediction = phi_pow(phi, gap) * y_prev;
    let residual = y - prediction;
    let grad = -2.0 * residual * y_prev * gap * phi_pow(phi, gap - 1.0);
    Ok((residual * residual, grad))
}

/// Online Newton Step state: gradient steps scaled by the inverse of the
/// accumulated squared gradients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnsState {
    pub phi: f64,
    pub accumulator: f64,
    pub eta: f64,
}

impl OnsState {
    pub fn new(phi_init: f64, eta: f64) -> Result<Self> {
        if eta <= 0.0 || !eta.is_finite() {
            return Err(IarError::invalid("ons: eta must be > 0"));
        }
        Ok(OnsState { phi: clamp_phi(phi_init), accumulator: eta, eta })
    }
}

pub fn ons_step(state: OnsState, y_prev: f64, y: f64, gap: f64) -> Result<OnsState> {
    let (_, grad) = loss_and_gradient(state.phi, y_prev, y, gap)?;
    let accumulator = state.accumulator + grad * grad;
    let phi = clamp_phi(state.phi - grad / (state.eta * accumulator));
    Ok(OnsState { phi, accumulator, eta: state.eta })
}

/// Online Gradient Descent state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OgdState {
    pub phi: f64,
    pub eta: f64,
}

impl OgdState {
    pub fn new(phi_init: f64, eta: f64) -> Result<Self> {
        if eta <= 0.0 || !eta.is_finite() {
            return Err(IarError::invalid("ogd: eta must be > 0"));
        }
        Ok(OgdState { phi: clamp_phi(phi_init), eta })
    }
}

pub fn ogd_step(state: OgdState, y_prev: f64, y: f64, gap: f64) -> Result<OgdState> {
    let (_, grad) = loss_and_gradient(state.phi, y_prev, y, gap)?;
    let phi = clamp_phi(state.phi - grad / state.eta);
    Ok(OgdState { phi, eta: state.eta })
}

/// Online Bayesian Regression state: a Gaussian posterior over phi
/// maintained by scalar Kalman-style recursions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObrState {
    pub phi: f64,
    pub variance: f64,
    pub sigma: f64,
    /// Optional process noise added to the posterior variance before each
    /// step; 0 reproduces the plain recursion.
    pub process_noise: f64,
}

impl ObrState {
    pub fn new(phi_init: f64, variance: f64, sigma: f64) -> Result<Self> {
        if variance < 0.0 || !variance.is_finite() {
            return Err(IarError::invalid("obr: initial variance must be >= 0"));
        }
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(IarError::invalid("obr: sigma must be > 0"));
        }
        Ok(ObrState { phi: clamp_phi(phi_init), variance, sigma, process_noise: 0.0 })
    }

    pub fn with_process_noise(mut self, q: f64) -> Result<Self> {
        if q < 0.0 || !q.is_finite() {
            return Err(IarError::invalid("obr: process noise must be >= 0"));
        }
        self.process_noise = q;
        Ok(self)
    }
}

pub fn obr_step(state: ObrState, y_prev: f64, y: f64, gap: f64) -> Result<ObrState> {
    if !y_prev.is_finite() || !y.is_finite() || !gap.is_finite() || gap <= 0.0 {
        return Err(IarError::invalid("obr_step: inputs must be finite with gap > 0"));
    }
    let prior_var = state.variance + state.process_noise;
    let decay = phi_pow(state.phi, gap);
    let innovation_var = state.sigma * state.sigma * (1.0 - decay * decay);
    let total_var = y_prev * prior_var * y_prev + innovation_var;
    if total_var <= 0.0 {
        return Err(IarError::Internal(format!(
            "obr_step: non-positive innovation scale {total_var}"
        )));
    }
    let gain = prior_var * y_prev / total_var;
    let phi = clamp_phi(state.phi + gain * (y - y_prev * decay));
    // P - K S K, floored at 0 against roundoff
    let variance = (prior_var - gain * total_var * gain).max(0.0);
    Ok(ObrState { phi, variance, ..state })
}

/// Which streaming estimator to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnlineMethod {
    Ons,
    Ogd,
    Obr,
}

impl std::str::FromStr for OnlineMethod {
    type Err = IarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ons" => Ok(OnlineMethod::Ons),
            "ogd" => Ok(OnlineMethod::Ogd),
            "obr" => Ok(OnlineMethod::Obr),
            other => Err(IarError::invalid(format!("unknown online method '{other}'"))),
        }
    }
}

impl std::fmt::Display for OnlineMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OnlineMethod::Ons => "ons",
            OnlineMethod::Ogd => "ogd",
            OnlineMethod::Obr => "obr",
        };
        f.write_str(s)
    }
}

/// Hyperparameters for the three methods. Defaults were frozen by a one-time
/// grid search on the regular-times sanity scenario (see `experiments`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnlineHyper {
    pub ons_eta: f64,
    pub ogd_eta: f64,
    pub obr_p1: f64,
    pub obr_sigma: f64,
    pub obr_process_noise: f64,
}

impl Default for OnlineHyper {
    fn default() -> Self {
        OnlineHyper {
            ons_eta: 1.0,
            ogd_eta: 100.0,
            obr_p1: 1.0,
            obr_sigma: 1.0,
            obr_process_noise: 1e-3,
        }
    }
}

enum EstimatorState {
    Ons(OnsState),
    Ogd(OgdState),
    Obr(ObrState),
}

impl EstimatorState {
    fn new(method: OnlineMethod, phi_init: f64, hyper: &OnlineHyper) -> Result<Self> {
        Ok(match method {
            OnlineMethod::Ons => EstimatorState::Ons(OnsState::new(phi_init, hyper.ons_eta)?),
            OnlineMethod::Ogd => EstimatorState::Ogd(OgdState::new(phi_init, hyper.ogd_eta)?),
            OnlineMethod::Obr => EstimatorState::Obr(
                ObrState::new(phi_init, hyper.obr_p1, hyper.obr_sigma)?
                    .with_process_noise(hyper.obr_process_noise)?,
            ),
        })
    }

    fn step(&mut self, y_prev: f64, y: f64, gap: f64) -> Result<f64> {
        match self {
            EstimatorState::Ons(s) => {
                *s = ons_step(*s, y_prev, y, gap)?;
                Ok(s.phi)
            }
            EstimatorState::Ogd(s) => {
                *s = ogd_step(*s, y_prev, y, gap)?;
                Ok(s.phi)
            }
            EstimatorState::Obr(s) => {
                *s = obr_step(*s, y_prev, y, gap)?;
                Ok(s.phi)
            }
        }
    }
}

/// Runs one streaming estimator over the series, starting updates at
/// `start_index` (0-based; the first index whose observation triggers an
/// update). Entries before `start_index` hold `phi_init`; each later entry
/// holds the estimate after consuming that observation.
pub fn run_online(
    method: OnlineMethod,
    series: &TimeSeries,
    phi_init: f64,
    start_index: usize,
    hyper: &OnlineHyper,
) -> Result<Vec<f64>> {
    let n = series.len();
    if start_index < 1 || start_index >= n {
        return Err(IarError::invalid(format!(
            "start_index {start_index} out of range [1, {}]",
            n - 1
        )));
    }
    if phi_init <= 0.0 || phi_init >= 1.0 {
        return Err(IarError::invalid("phi_init must lie in (0,1)"));
    }
    let mut state = EstimatorState::new(method, phi_init, hyper)?;
    let y = series.values();
    let mut trajectory = vec![clamp_phi(phi_init); n];
    for j in start_index..n {
        trajectory[j] = state.step(y[j - 1], y[j], series.gap(j))?;
    }
    Ok(trajectory)
}
