//! Batch maximum-likelihood estimation of the autocorrelation parameter by
//! one-dimensional bounded minimization of the negative log-likelihood.

use serde::{Deserialize, Serialize};

use crate::error::{IarError, Result};
use crate::model::{neg_log_likelihood, IarParams, TimeSeries, PHI_MAX, PHI_MIN};

const GOLDEN_RATIO_COMPLEMENT: f64 = 0.381_966_011_250_105_1; // 2 - golden ratio
const DEFAULT_TOL: f64 = 1e-6;
const MAX_ITERS: usize = 200;
/// Coarse bracketing scan; guards against a secondary mode capturing the
/// golden-section bracket.
const SCAN_POINTS: usize = 20;

/// How sigma is treated during the 1-D fit of phi.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSpec {
    /// Use the sample standard deviation of the series values.
    FromSample,
    /// Hold sigma fixed at the given value.
    Fixed(f64),
}

impl SigmaSpec {
    fn resolve(self, series: &TimeSeries) -> Result<f64> {
        let sigma = match self {
            SigmaSpec::FromSample => series.sample_std(),
            SigmaSpec::Fixed(s) => s,
        };
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(IarError::DegenerateData(format!(
                "sigma resolved to {sigma}; series has no spread"
            )));
        }
        Ok(sigma)
    }
}

/// Result of a batch fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub phi_hat: f64,
    pub sigma: f64,
    pub nll: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits phi by golden-section search on `[PHI_MIN, PHI_MAX]` after a coarse
/// scan locates the bracketing interval.
pub fn fit_mle(series: &TimeSeries, sigma: SigmaSpec) -> Result<MleResult> {
    if series.len() < 2 {
        return Err(IarError::invalid("fit_mle: need at least 2 observations"));
    }
    let sigma = sigma.resolve(series)?;
    let objective = |phi: f64| -> f64 {
        let params = IarParams { phi, sigma };
        neg_log_likelihood(params, series).unwrap_or(f64::INFINITY)
    };

    // Coarse scan to bracket the global minimum.
    let mut best_k = 0;
    let mut best_f = f64::INFINITY;
    for k in 0..=SCAN_POINTS {
        let phi = PHI_MIN + (PHI_MAX - PHI_MIN) * k as f64 / SCAN_POINTS as f64;
        let f = objective(phi);
        if f < best_f {
            best_f = f;
            best_k = k;
        }
    }
    let step = (PHI_MAX - PHI_MIN) / SCAN_POINTS as f64;
    let lo = PHI_MIN + step * best_k.saturating_sub(1) as f64;
    let hi = (PHI_MIN + step * (best_k + 1) as f64).min(PHI_MAX);

    let (phi_hat, nll, iterations, converged) =
        golden_section(&objective, lo, hi, DEFAULT_TOL, MAX_ITERS);
    Ok(MleResult { phi_hat, sigma, nll, iterations, converged })
}

fn golden_section(
    f: &dyn Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iters: usize,
) -> (f64, f64, usize, bool) {
    let mut x1 = a + GOLDEN_RATIO_COMPLEMENT * (b - a);
    let mut x2 = b - GOLDEN_RATIO_COMPLEMENT * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while iters < max_iters && (b - a) > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + GOLDEN_RATIO_COMPLEMENT * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - GOLDEN_RATIO_COMPLEMENT * (b - a);
            f2 = f(x2);
        }
        iters += 1;
    }
    let (x, fx) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    (x, fx, iters, (b - a) <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{phi_pow, simulate, IarParams};
    use crate::sampling::{gen_times, TimeGapSpec};

    /// Independent argmin oracle: exhaustive scan over a uniform grid.
    pub(crate) fn grid_search_oracle(series: &TimeSeries, sigma: f64, points: usize) -> (f64, f64) {
        let mut best = (PHI_MIN, f64::INFINITY);
        for k in 0..points {
            let phi = PHI_MIN + (PHI_MAX - PHI_MIN) * k as f64 / (points - 1) as f64;
            let nll = neg_log_likelihood(IarParams { phi, sigma }, series).unwrap();
            if nll < best.1 {
                best = (phi, nll);
            }
        }
        best
    }

    #[test]
    fn recovers_phi_on_noiseless_decay() {
        // y_j = 0.5^{t_j} with unit gaps: the predictor is exact at phi = 0.5.
        let times: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let values: Vec<f64> = times.iter().map(|&t| phi_pow(0.5, t)).collect();
        let series = TimeSeries::new(times, values, None).unwrap();
        let fit = fit_mle(&series, SigmaSpec::Fixed(1e-3)).unwrap();
        assert!((fit.phi_hat - 0.5).abs() < 1e-3, "phi_hat {}", fit.phi_hat);
        assert!(fit.converged);
    }

    #[test]
    fn matches_grid_search_on_simulated_series() {
        let params = IarParams::new(0.5, 1.0).unwrap();
        for seed in 0..5u64 {
            let times = gen_times(TimeGapSpec::Uniform { a: 0.5, b: 1.5 }, 300, seed).unwrap();
            let series = simulate(params, &times, seed + 100, None).unwrap();
            let fit = fit_mle(&series, SigmaSpec::FromSample).unwrap();
            let (grid_phi, grid_nll) = grid_search_oracle(&series, fit.sigma, 10_001);
            assert!(
                (fit.phi_hat - grid_phi).abs() < 2e-4,
                "seed {seed}: optimizer {} vs grid {grid_phi}",
                fit.phi_hat
            );
            assert!(fit.nll <= grid_nll + 1e-8);
        }
    }

    #[test]
    fn scale_invariance_with_sample_sigma() {
        let params = IarParams::new(0.7, 1.0).unwrap();
        let times = gen_times(TimeGapSpec::Regular { gap: 1.0 }, 200, 4).unwrap();
        let series = simulate(params, &times, 5, None).unwrap();
        let scaled = TimeSeries::new(
            series.times().to_vec(),
            series.values().iter().map(|v| v * 37.5).collect(),
            None,
        )
        .unwrap();
        let a = fit_mle(&series, SigmaSpec::FromSample).unwrap();
        let b = fit_mle(&scaled, SigmaSpec::FromSample).unwrap();
        assert!((a.phi_hat - b.phi_hat).abs() < 1e-6);
    }

    #[test]
    fn nll_at_minimum_beats_endpoints() {
        let params = IarParams::new(0.3, 1.0).unwrap();
        let times = gen_times(TimeGapSpec::Gamma { shape: 3.0, rate: 3.0 }, 150, 8).unwrap();
        let series = simulate(params, &times, 9, None).unwrap();
        let fit = fit_mle(&series, SigmaSpec::FromSample).unwrap();
        let sigma = fit.sigma;
        for endpoint in [PHI_MIN, PHI_MAX] {
            let nll = neg_log_likelihood(IarParams { phi: endpoint, sigma }, &series).unwrap();
            assert!(fit.nll <= nll);
        }
    }

    #[test]
    fn rejects_short_or_flat_series() {
        let one = TimeSeries::new(vec![0.0], vec![1.0], None).unwrap();
        assert!(fit_mle(&one, SigmaSpec::FromSample).is_err());
        let flat = TimeSeries::new(vec![0.0, 1.0, 2.0], vec![3.0; 3], None).unwrap();
        assert!(fit_mle(&flat, SigmaSpec::FromSample).is_err());
    }
}
