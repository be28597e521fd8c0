//! Generators for observational-time sequences with the four gap
//! distributions used in the simulation experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{IarError, Result};

/// Distribution of the time gaps between consecutive observations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeGapSpec {
    /// Constant gaps.
    Regular { gap: f64 },
    /// Gaps uniform on `[a, b]`.
    Uniform { a: f64, b: f64 },
    /// Gamma-distributed gaps with shape and rate (mean = shape/rate).
    Gamma { shape: f64, rate: f64 },
    /// Mixture of two exponentials with the given means and weight on the first.
    ExpMixture { mean1: f64, mean2: f64, w1: f64 },
}

impl TimeGapSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TimeGapSpec::Regular { gap } => gap > 0.0 && gap.is_finite(),
            TimeGapSpec::Uniform { a, b } => a > 0.0 && b > a && b.is_finite(),
            TimeGapSpec::Gamma { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
            TimeGapSpec::ExpMixture { mean1, mean2, w1 } => {
                mean1 > 0.0 && mean2 > 0.0 && w1 > 0.0 && w1 < 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(IarError::invalid(format!("invalid gap spec parameters: {self:?}")))
        }
    }

    /// Analytic mean gap.
    pub fn mean_gap(&self) -> f64 {
        match *self {
            TimeGapSpec::Regular { gap } => gap,
            TimeGapSpec::Uniform { a, b } => 0.5 * (a + b),
            TimeGapSpec::Gamma { shape, rate } => shape / rate,
            TimeGapSpec::ExpMixture { mean1, mean2, w1 } => w1 * mean1 + (1.0 - w1) * mean2,
        }
    }

    /// Parses the CLI mini-grammar: `regular:1`, `unif:0.5,1.5`,
    /// `gamma:3,3`, `expmix:15,2,0.15`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, rest) = text
            .split_once(':')
            .ok_or_else(|| IarError::invalid(format!("gap spec '{text}' missing ':'")))?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| IarError::invalid(format!("gap spec number '{p}' in '{text}'")))
            })
            .collect::<Result<_>>()?;
        let spec = match (name, nums.as_slice()) {
            ("regular", [gap]) => TimeGapSpec::Regular { gap: *gap },
            ("unif", [a, b]) => TimeGapSpec::Uniform { a: *a, b: *b },
            ("gamma", [shape, rate]) => TimeGapSpec::Gamma { shape: *shape, rate: *rate },
            ("expmix", [m1, m2, w1]) => {
                TimeGapSpec::ExpMixture { mean1: *m1, mean2: *m2, w1: *w1 }
            }
            _ => {
                return Err(IarError::invalid(format!(
                    "unrecognized gap spec '{text}' (expected regular:g, unif:a,b, gamma:shape,rate or expmix:m1,m2,w1)"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl std::fmt::Display for TimeGapSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            TimeGapSpec::Regular { gap } => write!(f, "regular:{gap}"),
            TimeGapSpec::Uniform { a, b } => write!(f, "unif:{a},{b}"),
            TimeGapSpec::Gamma { shape, rate } => write!(f, "gamma:{shape},{rate}"),
            TimeGapSpec::ExpMixture { mean1, mean2, w1 } => {
                write!(f, "expmix:{mean1},{mean2},{w1}")
            }
        }
    }
}

/// Draws `n` observational times starting at 0 with i.i.d. gaps from `spec`.
pub fn gen_times(spec: TimeGapSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if n == 0 {
        return Err(IarError::invalid("n must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::with_capacity(n);
    times.push(0.0);
    match spec {
        TimeGapSpec::Regular { gap } => {
            for j in 1..n {
                times.push(j as f64 * gap);
            }
        }
        TimeGapSpec::Uniform { a, b } => {
            let dist = Uniform::new(a, b);
            for j in 1..n {
                times.push(times[j - 1] + dist.sample(&mut rng));
            }
        }
        TimeGapSpec::Gamma { shape, rate } => {
            let dist = Gamma::new(shape, 1.0 / rate)
                .map_err(|e| IarError::invalid(format!("gamma spec: {e}")))?;
            for j in 1..n {
                times.push(times[j - 1] + dist.sample(&mut rng));
            }
        }
        TimeGapSpec::ExpMixture { mean1, mean2, w1 } => {
            let comp1 = Exp::new(1.0 / mean1)
                .map_err(|e| IarError::invalid(format!("expmix spec: {e}")))?;
            let comp2 = Exp::new(1.0 / mean2)
                .map_err(|e| IarError::invalid(format!("expmix spec: {e}")))?;
            let pick = Uniform::new(0.0, 1.0);
            for j in 1..n {
                let gap = if pick.sample(&mut rng) < w1 {
                    comp1.sample(&mut rng)
                } else {
                    comp2.sample(&mut rng)
                };
                times.push(times[j - 1] + gap);
            }
        }
    }
    Ok(times)
}
