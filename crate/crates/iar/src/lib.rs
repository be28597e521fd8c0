//! Irregularly observed autoregressive (iAR) modeling: batch maximum
//! likelihood, streaming parameter updates (ONS / OGD / OBR), seedable
//! simulation, a Monte Carlo experiment harness and CSV preprocessing.

pub mod batch;
pub mod error;
pub mod experiments;
pub mod model;
pub mod online;
pub mod pipeline;
pub mod sampling;

pub use batch::{fit_mle, MleResult, SigmaSpec};
pub use error::{IarError, Result};
pub use model::{
    fitted_values, innovation_variance, neg_log_likelihood, predict_one, simulate,
    simulate_time_varying, IarParams, OneStepFit, TimeSeries,
};
pub use online::{
    loss_and_gradient, obr_step, ogd_step, ons_step, run_online, ObrState, OgdState, OnlineHyper,
    OnlineMethod, OnsState,
};
pub use sampling::{gen_times, TimeGapSpec};
