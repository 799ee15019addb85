//! Transfer-function algebra, frequency response, poles, and time-domain
//! metrics.

mod freq;
mod metrics;
mod poly;
mod tf;

pub use freq::{freq_response, logspace, poles, root_locus, stability_check, FreqPoint, StabilityReport};
pub use metrics::{
    ripple_pp, sag_metrics, settling_time, tone_amplitude, Metrics, DEFAULT_SETTLING_BAND,
};
pub use poly::Poly;
pub use tf::{
    controller_tf, leso_tf_matrix, pi_tf, prefilter_tf, tf_arithmetic, LadrcGains, RationalTf, TfOp,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("transfer function denominator is the zero polynomial")]
    ZeroDenominator,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Open-loop `G_F G_c G_p` of the LADRC current loop.
pub fn ladrc_open_loop(gains: &LadrcGains, plant: &RationalTf) -> Result<RationalTf, AnalysisError> {
    Ok(prefilter_tf(gains)?.mul(&controller_tf(gains)?).mul(plant))
}

/// Reference-to-output closed loop `G_F G_c G_p / (1 + G_c G_p)`.
pub fn ladrc_closed_loop(gains: &LadrcGains, plant: &RationalTf) -> Result<RationalTf, AnalysisError> {
    let loop_tf = controller_tf(gains)?.mul(plant);
    Ok(prefilter_tf(gains)?.mul(&loop_tf.feedback(&RationalTf::gain(1.0))?))
}
