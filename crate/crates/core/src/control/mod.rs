//! PI, LADRC and adaptive-bandwidth LADRC current controllers plus the
//! duty-cycle ripple compensation term.

mod compensation;
mod ladrc;
mod pi;

pub use compensation::{duty_compensation, total_duty, CompParams, DEFAULT_COMP_LIMIT};
pub use ladrc::{adaptive_bandwidth, leso_gains, pd_gains, LadrcParams, LadrcState, Region};
pub use pi::{PiParams, PiState, DEFAULT_KI, DEFAULT_KP};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_D_MAX: f64 = 0.95;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite controller input (y = {y}, u = {u}, observer = {z:?})")]
    NonFinite { y: f64, u: f64, z: [f64; 3] },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DutyLimits {
    pub min: f64,
    pub max: f64,
}

impl Default for DutyLimits {
    fn default() -> Self {
        Self {
            min: 0.0,
            max: DEFAULT_D_MAX,
        }
    }
}

impl DutyLimits {
    pub fn clamp(&self, d: f64) -> f64 {
        d.clamp(self.min, self.max)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.min >= 0.0 && self.min < self.max && self.max <= 1.0) {
            return Err(ControlError::InvalidConfig(format!(
                "duty limits [{}, {}] must satisfy 0 <= min < max <= 1",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// One module's feedback controller.
#[derive(Clone, Debug, PartialEq)]
pub enum Controller {
    Pi(PiState),
    Ladrc {
        state: LadrcState,
        limits: DutyLimits,
        /// Present for the adaptive variant.
        adaptive: Option<(LadrcParams, Region)>,
    },
}

impl Controller {
    pub fn pi(p: PiParams, limits: DutyLimits) -> Self {
        Controller::Pi(PiState::new(p, limits))
    }

    pub fn ladrc(p: &LadrcParams, limits: DutyLimits, adaptive: bool) -> Result<Self, ControlError> {
        Ok(Controller::Ladrc {
            state: LadrcState::from_params(p)?,
            limits,
            adaptive: adaptive.then_some((*p, Region::Above)),
        })
    }

    /// Seed observer / integrator so the first sample is not a step.
    pub fn initialize(&mut self, y: f64, duty: f64) {
        match self {
            Controller::Pi(pi) => {
                if pi.ki != 0.0 {
                    pi.integral = duty / pi.ki;
                }
            }
            Controller::Ladrc { state, .. } => state.reset_to(y),
        }
    }

    /// Feedback duty for sample `y` against reference `r`.
    ///
    /// `u_applied` is the duty that acted on the plant over the last period;
    /// `i_total` drives the adaptive bandwidth.
    pub fn update(&mut self, y: f64, r: f64, u_applied: f64, i_total: f64, dt: f64) -> Result<f64, ControlError> {
        match self {
            Controller::Pi(pi) => {
                if !y.is_finite() {
                    return Err(ControlError::NonFinite {
                        y,
                        u: u_applied,
                        z: [pi.integral, 0.0, 0.0],
                    });
                }
                Ok(pi.step(r - y, dt))
            }
            Controller::Ladrc {
                state,
                limits,
                adaptive,
            } => {
                state.advance(y, r, u_applied, dt)?;
                if let Some((p, region)) = adaptive {
                    let (wc, next) = adaptive_bandwidth(i_total, p, *region);
                    *region = next;
                    state.refresh_gains(wc)?;
                }
                Ok(state.duty(r, *limits))
            }
        }
    }

    /// Active controller bandwidth, if the controller has one.
    pub fn bandwidth(&self) -> Option<f64> {
        match self {
            Controller::Pi(_) => None,
            Controller::Ladrc { state, .. } => Some(state.wc),
        }
    }
}
