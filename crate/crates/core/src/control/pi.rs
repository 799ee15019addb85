use serde::{Deserialize, Serialize};

use super::DutyLimits;

/// Frozen PI gains for the 8000 A desk-scale current loop.
pub const DEFAULT_KP: f64 = 8e-4;
pub const DEFAULT_KI: f64 = 0.016;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiParams {
    /// Duty per ampere.
    pub kp: f64,
    /// Duty per ampere-second.
    pub ki: f64,
}

impl Default for PiParams {
    fn default() -> Self {
        Self {
            kp: DEFAULT_KP,
            ki: DEFAULT_KI,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiState {
    pub kp: f64,
    pub ki: f64,
    /// Ampere-seconds.
    pub integral: f64,
    pub limits: DutyLimits,
}

impl PiState {
    pub fn new(p: PiParams, limits: DutyLimits) -> Self {
        Self {
            kp: p.kp,
            ki: p.ki,
            integral: 0.0,
            limits,
        }
    }

    /// One controller update; integration stops while the output is
    /// saturated in the direction the error would push it.
    pub fn step(&mut self, error: f64, dt: f64) -> f64 {
        let candidate = self.integral + error * dt;
        let u = self.kp * error + self.ki * candidate;
        let held = (u > self.limits.max && error > 0.0) || (u < self.limits.min && error < 0.0);
        if !held {
            self.integral = candidate;
        }
        self.limits.clamp(self.kp * error + self.ki * self.integral)
    }
}
