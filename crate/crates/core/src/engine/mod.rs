//! Fixed-step integration, delay lines and the closed-loop simulation.

mod delay;
mod rk4;
mod sim;

pub use delay::DelayLine;
pub use rk4::{integrate_step, Rk4};
pub use sim::{run_simulation, RunMetrics, SimOutput};

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::control::ControlError;
use crate::plant::PlantError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("non-finite derivative in state {index} at t = {t} s")]
    NonFiniteDerivative { index: usize, t: f64 },
    #[error("state {index} reached {value:e} at t = {t} s (bound {bound:e}); {diagnostics}")]
    BlowUp {
        t: f64,
        index: usize,
        value: f64,
        bound: f64,
        diagnostics: String,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("controller failure at t = {t} s: {source}")]
    Control { t: f64, source: ControlError },
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Plant and controller time bases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimClock {
    pub dt_plant: f64,
    pub dt_ctrl: f64,
    pub t_end: f64,
    pub t: f64,
    /// Plant steps per control period.
    pub substeps: usize,
}

impl SimClock {
    /// The plant step is the largest `dt_ctrl / n` not above `dt_plant_max`.
    pub fn new(dt_plant_max: f64, dt_ctrl: f64, t_end: f64) -> Result<Self, EngineError> {
        if !(dt_plant_max > 0.0 && dt_ctrl > 0.0 && t_end > 0.0) {
            return Err(EngineError::InvalidConfig(format!(
                "clock needs positive dt_plant, dt_ctrl and t_end (got {dt_plant_max}, {dt_ctrl}, {t_end})"
            )));
        }
        let substeps = ((dt_ctrl / dt_plant_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok(Self {
            dt_plant: dt_ctrl / substeps as f64,
            dt_ctrl,
            t_end,
            t: 0.0,
            substeps,
        })
    }

    /// Number of control periods in `[0, t_end]`.
    pub fn ticks(&self) -> usize {
        (self.t_end / self.dt_ctrl + 1e-9).floor() as usize
    }

    pub fn tick_time(&self, k: usize) -> f64 {
        k as f64 * self.dt_ctrl
    }
}

/// Uniformly sampled named signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub name: String,
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl Trace {
    pub fn new(name: impl Into<String>, t0: f64, dt: f64, samples: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            t0,
            dt,
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    /// Samples covering the trailing `window` seconds.
    pub fn tail(&self, window: f64) -> Result<&[f64], AnalysisError> {
        let span = self.end_time() - self.t0;
        if !(window > 0.0) || window > span + 0.5 * self.dt {
            return Err(AnalysisError::InvalidArgument(format!(
                "window {window} s not within trace span {span} s"
            )));
        }
        let n = ((window / self.dt).round() as usize + 1).min(self.len());
        Ok(&self.samples[self.len() - n..])
    }

    /// Trailing `window` seconds as a new trace.
    pub fn tail_trace(&self, window: f64) -> Result<Trace, AnalysisError> {
        let tail = self.tail(window)?;
        let first = self.len() - tail.len();
        Ok(Trace::new(self.name.clone(), self.time(first), self.dt, tail.to_vec()))
    }

    /// Linear interpolation at `t`, clamped to the ends.
    pub fn sample_at(&self, t: f64) -> f64 {
        if self.is_empty() {
            return f64::NAN;
        }
        let x = ((t - self.t0) / self.dt).max(0.0);
        let i = x.floor() as usize;
        if i + 1 >= self.len() {
            return self.samples[self.len() - 1];
        }
        let a = x - i as f64;
        self.samples[i] * (1.0 - a) + self.samples[i + 1] * a
    }
}
