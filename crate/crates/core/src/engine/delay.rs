use std::collections::VecDeque;

/// Fixed delay quantized to whole sample steps.
///
/// Each call to [`DelayLine::read_write`] advances one step. Until the delay
/// has elapsed the line returns its fill value.
#[derive(Clone, Debug)]
pub struct DelayLine {
    steps: usize,
    step: f64,
    requested: f64,
    buffer: VecDeque<f64>,
}

impl DelayLine {
    /// Ties (exactly half a step) round up.
    pub fn new(delay: f64, step: f64, fill: f64) -> Self {
        assert!(delay >= 0.0 && step > 0.0, "delay must be >= 0 and step > 0");
        let steps = (delay / step + 1e-9).round() as usize;
        Self {
            steps,
            step,
            requested: delay,
            buffer: std::iter::repeat(fill).take(steps).collect(),
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Realized (quantized) delay in seconds.
    pub fn delay(&self) -> f64 {
        self.steps as f64 * self.step
    }

    pub fn requested_delay(&self) -> f64 {
        self.requested
    }

    pub fn quantization_error(&self) -> f64 {
        self.delay() - self.requested
    }

    /// Write `input` for the current step and return the value written
    /// `steps` calls ago.
    pub fn read_write(&mut self, input: f64) -> f64 {
        if self.steps == 0 {
            return input;
        }
        self.buffer.push_back(input);
        self.buffer.pop_front().expect("buffer holds `steps` samples")
    }
}
