//! Scalar figures extracted from sampled traces.

use num_complex::Complex64;

use super::AnalysisError;
use crate::engine::Trace;

/// Default settling band (fraction of target).
pub const DEFAULT_SETTLING_BAND: f64 = 0.02;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    /// `f64::INFINITY` when the trace never settles.
    pub settling_time: f64,
    pub ripple_pp: f64,
    pub sag_depth: f64,
    /// `f64::INFINITY` when the trace never recovers.
    pub sag_duration: f64,
    pub tone_amp: f64,
    pub tone_freq: f64,
}

/// Time after which the trace stays within `target * (1 +- band)`.
///
/// Returns `f64::INFINITY` when the final sample is still outside the band.
pub fn settling_time(trace: &Trace, target: f64, band: f64) -> Result<f64, AnalysisError> {
    if !(band > 0.0 && band < 0.5) {
        return Err(AnalysisError::InvalidArgument(format!(
            "settling band {band} outside (0, 0.5)"
        )));
    }
    let tol = band * target.abs();
    let last_bad = trace
        .samples
        .iter()
        .rposition(|y| (y - target).abs() > tol);
    Ok(match last_bad {
        None => trace.t0,
        Some(i) if i + 1 == trace.samples.len() => f64::INFINITY,
        Some(i) => trace.time(i + 1),
    })
}

/// Peak-to-peak over the trailing `window` seconds.
pub fn ripple_pp(trace: &Trace, window: f64) -> Result<f64, AnalysisError> {
    let tail = trace.tail(window)?;
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        });
    Ok(if tail.is_empty() { 0.0 } else { hi - lo })
}

/// Depth below `pre_level` after `event_t` and the time to re-enter and stay
/// inside `pre_level * (1 +- recovery_band)`.
pub fn sag_metrics(
    trace: &Trace,
    event_t: f64,
    pre_level: f64,
    recovery_band: f64,
) -> Result<(f64, f64), AnalysisError> {
    let end = trace.time(trace.samples.len().saturating_sub(1));
    if event_t < trace.t0 || event_t > end {
        return Err(AnalysisError::InvalidArgument(format!(
            "event time {event_t} outside trace [{}, {end}]",
            trace.t0
        )));
    }
    let start = ((event_t - trace.t0) / trace.dt).ceil() as usize;
    let after = &trace.samples[start.min(trace.samples.len())..];
    let min = after.iter().copied().fold(f64::INFINITY, f64::min);
    let depth = (pre_level - min).max(0.0);
    let tol = recovery_band * pre_level.abs();
    let duration = match after.iter().rposition(|y| (y - pre_level).abs() > tol) {
        None => 0.0,
        Some(i) if i + 1 == after.len() => f64::INFINITY,
        Some(i) => trace.time(start + i + 1) - event_t,
    };
    Ok((depth, duration))
}

/// Amplitude of the `f` component over the longest trailing window holding an
/// integer number of periods (mean removed first).
pub fn tone_amplitude(trace: &Trace, f: f64) -> Result<f64, AnalysisError> {
    if !(f > 0.0) {
        return Err(AnalysisError::InvalidArgument(format!("tone frequency {f} must be > 0")));
    }
    let duration = trace.samples.len() as f64 * trace.dt;
    let periods = (duration * f).floor();
    if periods < 3.0 {
        return Err(AnalysisError::InvalidArgument(format!(
            "trace spans {:.3} periods of {f} Hz, need at least 3",
            duration * f
        )));
    }
    let n = ((periods / f) / trace.dt).round() as usize;
    let n = n.min(trace.samples.len());
    let first = trace.samples.len() - n;
    let window = &trace.samples[first..];
    let mean = window.iter().sum::<f64>() / n as f64;
    let w = 2.0 * std::f64::consts::PI * f;
    let acc: Complex64 = window
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let t = trace.time(first + i);
            Complex64::from_polar(y - mean, -w * t)
        })
        .sum();
    Ok(2.0 * acc.norm() / n as f64)
}
