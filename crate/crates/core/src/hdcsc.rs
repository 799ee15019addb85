//! Hierarchical delay current sharing: two-level delay schedule and
//! reference splitting across modules.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HdcscError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// `y` groups of `x` modules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub x: usize,
    pub y: usize,
}

impl Default for Topology {
    fn default() -> Self {
        Self { x: 3, y: 4 }
    }
}

impl Topology {
    pub fn modules(&self) -> usize {
        self.x * self.y
    }

    pub fn validate(&self) -> Result<(), HdcscError> {
        if self.x == 0 || self.y == 0 {
            return Err(HdcscError::InvalidConfig(format!(
                "topology x = {}, y = {} must both be >= 1",
                self.x, self.y
            )));
        }
        Ok(())
    }

    /// Flat module index of module `k` in group `g`.
    pub fn index(&self, g: usize, k: usize) -> usize {
        g * self.x + k
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DelaySchedule {
    /// Ripple period (s).
    pub t_m: f64,
    pub t_d1: f64,
    pub t_d2: f64,
    /// Indexed by [`Topology::index`].
    pub module_delays: Vec<f64>,
}

impl DelaySchedule {
    /// Delays sorted ascending.
    pub fn sorted_delays(&self) -> Vec<f64> {
        let mut d = self.module_delays.clone();
        d.sort_by(f64::total_cmp);
        d
    }
}

/// `[0, T_m/x, 2 T_m/x, ...]`.
pub fn first_stage_delays(t_m: f64, x: usize) -> Result<Vec<f64>, HdcscError> {
    if x == 0 || !(t_m > 0.0) {
        return Err(HdcscError::InvalidArgument(format!("need T_m > 0 and x >= 1 (T_m = {t_m}, x = {x})")));
    }
    let td1 = t_m / x as f64;
    Ok((0..x).map(|i| i as f64 * td1).collect())
}

/// `[0, t_d1/y, ..., (y-1) t_d1/y]`.
pub fn second_stage_delays(t_d1: f64, y: usize) -> Result<Vec<f64>, HdcscError> {
    if y == 0 || !(t_d1 > 0.0) {
        return Err(HdcscError::InvalidArgument(format!("need t_d1 > 0 and y >= 1 (t_d1 = {t_d1}, y = {y})")));
    }
    let td2 = t_d1 / y as f64;
    Ok((0..y).map(|j| j as f64 * td2).collect())
}

/// Module `(g, k)` is delayed by `tau_g + t_k`.
pub fn build_schedule(topo: Topology, f_grid: f64, pulses: u32) -> Result<DelaySchedule, HdcscError> {
    topo.validate()?;
    if !(f_grid > 0.0) || pulses == 0 {
        return Err(HdcscError::InvalidArgument("grid frequency and pulse count must be positive".into()));
    }
    let t_m = 1.0 / (pulses as f64 * f_grid);
    let t = first_stage_delays(t_m, topo.x)?;
    let t_d1 = t_m / topo.x as f64;
    let tau = second_stage_delays(t_d1, topo.y)?;
    let mut module_delays = vec![0.0; topo.modules()];
    for (g, tg) in tau.iter().enumerate() {
        for (k, tk) in t.iter().enumerate() {
            module_delays[topo.index(g, k)] = tg + tk;
        }
    }
    Ok(DelaySchedule {
        t_m,
        t_d1,
        t_d2: t_d1 / topo.y as f64,
        module_delays,
    })
}

/// Equal split of the total reference over the active modules.
pub fn share_reference(i_ref_total: f64, active: &[bool]) -> Result<Vec<f64>, HdcscError> {
    let count = active.iter().filter(|a| **a).count();
    if count == 0 {
        return Err(HdcscError::InvalidConfig("no active modules".into()));
    }
    let each = i_ref_total / count as f64;
    Ok(active.iter().map(|&a| if a { each } else { 0.0 }).collect())
}

/// `|(1/N) sum exp(-j 2 pi k d_i / T_m)|` over the schedule of `x` by `y`.
pub fn interleave_cancellation_factor(x: usize, y: usize, k: u32) -> Result<f64, HdcscError> {
    if k == 0 {
        return Err(HdcscError::InvalidArgument("harmonic index must be >= 1".into()));
    }
    // Delays as fractions of T_m, so the result does not depend on the grid.
    let s = build_schedule(Topology { x, y }, 1.0, 1)?;
    let n = s.module_delays.len() as f64;
    let sum: Complex64 = s
        .module_delays
        .iter()
        .map(|d| Complex64::from_polar(1.0, -2.0 * PI * k as f64 * d / s.t_m))
        .sum();
    Ok(sum.norm() / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::DelayLine;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn first_stage() {
        assert!(close(&first_stage_delays(3.3e-3, 3).unwrap(), &[0.0, 1.1e-3, 2.2e-3], 1e-15));
        assert_eq!(first_stage_delays(3.3e-3, 1).unwrap(), vec![0.0]);
        let six = first_stage_delays(3.3e-3, 6).unwrap();
        assert!(close(&six, &[0.0, 0.55e-3, 1.1e-3, 1.65e-3, 2.2e-3, 2.75e-3], 1e-15));
        assert!(first_stage_delays(3.3e-3, 0).is_err());
    }

    #[test]
    fn second_stage() {
        assert!(close(
            &second_stage_delays(1.1e-3, 4).unwrap(),
            &[0.0, 0.275e-3, 0.55e-3, 0.825e-3],
            1e-15
        ));
        assert_eq!(second_stage_delays(1.1e-3, 1).unwrap(), vec![0.0]);
        assert!(close(&second_stage_delays(1.1e-3, 2).unwrap(), &[0.0, 0.55e-3], 1e-15));
        assert!(second_stage_delays(1.1e-3, 0).is_err());
    }

    #[test]
    fn twelve_module_schedule() {
        let s = build_schedule(Topology::default(), 50.0, 6).unwrap();
        assert!((s.t_m - 1.0 / 300.0).abs() < 1e-15);
        let d = s.sorted_delays();
        assert_eq!(d.len(), 12);
        let spacing = s.t_m / 12.0;
        for (i, v) in d.iter().enumerate() {
            assert!((v - i as f64 * spacing).abs() < 1e-12);
        }
        assert!((d[11] - 3.0555e-3).abs() < 1e-6);
        assert!(d[11] < s.t_m);
    }

    #[test]
    fn degenerate_and_sixty_hertz() {
        let one = build_schedule(Topology { x: 1, y: 1 }, 50.0, 6).unwrap();
        assert_eq!(one.module_delays, vec![0.0]);
        let a = build_schedule(Topology::default(), 50.0, 6).unwrap();
        let b = build_schedule(Topology::default(), 60.0, 6).unwrap();
        for (x, y) in a.module_delays.iter().zip(&b.module_delays) {
            assert!((y - x * 5.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sharing() {
        let r = share_reference(8000.0, &[true; 12]).unwrap();
        assert!((r[0] - 666.666_666_666_666_6).abs() < 1e-9);
        let mut mask = [true; 12];
        mask[5] = false;
        let r = share_reference(8000.0, &mask).unwrap();
        assert_eq!(r[5], 0.0);
        assert!((r[0] - 727.272_727).abs() < 1e-5);
        assert!(share_reference(0.0, &[true; 12]).unwrap().iter().all(|v| *v == 0.0));
        assert!(share_reference(1.0, &[false; 3]).is_err());
    }

    #[test]
    fn cancellation_factor() {
        assert!(interleave_cancellation_factor(3, 4, 1).unwrap() < 1e-12);
        assert!((interleave_cancellation_factor(3, 4, 12).unwrap() - 1.0).abs() < 1e-12);
        assert!((interleave_cancellation_factor(3, 1, 3).unwrap() - 1.0).abs() < 1e-12);
        assert!(interleave_cancellation_factor(3, 4, 0).is_err());
    }

    #[test]
    fn delayed_tones_cancel() {
        let s = build_schedule(Topology::default(), 50.0, 6).unwrap();
        // 1/T_m divides into a step that makes every delay an integer.
        let dt = s.t_m / 1200.0;
        let mut lines: Vec<DelayLine> = s.module_delays.iter().map(|d| DelayLine::new(*d, dt, 0.0)).collect();
        let w = 2.0 * PI / s.t_m;
        let mut peak: f64 = 0.0;
        for i in 0..4800 {
            let v = (w * i as f64 * dt).sin();
            let sum: f64 = lines.iter_mut().map(|l| l.read_write(v)).sum();
            if i >= 1200 {
                peak = peak.max(sum.abs() / 12.0);
            }
        }
        assert!(peak <= 0.01, "residual {peak}");
    }
}
