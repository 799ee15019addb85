//! Averaged electrical model of one AC-DC-DC module: six-pulse rectifier,
//! L1/C1 DC link, phase-shifted full bridge (buck-equivalent) and output
//! inductor feeding the shared output bus.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::RationalTf;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite plant input `{name}` at t = {t}")]
    NonFinite { name: &'static str, t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridParams {
    /// Line-to-line RMS voltage (V).
    pub u_ll_rms: f64,
    pub f_grid: f64,
    pub pulses: u32,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            u_ll_rms: 380.0,
            f_grid: 50.0,
            pulses: 6,
        }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.u_ll_rms > 0.0) {
            return Err(PlantError::InvalidArgument("grid.u_ll_rms must be > 0".into()));
        }
        if !(self.f_grid > 0.0) {
            return Err(PlantError::InvalidArgument("grid.f_grid must be > 0".into()));
        }
        if self.pulses < 2 {
            return Err(PlantError::InvalidArgument("grid.pulses must be >= 2".into()));
        }
        Ok(())
    }

    pub fn peak(&self) -> f64 {
        2f64.sqrt() * self.u_ll_rms
    }

    /// Period of the dominant rectifier ripple, `1 / (m f_grid)`.
    pub fn ripple_period(&self) -> f64 {
        1.0 / (self.pulses as f64 * self.f_grid)
    }

    /// Closed-form mean of the ideal envelope, `(m / pi) sin(pi / m) U_peak`.
    pub fn mean_rectified(&self) -> f64 {
        let m = self.pulses as f64;
        m / PI * (PI / m).sin() * self.peak()
    }
}

/// Ideal m-pulse rectifier envelope: `U_peak cos(theta)` with theta folded
/// into `[-pi/m, pi/m)` once per ripple period.
pub fn rectified_voltage(t: f64, grid: &GridParams) -> f64 {
    let seg = 2.0 * PI / grid.pulses as f64;
    let phase = (2.0 * PI * grid.f_grid * t).rem_euclid(seg);
    grid.peak() * (phase - 0.5 * seg).cos()
}

/// Composite Simpson over each envelope segment separately (the envelope is
/// smooth inside a segment and kinked at the boundaries).
fn envelope_projection(grid: &GridParams, n: u32) -> (f64, f64) {
    const PER_SEGMENT: usize = 256;
    let period = 1.0 / grid.f_grid;
    let segments = grid.pulses as usize;
    let seg_len = period / segments as f64;
    let h = seg_len / PER_SEGMENT as f64;
    let w = 2.0 * PI * n as f64 * grid.f_grid;
    let (mut a, mut b) = (0.0, 0.0);
    for s in 0..segments {
        let t0 = s as f64 * seg_len;
        for i in 0..=PER_SEGMENT {
            let weight = if i == 0 || i == PER_SEGMENT {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let t = t0 + i as f64 * h;
            // evaluate just inside the segment so boundary samples belong to it
            let tv = t.clamp(t0 + 1e-12 * seg_len, t0 + seg_len * (1.0 - 1e-12));
            let u = rectified_voltage(tv, grid);
            a += weight * u * (w * t).cos();
            b += weight * u * (w * t).sin();
        }
    }
    let scale = h / 3.0 * 2.0 / period;
    (a * scale, b * scale)
}

/// Peak amplitude of the `n`-th harmonic (of `f_grid`) of the envelope.
/// `n = 0` returns the mean.
pub fn envelope_harmonic(grid: &GridParams, n: u32) -> f64 {
    let (a, b) = envelope_projection(grid, n);
    if n == 0 {
        a / 2.0
    } else {
        a.hypot(b)
    }
}

/// `|b_n|` for `n = m k`, the k-th ripple harmonic of the rectified voltage.
pub fn ripple_fourier_coefficient(grid: &GridParams, k: i64) -> Result<f64, PlantError> {
    if k <= 0 {
        return Err(PlantError::InvalidArgument(format!("harmonic index k = {k} must be >= 1")));
    }
    Ok(envelope_harmonic(grid, grid.pulses * k as u32))
}

/// Electrical parameters of one module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParams {
    /// Bus-to-output gain of the transformer stage.
    pub n: f64,
    pub l_lk: f64,
    pub l1: f64,
    pub c1: f64,
    pub l2: f64,
    pub c2: f64,
    /// Equivalent damping resistance of the bridge (ohm).
    pub r_d: f64,
    /// DC-link series (source) resistance (ohm).
    pub r_s: f64,
    pub f_s: f64,
    /// Load resistance on the output bus (ohm).
    pub r_load: f64,
    /// Apply leakage-inductance duty loss to the commanded duty.
    pub duty_loss: bool,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            n: 1.0 / 1.5,
            l_lk: 30e-6,
            l1: 3200e-6,
            c1: 3000e-6,
            l2: 3000e-6,
            c2: 3500e-6,
            r_d: 0.0,
            r_s: 0.3,
            f_s: 15e3,
            r_load: 0.01,
            duty_loss: false,
        }
    }
}

impl PlantParams {
    /// Conventional PSFB damping identification `4 n^2 L_lk f_s`.
    pub fn leakage_damping(&self) -> f64 {
        4.0 * self.n * self.n * self.l_lk * self.f_s
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("plant.n", self.n),
            ("plant.l_lk", self.l_lk),
            ("plant.l1", self.l1),
            ("plant.c1", self.c1),
            ("plant.l2", self.l2),
            ("plant.c2", self.c2),
            ("plant.f_s", self.f_s),
            ("plant.r_load", self.r_load),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(PlantError::InvalidArgument(format!("{name} must be > 0 (got {v})")));
            }
        }
        for (name, v) in [("plant.r_d", self.r_d), ("plant.r_s", self.r_s)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(PlantError::InvalidArgument(format!("{name} must be >= 0 (got {v})")));
            }
        }
        Ok(())
    }

    /// The single-module equivalent of `modules` identical modules sharing
    /// the bus: each sees `modules * r_load`.
    pub fn per_module_equivalent(&self, modules: usize) -> Self {
        Self {
            r_load: self.r_load * modules as f64,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModuleState {
    pub i_l1: f64,
    /// DC-link voltage `u_i`.
    pub u_c1: f64,
    pub i_l2: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModuleDerivs {
    pub di_l1: f64,
    pub du_c1: f64,
    pub di_l2: f64,
}

/// Shared output capacitor bank and load.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BusModel {
    pub c_bus: f64,
    pub r_load: f64,
    pub u_bus: f64,
}

impl BusModel {
    pub fn new(c2_per_module: &[f64], r_load: f64) -> Self {
        Self {
            c_bus: c2_per_module.iter().sum(),
            r_load,
            u_bus: 0.0,
        }
    }

    pub fn load_current(&self, u_bus: f64) -> f64 {
        u_bus / self.r_load
    }

    pub fn derivative(&self, u_bus: f64, module_current_sum: f64) -> f64 {
        (module_current_sum - u_bus / self.r_load) / self.c_bus
    }
}

/// Averaged module dynamics at time `t` for a given effective duty.
pub fn module_derivatives(
    s: &ModuleState,
    u_bus: f64,
    d_eff: f64,
    t: f64,
    p: &PlantParams,
    g: &GridParams,
) -> Result<ModuleDerivs, PlantError> {
    for (name, v) in [
        ("i_l1", s.i_l1),
        ("u_c1", s.u_c1),
        ("i_l2", s.i_l2),
        ("u_bus", u_bus),
        ("d_eff", d_eff),
    ] {
        if !v.is_finite() {
            return Err(PlantError::NonFinite { name, t });
        }
    }
    Ok(module_derivatives_unchecked(s, u_bus, d_eff, t, p, g))
}

#[inline]
pub(crate) fn module_derivatives_unchecked(
    s: &ModuleState,
    u_bus: f64,
    d_eff: f64,
    t: f64,
    p: &PlantParams,
    g: &GridParams,
) -> ModuleDerivs {
    module_rates(s, u_bus, d_eff, rectified_voltage(t, g), p)
}

/// Module dynamics for a known rectifier output.
#[inline]
pub(crate) fn module_rates(s: &ModuleState, u_bus: f64, d_eff: f64, u_rect: f64, p: &PlantParams) -> ModuleDerivs {
    let mut di_l1 = (u_rect - s.u_c1 - p.r_s * s.i_l1) / p.l1;
    // blocking diode
    if s.i_l1 <= 0.0 && di_l1 < 0.0 {
        di_l1 = 0.0;
    }
    let i_inv = d_eff * p.n * s.i_l2;
    ModuleDerivs {
        di_l1,
        du_c1: (s.i_l1 - i_inv) / p.c1,
        di_l2: (d_eff * p.n * s.u_c1 - u_bus - p.r_d * s.i_l2) / p.l2,
    }
}

/// Whether [`effective_duty`] had to fall back on a non-positive DC link.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DutyDiagnostic {
    Ok,
    NonPositiveLink,
}

/// Commanded duty minus the leakage-inductance duty loss
/// `4 L_lk f_s max(i_L2, 0) / (n u_C1)`; identity when duty loss is off.
pub fn effective_duty(d: f64, i_l2: f64, u_c1: f64, p: &PlantParams) -> (f64, DutyDiagnostic) {
    if !p.duty_loss {
        return (d, DutyDiagnostic::Ok);
    }
    if u_c1 <= 0.0 {
        return (0.0, DutyDiagnostic::NonPositiveLink);
    }
    let loss = 4.0 * p.l_lk * p.f_s * i_l2.max(0.0) / (p.n * u_c1);
    ((d - loss).max(0.0), DutyDiagnostic::Ok)
}

/// Duty-to-output-voltage small-signal transfer function
/// `n U_i / (L2 C2 s^2 + (L2/R1 + R_d C2) s + R_d/R1 + 1)` with `R1 = r_load`.
pub fn g_uod(p: &PlantParams, u_i: f64) -> RationalTf {
    let r1 = p.r_load;
    RationalTf::new(
        vec![p.n * u_i],
        vec![p.r_d / r1 + 1.0, p.l2 / r1 + p.r_d * p.c2, p.l2 * p.c2],
    )
    .expect("positive parameters give a nonzero denominator")
}

/// Duty-to-output-current transfer function, `g_uod / R1`.
pub fn g_iod(p: &PlantParams, u_i: f64) -> RationalTf {
    g_uod(p, u_i).scale(1.0 / p.r_load)
}
