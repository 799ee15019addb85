//! Second-order linear ADRC: extended state observer, bandwidth-parameterized
//! PD law, and the load-adaptive controller bandwidth.

use serde::{Deserialize, Serialize};

use super::{ControlError, DutyLimits};
use crate::analysis::LadrcGains;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadrcParams {
    /// Nominal controller bandwidth (rad/s).
    pub wc0: f64,
    /// Observer bandwidth (rad/s).
    pub w0: f64,
    /// Control gain estimate (output units / s^2 per unit duty).
    pub b0: f64,
    /// Adaptive bandwidth step (rad/s).
    pub k_s: f64,
    /// Critical output current (A).
    pub i_c: f64,
    /// Width of the band around `i_c` inside which the region is held (A).
    pub hysteresis: f64,
}

impl LadrcParams {
    /// Checks hard constraints; returns advisory warnings for soft ones.
    pub fn validate(&self) -> Result<Vec<String>, ControlError> {
        if !(self.wc0 > 0.0) {
            return Err(ControlError::InvalidConfig("controller.wc0 must be > 0".into()));
        }
        if !(self.w0 > 0.0) {
            return Err(ControlError::InvalidConfig("controller.w0 must be > 0".into()));
        }
        if self.w0 < self.wc0 {
            return Err(ControlError::InvalidConfig(format!(
                "controller.w0 = {} is slower than controller.wc0 = {}",
                self.w0, self.wc0
            )));
        }
        if self.b0 == 0.0 || !self.b0.is_finite() {
            return Err(ControlError::InvalidConfig("controller.b0 must be finite and nonzero".into()));
        }
        if !(self.k_s >= 0.0) || !(self.wc0 - 2.0 * self.k_s > 0.0) {
            return Err(ControlError::InvalidConfig(format!(
                "controller.k_s = {} must satisfy 0 <= k_s < wc0 / 2",
                self.k_s
            )));
        }
        if !(self.hysteresis >= 0.0) {
            return Err(ControlError::InvalidConfig("controller.hysteresis must be >= 0".into()));
        }
        let mut warnings = Vec::new();
        if self.w0 < 4.0 * self.wc0 || self.w0 > 10.0 * self.wc0 {
            warnings.push(format!(
                "observer bandwidth {} outside the usual [4, 10] x wc0 = [{}, {}]",
                self.w0,
                4.0 * self.wc0,
                10.0 * self.wc0
            ));
        }
        Ok(warnings)
    }
}

/// `(kp, kd) = (wc^2, 2 wc)`: both closed-loop poles at `-wc`.
pub fn pd_gains(wc: f64) -> Result<(f64, f64), ControlError> {
    if !(wc > 0.0) {
        return Err(ControlError::InvalidArgument(format!("bandwidth wc = {wc} must be > 0")));
    }
    Ok((wc * wc, 2.0 * wc))
}

/// Observer gains placing all three poles at `-w0`.
pub fn leso_gains(w0: f64) -> Result<(f64, f64, f64), ControlError> {
    if !(w0 > 0.0) {
        return Err(ControlError::InvalidArgument(format!("bandwidth w0 = {w0} must be > 0")));
    }
    Ok((3.0 * w0, 3.0 * w0 * w0, w0 * w0 * w0))
}

/// Load region relative to the critical current: the sign in the adaptive
/// bandwidth law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Below,
    At,
    Above,
}

impl Region {
    pub fn sign(self) -> f64 {
        match self {
            Region::Below => -1.0,
            Region::At => 0.0,
            Region::Above => 1.0,
        }
    }

    fn of(x: f64) -> Self {
        if x > 0.0 {
            Region::Above
        } else if x < 0.0 {
            Region::Below
        } else {
            Region::At
        }
    }
}

/// `wc = wc0 + k_s (sign(i_o - i_c) - 1)`.
///
/// Inside `i_c +- hysteresis / 2` the previous region is kept; with zero
/// hysteresis this is the plain three-level law.
pub fn adaptive_bandwidth(i_o: f64, p: &LadrcParams, prev_region: Region) -> (f64, Region) {
    let x = i_o - p.i_c;
    let region = if p.hysteresis > 0.0 && x.abs() <= 0.5 * p.hysteresis {
        prev_region
    } else {
        Region::of(x)
    };
    (p.wc0 + p.k_s * (region.sign() - 1.0), region)
}

/// Observer estimates and active gains of one LADRC instance.
#[derive(Clone, Debug, PartialEq)]
pub struct LadrcState {
    /// Output, output rate, total disturbance.
    pub z: [f64; 3],
    pub beta: [f64; 3],
    pub kp: f64,
    pub kd: f64,
    pub wc: f64,
    pub b0: f64,
    y_prev: Option<f64>,
    r_prev: Option<f64>,
    /// Unsaturated law output at the last sample.
    u_prev: f64,
}

impl LadrcState {
    pub fn new(wc: f64, w0: f64, b0: f64) -> Result<Self, ControlError> {
        if b0 == 0.0 || !b0.is_finite() {
            return Err(ControlError::InvalidConfig("b0 must be finite and nonzero".into()));
        }
        let (kp, kd) = pd_gains(wc)?;
        let (b1, b2, b3) = leso_gains(w0)?;
        Ok(Self {
            z: [0.0; 3],
            beta: [b1, b2, b3],
            kp,
            kd,
            wc,
            b0,
            y_prev: None,
            r_prev: None,
            u_prev: 0.0,
        })
    }

    pub fn from_params(p: &LadrcParams) -> Result<Self, ControlError> {
        Self::new(p.wc0, p.w0, p.b0)
    }

    pub fn gains(&self) -> LadrcGains {
        LadrcGains {
            kp: self.kp,
            kd: self.kd,
            beta1: self.beta[0],
            beta2: self.beta[1],
            beta3: self.beta[2],
            b0: self.b0,
        }
    }

    /// Start the observer at a known output with zero rate and disturbance.
    pub fn reset_to(&mut self, y: f64) {
        self.z = [y, 0.0, 0.0];
        self.y_prev = Some(y);
        self.r_prev = None;
        self.u_prev = 0.0;
    }

    fn observer_rate(&self, z: &[f64; 3], y: f64, u: f64) -> [f64; 3] {
        let e = y - z[0];
        [
            self.beta[0] * e + z[1],
            self.beta[1] * e + z[2] + self.b0 * u,
            self.beta[2] * e,
        ]
    }

    /// Advance the observer over one control period ending at the sample `y`.
    ///
    /// `u` is the duty that was applied over the period (held). The output is
    /// interpolated linearly from the previous sample; on the first call it is
    /// held at `y`.
    pub fn leso_update(&mut self, y: f64, u: f64, dt: f64) -> Result<(), ControlError> {
        if !y.is_finite() || !u.is_finite() {
            return Err(ControlError::NonFinite {
                y,
                u,
                z: self.z,
            });
        }
        let y0 = self.y_prev.unwrap_or(y);
        let ym = 0.5 * (y0 + y);
        let z = self.z;
        let add = |a: &[f64; 3], k: &[f64; 3], h: f64| [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2]];
        let k1 = self.observer_rate(&z, y0, u);
        let k2 = self.observer_rate(&add(&z, &k1, 0.5 * dt), ym, u);
        let k3 = self.observer_rate(&add(&z, &k2, 0.5 * dt), ym, u);
        let k4 = self.observer_rate(&add(&z, &k3, dt), y, u);
        for i in 0..3 {
            self.z[i] = z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        self.y_prev = Some(y);
        Ok(())
    }

    /// Advance observer and control law together over one control period
    /// ending at samples `y`, `r`, and return the new unsaturated output.
    ///
    /// Inside the period the observer input is the control law evaluated on
    /// its own running estimate (output and reference interpolated
    /// linearly), shifted by `u_applied - u_prev` so that the period starts
    /// from the duty that really acted on the plant. Without saturation or
    /// delay the shift is zero and the pair integrates the continuous
    /// equivalent controller.
    pub fn advance(&mut self, y: f64, r: f64, u_applied: f64, dt: f64) -> Result<f64, ControlError> {
        if !y.is_finite() || !r.is_finite() || !u_applied.is_finite() {
            return Err(ControlError::NonFinite {
                y,
                u: u_applied,
                z: self.z,
            });
        }
        let offset = u_applied - self.u_prev;
        let (y0, r0) = (self.y_prev.unwrap_or(y), self.r_prev.unwrap_or(r));
        let (ym, rm) = (0.5 * (y0 + y), 0.5 * (r0 + r));
        let rate = |z: &[f64; 3], y: f64, r: f64| {
            let u = self.law(z, r) + offset;
            self.observer_rate(z, y, u)
        };
        let z = self.z;
        let add = |a: &[f64; 3], k: &[f64; 3], h: f64| [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2]];
        let k1 = rate(&z, y0, r0);
        let k2 = rate(&add(&z, &k1, 0.5 * dt), ym, rm);
        let k3 = rate(&add(&z, &k2, 0.5 * dt), ym, rm);
        let k4 = rate(&add(&z, &k3, dt), y, r);
        for i in 0..3 {
            self.z[i] = z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if self.z.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::NonFinite {
                y,
                u: u_applied,
                z: self.z,
            });
        }
        self.y_prev = Some(y);
        self.r_prev = Some(r);
        self.u_prev = self.control(r);
        Ok(self.u_prev)
    }

    fn law(&self, z: &[f64; 3], r: f64) -> f64 {
        (self.kp * (r - z[0]) - self.kd * z[1] - z[2]) / self.b0
    }

    /// Unsaturated control `(kp (r - z1) - kd z2 - z3) / b0`.
    pub fn control(&self, r: f64) -> f64 {
        self.law(&self.z, r)
    }

    pub fn duty(&self, r: f64, limits: DutyLimits) -> f64 {
        limits.clamp(self.control(r))
    }

    /// Recompute `kp`, `kd` for a new bandwidth; observer state and gains are
    /// untouched. The stored last output is re-evaluated with the new gains.
    pub fn refresh_gains(&mut self, wc: f64) -> Result<(), ControlError> {
        if wc != self.wc {
            let (kp, kd) = pd_gains(wc)?;
            self.kp = kp;
            self.kd = kd;
            self.wc = wc;
            if let Some(r) = self.r_prev {
                self.u_prev = self.control(r);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Poly;

    fn params(hyst: f64) -> LadrcParams {
        LadrcParams {
            wc0: 400.0,
            w0: 2800.0,
            b0: 1.0,
            k_s: 100.0,
            i_c: 30.0,
            hysteresis: hyst,
        }
    }

    #[test]
    fn gain_formulas() {
        assert_eq!(pd_gains(400.0).unwrap(), (160000.0, 800.0));
        assert_eq!(pd_gains(1.0).unwrap(), (1.0, 2.0));
        let (a, b) = pd_gains(3.0).unwrap();
        let (c, d) = pd_gains(6.0).unwrap();
        assert_eq!((c / a, d / b), (4.0, 2.0));
        assert!(pd_gains(0.0).is_err());
        assert_eq!(leso_gains(2800.0).unwrap(), (8400.0, 2.352e7, 2.1952e10));
        assert_eq!(leso_gains(1.0).unwrap(), (3.0, 3.0, 1.0));
        assert!(leso_gains(-1.0).is_err());
    }

    #[test]
    fn observer_poles_triple() {
        let (b1, b2, b3) = leso_gains(2800.0).unwrap();
        for r in Poly::new(vec![b3, b2, b1, 1.0]).roots() {
            assert!((r.re + 2800.0).abs() / 2800.0 < 1e-6);
        }
    }

    #[test]
    fn zero_innovation_keeps_state() {
        let mut st = LadrcState::new(400.0, 2800.0, 10.0).unwrap();
        st.reset_to(3.0);
        st.leso_update(3.0, 0.0, 1.0 / 15000.0).unwrap();
        assert_eq!(st.z, [3.0, 0.0, 0.0]);
    }

    #[test]
    fn converges_to_constant_output() {
        let mut st = LadrcState::new(400.0, 2800.0, 10.0).unwrap();
        let dt = 1.0 / 15000.0;
        for _ in 0..(0.05 / dt) as usize {
            st.leso_update(5.0, 0.0, dt).unwrap();
        }
        assert!((st.z[0] - 5.0).abs() < 1e-3);
        assert!(st.z[1].abs() < 1e-3);
        assert!(st.z[2].abs() < 1e-3);
    }

    #[test]
    fn tracks_total_disturbance_of_known_plant() {
        // y'' = f + b u with f = -a y' - w^2 y + d (known), u = small sine
        let b = 50.0;
        let (w, a, d) = (30.0, 4.0, 200.0);
        let w0 = 2800.0;
        let mut st = LadrcState::new(400.0, w0, b).unwrap();
        let dt = 1.0 / 15000.0;
        let (mut y, mut v) = (0.0f64, 0.0f64);
        let sub = 20;
        let h = dt / sub as f64;
        let mut t = 0.0;
        let steps = (0.02 / dt) as usize;
        for _ in 0..steps {
            let u = (2.0 * std::f64::consts::PI * 20.0 * t).sin();
            for _ in 0..sub {
                let acc = -a * v - w * w * y + d + b * u;
                v += h * acc;
                y += h * v;
            }
            t += dt;
            st.leso_update(y, u, dt).unwrap();
        }
        let f = -a * v - w * w * y + d;
        assert!(t > 5.0 / w0);
        assert!((st.z[2] - f).abs() / f.abs() < 0.05, "z3 {} vs f {}", st.z[2], f);
    }

    #[test]
    fn non_finite_measurement_rejected() {
        let mut st = LadrcState::new(400.0, 2800.0, 1.0).unwrap();
        assert!(matches!(st.leso_update(f64::NAN, 0.0, 1e-4), Err(ControlError::NonFinite { .. })));
        assert!(LadrcState::new(400.0, 2800.0, 0.0).is_err());
    }

    #[test]
    fn closed_loop_rejects_constant_disturbance() {
        // y'' = d + b u with d unknown to the controller, b = b0.
        let (b, d, r) = (40.0, -300.0, 2.0);
        let mut st = LadrcState::new(50.0, 300.0, b).unwrap();
        st.reset_to(0.0);
        let dt = 1.0 / 15000.0;
        let (mut y, mut v, mut u) = (0.0f64, 0.0f64, 0.0f64);
        let sub = 10;
        let h = dt / sub as f64;
        for _ in 0..(1.0 / dt) as usize {
            for _ in 0..sub {
                v += h * (d + b * u);
                y += h * v;
            }
            u = st.advance(y, r, u, dt).unwrap();
        }
        assert!((y - r).abs() < 1e-3, "y = {y}");
        assert!((st.z[2] - d).abs() < 1e-2, "z3 = {}", st.z[2]);
        assert!((u + d / b).abs() < 1e-3);
    }

    #[test]
    fn advance_rejects_non_finite_input() {
        let mut st = LadrcState::new(400.0, 2800.0, 1.0).unwrap();
        assert!(st.advance(1.0, f64::INFINITY, 0.0, 1e-4).is_err());
        assert!(st.advance(1.0, 0.0, f64::NAN, 1e-4).is_err());
    }

    #[test]
    fn zero_error_zero_duty() {
        let mut st = LadrcState::new(400.0, 2800.0, 2.0).unwrap();
        st.reset_to(7.0);
        assert_eq!(st.duty(7.0, DutyLimits::default()), 0.0);
    }

    #[test]
    fn adaptive_law_three_levels() {
        let p = params(0.0);
        assert_eq!(adaptive_bandwidth(8000.0, &p, Region::Below).0, 400.0);
        assert_eq!(adaptive_bandwidth(30.0, &p, Region::Above).0, 300.0);
        assert_eq!(adaptive_bandwidth(10.0, &p, Region::Above).0, 200.0);
    }

    #[test]
    fn hysteresis_holds_region() {
        let p = params(2.0);
        assert_eq!(adaptive_bandwidth(30.5, &p, Region::Below), (200.0, Region::Below));
        assert_eq!(adaptive_bandwidth(30.5, &p, Region::Above), (400.0, Region::Above));
        assert_eq!(adaptive_bandwidth(31.5, &p, Region::Below), (400.0, Region::Above));
    }

    #[test]
    fn refresh_gains_preserves_observer() {
        let mut st = LadrcState::new(400.0, 2800.0, 2.0).unwrap();
        st.z = [1.0, 2.0, 3.0];
        let before = st.clone();
        st.refresh_gains(400.0).unwrap();
        assert_eq!(st, before);
        st.refresh_gains(200.0).unwrap();
        assert_eq!((st.kp, st.kd), (40000.0, 400.0));
        assert_eq!(st.z, [1.0, 2.0, 3.0]);
        assert_eq!(st.beta, before.beta);
    }

    #[test]
    fn validation() {
        assert!(params(2.0).validate().unwrap().is_empty());
        let slow = LadrcParams { w0: 100.0, ..params(0.0) };
        assert!(slow.validate().is_err());
        let wide = LadrcParams { w0: 6000.0, ..params(0.0) };
        assert_eq!(wide.validate().unwrap().len(), 1);
        let ks = LadrcParams { k_s: 200.0, ..params(0.0) };
        assert!(ks.validate().is_err());
    }
}
