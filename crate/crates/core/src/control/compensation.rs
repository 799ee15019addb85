use serde::{Deserialize, Serialize};

use super::{ControlError, DutyLimits};

pub const DEFAULT_COMP_LIMIT: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompParams {
    pub k_w: f64,
    /// Reference current the deviation is normalized by (A).
    pub i_ref: f64,
    /// Symmetric bound on the compensation duty.
    pub limit: f64,
}

impl CompParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.i_ref > 0.0) {
            return Err(ControlError::InvalidConfig(format!(
                "compensation.i_ref = {} must be > 0",
                self.i_ref
            )));
        }
        if !(self.limit >= 0.0) || !self.k_w.is_finite() {
            return Err(ControlError::InvalidConfig(
                "compensation.limit must be >= 0 and k_w finite".into(),
            ));
        }
        Ok(())
    }
}

/// `D_c = clamp(k_w (i_ref - i_o) / i_ref, +-limit)`.
pub fn duty_compensation(i_o: f64, c: &CompParams) -> Result<f64, ControlError> {
    c.validate()?;
    Ok((c.k_w * (c.i_ref - i_o) / c.i_ref).clamp(-c.limit, c.limit))
}

/// `D = clamp(D_L + D_c, limits)`.
pub fn total_duty(d_l: f64, d_c: f64, limits: DutyLimits) -> f64 {
    limits.clamp(d_l + d_c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comp() -> CompParams {
        CompParams {
            k_w: 0.01,
            i_ref: 8000.0,
            limit: DEFAULT_COMP_LIMIT,
        }
    }

    #[test]
    fn substitution_examples() {
        assert_eq!(duty_compensation(8000.0, &comp()).unwrap(), 0.0);
        assert!((duty_compensation(7936.0, &comp()).unwrap() - 8.0e-5).abs() < 1e-15);
        assert!((duty_compensation(8128.0, &comp()).unwrap() + 1.6e-4).abs() < 1e-15);
    }

    #[test]
    fn limited() {
        let c = CompParams { k_w: 10.0, ..comp() };
        assert_eq!(duty_compensation(0.0, &c).unwrap(), 0.05);
        assert_eq!(duty_compensation(16000.0, &c).unwrap(), -0.05);
    }

    #[test]
    fn non_positive_reference_rejected() {
        let c = CompParams { i_ref: 0.0, ..comp() };
        assert!(duty_compensation(1.0, &c).is_err());
    }

    #[test]
    fn total_duty_clamps() {
        let lim = DutyLimits::default();
        assert_eq!(total_duty(0.4, 0.0, lim), 0.4);
        assert_eq!(total_duty(0.94, 0.03, lim), 0.95);
        let up = total_duty(0.5, duty_compensation(8100.0, &comp()).unwrap(), lim);
        assert!(up < 0.5);
    }
}
