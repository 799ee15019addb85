use super::EngineError;

/// Classical fourth-order Runge-Kutta stepper with reusable scratch space.
#[derive(Clone, Debug)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advance `state` from `t` to `t + dt` in place.
    ///
    /// `derivs(t, x, dx)` writes the time derivative of `x` into `dx`.
    pub fn step<F>(&mut self, state: &mut [f64], t: f64, dt: f64, mut derivs: F) -> Result<(), EngineError>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = state.len();
        debug_assert_eq!(n, self.k1.len());
        let half = 0.5 * dt;

        derivs(t, state, &mut self.k1);
        check(&self.k1, t)?;
        for i in 0..n {
            self.tmp[i] = state[i] + half * self.k1[i];
        }
        derivs(t + half, &self.tmp, &mut self.k2);
        check(&self.k2, t + half)?;
        for i in 0..n {
            self.tmp[i] = state[i] + half * self.k2[i];
        }
        derivs(t + half, &self.tmp, &mut self.k3);
        check(&self.k3, t + half)?;
        for i in 0..n {
            self.tmp[i] = state[i] + dt * self.k3[i];
        }
        derivs(t + dt, &self.tmp, &mut self.k4);
        check(&self.k4, t + dt)?;
        for i in 0..n {
            state[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

fn check(k: &[f64], t: f64) -> Result<(), EngineError> {
    match k.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(EngineError::NonFiniteDerivative { index, t }),
        None => Ok(()),
    }
}

/// One RK4 step returning the updated state.
pub fn integrate_step<F>(state: &[f64], derivs: F, t: f64, dt: f64) -> Result<Vec<f64>, EngineError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut out = state.to_vec();
    Rk4::new(state.len()).step(&mut out, t, dt, derivs)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_step() {
        let x = integrate_step(&[1.0], |_, x, dx| dx[0] = -x[0], 0.0, 0.1).unwrap();
        assert!((x[0] - 0.9048375).abs() < 1e-7);
        assert!((x[0] - (-0.1f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn trivial_dynamics() {
        assert_eq!(integrate_step(&[0.0], |_, _, dx| dx[0] = 0.0, 0.0, 0.1).unwrap(), vec![0.0]);
        assert_eq!(integrate_step(&[0.0], |_, _, dx| dx[0] = 1.0, 0.0, 0.5).unwrap(), vec![0.5]);
    }

    #[test]
    fn exact_for_quartic_in_time() {
        // x' = 5 t^4 -> x = t^5 is not exact, but x' = 4 t^3 (x = t^4) is.
        let x = integrate_step(&[0.0], |t, _, dx| dx[0] = 4.0 * t.powi(3), 1.0, 0.5).unwrap();
        assert!((x[0] - (1.5f64.powi(4) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn non_finite_names_index() {
        let err = integrate_step(&[1.0, 2.0], |_, _, dx| {
            dx[0] = 0.0;
            dx[1] = f64::NAN;
        }, 0.0, 0.1)
        .unwrap_err();
        assert_eq!(err, EngineError::NonFiniteDerivative { index: 1, t: 0.0 });
    }
}
