//! Rational transfer functions and the closed forms of the LADRC loop.

use num_complex::Complex64;

use super::poly::Poly;
use super::AnalysisError;

/// Ratio of two real polynomials in `s` (ascending coefficients).
///
/// No pole-zero cancellation is ever attempted.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalTf {
    num: Poly,
    den: Poly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TfOp {
    Multiply,
    Add,
    /// Negative unity feedback around the first operand with the second in
    /// the return path: `a / (1 + a b)`.
    Feedback,
}

impl RationalTf {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self, AnalysisError> {
        Self::from_polys(Poly::new(num), Poly::new(den))
    }

    pub fn from_polys(num: Poly, den: Poly) -> Result<Self, AnalysisError> {
        if den.is_zero() {
            return Err(AnalysisError::ZeroDenominator);
        }
        Ok(Self { num, den })
    }

    pub fn gain(k: f64) -> Self {
        Self {
            num: Poly::constant(k),
            den: Poly::constant(1.0),
        }
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval_complex(s) / self.den.eval_complex(s)
    }

    /// Evaluate at `s = j 2 pi f`.
    pub fn at_hz(&self, f: f64) -> Complex64 {
        self.eval(Complex64::new(0.0, 2.0 * std::f64::consts::PI * f))
    }

    /// Value at `s = 0`; infinite when the denominator vanishes there.
    pub fn dc_gain(&self) -> f64 {
        self.num.eval(0.0) / self.den.eval(0.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            num: self.num.mul(&other.num),
            den: self.den.mul(&other.den),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            num: self
                .num
                .mul(&other.den)
                .add(&other.num.mul(&self.den)),
            den: self.den.mul(&other.den),
        }
    }

    /// `self / (1 + self * h)`.
    pub fn feedback(&self, h: &Self) -> Result<Self, AnalysisError> {
        let den = self
            .den
            .mul(&h.den)
            .add(&self.num.mul(&h.num));
        Self::from_polys(self.num.mul(&h.den), den)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        self.num.roots()
    }
}

pub fn tf_arithmetic(a: &RationalTf, b: &RationalTf, op: TfOp) -> Result<RationalTf, AnalysisError> {
    match op {
        TfOp::Multiply => Ok(a.mul(b)),
        TfOp::Add => Ok(a.add(b)),
        TfOp::Feedback => a.feedback(b),
    }
}

/// Gains of a bandwidth-parameterized second-order LADRC.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadrcGains {
    pub kp: f64,
    pub kd: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub b0: f64,
}

impl LadrcGains {
    /// `kp = wc^2`, `kd = 2 wc`, observer poles triple at `-w0`.
    pub fn from_bandwidths(wc: f64, w0: f64, b0: f64) -> Self {
        Self {
            kp: wc * wc,
            kd: 2.0 * wc,
            beta1: 3.0 * w0,
            beta2: 3.0 * w0 * w0,
            beta3: w0 * w0 * w0,
            b0,
        }
    }

    /// Numerator shared by the feedback controller and the prefilter
    /// denominator: `(kp b1 + kd b2 + b3) s^2 + (kp b2 + kd b3) s + kp b3`.
    fn shared_poly(&self) -> Poly {
        let g = self;
        Poly::new(vec![
            g.kp * g.beta3,
            g.kp * g.beta2 + g.kd * g.beta3,
            g.kp * g.beta1 + g.kd * g.beta2 + g.beta3,
        ])
    }

    /// Observer characteristic polynomial `s^3 + b1 s^2 + b2 s + b3`.
    pub fn observer_poly(&self) -> Poly {
        Poly::new(vec![self.beta3, self.beta2, self.beta1, 1.0])
    }
}

/// Equivalent feedback controller `G_c(s)` of the LESO plus PD law.
pub fn controller_tf(g: &LadrcGains) -> Result<RationalTf, AnalysisError> {
    if g.b0 == 0.0 {
        return Err(AnalysisError::InvalidArgument("b0 must be nonzero".into()));
    }
    let den = Poly::new(vec![
        0.0,
        g.kd * g.beta1 + g.kp + g.beta2,
        g.kd + g.beta1,
        1.0,
    ])
    .scale(g.b0);
    RationalTf::from_polys(g.shared_poly(), den)
}

/// Equivalent reference prefilter `G_F(s)`.
pub fn prefilter_tf(g: &LadrcGains) -> Result<RationalTf, AnalysisError> {
    RationalTf::from_polys(g.observer_poly().scale(g.kp), g.shared_poly())
}

/// Observer transfer matrix: rows `z1, z2, z3`, columns `(u, y)`.
pub fn leso_tf_matrix(g: &LadrcGains) -> Result<[[RationalTf; 2]; 3], AnalysisError> {
    let n = g.observer_poly();
    let tf = |num: Vec<f64>| RationalTf::from_polys(Poly::new(num), n.clone());
    let b0 = g.b0;
    Ok([
        [tf(vec![0.0, b0])?, tf(vec![g.beta3, g.beta2, g.beta1])?],
        [tf(vec![0.0, b0 * g.beta1, b0])?, tf(vec![0.0, g.beta3, g.beta2])?],
        [tf(vec![-b0 * g.beta3])?, tf(vec![0.0, 0.0, g.beta3])?],
    ])
}

/// `kp + ki / s`.
pub fn pi_tf(kp: f64, ki: f64) -> RationalTf {
    RationalTf {
        num: Poly::new(vec![ki, kp]),
        den: Poly::new(vec![0.0, 1.0]),
    }
}
