//! Real-coefficient polynomials in `s` with complex evaluation and a
//! companion-matrix root finder.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Polynomial with coefficients stored in ascending powers of `s`.
///
/// Trailing (highest-power) zero coefficients are trimmed on construction, so
/// the zero polynomial has an empty coefficient list.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// Monic polynomial with the given real roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        roots
            .iter()
            .fold(Self::constant(1.0), |acc, &r| acc.mul(&Self::new(vec![-r, 1.0])))
    }

    /// Monic real polynomial whose roots are the given complex values plus
    /// their conjugates for every entry with nonzero imaginary part.
    pub fn from_complex_roots(roots: &[Complex64]) -> Self {
        roots.iter().fold(Self::constant(1.0), |acc, r| {
            if r.im == 0.0 {
                acc.mul(&Self::new(vec![-r.re, 1.0]))
            } else {
                acc.mul(&Self::new(vec![r.norm_sqr(), -2.0 * r.re, 1.0]))
            }
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// Running-error bound for Horner evaluation at `s`.
    fn eval_error_bound(&self, s: Complex64) -> f64 {
        let r = s.norm();
        let mag = self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs());
        4.0 * (self.coeffs.len() as f64) * f64::EPSILON * mag
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n)
                .map(|i| {
                    self.coeffs.get(i).copied().unwrap_or(0.0)
                        + other.coeffs.get(i).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::default();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// All complex roots, sorted by real part then imaginary part.
    ///
    /// Roots are the eigenvalues of the balanced companion matrix, refined by
    /// Newton iteration. Clusters that behave like a multiple root are
    /// re-solved on the appropriate derivative, which recovers the root to
    /// working precision instead of the `eps^(1/m)` spread the eigenvalue
    /// route alone gives.
    pub fn roots(&self) -> Vec<Complex64> {
        let Some(deg) = self.degree() else {
            return Vec::new();
        };
        // exact zero roots
        let zeros = self.coeffs.iter().take_while(|&&c| c == 0.0).count();
        let reduced = Self::new(self.coeffs[zeros..].to_vec());
        let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
        let n = deg - zeros;
        if n == 0 {
            return roots;
        }
        if n == 1 {
            roots.push(Complex64::new(-reduced.coeffs[0] / reduced.coeffs[1], 0.0));
            sort_roots(&mut roots);
            return roots;
        }

        let lead = reduced.leading();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            m[(i, n - 1)] = -reduced.coeffs[i] / lead;
        }
        balance(&mut m);
        let mut found: Vec<Complex64> = m.complex_eigenvalues().iter().copied().collect();

        reduced.polish(&mut found);
        roots.extend(found);
        sort_roots(&mut roots);
        roots
    }

    fn polish(&self, roots: &mut [Complex64]) {
        let dp = self.derivative();
        for r in roots.iter_mut() {
            *r = newton(self, &dp, *r, 8);
        }

        // cluster pass
        let n = roots.len();
        let mut assigned = vec![false; n];
        for i in 0..n {
            if assigned[i] {
                continue;
            }
            let scale = roots[i].norm().max(1.0);
            let members: Vec<usize> = (i..n)
                .filter(|&j| !assigned[j] && (roots[j] - roots[i]).norm() <= 1e-3 * scale)
                .collect();
            if members.len() < 2 {
                continue;
            }
            let mult = members.len();
            let mean = members.iter().map(|&j| roots[j]).sum::<Complex64>() / mult as f64;
            let mut d = self.clone();
            for _ in 0..mult - 1 {
                d = d.derivative();
            }
            let dd = d.derivative();
            let candidate = newton(&d, &dd, mean, 20);
            let worst = members
                .iter()
                .map(|&j| self.eval_complex(roots[j]).norm())
                .fold(0.0, f64::max);
            let at_candidate = self.eval_complex(candidate).norm();
            let tol = worst.max(16.0 * self.eval_error_bound(candidate));
            if candidate.re.is_finite() && candidate.im.is_finite() && at_candidate <= tol {
                let candidate = if mean.im.abs() <= 1e-9 * scale {
                    Complex64::new(candidate.re, 0.0)
                } else {
                    candidate
                };
                for &j in &members {
                    roots[j] = candidate;
                    assigned[j] = true;
                }
            }
        }
    }
}

fn newton(p: &Poly, dp: &Poly, start: Complex64, iters: usize) -> Complex64 {
    let mut r = start;
    let mut best = p.eval_complex(r).norm();
    for _ in 0..iters {
        let d = dp.eval_complex(r);
        if d.norm() == 0.0 {
            break;
        }
        let next = r - p.eval_complex(r) / d;
        let val = p.eval_complex(next).norm();
        if !(val < best) {
            break;
        }
        best = val;
        r = next;
    }
    r
}

fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Parlett-Reinsch diagonal similarity balancing (radix 2) in place.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / 2.0;
            while c < g {
                f *= 2.0;
                c *= 4.0;
            }
            g = r * 2.0;
            while c > g {
                f /= 2.0;
                c /= 4.0;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_and_degree() {
        let p = Poly::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), Some(1));
        assert!(Poly::new(vec![0.0]).is_zero());
        assert_eq!(Poly::new(vec![]).degree(), None);
    }

    #[test]
    fn quadratic_roots() {
        let r = Poly::new(vec![2.0, 3.0, 1.0]).roots();
        assert!((r[0].re + 2.0).abs() < 1e-12);
        assert!((r[1].re + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_roots_split_off() {
        let r = Poly::new(vec![0.0, 0.0, 1.0, 1.0]).roots();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0], Complex64::new(-1.0, 0.0));
        assert_eq!(r[1], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn triple_root_recovered() {
        let w = 2800.0;
        let p = Poly::from_roots(&[-w, -w, -w]);
        for r in p.roots() {
            assert!((r.re + w).abs() / w < 1e-9, "{r}");
            assert!(r.im.abs() / w < 1e-9, "{r}");
        }
    }

    #[test]
    fn close_distinct_roots_not_merged() {
        let p = Poly::from_roots(&[-1.0, -1.0001]);
        let r = p.roots();
        assert!((r[0].re + 1.0001).abs() < 1e-9);
        assert!((r[1].re + 1.0).abs() < 1e-9);
    }

    #[test]
    fn complex_pair() {
        let r = Poly::new(vec![5.0, 2.0, 1.0]).roots();
        assert!((r[0] - Complex64::new(-1.0, -2.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(-1.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn derivative_and_mul() {
        let p = Poly::new(vec![1.0, 1.0]).mul(&Poly::new(vec![-1.0, 1.0]));
        assert_eq!(p.coeffs(), &[-1.0, 0.0, 1.0]);
        assert_eq!(p.derivative().coeffs(), &[0.0, 2.0]);
    }
}
