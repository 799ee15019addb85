//! Frequency response, pole extraction and closed-loop stability.

use num_complex::Complex64;

use super::tf::RationalTf;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreqPoint {
    pub f: f64,
    pub magnitude_db: f64,
    /// Unwrapped along the requested frequency list.
    pub phase_deg: f64,
    /// Set when the point sits on a pole on the imaginary axis.
    pub singular: bool,
}

/// `n` logarithmically spaced frequencies from `f_min` to `f_max` inclusive.
pub fn logspace(f_min: f64, f_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![f_min],
        _ => {
            let (a, b) = (f_min.log10(), f_max.log10());
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

pub fn freq_response(tf: &RationalTf, f_list: &[f64]) -> Vec<FreqPoint> {
    let mut out = Vec::with_capacity(f_list.len());
    let mut prev_raw: Option<f64> = None;
    let mut offset = 0.0;
    for &f in f_list {
        let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * f);
        let den = tf.den().eval_complex(s);
        let num = tf.num().eval_complex(s);
        let h = num / den;
        if den.norm() == 0.0 || !h.re.is_finite() || !h.im.is_finite() {
            out.push(FreqPoint {
                f,
                magnitude_db: f64::INFINITY,
                phase_deg: f64::NAN,
                singular: true,
            });
            continue;
        }
        let raw = h.arg().to_degrees();
        if let Some(p) = prev_raw {
            let d = raw - p;
            if d > 180.0 {
                offset -= 360.0;
            } else if d < -180.0 {
                offset += 360.0;
            }
        }
        prev_raw = Some(raw);
        out.push(FreqPoint {
            f,
            magnitude_db: 20.0 * h.norm().log10(),
            phase_deg: raw + offset,
            singular: false,
        });
    }
    out
}

/// Poles sorted by real part.
pub fn poles(tf: &RationalTf) -> Vec<Complex64> {
    tf.poles()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    pub poles: Vec<Complex64>,
    /// `1 + L(s)` lost degree or vanished identically.
    pub degenerate: bool,
}

/// Closed-loop stability of unity negative feedback around `open_loop`.
///
/// The characteristic polynomial is the numerator of `1 + L(s)`, i.e.
/// `den + num`.
pub fn stability_check(open_loop: &RationalTf) -> StabilityReport {
    let den = open_loop.den();
    let char_poly = den.add(open_loop.num());
    let full_degree = den.degree().max(open_loop.num().degree());
    let degenerate = char_poly.is_zero() || char_poly.degree() != full_degree;
    let poles = char_poly.roots();
    let stable = !char_poly.is_zero() && poles.iter().all(|p| p.re < 0.0);
    StabilityReport {
        stable,
        poles,
        degenerate,
    }
}

/// Closed-loop poles of `k * L(s)` for each gain, with each trajectory
/// ordered to follow its nearest predecessor.
pub fn root_locus(open_loop: &RationalTf, gains: &[f64]) -> Vec<Vec<Complex64>> {
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(gains.len());
    for &k in gains {
        let mut p = stability_check(&open_loop.scale(k)).poles;
        if let Some(prev) = out.last() {
            if prev.len() == p.len() {
                p = pair_nearest(prev, p);
            }
        }
        out.push(p);
    }
    out
}

fn pair_nearest(prev: &[Complex64], mut next: Vec<Complex64>) -> Vec<Complex64> {
    let mut ordered = Vec::with_capacity(next.len());
    for a in prev {
        let (idx, _) = next
            .iter()
            .enumerate()
            .map(|(i, b)| (i, (a - b).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("same length");
        ordered.push(next.swap_remove(idx));
    }
    ordered
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_corner() {
        let tf = RationalTf::new(vec![1.0], vec![1.0, 1.0]).unwrap();
        let r = freq_response(&tf, &[1.0 / (2.0 * std::f64::consts::PI)]);
        assert!((r[0].magnitude_db + 3.0103).abs() < 1e-4);
        assert!((r[0].phase_deg + 45.0).abs() < 1e-9);
    }

    #[test]
    fn unity_is_flat() {
        for p in freq_response(&RationalTf::gain(1.0), &logspace(0.1, 1e4, 9)) {
            assert_eq!(p.magnitude_db, 0.0);
            assert_eq!(p.phase_deg, 0.0);
        }
    }

    #[test]
    fn pole_on_axis_is_flagged() {
        let tf = RationalTf::new(vec![1.0], vec![0.0, 1.0]).unwrap();
        let r = freq_response(&tf, &[0.0, 1.0]);
        assert!(r[0].singular);
        assert!(!r[1].singular);
    }

    #[test]
    fn phase_unwraps_past_180() {
        // triple pole at -1: phase heads to -270
        let tf = RationalTf::new(vec![1.0], vec![1.0, 3.0, 3.0, 1.0]).unwrap();
        let r = freq_response(&tf, &logspace(0.01, 100.0, 200));
        let last = r.last().unwrap().phase_deg;
        assert!((last + 270.0).abs() < 1.0, "{last}");
        for w in r.windows(2) {
            assert!((w[1].phase_deg - w[0].phase_deg).abs() < 20.0);
        }
    }

    #[test]
    fn static_minus_one_is_degenerate() {
        let rep = stability_check(&RationalTf::gain(-1.0));
        assert!(rep.degenerate);
        assert!(!rep.stable);
    }

    #[test]
    fn integrator_loop_stable() {
        let rep = stability_check(&RationalTf::new(vec![2.0], vec![0.0, 1.0]).unwrap());
        assert!(rep.stable);
        assert!((rep.poles[0].re + 2.0).abs() < 1e-12);
    }
}
