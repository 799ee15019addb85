use std::f64::consts::PI;

use ipop_core::analysis::{freq_response, LadrcGains, Poly, RationalTf};
use ipop_core::control::{adaptive_bandwidth, duty_compensation, total_duty, CompParams, DutyLimits, LadrcParams, Region};
use ipop_core::engine::{integrate_step, DelayLine};
use ipop_core::hdcsc::{build_schedule, interleave_cancellation_factor, share_reference, Topology};
use ipop_core::plant::{module_derivatives, rectified_voltage, GridParams, ModuleState, PlantParams};
use num_complex::Complex64;
use proptest::prelude::*;

fn params(wc0: f64, k_s: f64, i_c: f64, hysteresis: f64) -> LadrcParams {
    LadrcParams { wc0, w0: 7.0 * wc0, b0: 1.0, k_s, i_c, hysteresis }
}

proptest! {
    #[test]
    fn adaptive_law_monotone_with_three_levels(
        wc0 in 50.0f64..2000.0,
        frac in 0.0f64..0.49,
        i_c in 1.0f64..100.0,
        mut currents in prop::collection::vec(0.0f64..200.0, 1..60),
    ) {
        let p = params(wc0, frac * wc0, i_c, 0.0);
        currents.sort_by(f64::total_cmp);
        let levels = [p.wc0 - 2.0 * p.k_s, p.wc0 - p.k_s, p.wc0];
        let mut last = f64::NEG_INFINITY;
        for i_o in currents {
            let (wc, _) = adaptive_bandwidth(i_o, &p, Region::Above);
            prop_assert!(levels.contains(&wc));
            prop_assert!(wc >= last);
            prop_assert!(wc > 0.0);
            last = wc;
        }
    }

    #[test]
    fn hysteresis_holds_region_inside_band(i_c in 10.0f64..100.0, h in 0.5f64..5.0, x in -0.49f64..0.49) {
        let p = params(400.0, 100.0, i_c, h);
        let i_o = i_c + x * h;
        prop_assume!(i_o != i_c);
        for prev in [Region::Below, Region::Above] {
            let (_, region) = adaptive_bandwidth(i_o, &p, prev);
            prop_assert_eq!(region, prev);
        }
    }

    #[test]
    fn compensation_polarity_and_bound(
        i_ref in 1.0f64..20000.0,
        i_o in 0.0f64..30000.0,
        k_w in 0.0f64..0.5,
        limit in 0.0f64..0.2,
    ) {
        let c = CompParams { k_w, i_ref, limit };
        let d = duty_compensation(i_o, &c).unwrap();
        prop_assert!(d.abs() <= limit);
        if i_o < i_ref { prop_assert!(d >= 0.0); }
        if i_o > i_ref { prop_assert!(d <= 0.0); }
        let total = total_duty(0.5, d, DutyLimits::default());
        prop_assert!((0.0..=0.95).contains(&total));
    }

    #[test]
    fn leso_poles_at_minus_w0(w0 in 10.0f64..5e4) {
        let g = LadrcGains::from_bandwidths(w0 / 6.0, w0, 1.0);
        let roots = Poly::new(vec![g.beta3, g.beta2, g.beta1, 1.0]).roots();
        prop_assert_eq!(roots.len(), 3);
        for r in roots {
            prop_assert!((r + w0).norm() / w0 < 1e-6, "root {} for w0 {}", r, w0);
        }
    }

    #[test]
    fn evaluation_is_a_homomorphism(
        an in prop::collection::vec(-10.0f64..10.0, 1..4),
        ad in prop::collection::vec(0.5f64..10.0, 2..4),
        bn in prop::collection::vec(-10.0f64..10.0, 1..4),
        bd in prop::collection::vec(0.5f64..10.0, 2..4),
        f in 0.01f64..100.0,
    ) {
        let a = RationalTf::new(an, ad).unwrap();
        let b = RationalTf::new(bn, bd).unwrap();
        let s = Complex64::new(0.0, 2.0 * PI * f);
        let close = |x: Complex64, y: Complex64| (x - y).norm() <= 1e-9 * (1.0 + y.norm());
        prop_assert!(close(a.mul(&b).eval(s), a.eval(s) * b.eval(s)));
        prop_assert!(close(a.add(&b).eval(s), a.eval(s) + b.eval(s)));
        let fr = freq_response(&a, &[f]);
        let db = 20.0 * a.eval(s).norm().log10();
        prop_assume!(db.is_finite());
        prop_assert!((fr[0].magnitude_db - db).abs() <= 1e-9 * (1.0 + db.abs()));
    }

    #[test]
    fn rk4_is_fourth_order(lambda in -5.0f64..-0.2) {
        let err = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let mut y = vec![1.0];
            for k in 0..n {
                y = integrate_step(&y, |_, s, d| d[0] = lambda * s[0], k as f64 * h, h).unwrap();
            }
            (y[0] - lambda.exp()).abs()
        };
        let ratio = err(0.02) / err(0.01);
        prop_assert!(ratio >= 14.0, "ratio {}", ratio);
    }

    #[test]
    fn delay_lines_compose(a in 0usize..40, b in 0usize..40, xs in prop::collection::vec(-100.0f64..100.0, 1..200)) {
        let step = 1e-4;
        let mut la = DelayLine::new(a as f64 * step, step, 0.0);
        let mut lb = DelayLine::new(b as f64 * step, step, 0.0);
        let mut lab = DelayLine::new((a + b) as f64 * step, step, 0.0);
        for x in xs {
            prop_assert_eq!(lb.read_write(la.read_write(x)), lab.read_write(x));
        }
    }

    #[test]
    fn interleave_cancels_unless_harmonic_aligns(x in 1usize..6, y in 1usize..6, k in 1u32..40) {
        let f = interleave_cancellation_factor(x, y, k).unwrap();
        if k as usize % (x * y) == 0 {
            prop_assert!((f - 1.0).abs() < 1e-9);
        } else {
            prop_assert!(f < 1e-9, "factor {}", f);
        }
    }

    #[test]
    fn schedule_spans_one_ripple_period(x in 1usize..6, y in 1usize..6) {
        let s = build_schedule(Topology { x, y }, 50.0, 6).unwrap();
        let d = s.sorted_delays();
        prop_assert_eq!(d.len(), x * y);
        let spacing = s.t_m / (x * y) as f64;
        for (i, v) in d.iter().enumerate() {
            prop_assert!((v - i as f64 * spacing).abs() < 1e-12);
        }
    }

    #[test]
    fn share_reference_splits_evenly(total in 0.0f64..20000.0, mask in prop::collection::vec(any::<bool>(), 1..16)) {
        prop_assume!(mask.iter().any(|a| *a));
        let shares = share_reference(total, &mask).unwrap();
        let sum: f64 = shares.iter().sum();
        prop_assert!((sum - total).abs() <= 1e-9 * (1.0 + total));
        for (s, a) in shares.iter().zip(&mask) {
            if !a { prop_assert_eq!(*s, 0.0); }
        }
    }

    /// Stored plus dissipated energy equals delivered energy for the output
    /// stage with the DC link held.
    #[test]
    fn output_stage_energy_balance(d in 0.05f64..0.9, r_load in 0.005f64..1.0, r_d in 0.0f64..0.5) {
        let grid = GridParams::default();
        let u_i = grid.mean_rectified();
        let p = PlantParams { r_load, r_d, ..Default::default() };
        let dt = 2e-6;
        let mut x = vec![0.0, 0.0];
        let (mut delivered, mut dissipated) = (0.0, 0.0);
        let power = |s: &[f64]| (p.n * d * u_i * s[0], p.r_d * s[0] * s[0] + s[1] * s[1] / r_load);
        for k in 0..5000 {
            let t = k as f64 * dt;
            let (pin0, pd0) = power(&x);
            x = integrate_step(&x, |tt, s, dx| {
                let m = ModuleState { i_l1: 0.0, u_c1: u_i, i_l2: s[0] };
                let der = module_derivatives(&m, s[1], d, tt, &p, &grid).unwrap();
                dx[0] = der.di_l2;
                dx[1] = (s[0] - s[1] / r_load) / p.c2;
            }, t, dt).unwrap();
            let (pin1, pd1) = power(&x);
            delivered += 0.5 * dt * (pin0 + pin1);
            dissipated += 0.5 * dt * (pd0 + pd1);
        }
        let stored = 0.5 * p.l2 * x[0] * x[0] + 0.5 * p.c2 * x[1] * x[1];
        let scale = delivered.abs().max(1e-9);
        prop_assert!((delivered - dissipated - stored).abs() / scale < 1e-3,
            "delivered {} dissipated {} stored {}", delivered, dissipated, stored);
    }

    #[test]
    fn blocking_diode_keeps_input_current_non_negative(t in 0.0f64..0.02, excess in 1.0f64..200.0) {
        let grid = GridParams::default();
        let p = PlantParams::default();
        let u_c1 = rectified_voltage(t, &grid) + excess;
        let s = ModuleState { i_l1: 0.0, u_c1, i_l2: 100.0 };
        let der = module_derivatives(&s, 50.0, 0.3, t, &p, &grid).unwrap();
        prop_assert_eq!(der.di_l1, 0.0);
    }
}
