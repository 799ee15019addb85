//! Browser bindings: loop Bode data, delayed rectifier ripple, and a short
//! closed-loop start-up. Every export returns a flat `Float64Array` of
//! fixed-width rows.

use ipop_core::analysis::{freq_response, ladrc_open_loop, logspace, pi_tf, LadrcGains};
use ipop_core::control::{DEFAULT_KI, DEFAULT_KP};
use ipop_core::engine::run_simulation;
use ipop_core::hdcsc::{build_schedule, interleave_cancellation_factor, Topology};
use ipop_core::plant::{g_iod, rectified_voltage, GridParams, PlantParams};
use ipop_core::Scenario;
use wasm_bindgen::prelude::*;

/// Upper bound on rows returned by [`startup`].
pub const MAX_POINTS: usize = 2000;

/// Columns: `f, ladrc_db, ladrc_deg, pi_db, pi_deg`.
pub fn loop_bode(wc0: f64, w0: f64, kp: f64, ki: f64, f_min: f64, f_max: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(f_min > 0.0 && f_max > f_min) || n < 2 {
        return Err(format!("need 0 < f_min < f_max and n >= 2 (got {f_min}, {f_max}, {n})"));
    }
    if !(wc0 > 0.0 && w0 > 0.0) {
        return Err("bandwidths must be positive".into());
    }
    let u = GridParams::default().mean_rectified();
    // Per-module share of the 3.5 mOhm heavy load.
    let p = PlantParams { r_load: 12.0 * 0.0035, ..Default::default() };
    let gp = g_iod(&p, u);
    let b0 = p.n * u / (p.l2 * p.c2 * p.r_load);
    let ladrc = ladrc_open_loop(&LadrcGains::from_bandwidths(wc0, w0, b0), &gp).map_err(|e| e.to_string())?;
    let pi = pi_tf(kp, ki).mul(&gp);
    let f = logspace(f_min, f_max, n);
    let a = freq_response(&ladrc, &f);
    let b = freq_response(&pi, &f);
    Ok(a.iter()
        .zip(&b)
        .flat_map(|(a, b)| [a.f, a.magnitude_db, a.phase_deg, b.magnitude_db, b.phase_deg])
        .collect())
}

/// Columns: `t, single, interleaved`, both voltages divided by the mean
/// rectified voltage, over two ripple periods.
pub fn ripple_envelope(x: usize, y: usize, samples: usize) -> Result<Vec<f64>, String> {
    if samples < 2 {
        return Err("need at least two samples".into());
    }
    let grid = GridParams::default();
    let s = build_schedule(Topology { x, y }, grid.f_grid, grid.pulses).map_err(|e| e.to_string())?;
    let mean = grid.mean_rectified();
    let span = 2.0 * s.t_m;
    let n = s.module_delays.len() as f64;
    Ok((0..samples)
        .flat_map(|i| {
            let t = span * i as f64 / (samples - 1) as f64;
            let single = rectified_voltage(t, &grid) / mean;
            let avg = s.module_delays.iter().map(|d| rectified_voltage(t - d, &grid)).sum::<f64>() / (n * mean);
            [t, single, avg]
        })
        .collect())
}

/// Residual amplitude of ripple harmonics `1..=k_max` after interleaving.
pub fn interleave_factors(x: usize, y: usize, k_max: u32) -> Result<Vec<f64>, String> {
    (1..=k_max)
        .map(|k| interleave_cancellation_factor(x, y, k).map_err(|e| e.to_string()))
        .collect()
}

/// Columns: `t, i_o, ref` for a current-mode start-up of the twelve-module
/// supply.
pub fn startup(kind: &str, reference: f64, t_end: f64, hdcsc: bool) -> Result<Vec<f64>, String> {
    if !matches!(kind, "pi" | "ladrc" | "aladrc") {
        return Err(format!("unknown controller {kind}"));
    }
    if !(t_end > 0.0 && t_end <= 0.5) {
        return Err("t_end must be in (0, 0.5] s".into());
    }
    let text = format!(
        "name = \"web\"\nseed = 1\n\n[controller]\nkind = \"{kind}\"\n\n[reference]\nvalue = {reference:?}\n\n\
         [hdcsc]\nenabled = {hdcsc}\n\n[clock]\nt_end = {t_end:?}\n"
    );
    let s = Scenario::parse(&text).map_err(|e| e.to_string())?;
    let o = run_simulation(&s).map_err(|e| e.to_string())?;
    let (io, r) = (o.trace("i_o").ok_or("i_o missing")?, o.trace("ref").ok_or("ref missing")?);
    let stride = io.len().div_ceil(MAX_POINTS).max(1);
    Ok((0..io.len())
        .step_by(stride)
        .flat_map(|i| [io.time(i), io.samples[i], r.samples[i]])
        .collect())
}

#[wasm_bindgen(js_name = loopBode)]
pub fn loop_bode_js(wc0: f64, w0: f64, f_min: f64, f_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    loop_bode(wc0, w0, DEFAULT_KP, DEFAULT_KI, f_min, f_max, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = rippleEnvelope)]
pub fn ripple_envelope_js(x: usize, y: usize, samples: usize) -> Result<Vec<f64>, JsError> {
    ripple_envelope(x, y, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = interleaveFactors)]
pub fn interleave_factors_js(x: usize, y: usize, k_max: u32) -> Result<Vec<f64>, JsError> {
    interleave_factors(x, y, k_max).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = startup)]
pub fn startup_js(kind: &str, reference: f64, t_end: f64, hdcsc: bool) -> Result<Vec<f64>, JsError> {
    startup(kind, reference, t_end, hdcsc).map_err(|e| JsError::new(&e))
}
