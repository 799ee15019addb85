use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DelayLine, EngineError, Rk4, SimClock, Trace};
use crate::analysis::{ripple_pp, sag_metrics, settling_time, tone_amplitude, Metrics};
use crate::control::{duty_compensation, total_duty, Controller};
use crate::hdcsc::{build_schedule, share_reference};
use crate::plant::{effective_duty, module_rates, rectified_voltage, DutyDiagnostic, ModuleState, PlantParams};
use crate::scenario::{ControlMode, ControllerKind, Scenario};

/// Traces and run metadata of one simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    /// `i_o`, `u_o`, `ref`, `wc`, then per module `u_rect_k`, `u_i_k`,
    /// `D_k`, `i_o_k` (k from 1).
    pub traces: Vec<Trace>,
    /// Ordered key/value facts about the run (steps, delays, defaults).
    pub metadata: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

/// Scalar results of a run on its regulated output.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    /// Name of the trace the metrics were taken from.
    pub primary: String,
    /// Final reference of the regulated output.
    pub reference: f64,
    pub metrics: Metrics,
    /// Sag depth relative to the pre-event level (0 without load events).
    pub sag_fraction: f64,
    /// Mean of the regulated output over the ripple window.
    pub mean: f64,
}

impl SimOutput {
    pub fn trace(&self, name: &str) -> Option<&Trace> {
        self.traces.iter().find(|t| t.name == name)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Settling time, ripple, sag and ripple tone of the regulated output.
    pub fn metrics(&self, s: &Scenario) -> Result<RunMetrics, EngineError> {
        let name = match s.controller.mode {
            ControlMode::Current => "i_o",
            ControlMode::Voltage => "u_o",
        };
        let trace = self
            .trace(name)
            .ok_or_else(|| EngineError::InvalidConfig(format!("trace {name} missing")))?;
        let reference = s.reference_at(s.clock.t_end);
        let o = &s.outputs;

        let t_ref = s.last_reference_change();
        let t_stop = s
            .load
            .iter()
            .map(|e| e.t)
            .filter(|t| *t > t_ref)
            .fold(f64::INFINITY, f64::min);
        let i0 = index_at(trace, t_ref);
        let i1 = if t_stop.is_finite() {
            index_at(trace, t_stop).max(i0 + 1)
        } else {
            trace.len()
        };
        let settle_window = Trace::new(name, trace.time(i0), trace.dt, trace.samples[i0..i1].to_vec());
        let settling = settling_time(&settle_window, s.reference_at(trace.time(i0)), o.settling_band)? - trace.time(i0);

        let tail = trace.tail_trace(s.ripple_window())?;
        let ripple = ripple_pp(trace, s.ripple_window())?;
        let tone_freq = s.grid.pulses as f64 * s.grid.f_grid;
        let tone = tone_amplitude(&tail, tone_freq)?;
        let mean = tail.samples.iter().sum::<f64>() / tail.len() as f64;

        let (mut sag_depth, mut sag_duration, mut sag_fraction) = (0.0, 0.0, 0.0);
        if let Some(first) = s.load.iter().map(|e| e.t).reduce(f64::min) {
            let period = s.grid.ripple_period();
            let a = index_at(trace, (first - period).max(trace.t0));
            let b = index_at(trace, first).max(a + 1);
            let pre = trace.samples[a..b].iter().sum::<f64>() / (b - a) as f64;
            let (depth, duration) = sag_metrics(trace, first, pre, o.sag_band)?;
            sag_depth = depth;
            sag_duration = duration;
            sag_fraction = if pre != 0.0 { depth / pre.abs() } else { 0.0 };
        }

        Ok(RunMetrics {
            primary: name.to_string(),
            reference,
            metrics: Metrics {
                settling_time: settling,
                ripple_pp: ripple,
                sag_depth,
                sag_duration,
                tone_amp: tone,
                tone_freq,
            },
            sag_fraction,
            mean,
        })
    }
}

fn index_at(trace: &Trace, t: f64) -> usize {
    (((t - trace.t0) / trace.dt - 1e-9).ceil().max(0.0) as usize).min(trace.len().saturating_sub(1))
}

/// Run the closed loop of a validated scenario.
///
/// One central controller runs at the control period with zero-order hold;
/// each module receives its command through its own delay line (all zero
/// without delay sharing). The plant is integrated by RK4 in between.
/// Identical scenarios give bit-identical traces.
pub fn run_simulation(s: &Scenario) -> Result<SimOutput, EngineError> {
    let grid = s.grid;
    let base = s.plant_params().map_err(|(k, m)| EngineError::InvalidConfig(format!("plant.{k}: {m}")))?;
    let topo = s.topology();
    let n = topo.modules();
    let mut active = s.active_mask();
    if active.len() != n {
        return Err(EngineError::InvalidConfig("active mask length differs from module count".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let tol = s.topology.mismatch_pct / 100.0;
    let params: Vec<PlantParams> = (0..n)
        .map(|_| {
            let a: f64 = rng.gen_range(-1.0..=1.0);
            let b: f64 = rng.gen_range(-1.0..=1.0);
            PlantParams {
                l2: base.l2 * (1.0 + tol * a),
                c2: base.c2 * (1.0 + tol * b),
                ..base
            }
        })
        .collect();

    let clock = SimClock::new(s.clock.dt_plant, s.dt_ctrl(), s.clock.t_end)?;
    let dt = clock.dt_ctrl;
    let delays: Vec<f64> = if s.hdcsc.enabled {
        build_schedule(topo, grid.f_grid, grid.pulses)
            .map_err(|e| EngineError::InvalidConfig(e.to_string()))?
            .module_delays
    } else {
        vec![0.0; n]
    };
    let mut lines: Vec<DelayLine> = delays.iter().map(|d| DelayLine::new(*d, dt, 0.0)).collect();
    let mut ctrl_lines = lines.clone();

    let limits = s.duty_limits();
    let ladrc = s.ladrc_params();
    let mut ctrl = match s.controller.kind {
        ControllerKind::Pi => Ok(Controller::pi(s.pi_params(), limits)),
        ControllerKind::Ladrc => Controller::ladrc(&ladrc, limits, false),
        ControllerKind::Aladrc => Controller::ladrc(&ladrc, limits, true),
    }
    .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
    let comp = s.comp_params();

    // state: [i_l1, u_c1, i_l2] per module, then u_bus
    let dim = 3 * n + 1;
    let mut x = vec![0.0; dim];
    for j in 0..n {
        x[3 * j + 1] = grid.mean_rectified();
    }
    ctrl.initialize(0.0, 0.0);
    let mut r_load = base.r_load;
    let mut load_events = s.load.clone();
    load_events.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut module_events = s.modules.clone();
    module_events.sort_by(|a, b| a.t.total_cmp(&b.t));
    let (mut next_load, mut next_module) = (0, 0);

    let ticks = clock.ticks();
    let cap = ticks + 1;
    let mut rec: Vec<Vec<f64>> = (0..4 + 4 * n).map(|_| Vec::with_capacity(cap)).collect();
    let mut applied = vec![0.0; n];
    let mut applied_ctrl = vec![0.0; n];
    let mut rk = Rk4::new(dim);
    let bound = s.clock.state_bound;
    let mut link_warnings = 0usize;
    let mut warnings = Vec::new();
    if matches!(s.controller.kind, ControllerKind::Ladrc | ControllerKind::Aladrc) {
        if let Ok(w) = ladrc.validate() {
            warnings.extend(w);
        }
    }

    for k in 0..=ticks {
        let t = clock.tick_time(k);
        while next_load < load_events.len() && load_events[next_load].t <= t + 1e-12 {
            r_load = load_events[next_load].r;
            next_load += 1;
        }
        while next_module < module_events.len() && module_events[next_module].t <= t + 1e-12 {
            let ev = module_events[next_module];
            if active[ev.module] && !ev.active {
                x[3 * ev.module + 2] = 0.0;
            }
            active[ev.module] = ev.active;
            next_module += 1;
        }
        if !active.iter().any(|a| *a) {
            return Err(EngineError::InvalidConfig(format!("no active modules at t = {t}")));
        }

        let u_bus = x[3 * n];
        let i_total = u_bus / r_load;
        let n_active = active.iter().filter(|a| **a).count();
        let r_total = s.reference_at(t);
        let shares = share_reference(r_total, &active).map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        let d_c = match &comp {
            Some(c) => duty_compensation(i_total, c).map_err(|e| EngineError::Control { t, source: e })?,
            None => 0.0,
        };
        let (y, r) = match s.controller.mode {
            ControlMode::Current => {
                let first = active.iter().position(|a| *a).unwrap_or(0);
                (i_total / n_active as f64, shares[first])
            }
            ControlMode::Voltage => (u_bus, r_total),
        };
        // The observer input is the controller's own share of the delayed
        // commands, averaged over active modules. The compensation term is
        // left for the observer to absorb as disturbance.
        let u_mean = applied_ctrl
            .iter()
            .zip(&active)
            .filter(|(_, a)| **a)
            .map(|(d, _)| d)
            .sum::<f64>()
            / n_active as f64;
        let d_l = ctrl
            .update(y, r, u_mean, i_total, dt)
            .map_err(|e| EngineError::Control { t, source: e })?;
        let cmd = total_duty(d_l, d_c, limits);
        for j in 0..n {
            let c = if active[j] { cmd } else { 0.0 };
            applied[j] = lines[j].read_write(c);
            applied_ctrl[j] = ctrl_lines[j].read_write(if active[j] { cmd - d_c } else { 0.0 });
        }

        let u_rect = rectified_voltage(t, &grid);
        rec[0].push(i_total);
        rec[1].push(u_bus);
        rec[2].push(r_total);
        rec[3].push(ctrl.bandwidth().unwrap_or(0.0));
        for j in 0..n {
            let b = 4 + 4 * j;
            rec[b].push(u_rect);
            rec[b + 1].push(x[3 * j + 1]);
            rec[b + 2].push(applied[j]);
            rec[b + 3].push(x[3 * j + 2]);
        }
        if k == ticks {
            break;
        }

        let c_bus: f64 = params.iter().zip(&active).filter(|(_, a)| **a).map(|(p, _)| p.c2).sum();
        for sub in 0..clock.substeps {
            let ts = t + sub as f64 * clock.dt_plant;
            rk.step(&mut x, ts, clock.dt_plant, |tt, st, dx| {
                let u_rect = rectified_voltage(tt, &grid);
                let u_bus = st[3 * n];
                let mut sum = 0.0;
                for j in 0..n {
                    let o = 3 * j;
                    if !active[j] {
                        dx[o] = 0.0;
                        dx[o + 1] = 0.0;
                        dx[o + 2] = 0.0;
                        continue;
                    }
                    let ms = ModuleState {
                        i_l1: st[o],
                        u_c1: st[o + 1],
                        i_l2: st[o + 2],
                    };
                    let d_eff = effective_duty(applied[j], ms.i_l2, ms.u_c1, &params[j]).0;
                    let r = module_rates(&ms, u_bus, d_eff, u_rect, &params[j]);
                    dx[o] = r.di_l1;
                    dx[o + 1] = r.du_c1;
                    dx[o + 2] = r.di_l2;
                    sum += ms.i_l2;
                }
                dx[3 * n] = (sum - u_bus / r_load) / c_bus;
            })?;
            for j in 0..n {
                if x[3 * j] < 0.0 {
                    x[3 * j] = 0.0;
                }
            }
            if let Some((index, value)) = x.iter().enumerate().find(|(_, v)| v.abs() > bound) {
                return Err(EngineError::BlowUp {
                    t: ts + clock.dt_plant,
                    index,
                    value: *value,
                    bound,
                    diagnostics: format!("duties {:?}; controller {:?}", applied, ctrl),
                });
            }
        }
        for j in 0..n {
            if params[j].duty_loss && effective_duty(applied[j], x[3 * j + 2], x[3 * j + 1], &params[j]).1 == DutyDiagnostic::NonPositiveLink {
                link_warnings += 1;
            }
        }
    }
    if link_warnings > 0 {
        warnings.push(format!("non-positive DC link seen in {link_warnings} module-periods"));
    }

    let mut names: Vec<String> = vec!["i_o".into(), "u_o".into(), "ref".into(), "wc".into()];
    for j in 1..=n {
        names.push(format!("u_rect_{j}"));
        names.push(format!("u_i_{j}"));
        names.push(format!("D_{j}"));
        names.push(format!("i_o_{j}"));
    }
    let traces = names
        .into_iter()
        .zip(rec)
        .map(|(name, samples)| Trace::new(name, 0.0, dt, samples))
        .collect();

    let mut metadata = vec![
        ("scenario".to_string(), s.name.clone()),
        ("controller".to_string(), s.controller.kind.as_str().to_string()),
        (
            "mode".to_string(),
            match s.controller.mode {
                ControlMode::Current => "current",
                ControlMode::Voltage => "voltage",
            }
            .to_string(),
        ),
        ("modules".to_string(), n.to_string()),
        ("dt_ctrl".to_string(), format!("{dt:e}")),
        ("dt_plant".to_string(), format!("{:e}", clock.dt_plant)),
        ("substeps".to_string(), clock.substeps.to_string()),
        ("hdcsc".to_string(), s.hdcsc.enabled.to_string()),
        ("compensation".to_string(), comp.is_some().to_string()),
        ("events_aligned_to".to_string(), "control period".to_string()),
        ("seed".to_string(), s.seed.to_string()),
    ];
    for (j, line) in lines.iter().enumerate() {
        metadata.push((
            format!("delay_{}", j + 1),
            format!(
                "{:.6e} s requested, {} steps = {:.6e} s",
                line.requested_delay(),
                line.steps(),
                line.delay()
            ),
        ));
    }
    for (j, p) in params.iter().enumerate() {
        metadata.push((format!("l2_{}", j + 1), format!("{:.6e}", p.l2)));
        metadata.push((format!("c2_{}", j + 1), format!("{:.6e}", p.c2)));
    }
    if s.controller.kind == ControllerKind::Aladrc {
        metadata.push(("hysteresis".to_string(), format!("{} A around i_c", s.controller.hysteresis)));
    }
    for d in s.applied_defaults() {
        metadata.push((format!("default.{}", d.key), format!("{} ({})", d.value, d.note)));
    }

    Ok(SimOutput {
        traces,
        metadata,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(body: &str) -> Scenario {
        Scenario::parse(body).unwrap()
    }

    const BASE: &str = "\
[controller]
kind = \"pi\"
[reference]
value = 0.0
[clock]
t_end = 0.02
[topology]
mismatch_pct = 0.0
";

    #[test]
    fn zero_duty_bus_stays_dead() {
        let out = run_simulation(&scenario(BASE)).unwrap();
        let u_o = out.trace("u_o").unwrap();
        assert_eq!(u_o.len(), 301);
        assert!(u_o.samples.iter().all(|v| v.abs() < 1e-9));
        assert_eq!(out.traces.len(), 4 + 48);
    }

    #[test]
    fn deterministic() {
        let text = BASE.replace("value = 0.0", "value = 2000.0").replace("mismatch_pct = 0.0", "mismatch_pct = 1.0");
        let a = run_simulation(&scenario(&text)).unwrap();
        let b = run_simulation(&scenario(&text)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hdcsc_delays_in_metadata() {
        let text = format!("{BASE}[hdcsc]\nenabled = true\n");
        let out = run_simulation(&scenario(&text)).unwrap();
        assert!(out.meta("delay_2").unwrap().contains("17 steps"));
        assert!(out.meta("delay_1").unwrap().contains(" 0 steps"));
    }
}
