use ipop_core::engine::{run_simulation, EngineError, SimOutput};
use ipop_core::scenario::Scenario;

fn scenario(text: &str) -> Scenario {
    Scenario::parse(text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

fn run(text: &str) -> (Scenario, SimOutput) {
    let s = scenario(text);
    let o = run_simulation(&s).unwrap();
    (s, o)
}

fn tail_mean(o: &SimOutput, name: &str, window: f64) -> f64 {
    let t = o.trace(name).unwrap();
    let xs = t.tail(window).unwrap();
    xs.iter().sum::<f64>() / xs.len() as f64
}

const CURRENT: &str = r#"
name = "current"
seed = 4

[controller]
kind = "aladrc"

[reference]
value = 8000.0

[clock]
t_end = 0.4
"#;

#[test]
fn identical_scenarios_give_identical_traces() {
    let s = scenario(CURRENT);
    let a = run_simulation(&s).unwrap();
    let b = run_simulation(&s).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seed_changes_module_mismatch() {
    let a = run_simulation(&scenario(CURRENT)).unwrap();
    let b = run_simulation(&scenario(&CURRENT.replace("seed = 4", "seed = 5"))).unwrap();
    assert_ne!(a.trace("i_o_1").unwrap().samples, b.trace("i_o_1").unwrap().samples);
}

#[test]
fn current_mode_tracks_reference() {
    let (_, o) = run(CURRENT);
    let mean = tail_mean(&o, "i_o", 0.1);
    assert!((mean - 8000.0).abs() / 8000.0 < 0.01, "mean {mean}");
}

#[test]
fn module_currents_carry_the_load_on_average() {
    let (s, o) = run(CURRENT);
    let n = s.topology.x * s.topology.y;
    let sum: f64 = (1..=n).map(|k| tail_mean(&o, &format!("i_o_{k}"), 0.1)).sum();
    let load = tail_mean(&o, "i_o", 0.1);
    assert!((sum - load).abs() / load < 1e-3, "modules {sum} load {load}");
}

#[test]
fn identical_modules_share_equally() {
    let text = CURRENT.replace("[controller]", "[topology]\nmismatch_pct = 0.0\n\n[controller]");
    let (_, o) = run(&text);
    let first = tail_mean(&o, "i_o_1", 0.1);
    for k in 2..=12 {
        let m = tail_mean(&o, &format!("i_o_{k}"), 0.1);
        assert!((m - first).abs() / first < 1e-6, "module {k}: {m} vs {first}");
    }
    assert!((first - 8000.0 / 12.0).abs() < 8000.0 / 12.0 * 0.01);
}

#[test]
fn dropped_module_load_moves_to_the_rest() {
    let text = CURRENT.replace("t_end = 0.4", "t_end = 0.8")
        + "\n[[modules]]\nt = 0.4\nmodule = 11\nactive = false\n";
    let (_, o) = run(&text);
    let total = tail_mean(&o, "i_o", 0.1);
    assert!((total - 8000.0).abs() / 8000.0 < 0.01, "total {total}");
    let dropped = tail_mean(&o, "i_o_12", 0.1);
    assert!(dropped.abs() < 1.0, "dropped module carries {dropped}");
    let rest: Vec<f64> = (1..=11).map(|k| tail_mean(&o, &format!("i_o_{k}"), 0.1)).collect();
    let mean = rest.iter().sum::<f64>() / 11.0;
    assert!((mean - 8000.0 / 11.0).abs() < 8000.0 / 11.0 * 0.01, "mean {mean}");
}

#[test]
fn voltage_mode_regulates_output() {
    let text = r#"
name = "voltage"
seed = 8

[plant]
r_load = 0.0035

[controller]
kind = "ladrc"
mode = "voltage"

[reference]
value = 24.0

[clock]
t_end = 0.4
"#;
    let (s, o) = run(text);
    let m = o.metrics(&s).unwrap();
    assert_eq!(m.primary, "u_o");
    assert!((m.mean - 24.0).abs() / 24.0 < 0.01, "mean {}", m.mean);
}

#[test]
fn zero_reference_keeps_output_at_rest() {
    let text = CURRENT.replace("value = 8000.0", "value = 0.0").replace("t_end = 0.4", "t_end = 0.05");
    let (_, o) = run(&text);
    let peak = o.trace("i_o").unwrap().samples.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    assert!(peak < 1.0, "peak {peak}");
}

#[test]
fn tight_state_bound_aborts() {
    let text = CURRENT.replace("t_end = 0.4", "t_end = 0.1\nstate_bound = 10.0");
    let err = run_simulation(&scenario(&text)).unwrap_err();
    assert!(matches!(err, EngineError::BlowUp { .. }), "{err}");
}

#[test]
fn traces_are_uniform_and_aligned() {
    let (s, o) = run(CURRENT);
    let first = &o.traces[0];
    assert_eq!(first.name, "i_o");
    for t in &o.traces {
        assert_eq!(t.len(), first.len(), "{}", t.name);
        assert_eq!(t.dt, first.dt);
        assert_eq!(t.t0, 0.0);
    }
    assert!((first.end_time() - s.clock.t_end).abs() <= first.dt);
}

#[test]
fn metadata_is_recorded() {
    let (_, o) = run(CURRENT);
    assert!(!o.metadata.is_empty());
    let mut keys: Vec<&str> = o.metadata.iter().map(|(k, _)| k.as_str()).collect();
    let n = keys.len();
    keys.sort_unstable();
    keys.dedup();
    assert_eq!(keys.len(), n, "duplicate metadata keys");
}
