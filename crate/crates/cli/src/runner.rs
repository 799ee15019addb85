use std::time::{Duration, Instant};

use ipop_core::engine::{EngineError, RunMetrics};
use ipop_core::scenario::{with_override, ScenarioError};
use ipop_core::{run_simulation, Scenario, SimOutput};
use rayon::prelude::*;

use crate::{CliError, Source};

pub struct RunOutcome {
    pub scenario: Scenario,
    pub source: Source,
    pub output: SimOutput,
    pub metrics: RunMetrics,
    pub wall: Duration,
}

pub fn parse(src: &Source) -> Result<Scenario, CliError> {
    Scenario::parse(&src.text).map_err(|e| validation(&src.label, &e))
}

fn validation(label: &str, e: &ScenarioError) -> CliError {
    match e {
        ScenarioError::Parse { message, line: Some(l) } => CliError::Validation(format!("{label}: line {l}: {message}")),
        _ => CliError::Validation(format!("{label}: {e}")),
    }
}

/// Names every run records, in recording order.
pub fn available_traces(s: &Scenario) -> Vec<String> {
    let mut names: Vec<String> = ["i_o", "u_o", "ref", "wc"].iter().map(|s| s.to_string()).collect();
    for j in 1..=s.topology().modules() {
        for base in ["u_rect", "u_i", "D", "i_o"] {
            names.push(format!("{base}_{j}"));
        }
    }
    names
}

/// Traces written to CSV, in declared order. No declaration means the
/// primary output and the reference.
pub fn selected_traces(s: &Scenario) -> Result<Vec<String>, CliError> {
    let available = available_traces(s);
    let declared = if s.outputs.traces.is_empty() {
        let primary = match s.controller.mode {
            ipop_core::scenario::ControlMode::Current => "i_o",
            ipop_core::scenario::ControlMode::Voltage => "u_o",
        };
        vec![primary.to_string(), "ref".to_string()]
    } else {
        s.outputs.traces.clone()
    };
    for t in &declared {
        if !available.contains(t) {
            return Err(CliError::Validation(format!("{}: outputs.traces: unknown trace {t}", s.name)));
        }
    }
    Ok(declared)
}

fn abort(label: &str, e: EngineError) -> CliError {
    match e {
        EngineError::InvalidConfig(m) => CliError::Validation(format!("{label}: {m}")),
        other => CliError::Abort(format!("{label}: {other}")),
    }
}

pub fn execute(source: Source, scenario: Scenario) -> Result<RunOutcome, CliError> {
    selected_traces(&scenario)?;
    let start = Instant::now();
    let output = run_simulation(&scenario).map_err(|e| abort(&source.label, e))?;
    let metrics = output.metrics(&scenario).map_err(|e| abort(&source.label, e))?;
    Ok(RunOutcome { scenario, source, output, metrics, wall: start.elapsed() })
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Validation("--workers must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Io(e.to_string()))
}

/// Run independent jobs across `workers` threads. Results keep input order;
/// the first error (in input order) wins.
pub fn run_all(jobs: Vec<(Source, Scenario)>, workers: Option<usize>) -> Result<Vec<RunOutcome>, CliError> {
    let pool = pool(workers)?;
    let results: Vec<Result<RunOutcome, CliError>> =
        pool.install(|| jobs.into_par_iter().map(|(src, s)| execute(src, s)).collect());
    results.into_iter().collect()
}

/// Base scenario with one numeric parameter overridden per value.
pub fn sweep_jobs(base: &Source, param: &str, values: &[f64]) -> Result<Vec<(Source, Scenario)>, CliError> {
    if values.is_empty() {
        return Err(CliError::Validation(format!("{}: sweep needs at least one value", base.label)));
    }
    values
        .iter()
        .map(|v| {
            let (text, s) = with_override(&base.text, param, *v).map_err(|e| validation(&base.label, &e))?;
            Ok((Source { label: format!("{}[{param}={v}]", base.label), text }, s))
        })
        .collect()
}

/// Threshold violations from the scenario's `[assert]` section.
pub fn check_assertions(o: &RunOutcome) -> Vec<String> {
    let Some(a) = &o.scenario.assertions else {
        return Vec::new();
    };
    let m = &o.metrics;
    let mut fails = Vec::new();
    let mut check = |name: &str, value: f64, min: Option<f64>, max: Option<f64>| {
        if let Some(lo) = min {
            if !(value >= lo) {
                fails.push(format!("{}: {name} = {value} < {lo}", o.scenario.name));
            }
        }
        if let Some(hi) = max {
            if !(value <= hi) {
                fails.push(format!("{}: {name} = {value} > {hi}", o.scenario.name));
            }
        }
    };
    check("ripple_pp", m.metrics.ripple_pp, a.ripple_pp_min, a.ripple_pp_max);
    check("settling_time", m.metrics.settling_time, a.settling_time_min, a.settling_time_max);
    check("sag_fraction", m.sag_fraction, a.sag_fraction_min, a.sag_fraction_max);
    check("tone_amp", m.metrics.tone_amp, None, a.tone_amp_max);
    fails
}
