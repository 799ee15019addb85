//! CSV, report and plot files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ipop_core::scenario::ControlMode;
use ipop_core::Trace;
use sha2::{Digest, Sha256};

use crate::plot::{emit_plot, PlotSpec, Series};
use crate::runner::{selected_traces, RunOutcome};
use crate::CliError;

/// Files written into one output directory. Unless [`OutputSet::commit`]
/// is called, dropping the set removes everything it wrote.
pub struct OutputSet {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), created_dir, files: Vec::new(), committed: false })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        std::fs::write(&path, contents)?;
        Ok(path)
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.files)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

pub fn unit(trace: &str, mode: ControlMode) -> &'static str {
    if trace.starts_with("i_") {
        "A"
    } else if trace.starts_with("u_") {
        "V"
    } else if trace.starts_with("D_") {
        "duty"
    } else if trace == "wc" {
        "rad/s"
    } else {
        match mode {
            ControlMode::Current => "A",
            ControlMode::Voltage => "V",
        }
    }
}

/// Sample times for the CSV: the recorded grid at full rate, otherwise a
/// uniform grid at `rate` over the recorded span.
fn sample_times(reference: &Trace, rate: f64, full_rate: bool) -> Vec<f64> {
    if full_rate {
        return (0..reference.len()).map(|i| reference.time(i)).collect();
    }
    let span = reference.end_time() - reference.t0;
    let n = (span * rate + 1e-9).floor() as usize + 1;
    (0..n).map(|i| reference.t0 + i as f64 / rate).collect()
}

fn value_at(trace: &Trace, t: f64, i: usize, full_rate: bool) -> f64 {
    if full_rate {
        trace.samples[i]
    } else {
        trace.sample_at(t)
    }
}

/// Trace CSV: header row, `time` then the declared traces in order.
pub fn trace_csv(o: &RunOutcome, full_rate: bool) -> Result<String, CliError> {
    let names = selected_traces(&o.scenario)?;
    let traces: Vec<&Trace> = names
        .iter()
        .map(|n| o.output.trace(n).ok_or_else(|| CliError::Validation(format!("unknown trace {n}"))))
        .collect::<Result<_, _>>()?;
    let mut out = String::from("time");
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    let Some(first) = traces.first() else {
        return Ok(out);
    };
    for (i, t) in sample_times(first, o.scenario.outputs.rate, full_rate).into_iter().enumerate() {
        let _ = write!(out, "{t}");
        for tr in &traces {
            let _ = write!(out, ",{}", value_at(tr, t, i, full_rate));
        }
        out.push('\n');
    }
    Ok(out)
}

pub const METRIC_COLUMNS: &[&str] = &[
    "controller",
    "mode",
    "primary",
    "reference",
    "mean",
    "settling_time",
    "ripple_pp",
    "ripple_pct",
    "tone_freq",
    "tone_amp",
    "sag_depth",
    "sag_fraction",
    "sag_duration",
];

pub fn metric_values(o: &RunOutcome) -> Vec<String> {
    let m = &o.metrics;
    let s = &o.scenario;
    let ripple_pct = if m.reference != 0.0 { 100.0 * m.metrics.ripple_pp / m.reference.abs() } else { f64::NAN };
    vec![
        s.controller.kind.as_str().to_string(),
        mode_str(s.controller.mode).to_string(),
        m.primary.clone(),
        m.reference.to_string(),
        m.mean.to_string(),
        m.metrics.settling_time.to_string(),
        m.metrics.ripple_pp.to_string(),
        ripple_pct.to_string(),
        m.metrics.tone_freq.to_string(),
        m.metrics.tone_amp.to_string(),
        m.metrics.sag_depth.to_string(),
        m.sag_fraction.to_string(),
        m.metrics.sag_duration.to_string(),
    ]
}

fn mode_str(m: ControlMode) -> &'static str {
    match m {
        ControlMode::Current => "current",
        ControlMode::Voltage => "voltage",
    }
}

/// One header row plus one row per run, keyed by `lead` columns.
pub fn metrics_csv(lead: &[&str], rows: &[(Vec<String>, &RunOutcome)]) -> String {
    let mut out = lead.iter().chain(METRIC_COLUMNS).copied().collect::<Vec<_>>().join(",");
    out.push('\n');
    for (keys, o) in rows {
        let line: Vec<String> = keys.iter().cloned().chain(metric_values(o)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn digest(text: &str) -> String {
    let hash = Sha256::digest(text.as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

/// Human-readable report followed by a `[report]` key/value block.
/// Wall time is deliberately left out so the report is reproducible.
pub fn report(o: &RunOutcome) -> String {
    let s = &o.scenario;
    let m = &o.metrics;
    let unit = unit(&m.primary, s.controller.mode);
    let topo = s.topology();
    let mut r = String::new();
    let _ = writeln!(r, "Run report: {}", s.name);
    if !s.description.is_empty() {
        let _ = writeln!(r, "{}", s.description);
    }
    let _ = writeln!(r);
    let _ = writeln!(r, "  source      {}", o.source.label);
    let _ = writeln!(r, "  digest      sha256:{}", digest(&o.source.text));
    let _ = writeln!(r, "  controller  {} ({} mode)", s.controller.kind.as_str(), mode_str(s.controller.mode));
    let _ = writeln!(r, "  modules     {} ({} groups of {})", topo.modules(), topo.x, topo.y);
    let _ = writeln!(r, "  simulated   {} s", s.clock.t_end);
    let _ = writeln!(r);
    let _ = writeln!(r, "Metrics ({})", m.primary);
    let _ = writeln!(r, "  reference      {} {unit}", m.reference);
    let _ = writeln!(r, "  mean           {:.6} {unit}", m.mean);
    let _ = writeln!(r, "  settling time  {:.4} s", m.metrics.settling_time);
    let _ = writeln!(r, "  ripple p-p     {:.6} {unit}", m.metrics.ripple_pp);
    let _ = writeln!(r, "  tone           {:.6} {unit} at {} Hz", m.metrics.tone_amp, m.metrics.tone_freq);
    if !s.load.is_empty() {
        let _ = writeln!(
            r,
            "  sag            {:.6} {unit} ({:.1}% of pre-step level), recovered after {:.4} s",
            m.metrics.sag_depth,
            100.0 * m.sag_fraction,
            m.metrics.sag_duration
        );
    }
    let _ = writeln!(r);
    let _ = writeln!(r, "Defaults and design choices in effect");
    let defaults = s.applied_defaults();
    for d in &defaults {
        let _ = writeln!(r, "  {} = {}  ({})", d.key, d.value, d.note);
    }
    let _ = writeln!(r);
    let _ = writeln!(r, "Warnings");
    if o.output.warnings.is_empty() {
        let _ = writeln!(r, "  none");
    }
    for w in &o.output.warnings {
        let _ = writeln!(r, "  {w}");
    }
    let _ = writeln!(r);

    let _ = writeln!(r, "[report]");
    let _ = writeln!(r, "scenario = {}", s.name);
    let _ = writeln!(r, "digest = sha256:{}", digest(&o.source.text));
    for (k, v) in METRIC_COLUMNS.iter().zip(metric_values(o)) {
        let _ = writeln!(r, "metric.{k} = {v}");
    }
    for d in &defaults {
        let _ = writeln!(r, "ledger.{} = {}", d.key, d.value);
    }
    for (k, v) in &o.output.metadata {
        let _ = writeln!(r, "meta.{k} = {v}");
    }
    for (i, w) in o.output.warnings.iter().enumerate() {
        let _ = writeln!(r, "warning.{} = {w}", i + 1);
    }
    r
}

fn plot_spec(title: String, y_label: String) -> PlotSpec {
    PlotSpec { title, y_label, ..Default::default() }
}

/// One SVG per declared trace.
pub fn trace_plots(o: &RunOutcome) -> Result<Vec<(String, String)>, CliError> {
    let mode = o.scenario.controller.mode;
    selected_traces(&o.scenario)?
        .into_iter()
        .map(|name| {
            let tr = o.output.trace(&name).ok_or_else(|| CliError::Validation(format!("unknown trace {name}")))?;
            let series = [Series { label: name.clone(), t0: tr.t0, dt: tr.dt, samples: &tr.samples }];
            let spec = plot_spec(format!("{}: {name}", o.scenario.name), format!("{name} ({})", unit(&name, mode)));
            Ok((format!("{name}.svg"), emit_plot(&series, &spec)))
        })
        .collect()
}

/// Primary traces of several runs on one set of axes.
pub fn overlay_plot(title: &str, runs: &[(String, &RunOutcome)]) -> String {
    let series: Vec<Series> = runs
        .iter()
        .filter_map(|(label, o)| {
            let tr = o.output.trace(&o.metrics.primary)?;
            Some(Series { label: label.clone(), t0: tr.t0, dt: tr.dt, samples: &tr.samples })
        })
        .collect();
    let y_label = runs
        .first()
        .map(|(_, o)| format!("{} ({})", o.metrics.primary, unit(&o.metrics.primary, o.scenario.controller.mode)))
        .unwrap_or_default();
    emit_plot(&series, &plot_spec(title.to_string(), y_label))
}

/// Primary traces of several runs resampled onto the first run's output
/// grid, truncated to the shortest run.
pub fn overlay_csv(runs: &[(String, &RunOutcome)], full_rate: bool) -> String {
    let traces: Vec<(&str, &Trace)> = runs
        .iter()
        .filter_map(|(label, o)| o.output.trace(&o.metrics.primary).map(|t| (label.as_str(), t)))
        .collect();
    let mut out = String::from("time");
    for (label, _) in &traces {
        let _ = write!(out, ",{label}");
    }
    out.push('\n');
    let Some((_, first)) = traces.first() else {
        return out;
    };
    let end = traces.iter().map(|(_, t)| t.end_time()).fold(f64::INFINITY, f64::min);
    let rate = runs[0].1.scenario.outputs.rate;
    for (i, t) in sample_times(first, rate, full_rate).into_iter().enumerate() {
        if t > end + 1e-12 {
            break;
        }
        let _ = write!(out, "{t}");
        for (_, tr) in &traces {
            let same_grid = full_rate && tr.dt == first.dt && i < tr.len();
            let _ = write!(out, ",{}", if same_grid { tr.samples[i] } else { tr.sample_at(t) });
        }
        out.push('\n');
    }
    out
}
