//! Scenario files: TOML with sections mirroring the library modules.
//!
//! Required keys are `controller.kind`, `reference.value` and `clock.t_end`;
//! everything else falls back to the nameplate defaults. Unknown keys are
//! rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{CompParams, DutyLimits, LadrcParams, PiParams, DEFAULT_COMP_LIMIT, DEFAULT_D_MAX};
use crate::hdcsc::Topology;
use crate::plant::{GridParams, PlantParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("{message}")]
    Parse { message: String, line: Option<usize> },
    #[error("{key}: {message}{}", line_suffix(*line))]
    Invalid {
        key: String,
        message: String,
        line: Option<usize>,
    },
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

impl ScenarioError {
    pub fn key(&self) -> Option<&str> {
        match self {
            ScenarioError::Invalid { key, .. } => Some(key),
            ScenarioError::Parse { .. } => None,
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ScenarioError::Parse { line, .. } | ScenarioError::Invalid { line, .. } => *line,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Pi,
    Ladrc,
    Aladrc,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Pi => "pi",
            ControllerKind::Ladrc => "ladrc",
            ControllerKind::Aladrc => "aladrc",
        }
    }
}

/// Regulated quantity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    /// Total load current against a total current reference.
    #[default]
    Current,
    /// Bus voltage against a voltage reference.
    Voltage,
}

/// Bridge damping resistance: a value or the leakage identification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DampingSetting {
    Ohms(f64),
    Named(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub n: Option<f64>,
    pub l_lk: Option<f64>,
    pub l1: Option<f64>,
    pub c1: Option<f64>,
    pub l2: Option<f64>,
    pub c2: Option<f64>,
    pub r_d: Option<DampingSetting>,
    pub r_s: Option<f64>,
    pub f_s: Option<f64>,
    pub r_load: Option<f64>,
    pub duty_loss: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    pub x: usize,
    pub y: usize,
    pub active: Option<Vec<bool>>,
    /// Uniform +- tolerance on each module's L2 and C2, percent.
    pub mismatch_pct: f64,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self {
            x: 3,
            y: 4,
            active: None,
            mismatch_pct: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    #[serde(default)]
    pub mode: ControlMode,
    #[serde(default = "default_wc0")]
    pub wc0: f64,
    #[serde(default = "default_w0")]
    pub w0: f64,
    /// Derived from the plant when absent.
    pub b0: Option<f64>,
    #[serde(default = "default_k_s")]
    pub k_s: f64,
    #[serde(default = "default_i_c")]
    pub i_c: f64,
    #[serde(default = "default_hysteresis")]
    pub hysteresis: f64,
    #[serde(default = "default_kp")]
    pub kp: f64,
    #[serde(default = "default_ki")]
    pub ki: f64,
    #[serde(default = "default_d_max")]
    pub d_max: f64,
}

fn default_wc0() -> f64 {
    400.0
}
fn default_w0() -> f64 {
    2800.0
}
fn default_k_s() -> f64 {
    100.0
}
fn default_i_c() -> f64 {
    30.0
}
fn default_hysteresis() -> f64 {
    2.0
}
fn default_kp() -> f64 {
    crate::control::DEFAULT_KP
}
fn default_ki() -> f64 {
    crate::control::DEFAULT_KI
}
fn default_d_max() -> f64 {
    DEFAULT_D_MAX
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompensationSection {
    pub enabled: bool,
    pub k_w: f64,
    pub limit: f64,
    /// Defaults to the current reference in current mode.
    pub i_ref: Option<f64>,
}

impl Default for CompensationSection {
    fn default() -> Self {
        Self {
            enabled: false,
            k_w: 0.01,
            limit: DEFAULT_COMP_LIMIT,
            i_ref: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HdcscSection {
    pub enabled: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceStep {
    pub t: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    /// Total current (A) or bus voltage (V) from t = 0.
    pub value: f64,
    #[serde(default)]
    pub steps: Vec<ReferenceStep>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadEvent {
    pub t: f64,
    /// New load resistance (ohm).
    pub r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleEvent {
    pub t: f64,
    pub module: usize,
    pub active: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockSection {
    #[serde(default = "default_dt_plant")]
    pub dt_plant: f64,
    pub t_end: f64,
    /// Controller sample rate; defaults to the switching frequency.
    pub f_ctrl: Option<f64>,
    #[serde(default = "default_state_bound")]
    pub state_bound: f64,
}

fn default_dt_plant() -> f64 {
    2e-6
}
fn default_state_bound() -> f64 {
    1e9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Trace names in CSV column order; empty selects every trace.
    pub traces: Vec<String>,
    /// CSV sample rate (Hz).
    pub rate: f64,
    /// Trailing window for ripple and tone metrics (s); defaults to
    /// `min(0.1, t_end / 2)`.
    pub ripple_window: Option<f64>,
    /// Settling band as a fraction of the reference.
    pub settling_band: f64,
    /// Recovery band for sag duration.
    pub sag_band: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            traces: Vec::new(),
            rate: 10_000.0,
            ripple_window: None,
            settling_band: crate::analysis::DEFAULT_SETTLING_BAND,
            sag_band: 0.05,
        }
    }
}

/// Default parameter sweep for `sweep` runs that give no explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: String,
    pub values: Vec<f64>,
}

/// Thresholds checked in assert mode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssertSection {
    pub ripple_pp_min: Option<f64>,
    pub ripple_pp_max: Option<f64>,
    pub settling_time_max: Option<f64>,
    pub settling_time_min: Option<f64>,
    pub sag_fraction_max: Option<f64>,
    pub sag_fraction_min: Option<f64>,
    pub tone_amp_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub topology: TopologySection,
    pub controller: ControllerSection,
    #[serde(default)]
    pub compensation: CompensationSection,
    #[serde(default)]
    pub hdcsc: HdcscSection,
    pub reference: ReferenceSection,
    #[serde(default)]
    pub load: Vec<LoadEvent>,
    #[serde(default)]
    pub modules: Vec<ModuleEvent>,
    pub clock: ClockSection,
    #[serde(default)]
    pub outputs: OutputSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default, rename = "assert")]
    pub assertions: Option<AssertSection>,
}

/// A design default that was in effect for a run.
#[derive(Clone, Debug, PartialEq)]
pub struct AppliedDefault {
    pub key: &'static str,
    pub value: String,
    pub note: &'static str,
}

const REQUIRED: [(&str, &str); 3] = [("controller", "kind"), ("reference", "value"), ("clock", "t_end")];

/// Numeric keys accepted by parameter sweeps.
pub const SWEEPABLE: &[&str] = &[
    "seed",
    "grid.u_ll_rms",
    "grid.f_grid",
    "plant.n",
    "plant.l_lk",
    "plant.l1",
    "plant.c1",
    "plant.l2",
    "plant.c2",
    "plant.r_d",
    "plant.r_s",
    "plant.f_s",
    "plant.r_load",
    "topology.mismatch_pct",
    "controller.wc0",
    "controller.w0",
    "controller.b0",
    "controller.k_s",
    "controller.i_c",
    "controller.hysteresis",
    "controller.kp",
    "controller.ki",
    "controller.d_max",
    "compensation.k_w",
    "compensation.limit",
    "compensation.i_ref",
    "reference.value",
    "clock.dt_plant",
    "clock.t_end",
    "clock.f_ctrl",
    "outputs.ripple_window",
];

impl Scenario {
    /// Parse and validate scenario text.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let value: toml::Table = toml::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        for (section, key) in REQUIRED {
            let present = value
                .get(section)
                .and_then(|s| s.as_table())
                .is_some_and(|t| t.contains_key(key));
            if !present {
                return Err(ScenarioError::Invalid {
                    key: format!("{section}.{key}"),
                    message: "required".into(),
                    line: locate_section(text, section),
                });
            }
        }
        let scenario: Scenario = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            let message = e.message().to_string();
            match unknown_field(&message) {
                Some(field) => ScenarioError::Invalid {
                    key: match line.and_then(|l| section_before(text, l)) {
                        Some(section) => format!("{section}.{field}"),
                        None => field,
                    },
                    message: format!("unknown key ({message})"),
                    line,
                },
                None => ScenarioError::Parse { message, line },
            }
        })?;
        scenario.validate(text)?;
        Ok(scenario)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Parse {
            message: format!("cannot read {}: {e}", path.display()),
            line: None,
        })?;
        Self::parse(&text)
    }

    /// Semantic checks; `text` is used to report line numbers.
    pub fn validate(&self, text: &str) -> Result<(), ScenarioError> {
        let err = |section: &str, key: &str, message: String| ScenarioError::Invalid {
            key: format!("{section}.{key}"),
            message,
            line: locate_key(text, section, key).or_else(|| locate_section(text, section)),
        };

        self.grid
            .validate()
            .map_err(|e| err("grid", "u_ll_rms", e.to_string()))?;
        let plant = self.plant_params().map_err(|(k, m)| err("plant", k, m))?;
        plant.validate().map_err(|e| err("plant", "r_load", e.to_string()))?;

        let t = &self.topology;
        if t.x == 0 || t.y == 0 {
            return Err(err("topology", "x", "x and y must be >= 1".into()));
        }
        if let Some(active) = &t.active {
            if active.len() != t.x * t.y {
                return Err(err(
                    "topology",
                    "active",
                    format!("mask has {} entries for {} modules", active.len(), t.x * t.y),
                ));
            }
            if !active.iter().any(|a| *a) {
                return Err(err("topology", "active", "at least one module must be active".into()));
            }
        }
        if !(t.mismatch_pct >= 0.0 && t.mismatch_pct < 50.0) {
            return Err(err("topology", "mismatch_pct", format!("{} outside [0, 50)", t.mismatch_pct)));
        }

        let c = &self.controller;
        if !(c.d_max > 0.0 && c.d_max <= 1.0) {
            return Err(err("controller", "d_max", format!("{} outside (0, 1]", c.d_max)));
        }
        match c.kind {
            ControllerKind::Pi => {
                if !(c.kp.is_finite() && c.ki.is_finite() && c.kp >= 0.0 && c.ki >= 0.0) {
                    return Err(err("controller", "kp", "PI gains must be finite and >= 0".into()));
                }
            }
            ControllerKind::Ladrc | ControllerKind::Aladrc => {
                if !(c.wc0 > 0.0) {
                    return Err(err("controller", "wc0", format!("{} must be > 0", c.wc0)));
                }
                if !(c.w0 > 0.0) || c.w0 < c.wc0 {
                    return Err(err(
                        "controller",
                        "w0",
                        format!("w0 = {} must be >= wc0 = {} (observer slower than controller)", c.w0, c.wc0),
                    ));
                }
                if let Some(b0) = c.b0 {
                    if b0 == 0.0 || !b0.is_finite() {
                        return Err(err("controller", "b0", "must be finite and nonzero".into()));
                    }
                }
                if c.kind == ControllerKind::Aladrc {
                    if !(c.k_s >= 0.0 && c.wc0 - 2.0 * c.k_s > 0.0) {
                        return Err(err("controller", "k_s", format!("{} must satisfy 0 <= k_s < wc0 / 2", c.k_s)));
                    }
                    if !(c.hysteresis >= 0.0) {
                        return Err(err("controller", "hysteresis", "must be >= 0".into()));
                    }
                }
            }
        }

        let comp = &self.compensation;
        if comp.enabled {
            if !(comp.limit >= 0.0) || !comp.k_w.is_finite() {
                return Err(err("compensation", "limit", "limit must be >= 0 and k_w finite".into()));
            }
            match (self.controller.mode, comp.i_ref) {
                (_, Some(i)) if !(i > 0.0) => {
                    return Err(err("compensation", "i_ref", format!("{i} must be > 0")));
                }
                (ControlMode::Voltage, None) => {
                    return Err(err("compensation", "i_ref", "required in voltage mode".into()));
                }
                (ControlMode::Current, None) if !(self.reference.value > 0.0) => {
                    return Err(err("compensation", "i_ref", "reference must be > 0 to normalize compensation".into()));
                }
                _ => {}
            }
        }

        let clk = &self.clock;
        if !(clk.t_end > 0.0 && clk.t_end.is_finite()) {
            return Err(err("clock", "t_end", format!("{} must be > 0", clk.t_end)));
        }
        if !(clk.dt_plant > 0.0) {
            return Err(err("clock", "dt_plant", format!("{} must be > 0", clk.dt_plant)));
        }
        if let Some(f) = clk.f_ctrl {
            if !(f > 0.0) {
                return Err(err("clock", "f_ctrl", format!("{f} must be > 0")));
            }
        }
        if clk.dt_plant > self.dt_ctrl() {
            return Err(err("clock", "dt_plant", "plant step longer than the control period".into()));
        }
        if !(clk.state_bound > 0.0) {
            return Err(err("clock", "state_bound", "must be > 0".into()));
        }

        if !self.reference.value.is_finite() {
            return Err(err("reference", "value", "must be finite".into()));
        }
        for s in &self.reference.steps {
            if !(s.t >= 0.0 && s.t <= clk.t_end) || !s.value.is_finite() {
                return Err(err("reference", "steps", format!("step at t = {} outside [0, t_end]", s.t)));
            }
        }
        for ev in &self.load {
            if !(ev.t >= 0.0 && ev.t <= clk.t_end) {
                return Err(err("load", "t", format!("event at t = {} outside [0, t_end]", ev.t)));
            }
            if !(ev.r > 0.0) {
                return Err(err("load", "r", format!("resistance {} must be > 0", ev.r)));
            }
        }
        for ev in &self.modules {
            if !(ev.t >= 0.0 && ev.t <= clk.t_end) {
                return Err(err("modules", "t", format!("event at t = {} outside [0, t_end]", ev.t)));
            }
            if ev.module >= t.x * t.y {
                return Err(err("modules", "module", format!("index {} out of range", ev.module)));
            }
        }

        if let Some(sw) = &self.sweep {
            if !SWEEPABLE.contains(&sw.param.as_str()) {
                return Err(err("sweep", "param", format!("{} is not a sweepable numeric parameter", sw.param)));
            }
            if sw.values.is_empty() {
                return Err(err("sweep", "values", "empty value list".into()));
            }
        }

        let o = &self.outputs;
        if !(o.rate > 0.0) {
            return Err(err("outputs", "rate", "must be > 0".into()));
        }
        if !(self.ripple_window() > 0.0 && self.ripple_window() <= clk.t_end) {
            return Err(err("outputs", "ripple_window", "must be in (0, t_end]".into()));
        }
        if !(o.settling_band > 0.0 && o.settling_band < 0.5) {
            return Err(err("outputs", "settling_band", "must be in (0, 0.5)".into()));
        }
        if !(o.sag_band > 0.0 && o.sag_band < 1.0) {
            return Err(err("outputs", "sag_band", "must be in (0, 1)".into()));
        }
        Ok(())
    }

    /// Resolved plant parameters, or the offending key.
    pub fn plant_params(&self) -> Result<PlantParams, (&'static str, String)> {
        let s = &self.plant;
        let d = PlantParams::default();
        let mut p = PlantParams {
            n: s.n.unwrap_or(d.n),
            l_lk: s.l_lk.unwrap_or(d.l_lk),
            l1: s.l1.unwrap_or(d.l1),
            c1: s.c1.unwrap_or(d.c1),
            l2: s.l2.unwrap_or(d.l2),
            c2: s.c2.unwrap_or(d.c2),
            r_d: d.r_d,
            r_s: s.r_s.unwrap_or(d.r_s),
            f_s: s.f_s.unwrap_or(d.f_s),
            r_load: s.r_load.unwrap_or(d.r_load),
            duty_loss: s.duty_loss.unwrap_or(d.duty_loss),
        };
        match &s.r_d {
            None => {}
            Some(DampingSetting::Ohms(v)) => p.r_d = *v,
            Some(DampingSetting::Named(name)) if name == "leakage" => p.r_d = p.leakage_damping(),
            Some(DampingSetting::Named(name)) => {
                return Err(("r_d", format!("expected ohms or \"leakage\", got \"{name}\"")));
            }
        }
        Ok(p)
    }

    pub fn topology(&self) -> Topology {
        Topology {
            x: self.topology.x,
            y: self.topology.y,
        }
    }

    pub fn active_mask(&self) -> Vec<bool> {
        self.topology
            .active
            .clone()
            .unwrap_or_else(|| vec![true; self.topology.x * self.topology.y])
    }

    pub fn dt_ctrl(&self) -> f64 {
        let f = self
            .clock
            .f_ctrl
            .unwrap_or_else(|| self.plant.f_s.unwrap_or(PlantParams::default().f_s));
        1.0 / f
    }

    pub fn ripple_window(&self) -> f64 {
        self.outputs
            .ripple_window
            .unwrap_or_else(|| (0.5 * self.clock.t_end).min(0.1))
    }

    pub fn duty_limits(&self) -> DutyLimits {
        DutyLimits {
            min: 0.0,
            max: self.controller.d_max,
        }
    }

    pub fn pi_params(&self) -> PiParams {
        PiParams {
            kp: self.controller.kp,
            ki: self.controller.ki,
        }
    }

    /// `b0` for the chosen mode: the high-frequency gain of the
    /// duty-to-output second-order model at the mean rectified voltage.
    ///
    /// In current mode each controller sees its module's share of the load
    /// current, so the gain is divided by `N_active * r_load`.
    pub fn default_b0(&self) -> f64 {
        let p = self.plant_params().unwrap_or_default();
        let u = self.grid.mean_rectified();
        let voltage_gain = p.n * u / (p.l2 * p.c2);
        match self.controller.mode {
            ControlMode::Voltage => voltage_gain,
            ControlMode::Current => {
                let active = self.active_mask().iter().filter(|a| **a).count().max(1);
                voltage_gain / (active as f64 * p.r_load)
            }
        }
    }

    pub fn ladrc_params(&self) -> LadrcParams {
        let c = &self.controller;
        LadrcParams {
            wc0: c.wc0,
            w0: c.w0,
            b0: c.b0.unwrap_or_else(|| self.default_b0()),
            k_s: c.k_s,
            i_c: c.i_c,
            hysteresis: c.hysteresis,
        }
    }

    pub fn comp_params(&self) -> Option<CompParams> {
        let c = &self.compensation;
        c.enabled.then(|| CompParams {
            k_w: c.k_w,
            i_ref: c.i_ref.unwrap_or(self.reference.value),
            limit: c.limit,
        })
    }

    /// Reference in effect at `t`.
    pub fn reference_at(&self, t: f64) -> f64 {
        self.reference
            .steps
            .iter()
            .filter(|s| s.t <= t)
            .max_by(|a, b| a.t.total_cmp(&b.t))
            .map_or(self.reference.value, |s| s.value)
    }

    /// Time of the last reference change (0 without steps).
    pub fn last_reference_change(&self) -> f64 {
        self.reference.steps.iter().map(|s| s.t).fold(0.0, f64::max)
    }

    /// Defaults that shape the run and are not nameplate data.
    pub fn applied_defaults(&self) -> Vec<AppliedDefault> {
        let mut out = Vec::new();
        let p = self.plant_params().unwrap_or_default();
        let rd_note = match &self.plant.r_d {
            None => "default lossless bridge",
            Some(DampingSetting::Named(_)) => "leakage identification 4 n^2 L_lk f_s",
            Some(DampingSetting::Ohms(_)) => "configured",
        };
        out.push(AppliedDefault {
            key: "plant.r_d",
            value: format!("{}", p.r_d),
            note: rd_note,
        });
        out.push(AppliedDefault {
            key: "plant.r_s",
            value: format!("{}", p.r_s),
            note: if self.plant.r_s.is_some() { "configured" } else { "default source resistance" },
        });
        out.push(AppliedDefault {
            key: "plant.n",
            value: format!("{}", p.n),
            note: if self.plant.n.is_some() { "configured" } else { "ratio 1:1.5 read as n = 1/1.5" },
        });
        out.push(AppliedDefault {
            key: "plant.duty_loss",
            value: format!("{}", p.duty_loss),
            note: "leakage duty loss",
        });
        out.push(AppliedDefault {
            key: "topology.mismatch_pct",
            value: format!("{}", self.topology.mismatch_pct),
            note: "uniform L2/C2 tolerance",
        });
        if self.controller.kind != ControllerKind::Pi {
            out.push(AppliedDefault {
                key: "controller.b0",
                value: format!("{}", self.ladrc_params().b0),
                note: if self.controller.b0.is_some() { "configured" } else { "n U / (L2 C2), divided by N r_load in current mode" },
            });
        } else {
            out.push(AppliedDefault {
                key: "controller.kp/ki",
                value: format!("{}/{}", self.controller.kp, self.controller.ki),
                note: "frozen PI gains",
            });
        }
        if self.controller.kind == ControllerKind::Aladrc {
            out.push(AppliedDefault {
                key: "controller.k_s",
                value: format!("{}", self.controller.k_s),
                note: "adaptive step",
            });
            out.push(AppliedDefault {
                key: "controller.hysteresis",
                value: format!("{}", self.controller.hysteresis),
                note: "band around i_c",
            });
        }
        if let Some(c) = self.comp_params() {
            out.push(AppliedDefault {
                key: "compensation.limit",
                value: format!("{}", c.limit),
                note: "D_c limiter",
            });
        }
        out.push(AppliedDefault {
            key: "clock.dt_plant",
            value: format!("{}", self.clock.dt_plant),
            note: "upper bound; actual step divides the control period",
        });
        out
    }
}

/// Set a dotted numeric key in scenario text and re-parse.
pub fn with_override(text: &str, path: &str, value: f64) -> Result<(String, Scenario), ScenarioError> {
    if !SWEEPABLE.contains(&path) {
        return Err(ScenarioError::Invalid {
            key: path.to_string(),
            message: "not a sweepable numeric parameter".into(),
            line: None,
        });
    }
    let mut table: toml::Table = toml::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let mut parts = path.split('.').collect::<Vec<_>>();
    let leaf = parts.pop().expect("non-empty path");
    let mut cursor = &mut table;
    for part in parts {
        cursor = cursor
            .entry(part)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ScenarioError::Invalid {
                key: path.to_string(),
                message: format!("{part} is not a section"),
                line: None,
            })?;
    }
    let v = if leaf == "seed" {
        toml::Value::Integer(value as i64)
    } else {
        toml::Value::Float(value)
    };
    cursor.insert(leaf.to_string(), v);
    let new_text = toml::to_string(&table).map_err(|e| ScenarioError::Parse {
        message: e.to_string(),
        line: None,
    })?;
    let scenario = Scenario::parse(&new_text)?;
    Ok((new_text, scenario))
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn unknown_field(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    Some(rest.split('`').next()?.to_string())
}

fn section_header(line: &str) -> Option<&str> {
    let l = line.trim();
    let inner = l
        .strip_prefix("[[")
        .and_then(|r| r.strip_suffix("]]"))
        .or_else(|| l.strip_prefix('[').and_then(|r| r.strip_suffix(']')))?;
    Some(inner.trim())
}

fn locate_section(text: &str, section: &str) -> Option<usize> {
    text.lines()
        .position(|l| section_header(l) == Some(section))
        .map(|i| i + 1)
}

/// Section header in effect at 1-based `line`.
fn section_before(text: &str, line: usize) -> Option<&str> {
    text.lines().take(line).filter_map(section_header).last()
}

fn locate_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = "";
    for (i, line) in text.lines().enumerate() {
        if let Some(h) = section_header(line) {
            current = h;
            continue;
        }
        let l = line.trim_start();
        if current == section {
            if let Some(rest) = l.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
        // dotted form at top level
        if current.is_empty() {
            if let Some(rest) = l.strip_prefix(&format!("{section}.{key}")) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[controller]
kind = \"aladrc\"

[reference]
value = 8000.0

[clock]
t_end = 0.5
";

    #[test]
    fn defaults_resolve() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.controller.wc0, 400.0);
        assert_eq!(s.controller.w0, 2800.0);
        assert_eq!(s.compensation.k_w, 0.01);
        assert!((s.dt_ctrl() - 1.0 / 15000.0).abs() < 1e-18);
        assert_eq!(s.topology().modules(), 12);
        assert_eq!(s.plant_params().unwrap(), PlantParams::default());
    }

    #[test]
    fn missing_kind_named() {
        let text = MINIMAL.replace("kind = \"aladrc\"", "");
        let e = Scenario::parse(&text).unwrap_err();
        assert_eq!(e.key(), Some("controller.kind"));
        assert_eq!(e.line(), Some(1));
        assert!(e.to_string().contains("controller.kind"));
    }

    #[test]
    fn unknown_key_named_with_line() {
        let text = MINIMAL.replace("t_end = 0.5", "t_end = 0.5\nbogus = 1");
        let e = Scenario::parse(&text).unwrap_err();
        assert_eq!(e.key(), Some("clock.bogus"));
        assert_eq!(e.line(), Some(9));
    }

    #[test]
    fn slow_observer_rejected() {
        let text = MINIMAL.replace("kind = \"aladrc\"", "kind = \"ladrc\"\nwc0 = 400.0\nw0 = 100.0");
        let e = Scenario::parse(&text).unwrap_err();
        assert_eq!(e.key(), Some("controller.w0"));
        assert_eq!(e.line(), Some(4));
    }

    #[test]
    fn leakage_damping_named() {
        let text = format!("{MINIMAL}\n[plant]\nr_d = \"leakage\"\n");
        let s = Scenario::parse(&text).unwrap();
        let p = s.plant_params().unwrap();
        assert!((p.r_d - p.leakage_damping()).abs() < 1e-15);
        let bad = format!("{MINIMAL}\n[plant]\nr_d = \"other\"\n");
        assert_eq!(Scenario::parse(&bad).unwrap_err().key(), Some("plant.r_d"));
    }

    #[test]
    fn event_times_checked() {
        let text = format!("{MINIMAL}\n[[load]]\nt = 2.0\nr = 0.1\n");
        assert_eq!(Scenario::parse(&text).unwrap_err().key(), Some("load.t"));
    }

    #[test]
    fn reference_schedule() {
        let text = MINIMAL.replace("value = 8000.0", "value = 0.0\nsteps = [{ t = 0.1, value = 5.0 }, { t = 0.3, value = 7.0 }]");
        let s = Scenario::parse(&text).unwrap();
        assert_eq!(s.reference_at(0.05), 0.0);
        assert_eq!(s.reference_at(0.2), 5.0);
        assert_eq!(s.reference_at(0.4), 7.0);
        assert_eq!(s.last_reference_change(), 0.3);
    }

    #[test]
    fn override_roundtrip() {
        let (_, s) = with_override(MINIMAL, "plant.c2", 800e-6).unwrap();
        assert_eq!(s.plant_params().unwrap().c2, 800e-6);
        let (_, s) = with_override(MINIMAL, "controller.wc0", 300.0).unwrap();
        assert_eq!(s.controller.wc0, 300.0);
        assert!(with_override(MINIMAL, "controller.kind", 1.0).is_err());
    }

    #[test]
    fn b0_by_mode() {
        let s = Scenario::parse(MINIMAL).unwrap();
        let p = PlantParams::default();
        let v = p.n * s.grid.mean_rectified() / (p.l2 * p.c2);
        assert!((s.default_b0() - v / (12.0 * p.r_load)).abs() / s.default_b0() < 1e-12);
        let volt = MINIMAL.replace("kind = \"aladrc\"", "kind = \"aladrc\"\nmode = \"voltage\"");
        let s = Scenario::parse(&volt).unwrap();
        assert!((s.default_b0() - v).abs() / v < 1e-12);
    }
}
