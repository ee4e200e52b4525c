//! Scenario configs: TOML schema, `key=value` overrides, semantic
//! validation, execution and run summaries.

use std::collections::BTreeMap;
use std::fmt;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ia::{IaController, IaGains};
use crate::linalg::{self, Matrix, Vector};
use crate::loops::{IaLoop, OpenLoop, PidLoop};
use crate::model::PlantState;
use crate::pid::{PidGains, ReferencePid};
use crate::sim::{self, DisturbanceSchedule, IntegratorConfig, Segment, Trajectory};
use crate::systems::{self, BuiltSystem};

/// The bundled worked-example scenario.
pub const FIG1_TOML: &str = include_str!("../scenarios/fig1.toml");

/// Failure to turn text into a [`ScenarioConfig`], split by severity.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    /// Not valid TOML, or does not fit the schema.
    #[error("parse error: {0}")]
    Parse(String),
    /// Well-formed but inconsistent.
    #[error("invalid scenario: {0}")]
    Invalid(#[from] Error),
}

/// Scalar (`s·I`) or explicit rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixValue {
    Scalar(f64),
    Vector(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixValue {
    /// Resolves to an `m × m` matrix; `field` names the config slot in errors.
    pub fn resolve(&self, field: &str, m: usize) -> Result<Matrix> {
        let mat = match self {
            MatrixValue::Scalar(s) => Matrix::identity(m, m) * *s,
            MatrixValue::Vector(v) => Matrix::from_row_slice(1, v.len(), v),
            MatrixValue::Rows(rows) => {
                let cols = rows.first().map_or(0, |r| r.len());
                if rows.iter().any(|r| r.len() != cols) {
                    return Err(Error::Config {
                        field: field.into(),
                        message: "rows have unequal lengths".into(),
                    });
                }
                linalg::from_rows(rows)
            }
        };
        if mat.shape() != (m, m) {
            return Err(Error::dimension(field, format!("{m}x{m}"), format!("{}x{}", mat.nrows(), mat.ncols())));
        }
        Ok(mat)
    }
}

impl From<&Matrix> for MatrixValue {
    fn from(m: &Matrix) -> Self {
        if m.nrows() == 1 && m.ncols() == 1 {
            MatrixValue::Scalar(m[(0, 0)])
        } else {
            MatrixValue::Rows(linalg::to_rows(m))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub id: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControllerSection {
    #[default]
    None,
    Ia {
        k_i: MatrixValue,
        #[serde(default)]
        j_c1: Option<MatrixValue>,
        r_c1: MatrixValue,
        r_c2: MatrixValue,
    },
    ReferencePid {
        k1: MatrixValue,
        k_p_outer: MatrixValue,
        k_i: MatrixValue,
        k3: MatrixValue,
    },
}

impl ControllerSection {
    pub fn kind(&self) -> &'static str {
        match self {
            ControllerSection::None => "none",
            ControllerSection::Ia { .. } => "ia",
            ControllerSection::ReferencePid { .. } => "reference-pid",
        }
    }
}

/// Initial plant state in original momentum coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub q: Vec<f64>,
    #[serde(default)]
    pub momentum: Option<Vec<f64>>,
    #[serde(default)]
    pub zeta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub t_start: f64,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_min_step")]
    pub min_step: f64,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
}

fn default_method() -> String {
    "fixed-rk4".into()
}
fn default_step() -> f64 {
    1e-3
}
fn default_t_final() -> f64 {
    60.0
}
fn default_rel_tol() -> f64 {
    1e-8
}
fn default_abs_tol() -> f64 {
    1e-10
}
fn default_min_step() -> f64 {
    1e-10
}
fn default_max_step() -> f64 {
    1e-2
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection {
            method: default_method(),
            step: default_step(),
            t_final: default_t_final(),
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            min_step: default_min_step(),
            max_step: default_max_step(),
        }
    }
}

impl IntegratorSection {
    pub fn resolve(&self) -> Result<IntegratorConfig> {
        let cfg = match self.method.as_str() {
            "fixed-rk4" => IntegratorConfig::FixedRk4 {
                step: self.step,
                t_final: self.t_final,
            },
            "adaptive-rk45" => IntegratorConfig::AdaptiveRk45 {
                rel_tol: self.rel_tol,
                abs_tol: self.abs_tol,
                min_step: self.min_step,
                max_step: self.max_step,
                t_final: self.t_final,
            },
            other => {
                return Err(Error::Config {
                    field: "integrator.method".into(),
                    message: format!("unknown method `{other}` (expected fixed-rk4 or adaptive-rk45)"),
                })
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    /// CSV file name, relative to the output directory.
    #[serde(default)]
    pub csv: Option<String>,
    /// Gnuplot script file name, relative to the output directory.
    #[serde(default)]
    pub gnuplot: Option<String>,
    #[serde(default = "default_band")]
    pub settling_band: f64,
    #[serde(default = "default_hold")]
    pub settling_hold: f64,
}

fn default_band() -> f64 {
    0.02
}
fn default_hold() -> f64 {
    2.0
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection {
            csv: None,
            gnuplot: None,
            settling_band: default_band(),
            settling_hold: default_hold(),
        }
    }
}

/// Top-level scenario config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub system: SystemSection,
    #[serde(default)]
    pub controller: ControllerSection,
    pub initial_state: InitialState,
    /// Empty means `d ≡ 0`.
    #[serde(default)]
    pub disturbance: Vec<SegmentConfig>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

impl ScenarioConfig {
    /// Parses TOML text and applies `key=value` overrides before schema
    /// checking.
    pub fn parse(text: &str, overrides: &[String]) -> std::result::Result<Self, ScenarioError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }
}

/// `key.path=value`; the value is read as a TOML value, falling back to a
/// bare string. `disturbance=none` removes every disturbance segment.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let bad = |message: &str| Error::Config {
        field: assignment.into(),
        message: message.into(),
    };
    let (key, raw) = assignment.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(bad("empty key"));
    }
    if key == "disturbance" && raw == "none" {
        table.remove("disturbance");
        return Ok(());
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key present"),
        Err(_) => toml::Value::String(raw.into()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut cursor = table;
    for part in path {
        let entry = cursor.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry.as_table_mut().ok_or_else(|| bad(&format!("`{part}` is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

/// Resolved controller.
#[derive(Debug, Clone)]
pub enum ControllerSpec {
    None,
    Ia(IaGains),
    ReferencePid(PidGains),
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub built: BuiltSystem,
    pub controller: ControllerSpec,
    pub initial: PlantState,
    pub zeta0: Vector,
    pub schedule: DisturbanceSchedule,
    pub integrator: IntegratorConfig,
}

fn vector_field(field: &str, v: &[f64], len: usize) -> Result<Vector> {
    if v.len() != len {
        return Err(Error::dimension(field, len, v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config {
            field: field.into(),
            message: "values must be finite".into(),
        });
    }
    Ok(Vector::from_column_slice(v))
}

impl Scenario {
    /// Semantic validation: registry lookup, dimensions, gain invariants,
    /// schedule and integrator settings.
    pub fn from_config(config: ScenarioConfig) -> Result<Self> {
        let built = systems::build(&config.system.id, &config.system.params)?;
        let n = built.system.dof();
        let m = built.system.inputs();

        let controller = match &config.controller {
            ControllerSection::None => ControllerSpec::None,
            ControllerSection::Ia { k_i, j_c1, r_c1, r_c2 } => {
                let j_c1 = match j_c1 {
                    Some(j) => j.resolve("controller.j_c1", m)?,
                    None => Matrix::zeros(m, m),
                };
                ControllerSpec::Ia(IaGains::new(k_i.resolve("controller.k_i", m)?, j_c1, r_c1.resolve("controller.r_c1", m)?, r_c2.resolve("controller.r_c2", m)?)?)
            }
            ControllerSection::ReferencePid { k1, k_p_outer, k_i, k3 } => ControllerSpec::ReferencePid(PidGains::new(
                k1.resolve("controller.k1", m)?,
                k_p_outer.resolve("controller.k_p_outer", m)?,
                k_i.resolve("controller.k_i", m)?,
                k3.resolve("controller.k3", m)?,
            )?),
        };

        let init = &config.initial_state;
        let q = vector_field("initial_state.q", &init.q, n)?;
        let momentum = match &init.momentum {
            Some(p) => vector_field("initial_state.momentum", p, n)?,
            None => Vector::zeros(n),
        };
        let zeta0 = match (&init.zeta, &controller) {
            (Some(z), ControllerSpec::None) if !z.is_empty() => {
                return Err(Error::Config {
                    field: "initial_state.zeta".into(),
                    message: "controller kind `none` has no integrator state".into(),
                })
            }
            (_, ControllerSpec::None) => Vector::zeros(0),
            (Some(z), _) => vector_field("initial_state.zeta", z, m)?,
            (None, _) => Vector::zeros(m),
        };
        let initial = PlantState::new(q, momentum);
        built.system.model().simulation_domain().check(&initial.q).map_err(|_| Error::Config {
            field: "initial_state.q".into(),
            message: format!("{:?} is outside the simulation domain", init.q),
        })?;

        let schedule = if config.disturbance.is_empty() {
            DisturbanceSchedule::zero(m)
        } else {
            let mut segments = Vec::with_capacity(config.disturbance.len());
            for (i, s) in config.disturbance.iter().enumerate() {
                segments.push(Segment {
                    t_start: s.t_start,
                    value: vector_field(&format!("disturbance[{i}].value"), &s.value, m)?,
                });
            }
            DisturbanceSchedule::new(segments)?
        };

        let integrator = config.integrator.resolve()?;
        let out = &config.outputs;
        if !(out.settling_band > 0.0) || !(out.settling_hold >= 0.0) {
            return Err(Error::Config {
                field: "outputs".into(),
                message: "settling_band must be positive and settling_hold non-negative".into(),
            });
        }

        Ok(Scenario {
            config,
            built,
            controller,
            initial,
            zeta0,
            schedule,
            integrator,
        })
    }

    /// Parse, override and validate in one step.
    pub fn load(text: &str, overrides: &[String]) -> std::result::Result<Self, ScenarioError> {
        Ok(Scenario::from_config(ScenarioConfig::parse(text, overrides)?)?)
    }

    /// Deterministic validation report.
    pub fn report(&self) -> String {
        let mut lines = Vec::new();
        let c = &self.config;
        lines.push(format!("scenario: {}", c.name.as_deref().unwrap_or("(unnamed)")));
        lines.push(format!("system: {} (n = {}, m = {})", self.built.id, self.built.system.dof(), self.built.system.inputs()));
        for (k, v) in &c.system.params {
            lines.push(format!("  param {k} = {v}"));
        }
        for note in &self.built.notes {
            lines.push(format!("  {note}"));
        }
        lines.push(format!("controller: {}", c.controller.kind()));
        lines.push(format!("initial q: {:?}", self.initial.q.as_slice()));
        lines.push(format!("initial momentum: {:?}", self.initial.momentum.as_slice()));
        if !self.zeta0.is_empty() {
            lines.push(format!("initial zeta: {:?}", self.zeta0.as_slice()));
        }
        for s in self.schedule.segments() {
            lines.push(format!("disturbance from t = {}: {:?}", s.t_start, s.value.as_slice()));
        }
        lines.push(format!("integrator: {:?}", self.integrator));
        lines.push("valid".into());
        lines.join("\n")
    }

    /// Runs the scenario.
    pub fn run(&self) -> Result<RunOutput> {
        let traj = match &self.controller {
            ControllerSpec::None => {
                let lp = OpenLoop {
                    system: self.built.system.clone(),
                };
                let x0 = self.initial.to_vector();
                sim::simulate(&lp, &x0, &self.integrator, &self.schedule)?
            }
            ControllerSpec::Ia(gains) => {
                let lp = IaLoop::new(IaController::new(self.built.transform.clone(), gains.clone())?);
                let x0 = lp.initial_state(&self.initial, self.zeta0.clone())?;
                sim::simulate(&lp, &x0, &self.integrator, &self.schedule)?
            }
            ControllerSpec::ReferencePid(gains) => {
                let lp = PidLoop::new(ReferencePid::new(self.built.system.clone(), gains.clone())?);
                let x0 = linalg::concat(&[&self.initial.q, &self.initial.momentum, &self.zeta0]);
                sim::simulate(&lp, &x0, &self.integrator, &self.schedule)?
            }
        };
        info!("scenario finished with {} samples", traj.len());
        let summary = self.summarize(&traj)?;
        Ok(RunOutput { trajectory: traj, summary })
    }

    /// Integrator value the controller should settle at under `d`.
    pub fn expected_zeta(&self, d: &Vector) -> Result<Option<Vector>> {
        Ok(match &self.controller {
            ControllerSpec::None => None,
            ControllerSpec::Ia(g) => Some(IaController::new(self.built.transform.clone(), g.clone())?.equilibrium(d)?.zeta),
            ControllerSpec::ReferencePid(g) => Some(ReferencePid::new(self.built.system.clone(), g.clone())?.alpha(d)?),
        })
    }

    pub fn summarize(&self, traj: &Trajectory) -> Result<Summary> {
        let q_star = self.built.system.q_star();
        let dev: Vec<f64> = (0..traj.len()).map(|k| linalg::max_abs_vec(&(traj.q(k) - &q_star))).collect();
        let band = self.config.outputs.settling_band;
        let hold = self.config.outputs.settling_hold;
        let t_final = self.integrator.t_final();

        let mut segments = Vec::new();
        for (i, seg) in self.schedule.segments().iter().enumerate() {
            if seg.t_start >= t_final {
                break;
            }
            let t_end = self.schedule.segments().get(i + 1).map_or(t_final, |s| s.t_start.min(t_final));
            let k0 = traj.times.partition_point(|t| *t < seg.t_start);
            let k1 = traj.index_at(t_end);
            segments.push(segment_summary(&traj.times, &dev, k0, k1, seg.t_start, t_end, band, hold));
        }

        let mut max_w_increase = f64::NEG_INFINITY;
        for k in 0..traj.len().saturating_sub(1) {
            if self.schedule.segment_index(traj.times[k]) == self.schedule.segment_index(traj.times[k + 1]) {
                max_w_increase = max_w_increase.max(traj.w[k + 1] - traj.w[k]);
            }
        }

        let last = traj.len() - 1;
        let d_final = traj.disturbances[last].clone();
        let final_zeta = (traj.layout.zeta > 0).then(|| traj.zeta(last));
        Ok(Summary {
            system: self.built.id.clone(),
            controller: self.config.controller.kind().into(),
            samples: traj.len(),
            final_time: traj.times[last],
            final_q: traj.q(last),
            final_q_error: dev[last],
            final_momentum_norm: linalg::max_abs_vec(&traj.momentum(last)),
            final_zeta,
            expected_zeta: self.expected_zeta(&d_final)?,
            final_input: traj.inputs[last].clone(),
            final_disturbance: d_final,
            max_w_increase,
            settling_band: band,
            settling_hold: hold,
            segments,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn segment_summary(times: &[f64], dev: &[f64], k0: usize, k1: usize, t_start: f64, t_end: f64, band: f64, hold: f64) -> SegmentSummary {
    let max_deviation = dev[k0..=k1].iter().copied().fold(0.0, f64::max);
    // next_bad[j - k0]: first index >= j in the segment with dev >= band.
    let mut next_bad = vec![None; k1 - k0 + 1];
    let mut upcoming = None;
    for k in (k0..=k1).rev() {
        if dev[k] >= band {
            upcoming = Some(k);
        }
        next_bad[k - k0] = upcoming;
    }
    let mut settled_at = None;
    let mut stays_settled = false;
    for k in k0..=k1 {
        if dev[k] >= band {
            continue;
        }
        let ok = match next_bad[k - k0] {
            Some(b) => times[b] > times[k] + hold,
            None => t_end - times[k] >= hold,
        };
        if ok {
            settled_at = Some(times[k]);
            stays_settled = next_bad[k - k0].is_none();
            break;
        }
    }
    SegmentSummary {
        t_start,
        t_end,
        max_deviation,
        settled_at,
        stays_settled,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSummary {
    pub t_start: f64,
    pub t_end: f64,
    /// `max |q − q*|∞` over the segment.
    pub max_deviation: f64,
    /// First time the deviation enters the band and stays there for the hold
    /// time.
    pub settled_at: Option<f64>,
    /// No later exit from the band before the segment ends.
    pub stays_settled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub system: String,
    pub controller: String,
    pub samples: usize,
    pub final_time: f64,
    pub final_q: Vector,
    pub final_q_error: f64,
    pub final_momentum_norm: f64,
    pub final_zeta: Option<Vector>,
    pub expected_zeta: Option<Vector>,
    pub final_input: Vector,
    pub final_disturbance: Vector,
    /// Largest increase of `W` between consecutive samples sharing a
    /// disturbance segment.
    pub max_w_increase: f64,
    pub settling_band: f64,
    pub settling_hold: f64,
    pub segments: Vec<SegmentSummary>,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system: {}  controller: {}  samples: {}", self.system, self.controller, self.samples)?;
        writeln!(f, "final time: {}", self.final_time)?;
        writeln!(f, "final q: {:?}", self.final_q.as_slice())?;
        writeln!(f, "final |q - q*|inf: {:.6e}", self.final_q_error)?;
        writeln!(f, "final |p|inf: {:.6e}", self.final_momentum_norm)?;
        if let Some(z) = &self.final_zeta {
            writeln!(f, "final zeta: {:?}", z.as_slice())?;
        }
        if let Some(z) = &self.expected_zeta {
            writeln!(f, "equilibrium zeta for final d: {:?}", z.as_slice())?;
        }
        writeln!(f, "final u: {:?}  final d: {:?}", self.final_input.as_slice(), self.final_disturbance.as_slice())?;
        writeln!(f, "max per-step W increase: {:.6e}", self.max_w_increase)?;
        writeln!(f, "settling band |q - q*|inf < {} held {} s", self.settling_band, self.settling_hold)?;
        for s in &self.segments {
            let settled = match s.settled_at {
                Some(t) => format!("settled at t = {t:.3}{}", if s.stays_settled { ", no later deviation" } else { ", leaves band later" }),
                None => "not settled".into(),
            };
            writeln!(f, "segment [{}, {}]: max deviation {:.6e}, {}", s.t_start, s.t_end, s.max_deviation, settled)?;
        }
        Ok(())
    }
}

pub struct RunOutput {
    pub trajectory: Trajectory,
    pub summary: Summary,
}

/// The worked-example scenario as a config value.
pub fn fig1_scenario() -> ScenarioConfig {
    let s = MatrixValue::Scalar;
    ScenarioConfig {
        name: Some("fig1".into()),
        system: SystemSection {
            id: "cart-pendulum".into(),
            params: BTreeMap::from([
                ("g".into(), 9.8),
                ("l".into(), 1.0),
                ("m_c".into(), 1.0),
                ("m_p".into(), 1.0),
                ("k".into(), 1.0),
                ("m22_0".into(), 1.0),
                ("p".into(), 1.0),
                ("k_p".into(), 10.0),
                ("q2_star".into(), 0.0),
            ]),
        },
        controller: ControllerSection::Ia {
            k_i: s(0.05),
            j_c1: Some(s(0.0)),
            r_c1: s(10.0),
            r_c2: s(1.0),
        },
        initial_state: InitialState {
            q: vec![0.0, 1.0],
            momentum: Some(vec![0.0, 0.0]),
            zeta: Some(vec![0.0]),
        },
        disturbance: vec![
            SegmentConfig {
                t_start: 0.0,
                value: vec![0.0],
            },
            SegmentConfig {
                t_start: 30.0,
                value: vec![2.0],
            },
        ],
        integrator: IntegratorSection {
            method: "fixed-rk4".into(),
            step: 1e-3,
            t_final: 60.0,
            ..IntegratorSection::default()
        },
        outputs: OutputsSection {
            csv: Some("fig1.csv".into()),
            gnuplot: Some("fig1.gp".into()),
            settling_band: 0.02,
            settling_hold: 2.0,
        },
    }
}

/// Gnuplot script plotting configuration, integrator, input/disturbance and
/// `W` from a CSV export.
pub fn gnuplot_script(csv_file: &str, layout: sim::Layout) -> String {
    let col = |offset: usize| offset + 1;
    let n = layout.n;
    let q_cols: Vec<String> = (0..n).map(|i| format!("'{csv_file}' using 1:{} with lines title 'q{}'", col(1 + i), i + 1)).collect();
    let z_cols: Vec<String> = (0..layout.zeta).map(|i| format!("'{csv_file}' using 1:{} with lines title 'zeta{}'", col(1 + 2 * n + i), i + 1)).collect();
    let u0 = 1 + 2 * n + layout.zeta;
    let mut ud_cols: Vec<String> = (0..layout.m).map(|i| format!("'{csv_file}' using 1:{} with lines title 'u{}'", col(u0 + i), i + 1)).collect();
    ud_cols.extend((0..layout.m).map(|i| format!("'{csv_file}' using 1:{} with lines title 'd{}'", col(u0 + layout.m + i), i + 1)));
    let w_col = col(u0 + 2 * layout.m + 1);
    let panels = if layout.zeta > 0 { 4 } else { 3 };
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set xlabel 't [s]'\n");
    s.push_str(&format!("set multiplot layout {panels},1\n"));
    s.push_str(&format!("plot {}\n", q_cols.join(", ")));
    if !z_cols.is_empty() {
        s.push_str(&format!("plot {}\n", z_cols.join(", ")));
    }
    s.push_str(&format!("plot {}\n", ud_cols.join(", ")));
    s.push_str(&format!("plot '{csv_file}' using 1:{w_col} with lines title 'W'\n"));
    s.push_str("unset multiplot\n");
    s
}
