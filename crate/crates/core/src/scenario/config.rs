//! JSON scenario documents and their validation.
//!
//! Node references in files are 1-based; the validated [`ScenarioConfig`]
//! is 0-based throughout.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::accommodation::RankRegime;
use crate::detection::ThresholdPolicy;
use crate::model::{InjectionSignal, Subsystem, Topology};
use crate::{Error, Matrix, Result, Vector};

pub const DEFAULT_HORIZON: usize = 100;

/// Scenarios shipped with the library, addressable by name.
pub const BUILTIN_SCENARIOS: &[(&str, &str)] = &[
    ("v5_fullrank", include_str!("../../scenarios/v5_fullrank.json")),
    ("v5_lowrank", include_str!("../../scenarios/v5_lowrank.json")),
];

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub subsystems: Vec<SubsystemSpec>,
    pub topology: TopologySpec,
    #[serde(default)]
    pub design: DesignSpec,
    #[serde(default)]
    pub attacks: Vec<AttackSpec>,
    #[serde(default)]
    pub detection: DetectionSpec,
    #[serde(default)]
    pub accommodation: AccommodationSpec,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemSpec {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Initial estimate used by both observers; zero by default.
    #[serde(default)]
    pub xhat0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    /// `neighbors[i]` lists the nodes whose state enters node `i + 1`.
    pub neighbors: Vec<Vec<usize>>,
    /// Coupling used for every edge without an explicit entry.
    #[serde(default)]
    pub coupling_default: Option<Rows>,
    #[serde(default)]
    pub couplings: Vec<CouplingSpec>,
}

/// `A_ij` with `i = to`, `j = from`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub to: usize,
    pub from: usize,
    pub matrix: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    #[serde(default = "half")]
    pub controller_rho: f64,
    /// Target for the distributed observer.
    #[serde(default = "half")]
    pub observer_rho: f64,
    #[serde(default = "half")]
    pub uio_rho: f64,
    /// Explicit controller poles, applied to every node.
    #[serde(default)]
    pub controller_poles: Option<Vec<f64>>,
}

impl Default for DesignSpec {
    fn default() -> Self {
        Self {
            controller_rho: 0.5,
            observer_rho: 0.5,
            uio_rho: 0.5,
            controller_poles: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub target: usize,
    pub onset: usize,
    pub signal: InjectionSignal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdSetting {
    Explicit(Vec<f64>),
    Keyword(String),
}

impl Default for ThresholdSetting {
    fn default() -> Self {
        ThresholdSetting::Keyword("calibrate".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSpec {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub thresholds: ThresholdSetting,
    #[serde(default = "two")]
    pub safety_factor: f64,
    #[serde(default = "floor")]
    pub floor: f64,
    #[serde(default = "ten")]
    pub calibration_start: usize,
}

impl Default for DetectionSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            thresholds: ThresholdSetting::default(),
            safety_factor: 2.0,
            floor: 1e-6,
            calibration_start: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccommodationSpec {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Reconstruction window `r`; defaults to the state dimension.
    #[serde(default)]
    pub window: Option<usize>,
    /// Broadcast `x^d + x~` to the neighbours' controllers once active.
    #[serde(default = "yes")]
    pub share_corrected_estimate: bool,
    /// Expected LS regime at every attacked node: `"full"` or `"low"`.
    #[serde(default)]
    pub regime: Option<String>,
}

impl Default for AccommodationSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            window: None,
            share_corrected_estimate: true,
            regime: None,
        }
    }
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}
fn half() -> f64 {
    0.5
}
fn two() -> f64 {
    2.0
}
fn floor() -> f64 {
    1e-6
}
fn ten() -> usize {
    10
}
fn yes() -> bool {
    true
}

/// Validated attack, 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Attack {
    pub target: usize,
    pub onset: usize,
    pub signal: InjectionSignal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Thresholds {
    Calibrate,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionConfig {
    pub enabled: bool,
    pub thresholds: Thresholds,
    pub policy: ThresholdPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccommodationConfig {
    pub enabled: bool,
    pub window: Option<usize>,
    pub share_corrected_estimate: bool,
    pub regime: Option<RankRegime>,
}

/// Validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub description: String,
    pub horizon: usize,
    pub subsystems: Vec<Subsystem>,
    pub initial_estimates: Vec<Vector>,
    pub topology: Topology,
    pub design: DesignSpec,
    pub attacks: Vec<Attack>,
    pub detection: DetectionConfig,
    pub accommodation: AccommodationConfig,
    pub output: Option<String>,
}

impl ScenarioConfig {
    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn attack_on(&self, i: usize) -> Option<&Attack> {
        self.attacks.iter().find(|a| a.target == i)
    }

    /// Same scenario with every attack removed.
    pub fn attack_free(&self) -> Self {
        let mut out = self.clone();
        out.attacks.clear();
        out
    }

    /// First onset, or the horizon when attack free.
    pub fn first_onset(&self) -> usize {
        self.attacks.iter().map(|a| a.onset).min().unwrap_or(self.horizon)
    }

    /// Change the horizon; fails if an onset falls outside it.
    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        self.horizon = horizon;
        check_onsets(&self.attacks, horizon)?;
        Ok(self)
    }
}

fn check_onsets(attacks: &[Attack], horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::config("horizon", "must be positive"));
    }
    for (idx, a) in attacks.iter().enumerate() {
        if a.onset >= horizon {
            return Err(Error::config(
                format!("attacks[{idx}].onset"),
                format!("onset {} is not before the horizon {horizon}", a.onset),
            ));
        }
    }
    Ok(())
}

fn matrix(rows: &Rows, path: &str, cols_hint: Option<usize>) -> Result<Matrix> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, cols_hint.unwrap_or(0)));
    }
    let cols = rows[0].len();
    if let Some(r) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::dimension(
            format!("{path}[{r}]"),
            format!("row has {} entries, first row has {cols}", rows[r].len()),
        ));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::config(path, "entries must be finite"));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn vector(v: &Option<Vec<f64>>, n: usize, path: &str) -> Result<Vector> {
    match v {
        None => Ok(Vector::zeros(n)),
        Some(v) if v.len() != n => Err(Error::dimension(
            path,
            format!("has {} entries, state dimension is {n}", v.len()),
        )),
        Some(v) if v.iter().any(|x| !x.is_finite()) => Err(Error::config(path, "entries must be finite")),
        Some(v) => Ok(Vector::from_column_slice(v)),
    }
}

fn node_index(one_based: usize, n: usize, path: &str) -> Result<usize> {
    if one_based == 0 || one_based > n {
        return Err(Error::config(
            path,
            format!("node {one_based} out of range 1..={n}"),
        ));
    }
    Ok(one_based - 1)
}

fn check_rho(value: f64, path: &str) -> Result<()> {
    if !(value > 0.0 && value < 1.0) {
        return Err(Error::config(path, format!("target radius {value} must lie in (0, 1)")));
    }
    Ok(())
}

impl ScenarioFile {
    pub fn validate(&self) -> Result<ScenarioConfig> {
        let n_nodes = self.subsystems.len();
        if n_nodes == 0 {
            return Err(Error::config("subsystems", "at least one subsystem is required"));
        }
        let mut subsystems = Vec::with_capacity(n_nodes);
        let mut initial_estimates = Vec::with_capacity(n_nodes);
        for (i, s) in self.subsystems.iter().enumerate() {
            let path = format!("subsystems[{i}]");
            let a = matrix(&s.a, &format!("{path}.a"), None)?;
            let n = a.nrows();
            let b = matrix(&s.b, &format!("{path}.b"), None)?;
            let c = matrix(&s.c, &format!("{path}.c"), Some(n))?;
            let x0 = vector(&s.x0, n, &format!("{path}.x0"))?;
            initial_estimates.push(vector(&s.xhat0, n, &format!("{path}.xhat0"))?);
            subsystems.push(Subsystem::new(i, a, b, c, x0)?);
        }
        let dims: Vec<usize> = subsystems.iter().map(Subsystem::state_dim).collect();
        let topology = self.topology_for(&dims)?;

        let d = &self.design;
        check_rho(d.controller_rho, "design.controller_rho")?;
        check_rho(d.observer_rho, "design.observer_rho")?;
        check_rho(d.uio_rho, "design.uio_rho")?;
        if let Some(poles) = &d.controller_poles {
            if poles.iter().any(|p| !(p.abs() < 1.0)) {
                return Err(Error::config("design.controller_poles", "poles must lie inside the unit circle"));
            }
        }

        let mut attacks = Vec::with_capacity(self.attacks.len());
        for (idx, a) in self.attacks.iter().enumerate() {
            let path = format!("attacks[{idx}]");
            let target = node_index(a.target, n_nodes, &format!("{path}.target"))?;
            if attacks.iter().any(|x: &Attack| x.target == target) {
                return Err(Error::config(
                    format!("{path}.target"),
                    format!("node {} is attacked twice", a.target),
                ));
            }
            a.signal
                .validate(subsystems[target].input_dim())
                .map_err(|m| Error::config(format!("{path}.signal"), m))?;
            attacks.push(Attack {
                target,
                onset: a.onset,
                signal: a.signal.clone(),
            });
        }
        check_onsets(&attacks, self.horizon)?;

        let det = &self.detection;
        let thresholds = match &det.thresholds {
            ThresholdSetting::Keyword(k) if k == "calibrate" => Thresholds::Calibrate,
            ThresholdSetting::Keyword(k) => {
                return Err(Error::config(
                    "detection.thresholds",
                    format!("expected \"calibrate\" or a list of numbers, got \"{k}\""),
                ))
            }
            ThresholdSetting::Explicit(v) => {
                if v.len() != n_nodes {
                    return Err(Error::dimension(
                        "detection.thresholds",
                        format!("{} thresholds for {n_nodes} subsystems", v.len()),
                    ));
                }
                if v.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
                    return Err(Error::config("detection.thresholds", "thresholds must be finite and non-negative"));
                }
                Thresholds::Explicit(v.clone())
            }
        };
        if !(det.safety_factor >= 1.0) {
            return Err(Error::config("detection.safety_factor", "must be at least 1"));
        }
        if !(det.floor >= 0.0) || !det.floor.is_finite() {
            return Err(Error::config("detection.floor", "must be finite and non-negative"));
        }

        let acc = &self.accommodation;
        let regime = match acc.regime.as_deref() {
            None => None,
            Some("full") => Some(RankRegime::Full),
            Some("low") => Some(RankRegime::Low),
            Some(other) => {
                return Err(Error::config(
                    "accommodation.regime",
                    format!("expected \"full\" or \"low\", got \"{other}\""),
                ))
            }
        };

        Ok(ScenarioConfig {
            name: self.name.clone().unwrap_or_else(|| "scenario".into()),
            description: self.description.clone().unwrap_or_default(),
            horizon: self.horizon,
            subsystems,
            initial_estimates,
            topology,
            design: d.clone(),
            attacks,
            detection: DetectionConfig {
                enabled: det.enabled,
                thresholds,
                policy: ThresholdPolicy {
                    safety_factor: det.safety_factor,
                    floor: det.floor,
                    window_start: det.calibration_start,
                },
            },
            accommodation: AccommodationConfig {
                enabled: acc.enabled,
                window: acc.window,
                share_corrected_estimate: acc.share_corrected_estimate,
                regime,
            },
            output: self.output.clone(),
        })
    }

    fn topology_for(&self, dims: &[usize]) -> Result<Topology> {
        let n_nodes = dims.len();
        let spec = &self.topology;
        if spec.neighbors.len() != n_nodes {
            return Err(Error::dimension(
                "topology.neighbors",
                format!("{} neighbour lists for {n_nodes} subsystems", spec.neighbors.len()),
            ));
        }
        let mut neighbors = Vec::with_capacity(n_nodes);
        for (i, list) in spec.neighbors.iter().enumerate() {
            let mut out = Vec::with_capacity(list.len());
            for (k, &j) in list.iter().enumerate() {
                out.push(node_index(j, n_nodes, &format!("topology.neighbors[{i}][{k}]"))?);
            }
            neighbors.push(out);
        }
        let default = spec
            .coupling_default
            .as_ref()
            .map(|m| matrix(m, "topology.coupling_default", None))
            .transpose()?;

        let mut explicit: Vec<Vec<Option<Matrix>>> = neighbors.iter().map(|l| vec![None; l.len()]).collect();
        for (idx, c) in spec.couplings.iter().enumerate() {
            let path = format!("topology.couplings[{idx}]");
            let i = node_index(c.to, n_nodes, &format!("{path}.to"))?;
            let j = node_index(c.from, n_nodes, &format!("{path}.from"))?;
            let Some(slot) = neighbors[i].iter().position(|&x| x == j) else {
                return Err(Error::config(
                    path,
                    format!("node {} is not a neighbour of node {}", c.from, c.to),
                ));
            };
            if explicit[i][slot].is_some() {
                return Err(Error::config(path, format!("coupling ({}, {}) given twice", c.to, c.from)));
            }
            explicit[i][slot] = Some(matrix(&c.matrix, &format!("{path}.matrix"), None)?);
        }
        let mut couplings = Vec::with_capacity(n_nodes);
        for (i, row) in explicit.into_iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (slot, m) in row.into_iter().enumerate() {
                let j = neighbors[i][slot];
                let m = match (m, &default) {
                    (Some(m), _) => m,
                    (None, Some(d)) => d.clone(),
                    (None, None) => {
                        return Err(Error::config(
                            "topology.couplings",
                            format!("missing coupling ({}, {}) and no coupling_default", i + 1, j + 1),
                        ))
                    }
                };
                out.push(m);
            }
            couplings.push(out);
        }
        Topology::new(neighbors, couplings, dims)
    }
}

/// Parse and validate a scenario document; `origin` labels error messages.
pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { origin.to_string() } else { path };
        Error::config(path, e.into_inner().to_string())
    })?;
    file.validate()
}

/// Load a scenario from a file path or a built-in name.
pub fn load_scenario(source: &str) -> Result<ScenarioConfig> {
    if let Some((_, text)) = BUILTIN_SCENARIOS.iter().find(|(name, _)| *name == source) {
        return parse_scenario(text, source);
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::config(
            source,
            format!("cannot read scenario ({e}); built-in names are {}", builtin_names().join(", ")),
        )
    })?;
    parse_scenario(&text, source)
}

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN_SCENARIOS.iter().map(|(n, _)| *n).collect()
}
