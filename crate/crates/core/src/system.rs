//! System files: parsing, validation and the bundled example systems.
//!
//! A system file is JSON with `"schema_version": 1`, a `name`, a `model`
//! tagged by `kind` (`cutsets`, `threshold` or `dcopf`) and optional
//! `reliability_overrides` mapping a component label or 1-based index to a
//! replacement failure probability. See `data/` for examples.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dcopf::{Bus, DcOpfEvaluator, Generator, Line, NetworkModel};
use crate::evaluator::{CutsetOracle, Evaluator, ThresholdOracle};
use crate::state::{ComponentId, ComponentReliability, SystemState};

pub const SCHEMA_VERSION: u32 = 1;

/// Bundled systems as `(name, file contents)`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("sys5", include_str!("../data/sys5.json")),
    ("test3", include_str!("../data/test3.json")),
    ("threshold8", include_str!("../data/threshold8.json")),
    ("threshold10", include_str!("../data/threshold10.json")),
    ("threshold12", include_str!("../data/threshold12.json")),
    ("rbts", include_str!("../data/rbts.json")),
    ("rts79", include_str!("../data/rts79.json")),
];

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { origin: String, found: u32 },
    #[error("{origin}: {message}")]
    Invalid { origin: String, message: String },
    #[error("unknown bundled system `{0}`")]
    UnknownBundled(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub reliability_overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlainComponent {
    #[serde(default)]
    pub id: Option<String>,
    pub failure_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityComponent {
    #[serde(default)]
    pub id: Option<String>,
    pub capacity: f64,
    pub failure_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Cutsets {
        components: Vec<PlainComponent>,
        /// 1-based component indices.
        cut_sets: Vec<Vec<usize>>,
    },
    Threshold {
        components: Vec<CapacityComponent>,
        demand: f64,
    },
    Dcopf {
        buses: Vec<Bus>,
        generators: Vec<Generator>,
        lines: Vec<Line>,
    },
}

/// A validated system ready to assess.
pub enum Model {
    Cutsets(CutsetOracle),
    Threshold(ThresholdOracle),
    DcOpf(DcOpfEvaluator),
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Model({})", self.evaluator().kind())
    }
}

impl Model {
    pub fn evaluator(&self) -> &dyn Evaluator {
        match self {
            Model::Cutsets(o) => o,
            Model::Threshold(o) => o,
            Model::DcOpf(o) => o,
        }
    }
}

#[derive(Debug)]
pub struct System {
    pub name: String,
    pub description: Option<String>,
    pub model: Model,
    pub reliability: ComponentReliability,
    /// One label per component, in id order.
    pub labels: Vec<String>,
}

impl System {
    pub fn evaluator(&self) -> &dyn Evaluator {
        self.model.evaluator()
    }

    pub fn components(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, id: ComponentId) -> &str {
        &self.labels[id.get() - 1]
    }

    /// `{G1,L3}`-style rendering of a state using component labels.
    pub fn describe(&self, s: &SystemState) -> String {
        let names: Vec<&str> = s.ids().map(|c| self.label(c)).collect();
        format!("{{{}}}", names.join(","))
    }
}

fn invalid(origin: &str, message: impl Into<String>) -> SystemError {
    SystemError::Invalid {
        origin: origin.to_string(),
        message: message.into(),
    }
}

fn check_prob(origin: &str, what: &str, p: f64) -> Result<(), SystemError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(
            origin,
            format!("{what}: failure_prob {p} outside [0, 1]"),
        ));
    }
    Ok(())
}

fn labels_from(ids: impl Iterator<Item = Option<String>>) -> Vec<String> {
    ids.enumerate()
        .map(|(i, id)| id.unwrap_or_else(|| (i + 1).to_string()))
        .collect()
}

impl SystemFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, SystemError> {
        // check the version first so old files get a clear message
        #[derive(Deserialize)]
        struct Probe {
            schema_version: Option<u32>,
        }
        let parse_err = |e: serde_json::Error| SystemError::Parse {
            origin: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        };
        let probe: Probe = serde_json::from_str(text).map_err(parse_err)?;
        match probe.schema_version {
            Some(SCHEMA_VERSION) => {}
            Some(found) => {
                return Err(SystemError::SchemaVersion {
                    origin: origin.to_string(),
                    found,
                })
            }
            None => return Err(invalid(origin, "missing field `schema_version`")),
        }
        serde_json::from_str(text).map_err(parse_err)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system files serialize")
    }

    /// Validates and builds the evaluator.
    pub fn build(&self, origin: &str) -> Result<System, SystemError> {
        let (model, mut probs, labels) = match &self.model {
            ModelSpec::Cutsets {
                components,
                cut_sets,
            } => {
                let n = components.len();
                let mut states = Vec::with_capacity(cut_sets.len());
                for (k, c) in cut_sets.iter().enumerate() {
                    if c.is_empty() {
                        return Err(invalid(origin, format!("cut set #{} is empty", k + 1)));
                    }
                    let s = SystemState::from_ids(n, c.iter().copied())
                        .map_err(|e| invalid(origin, format!("cut set #{}: {e}", k + 1)))?;
                    states.push(s);
                }
                let oracle =
                    CutsetOracle::new(n, states).map_err(|e| invalid(origin, e.to_string()))?;
                (
                    Model::Cutsets(oracle),
                    components
                        .iter()
                        .map(|c| c.failure_prob)
                        .collect::<Vec<_>>(),
                    labels_from(components.iter().map(|c| c.id.clone())),
                )
            }
            ModelSpec::Threshold { components, demand } => {
                let oracle =
                    ThresholdOracle::new(components.iter().map(|c| c.capacity).collect(), *demand)
                        .map_err(|e| invalid(origin, e.to_string()))?;
                (
                    Model::Threshold(oracle),
                    components.iter().map(|c| c.failure_prob).collect(),
                    labels_from(components.iter().map(|c| c.id.clone())),
                )
            }
            ModelSpec::Dcopf {
                buses,
                generators,
                lines,
            } => {
                let net = NetworkModel {
                    buses: buses.clone(),
                    generators: generators.clone(),
                    lines: lines.clone(),
                };
                let ev = DcOpfEvaluator::new(net).map_err(|e| invalid(origin, e.to_string()))?;
                let labels = generators
                    .iter()
                    .map(|g| g.id.clone())
                    .chain(lines.iter().map(|l| l.id.clone()))
                    .collect();
                let probs = generators
                    .iter()
                    .map(|g| g.failure_prob)
                    .chain(lines.iter().map(|l| l.failure_prob))
                    .collect();
                (Model::DcOpf(ev), probs, labels)
            }
        };
        if labels.is_empty() {
            return Err(invalid(origin, "system has no components"));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(invalid(origin, format!("duplicate component id `{l}`")));
            }
        }
        for (i, p) in probs.iter().enumerate() {
            check_prob(origin, &format!("component {}", labels[i]), *p)?;
        }
        for (key, p) in &self.reliability_overrides {
            let index = labels
                .iter()
                .position(|l| l == key)
                .or_else(|| {
                    key.parse::<usize>()
                        .ok()
                        .filter(|&i| (1..=labels.len()).contains(&i))
                        .map(|i| i - 1)
                })
                .ok_or_else(|| {
                    invalid(origin, format!("override for unknown component `{key}`"))
                })?;
            check_prob(origin, &format!("override {key}"), *p)?;
            probs[index] = *p;
        }
        let reliability =
            ComponentReliability::new(probs).map_err(|e| invalid(origin, e.to_string()))?;
        Ok(System {
            name: self.name.clone(),
            description: self.description.clone(),
            model,
            reliability,
            labels,
        })
    }
}

/// Parses and validates system JSON.
pub fn parse_system(text: &str, origin: &str) -> Result<System, SystemError> {
    SystemFile::parse(text, origin)?.build(origin)
}

pub fn load_system(path: impl AsRef<Path>) -> Result<System, SystemError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SystemError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_system(&text, &path.display().to_string())
}

/// A bundled system by name (`sys5`, `test3`, `rbts`, ...).
pub fn bundled(name: &str) -> Result<System, SystemError> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| SystemError::UnknownBundled(name.to_string()))?;
    parse_system(text, &format!("{name}.json"))
}

/// Loads `name` as a path if it exists, else as a bundled system name.
pub fn resolve_system(name: &str) -> Result<System, SystemError> {
    let path = Path::new(name);
    if path.exists() {
        return load_system(path);
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(name);
    match bundled(stem) {
        Ok(s) => Ok(s),
        Err(SystemError::UnknownBundled(_)) => Err(SystemError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "no such file and no bundled system of that name",
            ),
        }),
        Err(e) => Err(e),
    }
}
