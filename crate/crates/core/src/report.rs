//! Serializable run reports and their CSV tables.
//!
//! A [`Report`] is a flat, storage-friendly snapshot of one run. All numbers
//! are plain probabilities; percentages only appear in [`Report::render`].
//! Nothing that depends on scheduling (worker count, wall time unless asked
//! for) is recorded, so replays produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{McsPoint, McsRun, McsSettings, OracleResult, SeRun};
use crate::csilp::{Criteria, CsilpRun, TracePoint};
use crate::state::SystemState;
use crate::system::System;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{origin}: line {line}, column {column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(
        "{origin}: unsupported report schema_version {found} (expected {REPORT_SCHEMA_VERSION})"
    )]
    SchemaVersion { origin: String, found: u32 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Csilp,
    Enumeration,
    MonteCarlo,
    Oracle,
}

impl Method {
    pub fn title(self) -> &'static str {
        match self {
            Method::Csilp => "critical-state identification (lattice partition)",
            Method::Enumeration => "state enumeration",
            Method::MonteCarlo => "Monte Carlo simulation",
            Method::Oracle => "exhaustive enumeration",
        }
    }
}

/// Stopping settings as recorded in a report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportCriteria {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evaluations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_level: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tight_upper: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcs: Option<McsSettings>,
}

impl From<Criteria> for ReportCriteria {
    fn from(c: Criteria) -> Self {
        ReportCriteria {
            max_evaluations: c.max_evaluations,
            min_gap: c.min_gap,
            max_level: c.max_level,
            ..Default::default()
        }
    }
}

/// One row of the critical-state table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalRow {
    pub state: Vec<usize>,
    pub labels: Vec<String>,
    pub level: usize,
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_lolp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lolp_at_identification: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluations_at_identification: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub method: Method,
    pub system: String,
    pub components: usize,
    pub evaluator: String,
    pub criteria: ReportCriteria,
    /// Final point value: the lower bound for bounding methods, the
    /// estimate for Monte Carlo, the exact value for the oracle.
    pub lolp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lolp_lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lolp_upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub evaluation_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
    pub stop_reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels_resolved: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_lattice_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_records: Option<Vec<CriticalRow>>,
    /// Minimal cut sets (oracle only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_sets: Option<Vec<CriticalRow>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TracePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failures: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_of_variation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub convergence: Vec<McsPoint>,
}

fn bare_row(system: &System, s: &SystemState) -> CriticalRow {
    CriticalRow {
        state: s.id_vec(),
        labels: s.ids().map(|c| system.label(c).to_string()).collect(),
        level: s.level(),
        probability: system.reliability.state_probability(s),
        shed: None,
        risk: None,
        delta_lolp: None,
        lolp_at_identification: None,
        evaluations_at_identification: None,
    }
}

impl Report {
    fn base(system: &System, method: Method, criteria: ReportCriteria, lolp: f64) -> Self {
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            method,
            system: system.name.clone(),
            components: system.components(),
            evaluator: system.evaluator().kind().to_string(),
            criteria,
            lolp,
            lolp_lower: None,
            lolp_upper: None,
            gap: None,
            evaluation_count: 0,
            wall_time_ms: None,
            stop_reason: String::new(),
            aborted: None,
            levels_resolved: None,
            failure_lattice_count: None,
            critical_records: None,
            cut_sets: None,
            trace: Vec::new(),
            samples: None,
            failures: None,
            coefficient_of_variation: None,
            rng: None,
            convergence: Vec::new(),
        }
    }

    pub fn from_csilp(
        system: &System,
        run: &CsilpRun,
        criteria: Criteria,
        tight_upper: bool,
        wall_time_ms: Option<f64>,
    ) -> Self {
        let mut c = ReportCriteria::from(criteria);
        c.tight_upper = tight_upper;
        let mut r = Report::base(system, Method::Csilp, c, run.lolp());
        r.lolp_lower = Some(run.bounds.lower);
        r.lolp_upper = Some(run.bounds.upper);
        r.gap = Some(run.gap());
        r.evaluation_count = run.evaluations;
        r.wall_time_ms = wall_time_ms;
        r.stop_reason = run.stop_reason.to_string();
        r.aborted = run.aborted.clone();
        r.levels_resolved = Some(run.levels_resolved);
        r.failure_lattice_count = Some(run.ledger.failure_lattices.len());
        r.critical_records = Some(
            run.records
                .iter()
                .map(|rec| CriticalRow {
                    shed: Some(rec.shed),
                    risk: Some(rec.risk),
                    delta_lolp: Some(rec.delta_lolp),
                    lolp_at_identification: Some(rec.lolp_at_identification),
                    evaluations_at_identification: Some(rec.evaluations_at_identification),
                    ..bare_row(system, &rec.state)
                })
                .collect(),
        );
        r.trace = run.ledger.trace.clone();
        r
    }

    pub fn from_enumeration(
        system: &System,
        run: &SeRun,
        criteria: Criteria,
        wall_time_ms: Option<f64>,
    ) -> Self {
        let mut r = Report::base(system, Method::Enumeration, criteria.into(), run.lolp());
        r.lolp_lower = Some(run.bounds.lower);
        r.lolp_upper = Some(run.bounds.upper);
        r.gap = Some(run.bounds.gap());
        r.evaluation_count = run.evaluations;
        r.wall_time_ms = wall_time_ms;
        r.stop_reason = run.stop_reason.to_string();
        r.aborted = run.aborted.clone();
        r.levels_resolved = Some(run.levels_completed);
        r.failures = Some(run.failures);
        r.trace = run.trace.clone();
        r
    }

    pub fn from_mcs(
        system: &System,
        run: &McsRun,
        settings: McsSettings,
        wall_time_ms: Option<f64>,
    ) -> Self {
        let criteria = ReportCriteria {
            mcs: Some(settings),
            ..Default::default()
        };
        let mut r = Report::base(system, Method::MonteCarlo, criteria, run.estimate);
        r.evaluation_count = run.evaluations;
        r.wall_time_ms = wall_time_ms;
        r.stop_reason = serde_json::to_value(run.stop)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        r.aborted = run.aborted.clone();
        r.samples = Some(run.samples);
        r.failures = Some(run.failures);
        r.coefficient_of_variation = run.coefficient_of_variation;
        r.rng = Some(run.rng.to_string());
        r.convergence = run.convergence.clone();
        r
    }

    pub fn from_oracle(system: &System, res: &OracleResult, wall_time_ms: Option<f64>) -> Self {
        let mut r = Report::base(
            system,
            Method::Oracle,
            ReportCriteria::default(),
            res.lolp_exact,
        );
        r.lolp_lower = Some(res.lolp_exact);
        r.lolp_upper = Some(res.lolp_exact);
        r.gap = Some(0.0);
        r.evaluation_count = res.evaluations;
        r.wall_time_ms = wall_time_ms;
        r.stop_reason = "completed".to_string();
        r.failures = Some(res.failures);
        r.cut_sets = Some(
            res.minimal_cut_sets
                .iter()
                .map(|s| bare_row(system, s))
                .collect(),
        );
        r
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, ReportError> {
        #[derive(Deserialize)]
        struct Probe {
            schema_version: Option<u32>,
        }
        let parse_err = |e: serde_json::Error| ReportError::Parse {
            origin: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        };
        let probe: Probe = serde_json::from_str(text).map_err(parse_err)?;
        match probe.schema_version {
            Some(REPORT_SCHEMA_VERSION) => {}
            Some(found) => {
                return Err(ReportError::SchemaVersion {
                    origin: origin.to_string(),
                    found,
                })
            }
            None => {
                return Err(ReportError::Parse {
                    origin: origin.to_string(),
                    line: 1,
                    column: 1,
                    message: "missing field `schema_version`".to_string(),
                })
            }
        }
        serde_json::from_str(text).map_err(parse_err)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Report::from_json(&text, &path.display().to_string())
    }

    /// The critical-state table: CSILP records or oracle cut sets.
    pub fn critical_table(&self) -> Option<&[CriticalRow]> {
        self.critical_records
            .as_deref()
            .or(self.cut_sets.as_deref())
    }

    /// `evals,lower,upper,gap,elapsed_ms`; `elapsed_ms` is empty unless timed.
    pub fn trace_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["evals", "lower", "upper", "gap", "elapsed_ms"])?;
        for t in &self.trace {
            w.write_record([
                t.evaluations.to_string(),
                t.lower.to_string(),
                t.upper.to_string(),
                t.gap().to_string(),
                t.elapsed_ms.map(|x| x.to_string()).unwrap_or_default(),
            ])?;
        }
        finish(w)
    }

    pub fn critical_csv(&self) -> Result<String, ReportError> {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "index",
            "state",
            "labels",
            "level",
            "probability",
            "shed",
            "risk",
            "delta_lolp",
            "lolp_at_identification",
            "evals_at_identification",
        ])?;
        for (i, row) in self.critical_table().unwrap_or(&[]).iter().enumerate() {
            let ids: Vec<String> = row.state.iter().map(usize::to_string).collect();
            w.write_record([
                (i + 1).to_string(),
                ids.join(" "),
                row.labels.join(" "),
                row.level.to_string(),
                row.probability.to_string(),
                opt(row.shed),
                opt(row.risk),
                opt(row.delta_lolp),
                opt(row.lolp_at_identification),
                row.evaluations_at_identification
                    .map(|x| x.to_string())
                    .unwrap_or_default(),
            ])?;
        }
        finish(w)
    }

    pub fn convergence_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["samples", "estimate", "cov"])?;
        for p in &self.convergence {
            w.write_record([
                p.samples.to_string(),
                p.estimate.to_string(),
                p.coefficient_of_variation
                    .map(|x| x.to_string())
                    .unwrap_or_default(),
            ])?;
        }
        finish(w)
    }

    /// Writes `report.json`, or the CSV tables that apply to this method.
    pub fn write_to(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>, ReportError> {
        fs::create_dir_all(dir).map_err(|source| ReportError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut files = Vec::new();
        match format {
            OutputFormat::Json => files.push(("report.json", self.to_json())),
            OutputFormat::Csv => {
                if self.method == Method::MonteCarlo {
                    files.push(("convergence.csv", self.convergence_csv()?));
                } else {
                    files.push(("trace.csv", self.trace_csv()?));
                }
                if self.critical_table().is_some() {
                    files.push(("critical_states.csv", self.critical_csv()?));
                }
            }
        }
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|source| ReportError::Io {
                path: path.clone(),
                source,
            })?;
            written.push(path);
        }
        Ok(written)
    }

    /// Human-readable summary. LOLP values are shown in percent here only.
    pub fn render(&self) -> String {
        let pct = |x: f64| format!("{:.10}%", x * 100.0);
        let mut o = String::new();
        let _ = writeln!(
            o,
            "system      {} ({} components, {})",
            self.system, self.components, self.evaluator
        );
        let _ = writeln!(o, "method      {}", self.method.title());
        let _ = writeln!(o, "LOLP        {}", pct(self.lolp));
        if let (Some(lo), Some(hi)) = (self.lolp_lower, self.lolp_upper) {
            let _ = writeln!(o, "bounds      [{}, {}]", pct(lo), pct(hi));
        }
        if let Some(g) = self.gap {
            let _ = writeln!(o, "gap         {}", pct(g));
        }
        if let Some(cov) = self.coefficient_of_variation {
            let _ = writeln!(o, "cov         {cov:.6}");
        }
        if let Some(n) = self.samples {
            let _ = writeln!(o, "samples     {n}");
        }
        let _ = writeln!(o, "evaluations {}", self.evaluation_count);
        if let Some(t) = self.wall_time_ms {
            let _ = writeln!(o, "wall time   {t:.1} ms");
        }
        if let Some(n) = self.failure_lattice_count {
            let _ = writeln!(o, "failure lattices {n}");
        }
        let _ = writeln!(o, "stopped     {}", self.stop_reason);
        if let Some(a) = &self.aborted {
            let _ = writeln!(o, "ABORTED     {a}");
        }
        if let Some(rows) = self.critical_table() {
            let heading = if self.cut_sets.is_some() {
                "minimal cut sets"
            } else {
                "critical states"
            };
            let _ = writeln!(o, "\n{heading} ({})", rows.len());
            let _ = writeln!(
                o,
                "{:>4}  {:<24} {:>5} {:>12} {:>12} {:>14} {:>8}",
                "#", "state", "level", "risk", "dLOLP(%)", "LOLP(%)", "evals"
            );
            for (i, r) in rows.iter().enumerate() {
                let f = |x: Option<f64>, scale: f64| {
                    x.map(|v| format!("{:.4e}", v * scale))
                        .unwrap_or_else(|| "-".into())
                };
                let _ = writeln!(
                    o,
                    "{:>4}  {:<24} {:>5} {:>12} {:>12} {:>14} {:>8}",
                    i + 1,
                    format!("{{{}}}", r.labels.join(",")),
                    r.level,
                    f(r.risk, 1.0),
                    f(r.delta_lolp, 100.0),
                    r.lolp_at_identification
                        .map(|v| format!("{:.7}", v * 100.0))
                        .unwrap_or_else(|| "-".into()),
                    r.evaluations_at_identification
                        .map(|v| v.to_string())
                        .unwrap_or_else(|| "-".into()),
                );
            }
        }
        o
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}
