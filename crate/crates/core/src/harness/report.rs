//! Run reports and their JSON / CSV encodings.

use std::io::Write;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dynamics::Classification;
use crate::error::{Error, Result};
use crate::harness::config::ScenarioConfig;
use crate::linalg::{c64, CVec};
use crate::maximizer::{MaxMethod, MaximizationResult};
use crate::weakvalue::WeakValueReport;

/// Complex numbers as `[re, im]`.
pub mod complex {
    use super::c64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &c64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<c64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(c64::new(re, im))
    }
}

pub fn vec_to_pairs(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// Wall-clock duration of a run. Not serialized and ignored by equality, so
/// reports stay reproducible.
#[derive(Clone, Copy, Debug, Default)]
pub struct WallTime(pub Duration);

impl PartialEq for WallTime {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    /// Name of the invariant checked.
    pub name: String,
    /// Measured residual; absent when the check could not be evaluated.
    pub residual: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximizationSummary {
    pub method: MaxMethod,
    #[serde(with = "complex")]
    pub amplitude: c64,
    pub achieved_amplitude: f64,
    pub predicted_amplitude: f64,
    pub a_ket: Vec<[f64; 2]>,
    pub b_ket: Vec<[f64; 2]>,
}

impl From<&MaximizationResult> for MaximizationSummary {
    fn from(r: &MaximizationResult) -> Self {
        MaximizationSummary {
            method: r.method,
            amplitude: r.amplitude,
            achieved_amplitude: r.achieved_amplitude,
            predicted_amplitude: r.predicted_amplitude,
            a_ket: vec_to_pairs(&r.a_state.ket),
            b_ket: vec_to_pairs(&r.b_state.ket),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableWeakValues {
    pub observable: usize,
    pub method: MaxMethod,
    pub reports: Vec<WeakValueReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub value: f64,
    pub report: RunReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: ScenarioConfig,
    pub hamiltonian: Vec<Vec<[f64; 2]>>,
    pub classification: Option<Classification>,
    pub eigenvalues: Vec<[f64; 2]>,
    pub cond_p: Option<f64>,
    pub maximizations: Vec<MaximizationSummary>,
    pub weak_values: Vec<ObservableWeakValues>,
    pub checks: Vec<CheckEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scan: Vec<ScanPoint>,
    #[serde(skip)]
    pub wall_time: WallTime,
}

impl RunReport {
    pub fn new(scenario: ScenarioConfig) -> Self {
        RunReport {
            scenario,
            hamiltonian: vec![],
            classification: None,
            eigenvalues: vec![],
            cond_p: None,
            maximizations: vec![],
            weak_values: vec![],
            checks: vec![],
            scan: vec![],
            wall_time: WallTime::default(),
        }
    }

    /// Failed checks, including those of scan points.
    pub fn failed_count(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
            + self.scan.iter().map(|p| p.report.failed_count()).sum::<usize>()
    }

    pub fn all_passed(&self) -> bool {
        self.failed_count() == 0
    }

    /// `0` when every check passed, otherwise the failure count capped at 125.
    pub fn exit_code(&self) -> i32 {
        self.failed_count().min(125) as i32
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub const CSV_HEADER: &'static str = "time,observable,method,re,im,imag_residual,tilde_delta,aa_delta";

    /// One row per (observable, time) of the weak-value section.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.scan.is_empty() {
            out.push_str(Self::CSV_HEADER);
            out.push('\n');
            self.write_csv_rows(&mut out, None);
        } else {
            out.push_str("scan_value,");
            out.push_str(Self::CSV_HEADER);
            out.push('\n');
            for p in &self.scan {
                p.report.write_csv_rows(&mut out, Some(p.value));
            }
        }
        out
    }

    fn write_csv_rows(&self, out: &mut String, prefix: Option<f64>) {
        for set in &self.weak_values {
            let method = serde_json::to_value(set.method).ok().and_then(|v| v.as_str().map(str::to_owned));
            for r in &set.reports {
                if let Some(v) = prefix {
                    out.push_str(&num(v));
                    out.push(',');
                }
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    num(r.time),
                    set.observable,
                    method.as_deref().unwrap_or(""),
                    num(r.value.re),
                    num(r.value.im),
                    num(r.imag_residual),
                    num(r.tilde_delta),
                    r.aa_delta.map(num).unwrap_or_default()
                ));
            }
        }
    }
}

/// Shortest round-trip form, in exponent notation outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown format `{other}` (json|csv)"))),
        }
    }
}

/// Writes `report` to `path`, or to stdout when `path` is `None`.
pub fn emit_report(report: &RunReport, format: ReportFormat, path: Option<&Path>) -> Result<()> {
    let text = match format {
        ReportFormat::Json => {
            let mut s = report.to_json()?;
            s.push('\n');
            s
        }
        ReportFormat::Csv => report.to_csv(),
    };
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
