//! Report records and their two output formats: a flat comma-separated
//! table (deterministic, floats printed with 17 significant digits, no
//! timings) and structured JSON (shortest round-trip floats, with timings).

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map};

use super::config::StudyConfig;
use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Missing,
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Int(i) => Some(i as f64),
            Value::Float(f) => Some(f),
            _ => None,
        }
    }

    fn table_field(&self) -> String {
        match self {
            Value::Missing => String::new(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format!("{f:.16e}"),
            Value::Text(t) => t.clone(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Missing => serde_json::Value::Null,
            Value::Int(i) => json!(i),
            Value::Float(f) => json!(f),
            Value::Text(t) => json!(t),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Missing, Into::into)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pass,
    Fail,
}

impl RunStatus {
    fn as_str(self) -> &'static str {
        match self {
            RunStatus::Pass => "pass",
            RunStatus::Fail => "fail",
        }
    }
}

/// One run. `metrics` is aligned with the report's column list.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub label: String,
    /// Compact JSON of the exact run configuration.
    pub config: String,
    pub status: RunStatus,
    pub message: String,
    pub metrics: Vec<(String, Value)>,
    /// Seconds, from a monotonic clock.
    pub wall_time: f64,
}

impl RunRecord {
    pub fn new(label: impl Into<String>, config: String, columns: &[&str]) -> Self {
        Self {
            label: label.into(),
            config,
            status: RunStatus::Pass,
            message: String::new(),
            metrics: columns.iter().map(|c| (c.to_string(), Value::Missing)).collect(),
            wall_time: 0.0,
        }
    }

    pub fn set(&mut self, column: &str, value: impl Into<Value>) {
        let slot = self
            .metrics
            .iter_mut()
            .find(|(c, _)| c == column)
            .unwrap_or_else(|| panic!("column {column} is not part of this study"));
        slot.1 = value.into();
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        self.metrics.iter().find(|(c, _)| c == column).and_then(|(_, v)| v.as_f64())
    }

    pub fn value(&self, column: &str) -> Option<&Value> {
        self.metrics.iter().find(|(c, _)| c == column).map(|(_, v)| v)
    }

    /// Marks the run failed, keeping the first reason.
    pub fn fail(&mut self, reason: impl Into<String>) {
        if self.status == RunStatus::Pass {
            self.message = reason.into();
        }
        self.status = RunStatus::Fail;
    }

    pub fn passed(&self) -> bool {
        self.status == RunStatus::Pass
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub study: String,
    pub config: StudyConfig,
    pub columns: Vec<String>,
    pub records: Vec<RunRecord>,
    /// Study-level derived quantities.
    pub summary: Vec<(String, Value)>,
    /// Study-level pass/fail checks.
    pub checks: Vec<(String, bool)>,
}

impl ExperimentReport {
    pub fn new(study: &str, config: StudyConfig, columns: &[&str]) -> Self {
        Self {
            study: study.to_string(),
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            records: Vec::new(),
            summary: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(RunRecord::passed) && self.checks.iter().all(|(_, ok)| *ok)
    }

    pub fn summary_value(&self, key: &str) -> Option<&Value> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn record(&self, label: &str) -> Option<&RunRecord> {
        self.records.iter().find(|r| r.label == label)
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["label".to_string(), "status".to_string()];
        h.extend(self.columns.iter().cloned());
        h.push("message".to_string());
        h.push("config".to_string());
        h
    }

    /// Comma-separated table: header row, one line per record in insertion
    /// order, LF line endings, fields quoted only when needed.
    pub fn to_table(&self) -> Result<String, HarnessError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| HarnessError::Io(e.to_string());
        w.write_record(self.header()).map_err(io)?;
        for r in &self.records {
            let mut row = vec![r.label.clone(), r.status.as_str().to_string()];
            row.extend(r.metrics.iter().map(|(_, v)| v.table_field()));
            row.push(r.message.clone());
            row.push(r.config.clone());
            w.write_record(&row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| HarnessError::Io(e.to_string()))
    }

    pub fn to_structured(&self) -> Result<String, HarnessError> {
        let records: Vec<serde_json::Value> = self
            .records
            .iter()
            .map(|r| {
                let metrics: Map<String, serde_json::Value> =
                    r.metrics.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
                let config: serde_json::Value =
                    serde_json::from_str(&r.config).unwrap_or_else(|_| json!(r.config));
                json!({
                    "label": r.label,
                    "status": r.status,
                    "message": r.message,
                    "metrics": metrics,
                    "wall_time_s": r.wall_time,
                    "config": config,
                })
            })
            .collect();
        let summary: Map<String, serde_json::Value> =
            self.summary.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        let checks: Map<String, serde_json::Value> =
            self.checks.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let doc = json!({
            "study": self.study,
            "name": self.config.name,
            "seed": self.config.seed,
            "passed": self.passed(),
            "config": self.config,
            "records": records,
            "summary": summary,
            "checks": checks,
        });
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| HarnessError::Io(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Structured,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Table => "csv",
            Format::Structured => "json",
        }
    }
}

pub fn render(report: &ExperimentReport, format: Format) -> Result<String, HarnessError> {
    match format {
        Format::Table => report.to_table(),
        Format::Structured => report.to_structured(),
    }
}

/// Writes `<dir>/<study>.<csv|json>` and returns its path.
pub fn emit_report(report: &ExperimentReport, format: Format, dir: &Path) -> Result<PathBuf, HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let path = dir.join(format!("{}.{}", report.study, format.extension()));
    let text = render(report, format)?;
    let mut f = std::fs::File::create(&path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> StudyConfig {
        StudyConfig::from_toml_str(
            "[scenario]\nkind = \"chain1d\"\nsubdomains = [2]\nh = 0.25\ncase = \"cubic\"\n",
        )
        .unwrap()
    }

    #[test]
    fn empty_study_is_header_only() {
        let r = ExperimentReport::new("converge", config(), &["h", "h1_error"]);
        assert_eq!(r.to_table().unwrap(), "label,status,h,h1_error,message,config\n");
    }

    #[test]
    fn rows_keep_insertion_order_and_quote_config() {
        let mut r = ExperimentReport::new("converge", config(), &["h", "iterations"]);
        for (label, h) in [("b", 0.5), ("a", 0.25)] {
            let mut rec = RunRecord::new(label, "{\"x\":1,\"y\":2}".into(), &["h", "iterations"]);
            rec.set("h", h);
            rec.set("iterations", 3usize);
            r.records.push(rec);
        }
        r.records[1].fail("stalled, badly");
        let t = r.to_table().unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "b,pass,5.0000000000000000e-1,3,,\"{\"\"x\"\":1,\"\"y\"\":2}\"");
        assert!(lines[2].starts_with("a,fail,2.5000000000000000e-1,3,\"stalled, badly\","));
        assert!(!t.contains('\r'));
        assert!(!r.passed());
    }

    #[test]
    fn floats_round_trip_from_the_table() {
        let v = 0.1 + 0.2;
        let s = Value::Float(v).table_field();
        assert_eq!(s.parse::<f64>().unwrap(), v);
    }

    #[test]
    fn structured_output_nests_records() {
        let mut r = ExperimentReport::new("oracle", config(), &["u_diff"]);
        let mut rec = RunRecord::new("s", "{}".into(), &["u_diff"]);
        rec.set("u_diff", f64::NAN);
        r.records.push(rec);
        r.summary.push(("note".into(), "ok".into()));
        let doc: serde_json::Value = serde_json::from_str(&r.to_structured().unwrap()).unwrap();
        assert_eq!(doc["records"][0]["metrics"]["u_diff"], serde_json::Value::Null);
        assert_eq!(doc["summary"]["note"], "ok");
        assert_eq!(doc["config"]["scenario"]["kind"], "chain1d");
    }
}
