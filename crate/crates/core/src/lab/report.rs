use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Result;
use crate::scale::ScaleParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Observational,
}

impl Verdict {
    pub fn from_check(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Observational => "OBSERVATIONAL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub name: String,
    pub value: f64,
    pub stderr: Option<f64>,
}

/// The prediction a report is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicted {
    pub description: String,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment_id: String,
    pub params: Map<String, Value>,
    pub seed: u64,
    pub results: Vec<ResultRow>,
    pub predicted: Option<Predicted>,
    pub citation: String,
    pub verdict: Verdict,
    pub wall_time_s: Option<f64>,
}

impl ExperimentReport {
    pub fn new(id: &str, seed: u64, citation: &str) -> Self {
        ExperimentReport {
            experiment_id: id.into(),
            params: Map::new(),
            seed,
            results: Vec::new(),
            predicted: None,
            citation: citation.into(),
            verdict: Verdict::Observational,
            wall_time_s: None,
        }
    }

    pub fn scale(mut self, s: &ScaleParams) -> Self {
        if let Ok(Value::Object(m)) = serde_json::to_value(s) {
            self.params.extend(m);
        }
        self
    }

    pub fn param(mut self, k: &str, v: impl Into<Value>) -> Self {
        self.params.insert(k.into(), v.into());
        self
    }

    pub fn push(&mut self, name: &str, value: f64) {
        self.results.push(ResultRow { name: name.into(), value, stderr: None });
    }

    pub fn push_est(&mut self, name: &str, e: &crate::mc::Estimate) {
        self.results.push(ResultRow { name: name.into(), value: e.value, stderr: Some(e.stderr) });
    }

    pub fn predict(&mut self, description: &str, value: Option<f64>) {
        self.predicted = Some(Predicted { description: description.into(), value });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.results.iter().find(|r| r.name == name).map(|r| r.value)
    }
}

pub fn to_json(reports: &[ExperimentReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)? + "\n")
}

/// One row per result: `experiment_id,lambda,name,value,stderr,verdict`.
pub fn to_csv(reports: &[ExperimentReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["experiment_id", "lambda", "seed", "name", "value", "stderr", "verdict"])?;
    for r in reports {
        let lambda = r.params.get("lambda").map(|v| v.to_string()).unwrap_or_default();
        for row in &r.results {
            w.write_record([
                r.experiment_id.clone(),
                lambda.clone(),
                r.seed.to_string(),
                row.name.clone(),
                format!("{:e}", row.value),
                row.stderr.map(|s| format!("{s:e}")).unwrap_or_default(),
                r.verdict.as_str().to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn to_text(reports: &[ExperimentReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let lambda = r.params.get("lambda").map(|v| format!(" λ={v}")).unwrap_or_default();
        writeln!(out, "[{}] {}{lambda}", r.verdict.as_str(), r.experiment_id).unwrap();
        if let Some(p) = &r.predicted {
            match p.value {
                Some(v) => writeln!(out, "  predicted: {} ({v:.6})", p.description).unwrap(),
                None => writeln!(out, "  predicted: {}", p.description).unwrap(),
            }
        }
        for row in &r.results {
            match row.stderr {
                Some(s) => writeln!(out, "  {:<32} {:>14.6e} ± {:.2e}", row.name, row.value, s).unwrap(),
                None => writeln!(out, "  {:<32} {:>14.6e}", row.name, row.value).unwrap(),
            }
        }
    }
    out
}
