use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::Method;
use crate::error::{Error, Result};

pub const STATUS_OK: &str = "ok";

/// One method on one grid cell. Metrics of a failed cell are zero and
/// `status` carries the error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub k: usize,
    pub l: usize,
    pub theta: f64,
    pub epsilon: f64,
    pub lambda_m: f64,
    pub matched_slots: usize,
    pub matched_tags: usize,
    pub influence: f64,
    /// `I(S' | T')` of the selected slots and tags before allocation.
    pub selection_influence: f64,
    /// Mean wall-clock time of the allocator call.
    pub runtime_ms: f64,
    pub repetitions: usize,
    pub status: String,
}

impl ReportRow {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    fn sort_key(&self) -> (usize, usize, f64, f64, f64, Method) {
        (
            self.k,
            self.l,
            self.theta,
            self.epsilon,
            self.lambda_m,
            self.method,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub threads: usize,
    pub os: String,
    pub arch: String,
    pub seed: u64,
}

impl Environment {
    pub fn current(seed: u64) -> Self {
        Environment {
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub environment: Environment,
}

impl ExperimentReport {
    /// Rows ordered by grid position, then method.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            let (x, y) = (a.sort_key(), b.sort_key());
            x.0.cmp(&y.0)
                .then(x.1.cmp(&y.1))
                .then(x.2.total_cmp(&y.2))
                .then(x.3.total_cmp(&y.3))
                .then(x.4.total_cmp(&y.4))
                .then(x.5.cmp(&y.5))
        });
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Contract(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Contract(e.to_string()))
    }

    pub fn rows_from_csv(text: &str) -> Result<Vec<ReportRow>> {
        csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .map(|r| r.map_err(Error::from))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let csv_path = dir.join("report.csv");
        std::fs::write(&csv_path, self.to_csv()?).map_err(|e| Error::io(&csv_path, e))?;
        let json_path = dir.join("report.json");
        std::fs::write(&json_path, self.to_json()?).map_err(|e| Error::io(&json_path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: Method, k: usize, theta: f64) -> ReportRow {
        ReportRow {
            method,
            k,
            l: 3,
            theta,
            epsilon: 0.01,
            lambda_m: 100.0,
            matched_slots: 4,
            matched_tags: 2,
            influence: 1.0 / 3.0,
            selection_influence: 2.5,
            runtime_ms: 0.125,
            repetitions: 1,
            status: STATUS_OK.into(),
        }
    }

    #[test]
    fn sorted_and_round_trips() {
        let mut rep = ExperimentReport {
            rows: vec![
                row(Method::Ra, 20, -1.0),
                row(Method::Ombm, 10, 0.0),
                row(Method::Bm, 10, -1.0),
                row(Method::Ombm, 10, -1.0),
            ],
            environment: Environment::current(1),
        };
        rep.sort();
        let order: Vec<_> = rep.rows.iter().map(|r| (r.k, r.theta, r.method)).collect();
        assert_eq!(
            order,
            vec![
                (10, -1.0, Method::Ombm),
                (10, -1.0, Method::Bm),
                (10, 0.0, Method::Ombm),
                (20, -1.0, Method::Ra)
            ]
        );
        let csv = rep.to_csv().unwrap();
        assert!(csv.starts_with("method,k,l,theta,epsilon,lambda_m,matched_slots"));
        assert_eq!(ExperimentReport::rows_from_csv(&csv).unwrap(), rep.rows);
        assert_eq!(
            ExperimentReport::from_json(&rep.to_json().unwrap()).unwrap(),
            rep
        );
    }
}
