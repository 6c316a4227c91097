use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{evaluate, LearnConfig};
use crate::error::{Error, Result};
use crate::metrics::PerfIndicators;
use crate::sim::{ControllerParams, Plant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Accepted,
    Converged,
    /// Diverged or unmeasurable; rolled back.
    Penalized,
}

impl RowStatus {
    fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Accepted => "accepted",
            RowStatus::Converged => "converged",
            RowStatus::Penalized => "penalized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iter: usize,
    pub params: ControllerParams,
    pub indicators: Option<PerfIndicators>,
    pub cost: f64,
    pub raw: Option<[f64; 3]>,
    pub delta: Option<[f64; 3]>,
    pub status: RowStatus,
}

impl IterationRow {
    pub(super) fn penalized(iter: usize, params: ControllerParams, penalty: f64) -> Self {
        Self {
            iter,
            params,
            indicators: None,
            cost: penalty,
            raw: None,
            delta: None,
            status: RowStatus::Penalized,
        }
    }

    pub(super) fn accepted(
        iter: usize,
        params: ControllerParams,
        indicators: PerfIndicators,
        cost: f64,
        raw: Option<[f64; 3]>,
        delta: Option<[f64; 3]>,
        status: RowStatus,
    ) -> Self {
        Self {
            iter,
            params,
            indicators: Some(indicators),
            cost,
            raw,
            delta,
            status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningReport {
    pub rows: Vec<IterationRow>,
    pub status: TerminalStatus,
    /// 1-based iteration of the lowest accepted cost.
    pub best_iteration: usize,
    pub best_params: ControllerParams,
    pub best_cost: f64,
    pub best_indicators: PerfIndicators,
    pub config: LearnConfig,
    pub initial: ControllerParams,
}

#[derive(Debug, Clone, Serialize)]
struct Summary<'a> {
    status: TerminalStatus,
    iterations: usize,
    penalties: usize,
    best_iteration: usize,
    best_params: &'a ControllerParams,
    best_cost: f64,
    best_indicators: &'a PerfIndicators,
    max_overshoot: f64,
    initial: &'a ControllerParams,
    seed: u64,
    config_sha256: String,
    config: &'a LearnConfig,
}

impl LearningReport {
    pub fn converged(&self) -> bool {
        self.status == TerminalStatus::Converged
    }

    pub fn penalties(&self) -> usize {
        self.rows.iter().filter(|r| r.status == RowStatus::Penalized).count()
    }

    /// Largest overshoot over every measured trial.
    pub fn max_overshoot(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| r.indicators.map(|i| i.overshoot))
            .fold(0.0, f64::max)
    }

    /// Lowest accepted cost up to and including each row.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.rows
            .iter()
            .map(|r| {
                if r.status != RowStatus::Penalized {
                    best = best.min(r.cost);
                }
                best
            })
            .collect()
    }

    pub fn config_hash(&self) -> String {
        let text = serde_json::to_string(&self.config).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "k1", "k2", "k3", "phi_sigma", "phi_e", "phi_tr", "phi_ts", "J", "dk1", "dk2", "dk3", "status"])
            .map_err(csv_error)?;
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for r in &self.rows {
            let ind = r.indicators.map(|i| i.to_array());
            let mut rec = vec![r.iter.to_string()];
            rec.extend(r.params.gains().iter().map(|g| g.to_string()));
            rec.extend((0..4).map(|j| fmt(ind.map(|a| a[j]))));
            rec.push(r.cost.to_string());
            rec.extend((0..3).map(|j| fmt(r.delta.map(|d| d[j]))));
            rec.push(r.status.as_str().to_string());
            w.write_record(&rec).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        let s = Summary {
            status: self.status,
            iterations: self.rows.len(),
            penalties: self.penalties(),
            best_iteration: self.best_iteration,
            best_params: &self.best_params,
            best_cost: self.best_cost,
            best_indicators: &self.best_indicators,
            max_overshoot: self.max_overshoot(),
            initial: &self.initial,
            seed: self.config.seed,
            config_sha256: self.config_hash(),
            config: &self.config,
        };
        Ok(serde_json::to_string_pretty(&s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| Error::MalformedReport(e.to_string()))?;
        report.check()?;
        Ok(report)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::MalformedReport(m.to_string()));
        if self.rows.is_empty() {
            return bad("no iterations");
        }
        if self.rows.len() > self.config.max_iterations {
            return bad("more rows than the iteration budget");
        }
        let Some(row) = self.best_iteration.checked_sub(1).and_then(|i| self.rows.get(i)) else {
            return bad("best iteration out of range");
        };
        if row.status == RowStatus::Penalized || row.indicators.is_none() {
            return bad("best iteration is not an accepted trial");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayVerdict {
    pub pass: bool,
    pub recorded: PerfIndicators,
    pub replayed: Option<PerfIndicators>,
    /// `replayed - recorded` per indicator.
    pub indicator_diff: Option<[f64; 4]>,
    pub cost_diff: Option<f64>,
}

/// Re-simulates the best gains of a report and compares indicators and cost.
pub fn replay_report(report: &LearningReport, plant: &Plant) -> Result<ReplayVerdict> {
    report.check()?;
    let tol = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
    let trial = evaluate(plant, &report.best_params, &report.config)?;
    let recorded = report.best_indicators;
    match (trial.indicators, trial.cost) {
        (Some(ind), Some(cost)) => {
            let (a, b) = (ind.to_array(), recorded.to_array());
            let diff = [0, 1, 2, 3].map(|j| a[j] - b[j]);
            let pass = (0..4).all(|j| tol(a[j], b[j])) && tol(cost, report.best_cost);
            Ok(ReplayVerdict {
                pass,
                recorded,
                replayed: Some(ind),
                indicator_diff: Some(diff),
                cost_diff: Some(cost - report.best_cost),
            })
        }
        _ => Ok(ReplayVerdict {
            pass: false,
            recorded,
            replayed: None,
            indicator_diff: None,
            cost_diff: None,
        }),
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidConfig(format!("report csv: {e}"))
}
