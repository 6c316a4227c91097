use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use selftune_core::learner::svg::{cost_curve, gains, increments, line_chart, Series};
use selftune_core::learner::{LearningReport, RowStatus};
use selftune_core::sim::{closed_loop_step, Plant};

pub fn sha256_json<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("serializable");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Seed and configuration hash stamped into every JSON artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Stamp {
    pub seed: u64,
    pub config_sha256: String,
}

impl Stamp {
    pub fn new<T: Serialize>(seed: u64, config: &T) -> Self {
        Self {
            seed,
            config_sha256: sha256_json(config),
        }
    }
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn sub(&self, name: &str) -> Result<Self> {
        Self::create(&self.root.join(name))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, contents).with_context(|| format!("cannot write {}", p.display()))?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }
}

/// Step responses of the starting controller, every fifth iteration and the
/// best one.
pub fn response_overlay(report: &LearningReport, plant: &Plant) -> Result<String> {
    let mut series = Vec::new();
    let mut push = |label: String, params, width| -> Result<()> {
        let traj = closed_loop_step(plant, params, report.config.setpoint, &report.config.sim)?;
        let pts = traj.t.iter().zip(&traj.y).step_by((traj.len() / 2000).max(1)).map(|(t, y)| (*t, *y)).collect();
        let mut s = Series::new(label, pts);
        s.width = width;
        series.push(s);
        Ok(())
    };
    for row in report.rows.iter().filter(|r| r.status != RowStatus::Penalized) {
        if row.iter == 1 || row.iter % 5 == 0 {
            push(format!("iter {}", row.iter), &row.params, 1.0)?;
        }
    }
    push(format!("best (iter {})", report.best_iteration), &report.best_params, 2.5)?;
    Ok(line_chart("Step responses", "t [s]", "y", &series))
}

pub struct WrittenReport {
    pub summary: PathBuf,
}

/// CSV, JSON, summary and optional plots of a learning run.
pub fn write_report(dir: &OutDir, report: &LearningReport, plant: &Plant, plot: bool) -> Result<WrittenReport> {
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    dir.write("report.csv", csv)?;
    dir.write("report.json", report.to_json()? + "\n")?;
    let summary = dir.write("summary.json", report.summary_json()? + "\n")?;
    if plot {
        dir.write("cost.svg", cost_curve(report))?;
        dir.write("increments.svg", increments(report))?;
        dir.write("gains.svg", gains(report))?;
        dir.write("response.svg", response_overlay(report, plant)?)?;
    }
    Ok(WrittenReport { summary })
}
