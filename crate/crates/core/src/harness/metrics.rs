use serde::{Deserialize, Serialize};

use super::eval::{mean_std, EvalPoint};
use crate::advising::AdvisingMode;
use crate::error::{Error, Result};

/// Area under the evaluation curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Auc {
    /// Trapezoid integral of mean return over steps.
    pub raw: f64,
    /// `raw` divided by the step span, in return units.
    pub normalized: f64,
}

pub fn compute_auc(points: &[EvalPoint]) -> Result<Auc> {
    if points.len() < 2 {
        return Err(Error::config("AUC needs at least two evaluation points"));
    }
    if points.windows(2).any(|w| w[1].step <= w[0].step) {
        return Err(Error::config("evaluation steps must be strictly increasing"));
    }
    let raw: f64 = points
        .windows(2)
        .map(|w| (w[1].step - w[0].step) as f64 * (w[0].mean_return + w[1].mean_return) / 2.0)
        .sum();
    let span = (points[points.len() - 1].step - points[0].step) as f64;
    Ok(Auc {
        raw,
        normalized: raw / span,
    })
}

/// `part / whole` as a percentage, 0 when `whole` is 0.
pub fn percentage(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Summary of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: AdvisingMode,
    pub seed: u64,
    /// Canonical config text without seed and output directory.
    pub fingerprint: String,
    pub evals: Vec<EvalPoint>,
    pub final_score: f64,
    pub auc_normalized: f64,
    pub auc_raw: f64,
    pub exploration_steps: u64,
    pub advice_collected: u64,
    pub reuses: u64,
    pub reuses_correct: u64,
    pub reuse_pct: f64,
    pub correct_pct: f64,
}

pub const REPORT_CSV_HEADER: [&str; 11] = [
    "mode",
    "seed",
    "final",
    "auc_normalized",
    "auc_raw",
    "exploration_steps",
    "advice_collected",
    "reuses",
    "reuses_correct",
    "reuse_pct",
    "correct_pct",
];

impl RunReport {
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.mode.name().to_string(),
            self.seed.to_string(),
            self.final_score.to_string(),
            self.auc_normalized.to_string(),
            self.auc_raw.to_string(),
            self.exploration_steps.to_string(),
            self.advice_collected.to_string(),
            self.reuses.to_string(),
            self.reuses_correct.to_string(),
            self.reuse_pct.to_string(),
            self.correct_pct.to_string(),
        ]
    }

    fn metrics(&self) -> [(&'static str, f64); 9] {
        [
            ("final", self.final_score),
            ("auc_normalized", self.auc_normalized),
            ("auc_raw", self.auc_raw),
            ("exploration_steps", self.exploration_steps as f64),
            ("advice_collected", self.advice_collected as f64),
            ("reuses", self.reuses as f64),
            ("reuses_correct", self.reuses_correct as f64),
            ("reuse_pct", self.reuse_pct),
            ("correct_pct", self.correct_pct),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

/// Mean ± population standard deviation of every report metric across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: AdvisingMode,
    pub seeds: Vec<u64>,
    pub metrics: Vec<MetricSummary>,
}

impl Summary {
    pub fn get(&self, metric: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}

/// Aggregates reports that differ only in their seed.
pub fn aggregate(reports: &[RunReport]) -> Result<Summary> {
    let first = reports
        .first()
        .ok_or_else(|| Error::config("nothing to aggregate"))?;
    if let Some(odd) = reports.iter().find(|r| r.fingerprint != first.fingerprint) {
        return Err(Error::config(format!(
            "seed {} was run with a different configuration than seed {}",
            odd.seed, first.seed
        )));
    }
    let names = first.metrics().map(|(n, _)| n);
    let metrics = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let values: Vec<f64> = reports.iter().map(|r| r.metrics()[i].1).collect();
            let (mean, std) = mean_std(&values);
            MetricSummary {
                metric: name.to_string(),
                mean,
                std,
            }
        })
        .collect();
    Ok(Summary {
        mode: first.mode,
        seeds: reports.iter().map(|r| r.seed).collect(),
        metrics,
    })
}
