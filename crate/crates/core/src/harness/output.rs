//! Run directory layout:
//!
//! ```text
//! config.txt      canonical copy of the run config
//! events.csv      one row per training step
//! eval.csv        step, mean_return, std_return, episodes
//! report.csv      the run's summary row
//! report.json     the full report, read back by `aggregate`
//! timing.txt      wall-clock seconds (kept apart so reports are reproducible)
//! checkpoints/    agent checkpoints at evaluation points, when enabled
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use super::config::RunConfig;
use super::metrics::{RunReport, Summary, REPORT_CSV_HEADER};
use super::session::StepEvent;
use crate::advising::ActionSource;
use crate::dqn::StudentAgent;
use crate::error::{Error, Result};

pub const EVENTS_CSV_HEADER: [&str; 11] = [
    "step",
    "episode",
    "source",
    "explorative",
    "uncertainty",
    "budget_remaining",
    "shadow_action",
    "reuse_allowed",
    "cloner_trained",
    "action",
    "reward",
];

pub(crate) fn prepare(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    if cfg.checkpoints {
        fs::create_dir_all(dir.join("checkpoints"))?;
    }
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    Ok(())
}

pub(crate) fn write_checkpoint(dir: &Path, step: u64, agent: &StudentAgent) -> Result<()> {
    let path = dir.join("checkpoints").join(format!("step-{step:09}.txt"));
    fs::write(path, agent.checkpoint_to_string())?;
    Ok(())
}

pub(crate) fn write_run(dir: &Path, report: &RunReport, events: &[StepEvent], wall_clock: Duration) -> Result<()> {
    fs::write(dir.join("events.csv"), events_to_csv(events)?)?;

    let mut eval = csv::Writer::from_writer(Vec::new());
    eval.write_record(["step", "mean_return", "std_return", "episodes"])?;
    for p in &report.evals {
        eval.write_record([
            p.step.to_string(),
            p.mean_return.to_string(),
            p.std_return.to_string(),
            p.returns.len().to_string(),
        ])?;
    }
    fs::write(dir.join("eval.csv"), finish(eval)?)?;

    fs::write(dir.join("report.csv"), reports_to_csv(std::slice::from_ref(report))?)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    fs::write(dir.join("timing.txt"), format!("wall_clock_secs = {:.3}\n", wall_clock.as_secs_f64()))?;
    Ok(())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn events_to_csv(events: &[StepEvent]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EVENTS_CSV_HEADER)?;
    for e in events {
        w.write_record([
            e.step.to_string(),
            e.episode.to_string(),
            e.source.name().to_string(),
            e.explorative.to_string(),
            opt(e.uncertainty),
            e.budget_remaining.to_string(),
            opt(e.shadow_action),
            e.reuse_allowed.to_string(),
            e.cloner_trained.to_string(),
            e.action.to_string(),
            e.reward.to_string(),
        ])?;
    }
    finish(w)
}

/// Reads an `events.csv` written by a run.
pub fn read_events(path: &Path) -> Result<Vec<StepEvent>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let bad = |k: usize| Error::Parse {
            line,
            msg: format!("bad `{}` value `{}`", EVENTS_CSV_HEADER[k], field(k)),
        };
        fn p<T: std::str::FromStr>(s: &str) -> Option<T> {
            s.parse().ok()
        }
        let optional = |k: usize| -> Result<Option<f64>> {
            if field(k).is_empty() {
                Ok(None)
            } else {
                p(field(k)).map(Some).ok_or_else(|| bad(k))
            }
        };
        let source = match field(2) {
            "teacher" => ActionSource::Teacher,
            "imitation" => ActionSource::Imitation,
            "student" => ActionSource::Student,
            _ => return Err(bad(2)),
        };
        out.push(StepEvent {
            step: p(field(0)).ok_or_else(|| bad(0))?,
            episode: p(field(1)).ok_or_else(|| bad(1))?,
            source,
            explorative: p(field(3)).ok_or_else(|| bad(3))?,
            uncertainty: optional(4)?,
            budget_remaining: p(field(5)).ok_or_else(|| bad(5))?,
            shadow_action: optional(6)?.map(|a| a as usize),
            reuse_allowed: p(field(7)).ok_or_else(|| bad(7))?,
            cloner_trained: p(field(8)).ok_or_else(|| bad(8))?,
            action: p(field(9)).ok_or_else(|| bad(9))?,
            reward: p(field(10)).ok_or_else(|| bad(10))?,
        });
    }
    Ok(out)
}

pub fn reports_to_csv(reports: &[RunReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_CSV_HEADER)?;
    for r in reports {
        w.write_record(r.csv_record())?;
    }
    finish(w)
}

pub fn summary_to_csv(summary: &Summary) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mode", "runs", "metric", "mean", "std"])?;
    for m in &summary.metrics {
        w.write_record([
            summary.mode.name().to_string(),
            summary.seeds.len().to_string(),
            m.metric.clone(),
            m.mean.to_string(),
            m.std.to_string(),
        ])?;
    }
    finish(w)
}

pub fn read_report(dir: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(dir.join("report.json"))?;
    Ok(serde_json::from_str(&text)?)
}

/// Run directories below `root`: `root` itself if it holds a report,
/// otherwise its immediate subdirectories that do, in name order.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join("report.json").is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("report.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::config(format!("no run reports found under {}", root.display())));
    }
    Ok(dirs)
}
