//! Experiment orchestration: configs, the training loop, evaluation,
//! metrics and run directories.

mod config;
mod eval;
mod metrics;
pub mod output;
mod session;


pub use config::{RunConfig, DEFAULT_T_MAX};
pub use eval::{evaluate, mean_std, EvalPoint, Greedy, Policy, UniformRandom};
pub use metrics::{aggregate, compute_auc, percentage, Auc, MetricSummary, RunReport, Summary, REPORT_CSV_HEADER};
pub use session::{build_teacher, run_session, run_sweep, seed_dir, RunOutcome, StepEvent};
