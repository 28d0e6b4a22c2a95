use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::eval::{evaluate, EvalPoint, Greedy};
use super::metrics::{compute_auc, percentage, RunReport};
use super::output;
use crate::advising::{ActionSource, Advisor};
use crate::dqn::{parse_agent_checkpoint, StudentAgent, Transition};
use crate::env::{EnvSpec, GridEnv, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::nn::network_from_str;
use crate::rng::{indexed_stream, stream};
use crate::teacher::{value_iteration, Teacher};

/// Value-iteration tolerance for the oracle teacher.
const ORACLE_TOLERANCE: f64 = 1e-10;

/// One row of the per-step event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub step: u64,
    pub episode: u64,
    pub source: ActionSource,
    pub explorative: bool,
    pub uncertainty: Option<f64>,
    pub budget_remaining: u64,
    pub shadow_action: Option<usize>,
    pub reuse_allowed: bool,
    pub cloner_trained: bool,
    pub action: usize,
    pub reward: f64,
}

/// Everything a finished session produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub events: Vec<StepEvent>,
    pub agent: StudentAgent,
    pub advisor: Advisor,
    pub wall_clock: Duration,
}

/// Builds the teacher named by `cfg.teacher`: `oracle`, or a path to a
/// network or agent checkpoint (the online network is used).
pub fn build_teacher(cfg: &RunConfig, spec: &Arc<EnvSpec>) -> Result<Teacher> {
    if cfg.teacher == "oracle" {
        let table = value_iteration(spec, ORACLE_TOLERANCE)?;
        return Ok(Teacher::oracle(spec.clone(), Arc::new(table)));
    }
    let text = std::fs::read_to_string(&cfg.teacher)?;
    let net = if text.trim_start().starts_with("agent") {
        parse_agent_checkpoint(&text)?.online
    } else {
        network_from_str(&text)?
    };
    if net.input_dim() != spec.observation_len() || net.output_dim() != NUM_ACTIONS {
        return Err(Error::config(format!(
            "teacher checkpoint `{}` does not fit environment `{}`",
            cfg.teacher, spec.name
        )));
    }
    Ok(Teacher::checkpoint(net))
}

/// Runs one learning session and, if `cfg.out` is set, writes its run
/// directory.
pub fn run_session(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let spec = Arc::new(EnvSpec::load(&cfg.env)?);
    let seed = cfg.seed;
    let mut teacher = if cfg.mode().collects() {
        Some(build_teacher(cfg, &spec)?.without_log())
    } else {
        None
    };
    if let Some(dir) = &cfg.out {
        output::prepare(dir, cfg)?;
    }

    let obs_len = spec.observation_len();
    let mut agent = StudentAgent::new(cfg.dqn.clone(), obs_len, NUM_ACTIONS, &mut stream(seed, "init"))?;
    let mut advisor = Advisor::new(cfg.advising.clone(), obs_len, NUM_ACTIONS, seed)?;
    let mut env = GridEnv::new(spec.clone());
    let mut env_rng = stream(seed, "env");
    let mut student_rng = stream(seed, "student");
    let mut train_rng = stream(seed, "replay");

    let diagnose = |step: u64, err: Error| match err {
        Error::Numerical(msg) => Error::Numerical(format!(
            "{msg} (step {step}, seed {seed}, mode {})",
            cfg.mode()
        )),
        other => other,
    };

    let mut evals = Vec::new();
    let mut eval_at = |step: u64, agent: &StudentAgent| -> Result<()> {
        let mut rng = indexed_stream(seed, "eval", &[step]);
        evals.push(evaluate(&Greedy(agent), &spec, cfg.eval_episodes, step, &mut rng)?);
        if let (Some(dir), true) = (&cfg.out, cfg.checkpoints) {
            output::write_checkpoint(dir, step, agent)?;
        }
        Ok(())
    };
    eval_at(0, &agent)?;

    let mut events = Vec::with_capacity(cfg.t_max as usize);
    let mut obs = env.reset(&mut env_rng);
    let mut episode = 0u64;
    advisor.on_episode_start();
    for t in 0..cfg.t_max {
        advisor.begin_step(t).map_err(|e| diagnose(t, e))?;
        let (student_action, explorative) = agent.act(&obs, &mut student_rng);
        let advice = match teacher.as_mut() {
            Some(teacher) => advisor.maybe_collect(t, &obs, teacher)?,
            None => None,
        };
        let mut decision = advisor.arbitrate(t, &obs, student_action, explorative, advice)?;
        if decision.source == ActionSource::Imitation {
            let teacher = teacher
                .as_mut()
                .expect("imitation requires collected advice, hence a teacher");
            let shadow = teacher.advise(t, &obs, true)?;
            advisor.record_shadow(&mut decision, shadow)?;
        }

        let result = env.step(decision.action, &mut env_rng)?;
        events.push(StepEvent {
            step: t,
            episode,
            source: decision.source,
            explorative,
            uncertainty: decision.uncertainty,
            budget_remaining: advisor.counters().budget_remaining,
            shadow_action: decision.shadow_action,
            reuse_allowed: advisor.reuse_allowed(),
            cloner_trained: advisor.cloner().is_trained(),
            action: decision.action,
            reward: result.reward,
        });
        let done = result.terminal || result.truncated;
        agent.observe(Transition {
            state: obs,
            action: decision.action,
            reward: result.reward,
            next_state: result.observation.clone(),
            terminal: result.terminal,
        });
        agent.train_step(&mut train_rng).map_err(|e| diagnose(t, e))?;

        obs = if done {
            episode += 1;
            advisor.on_episode_start();
            env.reset(&mut env_rng)
        } else {
            result.observation
        };
        let step = t + 1;
        if step % cfg.eval_period == 0 || step == cfg.t_max {
            eval_at(step, &agent)?;
        }
    }

    let report = build_report(cfg, &advisor, evals)?;
    let wall_clock = started.elapsed();
    if let Some(dir) = &cfg.out {
        output::write_run(dir, &report, &events, wall_clock)?;
    }
    Ok(RunOutcome {
        report,
        events,
        agent,
        advisor,
        wall_clock,
    })
}

fn build_report(cfg: &RunConfig, advisor: &Advisor, evals: Vec<EvalPoint>) -> Result<RunReport> {
    let auc = compute_auc(&evals)?;
    let c = advisor.counters();
    Ok(RunReport {
        mode: cfg.mode(),
        seed: cfg.seed,
        fingerprint: cfg.fingerprint(),
        final_score: evals.last().map(|e| e.mean_return).unwrap_or(0.0),
        auc_normalized: auc.normalized,
        auc_raw: auc.raw,
        exploration_steps: c.exploration_steps,
        advice_collected: c.advice_collected,
        reuses: c.reuses,
        reuses_correct: c.reuses_correct,
        reuse_pct: percentage(c.reuses, c.exploration_steps),
        correct_pct: percentage(c.reuses_correct, c.reuses),
        evals,
    })
}

/// Runs one session per seed, `jobs` at a time, and returns the outcomes in
/// seed order. Each run writes to `<out>/seed-<seed>` when `base.out` is set.
pub fn run_sweep(base: &RunConfig, seeds: &[u64], jobs: usize) -> Result<Vec<RunOutcome>> {
    let configs: Vec<RunConfig> = seeds
        .iter()
        .map(|&seed| RunConfig {
            seed,
            out: base.out.as_ref().map(|d| seed_dir(d, seed)),
            ..base.clone()
        })
        .collect();
    let jobs = jobs.max(1);
    let mut outcomes = Vec::with_capacity(configs.len());
    for chunk in configs.chunks(jobs) {
        let results: Vec<Result<RunOutcome>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|c| s.spawn(move || run_session(c))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("session thread panicked"))
                .collect()
        });
        for r in results {
            outcomes.push(r?);
        }
    }
    Ok(outcomes)
}

pub fn seed_dir(base: &Path, seed: u64) -> std::path::PathBuf {
    base.join(format!("seed-{seed}"))
}
