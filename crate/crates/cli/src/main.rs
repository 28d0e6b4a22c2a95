use std::path::{Path, PathBuf};
use std::process::ExitCode;

use advice_reuse::dqn::parse_agent_checkpoint;
use advice_reuse::env::EnvSpec;
use advice_reuse::harness::{aggregate, output, run_session, run_sweep, RunConfig, RunReport};
use advice_reuse::nn::network_to_string;
use advice_reuse::teacher::value_iteration;
use advice_reuse::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "advice-reuse", version, about = "Teacher-student DQN with advice imitation and reuse")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one learning session.
    Train(RunArgs),
    /// Run one session per seed and aggregate them.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        /// Sessions to run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Export the oracle's action values as CSV, or turn an agent
    /// checkpoint into a teacher network file.
    Teach {
        /// Environment spec for the oracle (`builtin:<name>` or a path).
        #[arg(long, default_value = "builtin:hazard-lane", conflicts_with = "from")]
        env: String,
        /// Agent checkpoint whose online network becomes the teacher.
        #[arg(long)]
        from: Option<PathBuf>,
        /// Value-iteration tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate finished runs into per-seed and summary CSVs.
    Report {
        /// Run directories, or directories containing them.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Where to write `reports.csv` and `summary.csv`; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any config key, e.g. `--set t_max=5000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut text = match &self.config {
            Some(path) => std::fs::read_to_string(path)?,
            None => String::new(),
        };
        // Flags go through the file parser so defaults scale with an
        // overridden t_max and errors name the key.
        let mut extra = self.overrides.clone();
        if let Some(mode) = &self.mode {
            extra.push(format!("mode={mode}"));
        }
        if let Some(seed) = self.seed {
            extra.push(format!("seed={seed}"));
        }
        if let Some(out) = &self.out {
            extra.push(format!("out={}", out.display()));
        }
        for kv in extra {
            if !kv.contains('=') {
                return Err(Error::config(format!("override `{kv}` is not KEY=VALUE")));
            }
            text.push('\n');
            text.push_str(&kv);
        }
        RunConfig::parse(&text)
    }
}

fn print_report(r: &RunReport) {
    println!(
        "mode {} seed {}: final {:.4}, auc {:.4}, exploration steps {}, advice {}, reuses {} ({:.2}%), correct {} ({:.2}%)",
        r.mode, r.seed, r.final_score, r.auc_normalized, r.exploration_steps, r.advice_collected,
        r.reuses, r.reuse_pct, r.reuses_correct, r.correct_pct
    );
}

fn write_or_print(path: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match path {
        Some(p) => Ok(std::fs::write(p, bytes)?),
        None => {
            print!("{}", String::from_utf8_lossy(bytes));
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train(args) => {
            let outcome = run_session(&args.config()?)?;
            print_report(&outcome.report);
        }
        Command::Sweep { run, seeds, jobs } => {
            let base = run.config()?;
            let outcomes = run_sweep(&base, &seeds, jobs)?;
            let reports: Vec<RunReport> = outcomes.into_iter().map(|o| o.report).collect();
            reports.iter().for_each(print_report);
            let summary = aggregate(&reports)?;
            if let Some(dir) = &base.out {
                std::fs::write(dir.join("reports.csv"), output::reports_to_csv(&reports)?)?;
                std::fs::write(dir.join("summary.csv"), output::summary_to_csv(&summary)?)?;
            }
            for m in &summary.metrics {
                println!("{:>18}: {:.4} ± {:.4}", m.metric, m.mean, m.std);
            }
        }
        Command::Teach {
            env,
            from,
            tolerance,
            out,
        } => match from {
            Some(path) => {
                let ckpt = parse_agent_checkpoint(&std::fs::read_to_string(path)?)?;
                std::fs::write(&out, network_to_string(&ckpt.online))?;
            }
            None => {
                let spec = EnvSpec::load(&env)?;
                let table = value_iteration(&spec, tolerance)?;
                std::fs::write(&out, table.to_csv(&spec)?)?;
                println!(
                    "{} states, {} sweeps, start value {:.6}",
                    table.len(),
                    table.sweeps(),
                    table.start_value(&spec)
                );
            }
        },
        Command::Report { runs, out } => {
            let mut reports = Vec::new();
            for root in &runs {
                for dir in output::find_runs(root)? {
                    reports.push(output::read_report(&dir)?);
                }
            }
            let summary = aggregate(&reports)?;
            let per_seed = output::reports_to_csv(&reports)?;
            let table = output::summary_to_csv(&summary)?;
            match &out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    write_or_print(Some(&dir.join("reports.csv")), &per_seed)?;
                    write_or_print(Some(&dir.join("summary.csv")), &table)?;
                }
                None => {
                    write_or_print(None, &per_seed)?;
                    write_or_print(None, &table)?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Numerical(_) => 2,
                _ => 1,
            })
        }
    }
}
