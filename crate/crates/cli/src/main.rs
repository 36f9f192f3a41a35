//! Command-line experiment driver.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 partial
//! failure (some sessions errored but the sweep completed).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use convsim_core::runner::reports;
use convsim_core::{
    save_corpus, ClarificationBank, CorpusSource, Error, ExperimentConfig, SessionRecord,
};

#[derive(Parser)]
#[command(
    name = "convsim",
    version,
    about = "Simulate and evaluate conversational search sessions"
)]
struct Cli {
    /// Worker threads for session execution (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the simulated-time budget in seconds.
    #[arg(long, value_name = "SECONDS")]
    budget_seconds: Option<f64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(budget) = self.budget_seconds {
            cfg.budget_seconds = budget;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full sweep and write results, traces, and report tables.
    Run(ConfigArgs),
    /// Re-score stored traces under the config's cost model and budget.
    Summarize {
        #[command(flatten)]
        args: ConfigArgs,
        /// Trace stream written by `run` (traces.jsonl).
        #[arg(long)]
        traces: PathBuf,
    },
    /// Emit the budget-frontier table from stored traces.
    Frontier {
        #[command(flatten)]
        args: ConfigArgs,
        #[arg(long)]
        traces: PathBuf,
    },
    /// Re-score stored traces under the config's cost multipliers.
    Sensitivity {
        #[command(flatten)]
        args: ConfigArgs,
        #[arg(long)]
        traces: PathBuf,
    },
    /// Best (Q, A, F) settings per condition for each gain target.
    BestSettings {
        #[command(flatten)]
        args: ConfigArgs,
        #[arg(long)]
        traces: PathBuf,
        /// Override the config's gain targets (comma-separated).
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<f64>>,
    },
    /// Compare clarification vs suggestion expanded-query precision.
    Calibrate {
        #[command(flatten)]
        args: ConfigArgs,
        /// Feedback rounds to evaluate (defaults to the grid's max F).
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Generate and save the synthetic corpus and bank named by the config.
    Synth(ConfigArgs),
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Io(_) | Error::Csv(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn load_traces(path: &Path) -> Result<Vec<SessionRecord>, Error> {
    let records = convsim_core::read_records_jsonl(path)?;
    if records.is_empty() {
        return Err(Error::Config(format!(
            "{}: no session records found",
            path.display()
        )));
    }
    Ok(records)
}

fn print_warnings(warnings: &[String]) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
}

fn run_command(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let summary = convsim_core::run_experiment(&cfg)?;
            print_warnings(&summary.warnings);
            println!(
                "wrote {} rows ({} failed sessions) to {}",
                summary.rows,
                summary.failures,
                summary.out_dir.display()
            );
            if summary.failures > 0 {
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize { args, traces } => {
            let cfg = args.load()?;
            let records = load_traces(&traces)?;
            let rows =
                convsim_core::summarize_records(&records, &cfg.cost_model, cfg.budget_seconds);
            std::fs::create_dir_all(&cfg.out_dir)?;
            let out = cfg.out_dir.join("results.csv");
            convsim_core::write_results_csv(&rows, &out)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Frontier { args, traces } => {
            let cfg = args.load()?;
            let records = load_traces(&traces)?;
            let points = reports::emit_frontier(
                &records,
                &cfg.cost_model,
                cfg.budget_seconds,
                cfg.report_query_length,
            );
            std::fs::create_dir_all(&cfg.out_dir)?;
            let out = cfg.out_dir.join("frontier.csv");
            reports::write_frontier_csv(&points, &out)?;
            println!(
                "wrote {} frontier points to {}",
                points.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Sensitivity { args, traces } => {
            let cfg = args.load()?;
            if cfg.sensitivity.is_empty() {
                return Err(Error::Config(
                    "config has no sensitivity multipliers".into(),
                ));
            }
            let records = load_traces(&traces)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            for step in &cfg.sensitivity {
                let rows =
                    reports::sensitivity_rows(&records, &cfg.cost_model, cfg.budget_seconds, *step);
                let out = cfg.out_dir.join(format!(
                    "sensitivity_{}_x{}.csv",
                    step.parameter, step.factor
                ));
                convsim_core::write_results_csv(&rows, &out)?;
                println!("wrote {}", out.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::BestSettings {
            args,
            traces,
            targets,
        } => {
            let cfg = args.load()?;
            let records = load_traces(&traces)?;
            let targets = targets.unwrap_or_else(|| cfg.gain_targets.clone());
            std::fs::create_dir_all(&cfg.out_dir)?;
            let out = cfg.out_dir.join("best_settings.csv");
            reports::write_best_settings_csv(
                &records,
                &cfg.cost_model,
                &targets,
                cfg.report_query_length,
                &out,
            )?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Calibrate { args, rounds } => {
            let cfg = args.load()?;
            let (corpus, bank, warnings) = convsim_core::prepare_corpus(&cfg)?;
            print_warnings(&warnings);
            let bank = bank.ok_or_else(|| {
                Error::Config("calibration requires a `bank` source in the config".into())
            })?;
            let rounds = rounds.unwrap_or_else(|| (cfg.grid.f.max as usize).max(1));
            let rows = reports::emit_calibration(&corpus, &bank, &cfg, rounds)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let out = cfg.out_dir.join("calibration.csv");
            reports::write_calibration_csv(&rows, &out)?;
            println!("wrote {} rounds to {}", rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth(args) => {
            let cfg = args.load()?;
            if !matches!(cfg.corpus, CorpusSource::Synthetic { .. }) {
                return Err(Error::Config(
                    "synth requires a synthetic corpus source in the config".into(),
                ));
            }
            let (corpus, bank, _) = convsim_core::prepare_corpus(&cfg)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            save_corpus(
                &corpus,
                &cfg.out_dir.join("docs.jsonl"),
                &cfg.out_dir.join("topics.json"),
                &cfg.out_dir.join("qrels.txt"),
            )?;
            let bank = match bank {
                Some(bank) => bank,
                None => ClarificationBank::synthesize(&corpus, 10, 2)?,
            };
            bank.save(&cfg.out_dir.join("bank.json"))?;
            println!(
                "wrote {} documents, {} topics, and the clarification bank to {}",
                corpus.documents.len(),
                corpus.topics.len(),
                cfg.out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore failure: the global pool can only be initialized once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run_command(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}
