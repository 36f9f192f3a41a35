//! Experiment driver: sweeps the schedule grid over topics and repetitions,
//! executes sessions in parallel with derived per-session seeds, and writes
//! CSV results plus plot-ready report tables.

pub mod config;
pub mod reports;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{filter_topics, generate_synthetic_corpus, load_corpus, Corpus};
use crate::error::{Error, Result};
use crate::feedback::ClarificationBank;
use crate::metrics::{summarize, CostModel};
use crate::session::{
    truncate_to_budget, MixedInitiative, SessionConfig, SessionTrace, Simulator, Strategy,
};

pub use config::{BankSource, CorpusSource, ExperimentConfig, Grid, GridRange, SensitivityStep};

/// One row of the long results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub strategy: Strategy,
    pub mi: MixedInitiative,
    pub q: u32,
    pub f: u32,
    pub a: u32,
    pub l: u32,
    pub topic_id: String,
    pub rep: u32,
    pub gain: f64,
    pub cost: f64,
    pub rate: f64,
    pub n_q: u64,
    pub n_f: u64,
    pub n_a: u64,
    pub error: Option<String>,
}

/// One line of the persisted trace stream. Failed sessions are recorded so
/// re-summarizing stored traces preserves row counts exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SessionRecord {
    Completed {
        rep: u32,
        trace: SessionTrace,
    },
    Failed {
        strategy: Strategy,
        mi: MixedInitiative,
        q: u32,
        f: u32,
        a: u32,
        l: u32,
        topic_id: String,
        rep: u32,
        error: String,
    },
}

/// What `run_experiment` produced.
#[derive(Debug)]
pub struct RunSummary {
    pub rows: u64,
    pub failures: u64,
    pub out_dir: PathBuf,
    pub warnings: Vec<String>,
}

/// The condition cells of a sweep: every strategy crossed with every
/// configured mixed initiative, plus one shared no-feedback baseline cell.
///
/// The baseline executes no feedback turns regardless of the grid's F value
/// (its mechanism exhausts immediately), and is labeled with the first
/// strategy since the strategies coincide at F = 0.
pub fn condition_cells(cfg: &ExperimentConfig) -> Vec<(Strategy, MixedInitiative)> {
    let mut cells = Vec::new();
    for &strategy in &cfg.strategies {
        for &mi in &cfg.mixed_initiatives {
            cells.push((strategy, mi));
        }
    }
    cells.push((cfg.strategies[0], MixedInitiative::NoFeedback));
    cells
}

/// Rows a sweep will emit: grid cardinality times condition cells times
/// topics times repetitions.
pub fn expected_row_count(cfg: &ExperimentConfig, n_topics: u64) -> u64 {
    let grid = cfg.grid.q.len() * cfg.grid.f.len() * cfg.grid.a.len() * cfg.grid.l.len();
    let cells = (cfg.strategies.len() * cfg.mixed_initiatives.len() + 1) as u64;
    grid * cells * n_topics * u64::from(cfg.repetitions)
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Derive one session's seed from the master seed and its full coordinates.
/// Stable across platforms and runs.
#[allow(clippy::too_many_arguments)]
pub fn derive_seed(
    master_seed: u64,
    strategy: Strategy,
    mi: MixedInitiative,
    q: u32,
    f: u32,
    a: u32,
    l: u32,
    topic_id: &str,
    rep: u32,
) -> u64 {
    let key = format!("{master_seed}|{strategy}|{mi}|{q}|{f}|{a}|{l}|{topic_id}|{rep}");
    fnv1a64(key.as_bytes())
}

#[derive(Debug, Clone)]
struct Job {
    strategy: Strategy,
    mi: MixedInitiative,
    q: u32,
    f: u32,
    a: u32,
    l: u32,
    topic_idx: usize,
    rep: u32,
}

/// Enumerate jobs in deterministic output order: condition cells in config
/// order, then grid coordinates, topics, and repetitions.
fn plan_jobs(cfg: &ExperimentConfig, n_topics: usize) -> Vec<Job> {
    let mut jobs = Vec::new();
    for (strategy, mi) in condition_cells(cfg) {
        for q in cfg.grid.q.values() {
            for f in cfg.grid.f.values() {
                for a in cfg.grid.a.values() {
                    for l in cfg.grid.l.values() {
                        for topic_idx in 0..n_topics {
                            for rep in 0..cfg.repetitions {
                                jobs.push(Job {
                                    strategy,
                                    mi,
                                    q,
                                    f,
                                    a,
                                    l,
                                    topic_idx,
                                    rep,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    jobs
}

/// Materialize the corpus (and clarification bank) named by the config.
pub fn prepare_corpus(
    cfg: &ExperimentConfig,
) -> Result<(Corpus, Option<ClarificationBank>, Vec<String>)> {
    let mut warnings = Vec::new();
    let corpus = match &cfg.corpus {
        CorpusSource::Files {
            documents,
            topics,
            qrels,
        } => {
            let pre = cfg.preprocessing.preprocessor();
            let loaded = load_corpus(documents, topics, qrels, &pre)?;
            warnings.extend(loaded.warnings);
            loaded.corpus
        }
        CorpusSource::Synthetic { spec, seed } => generate_synthetic_corpus(spec, *seed)?,
    };
    let corpus = filter_topics(corpus, cfg.min_facets, cfg.min_rel);
    if corpus.topics.is_empty() {
        return Err(Error::Config(
            "no topics survive the facet/relevance filter".into(),
        ));
    }

    let bank = match &cfg.bank {
        None => None,
        Some(BankSource::File(path)) => {
            let pre = cfg.preprocessing.preprocessor();
            let (bank, bank_warnings) = ClarificationBank::load(path, &pre)?;
            warnings.extend(bank_warnings);
            Some(bank)
        }
        Some(BankSource::Synthetic {
            rounds,
            terms_per_answer,
        }) => Some(ClarificationBank::synthesize(
            &corpus,
            *rounds,
            *terms_per_answer,
        )?),
    };
    if cfg
        .mixed_initiatives
        .contains(&MixedInitiative::Clarification)
        && bank.is_none()
    {
        return Err(Error::Config(
            "query clarification requires a `bank` source in the config".into(),
        ));
    }
    Ok((corpus, bank, warnings))
}

fn session_config(cfg: &ExperimentConfig, job: &Job, topic_id: &str) -> SessionConfig {
    SessionConfig {
        strategy: job.strategy,
        mi: job.mi,
        queries: job.q,
        feedback_rounds: job.f,
        assessments: job.a,
        query_length: job.l,
        cost_model: cfg.cost_model,
        seed: derive_seed(
            cfg.master_seed,
            job.strategy,
            job.mi,
            job.q,
            job.f,
            job.a,
            job.l,
            topic_id,
            job.rep,
        ),
        lambda: cfg.lambda,
        mu: cfg.mu,
        term_cutoff: cfg.term_cutoff,
        query_sampling: cfg.query_sampling,
        carry_feedback: cfg.carry_feedback,
        rank_depth: None,
    }
}

fn run_job(
    cfg: &ExperimentConfig,
    sim: &Simulator<'_>,
    bank: Option<&ClarificationBank>,
    job: &Job,
) -> SessionRecord {
    let topic = &sim.corpus().topics[job.topic_idx];
    let session_cfg = session_config(cfg, job, &topic.topic_id);
    match sim.run_session(topic, &session_cfg, bank) {
        Ok(trace) => SessionRecord::Completed {
            rep: job.rep,
            trace,
        },
        Err(e) => SessionRecord::Failed {
            strategy: job.strategy,
            mi: job.mi,
            q: job.q,
            f: job.f,
            a: job.a,
            l: job.l,
            topic_id: topic.topic_id.clone(),
            rep: job.rep,
            error: e.to_string(),
        },
    }
}

/// Summarize one record into a results row: completed traces are truncated
/// to the budget and scored under `model`; failures carry their error.
pub fn record_to_row(record: &SessionRecord, model: &CostModel, budget_seconds: f64) -> ResultRow {
    match record {
        SessionRecord::Completed { rep, trace } => {
            let truncated = truncate_to_budget(trace, budget_seconds);
            let summary = summarize(&truncated, model);
            ResultRow {
                strategy: trace.config.strategy,
                mi: trace.config.mi,
                q: trace.config.queries,
                f: trace.config.feedback_rounds,
                a: trace.config.assessments,
                l: trace.config.query_length,
                topic_id: trace.topic_id.clone(),
                rep: *rep,
                gain: summary.gain,
                cost: summary.cost,
                rate: summary.rate,
                n_q: summary.turn_counts.queries,
                n_f: summary.turn_counts.feedbacks,
                n_a: summary.turn_counts.assessments,
                error: None,
            }
        }
        SessionRecord::Failed {
            strategy,
            mi,
            q,
            f,
            a,
            l,
            topic_id,
            rep,
            error,
        } => ResultRow {
            strategy: *strategy,
            mi: *mi,
            q: *q,
            f: *f,
            a: *a,
            l: *l,
            topic_id: topic_id.clone(),
            rep: *rep,
            gain: 0.0,
            cost: 0.0,
            rate: 0.0,
            n_q: 0,
            n_f: 0,
            n_a: 0,
            error: Some(error.clone()),
        },
    }
}

/// Write the long results CSV.
pub fn write_results_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "strategy", "mi", "q", "f", "a", "l", "topic_id", "rep", "g", "c", "r", "n_q", "n_f",
        "n_a", "error",
    ])?;
    for row in rows {
        writer.write_record([
            row.strategy.to_string(),
            row.mi.to_string(),
            row.q.to_string(),
            row.f.to_string(),
            row.a.to_string(),
            row.l.to_string(),
            row.topic_id.clone(),
            row.rep.to_string(),
            row.gain.to_string(),
            row.cost.to_string(),
            row.rate.to_string(),
            row.n_q.to_string(),
            row.n_f.to_string(),
            row.n_a.to_string(),
            row.error.clone().unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Append session records as JSON lines.
fn write_records_jsonl(records: &[SessionRecord], out: &mut impl Write, path: &Path) -> Result<()> {
    for record in records {
        let json = serde_json::to_string(record)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        writeln!(out, "{json}")?;
    }
    Ok(())
}

/// Read back a trace stream written by [`run_experiment`].
pub fn read_records_jsonl(path: &Path) -> Result<Vec<SessionRecord>> {
    let file_name = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SessionRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(&file_name, idx + 1, format!("bad session record: {e}")))?;
        records.push(record);
    }
    Ok(records)
}

/// Jobs processed per flush; keeps memory bounded while results land on
/// disk incrementally in deterministic order.
const CHUNK_SIZE: usize = 512;

/// Run the full sweep described by `cfg`, writing all result and report
/// files into `cfg.out_dir`. Deterministic for a fixed master seed: session
/// seeds are derived per job and output order never depends on thread
/// scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let (corpus, bank, warnings) = prepare_corpus(cfg)?;
    let sim = Simulator::new(&corpus)?;
    let jobs = plan_jobs(cfg, corpus.topics.len());

    let results_path = cfg.out_dir.join("results.csv");
    let traces_path = cfg.out_dir.join("traces.jsonl");
    let mut csv_writer = csv::Writer::from_path(&results_path)?;
    csv_writer.write_record([
        "strategy", "mi", "q", "f", "a", "l", "topic_id", "rep", "g", "c", "r", "n_q", "n_f",
        "n_a", "error",
    ])?;
    let mut trace_writer = if cfg.persist_traces {
        Some(BufWriter::new(File::create(&traces_path)?))
    } else {
        None
    };

    let mut all_records: Vec<SessionRecord> = Vec::with_capacity(jobs.len());
    let mut all_rows: Vec<ResultRow> = Vec::with_capacity(jobs.len());
    let mut failures = 0u64;
    for chunk in jobs.chunks(CHUNK_SIZE) {
        let records: Vec<SessionRecord> = chunk
            .par_iter()
            .map(|job| run_job(cfg, &sim, bank.as_ref(), job))
            .collect();
        for record in &records {
            let row = record_to_row(record, &cfg.cost_model, cfg.budget_seconds);
            if row.error.is_some() {
                failures += 1;
            }
            csv_writer.write_record([
                row.strategy.to_string(),
                row.mi.to_string(),
                row.q.to_string(),
                row.f.to_string(),
                row.a.to_string(),
                row.l.to_string(),
                row.topic_id.clone(),
                row.rep.to_string(),
                row.gain.to_string(),
                row.cost.to_string(),
                row.rate.to_string(),
                row.n_q.to_string(),
                row.n_f.to_string(),
                row.n_a.to_string(),
                row.error.clone().unwrap_or_default(),
            ])?;
            all_rows.push(row);
        }
        csv_writer.flush()?;
        if let Some(out) = trace_writer.as_mut() {
            write_records_jsonl(&records, out, &traces_path)?;
            out.flush()?;
        }
        all_records.extend(records);
    }
    csv_writer.flush()?;
    drop(csv_writer);
    if let Some(mut out) = trace_writer.take() {
        out.flush()?;
    }

    // Aggregates and plot-ready report tables.
    reports::write_aggregated_csv(&all_rows, &cfg.out_dir.join("aggregated.csv"))?;
    let frontier = reports::emit_frontier(
        &all_records,
        &cfg.cost_model,
        cfg.budget_seconds,
        cfg.report_query_length,
    );
    reports::write_frontier_csv(&frontier, &cfg.out_dir.join("frontier.csv"))?;
    reports::write_rate_by_assessments_csv(
        &all_rows,
        cfg.report_query_length,
        &cfg.out_dir.join("rate_by_assessments.csv"),
    )?;
    reports::write_query_length_csv(&all_rows, &cfg.out_dir.join("query_length.csv"))?;
    reports::write_best_settings_csv(
        &all_records,
        &cfg.cost_model,
        &cfg.gain_targets,
        cfg.report_query_length,
        &cfg.out_dir.join("best_settings.csv"),
    )?;
    for step in &cfg.sensitivity {
        let rows =
            reports::sensitivity_rows(&all_records, &cfg.cost_model, cfg.budget_seconds, *step);
        let name = format!("sensitivity_{}_x{}.csv", step.parameter, step.factor);
        write_results_csv(&rows, &cfg.out_dir.join(name))?;
    }

    Ok(RunSummary {
        rows: all_rows.len() as u64,
        failures,
        out_dir: cfg.out_dir.clone(),
        warnings,
    })
}

/// Re-score stored session records into result rows (the `summarize`
/// subcommand). With the original cost model and budget this reproduces
/// the run's results.csv bit-exactly.
pub fn summarize_records(
    records: &[SessionRecord],
    model: &CostModel,
    budget_seconds: f64,
) -> Vec<ResultRow> {
    records
        .iter()
        .map(|r| record_to_row(r, model, budget_seconds))
        .collect()
}
