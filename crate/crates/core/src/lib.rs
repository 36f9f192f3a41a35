//! Simulation and offline evaluation of conversational search sessions.
//!
//! The crate models a user conversing with a search agent through three
//! turn types (query, feedback, assessment), executes fixed-schedule
//! sessions under the feedback-first and feedback-after strategies with
//! clarification- or suggestion-based mixed initiative, and measures
//! turn-based cumulative gain, cost, and rate of gain across experiment
//! grids.
//!
//! Modules:
//! - [`corpus`]: documents, topics, facets, qrels, synthetic corpora
//! - [`text`]: token pre-processing (stopwords, Porter stemming)
//! - [`lm`]: unigram language models and relative-entropy query generation
//! - [`retrieval`]: query-likelihood ranking with seen-result filtering
//! - [`feedback`]: clarification banks and query suggestions
//! - [`session`]: the session state machine and trace types
//! - [`metrics`]: gain/cost/rate summaries, cost model, best settings
//! - [`runner`]: experiment grids, parallel execution, CSV reports
//! - [`stats`]: paired-difference tests used by reports and checks

pub mod corpus;
pub mod error;
pub mod feedback;
pub mod lm;
pub mod metrics;
pub mod retrieval;
pub mod runner;
pub mod session;
pub mod stats;
pub mod text;

pub use corpus::{
    filter_topics, generate_synthetic_corpus, load_corpus, save_corpus, Corpus, CorpusLoad,
    Document, Facet, SyntheticSpec, Topic,
};
pub use error::{Error, Result};
pub use feedback::{
    generate_suggestions, next_clarification, select_suggestion, ClarificationBank,
    ClarificationEntry, FeedbackOutcome, Mechanism, SuggestionSet,
};
pub use lm::{
    build_lm, generate_query, score_terms, QuerySampling, ScoredTerm, ScoredTermList,
    TermDistribution,
};
pub use metrics::{
    best_settings, payload_cost, prefix_to_gain, summarize, turn_cost, AssessmentCostMode,
    BestSetting, ConfigAggregate, CostModel, CostParameter, GainPrefix, MetricSummary,
    SettingsCell,
};
pub use retrieval::{
    mark_seen, score_document, QueryState, RankedEntry, RankedList, SearchIndex, SeenMemory,
};
pub use runner::{
    condition_cells, derive_seed, expected_row_count, prepare_corpus, read_records_jsonl,
    run_experiment, summarize_records, write_results_csv, BankSource, CorpusSource,
    ExperimentConfig, Grid, GridRange, ResultRow, RunSummary, SensitivityStep, SessionRecord,
};
pub use session::{
    count_turns, truncate_to_budget, MixedInitiative, SessionConfig, SessionEvents, SessionTrace,
    Simulator, Strategy, Turn, TurnCounts, TurnPayload, TurnType,
};
pub use text::{Preprocessor, Stemmer};
