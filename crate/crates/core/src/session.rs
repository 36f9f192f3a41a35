//! Session execution: one conversational search session as a deterministic
//! schedule of query, feedback, and assessment turns.
//!
//! Two strategies instantiate the schedule per query block:
//!
//! - feedback-first: query, F feedback rounds, then A assessments;
//! - feedback-after: query, A assessments, then F repetitions of one
//!   feedback round followed by A assessments.
//!
//! Gain is 1 on an assessment of a relevant, not-previously-assessed
//! document and 0 otherwise. A memory of presented results persists across
//! the whole session, so no document is ever shown twice.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Topic};
use crate::error::{Error, Result};
use crate::feedback::{
    generate_suggestions, next_clarification, select_suggestion, ClarificationBank,
    FeedbackOutcome, Mechanism,
};
use crate::lm::{build_lm, generate_query, score_terms, QuerySampling, ScoredTermList};
use crate::metrics::{payload_cost, CostModel};
use crate::retrieval::{QueryState, SearchIndex, SeenMemory};

/// The three conversational turn types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnType {
    Query,
    Feedback,
    Assessment,
}

impl std::fmt::Display for TurnType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TurnType::Query => write!(f, "query"),
            TurnType::Feedback => write!(f, "feedback"),
            TurnType::Assessment => write!(f, "assessment"),
        }
    }
}

/// When the user gives feedback relative to assessing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// All feedback rounds run before any assessment of a query block.
    #[serde(rename = "ff")]
    FeedbackFirst,
    /// Assessment blocks alternate with feedback rounds after the first.
    #[serde(rename = "fa")]
    FeedbackAfter,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::FeedbackFirst => write!(f, "ff"),
            Strategy::FeedbackAfter => write!(f, "fa"),
        }
    }
}

/// Which mixed-initiative mechanism the agent offers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MixedInitiative {
    /// Clarifying questions answered from a per-topic bank.
    #[serde(rename = "qc")]
    Clarification,
    /// Generated query suggestions, one picked at random.
    #[serde(rename = "qs")]
    Suggestion,
    /// No feedback mechanism; every feedback turn exhausts immediately,
    /// making the session equivalent to F = 0.
    #[serde(rename = "none")]
    NoFeedback,
}

impl std::fmt::Display for MixedInitiative {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MixedInitiative::Clarification => write!(f, "qc"),
            MixedInitiative::Suggestion => write!(f, "qs"),
            MixedInitiative::NoFeedback => write!(f, "none"),
        }
    }
}

fn default_term_cutoff() -> usize {
    20
}

/// Everything needed to execute one session deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub strategy: Strategy,
    pub mi: MixedInitiative,
    /// Q: number of query blocks.
    pub queries: u32,
    /// F: feedback rounds per query block.
    pub feedback_rounds: u32,
    /// A: assessments per assessment block.
    pub assessments: u32,
    /// L: terms per generated query.
    pub query_length: u32,
    pub cost_model: CostModel,
    pub seed: u64,
    /// Interpolation weight between query and feedback likelihoods.
    pub lambda: f64,
    /// Dirichlet smoothing parameter.
    pub mu: f64,
    /// Candidate terms kept for query generation and suggestions.
    #[serde(default = "default_term_cutoff")]
    pub term_cutoff: usize,
    #[serde(default)]
    pub query_sampling: QuerySampling,
    /// Keep accumulated feedback terms across re-queries instead of
    /// resetting them (the default resets; the clarification cursor is
    /// never rewound either way).
    #[serde(default)]
    pub carry_feedback: bool,
    /// Retrieval depth per ranking; defaults to max(A, 20).
    #[serde(default)]
    pub rank_depth: Option<usize>,
}

impl SessionConfig {
    /// Check the schedule and retrieval parameters.
    pub fn validate(&self) -> Result<()> {
        if self.queries < 1 {
            return Err(Error::Config("Q (queries) must be >= 1".into()));
        }
        if self.assessments < 1 {
            return Err(Error::Config("A (assessments) must be >= 1".into()));
        }
        if self.query_length < 1 {
            return Err(Error::Config("L (query length) must be >= 1".into()));
        }
        if self.term_cutoff < self.query_length as usize {
            return Err(Error::Config(format!(
                "term_cutoff {} cannot satisfy query length {}",
                self.term_cutoff, self.query_length
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.mu <= 0.0 {
            return Err(Error::Config(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        self.cost_model.validate()
    }

    fn rank_depth(&self) -> usize {
        self.rank_depth
            .unwrap_or((self.assessments as usize).max(20))
    }
}

/// What happened in one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TurnPayload {
    Query { terms: Vec<String> },
    Feedback { terms: Vec<String> },
    Assessment { doc_id: String, relevant: bool },
}

impl TurnPayload {
    pub fn turn_type(&self) -> TurnType {
        match self {
            TurnPayload::Query { .. } => TurnType::Query,
            TurnPayload::Feedback { .. } => TurnType::Feedback,
            TurnPayload::Assessment { .. } => TurnType::Assessment,
        }
    }
}

/// One executed turn with its gain and cost in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    #[serde(flatten)]
    pub payload: TurnPayload,
    pub gain: f64,
    pub cost: f64,
}

impl Turn {
    pub fn turn_type(&self) -> TurnType {
        self.payload.turn_type()
    }
}

/// Schedule deviations observed while executing a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SessionEvents {
    /// Feedback turns skipped because the mechanism was exhausted.
    pub feedback_exhausted: u32,
    /// Assessment blocks that ran out of unseen results.
    pub assessment_truncated: u32,
}

impl SessionEvents {
    pub fn none(&self) -> bool {
        self.feedback_exhausted == 0 && self.assessment_truncated == 0
    }
}

/// The ordered turns of one executed session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub config: SessionConfig,
    pub topic_id: String,
    pub turns: Vec<Turn>,
    pub events: SessionEvents,
}

impl SessionTrace {
    /// Sum of per-turn gains.
    pub fn total_gain(&self) -> f64 {
        self.turns.iter().map(|t| t.gain).sum()
    }

    /// Sum of the costs stored at execution time.
    pub fn stored_cost(&self) -> f64 {
        self.turns.iter().map(|t| t.cost).sum()
    }

    /// Tally executed turns by type.
    pub fn executed_counts(&self) -> TurnCounts {
        let mut counts = TurnCounts::default();
        for turn in &self.turns {
            match turn.turn_type() {
                TurnType::Query => counts.queries += 1,
                TurnType::Feedback => counts.feedbacks += 1,
                TurnType::Assessment => counts.assessments += 1,
            }
        }
        counts.total = counts.queries + counts.feedbacks + counts.assessments;
        counts
    }
}

/// Turn totals by type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TurnCounts {
    pub total: u64,
    pub queries: u64,
    pub feedbacks: u64,
    pub assessments: u64,
}

/// Schedule-nominal turn counts, assuming no truncation or exhaustion.
///
/// Feedback-first runs Q * (F + A) feedback-plus-assessment turns;
/// feedback-after runs Q * (F + 1) * A assessment turns.
pub fn count_turns(config: &SessionConfig) -> TurnCounts {
    let q = u64::from(config.queries);
    let f = u64::from(config.feedback_rounds);
    let a = u64::from(config.assessments);
    let (feedbacks, assessments) = match config.strategy {
        Strategy::FeedbackFirst => (q * f, q * a),
        Strategy::FeedbackAfter => (q * f, q * (f + 1) * a),
    };
    TurnCounts {
        total: q + feedbacks + assessments,
        queries: q,
        feedbacks,
        assessments,
    }
}

/// Longest prefix of the trace whose cumulative stored cost stays within
/// `budget_seconds`; never splits a turn.
pub fn truncate_to_budget(trace: &SessionTrace, budget_seconds: f64) -> SessionTrace {
    let mut cumulative = 0.0;
    let mut turns = Vec::new();
    for turn in &trace.turns {
        cumulative += turn.cost;
        if cumulative <= budget_seconds {
            turns.push(turn.clone());
        } else {
            break;
        }
    }
    SessionTrace {
        config: trace.config.clone(),
        topic_id: trace.topic_id.clone(),
        turns,
        events: trace.events,
    }
}

/// Shared, read-only session executor over one corpus.
pub struct Simulator<'c> {
    corpus: &'c Corpus,
    index: SearchIndex,
}

struct SessionState<'a> {
    config: &'a SessionConfig,
    topic: &'a Topic,
    scored: &'a ScoredTermList,
    bank: Option<&'a ClarificationBank>,
    rng: ChaCha8Rng,
    memory: SeenMemory,
    assessed: BTreeSet<String>,
    used_feedback: BTreeSet<String>,
    clarification_cursor: usize,
    turns: Vec<Turn>,
    events: SessionEvents,
}

impl<'c> Simulator<'c> {
    /// Build the search index once; the simulator is then shareable across
    /// threads, each session owning its own rng and memory.
    pub fn new(corpus: &'c Corpus) -> Result<Self> {
        Ok(Simulator {
            corpus,
            index: SearchIndex::build(corpus)?,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus
    }

    pub fn index(&self) -> &SearchIndex {
        &self.index
    }

    /// Scored candidate terms for a topic (query-generation input).
    pub fn scored_terms(&self, topic: &Topic, cutoff: usize) -> Result<ScoredTermList> {
        let rel_docs = self.corpus.relevant_documents(topic);
        let topic_lm = build_lm(rel_docs)?;
        Ok(score_terms(&topic_lm, self.index.collection_lm(), cutoff))
    }

    /// Execute one session; bit-reproducible for fixed inputs and seed.
    pub fn run_session(
        &self,
        topic: &Topic,
        config: &SessionConfig,
        bank: Option<&ClarificationBank>,
    ) -> Result<SessionTrace> {
        config.validate()?;
        if config.mi == MixedInitiative::Clarification && bank.is_none() {
            return Err(Error::Config(
                "clarification feedback requires a clarification bank".into(),
            ));
        }
        let scored = self.scored_terms(topic, config.term_cutoff)?;
        let mut state = SessionState {
            config,
            topic,
            scored: &scored,
            bank,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            memory: SeenMemory::new(),
            assessed: BTreeSet::new(),
            used_feedback: BTreeSet::new(),
            clarification_cursor: 0,
            turns: Vec::new(),
            events: SessionEvents::default(),
        };

        let mut carried: Vec<String> = Vec::new();
        for _ in 0..config.queries {
            let original = generate_query(
                &scored,
                config.query_length as usize,
                config.query_sampling,
                &mut state.rng,
            )?;
            let mut query_state = QueryState::new(original.clone(), config.lambda, config.mu)?;
            if config.carry_feedback {
                query_state.push_feedback(carried.iter().cloned());
            }
            let payload = TurnPayload::Query { terms: original };
            let cost = payload_cost(&payload, &config.cost_model);
            state.turns.push(Turn {
                payload,
                gain: 0.0,
                cost,
            });

            match config.strategy {
                Strategy::FeedbackFirst => {
                    for _ in 0..config.feedback_rounds {
                        self.feedback_turn(&mut state, &mut query_state)?;
                    }
                    self.assessment_block(&mut state, &query_state);
                }
                Strategy::FeedbackAfter => {
                    self.assessment_block(&mut state, &query_state);
                    for _ in 0..config.feedback_rounds {
                        self.feedback_turn(&mut state, &mut query_state)?;
                        self.assessment_block(&mut state, &query_state);
                    }
                }
            }
            if config.carry_feedback {
                carried = query_state.feedback_terms.clone();
            }
        }

        Ok(SessionTrace {
            config: config.clone(),
            topic_id: topic.topic_id.clone(),
            turns: state.turns,
            events: state.events,
        })
    }

    fn feedback_turn(
        &self,
        state: &mut SessionState<'_>,
        query_state: &mut QueryState,
    ) -> Result<()> {
        let outcome: Option<FeedbackOutcome> = match state.config.mi {
            MixedInitiative::NoFeedback => None,
            MixedInitiative::Clarification => {
                let bank = state.bank.expect("presence checked in run_session");
                let outcome =
                    next_clarification(bank, &state.topic.topic_id, state.clarification_cursor)?;
                if !outcome.exhausted {
                    state.clarification_cursor += 1;
                }
                Some(outcome)
            }
            MixedInitiative::Suggestion => {
                let mut used = state.used_feedback.clone();
                used.extend(query_state.original_terms.iter().cloned());
                let set = generate_suggestions(
                    state.scored,
                    &used,
                    state.config.query_sampling,
                    &mut state.rng,
                );
                Some(select_suggestion(&set, &mut state.rng))
            }
        };

        match outcome {
            None => state.events.feedback_exhausted += 1,
            Some(outcome) if outcome.exhausted => state.events.feedback_exhausted += 1,
            Some(outcome) => {
                debug_assert!(matches!(
                    outcome.mechanism,
                    Mechanism::Clarification | Mechanism::Suggestion
                ));
                // Never add the same feedback term twice in a session, and
                // skip terms already in the active query.
                let mut terms = Vec::new();
                for term in outcome.terms_added {
                    if !state.used_feedback.contains(&term)
                        && !query_state.original_terms.contains(&term)
                        && !terms.contains(&term)
                    {
                        terms.push(term);
                    }
                }
                state.used_feedback.extend(terms.iter().cloned());
                query_state.push_feedback(terms.iter().cloned());
                let payload = TurnPayload::Feedback { terms };
                let cost = payload_cost(&payload, &state.config.cost_model);
                state.turns.push(Turn {
                    payload,
                    gain: 0.0,
                    cost,
                });
            }
        }
        Ok(())
    }

    fn assessment_block(&self, state: &mut SessionState<'_>, query_state: &QueryState) {
        let list = self.index.rank(
            state.topic,
            query_state,
            &state.memory,
            state.config.rank_depth(),
        );
        let planned = state.config.assessments as usize;
        if list.len() < planned {
            state.events.assessment_truncated += 1;
        }
        for entry in list.entries.iter().take(planned) {
            let novel = !state.assessed.contains(&entry.doc_id);
            let gain = if entry.relevant && novel { 1.0 } else { 0.0 };
            state.assessed.insert(entry.doc_id.clone());
            state.memory.insert(entry.doc_id.clone());
            let payload = TurnPayload::Assessment {
                doc_id: entry.doc_id.clone(),
                relevant: entry.relevant,
            };
            let cost = payload_cost(&payload, &state.config.cost_model);
            state.turns.push(Turn {
                payload,
                gain,
                cost,
            });
        }
    }
}
