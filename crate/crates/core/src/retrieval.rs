//! Dirichlet-smoothed query-likelihood ranking with feedback interpolation
//! and a session-scoped memory of already-presented results.
//!
//! A document's score is the log query likelihood of the original query,
//! linearly interpolated with the log query likelihood of the accumulated
//! feedback terms:
//!
//! ```text
//! score(d) = lambda * QL(original | d) + (1 - lambda) * QL(feedback | d)
//! QL(terms | d) = sum_t ln( (count_d(t) + mu * p_coll(t)) / (len_d + mu) )
//! ```
//!
//! With no feedback terms the score is the plain query likelihood,
//! independent of `lambda`.

use std::collections::{BTreeSet, HashMap};

use crate::corpus::{Corpus, Document, Topic};
use crate::error::{Error, Result};
use crate::lm::{build_lm, TermDistribution};

/// The active query: original terms plus feedback terms accumulated over
/// the session, with the retrieval parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryState {
    pub original_terms: Vec<String>,
    pub feedback_terms: Vec<String>,
    pub lambda: f64,
    pub mu: f64,
}

impl QueryState {
    pub fn new(original_terms: Vec<String>, lambda: f64, mu: f64) -> Result<Self> {
        if original_terms.is_empty() {
            return Err(Error::InvalidArgument(
                "query must have at least one term".into(),
            ));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!(
                "interpolation weight lambda must lie in [0, 1], got {lambda}"
            )));
        }
        if mu <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "smoothing parameter mu must be positive, got {mu}"
            )));
        }
        Ok(QueryState {
            original_terms,
            feedback_terms: Vec::new(),
            lambda,
            mu,
        })
    }

    /// Append feedback terms; the list only ever grows within a session.
    pub fn push_feedback<I: IntoIterator<Item = String>>(&mut self, terms: I) {
        self.feedback_terms.extend(terms);
    }
}

/// Documents the user has already been shown this session.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeenMemory {
    seen: BTreeSet<String>,
}

impl SeenMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.seen.contains(doc_id)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    pub fn insert(&mut self, doc_id: impl Into<String>) {
        self.seen.insert(doc_id.into());
    }
}

/// One ranked result with its relevance resolved against the active topic.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub doc_id: String,
    pub score: f64,
    pub relevant: bool,
}

/// Unseen documents in non-increasing score order (ties by ascending id).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Record the given results as seen.
pub fn mark_seen(memory: &mut SeenMemory, items: &[RankedEntry]) {
    for item in items {
        memory.insert(item.doc_id.clone());
    }
}

fn smoothed_log_prob(count: f64, doc_len: f64, p_coll: f64, mu: f64) -> f64 {
    ((count + mu * p_coll) / (doc_len + mu)).ln()
}

/// Reference scorer working directly over a document's term list.
///
/// [`SearchIndex`] computes the same quantity from pre-built statistics;
/// the two paths are checked against each other in the test suites.
pub fn score_document(doc: &Document, state: &QueryState, collection_lm: &TermDistribution) -> f64 {
    let doc_len = doc.terms.len() as f64;
    let ql = |terms: &[String]| -> f64 {
        terms
            .iter()
            .map(|t| {
                let count = doc.terms.iter().filter(|dt| *dt == t).count() as f64;
                smoothed_log_prob(count, doc_len, collection_lm.prob_or_floor(t), state.mu)
            })
            .sum()
    };
    let original = ql(&state.original_terms);
    if state.feedback_terms.is_empty() {
        original
    } else {
        state.lambda * original + (1.0 - state.lambda) * ql(&state.feedback_terms)
    }
}

struct DocStats {
    doc_id: String,
    len: f64,
    counts: HashMap<String, u32>,
}

/// Per-document term statistics plus the collection language model,
/// built once per corpus and shared read-only across session workers.
pub struct SearchIndex {
    collection_lm: TermDistribution,
    docs: Vec<DocStats>,
}

impl SearchIndex {
    /// Build statistics for every document in the corpus.
    pub fn build(corpus: &Corpus) -> Result<Self> {
        let collection_lm = build_lm(corpus.documents.values())?;
        let docs = corpus
            .documents
            .values()
            .map(|doc| {
                let mut counts: HashMap<String, u32> = HashMap::new();
                for term in &doc.terms {
                    *counts.entry(term.clone()).or_insert(0) += 1;
                }
                DocStats {
                    doc_id: doc.doc_id.clone(),
                    len: doc.terms.len() as f64,
                    counts,
                }
            })
            .collect();
        Ok(SearchIndex {
            collection_lm,
            docs,
        })
    }

    /// The maximum-likelihood model over the whole collection.
    pub fn collection_lm(&self) -> &TermDistribution {
        &self.collection_lm
    }

    fn score_stats(&self, stats: &DocStats, state: &QueryState) -> f64 {
        let ql = |terms: &[String]| -> f64 {
            terms
                .iter()
                .map(|t| {
                    let count = stats.counts.get(t).copied().unwrap_or(0) as f64;
                    smoothed_log_prob(
                        count,
                        stats.len,
                        self.collection_lm.prob_or_floor(t),
                        state.mu,
                    )
                })
                .sum()
        };
        let original = ql(&state.original_terms);
        if state.feedback_terms.is_empty() {
            original
        } else {
            state.lambda * original + (1.0 - state.lambda) * ql(&state.feedback_terms)
        }
    }

    /// Score one document by id.
    pub fn score(&self, doc_id: &str, state: &QueryState) -> Option<f64> {
        self.docs
            .iter()
            .find(|d| d.doc_id == doc_id)
            .map(|d| self.score_stats(d, state))
    }

    /// Rank the top `depth` unseen documents for `state`.
    ///
    /// Ties break by ascending doc id; fewer than `depth` unseen documents
    /// yields a shorter list.
    pub fn rank(
        &self,
        topic: &Topic,
        state: &QueryState,
        memory: &SeenMemory,
        depth: usize,
    ) -> RankedList {
        let mut scored: Vec<(f64, &DocStats)> = self
            .docs
            .iter()
            .filter(|d| !memory.contains(&d.doc_id))
            .map(|d| (self.score_stats(d, state), d))
            .collect();
        scored.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| a.1.doc_id.cmp(&b.1.doc_id))
        });
        scored.truncate(depth);
        RankedList {
            entries: scored
                .into_iter()
                .map(|(score, d)| RankedEntry {
                    doc_id: d.doc_id.clone(),
                    score,
                    relevant: topic.is_relevant(&d.doc_id),
                })
                .collect(),
        }
    }
}
