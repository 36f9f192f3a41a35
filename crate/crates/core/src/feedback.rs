//! Mixed-initiative feedback: clarification question banks and generated
//! query suggestions with random user selection.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::lm::{
    build_lm, sample_without_replacement, score_terms, QuerySampling, ScoredTerm, ScoredTermList,
};
use crate::text::Preprocessor;

/// One clarifying question with the terms its answer contributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarificationEntry {
    pub question: String,
    pub answer_terms: Vec<String>,
}

/// Per-topic ordered clarification entries, consumed sequentially.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClarificationBank {
    entries: BTreeMap<String, Vec<ClarificationEntry>>,
}

impl ClarificationBank {
    pub fn new(entries: BTreeMap<String, Vec<ClarificationEntry>>) -> Self {
        ClarificationBank { entries }
    }

    /// Entries for a topic, in consumption order.
    pub fn entries_for(&self, topic_id: &str) -> Option<&[ClarificationEntry]> {
        self.entries.get(topic_id).map(Vec::as_slice)
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Read a bank file: a JSON object mapping topic id to entry list.
    ///
    /// Answer terms pass through the same pre-processing as corpus tokens.
    /// Entries whose processed answers are empty are dropped with a warning.
    pub fn load(path: &Path, pre: &Preprocessor) -> Result<(Self, Vec<String>)> {
        let file_name = path.display().to_string();
        let reader = BufReader::new(File::open(path)?);
        let raw: BTreeMap<String, Vec<ClarificationEntry>> =
            serde_json::from_reader(reader).map_err(|e| Error::json(&file_name, e))?;
        let mut warnings = Vec::new();
        let mut entries = BTreeMap::new();
        for (topic_id, topic_entries) in raw {
            let mut kept = Vec::with_capacity(topic_entries.len());
            for (i, entry) in topic_entries.into_iter().enumerate() {
                let answer_terms: Vec<String> = entry
                    .answer_terms
                    .iter()
                    .flat_map(|t| pre.process(t))
                    .collect();
                if answer_terms.is_empty() {
                    warnings.push(format!(
                        "{file_name}: topic {topic_id:?} entry {i}: no usable answer terms; dropped"
                    ));
                } else {
                    kept.push(ClarificationEntry {
                        question: entry.question,
                        answer_terms,
                    });
                }
            }
            entries.insert(topic_id, kept);
        }
        Ok((ClarificationBank { entries }, warnings))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.entries)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{json}")?;
        out.flush()?;
        Ok(())
    }

    /// Build a bank from a corpus: each round's answer carries the next
    /// most discriminative unused terms of one facet, visiting facets
    /// round-robin so successive clarifications steer toward different
    /// facets of the topic.
    pub fn synthesize(corpus: &Corpus, rounds: usize, terms_per_answer: usize) -> Result<Self> {
        if terms_per_answer == 0 {
            return Err(Error::Config("terms_per_answer must be >= 1".into()));
        }
        let collection_lm = build_lm(corpus.documents.values())?;
        let mut entries = BTreeMap::new();
        for topic in &corpus.topics {
            let facet_lists: Vec<Option<ScoredTermList>> = topic
                .facets
                .iter()
                .map(|facet| {
                    let docs: Vec<_> = facet
                        .relevant_docs
                        .iter()
                        .filter_map(|id| corpus.documents.get(id))
                        .collect();
                    build_lm(docs)
                        .ok()
                        .map(|lm| score_terms(&lm, &collection_lm, usize::MAX))
                })
                .collect();
            let mut used: BTreeSet<String> = BTreeSet::new();
            let mut topic_entries = Vec::new();
            'rounds: for round in 0..rounds {
                // Start at the round-robin facet; fall through to the next
                // facet with unused terms if it is exhausted.
                for offset in 0..topic.facets.len() {
                    let f = (round + offset) % topic.facets.len();
                    let Some(list) = &facet_lists[f] else {
                        continue;
                    };
                    let terms: Vec<String> = list
                        .entries()
                        .iter()
                        .filter(|e| !used.contains(&e.term))
                        .take(terms_per_answer)
                        .map(|e| e.term.clone())
                        .collect();
                    if terms.is_empty() {
                        continue;
                    }
                    used.extend(terms.iter().cloned());
                    topic_entries.push(ClarificationEntry {
                        question: format!("Are you interested in {}?", topic.facets[f].description),
                        answer_terms: terms,
                    });
                    continue 'rounds;
                }
                break; // every facet exhausted
            }
            entries.insert(topic.topic_id.clone(), topic_entries);
        }
        Ok(ClarificationBank { entries })
    }
}

/// Which mixed-initiative mechanism produced a feedback outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Clarification,
    Suggestion,
}

/// The result of one feedback round: the terms to add, or exhaustion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackOutcome {
    pub terms_added: Vec<String>,
    pub mechanism: Mechanism,
    pub exhausted: bool,
}

impl FeedbackOutcome {
    pub fn exhausted(mechanism: Mechanism) -> Self {
        FeedbackOutcome {
            terms_added: Vec::new(),
            mechanism,
            exhausted: true,
        }
    }
}

/// Answer terms of the clarification at `round_index`, or an exhausted
/// outcome once the topic's entries run out.
pub fn next_clarification(
    bank: &ClarificationBank,
    topic_id: &str,
    round_index: usize,
) -> Result<FeedbackOutcome> {
    let entries = bank.entries_for(topic_id).ok_or_else(|| {
        Error::Config(format!(
            "clarification bank has no entries for topic {topic_id:?}"
        ))
    })?;
    Ok(match entries.get(round_index) {
        Some(entry) => FeedbackOutcome {
            terms_added: entry.answer_terms.clone(),
            mechanism: Mechanism::Clarification,
            exhausted: false,
        },
        None => FeedbackOutcome::exhausted(Mechanism::Clarification),
    })
}

/// Candidate refinements offered to the user in one suggestion round.
#[derive(Debug, Clone, PartialEq)]
pub struct SuggestionSet {
    /// Candidate term lists (single terms here), pairwise distinct.
    pub options: Vec<Vec<String>>,
    /// Relative-entropy score of each option's source term.
    pub source_scores: Vec<f64>,
}

impl SuggestionSet {
    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }
}

/// Number of suggestions offered per feedback round.
pub const SUGGESTIONS_PER_ROUND: usize = 4;

/// Draw up to four distinct single-term suggestions from the scored list,
/// excluding terms in `already_used` (accumulated feedback plus the current
/// query). Fewer than four options means the candidates are exhausted.
pub fn generate_suggestions<R: Rng>(
    scored: &ScoredTermList,
    already_used: &BTreeSet<String>,
    sampling: QuerySampling,
    rng: &mut R,
) -> SuggestionSet {
    let candidates: Vec<ScoredTerm> = scored
        .entries()
        .iter()
        .filter(|e| !already_used.contains(&e.term))
        .cloned()
        .collect();
    let picked = sample_without_replacement(&candidates, SUGGESTIONS_PER_ROUND, sampling, rng);
    let mut options = Vec::with_capacity(picked.len());
    let mut source_scores = Vec::with_capacity(picked.len());
    for i in picked {
        options.push(vec![candidates[i].term.clone()]);
        source_scores.push(candidates[i].score);
    }
    SuggestionSet {
        options,
        source_scores,
    }
}

/// The user picks one suggestion uniformly at random.
pub fn select_suggestion<R: Rng>(set: &SuggestionSet, rng: &mut R) -> FeedbackOutcome {
    if set.is_empty() {
        return FeedbackOutcome::exhausted(Mechanism::Suggestion);
    }
    let idx = rng.random_range(0..set.options.len());
    FeedbackOutcome {
        terms_added: set.options[idx].clone(),
        mechanism: Mechanism::Suggestion,
        exhausted: false,
    }
}
