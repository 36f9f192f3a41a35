//! Unigram language models and query generation.
//!
//! Queries are simulated by building a maximum-likelihood model over a
//! topic's relevant documents, scoring each term by its pointwise
//! relative-entropy contribution against the collection model, and sampling
//! terms without replacement from the top of that ranking.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

/// A normalized unigram distribution over terms.
///
/// Zero-probability terms are never stored; the total mass is within 1e-9
/// of one by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDistribution {
    probs: BTreeMap<String, f64>,
    total_mass: f64,
}

impl TermDistribution {
    /// Normalize raw counts into a distribution.
    pub fn from_counts(counts: BTreeMap<String, u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(Error::InvalidArgument(
                "cannot build a language model from zero terms".into(),
            ));
        }
        let probs: BTreeMap<String, f64> = counts
            .into_iter()
            .filter(|(_, c)| *c > 0)
            .map(|(t, c)| (t, c as f64 / total as f64))
            .collect();
        let total_mass = probs.values().sum();
        Ok(TermDistribution { probs, total_mass })
    }

    /// Stored probability of `term`, if present.
    pub fn prob(&self, term: &str) -> Option<f64> {
        self.probs.get(term).copied()
    }

    /// Floor probability used for terms absent from this model:
    /// `1 / (10 * vocabulary size)`.
    pub fn smoothing_floor(&self) -> f64 {
        1.0 / (10.0 * self.probs.len() as f64)
    }

    /// Probability of `term`, falling back to the smoothing floor.
    pub fn prob_or_floor(&self, term: &str) -> f64 {
        self.prob(term).unwrap_or_else(|| self.smoothing_floor())
    }

    /// Number of distinct terms.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    /// True when the model holds no terms.
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Sum of stored probabilities.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Iterate terms and probabilities in lexicographic term order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(t, p)| (t.as_str(), *p))
    }
}

/// Maximum-likelihood unigram model over the concatenation of `docs`.
pub fn build_lm<'a, I>(docs: I) -> Result<TermDistribution>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut any_doc = false;
    for doc in docs {
        any_doc = true;
        for term in &doc.terms {
            *counts.entry(term.clone()).or_insert(0) += 1;
        }
    }
    if !any_doc {
        return Err(Error::InvalidArgument(
            "cannot build a language model from an empty document set".into(),
        ));
    }
    TermDistribution::from_counts(counts)
}

/// A term with its relative-entropy score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTerm {
    pub term: String,
    pub score: f64,
}

/// Terms ordered by descending score, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredTermList {
    entries: Vec<ScoredTerm>,
}

impl ScoredTermList {
    /// Sort entries into canonical order (score descending, term ascending).
    pub fn new(mut entries: Vec<ScoredTerm>) -> Self {
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.term.cmp(&b.term))
        });
        ScoredTermList { entries }
    }

    pub fn entries(&self) -> &[ScoredTerm] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries whose term is not in `used`, preserving order.
    pub fn excluding<'a>(
        &'a self,
        used: &'a std::collections::BTreeSet<String>,
    ) -> Vec<&'a ScoredTerm> {
        self.entries
            .iter()
            .filter(|e| !used.contains(&e.term))
            .collect()
    }
}

/// Score every topic term by its pointwise relative-entropy contribution
/// `p_topic * log2(p_topic / p_collection)` and keep the top `cutoff`.
///
/// Terms missing from the collection model take its smoothing floor, so the
/// ratio is always defined. The result is a pure function of its inputs.
pub fn score_terms(
    topic_lm: &TermDistribution,
    collection_lm: &TermDistribution,
    cutoff: usize,
) -> ScoredTermList {
    let entries = topic_lm
        .iter()
        .map(|(term, p_topic)| {
            let p_coll = collection_lm.prob_or_floor(term);
            ScoredTerm {
                term: term.to_string(),
                score: p_topic * (p_topic / p_coll).log2(),
            }
        })
        .collect();
    let mut list = ScoredTermList::new(entries);
    list.entries.truncate(cutoff);
    list
}

/// How query terms are drawn from the scored candidate list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuerySampling {
    /// Selection probability proportional to score (negatives clamped to
    /// zero and excluded). Falls back to uniform when fewer positive-score
    /// candidates exist than are requested.
    #[default]
    Proportional,
    /// Uniform over the candidate list.
    Uniform,
}

/// Sample `k` distinct indices into `entries` without replacement.
///
/// Shared by query generation and suggestion generation.
pub(crate) fn sample_without_replacement<R: Rng>(
    entries: &[ScoredTerm],
    k: usize,
    sampling: QuerySampling,
    rng: &mut R,
) -> Vec<usize> {
    let n = entries.len();
    let k = k.min(n);
    let weights: Vec<f64> = match sampling {
        QuerySampling::Uniform => vec![1.0; n],
        QuerySampling::Proportional => {
            let clamped: Vec<f64> = entries.iter().map(|e| e.score.max(0.0)).collect();
            let positive = clamped.iter().filter(|&&w| w > 0.0).count();
            if positive < k {
                vec![1.0; n]
            } else {
                clamped
            }
        }
    };
    let mut alive: Vec<usize> = (0..n).collect();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = alive.iter().map(|&i| weights[i]).sum();
        if total <= 0.0 {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut cum = 0.0;
        let mut chosen_pos = alive.len() - 1;
        for (pos, &i) in alive.iter().enumerate() {
            cum += weights[i];
            if target < cum {
                chosen_pos = pos;
                break;
            }
        }
        picked.push(alive.remove(chosen_pos));
    }
    picked
}

/// Draw a query of `length` distinct terms from the scored candidates.
pub fn generate_query<R: Rng>(
    scored: &ScoredTermList,
    length: usize,
    sampling: QuerySampling,
    rng: &mut R,
) -> Result<Vec<String>> {
    if length == 0 {
        return Err(Error::InvalidArgument(
            "query length must be at least 1".into(),
        ));
    }
    if length > scored.len() {
        return Err(Error::InvalidArgument(format!(
            "query length {length} exceeds the {} available candidate terms",
            scored.len()
        )));
    }
    let picked = sample_without_replacement(scored.entries(), length, sampling, rng);
    Ok(picked
        .into_iter()
        .map(|i| scored.entries[i].term.clone())
        .collect())
}
