//! Turn-based cumulative gain, cost, rate of gain, and best-setting search.
//!
//! Costs are recomputed from a [`CostModel`] each time a trace is
//! summarized, so the same traces can be re-scored under scaled cost
//! parameters without re-simulating.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{MixedInitiative, SessionTrace, Strategy, Turn, TurnCounts, TurnPayload};

/// How the cost of an assessment turn uses the click probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AssessmentCostMode {
    /// The user clicks through with the probability matching the item's
    /// relevance: snippet cost plus document cost weighted by the
    /// relevance-conditional click probability.
    #[default]
    RelevanceConditional,
    /// Every assessment pays the same expected cost
    /// `c_s + c_d * (p_click_rel + p_click_nonrel)` regardless of relevance.
    Expected,
}

/// Per-turn-type cost parameters (seconds) and click probabilities.
///
/// The defaults are the crowdsourced estimates: 29.3 s per query, 8.3 s per
/// feedback round, 6.3 s per snippet, 17.0 s per document, with clicks on
/// relevant items only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub query_cost: f64,
    pub feedback_cost: f64,
    pub snippet_cost: f64,
    pub document_cost: f64,
    pub click_prob_relevant: f64,
    pub click_prob_nonrelevant: f64,
    #[serde(default)]
    pub assessment_mode: AssessmentCostMode,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            query_cost: 29.3,
            feedback_cost: 8.3,
            snippet_cost: 6.3,
            document_cost: 17.0,
            click_prob_relevant: 1.0,
            click_prob_nonrelevant: 0.0,
            assessment_mode: AssessmentCostMode::RelevanceConditional,
        }
    }
}

/// A scalable cost parameter, for sensitivity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CostParameter {
    #[serde(rename = "c_q")]
    Query,
    #[serde(rename = "c_f")]
    Feedback,
    #[serde(rename = "c_s")]
    Snippet,
    #[serde(rename = "c_d")]
    Document,
}

impl std::fmt::Display for CostParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CostParameter::Query => write!(f, "c_q"),
            CostParameter::Feedback => write!(f, "c_f"),
            CostParameter::Snippet => write!(f, "c_s"),
            CostParameter::Document => write!(f, "c_d"),
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        let costs = [
            ("query_cost", self.query_cost),
            ("feedback_cost", self.feedback_cost),
            ("snippet_cost", self.snippet_cost),
            ("document_cost", self.document_cost),
        ];
        for (name, value) in costs {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be a non-negative number"
                )));
            }
        }
        for (name, value) in [
            ("click_prob_relevant", self.click_prob_relevant),
            ("click_prob_nonrelevant", self.click_prob_nonrelevant),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// Scale every time cost by `k`; probabilities are untouched.
    pub fn scaled(&self, k: f64) -> CostModel {
        CostModel {
            query_cost: self.query_cost * k,
            feedback_cost: self.feedback_cost * k,
            snippet_cost: self.snippet_cost * k,
            document_cost: self.document_cost * k,
            ..*self
        }
    }

    /// Scale one cost parameter by `factor`.
    pub fn scale_parameter(&self, parameter: CostParameter, factor: f64) -> CostModel {
        let mut model = *self;
        match parameter {
            CostParameter::Query => model.query_cost *= factor,
            CostParameter::Feedback => model.feedback_cost *= factor,
            CostParameter::Snippet => model.snippet_cost *= factor,
            CostParameter::Document => model.document_cost *= factor,
        }
        model
    }
}

/// Cost of a turn payload under the model.
pub fn payload_cost(payload: &TurnPayload, model: &CostModel) -> f64 {
    match payload {
        TurnPayload::Query { .. } => model.query_cost,
        TurnPayload::Feedback { .. } => model.feedback_cost,
        TurnPayload::Assessment { relevant, .. } => {
            let click_prob = match model.assessment_mode {
                AssessmentCostMode::RelevanceConditional => {
                    if *relevant {
                        model.click_prob_relevant
                    } else {
                        model.click_prob_nonrelevant
                    }
                }
                AssessmentCostMode::Expected => {
                    model.click_prob_relevant + model.click_prob_nonrelevant
                }
            };
            model.snippet_cost + model.document_cost * click_prob
        }
    }
}

/// Cost of one executed turn under the model.
pub fn turn_cost(turn: &Turn, model: &CostModel) -> f64 {
    payload_cost(&turn.payload, model)
}

/// Totals for one trace: gain, cost, rate of gain, and turn counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub gain: f64,
    pub cost: f64,
    pub rate: f64,
    pub turn_counts: TurnCounts,
}

fn rate_of(gain: f64, cost: f64) -> f64 {
    if cost > 0.0 {
        gain / cost
    } else {
        0.0
    }
}

/// Total gain, model-based total cost, and rate of gain over a trace.
pub fn summarize(trace: &SessionTrace, model: &CostModel) -> MetricSummary {
    let mut gain = 0.0;
    let mut cost = 0.0;
    for turn in &trace.turns {
        gain += turn.gain;
        cost += turn_cost(turn, model);
    }
    MetricSummary {
        gain,
        cost,
        rate: rate_of(gain, cost),
        turn_counts: trace.executed_counts(),
    }
}

/// Metrics at the shortest prefix reaching a target gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPrefix {
    /// Whether the trace ever reaches the target. When false, the other
    /// fields describe the full trace.
    pub found: bool,
    pub cost: f64,
    pub rate: f64,
    pub turn_counts: TurnCounts,
}

/// Walk the trace until cumulative gain first reaches `target_gain`.
pub fn prefix_to_gain(trace: &SessionTrace, target_gain: f64, model: &CostModel) -> GainPrefix {
    let mut gain = 0.0;
    let mut cost = 0.0;
    let mut counts = TurnCounts::default();
    for turn in &trace.turns {
        gain += turn.gain;
        cost += turn_cost(turn, model);
        match turn.turn_type() {
            crate::session::TurnType::Query => counts.queries += 1,
            crate::session::TurnType::Feedback => counts.feedbacks += 1,
            crate::session::TurnType::Assessment => counts.assessments += 1,
        }
        counts.total += 1;
        if gain >= target_gain {
            return GainPrefix {
                found: true,
                cost,
                rate: rate_of(gain, cost),
                turn_counts: counts,
            };
        }
    }
    GainPrefix {
        found: false,
        cost,
        rate: rate_of(gain, cost),
        turn_counts: counts,
    }
}

/// Aggregated target-gain results for one (strategy, mi, Q, F, A, L) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigAggregate {
    pub strategy: Strategy,
    pub mi: MixedInitiative,
    pub q: u32,
    pub f: u32,
    pub a: u32,
    pub l: u32,
    /// Sessions aggregated into this cell.
    pub sessions: u64,
    /// Mean total gain per session.
    pub mean_gain: f64,
    /// Sessions whose trace reached the target gain.
    pub reached: u64,
    /// Mean cost at the target over reaching sessions.
    pub mean_cost_at_target: f64,
    /// Mean rate of gain at the target over reaching sessions.
    pub mean_rate_at_target: f64,
}

/// Report cell: the no-feedback baseline is strategy-agnostic and shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SettingsCell {
    NoFeedback,
    Combo(Strategy, MixedInitiative),
}

impl std::fmt::Display for SettingsCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SettingsCell::NoFeedback => write!(f, "no-feedback"),
            SettingsCell::Combo(strategy, mi) => write!(f, "{strategy}-{mi}"),
        }
    }
}

/// The schedule that maximizes the rate of gain to a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestSetting {
    pub q: u32,
    pub a: u32,
    pub f: u32,
    pub cost: f64,
    pub rate: f64,
}

fn cell_of(agg: &ConfigAggregate) -> SettingsCell {
    if agg.mi == MixedInitiative::NoFeedback {
        SettingsCell::NoFeedback
    } else {
        SettingsCell::Combo(agg.strategy, agg.mi)
    }
}

/// For each strategy-by-initiative cell, the configuration with the highest
/// mean rate of gain among those whose mean gain reaches `target_gain`.
///
/// Ties break toward lower cost, then lower Q, F, A. Cells with no
/// qualifying configuration map to `None` (target unreachable).
pub fn best_settings(
    aggregates: &[ConfigAggregate],
    target_gain: f64,
) -> BTreeMap<SettingsCell, Option<BestSetting>> {
    let mut result: BTreeMap<SettingsCell, Option<BestSetting>> = BTreeMap::new();
    for agg in aggregates {
        let cell = cell_of(agg);
        let entry = result.entry(cell).or_insert(None);
        if agg.mean_gain < target_gain || agg.reached == 0 {
            continue;
        }
        let candidate = BestSetting {
            q: agg.q,
            a: agg.a,
            f: agg.f,
            cost: agg.mean_cost_at_target,
            rate: agg.mean_rate_at_target,
        };
        let better = match entry {
            None => true,
            Some(best) => candidate
                .rate
                .total_cmp(&best.rate)
                .then_with(|| best.cost.total_cmp(&candidate.cost))
                .then_with(|| best.q.cmp(&candidate.q))
                .then_with(|| best.f.cmp(&candidate.f))
                .then_with(|| best.a.cmp(&candidate.a))
                .is_gt(),
        };
        if better {
            *entry = Some(candidate);
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::QuerySampling;
    use crate::session::{SessionConfig, SessionEvents};

    fn config() -> SessionConfig {
        SessionConfig {
            strategy: Strategy::FeedbackFirst,
            mi: MixedInitiative::Clarification,
            queries: 1,
            feedback_rounds: 3,
            assessments: 5,
            query_length: 2,
            cost_model: CostModel::default(),
            seed: 0,
            lambda: 0.5,
            mu: 2500.0,
            term_cutoff: 20,
            query_sampling: QuerySampling::Proportional,
            carry_feedback: false,
            rank_depth: None,
        }
    }

    fn trace_of(turns: Vec<Turn>) -> SessionTrace {
        SessionTrace {
            config: config(),
            topic_id: "t".into(),
            turns,
            events: SessionEvents::default(),
        }
    }

    fn query_turn() -> Turn {
        let payload = TurnPayload::Query {
            terms: vec!["q".into()],
        };
        let cost = payload_cost(&payload, &CostModel::default());
        Turn {
            payload,
            gain: 0.0,
            cost,
        }
    }

    fn feedback_turn() -> Turn {
        let payload = TurnPayload::Feedback {
            terms: vec!["f".into()],
        };
        let cost = payload_cost(&payload, &CostModel::default());
        Turn {
            payload,
            gain: 0.0,
            cost,
        }
    }

    fn assessment_turn(id: &str, relevant: bool, gain: f64) -> Turn {
        let payload = TurnPayload::Assessment {
            doc_id: id.into(),
            relevant,
        };
        let cost = payload_cost(&payload, &CostModel::default());
        Turn {
            payload,
            gain,
            cost,
        }
    }

    #[test]
    fn default_turn_costs_match_the_calibrated_constants() {
        let model = CostModel::default();
        assert_eq!(turn_cost(&query_turn(), &model), 29.3);
        assert_eq!(turn_cost(&feedback_turn(), &model), 8.3);
        let rel = turn_cost(&assessment_turn("d", true, 1.0), &model);
        assert!((rel - 23.3).abs() < 1e-9, "{rel}");
        let non = turn_cost(&assessment_turn("d", false, 0.0), &model);
        assert!((non - 6.3).abs() < 1e-9, "{non}");
    }

    #[test]
    fn expected_mode_charges_every_assessment_alike() {
        let model = CostModel {
            assessment_mode: AssessmentCostMode::Expected,
            ..CostModel::default()
        };
        let rel = turn_cost(&assessment_turn("d", true, 1.0), &model);
        let non = turn_cost(&assessment_turn("d", false, 0.0), &model);
        assert_eq!(rel, non);
        assert!((rel - 23.3).abs() < 1e-9);
    }

    #[test]
    fn summarize_matches_the_hand_checked_fixture() {
        // Query, three feedback rounds, two relevant and three non-relevant
        // assessments: C = 29.3 + 3*8.3 + 2*23.3 + 3*6.3 = 119.7, G = 2.
        let trace = trace_of(vec![
            query_turn(),
            feedback_turn(),
            feedback_turn(),
            feedback_turn(),
            assessment_turn("d1", true, 1.0),
            assessment_turn("d2", true, 1.0),
            assessment_turn("d3", false, 0.0),
            assessment_turn("d4", false, 0.0),
            assessment_turn("d5", false, 0.0),
        ]);
        let summary = summarize(&trace, &CostModel::default());
        assert!((summary.cost - 119.7).abs() < 1e-9, "{}", summary.cost);
        assert_eq!(summary.gain, 2.0);
        assert!((summary.rate - 0.016708437761069343).abs() < 1e-12);
        assert_eq!(summary.turn_counts.queries, 1);
        assert_eq!(summary.turn_counts.feedbacks, 3);
        assert_eq!(summary.turn_counts.assessments, 5);
    }

    #[test]
    fn empty_and_gainless_traces_summarize_to_zero_rate() {
        let empty = trace_of(vec![]);
        let summary = summarize(&empty, &CostModel::default());
        assert_eq!((summary.gain, summary.cost, summary.rate), (0.0, 0.0, 0.0));

        let gainless = trace_of(vec![
            query_turn(),
            assessment_turn("d1", false, 0.0),
            assessment_turn("d2", false, 0.0),
        ]);
        let summary = summarize(&gainless, &CostModel::default());
        assert_eq!(summary.gain, 0.0);
        assert_eq!(summary.rate, 0.0);
        assert!(summary.cost > 0.0);
    }

    #[test]
    fn prefix_stops_at_the_first_turn_reaching_the_target() {
        let mut turns = vec![query_turn()];
        for i in 0..6 {
            turns.push(assessment_turn(&format!("n{i}"), false, 0.0));
        }
        turns.push(assessment_turn("hit", true, 1.0));
        turns.push(assessment_turn("tail", false, 0.0));
        let trace = trace_of(turns);

        let prefix = prefix_to_gain(&trace, 1.0, &CostModel::default());
        assert!(prefix.found);
        assert_eq!(prefix.turn_counts.queries, 1);
        assert_eq!(prefix.turn_counts.assessments, 7);
        let expected = 29.3 + 6.0 * 6.3 + 23.3;
        assert!((prefix.cost - expected).abs() < 1e-9);

        let unreachable = prefix_to_gain(&trace, 5.0, &CostModel::default());
        assert!(!unreachable.found);
    }

    #[test]
    fn immediate_hit_costs_one_query_and_one_relevant_assessment() {
        let trace = trace_of(vec![query_turn(), assessment_turn("d", true, 1.0)]);
        let prefix = prefix_to_gain(&trace, 1.0, &CostModel::default());
        assert!(prefix.found);
        assert!((prefix.cost - 52.6).abs() < 1e-9);
    }

    #[test]
    fn cost_scaling_is_exact_on_summaries() {
        let trace = trace_of(vec![
            query_turn(),
            feedback_turn(),
            assessment_turn("d1", true, 1.0),
            assessment_turn("d2", false, 0.0),
        ]);
        let base = summarize(&trace, &CostModel::default());
        for k in [0.5, 2.0, 10.0] {
            let scaled = summarize(&trace, &CostModel::default().scaled(k));
            assert!((scaled.cost - base.cost * k).abs() / (base.cost * k) < 1e-12);
            assert!((scaled.rate - base.rate / k).abs() / (base.rate / k) < 1e-12);
        }
    }

    fn aggregate(q: u32, f: u32, a: u32, mean_gain: f64, cost: f64, rate: f64) -> ConfigAggregate {
        ConfigAggregate {
            strategy: Strategy::FeedbackFirst,
            mi: MixedInitiative::Clarification,
            q,
            f,
            a,
            l: 2,
            sessions: 10,
            mean_gain,
            reached: 10,
            mean_cost_at_target: cost,
            mean_rate_at_target: rate,
        }
    }

    #[test]
    fn single_qualifying_config_wins_its_cell() {
        let aggs = vec![aggregate(1, 1, 5, 2.0, 90.0, 0.015)];
        let best = best_settings(&aggs, 1.0);
        let cell = SettingsCell::Combo(Strategy::FeedbackFirst, MixedInitiative::Clarification);
        let setting = best[&cell].unwrap();
        assert_eq!((setting.q, setting.f, setting.a), (1, 1, 5));
    }

    #[test]
    fn rate_ties_break_toward_lower_cost() {
        let aggs = vec![
            aggregate(1, 1, 5, 2.0, 100.0, 0.02),
            aggregate(2, 1, 5, 2.0, 90.0, 0.02),
        ];
        let best = best_settings(&aggs, 1.0);
        let cell = SettingsCell::Combo(Strategy::FeedbackFirst, MixedInitiative::Clarification);
        assert_eq!(best[&cell].unwrap().cost, 90.0);
    }

    #[test]
    fn unreachable_targets_report_none() {
        let aggs = vec![aggregate(1, 1, 5, 0.5, 90.0, 0.015)];
        let best = best_settings(&aggs, 1.0);
        let cell = SettingsCell::Combo(Strategy::FeedbackFirst, MixedInitiative::Clarification);
        assert!(best[&cell].is_none());
    }
}
