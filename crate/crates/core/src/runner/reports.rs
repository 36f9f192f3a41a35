//! Plot-ready report tables derived from runs: budget frontier, rate-of-gain
//! curves, query-length curves, cost-sensitivity re-scoring, best settings,
//! and the clarification-vs-suggestion calibration table.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, ExperimentConfig, ResultRow, SensitivityStep, SessionRecord};
use crate::corpus::Corpus;
use crate::error::Result;
use crate::feedback::{generate_suggestions, select_suggestion, ClarificationBank};
use crate::lm::generate_query;
use crate::metrics::{
    best_settings, prefix_to_gain, summarize, BestSetting, ConfigAggregate, CostModel, SettingsCell,
};
use crate::retrieval::{QueryState, SeenMemory};
use crate::session::{truncate_to_budget, MixedInitiative, SessionTrace, Simulator, Strategy};
use crate::stats::paired_stats;

// ---------------------------------------------------------------------------
// Aggregated per-config results
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub strategy: Strategy,
    pub mi: MixedInitiative,
    pub q: u32,
    pub f: u32,
    pub a: u32,
    pub l: u32,
    pub sessions: u64,
    pub errors: u64,
    pub mean_gain: f64,
    pub mean_cost: f64,
    pub mean_rate: f64,
}

/// Grouping key for one configuration: (strategy, mi, Q, F, A, L).
type ConfigKey = (Strategy, MixedInitiative, u32, u32, u32, u32);

/// Mean G, C, R per configuration over topics and repetitions.
pub fn aggregate_rows(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<ConfigKey, Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.strategy, row.mi, row.q, row.f, row.a, row.l))
            .or_default()
            .push(row);
    }
    groups
        .into_iter()
        .map(|((strategy, mi, q, f, a, l), members)| {
            let ok: Vec<&&ResultRow> = members.iter().filter(|r| r.error.is_none()).collect();
            let n = ok.len() as f64;
            let mean = |get: fn(&ResultRow) -> f64| {
                if ok.is_empty() {
                    0.0
                } else {
                    ok.iter().map(|r| get(r)).sum::<f64>() / n
                }
            };
            AggregateRow {
                strategy,
                mi,
                q,
                f,
                a,
                l,
                sessions: members.len() as u64,
                errors: (members.len() - ok.len()) as u64,
                mean_gain: mean(|r| r.gain),
                mean_cost: mean(|r| r.cost),
                mean_rate: mean(|r| r.rate),
            }
        })
        .collect()
}

pub fn write_aggregated_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "strategy", "mi", "q", "f", "a", "l", "sessions", "errors", "mean_g", "mean_c", "mean_r",
    ])?;
    for agg in aggregate_rows(rows) {
        writer.write_record([
            agg.strategy.to_string(),
            agg.mi.to_string(),
            agg.q.to_string(),
            agg.f.to_string(),
            agg.a.to_string(),
            agg.l.to_string(),
            agg.sessions.to_string(),
            agg.errors.to_string(),
            agg.mean_gain.to_string(),
            agg.mean_cost.to_string(),
            agg.mean_rate.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Budget frontier
// ---------------------------------------------------------------------------

/// A (Q, A) schedule completable within the budget for a given feedback
/// level, with its mean metrics over budget-truncated traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub strategy: Strategy,
    pub mi: MixedInitiative,
    pub f: u32,
    pub q: u32,
    pub a: u32,
    pub sessions: u64,
    pub mean_cost: f64,
    pub mean_gain: f64,
    pub mean_rate: f64,
}

/// Whether a trace completes without losing turns to the budget.
fn completes_within(trace: &SessionTrace, budget_seconds: f64) -> bool {
    truncate_to_budget(trace, budget_seconds).turns.len() == trace.turns.len()
}

/// The feasible (Q, A) region per (strategy, mi, F) at the report query
/// length: a configuration is on the frontier when every one of its
/// sessions completes within the budget.
pub fn emit_frontier(
    records: &[SessionRecord],
    model: &CostModel,
    budget_seconds: f64,
    report_l: u32,
) -> Vec<FrontierPoint> {
    let mut groups: BTreeMap<(Strategy, MixedInitiative, u32, u32, u32), Vec<&SessionTrace>> =
        BTreeMap::new();
    for record in records {
        if let SessionRecord::Completed { trace, .. } = record {
            if trace.config.query_length != report_l {
                continue;
            }
            groups
                .entry((
                    trace.config.strategy,
                    trace.config.mi,
                    trace.config.feedback_rounds,
                    trace.config.queries,
                    trace.config.assessments,
                ))
                .or_default()
                .push(trace);
        }
    }
    let mut points = Vec::new();
    for ((strategy, mi, f, q, a), traces) in groups {
        if !traces.iter().all(|t| completes_within(t, budget_seconds)) {
            continue;
        }
        let n = traces.len() as f64;
        let mut mean_cost = 0.0;
        let mut mean_gain = 0.0;
        let mut mean_rate = 0.0;
        for trace in &traces {
            let summary = summarize(&truncate_to_budget(trace, budget_seconds), model);
            mean_cost += summary.cost;
            mean_gain += summary.gain;
            mean_rate += summary.rate;
        }
        points.push(FrontierPoint {
            strategy,
            mi,
            f,
            q,
            a,
            sessions: traces.len() as u64,
            mean_cost: mean_cost / n,
            mean_gain: mean_gain / n,
            mean_rate: mean_rate / n,
        });
    }
    points
}

pub fn write_frontier_csv(points: &[FrontierPoint], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "strategy", "mi", "f", "q", "a", "sessions", "mean_c", "mean_g", "mean_r",
    ])?;
    for p in points {
        writer.write_record([
            p.strategy.to_string(),
            p.mi.to_string(),
            p.f.to_string(),
            p.q.to_string(),
            p.a.to_string(),
            p.sessions.to_string(),
            p.mean_cost.to_string(),
            p.mean_gain.to_string(),
            p.mean_rate.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Rate-of-gain curves
// ---------------------------------------------------------------------------

/// Mean rate of gain per (strategy, mi, F, A) at the report query length,
/// averaged over Q, topics, and repetitions.
pub fn write_rate_by_assessments_csv(rows: &[ResultRow], report_l: u32, path: &Path) -> Result<()> {
    let mut groups: BTreeMap<(Strategy, MixedInitiative, u32, u32), (f64, u64)> = BTreeMap::new();
    for row in rows {
        if row.l != report_l || row.error.is_some() {
            continue;
        }
        let entry = groups
            .entry((row.strategy, row.mi, row.f, row.a))
            .or_insert((0.0, 0));
        entry.0 += row.rate;
        entry.1 += 1;
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["strategy", "mi", "f", "a", "sessions", "mean_r"])?;
    for ((strategy, mi, f, a), (sum, n)) in groups {
        writer.write_record([
            strategy.to_string(),
            mi.to_string(),
            f.to_string(),
            a.to_string(),
            n.to_string(),
            (sum / n as f64).to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Grouping key for length curves: (strategy, mi, F, L, A).
type LengthCurveKey = (Strategy, MixedInitiative, u32, u32, u32);

/// Mean rate of gain per (strategy, mi, F, L, A), for query-length curves.
pub fn write_query_length_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut groups: BTreeMap<LengthCurveKey, (f64, u64)> = BTreeMap::new();
    for row in rows {
        if row.error.is_some() {
            continue;
        }
        let entry = groups
            .entry((row.strategy, row.mi, row.f, row.l, row.a))
            .or_insert((0.0, 0));
        entry.0 += row.rate;
        entry.1 += 1;
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["strategy", "mi", "f", "l", "a", "sessions", "mean_r"])?;
    for ((strategy, mi, f, l, a), (sum, n)) in groups {
        writer.write_record([
            strategy.to_string(),
            mi.to_string(),
            f.to_string(),
            l.to_string(),
            a.to_string(),
            n.to_string(),
            (sum / n as f64).to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Cost sensitivity
// ---------------------------------------------------------------------------

/// Re-score stored sessions under one scaled cost parameter.
///
/// The turn sequences are fixed by the base model's budget truncation, so a
/// scaled feedback cost changes every trace's cost by exactly the per-turn
/// delta times its executed feedback turns; schedules never re-run.
pub fn sensitivity_rows(
    records: &[SessionRecord],
    base_model: &CostModel,
    budget_seconds: f64,
    step: SensitivityStep,
) -> Vec<ResultRow> {
    let scaled = base_model.scale_parameter(step.parameter, step.factor);
    records
        .iter()
        .map(|record| match record {
            SessionRecord::Completed { rep, trace } => {
                // Fix the prefix under the base model, then re-cost it.
                let truncated = truncate_to_budget(trace, budget_seconds);
                let summary = summarize(&truncated, &scaled);
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
            failed => super::record_to_row(failed, &scaled, budget_seconds),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Best settings
// ---------------------------------------------------------------------------

/// Aggregate full (untruncated) traces per configuration for one gain
/// target: eligibility and the cost/rate at the shortest reaching prefix.
pub fn aggregate_for_target(
    records: &[SessionRecord],
    model: &CostModel,
    target_gain: f64,
    report_l: u32,
) -> Vec<ConfigAggregate> {
    struct Acc {
        sessions: u64,
        gain_sum: f64,
        reached: u64,
        cost_sum: f64,
        rate_sum: f64,
    }
    let mut groups: BTreeMap<(Strategy, MixedInitiative, u32, u32, u32), Acc> = BTreeMap::new();
    for record in records {
        let SessionRecord::Completed { trace, .. } = record else {
            continue;
        };
        if trace.config.query_length != report_l {
            continue;
        }
        let key = (
            trace.config.strategy,
            trace.config.mi,
            trace.config.queries,
            trace.config.feedback_rounds,
            trace.config.assessments,
        );
        let acc = groups.entry(key).or_insert(Acc {
            sessions: 0,
            gain_sum: 0.0,
            reached: 0,
            cost_sum: 0.0,
            rate_sum: 0.0,
        });
        acc.sessions += 1;
        acc.gain_sum += trace.total_gain();
        let prefix = prefix_to_gain(trace, target_gain, model);
        if prefix.found {
            acc.reached += 1;
            acc.cost_sum += prefix.cost;
            acc.rate_sum += prefix.rate;
        }
    }
    groups
        .into_iter()
        .map(|((strategy, mi, q, f, a), acc)| ConfigAggregate {
            strategy,
            mi,
            q,
            f,
            a,
            l: report_l,
            sessions: acc.sessions,
            mean_gain: acc.gain_sum / acc.sessions as f64,
            reached: acc.reached,
            mean_cost_at_target: if acc.reached > 0 {
                acc.cost_sum / acc.reached as f64
            } else {
                0.0
            },
            mean_rate_at_target: if acc.reached > 0 {
                acc.rate_sum / acc.reached as f64
            } else {
                0.0
            },
        })
        .collect()
}

/// Best settings per cell and target.
pub fn best_settings_table(
    records: &[SessionRecord],
    model: &CostModel,
    targets: &[f64],
    report_l: u32,
) -> Vec<(f64, SettingsCell, Option<BestSetting>)> {
    let mut table = Vec::new();
    for &target in targets {
        let aggregates = aggregate_for_target(records, model, target, report_l);
        for (cell, setting) in best_settings(&aggregates, target) {
            table.push((target, cell, setting));
        }
    }
    table
}

pub fn write_best_settings_csv(
    records: &[SessionRecord],
    model: &CostModel,
    targets: &[f64],
    report_l: u32,
    path: &Path,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "target_g", "cell", "q_star", "a_star", "f_star", "c_star", "r_star",
    ])?;
    for (target, cell, setting) in best_settings_table(records, model, targets, report_l) {
        match setting {
            Some(best) => writer.write_record([
                target.to_string(),
                cell.to_string(),
                best.q.to_string(),
                best.a.to_string(),
                best.f.to_string(),
                best.cost.to_string(),
                best.rate.to_string(),
            ])?,
            None => writer.write_record([
                target.to_string(),
                cell.to_string(),
                String::new(),
                String::new(),
                String::new(),
                "unreachable".to_string(),
                String::new(),
            ])?,
        }
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Calibration: clarification vs suggestion query quality
// ---------------------------------------------------------------------------

/// Precision of the expanded query per feedback round under each mechanism,
/// with a paired-difference summary (clarification minus suggestion).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub round: usize,
    pub pairs: usize,
    pub mean_p10_qc: f64,
    pub mean_p10_qs: f64,
    pub mean_p10_diff: f64,
    pub t_p10: f64,
    pub mean_p20_qc: f64,
    pub mean_p20_qs: f64,
    pub mean_p20_diff: f64,
    pub t_p20: f64,
}

/// Precision at `k` of a fresh ranking for the given query state.
pub fn precision_at(sim: &Simulator<'_>, topic_idx: usize, state: &QueryState, k: usize) -> f64 {
    let topic = &sim.corpus().topics[topic_idx];
    let list = sim.index().rank(topic, state, &SeenMemory::new(), k);
    let hits = list.entries.iter().take(k).filter(|e| e.relevant).count();
    hits as f64 / k as f64
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Compare expanded-query precision under clarifications vs suggestions.
///
/// For each topic and repetition one starting query is drawn; both
/// mechanisms then expand it round by round and the expanded queries are
/// ranked against an empty memory. Pairs share the starting query.
pub fn emit_calibration(
    corpus: &Corpus,
    bank: &ClarificationBank,
    cfg: &ExperimentConfig,
    rounds: usize,
) -> Result<Vec<CalibrationRow>> {
    let sim = Simulator::new(corpus)?;
    let mut p10 = vec![(Vec::new(), Vec::new()); rounds + 1];
    let mut p20 = vec![(Vec::new(), Vec::new()); rounds + 1];

    for (topic_idx, topic) in corpus.topics.iter().enumerate() {
        if bank.entries_for(&topic.topic_id).is_none() {
            continue;
        }
        let scored = sim.scored_terms(topic, cfg.term_cutoff)?;
        if scored.len() < cfg.report_query_length as usize {
            continue;
        }
        for rep in 0..cfg.repetitions {
            let seed = derive_seed(
                cfg.master_seed,
                Strategy::FeedbackFirst,
                MixedInitiative::NoFeedback,
                0,
                0,
                0,
                cfg.report_query_length,
                &topic.topic_id,
                rep,
            );
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let original = generate_query(
                &scored,
                cfg.report_query_length as usize,
                cfg.query_sampling,
                &mut rng,
            )?;
            let mut qc_state = QueryState::new(original.clone(), cfg.lambda, cfg.mu)?;
            let mut qs_state = QueryState::new(original.clone(), cfg.lambda, cfg.mu)?;
            let mut qs_used: std::collections::BTreeSet<String> =
                original.iter().cloned().collect();
            let mut qc_used: std::collections::BTreeSet<String> =
                original.iter().cloned().collect();

            for round in 0..=rounds {
                if round > 0 {
                    // Clarification arm: consume entry round-1.
                    if let Some(entry) = bank
                        .entries_for(&topic.topic_id)
                        .and_then(|e| e.get(round - 1))
                    {
                        let fresh: Vec<String> = entry
                            .answer_terms
                            .iter()
                            .filter(|t| !qc_used.contains(*t))
                            .cloned()
                            .collect();
                        qc_used.extend(fresh.iter().cloned());
                        qc_state.push_feedback(fresh);
                    }
                    // Suggestion arm.
                    let set = generate_suggestions(&scored, &qs_used, cfg.query_sampling, &mut rng);
                    let outcome = select_suggestion(&set, &mut rng);
                    if !outcome.exhausted {
                        qs_used.extend(outcome.terms_added.iter().cloned());
                        qs_state.push_feedback(outcome.terms_added);
                    }
                }
                p10[round]
                    .0
                    .push(precision_at(&sim, topic_idx, &qc_state, 10));
                p10[round]
                    .1
                    .push(precision_at(&sim, topic_idx, &qs_state, 10));
                p20[round]
                    .0
                    .push(precision_at(&sim, topic_idx, &qc_state, 20));
                p20[round]
                    .1
                    .push(precision_at(&sim, topic_idx, &qs_state, 20));
            }
        }
    }

    Ok((0..=rounds)
        .map(|round| {
            let (qc10, qs10) = &p10[round];
            let (qc20, qs20) = &p20[round];
            let d10: Vec<f64> = qc10.iter().zip(qs10).map(|(a, b)| a - b).collect();
            let d20: Vec<f64> = qc20.iter().zip(qs20).map(|(a, b)| a - b).collect();
            CalibrationRow {
                round,
                pairs: d10.len(),
                mean_p10_qc: mean(qc10),
                mean_p10_qs: mean(qs10),
                mean_p10_diff: mean(&d10),
                t_p10: paired_stats(&d10).map_or(0.0, |s| s.t),
                mean_p20_qc: mean(qc20),
                mean_p20_qs: mean(qs20),
                mean_p20_diff: mean(&d20),
                t_p20: paired_stats(&d20).map_or(0.0, |s| s.t),
            }
        })
        .collect())
}

pub fn write_calibration_csv(rows: &[CalibrationRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "round", "pairs", "p10_qc", "p10_qs", "p10_diff", "p10_t", "p20_qc", "p20_qs", "p20_diff",
        "p20_t",
    ])?;
    for row in rows {
        writer.write_record([
            row.round.to_string(),
            row.pairs.to_string(),
            row.mean_p10_qc.to_string(),
            row.mean_p10_qs.to_string(),
            row.mean_p10_diff.to_string(),
            row.t_p10.to_string(),
            row.mean_p20_qc.to_string(),
            row.mean_p20_qs.to_string(),
            row.mean_p20_diff.to_string(),
            row.t_p20.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Facet, Topic};
    use crate::runner::{BankSource, CorpusSource, Grid, GridRange};
    use crate::session::{SessionEvents, Turn, TurnPayload};
    use std::collections::{BTreeMap, BTreeSet};

    fn mini_trace(
        strategy: Strategy,
        mi: MixedInitiative,
        q: u32,
        f: u32,
        a: u32,
        costs_and_gains: &[(f64, f64)],
        n_feedback: usize,
    ) -> SessionTrace {
        use crate::lm::QuerySampling;
        use crate::session::SessionConfig;
        let mut turns = vec![Turn {
            payload: TurnPayload::Query {
                terms: vec!["q".into()],
            },
            gain: 0.0,
            cost: 29.3,
        }];
        for i in 0..n_feedback {
            turns.push(Turn {
                payload: TurnPayload::Feedback {
                    terms: vec![format!("f{i}")],
                },
                gain: 0.0,
                cost: 8.3,
            });
        }
        for (i, &(cost, gain)) in costs_and_gains.iter().enumerate() {
            turns.push(Turn {
                payload: TurnPayload::Assessment {
                    doc_id: format!("d{i}"),
                    relevant: gain > 0.0,
                },
                gain,
                cost,
            });
        }
        SessionTrace {
            config: SessionConfig {
                strategy,
                mi,
                queries: q,
                feedback_rounds: f,
                assessments: a,
                query_length: 2,
                cost_model: CostModel::default(),
                seed: 0,
                lambda: 0.5,
                mu: 2500.0,
                term_cutoff: 20,
                query_sampling: QuerySampling::Proportional,
                carry_feedback: false,
                rank_depth: None,
            },
            topic_id: "t".into(),
            turns,
            events: SessionEvents::default(),
        }
    }

    #[test]
    fn tiny_budget_empties_the_frontier() {
        let records = vec![SessionRecord::Completed {
            rep: 0,
            trace: mini_trace(
                Strategy::FeedbackFirst,
                MixedInitiative::Clarification,
                1,
                1,
                2,
                &[(23.3, 1.0), (6.3, 0.0)],
                1,
            ),
        }];
        let points = emit_frontier(&records, &CostModel::default(), 0.1, 2);
        assert!(points.is_empty());
        let points = emit_frontier(&records, &CostModel::default(), 600.0, 2);
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].sessions, 1);
    }

    #[test]
    fn sensitivity_scales_cost_by_exactly_the_feedback_delta() {
        let trace = mini_trace(
            Strategy::FeedbackFirst,
            MixedInitiative::Clarification,
            1,
            2,
            2,
            &[(23.3, 1.0), (6.3, 0.0)],
            2,
        );
        let records = vec![SessionRecord::Completed { rep: 0, trace }];
        let base = summarize_rows(&records);
        let halved = sensitivity_rows(
            &records,
            &CostModel::default(),
            600.0,
            SensitivityStep {
                parameter: crate::metrics::CostParameter::Feedback,
                factor: 0.5,
            },
        );
        let expected_delta = 0.5 * 8.3 * 2.0;
        assert!((base[0].cost - halved[0].cost - expected_delta).abs() < 1e-9);

        // Scaling the feedback cost leaves zero-feedback traces untouched.
        let no_fb = mini_trace(
            Strategy::FeedbackFirst,
            MixedInitiative::NoFeedback,
            1,
            0,
            2,
            &[(23.3, 1.0), (6.3, 0.0)],
            0,
        );
        let records = vec![SessionRecord::Completed {
            rep: 0,
            trace: no_fb,
        }];
        let base = summarize_rows(&records);
        let doubled = sensitivity_rows(
            &records,
            &CostModel::default(),
            600.0,
            SensitivityStep {
                parameter: crate::metrics::CostParameter::Feedback,
                factor: 2.0,
            },
        );
        assert_eq!(base[0].cost, doubled[0].cost);

        // Halving the query cost raises the rate of any gainful trace.
        let cheap_queries = sensitivity_rows(
            &records,
            &CostModel::default(),
            600.0,
            SensitivityStep {
                parameter: crate::metrics::CostParameter::Query,
                factor: 0.5,
            },
        );
        assert!(cheap_queries[0].rate > base[0].rate);
    }

    fn summarize_rows(records: &[SessionRecord]) -> Vec<ResultRow> {
        super::super::summarize_records(records, &CostModel::default(), 600.0)
    }

    #[test]
    fn frontier_matches_a_brute_force_scan_and_shrinks_with_feedback() {
        use crate::corpus::{generate_synthetic_corpus, SyntheticSpec};
        use crate::lm::QuerySampling;
        use crate::metrics::turn_cost;
        use crate::session::SessionConfig;
        use std::collections::BTreeSet;

        let corpus = generate_synthetic_corpus(
            &SyntheticSpec {
                topics: 3,
                vocab_size: 200,
                docs_per_topic: 50,
                facets_per_topic: 4,
                relevant_per_facet: 3,
                doc_len: 24,
                facet_terms: 5,
                concentration: 0.7,
            },
            19,
        )
        .unwrap();
        let bank = ClarificationBank::synthesize(&corpus, 10, 2).unwrap();
        let sim = Simulator::new(&corpus).unwrap();
        let model = CostModel::default();
        let budget = 360.0;

        let mut records = Vec::new();
        for strategy in [Strategy::FeedbackFirst, Strategy::FeedbackAfter] {
            for f in 0..=2u32 {
                for q in 1..=3u32 {
                    for a in [2u32, 4] {
                        for topic in &corpus.topics {
                            for rep in 0..3u32 {
                                let cfg = SessionConfig {
                                    strategy,
                                    mi: MixedInitiative::Clarification,
                                    queries: q,
                                    feedback_rounds: f,
                                    assessments: a,
                                    query_length: 2,
                                    cost_model: model,
                                    seed: super::super::derive_seed(
                                        3,
                                        strategy,
                                        MixedInitiative::Clarification,
                                        q,
                                        f,
                                        a,
                                        2,
                                        &topic.topic_id,
                                        rep,
                                    ),
                                    lambda: 0.5,
                                    mu: 2500.0,
                                    term_cutoff: 20,
                                    query_sampling: QuerySampling::Proportional,
                                    carry_feedback: false,
                                    rank_depth: None,
                                };
                                let trace = sim.run_session(topic, &cfg, Some(&bank)).unwrap();
                                records.push(SessionRecord::Completed { rep, trace });
                            }
                        }
                    }
                }
            }
        }

        let points = emit_frontier(&records, &model, budget, 2);
        assert!(!points.is_empty(), "some schedules must fit the budget");
        assert!(
            points.len() < 2 * 3 * 3 * 2,
            "some schedules must exceed it"
        );

        // Independent oracle: a group is feasible when every trace's total
        // model cost fits the budget (costs are non-negative, so the whole
        // trace survives truncation exactly when its sum does).
        type OracleCell = (bool, Vec<f64>);
        let mut oracle: BTreeMap<(Strategy, MixedInitiative, u32, u32, u32), OracleCell> =
            BTreeMap::new();
        for record in &records {
            let SessionRecord::Completed { trace, .. } = record else {
                unreachable!()
            };
            let total: f64 = trace.turns.iter().map(|t| turn_cost(t, &model)).sum();
            let entry = oracle
                .entry((
                    trace.config.strategy,
                    trace.config.mi,
                    trace.config.feedback_rounds,
                    trace.config.queries,
                    trace.config.assessments,
                ))
                .or_insert((true, Vec::new()));
            entry.0 &= total <= budget;
            entry.1.push(total);
        }
        let expected: BTreeSet<_> = oracle
            .iter()
            .filter(|(_, (feasible, _))| *feasible)
            .map(|(key, _)| *key)
            .collect();
        let got: BTreeSet<_> = points
            .iter()
            .map(|p| (p.strategy, p.mi, p.f, p.q, p.a))
            .collect();
        assert_eq!(got, expected, "frontier disagrees with the exhaustive scan");
        for point in &points {
            let (_, totals) = &oracle[&(point.strategy, point.mi, point.f, point.q, point.a)];
            let mean: f64 = totals.iter().sum::<f64>() / totals.len() as f64;
            assert!((point.mean_cost - mean).abs() < 1e-9);
        }

        // Raising F never grows the feasible (Q, A) region.
        for strategy in [Strategy::FeedbackFirst, Strategy::FeedbackAfter] {
            for f in 0..2u32 {
                let region = |f: u32| -> BTreeSet<(u32, u32)> {
                    points
                        .iter()
                        .filter(|p| p.strategy == strategy && p.f == f)
                        .map(|p| (p.q, p.a))
                        .collect()
                };
                let lower = region(f);
                let higher = region(f + 1);
                assert!(
                    higher.is_subset(&lower),
                    "{strategy} F={}: {higher:?} not within {lower:?}",
                    f + 1
                );
            }
        }
    }

    #[test]
    fn adversarial_suggestions_cannot_beat_relevant_clarifications() {
        // Relevant docs contain "good"; distractors contain "bad". Both doc
        // groups share the query term, so precision is decided entirely by
        // the feedback term: the clarification arm must win.
        let mut documents = BTreeMap::new();
        let mut relevant = BTreeSet::new();
        for i in 0..10 {
            let id = format!("r{i}");
            documents.insert(
                id.clone(),
                Document {
                    doc_id: id.clone(),
                    terms: vec!["q".into(), "good".into()],
                },
            );
            relevant.insert(id);
        }
        for i in 0..10 {
            let id = format!("n{i}");
            documents.insert(
                id.clone(),
                Document {
                    doc_id: id.clone(),
                    terms: vec!["q".into(), "bad".into()],
                },
            );
        }
        let mut topic = Topic {
            topic_id: "t".into(),
            title: "t".into(),
            facets: vec![Facet {
                facet_id: "f".into(),
                description: String::new(),
                relevant_docs: relevant,
            }],
            relevant_docs: BTreeSet::new(),
        };
        topic.recompute_relevant_union();
        let corpus = Corpus {
            documents,
            topics: vec![topic],
        };
        let sim = Simulator::new(&corpus).unwrap();

        let mut qc = QueryState::new(vec!["q".into()], 0.5, 100.0).unwrap();
        qc.push_feedback(["good".to_string()]);
        let mut qs = QueryState::new(vec!["q".into()], 0.5, 100.0).unwrap();
        qs.push_feedback(["bad".to_string()]);
        for k in [10, 20] {
            let p_qc = precision_at(&sim, 0, &qc, k);
            let p_qs = precision_at(&sim, 0, &qs, k);
            assert!((0.0..=1.0).contains(&p_qc) && (0.0..=1.0).contains(&p_qs));
            assert!(p_qs <= p_qc, "k={k}: qs {p_qs} > qc {p_qc}");
        }

        // Identical feedback terms give a zero paired difference.
        let mut same = QueryState::new(vec!["q".into()], 0.5, 100.0).unwrap();
        same.push_feedback(["good".to_string()]);
        assert_eq!(
            precision_at(&sim, 0, &qc, 10),
            precision_at(&sim, 0, &same, 10)
        );
    }

    #[test]
    fn calibration_reports_full_range_precisions() {
        let cfg = ExperimentConfig {
            corpus: CorpusSource::Synthetic {
                spec: crate::corpus::SyntheticSpec {
                    topics: 2,
                    vocab_size: 100,
                    docs_per_topic: 40,
                    facets_per_topic: 4,
                    relevant_per_facet: 3,
                    doc_len: 24,
                    facet_terms: 5,
                    concentration: 0.7,
                },
                seed: 5,
            },
            bank: Some(BankSource::Synthetic {
                rounds: 4,
                terms_per_answer: 2,
            }),
            preprocessing: Default::default(),
            min_facets: 4,
            min_rel: 10,
            grid: Grid {
                q: GridRange { min: 1, max: 1 },
                f: GridRange { min: 0, max: 2 },
                a: GridRange { min: 1, max: 2 },
                l: GridRange { min: 2, max: 2 },
            },
            strategies: vec![Strategy::FeedbackFirst],
            mixed_initiatives: vec![MixedInitiative::Clarification],
            repetitions: 3,
            budget_seconds: 600.0,
            cost_model: CostModel::default(),
            lambda: 0.5,
            mu: 2500.0,
            term_cutoff: 20,
            query_sampling: Default::default(),
            carry_feedback: false,
            sensitivity: vec![],
            master_seed: 7,
            out_dir: std::path::PathBuf::from("unused"),
            persist_traces: false,
            report_query_length: 2,
            gain_targets: vec![1.0],
        };
        let (corpus, bank, _) = crate::runner::prepare_corpus(&cfg).unwrap();
        let rows = emit_calibration(&corpus, &bank.unwrap(), &cfg, 3).unwrap();
        assert_eq!(rows.len(), 4);
        for row in &rows {
            assert!(row.pairs >= 6);
            for p in [
                row.mean_p10_qc,
                row.mean_p10_qs,
                row.mean_p20_qc,
                row.mean_p20_qs,
            ] {
                assert!((0.0..=1.0).contains(&p), "precision {p} out of range");
            }
        }
        // Round 0 precedes any feedback: both arms share the query exactly.
        assert_eq!(rows[0].mean_p10_diff, 0.0);
        assert_eq!(rows[0].mean_p20_diff, 0.0);
    }
}
