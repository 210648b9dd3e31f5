//! Aggregation and bias quantification over score tensors: per-model
//! peer/overall/generosity means, self-preference and regime-contrast
//! biases, display-position effects, authorship (home) advantage,
//! per-question autopsy, judge agreement, and min-max normalization for
//! radar axes.
//!
//! Conventions, applied uniformly:
//! - "peer" always means evaluator != evaluatee; self-evaluations are kept
//!   in the tensor but never enter peer statistics.
//! - Spread statistics use the sample (n-1) standard deviation.
//! - Undefined values (no data, degenerate pools) are `None`, never 0.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::stats;
use crate::tensor::ScoreTensor;
use crate::types::{Category, EvaluationRecord, ModelId, Question, QuestionId, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("tensors have different model axes and cannot be contrasted")]
    ModelAxesMismatch,
}

fn mean_of(scores: &[u8]) -> Option<f64> {
    if scores.is_empty() {
        None
    } else {
        Some(scores.iter().map(|&s| s as f64).sum::<f64>() / scores.len() as f64)
    }
}

fn mean_f64(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn sample_sd_of(scores: &[u8]) -> Option<f64> {
    if scores.len() < 2 {
        return None;
    }
    let values: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
    Some(stats::sample_sd(&values))
}

/// Per-model score aggregates over one regime's tensor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelAggregate {
    pub model_id: ModelId,
    /// Mean score received from peers (evaluator != evaluatee).
    pub peer_mean: Option<f64>,
    /// Mean score received from everyone, self included.
    pub overall_mean: Option<f64>,
    /// Mean score this model gives others when judging.
    pub generosity: Option<f64>,
    /// Mean score this model gives its own answers.
    pub self_mean: Option<f64>,
    /// Sample standard deviation of peer scores received.
    pub peer_sd: Option<f64>,
    pub peer_count: usize,
    pub self_count: usize,
}

/// Aggregates for every model on the tensor's axis, in axis order.
pub fn aggregates(tensor: &ScoreTensor) -> Vec<ModelAggregate> {
    tensor
        .models()
        .iter()
        .enumerate()
        .map(|(m, model_id)| {
            let peers = tensor.peer_scores_received(m);
            let all = tensor.all_scores_received(m);
            let given = tensor.peer_scores_given(m);
            let selfs = tensor.self_scores(m);
            ModelAggregate {
                model_id: model_id.clone(),
                peer_mean: mean_of(&peers),
                overall_mean: mean_of(&all),
                generosity: mean_of(&given),
                self_mean: mean_of(&selfs),
                peer_sd: sample_sd_of(&peers),
                peer_count: peers.len(),
                self_count: selfs.len(),
            }
        })
        .collect()
}

/// Self-preference per model: mean self-assigned score minus mean peer
/// score, within one regime. Positive means the model rates its own
/// answers above what peers give them.
pub fn self_preference(tensor: &ScoreTensor) -> Vec<Option<f64>> {
    aggregates(tensor)
        .iter()
        .map(|a| match (a.self_mean, a.peer_mean) {
            (Some(s), Some(p)) => Some(s - p),
            _ => None,
        })
        .collect()
}

/// Per-model peer-mean difference between two regimes sharing axes:
/// `P^a_j - P^base_j`. With the identity-visible regime as `a` and the
/// fully controlled regime as base this is the name-recognition bias;
/// with the fixed-order regime as `a` it is the position bias.
pub fn peer_mean_shift(
    tensor_a: &ScoreTensor,
    baseline: &ScoreTensor,
) -> Result<Vec<Option<f64>>, MetricsError> {
    if tensor_a.models() != baseline.models() {
        return Err(MetricsError::ModelAxesMismatch);
    }
    let a = aggregates(tensor_a);
    let b = aggregates(baseline);
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| match (x.peer_mean, y.peer_mean) {
            (Some(p), Some(q)) => Some(p - q),
            _ => None,
        })
        .collect())
}

/// Mean score at one displayed position, relative to the grand mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionLiftRow {
    /// 1-based display position.
    pub position: usize,
    pub mean_score: f64,
    /// `mean_score` minus the grand mean over all included records.
    pub lift: f64,
    pub n: usize,
}

fn position_records(
    records: &[EvaluationRecord],
    exclude_self: bool,
) -> impl Iterator<Item = &EvaluationRecord> {
    records
        .iter()
        .filter(move |r| !exclude_self || r.evaluator_id != r.evaluatee_id)
}

/// Score lift per displayed position. Self-evaluations are excluded when
/// `exclude_self` (the peer-facing convention).
pub fn position_lift(records: &[EvaluationRecord], exclude_self: bool) -> Vec<PositionLiftRow> {
    let mut by_position: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut all = Vec::new();
    for record in position_records(records, exclude_self) {
        by_position
            .entry(record.displayed_position)
            .or_default()
            .push(record.score as f64);
        all.push(record.score as f64);
    }
    let Some(grand) = mean_f64(&all) else {
        return Vec::new();
    };
    by_position
        .into_iter()
        .map(|(position, scores)| {
            let mean_score = mean_f64(&scores).unwrap();
            PositionLiftRow {
                position,
                mean_score,
                lift: mean_score - grand,
                n: scores.len(),
            }
        })
        .collect()
}

/// Ordinary least-squares slope of score against displayed position.
/// `None` without at least two distinct positions.
pub fn position_slope(records: &[EvaluationRecord], exclude_self: bool) -> Option<f64> {
    let points: Vec<(f64, f64)> = position_records(records, exclude_self)
        .map(|r| (r.displayed_position as f64, r.score as f64))
        .collect();
    if points.is_empty() {
        return None;
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    Some(sxy / sxx)
}

/// Whether authorship helps: peers' scores for a model's answers on
/// questions that model itself authored ("home") versus questions others
/// authored ("away"). Self-evaluations are excluded throughout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomeAdvantage {
    /// Per-model home-minus-away peer mean, axis order.
    pub per_model: Vec<Option<f64>>,
    /// Pooled effect size (Cohen's d, home vs away) across the cohort.
    pub cohort_d: Option<f64>,
    /// Welch two-sided p for the pooled contrast.
    pub welch_p: Option<f64>,
    pub home_n: usize,
    pub away_n: usize,
}

pub fn home_advantage(tensor: &ScoreTensor, questions: &[Question]) -> HomeAdvantage {
    let author_of: BTreeMap<&QuestionId, &ModelId> = questions
        .iter()
        .map(|q| (&q.question_id, &q.author_id))
        .collect();
    let models = tensor.models();
    let k = models.len();
    let mut home: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut away: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (i, j, q, score) in tensor.iter() {
        if i == j {
            continue;
        }
        let qid = &tensor.questions()[q];
        let Some(author) = author_of.get(qid) else {
            continue;
        };
        if *author == &models[j] {
            home[j].push(score as f64);
        } else {
            away[j].push(score as f64);
        }
    }
    let per_model = (0..k)
        .map(|j| match (mean_f64(&home[j]), mean_f64(&away[j])) {
            (Some(h), Some(a)) => Some(h - a),
            _ => None,
        })
        .collect();
    let home_all: Vec<f64> = home.iter().flatten().copied().collect();
    let away_all: Vec<f64> = away.iter().flatten().copied().collect();
    let cohort_d = stats::cohens_d(&home_all, &away_all).ok();
    let welch_p = stats::welch_t(&home_all, &away_all).ok().map(|t| t.p_value);
    HomeAdvantage {
        per_model,
        cohort_d,
        welch_p,
        home_n: home_all.len(),
        away_n: away_all.len(),
    }
}

/// Peer mean per model per category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryBreakdown {
    pub model_id: ModelId,
    pub per_category: BTreeMap<Category, Option<f64>>,
    pub counts: BTreeMap<Category, usize>,
}

pub fn category_breakdown(tensor: &ScoreTensor, questions: &[Question]) -> Vec<CategoryBreakdown> {
    let category_of: BTreeMap<&QuestionId, Category> = questions
        .iter()
        .map(|q| (&q.question_id, q.category))
        .collect();
    let models = tensor.models();
    let mut pools: Vec<BTreeMap<Category, Vec<f64>>> = vec![BTreeMap::new(); models.len()];
    for (i, j, q, score) in tensor.iter() {
        if i == j {
            continue;
        }
        let qid = &tensor.questions()[q];
        let Some(&category) = category_of.get(qid) else {
            continue;
        };
        pools[j].entry(category).or_default().push(score as f64);
    }
    models
        .iter()
        .zip(pools)
        .map(|(model_id, pool)| {
            let mut per_category = BTreeMap::new();
            let mut counts = BTreeMap::new();
            for category in Category::ALL {
                let scores = pool.get(&category).map(Vec::as_slice).unwrap_or(&[]);
                per_category.insert(category, mean_f64(scores));
                counts.insert(category, scores.len());
            }
            CategoryBreakdown {
                model_id: model_id.clone(),
                per_category,
                counts,
            }
        })
        .collect()
}

/// One question's difficulty/controversy profile over its non-self score
/// pool. Difficulty is reported as the mean peer score — a low mean marks
/// a hard question. Controversy is the sample standard deviation of the
/// same pool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionAutopsy {
    pub question_id: QuestionId,
    pub author_id: ModelId,
    pub category: Category,
    pub difficulty: f64,
    pub controversy: Option<f64>,
    pub n_scores: usize,
}

/// Autopsy rows for complete questions (every evaluator scored every
/// evaluatee, diagonal included); incomplete questions are listed, not
/// silently averaged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutopsyReport {
    pub rows: Vec<QuestionAutopsy>,
    pub incomplete: Vec<QuestionId>,
}

pub fn question_autopsy(tensor: &ScoreTensor, questions: &[Question]) -> AutopsyReport {
    let mut rows = Vec::new();
    let mut incomplete = Vec::new();
    for question in questions {
        let Some(q) = tensor
            .questions()
            .iter()
            .position(|qid| qid == &question.question_id)
        else {
            incomplete.push(question.question_id.clone());
            continue;
        };
        if !tensor.question_complete(q) {
            incomplete.push(question.question_id.clone());
            continue;
        }
        let pool = tensor.question_peer_scores(q);
        let difficulty = mean_of(&pool).expect("complete questions have non-empty peer pools");
        rows.push(QuestionAutopsy {
            question_id: question.question_id.clone(),
            author_id: question.author_id.clone(),
            category: question.category,
            difficulty,
            controversy: sample_sd_of(&pool),
            n_scores: pool.len(),
        });
    }
    AutopsyReport { rows, incomplete }
}

/// Pairwise judge agreement: Pearson r between two judges' scores over
/// the (evaluatee, question) cells both scored, excluding cells where
/// either judge is the evaluatee (self-interest would contaminate the
/// agreement signal). `None` off-diagonal when fewer than 3 shared cells
/// or a judge's shared scores are constant; the diagonal is `None` by
/// definition.
pub fn judge_agreement(tensor: &ScoreTensor) -> Vec<Vec<Option<f64>>> {
    let k = tensor.models().len();
    let nq = tensor.questions().len();
    let mut matrix = vec![vec![None; k]; k];
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for j in 0..k {
                if j == a || j == b {
                    continue;
                }
                for q in 0..nq {
                    if let (Some(x), Some(y)) = (tensor.get(a, j, q), tensor.get(b, j, q)) {
                        xs.push(x as f64);
                        ys.push(y as f64);
                    }
                }
            }
            matrix[a][b] = stats::pearson(&xs, &ys).ok().map(|t| t.statistic);
        }
    }
    matrix
}

/// Mean score each evaluator gives each evaluatee: the K x K cross-
/// evaluation matrix, diagonal included.
pub fn cross_eval_matrix(tensor: &ScoreTensor) -> Vec<Vec<Option<f64>>> {
    let k = tensor.models().len();
    let nq = tensor.questions().len();
    let mut matrix = vec![vec![None; k]; k];
    #[allow(clippy::needless_range_loop)]
    for i in 0..k {
        for j in 0..k {
            let scores: Vec<u8> = (0..nq).filter_map(|q| tensor.get(i, j, q)).collect();
            matrix[i][j] = mean_of(&scores);
        }
    }
    matrix
}

/// Kruskal-Wallis test of peer means grouped by provider. Errors from the
/// test (too few groups, all-tied) surface as `Err` for the caller to
/// report as not-applicable.
pub fn provider_effect(
    manifest: &RunManifest,
    aggregates: &[ModelAggregate],
) -> Result<stats::TestResult, stats::StatsError> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for aggregate in aggregates {
        let Some(peer_mean) = aggregate.peer_mean else {
            continue;
        };
        if let Some(spec) = manifest.spec(&aggregate.model_id) {
            groups.entry(&spec.provider_id).or_default().push(peer_mean);
        }
    }
    let slices: Vec<&[f64]> = groups.values().map(Vec::as_slice).collect();
    stats::kruskal_wallis(&slices)
}

/// Min-max normalization to [0, 1] for radar axes. `invert` flips the
/// sense first (for metrics where lower is better). A degenerate axis
/// (all values equal, or a single value) maps to 0.5; `None` stays
/// `None`.
pub fn minmax_normalize(values: &[Option<f64>], invert: bool) -> Vec<Option<f64>> {
    let oriented: Vec<Option<f64>> = values
        .iter()
        .map(|v| v.map(|x| if invert { -x } else { x }))
        .collect();
    let present: Vec<f64> = oriented.iter().filter_map(|v| *v).collect();
    if present.is_empty() {
        return oriented;
    }
    let min = present.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = present.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    oriented
        .iter()
        .map(|v| {
            v.map(|x| {
                if max > min {
                    (x - min) / (max - min)
                } else {
                    0.5
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Origin, Regime};

    /// score(i, j, q) = base[j] + 2·[i == j] + q over a full 3x3x2 grid.
    fn fixture_tensor() -> (ScoreTensor, Vec<Question>) {
        let models: Vec<ModelId> = ["a", "b", "c"].map(ModelId::from).to_vec();
        let questions: Vec<Question> = (0..2)
            .map(|q| Question {
                question_id: QuestionId::new(format!("q{q}")),
                author_id: models[q % 3].clone(),
                category: if q == 0 {
                    Category::FactualKnowledge
                } else {
                    Category::ReasoningLogic
                },
                text: format!("fixture {q}"),
                origin: Origin::Endogenous,
            })
            .collect();
        let qids: Vec<QuestionId> = questions.iter().map(|q| q.question_id.clone()).collect();
        let base = [4u8, 5, 6];
        let mut tensor = ScoreTensor::new(Regime::ShuffleBlind, models.clone(), qids.clone());
        for i in 0..3 {
            for j in 0..3 {
                for q in 0..2 {
                    let score = base[j] + if i == j { 2 } else { 0 } + q as u8;
                    tensor
                        .insert(&models[i], &models[j], &qids[q], score)
                        .unwrap();
                }
            }
        }
        (tensor, questions)
    }

    #[test]
    fn aggregates_match_hand_computation() {
        let (tensor, _) = fixture_tensor();
        let agg = aggregates(&tensor);
        let peer: Vec<f64> = agg.iter().map(|a| a.peer_mean.unwrap()).collect();
        assert_eq!(peer, vec![4.5, 5.5, 6.5]);
        let selfs: Vec<f64> = agg.iter().map(|a| a.self_mean.unwrap()).collect();
        assert_eq!(selfs, vec![6.5, 7.5, 8.5]);
        let generosity: Vec<f64> = agg.iter().map(|a| a.generosity.unwrap()).collect();
        assert_eq!(generosity, vec![6.0, 5.5, 5.0]);
        // Overall mean obeys the convex combination with the self mean.
        for a in &agg {
            let expected = (2.0 * a.peer_mean.unwrap() + a.self_mean.unwrap()) / 3.0;
            assert!((a.overall_mean.unwrap() - expected).abs() < 1e-12);
        }
        // Peer scores {base, base+1} x2 have sample sd sqrt(1/3).
        for a in &agg {
            assert!((a.peer_sd.unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
            assert_eq!(a.peer_count, 4);
            assert_eq!(a.self_count, 2);
        }
    }

    #[test]
    fn self_preference_is_self_minus_peer() {
        let (tensor, _) = fixture_tensor();
        let bias = self_preference(&tensor);
        for b in bias {
            assert!((b.unwrap() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn peer_mean_shift_contrasts_tensors() {
        let (baseline, _) = fixture_tensor();
        let models = baseline.models().to_vec();
        let qids = baseline.questions().to_vec();
        let mut shifted = ScoreTensor::new(Regime::ShuffleOnly, models.clone(), qids.clone());
        for (i, j, q, score) in baseline.iter() {
            // Model b gains a flat +1 from every peer when names show.
            let bump = u8::from(j == 1 && i != j);
            shifted
                .insert(&models[i], &models[j], &qids[q], score + bump)
                .unwrap();
        }
        let shift = peer_mean_shift(&shifted, &baseline).unwrap();
        assert!((shift[0].unwrap() - 0.0).abs() < 1e-12);
        assert!((shift[1].unwrap() - 1.0).abs() < 1e-12);
        assert!((shift[2].unwrap() - 0.0).abs() < 1e-12);

        let other_axes = ScoreTensor::new(
            Regime::ShuffleOnly,
            vec![ModelId::from("x"), ModelId::from("y")],
            qids,
        );
        assert!(peer_mean_shift(&other_axes, &baseline).is_err());
    }

    fn record(
        evaluator: &str,
        evaluatee: &str,
        position: usize,
        score: u8,
    ) -> EvaluationRecord {
        EvaluationRecord {
            regime: Regime::ShuffleBlind,
            evaluator_id: evaluator.into(),
            evaluatee_id: evaluatee.into(),
            question_id: "q0".into(),
            score,
            reason: "fixture reason text that easily satisfies the length contract today".into(),
            flags: vec![],
            displayed_position: position,
            displayed_label: format!("Response {position}"),
        }
    }

    #[test]
    fn position_lift_and_slope() {
        // Position 1 scores 8, position 2 scores 6, position 3 scores 4.
        let mut records = Vec::new();
        for (pos, score) in [(1usize, 8u8), (2, 6), (3, 4)] {
            for i in 0..4 {
                records.push(record(&format!("j{i}"), &format!("e{pos}"), pos, score));
            }
        }
        let rows = position_lift(&records, true);
        assert_eq!(rows.len(), 3);
        assert!((rows[0].mean_score - 8.0).abs() < 1e-12);
        assert!((rows[0].lift - 2.0).abs() < 1e-12);
        assert!((rows[2].lift + 2.0).abs() < 1e-12);
        assert_eq!(rows[1].n, 4);
        let slope = position_slope(&records, true).unwrap();
        assert!((slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn position_metrics_can_exclude_self_evaluations() {
        let records = vec![
            record("a", "a", 1, 10),
            record("b", "a", 1, 6),
            record("a", "b", 2, 6),
            record("b", "b", 2, 10),
        ];
        let with_self = position_lift(&records, false);
        let without_self = position_lift(&records, true);
        assert!((with_self[0].mean_score - 8.0).abs() < 1e-12);
        assert!((without_self[0].mean_score - 6.0).abs() < 1e-12);
        assert!(position_slope(&records, true).is_some());
        // Single position: no slope.
        assert!(position_slope(&records[..2], true).is_none());
    }

    #[test]
    fn home_advantage_detects_authorship_lift() {
        let models: Vec<ModelId> = ["a", "b"].map(ModelId::from).to_vec();
        let questions: Vec<Question> = (0..4)
            .map(|q| Question {
                question_id: QuestionId::new(format!("q{q}")),
                author_id: models[q % 2].clone(),
                category: Category::FactualKnowledge,
                text: format!("fixture {q}"),
                origin: Origin::Endogenous,
            })
            .collect();
        let qids: Vec<QuestionId> = questions.iter().map(|q| q.question_id.clone()).collect();
        let mut tensor = ScoreTensor::new(Regime::ShuffleBlind, models.clone(), qids.clone());
        for q in 0..4 {
            let author = q % 2;
            for i in 0..2 {
                for j in 0..2 {
                    // Evaluatees score 8 on their own questions, 5 on
                    // others'; vary slightly by question for nonzero
                    // variance. Self-evals are inflated to verify their
                    // exclusion.
                    let score = if i == j {
                        10
                    } else if j == author {
                        8 - (q / 2) as u8
                    } else {
                        5 + (q / 2) as u8
                    };
                    tensor.insert(&models[i], &models[j], &qids[q], score).unwrap();
                }
            }
        }
        let report = home_advantage(&tensor, &questions);
        // Home pool per model {8, 7}, away pool {5, 6}: delta = 2.
        for delta in &report.per_model {
            assert!((delta.unwrap() - 2.0).abs() < 1e-12);
        }
        assert_eq!(report.home_n, 4);
        assert_eq!(report.away_n, 4);
        assert!(report.cohort_d.unwrap() > 2.0);
        assert!(report.welch_p.unwrap() < 0.05);
    }

    #[test]
    fn category_breakdown_partitions_by_question_category() {
        let (tensor, questions) = fixture_tensor();
        let breakdown = category_breakdown(&tensor, &questions);
        // q0 (factual) contributes base scores, q1 (reasoning) base+1.
        let a = &breakdown[0];
        assert!((a.per_category[&Category::FactualKnowledge].unwrap() - 4.0).abs() < 1e-12);
        assert!((a.per_category[&Category::ReasoningLogic].unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(a.counts[&Category::FactualKnowledge], 2);
        assert!(a.per_category[&Category::CurrentEvents].is_none());
        assert_eq!(a.counts[&Category::CurrentEvents], 0);
    }

    #[test]
    fn autopsy_reports_complete_questions_and_lists_incomplete() {
        let (tensor, questions) = fixture_tensor();
        let report = question_autopsy(&tensor, &questions);
        assert_eq!(report.rows.len(), 2);
        assert!(report.incomplete.is_empty());
        assert!((report.rows[0].difficulty - 5.0).abs() < 1e-12);
        assert!((report.rows[1].difficulty - 6.0).abs() < 1e-12);
        // Pool {4,4,5,5,6,6}: sample sd = sqrt(4/5).
        assert!((report.rows[0].controversy.unwrap() - (4.0f64 / 5.0).sqrt()).abs() < 1e-12);
        assert_eq!(report.rows[0].n_scores, 6);

        // Remove one cell: that question becomes incomplete.
        let models = tensor.models().to_vec();
        let qids = tensor.questions().to_vec();
        let mut partial = ScoreTensor::new(Regime::ShuffleBlind, models.clone(), qids.clone());
        for (i, j, q, s) in tensor.iter() {
            if q == 0 && i == 1 && j == 2 {
                continue;
            }
            partial.insert(&models[i], &models[j], &qids[q], s).unwrap();
        }
        let report = question_autopsy(&partial, &questions);
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.incomplete, vec![QuestionId::new("q0")]);
    }

    #[test]
    fn extreme_disagreement_controversy_value() {
        let models: Vec<ModelId> = ["a", "b"].map(ModelId::from).to_vec();
        let qid = QuestionId::new("q0");
        let mut tensor = ScoreTensor::new(Regime::ShuffleBlind, models.clone(), vec![qid.clone()]);
        tensor.insert(&models[0], &models[1], &qid, 10).unwrap();
        tensor.insert(&models[1], &models[0], &qid, 1).unwrap();
        tensor.insert(&models[0], &models[0], &qid, 5).unwrap();
        tensor.insert(&models[1], &models[1], &qid, 5).unwrap();
        let questions = vec![Question {
            question_id: qid,
            author_id: models[0].clone(),
            category: Category::CreativeOpenEnded,
            text: "fixture".into(),
            origin: Origin::Endogenous,
        }];
        let report = question_autopsy(&tensor, &questions);
        let controversy = report.rows[0].controversy.unwrap();
        assert!((controversy - 40.5f64.sqrt()).abs() < 1e-10);
        assert!((controversy - 6.3640).abs() < 1e-4);
    }

    #[test]
    fn judge_agreement_excludes_evaluatee_cells() {
        let models: Vec<ModelId> = ["a", "b", "c", "d"].map(ModelId::from).to_vec();
        let qids: Vec<QuestionId> = (0..3).map(|q| QuestionId::new(format!("q{q}"))).collect();
        let mut tensor = ScoreTensor::new(Regime::ShuffleBlind, models.clone(), qids.clone());
        // Judges a and b agree perfectly on c and d; judge c anti-scores.
        for (q, qid) in qids.iter().enumerate() {
            for (j, evaluatee) in models.iter().enumerate() {
                let quality = [3u8, 4, 5, 6][j] + q as u8;
                for (i, judge) in models.iter().enumerate() {
                    let score = if i == 2 { 10 - quality } else { quality };
                    tensor.insert(judge, evaluatee, qid, score).unwrap();
                }
            }
        }
        let matrix = judge_agreement(&tensor);
        assert!((matrix[0][1].unwrap() - 1.0).abs() < 1e-12);
        assert!((matrix[0][2].unwrap() + 1.0).abs() < 1e-12);
        assert!(matrix[0][0].is_none());
        assert_eq!(matrix[0][1], matrix[1][0]);
    }

    #[test]
    fn cross_eval_matrix_means_per_pair() {
        let (tensor, _) = fixture_tensor();
        let matrix = cross_eval_matrix(&tensor);
        // a scores b's answers 5 and 6.
        assert!((matrix[0][1].unwrap() - 5.5).abs() < 1e-12);
        // Diagonal carries the self means.
        assert!((matrix[1][1].unwrap() - 7.5).abs() < 1e-12);
    }

    #[test]
    fn provider_effect_groups_by_provider() {
        let (tensor, _) = fixture_tensor();
        let mut manifest = RunManifest {
            run_id: "m".into(),
            seed: 1,
            cohort: vec![
                crate::types::ModelSpec::new("a", "p1", "A"),
                crate::types::ModelSpec::new("b", "p2", "B"),
                crate::types::ModelSpec::new("c", "p2", "C"),
            ],
            categories: Category::ALL.to_vec(),
            questions_total: 2,
            regimes: vec![Regime::ShuffleBlind],
            grounding_provider: "sim".into(),
            phase_state: Default::default(),
        };
        manifest.validate().unwrap();
        let agg = aggregates(&tensor);
        let result = provider_effect(&manifest, &agg).unwrap();
        assert!(result.statistic > 0.0);
        assert_eq!(result.n, 3);
        // Collapsing to one provider makes the test inapplicable.
        for spec in &mut manifest.cohort {
            spec.provider_id = "p1".into();
        }
        assert!(provider_effect(&manifest, &agg).is_err());
    }

    #[test]
    fn minmax_normalization_handles_inversion_and_degeneracy() {
        let values = vec![Some(2.0), Some(4.0), None, Some(6.0)];
        let normal = minmax_normalize(&values, false);
        assert_eq!(normal, vec![Some(0.0), Some(0.5), None, Some(1.0)]);
        let inverted = minmax_normalize(&values, true);
        assert_eq!(inverted, vec![Some(1.0), Some(0.5), None, Some(0.0)]);
        let flat = minmax_normalize(&[Some(3.0), Some(3.0)], false);
        assert_eq!(flat, vec![Some(0.5), Some(0.5)]);
        let single = minmax_normalize(&[Some(7.0), None], false);
        assert_eq!(single, vec![Some(0.5), None]);
    }
}
