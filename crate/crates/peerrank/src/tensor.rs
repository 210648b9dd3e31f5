//! The K x K x N score tensor: sparse integer judgments indexed by
//! (evaluator, evaluatee, question).
//!
//! Cells are optional — provider failures leave holes — and the diagonal
//! (self-evaluations) is first-class data. The tensor is a pure value: the
//! same set of evaluation records produces the same tensor regardless of
//! the order they were persisted or replayed in.

use std::collections::BTreeMap;

use crate::types::{EvaluationRecord, ModelId, QuestionId, Regime, SCORE_MAX, SCORE_MIN};

/// Errors raised when building or filling a tensor.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TensorError {
    #[error("unknown model id {0} (not in this tensor's cohort axis)")]
    UnknownModel(ModelId),
    #[error("unknown question id {0} (not in this tensor's question axis)")]
    UnknownQuestion(QuestionId),
    #[error("score {0} outside {SCORE_MIN}..={SCORE_MAX}")]
    ScoreOutOfRange(u8),
    #[error("conflicting scores for cell ({evaluator}, {evaluatee}, {question}): {existing} vs {incoming}")]
    ConflictingCell {
        evaluator: ModelId,
        evaluatee: ModelId,
        question: QuestionId,
        existing: u8,
        incoming: u8,
    },
}

/// Sparse score tensor for one judging regime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreTensor {
    regime: Regime,
    models: Vec<ModelId>,
    questions: Vec<QuestionId>,
    model_index: BTreeMap<ModelId, usize>,
    question_index: BTreeMap<QuestionId, usize>,
    cells: BTreeMap<(usize, usize, usize), u8>,
}

impl ScoreTensor {
    /// An empty tensor with fixed axes. Axes come from the run manifest, so
    /// an empty run still knows its K and N.
    pub fn new(regime: Regime, models: Vec<ModelId>, questions: Vec<QuestionId>) -> Self {
        let model_index = models
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let question_index = questions
            .iter()
            .enumerate()
            .map(|(i, q)| (q.clone(), i))
            .collect();
        Self {
            regime,
            models,
            questions,
            model_index,
            question_index,
            cells: BTreeMap::new(),
        }
    }

    /// Builds a tensor from evaluation records. Duplicate cells carrying the
    /// same score collapse silently (idempotent replay); duplicates carrying
    /// different scores are an error.
    pub fn from_records<'a>(
        regime: Regime,
        models: Vec<ModelId>,
        questions: Vec<QuestionId>,
        records: impl IntoIterator<Item = &'a EvaluationRecord>,
    ) -> Result<Self, TensorError> {
        let mut t = Self::new(regime, models, questions);
        for rec in records {
            if rec.regime != regime {
                continue;
            }
            t.insert(&rec.evaluator_id, &rec.evaluatee_id, &rec.question_id, rec.score)?;
        }
        Ok(t)
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn k(&self) -> usize {
        self.models.len()
    }

    pub fn n(&self) -> usize {
        self.questions.len()
    }

    pub fn models(&self) -> &[ModelId] {
        &self.models
    }

    pub fn questions(&self) -> &[QuestionId] {
        &self.questions
    }

    pub fn model_index(&self, id: &ModelId) -> Option<usize> {
        self.model_index.get(id).copied()
    }

    pub fn question_index(&self, id: &QuestionId) -> Option<usize> {
        self.question_index.get(id).copied()
    }

    /// Inserts one judgment. Same-score duplicates are a no-op.
    pub fn insert(
        &mut self,
        evaluator: &ModelId,
        evaluatee: &ModelId,
        question: &QuestionId,
        score: u8,
    ) -> Result<(), TensorError> {
        if !(SCORE_MIN..=SCORE_MAX).contains(&score) {
            return Err(TensorError::ScoreOutOfRange(score));
        }
        let i = *self
            .model_index
            .get(evaluator)
            .ok_or_else(|| TensorError::UnknownModel(evaluator.clone()))?;
        let j = *self
            .model_index
            .get(evaluatee)
            .ok_or_else(|| TensorError::UnknownModel(evaluatee.clone()))?;
        let q = *self
            .question_index
            .get(question)
            .ok_or_else(|| TensorError::UnknownQuestion(question.clone()))?;
        if let Some(&existing) = self.cells.get(&(i, j, q)) {
            if existing != score {
                return Err(TensorError::ConflictingCell {
                    evaluator: evaluator.clone(),
                    evaluatee: evaluatee.clone(),
                    question: question.clone(),
                    existing,
                    incoming: score,
                });
            }
            return Ok(());
        }
        self.cells.insert((i, j, q), score);
        Ok(())
    }

    /// Score for (evaluator index, evaluatee index, question index).
    pub fn get(&self, evaluator: usize, evaluatee: usize, question: usize) -> Option<u8> {
        self.cells.get(&(evaluator, evaluatee, question)).copied()
    }

    pub fn get_by_id(
        &self,
        evaluator: &ModelId,
        evaluatee: &ModelId,
        question: &QuestionId,
    ) -> Option<u8> {
        let i = self.model_index(evaluator)?;
        let j = self.model_index(evaluatee)?;
        let q = self.question_index(question)?;
        self.get(i, j, q)
    }

    /// Number of populated cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Fraction of the K*K*N grid that is populated; 0 for an empty grid.
    pub fn density(&self) -> f64 {
        let capacity = self.k() * self.k() * self.n();
        if capacity == 0 {
            0.0
        } else {
            self.cells.len() as f64 / capacity as f64
        }
    }

    /// Deterministic iteration over populated cells as
    /// (evaluator index, evaluatee index, question index, score).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, u8)> + '_ {
        self.cells.iter().map(|(&(i, j, q), &s)| (i, j, q, s))
    }

    /// Scores received by `evaluatee` from other models (the peer slice).
    pub fn peer_scores_received(&self, evaluatee: usize) -> Vec<u8> {
        self.iter()
            .filter(|&(i, j, _, _)| j == evaluatee && i != evaluatee)
            .map(|(_, _, _, s)| s)
            .collect()
    }

    /// All scores received by `evaluatee`, self-judgment included.
    pub fn all_scores_received(&self, evaluatee: usize) -> Vec<u8> {
        self.iter()
            .filter(|&(_, j, _, _)| j == evaluatee)
            .map(|(_, _, _, s)| s)
            .collect()
    }

    /// Scores `evaluator` handed to models other than itself.
    pub fn peer_scores_given(&self, evaluator: usize) -> Vec<u8> {
        self.iter()
            .filter(|&(i, j, _, _)| i == evaluator && j != evaluator)
            .map(|(_, _, _, s)| s)
            .collect()
    }

    /// The diagonal slice: scores `model` gave its own answers.
    pub fn self_scores(&self, model: usize) -> Vec<u8> {
        self.iter()
            .filter(|&(i, j, _, _)| i == model && j == model)
            .map(|(_, _, _, s)| s)
            .collect()
    }

    /// Non-self scores attached to one question, across all (judge, evaluatee)
    /// pairs.
    pub fn question_peer_scores(&self, question: usize) -> Vec<u8> {
        self.iter()
            .filter(|&(i, j, q, _)| q == question && i != j)
            .map(|(_, _, _, s)| s)
            .collect()
    }

    /// True when every cell of the K x K slice for `question` is populated
    /// (diagonal included).
    pub fn question_complete(&self, question: usize) -> bool {
        let k = self.k();
        (0..k).all(|i| (0..k).all(|j| self.get(i, j, question).is_some()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(names: &[&str]) -> Vec<ModelId> {
        names.iter().map(|n| ModelId::from(*n)).collect()
    }

    fn qids(names: &[&str]) -> Vec<QuestionId> {
        names.iter().map(|n| QuestionId::from(*n)).collect()
    }

    fn record(
        evaluator: &str,
        evaluatee: &str,
        question: &str,
        score: u8,
        regime: Regime,
    ) -> EvaluationRecord {
        EvaluationRecord {
            regime,
            evaluator_id: evaluator.into(),
            evaluatee_id: evaluatee.into(),
            question_id: question.into(),
            score,
            reason: "hand-built fixture judgment with enough words to pass checks".into(),
            flags: vec![],
            displayed_position: 1,
            displayed_label: "Response A".into(),
        }
    }

    #[test]
    fn two_model_single_question_tensor_holds_all_four_cells() {
        let recs = vec![
            record("a", "a", "q0", 9, Regime::ShuffleBlind),
            record("a", "b", "q0", 7, Regime::ShuffleBlind),
            record("b", "a", "q0", 6, Regime::ShuffleBlind),
            record("b", "b", "q0", 8, Regime::ShuffleBlind),
        ];
        let t = ScoreTensor::from_records(
            Regime::ShuffleBlind,
            ids(&["a", "b"]),
            qids(&["q0"]),
            &recs,
        )
        .unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.density(), 1.0);
        assert_eq!(t.get(0, 0, 0), Some(9));
        assert_eq!(t.get(0, 1, 0), Some(7));
        assert_eq!(t.get(1, 0, 0), Some(6));
        assert_eq!(t.get(1, 1, 0), Some(8));
        assert_eq!(t.self_scores(0), vec![9]);
        assert_eq!(t.peer_scores_received(0), vec![6]);
        assert_eq!(t.question_peer_scores(0), vec![7, 6]);
        assert!(t.question_complete(0));
    }

    #[test]
    fn missing_cell_reads_as_none_and_lowers_density() {
        let recs = vec![
            record("a", "a", "q0", 9, Regime::ShuffleBlind),
            record("a", "b", "q0", 7, Regime::ShuffleBlind),
            record("b", "b", "q0", 8, Regime::ShuffleBlind),
        ];
        let t = ScoreTensor::from_records(
            Regime::ShuffleBlind,
            ids(&["a", "b"]),
            qids(&["q0"]),
            &recs,
        )
        .unwrap();
        assert_eq!(t.get(1, 0, 0), None);
        assert!(t.density() < 1.0);
        assert!((t.density() - 0.75).abs() < 1e-12);
        assert!(!t.question_complete(0));
    }

    #[test]
    fn empty_run_still_reports_dimensions() {
        let t = ScoreTensor::new(Regime::BlindOnly, ids(&["a", "b", "c"]), qids(&["q0", "q1"]));
        assert_eq!(t.k(), 3);
        assert_eq!(t.n(), 2);
        assert_eq!(t.len(), 0);
        assert_eq!(t.density(), 0.0);
    }

    #[test]
    fn replay_order_does_not_change_the_tensor() {
        let mut recs = vec![
            record("a", "b", "q0", 7, Regime::ShuffleOnly),
            record("b", "a", "q0", 5, Regime::ShuffleOnly),
            record("a", "a", "q1", 10, Regime::ShuffleOnly),
            record("b", "b", "q1", 2, Regime::ShuffleOnly),
        ];
        let forward = ScoreTensor::from_records(
            Regime::ShuffleOnly,
            ids(&["a", "b"]),
            qids(&["q0", "q1"]),
            &recs,
        )
        .unwrap();
        recs.reverse();
        let backward = ScoreTensor::from_records(
            Regime::ShuffleOnly,
            ids(&["a", "b"]),
            qids(&["q0", "q1"]),
            &recs,
        )
        .unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn duplicate_same_score_is_idempotent_but_conflict_errors() {
        let mut t = ScoreTensor::new(Regime::ShuffleBlind, ids(&["a", "b"]), qids(&["q0"]));
        t.insert(&"a".into(), &"b".into(), &"q0".into(), 7).unwrap();
        t.insert(&"a".into(), &"b".into(), &"q0".into(), 7).unwrap();
        assert_eq!(t.len(), 1);
        let err = t
            .insert(&"a".into(), &"b".into(), &"q0".into(), 8)
            .unwrap_err();
        assert!(matches!(err, TensorError::ConflictingCell { .. }));
    }

    #[test]
    fn unknown_axes_and_bad_scores_error() {
        let mut t = ScoreTensor::new(Regime::ShuffleBlind, ids(&["a", "b"]), qids(&["q0"]));
        assert!(matches!(
            t.insert(&"zz".into(), &"b".into(), &"q0".into(), 5),
            Err(TensorError::UnknownModel(_))
        ));
        assert!(matches!(
            t.insert(&"a".into(), &"b".into(), &"qq".into(), 5),
            Err(TensorError::UnknownQuestion(_))
        ));
        assert!(matches!(
            t.insert(&"a".into(), &"b".into(), &"q0".into(), 0),
            Err(TensorError::ScoreOutOfRange(0))
        ));
        assert!(matches!(
            t.insert(&"a".into(), &"b".into(), &"q0".into(), 11),
            Err(TensorError::ScoreOutOfRange(11))
        ));
    }

    #[test]
    fn records_from_other_regimes_are_ignored() {
        let recs = vec![
            record("a", "b", "q0", 7, Regime::ShuffleBlind),
            record("a", "b", "q0", 3, Regime::BlindOnly),
        ];
        let t = ScoreTensor::from_records(
            Regime::ShuffleBlind,
            ids(&["a", "b"]),
            qids(&["q0"]),
            &recs,
        )
        .unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get(0, 1, 0), Some(7));
    }
}
