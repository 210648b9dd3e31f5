//! Tournament-style Elo ranking derived from the score tensor.
//!
//! Every judged question yields pairwise matches: for one evaluator and one
//! question, each unordered pair of distinct evaluatees with both scores
//! present — the judge's own answer excluded — becomes a match. The higher
//! score wins; equal scores draw. Matches are shuffled deterministically by
//! seed and rated sequentially, so the whole ranking is reproducible from
//! (tensor, seed).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::stats::{self, StatsError, TestResult};
use crate::tensor::ScoreTensor;
use crate::types::ModelId;
use crate::util::derived_rng;

/// Standard K-factor for rating updates.
pub const K_FACTOR: f64 = 32.0;
/// Rating every model starts from.
pub const INITIAL_RATING: f64 = 1000.0;

/// Result of one pairwise match from the first player's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    WinA,
    WinB,
    Draw,
}

/// One pairwise match between two evaluatees, derived from a single judge's
/// scores on a single question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    pub a: ModelId,
    pub b: ModelId,
    pub outcome: Outcome,
}

/// Final ratings after sequentially applying every match.
#[derive(Debug, Clone, PartialEq)]
pub struct EloTable {
    pub models: Vec<ModelId>,
    pub ratings: Vec<f64>,
    pub match_count: usize,
    pub k_factor: f64,
    pub initial_rating: f64,
}

impl EloTable {
    pub fn rating(&self, id: &ModelId) -> Option<f64> {
        self.models
            .iter()
            .position(|m| m == id)
            .map(|i| self.ratings[i])
    }

    /// Sum of deviations from the initial rating; exactly conserved (up to
    /// float addition error) because each update moves both players by the
    /// same delta in opposite directions.
    pub fn total_deviation(&self) -> f64 {
        self.ratings.iter().map(|r| r - self.initial_rating).sum()
    }
}

/// Expected score of a player rated `ra` against one rated `rb`.
pub fn expected_score(ra: f64, rb: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((rb - ra) / 400.0))
}

/// Converts a score tensor into a deterministically shuffled match list.
///
/// Enumeration is canonical — evaluators in cohort order, questions in
/// corpus order, evaluatee pairs in index order — and the final list is
/// shuffled by a ChaCha stream derived from `seed`, so the same inputs
/// always produce the same match sequence.
pub fn tensor_to_matches(tensor: &ScoreTensor, seed: u64) -> Vec<Match> {
    let k = tensor.k();
    let n = tensor.n();
    let models = tensor.models();
    let mut matches = Vec::new();
    for evaluator in 0..k {
        for question in 0..n {
            for a in 0..k {
                if a == evaluator {
                    continue;
                }
                let Some(score_a) = tensor.get(evaluator, a, question) else {
                    continue;
                };
                for b in (a + 1)..k {
                    if b == evaluator {
                        continue;
                    }
                    let Some(score_b) = tensor.get(evaluator, b, question) else {
                        continue;
                    };
                    let outcome = match score_a.cmp(&score_b) {
                        std::cmp::Ordering::Greater => Outcome::WinA,
                        std::cmp::Ordering::Less => Outcome::WinB,
                        std::cmp::Ordering::Equal => Outcome::Draw,
                    };
                    matches.push(Match {
                        a: models[a].clone(),
                        b: models[b].clone(),
                        outcome,
                    });
                }
            }
        }
    }
    let mut rng = derived_rng(seed, &["elo_shuffle"]);
    matches.shuffle(&mut rng);
    matches
}

/// Sequentially rates a match list. Every update applies `+delta` to one
/// player and `-delta` to the other, so the rating sum is invariant by
/// construction.
pub fn rate(models: &[ModelId], matches: &[Match]) -> EloTable {
    let index: BTreeMap<&ModelId, usize> = models.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let mut ratings = vec![INITIAL_RATING; models.len()];
    for m in matches {
        let (Some(&ia), Some(&ib)) = (index.get(&m.a), index.get(&m.b)) else {
            continue;
        };
        let ea = expected_score(ratings[ia], ratings[ib]);
        let sa = match m.outcome {
            Outcome::WinA => 1.0,
            Outcome::WinB => 0.0,
            Outcome::Draw => 0.5,
        };
        let delta = K_FACTOR * (sa - ea);
        ratings[ia] += delta;
        ratings[ib] -= delta;
    }
    EloTable {
        models: models.to_vec(),
        ratings,
        match_count: matches.len(),
        k_factor: K_FACTOR,
        initial_rating: INITIAL_RATING,
    }
}

/// Full pipeline: tensor to matches to ratings.
pub fn rate_tensor(tensor: &ScoreTensor, seed: u64) -> EloTable {
    let matches = tensor_to_matches(tensor, seed);
    rate(tensor.models(), &matches)
}

/// Agreement between Elo ratings and mean peer scores for the same models.
#[derive(Debug, Clone, PartialEq)]
pub struct EloAgreement {
    pub pearson: TestResult,
    pub spearman: TestResult,
}

/// Correlates the rating vector with a parallel peer-score vector.
pub fn elo_vs_mean(table: &EloTable, peer_scores: &[f64]) -> Result<EloAgreement, StatsError> {
    Ok(EloAgreement {
        pearson: stats::pearson(&table.ratings, peer_scores)?,
        spearman: stats::spearman(&table.ratings, peer_scores)?,
    })
}
