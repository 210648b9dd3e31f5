//! How answers are laid out in front of a judge: the seeded presentation
//! permutation, identity-hiding labels, and the responses block that goes
//! into the judging prompt.

use rand::seq::SliceRandom;

use crate::types::{ModelId, QuestionId, Regime};
use crate::util::{derived_rng, letter_label};

/// One answer as handed to the presentation builder, in canonical cohort
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerForJudging {
    pub respondent_id: ModelId,
    pub display_name: String,
    pub text: String,
}

/// One response as the judge sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct PresentedResponse {
    pub evaluatee_id: ModelId,
    /// What the judge is told this response is called: the author's
    /// display name when identities are visible, `Response A` / `B` / ...
    /// (assigned in display order) when blind.
    pub label: String,
    /// 1-based position in the displayed list.
    pub position: usize,
    pub text: String,
}

/// A fully determined judging layout for one (regime, evaluator, question).
#[derive(Debug, Clone, PartialEq)]
pub struct JudgingPresentation {
    pub regime: Regime,
    pub evaluator_id: ModelId,
    pub question_id: QuestionId,
    pub responses: Vec<PresentedResponse>,
}

impl JudgingPresentation {
    /// Lays out `answers` for one judge. Shuffling regimes permute the
    /// display order with a run-seeded, per-(regime, evaluator, question)
    /// RNG; non-shuffling regimes keep canonical cohort order, so each
    /// evaluatee has a fixed display position there. Blind regimes replace
    /// author names with order-based neutral labels.
    pub fn build(
        regime: Regime,
        evaluator_id: &ModelId,
        question_id: &QuestionId,
        answers: &[AnswerForJudging],
        master_seed: u64,
    ) -> Self {
        let mut order: Vec<usize> = (0..answers.len()).collect();
        if regime.shuffle() {
            let mut rng = derived_rng(
                master_seed,
                &[
                    "perm",
                    regime.name(),
                    evaluator_id.as_str(),
                    question_id.as_str(),
                ],
            );
            order.shuffle(&mut rng);
        }
        let responses = order
            .iter()
            .enumerate()
            .map(|(display_index, &source_index)| {
                let answer = &answers[source_index];
                let label = if regime.blind() {
                    format!("Response {}", letter_label(display_index))
                } else {
                    answer.display_name.clone()
                };
                PresentedResponse {
                    evaluatee_id: answer.respondent_id.clone(),
                    label,
                    position: display_index + 1,
                    text: answer.text.clone(),
                }
            })
            .collect();
        JudgingPresentation {
            regime,
            evaluator_id: evaluator_id.clone(),
            question_id: question_id.clone(),
            responses,
        }
    }

    pub fn labels(&self) -> Vec<String> {
        self.responses.iter().map(|r| r.label.clone()).collect()
    }

    /// The first displayed label; the prompt's output example uses it.
    pub fn label_example(&self) -> &str {
        self.responses
            .first()
            .map(|r| r.label.as_str())
            .unwrap_or("Response A")
    }

    pub fn response_for_label(&self, label: &str) -> Option<&PresentedResponse> {
        self.responses.iter().find(|r| r.label == label)
    }

    /// The Responses block of the judging prompt: `{label}:\n{text}`
    /// entries separated by blank lines, in display order.
    pub fn responses_block(&self) -> String {
        self.responses
            .iter()
            .map(|r| format!("{}:\n{}", r.label, r.text))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// Recovers `(label, text)` pairs from the Responses section of a full
/// judging prompt — the inverse of [`JudgingPresentation::responses_block`]
/// as embedded by the judging template. Simulated judges and tests use
/// this to see exactly what a judge sees. Response texts containing blank
/// lines are ambiguous in this format, so simulated answers stay
/// single-paragraph.
pub fn parse_responses_block(judge_prompt: &str) -> Option<Vec<(String, String)>> {
    let start_marker = "\nResponses:\n";
    let end_marker = "\n\nOutput format (STRICT):";
    let start = judge_prompt.find(start_marker)? + start_marker.len();
    let end = judge_prompt[start..].find(end_marker)? + start;
    let block = &judge_prompt[start..end];
    let mut out = Vec::new();
    for part in block.split("\n\n") {
        let (label, text) = part.split_once(":\n")?;
        out.push((label.to_string(), text.to_string()));
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn answers(n: usize) -> Vec<AnswerForJudging> {
        (0..n)
            .map(|i| AnswerForJudging {
                respondent_id: ModelId::from(format!("model_{i}")),
                display_name: format!("Display {i}"),
                text: format!("answer text {i}"),
            })
            .collect()
    }

    fn qid() -> QuestionId {
        QuestionId::new("q_model_0_0000")
    }

    #[test]
    fn blind_labels_follow_display_order_and_hide_names() {
        let p = JudgingPresentation::build(
            Regime::ShuffleBlind,
            &ModelId::from("judge"),
            &qid(),
            &answers(5),
            42,
        );
        let labels = p.labels();
        assert_eq!(
            labels,
            vec!["Response A", "Response B", "Response C", "Response D", "Response E"]
        );
        for r in &p.responses {
            assert!(!r.label.contains("Display"));
        }
        // Positions are 1-based display slots.
        assert_eq!(
            p.responses.iter().map(|r| r.position).collect::<Vec<_>>(),
            vec![1, 2, 3, 4, 5]
        );
    }

    #[test]
    fn visible_regime_uses_display_names_in_shuffled_order() {
        let p = JudgingPresentation::build(
            Regime::ShuffleOnly,
            &ModelId::from("judge"),
            &qid(),
            &answers(6),
            42,
        );
        let mut labels = p.labels();
        assert!(labels.iter().all(|l| l.starts_with("Display ")));
        labels.sort();
        assert_eq!(
            labels,
            (0..6).map(|i| format!("Display {i}")).collect::<Vec<_>>()
        );
    }

    #[test]
    fn non_shuffling_regime_keeps_canonical_order() {
        let p = JudgingPresentation::build(
            Regime::BlindOnly,
            &ModelId::from("judge"),
            &qid(),
            &answers(4),
            42,
        );
        let evaluatees: Vec<String> = p
            .responses
            .iter()
            .map(|r| r.evaluatee_id.to_string())
            .collect();
        assert_eq!(evaluatees, vec!["model_0", "model_1", "model_2", "model_3"]);
        assert_eq!(p.labels(), vec!["Response A", "Response B", "Response C", "Response D"]);
    }

    #[test]
    fn permutation_is_deterministic_per_key_and_varies_across_keys() {
        let build = |evaluator: &str, seed: u64| {
            JudgingPresentation::build(
                Regime::ShuffleBlind,
                &ModelId::from(evaluator),
                &qid(),
                &answers(8),
                seed,
            )
            .responses
            .iter()
            .map(|r| r.evaluatee_id.to_string())
            .collect::<Vec<_>>()
        };
        assert_eq!(build("judge_a", 42), build("judge_a", 42));
        // Different evaluators, questions, or seeds give different layouts
        // (8! orderings make collisions vanishingly unlikely; check a few).
        let base = build("judge_a", 42);
        let distinct = [build("judge_b", 42), build("judge_a", 43)];
        assert!(distinct.iter().any(|d| d != &base));
    }

    #[test]
    fn shuffle_only_and_shuffle_blind_permute_independently() {
        let blind = JudgingPresentation::build(
            Regime::ShuffleBlind,
            &ModelId::from("j"),
            &qid(),
            &answers(8),
            7,
        );
        let visible = JudgingPresentation::build(
            Regime::ShuffleOnly,
            &ModelId::from("j"),
            &qid(),
            &answers(8),
            7,
        );
        let blind_order: Vec<String> =
            blind.responses.iter().map(|r| r.evaluatee_id.to_string()).collect();
        let visible_order: Vec<String> =
            visible.responses.iter().map(|r| r.evaluatee_id.to_string()).collect();
        assert_ne!(blind_order, visible_order);
    }

    #[test]
    fn responses_block_round_trips_through_the_judge_prompt() {
        let p = JudgingPresentation::build(
            Regime::ShuffleBlind,
            &ModelId::from("judge"),
            &qid(),
            &answers(3),
            9,
        );
        let prompt = crate::pipeline::prompts::judge_prompt(
            "What color is the sky?",
            &p.responses_block(),
            p.label_example(),
        );
        let pairs = parse_responses_block(&prompt).unwrap();
        assert_eq!(pairs.len(), 3);
        for (pair, shown) in pairs.iter().zip(&p.responses) {
            assert_eq!(pair.0, shown.label);
            assert_eq!(pair.1, shown.text);
        }
    }

    #[test]
    fn responses_block_format_and_example_label() {
        let p = JudgingPresentation::build(
            Regime::BlindOnly,
            &ModelId::from("judge"),
            &qid(),
            &answers(2),
            1,
        );
        assert_eq!(
            p.responses_block(),
            "Response A:\nanswer text 0\n\nResponse B:\nanswer text 1"
        );
        assert_eq!(p.label_example(), "Response A");
        assert_eq!(
            p.response_for_label("Response B").unwrap().evaluatee_id,
            ModelId::from("model_1")
        );
        assert!(p.response_for_label("Response C").is_none());
    }
}
