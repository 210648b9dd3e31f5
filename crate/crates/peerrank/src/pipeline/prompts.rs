//! Prompt templates. The wording here is part of the protocol: judging
//! behavior, bias measurements, and parse rates all depend on it, so the
//! templates are pinned and substitution is single-pass (substituted
//! content is never rescanned for placeholders).

use crate::providers::RetrievalResult;
use crate::types::Category;

/// Questions each generator is asked for in the reference configuration.
pub const NUM_QUESTIONS: usize = 35;

/// Word budget given to respondents.
pub const MAX_ANSWER_WORDS: usize = 200;

/// Snippets handed to a respondent for grounded categories.
pub const DEFAULT_RETRIEVAL_RESULTS: usize = 5;

const GENERATION_TEMPLATE: &str = r#"Generate exactly {NUM_QUESTIONS} diverse questions for testing AI capabilities.

Use ONLY these exact category values: {category_list}

Return as JSON object:
{"questions": [{"category": "factual knowledge", "question": "Your question"}]}"#;

const ANSWER_TEMPLATE: &str = r#"Answer this question directly and concisely in {MAX_ANSWER_WORDS} words or less.
Do not start with "Based on..." or similar preambles.

{question}"#;

const JUDGE_TEMPLATE: &str = r#"You are grading responses for a benchmark. Score EACH response independently.

DO NOT try to identify authorship. Ignore writing style and focus on quality.

Scoring rubric (overall 1-10 integer):
- 10: Correct + complete + well-justified; directly answers; no hallucinations.
- 7-9: Mostly correct; minor omissions/imprecision; reasoning mostly sound.
- 4-6: Mixed/partial correctness, unclear reasoning, or misses key constraints.
- 1-3: Mostly incorrect, misleading, evasive, or hallucinated/unsupported.

Priority rules:
- Prioritize correctness/faithfulness over eloquence.
- Penalize confident-sounding unsupported specifics (made-up numbers, names, dates, citations).
- Citations [1][2], source mentions, or "I searched..." phrasing are NEUTRAL - do not reward or penalize.
- If the question is subjective/creative: score instruction-following, coherence, and usefulness; do not mark "incorrect" unless it violates constraints or is nonsensical.

Calibration / score discipline:
- Use the full range when justified; avoid clustering 7-8.
- If there are 3+ responses and quality differs, use at least 3 distinct scores.

Question:
{question}

Responses:
{responses}

Output format (STRICT):
- Return ONLY a single JSON object (no markdown, no extra text).
- You MUST include an entry for EVERY label present in Responses, exactly once.
- Each entry MUST contain keys: "score", "reason", "flags" (no other keys).
- "score" MUST be an integer 1--10.
- "reason" MUST be 8--20 words and cite a specific strength or flaw.
- "flags" MUST be an array using only:
  "hallucination", "unsupported_specifics", "evasive", "incorrect",
  "good_uncertainty", "clear_correct"
  Use [] if none apply.

Example:
{"{label_example}": {"score": 8, "reason": "Correct core claim, minor omission on edge case; clear and grounded.", "flags": ["clear_correct"]}}"#;

/// Substitutes `{name}` placeholders in one left-to-right pass. Text that
/// enters via a substitution is emitted verbatim, so values containing
/// placeholder-shaped substrings cannot trigger further substitution.
/// Unknown `{...}` spans (JSON braces in the templates) pass through.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'outer: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        if let Some(close) = after.find('}') {
            let name = &after[..close];
            for (key, value) in values {
                if *key == name {
                    out.push_str(value);
                    rest = &after[close + 1..];
                    continue 'outer;
                }
            }
        }
        out.push('{');
        rest = after;
    }
    out.push_str(rest);
    out
}

/// The question-generation prompt for a generator asked for `n` questions.
pub fn generation_prompt(n: usize) -> String {
    fill(
        GENERATION_TEMPLATE,
        &[
            ("NUM_QUESTIONS", &n.to_string()),
            ("category_list", &Category::prompt_list()),
        ],
    )
}

/// The answering prompt for one question.
pub fn answer_prompt(question: &str) -> String {
    fill(
        ANSWER_TEMPLATE,
        &[
            ("MAX_ANSWER_WORDS", &MAX_ANSWER_WORDS.to_string()),
            ("question", question),
        ],
    )
}

/// Hidden system context carrying retrieval snippets to a respondent.
/// Only grounded categories ever get this; the judge never sees it.
pub fn grounding_context(hits: &[RetrievalResult]) -> String {
    let mut out = String::from(
        "Use the following recent web snippets as background context when answering. \
         Prefer them over memory for time-sensitive facts. Do not mention this context.\n",
    );
    for (i, hit) in hits.iter().enumerate() {
        out.push_str(&format!("\n[{}] {} ({})\n{}\n", i + 1, hit.title, hit.url, hit.snippet));
    }
    out
}

/// The judging prompt over a prepared responses block. `label_example`
/// must be the first presented label so the example matches what the
/// judge actually sees.
pub fn judge_prompt(question: &str, responses_block: &str, label_example: &str) -> String {
    fill(
        JUDGE_TEMPLATE,
        &[
            ("question", question),
            ("responses", responses_block),
            ("label_example", label_example),
        ],
    )
}

/// The corrective re-ask sent after an invalid structured reply (judge
/// verdicts or generated question lists): the original prompt plus the
/// exact problems, asking for corrected JSON only.
pub fn corrective_reask(original_prompt: &str, violations: &str) -> String {
    format!(
        "{original_prompt}\n\nYour previous reply was invalid:\n{violations}\n\nReturn ONLY the corrected JSON object."
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_prompt_pins_count_and_categories() {
        let p = generation_prompt(35);
        assert!(p.starts_with("Generate exactly 35 diverse questions"));
        assert!(p.contains(
            "factual knowledge; reasoning / logic; current events; creative / open-ended; practical how-to"
        ));
        assert!(p.contains(r#"{"questions": [{"category": "factual knowledge", "question": "Your question"}]}"#));
    }

    #[test]
    fn answer_prompt_pins_word_budget() {
        let p = answer_prompt("What is the capital of France?");
        assert!(p.contains("200 words or less"));
        assert!(p.contains("Do not start with \"Based on...\""));
        assert!(p.ends_with("What is the capital of France?"));
    }

    #[test]
    fn judge_prompt_substitutes_all_three_slots() {
        let p = judge_prompt("Q text?", "Response A:\nfoo\n\nResponse B:\nbar", "Response A");
        assert!(p.contains("Question:\nQ text?"));
        assert!(p.contains("Responses:\nResponse A:\nfoo\n\nResponse B:\nbar"));
        assert!(p.contains(r#"{"Response A": {"score": 8"#));
        assert!(p.contains("DO NOT try to identify authorship."));
        assert!(p.contains("\"reason\" MUST be 8--20 words"));
        assert!(p.contains("\"hallucination\", \"unsupported_specifics\", \"evasive\", \"incorrect\","));
    }

    #[test]
    fn substitution_is_single_pass() {
        // A question containing a placeholder-shaped token must not pull
        // in the responses block.
        let p = judge_prompt("evil {responses} token", "BLOCK", "L");
        assert!(p.contains("Question:\nevil {responses} token"));
        assert_eq!(p.matches("BLOCK").count(), 1);
    }

    #[test]
    fn grounding_context_numbers_snippets() {
        let hits = vec![
            RetrievalResult { title: "T1".into(), url: "https://one.example".into(), snippet: "S1".into() },
            RetrievalResult { title: "T2".into(), url: "https://two.example".into(), snippet: "S2".into() },
        ];
        let ctx = grounding_context(&hits);
        assert!(ctx.contains("[1] T1 (https://one.example)\nS1"));
        assert!(ctx.contains("[2] T2 (https://two.example)\nS2"));
        assert!(ctx.contains("Do not mention this context."));
    }

    #[test]
    fn corrective_prompt_carries_violations() {
        let p = corrective_reask("ORIGINAL", "- label B: score out of range");
        assert!(p.starts_with("ORIGINAL\n\n"));
        assert!(p.contains("- label B: score out of range"));
        assert!(p.ends_with("Return ONLY the corrected JSON object."));
    }
}
