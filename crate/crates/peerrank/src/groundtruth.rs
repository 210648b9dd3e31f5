//! Ground-truth validation: external benchmark items, deterministic answer
//! extraction and grading, accuracy-vs-peer-score correlation, the
//! peer-vs-self ablation, and reasoning-mode classification.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::stats::{self, StatsError, TestResult};
use crate::tensor::ScoreTensor;
use crate::types::{Answer, Category, ModelId, QuestionId, ValidationError};

/// How a benchmark item is keyed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    MultipleChoice,
    NumericExact,
}

/// One externally keyed evaluation item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub question_id: QuestionId,
    pub kind: BenchmarkKind,
    /// Category the item is filed under when judged alongside endogenous
    /// questions (benchmarks map onto the closest canonical category).
    pub category: Category,
    pub text: String,
    /// Answer options for multiple choice, empty for numeric items.
    pub choices: Vec<String>,
    /// The reference answer: a choice letter (`A`, `B`, ...) or the exact
    /// numeric answer.
    pub key: String,
}

impl BenchmarkItem {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.question_id.0.is_empty() {
            return Err(ValidationError::new("question_id", "must be non-empty", ""));
        }
        if self.text.trim().is_empty() {
            return Err(ValidationError::new("text", "must be non-empty", ""));
        }
        if self.key.trim().is_empty() {
            return Err(ValidationError::new("key", "must be non-empty", ""));
        }
        match self.kind {
            BenchmarkKind::MultipleChoice => {
                if self.choices.len() < 2 {
                    return Err(ValidationError::new(
                        "choices",
                        "multiple choice needs at least two options",
                        self.choices.len(),
                    ));
                }
                let key = self.key.trim();
                let valid = key.len() == 1
                    && key
                        .chars()
                        .next()
                        .map(|c| {
                            let upper = c.to_ascii_uppercase();
                            upper.is_ascii_uppercase()
                                && ((upper as u8 - b'A') as usize) < self.choices.len()
                        })
                        .unwrap_or(false);
                if !valid {
                    return Err(ValidationError::new(
                        "key",
                        "must be a choice letter within range",
                        &self.key,
                    ));
                }
            }
            BenchmarkKind::NumericExact => {
                if canonical_number(&self.key).is_none() {
                    return Err(ValidationError::new(
                        "key",
                        "must be a parseable number",
                        &self.key,
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchmarkError {
    #[error("malformed benchmark line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// Closed-world prompt for answering one benchmark item: a single choice
/// letter (or final number) plus a short justification, judged later like
/// any other answer. Benchmark answering never uses retrieval.
pub fn benchmark_prompt(item: &BenchmarkItem) -> String {
    match item.kind {
        BenchmarkKind::MultipleChoice => {
            let mut choices = String::new();
            for (i, choice) in item.choices.iter().enumerate() {
                choices.push_str(&format!("{}. {}\n", crate::util::letter_label(i), choice));
            }
            format!(
                "Answer this multiple-choice question. Reply with a single choice letter followed by a 2-3 sentence justification.\n\n{}\n\nChoices:\n{}",
                item.text, choices
            )
        }
        BenchmarkKind::NumericExact => format!(
            "Solve this problem. Give a brief justification (2-3 sentences) and end your reply with the final numeric answer.\n\n{}",
            item.text
        ),
    }
}

// ── extraction ───────────────────────────────────────────────────────────

/// First standalone choice-letter token in a reply, restricted to the
/// item's valid letter range. Tokens are whitespace-delimited with
/// punctuation wrappers stripped, so `B.`, `(a)`, and `C:` all count.
pub fn extract_choice_letter(reply: &str, n_choices: usize) -> Option<char> {
    for token in reply.split_whitespace() {
        let stripped: &str = token
            .trim_matches(|c: char| !c.is_ascii_alphanumeric());
        let mut chars = stripped.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            let upper = c.to_ascii_uppercase();
            if upper.is_ascii_uppercase() && ((upper as u8 - b'A') as usize) < n_choices {
                return Some(upper);
            }
        }
    }
    None
}

/// Final number in a reply, in canonical decimal form: commas stripped,
/// units and trailing sentence punctuation ignored, trailing fractional
/// zeros trimmed (`72.0` reads as `72`).
pub fn extract_final_number(reply: &str) -> Option<String> {
    let bytes: Vec<char> = reply.chars().collect();
    let mut last: Option<String> = None;
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i];
        let starts_number = c.is_ascii_digit()
            || (c == '-'
                && i + 1 < bytes.len()
                && bytes[i + 1].is_ascii_digit()
                && (i == 0 || !bytes[i - 1].is_ascii_alphanumeric()));
        if !starts_number {
            i += 1;
            continue;
        }
        let mut raw = String::new();
        if c == '-' {
            raw.push('-');
            i += 1;
        }
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == ',') {
            raw.push(bytes[i]);
            i += 1;
        }
        // A decimal point counts only when digits follow (so a sentence
        // period is never swallowed).
        if i + 1 < bytes.len() && bytes[i] == '.' && bytes[i + 1].is_ascii_digit() {
            raw.push('.');
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                raw.push(bytes[i]);
                i += 1;
            }
        }
        if let Some(canon) = canonical_number(&raw) {
            last = Some(canon);
        }
    }
    last
}

/// Canonical decimal form of a number string: sign, no commas, no leading
/// zeros, no trailing fractional zeros, `-0` collapsed to `0`. Comparison
/// of canonical forms is exact (no epsilon).
pub fn canonical_number(s: &str) -> Option<String> {
    let cleaned: String = s.trim().replace(',', "");
    let cleaned = cleaned.trim_end_matches('.');
    let (negative, digits) = match cleaned.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, cleaned),
    };
    if digits.is_empty() {
        return None;
    }
    let mut parts = digits.splitn(2, '.');
    let int_part = parts.next().unwrap_or("");
    let frac_part = parts.next().unwrap_or("");
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
        || (int_part.is_empty() && frac_part.is_empty())
    {
        return None;
    }
    let int_trimmed = int_part.trim_start_matches('0');
    let int_norm = if int_trimmed.is_empty() { "0" } else { int_trimmed };
    let frac_trimmed = frac_part.trim_end_matches('0');
    let mut out = String::new();
    let is_zero = int_norm == "0" && frac_trimmed.is_empty();
    if negative && !is_zero {
        out.push('-');
    }
    out.push_str(int_norm);
    if !frac_trimmed.is_empty() {
        out.push('.');
        out.push_str(frac_trimmed);
    }
    Some(out)
}

/// Outcome of grading one reply against one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graded {
    /// The extracted prediction (canonical letter or number), when any.
    pub predicted: Option<String>,
    pub correct: bool,
}

/// Grades a raw reply: letter match is case-insensitive; numeric match
/// compares canonical decimal forms exactly. An unextractable reply grades
/// incorrect, never errors.
pub fn grade(item: &BenchmarkItem, reply: &str) -> Graded {
    match item.kind {
        BenchmarkKind::MultipleChoice => {
            let predicted = extract_choice_letter(reply, item.choices.len());
            let key = item.key.trim().to_ascii_uppercase();
            let correct = predicted
                .map(|p| p.to_string() == key)
                .unwrap_or(false);
            Graded {
                predicted: predicted.map(|p| p.to_string()),
                correct,
            }
        }
        BenchmarkKind::NumericExact => {
            let predicted = extract_final_number(reply);
            let key = canonical_number(&item.key);
            let correct = match (&predicted, &key) {
                (Some(p), Some(k)) => p == k,
                _ => false,
            };
            Graded {
                predicted,
                correct,
            }
        }
    }
}

// ── loaders ──────────────────────────────────────────────────────────────

/// Parses the canonical benchmark JSONL format (one `BenchmarkItem` per
/// line).
pub fn load_items(text: &str) -> Result<Vec<BenchmarkItem>, BenchmarkError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: BenchmarkItem =
            serde_json::from_str(line).map_err(|e| BenchmarkError::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        item.validate()?;
        out.push(item);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct TruthfulQaRow {
    question: String,
    mc1_targets: TruthfulQaTargets,
}

#[derive(Deserialize)]
struct TruthfulQaTargets {
    choices: Vec<String>,
    labels: Vec<u8>,
}

/// Adapts TruthfulQA-style MC1 JSONL (`question` + `mc1_targets.choices` /
/// `labels` with exactly one 1) into benchmark items filed under factual
/// knowledge.
pub fn adapt_truthfulqa(text: &str) -> Result<Vec<BenchmarkItem>, BenchmarkError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: TruthfulQaRow =
            serde_json::from_str(line).map_err(|e| BenchmarkError::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        if row.mc1_targets.choices.len() != row.mc1_targets.labels.len() {
            return Err(BenchmarkError::MalformedLine {
                line: i + 1,
                message: "choices and labels differ in length".into(),
            });
        }
        let correct: Vec<usize> = row
            .mc1_targets
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 1)
            .map(|(j, _)| j)
            .collect();
        let [key_index] = correct.as_slice() else {
            return Err(BenchmarkError::MalformedLine {
                line: i + 1,
                message: format!("expected exactly one correct label, got {}", correct.len()),
            });
        };
        let item = BenchmarkItem {
            question_id: QuestionId::benchmark(&format!("tfq_{:04}", i)),
            kind: BenchmarkKind::MultipleChoice,
            category: Category::FactualKnowledge,
            text: row.question,
            key: crate::util::letter_label(*key_index),
            choices: row.mc1_targets.choices,
        };
        item.validate()?;
        out.push(item);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct Gsm8kRow {
    question: String,
    answer: String,
}

/// Adapts GSM8K-style JSONL (`question` + rationale `answer` ending in
/// `#### <number>`) into numeric items filed under reasoning / logic.
pub fn adapt_gsm8k(text: &str) -> Result<Vec<BenchmarkItem>, BenchmarkError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Gsm8kRow =
            serde_json::from_str(line).map_err(|e| BenchmarkError::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        let Some((_, tail)) = row.answer.rsplit_once("####") else {
            return Err(BenchmarkError::MalformedLine {
                line: i + 1,
                message: "answer lacks a '####' final-answer marker".into(),
            });
        };
        let Some(key) = canonical_number(tail) else {
            return Err(BenchmarkError::MalformedLine {
                line: i + 1,
                message: format!("unparseable final answer {tail:?}"),
            });
        };
        let item = BenchmarkItem {
            question_id: QuestionId::benchmark(&format!("gsm_{:04}", i)),
            kind: BenchmarkKind::NumericExact,
            category: Category::ReasoningLogic,
            text: row.question,
            choices: vec![],
            key,
        };
        item.validate()?;
        out.push(item);
    }
    Ok(out)
}

// ── reasoning mode ───────────────────────────────────────────────────────

/// Output-channel classification from benchmark output statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningMode {
    /// Visible text much shorter than metered tokens: the model spends
    /// tokens on hidden deliberation (chars per token < 1.0, strictly).
    ExtendedDeliberation,
    Standard,
}

/// Per-model output statistics and the derived mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningSummary {
    pub avg_tokens: f64,
    pub avg_chars: f64,
    pub chars_per_token: f64,
    pub mode: ReasoningMode,
}

/// Classifies a model's output channel from average completion tokens and
/// average visible characters. The boundary is strict: a ratio of exactly
/// 1.0 is standard.
pub fn reasoning_mode(avg_tokens: f64, avg_chars: f64) -> Option<ReasoningSummary> {
    if !(avg_tokens.is_finite() && avg_chars.is_finite()) || avg_tokens <= 0.0 || avg_chars < 0.0 {
        return None;
    }
    let ratio = avg_chars / avg_tokens;
    let mode = if ratio < 1.0 {
        ReasoningMode::ExtendedDeliberation
    } else {
        ReasoningMode::Standard
    };
    Some(ReasoningSummary {
        avg_tokens,
        avg_chars,
        chars_per_token: ratio,
        mode,
    })
}

// ── validation report ────────────────────────────────────────────────────

/// A correlation that may be undefined on degenerate input (zero variance,
/// too few models); the degenerate case carries its reason instead of a 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CorrelationOutcome {
    Defined {
        r: f64,
        p_value: f64,
        n: usize,
    },
    Degenerate {
        reason: String,
    },
}

impl CorrelationOutcome {
    fn from_result(res: Result<TestResult, StatsError>) -> Self {
        match res {
            Ok(t) => CorrelationOutcome::Defined {
                r: t.statistic,
                p_value: t.p_value,
                n: t.n,
            },
            Err(e) => CorrelationOutcome::Degenerate {
                reason: e.to_string(),
            },
        }
    }

    pub fn r(&self) -> Option<f64> {
        match self {
            CorrelationOutcome::Defined { r, .. } => Some(*r),
            CorrelationOutcome::Degenerate { .. } => None,
        }
    }
}

/// One model's row in the validation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthModelRow {
    pub model_id: ModelId,
    /// Items with an answer on record; extraction failures still count as
    /// attempts (and grade incorrect).
    pub attempted: usize,
    pub correct: usize,
    pub unextractable: usize,
    /// correct / attempted; absent for a model with no answers.
    pub accuracy: Option<f64>,
    /// Exactly 10 * accuracy on the benchmark's own scale.
    pub truth_score: Option<f64>,
    /// Mean peer score this model's benchmark answers received (non-self).
    pub peer_score: Option<f64>,
    /// Mean score the model gave its own benchmark answers.
    pub self_mean: Option<f64>,
    pub avg_completion_tokens: Option<f64>,
    pub avg_chars: Option<f64>,
    pub reasoning: Option<ReasoningSummary>,
}

/// Peer-vs-self ablation: how well peers predict accuracy versus how well
/// self-assigned scores do.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub peer_r: CorrelationOutcome,
    pub peer_rho: CorrelationOutcome,
    pub self_r: CorrelationOutcome,
}

/// The full ground-truth validation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthReport {
    pub rows: Vec<TruthModelRow>,
    /// Peer score vs accuracy across models (the headline validation
    /// correlation).
    pub peer_vs_accuracy: CorrelationOutcome,
    pub peer_vs_accuracy_rank: CorrelationOutcome,
    pub ablation: AblationReport,
}

/// Grades every answered item, aggregates per-model accuracy and truth
/// scores, joins peer/self scores from the benchmark judging tensor, and
/// correlates. Models in the tensor axis but with no answers contribute
/// empty rows and drop out of the correlations.
pub fn truth_validation(
    items: &[BenchmarkItem],
    answers: &[Answer],
    tensor: &ScoreTensor,
) -> TruthReport {
    let item_by_id: BTreeMap<&QuestionId, &BenchmarkItem> =
        items.iter().map(|i| (&i.question_id, i)).collect();

    let mut rows = Vec::new();
    for (j, model) in tensor.models().iter().enumerate() {
        let mut attempted = 0usize;
        let mut correct = 0usize;
        let mut unextractable = 0usize;
        let mut token_sum = 0.0;
        let mut token_n = 0usize;
        let mut char_sum = 0.0;
        let mut char_n = 0usize;
        for ans in answers.iter().filter(|a| &a.respondent_id == model) {
            let Some(item) = item_by_id.get(&ans.question_id) else {
                continue;
            };
            attempted += 1;
            let graded = grade(item, &ans.text);
            if graded.correct {
                correct += 1;
            }
            if graded.predicted.is_none() {
                unextractable += 1;
            }
            if let Some(t) = ans.completion_tokens {
                token_sum += t as f64;
                token_n += 1;
            }
            char_sum += ans.char_count as f64;
            char_n += 1;
        }
        let accuracy = (attempted > 0).then(|| correct as f64 / attempted as f64);
        let truth_score = accuracy.map(|a| 10.0 * a);
        let peers = tensor.peer_scores_received(j);
        let peer_score = (!peers.is_empty())
            .then(|| peers.iter().map(|&s| s as f64).sum::<f64>() / peers.len() as f64);
        let selfs = tensor.self_scores(j);
        let self_mean = (!selfs.is_empty())
            .then(|| selfs.iter().map(|&s| s as f64).sum::<f64>() / selfs.len() as f64);
        let avg_completion_tokens = (token_n > 0).then(|| token_sum / token_n as f64);
        let avg_chars = (char_n > 0).then(|| char_sum / char_n as f64);
        let reasoning = match (avg_completion_tokens, avg_chars) {
            (Some(t), Some(c)) => reasoning_mode(t, c),
            _ => None,
        };
        rows.push(TruthModelRow {
            model_id: model.clone(),
            attempted,
            correct,
            unextractable,
            accuracy,
            truth_score,
            peer_score,
            self_mean,
            avg_completion_tokens,
            avg_chars,
            reasoning,
        });
    }

    let complete: Vec<&TruthModelRow> = rows
        .iter()
        .filter(|r| r.accuracy.is_some() && r.peer_score.is_some())
        .collect();
    let acc: Vec<f64> = complete.iter().map(|r| r.accuracy.unwrap()).collect();
    let peer: Vec<f64> = complete.iter().map(|r| r.peer_score.unwrap()).collect();
    let peer_vs_accuracy = CorrelationOutcome::from_result(stats::pearson(&peer, &acc));
    let peer_vs_accuracy_rank = CorrelationOutcome::from_result(stats::spearman(&peer, &acc));

    let with_self: Vec<&TruthModelRow> = rows
        .iter()
        .filter(|r| r.accuracy.is_some() && r.self_mean.is_some())
        .collect();
    let self_acc: Vec<f64> = with_self.iter().map(|r| r.accuracy.unwrap()).collect();
    let self_scores: Vec<f64> = with_self.iter().map(|r| r.self_mean.unwrap()).collect();
    let self_r = CorrelationOutcome::from_result(stats::pearson(&self_scores, &self_acc));

    TruthReport {
        ablation: AblationReport {
            peer_r: peer_vs_accuracy.clone(),
            peer_rho: peer_vs_accuracy_rank.clone(),
            self_r,
        },
        rows,
        peer_vs_accuracy,
        peer_vs_accuracy_rank,
    }
}
