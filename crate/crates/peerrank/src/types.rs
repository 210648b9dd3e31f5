//! Domain types: cohort members, questions, answers, judging regimes,
//! evaluation records, and the run manifest.
//!
//! Every record type serializes to a single stable JSON shape (all fields
//! always present, field order fixed by declaration order) so that transcript
//! lines round-trip byte-identically.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Inclusive score range emitted by judges.
pub const SCORE_MIN: u8 = 1;
/// Inclusive score range emitted by judges.
pub const SCORE_MAX: u8 = 10;

/// A field-level constraint violation on a record or manifest.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid {field}: {constraint} (got {got})")]
pub struct ValidationError {
    /// Name of the offending field.
    pub field: &'static str,
    /// Human-readable statement of the violated constraint.
    pub constraint: &'static str,
    /// The offending value, rendered for the error message.
    pub got: String,
}

impl ValidationError {
    pub fn new(field: &'static str, constraint: &'static str, got: impl fmt::Display) -> Self {
        Self {
            field,
            constraint,
            got: got.to_string(),
        }
    }
}

/// Stable identifier of a cohort member (lowercase snake_case by convention).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelId(pub String);

impl ModelId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModelId({})", self.0)
    }
}

impl From<&str> for ModelId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl From<String> for ModelId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Stable identifier of a question in a run's corpus.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionId(pub String);

impl QuestionId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    /// Canonical id for the `index`-th question authored by `author`
    /// during the generation phase.
    pub fn endogenous(author: &ModelId, index: usize) -> Self {
        Self(format!("q_{}_{:04}", author.0, index))
    }

    /// Canonical id for an external benchmark item.
    pub fn benchmark(source_id: &str) -> Self {
        Self(format!("bench_{source_id}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QuestionId({})", self.0)
    }
}

impl From<&str> for QuestionId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl From<String> for QuestionId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Pipeline roles a cohort member can hold. Every member holds all three
/// unless the manifest narrows them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Generator,
    Respondent,
    Judge,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Generator, Role::Respondent, Role::Judge];
}

/// One member of the evaluated cohort.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model_id: ModelId,
    /// Provider this model is served by (e.g. `openai`, `sim`). Also selects
    /// the `PEERRANK_<PROVIDER>_API_KEY` environment variable for live runs.
    pub provider_id: String,
    /// Name shown to judges when identities are visible. Must be unique
    /// within a cohort because it doubles as the presentation label.
    pub display_name: String,
    #[serde(default = "ModelSpec::default_roles")]
    pub roles: BTreeSet<Role>,
}

impl ModelSpec {
    pub fn new(
        model_id: impl Into<String>,
        provider_id: impl Into<String>,
        display_name: impl Into<String>,
    ) -> Self {
        Self {
            model_id: ModelId::new(model_id),
            provider_id: provider_id.into(),
            display_name: display_name.into(),
            roles: Self::default_roles(),
        }
    }

    fn default_roles() -> BTreeSet<Role> {
        Role::ALL.into_iter().collect()
    }

    pub fn has_role(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }
}

/// The fixed five-way question taxonomy. Only the `CurrentEvents` slice is
/// ever answered with retrieval grounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "factual knowledge")]
    FactualKnowledge,
    #[serde(rename = "reasoning / logic")]
    ReasoningLogic,
    #[serde(rename = "current events")]
    CurrentEvents,
    #[serde(rename = "creative / open-ended")]
    CreativeOpenEnded,
    #[serde(rename = "practical how-to")]
    PracticalHowTo,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::FactualKnowledge,
        Category::ReasoningLogic,
        Category::CurrentEvents,
        Category::CreativeOpenEnded,
        Category::PracticalHowTo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::FactualKnowledge => "factual knowledge",
            Category::ReasoningLogic => "reasoning / logic",
            Category::CurrentEvents => "current events",
            Category::CreativeOpenEnded => "creative / open-ended",
            Category::PracticalHowTo => "practical how-to",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == s.trim())
    }

    /// The canonical semicolon-separated list used in generation prompts.
    pub fn prompt_list() -> String {
        Category::ALL
            .map(Category::as_str)
            .join("; ")
    }

    /// True when answering questions of this category uses web retrieval.
    pub fn grounded(self) -> bool {
        matches!(self, Category::CurrentEvents)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a question came from: generated by the cohort itself, or imported
/// from an external ground-truth benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Endogenous,
    ExternalBenchmark,
}

/// Judging presentation regime. Only these three combinations exist:
/// shuffling randomizes answer order, blinding replaces author names with
/// neutral labels. `ShuffleBlind` is the ranking baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    ShuffleOnly,
    BlindOnly,
    ShuffleBlind,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::ShuffleOnly, Regime::BlindOnly, Regime::ShuffleBlind];

    /// The regime whose peer scores are the headline ranking baseline.
    pub const BASELINE: Regime = Regime::ShuffleBlind;

    /// Whether answer display order is randomized per (evaluator, question).
    pub fn shuffle(self) -> bool {
        matches!(self, Regime::ShuffleOnly | Regime::ShuffleBlind)
    }

    /// Whether author identities are hidden behind neutral labels.
    pub fn blind(self) -> bool {
        matches!(self, Regime::BlindOnly | Regime::ShuffleBlind)
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::ShuffleOnly => "shuffle_only",
            Regime::BlindOnly => "blind_only",
            Regime::ShuffleBlind => "shuffle_blind",
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        Regime::ALL.into_iter().find(|r| r.name() == s.trim())
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One question in a run's corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: QuestionId,
    pub author_id: ModelId,
    pub category: Category,
    pub text: String,
    pub origin: Origin,
}

impl Question {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.question_id.0.is_empty() {
            return Err(ValidationError::new("question_id", "must be non-empty", ""));
        }
        if self.author_id.0.is_empty() {
            return Err(ValidationError::new("author_id", "must be non-empty", ""));
        }
        if self.text.trim().is_empty() {
            return Err(ValidationError::new("text", "must be non-empty", &self.text));
        }
        Ok(())
    }
}

/// One model's answer to one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub question_id: QuestionId,
    pub respondent_id: ModelId,
    pub text: String,
    /// Wall-clock latency of the producing chat call (simulated latency for
    /// simulated providers). Recorded for reporting; never feeds any score.
    pub latency_ms: u64,
    /// True when retrieval snippets were injected as hidden context.
    pub grounding_used: bool,
    /// Snippet texts injected for grounded answers, in retrieval order.
    pub grounding_snippets: Vec<String>,
    /// Present when grounding was requested but the retrieval provider
    /// failed and answering proceeded ungrounded.
    pub grounding_note: Option<String>,
    /// Completion token count as reported by the provider, when available.
    pub completion_tokens: Option<u64>,
    /// Character count of `text`.
    pub char_count: u64,
}

impl Answer {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.question_id.0.is_empty() {
            return Err(ValidationError::new("question_id", "must be non-empty", ""));
        }
        if self.respondent_id.0.is_empty() {
            return Err(ValidationError::new("respondent_id", "must be non-empty", ""));
        }
        if self.char_count != self.text.chars().count() as u64 {
            return Err(ValidationError::new(
                "char_count",
                "must equal the character count of text",
                self.char_count,
            ));
        }
        if !self.grounding_used && !self.grounding_snippets.is_empty() {
            return Err(ValidationError::new(
                "grounding_snippets",
                "must be empty when grounding_used is false",
                self.grounding_snippets.len(),
            ));
        }
        Ok(())
    }
}

/// Fixed vocabulary of judge annotation flags. Unknown flags emitted by a
/// judge are dropped (with a warning) at parse time, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Hallucination,
    UnsupportedSpecifics,
    Evasive,
    Incorrect,
    GoodUncertainty,
    ClearCorrect,
}

impl Flag {
    pub const ALL: [Flag; 6] = [
        Flag::Hallucination,
        Flag::UnsupportedSpecifics,
        Flag::Evasive,
        Flag::Incorrect,
        Flag::GoodUncertainty,
        Flag::ClearCorrect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Hallucination => "hallucination",
            Flag::UnsupportedSpecifics => "unsupported_specifics",
            Flag::Evasive => "evasive",
            Flag::Incorrect => "incorrect",
            Flag::GoodUncertainty => "good_uncertainty",
            Flag::ClearCorrect => "clear_correct",
        }
    }

    pub fn parse(s: &str) -> Option<Flag> {
        Flag::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

/// One judge's verdict on one answer under one regime: a cell of the score
/// tensor plus its presentation context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub regime: Regime,
    pub evaluator_id: ModelId,
    pub evaluatee_id: ModelId,
    pub question_id: QuestionId,
    /// Integer score in `SCORE_MIN..=SCORE_MAX`. Self-evaluations
    /// (`evaluator_id == evaluatee_id`) are legal and retained.
    pub score: u8,
    pub reason: String,
    pub flags: Vec<Flag>,
    /// 1-based position the answer occupied in the judge's prompt.
    pub displayed_position: usize,
    /// The label the answer was shown under (`Response A` style when blind,
    /// the display name otherwise).
    pub displayed_label: String,
}

impl EvaluationRecord {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if !(SCORE_MIN..=SCORE_MAX).contains(&self.score) {
            return Err(ValidationError::new(
                "score",
                "must be an integer in 1..=10",
                self.score,
            ));
        }
        if self.displayed_position == 0 {
            return Err(ValidationError::new(
                "displayed_position",
                "must be 1-based (>= 1)",
                self.displayed_position,
            ));
        }
        if self.displayed_label.is_empty() {
            return Err(ValidationError::new(
                "displayed_label",
                "must be non-empty",
                "",
            ));
        }
        let mut seen = BTreeSet::new();
        for flag in &self.flags {
            if !seen.insert(*flag) {
                return Err(ValidationError::new(
                    "flags",
                    "must not contain duplicates",
                    flag.as_str(),
                ));
            }
        }
        Ok(())
    }
}

/// Completion status of one pipeline phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseStatus {
    Complete,
    Partial,
}

/// Book-keeping for one executed phase, stored in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub status: PhaseStatus,
    pub tasks_total: usize,
    /// Tasks that produced their records in this or an earlier invocation.
    pub succeeded: usize,
    /// Tasks that exhausted retries and left holes in the tensor.
    pub gaps: usize,
    pub wall_clock_ms: u64,
}

/// Identity and configuration of one run: the single source of truth for
/// cohort membership, corpus size, regimes, and grounding provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    /// Master seed; every stochastic choice in the run derives from it.
    pub seed: u64,
    pub cohort: Vec<ModelSpec>,
    pub categories: Vec<Category>,
    /// Total corpus size N. Generation distributes authorship round-robin:
    /// the first `N mod K` cohort members write one extra question.
    pub questions_total: usize,
    pub regimes: Vec<Regime>,
    /// Retrieval provider id for the grounded category (e.g. `sim`, `tavily`).
    pub grounding_provider: String,
    /// Per-phase completion markers keyed by phase name
    /// (`generate`, `answer`, `judge:<regime>`, `benchmark_answer`, ...).
    #[serde(default)]
    pub phase_state: std::collections::BTreeMap<String, PhaseRecord>,
}

impl RunManifest {
    /// Number of cohort members K.
    pub fn k(&self) -> usize {
        self.cohort.len()
    }

    /// Number of questions the `author_index`-th cohort member writes.
    pub fn questions_for_author(&self, author_index: usize) -> usize {
        let k = self.k();
        let base = self.questions_total / k;
        let extra = usize::from(author_index < self.questions_total % k);
        base + extra
    }

    pub fn model_ids(&self) -> Vec<ModelId> {
        self.cohort.iter().map(|m| m.model_id.clone()).collect()
    }

    pub fn spec(&self, id: &ModelId) -> Option<&ModelSpec> {
        self.cohort.iter().find(|m| &m.model_id == id)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.run_id.trim().is_empty() {
            return Err(ValidationError::new("run_id", "must be non-empty", ""));
        }
        if self.k() < 2 {
            return Err(ValidationError::new(
                "cohort",
                "must contain at least two models",
                self.k(),
            ));
        }
        let mut ids = BTreeSet::new();
        let mut names = BTreeSet::new();
        for spec in &self.cohort {
            if spec.model_id.0.trim().is_empty() {
                return Err(ValidationError::new("model_id", "must be non-empty", ""));
            }
            if !ids.insert(&spec.model_id) {
                return Err(ValidationError::new(
                    "cohort",
                    "model ids must be unique",
                    &spec.model_id,
                ));
            }
            if spec.display_name.trim().is_empty() {
                return Err(ValidationError::new("display_name", "must be non-empty", ""));
            }
            if !names.insert(&spec.display_name) {
                return Err(ValidationError::new(
                    "cohort",
                    "display names must be unique (they double as labels)",
                    &spec.display_name,
                ));
            }
        }
        if self.categories != Category::ALL.to_vec() {
            return Err(ValidationError::new(
                "categories",
                "must be exactly the five canonical categories in canonical order",
                format!("{} entries", self.categories.len()),
            ));
        }
        if self.questions_total == 0 {
            return Err(ValidationError::new(
                "questions_total",
                "must be at least 1",
                self.questions_total,
            ));
        }
        if self.regimes.is_empty() {
            return Err(ValidationError::new("regimes", "must be non-empty", ""));
        }
        let mut seen_regimes = BTreeSet::new();
        for regime in &self.regimes {
            if !seen_regimes.insert(*regime) {
                return Err(ValidationError::new(
                    "regimes",
                    "must not contain duplicates",
                    regime.name(),
                ));
            }
        }
        if self.grounding_provider.trim().is_empty() {
            return Err(ValidationError::new(
                "grounding_provider",
                "must be non-empty",
                "",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_manifest() -> RunManifest {
        RunManifest {
            run_id: "test_run".into(),
            seed: 7,
            cohort: vec![
                ModelSpec::new("alpha", "sim", "Alpha One"),
                ModelSpec::new("beta", "sim", "Beta Two"),
            ],
            categories: Category::ALL.to_vec(),
            questions_total: 4,
            regimes: Regime::ALL.to_vec(),
            grounding_provider: "sim".into(),
            phase_state: Default::default(),
        }
    }

    #[test]
    fn category_set_is_exactly_the_five_canonical_values() {
        let list = Category::prompt_list();
        assert_eq!(
            list,
            "factual knowledge; reasoning / logic; current events; creative / open-ended; practical how-to"
        );
        for c in Category::ALL {
            assert_eq!(Category::parse(c.as_str()), Some(c));
        }
        assert_eq!(Category::parse("geography"), None);
    }

    #[test]
    fn only_current_events_is_grounded() {
        for c in Category::ALL {
            assert_eq!(c.grounded(), c == Category::CurrentEvents);
        }
    }

    #[test]
    fn regime_toggle_matrix_is_fixed() {
        assert!(Regime::ShuffleOnly.shuffle() && !Regime::ShuffleOnly.blind());
        assert!(!Regime::BlindOnly.shuffle() && Regime::BlindOnly.blind());
        assert!(Regime::ShuffleBlind.shuffle() && Regime::ShuffleBlind.blind());
        assert_eq!(Regime::BASELINE, Regime::ShuffleBlind);
        for r in Regime::ALL {
            assert_eq!(Regime::parse(r.name()), Some(r));
        }
    }

    #[test]
    fn evaluation_record_roundtrips_byte_identically() {
        let rec = EvaluationRecord {
            regime: Regime::ShuffleBlind,
            evaluator_id: "alpha".into(),
            evaluatee_id: "beta".into(),
            question_id: "q_beta_0001".into(),
            score: 8,
            reason: "Correct core claim, minor omission on edge case; clear and grounded.".into(),
            flags: vec![Flag::ClearCorrect],
            displayed_position: 2,
            displayed_label: "Response B".into(),
        };
        rec.validate().unwrap();
        let line = serde_json::to_string(&rec).unwrap();
        let back: EvaluationRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);
        assert_eq!(serde_json::to_string(&back).unwrap(), line);
    }

    #[test]
    fn score_outside_range_is_rejected_naming_the_field() {
        let mut rec = EvaluationRecord {
            regime: Regime::BlindOnly,
            evaluator_id: "alpha".into(),
            evaluatee_id: "beta".into(),
            question_id: "q_beta_0001".into(),
            score: 11,
            reason: "r".into(),
            flags: vec![],
            displayed_position: 1,
            displayed_label: "Response A".into(),
        };
        let err = rec.validate().unwrap_err();
        assert_eq!(err.field, "score");
        assert!(err.constraint.contains("1..=10"));
        rec.score = 0;
        assert_eq!(rec.validate().unwrap_err().field, "score");
        rec.score = 10;
        rec.validate().unwrap();
    }

    #[test]
    fn duplicate_flags_are_rejected() {
        let rec = EvaluationRecord {
            regime: Regime::ShuffleOnly,
            evaluator_id: "alpha".into(),
            evaluatee_id: "alpha".into(),
            question_id: "q_alpha_0000".into(),
            score: 9,
            reason: "r".into(),
            flags: vec![Flag::ClearCorrect, Flag::ClearCorrect],
            displayed_position: 1,
            displayed_label: "Alpha One".into(),
        };
        assert_eq!(rec.validate().unwrap_err().field, "flags");
    }

    #[test]
    fn answer_char_count_must_match_text() {
        let mut ans = Answer {
            question_id: "q_alpha_0000".into(),
            respondent_id: "beta".into(),
            text: "héllo".into(),
            latency_ms: 12,
            grounding_used: false,
            grounding_snippets: vec![],
            grounding_note: None,
            completion_tokens: Some(3),
            char_count: 5,
        };
        ans.validate().unwrap();
        ans.char_count = 6;
        assert_eq!(ans.validate().unwrap_err().field, "char_count");
    }

    #[test]
    fn ungrounded_answer_must_not_carry_snippets() {
        let ans = Answer {
            question_id: "q_alpha_0000".into(),
            respondent_id: "beta".into(),
            text: "x".into(),
            latency_ms: 1,
            grounding_used: false,
            grounding_snippets: vec!["stray".into()],
            grounding_note: None,
            completion_tokens: None,
            char_count: 1,
        };
        assert_eq!(ans.validate().unwrap_err().field, "grounding_snippets");
    }

    #[test]
    fn manifest_validation_catches_duplicates_and_bad_categories() {
        let good = sample_manifest();
        good.validate().unwrap();

        let mut dup_id = good.clone();
        dup_id.cohort[1].model_id = dup_id.cohort[0].model_id.clone();
        assert!(dup_id.validate().is_err());

        let mut dup_name = good.clone();
        dup_name.cohort[1].display_name = dup_name.cohort[0].display_name.clone();
        assert!(dup_name.validate().is_err());

        let mut bad_cat = good.clone();
        bad_cat.categories.pop();
        assert_eq!(bad_cat.validate().unwrap_err().field, "categories");

        let mut one_model = good.clone();
        one_model.cohort.truncate(1);
        assert!(one_model.validate().is_err());
    }

    #[test]
    fn question_authorship_distributes_round_robin() {
        let mut m = sample_manifest();
        m.questions_total = 5;
        // K=2, N=5: first author writes 3, second writes 2.
        assert_eq!(m.questions_for_author(0), 3);
        assert_eq!(m.questions_for_author(1), 2);
        m.questions_total = 4;
        assert_eq!(m.questions_for_author(0), 2);
        assert_eq!(m.questions_for_author(1), 2);
    }

    #[test]
    fn endogenous_question_ids_are_stable() {
        let id = QuestionId::endogenous(&"alpha".into(), 3);
        assert_eq!(id.as_str(), "q_alpha_0003");
        assert_eq!(QuestionId::benchmark("tfq_12").as_str(), "bench_tfq_12");
    }

    #[test]
    fn flags_serialize_snake_case() {
        assert_eq!(
            serde_json::to_string(&Flag::UnsupportedSpecifics).unwrap(),
            "\"unsupported_specifics\""
        );
        for f in Flag::ALL {
            assert_eq!(Flag::parse(f.as_str()), Some(f));
        }
        assert_eq!(Flag::parse("novel_flag"), None);
    }
}
