//! Simulated cohort: configurable model personas served through the real
//! provider interface, so the whole pipeline (prompting, presentation,
//! parsing, persistence, metrics) can be exercised hermetically against
//! planted ground truth.
//!
//! Each persona has a latent answer quality plus judging distortions
//! (generosity, self-preference, name affinity, position curve, noise).
//! Answers carry machine-readable markers; simulated judges read the
//! markers back and emit scores from the planted formula. Because name
//! affinity keys on the *displayed label*, it activates only when
//! identities are visible — blinding suppresses it exactly as it should.
//! Closed-form expectations for every planted bias are provided so
//! measured values can be checked against analytic oracles.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::groundtruth::{self, BenchmarkItem};
use crate::pipeline::presentation::{parse_responses_block, AnswerForJudging, JudgingPresentation};
use crate::providers::{
    ChatProvider, ChatRequest, ChatResponse, ProviderError, ProviderRegistry, RetrievalProvider,
    RetrievalResult,
};
use crate::tensor::ScoreTensor;
use crate::types::{Category, ModelId, ModelSpec, Origin, Question, QuestionId, Regime};
use crate::util::{derive_seed, derived_rng, fnv1a64, round_half_up, word_count};

/// Scores land here after rounding.
const SCORE_MIN: f64 = 1.0;
const SCORE_MAX: f64 = 10.0;
/// Planted judge targets for externally keyed answers.
const BENCH_CORRECT_BASE: f64 = 8.0;
const BENCH_WRONG_BASE: f64 = 3.0;
/// Fallback target for answers with no quality markers and no key.
const UNKNOWN_ANSWER_BASE: f64 = 5.0;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("simulated cohort must have at least one profile")]
    EmptyCohort,
    #[error("duplicate model id in simulated cohort: {0}")]
    DuplicateModelId(ModelId),
    #[error("duplicate display name in simulated cohort: {0}")]
    DuplicateDisplayName(String),
    #[error("model {0} is not in the simulated cohort")]
    UnknownModel(ModelId),
    #[error("invalid profile for {model_id}: {message}")]
    InvalidProfile { model_id: ModelId, message: String },
}

/// Latent answer quality: one value for everything, or per category (a
/// category missing from the map falls back to the map's mean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LatentQuality {
    Uniform(f64),
    PerCategory(BTreeMap<Category, f64>),
}

impl LatentQuality {
    pub fn for_category(&self, category: Category) -> f64 {
        match self {
            LatentQuality::Uniform(v) => *v,
            LatentQuality::PerCategory(map) => map.get(&category).copied().unwrap_or_else(|| {
                if map.is_empty() {
                    UNKNOWN_ANSWER_BASE
                } else {
                    map.values().sum::<f64>() / map.len() as f64
                }
            }),
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            LatentQuality::Uniform(v) => vec![*v],
            LatentQuality::PerCategory(map) => map.values().copied().collect(),
        }
    }
}

/// Reported (not slept) response latency: `mean_ms + uniform(0..=jitter_ms)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyProfile {
    pub mean_ms: u64,
    pub jitter_ms: u64,
}

impl Default for LatencyProfile {
    fn default() -> Self {
        LatencyProfile {
            mean_ms: 40,
            jitter_ms: 20,
        }
    }
}

/// One simulated persona. Judging emits
/// `clamp(round(latent + generosity + self_bias·[own answer] +
/// name_affinity[label] + position_curve[pos] + N(0, noise_sd)), 1, 10)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimProfile {
    pub model_id: ModelId,
    pub display_name: String,
    #[serde(default = "SimProfile::default_provider")]
    pub provider_id: String,
    pub latent_quality: LatentQuality,
    /// Flat shift this persona applies to every score it gives.
    #[serde(default)]
    pub generosity_offset: f64,
    /// Extra lift applied when judging its own answer (recognized through
    /// the answer's respondent marker, regardless of blinding).
    #[serde(default)]
    pub self_bias_offset: f64,
    /// Lift keyed by *displayed label*, so it only fires when labels are
    /// display names: blinding disables it with no special-casing.
    #[serde(default)]
    pub name_affinity: BTreeMap<String, f64>,
    /// Additive score shift by displayed position (index 0 = shown
    /// first); positions beyond the curve get 0.
    #[serde(default)]
    pub position_curve: Vec<f64>,
    /// Standard deviation of the Gaussian noise on every score.
    #[serde(default = "SimProfile::default_noise")]
    pub noise_sd: f64,
    #[serde(default)]
    pub latency: LatencyProfile,
    /// Probability mass of externally keyed items this persona answers
    /// correctly; planted as an exact deterministic quota, not a coin.
    #[serde(default = "SimProfile::default_accuracy")]
    pub benchmark_accuracy: f64,
}

impl SimProfile {
    fn default_provider() -> String {
        "sim".to_string()
    }

    fn default_noise() -> f64 {
        0.5
    }

    fn default_accuracy() -> f64 {
        0.8
    }

    pub fn new(model_id: impl Into<String>, display_name: impl Into<String>, latent: f64) -> Self {
        SimProfile {
            model_id: ModelId::new(model_id),
            display_name: display_name.into(),
            provider_id: Self::default_provider(),
            latent_quality: LatentQuality::Uniform(latent),
            generosity_offset: 0.0,
            self_bias_offset: 0.0,
            name_affinity: BTreeMap::new(),
            position_curve: Vec::new(),
            noise_sd: Self::default_noise(),
            latency: LatencyProfile::default(),
            benchmark_accuracy: Self::default_accuracy(),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let fail = |message: &str| Err(SimError::InvalidProfile {
            model_id: self.model_id.clone(),
            message: message.to_string(),
        });
        if self.display_name.trim().is_empty() {
            return fail("display_name must be non-empty");
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return fail("noise_sd must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.benchmark_accuracy) {
            return fail("benchmark_accuracy must be within [0, 1]");
        }
        if self.latent_quality.values().iter().any(|v| !v.is_finite()) {
            return fail("latent_quality values must be finite");
        }
        Ok(())
    }

    /// Position-curve value at a 1-based displayed position.
    pub fn position_effect(&self, position: usize) -> f64 {
        self.position_curve.get(position - 1).copied().unwrap_or(0.0)
    }

    /// Mean position effect under a uniform shuffle over `k` positions.
    pub fn mean_position_effect(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        (1..=k).map(|p| self.position_effect(p)).sum::<f64>() / k as f64
    }
}

/// On-disk shape of a simulated cohort (`sim_cohort.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimCohortConfig {
    pub profiles: Vec<SimProfile>,
}

/// A ready-made cohort of `k` personas with spread latents, mild
/// generosity variation, a uniform self-preference, an affinity toward
/// the first persona's display name, and a gently decaying position
/// curve — every planted effect the reports quantify.
pub fn default_cohort(k: usize) -> Vec<SimProfile> {
    let famous = "Sim Alpha".to_string();
    (0..k)
        .map(|i| {
            let mut profile = SimProfile::new(
                format!("sim_{:02}", i),
                if i == 0 {
                    famous.clone()
                } else {
                    format!("Sim {}", crate::util::letter_label(i))
                },
                8.0 - 0.35 * i as f64,
            );
            profile.generosity_offset = 0.2 * ((i % 3) as f64 - 1.0);
            profile.self_bias_offset = 0.8;
            if i != 0 {
                profile.name_affinity.insert(famous.clone(), 0.5);
            }
            profile.position_curve = (0..k).map(|p| 0.08 - 0.04 * p as f64).collect();
            profile.latency = LatencyProfile {
                mean_ms: 30 + 15 * i as u64,
                jitter_ms: 10,
            };
            profile.benchmark_accuracy = (0.92 - 0.08 * i as f64).max(0.3);
            profile
        })
        .collect()
}

struct WorldInner {
    seed: u64,
    profiles: Vec<SimProfile>,
    index: BTreeMap<ModelId, usize>,
    /// Externally keyed items, keyed by the exact answering prompt they
    /// produce (the same string judges later see as the question).
    benchmark: BTreeMap<String, BenchmarkItem>,
}

/// Shared, immutable simulation state; cheap to clone.
#[derive(Clone)]
pub struct SimWorld {
    inner: Arc<WorldInner>,
}

impl SimWorld {
    pub fn new(seed: u64, profiles: Vec<SimProfile>) -> Result<Self, SimError> {
        if profiles.is_empty() {
            return Err(SimError::EmptyCohort);
        }
        let mut index = BTreeMap::new();
        let mut names = BTreeMap::new();
        for (i, profile) in profiles.iter().enumerate() {
            profile.validate()?;
            if index.insert(profile.model_id.clone(), i).is_some() {
                return Err(SimError::DuplicateModelId(profile.model_id.clone()));
            }
            if names.insert(profile.display_name.clone(), i).is_some() {
                return Err(SimError::DuplicateDisplayName(profile.display_name.clone()));
            }
        }
        Ok(SimWorld {
            inner: Arc::new(WorldInner {
                seed,
                profiles,
                index,
                benchmark: BTreeMap::new(),
            }),
        })
    }

    /// Registers externally keyed items so simulated respondents can hit
    /// their planted accuracy and simulated judges can grade against the
    /// key.
    pub fn with_benchmark(self, items: &[BenchmarkItem]) -> Self {
        let benchmark = items
            .iter()
            .map(|item| (groundtruth::benchmark_prompt(item), item.clone()))
            .collect();
        let inner = &self.inner;
        SimWorld {
            inner: Arc::new(WorldInner {
                seed: inner.seed,
                profiles: inner.profiles.clone(),
                index: inner.index.clone(),
                benchmark,
            }),
        }
    }

    pub fn seed(&self) -> u64 {
        self.inner.seed
    }

    pub fn profiles(&self) -> &[SimProfile] {
        &self.inner.profiles
    }

    pub fn profile(&self, model_id: &ModelId) -> Option<&SimProfile> {
        self.inner
            .index
            .get(model_id)
            .map(|&i| &self.inner.profiles[i])
    }

    /// Canonical cohort position (0-based) of a model; the profile order
    /// is the canonical order the pipeline also uses.
    pub fn position_of(&self, model_id: &ModelId) -> Option<usize> {
        self.inner.index.get(model_id).copied()
    }

    pub fn cohort_specs(&self) -> Vec<ModelSpec> {
        self.inner
            .profiles
            .iter()
            .map(|p| {
                ModelSpec::new(
                    p.model_id.as_str(),
                    p.provider_id.as_str(),
                    p.display_name.as_str(),
                )
            })
            .collect()
    }

    pub fn chat_provider(&self, model_id: &ModelId) -> Result<Arc<SimChatProvider>, SimError> {
        if self.profile(model_id).is_none() {
            return Err(SimError::UnknownModel(model_id.clone()));
        }
        Ok(Arc::new(SimChatProvider {
            world: self.clone(),
            model_id: model_id.clone(),
        }))
    }

    pub fn retrieval_provider(&self) -> Arc<SimRetrievalProvider> {
        Arc::new(SimRetrievalProvider {
            world: self.clone(),
        })
    }

    /// A registry serving every persona plus simulated retrieval.
    pub fn registry(&self) -> ProviderRegistry {
        let mut registry = ProviderRegistry::new();
        for profile in self.profiles() {
            let provider = self
                .chat_provider(&profile.model_id)
                .expect("profiles are registered by construction");
            registry.insert_chat(profile.model_id.clone(), provider);
        }
        registry.set_retrieval(self.retrieval_provider());
        registry
    }

    /// Deterministic RNG for one provider call, derived from the world
    /// seed, the callee, and the full prompt text. Identical calls (as on
    /// resume) replay identical bytes.
    fn call_rng(&self, model_id: &ModelId, system: Option<&str>, user: &str) -> ChaCha20Rng {
        let mut buf = Vec::with_capacity(user.len() + 64);
        if let Some(s) = system {
            buf.extend_from_slice(s.as_bytes());
        }
        buf.push(0x1f);
        buf.extend_from_slice(user.as_bytes());
        let prompt_hash = fnv1a64(&buf).to_string();
        derived_rng(
            self.inner.seed,
            &["simcall", model_id.as_str(), &prompt_hash],
        )
    }

    fn bench_for_prompt(&self, prompt: &str) -> Option<&BenchmarkItem> {
        self.inner.benchmark.get(prompt)
    }

    /// Whether `model_id` answers `item` correctly: items are ranked by a
    /// per-model deterministic hash and the persona answers its first
    /// `round(accuracy * total)` items correctly — an exact quota rather
    /// than a noisy coin, so planted accuracy is recovered tightly.
    fn answers_correctly(&self, model_id: &ModelId, item: &BenchmarkItem) -> bool {
        let Some(profile) = self.profile(model_id) else {
            return false;
        };
        let total = self.inner.benchmark.len();
        if total == 0 {
            return false;
        }
        let quota = (profile.benchmark_accuracy * total as f64).round() as usize;
        let hash_of = |qid: &QuestionId| {
            derive_seed(
                self.inner.seed,
                &["benchrank", model_id.as_str(), qid.as_str()],
            )
        };
        let mine = hash_of(&item.question_id);
        let rank = self
            .inner
            .benchmark
            .values()
            .filter(|other| hash_of(&other.question_id) < mine)
            .count();
        rank < quota
    }
}

/// Pulls `[key=value]` out of marker-bearing text.
fn marker_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    let pattern = format!("[{key}=");
    let start = text.find(&pattern)? + pattern.len();
    let end = text[start..].find(']')? + start;
    Some(&text[start..end])
}

/// The question inside a judging prompt (between its `Question:` header
/// and the `Responses:` block).
fn judged_question(prompt: &str) -> Option<&str> {
    let start_marker = "\nQuestion:\n";
    let end_marker = "\n\nResponses:\n";
    let start = prompt.find(start_marker)? + start_marker.len();
    let end = prompt[start..].find(end_marker)? + start;
    Some(&prompt[start..end])
}

/// Box-Muller standard normal draw (two uniforms per sample).
fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn clamp_score(raw: f64) -> u8 {
    round_half_up(raw).clamp(SCORE_MIN, SCORE_MAX) as u8
}

/// The planted scoring formula, shared verbatim by the prompt-driven
/// judge and the fast tensor synthesizer.
#[allow(clippy::too_many_arguments)]
fn planted_score(
    judge: &SimProfile,
    base: f64,
    is_self: bool,
    label: &str,
    position: usize,
    rng: &mut ChaCha20Rng,
) -> u8 {
    let raw = base
        + judge.generosity_offset
        + if is_self { judge.self_bias_offset } else { 0.0 }
        + judge.name_affinity.get(label).copied().unwrap_or(0.0)
        + judge.position_effect(position)
        + judge.noise_sd * gaussian(rng);
    clamp_score(raw)
}

/// Chat backend for one persona. Classifies each prompt by its fixed
/// prefix (question generation, answering, externally keyed answering,
/// judging) and produces deterministic output for it.
pub struct SimChatProvider {
    world: SimWorld,
    model_id: ModelId,
}

impl SimChatProvider {
    fn profile(&self) -> &SimProfile {
        self.world
            .profile(&self.model_id)
            .expect("provider only built for registered personas")
    }

    fn respond(&self, text: String, rng: &mut ChaCha20Rng) -> ChatResponse {
        let latency = self.profile().latency.clone();
        let jitter = if latency.jitter_ms == 0 {
            0
        } else {
            rng.gen_range(0..=latency.jitter_ms)
        };
        ChatResponse {
            completion_tokens: Some(word_count(&text) as u64),
            latency_ms: latency.mean_ms + jitter,
            text,
        }
    }

    fn generation_reply(&self, user_text: &str) -> Result<String, ProviderError> {
        let invalid = |message: String| ProviderError::InvalidRequest {
            status: 0,
            message,
        };
        let count: usize = user_text
            .strip_prefix("Generate exactly ")
            .and_then(|rest| rest.split_whitespace().next())
            .and_then(|token| token.parse().ok())
            .ok_or_else(|| invalid("generation prompt lacks a question count".into()))?;
        let categories: Vec<&str> = user_text
            .lines()
            .find_map(|line| line.strip_prefix("Use ONLY these exact category values: "))
            .map(|list| list.split("; ").collect())
            .ok_or_else(|| invalid("generation prompt lacks a category list".into()))?;
        if categories.is_empty() {
            return Err(invalid("generation prompt has an empty category list".into()));
        }
        let offset = fnv1a64(self.model_id.as_str().as_bytes()) as usize % categories.len();
        let questions: Vec<serde_json::Value> = (0..count)
            .map(|i| {
                let category = categories[(offset + i) % categories.len()];
                serde_json::json!({
                    "category": category,
                    "question": format!(
                        "[category={category}] {} item {i:04}: which considerations dominate this scenario, and why?",
                        self.model_id
                    ),
                })
            })
            .collect();
        Ok(serde_json::json!({ "questions": questions }).to_string())
    }

    fn answer_reply(&self, user_text: &str) -> String {
        let question = user_text
            .split_once("\n\n")
            .map(|(_, q)| q)
            .unwrap_or(user_text);
        let category = marker_value(question, "category")
            .and_then(Category::parse)
            .unwrap_or(Category::FactualKnowledge);
        let profile = self.profile();
        let latent = profile.latent_quality.for_category(category);
        format!(
            "[respondent={}] [latent={latent:.3}] Direct response on {} from {}: the decisive considerations, stated plainly with their implications.",
            self.model_id,
            category.as_str(),
            profile.display_name,
        )
    }

    fn benchmark_reply(&self, item: &BenchmarkItem) -> String {
        let correct = self.world.answers_correctly(&self.model_id, item);
        match item.kind {
            groundtruth::BenchmarkKind::MultipleChoice => {
                let key = item
                    .key
                    .trim()
                    .to_ascii_uppercase()
                    .chars()
                    .next()
                    .unwrap_or('A');
                let letter = if correct {
                    key
                } else {
                    let n = item.choices.len().max(1) as u8;
                    let idx = (key as u8 - b'A' + 1) % n;
                    (b'A' + idx) as char
                };
                format!(
                    "{letter}. This option best matches the established reference account, considering each alternative in turn."
                )
            }
            groundtruth::BenchmarkKind::NumericExact => {
                let value = if correct {
                    item.key.trim().trim_end_matches('.').to_string()
                } else {
                    let v: f64 = item.key.trim().parse().unwrap_or(0.0);
                    format!("{}", v + 1.0)
                };
                format!(
                    "Working through the given quantities stepwise yields the final result: {value}"
                )
            }
        }
    }

    fn judge_reply(
        &self,
        user_text: &str,
        rng: &mut ChaCha20Rng,
    ) -> Result<String, ProviderError> {
        let invalid = |message: String| ProviderError::InvalidRequest {
            status: 0,
            message,
        };
        let question = judged_question(user_text)
            .ok_or_else(|| invalid("judging prompt lacks a question block".into()))?;
        let responses = parse_responses_block(user_text)
            .ok_or_else(|| invalid("judging prompt lacks a responses block".into()))?;
        let judge = self.profile();
        let bench_item = self.world.bench_for_prompt(question);
        let mut verdicts = serde_json::Map::new();
        for (position, (label, text)) in responses.iter().enumerate() {
            let position = position + 1;
            let respondent = marker_value(text, "respondent");
            let is_self = respondent == Some(self.model_id.as_str());
            let base = if let Some(item) = bench_item {
                if groundtruth::grade(item, text).correct {
                    BENCH_CORRECT_BASE
                } else {
                    BENCH_WRONG_BASE
                }
            } else if let Some(latent) = marker_value(text, "latent")
                .and_then(|v| v.parse::<f64>().ok())
            {
                latent
            } else {
                UNKNOWN_ANSWER_BASE
            };
            let score = planted_score(judge, base, is_self, label, position, rng);
            let flags: Vec<&str> = if score <= 2 {
                vec!["incorrect"]
            } else if score >= 9 {
                vec!["clear_correct"]
            } else {
                vec![]
            };
            verdicts.insert(
                label.clone(),
                serde_json::json!({
                    "score": score,
                    "reason": "Scored from the configured persona profile with deterministic noise for this response.",
                    "flags": flags,
                }),
            );
        }
        Ok(serde_json::Value::Object(verdicts).to_string())
    }
}

#[async_trait::async_trait]
impl ChatProvider for SimChatProvider {
    fn provider_id(&self) -> &str {
        &self.profile().provider_id
    }

    async fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        if request.model_id != self.model_id {
            return Err(ProviderError::InvalidRequest {
                status: 0,
                message: format!(
                    "persona {} received a request addressed to {}",
                    self.model_id, request.model_id
                ),
            });
        }
        let mut rng = self
            .world
            .call_rng(&self.model_id, request.system_text.as_deref(), &request.user_text);
        let user = &request.user_text;
        let text = if user.starts_with("Generate exactly ") {
            self.generation_reply(user)?
        } else if let Some(item) = self.world.bench_for_prompt(user) {
            self.benchmark_reply(item)
        } else if user.starts_with("Answer this question directly") {
            self.answer_reply(user)
        } else if user.contains("You are grading responses") {
            self.judge_reply(user, &mut rng)?
        } else {
            "Acknowledged; no simulated behavior is defined for this prompt shape.".to_string()
        };
        Ok(self.respond(text, &mut rng))
    }
}

/// Deterministic canned web search for the grounded category.
pub struct SimRetrievalProvider {
    world: SimWorld,
}

#[async_trait::async_trait]
impl RetrievalProvider for SimRetrievalProvider {
    fn provider_id(&self) -> &str {
        "sim"
    }

    async fn search(
        &self,
        query: &str,
        max_results: usize,
    ) -> Result<Vec<RetrievalResult>, ProviderError> {
        let slug = fnv1a64(query.as_bytes()) % 10_000;
        let _ = self.world.seed();
        Ok((0..max_results.min(3))
            .map(|i| RetrievalResult {
                title: format!("Simulated source {} for topic {slug}", i + 1),
                url: format!("https://sim.invalid/{slug}/{}", i + 1),
                snippet: format!(
                    "Deterministic background snippet {} for query: {query}",
                    i + 1
                ),
            })
            .collect())
    }
}

/// A synthetic question corpus in the same shape generation would
/// produce: authorship round-robin over the cohort (earlier members take
/// the remainder), categories rotating per author.
pub fn synthesize_questions(world: &SimWorld, total: usize) -> Vec<Question> {
    let k = world.profiles().len();
    let categories = Category::ALL;
    let mut questions = Vec::with_capacity(total);
    for (a, profile) in world.profiles().iter().enumerate() {
        let quota = total / k + usize::from(a < total % k);
        let offset = fnv1a64(profile.model_id.as_str().as_bytes()) as usize % categories.len();
        for i in 0..quota {
            let category = categories[(offset + i) % categories.len()];
            questions.push(Question {
                question_id: QuestionId::endogenous(&profile.model_id, i),
                author_id: profile.model_id.clone(),
                category,
                text: format!(
                    "[category={}] {} item {i:04}: which considerations dominate this scenario, and why?",
                    category.as_str(),
                    profile.model_id
                ),
                origin: Origin::Endogenous,
            });
        }
    }
    questions
}

/// Fast path: the full score tensor for one regime straight from the
/// planted formula, using the very same presentation layout (and thus
/// the same positions and labels) a prompt-driven run would produce.
pub fn synthesize_tensor(world: &SimWorld, regime: Regime, questions: &[Question]) -> ScoreTensor {
    let models: Vec<ModelId> = world
        .profiles()
        .iter()
        .map(|p| p.model_id.clone())
        .collect();
    let question_ids: Vec<QuestionId> = questions.iter().map(|q| q.question_id.clone()).collect();
    let mut tensor = ScoreTensor::new(regime, models.clone(), question_ids);
    for question in questions {
        let answers: Vec<AnswerForJudging> = world
            .profiles()
            .iter()
            .map(|p| AnswerForJudging {
                respondent_id: p.model_id.clone(),
                display_name: p.display_name.clone(),
                text: String::new(),
            })
            .collect();
        for judge_profile in world.profiles() {
            let presentation = JudgingPresentation::build(
                regime,
                &judge_profile.model_id,
                &question.question_id,
                &answers,
                world.seed(),
            );
            let mut rng = derived_rng(
                world.seed(),
                &[
                    "simnoise",
                    regime.name(),
                    judge_profile.model_id.as_str(),
                    question.question_id.as_str(),
                ],
            );
            for presented in &presentation.responses {
                let evaluatee = world
                    .profile(&presented.evaluatee_id)
                    .expect("presentation only shows cohort answers");
                let base = evaluatee.latent_quality.for_category(question.category);
                let score = planted_score(
                    judge_profile,
                    base,
                    presented.evaluatee_id == judge_profile.model_id,
                    &presented.label,
                    presented.position,
                    &mut rng,
                );
                tensor
                    .insert(
                        &judge_profile.model_id,
                        &presented.evaluatee_id,
                        &question.question_id,
                        score,
                    )
                    .expect("synthesized coordinates are on-axis");
            }
        }
    }
    tensor
}

/// Analytic expectation of the measured self-preference (mean self score
/// minus mean peer score) for one persona within one regime, ignoring
/// rounding and clamping. Latent quality cancels; generosity, affinity,
/// and position-curve asymmetries between the persona and its peers
/// remain.
pub fn expected_self_preference(world: &SimWorld, model_id: &ModelId, regime: Regime) -> f64 {
    let profiles = world.profiles();
    let k = profiles.len();
    let own = world.profile(model_id).expect("persona must exist");
    let own_pos = world.position_of(model_id).expect("persona must exist") + 1;
    let position_term = |p: &SimProfile| {
        if regime.shuffle() {
            p.mean_position_effect(k)
        } else {
            p.position_effect(own_pos)
        }
    };
    let affinity_term = |p: &SimProfile| {
        if regime.blind() {
            0.0
        } else {
            p.name_affinity.get(&own.display_name).copied().unwrap_or(0.0)
        }
    };
    let self_score = own.generosity_offset
        + own.self_bias_offset
        + position_term(own)
        + affinity_term(own);
    let peers: Vec<&SimProfile> = profiles
        .iter()
        .filter(|p| &p.model_id != model_id)
        .collect();
    if peers.is_empty() {
        return own.self_bias_offset;
    }
    let peer_mean = peers
        .iter()
        .map(|p| p.generosity_offset + position_term(p) + affinity_term(p))
        .sum::<f64>()
        / peers.len() as f64;
    self_score - peer_mean
}

/// Analytic expectation of the name-recognition shift for one persona:
/// its peer mean with identities visible minus its peer mean fully
/// controlled — the mean affinity peers hold toward its display name.
pub fn expected_name_shift(world: &SimWorld, model_id: &ModelId) -> f64 {
    let own = world.profile(model_id).expect("persona must exist");
    let peers: Vec<&SimProfile> = world
        .profiles()
        .iter()
        .filter(|p| &p.model_id != model_id)
        .collect();
    if peers.is_empty() {
        return 0.0;
    }
    peers
        .iter()
        .map(|p| p.name_affinity.get(&own.display_name).copied().unwrap_or(0.0))
        .sum::<f64>()
        / peers.len() as f64
}

/// Analytic expectation of the position shift for one persona: its peer
/// mean under fixed canonical order minus under uniform shuffling. The
/// persona sits at its cohort position when order is fixed, so peers
/// apply that point of their curves instead of the curve average.
pub fn expected_position_shift(world: &SimWorld, model_id: &ModelId) -> f64 {
    let k = world.profiles().len();
    let own_pos = world.position_of(model_id).expect("persona must exist") + 1;
    let peers: Vec<&SimProfile> = world
        .profiles()
        .iter()
        .filter(|p| &p.model_id != model_id)
        .collect();
    if peers.is_empty() {
        return 0.0;
    }
    peers
        .iter()
        .map(|p| p.position_effect(own_pos) - p.mean_position_effect(k))
        .sum::<f64>()
        / peers.len() as f64
}
