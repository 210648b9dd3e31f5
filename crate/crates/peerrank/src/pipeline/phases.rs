//! The phase conductor. Each phase enumerates its tasks in canonical
//! order, skips tasks whose records already exist (resume), runs the rest
//! through an order-preserving bounded-concurrency stream so transcripts
//! come out byte-deterministic, and accounts gaps. A failed task is a gap,
//! not an abort; a phase fails only when gaps exceed the configured rate.

use std::collections::BTreeMap;
use std::future::Future;
use std::pin::Pin;
use std::sync::Arc;
use std::time::Instant;

use futures::stream::{self, StreamExt};
use rand_chacha::ChaCha20Rng;

use crate::groundtruth;
use crate::pipeline::presentation::{AnswerForJudging, JudgingPresentation};
use crate::pipeline::prompts;
use crate::pipeline::verdicts::parse_verdicts;
use crate::pipeline::extract::first_balanced_object;
use crate::providers::registry::{JudgingProviders, ProviderRegistry, RegistryError};
use crate::providers::{
    with_retry, ChatProvider, ChatRequest, ChatResponse, ProviderError, RetryPolicy,
};
use crate::store::{RunStore, StoreError};
use crate::types::{
    Answer, Category, EvaluationRecord, ModelId, Origin, PhaseRecord, PhaseStatus, Question,
    QuestionId, Regime, Role,
};
use crate::util::derived_rng;

/// Phase names as recorded in the manifest's phase state.
pub const PHASE_GENERATE: &str = "generate";
pub const PHASE_ANSWER: &str = "answer";
pub const PHASE_BENCHMARK_ANSWER: &str = "benchmark_answer";
pub const PHASE_BENCHMARK_JUDGE: &str = "benchmark_judge";

pub fn judge_phase_name(regime: Regime) -> String {
    format!("judge_{}", regime.name())
}

/// Tuning for phase execution.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub retry: RetryPolicy,
    /// Tasks in flight at once (per phase). Order of results is preserved
    /// regardless.
    pub buffer: usize,
    /// A phase errors out when gaps exceed this fraction of its tasks.
    pub max_gap_rate: f64,
    /// Snippets requested per grounded question.
    pub retrieval_results: usize,
    /// Judging wants determinism; answering and generation use provider
    /// defaults unless set.
    pub judge_temperature: Option<f64>,
    pub answer_temperature: Option<f64>,
    pub generation_temperature: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            retry: RetryPolicy::default(),
            buffer: 8,
            max_gap_rate: 0.2,
            retrieval_results: prompts::DEFAULT_RETRIEVAL_RESULTS,
            judge_temperature: Some(0.0),
            answer_temperature: None,
            generation_temperature: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PhaseError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(
        "phase {phase}: {gaps} of {total} tasks gapped, above the {max_rate} ceiling; \
         the run directory holds all successful records — re-run to retry the gaps"
    )]
    GapRate {
        phase: String,
        gaps: usize,
        total: usize,
        max_rate: f64,
    },
}

struct TaskResult<T> {
    key: String,
    outcome: Result<T, String>,
}

type TaskFuture<T> = Pin<Box<dyn Future<Output = TaskResult<T>> + Send>>;

async fn chat_with_retry(
    provider: &Arc<dyn ChatProvider>,
    retry: &RetryPolicy,
    rng: &mut ChaCha20Rng,
    request: &ChatRequest,
) -> Result<ChatResponse, ProviderError> {
    with_retry(retry, rng, |_| {
        let provider = provider.clone();
        let request = request.clone();
        async move { provider.chat(&request).await }
    })
    .await
}

fn finish_phase(
    store: &mut RunStore,
    phase: &str,
    tasks_total: usize,
    succeeded: usize,
    gaps: usize,
    started: Instant,
    config: &PipelineConfig,
) -> Result<PhaseRecord, PhaseError> {
    let record = PhaseRecord {
        status: if gaps == 0 {
            PhaseStatus::Complete
        } else {
            PhaseStatus::Partial
        },
        tasks_total,
        succeeded,
        gaps,
        wall_clock_ms: started.elapsed().as_millis() as u64,
    };
    store.set_phase(phase, record.clone())?;
    if tasks_total > 0 && (gaps as f64 / tasks_total as f64) > config.max_gap_rate {
        return Err(PhaseError::GapRate {
            phase: phase.to_string(),
            gaps,
            total: tasks_total,
            max_rate: config.max_gap_rate,
        });
    }
    Ok(record)
}

// ── generation ───────────────────────────────────────────────────────────

#[derive(serde::Deserialize)]
struct RawGeneratedList {
    questions: Vec<RawGenerated>,
}

#[derive(serde::Deserialize)]
struct RawGenerated {
    category: String,
    question: String,
}

/// Parses a generator's reply into validated questions. The reply must
/// contain a JSON object with a `questions` array of exactly `expected`
/// entries, each with a known category and non-empty text. The error is a
/// human-readable problem list suitable for a corrective re-ask.
pub fn parse_generated_questions(
    raw: &str,
    author: &ModelId,
    expected: usize,
) -> Result<Vec<Question>, String> {
    let span =
        first_balanced_object(raw).ok_or_else(|| "no JSON object found in the reply".to_string())?;
    let payload: RawGeneratedList = serde_json::from_str(span)
        .map_err(|e| format!("the JSON object does not match {{\"questions\": [...]}}: {e}"))?;
    let mut problems = Vec::new();
    if payload.questions.len() != expected {
        problems.push(format!(
            "expected exactly {expected} questions, got {}",
            payload.questions.len()
        ));
    }
    let mut out = Vec::new();
    for (i, raw_q) in payload.questions.iter().enumerate() {
        match Category::parse(&raw_q.category) {
            Some(category) => {
                if raw_q.question.trim().is_empty() {
                    problems.push(format!("question {} has empty text", i + 1));
                } else {
                    out.push(Question {
                        question_id: QuestionId::endogenous(author, i),
                        author_id: author.clone(),
                        category,
                        text: raw_q.question.trim().to_string(),
                        origin: Origin::Endogenous,
                    });
                }
            }
            None => problems.push(format!(
                "question {} uses an unknown category {:?}; valid categories are: {}",
                i + 1,
                raw_q.category,
                Category::prompt_list()
            )),
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(problems.join("; "))
    }
}

/// Asks every generator for its question quota and persists the corpus.
/// One invalid reply earns one corrective re-ask; a second failure gaps
/// that generator.
pub async fn generate_phase(
    store: &mut RunStore,
    registry: &ProviderRegistry,
    config: &PipelineConfig,
) -> Result<PhaseRecord, PhaseError> {
    let manifest = store.manifest().clone();
    let started = Instant::now();
    let mut tasks: Vec<TaskFuture<Vec<Question>>> = Vec::new();
    let mut total = 0usize;
    let mut resumed = 0usize;
    for (index, spec) in manifest.cohort.iter().enumerate() {
        if !spec.roles.contains(&Role::Generator) {
            continue;
        }
        total += 1;
        let quota = manifest.questions_for_author(index);
        let complete = (0..quota)
            .all(|i| store.has_question(&QuestionId::endogenous(&spec.model_id, i)));
        if complete {
            resumed += 1;
            continue;
        }
        let provider = registry.chat_for(&spec.model_id)?;
        let author = spec.model_id.clone();
        let seed = manifest.seed;
        let retry = config.retry.clone();
        let temperature = config.generation_temperature;
        tasks.push(Box::pin(async move {
            let key = format!("{PHASE_GENERATE}/{author}");
            let outcome = async {
                let prompt = prompts::generation_prompt(quota);
                let mut rng = derived_rng(seed, &["retry", PHASE_GENERATE, author.as_str()]);
                let request = ChatRequest {
                    model_id: author.clone(),
                    system_text: None,
                    user_text: prompt.clone(),
                    temperature,
                    max_tokens: None,
                };
                let response = chat_with_retry(&provider, &retry, &mut rng, &request)
                    .await
                    .map_err(|e| e.to_string())?;
                match parse_generated_questions(&response.text, &author, quota) {
                    Ok(questions) => Ok(questions),
                    Err(problems) => {
                        log::warn!("invalid question list from {author}: {problems}");
                        let corrective = ChatRequest {
                            user_text: prompts::corrective_reask(&prompt, &problems),
                            ..request.clone()
                        };
                        let second = chat_with_retry(&provider, &retry, &mut rng, &corrective)
                            .await
                            .map_err(|e| e.to_string())?;
                        parse_generated_questions(&second.text, &author, quota)
                            .map_err(|p| format!("after corrective re-ask: {p}"))
                    }
                }
            }
            .await;
            TaskResult { key, outcome }
        }));
    }

    let mut gaps = 0usize;
    let mut succeeded = resumed;
    let mut results = stream::iter(tasks).buffered(config.buffer.max(1));
    while let Some(result) = results.next().await {
        match result.outcome {
            Ok(questions) => {
                for q in questions {
                    store.append_question(q)?;
                }
                succeeded += 1;
            }
            Err(reason) => {
                log::warn!("gap in {}: {reason}", result.key);
                gaps += 1;
            }
        }
    }
    drop(results);
    finish_phase(store, PHASE_GENERATE, total, succeeded, gaps, started, config)
}

// ── answering ────────────────────────────────────────────────────────────

/// Has every respondent answer every question. Grounded categories get
/// retrieval snippets as hidden context; retrieval failure degrades to an
/// ungrounded answer with a note, never a gap.
pub async fn answer_phase(
    store: &mut RunStore,
    registry: &ProviderRegistry,
    config: &PipelineConfig,
) -> Result<PhaseRecord, PhaseError> {
    let manifest = store.manifest().clone();
    let questions: Vec<Question> = store.questions().to_vec();
    let retrieval = registry.retrieval();
    let started = Instant::now();
    let mut tasks: Vec<TaskFuture<Answer>> = Vec::new();
    let mut total = 0usize;
    let mut resumed = 0usize;
    for spec in &manifest.cohort {
        if !spec.roles.contains(&Role::Respondent) {
            continue;
        }
        for question in &questions {
            total += 1;
            if store.has_answer(&spec.model_id, &question.question_id) {
                resumed += 1;
                continue;
            }
            let provider = registry.chat_for(&spec.model_id)?;
            let retrieval = retrieval.clone();
            let respondent = spec.model_id.clone();
            let question = question.clone();
            let seed = manifest.seed;
            let retry = config.retry.clone();
            let temperature = config.answer_temperature;
            let retrieval_results = config.retrieval_results;
            tasks.push(Box::pin(async move {
                let key = format!("{PHASE_ANSWER}/{respondent}/{}", question.question_id);
                let outcome = async {
                    let mut rng = derived_rng(
                        seed,
                        &[
                            "retry",
                            PHASE_ANSWER,
                            respondent.as_str(),
                            question.question_id.as_str(),
                        ],
                    );
                    let mut grounding_used = false;
                    let mut grounding_snippets: Vec<String> = Vec::new();
                    let mut grounding_note = None;
                    let mut system_text = None;
                    if question.category.grounded() {
                        match &retrieval {
                            Some(engine) => {
                                let search = with_retry(&retry, &mut rng, |_| {
                                    let engine = engine.clone();
                                    let query = question.text.clone();
                                    async move { engine.search(&query, retrieval_results).await }
                                })
                                .await;
                                match search {
                                    Ok(hits) if !hits.is_empty() => {
                                        grounding_used = true;
                                        system_text = Some(prompts::grounding_context(&hits));
                                        grounding_snippets =
                                            hits.iter().map(|h| h.snippet.clone()).collect();
                                    }
                                    Ok(_) => {
                                        grounding_note =
                                            Some("retrieval returned no results".to_string());
                                    }
                                    Err(e) => {
                                        grounding_note = Some(format!("retrieval failed: {e}"));
                                    }
                                }
                            }
                            None => {
                                grounding_note =
                                    Some("no retrieval provider configured".to_string());
                            }
                        }
                    }
                    let request = ChatRequest {
                        model_id: respondent.clone(),
                        system_text,
                        user_text: prompts::answer_prompt(&question.text),
                        temperature,
                        max_tokens: None,
                    };
                    let response = chat_with_retry(&provider, &retry, &mut rng, &request)
                        .await
                        .map_err(|e| e.to_string())?;
                    let char_count = response.text.chars().count() as u64;
                    Ok(Answer {
                        question_id: question.question_id.clone(),
                        respondent_id: respondent.clone(),
                        text: response.text,
                        latency_ms: response.latency_ms,
                        grounding_used,
                        grounding_snippets,
                        grounding_note,
                        completion_tokens: response.completion_tokens,
                        char_count,
                    })
                }
                .await;
                TaskResult { key, outcome }
            }));
        }
    }

    let mut gaps = 0usize;
    let mut succeeded = resumed;
    let mut results = stream::iter(tasks).buffered(config.buffer.max(1));
    while let Some(result) = results.next().await {
        match result.outcome {
            Ok(answer) => {
                store.append_answer(answer)?;
                succeeded += 1;
            }
            Err(reason) => {
                log::warn!("gap in {}: {reason}", result.key);
                gaps += 1;
            }
        }
    }
    drop(results);
    finish_phase(store, PHASE_ANSWER, total, succeeded, gaps, started, config)
}

// ── judging ──────────────────────────────────────────────────────────────

struct JudgingTaskSpec {
    evaluator: ModelId,
    question_id: QuestionId,
    question_text: String,
    answers: Vec<AnswerForJudging>,
}

/// Core judging loop shared by the peer and benchmark variants. Note the
/// provider type: [`JudgingProviders`] carries no retrieval client.
async fn run_judging<Append>(
    store: &mut RunStore,
    providers: &JudgingProviders,
    regime: Regime,
    phase_name: &str,
    specs: Vec<(JudgingTaskSpec, bool)>,
    config: &PipelineConfig,
    seed: u64,
    mut append: Append,
) -> Result<PhaseRecord, PhaseError>
where
    Append: FnMut(&mut RunStore, EvaluationRecord) -> Result<(), StoreError>,
{
    let started = Instant::now();
    let mut tasks: Vec<TaskFuture<Vec<EvaluationRecord>>> = Vec::new();
    let mut total = 0usize;
    let mut resumed = 0usize;
    for (spec, already_done) in specs {
        total += 1;
        if already_done {
            resumed += 1;
            continue;
        }
        let provider = providers.chat_for(&spec.evaluator)?;
        let retry = config.retry.clone();
        let temperature = config.judge_temperature;
        let phase = phase_name.to_string();
        tasks.push(Box::pin(async move {
            let key = format!("{phase}/{}/{}", spec.evaluator, spec.question_id);
            let outcome = async {
                let presentation = JudgingPresentation::build(
                    regime,
                    &spec.evaluator,
                    &spec.question_id,
                    &spec.answers,
                    seed,
                );
                let prompt = prompts::judge_prompt(
                    &spec.question_text,
                    &presentation.responses_block(),
                    presentation.label_example(),
                );
                let expected = presentation.labels();
                let mut rng = derived_rng(
                    seed,
                    &[
                        "retry",
                        &phase,
                        spec.evaluator.as_str(),
                        spec.question_id.as_str(),
                    ],
                );
                let request = ChatRequest {
                    model_id: spec.evaluator.clone(),
                    system_text: None,
                    user_text: prompt.clone(),
                    temperature,
                    max_tokens: None,
                };
                let response = chat_with_retry(&provider, &retry, &mut rng, &request)
                    .await
                    .map_err(|e| e.to_string())?;
                let parsed = match parse_verdicts(&response.text, &expected) {
                    Ok(parsed) => parsed,
                    Err(err) => {
                        log::warn!(
                            "invalid verdicts from {} on {}: {err}",
                            spec.evaluator,
                            spec.question_id
                        );
                        let corrective = ChatRequest {
                            user_text: prompts::corrective_reask(&prompt, &err.to_string()),
                            ..request.clone()
                        };
                        let second = chat_with_retry(&provider, &retry, &mut rng, &corrective)
                            .await
                            .map_err(|e| e.to_string())?;
                        parse_verdicts(&second.text, &expected)
                            .map_err(|e| format!("after corrective re-ask: {e}"))?
                    }
                };
                for diagnostic in &parsed.diagnostics {
                    log::info!(
                        "verdict diagnostic from {} on {}: {diagnostic}",
                        spec.evaluator,
                        spec.question_id
                    );
                }
                let records = parsed
                    .entries
                    .iter()
                    .map(|entry| {
                        let shown = presentation
                            .response_for_label(&entry.label)
                            .expect("parsed labels are exactly the presented labels");
                        EvaluationRecord {
                            regime,
                            evaluator_id: spec.evaluator.clone(),
                            evaluatee_id: shown.evaluatee_id.clone(),
                            question_id: spec.question_id.clone(),
                            score: entry.score,
                            reason: entry.reason.clone(),
                            flags: entry.flags.clone(),
                            displayed_position: shown.position,
                            displayed_label: entry.label.clone(),
                        }
                    })
                    .collect();
                Ok(records)
            }
            .await;
            TaskResult { key, outcome }
        }));
    }

    let mut gaps = 0usize;
    let mut succeeded = resumed;
    let mut results = stream::iter(tasks).buffered(config.buffer.max(1));
    while let Some(result) = results.next().await {
        match result.outcome {
            Ok(records) => {
                for record in records {
                    append(store, record)?;
                }
                succeeded += 1;
            }
            Err(reason) => {
                log::warn!("gap in {}: {reason}", result.key);
                gaps += 1;
            }
        }
    }
    drop(results);
    finish_phase(store, phase_name, total, succeeded, gaps, started, config)
}

/// Answers for one question in canonical cohort order, with display names.
fn answers_for_judging(
    manifest: &crate::types::RunManifest,
    answers: &[Answer],
) -> BTreeMap<QuestionId, Vec<AnswerForJudging>> {
    let mut by_key: BTreeMap<(&QuestionId, &ModelId), &Answer> = BTreeMap::new();
    for answer in answers {
        by_key.insert((&answer.question_id, &answer.respondent_id), answer);
    }
    let mut out: BTreeMap<QuestionId, Vec<AnswerForJudging>> = BTreeMap::new();
    let question_ids: std::collections::BTreeSet<&QuestionId> =
        answers.iter().map(|a| &a.question_id).collect();
    for qid in question_ids {
        let mut list = Vec::new();
        for spec in &manifest.cohort {
            if let Some(answer) = by_key.get(&(qid, &spec.model_id)) {
                list.push(AnswerForJudging {
                    respondent_id: spec.model_id.clone(),
                    display_name: spec.display_name.clone(),
                    text: answer.text.clone(),
                });
            }
        }
        out.insert(qid.clone(), list);
    }
    out
}

/// Runs one judging regime over the endogenous corpus: every judge scores
/// every question's full answer set (its own answer included) in a single
/// prompt, without any retrieval capability.
pub async fn judge_phase(
    store: &mut RunStore,
    providers: &JudgingProviders,
    regime: Regime,
    config: &PipelineConfig,
) -> Result<PhaseRecord, PhaseError> {
    let manifest = store.manifest().clone();
    let by_question = answers_for_judging(&manifest, store.answers());
    let mut specs = Vec::new();
    for spec in &manifest.cohort {
        if !spec.roles.contains(&Role::Judge) {
            continue;
        }
        for question in store.questions() {
            let Some(answers) = by_question.get(&question.question_id) else {
                continue;
            };
            if answers.is_empty() {
                continue;
            }
            let done = answers.iter().all(|a| {
                store.has_evaluation(regime, &spec.model_id, &a.respondent_id, &question.question_id)
            });
            specs.push((
                JudgingTaskSpec {
                    evaluator: spec.model_id.clone(),
                    question_id: question.question_id.clone(),
                    question_text: question.text.clone(),
                    answers: answers.clone(),
                },
                done,
            ));
        }
    }
    let phase_name = judge_phase_name(regime);
    run_judging(
        store,
        providers,
        regime,
        &phase_name,
        specs,
        config,
        manifest.seed,
        |store, record| store.append_evaluation(record).map(|_| ()),
    )
    .await
}

// ── benchmark phases ─────────────────────────────────────────────────────

/// Has every respondent answer every benchmark item. Benchmark answering
/// is closed-world: no retrieval, whatever the item's category.
pub async fn benchmark_answer_phase(
    store: &mut RunStore,
    registry: &ProviderRegistry,
    config: &PipelineConfig,
) -> Result<PhaseRecord, PhaseError> {
    let manifest = store.manifest().clone();
    let items = store.benchmark_items().to_vec();
    let started = Instant::now();
    let mut tasks: Vec<TaskFuture<Answer>> = Vec::new();
    let mut total = 0usize;
    let mut resumed = 0usize;
    for spec in &manifest.cohort {
        if !spec.roles.contains(&Role::Respondent) {
            continue;
        }
        for item in &items {
            total += 1;
            if store.has_benchmark_answer(&spec.model_id, &item.question_id) {
                resumed += 1;
                continue;
            }
            let provider = registry.chat_for(&spec.model_id)?;
            let respondent = spec.model_id.clone();
            let item = item.clone();
            let seed = manifest.seed;
            let retry = config.retry.clone();
            let temperature = config.answer_temperature;
            tasks.push(Box::pin(async move {
                let key = format!("{PHASE_BENCHMARK_ANSWER}/{respondent}/{}", item.question_id);
                let outcome = async {
                    let mut rng = derived_rng(
                        seed,
                        &[
                            "retry",
                            PHASE_BENCHMARK_ANSWER,
                            respondent.as_str(),
                            item.question_id.as_str(),
                        ],
                    );
                    let request = ChatRequest {
                        model_id: respondent.clone(),
                        system_text: None,
                        user_text: groundtruth::benchmark_prompt(&item),
                        temperature,
                        max_tokens: None,
                    };
                    let response = chat_with_retry(&provider, &retry, &mut rng, &request)
                        .await
                        .map_err(|e| e.to_string())?;
                    let char_count = response.text.chars().count() as u64;
                    Ok(Answer {
                        question_id: item.question_id.clone(),
                        respondent_id: respondent.clone(),
                        text: response.text,
                        latency_ms: response.latency_ms,
                        grounding_used: false,
                        grounding_snippets: vec![],
                        grounding_note: None,
                        completion_tokens: response.completion_tokens,
                        char_count,
                    })
                }
                .await;
                TaskResult { key, outcome }
            }));
        }
    }

    let mut gaps = 0usize;
    let mut succeeded = resumed;
    let mut results = stream::iter(tasks).buffered(config.buffer.max(1));
    while let Some(result) = results.next().await {
        match result.outcome {
            Ok(answer) => {
                store.append_benchmark_answer(answer)?;
                succeeded += 1;
            }
            Err(reason) => {
                log::warn!("gap in {}: {reason}", result.key);
                gaps += 1;
            }
        }
    }
    drop(results);
    finish_phase(
        store,
        PHASE_BENCHMARK_ANSWER,
        total,
        succeeded,
        gaps,
        started,
        config,
    )
}

/// Judges all benchmark answers under the ranking baseline regime
/// (shuffled, blind). The judge sees the full item text — including
/// multiple-choice options — so correctness is assessable.
pub async fn benchmark_judge_phase(
    store: &mut RunStore,
    providers: &JudgingProviders,
    config: &PipelineConfig,
) -> Result<PhaseRecord, PhaseError> {
    let manifest = store.manifest().clone();
    let regime = Regime::BASELINE;
    let by_question = answers_for_judging(&manifest, store.benchmark_answers());
    let mut specs = Vec::new();
    for spec in &manifest.cohort {
        if !spec.roles.contains(&Role::Judge) {
            continue;
        }
        for item in store.benchmark_items() {
            let Some(answers) = by_question.get(&item.question_id) else {
                continue;
            };
            if answers.is_empty() {
                continue;
            }
            let done = store.has_benchmark_judging_task(&spec.model_id, &item.question_id);
            specs.push((
                JudgingTaskSpec {
                    evaluator: spec.model_id.clone(),
                    question_id: item.question_id.clone(),
                    question_text: groundtruth::benchmark_prompt(item),
                    answers: answers.clone(),
                },
                done,
            ));
        }
    }
    run_judging(
        store,
        providers,
        regime,
        PHASE_BENCHMARK_JUDGE,
        specs,
        config,
        manifest.seed,
        |store, record| store.append_benchmark_evaluation(record).map(|_| ()),
    )
    .await
}

/// Runs the full pipeline in order: generate, answer, judge each
/// configured regime, then the benchmark phases when items are loaded.
pub async fn run_pipeline(
    store: &mut RunStore,
    registry: &ProviderRegistry,
    config: &PipelineConfig,
) -> Result<(), PhaseError> {
    generate_phase(store, registry, config).await?;
    answer_phase(store, registry, config).await?;
    let judging = registry.judging_view();
    for regime in store.manifest().regimes.clone() {
        judge_phase(store, &judging, regime, config).await?;
    }
    if !store.benchmark_items().is_empty() {
        benchmark_answer_phase(store, registry, config).await?;
        benchmark_judge_phase(store, &judging, config).await?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::presentation::parse_responses_block;
    use crate::providers::testing::{reply, CannedRetrievalProvider, ScriptedChatProvider};
    use crate::providers::{RetrievalProvider, RetrievalResult};
    use crate::types::{ModelSpec, RunManifest};

    fn manifest(k: usize, questions_total: usize) -> RunManifest {
        RunManifest {
            run_id: "phase-test".into(),
            seed: 11,
            cohort: (0..k)
                .map(|i| {
                    ModelSpec::new(
                        format!("model_{i}"),
                        "stub",
                        format!("Display {i}"),
                    )
                })
                .collect(),
            categories: Category::ALL.to_vec(),
            questions_total,
            regimes: Regime::ALL.to_vec(),
            grounding_provider: "canned".into(),
            phase_state: Default::default(),
        }
    }

    fn question_list_json_with_offset(n: usize, offset: usize) -> String {
        let categories = [
            "factual knowledge",
            "reasoning / logic",
            "current events",
            "creative / open-ended",
            "practical how-to",
        ];
        let entries: Vec<String> = (0..n)
            .map(|i| {
                format!(
                    "{{\"category\": \"{}\", \"question\": \"Sample question number {i}?\"}}",
                    categories[(i + offset) % categories.len()]
                )
            })
            .collect();
        format!("{{\"questions\": [{}]}}", entries.join(", "))
    }

    fn question_list_json(n: usize) -> String {
        question_list_json_with_offset(n, 0)
    }

    /// Generators whose category choices rotate per author, so small
    /// corpora still cover several categories (author `i` starts at the
    /// `i`-th category).
    fn generator_registry(k: usize, per_author: usize) -> ProviderRegistry {
        let mut registry = ProviderRegistry::new();
        for i in 0..k {
            let provider = ScriptedChatProvider::new("stub", move |_, _| {
                reply(question_list_json_with_offset(per_author, i))
            });
            registry.insert_chat(ModelId::from(format!("model_{i}")), provider);
        }
        registry
    }

    fn store_in(dir: &std::path::Path, manifest: RunManifest) -> RunStore {
        RunStore::create(dir, manifest).unwrap()
    }

    #[tokio::test]
    async fn generation_persists_the_full_corpus_in_canonical_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = store_in(dir.path(), manifest(2, 4));
        let registry = generator_registry(2, 2);
        let record = generate_phase(&mut store, &registry, &PipelineConfig::default())
            .await
            .unwrap();
        assert_eq!(record.status, PhaseStatus::Complete);
        assert_eq!(record.tasks_total, 2);
        assert_eq!(record.succeeded, 2);
        let ids: Vec<String> = store
            .questions()
            .iter()
            .map(|q| q.question_id.to_string())
            .collect();
        assert_eq!(
            ids,
            vec![
                "q_model_0_0000",
                "q_model_0_0001",
                "q_model_1_0000",
                "q_model_1_0001"
            ]
        );
    }

    #[tokio::test]
    async fn generation_recovers_via_corrective_reask() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = store_in(dir.path(), manifest(2, 4));
        let mut registry = ProviderRegistry::new();
        let wayward = ScriptedChatProvider::new("stub", move |_, request| {
            if request.user_text.contains("Your previous reply was invalid") {
                reply(question_list_json(2))
            } else {
                reply("I'd rather chat about the weather.")
            }
        });
        registry.insert_chat(ModelId::from("model_0"), wayward.clone());
        registry.insert_chat(
            ModelId::from("model_1"),
            ScriptedChatProvider::new("stub", |_, _| reply(question_list_json(2))),
        );
        let record = generate_phase(&mut store, &registry, &PipelineConfig::default())
            .await
            .unwrap();
        assert_eq!(record.status, PhaseStatus::Complete);
        assert_eq!(store.questions().len(), 4);
        // One refused reply, then the corrective re-ask succeeded.
        assert_eq!(wayward.call_count(), 2);
    }

    #[tokio::test]
    async fn persistent_generation_failure_gaps_and_trips_the_rate_limit() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = store_in(dir.path(), manifest(2, 4));
        let mut registry = ProviderRegistry::new();
        registry.insert_chat(
            ModelId::from("model_0"),
            ScriptedChatProvider::constant("stub", "no json here"),
        );
        registry.insert_chat(
            ModelId::from("model_1"),
            ScriptedChatProvider::new("stub", |_, _| reply(question_list_json(2))),
        );
        let err = generate_phase(&mut store, &registry, &PipelineConfig::default())
            .await
            .unwrap_err();
        match err {
            PhaseError::GapRate { gaps, total, .. } => {
                assert_eq!(gaps, 1);
                assert_eq!(total, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        // The healthy generator's questions persisted and the phase state
        // records the partial outcome.
        assert_eq!(store.questions().len(), 2);
        assert_eq!(store.phase(PHASE_GENERATE).unwrap().status, PhaseStatus::Partial);
        assert_eq!(store.phase(PHASE_GENERATE).unwrap().gaps, 1);
    }

    async fn seeded_store_with_answers(
        dir: &std::path::Path,
    ) -> (RunStore, ProviderRegistry, Arc<CannedRetrievalProvider>) {
        let mut store = store_in(dir, manifest(3, 3));
        let registry = generator_registry(3, 1);
        generate_phase(&mut store, &registry, &PipelineConfig::default())
            .await
            .unwrap();
        let mut registry = ProviderRegistry::new();
        for i in 0..3 {
            let provider = ScriptedChatProvider::new("stub", move |_, request| {
                let question = request.user_text.lines().last().unwrap_or("");
                reply(format!("Answer from model_{i} to: {question}"))
            });
            registry.insert_chat(ModelId::from(format!("model_{i}")), provider);
        }
        let retrieval = CannedRetrievalProvider::new(
            "canned",
            vec![RetrievalResult {
                title: "Current events digest".into(),
                url: "https://news.example/today".into(),
                snippet: "Fresh coverage of the event in question.".into(),
            }],
        );
        registry.set_retrieval(retrieval.clone());
        (store, registry, retrieval)
    }

    #[tokio::test]
    async fn answering_grounds_only_the_grounded_category() {
        let dir = tempfile::tempdir().unwrap();
        let (mut store, registry, retrieval) = seeded_store_with_answers(dir.path()).await;
        let record = answer_phase(&mut store, &registry, &PipelineConfig::default())
            .await
            .unwrap();
        assert_eq!(record.status, PhaseStatus::Complete);
        assert_eq!(record.tasks_total, 9);
        assert_eq!(store.answers().len(), 9);
        // The three authors wrote one question each with distinct
        // categories (round-robin over the fixture list): exactly one is
        // `current events`, answered by all three respondents.
        let grounded_questions: Vec<&Question> = store
            .questions()
            .iter()
            .filter(|q| q.category.grounded())
            .collect();
        assert_eq!(grounded_questions.len(), 1);
        assert_eq!(retrieval.queries().len(), 3);
        for answer in store.answers() {
            let question = store
                .questions()
                .iter()
                .find(|q| q.question_id == answer.question_id)
                .unwrap();
            assert_eq!(answer.grounding_used, question.category.grounded());
            if answer.grounding_used {
                assert_eq!(
                    answer.grounding_snippets,
                    vec!["Fresh coverage of the event in question.".to_string()]
                );
            } else {
                assert!(answer.grounding_snippets.is_empty());
            }
            assert_eq!(answer.char_count, answer.text.chars().count() as u64);
        }
    }

    #[tokio::test]
    async fn retrieval_failure_degrades_to_ungrounded_with_note() {
        struct FailingRetrieval;
        #[async_trait::async_trait]
        impl RetrievalProvider for FailingRetrieval {
            fn provider_id(&self) -> &str {
                "failing"
            }
            async fn search(
                &self,
                _query: &str,
                _max_results: usize,
            ) -> Result<Vec<RetrievalResult>, crate::providers::ProviderError> {
                Err(crate::providers::ProviderError::Auth {
                    message: "key revoked".into(),
                })
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let (mut store, mut registry, _) = seeded_store_with_answers(dir.path()).await;
        registry.set_retrieval(Arc::new(FailingRetrieval));
        let record = answer_phase(&mut store, &registry, &PipelineConfig::default())
            .await
            .unwrap();
        assert_eq!(record.status, PhaseStatus::Complete);
        let grounded_answers: Vec<&Answer> = store
            .answers()
            .iter()
            .filter(|a| a.grounding_note.is_some())
            .collect();
        assert_eq!(grounded_answers.len(), 3);
        for answer in grounded_answers {
            assert!(!answer.grounding_used);
            assert!(answer.grounding_snippets.is_empty());
            assert!(answer.grounding_note.as_ref().unwrap().contains("retrieval failed"));
        }
    }

    #[tokio::test]
    async fn answer_phase_resumes_without_repeating_calls() {
        let dir = tempfile::tempdir().unwrap();
        let (mut store, registry, _) = seeded_store_with_answers(dir.path()).await;
        answer_phase(&mut store, &registry, &PipelineConfig::default())
            .await
            .unwrap();
        // Reopen the store fresh from disk and run again with counting
        // providers: everything resumes, nothing is called.
        drop(store);
        let mut store = RunStore::open(dir.path()).unwrap();
        let mut counting = ProviderRegistry::new();
        let provider = ScriptedChatProvider::constant("stub", "should never be called");
        for i in 0..3 {
            counting.insert_chat(ModelId::from(format!("model_{i}")), provider.clone());
        }
        let record = answer_phase(&mut store, &counting, &PipelineConfig::default())
            .await
            .unwrap();
        assert_eq!(record.succeeded, 9);
        assert_eq!(provider.call_count(), 0);
    }

    /// A judge handler that scores by display position: first shown gets
    /// 9, then 8, 7, ... — enough structure to verify record wiring.
    fn position_scoring_judge() -> Arc<ScriptedChatProvider> {
        ScriptedChatProvider::new("stub", |_, request| {
            let pairs = parse_responses_block(&request.user_text)
                .expect("judge prompt must contain a parseable responses block");
            let entries: Vec<String> = pairs
                .iter()
                .enumerate()
                .map(|(i, (label, _text))| {
                    format!(
                        "\"{}\": {{\"score\": {}, \"reason\": \
                         \"Position based fixture score covering roughly ten words of rationale text here.\", \
                         \"flags\": []}}",
                        label,
                        9 - i.min(8)
                    )
                })
                .collect();
            reply(format!("{{{}}}", entries.join(", ")))
        })
    }

    async fn judged_store(
        dir: &std::path::Path,
        regime: Regime,
    ) -> (RunStore, Arc<CannedRetrievalProvider>) {
        let (mut store, registry, retrieval) = seeded_store_with_answers(dir).await;
        answer_phase(&mut store, &registry, &PipelineConfig::default())
            .await
            .unwrap();
        let mut judge_registry = ProviderRegistry::new();
        for i in 0..3 {
            judge_registry.insert_chat(
                ModelId::from(format!("model_{i}")),
                position_scoring_judge(),
            );
        }
        // Give the judge registry a retrieval client on purpose: the
        // judging view must drop it, so judging adds zero queries.
        judge_registry.set_retrieval(retrieval.clone());
        let before = retrieval.queries().len();
        let judging = judge_registry.judging_view();
        judge_phase(&mut store, &judging, regime, &PipelineConfig::default())
            .await
            .unwrap();
        assert_eq!(retrieval.queries().len(), before);
        (store, retrieval)
    }

    #[tokio::test]
    async fn judging_records_positions_labels_and_scores() {
        let dir = tempfile::tempdir().unwrap();
        let (store, _) = judged_store(dir.path(), Regime::ShuffleBlind).await;
        let records = store.evaluations(Regime::ShuffleBlind);
        // 3 judges x 3 questions x 3 evaluatees.
        assert_eq!(records.len(), 27);
        for record in records {
            assert!(record.displayed_label.starts_with("Response "));
            assert_eq!(record.score as usize, 10 - record.displayed_position);
            assert!((1..=3).contains(&record.displayed_position));
        }
        // Self-evaluations are present (the diagonal is retained).
        assert!(records
            .iter()
            .any(|r| r.evaluator_id == r.evaluatee_id));
    }

    #[tokio::test]
    async fn visible_regime_records_display_names_as_labels() {
        let dir = tempfile::tempdir().unwrap();
        let (store, _) = judged_store(dir.path(), Regime::ShuffleOnly).await;
        let records = store.evaluations(Regime::ShuffleOnly);
        assert_eq!(records.len(), 27);
        for record in records {
            assert!(record.displayed_label.starts_with("Display "));
        }
    }

    #[tokio::test]
    async fn judge_verdict_failures_gap_without_partial_records() {
        let dir = tempfile::tempdir().unwrap();
        let (mut store, registry, _) = seeded_store_with_answers(dir.path()).await;
        answer_phase(&mut store, &registry, &PipelineConfig::default())
            .await
            .unwrap();
        let mut judge_registry = ProviderRegistry::new();
        // model_0 refuses; others behave.
        judge_registry.insert_chat(
            ModelId::from("model_0"),
            ScriptedChatProvider::constant("stub", "no scores from me"),
        );
        for i in 1..3 {
            judge_registry.insert_chat(
                ModelId::from(format!("model_{i}")),
                position_scoring_judge(),
            );
        }
        let judging = judge_registry.judging_view();
        let mut config = PipelineConfig::default();
        config.max_gap_rate = 0.5;
        let record = judge_phase(&mut store, &judging, Regime::ShuffleBlind, &config)
            .await
            .unwrap();
        assert_eq!(record.tasks_total, 9);
        assert_eq!(record.gaps, 3);
        let records = store.evaluations(Regime::ShuffleBlind);
        assert_eq!(records.len(), 18);
        assert!(records.iter().all(|r| r.evaluator_id != ModelId::from("model_0")));
    }

    #[tokio::test]
    async fn benchmark_phases_answer_and_judge_items() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = store_in(dir.path(), manifest(2, 2));
        store
            .append_benchmark_item(crate::groundtruth::BenchmarkItem {
                question_id: QuestionId::benchmark("t0"),
                kind: crate::groundtruth::BenchmarkKind::MultipleChoice,
                category: Category::FactualKnowledge,
                text: "Which option is correct?".into(),
                choices: vec!["first".into(), "second".into()],
                key: "B".into(),
            })
            .unwrap();
        let mut registry = ProviderRegistry::new();
        for i in 0..2 {
            let provider = ScriptedChatProvider::new("stub", move |_, request| {
                if request.user_text.starts_with("You are grading") {
                    let pairs = parse_responses_block(&request.user_text).unwrap();
                    let entries: Vec<String> = pairs
                        .iter()
                        .map(|(label, _)| {
                            format!(
                                "\"{label}\": {{\"score\": 7, \"reason\": \
                                 \"Correct answer choice selected with a clear and short justification given.\", \
                                 \"flags\": []}}"
                            )
                        })
                        .collect();
                    reply(format!("{{{}}}", entries.join(", ")))
                } else {
                    reply(format!("B. Because option two is right, says model_{i}."))
                }
            });
            registry.insert_chat(ModelId::from(format!("model_{i}")), provider);
        }
        benchmark_answer_phase(&mut store, &registry, &PipelineConfig::default())
            .await
            .unwrap();
        assert_eq!(store.benchmark_answers().len(), 2);
        let judging = registry.judging_view();
        benchmark_judge_phase(&mut store, &judging, &PipelineConfig::default())
            .await
            .unwrap();
        // 2 judges x 1 item x 2 evaluatees.
        assert_eq!(store.benchmark_evaluations().len(), 4);
        let tensor = store.load_benchmark_tensor().unwrap();
        assert_eq!(tensor.len(), 4);
    }

    #[tokio::test]
    async fn full_pipeline_runs_end_to_end_via_run_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = store_in(dir.path(), manifest(2, 2));
        let mut registry = ProviderRegistry::new();
        for i in 0..2 {
            let provider = ScriptedChatProvider::new("stub", move |_, request| {
                if request.user_text.starts_with("Generate exactly") {
                    reply(question_list_json(1))
                } else if request.user_text.starts_with("You are grading") {
                    let pairs = parse_responses_block(&request.user_text).unwrap();
                    let entries: Vec<String> = pairs
                        .iter()
                        .map(|(label, _)| {
                            format!(
                                "\"{label}\": {{\"score\": 6, \"reason\": \
                                 \"Adequate response with reasonable coverage and one noticeable gap in detail.\", \
                                 \"flags\": []}}"
                            )
                        })
                        .collect();
                    reply(format!("{{{}}}", entries.join(", ")))
                } else {
                    reply(format!("A direct answer from model_{i}."))
                }
            });
            registry.insert_chat(ModelId::from(format!("model_{i}")), provider);
        }
        registry.set_retrieval(CannedRetrievalProvider::new("canned", vec![]));
        run_pipeline(&mut store, &registry, &PipelineConfig::default())
            .await
            .unwrap();
        assert_eq!(store.questions().len(), 2);
        assert_eq!(store.answers().len(), 4);
        for regime in Regime::ALL {
            assert_eq!(store.evaluations(regime).len(), 8);
            assert_eq!(
                store.phase(&judge_phase_name(regime)).unwrap().status,
                PhaseStatus::Complete
            );
        }
    }
}
