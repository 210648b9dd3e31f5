//! Durable run persistence: a run directory holding the manifest plus
//! append-only JSONL transcripts, one file per phase (and per regime for
//! judging).
//!
//! Layout inside a run directory:
//!
//! ```text
//! manifest.json                      single JSON document, atomically rewritten
//! questions.jsonl                    generation phase
//! answers.jsonl                      answering phase
//! evaluations_<regime>.jsonl         judging phase, one file per regime
//! benchmark_items.jsonl              imported ground-truth items (validate mode)
//! benchmark_answers.jsonl            closed-world benchmark answers
//! benchmark_evaluations.jsonl        benchmark judging (shuffle+blind)
//! reports/                           derived artifacts
//! ```
//!
//! Appends are idempotent on natural keys — questions by id, answers by
//! (respondent, question), evaluations by (evaluator, evaluatee, question,
//! regime) — so replaying a completed phase never duplicates a row. A run
//! directory has a single writer at a time (the store takes no OS lock; the
//! CLI runs one process per run directory).

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::groundtruth::BenchmarkItem;
use crate::tensor::{ScoreTensor, TensorError};
use crate::types::{
    Answer, EvaluationRecord, ModelId, PhaseRecord, Question, QuestionId, Regime, RunManifest,
    ValidationError,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const QUESTIONS_FILE: &str = "questions.jsonl";
pub const ANSWERS_FILE: &str = "answers.jsonl";
pub const BENCHMARK_ITEMS_FILE: &str = "benchmark_items.jsonl";
pub const BENCHMARK_ANSWERS_FILE: &str = "benchmark_answers.jsonl";
pub const BENCHMARK_EVALUATIONS_FILE: &str = "benchmark_evaluations.jsonl";
pub const REPORTS_DIR: &str = "reports";

/// Transcript file name for one judging regime.
pub fn evaluations_file(regime: Regime) -> String {
    format!("evaluations_{}.jsonl", regime.name())
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON at {path}:{line}: {source}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("run directory {0} already contains a manifest")]
    AlreadyInitialized(PathBuf),
    #[error("run directory {0} has no manifest; initialize the run first")]
    NotInitialized(PathBuf),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("record references {field} {value} not present in this run")]
    UnknownReference { field: &'static str, value: String },
    #[error("regime {0} is not configured for this run")]
    UnknownRegime(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Outcome of an idempotent append: the record's stable id and whether a new
/// row was written (false when the natural key already existed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppendOutcome {
    pub record_id: String,
    pub created: bool,
}

/// An open run directory: manifest plus all transcripts, loaded eagerly,
/// with append handles for each transcript file.
pub struct RunStore {
    dir: PathBuf,
    manifest: RunManifest,
    questions: Vec<Question>,
    answers: Vec<Answer>,
    evaluations: BTreeMap<Regime, Vec<EvaluationRecord>>,
    benchmark_items: Vec<BenchmarkItem>,
    benchmark_answers: Vec<Answer>,
    benchmark_evaluations: Vec<EvaluationRecord>,
    question_keys: BTreeSet<QuestionId>,
    answer_keys: BTreeSet<(ModelId, QuestionId)>,
    evaluation_keys: BTreeSet<(Regime, ModelId, ModelId, QuestionId)>,
    benchmark_item_keys: BTreeSet<QuestionId>,
    benchmark_answer_keys: BTreeSet<(ModelId, QuestionId)>,
    benchmark_evaluation_keys: BTreeSet<(ModelId, ModelId, QuestionId)>,
}

impl std::fmt::Debug for RunStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunStore")
            .field("dir", &self.dir)
            .field("run_id", &self.manifest.run_id)
            .field("questions", &self.questions.len())
            .field("answers", &self.answers.len())
            .field(
                "evaluations",
                &self.evaluations.values().map(Vec::len).sum::<usize>(),
            )
            .field("benchmark_items", &self.benchmark_items.len())
            .finish_non_exhaustive()
    }
}

impl RunStore {
    /// Initializes a fresh run directory with the given manifest.
    pub fn create(dir: impl AsRef<Path>, manifest: RunManifest) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        manifest.validate()?;
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        if manifest_path.exists() {
            return Err(StoreError::AlreadyInitialized(dir));
        }
        write_manifest(&dir, &manifest)?;
        Self::open(dir)
    }

    /// Opens an existing run directory, loading the manifest and every
    /// transcript into memory. A torn trailing line (no final newline, from
    /// an interrupted write) is dropped with a warning; any other malformed
    /// line is an error.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        let manifest_path = dir.join(MANIFEST_FILE);
        if !manifest_path.exists() {
            return Err(StoreError::NotInitialized(dir));
        }
        let manifest = read_manifest(&manifest_path)?;
        manifest.validate()?;

        let mut store = Self {
            dir,
            manifest,
            questions: Vec::new(),
            answers: Vec::new(),
            evaluations: BTreeMap::new(),
            benchmark_items: Vec::new(),
            benchmark_answers: Vec::new(),
            benchmark_evaluations: Vec::new(),
            question_keys: BTreeSet::new(),
            answer_keys: BTreeSet::new(),
            evaluation_keys: BTreeSet::new(),
            benchmark_item_keys: BTreeSet::new(),
            benchmark_answer_keys: BTreeSet::new(),
            benchmark_evaluation_keys: BTreeSet::new(),
        };

        for q in read_jsonl::<Question>(&store.dir.join(QUESTIONS_FILE))? {
            store.index_question(q)?;
        }
        store.sort_questions();
        for a in read_jsonl::<Answer>(&store.dir.join(ANSWERS_FILE))? {
            store.index_answer(a)?;
        }
        for regime in store.manifest.regimes.clone() {
            let path = store.dir.join(evaluations_file(regime));
            for rec in read_jsonl::<EvaluationRecord>(&path)? {
                store.index_evaluation(rec)?;
            }
        }
        for item in read_jsonl::<BenchmarkItem>(&store.dir.join(BENCHMARK_ITEMS_FILE))? {
            store.index_benchmark_item(item)?;
        }
        for a in read_jsonl::<Answer>(&store.dir.join(BENCHMARK_ANSWERS_FILE))? {
            store.index_benchmark_answer(a)?;
        }
        for rec in read_jsonl::<EvaluationRecord>(&store.dir.join(BENCHMARK_EVALUATIONS_FILE))? {
            store.index_benchmark_evaluation(rec)?;
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.dir.join(REPORTS_DIR)
    }

    /// Records completion state for a phase and atomically rewrites the
    /// manifest.
    pub fn set_phase(&mut self, phase: &str, record: PhaseRecord) -> Result<(), StoreError> {
        self.manifest.phase_state.insert(phase.to_string(), record);
        write_manifest(&self.dir, &self.manifest)
    }

    pub fn phase(&self, phase: &str) -> Option<&PhaseRecord> {
        self.manifest.phase_state.get(phase)
    }

    // ── corpus access ────────────────────────────────────────────────────

    /// Questions in canonical corpus order: cohort order of the author,
    /// then the author's own numbering.
    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn answers(&self) -> &[Answer] {
        &self.answers
    }

    pub fn evaluations(&self, regime: Regime) -> &[EvaluationRecord] {
        self.evaluations.get(&regime).map_or(&[], |v| v.as_slice())
    }

    pub fn benchmark_items(&self) -> &[BenchmarkItem] {
        &self.benchmark_items
    }

    pub fn benchmark_answers(&self) -> &[Answer] {
        &self.benchmark_answers
    }

    pub fn benchmark_evaluations(&self) -> &[EvaluationRecord] {
        &self.benchmark_evaluations
    }

    pub fn has_question(&self, id: &QuestionId) -> bool {
        self.question_keys.contains(id)
    }

    pub fn has_answer(&self, respondent: &ModelId, question: &QuestionId) -> bool {
        self.answer_keys
            .contains(&(respondent.clone(), question.clone()))
    }

    pub fn has_evaluation(
        &self,
        regime: Regime,
        evaluator: &ModelId,
        evaluatee: &ModelId,
        question: &QuestionId,
    ) -> bool {
        self.evaluation_keys.contains(&(
            regime,
            evaluator.clone(),
            evaluatee.clone(),
            question.clone(),
        ))
    }

    /// True when the judge already produced any verdict for this
    /// (evaluator, question) slice — one judging call covers all evaluatees,
    /// so any surviving record marks the task done.
    pub fn has_judging_task(
        &self,
        regime: Regime,
        evaluator: &ModelId,
        question: &QuestionId,
    ) -> bool {
        self.evaluations(regime)
            .iter()
            .any(|r| &r.evaluator_id == evaluator && &r.question_id == question)
    }

    pub fn has_benchmark_answer(&self, respondent: &ModelId, question: &QuestionId) -> bool {
        self.benchmark_answer_keys
            .contains(&(respondent.clone(), question.clone()))
    }

    pub fn has_benchmark_judging_task(&self, evaluator: &ModelId, question: &QuestionId) -> bool {
        self.benchmark_evaluations
            .iter()
            .any(|r| &r.evaluator_id == evaluator && &r.question_id == question)
    }

    // ── appends ──────────────────────────────────────────────────────────

    /// Appends a generated question; idempotent on question id.
    pub fn append_question(&mut self, question: Question) -> Result<AppendOutcome, StoreError> {
        question.validate()?;
        if self.manifest.spec(&question.author_id).is_none() {
            return Err(StoreError::UnknownReference {
                field: "author_id",
                value: question.author_id.to_string(),
            });
        }
        let record_id = question.question_id.to_string();
        if self.question_keys.contains(&question.question_id) {
            return Ok(AppendOutcome {
                record_id,
                created: false,
            });
        }
        append_line(&self.dir.join(QUESTIONS_FILE), &question)?;
        self.index_question(question)?;
        self.sort_questions();
        Ok(AppendOutcome {
            record_id,
            created: true,
        })
    }

    /// Appends an answer; idempotent on (respondent, question).
    pub fn append_answer(&mut self, answer: Answer) -> Result<AppendOutcome, StoreError> {
        answer.validate()?;
        if self.manifest.spec(&answer.respondent_id).is_none() {
            return Err(StoreError::UnknownReference {
                field: "respondent_id",
                value: answer.respondent_id.to_string(),
            });
        }
        if !self.question_keys.contains(&answer.question_id) {
            return Err(StoreError::UnknownReference {
                field: "question_id",
                value: answer.question_id.to_string(),
            });
        }
        let key = (answer.respondent_id.clone(), answer.question_id.clone());
        let record_id = format!("{}/{}", answer.question_id, answer.respondent_id);
        if self.answer_keys.contains(&key) {
            return Ok(AppendOutcome {
                record_id,
                created: false,
            });
        }
        append_line(&self.dir.join(ANSWERS_FILE), &answer)?;
        self.index_answer(answer)?;
        Ok(AppendOutcome {
            record_id,
            created: true,
        })
    }

    /// Appends a judgment; idempotent on (evaluator, evaluatee, question,
    /// regime).
    pub fn append_evaluation(
        &mut self,
        record: EvaluationRecord,
    ) -> Result<AppendOutcome, StoreError> {
        record.validate()?;
        if !self.manifest.regimes.contains(&record.regime) {
            return Err(StoreError::UnknownRegime(record.regime.name().to_string()));
        }
        for (field, id) in [
            ("evaluator_id", &record.evaluator_id),
            ("evaluatee_id", &record.evaluatee_id),
        ] {
            if self.manifest.spec(id).is_none() {
                return Err(StoreError::UnknownReference {
                    field,
                    value: id.to_string(),
                });
            }
        }
        if !self.question_keys.contains(&record.question_id) {
            return Err(StoreError::UnknownReference {
                field: "question_id",
                value: record.question_id.to_string(),
            });
        }
        let key = (
            record.regime,
            record.evaluator_id.clone(),
            record.evaluatee_id.clone(),
            record.question_id.clone(),
        );
        let record_id = format!(
            "{}/{}/{}/{}",
            record.regime, record.evaluator_id, record.evaluatee_id, record.question_id
        );
        if self.evaluation_keys.contains(&key) {
            return Ok(AppendOutcome {
                record_id,
                created: false,
            });
        }
        append_line(&self.dir.join(evaluations_file(record.regime)), &record)?;
        self.index_evaluation(record)?;
        Ok(AppendOutcome {
            record_id,
            created: true,
        })
    }

    /// Appends an imported benchmark item; idempotent on item id.
    pub fn append_benchmark_item(
        &mut self,
        item: BenchmarkItem,
    ) -> Result<AppendOutcome, StoreError> {
        item.validate()?;
        let record_id = item.question_id.to_string();
        if self.benchmark_item_keys.contains(&item.question_id) {
            return Ok(AppendOutcome {
                record_id,
                created: false,
            });
        }
        append_line(&self.dir.join(BENCHMARK_ITEMS_FILE), &item)?;
        self.index_benchmark_item(item)?;
        Ok(AppendOutcome {
            record_id,
            created: true,
        })
    }

    /// Appends a closed-world benchmark answer; idempotent on
    /// (respondent, item).
    pub fn append_benchmark_answer(&mut self, answer: Answer) -> Result<AppendOutcome, StoreError> {
        answer.validate()?;
        if self.manifest.spec(&answer.respondent_id).is_none() {
            return Err(StoreError::UnknownReference {
                field: "respondent_id",
                value: answer.respondent_id.to_string(),
            });
        }
        if !self.benchmark_item_keys.contains(&answer.question_id) {
            return Err(StoreError::UnknownReference {
                field: "question_id",
                value: answer.question_id.to_string(),
            });
        }
        let key = (answer.respondent_id.clone(), answer.question_id.clone());
        let record_id = format!("bench/{}/{}", answer.question_id, answer.respondent_id);
        if self.benchmark_answer_keys.contains(&key) {
            return Ok(AppendOutcome {
                record_id,
                created: false,
            });
        }
        append_line(&self.dir.join(BENCHMARK_ANSWERS_FILE), &answer)?;
        self.index_benchmark_answer(answer)?;
        Ok(AppendOutcome {
            record_id,
            created: true,
        })
    }

    /// Appends a benchmark judgment (always shuffle+blind); idempotent on
    /// (evaluator, evaluatee, item).
    pub fn append_benchmark_evaluation(
        &mut self,
        record: EvaluationRecord,
    ) -> Result<AppendOutcome, StoreError> {
        record.validate()?;
        for (field, id) in [
            ("evaluator_id", &record.evaluator_id),
            ("evaluatee_id", &record.evaluatee_id),
        ] {
            if self.manifest.spec(id).is_none() {
                return Err(StoreError::UnknownReference {
                    field,
                    value: id.to_string(),
                });
            }
        }
        if !self.benchmark_item_keys.contains(&record.question_id) {
            return Err(StoreError::UnknownReference {
                field: "question_id",
                value: record.question_id.to_string(),
            });
        }
        let key = (
            record.evaluator_id.clone(),
            record.evaluatee_id.clone(),
            record.question_id.clone(),
        );
        let record_id = format!(
            "bench/{}/{}/{}",
            record.evaluator_id, record.evaluatee_id, record.question_id
        );
        if self.benchmark_evaluation_keys.contains(&key) {
            return Ok(AppendOutcome {
                record_id,
                created: false,
            });
        }
        append_line(&self.dir.join(BENCHMARK_EVALUATIONS_FILE), &record)?;
        self.index_benchmark_evaluation(record)?;
        Ok(AppendOutcome {
            record_id,
            created: true,
        })
    }

    // ── tensors ──────────────────────────────────────────────────────────

    /// Builds the score tensor for one regime from its transcript. Axes come
    /// from the manifest and canonical corpus order, so an empty transcript
    /// still yields correctly-dimensioned axes.
    pub fn load_tensor(&self, regime: Regime) -> Result<ScoreTensor, StoreError> {
        if !self.manifest.regimes.contains(&regime) {
            return Err(StoreError::UnknownRegime(regime.name().to_string()));
        }
        let questions: Vec<QuestionId> =
            self.questions.iter().map(|q| q.question_id.clone()).collect();
        Ok(ScoreTensor::from_records(
            regime,
            self.manifest.model_ids(),
            questions,
            self.evaluations(regime).iter(),
        )?)
    }

    /// Score tensor over benchmark items (judged shuffle+blind).
    pub fn load_benchmark_tensor(&self) -> Result<ScoreTensor, StoreError> {
        let questions: Vec<QuestionId> = self
            .benchmark_items
            .iter()
            .map(|i| i.question_id.clone())
            .collect();
        Ok(ScoreTensor::from_records(
            Regime::ShuffleBlind,
            self.manifest.model_ids(),
            questions,
            self.benchmark_evaluations.iter(),
        )?)
    }

    // ── internal indexing ────────────────────────────────────────────────

    fn index_question(&mut self, q: Question) -> Result<(), StoreError> {
        if self.question_keys.insert(q.question_id.clone()) {
            self.questions.push(q);
        }
        Ok(())
    }

    fn sort_questions(&mut self) {
        let order: BTreeMap<ModelId, usize> = self
            .manifest
            .cohort
            .iter()
            .enumerate()
            .map(|(i, m)| (m.model_id.clone(), i))
            .collect();
        self.questions.sort_by(|a, b| {
            let ka = (order.get(&a.author_id).copied().unwrap_or(usize::MAX), &a.question_id);
            let kb = (order.get(&b.author_id).copied().unwrap_or(usize::MAX), &b.question_id);
            ka.cmp(&kb)
        });
    }

    fn index_answer(&mut self, a: Answer) -> Result<(), StoreError> {
        let key = (a.respondent_id.clone(), a.question_id.clone());
        if self.answer_keys.insert(key) {
            self.answers.push(a);
        }
        Ok(())
    }

    fn index_evaluation(&mut self, rec: EvaluationRecord) -> Result<(), StoreError> {
        let key = (
            rec.regime,
            rec.evaluator_id.clone(),
            rec.evaluatee_id.clone(),
            rec.question_id.clone(),
        );
        if self.evaluation_keys.insert(key) {
            self.evaluations.entry(rec.regime).or_default().push(rec);
        }
        Ok(())
    }

    fn index_benchmark_item(&mut self, item: BenchmarkItem) -> Result<(), StoreError> {
        if self.benchmark_item_keys.insert(item.question_id.clone()) {
            self.benchmark_items.push(item);
        }
        Ok(())
    }

    fn index_benchmark_answer(&mut self, a: Answer) -> Result<(), StoreError> {
        let key = (a.respondent_id.clone(), a.question_id.clone());
        if self.benchmark_answer_keys.insert(key) {
            self.benchmark_answers.push(a);
        }
        Ok(())
    }

    fn index_benchmark_evaluation(&mut self, rec: EvaluationRecord) -> Result<(), StoreError> {
        let key = (
            rec.evaluator_id.clone(),
            rec.evaluatee_id.clone(),
            rec.question_id.clone(),
        );
        if self.benchmark_evaluation_keys.insert(key) {
            self.benchmark_evaluations.push(rec);
        }
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_manifest(path: &Path) -> Result<RunManifest, StoreError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Manifest(e.to_string()))
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), StoreError> {
    let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
    let target = dir.join(MANIFEST_FILE);
    let body = serde_json::to_string_pretty(manifest)
        .map_err(|e| StoreError::Manifest(e.to_string()))?;
    fs::write(&tmp, body.as_bytes()).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, &target).map_err(|e| io_err(&target, e))?;
    Ok(())
}

/// Reads a JSONL transcript. A missing file is an empty transcript. A torn
/// final line (interrupted append: unparseable and missing its newline) is
/// dropped with a warning; malformed interior lines are hard errors.
fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut line_no = 0usize;
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(|e| io_err(path, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let terminated = buf.ends_with('\n');
        let trimmed = buf.trim_end_matches(['\n', '\r']);
        if trimmed.is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(trimmed) {
            Ok(v) => out.push(v),
            Err(source) => {
                if !terminated {
                    log::warn!(
                        "dropping torn final line {line_no} of {} (interrupted write)",
                        path.display()
                    );
                    break;
                }
                return Err(StoreError::MalformedLine {
                    path: path.to_path_buf(),
                    line: line_no,
                    source,
                });
            }
        }
    }
    Ok(out)
}

fn append_line<T: serde::Serialize>(path: &Path, record: &T) -> Result<(), StoreError> {
    let mut line = serde_json::to_string(record).expect("record types serialize infallibly");
    line.push('\n');
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    file.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
    file.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}
