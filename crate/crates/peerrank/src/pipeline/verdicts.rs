//! Strict parsing of judge replies. Location is tolerant (prose and code
//! fences around the JSON are fine); content is not: every presented
//! label exactly once, exactly the three required keys per entry, integer
//! scores in range. Violations are collected exhaustively so a corrective
//! re-ask can cite all of them at once.

use std::fmt;

use serde_json::Value;

use crate::pipeline::extract::{duplicate_top_level_keys, first_balanced_object};
use crate::types::{Flag, SCORE_MAX, SCORE_MIN};
use crate::util::word_count;

/// Reasons must stay within this word range; out-of-range reasons are a
/// soft diagnostic, not a parse failure.
pub const REASON_MIN_WORDS: usize = 8;
pub const REASON_MAX_WORDS: usize = 20;

/// One contract breach in a judge reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerdictViolation {
    NoJsonObject,
    InvalidJson { detail: String },
    NotAnObject,
    DuplicateLabel { label: String },
    MissingLabel { label: String },
    UnexpectedLabel { label: String },
    EntryNotObject { label: String },
    MissingKey { label: String, key: &'static str },
    ForbiddenKey { label: String, key: String },
    ScoreNotInteger { label: String },
    ScoreOutOfRange { label: String, got: i64 },
    ReasonNotString { label: String },
    FlagsNotArray { label: String },
    FlagNotString { label: String },
}

impl fmt::Display for VerdictViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerdictViolation::NoJsonObject => {
                write!(f, "no JSON object found in the reply")
            }
            VerdictViolation::InvalidJson { detail } => {
                write!(f, "the JSON object does not parse: {detail}")
            }
            VerdictViolation::NotAnObject => {
                write!(f, "top-level JSON value is not an object")
            }
            VerdictViolation::DuplicateLabel { label } => {
                write!(f, "label {label:?} appears more than once")
            }
            VerdictViolation::MissingLabel { label } => {
                write!(f, "missing an entry for label {label:?}")
            }
            VerdictViolation::UnexpectedLabel { label } => {
                write!(f, "entry for unknown label {label:?}")
            }
            VerdictViolation::EntryNotObject { label } => {
                write!(f, "entry for {label:?} is not an object")
            }
            VerdictViolation::MissingKey { label, key } => {
                write!(f, "entry for {label:?} is missing the {key:?} key")
            }
            VerdictViolation::ForbiddenKey { label, key } => {
                write!(f, "entry for {label:?} has a forbidden extra key {key:?}")
            }
            VerdictViolation::ScoreNotInteger { label } => {
                write!(f, "score for {label:?} is not an integer")
            }
            VerdictViolation::ScoreOutOfRange { label, got } => {
                write!(
                    f,
                    "score for {label:?} is {got}, outside {SCORE_MIN}-{SCORE_MAX}"
                )
            }
            VerdictViolation::ReasonNotString { label } => {
                write!(f, "reason for {label:?} is not a string")
            }
            VerdictViolation::FlagsNotArray { label } => {
                write!(f, "flags for {label:?} is not an array")
            }
            VerdictViolation::FlagNotString { label } => {
                write!(f, "flags for {label:?} contain a non-string element")
            }
        }
    }
}

/// A rejected judge reply, listing every violation found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerdictError {
    pub violations: Vec<VerdictViolation>,
}

impl fmt::Display for VerdictError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for VerdictError {}

/// One accepted per-label verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerdictEntry {
    pub label: String,
    pub score: u8,
    pub reason: String,
    /// Recognized flags, deduplicated, in first-occurrence order.
    pub flags: Vec<Flag>,
    pub reason_word_count: usize,
    /// True when the reason fell outside the 8-20 word contract; recorded
    /// but not fatal.
    pub reason_length_violation: bool,
}

/// A fully accepted judge reply: one entry per expected label, in the
/// presented order, plus soft diagnostics (dropped unknown flags,
/// out-of-range reason lengths).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedVerdicts {
    pub entries: Vec<VerdictEntry>,
    pub diagnostics: Vec<String>,
}

/// Parses a raw judge reply against the labels that were presented.
pub fn parse_verdicts(raw: &str, expected_labels: &[String]) -> Result<ParsedVerdicts, VerdictError> {
    let mut violations = Vec::new();
    let Some(span) = first_balanced_object(raw) else {
        return Err(VerdictError {
            violations: vec![VerdictViolation::NoJsonObject],
        });
    };
    for label in duplicate_top_level_keys(span) {
        violations.push(VerdictViolation::DuplicateLabel { label });
    }
    let value: Value = match serde_json::from_str(span) {
        Ok(v) => v,
        Err(e) => {
            violations.push(VerdictViolation::InvalidJson {
                detail: e.to_string(),
            });
            return Err(VerdictError { violations });
        }
    };
    let Some(map) = value.as_object() else {
        violations.push(VerdictViolation::NotAnObject);
        return Err(VerdictError { violations });
    };

    for label in expected_labels {
        if !map.contains_key(label) {
            violations.push(VerdictViolation::MissingLabel {
                label: label.clone(),
            });
        }
    }
    for key in map.keys() {
        if !expected_labels.iter().any(|l| l == key) {
            violations.push(VerdictViolation::UnexpectedLabel { label: key.clone() });
        }
    }

    let mut diagnostics = Vec::new();
    let mut entries = Vec::new();
    for label in expected_labels {
        let Some(entry) = map.get(label) else {
            continue;
        };
        let Some(fields) = entry.as_object() else {
            violations.push(VerdictViolation::EntryNotObject {
                label: label.clone(),
            });
            continue;
        };
        let mut entry_ok = true;
        for key in fields.keys() {
            if !matches!(key.as_str(), "score" | "reason" | "flags") {
                violations.push(VerdictViolation::ForbiddenKey {
                    label: label.clone(),
                    key: key.clone(),
                });
                entry_ok = false;
            }
        }

        let score = match fields.get("score") {
            None => {
                violations.push(VerdictViolation::MissingKey {
                    label: label.clone(),
                    key: "score",
                });
                entry_ok = false;
                None
            }
            Some(v) => match v.as_i64() {
                // `as_i64` is `None` for floats like 7.5, strings, etc.
                None => {
                    violations.push(VerdictViolation::ScoreNotInteger {
                        label: label.clone(),
                    });
                    entry_ok = false;
                    None
                }
                Some(n) if !(SCORE_MIN as i64..=SCORE_MAX as i64).contains(&n) => {
                    violations.push(VerdictViolation::ScoreOutOfRange {
                        label: label.clone(),
                        got: n,
                    });
                    entry_ok = false;
                    None
                }
                Some(n) => Some(n as u8),
            },
        };

        let reason = match fields.get("reason") {
            None => {
                violations.push(VerdictViolation::MissingKey {
                    label: label.clone(),
                    key: "reason",
                });
                entry_ok = false;
                None
            }
            Some(v) => match v.as_str() {
                None => {
                    violations.push(VerdictViolation::ReasonNotString {
                        label: label.clone(),
                    });
                    entry_ok = false;
                    None
                }
                Some(s) => Some(s.to_string()),
            },
        };

        let mut flags = Vec::new();
        match fields.get("flags") {
            None => {
                violations.push(VerdictViolation::MissingKey {
                    label: label.clone(),
                    key: "flags",
                });
                entry_ok = false;
            }
            Some(v) => match v.as_array() {
                None => {
                    violations.push(VerdictViolation::FlagsNotArray {
                        label: label.clone(),
                    });
                    entry_ok = false;
                }
                Some(items) => {
                    for item in items {
                        let Some(s) = item.as_str() else {
                            violations.push(VerdictViolation::FlagNotString {
                                label: label.clone(),
                            });
                            entry_ok = false;
                            continue;
                        };
                        match Flag::parse(s) {
                            Some(flag) if flags.contains(&flag) => {
                                diagnostics.push(format!(
                                    "dropped duplicate flag {s:?} on {label:?}"
                                ));
                            }
                            Some(flag) => flags.push(flag),
                            None => {
                                diagnostics.push(format!(
                                    "dropped unknown flag {s:?} on {label:?}"
                                ));
                            }
                        }
                    }
                }
            },
        }

        if entry_ok {
            let reason = reason.unwrap_or_default();
            let reason_word_count = word_count(&reason);
            let reason_length_violation =
                !(REASON_MIN_WORDS..=REASON_MAX_WORDS).contains(&reason_word_count);
            if reason_length_violation {
                diagnostics.push(format!(
                    "reason for {label:?} is {reason_word_count} words, outside \
                     {REASON_MIN_WORDS}-{REASON_MAX_WORDS}"
                ));
            }
            entries.push(VerdictEntry {
                label: label.clone(),
                score: score.unwrap_or(SCORE_MIN),
                reason,
                flags,
                reason_word_count,
                reason_length_violation,
            });
        }
    }

    if violations.is_empty() {
        Ok(ParsedVerdicts {
            entries,
            diagnostics,
        })
    } else {
        Err(VerdictError { violations })
    }
}
