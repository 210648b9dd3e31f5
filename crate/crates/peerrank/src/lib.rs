//! Autonomous peer evaluation for language-model cohorts.
//!
//! A cohort of K models runs a symmetric tournament: every model writes
//! questions, answers every question in the pooled corpus (with web grounding
//! for the current-events slice only), and then judges every answer under
//! controlled presentation regimes that toggle answer-order shuffling and
//! author anonymisation. The resulting K x K x N score tensor feeds
//! aggregation, bias quantification (self / name / position), Elo ranking,
//! and validation against ground-truth benchmarks. A fully deterministic
//! simulated cohort with known latent qualities and injected biases serves
//! as the test oracle for every estimator.

pub mod elo;
pub mod groundtruth;
pub mod metrics;
pub mod pipeline;
pub mod providers;
pub mod report;
pub mod sim;
pub mod stats;
pub mod store;
pub mod tensor;
pub mod types;
pub mod util;
