//! The evaluation pipeline: prompt construction, response presentation,
//! strict verdict parsing, and the resumable phase conductor that drives
//! generation, answering, and judging.

pub mod extract;
pub mod phases;
pub mod presentation;
pub mod prompts;
pub mod verdicts;
