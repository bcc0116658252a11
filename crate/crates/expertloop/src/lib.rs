//! Expert-in-the-loop augmentation of emotional-support dialogues.
//!
//! The pipeline turns a seeker/supporter corpus into reasoning-annotated
//! training data and evaluates the models trained on it:
//!
//! 1. [`corpus`] — parse, normalize, and split conversations.
//! 2. [`prompt`] — build few-shot prompts from a guideline, balanced
//!    exemplars, and conversation context under a length budget.
//! 3. [`expert`] — consult a pluggable completion backend (HTTP or mock)
//!    with retries and a content-addressed cache, and parse its free-text
//!    reasoning into emotion / cause / suggestions.
//! 4. [`annotate`] — run the expert over every turn pair and export the
//!    results as training examples.
//! 5. [`selfchat`] — let two agents talk to each other, attaching expert
//!    reasoning to every supporter turn.
//! 6. [`metrics`] — score generated reasoning with BLEU-4, ROUGE-L, and
//!    pluggable embedding / entailment / likelihood scorers.
//! 7. [`acute`] — aggregate pairwise human judgments of transcripts into
//!    per-dimension net win rates.
//!
//! [`config`] and [`commands`] wire everything into the `expertloop`
//! binary; the `examples/` directory shows each capability in isolation.

pub mod acute;
pub mod annotate;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod expert;
pub mod metrics;
pub mod parallel;
pub mod prompt;
pub mod selfchat;
