//! Lookahead unmasking for masked diffusion sequence models.
//!
//! A masked diffusion decoder starts from an all-mask sequence and reveals a
//! few positions per step. Greedy decoders pick the positions the model is
//! most certain about, one step at a time. This crate instead proposes
//! several candidate unmasking paths per step, asks the model how certain it
//! would be *after* each candidate, and chooses among them by importance
//! sampling (per-step NIS or particle-based SMC).
//!
//! The crate also ships exact enumeration oracles and desk-scale tasks
//! (arithmetic, 4×4 Sudoku, Countdown) in [`bench`] so that every decoder
//! can be checked against ground truth.

pub mod bench;
pub mod error;
pub mod field;
pub mod lookum;
pub mod models;
pub mod rewards;
pub mod score;
pub mod seed;
pub mod state;
pub mod strategies;
pub mod trace;

pub use error::{Error, Result};
pub use field::PredictiveField;
pub use lookum::{decode_lookum, LookumConfig, PoolPolicy, SelectionScheme, VerifierKind};
pub use models::{ModelBackend, OracleSupport};
pub use score::{entropy, rank_masked, score, ScoreKind};
pub use state::{SequenceState, TokenId, Vocabulary};
pub use strategies::{decode_baseline, BudgetSchedule, TokenRule, UnmaskOrder};
pub use trace::{Commit, DecodeOutput, DecodeTrace, StepTrace};
