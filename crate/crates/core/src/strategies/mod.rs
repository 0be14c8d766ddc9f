//! Baseline unmasking decoders and budget schedules.

mod baseline;
mod schedule;
pub(crate) mod token_rule;

pub use baseline::{decode_baseline, greedy_unmask_set, UnmaskOrder};
pub use schedule::BudgetSchedule;
pub use token_rule::TokenRule;

pub(crate) use token_rule::commit_tokens;
