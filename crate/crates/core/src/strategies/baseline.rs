use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PredictiveField;
use crate::models::ModelBackend;
use crate::score::{rank_masked, ScoreKind};
use crate::seed::stream;
use crate::state::SequenceState;
use crate::strategies::{commit_tokens, BudgetSchedule, TokenRule};
use crate::trace::{DecodeOutput, DecodeTrace, StepTrace};

/// Position-selection rule of a baseline decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmaskOrder {
    Confidence,
    Margin,
    NegativeEntropy,
    Random,
}

impl UnmaskOrder {
    pub fn score_kind(self) -> Option<ScoreKind> {
        match self {
            UnmaskOrder::Confidence => Some(ScoreKind::Confidence),
            UnmaskOrder::Margin => Some(ScoreKind::Margin),
            UnmaskOrder::NegativeEntropy => Some(ScoreKind::NegativeEntropy),
            UnmaskOrder::Random => None,
        }
    }
}

impl From<ScoreKind> for UnmaskOrder {
    fn from(k: ScoreKind) -> Self {
        match k {
            ScoreKind::Confidence => UnmaskOrder::Confidence,
            ScoreKind::Margin => UnmaskOrder::Margin,
            ScoreKind::NegativeEntropy => UnmaskOrder::NegativeEntropy,
        }
    }
}

/// Top-`budget` masked positions by `kind`. A budget above `|masked|` is clamped.
pub fn greedy_unmask_set(field: &PredictiveField, masked: &[usize], budget: usize, kind: ScoreKind) -> Vec<usize> {
    let mut ranked = rank_masked(field, masked, kind);
    ranked.truncate(budget);
    ranked
}

/// Decode `initial` to completion with a greedy or random unmasking order.
pub fn decode_baseline<B: ModelBackend + ?Sized>(
    backend: &B,
    initial: &SequenceState,
    schedule: &BudgetSchedule,
    order: UnmaskOrder,
    rule: TokenRule,
    seed: u64,
) -> Result<DecodeOutput> {
    rule.validate()?;
    let budgets = schedule.budgets(initial.masked_count())?;
    let mut state = initial.clone();
    state.step = budgets.len();
    let mut trace = DecodeTrace::default();

    for (s, &budget) in budgets.iter().enumerate() {
        let masked = state.masked_indices();
        if masked.is_empty() {
            break;
        }
        let field = backend.predict(&state)?;
        trace.backend_calls += 1;
        let mut rng = stream(seed, s, 0);
        let budget = budget.min(masked.len());
        let mut positions = match order.score_kind() {
            Some(kind) => greedy_unmask_set(&field, &masked, budget, kind),
            None => sample(&mut rng, masked.len(), budget).into_iter().map(|i| masked[i]).collect(),
        };
        positions.sort_unstable();
        let commits = commit_tokens(&field, &positions, rule, &mut rng);
        let pairs: Vec<_> = commits.iter().map(|c| (c.pos, c.token)).collect();
        let t = state.step;
        state = state.with_commits(&pairs)?;
        trace.steps.push(StepTrace {
            t,
            budget,
            pool: Vec::new(),
            proposals: Vec::new(),
            scores: Vec::new(),
            weights: Vec::new(),
            selected: Vec::new(),
            commits,
        });
    }
    if !state.is_complete() {
        return Err(Error::Internal(format!(
            "schedule exhausted with {} masks remaining",
            state.masked_count()
        )));
    }
    Ok(DecodeOutput { state, trace, population: None })
}
