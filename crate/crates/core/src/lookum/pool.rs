use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PredictiveField;
use crate::score::{max_prob, rank_masked, ScoreKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    /// Top-`size` masked positions by `measure`.
    NBest,
    /// Masked positions whose top probability exceeds `threshold`.
    CertaintyFilter,
}

/// High-certainty candidate pool from which stochastic paths are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolPolicy {
    pub kind: PoolKind,
    pub size: usize,
    pub threshold: f64,
    pub measure: ScoreKind,
}

impl Default for PoolPolicy {
    fn default() -> Self {
        Self { kind: PoolKind::NBest, size: 5, threshold: 0.9, measure: ScoreKind::Confidence }
    }
}

impl PoolPolicy {
    pub fn n_best(size: usize, measure: ScoreKind) -> Self {
        Self { kind: PoolKind::NBest, size, measure, ..Default::default() }
    }

    pub fn certainty_filter(threshold: f64) -> Self {
        Self { kind: PoolKind::CertaintyFilter, threshold, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::invalid("pool size must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid(format!("pool threshold must lie in (0, 1), got {}", self.threshold)));
        }
        Ok(())
    }
}

/// Candidate positions for stochastic paths, most certain first.
///
/// The pool always holds at least `min(budget, |masked|)` positions: if the
/// policy admits fewer, it is topped up with the most confident remaining
/// masked positions so that a full-budget path can always be drawn.
pub fn build_pool(field: &PredictiveField, masked: &[usize], policy: &PoolPolicy, budget: usize) -> Vec<usize> {
    let by_confidence = || rank_masked(field, masked, ScoreKind::Confidence);
    let mut pool: Vec<usize> = match policy.kind {
        PoolKind::NBest => {
            let mut ranked = rank_masked(field, masked, policy.measure);
            ranked.truncate(policy.size);
            ranked
        }
        PoolKind::CertaintyFilter => by_confidence()
            .into_iter()
            .filter(|&i| max_prob(field.row(i)) > policy.threshold)
            .collect(),
    };
    let need = budget.min(masked.len());
    if pool.len() < need {
        for i in by_confidence() {
            if pool.len() >= need {
                break;
            }
            if !pool.contains(&i) {
                pool.push(i);
            }
        }
    }
    pool
}
