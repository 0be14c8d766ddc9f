//! Per-position certainty scores.
//!
//! Every score is oriented so that larger means more certain.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{validate_row, PredictiveField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Largest probability in the row.
    Confidence,
    /// Gap between the two largest probabilities.
    Margin,
    /// Negated Shannon entropy.
    NegativeEntropy,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [ScoreKind::Confidence, ScoreKind::Margin, ScoreKind::NegativeEntropy];
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(row: &[f64]) -> Result<f64> {
    validate_row(row)?;
    Ok(entropy_unchecked(row))
}

pub(crate) fn entropy_unchecked(row: &[f64]) -> f64 {
    -row.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

pub(crate) fn max_prob(row: &[f64]) -> f64 {
    row.iter().copied().fold(0.0, f64::max)
}

fn top_two(row: &[f64]) -> (f64, f64) {
    let (mut first, mut second) = (0.0_f64, 0.0_f64);
    for &p in row {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    (first, second)
}

pub fn score(row: &[f64], kind: ScoreKind) -> Result<f64> {
    validate_row(row)?;
    Ok(score_unchecked(row, kind))
}

pub(crate) fn score_unchecked(row: &[f64], kind: ScoreKind) -> f64 {
    match kind {
        ScoreKind::Confidence => max_prob(row),
        ScoreKind::Margin => {
            // A single-entry row has no runner-up; its margin is the top mass.
            let (a, b) = top_two(row);
            a - b
        }
        ScoreKind::NegativeEntropy => -entropy_unchecked(row),
    }
}

/// Masked positions ordered by descending score, ascending position on ties.
pub fn rank_masked(field: &PredictiveField, masked: &[usize], kind: ScoreKind) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = masked
        .iter()
        .map(|&i| (i, score_unchecked(field.row(i), kind)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    scored.into_iter().map(|(i, _)| i).collect()
}

/// Sharpen (`tau < 1`) or flatten (`tau > 1`) a row: `p^(1/tau)` renormalized.
///
/// Computed in log space relative to the row maximum so tiny temperatures do
/// not underflow to an all-zero row.
pub fn apply_temperature(row: &[f64], tau: f64) -> Vec<f64> {
    let max = max_prob(row);
    if max <= 0.0 {
        return row.to_vec();
    }
    let ln_max = max.ln();
    let mut out: Vec<f64> = row
        .iter()
        .map(|&p| if p > 0.0 { ((p.ln() - ln_max) / tau).exp() } else { 0.0 })
        .collect();
    crate::field::renormalize(&mut out);
    out
}
