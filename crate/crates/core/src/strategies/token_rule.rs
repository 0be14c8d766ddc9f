use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{argmax, PredictiveField};
use crate::score::apply_temperature;
use crate::state::TokenId;
use crate::trace::Commit;

/// How token values are chosen once a position is selected for unmasking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TokenRule {
    Argmax,
    /// Categorical draw from the row sharpened by `temperature`.
    Sample { temperature: f64 },
}

impl Default for TokenRule {
    fn default() -> Self {
        TokenRule::Argmax
    }
}

impl TokenRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TokenRule::Sample { temperature } if !(temperature > 0.0 && temperature.is_finite()) => {
                Err(Error::invalid(format!("sampling temperature must be positive, got {temperature}")))
            }
            _ => Ok(()),
        }
    }

    pub fn pick<R: Rng + ?Sized>(&self, row: &[f64], rng: &mut R) -> TokenId {
        match *self {
            TokenRule::Argmax => argmax(row) as TokenId,
            TokenRule::Sample { temperature } => {
                let sharp = if temperature == 1.0 { row.to_vec() } else { apply_temperature(row, temperature) };
                sample_index(&sharp, rng) as TokenId
            }
        }
    }
}

/// Inverse-CDF draw from a normalized weight vector.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Draw token values for `positions` (ascending) from `field`.
pub(crate) fn commit_tokens<R: Rng + ?Sized>(
    field: &PredictiveField,
    positions: &[usize],
    rule: TokenRule,
    rng: &mut R,
) -> Vec<Commit> {
    positions
        .iter()
        .map(|&pos| Commit { pos, token: rule.pick(field.row(pos), rng) })
        .collect()
}
