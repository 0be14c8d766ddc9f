use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::PredictiveField;
use crate::lookum::proposal::PathProposal;
use crate::models::ModelBackend;
use crate::score::{entropy_unchecked, max_prob};
use crate::state::SequenceState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifierMeasure {
    AvgNegativeEntropy,
    AvgConfidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifierScope {
    AllPositions,
    MaskedOnly,
}

/// Sequence-level certainty of a look-ahead state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifierKind {
    pub measure: VerifierMeasure,
    pub scope: VerifierScope,
}

impl Default for VerifierKind {
    fn default() -> Self {
        Self { measure: VerifierMeasure::AvgNegativeEntropy, scope: VerifierScope::AllPositions }
    }
}

impl VerifierKind {
    pub fn new(measure: VerifierMeasure, scope: VerifierScope) -> Self {
        Self { measure, scope }
    }

    fn position_score(&self, row: &[f64]) -> f64 {
        match self.measure {
            VerifierMeasure::AvgNegativeEntropy => -entropy_unchecked(row),
            VerifierMeasure::AvgConfidence => max_prob(row),
        }
    }
}

/// Average certainty of `field` (predicted at `state`) over the verifier scope.
///
/// `masked_only` with nothing masked yields the certainty of a point mass:
/// 0 for negative entropy, 1 for confidence.
pub fn aggregate(field: &PredictiveField, state: &SequenceState, kind: VerifierKind) -> f64 {
    let positions: Vec<usize> = match kind.scope {
        VerifierScope::AllPositions => (0..field.len()).collect(),
        VerifierScope::MaskedOnly => state.masked_indices(),
    };
    if positions.is_empty() {
        return match kind.measure {
            VerifierMeasure::AvgNegativeEntropy => 0.0,
            VerifierMeasure::AvgConfidence => 1.0,
        };
    }
    let total: f64 = positions.iter().map(|&i| kind.position_score(field.row(i))).sum();
    total / positions.len() as f64
}

/// Score a proposal by the model's certainty one step ahead. One backend call.
pub fn verify<B: ModelBackend + ?Sized>(backend: &B, proposal: &PathProposal, kind: VerifierKind) -> Result<f64> {
    let field = backend.predict(&proposal.state)?;
    Ok(aggregate(&field, &proposal.state, kind))
}

/// Score several proposals with one batched backend request.
pub fn verify_batch<B: ModelBackend + ?Sized>(
    backend: &B,
    proposals: &[PathProposal],
    kind: VerifierKind,
) -> Result<Vec<f64>> {
    Ok(verify_with_fields(backend, proposals, kind)?.0)
}

/// As [`verify_batch`], also returning the one-step-ahead fields.
pub(crate) fn verify_with_fields<B: ModelBackend + ?Sized>(
    backend: &B,
    proposals: &[PathProposal],
    kind: VerifierKind,
) -> Result<(Vec<f64>, Vec<PredictiveField>)> {
    let states: Vec<SequenceState> = proposals.iter().map(|p| p.state.clone()).collect();
    let fields = backend.predict_batch(&states)?;
    let scores = fields.iter().zip(&states).map(|(f, s)| aggregate(f, s, kind)).collect();
    Ok((scores, fields))
}
