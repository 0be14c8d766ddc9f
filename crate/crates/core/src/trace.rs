//! Decode traces shared by baseline and lookahead decoders.

use serde::{Deserialize, Serialize};

use crate::state::{SequenceState, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commit {
    pub pos: usize,
    pub token: TokenId,
}

/// What happened at one denoising step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    /// Step counter `t` before the step ran.
    pub t: usize,
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pool: Vec<usize>,
    /// Candidate commits, one list per path (or per particle under SMC).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub proposals: Vec<Vec<Commit>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scores: Vec<f64>,
    /// Normalized selection weights.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<f64>,
    /// Chosen path (NIS) or resampled ancestors (SMC).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selected: Vec<usize>,
    /// Tokens committed on the returned sequence's lineage, ascending position.
    pub commits: Vec<Commit>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub steps: Vec<StepTrace>,
    /// Model predictions requested by the decoder.
    pub backend_calls: u64,
}

impl DecodeTrace {
    pub fn commits(&self) -> impl Iterator<Item = &Commit> {
        self.steps.iter().flat_map(|s| s.commits.iter())
    }

    pub fn commit_count(&self) -> usize {
        self.steps.iter().map(|s| s.commits.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutput {
    pub state: SequenceState,
    pub trace: DecodeTrace,
    /// Final weighted particle system (SMC only), weights normalized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<Vec<(SequenceState, f64)>>,
}
