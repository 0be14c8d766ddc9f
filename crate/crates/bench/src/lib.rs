//! Shared fixtures for the decoding benchmarks.

use lookum::bench::{generate_instance, TaskInstance, TaskKind, TaskSpec};
use lookum::models::OracleSupport;
use lookum::{SequenceState, Vocabulary};

/// Instance 0 of the default task family `kind`.
pub fn instance(kind: TaskKind) -> TaskInstance {
    generate_instance(&TaskSpec::new(kind, 1, 7), 0).expect("default specs generate")
}

/// Every binary sequence of length `len`, uniformly weighted, with a fully
/// masked prompt: the largest support an oracle predict must scan.
pub fn binary_cube(len: usize) -> (OracleSupport, SequenceState) {
    let v = Vocabulary::with_trailing_mask(2).expect("two tokens");
    let seqs = (0..1u32 << len).map(|i| (0..len).map(|b| (i >> b) & 1).collect()).collect();
    (OracleSupport::uniform(v, seqs).expect("valid support"), SequenceState::masked(len, 2))
}
