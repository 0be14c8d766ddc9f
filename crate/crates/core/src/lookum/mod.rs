//! Lookahead unmasking: candidate path generation, sequence-level
//! verification, and importance-sampling selection among paths.

mod decode;
mod pool;
mod proposal;
mod select;
mod verifier;

pub use decode::{decode_lookum, decode_lookum_with_reward, LookumConfig};
pub use pool::{build_pool, PoolKind, PoolPolicy};
pub use proposal::{propose_paths, PathProposal};
pub use select::{
    nis_select, selection_probabilities, smc_step, systematic_resample, Particle, SchemeKind, SelectionScheme,
    SmcStep,
};
pub use verifier::{aggregate, verify, verify_batch, VerifierKind, VerifierMeasure, VerifierScope};
