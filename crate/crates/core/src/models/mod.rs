//! Model backends: the predictive contract and its implementations.

mod oracle;
mod remote;
mod wrappers;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use oracle::{Bitset, OracleSupport, MAX_ORACLE_SEQUENCES};
pub use remote::{RemoteModel, RemoteModelConfig};
pub use wrappers::{noise_wrap, temperature_wrap, Noisy, Tempered};

use crate::error::Result;
use crate::field::PredictiveField;
use crate::state::{SequenceState, Vocabulary};

/// A masked predictor `x_t -> p(. | x_t)` for every position.
///
/// Implementations are deterministic: the same state always yields the same
/// field, and rows at observed positions are point masses on the observed token.
pub trait ModelBackend: Send + Sync {
    fn vocab(&self) -> &Vocabulary;

    fn predict(&self, state: &SequenceState) -> Result<PredictiveField>;

    /// Predict several independent states. Results are returned in input order.
    fn predict_batch(&self, states: &[SequenceState]) -> Result<Vec<PredictiveField>> {
        states.iter().map(|s| self.predict(s)).collect()
    }
}

impl<B: ModelBackend + ?Sized> ModelBackend for &B {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }
    fn predict(&self, state: &SequenceState) -> Result<PredictiveField> {
        (**self).predict(state)
    }
    fn predict_batch(&self, states: &[SequenceState]) -> Result<Vec<PredictiveField>> {
        (**self).predict_batch(states)
    }
}

impl<B: ModelBackend + ?Sized> ModelBackend for Box<B> {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }
    fn predict(&self, state: &SequenceState) -> Result<PredictiveField> {
        (**self).predict(state)
    }
    fn predict_batch(&self, states: &[SequenceState]) -> Result<Vec<PredictiveField>> {
        (**self).predict_batch(states)
    }
}

impl<B: ModelBackend + ?Sized> ModelBackend for Arc<B> {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }
    fn predict(&self, state: &SequenceState) -> Result<PredictiveField> {
        (**self).predict(state)
    }
    fn predict_batch(&self, states: &[SequenceState]) -> Result<Vec<PredictiveField>> {
        (**self).predict_batch(states)
    }
}

/// Counts predictions served by the wrapped backend.
pub struct CountingBackend<B> {
    inner: B,
    calls: AtomicU64,
}

impl<B: ModelBackend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: ModelBackend> ModelBackend for CountingBackend<B> {
    fn vocab(&self) -> &Vocabulary {
        self.inner.vocab()
    }

    fn predict(&self, state: &SequenceState) -> Result<PredictiveField> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.predict(state)
    }

    fn predict_batch(&self, states: &[SequenceState]) -> Result<Vec<PredictiveField>> {
        self.calls.fetch_add(states.len() as u64, Ordering::Relaxed);
        self.inner.predict_batch(states)
    }
}

/// Force observed positions of `field` to point masses on the observed token.
pub(crate) fn coerce_observed(field: &mut PredictiveField, state: &SequenceState) {
    for (pos, &tok) in state.tokens.iter().enumerate() {
        if tok != state.mask_id {
            let row = field.row_mut(pos);
            row.iter_mut().for_each(|p| *p = 0.0);
            if let Some(p) = row.get_mut(tok as usize) {
                *p = 1.0;
            }
        }
    }
}
