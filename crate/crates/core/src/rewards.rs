//! Rewards for reward-aligned sampling, the exact tilted target
//! `p*(x) ∝ p(x) exp(r(x) / alpha)` over an enumerable support, and
//! self-normalized importance sampling against it.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::lookum::{aggregate, VerifierKind};
use crate::models::{ModelBackend, OracleSupport};
use crate::state::{SequenceState, TokenId};

/// Largest support `brute_force_target` will enumerate.
pub const MAX_TARGET_SUPPORT: usize = 100_000;

/// A deterministic scalar reward on sequence states.
pub trait RewardFunction: Send + Sync {
    fn evaluate(&self, state: &SequenceState) -> Result<f64>;
}

impl<F> RewardFunction for F
where
    F: Fn(&SequenceState) -> f64 + Send + Sync,
{
    fn evaluate(&self, state: &SequenceState) -> Result<f64> {
        Ok(self(state))
    }
}

/// The verifier score of a state itself, used as a reward. One backend call.
pub struct VerifierReward<B> {
    backend: B,
    kind: VerifierKind,
}

pub fn verifier_as_reward<B: ModelBackend>(backend: B, kind: VerifierKind) -> VerifierReward<B> {
    VerifierReward { backend, kind }
}

impl<B: ModelBackend> RewardFunction for VerifierReward<B> {
    fn evaluate(&self, state: &SequenceState) -> Result<f64> {
        let field = self.backend.predict(state)?;
        Ok(aggregate(&field, state, self.kind))
    }
}

/// Memoizes a reward by token content. Safe to share across threads.
pub struct CachedReward<R> {
    inner: R,
    cache: Mutex<HashMap<Vec<TokenId>, f64>>,
}

impl<R: RewardFunction> CachedReward<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, cache: Mutex::new(HashMap::new()) }
    }

    pub fn cached_len(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }
}

impl<R: RewardFunction> RewardFunction for CachedReward<R> {
    fn evaluate(&self, state: &SequenceState) -> Result<f64> {
        if let Some(&v) = self.cache.lock().ok().and_then(|c| c.get(&state.tokens).copied()).as_ref() {
            return Ok(v);
        }
        let v = self.inner.evaluate(state)?;
        if let Ok(mut c) = self.cache.lock() {
            c.insert(state.tokens.clone(), v);
        }
        Ok(v)
    }
}

/// Exact tilted distribution over the support sequences, in support order.
///
/// `alpha = +inf` returns the base distribution.
pub fn brute_force_target(support: &OracleSupport, reward: &dyn RewardFunction, alpha: f64) -> Result<Vec<f64>> {
    if support.size() > MAX_TARGET_SUPPORT {
        return Err(Error::GuardExceeded { size: support.size(), limit: MAX_TARGET_SUPPORT });
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let mask = support.vocabulary().mask_id;
    let base = support.probabilities();
    let mut log_w = Vec::with_capacity(base.len());
    for (seq, &p) in support.sequences().iter().zip(&base) {
        let r = reward.evaluate(&SequenceState::new(seq.clone(), mask, 0))?;
        if !r.is_finite() {
            return Err(Error::invalid(format!("reward {r} is not finite")));
        }
        let tilt = if alpha.is_infinite() { 0.0 } else { r / alpha };
        log_w.push(p.ln() + tilt);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = log_w.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Self-normalized importance-sampling estimate of `E[f]` from values
/// `f(x_i)` and unnormalized log weights, with its delta-method standard error.
pub fn self_normalized_estimate(values: &[f64], log_weights: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() || values.len() != log_weights.len() {
        return Err(Error::invalid("need one log weight per value"));
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights("no finite importance weight".into()));
    }
    let w: Vec<f64> = log_weights.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let est = w.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / total;
    let var = w.iter().zip(values).map(|(w, v)| (w / total).powi(2) * (v - est).powi(2)).sum::<f64>();
    Ok((est, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lookum::{VerifierMeasure, VerifierScope};
    use crate::state::Vocabulary;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn two_seq() -> OracleSupport {
        let v = Vocabulary::with_trailing_mask(2).unwrap();
        OracleSupport::uniform(v, vec![vec![0, 0], vec![1, 1]]).unwrap()
    }

    #[test]
    fn closed_form_target() {
        let s = two_seq();
        let r = |st: &SequenceState| if st.tokens[0] == 0 { 1.0 } else { 0.0 };
        let t = brute_force_target(&s, &r, 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((t[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((t[1] - 1.0 / (e + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn constant_reward_and_infinite_alpha_leave_the_base() {
        let v = Vocabulary::with_trailing_mask(3).unwrap();
        let s = OracleSupport::new(v, vec![vec![0], vec![1], vec![2]], vec![1.0, 2.0, 5.0]).unwrap();
        let base = s.probabilities();
        let t = brute_force_target(&s, &|_: &SequenceState| 3.0, 0.2).unwrap();
        let r = |st: &SequenceState| st.tokens[0] as f64;
        let inf = brute_force_target(&s, &r, f64::INFINITY).unwrap();
        let big = brute_force_target(&s, &r, 1e9).unwrap();
        for i in 0..3 {
            assert!((t[i] - base[i]).abs() < 1e-12);
            assert!((inf[i] - base[i]).abs() < 1e-12);
            assert!((big[i] - base[i]).abs() < 1e-6);
        }
        assert!(brute_force_target(&s, &r, 0.0).is_err());
    }

    #[test]
    fn verifier_reward_examples() {
        let conf = VerifierKind::new(VerifierMeasure::AvgConfidence, VerifierScope::AllPositions);
        let ent = VerifierKind::new(VerifierMeasure::AvgNegativeEntropy, VerifierScope::AllPositions);
        let s = two_seq();
        let full = SequenceState::new(vec![1, 1], 2, 0);
        assert_eq!(verifier_as_reward(&s, conf).evaluate(&full).unwrap(), 1.0);

        let v = Vocabulary::with_trailing_mask(3).unwrap();
        let all: Vec<Vec<u32>> = (0..9u32).map(|i| vec![i % 3, i / 3]).collect();
        let uniform = OracleSupport::uniform(v, all).unwrap();
        let r = verifier_as_reward(&uniform, ent).evaluate(&SequenceState::masked(2, 3)).unwrap();
        assert!((r + 3f64.ln()).abs() < 1e-12);

        // Support {(0,0,1), (0,1,0)} with weights 1:3. Observing position 0
        // leaves positions 1 and 2 each split 1/4 : 3/4, so the mean row
        // entropy over three positions is 2 H(1/4, 3/4) / 3.
        let v = Vocabulary::with_trailing_mask(2).unwrap();
        let s = OracleSupport::new(v, vec![vec![0, 0, 1], vec![0, 1, 0]], vec![1.0, 3.0]).unwrap();
        let h = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        let mixed = SequenceState::new(vec![0, 2, 2], 2, 2);
        let got = verifier_as_reward(&s, ent).evaluate(&mixed).unwrap();
        assert!((got + 2.0 * h / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cache_avoids_repeat_evaluations() {
        let hits = AtomicUsize::new(0);
        let counted = |st: &SequenceState| {
            hits.fetch_add(1, Ordering::Relaxed);
            st.tokens.iter().sum::<u32>() as f64
        };
        let cached = CachedReward::new(counted);
        let s = SequenceState::new(vec![1, 2], 9, 0);
        for _ in 0..5 {
            assert_eq!(cached.evaluate(&s).unwrap(), 3.0);
        }
        assert_eq!(hits.load(Ordering::Relaxed), 1);
        assert_eq!(cached.cached_len(), 1);
    }

    #[test]
    fn affine_shift_preserves_the_greedy_choice() {
        let v = Vocabulary::with_trailing_mask(4).unwrap();
        let s = OracleSupport::new(v, vec![vec![0], vec![1], vec![2], vec![3]], vec![1.0, 1.0, 2.0, 1.0]).unwrap();
        let r = |st: &SequenceState| [0.1, 0.9, 0.5, 0.3][st.tokens[0] as usize];
        let shifted = |st: &SequenceState| 3.0 * r(st) + 7.0;
        let argmax = |t: Vec<f64>| crate::field::argmax(&t);
        let a = argmax(brute_force_target(&s, &r, 1e-4).unwrap());
        let b = argmax(brute_force_target(&s, &shifted, 1e-4).unwrap());
        assert_eq!(a, 1);
        assert_eq!(a, b);
    }
}
