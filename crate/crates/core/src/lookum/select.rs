//! Selection among candidate paths: nested importance sampling (NIS) and
//! sequential Monte Carlo (SMC) with systematic resampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lookum::proposal::PathProposal;
use crate::state::SequenceState;
use crate::strategies::token_rule::sample_index;
use crate::trace::Commit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Nis,
    Smc,
}

/// Path-selection scheme. `alpha` is the KL temperature; `alpha == 0` is the
/// greedy (argmax) limit. `k` is the number of paths (NIS) or particles (SMC).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionScheme {
    pub kind: SchemeKind,
    pub alpha: f64,
    pub k: usize,
}

impl Default for SelectionScheme {
    fn default() -> Self {
        Self { kind: SchemeKind::Nis, alpha: 0.1, k: 2 }
    }
}

impl SelectionScheme {
    pub fn nis(k: usize, alpha: f64) -> Self {
        Self { kind: SchemeKind::Nis, alpha, k }
    }

    pub fn smc(k: usize, alpha: f64) -> Self {
        Self { kind: SchemeKind::Smc, alpha, k }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(self.alpha >= 0.0) || self.alpha.is_nan() {
            return Err(Error::invalid(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        Ok(())
    }
}

fn argmax_finite(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Normalized weights proportional to `exp(log_w)`; non-finite entries get 0.
fn normalize_log_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    let max = log_w.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights("no finite weight".into()));
    }
    let mut w: Vec<f64> = log_w
        .iter()
        .map(|&v| if v.is_finite() { (v - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

fn one_hot(len: usize, at: usize) -> Vec<f64> {
    let mut w = vec![0.0; len];
    w[at] = 1.0;
    w
}

/// Selection probabilities `softmax(scores / alpha)`, computed with the max
/// shift. `alpha == 0` puts all mass on the best score (lowest index on ties).
pub fn selection_probabilities(scores: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::invalid("no candidates to select from"));
    }
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("alpha must be non-negative, got {alpha}")));
    }
    if alpha == 0.0 {
        let best = argmax_finite(scores).ok_or_else(|| Error::DegenerateWeights("no finite score".into()))?;
        return Ok(one_hot(scores.len(), best));
    }
    let scaled: Vec<f64> = scores.iter().map(|&s| s / alpha).collect();
    normalize_log_weights(&scaled)
}

/// Sample a path index with probability proportional to `exp(score / alpha)`.
pub fn nis_select<R: Rng + ?Sized>(scores: &[f64], alpha: f64, rng: &mut R) -> Result<usize> {
    let probs = selection_probabilities(scores, alpha)?;
    Ok(sample_index(&probs, rng))
}

/// Ancestor indices from systematic resampling of normalized `weights`.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    let offset: f64 = rng.random::<f64>() / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut i = 0;
    for j in 0..n {
        let u = offset + j as f64 / n as f64;
        while u >= cumulative && i + 1 < n {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
    }
    out
}

/// A weighted SMC particle and the reward of its current state.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub state: SequenceState,
    pub log_weight: f64,
    pub prev_score: f64,
    /// Commits per step along this particle's lineage.
    pub history: Vec<Vec<Commit>>,
}

impl Particle {
    pub fn new(state: SequenceState, prev_score: f64) -> Self {
        Self { state, log_weight: 0.0, prev_score, history: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmcStep {
    pub particles: Vec<Particle>,
    /// Normalized weights after reweighting, before resampling.
    pub weights: Vec<f64>,
    /// Resampled ancestor of each new particle (identity when not resampling).
    pub ancestors: Vec<usize>,
}

/// Propagate each particle along its proposal, reweight by
/// `exp((s_new - s_prev) / alpha)`, and optionally resample systematically.
///
/// After resampling all particles carry equal weight.
pub fn smc_step<R: Rng + ?Sized>(
    particles: &[Particle],
    proposals: &[PathProposal],
    scores: &[f64],
    alpha: f64,
    resample: bool,
    rng: &mut R,
) -> Result<SmcStep> {
    let n = particles.len();
    if n == 0 || proposals.len() != n || scores.len() != n {
        return Err(Error::invalid(format!(
            "smc step needs one proposal and score per particle ({n} particles, {} proposals, {} scores)",
            proposals.len(),
            scores.len()
        )));
    }
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("alpha must be non-negative, got {alpha}")));
    }
    let increments: Vec<f64> = particles.iter().zip(scores).map(|(p, &s)| s - p.prev_score).collect();
    let log_w: Vec<f64> = if alpha == 0.0 {
        let best = argmax_finite(&increments).ok_or_else(|| Error::DegenerateWeights("no finite increment".into()))?;
        (0..n).map(|i| if i == best { 0.0 } else { f64::NEG_INFINITY }).collect()
    } else {
        particles
            .iter()
            .zip(&increments)
            .map(|(p, &d)| p.log_weight + d / alpha)
            .collect()
    };
    let weights = normalize_log_weights(&log_w)?;

    let propagated: Vec<Particle> = particles
        .iter()
        .zip(proposals)
        .zip(scores)
        .zip(&weights)
        .map(|(((p, prop), &s), &w)| {
            let mut history = p.history.clone();
            history.push(prop.commits.clone());
            Particle { state: prop.state.clone(), log_weight: w.ln(), prev_score: s, history }
        })
        .collect();

    if !resample {
        return Ok(SmcStep { particles: propagated, weights, ancestors: (0..n).collect() });
    }
    let ancestors = systematic_resample(&weights, rng);
    let particles = ancestors
        .iter()
        .map(|&a| Particle { log_weight: 0.0, ..propagated[a].clone() })
        .collect();
    Ok(SmcStep { particles, weights, ancestors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream;

    #[test]
    fn softmax_closed_form() {
        let p = selection_probabilities(&[0.2, 0.1], 0.1).unwrap();
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((p[0] - 0.731).abs() < 1e-3 && (p[1] - 0.269).abs() < 1e-3);
        assert_eq!(selection_probabilities(&[0.3; 4], 0.5).unwrap(), vec![0.25; 4]);
        assert_eq!(selection_probabilities(&[1.0, 0.5], 0.0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(selection_probabilities(&[0.5, 1.0, 1.0], 0.0).unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn non_finite_scores_get_no_weight() {
        let p = selection_probabilities(&[f64::NAN, 0.1, f64::INFINITY], 0.1).unwrap();
        assert_eq!(p, vec![0.0, 1.0, 0.0]);
        assert!(matches!(
            selection_probabilities(&[f64::NAN, f64::NEG_INFINITY], 0.1),
            Err(Error::DegenerateWeights(_))
        ));
        assert!(selection_probabilities(&[0.1], -1.0).is_err());
    }

    #[test]
    fn extreme_scores_do_not_overflow() {
        let p = selection_probabilities(&[1e6, 1e6 - 1e-3], 1e-9).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn smc_increment_closed_form() {
        let s = SequenceState::new(vec![0, 2], 2, 1);
        let prop = PathProposal { commits: vec![Commit { pos: 1, token: 1 }], state: s.with_commits(&[(1, 1)]).unwrap() };
        let parts = vec![Particle::new(s.clone(), 0.5), Particle::new(s, 0.5)];
        let mut rng = stream(0, 0, 0);
        let out = smc_step(&parts, &[prop.clone(), prop], &[0.7, 0.5], 0.1, false, &mut rng).unwrap();
        let ratio = out.weights[0] / out.weights[1];
        assert!((ratio - 2f64.exp()).abs() < 1e-9);
        assert!((ratio - 7.389).abs() < 1e-3);
        assert_eq!(out.particles[0].prev_score, 0.7);
    }

    #[test]
    fn systematic_resampling_expectation() {
        // Two particles with weights [0.75, 0.25]: the first point always lands
        // on particle 0, the second does with probability 1/2, so the
        // expected count is 1.5 and the count is always 1 or 2.
        let trials = 20_000;
        let mut total = 0;
        for t in 0..trials {
            let a = systematic_resample(&[0.75, 0.25], &mut stream(t, 0, 0));
            let c = a.iter().filter(|&&i| i == 0).count();
            assert!(c == 1 || c == 2);
            total += c;
        }
        let mean = total as f64 / trials as f64;
        // sd of the count is 0.5; 5 standard errors.
        assert!((mean - 1.5).abs() < 5.0 * 0.5 / (trials as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn equal_increments_resample_uniformly() {
        let base = SequenceState::new(vec![2], 2, 1);
        let parts: Vec<Particle> = (0..4).map(|_| Particle::new(base.clone(), 0.1)).collect();
        let props: Vec<PathProposal> = (0..4)
            .map(|i| PathProposal {
                commits: vec![Commit { pos: 0, token: (i % 2) as u32 }],
                state: base.with_commits(&[(0, (i % 2) as u32)]).unwrap(),
            })
            .collect();
        let out = smc_step(&parts, &props, &[0.3; 4], 0.1, true, &mut stream(3, 0, 0)).unwrap();
        assert_eq!(out.weights, vec![0.25; 4]);
        assert_eq!(out.ancestors, vec![0, 1, 2, 3]);
        assert!(out.particles.iter().all(|p| p.log_weight == 0.0));
    }

    #[test]
    fn all_degenerate_increments_fail() {
        let base = SequenceState::new(vec![2], 2, 1);
        let prop = PathProposal { commits: vec![], state: base.clone() };
        let parts = vec![Particle::new(base, 0.0)];
        let r = smc_step(&parts, &[prop], &[f64::NEG_INFINITY], 0.1, true, &mut stream(0, 0, 0));
        assert!(matches!(r, Err(Error::DegenerateWeights(_))));
    }
}
