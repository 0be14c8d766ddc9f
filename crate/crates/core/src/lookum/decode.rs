//! The lookahead decode loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lookum::pool::{build_pool, PoolPolicy};
use crate::lookum::proposal::{propose_one, propose_paths, PathProposal};
use crate::lookum::select::{selection_probabilities, smc_step, Particle, SchemeKind, SelectionScheme};
use crate::field::PredictiveField;
use crate::lookum::verifier::{aggregate, verify_with_fields, VerifierKind};
use crate::models::ModelBackend;
use crate::rewards::RewardFunction;
use crate::seed::{stream, LANE_RESAMPLE, LANE_SELECT};
use crate::state::SequenceState;
use crate::strategies::token_rule::sample_index;
use crate::strategies::{BudgetSchedule, TokenRule};
use crate::trace::{DecodeOutput, DecodeTrace, StepTrace};

/// Everything that parameterizes a lookahead decode except the backend and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LookumConfig {
    pub schedule: BudgetSchedule,
    pub pool: PoolPolicy,
    pub verifier: VerifierKind,
    pub scheme: SelectionScheme,
    pub token_rule: TokenRule,
    /// Make path 0 (particle 0 under SMC) the deterministic greedy path.
    pub greedy_anchor: bool,
}

impl Default for LookumConfig {
    fn default() -> Self {
        Self {
            schedule: BudgetSchedule::default(),
            pool: PoolPolicy::default(),
            verifier: VerifierKind::default(),
            scheme: SelectionScheme::default(),
            token_rule: TokenRule::default(),
            greedy_anchor: true,
        }
    }
}

impl LookumConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.pool.validate()?;
        self.scheme.validate()?;
        self.token_rule.validate()
    }
}

enum Scorer<'a> {
    Verifier(VerifierKind),
    Reward(&'a dyn RewardFunction),
}

impl Scorer<'_> {
    /// Scores per proposal, plus the one-step-ahead fields when the verifier
    /// had to compute them anyway.
    fn score<B: ModelBackend + ?Sized>(
        &self,
        backend: &B,
        proposals: &[PathProposal],
        calls: &mut u64,
    ) -> Result<(Vec<f64>, Option<Vec<PredictiveField>>)> {
        match self {
            Scorer::Verifier(kind) => {
                *calls += proposals.len() as u64;
                let (scores, fields) = verify_with_fields(backend, proposals, *kind)?;
                Ok((scores, Some(fields)))
            }
            Scorer::Reward(r) => Ok((proposals.iter().map(|p| r.evaluate(&p.state)).collect::<Result<_>>()?, None)),
        }
    }
}

/// Decode `initial` to completion with lookahead unmasking, scoring candidate
/// paths with the configured verifier.
///
/// Under NIS each step costs one prediction at the current state plus one
/// per candidate path. Under SMC each step costs one verification per
/// particle; the verification field of a particle's proposal is its
/// prediction for the next step, so only the first step adds one call.
pub fn decode_lookum<B: ModelBackend + ?Sized>(
    backend: &B,
    initial: &SequenceState,
    cfg: &LookumConfig,
    seed: u64,
) -> Result<DecodeOutput> {
    run(backend, initial, cfg, Scorer::Verifier(cfg.verifier), seed)
}

/// As [`decode_lookum`], but candidate paths are scored by an arbitrary reward.
pub fn decode_lookum_with_reward<B: ModelBackend + ?Sized>(
    backend: &B,
    initial: &SequenceState,
    cfg: &LookumConfig,
    reward: &dyn RewardFunction,
    seed: u64,
) -> Result<DecodeOutput> {
    run(backend, initial, cfg, Scorer::Reward(reward), seed)
}

fn run<B: ModelBackend + ?Sized>(
    backend: &B,
    initial: &SequenceState,
    cfg: &LookumConfig,
    scorer: Scorer<'_>,
    seed: u64,
) -> Result<DecodeOutput> {
    cfg.validate()?;
    let budgets = cfg.schedule.budgets(initial.masked_count())?;
    let mut start = initial.clone();
    start.step = budgets.len();
    let out = match cfg.scheme.kind {
        SchemeKind::Nis => run_nis(backend, start, &budgets, cfg, &scorer, seed)?,
        SchemeKind::Smc => run_smc(backend, start, &budgets, cfg, &scorer, seed)?,
    };
    if !out.state.is_complete() {
        return Err(Error::Internal(format!(
            "schedule exhausted with {} masks remaining",
            out.state.masked_count()
        )));
    }
    Ok(out)
}

fn run_nis<B: ModelBackend + ?Sized>(
    backend: &B,
    mut state: SequenceState,
    budgets: &[usize],
    cfg: &LookumConfig,
    scorer: &Scorer<'_>,
    seed: u64,
) -> Result<DecodeOutput> {
    let mut trace = DecodeTrace::default();
    for (s, &budget) in budgets.iter().enumerate() {
        if state.is_complete() {
            break;
        }
        let field = backend.predict(&state)?;
        trace.backend_calls += 1;
        let (pool, proposals) = propose_paths(
            &field,
            &state,
            budget,
            &cfg.pool,
            cfg.scheme.k,
            cfg.token_rule,
            cfg.greedy_anchor,
            seed,
            s,
        )?;
        let (scores, _) = scorer.score(backend, &proposals, &mut trace.backend_calls)?;
        let weights = selection_probabilities(&scores, cfg.scheme.alpha)?;
        let chosen = sample_index(&weights, &mut stream(seed, s, LANE_SELECT));
        let t = state.step;
        let picked = proposals[chosen].clone();
        trace.steps.push(StepTrace {
            t,
            budget: picked.commits.len(),
            pool,
            proposals: proposals.into_iter().map(|p| p.commits).collect(),
            scores,
            weights,
            selected: vec![chosen],
            commits: picked.commits,
        });
        state = picked.state;
    }
    Ok(DecodeOutput { state, trace, population: None })
}

fn run_smc<B: ModelBackend + ?Sized>(
    backend: &B,
    start: SequenceState,
    budgets: &[usize],
    cfg: &LookumConfig,
    scorer: &Scorer<'_>,
    seed: u64,
) -> Result<DecodeOutput> {
    let k = cfg.scheme.k;
    let mut trace = DecodeTrace::default();
    if budgets.is_empty() {
        return Ok(DecodeOutput { state: start, trace, population: None });
    }
    let last = budgets.len() - 1;

    let first = backend.predict(&start)?;
    trace.backend_calls += 1;
    let initial_score = match scorer {
        Scorer::Verifier(kind) => aggregate(&first, &start, *kind),
        Scorer::Reward(r) => r.evaluate(&start)?,
    };
    let mut particles = vec![Particle::new(start.clone(), initial_score); k];
    let mut fields = vec![first; k];

    for (s, &budget) in budgets.iter().enumerate() {
        let mut proposals = Vec::with_capacity(k);
        let mut pool0 = Vec::new();
        for (j, (field, particle)) in fields.iter().zip(&particles).enumerate() {
            let state = &particle.state;
            let masked = state.masked_indices();
            let b = budget.min(masked.len());
            let pool = build_pool(field, &masked, &cfg.pool, b);
            let greedy = cfg.greedy_anchor && j == 0;
            proposals.push(propose_one(field, state, &masked, &pool, b, &cfg.pool, greedy, cfg.token_rule, seed, s, j as u64)?);
            if j == 0 {
                pool0 = pool;
            }
        }
        let (scores, ahead) = scorer.score(backend, &proposals, &mut trace.backend_calls)?;
        let step = smc_step(
            &particles,
            &proposals,
            &scores,
            cfg.scheme.alpha,
            s < last,
            &mut stream(seed, s, LANE_RESAMPLE),
        )?;
        trace.steps.push(StepTrace {
            t: particles[0].state.step,
            budget,
            pool: pool0,
            proposals: proposals.into_iter().map(|p| p.commits).collect(),
            scores,
            weights: step.weights,
            selected: step.ancestors.clone(),
            commits: Vec::new(),
        });
        particles = step.particles;
        if s < last {
            fields = match ahead {
                Some(ahead) => step.ancestors.iter().map(|&a| ahead[a].clone()).collect(),
                None => {
                    let states: Vec<SequenceState> = particles.iter().map(|p| p.state.clone()).collect();
                    trace.backend_calls += k as u64;
                    backend.predict_batch(&states)?
                }
            };
        }
    }

    // Highest final weight, lowest particle index on ties.
    let mut best = 0;
    for (i, p) in particles.iter().enumerate() {
        if p.log_weight > particles[best].log_weight {
            best = i;
        }
    }
    let winner = particles[best].clone();
    for (st, commits) in trace.steps.iter_mut().zip(winner.history) {
        st.commits = commits;
    }
    let population = particles.into_iter().map(|p| (p.state, p.log_weight.exp())).collect();
    Ok(DecodeOutput { state: winner.state, trace, population: Some(population) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lookum::VerifierMeasure;
    use crate::models::{CountingBackend, OracleSupport};
    use crate::score::ScoreKind;
    use crate::state::Vocabulary;
    use crate::strategies::{decode_baseline, UnmaskOrder};

    fn cube_support() -> OracleSupport {
        let v = Vocabulary::with_trailing_mask(3).unwrap();
        let seqs: Vec<Vec<u32>> = (0..81u32).map(|i| vec![i % 3, (i / 3) % 3, (i / 9) % 3, i / 27, 1]).collect();
        let w = (0..81).map(|i| 1.0 + (i % 7) as f64).collect();
        OracleSupport::new(v, seqs, w).unwrap()
    }

    #[test]
    fn single_path_matches_the_greedy_baseline() {
        let support = cube_support();
        let prompt = SequenceState::masked(5, 3);
        for measure in ScoreKind::ALL {
            for rule in [TokenRule::Argmax, TokenRule::Sample { temperature: 0.7 }] {
                for kind in [SchemeKind::Nis, SchemeKind::Smc] {
                    let cfg = LookumConfig {
                        pool: PoolPolicy::n_best(5, measure),
                        scheme: SelectionScheme { kind, alpha: 0.1, k: 1 },
                        token_rule: rule,
                        ..Default::default()
                    };
                    for seed in 0..5 {
                        let a = decode_lookum(&support, &prompt, &cfg, seed).unwrap();
                        let b = decode_baseline(&support, &prompt, &cfg.schedule, measure.into(), rule, seed).unwrap();
                        assert_eq!(a.state, b.state);
                    }
                }
            }
        }
    }

    #[test]
    fn nis_call_count_is_k_plus_one_per_step() {
        let support = CountingBackend::new(cube_support());
        let prompt = SequenceState::masked(5, 3);
        for k in [1, 2, 5] {
            support.reset();
            let cfg = LookumConfig { scheme: SelectionScheme::nis(k, 0.1), ..Default::default() };
            let out = decode_lookum(&support, &prompt, &cfg, 1).unwrap();
            let steps = out.trace.steps.len() as u64;
            assert_eq!(steps, 3);
            assert_eq!(out.trace.backend_calls, steps * (k as u64 + 1));
            assert_eq!(support.calls(), out.trace.backend_calls);
        }
    }

    #[test]
    fn smc_returns_a_normalized_population() {
        let support = cube_support();
        let prompt = SequenceState::masked(5, 3);
        let cfg = LookumConfig {
            scheme: SelectionScheme::smc(8, 0.5),
            token_rule: TokenRule::Sample { temperature: 1.0 },
            verifier: VerifierKind::new(VerifierMeasure::AvgConfidence, crate::lookum::VerifierScope::AllPositions),
            ..Default::default()
        };
        let out = decode_lookum(&support, &prompt, &cfg, 4).unwrap();
        let pop = out.population.unwrap();
        assert_eq!(pop.len(), 8);
        assert!((pop.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(pop.iter().all(|(s, _)| s.is_complete()));
        assert_eq!(out.trace.backend_calls, 1 + 3 * 8);
        let replay: Vec<(usize, u32)> = out.trace.commits().map(|c| (c.pos, c.token)).collect();
        let rebuilt = prompt.with_commits(&replay).unwrap();
        assert_eq!(rebuilt.tokens, out.state.tokens);
    }

    #[test]
    fn unmasked_prompt_needs_no_steps() {
        let support = cube_support();
        let done = SequenceState::new(vec![0, 0, 0, 0, 1], 3, 0);
        let out = decode_lookum(&support, &done, &LookumConfig::default(), 0).unwrap();
        assert_eq!(out.state.tokens, done.tokens);
        assert_eq!(out.trace.backend_calls, 0);
        let order = UnmaskOrder::Confidence;
        assert!(decode_baseline(&support, &done, &BudgetSchedule::default(), order, TokenRule::Argmax, 0).is_ok());
    }
}
