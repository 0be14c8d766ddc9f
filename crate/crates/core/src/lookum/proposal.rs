use rand::seq::index::sample;

use crate::error::Result;
use crate::field::PredictiveField;
use crate::lookum::pool::{build_pool, PoolPolicy};
use crate::score::rank_masked;
use crate::seed::stream;
use crate::state::SequenceState;
use crate::strategies::{commit_tokens, TokenRule};
use crate::trace::Commit;

/// One candidate next state: which positions to reveal and with what tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct PathProposal {
    /// Revealed positions, ascending, with their sampled tokens.
    pub commits: Vec<Commit>,
    pub state: SequenceState,
}

impl PathProposal {
    pub fn unmask_set(&self) -> Vec<usize> {
        self.commits.iter().map(|c| c.pos).collect()
    }
}

/// Propose one path on RNG lane `lane`.
///
/// A greedy path takes the top-`budget` positions by the pool measure; a
/// stochastic path draws `budget` positions uniformly without replacement
/// from `pool`.
pub(crate) fn propose_one(
    field: &PredictiveField,
    state: &SequenceState,
    masked: &[usize],
    pool: &[usize],
    budget: usize,
    policy: &PoolPolicy,
    greedy: bool,
    rule: TokenRule,
    seed: u64,
    step: usize,
    lane: u64,
) -> Result<PathProposal> {
    let mut rng = stream(seed, step, lane);
    let mut positions: Vec<usize> = if greedy {
        let mut ranked = rank_masked(field, masked, policy.measure);
        ranked.truncate(budget);
        ranked
    } else {
        sample(&mut rng, pool.len(), budget.min(pool.len())).into_iter().map(|i| pool[i]).collect()
    };
    positions.sort_unstable();
    let commits = commit_tokens(field, &positions, rule, &mut rng);
    let pairs: Vec<_> = commits.iter().map(|c| (c.pos, c.token)).collect();
    let next = state.with_commits(&pairs)?;
    Ok(PathProposal { commits, state: next })
}

/// Generate `k` candidate paths from `state`.
///
/// With `greedy_anchor`, path 0 is the deterministic top-`budget` selection
/// and paths `1..k` are drawn from the pool; otherwise all `k` are drawn.
/// Path `p` uses RNG lane `p` of `(seed, step)`. Duplicates are allowed.
#[allow(clippy::too_many_arguments)]
pub fn propose_paths(
    field: &PredictiveField,
    state: &SequenceState,
    budget: usize,
    policy: &PoolPolicy,
    k: usize,
    rule: TokenRule,
    greedy_anchor: bool,
    seed: u64,
    step: usize,
) -> Result<(Vec<usize>, Vec<PathProposal>)> {
    let masked = state.masked_indices();
    let budget = budget.min(masked.len());
    let pool = build_pool(field, &masked, policy, budget);
    let proposals = (0..k)
        .map(|p| {
            let greedy = greedy_anchor && p == 0;
            propose_one(field, state, &masked, &pool, budget, policy, greedy, rule, seed, step, p as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((pool, proposals))
}
