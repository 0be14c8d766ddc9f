//! Oracle-checked decode metrics.

use crate::error::{Error, Result};
use crate::models::OracleSupport;
use crate::state::SequenceState;
use crate::trace::DecodeTrace;

/// For every commit in `trace`, in order, whether it was a local error: no
/// valid sequence agrees with the tokens observed once it is applied.
///
/// Commits within a step are applied in ascending position order. Once a
/// trace leaves the valid support it cannot return; a violation of that is
/// reported as an internal error.
pub fn local_error_flags(initial: &SequenceState, trace: &DecodeTrace, valid: &OracleSupport) -> Result<Vec<bool>> {
    if initial.len() != valid.seq_len() {
        return Err(Error::LengthMismatch { expected: valid.seq_len(), actual: initial.len() });
    }
    let mut tokens = initial.tokens.clone();
    let mut flags = Vec::with_capacity(trace.commit_count());
    let mut off = false;
    for c in trace.commits() {
        if c.pos >= tokens.len() || tokens[c.pos] != initial.mask_id {
            return Err(Error::invalid(format!("commit at position {} does not fill a mask", c.pos)));
        }
        tokens[c.pos] = c.token;
        let error = !valid.is_consistent(&tokens)?;
        if off && !error {
            return Err(Error::Internal("trace returned to the valid support".into()));
        }
        off = error;
        flags.push(error);
    }
    Ok(flags)
}

pub fn local_error_count(initial: &SequenceState, trace: &DecodeTrace, valid: &OracleSupport) -> Result<usize> {
    Ok(local_error_flags(initial, trace, valid)?.into_iter().filter(|&e| e).count())
}

/// Fraction of commits that were local errors; zero when nothing was committed.
pub fn local_error_rate(initial: &SequenceState, trace: &DecodeTrace, valid: &OracleSupport) -> Result<f64> {
    let flags = local_error_flags(initial, trace, valid)?;
    if flags.is_empty() {
        return Ok(0.0);
    }
    Ok(flags.iter().filter(|&&e| e).count() as f64 / flags.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Vocabulary;
    use crate::strategies::{decode_baseline, BudgetSchedule, TokenRule, UnmaskOrder};
    use crate::trace::{Commit, StepTrace};

    fn step(commits: &[(usize, u32)]) -> StepTrace {
        StepTrace {
            t: 0,
            budget: commits.len(),
            pool: vec![],
            proposals: vec![],
            scores: vec![],
            weights: vec![],
            selected: vec![],
            commits: commits.iter().map(|&(pos, token)| Commit { pos, token }).collect(),
        }
    }

    fn valid() -> OracleSupport {
        let v = Vocabulary::with_trailing_mask(3).unwrap();
        OracleSupport::uniform(v, vec![vec![0, 1, 2], vec![0, 2, 1]]).unwrap()
    }

    #[test]
    fn on_support_and_off_support_extremes() {
        let start = SequenceState::masked(3, 3);
        let good = DecodeTrace { steps: vec![step(&[(0, 0), (1, 2)]), step(&[(2, 1)])], backend_calls: 0 };
        assert_eq!(local_error_rate(&start, &good, &valid()).unwrap(), 0.0);
        let bad = DecodeTrace { steps: vec![step(&[(0, 1)]), step(&[(1, 1), (2, 2)])], backend_calls: 0 };
        assert_eq!(local_error_rate(&start, &bad, &valid()).unwrap(), 1.0);
        let empty = DecodeTrace::default();
        assert_eq!(local_error_rate(&start, &empty, &valid()).unwrap(), 0.0);
    }

    #[test]
    fn commits_within_a_step_apply_in_order() {
        let start = SequenceState::masked(3, 3);
        let t = DecodeTrace { steps: vec![step(&[(0, 0), (1, 1), (2, 1)])], backend_calls: 0 };
        assert_eq!(local_error_flags(&start, &t, &valid()).unwrap(), vec![false, false, true]);
    }

    #[test]
    fn malformed_traces_are_rejected() {
        let start = SequenceState::masked(3, 3);
        let twice = DecodeTrace { steps: vec![step(&[(0, 0)]), step(&[(0, 0)])], backend_calls: 0 };
        assert!(local_error_flags(&start, &twice, &valid()).is_err());
        assert!(local_error_flags(&SequenceState::masked(2, 3), &DecodeTrace::default(), &valid()).is_err());
    }

    #[test]
    fn two_branch_greedy_errs_once_at_the_end() {
        // Branch C = (0, 0, 1) holds 0.4 and D = (0, 0, 2) holds 0.6. Greedy
        // confidence fills the two agreed positions, then commits D's digit
        // at position 2: one error among three commits.
        let v = Vocabulary::with_trailing_mask(3).unwrap();
        let belief = OracleSupport::new(v.clone(), vec![vec![0, 0, 1], vec![0, 0, 2]], vec![0.4, 0.6]).unwrap();
        let valid = OracleSupport::uniform(v, vec![vec![0, 0, 1]]).unwrap();
        let start = SequenceState::masked(3, 3);
        let sched = BudgetSchedule::Constant { tokens_per_step: 2 };
        let out = decode_baseline(&belief, &start, &sched, UnmaskOrder::Confidence, TokenRule::Argmax, 0).unwrap();
        assert_eq!(out.state.tokens, vec![0, 0, 2]);
        assert_eq!(local_error_flags(&start, &out.trace, &valid).unwrap(), vec![false, false, true]);
    }
}
