//! Error-injection study: how certain the model stays after a correct versus
//! a wrong answer digit.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};

use crate::bench::backend::OracleBackendSpec;
use crate::bench::report::{InjectionRecord, InjectionReport};
use crate::bench::runner::parallel_map;
use crate::bench::tasks::{TaskInstance, TaskKind};
use crate::bench::vocab::is_digit;
use crate::error::{Error, Result};
use crate::field::PredictiveField;
use crate::models::ModelBackend;
use crate::score::{entropy_unchecked, max_prob};
use crate::seed::{derive_seed, StreamRng};
use crate::state::{SequenceState, TokenId};

/// Mean entropy and mean confidence of `field` over the masked positions of `state`.
pub fn downstream_certainty(field: &PredictiveField, state: &SequenceState) -> (f64, f64) {
    let masked = state.masked_indices();
    if masked.is_empty() {
        return (0.0, 1.0);
    }
    let n = masked.len() as f64;
    let h = masked.iter().map(|&i| entropy_unchecked(field.row(i))).sum::<f64>() / n;
    let c = masked.iter().map(|&i| max_prob(field.row(i))).sum::<f64>() / n;
    (h, c)
}

/// The prompt with answer positions before `pos` teacher-forced to the
/// reference and `token` written at `pos`.
pub fn forced_prefix(inst: &TaskInstance, pos: usize, token: TokenId) -> SequenceState {
    let mut tokens = inst.prompt.tokens.clone();
    for i in inst.prompt.masked_indices() {
        if i < pos {
            tokens[i] = inst.reference[i];
        }
    }
    tokens[pos] = token;
    SequenceState::new(tokens, inst.prompt.mask_id, 0)
}

/// Per instance, sample up to `n_positions` answer digits. At each, commit
/// the correct digit (condition A) or a uniformly drawn wrong digit
/// (condition B) after a correct prefix, and record the model's mean
/// entropy and confidence over the answer digits still masked.
///
/// The final answer digit has nothing downstream and is skipped, as is any
/// position whose correct token has no same-alphabet alternative; both are
/// counted in `summary.skipped`.
pub fn injection_study(
    instances: &[TaskInstance],
    backend: &OracleBackendSpec,
    n_positions: usize,
    seed: u64,
    workers: usize,
) -> Result<InjectionReport> {
    if n_positions == 0 {
        return Err(Error::invalid("injection study needs n_positions >= 1"));
    }
    let per_instance = parallel_map(workers, instances, |inst| inject_one(inst, backend, n_positions, seed))?;
    let mut records = Vec::new();
    let mut skipped = 0;
    for (r, s) in per_instance {
        records.extend(r);
        skipped += s;
    }
    InjectionReport::new(serde_json::Value::Null, records, skipped)
}

fn inject_one(
    inst: &TaskInstance,
    spec: &OracleBackendSpec,
    n_positions: usize,
    seed: u64,
) -> Result<(Vec<InjectionRecord>, usize)> {
    if inst.kind != TaskKind::Arithmetic {
        return Err(Error::invalid(format!("injection study needs arithmetic instances, got {}", inst.kind.name())));
    }
    let backend = spec.build(&inst.belief)?;
    let answer = inst.prompt.masked_indices();
    let mut eligible = Vec::new();
    let mut skipped = 0;
    for (j, &pos) in answer.iter().enumerate() {
        if j + 1 == answer.len() || !is_digit(inst.reference[pos]) {
            skipped += 1;
        } else {
            eligible.push(pos);
        }
    }
    let mut rng = StreamRng::seed_from_u64(derive_seed(seed, &[inst.index as u64]));
    let mut chosen: Vec<usize> = sample(&mut rng, eligible.len(), n_positions.min(eligible.len()))
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    chosen.sort_unstable();

    let mut records = Vec::with_capacity(chosen.len());
    for pos in chosen {
        let correct = inst.reference[pos];
        let wrong = {
            let k = rng.random_range(0..9);
            if k >= correct {
                k + 1
            } else {
                k
            }
        };
        let a = forced_prefix(inst, pos, correct);
        let b = forced_prefix(inst, pos, wrong);
        let fields = backend.predict_batch(&[a.clone(), b.clone()])?;
        let (entropy_correct, confidence_correct) = downstream_certainty(&fields[0], &a);
        let (entropy_error, confidence_error) = downstream_certainty(&fields[1], &b);
        records.push(InjectionRecord {
            instance: inst.index,
            position: pos,
            correct_token: correct,
            wrong_token: wrong,
            entropy_correct,
            entropy_error,
            confidence_correct,
            confidence_error,
        });
    }
    Ok((records, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::tasks::{generate_task, ArithmeticParams, BeliefModel, Operator, TaskSpec};
    use crate::bench::vocab::DESK_SIZE;

    #[test]
    fn exact_belief_is_certain_after_a_correct_digit_and_uniform_after_a_wrong_one() {
        let spec = TaskSpec {
            arithmetic: ArithmeticParams { ops: vec![Operator::Add], belief: BeliefModel::Exact, ..Default::default() },
            ..TaskSpec::new(TaskKind::Arithmetic, 20, 4)
        };
        let inst = generate_task(&spec).unwrap();
        let report = injection_study(&inst, &OracleBackendSpec::default(), 5, 1, 2).unwrap();
        // Three answer digits: two eligible, the last skipped.
        assert_eq!(report.summary.skipped, 20);
        assert_eq!(report.summary.samples, 40);
        for r in &report.records {
            assert_eq!(r.entropy_correct, 0.0);
            assert_eq!(r.confidence_correct, 1.0);
            assert!((r.entropy_error - (DESK_SIZE as f64).ln()).abs() < 1e-12);
            assert!((r.confidence_error - 1.0 / DESK_SIZE as f64).abs() < 1e-12);
            assert_ne!(r.correct_token, r.wrong_token);
        }
        assert_eq!(report.summary.entropy_test.unwrap().p_value, 0.0);
        report.validate().unwrap();
    }

    #[test]
    fn wrong_digits_are_uniform_over_the_other_nine() {
        let spec = TaskSpec::new(TaskKind::Arithmetic, 400, 8);
        let inst = generate_task(&spec).unwrap();
        let report = injection_study(&inst, &OracleBackendSpec::default(), 1, 3, 4).unwrap();
        let mut offsets = [0usize; 10];
        for r in &report.records {
            offsets[((r.wrong_token + 10 - r.correct_token) % 10) as usize] += 1;
        }
        assert_eq!(offsets[0], 0);
        let n = report.records.len() as f64;
        let chi2: f64 = offsets[1..].iter().map(|&o| (o as f64 - n / 9.0).powi(2) / (n / 9.0)).sum();
        // 8 degrees of freedom, 0.001 critical value.
        assert!(chi2 < 26.12, "chi2 = {chi2}");
    }

    #[test]
    fn rejects_other_task_kinds() {
        let inst = generate_task(&TaskSpec::new(TaskKind::Countdown, 1, 0)).unwrap();
        assert!(injection_study(&inst, &OracleBackendSpec::default(), 1, 0, 1).is_err());
    }
}
