//! Running decoders over task instances, in parallel and reproducibly.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::backend::OracleBackendSpec;
use crate::bench::metrics::local_error_count;
use crate::bench::report::{InstanceRecord, RunReport, SweepReport, Timing};
use crate::bench::tasks::TaskInstance;
use crate::error::{Error, Result};
use crate::lookum::{decode_lookum, LookumConfig, SelectionScheme};
use crate::models::ModelBackend;
use crate::seed::derive_seed;
use crate::state::SequenceState;
use crate::strategies::{decode_baseline, BudgetSchedule, TokenRule, UnmaskOrder};
use crate::trace::DecodeOutput;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSpec {
    pub schedule: BudgetSchedule,
    pub order: UnmaskOrder,
    pub token_rule: TokenRule,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self { schedule: BudgetSchedule::default(), order: UnmaskOrder::Confidence, token_rule: TokenRule::default() }
    }
}

/// A complete decoding strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderSpec {
    Baseline(BaselineSpec),
    Lookum(LookumConfig),
}

impl DecoderSpec {
    pub fn decode<B: ModelBackend + ?Sized>(&self, backend: &B, initial: &SequenceState, seed: u64) -> Result<DecodeOutput> {
        match self {
            DecoderSpec::Baseline(b) => decode_baseline(backend, initial, &b.schedule, b.order, b.token_rule, seed),
            DecoderSpec::Lookum(cfg) => decode_lookum(backend, initial, cfg, seed),
        }
    }
}

/// Source of the model each instance is decoded against.
pub trait InstanceModel: Sync {
    fn model_for<'a>(&'a self, inst: &'a TaskInstance) -> Result<Box<dyn ModelBackend + 'a>>;
}

impl InstanceModel for OracleBackendSpec {
    fn model_for<'a>(&'a self, inst: &'a TaskInstance) -> Result<Box<dyn ModelBackend + 'a>> {
        self.build(&inst.belief)
    }
}

/// One backend shared by every instance, such as a remote model. Validity
/// and local errors are still judged against each instance's answer set.
pub struct SharedModel<B>(pub B);

impl<B: ModelBackend> InstanceModel for SharedModel<B> {
    fn model_for<'a>(&'a self, _inst: &'a TaskInstance) -> Result<Box<dyn ModelBackend + 'a>> {
        Ok(Box::new(&self.0))
    }
}

/// Seed of instance `index` under run seed `seed`.
pub fn instance_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, &[index as u64])
}

/// Map `f` over `items` on a pool of `workers` threads, preserving order.
pub(crate) fn parallel_map<T: Sync, R: Send>(
    workers: usize,
    items: &[T],
    f: impl Fn(&T) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

/// Decode one instance against its model and score the result.
pub fn decode_instance<M: InstanceModel + ?Sized>(
    inst: &TaskInstance,
    backend: &M,
    decoder: &DecoderSpec,
    seed: u64,
) -> Result<InstanceRecord> {
    let model = backend.model_for(inst)?;
    let out = decoder.decode(&model, &inst.prompt, instance_seed(seed, inst.index))?;
    let local_errors = local_error_count(&inst.prompt, &out.trace, &inst.valid)?;
    Ok(InstanceRecord {
        index: inst.index,
        rendered: inst.belief.vocabulary().render(&out.state.tokens),
        exact_match: inst.is_valid(&out.state.tokens),
        local_errors,
        commits: out.trace.commit_count(),
        backend_calls: out.trace.backend_calls,
        steps: out.trace.steps,
        output: out.state.tokens,
    })
}

/// Decode every instance. Results do not depend on `workers`.
pub fn run_bench<M: InstanceModel + ?Sized>(
    instances: &[TaskInstance],
    backend: &M,
    decoder: &DecoderSpec,
    seed: u64,
    workers: usize,
    label: &str,
) -> Result<RunReport> {
    let start = Instant::now();
    let records = parallel_map(workers, instances, |inst| decode_instance(inst, backend, decoder, seed))?;
    let mut report = RunReport::new(label, serde_json::Value::Null, records);
    report.timing = Some(Timing::since(start));
    Ok(report)
}

/// Run the lookahead decoder once per path count in `k_values` (ascending)
/// over the same instances and seeds.
pub fn sweep_paths<M: InstanceModel + ?Sized>(
    instances: &[TaskInstance],
    backend: &M,
    cfg: &LookumConfig,
    k_values: &[usize],
    seed: u64,
    workers: usize,
) -> Result<SweepReport> {
    if k_values.is_empty() || k_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!("k_values must be non-empty and strictly ascending, got {k_values:?}")));
    }
    let start = Instant::now();
    let mut runs = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let decoder = DecoderSpec::Lookum(LookumConfig { scheme: SelectionScheme { k, ..cfg.scheme }, ..*cfg });
        runs.push(run_bench(instances, backend, &decoder, seed, workers, &format!("k={k}"))?);
    }
    let mut report = SweepReport::new(serde_json::Value::Null, k_values, runs);
    report.timing = Some(Timing::since(start));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::tasks::{generate_task, TaskKind, TaskSpec};
    use crate::score::ScoreKind;

    #[test]
    fn worker_count_does_not_change_reports() {
        let inst = generate_task(&TaskSpec::new(TaskKind::MiniSudoku, 12, 1)).unwrap();
        let cfg = LookumConfig { token_rule: TokenRule::Sample { temperature: 0.5 }, ..Default::default() };
        let dec = DecoderSpec::Lookum(cfg);
        let one = run_bench(&inst, &OracleBackendSpec::default(), &dec, 9, 1, "a").unwrap();
        let four = run_bench(&inst, &OracleBackendSpec::default(), &dec, 9, 4, "a").unwrap();
        assert_eq!(one.canonical_json().unwrap(), four.canonical_json().unwrap());
    }

    #[test]
    fn sweep_at_one_path_matches_the_baseline() {
        let inst = generate_task(&TaskSpec::new(TaskKind::Countdown, 15, 2)).unwrap();
        let cfg = LookumConfig::default();
        let sweep = sweep_paths(&inst, &OracleBackendSpec::default(), &cfg, &[1], 3, 2).unwrap();
        let base = DecoderSpec::Baseline(BaselineSpec {
            schedule: cfg.schedule,
            order: UnmaskOrder::from(cfg.pool.measure),
            token_rule: cfg.token_rule,
        });
        assert_eq!(cfg.pool.measure, ScoreKind::Confidence);
        let b = run_bench(&inst, &OracleBackendSpec::default(), &base, 3, 2, "baseline").unwrap();
        let s = &sweep.runs[0];
        assert_eq!(s.aggregates.accuracy, b.aggregates.accuracy);
        assert_eq!(s.aggregates.local_error_rate, b.aggregates.local_error_rate);
        for (x, y) in s.records.iter().zip(&b.records) {
            assert_eq!(x.output, y.output);
        }
        sweep.validate().unwrap();
        assert!(sweep_paths(&inst, &OracleBackendSpec::default(), &cfg, &[2, 1], 3, 2).is_err());
    }
}
