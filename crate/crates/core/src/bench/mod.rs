//! Desk-scale benchmarks: task generators, oracle-checked metrics, the
//! error-injection study, path sweeps and run reports.

mod backend;
mod inject;
mod metrics;
mod report;
mod runner;
pub mod stats;
mod tasks;
mod vocab;

pub use backend::OracleBackendSpec;
pub use inject::{downstream_certainty, forced_prefix, injection_study};
pub use metrics::{local_error_count, local_error_flags, local_error_rate};
pub use report::{
    Aggregates, InjectionRecord, InjectionReport, InjectionSummary, InstanceRecord, RunReport, SweepReport, SweepRow,
    Timing,
};
pub use runner::{
    decode_instance, instance_seed, run_bench, sweep_paths, BaselineSpec, DecoderSpec, InstanceModel, SharedModel,
};
pub use tasks::{
    answer_width, countdown_expressions, countdown_prefix, evaluate_left_to_right, generate_instance, generate_task,
    sudoku_grids, write_dataset, ArithmeticParams, BeliefModel, CountdownParams, Operator, SudokuParams, TaskInstance,
    TaskKind, TaskSpec,
};
pub use vocab::{desk_vocabulary, digits, is_digit, BAR, BLANK, DESK_MASK, DESK_SIZE, DIVIDE, EQUALS, MINUS, PLUS, TIMES};
