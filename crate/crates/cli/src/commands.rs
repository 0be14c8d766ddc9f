use std::ffi::OsString;
use std::path::Path;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use lookum::bench::{
    decode_instance, desk_vocabulary, generate_instance, generate_task, injection_study, run_bench, sweep_paths,
    InstanceModel, SharedModel, TaskKind,
};
use lookum::models::{noise_wrap, temperature_wrap, ModelBackend, RemoteModel};

use crate::config::{load_config, BackendKind, EngineConfig, Overrides, StrategyKind, REMOTE_URL_ENV};
use crate::error::{CliError, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "lookum", version, about = "Lookahead unmasking decoder for masked diffusion models")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file; missing keys take built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<std::path::PathBuf>,

    /// Override one config leaf by dotted path; repeatable, applied in order.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory (output.dir).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<std::path::PathBuf>,

    /// Decode seed (seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (workers); 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Print only the decoded sequence and errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Decode one task instance, print it and write its trace.
    Decode,
    /// Decode every task instance and write a run report.
    Bench,
    /// Measure certainty after correct versus injected wrong answer digits.
    InjectStudy,
    /// Run the lookahead decoder for each path count in sweep.k_values.
    Sweep,
}

/// Parse arguments, run the command and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let overrides = Overrides { set: cli.set, out: cli.out, seed: cli.seed, workers: cli.workers };
    let remote_url = std::env::var(REMOTE_URL_ENV).ok().filter(|s| !s.is_empty());
    let result = load_config(cli.config.as_deref(), remote_url.as_deref(), &overrides)
        .and_then(|cfg| run(cli.command, &cfg, cli.quiet));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("lookum: {e}");
            e.exit_code()
        }
    }
}

/// Run `command` under a validated config.
pub fn run(command: Command, cfg: &EngineConfig, quiet: bool) -> Result<(), CliError> {
    cfg.validate()?;
    let dir = cfg.output.dir.as_path();
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create output dir {}: {e}", dir.display())))?;
    let note = |msg: String| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    let snapshot = cfg.to_value();
    match command {
        Command::Decode => {
            let inst = generate_instance(&cfg.task, cfg.decode.instance)?;
            let model = instance_model(cfg)?;
            let record = decode_instance(&inst, &*model, &cfg.decoder(), cfg.seed)?;
            println!("{}", record.rendered);
            let doc = serde_json::json!({ "config": snapshot, "record": record });
            let path = dir.join("decode.json");
            write_json(&path, &doc)?;
            note(format!(
                "exact_match={} local_errors={} backend_calls={} -> {}",
                record.exact_match,
                record.local_errors,
                record.backend_calls,
                path.display()
            ));
        }
        Command::Bench => {
            let instances = generate_task(&cfg.task)?;
            let model = instance_model(cfg)?;
            let label = match cfg.strategy.kind {
                StrategyKind::Lookum => "lookum",
                StrategyKind::Baseline => "baseline",
            };
            let mut report = run_bench(&instances, &*model, &cfg.decoder(), cfg.seed, cfg.worker_count(), label)?;
            report.config = snapshot;
            report.write(dir, "bench")?;
            let a = &report.aggregates;
            note(format!(
                "{} instances: accuracy={:.4} local_error_rate={:.4} mean_backend_calls={:.2} -> {}",
                a.instances,
                a.accuracy,
                a.local_error_rate,
                a.mean_backend_calls,
                dir.join("bench.json").display()
            ));
        }
        Command::InjectStudy => {
            if cfg.backend.kind != BackendKind::Oracle {
                return Err(CliError::Config("inject-study needs backend.kind = oracle".into()));
            }
            if cfg.task.kind != TaskKind::Arithmetic {
                return Err(CliError::Config("inject-study needs task.kind = arithmetic".into()));
            }
            let instances = generate_task(&cfg.task)?;
            let mut report = injection_study(
                &instances,
                &cfg.backend.wrappers(),
                cfg.inject.n_positions,
                cfg.seed,
                cfg.worker_count(),
            )?;
            report.config = snapshot;
            report.write(dir, "inject")?;
            let s = &report.summary;
            note(format!(
                "{} samples ({} skipped): entropy {:.3} vs {:.3}, confidence {:.3} vs {:.3} (correct vs error) -> {}",
                s.samples,
                s.skipped,
                s.mean_entropy_correct,
                s.mean_entropy_error,
                s.mean_confidence_correct,
                s.mean_confidence_error,
                dir.join("inject.json").display()
            ));
        }
        Command::Sweep => {
            let instances = generate_task(&cfg.task)?;
            let model = instance_model(cfg)?;
            let mut report =
                sweep_paths(&instances, &*model, &cfg.lookum(), &cfg.sweep.k_values, cfg.seed, cfg.worker_count())?;
            report.config = snapshot;
            report.write(dir, "sweep")?;
            for row in &report.rows {
                note(format!("k={}: accuracy={:.4} local_error_rate={:.4}", row.k, row.accuracy, row.local_error_rate));
            }
        }
    }
    Ok(())
}

/// The per-instance oracle or a shared remote model, with wrappers applied.
fn instance_model(cfg: &EngineConfig) -> Result<Box<dyn InstanceModel>, CliError> {
    match cfg.backend.kind {
        BackendKind::Oracle => Ok(Box::new(cfg.backend.wrappers())),
        BackendKind::Remote => {
            let remote = RemoteModel::connect(cfg.backend.remote.clone())?;
            let desk = desk_vocabulary();
            let v = remote.vocab();
            if v.size != desk.size || v.mask_id != desk.mask_id {
                return Err(CliError::Backend(format!(
                    "remote model serves vocab_size={} mask_id={}, tasks need vocab_size={} mask_id={}",
                    v.size, v.mask_id, desk.size, desk.mask_id
                )));
            }
            let mut model: Box<dyn ModelBackend> = Box::new(remote);
            if cfg.backend.temperature != 1.0 {
                model = Box::new(temperature_wrap(model, cfg.backend.temperature)?);
            }
            if cfg.backend.noise != 0.0 {
                model = Box::new(noise_wrap(model, cfg.backend.noise)?);
            }
            Ok(Box::new(SharedModel(model)))
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}
