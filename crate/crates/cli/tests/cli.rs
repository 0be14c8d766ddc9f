//! Command-line behaviour: precedence, artifacts, determinism and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use lookum::bench::{InjectionReport, RunReport, SweepReport};
use lookum_cli::config::{BackendKind, ScheduleKind, StrategyKind};
use lookum_cli::{load_config, EngineConfig, Overrides};
use serde_json::Value;

fn lookum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lookum"))
        .args(args)
        .env_remove("LOOKUM_REMOTE_URL")
        .output()
        .expect("binary runs")
}

fn write(path: &Path, v: Value) {
    std::fs::write(path, v.to_string()).unwrap();
}

fn sets(pairs: &[&str]) -> Overrides {
    Overrides { set: pairs.iter().map(|s| s.to_string()).collect(), ..Default::default() }
}

#[test]
fn command_line_beats_file_beats_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.json");
    write(
        &file,
        serde_json::json!({
            "seed": 5,
            "workers": 3,
            "output": { "dir": "from-file" },
            "strategy": { "scheme": { "k": 4 }, "kind": "baseline" },
            "schedule": { "kind": "linear", "total_steps": 6 },
            "backend": { "remote": { "endpoint": "http://file:1" } }
        }),
    );
    let d = EngineConfig::default();

    let from_file = load_config(Some(&file), None, &Overrides::default()).unwrap();
    assert_eq!((from_file.seed, from_file.workers), (5, 3));
    assert_eq!(from_file.output.dir, Path::new("from-file"));
    assert_eq!(from_file.strategy.scheme.k, 4);
    assert_eq!(from_file.strategy.scheme.alpha, d.strategy.scheme.alpha, "siblings keep defaults");
    assert_eq!(from_file.strategy.kind, StrategyKind::Baseline);
    assert_eq!(from_file.schedule.kind, ScheduleKind::Linear);
    assert_eq!(from_file.backend.remote.endpoint, "http://file:1");

    let env = load_config(Some(&file), Some("http://env:2"), &Overrides::default()).unwrap();
    assert_eq!(env.backend.remote.endpoint, "http://env:2");

    let over = Overrides {
        set: vec![
            "seed=7".into(),
            "strategy.scheme.k=8".into(),
            "strategy.kind=lookum".into(),
            "backend.remote.endpoint=http://set:3".into(),
            "output.dir=from-set".into(),
        ],
        out: Some("from-flag".into()),
        seed: Some(9),
        workers: Some(1),
    };
    let cli = load_config(Some(&file), Some("http://env:2"), &over).unwrap();
    assert_eq!(cli.seed, 9, "dedicated flag beats --set");
    assert_eq!(cli.workers, 1);
    assert_eq!(cli.output.dir, Path::new("from-flag"));
    assert_eq!(cli.strategy.scheme.k, 8);
    assert_eq!(cli.strategy.kind, StrategyKind::Lookum);
    assert_eq!(cli.backend.remote.endpoint, "http://set:3");
    assert_eq!(cli.schedule.total_steps, 6, "untouched file values survive");

    let defaults = load_config(None, None, &Overrides::default()).unwrap();
    assert_eq!(defaults, d);
    assert_eq!(defaults.backend.kind, BackendKind::Oracle);
}

#[test]
fn bad_configs_name_the_offending_path() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.json");
    write(&file, serde_json::json!({ "strategy": { "pool": { "size": "five" } } }));
    let msg = load_config(Some(&file), None, &Overrides::default()).unwrap_err().to_string();
    assert!(msg.contains("strategy.pool.size"), "{msg}");
    assert!(load_config(None, None, &sets(&["noequals"])).is_err());
    assert!(load_config(None, None, &sets(&["sweep.k_values=[4,2]"])).is_err());
    assert!(load_config(None, None, &sets(&["decode.instance=500"])).is_err());
    assert!(load_config(Some(&dir.path().join("missing.json")), None, &Overrides::default()).is_err());
}

#[test]
fn decode_prints_the_forced_answer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = lookum(&[
        "decode",
        "--out",
        out,
        "--quiet",
        "--set",
        "task.arithmetic.belief=exact",
        "--set",
        "task.arithmetic.operand_digits=1",
        "--set",
        "task.arithmetic.ops=[\"+\"]",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let line = String::from_utf8(o.stdout).unwrap();
    let (lhs, answer) = line.trim().split_once('=').unwrap();
    let (a, b) = lhs.split_once('+').unwrap();
    assert_eq!(answer.parse::<u32>().unwrap(), a.parse::<u32>().unwrap() + b.parse::<u32>().unwrap());
    assert_eq!(answer.len(), 2);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("decode.json")).unwrap()).unwrap();
    assert_eq!(doc["record"]["exact_match"], true);
    assert!(!doc["record"]["steps"].as_array().unwrap().is_empty());
    EngineConfig::from_value(doc["config"].clone()).unwrap();
}

fn bench_report(dir: &Path, extra: &[&str]) -> RunReport {
    let mut args = vec!["bench", "--quiet", "--out", dir.to_str().unwrap(), "--set", "task.instance_count=40"];
    args.extend_from_slice(extra);
    let o = lookum(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    RunReport::from_json(&std::fs::read_to_string(dir.join("bench.json")).unwrap()).unwrap()
}

#[test]
fn bench_is_deterministic_and_embeds_its_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let noisy = ["--set", "backend.noise=0.1", "--set", "task.kind=countdown", "--seed", "4"];
    let ra = bench_report(a.path(), &[&noisy[..], &["--workers", "1"]].concat());
    let rb = bench_report(b.path(), &[&noisy[..], &["--workers", "4"]].concat());
    assert_eq!(ra.records, rb.records);
    assert_eq!(ra.aggregates, rb.aggregates);
    let ca = EngineConfig::from_value(ra.config.clone()).unwrap();
    let cb = EngineConfig::from_value(rb.config.clone()).unwrap();
    assert_eq!(ca.seed, 4);
    assert_eq!(ca.backend.noise, 0.1);
    assert_eq!(EngineConfig { workers: 0, output: Default::default(), ..ca }, EngineConfig { workers: 0, output: Default::default(), ..cb });
    let csv = std::fs::read_to_string(a.path().join("bench.csv")).unwrap();
    assert!(csv.starts_with("label,"));
}

#[test]
fn single_path_sweep_matches_the_baseline_bench() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--set", "strategy.order=confidence", "--set", "task.arithmetic.belief=adversarial", "--set", "task.arithmetic.ops=[\"+\"]"];
    let base = bench_report(dir.path(), &[&common[..], &["--set", "strategy.kind=baseline"]].concat());
    let o = lookum(&[&["sweep", "--quiet", "--out", dir.path().to_str().unwrap(), "--set", "task.instance_count=40", "--set", "sweep.k_values=[1]"][..], &common[..]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = SweepReport::from_json(&std::fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep.rows[0].accuracy, base.aggregates.accuracy);
    assert_eq!(sweep.rows[0].local_error_rate, base.aggregates.local_error_rate);
    let outputs = |r: &RunReport| r.records.iter().map(|x| x.output.clone()).collect::<Vec<_>>();
    assert_eq!(outputs(&sweep.runs[0]), outputs(&base));
    EngineConfig::from_value(sweep.config).unwrap();
}

#[test]
fn inject_study_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = lookum(&["inject-study", "--quiet", "--out", dir.path().to_str().unwrap(), "--set", "task.instance_count=30"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = InjectionReport::from_json(&std::fs::read_to_string(dir.path().join("inject.json")).unwrap()).unwrap();
    assert!(r.summary.samples > 0);
    assert!(r.summary.mean_entropy_error > r.summary.mean_entropy_correct);
    EngineConfig::from_value(r.config).unwrap();
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(lookum(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(lookum(&[]).status.code(), Some(64));
    assert_eq!(lookum(&["--help"]).status.code(), Some(0));
    assert_eq!(lookum(&["bench", "--out", out, "--set", "strategy.scheme.alpha=-1"]).status.code(), Some(2));
    assert_eq!(lookum(&["bench", "--out", out, "--config", "/nonexistent/c.json"]).status.code(), Some(2));
    assert_eq!(lookum(&["inject-study", "--out", out, "--set", "task.kind=countdown"]).status.code(), Some(2));

    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let o = Command::new(env!("CARGO_BIN_EXE_lookum"))
        .args(["decode", "--out", out, "--set", "backend.kind=remote", "--set", "backend.remote.retries=0"])
        .env("LOOKUM_REMOTE_URL", format!("http://127.0.0.1:{port}"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
