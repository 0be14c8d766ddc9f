//! Engine configuration: defaults, JSON file, environment and `--set`
//! overrides merged into one validated value.

use std::path::{Path, PathBuf};

use lookum::bench::{BaselineSpec, DecoderSpec, OracleBackendSpec, TaskSpec};
use lookum::lookum::{LookumConfig, PoolPolicy, SelectionScheme, VerifierKind};
use lookum::models::RemoteModelConfig;
use lookum::{BudgetSchedule, TokenRule, UnmaskOrder};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

/// Environment variable that replaces `backend.remote.endpoint`.
pub const REMOTE_URL_ENV: &str = "LOOKUM_REMOTE_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Each task instance's exact enumeration model.
    #[default]
    Oracle,
    /// One model served over HTTP for every instance.
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Temperature wrapper on masked rows; 1 leaves them unchanged.
    pub temperature: f64,
    /// Uniform-mixture wrapper weight; 0 leaves rows unchanged.
    pub noise: f64,
    pub remote: RemoteModelConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self { kind: BackendKind::Oracle, temperature: 1.0, noise: 0.0, remote: RemoteModelConfig::default() }
    }
}

impl BackendConfig {
    pub fn wrappers(&self) -> OracleBackendSpec {
        OracleBackendSpec { temperature: self.temperature, noise: self.noise }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    #[default]
    Lookum,
    Baseline,
}

/// Decoding strategy. `order` applies to the baseline; the remaining fields
/// to the lookahead decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub order: UnmaskOrder,
    pub pool: PoolPolicy,
    pub verifier: VerifierKind,
    pub scheme: SelectionScheme,
    pub greedy_anchor: bool,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        let l = LookumConfig::default();
        Self {
            kind: StrategyKind::Lookum,
            order: UnmaskOrder::Confidence,
            pool: l.pool,
            verifier: l.verifier,
            scheme: l.scheme,
            greedy_anchor: l.greedy_anchor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Constant,
    Linear,
}

/// Flat form of the budget schedule so single fields can be overridden.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    /// Used by `constant`.
    pub tokens_per_step: usize,
    /// Used by `linear`.
    pub total_steps: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { kind: ScheduleKind::Constant, tokens_per_step: 2, total_steps: 8 }
    }
}

impl ScheduleConfig {
    pub fn schedule(&self) -> BudgetSchedule {
        match self.kind {
            ScheduleKind::Constant => BudgetSchedule::Constant { tokens_per_step: self.tokens_per_step },
            ScheduleKind::Linear => BudgetSchedule::Linear { total_steps: self.total_steps },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenRuleKind {
    Argmax,
    #[default]
    Sample,
}

/// Flat form of the token rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenRuleConfig {
    pub kind: TokenRuleKind,
    /// Used by `sample`.
    pub temperature: f64,
}

impl Default for TokenRuleConfig {
    fn default() -> Self {
        Self { kind: TokenRuleKind::Sample, temperature: 0.1 }
    }
}

impl TokenRuleConfig {
    pub fn rule(&self) -> TokenRule {
        match self.kind {
            TokenRuleKind::Argmax => TokenRule::Argmax,
            TokenRuleKind::Sample => TokenRule::Sample { temperature: self.temperature },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub k_values: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { k_values: vec![1, 2, 4, 8, 16] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectConfig {
    pub n_positions: usize,
}

impl Default for InjectConfig {
    fn default() -> Self {
        Self { n_positions: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    /// Index of the task instance that `decode` runs on.
    pub instance: usize,
}

/// Everything a command needs. Every nested section is a flat struct, so
/// any leaf can be set by a dotted path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub backend: BackendConfig,
    pub task: TaskSpec,
    pub strategy: StrategyConfig,
    pub schedule: ScheduleConfig,
    pub token_rule: TokenRuleConfig,
    /// Decode seed; instance generation uses `task.seed`.
    pub seed: u64,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub output: OutputConfig,
    pub sweep: SweepConfig,
    pub inject: InjectConfig,
    pub decode: DecodeConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            backend: BackendConfig::default(),
            task: TaskSpec::default(),
            strategy: StrategyConfig::default(),
            schedule: ScheduleConfig::default(),
            token_rule: TokenRuleConfig::default(),
            seed: 0,
            workers: 0,
            output: OutputConfig::default(),
            sweep: SweepConfig::default(),
            inject: InjectConfig::default(),
            decode: DecodeConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn lookum(&self) -> LookumConfig {
        let s = &self.strategy;
        LookumConfig {
            schedule: self.schedule.schedule(),
            pool: s.pool,
            verifier: s.verifier,
            scheme: s.scheme,
            token_rule: self.token_rule.rule(),
            greedy_anchor: s.greedy_anchor,
        }
    }

    pub fn decoder(&self) -> DecoderSpec {
        match self.strategy.kind {
            StrategyKind::Lookum => DecoderSpec::Lookum(self.lookum()),
            StrategyKind::Baseline => DecoderSpec::Baseline(BaselineSpec {
                schedule: self.schedule.schedule(),
                order: self.strategy.order,
                token_rule: self.token_rule.rule(),
            }),
        }
    }

    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let check = |section: &str, r: lookum::Result<()>| r.map_err(|e| CliError::Config(format!("{section}: {e}")));
        check("task", self.task.validate())?;
        check("backend", self.backend.wrappers().validate())?;
        if self.backend.kind == BackendKind::Remote {
            check("backend.remote", self.backend.remote.validate())?;
        }
        check("strategy", self.lookum().validate())?;
        let k = &self.sweep.k_values;
        if k.is_empty() || k.windows(2).any(|w| w[0] >= w[1]) || k[0] == 0 {
            return Err(CliError::Config(format!("sweep.k_values must be positive and strictly ascending, got {k:?}")));
        }
        if self.inject.n_positions == 0 {
            return Err(CliError::Config("inject.n_positions must be at least 1".into()));
        }
        if self.decode.instance >= self.task.instance_count {
            return Err(CliError::Config(format!(
                "decode.instance {} is out of range for task.instance_count {}",
                self.decode.instance, self.task.instance_count
            )));
        }
        Ok(())
    }

    /// Parse a config snapshot such as the one embedded in a report.
    pub fn from_value(value: Value) -> Result<Self, CliError> {
        let cfg: Self = serde_path_to_error::deserialize(value)
            .map_err(|e| CliError::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Command-line overrides, applied in order after the file and environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// `dotted.key=value` pairs; values parse as JSON, else as strings.
    pub set: Vec<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

/// Merge defaults, the optional file, `remote_url` and `overrides`, lowest
/// precedence first.
pub fn load_config(path: Option<&Path>, remote_url: Option<&str>, overrides: &Overrides) -> Result<EngineConfig, CliError> {
    let mut value = EngineConfig::default().to_value();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{} is not valid JSON: {e}", path.display())))?;
        if !file.is_object() {
            return Err(CliError::Config(format!("{} must hold a JSON object", path.display())));
        }
        merge(&mut value, file);
    }
    if let Some(url) = remote_url {
        set_path(&mut value, "backend.remote.endpoint", Value::String(url.to_string()))?;
    }
    for pair in &overrides.set {
        let (key, raw) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{pair}` is not of the form key=value")))?;
        let v = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut value, key.trim(), v)?;
    }
    if let Some(out) = &overrides.out {
        set_path(&mut value, "output.dir", Value::String(out.display().to_string()))?;
    }
    if let Some(seed) = overrides.seed {
        set_path(&mut value, "seed", seed.into())?;
    }
    if let Some(workers) = overrides.workers {
        set_path(&mut value, "workers", workers.into())?;
    }
    EngineConfig::from_value(value)
}

/// Recursively overlay `top` onto `base`; non-object values replace.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut Value, key: &str, v: Value) -> Result<(), CliError> {
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("override key `{key}` is malformed")));
    }
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(m) => m,
            Value::Null => {
                *node = Value::Object(Map::new());
                node.as_object_mut().expect("just set")
            }
            _ => {
                return Err(CliError::Config(format!("cannot set `{key}`: `{}` is not a section", parts[..depth].join("."))))
            }
        };
        if depth + 1 == parts.len() {
            obj.insert(part.to_string(), v);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("key has at least one part")
}
