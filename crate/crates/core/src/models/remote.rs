//! HTTP client for a model served over the JSON predict protocol.
//!
//! `POST {endpoint}/v1/predict` with `{"tokens": [..], "mask_id": m}` answers
//! `{"probs": [[..]; L]}`; `GET {endpoint}/v1/health` answers
//! `{"status": "ok", "vocab_size": V, "mask_id": m}`.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{renormalize, PredictiveField};
use crate::models::{coerce_observed, ModelBackend};
use crate::state::{SequenceState, TokenId, Vocabulary};

/// Rows whose mass is off by more than this are a server bug; closer rows are renormalized.
pub const REJECT_TOLERANCE: f64 = 1e-2;
/// Entries this far below zero are float noise and clamp to zero.
pub const ACCEPT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteModelConfig {
    pub endpoint: String,
    pub timeout_ms: u64,
    pub retries: u32,
    pub batch_size: usize,
}

impl Default for RemoteModelConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000".to_string(),
            timeout_ms: 30_000,
            retries: 2,
            batch_size: 4,
        }
    }
}

impl RemoteModelConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<()> {
        url::Url::parse(&self.endpoint)
            .map_err(|e| Error::invalid(format!("endpoint {:?}: {e}", self.endpoint)))?;
        if self.timeout_ms == 0 {
            return Err(Error::invalid("timeout must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        Ok(())
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.endpoint.trim_end_matches('/'), path)
    }
}

#[derive(Serialize)]
struct PredictRequest<'a> {
    tokens: &'a [TokenId],
    mask_id: TokenId,
}

#[derive(Deserialize)]
struct PredictResponse {
    probs: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct HealthResponse {
    status: String,
    vocab_size: usize,
    mask_id: TokenId,
}

pub struct RemoteModel {
    cfg: RemoteModelConfig,
    vocab: Vocabulary,
    agent: ureq::Agent,
}

impl RemoteModel {
    /// Client for a server whose vocabulary is already known.
    pub fn new(cfg: RemoteModelConfig, vocab: Vocabulary) -> Result<Self> {
        cfg.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { cfg, vocab, agent })
    }

    /// Query the health endpoint and adopt the advertised vocabulary.
    pub fn connect(cfg: RemoteModelConfig) -> Result<Self> {
        let mut client = Self::new(cfg, Vocabulary::with_trailing_mask(1)?)?;
        let health = client.health()?;
        client.vocab = Vocabulary::new(health.vocab_size, health.mask_id)?;
        Ok(client)
    }

    pub fn config(&self) -> &RemoteModelConfig {
        &self.cfg
    }

    fn health(&self) -> Result<HealthResponse> {
        let url = self.cfg.url("/v1/health");
        let body = self.with_retries(|| {
            let resp = self.agent.get(&url).call();
            read_body(resp)
        })?;
        let health: HealthResponse =
            serde_json::from_str(&body).map_err(|e| Error::Protocol(format!("health payload: {e}")))?;
        if health.status != "ok" {
            return Err(Error::Protocol(format!("server status {:?}", health.status)));
        }
        Ok(health)
    }

    fn with_retries<T>(&self, mut attempt: impl FnMut() -> Result<T>) -> Result<T> {
        let mut last = None;
        for i in 0..=self.cfg.retries {
            match attempt() {
                Err(Error::Transport(msg)) => {
                    last = Some(msg);
                    if i < self.cfg.retries {
                        thread::sleep(Duration::from_millis(20 * (1 << i.min(6))));
                    }
                }
                other => return other,
            }
        }
        Err(Error::Transport(format!(
            "{} (after {} attempts)",
            last.unwrap_or_default(),
            self.cfg.retries + 1
        )))
    }

    pub fn remote_predict(&self, state: &SequenceState) -> Result<PredictiveField> {
        let url = self.cfg.url("/v1/predict");
        let req = PredictRequest { tokens: &state.tokens, mask_id: state.mask_id };
        let body = self.with_retries(|| {
            let resp = self.agent.post(&url).send_json(&req);
            read_body(resp)
        })?;
        let parsed: PredictResponse =
            serde_json::from_str(&body).map_err(|e| Error::Protocol(format!("predict payload: {e}")))?;
        parse_field(parsed.probs, state, &self.vocab)
    }
}

fn read_body(resp: std::result::Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<String> {
    let mut resp = resp.map_err(classify)?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .with_config()
        .limit(u64::MAX)
        .read_to_string()
        .map_err(classify)?;
    match status {
        200..=299 => Ok(text),
        500..=599 => Err(Error::Transport(format!("server error {status}: {text}"))),
        _ => Err(Error::Protocol(format!("unexpected status {status}: {text}"))),
    }
}

fn classify(e: ureq::Error) -> Error {
    match e {
        ureq::Error::Decompress(..) | ureq::Error::Json(_) | ureq::Error::BodyExceedsLimit(_) => {
            Error::Protocol(e.to_string())
        }
        other => Error::Transport(other.to_string()),
    }
}

/// Validate and normalize a wire payload into a field for `state`.
pub(crate) fn parse_field(rows: Vec<Vec<f64>>, state: &SequenceState, vocab: &Vocabulary) -> Result<PredictiveField> {
    if rows.len() != state.len() {
        return Err(Error::Protocol(format!("expected {} rows, got {}", state.len(), rows.len())));
    }
    let width = vocab.size;
    let mut flat = Vec::with_capacity(width * rows.len());
    for (i, mut row) in rows.into_iter().enumerate() {
        if row.len() != width {
            return Err(Error::Protocol(format!("row {i} has {} entries, expected {width}", row.len())));
        }
        if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < -ACCEPT_TOLERANCE) {
            return Err(Error::Protocol(format!("row {i} has invalid entry {p}")));
        }
        row.iter_mut().for_each(|p| *p = p.max(0.0));
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > REJECT_TOLERANCE {
            return Err(Error::Protocol(format!("row {i} sums to {sum}")));
        }
        if let Some(p) = row.get_mut(vocab.mask_id as usize) {
            *p = 0.0;
        }
        if renormalize(&mut row) <= 0.0 {
            return Err(Error::Protocol(format!("row {i} has no mass on content tokens")));
        }
        flat.extend(row);
    }
    let mut field = PredictiveField::from_flat(width, flat)?;
    coerce_observed(&mut field, state);
    Ok(field)
}

impl ModelBackend for RemoteModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn predict(&self, state: &SequenceState) -> Result<PredictiveField> {
        self.remote_predict(state)
    }

    /// Up to `batch_size` requests in flight at once; output order matches input.
    fn predict_batch(&self, states: &[SequenceState]) -> Result<Vec<PredictiveField>> {
        let mut out = Vec::with_capacity(states.len());
        for chunk in states.chunks(self.cfg.batch_size) {
            let results: Vec<Result<PredictiveField>> = thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|s| scope.spawn(move || self.remote_predict(s)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(Error::Internal("predict thread panicked".into()))))
                    .collect()
            });
            for r in results {
                out.push(r?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> SequenceState {
        SequenceState::new(vec![1, 3, 3], 3, 2)
    }

    fn vocab() -> Vocabulary {
        Vocabulary::with_trailing_mask(3).unwrap()
    }

    #[test]
    fn slightly_off_rows_are_renormalized() {
        let rows = vec![vec![0.2, 0.5, 0.3], vec![0.5, 0.2505, 0.25], vec![1.0 / 3.0; 3]];
        let f = parse_field(rows, &state(), &vocab()).unwrap();
        assert_eq!(f.row(0), &[0.0, 1.0, 0.0], "observed position coerced");
        assert!((f.row(1).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((f.row(1)[0] - 0.5 / 1.0005).abs() < 1e-12);
    }

    #[test]
    fn shape_and_mass_violations_are_protocol_errors() {
        let short = vec![vec![1.0, 0.0, 0.0]; 2];
        assert!(matches!(parse_field(short, &state(), &vocab()), Err(Error::Protocol(_))));
        let narrow = vec![vec![1.0, 0.0]; 3];
        assert!(matches!(parse_field(narrow, &state(), &vocab()), Err(Error::Protocol(_))));
        let heavy = vec![vec![0.5, 0.52, 0.0]; 3];
        assert!(matches!(parse_field(heavy, &state(), &vocab()), Err(Error::Protocol(_))));
        let nan = vec![vec![f64::NAN, 0.5, 0.5]; 3];
        assert!(matches!(parse_field(nan, &state(), &vocab()), Err(Error::Protocol(_))));
    }

    #[test]
    fn mask_column_is_dropped() {
        let v = Vocabulary::new(3, 2).unwrap();
        let s = SequenceState::new(vec![2], 2, 1);
        let f = parse_field(vec![vec![0.25, 0.25, 0.5]], &s, &v).unwrap();
        assert_eq!(f.row(0), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(RemoteModelConfig::default().validate().is_ok());
        let bad = RemoteModelConfig { timeout_ms: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = RemoteModelConfig { endpoint: "not a url".into(), ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
