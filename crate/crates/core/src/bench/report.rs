//! Run reports: per-instance records, aggregates recomputable from them,
//! and timing kept apart so reports compare byte-for-byte across runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::stats::{mean, PairedTest};
use crate::error::{Error, Result};
use crate::state::TokenId;
use crate::trace::StepTrace;

const AGG_TOLERANCE: f64 = 1e-12;

/// Wall-clock information, the only field allowed to differ between reruns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_ms: u64,
    pub finished_unix_ms: u64,
}

impl Timing {
    pub fn since(start: std::time::Instant) -> Self {
        let finished_unix_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Self { wall_clock_ms: start.elapsed().as_millis() as u64, finished_unix_ms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub output: Vec<TokenId>,
    pub rendered: String,
    pub exact_match: bool,
    pub local_errors: usize,
    pub commits: usize,
    pub backend_calls: u64,
    pub steps: Vec<StepTrace>,
}

impl InstanceRecord {
    pub fn local_error_rate(&self) -> f64 {
        if self.commits == 0 {
            0.0
        } else {
            self.local_errors as f64 / self.commits as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub instances: usize,
    pub accuracy: f64,
    /// Local errors over all commits of all instances.
    pub local_error_rate: f64,
    /// Mean of the per-instance local-error rates.
    pub mean_local_error_rate: f64,
    pub total_commits: usize,
    pub total_local_errors: usize,
    pub total_backend_calls: u64,
    pub mean_backend_calls: f64,
}

impl Aggregates {
    pub fn from_records(records: &[InstanceRecord]) -> Self {
        let n = records.len();
        let total_commits: usize = records.iter().map(|r| r.commits).sum();
        let total_local_errors: usize = records.iter().map(|r| r.local_errors).sum();
        let total_backend_calls: u64 = records.iter().map(|r| r.backend_calls).sum();
        let hits: Vec<f64> = records.iter().map(|r| r.exact_match as u8 as f64).collect();
        let rates: Vec<f64> = records.iter().map(InstanceRecord::local_error_rate).collect();
        Self {
            instances: n,
            accuracy: mean(&hits),
            local_error_rate: if total_commits == 0 { 0.0 } else { total_local_errors as f64 / total_commits as f64 },
            mean_local_error_rate: mean(&rates),
            total_commits,
            total_local_errors,
            total_backend_calls,
            mean_backend_calls: if n == 0 { 0.0 } else { total_backend_calls as f64 / n as f64 },
        }
    }

    fn matches(&self, other: &Self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= AGG_TOLERANCE;
        self.instances == other.instances
            && self.total_commits == other.total_commits
            && self.total_local_errors == other.total_local_errors
            && self.total_backend_calls == other.total_backend_calls
            && close(self.accuracy, other.accuracy)
            && close(self.local_error_rate, other.local_error_rate)
            && close(self.mean_local_error_rate, other.mean_local_error_rate)
            && close(self.mean_backend_calls, other.mean_backend_calls)
    }

    pub const CSV_HEADER: &'static str = "label,instances,accuracy,local_error_rate,mean_local_error_rate,\
total_commits,total_local_errors,total_backend_calls,mean_backend_calls";

    pub fn csv_row(&self, label: &str) -> String {
        format!(
            "{label},{},{},{},{},{},{},{},{}",
            self.instances,
            self.accuracy,
            self.local_error_rate,
            self.mean_local_error_rate,
            self.total_commits,
            self.total_local_errors,
            self.total_backend_calls,
            self.mean_backend_calls
        )
    }
}

/// Outcome of decoding a set of instances with one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    /// Snapshot of the configuration that produced the run.
    pub config: serde_json::Value,
    pub records: Vec<InstanceRecord>,
    pub aggregates: Aggregates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl RunReport {
    pub fn new(label: impl Into<String>, config: serde_json::Value, records: Vec<InstanceRecord>) -> Self {
        let aggregates = Aggregates::from_records(&records);
        Self { label: label.into(), config, records, aggregates, timing: None }
    }

    /// Check that the stored aggregates equal their recomputation.
    pub fn validate(&self) -> Result<()> {
        if !self.aggregates.matches(&Aggregates::from_records(&self.records)) {
            return Err(Error::invalid(format!("report '{}' aggregates disagree with its records", self.label)));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        report.validate()?;
        Ok(report)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON without timing, identical for identical runs.
    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.timing = None;
        copy.to_json()
    }

    pub fn aggregates_csv(&self) -> String {
        format!("{}\n{}\n", Aggregates::CSV_HEADER, self.aggregates.csv_row(&self.label))
    }

    /// Write `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.aggregates_csv())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub accuracy: f64,
    pub local_error_rate: f64,
    pub mean_backend_calls: f64,
}

/// One run report per path count, over the same instances and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: serde_json::Value,
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl SweepReport {
    pub fn new(config: serde_json::Value, ks: &[usize], runs: Vec<RunReport>) -> Self {
        let rows = ks
            .iter()
            .zip(&runs)
            .map(|(&k, r)| SweepRow {
                k,
                accuracy: r.aggregates.accuracy,
                local_error_rate: r.aggregates.local_error_rate,
                mean_backend_calls: r.aggregates.mean_backend_calls,
            })
            .collect();
        Self { config, rows, runs, timing: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.len() != self.runs.len() {
            return Err(Error::invalid("sweep has a different number of rows and runs"));
        }
        for (row, run) in self.rows.iter().zip(&self.runs) {
            run.validate()?;
            if row.accuracy != run.aggregates.accuracy || row.local_error_rate != run.aggregates.local_error_rate {
                return Err(Error::invalid(format!("sweep row k={} disagrees with its run", row.k)));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        report.validate()?;
        Ok(report)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.timing = None;
        copy.runs.iter_mut().for_each(|r| r.timing = None);
        copy.to_json()
    }

    pub fn table_csv(&self) -> String {
        let mut out = String::from("k,accuracy,local_error_rate,mean_backend_calls\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.k, r.accuracy, r.local_error_rate, r.mean_backend_calls));
        }
        out
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.table_csv())?;
        Ok(())
    }
}

/// One injected position: the same prefix continued with the correct token
/// and with a wrong one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub instance: usize,
    pub position: usize,
    pub correct_token: TokenId,
    pub wrong_token: TokenId,
    pub entropy_correct: f64,
    pub entropy_error: f64,
    pub confidence_correct: f64,
    pub confidence_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionSummary {
    pub samples: usize,
    pub skipped: usize,
    pub mean_entropy_correct: f64,
    pub mean_entropy_error: f64,
    pub mean_confidence_correct: f64,
    pub mean_confidence_error: f64,
    /// Paired over instances: error-condition entropy minus correct-condition entropy.
    pub entropy_test: Option<PairedTest>,
    /// Paired over instances: error-condition confidence minus correct-condition confidence.
    pub confidence_test: Option<PairedTest>,
}

impl InjectionSummary {
    pub fn from_records(records: &[InjectionRecord], skipped: usize) -> Result<Self> {
        let col = |f: fn(&InjectionRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
        let (he, hc) = per_instance(records, |r| r.entropy_error, |r| r.entropy_correct);
        let (ce, cc) = per_instance(records, |r| r.confidence_error, |r| r.confidence_correct);
        let test = |a: &[f64], b: &[f64]| -> Result<Option<PairedTest>> {
            if a.len() < 2 {
                Ok(None)
            } else {
                crate::bench::stats::paired_t_test(a, b).map(Some)
            }
        };
        Ok(Self {
            samples: records.len(),
            skipped,
            mean_entropy_correct: mean(&col(|r| r.entropy_correct)),
            mean_entropy_error: mean(&col(|r| r.entropy_error)),
            mean_confidence_correct: mean(&col(|r| r.confidence_correct)),
            mean_confidence_error: mean(&col(|r| r.confidence_error)),
            entropy_test: test(&he, &hc)?,
            confidence_test: test(&ce, &cc)?,
        })
    }
}

/// Per-instance means of two paired columns, instances in first-seen order.
fn per_instance(
    records: &[InjectionRecord],
    a: fn(&InjectionRecord) -> f64,
    b: fn(&InjectionRecord) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut groups: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::new();
    for r in records {
        match groups.last_mut() {
            Some(g) if g.0 == r.instance => {
                g.1.push(a(r));
                g.2.push(b(r));
            }
            _ => groups.push((r.instance, vec![a(r)], vec![b(r)])),
        }
    }
    groups.iter().map(|(_, x, y)| (mean(x), mean(y))).unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionReport {
    pub config: serde_json::Value,
    pub records: Vec<InjectionRecord>,
    pub summary: InjectionSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl InjectionReport {
    pub fn new(config: serde_json::Value, records: Vec<InjectionRecord>, skipped: usize) -> Result<Self> {
        let summary = InjectionSummary::from_records(&records, skipped)?;
        Ok(Self { config, records, summary, timing: None })
    }

    pub fn validate(&self) -> Result<()> {
        let again = InjectionSummary::from_records(&self.records, self.summary.skipped)?;
        let s = &self.summary;
        let close = |a: f64, b: f64| (a - b).abs() <= AGG_TOLERANCE;
        let ok = again.samples == s.samples
            && close(again.mean_entropy_correct, s.mean_entropy_correct)
            && close(again.mean_entropy_error, s.mean_entropy_error)
            && close(again.mean_confidence_correct, s.mean_confidence_correct)
            && close(again.mean_confidence_error, s.mean_confidence_error);
        if !ok {
            return Err(Error::invalid("injection summary disagrees with its records"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        report.validate()?;
        Ok(report)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.timing = None;
        copy.to_json()
    }

    pub fn summary_csv(&self) -> String {
        let s = &self.summary;
        let p = |t: &Option<PairedTest>| t.map(|t| t.p_value.to_string()).unwrap_or_default();
        format!(
            "condition,mean_entropy,mean_confidence,samples,skipped,entropy_p,confidence_p\n\
             correct,{},{},{},{},{},{}\nerror,{},{},{},{},{},{}\n",
            s.mean_entropy_correct,
            s.mean_confidence_correct,
            s.samples,
            s.skipped,
            p(&s.entropy_test),
            p(&s.confidence_test),
            s.mean_entropy_error,
            s.mean_confidence_error,
            s.samples,
            s.skipped,
            p(&s.entropy_test),
            p(&s.confidence_test),
        )
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.summary_csv())?;
        Ok(())
    }
}
