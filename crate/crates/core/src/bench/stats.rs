//! Small-sample statistics for comparing paired measurements.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Outcome of a paired t-test of `a - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

impl PairedTest {
    /// One-sided p-value for the alternative `mean(a) > mean(b)`.
    pub fn p_greater(&self) -> f64 {
        if self.mean_diff > 0.0 {
            self.p_value / 2.0
        } else {
            1.0 - self.p_value / 2.0
        }
    }

    /// One-sided p-value for the alternative `mean(a) < mean(b)`.
    pub fn p_less(&self) -> f64 {
        if self.mean_diff < 0.0 {
            self.p_value / 2.0
        } else {
            1.0 - self.p_value / 2.0
        }
    }
}

/// Paired t-test on `a[i] - b[i]`. Identical nonzero differences give
/// `p = 0`; all-zero differences give `p = 1`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), actual: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::invalid("a paired test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let m = mean(&d);
    let se = (variance(&d) / n as f64).sqrt();
    if se == 0.0 {
        let (t, p) = if m == 0.0 { (0.0, 1.0) } else { (m.signum() * f64::INFINITY, 0.0) };
        return Ok(PairedTest { n, mean_diff: m, t, p_value: p });
    }
    let t = m / se;
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::Internal(e.to_string()))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(PairedTest { n, mean_diff: m, t, p_value: p.clamp(0.0, 1.0) })
}
