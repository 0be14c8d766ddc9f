//! Per-position categorical predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::TokenId;

/// Row-sum tolerance for a valid categorical distribution.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Check that `row` is a probability vector.
pub fn validate_row(row: &[f64]) -> Result<()> {
    if row.is_empty() {
        return Err(Error::InvalidDistribution("empty row".into()));
    }
    let mut sum = 0.0;
    for &p in row {
        if !p.is_finite() || !(0.0..=1.0 + NORM_TOLERANCE).contains(&p) {
            return Err(Error::InvalidDistribution(format!("entry {p} outside [0, 1]")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("row sums to {sum}")));
    }
    Ok(())
}

/// Predictive distributions for every position of a sequence.
///
/// Stored row-major with a fixed row width (the vocabulary size). Observed
/// positions carry point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveField {
    width: usize,
    probs: Vec<f64>,
    /// Set when the backend had no information for the conditioning state
    /// (an oracle whose support contains no consistent sequence).
    #[serde(default)]
    pub off_support: bool,
}

impl PredictiveField {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        let mut probs = Vec::with_capacity(width * rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidDistribution(format!(
                    "row {i} has width {}, expected {width}",
                    row.len()
                )));
            }
            validate_row(&row)?;
            probs.extend(row);
        }
        Ok(Self { width, probs, off_support: false })
    }

    /// Build from a flat row-major buffer. Rows are validated.
    pub fn from_flat(width: usize, probs: Vec<f64>) -> Result<Self> {
        if width == 0 || probs.len() % width != 0 {
            return Err(Error::InvalidDistribution("buffer is not a whole number of rows".into()));
        }
        for row in probs.chunks(width) {
            validate_row(row)?;
        }
        Ok(Self { width, probs, off_support: false })
    }

    pub(crate) fn from_flat_unchecked(width: usize, probs: Vec<f64>) -> Self {
        Self { width, probs, off_support: false }
    }

    pub fn with_off_support(mut self, flag: bool) -> Self {
        self.off_support = flag;
        self
    }

    pub fn len(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.probs.len() / self.width
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, pos: usize) -> &[f64] {
        &self.probs[pos * self.width..(pos + 1) * self.width]
    }

    pub(crate) fn row_mut(&mut self, pos: usize) -> &mut [f64] {
        &mut self.probs[pos * self.width..(pos + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.width)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Most probable token at `pos`, lowest id on ties.
    pub fn argmax(&self, pos: usize) -> TokenId {
        argmax(self.row(pos)) as TokenId
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = i;
        }
    }
    best
}

/// Renormalize `row` in place. Returns the pre-normalization sum.
pub(crate) fn renormalize(row: &mut [f64]) -> f64 {
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        row.iter_mut().for_each(|p| *p /= sum);
    }
    sum
}
