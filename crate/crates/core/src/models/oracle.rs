//! Exact masked predictor over an explicit weighted support.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::field::PredictiveField;
use crate::models::ModelBackend;
use crate::state::{SequenceState, TokenId, Vocabulary};

/// Upper bound on support size for an oracle.
pub const MAX_ORACLE_SEQUENCES: usize = 1_000_000;

/// Fixed-size bit set over support sequence indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitset {
    words: Vec<u64>,
    len: usize,
}

impl Bitset {
    pub fn empty(len: usize) -> Self {
        Self { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn full(len: usize) -> Self {
        let mut b = Self { words: vec![u64::MAX; len.div_ceil(64)], len };
        let tail = len % 64;
        if tail != 0 {
            if let Some(last) = b.words.last_mut() {
                *last = (1u64 << tail) - 1;
            }
        }
        b
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn intersect_with(&mut self, other: &Bitset) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut word = w;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(wi * 64 + bit)
            })
        })
    }
}

/// A weighted set of complete sequences defining an exact masked predictor.
///
/// For a state `x`, the prediction at masked position `i` is the weight of
/// all support sequences agreeing with every observed token of `x`, split by
/// their token at `i`. Duplicate sequences are merged by summing weights.
#[derive(Debug, Clone)]
pub struct OracleSupport {
    vocab: Vocabulary,
    len: usize,
    sequences: Vec<Vec<TokenId>>,
    weights: Vec<f64>,
    /// `index[pos][token]`: sequences carrying `token` at `pos`.
    index: Vec<Vec<Bitset>>,
}

impl OracleSupport {
    pub fn new(vocab: Vocabulary, sequences: Vec<Vec<TokenId>>, weights: Vec<f64>) -> Result<Self> {
        if sequences.is_empty() {
            return Err(Error::invalid("oracle support must contain at least one sequence"));
        }
        if sequences.len() != weights.len() {
            return Err(Error::LengthMismatch { expected: sequences.len(), actual: weights.len() });
        }
        if sequences.len() > MAX_ORACLE_SEQUENCES {
            return Err(Error::GuardExceeded { size: sequences.len(), limit: MAX_ORACLE_SEQUENCES });
        }
        let len = sequences[0].len();
        let mut merged: Vec<Vec<TokenId>> = Vec::new();
        let mut merged_w: Vec<f64> = Vec::new();
        let mut seen: HashMap<Vec<TokenId>, usize> = HashMap::new();
        for (seq, w) in sequences.into_iter().zip(weights) {
            if seq.len() != len {
                return Err(Error::LengthMismatch { expected: len, actual: seq.len() });
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("support weight {w} is not strictly positive")));
            }
            if let Some(&t) = seq.iter().find(|&&t| !vocab.is_content(t)) {
                return Err(Error::invalid(format!("support token {t} is not a content token")));
            }
            match seen.get(&seq) {
                Some(&j) => merged_w[j] += w,
                None => {
                    seen.insert(seq.clone(), merged.len());
                    merged.push(seq);
                    merged_w.push(w);
                }
            }
        }
        let n = merged.len();
        let mut index = vec![vec![Bitset::empty(n); vocab.size]; len];
        for (j, seq) in merged.iter().enumerate() {
            for (pos, &tok) in seq.iter().enumerate() {
                index[pos][tok as usize].insert(j);
            }
        }
        Ok(Self { vocab, len, sequences: merged, weights: merged_w, index })
    }

    /// Equal-weight support.
    pub fn uniform(vocab: Vocabulary, sequences: Vec<Vec<TokenId>>) -> Result<Self> {
        let w = vec![1.0; sequences.len()];
        Self::new(vocab, sequences, w)
    }

    pub fn seq_len(&self) -> usize {
        self.len
    }

    pub fn size(&self) -> usize {
        self.sequences.len()
    }

    pub fn sequences(&self) -> &[Vec<TokenId>] {
        &self.sequences
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Normalized probability of each support sequence.
    pub fn probabilities(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }

    /// Support sequences agreeing with every observed token of `tokens`.
    pub fn consistent(&self, tokens: &[TokenId]) -> Result<Bitset> {
        if tokens.len() != self.len {
            return Err(Error::LengthMismatch { expected: self.len, actual: tokens.len() });
        }
        let mut set = Bitset::full(self.size());
        for (pos, &tok) in tokens.iter().enumerate() {
            if tok == self.vocab.mask_id {
                continue;
            }
            match self.index[pos].get(tok as usize) {
                Some(bits) => set.intersect_with(bits),
                None => return Ok(Bitset::empty(self.size())),
            }
            if set.is_empty() {
                break;
            }
        }
        Ok(set)
    }

    /// Whether at least one support sequence agrees with the observed tokens.
    pub fn is_consistent(&self, tokens: &[TokenId]) -> Result<bool> {
        Ok(!self.consistent(tokens)?.is_empty())
    }

    pub fn contains(&self, seq: &[TokenId]) -> bool {
        seq.len() == self.len && seq.iter().all(|&t| t != self.vocab.mask_id) && self.is_consistent(seq).unwrap_or(false)
    }

    /// Same support restricted to sequences consistent with `tokens`.
    pub fn filtered(&self, tokens: &[TokenId]) -> Result<Option<OracleSupport>> {
        let set = self.consistent(tokens)?;
        if set.is_empty() {
            return Ok(None);
        }
        let seqs = set.iter().map(|j| self.sequences[j].clone()).collect();
        let ws = set.iter().map(|j| self.weights[j]).collect();
        Self::new(self.vocab.clone(), seqs, ws).map(Some)
    }

    /// Exact conditional predictions for `state`.
    pub fn oracle_predict(&self, state: &SequenceState) -> Result<PredictiveField> {
        if state.len() != self.len {
            return Err(Error::LengthMismatch { expected: self.len, actual: state.len() });
        }
        let width = self.vocab.size;
        let masked = state.masked_indices();
        let set = self.consistent(&state.tokens)?;
        let off_support = set.is_empty();
        let mut probs = vec![0.0; width * self.len];
        for (pos, &tok) in state.tokens.iter().enumerate() {
            if tok != state.mask_id {
                probs[pos * width + tok as usize] = 1.0;
            }
        }
        if off_support {
            let uniform = self.vocab.uniform_row();
            for &pos in &masked {
                probs[pos * width..(pos + 1) * width].copy_from_slice(&uniform);
            }
        } else {
            let mut total = 0.0;
            for j in set.iter() {
                let w = self.weights[j];
                total += w;
                let seq = &self.sequences[j];
                for &pos in &masked {
                    probs[pos * width + seq[pos] as usize] += w;
                }
            }
            for &pos in &masked {
                probs[pos * width..(pos + 1) * width].iter_mut().for_each(|p| *p /= total);
            }
        }
        Ok(PredictiveField::from_flat_unchecked(width, probs).with_off_support(off_support))
    }
}

impl ModelBackend for OracleSupport {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn predict(&self, state: &SequenceState) -> Result<PredictiveField> {
        self.oracle_predict(state)
    }
}
