//! Vocabulary and sequence state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Token alphabet of a model.
///
/// Rows of a [`PredictiveField`](crate::PredictiveField) have `size` entries
/// indexed by token id. The mask symbol never carries predictive mass: when
/// `mask_id < size` its column is held at zero, and the usual convention is
/// `mask_id == size` so that every row entry is a content token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub size: usize,
    pub mask_id: TokenId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

impl Vocabulary {
    pub fn new(size: usize, mask_id: TokenId) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("vocabulary size must be positive"));
        }
        if (mask_id as usize) < size && size < 2 {
            return Err(Error::invalid("vocabulary has no content token besides the mask"));
        }
        Ok(Self { size, mask_id, names: None })
    }

    /// Vocabulary whose mask symbol sits just past the content ids.
    pub fn with_trailing_mask(size: usize) -> Result<Self> {
        Self::new(size, size as TokenId)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        self.names = Some(names);
        self
    }

    /// Number of tokens a model may actually predict.
    pub fn content_count(&self) -> usize {
        if (self.mask_id as usize) < self.size {
            self.size - 1
        } else {
            self.size
        }
    }

    pub fn is_content(&self, token: TokenId) -> bool {
        token != self.mask_id && (token as usize) < self.size
    }

    pub fn content_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.size as TokenId).filter(move |&t| t != self.mask_id)
    }

    /// Uniform row over the content tokens.
    pub fn uniform_row(&self) -> Vec<f64> {
        let p = 1.0 / self.content_count() as f64;
        (0..self.size as TokenId)
            .map(|t| if t == self.mask_id { 0.0 } else { p })
            .collect()
    }

    pub fn point_mass(&self, token: TokenId) -> Vec<f64> {
        let mut row = vec![0.0; self.size];
        row[token as usize] = 1.0;
        row
    }

    pub fn display(&self, token: TokenId) -> String {
        if token == self.mask_id {
            return "?".to_string();
        }
        match &self.names {
            Some(names) if (token as usize) < names.len() => names[token as usize].clone(),
            _ => token.to_string(),
        }
    }

    pub fn render(&self, tokens: &[TokenId]) -> String {
        let parts: Vec<String> = tokens.iter().map(|&t| self.display(t)).collect();
        if self.names.is_some() && parts.iter().all(|p| p.chars().count() == 1) {
            parts.concat()
        } else {
            parts.join(" ")
        }
    }
}

/// A fixed-length token array at denoising step `step`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequenceState {
    pub tokens: Vec<TokenId>,
    pub mask_id: TokenId,
    pub step: usize,
}

impl SequenceState {
    pub fn new(tokens: Vec<TokenId>, mask_id: TokenId, step: usize) -> Self {
        Self { tokens, mask_id, step }
    }

    /// All-mask sequence of length `len`.
    pub fn masked(len: usize, mask_id: TokenId) -> Self {
        Self::new(vec![mask_id; len], mask_id, 0)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_masked(&self, pos: usize) -> bool {
        self.tokens[pos] == self.mask_id
    }

    /// Positions still holding the mask symbol, ascending.
    pub fn masked_indices(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == self.mask_id)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn masked_count(&self) -> usize {
        self.tokens.iter().filter(|&&t| t == self.mask_id).count()
    }

    pub fn is_complete(&self) -> bool {
        !self.tokens.contains(&self.mask_id)
    }

    /// Copy of this state with `commits` written in and the step counter decremented.
    pub fn with_commits(&self, commits: &[(usize, TokenId)]) -> Result<Self> {
        let mut next = self.clone();
        for &(pos, tok) in commits {
            if pos >= next.len() {
                return Err(Error::invalid(format!("position {pos} out of range")));
            }
            if !next.is_masked(pos) {
                return Err(Error::invalid(format!("position {pos} is already unmasked")));
            }
            if tok == self.mask_id {
                return Err(Error::invalid("cannot commit the mask symbol"));
            }
            next.tokens[pos] = tok;
        }
        next.step = next.step.saturating_sub(1);
        Ok(next)
    }
}
