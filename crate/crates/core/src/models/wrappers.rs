//! Backends that reshape another backend's masked-position rows.

use crate::error::{Error, Result};
use crate::field::PredictiveField;
use crate::models::ModelBackend;
use crate::score::apply_temperature;
use crate::state::{SequenceState, Vocabulary};

/// Masked rows become `p^(1/tau)` renormalized.
pub struct Tempered<B> {
    inner: B,
    tau: f64,
}

/// Masked rows become `(1 - eps) p + eps * uniform`.
pub struct Noisy<B> {
    inner: B,
    eps: f64,
}

pub fn temperature_wrap<B: ModelBackend>(inner: B, tau: f64) -> Result<Tempered<B>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("temperature must be positive, got {tau}")));
    }
    Ok(Tempered { inner, tau })
}

pub fn noise_wrap<B: ModelBackend>(inner: B, eps: f64) -> Result<Noisy<B>> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!("noise level must lie in [0, 1], got {eps}")));
    }
    Ok(Noisy { inner, eps })
}

fn map_masked(
    mut field: PredictiveField,
    state: &SequenceState,
    mut f: impl FnMut(&mut [f64]),
) -> PredictiveField {
    for pos in state.masked_indices() {
        f(field.row_mut(pos));
    }
    field
}

impl<B: ModelBackend> Tempered<B> {
    fn reshape(&self, field: PredictiveField, state: &SequenceState) -> PredictiveField {
        if self.tau == 1.0 {
            return field;
        }
        map_masked(field, state, |row| {
            let sharp = apply_temperature(row, self.tau);
            row.copy_from_slice(&sharp);
        })
    }
}

impl<B: ModelBackend> ModelBackend for Tempered<B> {
    fn vocab(&self) -> &Vocabulary {
        self.inner.vocab()
    }

    fn predict(&self, state: &SequenceState) -> Result<PredictiveField> {
        Ok(self.reshape(self.inner.predict(state)?, state))
    }

    fn predict_batch(&self, states: &[SequenceState]) -> Result<Vec<PredictiveField>> {
        let fields = self.inner.predict_batch(states)?;
        Ok(fields.into_iter().zip(states).map(|(f, s)| self.reshape(f, s)).collect())
    }
}

impl<B: ModelBackend> Noisy<B> {
    fn reshape(&self, field: PredictiveField, state: &SequenceState) -> PredictiveField {
        if self.eps == 0.0 {
            return field;
        }
        let uniform = self.inner.vocab().uniform_row();
        let eps = self.eps;
        map_masked(field, state, |row| {
            for (p, u) in row.iter_mut().zip(&uniform) {
                *p = (1.0 - eps) * *p + eps * u;
            }
        })
    }
}

impl<B: ModelBackend> ModelBackend for Noisy<B> {
    fn vocab(&self) -> &Vocabulary {
        self.inner.vocab()
    }

    fn predict(&self, state: &SequenceState) -> Result<PredictiveField> {
        Ok(self.reshape(self.inner.predict(state)?, state))
    }

    fn predict_batch(&self, states: &[SequenceState]) -> Result<Vec<PredictiveField>> {
        let fields = self.inner.predict_batch(states)?;
        Ok(fields.into_iter().zip(states).map(|(f, s)| self.reshape(f, s)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::OracleSupport;

    /// Backend returning a fixed row at every masked position.
    struct Fixed {
        vocab: Vocabulary,
        row: Vec<f64>,
    }

    impl ModelBackend for Fixed {
        fn vocab(&self) -> &Vocabulary {
            &self.vocab
        }
        fn predict(&self, state: &SequenceState) -> Result<PredictiveField> {
            let rows = state
                .tokens
                .iter()
                .map(|&t| if t == state.mask_id { self.row.clone() } else { self.vocab.point_mass(t) })
                .collect();
            PredictiveField::from_rows(rows)
        }
    }

    fn fixed(row: &[f64]) -> Fixed {
        Fixed { vocab: Vocabulary::with_trailing_mask(row.len()).unwrap(), row: row.to_vec() }
    }

    fn masked_row<B: ModelBackend>(b: &B) -> Vec<f64> {
        let mask = b.vocab().mask_id;
        let s = SequenceState::new(vec![0, mask], mask, 1);
        let f = b.predict(&s).unwrap();
        assert_eq!(f.row(0)[0], 1.0, "observed rows must stay point masses");
        f.row(1).to_vec()
    }

    #[test]
    fn temperature_examples() {
        assert_eq!(masked_row(&temperature_wrap(fixed(&[0.6, 0.4]), 1.0).unwrap()), vec![0.6, 0.4]);
        let half = masked_row(&temperature_wrap(fixed(&[0.8, 0.2]), 0.5).unwrap());
        assert!((half[0] - 0.64 / 0.68).abs() < 1e-12);
        assert!((half[0] - 0.941).abs() < 1e-3 && (half[1] - 0.059).abs() < 1e-3);
        let cold = masked_row(&temperature_wrap(fixed(&[0.6, 0.4]), 1e-3).unwrap());
        assert!(cold[0] > 1.0 - 1e-12 && cold[1] < 1e-12);
        assert!(temperature_wrap(fixed(&[1.0]), 0.0).is_err());
        assert!(temperature_wrap(fixed(&[1.0]), -1.0).is_err());
    }

    #[test]
    fn noise_examples() {
        assert_eq!(masked_row(&noise_wrap(fixed(&[0.6, 0.4]), 0.0).unwrap()), vec![0.6, 0.4]);
        assert_eq!(masked_row(&noise_wrap(fixed(&[0.9, 0.1]), 1.0).unwrap()), vec![0.5, 0.5]);
        assert_eq!(masked_row(&noise_wrap(fixed(&[1.0, 0.0]), 0.5).unwrap()), vec![0.75, 0.25]);
        assert!(noise_wrap(fixed(&[1.0]), 1.5).is_err());
        assert!(noise_wrap(fixed(&[1.0]), -0.1).is_err());
    }

    #[test]
    fn identity_wrappers_preserve_oracle_fields() {
        let v = Vocabulary::with_trailing_mask(3).unwrap();
        let s = OracleSupport::new(v, vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 1, 1]], vec![1.0, 2.0, 0.5])
            .unwrap();
        let st = SequenceState::new(vec![3, 3, 1], 3, 2);
        let base = s.predict(&st).unwrap();
        assert_eq!(temperature_wrap(&s, 1.0).unwrap().predict(&st).unwrap(), base);
        assert_eq!(noise_wrap(&s, 0.0).unwrap().predict(&st).unwrap(), base);
    }
}
