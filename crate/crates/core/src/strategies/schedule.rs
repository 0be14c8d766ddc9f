use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How many positions to unmask at each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BudgetSchedule {
    /// Fixed number per step; the final step takes what is left.
    Constant { tokens_per_step: usize },
    /// Spread the masked count evenly over `total_steps`; the final step
    /// absorbs the remainder.
    Linear { total_steps: usize },
}

impl Default for BudgetSchedule {
    fn default() -> Self {
        BudgetSchedule::Constant { tokens_per_step: 2 }
    }
}

impl BudgetSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BudgetSchedule::Constant { tokens_per_step: 0 } => Err(Error::invalid("tokens_per_step must be positive")),
            BudgetSchedule::Linear { total_steps: 0 } => Err(Error::invalid("total_steps must be positive")),
            _ => Ok(()),
        }
    }

    /// Per-step budgets for `masked` initially masked positions.
    pub fn budgets(&self, masked: usize) -> Result<Vec<usize>> {
        self.validate()?;
        if masked == 0 {
            return Ok(Vec::new());
        }
        let out = match *self {
            BudgetSchedule::Constant { tokens_per_step } => {
                let steps = masked.div_ceil(tokens_per_step);
                let mut b = vec![tokens_per_step; steps];
                b[steps - 1] = masked - tokens_per_step * (steps - 1);
                b
            }
            BudgetSchedule::Linear { total_steps } => {
                let steps = total_steps.min(masked);
                let base = masked / steps;
                let mut b = vec![base; steps];
                b[steps - 1] += masked - base * steps;
                b
            }
        };
        debug_assert_eq!(out.iter().sum::<usize>(), masked);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_remainder_goes_last() {
        let s = BudgetSchedule::Constant { tokens_per_step: 2 };
        assert_eq!(s.budgets(5).unwrap(), vec![2, 2, 1]);
        assert_eq!(s.budgets(4).unwrap(), vec![2, 2]);
        assert!(s.budgets(0).unwrap().is_empty());
    }

    #[test]
    fn linear_spreads_evenly() {
        assert_eq!(BudgetSchedule::Linear { total_steps: 3 }.budgets(8).unwrap(), vec![2, 2, 4]);
        assert_eq!(BudgetSchedule::Linear { total_steps: 10 }.budgets(3).unwrap(), vec![1, 1, 1]);
        assert!(BudgetSchedule::Linear { total_steps: 0 }.budgets(3).is_err());
    }

    proptest! {
        #[test]
        fn budgets_cover_the_mask_exactly(masked in 1usize..200, per in 1usize..9, steps in 1usize..40) {
            for s in [BudgetSchedule::Constant { tokens_per_step: per }, BudgetSchedule::Linear { total_steps: steps }] {
                let b = s.budgets(masked).unwrap();
                prop_assert_eq!(b.iter().sum::<usize>(), masked);
                prop_assert!(b.iter().all(|&x| x >= 1));
            }
        }
    }
}
