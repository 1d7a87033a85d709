//! Positive likelihood and negative-data unlikelihood losses over per-token
//! cross entropies.
//!
//! For a negative token with cross entropy `l` the model probability is
//! `p = exp(-l)` and the penalty is `-ln(1 - p)`, summed over tokens and
//! scaled by `alpha`. The penalty is unbounded as `p -> 1`, so `p` is
//! clamped to at most `1 - floor`, capping each token's penalty at
//! `-ln(floor)`.

use crate::error::{Error, Result};

pub const DEFAULT_UNLIKELIHOOD_FLOOR: f64 = 1e-6;

/// Per-token natural-log cross entropies, one per predicted token.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenLosses(Vec<f64>);

impl TokenLosses {
    pub fn new(losses: Vec<f64>) -> Result<Self> {
        if let Some(bad) = losses.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "token loss must be finite and non-negative, got {bad}"
            )));
        }
        Ok(TokenLosses(losses))
    }

    pub(crate) fn from_vec_unchecked(losses: Vec<f64>) -> Self {
        TokenLosses(losses)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn extend(&mut self, other: &TokenLosses) {
        self.0.extend_from_slice(&other.0);
    }
}

/// Summed negative log-likelihood.
pub fn positive_loss(losses: &TokenLosses) -> f64 {
    losses.0.iter().sum()
}

/// `-ln(1 - min(exp(-l), 1 - floor))` for one token.
pub fn unlikelihood_term(loss: f64, floor: f64) -> f64 {
    let p = (-loss).exp();
    if p >= 1.0 - floor {
        -floor.ln()
    } else {
        // 1 - exp(-l) without cancellation for small l
        -(-(-loss).exp_m1()).ln()
    }
}

/// Derivative of [`unlikelihood_term`] with respect to the token loss:
/// `-p / (1 - p)` inside the clamp, zero where the clamp is active.
pub fn unlikelihood_term_derivative(loss: f64, floor: f64) -> f64 {
    let p = (-loss).exp();
    if p >= 1.0 - floor {
        0.0
    } else {
        -p / -(-loss).exp_m1()
    }
}

pub fn negative_loss(losses: &TokenLosses, alpha: f64, floor: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    alpha
        * losses
            .0
            .iter()
            .map(|&l| unlikelihood_term(l, floor))
            .sum::<f64>()
}

pub fn combined_loss(pos: &TokenLosses, neg: &TokenLosses, alpha: f64, floor: f64) -> f64 {
    positive_loss(pos) + negative_loss(neg, alpha, floor)
}

pub fn validate_floor(floor: f64) -> Result<()> {
    if floor > 0.0 && floor < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "unlikelihood floor must be in (0, 0.5), got {floor}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn tl(v: &[f64]) -> TokenLosses {
        TokenLosses::new(v.to_vec()).unwrap()
    }

    #[test]
    fn positive_loss_examples() {
        assert!((positive_loss(&tl(&[LN_2, LN_2])) - 2.0 * LN_2).abs() < 1e-15);
        assert_eq!(positive_loss(&tl(&[0.0])), 0.0);
    }

    #[test]
    fn negative_loss_examples() {
        let ln2 = negative_loss(&tl(&[LN_2]), 1.0, DEFAULT_UNLIKELIHOOD_FLOOR);
        assert!((ln2 - LN_2).abs() < 1e-15);
        assert_eq!(negative_loss(&tl(&[0.1, 3.0]), 0.0, 1e-6), 0.0);
        let at_clamp = negative_loss(&tl(&[0.0]), 1.0, 1e-6);
        assert_eq!(at_clamp, -(1e-6f64).ln());
        assert!((at_clamp - 13.8155).abs() < 1e-4);
    }

    #[test]
    fn combined_loss_examples() {
        let pos = tl(&[LN_2]);
        let neg = tl(&[LN_2]);
        assert!((combined_loss(&pos, &neg, 1.0, 1e-6) - 2.0 * LN_2).abs() < 1e-12);
        assert_eq!(combined_loss(&pos, &neg, 0.0, 1e-6), positive_loss(&pos));
    }

    #[test]
    fn token_losses_reject_bad_entries() {
        assert!(TokenLosses::new(vec![-0.1]).is_err());
        assert!(TokenLosses::new(vec![f64::NAN]).is_err());
        assert!(TokenLosses::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn floor_bounds() {
        assert!(validate_floor(1e-6).is_ok());
        assert!(validate_floor(0.0).is_err());
        assert!(validate_floor(0.5).is_err());
    }

    #[test]
    fn derivative_matches_central_difference() {
        for &l in &[0.01, 0.3, 1.0, 2.5, 7.0] {
            let h = 1e-6;
            let fd = (unlikelihood_term(l + h, 1e-6) - unlikelihood_term(l - h, 1e-6)) / (2.0 * h);
            let an = unlikelihood_term_derivative(l, 1e-6);
            assert!(
                (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                "{l}: {fd} vs {an}"
            );
        }
    }

    proptest! {
        #[test]
        fn jensen_product_bound(p in prop::collection::vec(0.0001f64..0.9999, 1..20)) {
            let prod_one_minus: f64 = p.iter().map(|x| 1.0 - x).product();
            let one_minus_prod = 1.0 - p.iter().product::<f64>();
            prop_assert!(prod_one_minus <= one_minus_prod);
        }

        #[test]
        fn negative_loss_is_finite_and_nonnegative(
            l in prop::collection::vec(0.0f64..50.0, 0..20),
            alpha in 0.0f64..16.0,
            floor in 1e-12f64..0.499,
        ) {
            let v = negative_loss(&tl(&l), alpha, floor);
            prop_assert!(v.is_finite());
            prop_assert!(v >= 0.0);
        }

        #[test]
        fn unlikelihood_strictly_decreasing(a in 1e-4f64..20.0, delta in 1e-3f64..5.0) {
            prop_assert!(unlikelihood_term(a, 1e-6) > unlikelihood_term(a + delta, 1e-6));
        }

        #[test]
        fn combined_is_sum_of_parts(
            pos in prop::collection::vec(0.0f64..10.0, 1..10),
            neg in prop::collection::vec(0.0f64..10.0, 0..10),
            alpha in 0.0f64..8.0,
        ) {
            let expected: f64 = pos.iter().sum::<f64>()
                + alpha * neg.iter().map(|&l| -(1.0 - (-l).exp()).max(1e-6).ln()).sum::<f64>();
            let got = combined_loss(&tl(&pos), &tl(&neg), alpha, 1e-6);
            prop_assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
    }
}
