//! Sequence losses. Optimization uses plain MSE; the turn-weighted variant
//! is reported alongside it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Mse,
    Weighted,
}

fn check<T>(pred: &[T], target: &[T]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("loss sequence"));
    }
    Ok(())
}

/// `(1/T) sum (pred_t - target_t)^2`
pub fn mse_loss<T: Scalar>(pred: &[T], target: &[T]) -> Result<T> {
    check(pred, target)?;
    let total = sum(pred.iter().zip(target).map(|(&p, &y)| (p - y) * (p - y)));
    Ok(total / T::lit(pred.len() as f64))
}

/// Per-step weights `|target_t| / sum |target|`, uniform when every target is zero.
pub fn turn_weights<T: Scalar>(target: &[T]) -> Vec<T> {
    let total = sum(target.iter().map(|y| y.abs()));
    if total > T::zero() && !uniform_magnitude(target) {
        target.iter().map(|y| y.abs() / total).collect()
    } else {
        vec![T::one() / T::lit(target.len() as f64); target.len()]
    }
}

fn uniform_magnitude<T: Scalar>(target: &[T]) -> bool {
    target.iter().all(|y| y.abs() == target[0].abs())
}

/// `sum w_t (pred_t - target_t)^2` with `w` from [`turn_weights`]. With
/// equal weights this is computed as the MSE itself, so the two agree exactly.
pub fn weighted_loss<T: Scalar>(pred: &[T], target: &[T]) -> Result<T> {
    check(pred, target)?;
    if uniform_magnitude(target) || target.iter().all(|y| y.is_zero()) {
        return mse_loss(pred, target);
    }
    Ok(sum(turn_weights(target)
        .into_iter()
        .zip(pred.iter().zip(target))
        .map(|(w, (&p, &y))| w * (p - y) * (p - y))))
}

impl Loss {
    pub fn value<T: Scalar>(self, pred: &[T], target: &[T]) -> Result<T> {
        match self {
            Loss::Mse => mse_loss(pred, target),
            Loss::Weighted => weighted_loss(pred, target),
        }
    }

    /// Derivative of the loss with respect to each prediction.
    pub fn grad<T: Scalar>(self, pred: &[T], target: &[T]) -> Result<Vec<T>> {
        check(pred, target)?;
        let two = T::lit(2.0);
        let w = match self {
            Loss::Mse => vec![T::one() / T::lit(pred.len() as f64); pred.len()],
            Loss::Weighted => turn_weights(target),
        };
        Ok(w.into_iter()
            .zip(pred.iter().zip(target))
            .map(|(w, (&p, &y))| two * w * (p - y))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss::<f64>(&[0.3, -1.0], &[0.3, -1.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!((mse_loss::<f64>(&[0.2, -0.4, 0.1], &[0.0, 0.0, 0.0]).unwrap() - 0.07).abs() < 1e-15);
        assert!(matches!(mse_loss(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(mse_loss::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn weighted_examples() {
        assert_eq!(weighted_loss(&[0.5, 2.0], &[0.5, 2.0]).unwrap(), 0.0);
        assert_eq!(weighted_loss(&[5.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((weighted_loss::<f64>(&[0.0, 0.0], &[1.0, -2.0]).unwrap() - 3.0).abs() < 1e-15);
        // all-zero target falls back to uniform weights
        assert_eq!(weighted_loss(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 5.0);
    }

    #[test]
    fn gradients_match_differences() {
        let target = [0.4, -1.2, 0.0, 0.7];
        let pred = [0.1, -0.3, 0.5, 0.9];
        for loss in [Loss::Mse, Loss::Weighted] {
            let g = loss.grad(&pred, &target).unwrap();
            for i in 0..pred.len() {
                let (mut a, mut b) = (pred, pred);
                a[i] += 1e-6;
                b[i] -= 1e-6;
                let fd: f64 = (loss.value(&a, &target).unwrap() - loss.value(&b, &target).unwrap()) / 2e-6;
                assert!((fd - g[i]).abs() < 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn uniform_magnitude_weighted_equals_mse(
            mag in 0.01f64..5.0,
            signs in proptest::collection::vec(any::<bool>(), 1..20),
            pred in proptest::collection::vec(-3.0f64..3.0, 20),
        ) {
            let target: Vec<f64> = signs.iter().map(|&s| if s { mag } else { -mag }).collect();
            let pred = &pred[..target.len()];
            let a = weighted_loss(pred, &target).unwrap();
            let b = mse_loss(pred, &target).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
