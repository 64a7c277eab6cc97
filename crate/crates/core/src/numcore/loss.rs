//! Regression losses.

use crate::{Error, Result};

/// Mean squared error and its gradient: `loss = mean((pred - target)^2)`,
/// `dloss/dpred = 2 (pred - target) / n`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.is_empty() {
        return Err(Error::Contract("mse_loss on empty vectors".into()));
    }
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "pred length {} != target length {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target.iter()) {
        let d = p - t;
        loss += d * d;
        grad.push(2.0 * d / n);
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_when_equal() {
        let (loss, grad) = mse_loss(&[1.5, -2.0], &[1.5, -2.0]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_element() {
        let (loss, grad) = mse_loss(&[2.0], &[0.0]).unwrap();
        assert_eq!(loss, 4.0);
        assert_eq!(grad, vec![4.0]);
    }

    #[test]
    fn hand_arithmetic_two_elements() {
        // (1 + 9) / 2 = 5, grad = 2*(p-t)/2 = p-t
        let (loss, grad) = mse_loss(&[1.0, 3.0], &[0.0, 0.0]).unwrap();
        assert_eq!(loss, 5.0);
        assert_eq!(grad, vec![1.0, 3.0]);
    }

    #[test]
    fn empty_is_contract_error() {
        assert!(mse_loss(&[], &[]).is_err());
    }

    #[test]
    fn length_mismatch_is_shape_error() {
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn non_negative_and_zero_iff_equal(
            pred in proptest::collection::vec(-1e3..1e3f64, 1..20),
            delta in proptest::collection::vec(-1e3..1e3f64, 1..20),
        ) {
            let n = pred.len().min(delta.len());
            let pred = &pred[..n];
            let target: Vec<f64> = pred.iter().zip(&delta[..n]).map(|(p, d)| p + d).collect();
            let (loss, _) = mse_loss(pred, &target).unwrap();
            prop_assert!(loss >= 0.0);
            let all_equal = pred.iter().zip(target.iter()).all(|(p, t)| p == t);
            prop_assert_eq!(loss == 0.0, all_equal);
        }
    }
}
