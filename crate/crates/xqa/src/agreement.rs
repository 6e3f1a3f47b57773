//! Compares model orderings induced by two score columns: the same-order /
//! inverse-order / different-order relation, and Pearson correlation.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AgreementError {
    #[error("the two score maps rank different model sets ({0})")]
    KeyMismatch(String),
    #[error("correlation is undefined for constant input")]
    ConstantInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

/// Verdict of comparing two model orderings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderRelation {
    Same,
    Inverse,
    Different,
}

impl OrderRelation {
    /// The table symbol: "+" for same, "-" for inverse, blank for different.
    pub fn symbol(&self) -> &'static str {
        match self {
            OrderRelation::Same => "+",
            OrderRelation::Inverse => "-",
            OrderRelation::Different => "",
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OrderRelation::Same => "same",
            OrderRelation::Inverse => "inverse",
            OrderRelation::Different => "different",
        }
    }
}

fn descending_order(scores: &BTreeMap<String, f64>) -> Vec<&str> {
    let mut models: Vec<(&str, f64)> = scores.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    models.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("scores are finite"));
    models.into_iter().map(|(k, _)| k).collect()
}

fn has_ties(scores: &BTreeMap<String, f64>) -> bool {
    let mut values: Vec<f64> = scores.values().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    values.windows(2).any(|w| w[0] == w[1])
}

/// Compares the descending orders induced by two score maps over the same
/// models: identical permutations are `Same`, exactly reversed ones are
/// `Inverse`, anything else (including any tie) is `Different`.
pub fn order_relation(
    a: &BTreeMap<String, f64>,
    b: &BTreeMap<String, f64>,
) -> Result<OrderRelation, AgreementError> {
    if a.len() != b.len() || a.keys().ne(b.keys()) {
        let only_a: Vec<&str> = a
            .keys()
            .filter(|k| !b.contains_key(*k))
            .map(String::as_str)
            .collect();
        let only_b: Vec<&str> = b
            .keys()
            .filter(|k| !a.contains_key(*k))
            .map(String::as_str)
            .collect();
        return Err(AgreementError::KeyMismatch(format!(
            "only in a: {only_a:?}, only in b: {only_b:?}"
        )));
    }
    if a.len() < 2 {
        return Err(AgreementError::InsufficientData {
            needed: 2,
            got: a.len(),
        });
    }
    if has_ties(a) || has_ties(b) {
        return Ok(OrderRelation::Different);
    }
    let order_a = descending_order(a);
    let order_b = descending_order(b);
    if order_a == order_b {
        Ok(OrderRelation::Same)
    } else if order_a.iter().eq(order_b.iter().rev()) {
        Ok(OrderRelation::Inverse)
    } else {
        Ok(OrderRelation::Different)
    }
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AgreementError> {
    if x.len() != y.len() {
        return Err(AgreementError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(AgreementError::InsufficientData {
            needed: 2,
            got: x.len(),
        });
    }
    let constant = |v: &[f64]| v.iter().all(|&e| e == v[0]);
    if constant(x) || constant(y) {
        return Err(AgreementError::ConstantInput);
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        cov += (xi - mean_x) * (yi - mean_y);
        var_x += (xi - mean_x).powi(2);
        var_y += (yi - mean_y).powi(2);
    }
    let denom = (var_x * var_y).sqrt();
    if denom == 0.0 {
        return Err(AgreementError::ConstantInput);
    }
    Ok(cov / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scores(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn same_and_inverse_orders() {
        let a = scores(&[("m1", 1.0), ("m2", 2.0), ("m3", 3.0)]);
        let b = scores(&[("m1", 10.0), ("m2", 20.0), ("m3", 30.0)]);
        assert_eq!(order_relation(&a, &b).unwrap(), OrderRelation::Same);

        let b_rev = scores(&[("m1", 30.0), ("m2", 20.0), ("m3", 10.0)]);
        assert_eq!(order_relation(&a, &b_rev).unwrap(), OrderRelation::Inverse);
    }

    #[test]
    fn a_single_swap_is_different() {
        let a = scores(&[("m1", 1.0), ("m2", 2.0), ("m3", 3.0), ("m4", 4.0)]);
        let b = scores(&[("m1", 1.0), ("m2", 3.0), ("m3", 2.0), ("m4", 4.0)]);
        assert_eq!(order_relation(&a, &b).unwrap(), OrderRelation::Different);
    }

    #[test]
    fn self_comparison_is_same_and_negation_flips() {
        let a = scores(&[("m1", 0.3), ("m2", 0.9), ("m3", 0.5)]);
        assert_eq!(order_relation(&a, &a).unwrap(), OrderRelation::Same);
        let negated: BTreeMap<String, f64> =
            a.iter().map(|(k, v)| (k.clone(), -v)).collect();
        assert_eq!(order_relation(&a, &negated).unwrap(), OrderRelation::Inverse);
    }

    #[test]
    fn ties_are_different() {
        let a = scores(&[("m1", 1.0), ("m2", 1.0), ("m3", 3.0)]);
        let b = scores(&[("m1", 1.0), ("m2", 2.0), ("m3", 3.0)]);
        assert_eq!(order_relation(&a, &b).unwrap(), OrderRelation::Different);
    }

    #[test]
    fn mismatched_or_tiny_key_sets_error() {
        let a = scores(&[("m1", 1.0), ("m2", 2.0)]);
        let b = scores(&[("m1", 1.0), ("mX", 2.0)]);
        assert!(matches!(
            order_relation(&a, &b),
            Err(AgreementError::KeyMismatch(_))
        ));
        let single = scores(&[("m1", 1.0)]);
        assert!(matches!(
            order_relation(&single, &single),
            Err(AgreementError::InsufficientData { .. })
        ));
    }

    #[test]
    fn pearson_perfect_and_inverse() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_abs_diff_eq!(pearson(&x, &y).unwrap(), 1.0, epsilon = 1e-12);

        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson(&x, &neg).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn pearson_hand_computed_value() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        assert_abs_diff_eq!(pearson(&x, &y).unwrap(), 0.8, epsilon = 1e-12);
    }

    #[test]
    fn pearson_affine_invariance_and_sign_flip() {
        let x = [0.1, 0.9, 0.4, 0.7, 0.2];
        let y = [0.5, 0.3, 0.8, 0.2, 0.9];
        let r = pearson(&x, &y).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| 3.0 * v + 11.0).collect();
        assert_abs_diff_eq!(pearson(&scaled, &y).unwrap(), r, epsilon = 1e-12);
        let negated: Vec<f64> = y.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson(&x, &negated).unwrap(), -r, epsilon = 1e-12);
        assert!((-1.0..=1.0).contains(&r));
    }

    #[test]
    fn pearson_error_cases() {
        assert_eq!(
            pearson(&[1.0, 2.0], &[1.0]),
            Err(AgreementError::LengthMismatch { left: 2, right: 1 })
        );
        assert_eq!(
            pearson(&[1.0], &[1.0]),
            Err(AgreementError::InsufficientData { needed: 2, got: 1 })
        );
        assert_eq!(
            pearson(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(AgreementError::ConstantInput)
        );
    }
}
