//! Soft self-paced weighting.
//!
//! With the regularizer `f(v, λ) = Σ_i (λ/2)(v_i² − 2v_i)`, the minimizer of
//! `Σ_i v_i L_i + f(v, λ)` over `v ∈ [0,1]ⁿ` is `v_i = max(0, 1 − L_i/λ)`:
//! zero-loss instances get full weight and instances whose loss exceeds λ are
//! left out until λ grows past it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn update_weights(losses: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    losses
        .iter()
        .map(|&l| {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidInput(format!("loss must be finite and ≥ 0, got {l}")));
            }
            Ok(if l <= lambda { 1.0 - l / lambda } else { 0.0 })
        })
        .collect()
}

pub fn regularizer_value(v: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    Ok(v.iter().map(|&w| 0.5 * lambda * (w * w - 2.0 * w)).sum())
}

/// Geometric pace `λ_k = λ₀ μᵏ`, kept while `λ_k ≤ λ_max`. At least one stage
/// is always produced, even when `λ₀ > λ_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaceSchedule {
    pub lambda0: f64,
    pub mu: f64,
    pub lambda_max: f64,
}

impl PaceSchedule {
    pub fn new(lambda0: f64, mu: f64, lambda_max: f64) -> Result<Self> {
        if !(lambda0 > 0.0) {
            return Err(Error::NonPositiveLambda(lambda0));
        }
        if !(mu > 1.0 && mu.is_finite()) || !lambda_max.is_finite() {
            return Err(Error::Config(format!(
                "pace needs mu > 1 and finite lambda_max (mu = {mu}, lambda_max = {lambda_max})"
            )));
        }
        Ok(Self {
            lambda0,
            mu,
            lambda_max,
        })
    }

    pub fn stages(&self) -> Vec<f64> {
        let mut out = vec![self.lambda0];
        let mut lambda = self.lambda0 * self.mu;
        while lambda <= self.lambda_max {
            out.push(lambda);
            lambda *= self.mu;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_form_branches() {
        assert_eq!(update_weights(&[0.0], 0.6).unwrap(), vec![1.0]);
        assert_eq!(update_weights(&[0.7], 0.6).unwrap(), vec![0.0]);
        let v = update_weights(&[0.3], 0.6).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15);
        assert!(matches!(update_weights(&[0.1], 0.0), Err(Error::NonPositiveLambda(_))));
        assert!(update_weights(&[-0.1], 1.0).is_err());
    }

    #[test]
    fn regularizer_examples() {
        assert!((regularizer_value(&[1.0; 4], 0.6).unwrap() + 4.0 * 0.3).abs() < 1e-15);
        assert_eq!(regularizer_value(&[0.0; 3], 0.6).unwrap(), 0.0);
        assert!((regularizer_value(&[0.5], 0.6).unwrap() + 0.225).abs() < 1e-15);
        assert!(regularizer_value(&[0.5], -1.0).is_err());
    }

    #[test]
    fn schedule_lengths() {
        let s = PaceSchedule::new(0.6, 1.05, 1.0).unwrap().stages();
        assert_eq!(s.len(), 11);
        assert!(s.iter().all(|&l| l <= 1.0));
        assert_eq!(PaceSchedule::new(1.2, 1.05, 1.0).unwrap().stages(), vec![1.2]);
        assert!(PaceSchedule::new(0.6, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn above_one_admits_everything(losses in prop::collection::vec(0.0f64..=1.0, 1..50), lambda in 1.0001f64..5.0) {
            prop_assert!(update_weights(&losses, lambda).unwrap().iter().all(|&v| v > 0.0));
        }
    }
}
