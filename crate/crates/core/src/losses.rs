//! Multi-class margin and the clamped hinge loss.
//!
//! For an instance `x` labeled `y` the margin is
//! `ξ = f_y(x) − max_{p≠y} f_p(x)`, the hinge is `max(0, 1 − ξ)` and the
//! clamped loss is `min(1, hinge)`. The solver works with the hinge; label
//! costs and self-paced weights use the clamped loss, which lies in [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::LinearModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub score_true: f64,
    pub score_best_other: f64,
    pub xi: f64,
    pub hinge: f64,
    pub clamped: f64,
}

impl MarginReport {
    /// From precomputed class scores (index `p - 1` holds `f_p`).
    pub fn from_scores(scores: &[f64], y: usize) -> Self {
        let score_true = scores[y - 1];
        let score_best_other = scores
            .iter()
            .enumerate()
            .filter(|&(p, _)| p != y - 1)
            .map(|(_, &s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let xi = score_true - score_best_other;
        let hinge = (1.0 - xi).max(0.0);
        Self {
            score_true,
            score_best_other,
            xi,
            hinge,
            clamped: hinge.min(1.0),
        }
    }
}

pub fn margin_report(model: &LinearModel, x: &[f64], y: usize) -> Result<MarginReport> {
    model.check_dim(x)?;
    if y == 0 || y > model.q() {
        return Err(Error::DimensionMismatch(format!(
            "label {y} outside 1..={}",
            model.q()
        )));
    }
    Ok(MarginReport::from_scores(&model.scores(x), y))
}

/// Clamped loss of every instance under its label; rows of `x` must match the
/// model dimension.
pub fn clamped_losses(model: &LinearModel, x: &crate::types::Matrix, labels: &[usize]) -> Vec<f64> {
    x.iter_rows()
        .zip(labels)
        .map(|(row, &y)| MarginReport::from_scores(&model.scores(row), y).clamped)
        .collect()
}
