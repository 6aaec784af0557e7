//! Instance-weighted Crammer–Singer multi-class SVM.
//!
//! Minimizes `½ Σ_p ‖w̃_p‖² + C Σ_i v_i · max(0, 1 − (f_{y_i}(x_i) − max_{p≠y_i} f_p(x_i)))`
//! where `w̃_p = (w_p, b_p)`: the bias is learned as the weight of a constant
//! feature 1 and is regularized with the weights.
//!
//! The dual is solved by cyclic block coordinate descent over instances in a
//! seeded random order. Instance `i` owns `α_i ∈ R^q` with `Σ_m α_i^m = 0`,
//! `α_i^{y_i} ≤ C·v_i` and `α_i^m ≤ 0` otherwise, and `w̃_m = Σ_i α_i^m x̃_i`.
//! Each block subproblem is solved exactly, so the dual objective never
//! increases. Instances with `v_i = 0` have a zero-width box and are skipped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::MarginReport;
use crate::rng::SeededRng;
use crate::types::{LinearModel, Matrix, ModelMeta, TrainConfig};

/// Violations below this are treated as already optimal for a block.
const BLOCK_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStatus {
    /// Primal objective of the returned model.
    pub objective: f64,
    /// Dual objective (minimization form); `objective + dual_objective` is the
    /// duality gap.
    pub dual_objective: f64,
    pub iterations: usize,
    /// Largest block KKT violation seen in the final sweep, which covers every
    /// instance when `converged` is set.
    pub kkt_violation: f64,
    pub converged: bool,
    /// Dual objective after each sweep.
    pub dual_history: Vec<f64>,
}

/// Dual variables of a finished solve, reusable as a warm start.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    q: usize,
    labels: Vec<usize>,
    caps: Vec<f64>,
    alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct McsvmFit {
    pub model: LinearModel,
    pub status: SolverStatus,
    pub dual: DualState,
}

/// Trains on rows of `x` with 1-based `labels` in `1..=q` and per-instance
/// weights `v ∈ [0, 1]`. Uses `svm_tol`, `svm_max_iter` and `seed` from the
/// config. A warm start is projected onto the new boxes: blocks whose label
/// changed restart from zero, blocks whose cap shrank are scaled down.
pub fn train_weighted_mcsvm(
    x: &Matrix,
    labels: &[usize],
    q: usize,
    v: &[f64],
    c: f64,
    config: &TrainConfig,
    warm: Option<&DualState>,
) -> Result<McsvmFit> {
    let n = x.rows();
    let d = x.cols();
    if labels.len() != n || v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} instances, {} labels, {} weights",
            labels.len(),
            v.len()
        )));
    }
    if q == 0 || labels.iter().any(|&y| y == 0 || y > q) {
        return Err(Error::DimensionMismatch(format!("labels must lie in 1..={q}")));
    }
    if v.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(Error::InvalidInput("weights must lie in [0, 1]".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("C must be positive, got {c}")));
    }

    let da = d + 1;
    let caps: Vec<f64> = v.iter().map(|w| c * w).collect();
    let active: Vec<usize> = (0..n).filter(|&i| caps[i] > 0.0).collect();
    let mut alpha = vec![0.0; n * q];

    if let Some(w) = warm {
        if w.q != q || w.labels.len() != n {
            return Err(Error::DimensionMismatch(
                "warm start does not match problem size".into(),
            ));
        }
        for &i in &active {
            if w.labels[i] == labels[i] && w.caps[i] > 0.0 {
                let s = (caps[i] / w.caps[i]).min(1.0);
                for m in 0..q {
                    alpha[i * q + m] = s * w.alpha[i * q + m];
                }
            }
        }
    }

    let mut weights = vec![0.0; q * da];
    for &i in &active {
        let row = x.row(i);
        for m in 0..q {
            let a = alpha[i * q + m];
            if a != 0.0 {
                let wm = &mut weights[m * da..(m + 1) * da];
                for j in 0..d {
                    wm[j] += a * row[j];
                }
                wm[d] += a;
            }
        }
    }

    let sq_norms: Vec<f64> = (0..n)
        .map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>() + 1.0)
        .collect();

    let mut rng = SeededRng::new(config.seed);
    let mut order = active.clone();
    let mut grad = vec![0.0; q];
    let mut shifted = vec![0.0; q];
    let mut new_alpha = vec![0.0; q];
    let mut scratch = vec![0.0; q];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut kkt_violation = 0.0;
    let mut converged = active.is_empty();

    // Blocks found optimal within `tol / 10` leave the working set; when the
    // working set converges, a full sweep either confirms it or restores all.
    let shrink_below = config.svm_tol / 10.0;
    let mut full_sweep = true;
    while !converged && iterations < config.svm_max_iter {
        rng.shuffle(&mut order);
        let mut sweep_violation: f64 = 0.0;
        let mut kept = 0;
        for k in 0..order.len() {
            let i = order[k];
            let row = x.row(i);
            let yi = labels[i] - 1;
            let cap = caps[i];
            let ai = &mut alpha[i * q..(i + 1) * q];
            for m in 0..q {
                let wm = &weights[m * da..(m + 1) * da];
                let dot: f64 = wm[..d].iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + wm[d];
                grad[m] = dot + if m == yi { 0.0 } else { 1.0 };
            }
            let mut max_g = f64::NEG_INFINITY;
            let mut min_g = f64::INFINITY;
            for m in 0..q {
                max_g = max_g.max(grad[m]);
                let bound = if m == yi { cap } else { 0.0 };
                if ai[m] < bound {
                    min_g = min_g.min(grad[m]);
                }
            }
            let violation = max_g - min_g;
            sweep_violation = sweep_violation.max(violation);
            if violation > shrink_below {
                order[kept] = i;
                kept += 1;
            }
            if !(violation > BLOCK_EPS) {
                continue;
            }

            let a = sq_norms[i];
            for m in 0..q {
                shifted[m] = grad[m] - a * ai[m];
            }
            solve_block(a, &shifted, yi, cap, &mut scratch, &mut new_alpha);
            for m in 0..q {
                let delta = new_alpha[m] - ai[m];
                if delta != 0.0 {
                    let wm = &mut weights[m * da..(m + 1) * da];
                    for j in 0..d {
                        wm[j] += delta * row[j];
                    }
                    wm[d] += delta;
                    ai[m] = new_alpha[m];
                }
            }
        }
        iterations += 1;
        history.push(dual_value(&weights, &alpha, labels, q, &active));
        kkt_violation = sweep_violation;
        if sweep_violation <= config.svm_tol {
            if full_sweep {
                converged = true;
            } else {
                order.clone_from(&active);
                full_sweep = true;
            }
        } else {
            order.truncate(kept);
            full_sweep = kept == active.len();
        }
    }

    let mut w = Vec::with_capacity(q * d);
    let mut b = Vec::with_capacity(q);
    for m in 0..q {
        w.extend_from_slice(&weights[m * da..m * da + d]);
        b.push(weights[m * da + d]);
    }
    let mut model = LinearModel::new(q, d, w, b)?;
    model.meta = ModelMeta {
        c,
        seed: config.seed,
        solver: "cs-dual".into(),
        standardized: false,
    };
    let objective = primal_objective(&model, x, labels, v, c);
    let dual_objective = history
        .last()
        .copied()
        .unwrap_or_else(|| dual_value(&weights, &alpha, labels, q, &active));
    Ok(McsvmFit {
        model,
        status: SolverStatus {
            objective,
            dual_objective,
            iterations,
            kkt_violation,
            converged,
            dual_history: history,
        },
        dual: DualState {
            q,
            labels: labels.to_vec(),
            caps,
            alpha,
        },
    })
}

/// Unweighted training: every instance has weight one.
pub fn train_mcsvm(
    x: &Matrix,
    labels: &[usize],
    q: usize,
    c: f64,
    config: &TrainConfig,
) -> Result<McsvmFit> {
    train_weighted_mcsvm(x, labels, q, &vec![1.0; x.rows()], c, config, None)
}

/// `½ Σ_p (‖w_p‖² + b_p²) + C Σ_i v_i · hinge_i`.
pub fn primal_objective(model: &LinearModel, x: &Matrix, labels: &[usize], v: &[f64], c: f64) -> f64 {
    let loss: f64 = x
        .iter_rows()
        .zip(labels)
        .zip(v)
        .filter(|(_, &w)| w > 0.0)
        .map(|((row, &y), &w)| w * MarginReport::from_scores(&model.scores(row), y).hinge)
        .sum();
    model.regularizer() + c * loss
}

fn dual_value(weights: &[f64], alpha: &[f64], labels: &[usize], q: usize, active: &[usize]) -> f64 {
    let reg = 0.5 * weights.iter().map(|v| v * v).sum::<f64>();
    let lin: f64 = active.iter().map(|&i| alpha[i * q + labels[i] - 1]).sum();
    reg - lin
}

/// Exact minimizer of `Σ_m ½ a α_m² + b_m α_m` subject to `Σ_m α_m = 0`,
/// `α_y ≤ cap`, `α_m ≤ 0` for `m ≠ y`. The solution is
/// `α_m = min(bound_m, (β − b_m)/a)` with `β` fixed by the sum constraint,
/// found by scanning the sorted breakpoints.
fn solve_block(a: f64, b: &[f64], y: usize, cap: f64, scratch: &mut [f64], out: &mut [f64]) {
    let q = b.len();
    scratch.copy_from_slice(b);
    scratch[y] += a * cap;
    scratch.sort_unstable_by(|u, v| v.total_cmp(u));
    let mut beta = scratch[0] - a * cap;
    let mut r = 1;
    while r < q && beta < r as f64 * scratch[r] {
        beta += scratch[r];
        r += 1;
    }
    beta /= r as f64;
    for m in 0..q {
        let free = (beta - b[m]) / a;
        out[m] = if m == y { free.min(cap) } else { free.min(0.0) };
    }
}

/// `argmax_p f_p(x)`, ties to the smallest label.
pub fn predict(model: &LinearModel, x: &[f64]) -> Result<usize> {
    model.check_dim(x)?;
    Ok(argmax(&model.scores(x)))
}

pub fn predict_all(model: &LinearModel, x: &Matrix) -> Result<Vec<usize>> {
    x.iter_rows().map(|row| predict(model, row)).collect()
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (p, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = p;
        }
    }
    best + 1
}
