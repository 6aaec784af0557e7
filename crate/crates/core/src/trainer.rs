//! The self-paced alternating trainer and cross-validation.
//!
//! `fit` runs three nested loops. The outer loop grows `C` geometrically up to
//! `C_max`. Inside each C stage the pace loop raises λ from `λ₀` by factor `μ`
//! while `λ ≤ λ_max`. Inside each pace stage the model and the label
//! assignment are updated alternately until the objective
//!
//! ```text
//! OFV = C Σ_i v_i L_i + ½ Σ_p (‖w_p‖² + b_p²) + Σ_i (λ/2)(v_i² − 2v_i)
//! ```
//!
//! (clamped losses `L_i`) drops by less than `delta_ofv`, after which the
//! instance weights are recomputed from the current losses.
//!
//! The model step minimizes the hinge surrogate, not the clamped loss. The
//! first solve of a stage is always kept, since C or the weights just changed
//! and the previous model was fitted to a different problem; it may therefore
//! land above the stage's entry OFV. After that a model step is kept only if
//! it lowers OFV, and so is an assignment step, so OFV never rises from one
//! inner iteration to the next. A stage whose weights are all zero keeps its
//! labels.

use serde::{Deserialize, Serialize};

use crate::data_io::{class_prior_counts, PriorCounts, Standardizer};
use crate::error::{Error, Result};
use crate::label_assignment::{
    build_cost_matrix_on, init_cost_matrix, neighbor_vote_ranks, solve_assignment,
    solve_assignment_ranked,
};
use crate::losses::clamped_losses;
use crate::margin_solver::{predict_all, train_weighted_mcsvm, DualState};
use crate::rng::{derive_seed, SeededRng};
use crate::self_paced::{regularizer_value, update_weights, PaceSchedule};
use crate::types::{Assignment, LinearModel, Matrix, PartialLabelDataset, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    /// `C Σ v_i L_i`
    pub loss: f64,
    pub regularizer: f64,
    /// `Σ (λ/2)(v_i² − 2v_i)`
    pub pace: f64,
    pub total: f64,
}

pub fn objective_terms(
    model: &LinearModel,
    x: &Matrix,
    labels: &[usize],
    v: &[f64],
    c: f64,
    lambda: f64,
) -> Result<ObjectiveTerms> {
    if x.rows() != labels.len() || x.rows() != v.len() || x.cols() != model.d() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows, {} labels, {} weights, {} features vs model d = {}",
            x.rows(),
            labels.len(),
            v.len(),
            x.cols(),
            model.d()
        )));
    }
    if labels.iter().any(|&y| y == 0 || y > model.q()) {
        return Err(Error::DimensionMismatch(format!(
            "labels must lie in 1..={}",
            model.q()
        )));
    }
    let losses = clamped_losses(model, x, labels);
    let loss = c * losses.iter().zip(v).map(|(l, w)| l * w).sum::<f64>();
    let regularizer = model.regularizer();
    let pace = regularizer_value(v, lambda)?;
    Ok(ObjectiveTerms {
        loss,
        regularizer,
        pace,
        total: loss + regularizer + pace,
    })
}

pub fn objective_value(
    model: &LinearModel,
    dataset: &PartialLabelDataset,
    y: &Assignment,
    v: &[f64],
    c: f64,
    lambda: f64,
) -> Result<f64> {
    Ok(objective_terms(model, dataset.features(), &y.labels, v, c, lambda)?.total)
}

/// One record per pace stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    #[serde(rename = "C")]
    pub c: f64,
    pub lambda: f64,
    pub ofv: f64,
    pub inner_iterations: usize,
    /// Share of instances with positive weight after this stage's update.
    pub admitted_fraction: f64,
    pub assignment_violations: usize,
    /// OFV before the first inner iteration, under the previous stage's model.
    pub ofv_entry: f64,
    /// OFV after each inner iteration.
    pub ofv_history: Vec<f64>,
    pub cap_hit: bool,
    pub rejected_model_steps: usize,
    /// Relabelings that differed from the incumbent but did not lower OFV.
    pub rejected_assignment_steps: usize,
    /// Inner solves that stopped at `svm_max_iter` before reaching `svm_tol`.
    pub svm_unconverged: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    /// JSON lines, one record per line.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("trace records serialize") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Fitted {
    /// Scores raw (unstandardized) features.
    pub model: LinearModel,
    pub trace: TrainTrace,
    pub assignment: Assignment,
    pub weights: Vec<f64>,
    pub counts: PriorCounts,
}

/// C values visited: `C ← min((1+Δ)C, C_max)` from `C_init` until `C_max` is
/// reached. When `C_init = C_max` a single stage runs at `C_max`.
pub fn c_schedule(config: &TrainConfig) -> Vec<f64> {
    let mut out = Vec::new();
    let mut c = config.c_init;
    while c < config.c_max {
        c = ((1.0 + config.delta) * c).min(config.c_max);
        out.push(c);
    }
    if out.is_empty() {
        out.push(config.c_max);
    }
    out
}

pub fn fit(dataset: &PartialLabelDataset, config: &TrainConfig) -> Result<Fitted> {
    config.validate()?;
    let pace = PaceSchedule::new(config.lambda0, config.mu, config.lambda_max)?;
    let n = dataset.n();
    let q = dataset.q();
    let standardizer = config
        .standardize
        .then(|| Standardizer::fit(dataset.features()));
    let x = match &standardizer {
        Some(s) => s.transform(dataset.features()),
        None => dataset.features().clone(),
    };

    let counts = class_prior_counts(dataset);
    let mut v = vec![1.0; n];
    let init = init_cost_matrix(dataset, config.big_m);
    let mut y = if config.init_neighbors > 0 {
        let ranks = neighbor_vote_ranks(&x, dataset, config.init_neighbors)?;
        solve_assignment_ranked(&init, &v, &counts, &ranks)?
    } else {
        solve_assignment(&init, &v, &counts)?
    };
    let mut model = LinearModel::zeros(q, dataset.d());
    let mut dual: Option<DualState> = None;
    let mut trace = TrainTrace::default();
    let mut carried_lambda: Option<f64> = None;

    for c in c_schedule(config) {
        let stages: Vec<f64> = if !config.self_paced {
            v.iter_mut().for_each(|w| *w = 1.0);
            vec![config.lambda0]
        } else if config.carry_pace && carried_lambda.is_some() {
            let start = carried_lambda.unwrap();
            PaceSchedule { lambda0: start, ..pace }.stages()
        } else {
            v.iter_mut().for_each(|w| *w = 1.0);
            pace.stages()
        };
        let mut next_lambda = config.lambda0;
        for &lambda in &stages {
            let mut record = TraceRecord {
                c,
                lambda,
                ofv: 0.0,
                inner_iterations: 0,
                admitted_fraction: 0.0,
                assignment_violations: 0,
                ofv_entry: 0.0,
                ofv_history: Vec::new(),
                cap_hit: false,
                rejected_model_steps: 0,
                rejected_assignment_steps: 0,
                svm_unconverged: 0,
            };
            let ofv_of = |m: &LinearModel, labels: &[usize], v: &[f64]| {
                objective_terms(m, &x, labels, v, c, lambda).map(|t| t.total)
            };
            let mut ofv = ofv_of(&model, &y.labels, &v)?;
            record.ofv_entry = ofv;
            let mut settled = false;
            while record.inner_iterations < config.inner_max_iter {
                let ofv_old = ofv;
                record.inner_iterations += 1;

                let warm = if config.warm_start { dual.as_ref() } else { None };
                let solved = train_weighted_mcsvm(&x, &y.labels, q, &v, c, config, warm)?;
                if !solved.status.converged {
                    record.svm_unconverged += 1;
                }
                let candidate_ofv = ofv_of(&solved.model, &y.labels, &v)?;
                if record.inner_iterations == 1 || candidate_ofv < ofv {
                    model = solved.model;
                    dual = Some(solved.dual);
                    ofv = candidate_ofv;
                } else {
                    record.rejected_model_steps += 1;
                }

                let costs = build_cost_matrix_on(&model, &x, dataset, config.big_m)?;
                let relabeled = solve_assignment(&costs, &v, &counts)?;
                let relabeled_ofv = ofv_of(&model, &relabeled.labels, &v)?;
                if relabeled_ofv < ofv {
                    y = relabeled;
                    ofv = relabeled_ofv;
                } else if relabeled.labels != y.labels {
                    record.rejected_assignment_steps += 1;
                }
                record.ofv_history.push(ofv);
                if ofv_old - ofv < config.delta_ofv {
                    settled = true;
                    break;
                }
            }
            record.cap_hit = !settled;
            record.ofv = ofv;
            record.assignment_violations = y.violations;
            if config.self_paced {
                let losses = clamped_losses(&model, &x, &y.labels);
                v = update_weights(&losses, lambda)?;
            }
            record.admitted_fraction =
                v.iter().filter(|&&w| w > 0.0).count() as f64 / n as f64;
            trace.records.push(record);
            next_lambda = lambda * config.mu;
        }
        carried_lambda = Some(next_lambda);
    }

    let mut model = match &standardizer {
        Some(s) => unstandardize(&model, s),
        None => model,
    };
    model.meta.c = config.c_max;
    model.meta.seed = config.seed;
    model.meta.standardized = standardizer.is_some();
    Ok(Fitted {
        model,
        trace,
        assignment: y,
        weights: v,
        counts,
    })
}

/// Rewrites a model trained on z-scored features to score raw features.
fn unstandardize(model: &LinearModel, s: &Standardizer) -> LinearModel {
    let (q, d) = (model.q(), model.d());
    let mut weights = Vec::with_capacity(q * d);
    let mut biases = Vec::with_capacity(q);
    for p in 1..=q {
        let w = model.weight(p);
        let mut b = model.bias(p);
        for ((wj, scale), mean) in w.iter().zip(&s.scale).zip(&s.mean) {
            let wj = wj / scale;
            b -= wj * mean;
            weights.push(wj);
        }
        biases.push(b);
    }
    let mut out = LinearModel::new(q, d, weights, biases).expect("finite model stays finite");
    out.meta = model.meta.clone();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    pub fold_accuracies: Vec<f64>,
    #[serde(skip)]
    pub traces: Vec<TrainTrace>,
}

/// Test-set indices of each fold, stratified by true label: each class is
/// shuffled with the seeded generator, then instances are dealt round-robin
/// to folds, class after class.
pub fn stratified_folds(truth: &[usize], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Config("folds must be ≥ 2".into()));
    }
    if truth.len() < folds {
        return Err(Error::TooFewInstances {
            n: truth.len(),
            folds,
        });
    }
    let q = truth.iter().copied().max().unwrap_or(0);
    let mut rng = SeededRng::new(seed);
    let mut out = vec![Vec::new(); folds];
    let mut k = 0;
    for label in 1..=q {
        let mut members: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == label).collect();
        rng.shuffle(&mut members);
        for i in members {
            out[k % folds].push(i);
            k += 1;
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

/// Cross-validates an arbitrary learner. `learn` gets the training split, the
/// test features and a per-fold seed, and returns one predicted label per
/// test row. Folds run sequentially in fold order.
pub fn cross_validate_by<F>(
    dataset: &PartialLabelDataset,
    folds: usize,
    seed: u64,
    mut learn: F,
) -> Result<CvOutcome>
where
    F: FnMut(&PartialLabelDataset, &Matrix, u64) -> Result<(Vec<usize>, Option<TrainTrace>)>,
{
    let truth = dataset.truth().ok_or(Error::NoGroundTruth)?;
    let splits = stratified_folds(truth, folds, seed)?;
    let mut fold_accuracies = Vec::with_capacity(folds);
    let mut traces = Vec::new();
    for (f, test) in splits.iter().enumerate() {
        let mut in_test = vec![false; dataset.n()];
        test.iter().for_each(|&i| in_test[i] = true);
        let train: Vec<usize> = (0..dataset.n()).filter(|&i| !in_test[i]).collect();
        let train_set = dataset.subset(&train)?;
        let test_x = dataset.features().select_rows(test);
        let (predicted, trace) = learn(&train_set, &test_x, derive_seed(seed, f as u64))?;
        let correct = test
            .iter()
            .zip(&predicted)
            .filter(|(&i, &p)| truth[i] == p)
            .count();
        fold_accuracies.push(correct as f64 / test.len() as f64);
        traces.extend(trace);
    }
    let mean = fold_accuracies.iter().sum::<f64>() / folds as f64;
    let std = (fold_accuracies
        .iter()
        .map(|a| (a - mean).powi(2))
        .sum::<f64>()
        / folds as f64)
        .sqrt();
    Ok(CvOutcome {
        mean,
        std,
        fold_accuracies,
        traces,
    })
}

/// Stratified k-fold accuracy of `fit` under `config` (each fold trains with
/// a seed derived from `seed` and the fold index).
pub fn cross_validate(
    dataset: &PartialLabelDataset,
    folds: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<CvOutcome> {
    config.validate()?;
    cross_validate_by(dataset, folds, seed, |train, test_x, fold_seed| {
        let cfg = TrainConfig {
            seed: fold_seed,
            ..config.clone()
        };
        let fitted = fit(train, &cfg)?;
        Ok((predict_all(&fitted.model, test_x)?, Some(fitted.trace)))
    })
}
