//! Shared domain types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationError};

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Instances with candidate label sets and, optionally, hidden ground truth.
///
/// Candidate sets are stored sorted and deduplicated. Labels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialLabelDataset {
    features: Matrix,
    candidates: Vec<Vec<usize>>,
    truth: Option<Vec<usize>>,
    num_classes: usize,
}

impl PartialLabelDataset {
    pub fn new(
        features: Matrix,
        mut candidates: Vec<Vec<usize>>,
        truth: Option<Vec<usize>>,
        num_classes: usize,
    ) -> Result<Self, ValidationError> {
        for set in &mut candidates {
            set.sort_unstable();
            set.dedup();
        }
        let dataset = Self {
            features,
            candidates,
            truth,
            num_classes,
        };
        validate(&dataset)?;
        Ok(dataset)
    }

    /// Fully supervised dataset: every candidate set is `{label}`.
    pub fn supervised(
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self, ValidationError> {
        let candidates = labels.iter().map(|&l| vec![l]).collect();
        Self::new(features, candidates, Some(labels), num_classes)
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn q(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn candidates(&self) -> &[Vec<usize>] {
        &self.candidates
    }

    pub fn truth(&self) -> Option<&[usize]> {
        self.truth.as_deref()
    }

    pub fn is_candidate(&self, instance: usize, label: usize) -> bool {
        self.candidates[instance].binary_search(&label).is_ok()
    }

    /// True when every candidate set is exactly the singleton `{truth[i]}`.
    pub fn is_supervised(&self) -> bool {
        match &self.truth {
            Some(t) => self
                .candidates
                .iter()
                .zip(t)
                .all(|(s, &y)| s.len() == 1 && s[0] == y),
            None => false,
        }
    }

    /// Same instances with a different feature matrix of equal row count.
    pub fn with_features(&self, features: Matrix) -> Result<Self, ValidationError> {
        Self::new(
            features,
            self.candidates.clone(),
            self.truth.clone(),
            self.num_classes,
        )
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self, ValidationError> {
        Self::new(
            self.features.select_rows(indices),
            indices.iter().map(|&i| self.candidates[i].clone()).collect(),
            self.truth
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
            self.num_classes,
        )
    }
}

/// Checks every dataset invariant, reporting the first violation found.
pub fn validate(dataset: &PartialLabelDataset) -> Result<(), ValidationError> {
    let n = dataset.features.rows();
    let q = dataset.num_classes;
    if n == 0 {
        return Err(ValidationError::Empty);
    }
    if q == 0 || dataset.features.cols() == 0 {
        return Err(ValidationError::Shape("d and q must be positive".into()));
    }
    if dataset.candidates.len() != n {
        return Err(ValidationError::Shape(format!(
            "{} candidate sets for {n} instances",
            dataset.candidates.len()
        )));
    }
    if let Some(t) = &dataset.truth {
        if t.len() != n {
            return Err(ValidationError::Shape(format!(
                "{} truth labels for {n} instances",
                t.len()
            )));
        }
    }
    for i in 0..n {
        let set = &dataset.candidates[i];
        if set.is_empty() {
            return Err(ValidationError::EmptyCandidateSet(i));
        }
        if let Some(&label) = set.iter().find(|&&l| l == 0 || l > q) {
            return Err(ValidationError::LabelOutOfRange {
                instance: i,
                label,
                q,
            });
        }
        if let Some(t) = &dataset.truth {
            if !set.contains(&t[i]) {
                return Err(ValidationError::TruthNotInCandidates(i));
            }
        }
        if let Some(j) = dataset.features.row(i).iter().position(|v| !v.is_finite()) {
            return Err(ValidationError::NonFiniteFeature(i, j));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    #[serde(rename = "C")]
    pub c: f64,
    pub seed: u64,
    pub solver: String,
    /// Training ran on z-scored features; the stored weights already map raw
    /// features to scores.
    #[serde(default)]
    pub standardized: bool,
}

impl Default for ModelMeta {
    fn default() -> Self {
        Self {
            c: 0.0,
            seed: 0,
            solver: "cs-dual".to_string(),
            standardized: false,
        }
    }
}

/// Per-class linear scorers `f_p(x) = w_p·x + b_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct LinearModel {
    q: usize,
    d: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    pub meta: ModelMeta,
}

impl LinearModel {
    pub fn zeros(q: usize, d: usize) -> Self {
        Self {
            q,
            d,
            weights: vec![0.0; q * d],
            biases: vec![0.0; q],
            meta: ModelMeta::default(),
        }
    }

    /// `weights` is row-major `q × d`.
    pub fn new(q: usize, d: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() != q * d || biases.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "model {q}x{d} got {} weights and {} biases",
                weights.len(),
                biases.len()
            )));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("model has non-finite entries".into()));
        }
        Ok(Self {
            q,
            d,
            weights,
            biases,
            meta: ModelMeta::default(),
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Weight vector of class `p` (1-based).
    pub fn weight(&self, p: usize) -> &[f64] {
        &self.weights[(p - 1) * self.d..p * self.d]
    }

    pub fn bias(&self, p: usize) -> f64 {
        self.biases[p - 1]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "instance has {} features, model expects {}",
                x.len(),
                self.d
            )));
        }
        Ok(())
    }

    /// Class scores, index `p - 1` holding `f_p(x)`. Caller guarantees
    /// `x.len() == d`.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        (0..self.q)
            .map(|p| {
                let w = &self.weights[p * self.d..(p + 1) * self.d];
                w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.biases[p]
            })
            .collect()
    }

    /// ½ Σ_p (‖w_p‖² + b_p²). Biases are regularized because the solver
    /// treats them as an extra constant-1 feature.
    pub fn regularizer(&self) -> f64 {
        0.5 * self.weights.iter().chain(&self.biases).map(|v| v * v).sum::<f64>()
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    q: usize,
    d: usize,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    meta: ModelMeta,
}

impl From<LinearModel> for ModelFile {
    fn from(m: LinearModel) -> Self {
        let weights = if m.d == 0 {
            vec![Vec::new(); m.q]
        } else {
            m.weights.chunks(m.d).map(<[f64]>::to_vec).collect()
        };
        Self {
            q: m.q,
            d: m.d,
            weights,
            biases: m.biases,
            meta: m.meta,
        }
    }
}

impl TryFrom<ModelFile> for LinearModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.weights.len() != f.q || f.weights.iter().any(|r| r.len() != f.d) {
            return Err(Error::DimensionMismatch(
                "weights must be a q x d array".into(),
            ));
        }
        let mut model = LinearModel::new(f.q, f.d, f.weights.concat(), f.biases)?;
        model.meta = f.meta;
        Ok(model)
    }
}

/// Instance weights plus the current pace and regularization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfPacedState {
    pub v: Vec<f64>,
    pub lambda: f64,
    pub c: f64,
}

impl SelfPacedState {
    pub fn new(v: Vec<f64>, lambda: f64, c: f64) -> Result<Self> {
        if v.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidInput("weights must lie in [0, 1]".into()));
        }
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveLambda(lambda));
        }
        if !(c > 0.0) {
            return Err(Error::Config(format!("C must be positive, got {c}")));
        }
        Ok(Self { v, lambda, c })
    }
}

/// One label per instance (1-based), as produced by the assignment solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub labels: Vec<usize>,
    /// Instances assigned a label outside their candidate set.
    pub violations: usize,
    /// Weighted assignment cost `Σ_i v_i · c[y_i][i]`.
    pub objective: f64,
}

impl Assignment {
    pub fn class_counts(&self, q: usize) -> Vec<usize> {
        let mut counts = vec![0; q];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }
}

/// Schedules, tolerances and switches for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub c_init: f64,
    pub c_max: f64,
    /// Multiplicative growth of C per stage: `C ← min((1+Δ)C, C_max)`.
    pub delta: f64,
    pub lambda0: f64,
    pub mu: f64,
    pub lambda_max: f64,
    /// Inner loop stops once the objective drops by less than this.
    pub delta_ofv: f64,
    pub big_m: f64,
    pub svm_tol: f64,
    pub svm_max_iter: usize,
    pub inner_max_iter: usize,
    pub seed: u64,
    /// `false` pins every weight to one and runs a single pace stage per C
    /// stage (the plain alternating max-margin trainer).
    pub self_paced: bool,
    /// Carry weights and λ across C stages instead of restarting the pace
    /// schedule at every stage.
    pub carry_pace: bool,
    pub standardize: bool,
    pub warm_start: bool,
    /// Neighbours consulted to break ties in the initial label assignment:
    /// among equally cheap candidates, labels found in more neighbour
    /// candidate sets win. 0 falls back to label order.
    pub init_neighbors: usize,
    /// Kept for reference only; the pace loop is bounded by `lambda_max`.
    pub loss_max: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c_init: 0.01,
            c_max: 10.0,
            delta: 0.5,
            lambda0: 0.6,
            mu: 1.05,
            lambda_max: 1.0,
            delta_ofv: 1e-3,
            big_m: 1e6,
            svm_tol: 1e-4,
            svm_max_iter: 1000,
            inner_max_iter: 50,
            seed: 0,
            self_paced: true,
            carry_pace: false,
            standardize: true,
            warm_start: true,
            init_neighbors: 10,
            loss_max: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.c_init > 0.0 && self.c_init <= self.c_max && self.c_max.is_finite()) {
            return fail(format!(
                "need 0 < c_init ≤ c_max (c_init = {}, c_max = {})",
                self.c_init, self.c_max
            ));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return fail(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.mu > 1.0 && self.mu.is_finite()) {
            return fail(format!("mu must exceed 1, got {}", self.mu));
        }
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return fail(format!("lambda0 must be positive, got {}", self.lambda0));
        }
        if !(self.lambda_max > 0.0 && self.lambda_max.is_finite()) {
            return fail(format!("lambda_max must be positive, got {}", self.lambda_max));
        }
        if !(self.delta_ofv > 0.0) {
            return fail(format!("delta_ofv must be positive, got {}", self.delta_ofv));
        }
        if !(self.big_m > 1.0 && self.big_m.is_finite()) {
            return fail(format!("big_m must exceed 1, got {}", self.big_m));
        }
        if !(self.svm_tol > 0.0) || self.svm_max_iter == 0 || self.inner_max_iter == 0 {
            return fail("solver tolerances and iteration caps must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(n: usize) -> Matrix {
        Matrix::new(n, 2, (0..2 * n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn empty_candidate_set_reported() {
        let mut cands = vec![vec![1], vec![2], vec![1, 2], vec![1], vec![2]];
        cands[3].clear();
        let err = PartialLabelDataset::new(features(5), cands, None, 2).unwrap_err();
        assert_eq!(err, ValidationError::EmptyCandidateSet(3));
    }

    #[test]
    fn supervised_singletons_accepted() {
        let ds = PartialLabelDataset::supervised(features(4), vec![1, 2, 3, 1], 3).unwrap();
        assert!(ds.is_supervised());
        assert!(validate(&ds).is_ok());
    }

    #[test]
    fn truth_outside_candidates_rejected() {
        let cands = vec![vec![1], vec![1], vec![2], vec![3], vec![2], vec![1, 3]];
        let truth = vec![1, 1, 2, 3, 2, 2];
        let err = PartialLabelDataset::new(features(6), cands, Some(truth), 3).unwrap_err();
        assert_eq!(err, ValidationError::TruthNotInCandidates(5));
    }

    #[test]
    fn label_out_of_range_and_non_finite() {
        let err = PartialLabelDataset::new(features(2), vec![vec![1], vec![5]], None, 4)
            .unwrap_err();
        assert_eq!(
            err,
            ValidationError::LabelOutOfRange {
                instance: 1,
                label: 5,
                q: 4
            }
        );
        let x = Matrix::new(2, 2, vec![0.0, 1.0, f64::NAN, 2.0]).unwrap();
        let err = PartialLabelDataset::new(x, vec![vec![1], vec![2]], None, 2).unwrap_err();
        assert_eq!(err, ValidationError::NonFiniteFeature(1, 0));
    }

    #[test]
    fn candidate_sets_normalized() {
        let ds = PartialLabelDataset::new(features(1), vec![vec![3, 1, 3]], None, 3).unwrap();
        assert_eq!(ds.candidates()[0], vec![1, 3]);
    }

    #[test]
    fn model_json_shape() {
        let mut m = LinearModel::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0.5, -0.5])
            .unwrap();
        m.meta.c = 10.0;
        let json: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(json["weights"][1][2], 6.0);
        assert_eq!(json["meta"]["solver"], "cs-dual");
        assert_eq!(json["meta"]["C"], 10.0);
        let back: LinearModel = serde_json::from_value(json).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn config_defaults_valid_and_checked() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.delta, 0.5);
        assert_eq!(cfg.mu, 1.05);
        let bad = TrainConfig {
            mu: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            c_init: 20.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn self_paced_state_bounds() {
        assert!(SelfPacedState::new(vec![0.0, 1.0], 0.6, 1.0).is_ok());
        assert!(SelfPacedState::new(vec![1.5], 0.6, 1.0).is_err());
        assert!(SelfPacedState::new(vec![0.5], 0.0, 1.0).is_err());
    }
}
