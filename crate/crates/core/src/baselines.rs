//! Comparison learners: k-nearest-neighbour candidate voting and the
//! non-self-paced alternating max-margin trainer.

use serde::{Deserialize, Serialize};

use crate::data_io::Standardizer;
use crate::error::{Error, Result};
use crate::margin_solver::predict_all;
use crate::trainer::{cross_validate_by, fit, CvOutcome, Fitted};
use crate::types::{Matrix, PartialLabelDataset, TrainConfig};

/// Stored training instances for candidate-set voting.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    features: Matrix,
    candidates: Vec<Vec<usize>>,
    q: usize,
    k: usize,
}

impl KnnIndex {
    pub fn build(dataset: &PartialLabelDataset, k: usize) -> Result<Self> {
        if k == 0 || k > dataset.n() {
            return Err(Error::Config(format!(
                "k must lie in 1..={} (got {k})",
                dataset.n()
            )));
        }
        Ok(Self {
            features: dataset.features().clone(),
            candidates: dataset.candidates().to_vec(),
            q: dataset.q(),
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Indices of the `k` nearest stored instances by squared Euclidean
    /// distance, ties to the smaller index.
    pub fn neighbors(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.features.cols() {
            return Err(Error::DimensionMismatch(format!(
                "query has {} features, index has {}",
                x.len(),
                self.features.cols()
            )));
        }
        let mut dist: Vec<(f64, usize)> = self
            .features
            .iter_rows()
            .enumerate()
            .map(|(i, row)| (row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(dist.into_iter().take(self.k).map(|(_, i)| i).collect())
    }
}

/// The label contained in the most neighbour candidate sets (ties to the
/// smaller label).
pub fn plknn_predict(index: &KnnIndex, x: &[f64]) -> Result<usize> {
    let mut votes = vec![0usize; index.q];
    for i in index.neighbors(x)? {
        for &p in &index.candidates[i] {
            votes[p - 1] += 1;
        }
    }
    let mut best = 0;
    for p in 1..index.q {
        if votes[p] > votes[best] {
            best = p;
        }
    }
    Ok(best + 1)
}

/// Alternating max-margin training with every weight pinned to one and a
/// single pace stage per C stage.
pub fn m3pl_fit(dataset: &PartialLabelDataset, config: &TrainConfig) -> Result<Fitted> {
    fit(
        dataset,
        &TrainConfig {
            self_paced: false,
            carry_pace: false,
            ..config.clone()
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SpPll,
    M3pl,
    PlKnn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SpPll => "sp-pll",
            Method::M3pl => "m3pl",
            Method::PlKnn => "pl-knn",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sp-pll" => Ok(Method::SpPll),
            "m3pl" => Ok(Method::M3pl),
            "pl-knn" => Ok(Method::PlKnn),
            other => Err(Error::InvalidInput(format!(
                "unknown method {other:?} (expected sp-pll, m3pl or pl-knn)"
            ))),
        }
    }
}

/// Cross-validates `method` on shared stratified folds. PL-KNN standardizes
/// with training-split statistics when `config.standardize` is set.
pub fn cross_validate_method(
    method: Method,
    dataset: &PartialLabelDataset,
    folds: usize,
    config: &TrainConfig,
    knn_k: usize,
    seed: u64,
) -> Result<CvOutcome> {
    config.validate()?;
    cross_validate_by(dataset, folds, seed, |train, test_x, fold_seed| {
        let cfg = TrainConfig {
            seed: fold_seed,
            ..config.clone()
        };
        match method {
            Method::SpPll | Method::M3pl => {
                let fitted = if method == Method::SpPll {
                    fit(train, &cfg)?
                } else {
                    m3pl_fit(train, &cfg)?
                };
                Ok((predict_all(&fitted.model, test_x)?, Some(fitted.trace)))
            }
            Method::PlKnn => {
                let (train, test_x) = if cfg.standardize {
                    let s = Standardizer::fit(train.features());
                    (train.with_features(s.transform(train.features()))?, s.transform(test_x))
                } else {
                    (train.clone(), test_x.clone())
                };
                let index = KnnIndex::build(&train, knn_k.min(train.n()))?;
                let predicted = test_x
                    .iter_rows()
                    .map(|row| plknn_predict(&index, row))
                    .collect::<Result<Vec<_>>>()?;
                Ok((predicted, None))
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(points: &[f64], cands: Vec<Vec<usize>>, q: usize, k: usize) -> KnnIndex {
        let x = Matrix::new(points.len(), 1, points.to_vec()).unwrap();
        KnnIndex::build(&PartialLabelDataset::new(x, cands, None, q).unwrap(), k).unwrap()
    }

    #[test]
    fn single_neighbor_vote() {
        let idx = index(&[0.0, 5.0], vec![vec![3], vec![1]], 3, 1);
        assert_eq!(plknn_predict(&idx, &[0.4]).unwrap(), 3);
    }

    #[test]
    fn majority_over_candidate_sets() {
        // votes: 1 → 1, 2 → 3, 3 → 1
        let idx = index(
            &[0.0, 1.0, 2.0, 50.0],
            vec![vec![1, 2], vec![2], vec![2, 3], vec![1]],
            3,
            3,
        );
        assert_eq!(plknn_predict(&idx, &[1.0]).unwrap(), 2);
    }

    #[test]
    fn vote_ties_go_to_smaller_label() {
        let idx = index(&[0.0, 1.0, 2.0], vec![vec![1, 2]; 3], 3, 3);
        assert_eq!(plknn_predict(&idx, &[0.0]).unwrap(), 1);
    }

    #[test]
    fn distance_ties_go_to_smaller_index() {
        let idx = index(&[-1.0, 1.0], vec![vec![2], vec![1]], 2, 1);
        assert_eq!(idx.neighbors(&[0.0]).unwrap(), vec![0]);
        assert_eq!(plknn_predict(&idx, &[0.0]).unwrap(), 2);
        assert!(idx.neighbors(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn k_bounds() {
        let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        let ds = PartialLabelDataset::new(x, vec![vec![1], vec![2]], None, 2).unwrap();
        assert!(KnnIndex::build(&ds, 3).is_err());
        assert!(KnnIndex::build(&ds, 0).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::SpPll, Method::M3pl, Method::PlKnn] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("svm".parse::<Method>().is_err());
    }
}
