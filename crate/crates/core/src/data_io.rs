//! PLC dataset files, synthetic partial-label corruption, class quotas, and
//! a few data helpers.
//!
//! PLC format (UTF-8, LF):
//!
//! ```text
//! n d q
//! f1,f2,...,fd|l1,l2,...,lk[|t]
//! ```
//!
//! one line per instance; candidate labels are 1-based and strictly
//! increasing; the optional trailing field is the true label (present on all
//! lines or none).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::types::{Matrix, PartialLabelDataset};

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<PartialLabelDataset> {
    parse_plc(&fs::read_to_string(path)?)
}

pub fn save_dataset(dataset: &PartialLabelDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_plc(dataset))?;
    Ok(())
}

/// Serializes to PLC text. Reals use the shortest representation that parses
/// back to the same `f64`.
pub fn format_plc(dataset: &PartialLabelDataset) -> String {
    let mut out = format!("{} {} {}\n", dataset.n(), dataset.d(), dataset.q());
    for (i, row) in dataset.features().iter_rows().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:?}").unwrap();
        }
        out.push('|');
        for (k, l) in dataset.candidates()[i].iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{l}").unwrap();
        }
        if let Some(t) = dataset.truth() {
            write!(out, "|{}", t[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_plc(text: &str) -> Result<PartialLabelDataset> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(parse_err(1, "header must be `n d q`"));
    }
    let parse_dim = |s: &str, name: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| parse_err(1, format!("{name} is not a non-negative integer: {s:?}")))
    };
    let n = parse_dim(dims[0], "n")?;
    let d = parse_dim(dims[1], "d")?;
    let q = parse_dim(dims[2], "q")?;
    if n == 0 {
        return Err(parse_err(1, "n must be positive"));
    }
    if d == 0 {
        return Err(parse_err(1, "d must be positive"));
    }
    if q == 0 {
        return Err(parse_err(1, "q must be positive"));
    }

    let mut features = Vec::with_capacity(n * d);
    let mut candidates = Vec::with_capacity(n);
    let mut truth = Vec::new();
    let mut has_truth = None;
    let mut count = 0;
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        count += 1;
        if count > n {
            return Err(parse_err(line_no, format!("more than n = {n} instance lines")));
        }
        let fields: Vec<&str> = line.split('|').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_err(line_no, "expected `features|labels[|truth]`"));
        }
        let row: Vec<&str> = fields[0].split(',').collect();
        if row.len() != d {
            return Err(parse_err(
                line_no,
                format!("expected {d} features, found {}", row.len()),
            ));
        }
        for tok in row {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad feature value {tok:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, format!("non-finite feature {tok:?}")));
            }
            features.push(v);
        }
        let mut set = Vec::new();
        for tok in fields[1].split(',') {
            let l = parse_label(tok, q, line_no)?;
            if set.last().is_some_and(|&prev| prev >= l) {
                return Err(parse_err(line_no, "labels must be strictly increasing"));
            }
            set.push(l);
        }
        candidates.push(set);
        let this_has_truth = fields.len() == 3;
        if *has_truth.get_or_insert(this_has_truth) != this_has_truth {
            return Err(parse_err(
                line_no,
                "truth field must be present on all lines or on none",
            ));
        }
        if this_has_truth {
            truth.push(parse_label(fields[2], q, line_no)?);
        }
    }
    if count != n {
        return Err(parse_err(
            1,
            format!("header declares n = {n} but found {count} instance lines"),
        ));
    }
    let features = Matrix::new(n, d, features)?;
    let truth = has_truth.unwrap_or(false).then_some(truth);
    Ok(PartialLabelDataset::new(features, candidates, truth, q)?)
}

fn parse_label(tok: &str, q: usize, line: usize) -> Result<usize> {
    let l: usize = tok
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("bad label {tok:?}")))?;
    if l == 0 || l > q {
        return Err(parse_err(
            line,
            format!("LabelOutOfRange: label {l} outside 1..={q}"),
        ));
    }
    Ok(l)
}

/// Builds a supervised dataset from CSV text whose last column is the class.
///
/// Distinct class tokens are mapped to 1..=q in ascending order (numeric
/// order when every token parses as a number, lexicographic otherwise).
/// Returns the dataset and the token for each label.
pub fn from_csv(text: &str, has_header: bool) -> Result<(PartialLabelDataset, Vec<String>)> {
    let mut rows = Vec::new();
    let mut tokens = Vec::new();
    for (k, line) in text.lines().enumerate().skip(usize::from(has_header)) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(parse_err(k + 1, "need at least one feature and a label"));
        }
        let (label, feats) = fields.split_last().unwrap();
        let row = feats
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(k + 1, format!("bad feature value {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
        tokens.push(label.to_string());
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    let mut classes: Vec<String> = tokens.clone();
    classes.sort();
    classes.dedup();
    if classes.iter().all(|c| c.parse::<f64>().is_ok()) {
        classes.sort_by(|a, b| {
            a.parse::<f64>()
                .unwrap()
                .total_cmp(&b.parse::<f64>().unwrap())
        });
    }
    let labels = tokens
        .iter()
        .map(|t| classes.iter().position(|c| c == t).unwrap() + 1)
        .collect();
    let features = Matrix::from_rows(&rows)?;
    let q = classes.len();
    Ok((PartialLabelDataset::supervised(features, labels, q)?, classes))
}

/// Turns a supervised dataset into a partial-label one.
///
/// `round(p·n)` instances (half-up) are drawn uniformly without replacement;
/// each gets `r` distinct false labels drawn uniformly from the labels other
/// than its truth. Chosen instances are processed in ascending index order.
pub fn corrupt_labels(
    supervised: &PartialLabelDataset,
    p: f64,
    r: usize,
    seed: u64,
) -> Result<PartialLabelDataset> {
    let truth = supervised.truth().ok_or(Error::NoGroundTruth)?;
    if let Some(i) = (0..supervised.n())
        .find(|&i| supervised.candidates()[i].as_slice() != [truth[i]])
    {
        return Err(Error::NotSupervised(i));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProportion(p));
    }
    let q = supervised.q();
    if r > q - 1 {
        return Err(Error::RTooLarge { r, q });
    }
    let n = supervised.n();
    let m = ((p * n as f64 + 0.5).floor() as usize).min(n);
    let mut rng = SeededRng::new(seed);
    let mut chosen = rng.sample_indices(n, m);
    chosen.sort_unstable();

    let mut candidates: Vec<Vec<usize>> = supervised.candidates().to_vec();
    for i in chosen {
        let others: Vec<usize> = (1..=q).filter(|&l| l != truth[i]).collect();
        let picks = rng.sample_indices(others.len(), r);
        candidates[i].extend(picks.into_iter().map(|k| others[k]));
    }
    Ok(PartialLabelDataset::new(
        supervised.features().clone(),
        candidates,
        Some(truth.to_vec()),
        q,
    )?)
}

/// Per-class instance quotas `n_p`, summing to `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorCounts {
    pub counts: Vec<usize>,
}

impl PriorCounts {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Class quotas from candidate frequencies.
///
/// `n̂_p = Σ_i 1[p ∈ S_i] / |S_i|`, computed in exact rational arithmetic.
/// Every class gets `⌊n̂_p⌋`; the residual `n − Σ ⌊n̂_p⌋` goes one each to the
/// classes with the largest fractional parts, ties to the smaller label.
pub fn class_prior_counts(dataset: &PartialLabelDataset) -> PriorCounts {
    let q = dataset.q();
    // size_hist[p][s] = number of instances with p ∈ S_i and |S_i| = s
    let mut size_hist = vec![vec![0u64; q + 1]; q];
    for set in dataset.candidates() {
        for &p in set {
            size_hist[p - 1][set.len()] += 1;
        }
    }
    let estimates: Vec<BigRational> = size_hist
        .iter()
        .map(|hist| {
            hist.iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .fold(BigRational::zero(), |acc, (s, &c)| {
                    acc + BigRational::new(BigInt::from(c), BigInt::from(s))
                })
        })
        .collect();
    let mut counts: Vec<usize> = estimates
        .iter()
        .map(|e| e.floor().to_integer().to_usize().unwrap())
        .collect();
    let residual = dataset.n() - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..q).collect();
    let fracs: Vec<BigRational> = estimates.iter().map(BigRational::fract).collect();
    // stable sort keeps ascending label order among equal fractions
    order.sort_by(|&a, &b| fracs[b].cmp(&fracs[a]));
    for &p in order.iter().take(residual) {
        counts[p] += 1;
    }
    PriorCounts { counts }
}

/// Isotropic Gaussian blobs, one per class, with centers evenly spaced on a
/// circle of radius `separation` in the first two coordinates (other
/// coordinates centered at zero). Labels cycle 1, 2, …, q so classes are
/// balanced.
pub fn gaussian_blobs(
    n: usize,
    d: usize,
    q: usize,
    separation: f64,
    seed: u64,
) -> Result<PartialLabelDataset> {
    if n == 0 || d == 0 || q == 0 {
        return Err(Error::InvalidInput("n, d and q must be positive".into()));
    }
    let mut rng = SeededRng::new(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % q + 1;
        let angle = 2.0 * std::f64::consts::PI * (label - 1) as f64 / q as f64;
        for j in 0..d {
            let center = match j {
                0 => separation * angle.cos(),
                1 => separation * angle.sin(),
                _ => 0.0,
            };
            let z: f64 = StandardNormal.sample(rng.inner_mut());
            data.push(center + z);
        }
        labels.push(label);
    }
    Ok(PartialLabelDataset::supervised(
        Matrix::new(n, d, data)?,
        labels,
        q,
    )?)
}

/// Per-feature z-scoring with statistics from a reference matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Constant features keep scale 1.
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows().max(1) as f64;
        let d = x.cols();
        let mut mean = vec![0.0; d];
        for row in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x.iter_rows() {
            for j in 0..d {
                var[j] += (row[j] - mean[j]).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        out
    }
}
