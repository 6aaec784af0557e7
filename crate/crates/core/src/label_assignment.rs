//! Class-balanced label assignment.
//!
//! Chooses one label per instance minimizing `Σ_i v_i · c[y_i][i]` while class
//! `p` receives exactly `n_p` instances. This is a transportation problem; it
//! is solved exactly as a min-cost flow on the bipartite instance→class
//! network by successive shortest augmenting paths, adding one instance at a
//! time. Paths alternate instance→class→instance; they are searched on the
//! class graph, where moving from class `p` to class `p'` costs the cheapest
//! re-labeling of an instance currently in `p`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::data_io::PriorCounts;
use crate::error::{Error, Result};
use crate::losses::MarginReport;
use crate::types::{Assignment, LinearModel, Matrix, PartialLabelDataset};

/// Reduced-cost comparisons use this slack; earlier (smaller class, then
/// smaller instance) choices win within it.
const COST_EPS: f64 = 1e-12;

/// `q × n` label costs; non-candidate cells hold `big_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    q: usize,
    n: usize,
    costs: Vec<f64>,
    candidate: Vec<bool>,
    pub big_m: f64,
}

impl CostMatrix {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Cost of giving label `p` (1-based) to instance `i`.
    pub fn get(&self, p: usize, i: usize) -> f64 {
        self.costs[(p - 1) * self.n + i]
    }

    pub fn is_candidate(&self, p: usize, i: usize) -> bool {
        self.candidate[(p - 1) * self.n + i]
    }

    /// Builds from explicit candidate-cell costs (`None` marks a non-candidate
    /// cell). Rows are classes.
    pub fn from_rows(rows: &[Vec<Option<f64>>], big_m: f64) -> Result<Self> {
        let q = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("ragged cost rows".into()));
        }
        let mut costs = Vec::with_capacity(q * n);
        let mut candidate = Vec::with_capacity(q * n);
        for row in rows {
            for cell in row {
                match cell {
                    Some(c) if c.is_finite() && *c >= 0.0 => {
                        costs.push(*c);
                        candidate.push(true);
                    }
                    Some(c) => return Err(Error::InvalidInput(format!("bad cost {c}"))),
                    None => {
                        costs.push(big_m);
                        candidate.push(false);
                    }
                }
            }
        }
        Ok(Self {
            q,
            n,
            costs,
            candidate,
            big_m,
        })
    }

    fn with_candidates(dataset: &PartialLabelDataset, big_m: f64) -> Self {
        let (q, n) = (dataset.q(), dataset.n());
        let mut candidate = vec![false; q * n];
        for (i, set) in dataset.candidates().iter().enumerate() {
            for &p in set {
                candidate[(p - 1) * n + i] = true;
            }
        }
        Self {
            q,
            n,
            costs: vec![big_m; q * n],
            candidate,
            big_m,
        }
    }
}

/// Candidate cells get the clamped loss of labeling the instance with that
/// class under `model`; other cells get `big_m`. `x` supplies the features
/// the model scores (it may be a transformed copy of the dataset's).
pub fn build_cost_matrix_on(
    model: &LinearModel,
    x: &Matrix,
    dataset: &PartialLabelDataset,
    big_m: f64,
) -> Result<CostMatrix> {
    if model.q() != dataset.q() || model.d() != x.cols() || x.rows() != dataset.n() {
        return Err(Error::DimensionMismatch(format!(
            "model {}x{} vs dataset q={} d={} n={}",
            model.q(),
            model.d(),
            dataset.q(),
            x.cols(),
            dataset.n()
        )));
    }
    let mut out = CostMatrix::with_candidates(dataset, big_m);
    let n = out.n;
    for (i, row) in x.iter_rows().enumerate() {
        let scores = model.scores(row);
        for &p in &dataset.candidates()[i] {
            out.costs[(p - 1) * n + i] = MarginReport::from_scores(&scores, p).clamped;
        }
    }
    Ok(out)
}

pub fn build_cost_matrix(
    model: &LinearModel,
    dataset: &PartialLabelDataset,
    big_m: f64,
) -> Result<CostMatrix> {
    build_cost_matrix_on(model, dataset.features(), dataset, big_m)
}

/// Uniform costs `1/|S_i|` over each candidate set.
pub fn init_cost_matrix(dataset: &PartialLabelDataset, big_m: f64) -> CostMatrix {
    let mut out = CostMatrix::with_candidates(dataset, big_m);
    let n = out.n;
    for (i, set) in dataset.candidates().iter().enumerate() {
        let share = 1.0 / set.len() as f64;
        for &p in set {
            out.costs[(p - 1) * n + i] = share;
        }
    }
    out
}

/// Per-cell tie-break ranks for the initial assignment: `1 − (share of the
/// k nearest other rows of `x` whose candidate set holds p)`. Neighbours are
/// ranked by squared Euclidean distance, ties to the smaller index.
pub fn neighbor_vote_ranks(x: &Matrix, dataset: &PartialLabelDataset, k: usize) -> Result<Vec<f64>> {
    let (n, q) = (dataset.n(), dataset.q());
    if x.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows for {n} instances",
            x.rows()
        )));
    }
    let k = k.min(n - 1);
    let mut ranks = vec![1.0; q * n];
    if k == 0 {
        return Ok(ranks);
    }
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        let xi = x.row(i);
        dist.clear();
        dist.extend((0..n).filter(|&j| j != i).map(|j| {
            let d2 = x.row(j).iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (d2, j)
        }));
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &dist[..k] {
            for &p in &dataset.candidates()[j] {
                ranks[(p - 1) * n + i] -= 1.0 / k as f64;
            }
        }
    }
    Ok(ranks)
}

/// Exact minimum-cost assignment with class quotas.
///
/// Among assignments of equal weighted cost the one with the smallest
/// unweighted cost `Σ_i c[y_i][i]` is returned, so instances with `v_i = 0`
/// still go to their cheapest candidates. Remaining ties resolve toward
/// smaller labels, then smaller instance indices.
pub fn solve_assignment(costs: &CostMatrix, v: &[f64], counts: &PriorCounts) -> Result<Assignment> {
    solve_assignment_ranked(costs, v, counts, &costs.costs)
}

/// As [`solve_assignment`], with equal-cost optima ranked by `Σ_i rank[y_i][i]`
/// instead (`rank` is q×n row-major like the costs).
pub fn solve_assignment_ranked(
    costs: &CostMatrix,
    v: &[f64],
    counts: &PriorCounts,
    rank: &[f64],
) -> Result<Assignment> {
    let (q, n) = (costs.q, costs.n);
    if rank.len() != q * n {
        return Err(Error::DimensionMismatch(format!(
            "{} ranks for a {q}×{n} cost matrix",
            rank.len()
        )));
    }
    if v.len() != n || counts.counts.len() != q {
        return Err(Error::DimensionMismatch(format!(
            "{n} instances / {q} classes vs {} weights / {} counts",
            v.len(),
            counts.counts.len()
        )));
    }
    let total = counts.total();
    if total != n {
        return Err(Error::CountMismatch {
            got: total,
            expected: n,
        });
    }
    let cost = |p: usize, i: usize| Lex(v[i] * costs.costs[p * n + i], rank[p * n + i]);

    let mut label: Vec<usize> = vec![usize::MAX; n];
    let mut load = vec![0usize; q];
    let mut dist = vec![Lex::ZERO; q];
    // (previous class, instance moved from it) on the shortest path
    let mut via: Vec<Option<(usize, usize)>> = vec![None; q];
    let mut hop: Vec<Option<(Lex, usize)>> = vec![None; q * q];
    // moves[a·q + b]: cost of moving an instance of class a to class b. Costs
    // are fixed, so entries of instances that left class a are dropped lazily.
    let mut moves: Vec<BinaryHeap<Reverse<Move>>> = (0..q * q).map(|_| BinaryHeap::new()).collect();
    let enter = |moves: &mut Vec<BinaryHeap<Reverse<Move>>>, j: usize, a: usize| {
        let base = cost(a, j);
        for b in (0..q).filter(|&b| b != a) {
            moves[a * q + b].push(Reverse(Move {
                cost: cost(b, j).minus(base),
                instance: j,
            }));
        }
    };

    for i in 0..n {
        for p in 0..q {
            dist[p] = cost(p, i);
            via[p] = None;
        }
        for (ab, heap) in moves.iter_mut().enumerate() {
            hop[ab] = None;
            while let Some(Reverse(m)) = heap.peek() {
                if label[m.instance] == ab / q {
                    hop[ab] = Some((m.cost, m.instance));
                    break;
                }
                heap.pop();
            }
        }
        // Bellman–Ford on q nodes. The partial assignment is optimal up to the
        // tie tolerance, so only near-zero cycles can appear; relaxations that
        // would close one are refused to keep every path simple.
        for _ in 0..q {
            let mut changed = false;
            for a in 0..q {
                for b in 0..q {
                    let Some((c, j)) = hop[a * q + b] else {
                        continue;
                    };
                    let cand = dist[a].plus(c);
                    if cand.less(dist[b]) && !reaches(&via, a, b) {
                        dist[b] = cand;
                        via[b] = Some((a, j));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let target = (0..q)
            .filter(|&p| load[p] < counts.counts[p])
            .fold(None, |best: Option<usize>, p| match best {
                Some(b) if !dist[p].less(dist[b]) => Some(b),
                _ => Some(p),
            })
            .expect("quotas sum to n, so some class has room");

        load[target] += 1;
        let mut p = target;
        while let Some((prev, j)) = via[p] {
            label[j] = p;
            enter(&mut moves, j, p);
            p = prev;
        }
        label[i] = p;
        enter(&mut moves, i, p);
    }

    let labels: Vec<usize> = label.iter().map(|&p| p + 1).collect();
    let violations = (0..n).filter(|&i| !costs.candidate[label[i] * n + i]).count();
    let objective = (0..n).map(|i| cost(label[i], i).0).sum();
    Ok(Assignment {
        labels,
        violations,
        objective,
    })
}

/// Whether `target` lies on the path tree branch from `from` back to its root.
fn reaches(via: &[Option<(usize, usize)>], from: usize, target: usize) -> bool {
    let mut p = from;
    loop {
        if p == target {
            return true;
        }
        match via[p] {
            Some((prev, _)) => p = prev,
            None => return false,
        }
    }
}

/// Weighted cost with the unweighted cost as tie-breaker.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Lex(f64, f64);

impl Lex {
    const ZERO: Lex = Lex(0.0, 0.0);

    fn plus(self, o: Lex) -> Lex {
        Lex(self.0 + o.0, self.1 + o.1)
    }

    fn minus(self, o: Lex) -> Lex {
        Lex(self.0 - o.0, self.1 - o.1)
    }

    fn less(self, o: Lex) -> bool {
        if self.0 < o.0 - COST_EPS {
            return true;
        }
        self.0 <= o.0 + COST_EPS && self.1 < o.1 - COST_EPS
    }
}

/// A candidate move, ordered by cost, then instance index.
#[derive(Debug, Clone, Copy)]
struct Move {
    cost: Lex,
    instance: usize,
}

impl Ord for Move {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .0
            .total_cmp(&other.cost.0)
            .then(self.cost.1.total_cmp(&other.cost.1))
            .then(self.instance.cmp(&other.instance))
    }
}

impl PartialOrd for Move {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Move {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Move {}
