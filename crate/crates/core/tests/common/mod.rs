//! Reference computations for the integration tests. Nothing here calls the
//! library code under test except to generate inputs.
#![allow(dead_code)]

use num_rational::Ratio;
use sppll::rng::SeededRng;

/// `f_p(x) = w_p·x + b_p` for row-major `w` (q rows of d).
pub fn scores(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    b.iter()
        .enumerate()
        .map(|(p, bp)| w[p * d..(p + 1) * d].iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + bp)
        .collect()
}

/// Score of the 1-based label `y` minus the best other score.
pub fn margin(s: &[f64], y: usize) -> f64 {
    let rival = s
        .iter()
        .enumerate()
        .filter(|(p, _)| p + 1 != y)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    s[y - 1] - rival
}

pub fn hinge(s: &[f64], y: usize) -> f64 {
    (1.0 - margin(s, y)).max(0.0)
}

pub fn clamped(s: &[f64], y: usize) -> f64 {
    hinge(s, y).min(1.0)
}

/// `½ Σ (‖w_p‖² + b_p²) + C Σ v_i · hinge_i`.
pub fn hinge_primal(w: &[f64], b: &[f64], rows: &[Vec<f64>], y: &[usize], v: &[f64], c: f64) -> f64 {
    let reg = 0.5 * (w.iter().map(|a| a * a).sum::<f64>() + b.iter().map(|a| a * a).sum::<f64>());
    let loss: f64 = rows
        .iter()
        .zip(y)
        .zip(v)
        .map(|((x, &yi), &vi)| vi * hinge(&scores(w, b, x), yi))
        .sum();
    reg + c * loss
}

/// The self-paced objective with clamped losses, summed term by term.
#[allow(clippy::too_many_arguments)]
pub fn sp_objective(w: &[f64], b: &[f64], rows: &[Vec<f64>], y: &[usize], v: &[f64], c: f64, lambda: f64) -> f64 {
    let mut total = 0.0;
    for p in 0..b.len() {
        for a in &w[p * rows[0].len()..(p + 1) * rows[0].len()] {
            total += 0.5 * a * a;
        }
        total += 0.5 * b[p] * b[p];
    }
    for i in 0..rows.len() {
        total += c * v[i] * clamped(&scores(w, b, &rows[i]), y[i]);
        total += lambda / 2.0 * (v[i] * v[i] - 2.0 * v[i]);
    }
    total
}

/// Minimum of `Σ_i cost(y_i, i)` over every labeling with the given class
/// counts, by enumerating all `q^n` labelings. Labels are 1-based.
pub fn brute_force_assignment(
    q: usize,
    n: usize,
    counts: &[usize],
    cost: impl Fn(usize, usize) -> f64,
) -> (f64, Vec<usize>) {
    let mut best = (f64::INFINITY, Vec::new());
    let mut labels = vec![1usize; n];
    loop {
        let mut tally = vec![0usize; q];
        labels.iter().for_each(|&l| tally[l - 1] += 1);
        if tally == counts {
            let total: f64 = labels.iter().enumerate().map(|(i, &l)| cost(l, i)).sum();
            if total < best.0 {
                best = (total, labels.clone());
            }
        }
        let mut k = 0;
        while k < n && labels[k] == q {
            labels[k] = 1;
            k += 1;
        }
        if k == n {
            return best;
        }
        labels[k] += 1;
    }
}

/// Class counts from candidate sets, straight from the definition: exact
/// shares `n̂_p = Σ_{i: p∈S_i} 1/|S_i|`, floors, then one extra for the
/// largest fractional parts (ties to the smaller class).
pub fn prior_counts(cands: &[Vec<usize>], q: usize) -> Vec<usize> {
    let mut share = vec![Ratio::from_integer(0i64); q];
    for set in cands {
        for &p in set {
            share[p - 1] += Ratio::new(1, set.len() as i64);
        }
    }
    let mut counts: Vec<usize> = share.iter().map(|s| s.floor().to_integer() as usize).collect();
    let residual = cands.len() - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| {
        let fa = share[a] - share[a].floor();
        let fb = share[b] - share[b].floor();
        fb.cmp(&fa).then(a.cmp(&b))
    });
    for &p in order.iter().take(residual) {
        counts[p] += 1;
    }
    counts
}

/// Minimizer over the grid `{0, 1e−4, …, 1}` of `v·L + (λ/2)(v² − 2v)`.
pub fn grid_weight(loss: f64, lambda: f64) -> (f64, f64) {
    let f = |v: f64| v * loss + lambda / 2.0 * (v * v - 2.0 * v);
    (0..=10_000)
        .map(|k| k as f64 * 1e-4)
        .map(|v| (v, f(v)))
        .fold((0.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Numeric minimum of the weighted hinge primal over `(w, b)`.
///
/// Each hinge `max_p(δ_{p≠y} + f_p − f_y)` is replaced by `τ·logsumexp(·/τ)`,
/// which overestimates it by at most `τ ln q`. The smooth problem is solved
/// by damped Newton from several starts while `τ` shrinks from 1 to 1e−8;
/// the returned value is the exact hinge objective at the best point.
pub fn hinge_primal_minimum(rows: &[Vec<f64>], y: &[usize], q: usize, v: &[f64], c: f64, seed: u64) -> f64 {
    let d = rows[0].len();
    let k = d + 1;
    let dim = q * k;
    let split = |t: &[f64]| {
        let w: Vec<f64> = (0..q).flat_map(|p| t[p * k..p * k + d].to_vec()).collect();
        let b: Vec<f64> = (0..q).map(|p| t[p * k + d]).collect();
        (w, b)
    };
    let exact = |t: &[f64]| {
        let (w, b) = split(t);
        hinge_primal(&w, &b, rows, y, v, c)
    };
    // smoothed value, gradient and Hessian
    let smooth = |t: &[f64], tau: f64, want_hess: bool| {
        let mut val = 0.5 * t.iter().map(|a| a * a).sum::<f64>();
        let mut grad = t.to_vec();
        let mut hess = vec![0.0; if want_hess { dim * dim } else { 0 }];
        if want_hess {
            (0..dim).for_each(|a| hess[a * dim + a] = 1.0);
        }
        for (i, x) in rows.iter().enumerate() {
            if v[i] == 0.0 {
                continue;
            }
            let xt: Vec<f64> = x.iter().copied().chain([1.0]).collect();
            let f: Vec<f64> = (0..q).map(|p| (0..k).map(|j| t[p * k + j] * xt[j]).sum()).collect();
            let z: Vec<f64> = (0..q)
                .map(|p| if p + 1 == y[i] { 0.0 } else { 1.0 + f[p] - f[y[i] - 1] })
                .collect();
            let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|zp| ((zp - top) / tau).exp()).collect();
            let sum: f64 = e.iter().sum();
            let pi: Vec<f64> = e.iter().map(|a| a / sum).collect();
            let wt = c * v[i];
            val += wt * (top + tau * sum.ln());
            for p in 0..q {
                let g = pi[p] - if p + 1 == y[i] { 1.0 } else { 0.0 };
                for j in 0..k {
                    grad[p * k + j] += wt * g * xt[j];
                }
                if want_hess {
                    for r in 0..q {
                        let h = wt * ((if p == r { pi[p] } else { 0.0 }) - pi[p] * pi[r]) / tau;
                        for a in 0..k {
                            for b in 0..k {
                                hess[(p * k + a) * dim + r * k + b] += h * xt[a] * xt[b];
                            }
                        }
                    }
                }
            }
        }
        (val, grad, hess)
    };
    let mut rng = SeededRng::new(seed);
    let mut best = f64::INFINITY;
    for start in 0..3 {
        let mut t: Vec<f64> = if start == 0 {
            vec![0.0; dim]
        } else {
            (0..dim).map(|_| rng.unit() * 4.0 - 2.0).collect()
        };
        let mut tau = 1.0;
        while tau >= 1e-8 {
            for _ in 0..200 {
                let (val, grad, hess) = smooth(&t, tau, true);
                let step = solve_spd(hess, &grad, dim);
                let decrement: f64 = step.iter().zip(&grad).map(|(a, b)| a * b).sum();
                if decrement < 1e-15 {
                    break;
                }
                let mut eta = 1.0;
                loop {
                    let trial: Vec<f64> = t.iter().zip(&step).map(|(a, s)| a - eta * s).collect();
                    if smooth(&trial, tau, false).0 <= val - 0.25 * eta * decrement || eta < 1e-12 {
                        t = trial;
                        break;
                    }
                    eta *= 0.5;
                }
            }
            tau *= 0.1;
        }
        best = best.min(exact(&t));
    }
    best
}

/// Solves `H s = g` for symmetric positive definite `H` by Cholesky.
fn solve_spd(mut h: Vec<f64>, g: &[f64], n: usize) -> Vec<f64> {
    for j in 0..n {
        let mut diag = h[j * n + j];
        for m in 0..j {
            diag -= h[j * n + m] * h[j * n + m];
        }
        let l = diag.max(1e-300).sqrt();
        h[j * n + j] = l;
        for i in j + 1..n {
            let mut s = h[i * n + j];
            for m in 0..j {
                s -= h[i * n + m] * h[j * n + m];
            }
            h[i * n + j] = s / l;
        }
    }
    let mut z = g.to_vec();
    for i in 0..n {
        for m in 0..i {
            z[i] -= h[i * n + m] * z[m];
        }
        z[i] /= h[i * n + i];
    }
    for i in (0..n).rev() {
        for m in i + 1..n {
            z[i] -= h[m * n + i] * z[m];
        }
        z[i] /= h[i * n + i];
    }
    z
}

/// Random nonempty candidate set over `1..=q`.
pub fn random_candidates(rng: &mut SeededRng, q: usize) -> Vec<usize> {
    loop {
        let set: Vec<usize> = (1..=q).filter(|_| rng.unit() < 0.5).collect();
        if !set.is_empty() {
            return set;
        }
    }
}

pub struct AssignmentCase {
    pub q: usize,
    pub n: usize,
    pub cands: Vec<Vec<usize>>,
    /// Candidate cell costs in `[0, 1]`, `None` elsewhere; rows are classes.
    pub rows: Vec<Vec<Option<f64>>>,
    pub v: Vec<f64>,
    pub counts: Vec<usize>,
}

impl AssignmentCase {
    pub fn cell(&self, p: usize, i: usize, big_m: f64) -> f64 {
        self.rows[p - 1][i].unwrap_or(big_m)
    }
}

/// Instance with `n ≤ 8`, `q ≤ 4`, random candidate sets, costs and weights,
/// and quotas from the candidate-frequency rule.
pub fn assignment_case(rng: &mut SeededRng) -> AssignmentCase {
    let q = 2 + rng.below(3);
    let n = 1 + rng.below(8);
    let cands: Vec<Vec<usize>> = (0..n).map(|_| random_candidates(rng, q)).collect();
    let rows = (1..=q)
        .map(|p| {
            (0..n)
                .map(|i| cands[i].contains(&p).then(|| rng.unit()))
                .collect()
        })
        .collect();
    let v = (0..n).map(|_| rng.unit()).collect();
    let counts = prior_counts(&cands, q);
    AssignmentCase { q, n, cands, rows, v, counts }
}

pub struct SvmCase {
    pub q: usize,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub v: Vec<f64>,
    pub c: f64,
}

/// Tiny weighted problem: `n ≤ 6`, `d ≤ 3`, `q ≤ 3`, about one weight in
/// five set to zero.
pub fn svm_case(rng: &mut SeededRng) -> SvmCase {
    let q = 2 + rng.below(2);
    let d = 1 + rng.below(3);
    let n = 2 + rng.below(5);
    let rows = (0..n).map(|_| (0..d).map(|_| rng.unit() * 4.0 - 2.0).collect()).collect();
    let labels = (0..n).map(|_| 1 + rng.below(q)).collect();
    let v = (0..n).map(|_| if rng.unit() < 0.2 { 0.0 } else { rng.unit() }).collect();
    let c = 0.1 + rng.unit() * 4.9;
    SvmCase { q, rows, labels, v, c }
}
