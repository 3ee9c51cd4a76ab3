//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ruledrift::{Dataset, Features};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_kernel(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-sigma * sigma * d2).exp()
}

/// Random labelled data on `[-2, 2]^d` with noisy labels from a random
/// halfspace, and weights in `[0.5, 2]` when `weighted`.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize, weighted: bool) -> Dataset {
    let normal: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let s: f64 = row.iter().zip(&normal).map(|(a, b)| a * b).sum();
        let flip = rng.random_bool(0.15);
        y.push(if (s >= 0.0) != flip { 1 } else { -1 });
        x.extend(row);
    }
    let w = weighted.then(|| (0..n).map(|_| rng.random_range(0.5..2.0)).collect());
    Dataset::new(Features::new(x, d).unwrap(), y, w).unwrap()
}

/// Dual of the no-offset weighted hinge SVM by accelerated projected gradient:
/// maximise `sum a - a'Qa / 2` over `0 <= a_i <= w_i / (2 lambda n)`.
/// Returns `a_i y_i`.
pub fn projected_gradient_dual(data: &Dataset, lambda: f64, sigma: f64, iterations: usize) -> Vec<f64> {
    let n = data.len();
    let xs = data.features();
    let y: Vec<f64> = data.labels().iter().map(|&v| f64::from(v)).collect();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = y[i] * y[j] * gaussian_kernel(xs.row(i), xs.row(j), sigma);
        }
    }
    // Gershgorin bound on the largest eigenvalue.
    let lip = (0..n).map(|i| q[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lip;
    let upper: Vec<f64> = (0..n).map(|i| data.weight(i) / (2.0 * lambda * n as f64)).collect();
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0_f64;
    for _ in 0..iterations {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let qz: f64 = (0..n).map(|j| q[i * n + j] * z[j]).sum();
            next[i] = (z[i] + step * (1.0 - qz)).clamp(0.0, upper[i]);
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        for i in 0..n {
            z[i] = next[i] + (t - 1.0) / t_next * (next[i] - a[i]);
        }
        a = next;
        t = t_next;
    }
    a.iter().zip(&y).map(|(ai, yi)| ai * yi).collect()
}

pub fn expansion_value(points: &Features, coef: &[f64], sigma: f64, x: &[f64]) -> f64 {
    points.rows().zip(coef).map(|(p, c)| c * gaussian_kernel(p, x, sigma)).sum()
}

/// Weighted 0-1 risk of the rule `score + theta >= 0`, summed in row order.
pub fn offset_risk(scores: &[f64], data: &Dataset, theta: f64) -> f64 {
    let n = data.len();
    let mut total = 0.0;
    for (i, s) in scores.iter().enumerate() {
        let label = if s + theta >= 0.0 { 1 } else { -1 };
        if label != data.label(i) {
            total += data.weight(i);
        }
    }
    total / n as f64
}

/// Exact minimum of `offset_risk` over `[lo, hi]`: the risk is piecewise
/// constant with breaks at `-score`, so every break, every gap midpoint and
/// both ends cover all pieces.
pub fn brute_force_offset_minimum(scores: &[f64], data: &Dataset, lo: f64, hi: f64) -> f64 {
    let mut cuts: Vec<f64> = scores.iter().map(|s| -s).filter(|c| *c > lo && *c < hi).collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    let mut probes = cuts.clone();
    for w in cuts.windows(2) {
        probes.push(0.5 * (w[0] + w[1]));
    }
    probes.into_iter().map(|t| offset_risk(scores, data, t)).fold(f64::INFINITY, f64::min)
}

/// Inverse-propensity weight `R / P(T = t | x)`.
pub fn ipw_weight(reward: f64, treatment: i8, propensity: f64) -> f64 {
    if treatment == 1 {
        reward / propensity
    } else {
        reward / (1.0 - propensity)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
