//! Set distances between decision rules: Monte Carlo symmetric difference,
//! grid Hausdorff distance and distance to the decision boundary.
//!
//! Hausdorff and boundary distances work on a regular grid over a domain box
//! and are limited to `d <= 3`. Their bias is of the order of one grid spacing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rules::DecisionRule;

const MAX_GRID_DIM: usize = 3;

/// Axis-aligned box `prod [lower_k, upper_k]` with positive volume.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Argument("domain box needs matching nonempty bounds".into()));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::Argument(format!("invalid domain interval [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// `[-3, 3]^d`.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::cube(dim, -3.0, 3.0)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).product()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for ((o, lo), hi) in out.iter_mut().zip(&self.lower).zip(&self.upper) {
            *o = rng.random_range(*lo..*hi);
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `volume * P(membership differs)` under the uniform law on the domain.
pub fn empirical_symmetric_difference(
    a: &DecisionRule,
    b: &DecisionRule,
    domain: &DomainBox,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples == 0 {
        return Err(Error::Argument("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; domain.dim()];
    let mut differ = 0usize;
    for _ in 0..n_samples {
        domain.sample(&mut rng, &mut x);
        if a.membership(&x)? != b.membership(&x)? {
            differ += 1;
        }
    }
    let p = differ as f64 / n_samples as f64;
    let vol = domain.volume();
    Ok(McEstimate { value: vol * p, std_error: vol * (p * (1.0 - p) / n_samples as f64).sqrt() })
}

/// Regular grid with `resolution` points per axis, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub domain: DomainBox,
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(domain: DomainBox, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::Argument("grid resolution must be at least 2".into()));
        }
        if domain.dim() > MAX_GRID_DIM {
            return Err(Error::DimensionUnsupported(domain.dim()));
        }
        Ok(Self { domain, resolution })
    }

    pub fn spacing(&self) -> Vec<f64> {
        let r = (self.resolution - 1) as f64;
        self.domain.lower.iter().zip(&self.domain.upper).map(|(lo, hi)| (hi - lo) / r).collect()
    }

    pub fn n_points(&self) -> usize {
        self.resolution.pow(self.domain.dim() as u32)
    }

    /// Coordinates of flat index `idx` (last axis fastest).
    pub fn point(&self, mut idx: usize, out: &mut [f64]) {
        let h = self.spacing();
        for k in (0..self.domain.dim()).rev() {
            let i = idx % self.resolution;
            idx /= self.resolution;
            out[k] = if i + 1 == self.resolution { self.domain.upper[k] } else { self.domain.lower[k] + i as f64 * h[k] };
        }
    }

    fn mask(&self, rule: &DecisionRule) -> Result<Vec<bool>> {
        let mut x = vec![0.0; self.domain.dim()];
        (0..self.n_points())
            .map(|i| {
                self.point(i, &mut x);
                rule.membership(&x)
            })
            .collect()
    }
}

/// Exact squared distance transform of a 1-d sampled function with spacing `h`
/// (lower envelope of parabolas).
fn distance_transform_1d(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        out.fill(f64::INFINITY);
        return;
    };
    let key = |q: usize| f[q] + (q as f64 * h).powi(2);
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let mut s;
        loop {
            let p = v[k];
            s = (key(q) - key(p)) / (2.0 * h * (q - p) as f64);
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                break;
            }
        }
        if s <= z[k] {
            // only possible at k == 0: q dominates the first parabola everywhere
            v[0] = q;
            z[1] = f64::INFINITY;
            continue;
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for (p, o) in out.iter_mut().enumerate() {
        let pos = p as f64 * h;
        while z[k + 1] < pos {
            k += 1;
        }
        *o = ((p as f64 - v[k] as f64) * h).powi(2) + f[v[k]];
    }
}

/// Euclidean distance from every grid point to the nearest grid point in `mask`.
fn distance_to_mask(mask: &[bool], grid: &GridSpec) -> Vec<f64> {
    let d = grid.domain.dim();
    let r = grid.resolution;
    let h = grid.spacing();
    let mut dist: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();
    let mut line = vec![0.0; r];
    let mut res = vec![0.0; r];
    for (axis, &step_h) in h.iter().enumerate() {
        let stride = r.pow((d - 1 - axis) as u32);
        for start in 0..dist.len() {
            if (start / stride) % r != 0 {
                continue;
            }
            for i in 0..r {
                line[i] = dist[start + i * stride];
            }
            distance_transform_1d(&line, step_h, &mut res);
            for i in 0..r {
                dist[start + i * stride] = res[i];
            }
        }
    }
    dist.iter_mut().for_each(|v| *v = v.sqrt());
    dist
}

fn directed(from: &[bool], to_dist: &[f64]) -> f64 {
    from.iter().zip(to_dist).filter(|(m, _)| **m).map(|(_, d)| *d).fold(0.0, f64::max)
}

/// Grid estimate of the Hausdorff distance between the acceptance sets.
/// Two empty sets are at distance 0; one empty set gives infinity.
pub fn hausdorff_estimate(a: &DecisionRule, b: &DecisionRule, domain: &DomainBox, grid_resolution: usize) -> Result<f64> {
    let grid = GridSpec::new(domain.clone(), grid_resolution)?;
    let (ma, mb) = (grid.mask(a)?, grid.mask(b)?);
    let (ea, eb) = (!ma.iter().any(|&m| m), !mb.iter().any(|&m| m));
    if ea || eb {
        return Ok(if ea && eb { 0.0 } else { f64::INFINITY });
    }
    let (da, db) = (distance_to_mask(&ma, &grid), distance_to_mask(&mb, &grid));
    Ok(directed(&ma, &db).max(directed(&mb, &da)))
}

/// Distance from `x` to the decision boundary of `rule`.
///
/// Exact for rules that are affine halfspaces after all transforms. Other
/// rules need a grid and use the nearest grid point of the opposite class.
pub fn boundary_distance(rule: &DecisionRule, x: &[f64], grid: Option<&GridSpec>) -> Result<f64> {
    if let Some((a, b)) = rule.affine_form() {
        if a.len() != x.len() {
            return Err(Error::Shape { expected: a.len(), found: x.len() });
        }
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(f64::INFINITY);
        }
        return Ok((a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() + b).abs() / norm);
    }
    if x.len() > MAX_GRID_DIM {
        return Err(Error::DimensionUnsupported(x.len()));
    }
    let grid = grid.ok_or_else(|| Error::Unsupported("boundary distance of a non-affine rule needs a grid".into()))?;
    if grid.domain.dim() != x.len() {
        return Err(Error::Shape { expected: grid.domain.dim(), found: x.len() });
    }
    let inside = rule.membership(x)?;
    let mut p = vec![0.0; x.len()];
    let mut best = f64::INFINITY;
    for i in 0..grid.n_points() {
        grid.point(i, &mut p);
        if rule.membership(&p)? != inside {
            let d2: f64 = p.iter().zip(x).map(|(u, v)| (u - v).powi(2)).sum();
            best = best.min(d2);
        }
    }
    Ok(best.sqrt())
}
