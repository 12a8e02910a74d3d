//! Monte Carlo summary statistics: mean estimates, Wilson proportion
//! intervals, and mergeable accumulators.

use serde::{Deserialize, Serialize};

pub const Z_95: f64 = 1.959_963_984_540_054;

/// A Monte Carlo value with its sampling uncertainty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    /// 95% confidence interval: mean ± 1.96·stderr for means, Wilson for proportions.
    pub ci95: (f64, f64),
    pub n: u64,
    /// Fraction of paths censored at `max_time` and excluded from the estimate.
    pub censored_fraction: f64,
}

impl Estimate {
    pub fn from_mean(mean: f64, stderr: f64, n: u64) -> Self {
        Estimate {
            value: mean,
            stderr,
            ci95: (mean - Z_95 * stderr, mean + Z_95 * stderr),
            n,
            censored_fraction: 0.0,
        }
    }

    pub fn from_proportion(successes: u64, n: u64) -> Self {
        let p = if n == 0 { 0.0 } else { successes as f64 / n as f64 };
        let stderr = if n == 0 {
            0.0
        } else {
            (p * (1.0 - p) / n as f64).sqrt()
        };
        Estimate {
            value: p,
            stderr,
            ci95: wilson_interval(successes, n, Z_95),
            n,
            censored_fraction: 0.0,
        }
    }

    pub fn with_censoring(mut self, censored: u64, total: u64) -> Self {
        self.censored_fraction = if total == 0 {
            0.0
        } else {
            censored as f64 / total as f64
        };
        self
    }

    /// Half-width of the 95% interval.
    pub fn half_width(&self) -> f64 {
        (self.ci95.1 - self.ci95.0) / 2.0
    }

    /// Whether `target` sits within `k` standard errors of the value.
    pub fn within_sigmas(&self, target: f64, k: f64) -> bool {
        if self.stderr == 0.0 {
            return self.value == target;
        }
        (self.value - target).abs() <= k * self.stderr
    }
}

/// Wilson score interval for a binomial proportion. Behaves sensibly at the
/// extremes p = 0 and p = 1, where the zero-one law puts the answers.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Streaming mean/variance accumulator. Merge two with [`MeanAcc::merge`];
/// the engine merges per-block accumulators in a fixed order so results do
/// not depend on the worker count.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAcc {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &MeanAcc) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let v = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        v.max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::from_mean(self.mean(), self.stderr(), self.n)
    }
}

/// Fixed-bin histogram over [lo, hi); values outside land in the edge bins.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(hi > lo && bins > 0);
        Histogram {
            lo,
            hi,
            counts: vec![0; bins],
        }
    }

    pub fn push(&mut self, x: f64) {
        let bins = self.counts.len();
        let t = (x - self.lo) / (self.hi - self.lo);
        let idx = ((t * bins as f64).floor() as i64).clamp(0, bins as i64 - 1) as usize;
        self.counts[idx] += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        debug_assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Ordinary least squares on (x, y) pairs; returns (slope, intercept, r²).
pub fn linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(x, y) in points {
        sx += x;
        sy += y;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, intercept, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_degenerate_ends() {
        let (lo, hi) = wilson_interval(0, 100, Z_95);
        assert!(lo.abs() < 1e-12);
        assert!(hi > 0.0 && hi < 0.06);
        let (lo, hi) = wilson_interval(100, 100, Z_95);
        assert!(lo > 0.94 && lo < 1.0);
        assert!((hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_acc_matches_two_pass() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.5];
        let mut acc = MeanAcc::default();
        for &x in &xs {
            acc.push(x);
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((acc.mean() - mean).abs() < 1e-12);
        assert!((acc.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn block_merge_is_deterministic_and_consistent() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let merged_once = |chunk_size: usize| {
            let mut merged = MeanAcc::default();
            for chunk in xs.chunks(chunk_size) {
                let mut blk = MeanAcc::default();
                for &x in chunk {
                    blk.push(x);
                }
                merged.merge(&blk);
            }
            merged
        };
        // Identical blocking gives bitwise identical results.
        let a = merged_once(7);
        let b = merged_once(7);
        assert_eq!(a.mean().to_bits(), b.mean().to_bits());
        assert_eq!(a.variance().to_bits(), b.variance().to_bits());
        // Different groupings agree up to rounding.
        let mut whole = MeanAcc::default();
        for &x in &xs {
            whole.push(x);
        }
        assert!((whole.mean() - a.mean()).abs() < 1e-12);
        assert!((whole.variance() - a.variance()).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..30).map(|i| (i as f64, 3.0 * i as f64 - 2.0)).collect();
        let (slope, intercept, r2) = linear_fit(&pts).unwrap();
        assert!((slope - 3.0).abs() < 1e-12);
        assert!((intercept + 2.0).abs() < 1e-10);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
