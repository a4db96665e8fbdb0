//! Means with naive, blocked and jackknife errors and integrated
//! autocorrelation times.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// Jackknife error over blocks.
    pub sigma: f64,
    pub naive_sigma: f64,
    pub blocked_sigma: f64,
    pub n_samples: usize,
    pub tau_int: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { mean: value, sigma: 0.0, naive_sigma: 0.0, blocked_sigma: 0.0, n_samples: 0, tau_int: 0.5 }
    }

    /// Estimate of a stored series with `blocks` equal blocks and a windowed
    /// autocorrelation time.
    pub fn from_series(xs: &[f64], blocks: usize) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, ..Estimate::exact(f64::NAN) };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let naive = (var / n as f64).sqrt();
        let nb = blocks.clamp(2, n.max(2)).min(n);
        let bs = n / nb.max(1);
        let means: Vec<f64> = (0..nb).map(|b| xs[b * bs..(b + 1) * bs].iter().sum::<f64>() / bs as f64).collect();
        let (blocked, jack) = block_errors(&means);
        Estimate { mean, sigma: jack, naive_sigma: naive, blocked_sigma: blocked, n_samples: n, tau_int: tau_int(xs) }
    }

    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if self.sigma > 0.0 {
            d / self.sigma
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Standard error of the block means and the delete-one-block jackknife error
/// of the grand mean.
fn block_errors(means: &[f64]) -> (f64, f64) {
    let nb = means.len();
    if nb < 2 {
        return (0.0, 0.0);
    }
    let m = means.iter().sum::<f64>() / nb as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (nb - 1) as f64;
    let blocked = (var / nb as f64).sqrt();
    let jack = jackknife(means, |xs| xs.iter().sum::<f64>() / xs.len() as f64).1;
    (blocked, jack)
}

/// Delete-one jackknife of a statistic over per-block values; returns the
/// full-sample value and its error.
pub fn jackknife<F: Fn(&[f64]) -> f64>(blocks: &[f64], f: F) -> (f64, f64) {
    let nb = blocks.len();
    let full = f(blocks);
    if nb < 2 {
        return (full, 0.0);
    }
    let mut rest = Vec::with_capacity(nb - 1);
    let mut loo = Vec::with_capacity(nb);
    for i in 0..nb {
        rest.clear();
        rest.extend(blocks.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| *x));
        loo.push(f(&rest));
    }
    let m = loo.iter().sum::<f64>() / nb as f64;
    let var = loo.iter().map(|x| (x - m) * (x - m)).sum::<f64>() * (nb - 1) as f64 / nb as f64;
    (full, var.sqrt())
}

/// Integrated autocorrelation time with automatic windowing (`W >= 6 tau`).
pub fn tau_int(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 0.5;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let c0 = d.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for t in 1..n / 2 {
        let ct = d[..n - t].iter().zip(&d[t..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        tau += ct / c0;
        if (t as f64) >= 6.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Streaming mean with fixed-size blocks; merges are ordered by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    block_size: usize,
    count: usize,
    sum: f64,
    sum_sq: f64,
    current: f64,
    current_len: usize,
    block_means: Vec<f64>,
}

impl Accumulator {
    pub fn new(block_size: usize) -> Self {
        Accumulator {
            block_size: block_size.max(1),
            count: 0,
            sum: 0.0,
            sum_sq: 0.0,
            current: 0.0,
            current_len: 0,
            block_means: Vec::new(),
        }
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
        self.current += x;
        self.current_len += 1;
        if self.current_len == self.block_size {
            self.block_means.push(self.current / self.block_size as f64);
            self.current = 0.0;
            self.current_len = 0;
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Appends another chain's samples; the result depends on merge order
    /// only through floating-point summation.
    pub fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.block_means.extend_from_slice(&other.block_means);
    }

    /// Autocorrelation time from the ratio of blocked to naive variance.
    pub fn estimate(&self) -> Estimate {
        let n = self.count;
        if n == 0 {
            return Estimate { mean: f64::NAN, ..Estimate::exact(f64::NAN) };
        }
        let mean = self.sum / n as f64;
        let var = if n > 1 { ((self.sum_sq - n as f64 * mean * mean) / (n - 1) as f64).max(0.0) } else { 0.0 };
        let naive = (var / n as f64).sqrt();
        let (blocked, jack) = block_errors(&self.block_means);
        let tau = if naive > 0.0 { (0.5 * (blocked / naive).powi(2)).max(0.5) } else { 0.5 };
        Estimate { mean, sigma: jack, naive_sigma: naive, blocked_sigma: blocked, n_samples: n, tau_int: tau }
    }
}
