//! Streaming estimators for simulation output.
//!
//! Accumulators use Welford/Chan updates so that per-chunk partial results
//! can be merged in a fixed order; merging is what makes parallel runs
//! reproducible independently of the worker count.

use serde::{Deserialize, Serialize};

/// A Monte Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
}

impl SimEstimate {
    /// Symmetric confidence interval `value ± z·stderr`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.value - z * self.stderr, self.value + z * self.stderr)
    }

    /// Whether `target` lies within `z` standard errors of the estimate.
    pub fn covers(&self, target: f64, z: f64) -> bool {
        (self.value - target).abs() <= z * self.stderr
    }

    /// Number of standard errors between the estimate and `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr > 0.0 {
            (self.value - target) / self.stderr
        } else if self.value == target {
            0.0
        } else {
            f64::INFINITY.copysign(self.value - target)
        }
    }
}

/// Running mean and variance of a scalar sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += d * w;
        self.m2 += other.m2 + d * d * self.n as f64 * w;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two observations).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> SimEstimate {
        let stderr = if self.n < 2 {
            f64::INFINITY
        } else {
            (self.variance() / self.n as f64).sqrt()
        };
        SimEstimate {
            value: self.mean,
            stderr,
            n: self.n,
        }
    }
}

/// Running first and second co-moments of a pair `(x, y)`, used for ratio
/// estimators such as conditional means `E[X; A] / P(A)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairAccumulator {
    n: u64,
    mean_x: f64,
    mean_y: f64,
    m2_x: f64,
    m2_y: f64,
    c_xy: f64,
}

impl PairAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.m2_x += dx * (x - self.mean_x);
        self.m2_y += dy * (y - self.mean_y);
        self.c_xy += dx * (y - self.mean_y);
    }

    pub fn merge(&mut self, other: &PairAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let w = other.n as f64 / n as f64;
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        let cross = self.n as f64 * w;
        self.mean_x += dx * w;
        self.mean_y += dy * w;
        self.m2_x += other.m2_x + dx * dx * cross;
        self.m2_y += other.m2_y + dy * dy * cross;
        self.c_xy += other.c_xy + dx * dy * cross;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn x(&self) -> SimEstimate {
        self.marginal(self.mean_x, self.m2_x)
    }

    pub fn y(&self) -> SimEstimate {
        self.marginal(self.mean_y, self.m2_y)
    }

    fn marginal(&self, mean: f64, m2: f64) -> SimEstimate {
        let stderr = if self.n < 2 {
            f64::INFINITY
        } else {
            (m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        };
        SimEstimate {
            value: mean,
            stderr,
            n: self.n,
        }
    }

    /// Ratio `mean(x) / mean(y)` with a delta-method standard error.
    ///
    /// Returns `None` when no observation had `y != 0`.
    pub fn ratio(&self) -> Option<SimEstimate> {
        if self.n < 2 || self.mean_y == 0.0 {
            return None;
        }
        let r = self.mean_x / self.mean_y;
        let dof = (self.n - 1) as f64;
        let var = (self.m2_x - 2.0 * r * self.c_xy + r * r * self.m2_y) / dof;
        let stderr = (var.max(0.0) / self.n as f64).sqrt() / self.mean_y.abs();
        Some(SimEstimate {
            value: r,
            stderr,
            n: self.n,
        })
    }
}

/// Two-sided Kolmogorov–Smirnov statistic of a sample against a CDF.
///
/// `sample` is sorted in place.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Asymptotic p-value of the KS statistic `d` for sample size `n`
/// (Kolmogorov limit law with the Stephens small-sample correction).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let t = (sn + 0.12 + 0.11 / sn) * d;
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * t * t).exp();
        sum += if k as u32 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
