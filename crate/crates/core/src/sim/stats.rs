//! Ratio estimators with time-batch standard errors.
//!
//! Packets that overlap in time share interference, so their outcomes are
//! not independent. Splitting the horizon into batches much longer than a
//! packet and treating per-batch totals as independent gives honest errors.

use serde::{Deserialize, Serialize};

/// Point estimate with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    /// Number of underlying samples (denominator count for ratios).
    pub n: f64,
}

impl Estimate {
    /// `(value - expected) / se`; zero when both agree exactly.
    pub fn z_score(&self, expected: f64) -> f64 {
        let diff = self.value - expected;
        if diff == 0.0 {
            0.0
        } else if self.se == 0.0 {
            f64::INFINITY * diff.signum()
        } else {
            diff / self.se
        }
    }

    pub fn within(&self, expected: f64, sigmas: f64) -> bool {
        self.z_score(expected).abs() <= sigmas
    }
}

/// Per-batch numerator and denominator totals of a ratio `sum num / sum den`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RatioBatches {
    pub batches: Vec<(f64, f64)>,
}

impl RatioBatches {
    pub fn with_batches(k: usize) -> Self {
        Self { batches: vec![(0.0, 0.0); k] }
    }

    pub fn add(&mut self, batch: usize, num: f64, den: f64) {
        let b = &mut self.batches[batch];
        b.0 += num;
        b.1 += den;
    }

    pub fn numerator(&self) -> f64 {
        self.batches.iter().map(|b| b.0).sum()
    }

    pub fn denominator(&self) -> f64 {
        self.batches.iter().map(|b| b.1).sum()
    }

    /// Concatenates the batches of two independent runs. Batches are kept
    /// sorted so the result does not depend on merge order.
    pub fn merge(&mut self, other: &RatioBatches) {
        self.batches.extend_from_slice(&other.batches);
        self.batches
            .sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    }

    /// Ratio with its batch-means standard error; `None` without data.
    pub fn estimate(&self) -> Option<Estimate> {
        let den = self.denominator();
        if !(den > 0.0) {
            return None;
        }
        let value = self.numerator() / den;
        let k = self.batches.len() as f64;
        let se = if k >= 2.0 {
            let mean_den = den / k;
            let ss: f64 = self
                .batches
                .iter()
                .map(|&(n, d)| (n - value * d).powi(2))
                .sum();
            (ss / (k * (k - 1.0))).sqrt() / mean_den
        } else {
            f64::INFINITY
        };
        Some(Estimate { value, se, n: den })
    }
}

/// Kolmogorov-Smirnov comparison of samples against `Exp(rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    /// Sup-distance between the empirical and the exponential CDF.
    pub statistic: f64,
    pub n: usize,
    /// Asymptotic 1% critical value `1.628 / sqrt(n)`.
    pub critical: f64,
}

impl KsOutcome {
    pub fn passes(&self) -> bool {
        self.statistic <= self.critical
    }
}

/// Sup-distance of the empirical CDF of `samples` from `1 - exp(-rate t)`.
pub fn ks_exponential(samples: &[f64], rate: f64) -> KsOutcome {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = -(-rate * x).exp_m1();
        d = d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    KsOutcome {
        statistic: if n == 0 { 0.0 } else { d },
        n,
        critical: if n == 0 { f64::INFINITY } else { 1.628 / nf.sqrt() },
    }
}
