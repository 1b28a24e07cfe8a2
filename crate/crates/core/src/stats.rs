//! Order-stable reductions and Monte Carlo summaries.

/// Pairwise (cascade) summation. The split points depend only on the slice
/// length, so the result is identical for a given input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeanStat {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanStat {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let mean = pairwise_sum(samples) / n as f64;
        if n == 1 {
            return Self { mean, stderr: 0.0, n };
        }
        let sq: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        Self { mean, stderr: (var / n as f64).sqrt(), n }
    }

    /// True when `target` lies within `k` standard errors of the mean.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

pub fn mean(samples: &[f64]) -> f64 {
    pairwise_sum(samples) / samples.len() as f64
}
