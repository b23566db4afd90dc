//! Small statistical helpers shared by the estimators.

use serde::Serialize;

/// Sample mean and standard error `sd/√n` (zero error for fewer than two samples).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    (mean, sample_sd(xs, mean) / (n as f64).sqrt())
}

/// Sample standard deviation with the `n − 1` denominator.
pub fn sample_sd(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Median of a slice (averaging the two middle values for even length).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Monte Carlo estimate with provenance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub replicates: usize,
    pub seed: u64,
    pub method: String,
}

impl Estimate {
    pub fn from_samples(xs: &[f64], seed: u64, method: &str) -> Estimate {
        let (value, stderr) = mean_and_stderr(xs);
        Estimate { value, stderr, replicates: xs.len(), seed, method: method.to_string() }
    }

    pub fn from_indicators(hits: &[bool], seed: u64, method: &str) -> Estimate {
        let xs: Vec<f64> = hits.iter().map(|&h| if h { 1.0 } else { 0.0 }).collect();
        Estimate::from_samples(&xs, seed, method)
    }

    /// Binomial standard error of a frequency estimate if the true value were `p`.
    pub fn null_stderr(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.replicates as f64).sqrt()
    }

    /// `|value − target| ≤ k·σ` with `σ` the larger of the sample and null errors.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        let sigma = self.stderr.max(self.null_stderr(target.clamp(0.0, 1.0)));
        (self.value - target).abs() <= k * sigma + 1e-12
    }
}
