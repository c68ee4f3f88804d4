//! Summary statistics over seeds.

/// Sample mean and standard error (`sd / sqrt(n)`, `n - 1` in the variance).
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Pooled standard error of the difference of two independent means.
pub fn pooled_stderr(a: &[f64], b: &[f64]) -> f64 {
    let (_, sa) = mean_stderr(a);
    let (_, sb) = mean_stderr(b);
    (sa * sa + sb * sb).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: String,
    pub horizon: usize,
    pub t: usize,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}
