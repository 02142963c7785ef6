//! Small statistics helpers for the Monte Carlo verifiers.

/// Sample mean and (n-1) standard deviation.
pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Paired-difference summary: mean of `a - b` and its standard error.
pub fn paired_diff(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(
        a.len(),
        b.len(),
        "paired comparison needs equal-length samples"
    );
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_and_sd(&diffs);
    (mean, sd / (diffs.len() as f64).sqrt())
}

/// Mann-Kendall trend statistic, normalized: `z = S / sigma_S` with
/// `S = sum_{i<j} sign(x_j - x_i)` and `Var S = n(n-1)(2n+5)/18`.
///
/// Strongly negative z means a decreasing trend, strongly positive an
/// increasing one; |z| <= 1.645 is compatible with no trend at the 95% level.
pub fn mann_kendall_z(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 3 {
        return 0.0;
    }
    let mut s: i64 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = series[j] - series[i];
            s += if d > 0.0 {
                1
            } else if d < 0.0 {
                -1
            } else {
                0
            };
        }
    }
    let nf = n as f64;
    let var = nf * (nf - 1.0) * (2.0 * nf + 5.0) / 18.0;
    s as f64 / var.sqrt()
}

/// 95% two-sided normal critical value.
pub const Z_95: f64 = 1.644_853_626_951_472_7;

/// 95% two-sided CI half-width multiplier.
pub const Z_CI_95: f64 = 1.959_963_984_540_054;
