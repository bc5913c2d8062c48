//! Small numeric helpers: compensated summation and moment estimates with a
//! fixed, worker-independent evaluation order.

/// Neumaier-compensated sum over `values` in slice order.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Arithmetic mean with compensated summation; sequential in slice order.
pub fn compensated_mean(values: &[f64]) -> f64 {
    compensated_sum(values) / values.len() as f64
}

/// Unbiased sample standard deviation (two-pass, compensated).
pub fn sample_std(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut sq = Vec::with_capacity(values.len());
    for &x in values {
        let d = x - mean;
        sq.push(d * d);
    }
    (compensated_sum(&sq) / (values.len() - 1) as f64).sqrt()
}

/// Standard error of the mean.
pub fn standard_error(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    sample_std(values, mean) / (values.len() as f64).sqrt()
}

/// Sample covariance of two equally long series (two-pass).
pub fn sample_cov(a: &[f64], b: &[f64], mean_a: f64, mean_b: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.len() < 2 {
        return 0.0;
    }
    let mut prod = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b.iter()) {
        prod.push((x - mean_a) * (y - mean_b));
    }
    compensated_sum(&prod) / (a.len() - 1) as f64
}

/// Levenshtein edit distance, used for "did you mean" diagnostics.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
