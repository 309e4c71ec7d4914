//! Small deterministic statistics kernels: pairwise summation, stable
//! log-mean-exp, effective sample size and block jackknife.

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let d: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&d) / (xs.len() as f64 - 1.0)
}

/// `log(mean(exp(v)))` evaluated on the ascending-sorted values with the
/// maximum factored out.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = *v.last().unwrap();
    if m == f64::NEG_INFINITY {
        return m;
    }
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    m + (pairwise_sum(&e) / v.len() as f64).ln()
}

/// Kish effective sample size of the weights `exp(v)`.
pub fn effective_sample_size(log_weights: &[f64]) -> f64 {
    let mut v = log_weights.to_vec();
    v.sort_by(f64::total_cmp);
    let m = *v.last().unwrap();
    let w: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let w2: Vec<f64> = w.iter().map(|x| x * x).collect();
    let s = pairwise_sum(&w);
    s * s / pairwise_sum(&w2)
}

/// Contiguous index ranges of `n_blocks` near-equal blocks over `0..n`.
pub fn block_ranges(n: usize, n_blocks: usize) -> Vec<std::ops::Range<usize>> {
    let b = n_blocks.min(n).max(1);
    (0..b).map(|i| (i * n / b)..((i + 1) * n / b)).collect()
}

/// Jackknife standard error from leave-one-block-out replicates.
pub fn jackknife_stderr(replicates: &[f64]) -> f64 {
    let b = replicates.len() as f64;
    if replicates.len() < 2 {
        return 0.0;
    }
    let m = mean(replicates);
    let d: Vec<f64> = replicates.iter().map(|x| (x - m) * (x - m)).collect();
    ((b - 1.0) / b * pairwise_sum(&d)).sqrt()
}

/// Leave-one-block-out means of `values`.
pub fn jackknife_means(values: &[f64], n_blocks: usize) -> Vec<f64> {
    let ranges = block_ranges(values.len(), n_blocks);
    let sums: Vec<f64> = ranges.iter().map(|r| pairwise_sum(&values[r.clone()])).collect();
    let total = pairwise_sum(&sums);
    ranges
        .iter()
        .zip(&sums)
        .map(|(r, s)| (total - s) / (values.len() - r.len()) as f64)
        .collect()
}
