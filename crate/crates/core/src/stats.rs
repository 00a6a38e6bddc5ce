//! Small statistical helpers shared across modules: quantiles, block-mean
//! standard errors, and Wilson score intervals for exceedance probabilities.

/// Linear-interpolation quantile (type 7). `q` in [0, 1].
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Mean and block-averaged standard error over `n_blocks` equal blocks.
/// Block averaging absorbs temporal correlation that would invalidate the
/// naive SE. Returns (mean, se); se is 0 when the data is constant.
pub fn block_mean_se(values: &[f64], n_blocks: usize) -> (f64, f64) {
    let n = values.len();
    assert!(n >= n_blocks && n_blocks >= 2, "need at least {n_blocks} values");
    let mean = values.iter().sum::<f64>() / n as f64;
    let block_len = n / n_blocks;
    let used = block_len * n_blocks;
    let mut block_means = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let chunk = &values[b * block_len..(b + 1) * block_len];
        block_means.push(chunk.iter().sum::<f64>() / block_len as f64);
    }
    let grand = block_means.iter().sum::<f64>() / n_blocks as f64;
    let var = block_means
        .iter()
        .map(|m| (m - grand) * (m - grand))
        .sum::<f64>()
        / (n_blocks - 1) as f64;
    let se = (var / n_blocks as f64).sqrt();
    // The mean over all values (not only the first `used`) is reported.
    let _ = used;
    (mean, se)
}

/// Wilson score interval for a binomial proportion at ~95% (z = 1.96).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WilsonInterval {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn wilson_interval(successes: usize, trials: usize) -> WilsonInterval {
    assert!(trials > 0, "Wilson interval needs at least one trial");
    let z = 1.959_963_984_540_054f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    WilsonInterval {
        estimate: p,
        lo: (center - half).max(0.0),
        hi: (center + half).min(1.0),
    }
}
