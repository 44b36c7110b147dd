use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

/// Combined sample size up to which `mann_whitney` enumerates exactly.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankTestResult {
    /// The smaller of the two U statistics.
    pub u: f64,
    pub p_two_sided: f64,
    pub method: RankMethod,
}

/// Midranks of the pooled sample, xs first.
fn midranks(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    ranks
}

fn u_of(rank_sum: f64, n: usize) -> f64 {
    rank_sum - (n * (n + 1)) as f64 / 2.0
}

/// Exact two-sided p by enumerating every assignment of the pooled midranks
/// to the first sample. Cost grows as C(n+m, n).
pub fn mann_whitney_exact(xs: &[f64], ys: &[f64]) -> RankTestResult {
    let (n, m) = (xs.len(), ys.len());
    let ranks = midranks(xs, ys);
    let ux = u_of(ranks[..n].iter().sum(), n);
    let center = (n * m) as f64 / 2.0;
    let observed = (ux - center).abs();
    let total = ranks.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let (mut hits, mut all) = (0u64, 0u64);
    loop {
        let u = u_of(idx.iter().map(|&i| ranks[i]).sum(), n);
        all += 1;
        if (u - center).abs() >= observed - 1e-9 {
            hits += 1;
        }
        // Next n-combination of 0..total in lexicographic order.
        let Some(pos) = (0..n).rev().find(|&k| idx[k] < total - n + k) else { break };
        idx[pos] += 1;
        for k in pos + 1..n {
            idx[k] = idx[k - 1] + 1;
        }
    }
    RankTestResult { u: ux.min((n * m) as f64 - ux), p_two_sided: hits as f64 / all as f64, method: RankMethod::Exact }
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity
/// correction.
pub fn mann_whitney_normal(xs: &[f64], ys: &[f64]) -> RankTestResult {
    let (n, m) = (xs.len(), ys.len());
    let total = (n + m) as f64;
    let ranks = midranks(xs, ys);
    let ux = u_of(ranks[..n].iter().sum(), n);
    let center = (n * m) as f64 / 2.0;

    let mut sorted = ranks.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        ties += t * t * t - t;
        i += j;
    }
    let var = (n * m) as f64 / 12.0 * ((total + 1.0) - ties / (total * (total - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((ux - center).abs() - 0.5).max(0.0) / var.sqrt();
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - std.cdf(z))).min(1.0)
    };
    RankTestResult { u: ux.min((n * m) as f64 - ux), p_two_sided: p, method: RankMethod::NormalApprox }
}

/// Two-sided rank-sum test: exact when the combined size is at most 12,
/// normal approximation otherwise. Both samples must be non-empty.
pub fn mann_whitney(xs: &[f64], ys: &[f64]) -> RankTestResult {
    assert!(!xs.is_empty() && !ys.is_empty(), "rank-sum test needs two non-empty samples");
    if xs.len() + ys.len() <= EXACT_LIMIT {
        mann_whitney_exact(xs, ys)
    } else {
        mann_whitney_normal(xs, ys)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub n: usize,
    pub mean: Option<f64>,
    /// Standard error of the mean; None with fewer than two values.
    pub se: Option<f64>,
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe { n, mean: None, se: None };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = (n > 1).then(|| {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    });
    MeanSe { n, mean: Some(mean), se }
}
