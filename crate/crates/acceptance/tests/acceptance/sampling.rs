//! A single run of 10,000 rounds puts the 0.01 band about 3.5 standard
//! errors from 6/66, so the worst of 66 pairs leaves it in roughly 3% of
//! seeds. Twenty independent runs are checked and a few misses are allowed;
//! the pooled counts must also pass a chi-square goodness-of-fit test.

use std::collections::BTreeSet;

use repnet_core::game::{sample_pairs, NetworkState, Pair};
use repnet_core::rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::Verdict;

const ROUNDS: usize = 10_000;
const RUNS: u64 = 20;
/// At a 3.4% miss rate per run, four or more misses in twenty has
/// probability about 0.5%.
const MAX_MISSES: usize = 3;

pub fn run() -> Verdict {
    let net = NetworkState::complete(12);
    let all = Pair::enumerate(12);
    let target = 6.0 / 66.0;
    let mut pooled = vec![0usize; all.len()];
    let mut worst = Vec::new();
    for run in 0..RUNS {
        let mut counts = vec![0usize; all.len()];
        let mut rng = rng::stream(run, "pairs");
        for _ in 0..ROUNDS {
            for op in sample_pairs(&net, 6, &mut rng) {
                counts[all.iter().position(|p| *p == op.pair).expect("known pair")] += 1;
            }
        }
        worst.push(counts.iter().map(|&c| (c as f64 / ROUNDS as f64 - target).abs()).fold(0.0, f64::max));
        pooled.iter_mut().zip(&counts).for_each(|(p, c)| *p += c);
    }
    let misses = worst.iter().filter(|&&w| w > 0.01).count();
    let worst_all = worst.iter().copied().fold(0.0, f64::max);

    // Each pair's count is Binomial(R, 6/66); the fixed total removes one
    // degree of freedom.
    let r = (ROUNDS as u64 * RUNS) as f64;
    let var = r * target * (1.0 - target);
    let chi2: f64 = pooled.iter().map(|&c| (c as f64 - r * target).powi(2) / var).sum();
    let p_chi2 = 1.0 - ChiSquared::new((all.len() - 1) as f64).expect("df > 0").cdf(chi2);

    let mut rng33 = rng::stream(18, "pairs");
    let mut short_rounds = 0;
    for _ in 0..ROUNDS {
        let distinct: BTreeSet<Pair> = sample_pairs(&net, 33, &mut rng33).into_iter().map(|o| o.pair).collect();
        short_rounds += (distinct.len() != 33) as usize;
    }
    Verdict::new(
        misses <= MAX_MISSES && p_chi2 > 0.001 && short_rounds == 0,
        format!(
            "x=6: {}/{RUNS} runs of {ROUNDS} rounds keep every pair within 6/66 +/- 0.01 (worst {worst_all:.4}); pooled chi2 = {chi2:.1} on 65 df, p = {p_chi2:.3}; x=33: {short_rounds} rounds without 33 distinct pairs",
            RUNS as usize - misses
        ),
    )
}
