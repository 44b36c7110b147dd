use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repnet_core::analysis::{mann_whitney_exact, mann_whitney_normal};

use crate::Verdict;

/// Two-sided exact p for tie-free samples: the share of all ways to pick
/// `xs.len()` of the pooled ranks whose rank sum lies at least as far from
/// its mean as the observed one.
fn enumerated_p(xs: &[f64], ys: &[f64]) -> f64 {
    let mut pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let rank = |v: f64| pooled.iter().position(|&p| p == v).expect("pooled") as f64 + 1.0;
    let observed: f64 = xs.iter().map(|&x| rank(x)).sum();
    let (n, total) = (xs.len(), pooled.len());
    let mean = n as f64 * (total as f64 + 1.0) / 2.0;
    let (mut hits, mut all) = (0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let sum: f64 = (0..total).filter(|i| mask & (1 << i) != 0).map(|i| i as f64 + 1.0).sum();
        all += 1;
        hits += ((sum - mean).abs() >= (observed - mean).abs() - 1e-9) as u64;
    }
    hits as f64 / all as f64
}

fn symmetric() -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases: 200, failure_persistence: None, ..Config::default() });
    let sample = || prop::collection::vec(0u8..20, 1..7).prop_map(|v| v.into_iter().map(f64::from).collect::<Vec<f64>>());
    runner
        .run(&(sample(), sample(), any::<u64>()), |(xs, ys, seed)| {
            let p = mann_whitney_exact(&xs, &ys).p_two_sided;
            prop_assert!((0.0..=1.0).contains(&p));
            let swapped = mann_whitney_exact(&ys, &xs).p_two_sided;
            prop_assert!((p - swapped).abs() < 1e-12, "swap changes p: {p} vs {swapped}");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = xs.clone();
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            prop_assert!((mann_whitney_exact(&shuffled, &ys).p_two_sided - p).abs() < 1e-12);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn run() -> Verdict {
    let fixed = mann_whitney_exact(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).p_two_sided;
    let fixed_oracle = enumerated_p(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
    if (fixed - 0.1).abs() > 1e-12 || (fixed_oracle - 0.1).abs() > 1e-12 {
        return Verdict::new(false, format!("{{1,2,3}} vs {{4,5,6}}: exact p {fixed}, enumeration {fixed_oracle}, want 0.1"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut worst_exact, mut worst_normal) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let shift = rng.random_range(0.0..1.5);
        let xs: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..8).map(|_| rng.random::<f64>() + shift).collect();
        let exact = mann_whitney_exact(&xs, &ys).p_two_sided;
        worst_exact = worst_exact.max((exact - enumerated_p(&xs, &ys)).abs());
        worst_normal = worst_normal.max((exact - mann_whitney_normal(&xs, &ys).p_two_sided).abs());
    }
    if let Err(e) = symmetric() {
        return Verdict::new(false, format!("symmetry: {e}"));
    }
    Verdict::new(
        worst_exact < 1e-12 && worst_normal <= 0.02,
        format!(
            "{{1,2,3}} vs {{4,5,6}} p = {fixed}; 8v8 exact vs enumeration max diff {worst_exact:.1e}, vs normal {worst_normal:.4} (<= 0.02); order and swap invariant"
        ),
    )
}
