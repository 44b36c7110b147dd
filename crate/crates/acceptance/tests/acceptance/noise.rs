use repnet_core::agents::{preset, Preset, SeatSpec};
use repnet_core::game::{Speed, TreatmentConfig};
use repnet_core::sim::run_session;

use crate::common::rounds;
use crate::Verdict;

/// (flips, acting player-rounds) over enough all-C sessions to pass 10,000
/// acting player-rounds.
fn flips(eps: f64) -> (usize, usize) {
    let cfg = TreatmentConfig { noise_eps: eps, ..TreatmentConfig::standard(Speed::Slow, eps > 0.0) };
    let roster: Vec<SeatSpec> = (0..12).map(|_| SeatSpec { name: "AlwaysC".into(), params: preset(Preset::AlwaysC, Speed::Slow) }).collect();
    let (mut flipped, mut acting) = (0, 0);
    let mut seed = 0;
    while acting < 10_000 {
        let log = run_session(&cfg, "noise", &roster, seed).expect("session runs");
        for r in rounds(&log) {
            for p in 0..12 {
                if r.intended[p].is_some() {
                    acting += 1;
                    flipped += r.flipped[p] as usize;
                    assert_eq!(r.flipped[p], r.intended[p] != r.actual[p]);
                }
            }
        }
        seed += 1;
    }
    (flipped, acting)
}

pub fn run() -> Verdict {
    let (f, n) = flips(0.15);
    let frac = f as f64 / n as f64;
    let (f0, n0) = flips(0.0);
    Verdict::new(
        (0.14..=0.16).contains(&frac) && f0 == 0,
        format!("eps=0.15: {f}/{n} = {frac:.4} (want [0.14, 0.16]); eps=0: {f0}/{n0} flips"),
    )
}
