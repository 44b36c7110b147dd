//! Seed derivation.
//!
//! Every random consumer (pair sampling, noise, termination, payment, each
//! bot seat) gets its own ChaCha8 stream whose seed is a labeled hash of the
//! session's root seed. Adding a consumer never perturbs the existing ones.
//!
//! The hash is fixed so other implementations can reproduce it bit-exactly:
//!
//! ```text
//! label_hash(label) = FNV-1a 64 over the UTF-8 bytes of label
//! derive_seed(root, label) = splitmix64(root ^ label_hash(label))
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a child seed from `root` for the consumer named `label`.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    splitmix64(root ^ label_hash(label))
}

/// Opens the stream for `label` under `root`.
pub fn stream(root: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label))
}

/// Per-seat stream label used by both the headless simulator and the live
/// server, so the two paths draw identical bot decisions.
pub fn seat_label(seat: usize) -> String {
    format!("agent/{seat}")
}
