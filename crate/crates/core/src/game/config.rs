use serde::{Deserialize, Serialize};

use super::GameError;

/// Points each side receives for the four action profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    pub cc_each: i64,
    pub coop_vs_defect: i64,
    pub defect_vs_coop: i64,
    pub dd_each: i64,
}

impl Default for PayoffMatrix {
    fn default() -> Self {
        Self {
            cc_each: 3,
            coop_vs_defect: -5,
            defect_vs_coop: 5,
            dd_each: -3,
        }
    }
}

/// How quickly the network may be rewired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speed {
    Slow,
    Fast,
}

impl Speed {
    /// Pairs sampled per round for a 12-player group: 6 (9%) or 33 (50%).
    pub fn pairs_per_round(self) -> usize {
        match self {
            Speed::Slow => 6,
            Speed::Fast => 33,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Speed::Slow => "slow",
            Speed::Fast => "fast",
        }
    }
}

/// All protocol parameters of one treatment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentConfig {
    pub group_size: usize,
    pub pairs_per_round: usize,
    pub noise_eps: f64,
    #[serde(default)]
    pub payoff: PayoffMatrix,
    pub min_rounds: u32,
    pub continue_prob_after_min: f64,
    pub history_window: usize,
    pub payment_rounds: usize,
    pub payment_partners_per_round: usize,
    pub ecu_per_sgd: f64,
}

impl TreatmentConfig {
    /// The laboratory parameters for one cell of the 2x2 grid.
    pub fn standard(speed: Speed, uncertainty: bool) -> Self {
        Self {
            group_size: 12,
            pairs_per_round: speed.pairs_per_round(),
            noise_eps: if uncertainty { 0.15 } else { 0.0 },
            payoff: PayoffMatrix::default(),
            min_rounds: 25,
            continue_prob_after_min: 0.5,
            history_window: 5,
            payment_rounds: 6,
            payment_partners_per_round: 2,
            ecu_per_sgd: 1.5,
        }
    }

    pub fn total_pairs(&self) -> usize {
        self.group_size * self.group_size.saturating_sub(1) / 2
    }

    pub fn validate(&self) -> Result<(), GameError> {
        let fail = |msg: String| Err(GameError::InvalidConfig(msg));
        if self.group_size < 2 {
            return fail(format!("group_size must be at least 2, got {}", self.group_size));
        }
        if !(0.0..0.5).contains(&self.noise_eps) {
            return fail(format!("noise_eps must satisfy 0 <= eps < 0.5, got {}", self.noise_eps));
        }
        if self.pairs_per_round < 1 || self.pairs_per_round > self.total_pairs() {
            return fail(format!(
                "pairs_per_round must lie in [1, {}], got {}",
                self.total_pairs(),
                self.pairs_per_round
            ));
        }
        if self.min_rounds < 1 {
            return fail("min_rounds must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.continue_prob_after_min) {
            return fail(format!(
                "continue_prob_after_min must lie in [0, 1], got {}",
                self.continue_prob_after_min
            ));
        }
        if self.history_window < 1 {
            return fail("history_window must be at least 1".into());
        }
        if self.payment_rounds as u64 > self.min_rounds as u64 {
            return fail(format!(
                "payment_rounds ({}) must not exceed min_rounds ({})",
                self.payment_rounds, self.min_rounds
            ));
        }
        if self.payment_partners_per_round >= self.group_size {
            return fail(format!(
                "payment_partners_per_round must be below group_size, got {}",
                self.payment_partners_per_round
            ));
        }
        if self.ecu_per_sgd.is_nan() || self.ecu_per_sgd <= 0.0 {
            return fail("ecu_per_sgd must be positive".into());
        }
        Ok(())
    }
}
