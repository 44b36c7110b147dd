//! Dynamic-network prisoner's dilemma: protocol engine, graph measures,
//! bot strategies, batch simulation and behavioral analysis.

pub mod agents;
pub mod analysis;
pub mod game;
pub mod log;
pub mod netmetrics;
pub mod rng;
pub mod sim;
