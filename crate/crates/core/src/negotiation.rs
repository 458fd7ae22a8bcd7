//! Name-your-own-price procurement: the buyer posts quantity-price bids
//! against the seller's concealed threshold.
//!
//! The buyer opens at a fraction of its valuation and concedes linearly up to
//! the full valuation in the final round. A bid at or above the threshold
//! trades at the bid price for the requested quantity. If every round fails,
//! the parties fall back to the equilibrium trade, the one quantity at which
//! a deal is always feasible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{self, DemandCurve, MarketError, SupplyCurve};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NegotiationError {
    #[error("round {round} outside 1..={max_rounds}")]
    RoundOutOfRange { round: u32, max_rounds: u32 },
    #[error("invalid negotiation config: {0}")]
    InvalidConfig(String),
    #[error("desired quantity must be positive, got {0}")]
    InvalidQuantity(f64),
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// A quantity-price offer in a given round (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub quantity: f64,
    pub price: f64,
    pub round: u32,
}

impl Bid {
    /// NYOP matching rule: the bid trades iff it meets the seller's concealed
    /// threshold (ties accepted), and the transaction price is the bid price.
    pub fn meets(&self, threshold: f64) -> bool {
        self.price >= threshold
    }
}

/// Concession schedule parameters for the bidding loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegotiationConfig {
    /// Number of bidding rounds, at least 1.
    pub max_rounds: u32,
    /// Opening bid as a fraction of the buyer's valuation, in (0, 1].
    /// Keeping it at most 1 guarantees no bid ever exceeds the valuation.
    pub opening_fraction: f64,
}

impl Default for NegotiationConfig {
    fn default() -> Self {
        Self { max_rounds: 3, opening_fraction: 0.9 }
    }
}

impl NegotiationConfig {
    pub fn validate(&self) -> Result<(), NegotiationError> {
        if self.max_rounds < 1 {
            return Err(NegotiationError::InvalidConfig("max_rounds must be >= 1".into()));
        }
        if !(self.opening_fraction > 0.0 && self.opening_fraction <= 1.0) {
            return Err(NegotiationError::InvalidConfig(format!(
                "opening_fraction must be in (0, 1], got {}",
                self.opening_fraction
            )));
        }
        Ok(())
    }
}

/// Result of a negotiation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NegotiationOutcome {
    /// A bid met the threshold; the buyer pays its own bid price.
    Accepted { quantity: f64, unit_price: f64, rounds_used: u32 },
    /// Every round failed; the parties trade the equilibrium quantity at the
    /// equilibrium price.
    Fallback { quantity: f64, unit_price: f64 },
    /// No trade at all; only reachable with degenerate curves that have no
    /// equilibrium.
    Failed,
}

impl NegotiationOutcome {
    /// Quantity actually transacted (zero when the negotiation failed).
    pub fn quantity(&self) -> f64 {
        match self {
            Self::Accepted { quantity, .. } | Self::Fallback { quantity, .. } => *quantity,
            Self::Failed => 0.0,
        }
    }
}

/// One attempted bid and the seller's verdict, for message tracing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidAttempt {
    pub bid: Bid,
    pub accepted: bool,
}

/// Bid price for a round: the valuation scaled by
/// `beta + (1 - beta) * (round - 1) / (max_rounds - 1)`, i.e. linear
/// concession from `beta * valuation` up to the full valuation in the final
/// round. A single-round schedule bids the full valuation outright.
pub fn bid_schedule(
    valuation: f64,
    cfg: &NegotiationConfig,
    round: u32,
) -> Result<f64, NegotiationError> {
    cfg.validate()?;
    if round < 1 || round > cfg.max_rounds {
        return Err(NegotiationError::RoundOutOfRange { round, max_rounds: cfg.max_rounds });
    }
    if cfg.max_rounds == 1 {
        return Ok(valuation);
    }
    let beta = cfg.opening_fraction;
    let step = (round - 1) as f64 / (cfg.max_rounds - 1) as f64;
    Ok(valuation * (beta + (1.0 - beta) * step))
}

/// Runs the bidding loop for `desired_qty` and returns the outcome.
///
/// The first round whose bid meets the seller's threshold trades at that bid
/// price for exactly `desired_qty`; if all rounds fail the outcome is the
/// equilibrium fallback regardless of `desired_qty`.
pub fn negotiate(
    demand: &DemandCurve,
    supply: &SupplyCurve,
    desired_qty: f64,
    cfg: &NegotiationConfig,
) -> Result<NegotiationOutcome, NegotiationError> {
    negotiate_recorded(demand, supply, desired_qty, cfg).map(|(outcome, _)| outcome)
}

/// Like [`negotiate`] but also returns the per-round bid transcript.
pub fn negotiate_recorded(
    demand: &DemandCurve,
    supply: &SupplyCurve,
    desired_qty: f64,
    cfg: &NegotiationConfig,
) -> Result<(NegotiationOutcome, Vec<BidAttempt>), NegotiationError> {
    cfg.validate()?;
    if !(desired_qty > 0.0) {
        return Err(NegotiationError::InvalidQuantity(desired_qty));
    }
    let valuation = demand.bid_price(desired_qty)?;
    let threshold = supply.min_price(desired_qty);
    let mut attempts = Vec::with_capacity(cfg.max_rounds as usize);
    for round in 1..=cfg.max_rounds {
        let price = bid_schedule(valuation, cfg, round)?;
        let bid = Bid { quantity: desired_qty, price, round };
        let accepted = bid.meets(threshold);
        attempts.push(BidAttempt { bid, accepted });
        if accepted {
            let outcome =
                NegotiationOutcome::Accepted { quantity: desired_qty, unit_price: price, rounds_used: round };
            return Ok((outcome, attempts));
        }
    }
    let outcome = match market::equilibrium(demand, supply) {
        Ok((price, qty)) => NegotiationOutcome::Fallback { quantity: qty, unit_price: price },
        Err(_) => NegotiationOutcome::Failed,
    };
    Ok((outcome, attempts))
}
