//! Order-up-to (base-stock) replenishment policy driven by moving-average
//! demand estimates.

use serde::{Deserialize, Serialize};

/// Replenishment parameters shared by every tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// Shipment lead time in periods.
    pub lead_time: u32,
    /// Safety factor z applied to the demand-deviation term.
    pub safety_factor: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self { lead_time: 1, safety_factor: 1.0 }
    }
}

/// Order-up-to level `S = mu_hat*(L+1) + z*sigma_hat*sqrt(L+1)`.
///
/// The exposure window is lead time plus the one-period review interval.
pub fn base_stock_level(mean_demand: f64, std_demand: f64, params: &PolicyParams) -> f64 {
    let exposure = (params.lead_time + 1) as f64;
    mean_demand * exposure + params.safety_factor * std_demand * exposure.sqrt()
}

/// Order quantity that raises the inventory position back to the target:
/// `max(0, S - IP)`. Never negative; excess positions are not cancelled.
pub fn desired_order(inventory_position: f64, target: f64) -> f64 {
    (target - inventory_position).max(0.0)
}
