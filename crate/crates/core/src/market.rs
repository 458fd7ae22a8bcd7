//! Linear demand and supply curves calibrated from an equilibrium point and
//! price elasticities.
//!
//! The demand curve `Q_d = a - b*P` describes the buyer's bidding behaviour
//! (its inverse is the buyer's maximum willingness to pay for a quantity);
//! the supply curve `Q_s = c + d*P` yields the seller's concealed minimum
//! price. Both are calibrated so that they pass exactly through the
//! equilibrium point `(p_star, q_star)` with the requested point elasticities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MarketError {
    #[error("invalid market calibration: {0}")]
    InvalidCalibration(String),
    #[error("requested quantity {qty} is at or above the demand intercept {intercept}")]
    QuantityExceedsIntercept { qty: f64, intercept: f64 },
    #[error("demand and supply slopes sum to a non-positive value; the curves never cross")]
    DegenerateCurves,
}

/// Equilibrium point plus price elasticities of demand and supply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketCalibration {
    /// Equilibrium price (currency per unit), must be positive.
    pub p_star: f64,
    /// Equilibrium quantity (units per period), must be positive.
    pub q_star: f64,
    /// Price elasticity of demand, must be negative.
    pub e_d: f64,
    /// Price elasticity of supply, must be positive.
    pub e_s: f64,
}

impl MarketCalibration {
    pub fn new(p_star: f64, q_star: f64, e_d: f64, e_s: f64) -> Result<Self, MarketError> {
        let cal = Self { p_star, q_star, e_d, e_s };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if !(self.p_star > 0.0) {
            return Err(MarketError::InvalidCalibration(format!(
                "p_star must be > 0, got {}",
                self.p_star
            )));
        }
        if !(self.q_star > 0.0) {
            return Err(MarketError::InvalidCalibration(format!(
                "q_star must be > 0, got {}",
                self.q_star
            )));
        }
        if !(self.e_d < 0.0) {
            return Err(MarketError::InvalidCalibration(format!(
                "demand elasticity must be < 0, got {}",
                self.e_d
            )));
        }
        if !(self.e_s > 0.0) {
            return Err(MarketError::InvalidCalibration(format!(
                "supply elasticity must be > 0, got {}",
                self.e_s
            )));
        }
        Ok(())
    }
}

impl Default for MarketCalibration {
    /// Normalized price scale with the equilibrium at (100, 100) and the
    /// elasticities E_d = -0.75, E_s = 1.56.
    fn default() -> Self {
        Self { p_star: 100.0, q_star: 100.0, e_d: -0.75, e_s: 1.56 }
    }
}

/// Linear demand curve `Q_d(P) = a - b*P` with `a > 0`, `b > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandCurve {
    /// Quantity intercept (units).
    pub a: f64,
    /// Slope magnitude (units per currency).
    pub b: f64,
}

impl DemandCurve {
    /// Calibrates `a` and `b` so the curve passes through `(p_star, q_star)`
    /// with point elasticity `e_d`.
    pub fn calibrate(cal: &MarketCalibration) -> Result<Self, MarketError> {
        cal.validate()?;
        let b = -cal.e_d * cal.q_star / cal.p_star;
        let a = cal.q_star + b * cal.p_star;
        Ok(Self { a, b })
    }

    /// Demanded quantity at a price, clamped at zero.
    pub fn quantity(&self, price: f64) -> f64 {
        (self.a - self.b * price).max(0.0)
    }

    /// The buyer's valuation (maximum willingness to pay) for a quantity.
    ///
    /// Fails when `qty >= a`: beyond the intercept the curve assigns no
    /// positive price.
    pub fn bid_price(&self, qty: f64) -> Result<f64, MarketError> {
        if qty >= self.a {
            return Err(MarketError::QuantityExceedsIntercept { qty, intercept: self.a });
        }
        Ok((self.a - qty) / self.b)
    }
}

/// Linear supply curve `Q_s(P) = c + d*P` with `d > 0`.
///
/// `c` may be negative: with E_s > 1 the calibrated intercept necessarily
/// drops below zero, so supplied quantity is clamped at zero instead of
/// constraining `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupplyCurve {
    /// Quantity intercept (units), may be negative.
    pub c: f64,
    /// Slope (units per currency), must be positive.
    pub d: f64,
}

impl SupplyCurve {
    /// Calibrates `c` and `d` so the curve passes through `(p_star, q_star)`
    /// with point elasticity `e_s`.
    pub fn calibrate(cal: &MarketCalibration) -> Result<Self, MarketError> {
        cal.validate()?;
        let d = cal.e_s * cal.q_star / cal.p_star;
        let c = cal.q_star - d * cal.p_star;
        Ok(Self { c, d })
    }

    /// Supplied quantity at a price, clamped at zero.
    pub fn quantity(&self, price: f64) -> f64 {
        (self.c + self.d * price).max(0.0)
    }

    /// The seller's concealed threshold: the minimum price at which it
    /// supplies `qty`.
    pub fn min_price(&self, qty: f64) -> f64 {
        (qty - self.c) / self.d
    }
}

/// Crossing point of the two curves: price `(a - c)/(b + d)` and the
/// quantity demanded there.
pub fn equilibrium(demand: &DemandCurve, supply: &SupplyCurve) -> Result<(f64, f64), MarketError> {
    let denom = demand.b + supply.d;
    if denom <= 0.0 {
        return Err(MarketError::DegenerateCurves);
    }
    let price = (demand.a - supply.c) / denom;
    let qty = demand.a - demand.b * price;
    Ok((price, qty))
}
