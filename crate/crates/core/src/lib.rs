//! Deterministic multi-tier supply-chain simulator with name-your-own-price
//! (NYOP) procurement.
//!
//! A linear chain of tier agents (retailer down to supplier) serves normally
//! distributed market demand, forecasting with a moving average and
//! replenishing through an order-up-to policy. In the `Nyop` scenario every
//! tier observes market demand directly and sizes its orders through an NYOP
//! bid-matching negotiation against curves calibrated from the market
//! equilibrium; the `Baseline` scenario orders conventionally from the
//! distorted order stream. The crate measures the bullwhip effect and fill
//! rates of both scenarios and sweeps the forecast window over paired,
//! seeded replications.
//!
//! Modules:
//! - [`market`]: linear demand/supply curves and their calibration.
//! - [`negotiation`]: the NYOP bidding loop and matching rule.
//! - [`forecast`]: moving-average windows.
//! - [`policy`]: order-up-to targets and desired orders.
//! - [`messaging`]: performative-tagged messages, the simulated transport,
//!   and the JSONL trace format.
//! - [`engine`]: the discrete-time per-period agent cycle.
//! - [`metrics`]: bullwhip ratios, the standardized loss function, fill
//!   rates, and cross-replication aggregation.
//! - [`sweep`]: the experiment harness and CSV/JSON reporting.

pub mod demand;
pub mod engine;
pub mod forecast;
pub mod market;
pub mod messaging;
pub mod metrics;
pub mod negotiation;
pub mod policy;
pub mod sweep;

pub use engine::{run, run_traced, RunLog, Scenario, SimConfig, Simulation};
pub use market::{DemandCurve, MarketCalibration, SupplyCurve};
pub use metrics::{AggregateReport, ChangeConvention, TierMetrics};
pub use negotiation::{Bid, NegotiationConfig, NegotiationOutcome};
pub use policy::PolicyParams;
pub use sweep::{emit, run_sweep, OutputFormat, SweepOutput, SweepSpec};
