//! Supply-chain performance metrics: bullwhip variance ratios, the
//! standardized normal loss function, analytic and empirical fill rates, and
//! cross-replication aggregation into the Mean/SD/Change table layout.

use serde::Serialize;
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::engine::{RunLog, Scenario, SimConfig};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricsError {
    #[error("demand variance is zero; bullwhip ratio undefined")]
    DegenerateVariance,
    #[error("mean incoming demand is zero; fill rate undefined")]
    DegenerateMean,
    #[error("series too short: need at least {needed} points, have {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("need at least 2 replications per cell, have {0}")]
    InsufficientReplications(usize),
    #[error("replication sets are inconsistent: {0}")]
    InconsistentReplications(String),
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with the n-1 denominator.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn sample_std(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

/// Bullwhip ratio: Var(orders) / Var(demand), sample variances.
pub fn bullwhip(orders: &[f64], demand: &[f64]) -> Result<f64, MetricsError> {
    if orders.len() < 2 || demand.len() < 2 {
        return Err(MetricsError::SeriesTooShort {
            needed: 2,
            got: orders.len().min(demand.len()),
        });
    }
    let var_demand = sample_variance(demand);
    if var_demand < 1e-12 {
        return Err(MetricsError::DegenerateVariance);
    }
    Ok(sample_variance(orders) / var_demand)
}

/// Standard normal pdf.
fn phi(z: f64) -> f64 {
    const INV_SQRT_TWO_PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_TWO_PI * (-0.5 * z * z).exp()
}

/// Standardized loss function `G(z) = phi(z) - z * (1 - Phi(z))`: the
/// expected shortfall of a standard normal beyond `z`.
pub fn std_normal_loss(z: f64) -> f64 {
    // The complementary tail keeps relative accuracy for large z.
    let tail = 0.5 * erfc(z / std::f64::consts::SQRT_2);
    phi(z) - z * tail
}

/// Analytic fill rate `1 - G(z) * sqrt(L) * sqrt(var_q) / mu`, with the raw
/// value retained alongside the [0, 1]-clamped reporting value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticFillRate {
    pub raw: f64,
    pub reported: f64,
}

pub fn fill_rate_analytic(
    z: f64,
    lead_time: u32,
    var_q: f64,
    mu: f64,
) -> Result<AnalyticFillRate, MetricsError> {
    if mu <= 0.0 {
        return Err(MetricsError::DegenerateMean);
    }
    let raw = 1.0 - std_normal_loss(z) * f64::from(lead_time).sqrt() * var_q.sqrt() / mu;
    Ok(AnalyticFillRate { raw, reported: raw.clamp(0.0, 1.0) })
}

/// Fraction of demand served from on-hand within the period it arrived.
pub fn fill_rate_empirical(demand_in: &[f64], filled: &[f64]) -> Result<f64, MetricsError> {
    if demand_in.len() != filled.len() || demand_in.is_empty() {
        return Err(MetricsError::SeriesTooShort { needed: 1, got: demand_in.len().min(filled.len()) });
    }
    let total_demand: f64 = demand_in.iter().sum();
    if total_demand <= 0.0 {
        return Err(MetricsError::DegenerateMean);
    }
    Ok(filled.iter().sum::<f64>() / total_demand)
}

/// Per-tier metrics of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TierMetrics {
    pub k: u32,
    /// Var(orders placed) / Var(market demand) over the measured window.
    pub bwe: f64,
    pub fill_rate_empirical: f64,
    pub fill_rate_analytic: AnalyticFillRate,
}

/// Computes every tier's metrics from a completed run, over the post-warmup
/// window.
pub fn tier_metrics(log: &RunLog, cfg: &SimConfig) -> Result<Vec<TierMetrics>, MetricsError> {
    let start = log.warmup;
    let demand = &log.market_demand[start..];
    let mut out = Vec::with_capacity(log.tiers.len());
    for tier in &log.tiers {
        let orders = &tier.orders[start..];
        let incoming = &tier.demand_in[start..];
        let filled = &tier.filled[start..];
        let bwe = bullwhip(orders, demand)?;
        let fr_emp = fill_rate_empirical(incoming, filled)?;
        let fr_an = fill_rate_analytic(
            cfg.policy.safety_factor,
            cfg.policy.lead_time,
            sample_variance(incoming),
            mean(incoming),
        )?;
        out.push(TierMetrics {
            k: tier.k,
            bwe,
            fill_rate_empirical: fr_emp,
            fill_rate_analytic: fr_an,
        });
    }
    Ok(out)
}

/// Metrics of one replication of one sweep cell.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicationMetrics {
    pub scenario: Scenario,
    pub t: u32,
    pub rep: u32,
    pub seed: u64,
    pub tiers: Vec<TierMetrics>,
}

/// Mean and n-1 standard deviation over replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub mean: f64,
    pub sd: f64,
}

impl Stats {
    fn from_values(values: &[f64]) -> Self {
        Self { mean: mean(values), sd: sample_std(values) }
    }
}

/// Replication statistics of one scenario in one (k, T) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioStats {
    pub bwe: Stats,
    pub fill_rate: Stats,
    pub fill_rate_analytic: Stats,
}

/// Scenario-difference percentages for one (k, T) cell. The mean change is
/// computed from the cell means; the SD comes from the per-replication paired
/// changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChangeStats {
    pub bwe_pct: f64,
    pub bwe_pct_sd: f64,
    pub fill_rate_pct: f64,
    pub fill_rate_pct_sd: f64,
    pub fill_rate_analytic_pct: f64,
    pub fill_rate_analytic_pct_sd: f64,
}

/// Which change-percentage convention to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChangeConvention {
    /// The mixed convention of the published tables: BWE change relative to
    /// the baseline value, fill-rate change relative to the NYOP value.
    PaperMixed,
    /// Both changes relative to the baseline value.
    RelativeToBaseline,
}

/// BWE improvement percentage: `(baseline - nyop) / baseline * 100`.
pub fn bwe_change_pct(baseline: f64, nyop: f64) -> f64 {
    (baseline - nyop) / baseline * 100.0
}

/// Fill-rate improvement percentage in the tables' own convention:
/// `(nyop - baseline) / nyop * 100`.
pub fn fill_rate_change_pct(baseline: f64, nyop: f64) -> f64 {
    (nyop - baseline) / nyop * 100.0
}

fn fill_rate_change_with(convention: ChangeConvention, baseline: f64, nyop: f64) -> f64 {
    match convention {
        ChangeConvention::PaperMixed => fill_rate_change_pct(baseline, nyop),
        ChangeConvention::RelativeToBaseline => (nyop - baseline) / baseline * 100.0,
    }
}

/// One T row of a tier's table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportRow {
    pub t: u32,
    pub baseline: Option<ScenarioStats>,
    pub nyop: Option<ScenarioStats>,
    pub change: Option<ChangeStats>,
}

/// All rows of one tier, plus the mean-of-change footer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TierReport {
    pub k: u32,
    pub rows: Vec<ReportRow>,
    /// Arithmetic means of the change columns over T; present when both
    /// scenarios were run.
    pub mean_of_change: Option<ChangeStats>,
}

/// Aggregated sweep results: per (scenario, k, T) means and SDs plus per
/// (k, T) scenario changes, tiers ordered retailer first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub t_values: Vec<u32>,
    pub convention: ChangeConvention,
    pub tiers: Vec<TierReport>,
}

impl AggregateReport {
    pub fn tier(&self, k: u32) -> Option<&TierReport> {
        self.tiers.iter().find(|t| t.k == k)
    }

    pub fn row(&self, k: u32, t: u32) -> Option<&ReportRow> {
        self.tier(k).and_then(|tr| tr.rows.iter().find(|r| r.t == t))
    }
}

struct CellValues<'a> {
    reps: Vec<&'a ReplicationMetrics>,
}

impl<'a> CellValues<'a> {
    fn metric(&self, k: u32, f: impl Fn(&TierMetrics) -> f64) -> Vec<f64> {
        self.reps
            .iter()
            .filter_map(|r| r.tiers.iter().find(|tm| tm.k == k).map(&f))
            .collect()
    }
}

/// Aggregates per-replication metrics into the report layout.
///
/// Replications must come in scenario pairs sharing (T, rep) when both
/// scenarios are present; the change SD is the n-1 deviation of the paired
/// per-replication changes.
pub fn aggregate(
    reps: &[ReplicationMetrics],
    convention: ChangeConvention,
) -> Result<AggregateReport, MetricsError> {
    if reps.is_empty() {
        return Err(MetricsError::InsufficientReplications(0));
    }
    let mut t_values: Vec<u32> = reps.iter().map(|r| r.t).collect();
    t_values.sort_unstable();
    t_values.dedup();
    let mut tiers: Vec<u32> = reps.iter().flat_map(|r| r.tiers.iter().map(|tm| tm.k)).collect();
    tiers.sort_unstable();
    tiers.dedup();
    tiers.reverse(); // retailer (largest k) first
    let has_baseline = reps.iter().any(|r| r.scenario == Scenario::Baseline);
    let has_nyop = reps.iter().any(|r| r.scenario == Scenario::Nyop);

    let cell = |scenario: Scenario, t: u32| -> CellValues<'_> {
        CellValues {
            reps: reps.iter().filter(|r| r.scenario == scenario && r.t == t).collect(),
        }
    };

    let mut tier_reports = Vec::with_capacity(tiers.len());
    for &k in &tiers {
        let mut rows = Vec::with_capacity(t_values.len());
        for &t in &t_values {
            let baseline_cell = cell(Scenario::Baseline, t);
            let nyop_cell = cell(Scenario::Nyop, t);
            for (present, c) in [(has_baseline, &baseline_cell), (has_nyop, &nyop_cell)] {
                if present && c.reps.len() < 2 {
                    return Err(MetricsError::InsufficientReplications(c.reps.len()));
                }
            }

            let stats_for = |c: &CellValues<'_>| ScenarioStats {
                bwe: Stats::from_values(&c.metric(k, |m| m.bwe)),
                fill_rate: Stats::from_values(&c.metric(k, |m| m.fill_rate_empirical)),
                fill_rate_analytic: Stats::from_values(&c.metric(k, |m| m.fill_rate_analytic.raw)),
            };
            let baseline = has_baseline.then(|| stats_for(&baseline_cell));
            let nyop = has_nyop.then(|| stats_for(&nyop_cell));

            let change = match (baseline, nyop) {
                (Some(b), Some(ny)) => {
                    let paired = paired_changes(&baseline_cell, &nyop_cell, k, convention)?;
                    Some(ChangeStats {
                        bwe_pct: bwe_change_pct(b.bwe.mean, ny.bwe.mean),
                        bwe_pct_sd: sample_std(&paired.bwe),
                        fill_rate_pct: fill_rate_change_with(
                            convention,
                            b.fill_rate.mean,
                            ny.fill_rate.mean,
                        ),
                        fill_rate_pct_sd: sample_std(&paired.fill_rate),
                        fill_rate_analytic_pct: fill_rate_change_with(
                            convention,
                            b.fill_rate_analytic.mean,
                            ny.fill_rate_analytic.mean,
                        ),
                        fill_rate_analytic_pct_sd: sample_std(&paired.fill_rate_analytic),
                    })
                }
                _ => None,
            };
            rows.push(ReportRow { t, baseline, nyop, change });
        }

        let mean_of_change = rows.iter().map(|r| r.change).collect::<Option<Vec<_>>>().map(
            |changes| ChangeStats {
                bwe_pct: mean(&changes.iter().map(|c| c.bwe_pct).collect::<Vec<_>>()),
                bwe_pct_sd: mean(&changes.iter().map(|c| c.bwe_pct_sd).collect::<Vec<_>>()),
                fill_rate_pct: mean(&changes.iter().map(|c| c.fill_rate_pct).collect::<Vec<_>>()),
                fill_rate_pct_sd: mean(
                    &changes.iter().map(|c| c.fill_rate_pct_sd).collect::<Vec<_>>(),
                ),
                fill_rate_analytic_pct: mean(
                    &changes.iter().map(|c| c.fill_rate_analytic_pct).collect::<Vec<_>>(),
                ),
                fill_rate_analytic_pct_sd: mean(
                    &changes.iter().map(|c| c.fill_rate_analytic_pct_sd).collect::<Vec<_>>(),
                ),
            },
        );

        tier_reports.push(TierReport { k, rows, mean_of_change });
    }

    Ok(AggregateReport { t_values, convention, tiers: tier_reports })
}

struct PairedChanges {
    bwe: Vec<f64>,
    fill_rate: Vec<f64>,
    fill_rate_analytic: Vec<f64>,
}

fn paired_changes(
    baseline: &CellValues<'_>,
    nyop: &CellValues<'_>,
    k: u32,
    convention: ChangeConvention,
) -> Result<PairedChanges, MetricsError> {
    let mut bwe = Vec::with_capacity(baseline.reps.len());
    let mut fill_rate = Vec::with_capacity(baseline.reps.len());
    let mut fill_rate_analytic = Vec::with_capacity(baseline.reps.len());
    for b in &baseline.reps {
        let partner = nyop.reps.iter().find(|n| n.rep == b.rep).ok_or_else(|| {
            MetricsError::InconsistentReplications(format!(
                "no nyop partner for baseline rep {} at T={}",
                b.rep, b.t
            ))
        })?;
        let bm = b.tiers.iter().find(|m| m.k == k);
        let nm = partner.tiers.iter().find(|m| m.k == k);
        if let (Some(bm), Some(nm)) = (bm, nm) {
            bwe.push(bwe_change_pct(bm.bwe, nm.bwe));
            fill_rate.push(fill_rate_change_with(
                convention,
                bm.fill_rate_empirical,
                nm.fill_rate_empirical,
            ));
            fill_rate_analytic.push(fill_rate_change_with(
                convention,
                bm.fill_rate_analytic.raw,
                nm.fill_rate_analytic.raw,
            ));
        }
    }
    Ok(PairedChanges { bwe, fill_rate, fill_rate_analytic })
}
