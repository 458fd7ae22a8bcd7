//! Command-line experiment harness: sweeps the forecast window over both
//! procurement scenarios with paired replications and writes the summary
//! tables, curve files, and raw per-replication metrics.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};

use nyopsim::engine::{Scenario, SimConfig};
use nyopsim::market::MarketCalibration;
use nyopsim::metrics::ChangeConvention;
use nyopsim::negotiation::NegotiationConfig;
use nyopsim::policy::PolicyParams;
use nyopsim::sweep::{self, OutputFormat, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Baseline,
    Nyop,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    /// BWE change relative to baseline, fill-rate change relative to NYOP.
    Paper,
    /// Both changes relative to baseline.
    Baseline,
}

/// Multi-tier supply-chain simulator with NYOP procurement.
///
/// Runs `reps` paired replications for every forecast window T in
/// `t_min..=t_max` and every selected scenario, then writes per-tier summary
/// tables, BWE/fill-rate curves, and raw per-replication metrics.
#[derive(Debug, Parser)]
#[command(name = "nyopsim", version)]
struct Args {
    /// Scenario(s) to run.
    #[arg(long, value_enum, default_value = "both")]
    scenario: ScenarioArg,

    /// Smallest forecast window T.
    #[arg(long, default_value_t = 5)]
    t_min: u32,

    /// Largest forecast window T.
    #[arg(long, default_value_t = 15)]
    t_max: u32,

    /// Replications per cell (paired across scenarios).
    #[arg(long, default_value_t = 30)]
    reps: u32,

    /// Base seed; cell seeds derive from (seed, T, rep).
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Simulated periods per run.
    #[arg(long, default_value_t = 1000)]
    horizon: u32,

    /// Leading periods excluded from metrics.
    #[arg(long, default_value_t = 100)]
    warmup: u32,

    /// Shipment lead time L (periods).
    #[arg(long, default_value_t = 1)]
    lead_time: u32,

    /// Number of tiers in the chain.
    #[arg(long, default_value_t = 4)]
    n_tiers: u32,

    /// Mean market demand per period (also the calibrated Q*).
    #[arg(long, default_value_t = 100.0)]
    mu: f64,

    /// Market demand standard deviation.
    #[arg(long, default_value_t = 10.0)]
    sigma: f64,

    /// Price elasticity of demand (negative).
    #[arg(long, default_value_t = -0.75, allow_negative_numbers = true)]
    ed: f64,

    /// Price elasticity of supply (positive).
    #[arg(long, default_value_t = 1.56)]
    es: f64,

    /// Equilibrium price P* (normalization; matching is scale-invariant).
    #[arg(long, default_value_t = 100.0)]
    p_star: f64,

    /// Safety factor z in the order-up-to target.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    z: f64,

    /// Opening bid fraction of the buyer's valuation, in (0, 1].
    #[arg(long, default_value_t = 0.9)]
    beta: f64,

    /// Bidding rounds per negotiation.
    #[arg(long, default_value_t = 3)]
    max_rounds: u32,

    /// Also broadcast market demand to every tier in the Baseline scenario.
    #[arg(long, default_value_t = false)]
    broadcast_in_baseline: bool,

    /// Change-percentage convention for the summary tables.
    #[arg(long, value_enum, default_value = "paper")]
    change_convention: ConventionArg,

    /// Write a JSONL message trace per run under OUT_DIR/traces/.
    #[arg(long, default_value_t = false)]
    trace: bool,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Report format.
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

fn build_spec(args: &Args) -> anyhow::Result<SweepSpec> {
    if args.t_min > args.t_max {
        bail!("--t-min ({}) must not exceed --t-max ({})", args.t_min, args.t_max);
    }
    let scenarios = match args.scenario {
        ScenarioArg::Baseline => vec![Scenario::Baseline],
        ScenarioArg::Nyop => vec![Scenario::Nyop],
        ScenarioArg::Both => vec![Scenario::Baseline, Scenario::Nyop],
    };
    let base = SimConfig {
        n_tiers: args.n_tiers,
        horizon: args.horizon,
        warmup: args.warmup,
        forecast_window: args.t_min,
        mu: args.mu,
        sigma: args.sigma,
        scenario: Scenario::Baseline,
        seed: args.seed,
        calibration: MarketCalibration {
            p_star: args.p_star,
            q_star: args.mu,
            e_d: args.ed,
            e_s: args.es,
        },
        policy: PolicyParams { lead_time: args.lead_time, safety_factor: args.z },
        negotiation: NegotiationConfig { max_rounds: args.max_rounds, opening_fraction: args.beta },
        broadcast_demand_in_baseline: args.broadcast_in_baseline,
    };
    let trace_dir = if args.trace {
        let dir = args.out_dir.join("traces");
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("creating trace directory {}", dir.display()))?;
        Some(dir)
    } else {
        None
    };
    Ok(SweepSpec {
        t_values: (args.t_min..=args.t_max).collect(),
        scenarios,
        replications: args.reps,
        base_seed: args.seed,
        convention: match args.change_convention {
            ConventionArg::Paper => ChangeConvention::PaperMixed,
            ConventionArg::Baseline => ChangeConvention::RelativeToBaseline,
        },
        base,
        trace_dir,
    })
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let spec = build_spec(&args)?;
    let format = match args.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };

    eprintln!(
        "running {} simulations ({} T values x {} scenario(s) x {} reps)...",
        spec.total_runs(),
        spec.t_values.len(),
        spec.scenarios.len(),
        spec.replications
    );
    let output = sweep::run_sweep(&spec).context("sweep failed")?;
    let files = sweep::emit(&output, format, &args.out_dir).context("writing outputs failed")?;

    for tier in &output.report.tiers {
        if let Some(footer) = &tier.mean_of_change {
            eprintln!(
                "k={}: mean BWE change {}%, mean fill-rate change {}%",
                tier.k,
                sweep::format_pct(footer.bwe_pct),
                sweep::format_pct(footer.fill_rate_pct),
            );
        }
    }
    for path in files {
        println!("{}", path.display());
    }
    Ok(())
}
