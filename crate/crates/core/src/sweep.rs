//! Experiment harness: sweeps the forecast window T over both scenarios with
//! paired replications, aggregates the results into the per-tier table
//! layout, and writes CSV or JSON outputs.
//!
//! Replication `r` of a cell derives its seed from `(base_seed, T, r)` only,
//! so the Baseline and Nyop runs of a pair consume identical market demand
//! streams (common random numbers). Cells may execute in parallel; results
//! are sorted deterministically before aggregation and writing, so the output
//! bytes never depend on scheduling.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::demand::derive_seed;
use crate::engine::{self, EngineError, Scenario, SimConfig};
use crate::messaging;
use crate::metrics::{
    self, AggregateReport, ChangeConvention, MetricsError, ReplicationMetrics, ScenarioStats,
};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Output format for the aggregated report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Sweep description: which T values, scenarios, and replication count to
/// run, on top of a base simulation config.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub t_values: Vec<u32>,
    pub scenarios: Vec<Scenario>,
    /// Paired replications per cell, at least 2.
    pub replications: u32,
    pub base_seed: u64,
    pub convention: ChangeConvention,
    /// Template config; `forecast_window`, `scenario`, and `seed` are set per
    /// cell.
    pub base: SimConfig,
    /// When set, every run writes its JSONL message trace into this
    /// directory.
    pub trace_dir: Option<PathBuf>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            t_values: (5..=15).collect(),
            scenarios: vec![Scenario::Baseline, Scenario::Nyop],
            replications: 30,
            base_seed: 42,
            convention: ChangeConvention::PaperMixed,
            base: SimConfig::default(),
            trace_dir: None,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.t_values.is_empty() {
            return Err(SweepError::InvalidSpec("t_values must not be empty".into()));
        }
        if self.scenarios.is_empty() {
            return Err(SweepError::InvalidSpec("scenarios must not be empty".into()));
        }
        if self.replications < 2 {
            return Err(MetricsError::InsufficientReplications(self.replications as usize).into());
        }
        for &t in &self.t_values {
            for &s in &self.scenarios {
                self.config_for(s, t, 0).validate()?;
            }
        }
        Ok(())
    }

    /// Config for one replication of one cell. The seed derivation ignores
    /// the scenario, which is what pairs the runs.
    pub fn config_for(&self, scenario: Scenario, t: u32, rep: u32) -> SimConfig {
        SimConfig {
            forecast_window: t,
            scenario,
            seed: derive_seed(self.base_seed, t, rep),
            ..self.base.clone()
        }
    }

    pub fn total_runs(&self) -> usize {
        self.t_values.len() * self.scenarios.len() * self.replications as usize
    }
}

/// Aggregated report plus the raw per-replication metrics behind it.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub report: AggregateReport,
    pub replications: Vec<ReplicationMetrics>,
}

fn scenario_sort_key(s: Scenario) -> u8 {
    match s {
        Scenario::Baseline => 0,
        Scenario::Nyop => 1,
    }
}

/// Runs the full sweep: `|t_values| x |scenarios| x replications` simulations.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput, SweepError> {
    spec.validate()?;
    let mut jobs = Vec::with_capacity(spec.total_runs());
    for &t in &spec.t_values {
        for &scenario in &spec.scenarios {
            for rep in 0..spec.replications {
                jobs.push((scenario, t, rep));
            }
        }
    }

    let mut replications = jobs
        .par_iter()
        .map(|&(scenario, t, rep)| -> Result<ReplicationMetrics, SweepError> {
            let cfg = spec.config_for(scenario, t, rep);
            let log = if spec.trace_dir.is_some() {
                engine::run_traced(&cfg)?
            } else {
                engine::run(&cfg)?
            };
            if let (Some(dir), Some(trace)) = (&spec.trace_dir, &log.trace) {
                let path = dir.join(format!("trace_{}_T{}_r{}.jsonl", scenario.label(), t, rep));
                let mut file = std::io::BufWriter::new(fs::File::create(path)?);
                messaging::write_trace(trace, &mut file)?;
                file.flush()?;
            }
            let tiers = metrics::tier_metrics(&log, &cfg)?;
            Ok(ReplicationMetrics { scenario, t, rep, seed: cfg.seed, tiers })
        })
        .collect::<Result<Vec<_>, _>>()?;

    replications.sort_by_key(|r| (scenario_sort_key(r.scenario), r.t, r.rep));
    let report = metrics::aggregate(&replications, spec.convention)?;
    Ok(SweepOutput { report, replications })
}

/// Formats a ratio-valued cell with four decimal places.
pub fn format_ratio(x: f64) -> String {
    format!("{x:.4}")
}

/// Formats a percentage with two decimal places, rounding halves away from
/// zero the way the published tables do (3.125 -> "3.13").
pub fn format_pct(x: f64) -> String {
    let rounded = (x * 100.0).round() / 100.0;
    format!("{rounded:.2}")
}

struct SummaryLayout {
    has_baseline: bool,
    has_nyop: bool,
}

impl SummaryLayout {
    fn header(&self) -> Vec<&'static str> {
        let mut cols = vec!["metric", "T"];
        if self.has_baseline {
            cols.extend(["without_nyop_mean", "without_nyop_sd"]);
        }
        if self.has_nyop {
            cols.extend(["with_nyop_mean", "with_nyop_sd"]);
        }
        if self.has_baseline && self.has_nyop {
            cols.extend(["change_pct_mean", "change_pct_sd"]);
        }
        cols
    }
}

fn summary_csv(report: &AggregateReport, k: u32) -> Result<String, SweepError> {
    let tier = report
        .tier(k)
        .ok_or_else(|| SweepError::InvalidSpec(format!("tier {k} missing from report")))?;
    let layout = SummaryLayout {
        has_baseline: tier.rows.iter().any(|r| r.baseline.is_some()),
        has_nyop: tier.rows.iter().any(|r| r.nyop.is_some()),
    };
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(layout.header())?;

    type MetricCols = (
        &'static str,
        fn(&ScenarioStats) -> (f64, f64),
        fn(&metrics::ChangeStats) -> (f64, f64),
    );
    let metrics_cols: [MetricCols; 3] = [
        ("bwe", |s| (s.bwe.mean, s.bwe.sd), |c| (c.bwe_pct, c.bwe_pct_sd)),
        (
            "fill_rate",
            |s| (s.fill_rate.mean, s.fill_rate.sd),
            |c| (c.fill_rate_pct, c.fill_rate_pct_sd),
        ),
        (
            "fill_rate_analytic",
            |s| (s.fill_rate_analytic.mean, s.fill_rate_analytic.sd),
            |c| (c.fill_rate_analytic_pct, c.fill_rate_analytic_pct_sd),
        ),
    ];

    for (name, scenario_cols, change_cols) in metrics_cols {
        for row in &tier.rows {
            let mut record = vec![name.to_string(), row.t.to_string()];
            if layout.has_baseline {
                let (m, sd) = row.baseline.as_ref().map(&scenario_cols).unwrap_or((f64::NAN, f64::NAN));
                record.push(format_ratio(m));
                record.push(format_ratio(sd));
            }
            if layout.has_nyop {
                let (m, sd) = row.nyop.as_ref().map(&scenario_cols).unwrap_or((f64::NAN, f64::NAN));
                record.push(format_ratio(m));
                record.push(format_ratio(sd));
            }
            if layout.has_baseline && layout.has_nyop {
                let (m, sd) = row.change.as_ref().map(&change_cols).unwrap_or((f64::NAN, f64::NAN));
                record.push(format_pct(m));
                record.push(format_pct(sd));
            }
            writer.write_record(&record)?;
        }
        if let Some(footer) = &tier.mean_of_change {
            let (m, sd) = change_cols(footer);
            let mut record = vec![name.to_string(), "mean_of_change".to_string()];
            if layout.has_baseline {
                record.extend(["".to_string(), "".to_string()]);
            }
            if layout.has_nyop {
                record.extend(["".to_string(), "".to_string()]);
            }
            record.push(format_pct(m));
            record.push(format_pct(sd));
            writer.write_record(&record)?;
        }
    }

    let bytes = writer.into_inner().map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn curve_csv(
    report: &AggregateReport,
    value_name: &str,
    pick: impl Fn(&ScenarioStats) -> f64,
) -> Result<String, SweepError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["scenario", "k", "T", value_name])?;
    for (label, get) in [
        ("baseline", &(|row: &metrics::ReportRow| row.baseline) as &dyn Fn(_) -> _),
        ("nyop", &|row: &metrics::ReportRow| row.nyop),
    ] {
        for tier in &report.tiers {
            for row in &tier.rows {
                if let Some(stats) = get(row) {
                    writer.write_record(&[
                        label.to_string(),
                        tier.k.to_string(),
                        row.t.to_string(),
                        format_ratio(pick(&stats)),
                    ])?;
                }
            }
        }
    }
    let bytes = writer.into_inner().map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn replications_csv(output: &SweepOutput) -> Result<String, SweepError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "scenario",
        "T",
        "rep",
        "seed",
        "k",
        "bwe",
        "fill_rate_empirical",
        "fill_rate_analytic_raw",
    ])?;
    for rep in &output.replications {
        for tier in &rep.tiers {
            writer.write_record(&[
                rep.scenario.label().to_string(),
                rep.t.to_string(),
                rep.rep.to_string(),
                rep.seed.to_string(),
                tier.k.to_string(),
                tier.bwe.to_string(),
                tier.fill_rate_empirical.to_string(),
                tier.fill_rate_analytic.raw.to_string(),
            ])?;
        }
    }
    let bytes = writer.into_inner().map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes the sweep outputs into `out_dir` and returns the paths written.
///
/// CSV format produces one `summary_k{k}.csv` per tier, the two curve files
/// behind the BWE-vs-T and FR-vs-T figures, and the raw `replications.csv`.
/// JSON format produces a single full-precision `report.json` plus the raw
/// CSV. All file contents are assembled before anything is written, so a
/// failed aggregation leaves no partial output behind.
pub fn emit(
    output: &SweepOutput,
    format: OutputFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, SweepError> {
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    match format {
        OutputFormat::Csv => {
            for tier in &output.report.tiers {
                files.push((
                    out_dir.join(format!("summary_k{}.csv", tier.k)),
                    summary_csv(&output.report, tier.k)?,
                ));
            }
            files.push((
                out_dir.join("curves_bwe.csv"),
                curve_csv(&output.report, "mean_bwe", |s| s.bwe.mean)?,
            ));
            files.push((
                out_dir.join("curves_fill_rate.csv"),
                curve_csv(&output.report, "mean_fill_rate", |s| s.fill_rate.mean)?,
            ));
        }
        OutputFormat::Json => {
            let json = serde_json::to_string_pretty(&output.report)
                .map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
            files.push((out_dir.join("report.json"), json + "\n"));
        }
    }
    files.push((out_dir.join("replications.csv"), replications_csv(output)?));

    fs::create_dir_all(out_dir)?;
    let mut written = Vec::with_capacity(files.len());
    for (path, contents) in files {
        fs::write(&path, contents)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SweepSpec {
        SweepSpec {
            t_values: vec![5, 6],
            replications: 2,
            base: SimConfig { horizon: 120, warmup: 40, ..SimConfig::default() },
            ..SweepSpec::default()
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = tiny_spec();
        spec.replications = 1;
        assert!(matches!(
            spec.validate(),
            Err(SweepError::Metrics(MetricsError::InsufficientReplications(1)))
        ));

        let mut spec = tiny_spec();
        spec.t_values.clear();
        assert!(matches!(spec.validate(), Err(SweepError::InvalidSpec(_))));

        let mut spec = tiny_spec();
        spec.t_values = vec![50]; // exceeds warmup
        assert!(matches!(spec.validate(), Err(SweepError::Engine(_))));
    }

    #[test]
    fn sweep_produces_expected_cell_counts() {
        let spec = tiny_spec();
        let out = run_sweep(&spec).unwrap();
        assert_eq!(out.replications.len(), spec.total_runs());
        assert_eq!(out.report.t_values, vec![5, 6]);
        assert_eq!(out.report.tiers.len(), 4);
        assert_eq!(out.report.tiers[0].k, 4, "retailer first");
        for tier in &out.report.tiers {
            for row in &tier.rows {
                assert!(row.baseline.is_some());
                assert!(row.nyop.is_some());
                assert!(row.change.is_some());
            }
            assert!(tier.mean_of_change.is_some());
        }
    }

    #[test]
    fn paired_scenarios_share_demand_streams() {
        let spec = tiny_spec();
        for rep in 0..spec.replications {
            let base_cfg = spec.config_for(Scenario::Baseline, 5, rep);
            let nyop_cfg = spec.config_for(Scenario::Nyop, 5, rep);
            assert_eq!(base_cfg.seed, nyop_cfg.seed);
            let a = engine::run(&base_cfg).unwrap();
            let b = engine::run(&nyop_cfg).unwrap();
            assert_eq!(a.market_demand, b.market_demand, "CRN pairing broken at rep {rep}");
        }
    }

    #[test]
    fn emit_csv_writes_expected_files_deterministically() {
        let spec = tiny_spec();
        let out = run_sweep(&spec).unwrap();

        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let files_a = emit(&out, OutputFormat::Csv, dir_a.path()).unwrap();
        let names: Vec<String> = files_a
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        for expected in [
            "summary_k4.csv",
            "summary_k3.csv",
            "summary_k2.csv",
            "summary_k1.csv",
            "curves_bwe.csv",
            "curves_fill_rate.csv",
            "replications.csv",
        ] {
            assert!(names.contains(&expected.to_string()), "missing {expected}");
        }

        // Re-running the identical spec yields byte-identical files.
        let out2 = run_sweep(&spec).unwrap();
        emit(&out2, OutputFormat::Csv, dir_b.path()).unwrap();
        for name in &names {
            let a = fs::read(dir_a.path().join(name)).unwrap();
            let b = fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} not byte-identical across runs");
        }

        let summary = fs::read_to_string(dir_a.path().join("summary_k4.csv")).unwrap();
        let mut lines = summary.lines();
        assert_eq!(
            lines.next().unwrap(),
            "metric,T,without_nyop_mean,without_nyop_sd,with_nyop_mean,with_nyop_sd,change_pct_mean,change_pct_sd"
        );
        assert!(summary.lines().any(|l| l.starts_with("bwe,mean_of_change,")));
    }

    #[test]
    fn emit_nyop_only_omits_change_columns() {
        let spec = SweepSpec { scenarios: vec![Scenario::Nyop], ..tiny_spec() };
        let out = run_sweep(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit(&out, OutputFormat::Csv, dir.path()).unwrap();
        let summary = fs::read_to_string(dir.path().join("summary_k4.csv")).unwrap();
        assert_eq!(summary.lines().next().unwrap(), "metric,T,with_nyop_mean,with_nyop_sd");
        assert!(!summary.contains("mean_of_change"));
    }

    #[test]
    fn emit_json_report() {
        let spec = tiny_spec();
        let out = run_sweep(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit(&out, OutputFormat::Json, dir.path()).unwrap();
        assert!(files.iter().any(|p| p.ends_with("report.json")));
        let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["t_values"], serde_json::json!([5, 6]));
        assert_eq!(v["tiers"][0]["k"], 4);
        assert!(v["tiers"][0]["rows"][0]["baseline"]["bwe"]["mean"].is_number());
    }

    #[test]
    fn trace_dir_collects_one_file_per_run() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SweepSpec {
            t_values: vec![5],
            trace_dir: Some(dir.path().to_path_buf()),
            ..tiny_spec()
        };
        run_sweep(&spec).unwrap();
        let count = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(count, spec.total_runs());
        let sample = dir.path().join("trace_nyop_T5_r0.jsonl");
        let text = fs::read_to_string(sample).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert!(first["performative"].is_string());
    }

    #[test]
    fn pct_formatting_rounds_half_away_from_zero() {
        assert_eq!(format_pct(3.125), "3.13");
        assert_eq!(format_pct(24.234_693), "24.23");
        assert_eq!(format_pct(-3.125), "-3.13");
        assert_eq!(format_pct(0.0), "0.00");
    }
}
