//! Single runs and Monte Carlo campaigns.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{build_tables, CollisionTables, SafetyParams};
use crate::delay::{schedule_all, Schedule, SearchParams};
use crate::error::{Error, Result};
use crate::kinematics::KinematicLimits;
use crate::priority::{compute_priority_traced, detect_cycle, RoundTrace};
use crate::scenario::{
    generate, DeltaMode, Scenario, ScenarioConfig, SpacingMetric, COMPARISON_CUBE_CORNER,
};
use crate::verify::{verify, RunMetrics, VerifyReport, DEFAULT_RESOLUTION};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct RunResult {
    pub tables: CollisionTables,
    pub trace: Vec<RoundTrace>,
    pub schedule: Schedule,
    pub report: VerifyReport,
    pub metrics: RunMetrics,
}

/// Tables, priority and delays for one scenario, timed together.
pub fn plan(scenario: &Scenario, search: &SearchParams) -> Result<(CollisionTables, Vec<RoundTrace>, Schedule, f64)> {
    let clock = Instant::now();
    let tables = build_tables(&scenario.paths, scenario.config.safety)?;
    let cycles = detect_cycle(&tables);
    if !cycles.is_empty() {
        return Err(Error::CycleDetected { cycles });
    }
    let (pv, trace) = compute_priority_traced(&tables)?;
    let schedule = schedule_all(&scenario.paths, &tables, &pv, search)?;
    Ok((tables, trace, schedule, clock.elapsed().as_secs_f64()))
}

/// Plan, verify and measure one scenario.
pub fn run_once(scenario: &Scenario, search: &SearchParams, resolution: f64) -> Result<RunResult> {
    let (tables, trace, schedule, calc_time) = plan(scenario, search)?;
    let report = verify(
        &scenario.paths,
        &schedule,
        scenario.config.safety.r_col,
        resolution,
    )?;
    let metrics = RunMetrics::compute(
        scenario.config.seed,
        scenario.config.delta_value(),
        &scenario.paths,
        &schedule,
        &report,
        calc_time,
    );
    Ok(RunResult {
        tables,
        trace,
        schedule,
        report,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub drone_counts: Vec<usize>,
    pub replications: usize,
    pub delta_mode: DeltaMode,
    pub cube_far_corner: [f64; 3],
    pub base_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub search: SearchParams,
    pub safety: SafetyParams,
    pub limits: KinematicLimits,
    pub min_spacing: f64,
    pub spacing_metric: SpacingMetric,
    pub verify_resolution: f64,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        Self {
            drone_counts: vec![10, 15, 20, 25, 30],
            replications: 200,
            delta_mode: DeltaMode::Fixed(10.0),
            cube_far_corner: COMPARISON_CUBE_CORNER,
            base_seed: 0,
            output_dir: None,
            search: SearchParams::default(),
            safety: SafetyParams::default(),
            limits: KinematicLimits::default(),
            min_spacing: 2.0,
            spacing_metric: SpacingMetric::Euclidean,
            verify_resolution: DEFAULT_RESOLUTION,
        }
    }
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.drone_counts.is_empty() {
            return Err(Error::InvalidInput("drone_counts must not be empty".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be at least 1".into()));
        }
        self.search.validate()
    }

    pub fn scenario_config(&self, n: usize, replication: usize) -> ScenarioConfig {
        ScenarioConfig {
            n,
            delta: self.delta_mode,
            safety: self.safety,
            limits: self.limits,
            min_spacing: self.min_spacing,
            spacing_metric: self.spacing_metric,
            cube_far_corner: self.cube_far_corner,
            seed: self.base_seed.wrapping_add(replication as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed(RunMetrics),
    Cycle { cycles: usize },
    Infeasible { p: usize, q: usize },
    Failed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub seed: u64,
    pub delta: f64,
    pub outcome: RunOutcome,
}

/// Mean and normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// `None` with fewer than two samples.
    pub half_width: Option<f64>,
    pub count: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let k = xs.len();
        if k == 0 {
            return Self {
                mean: f64::NAN,
                half_width: None,
                count: 0,
            };
        }
        let mean = xs.iter().sum::<f64>() / k as f64;
        let half_width = (k > 1).then(|| {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            1.96 * var.sqrt() / (k as f64).sqrt()
        });
        Self {
            mean,
            half_width,
            count: k,
        }
    }

    fn half_width_text(&self) -> String {
        self.half_width.map_or("n/a".into(), |h| h.to_string())
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prec = f.precision().unwrap_or(3);
        match self.half_width {
            Some(h) => write!(f, "{:.prec$} ± {:.prec$}", self.mean, h),
            None => write!(f, "{:.prec$} ± n/a", self.mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub n: usize,
    pub delta: f64,
    pub runs: usize,
    pub completed: usize,
    pub cycles: usize,
    pub infeasible: usize,
    pub failed: usize,
    /// Share of runs that could be scheduled, in percent.
    pub cycle_free_pct: f64,
    /// Share of scheduled runs that passed verification, in percent.
    pub collision_free_pct: f64,
    pub flock_time: Estimate,
    pub mean_delay: Estimate,
    pub max_delay: Estimate,
    pub overhead_time_pct: Estimate,
    pub overhead_distance_pct: Estimate,
    pub min_distance: Estimate,
    pub calc_time: Estimate,
    pub calc_time_median: f64,
}

impl CountSummary {
    fn from_records(n: usize, delta: f64, records: &[&RunRecord]) -> Self {
        let done: Vec<&RunMetrics> = records
            .iter()
            .filter_map(|r| match &r.outcome {
                RunOutcome::Completed(m) => Some(m),
                _ => None,
            })
            .collect();
        let count = |f: fn(&RunOutcome) -> bool| records.iter().filter(|r| f(&r.outcome)).count();
        let est = |f: fn(&RunMetrics) -> f64| {
            Estimate::from_samples(&done.iter().map(|m| f(m)).collect::<Vec<_>>())
        };
        let runs = records.len();
        let completed = done.len();
        let mut calc: Vec<f64> = done.iter().map(|m| m.calc_time).collect();
        calc.sort_by(f64::total_cmp);
        Self {
            n,
            delta,
            runs,
            completed,
            cycles: count(|o| matches!(o, RunOutcome::Cycle { .. })),
            infeasible: count(|o| matches!(o, RunOutcome::Infeasible { .. })),
            failed: count(|o| matches!(o, RunOutcome::Failed { .. })),
            cycle_free_pct: 100.0 * completed as f64 / runs.max(1) as f64,
            collision_free_pct: if completed == 0 {
                f64::NAN
            } else {
                100.0 * done.iter().filter(|m| m.collision_free).count() as f64 / completed as f64
            },
            flock_time: est(|m| m.flock_time),
            mean_delay: est(|m| m.mean_delay),
            max_delay: est(|m| m.max_delay),
            overhead_time_pct: est(|m| m.overhead_time_pct),
            overhead_distance_pct: est(|m| m.overhead_distance_pct),
            min_distance: est(|m| m.min_distance),
            calc_time: est(|m| m.calc_time),
            calc_time_median: median(&calc),
        }
    }

    /// Metric name and estimate for every deterministic column.
    fn metric_columns(&self) -> [(&'static str, &Estimate); 6] {
        [
            ("flock_time_s", &self.flock_time),
            ("mean_delay_s", &self.mean_delay),
            ("max_delay_s", &self.max_delay),
            ("overhead_time_pct", &self.overhead_time_pct),
            ("overhead_distance_pct", &self.overhead_distance_pct),
            ("min_distance_m", &self.min_distance),
        ]
    }
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        k if k % 2 == 1 => sorted[k / 2],
        k => 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub schema_version: u32,
    pub spec: CampaignSpec,
    pub records: Vec<RunRecord>,
    pub summaries: Vec<CountSummary>,
}

fn run_record(spec: &CampaignSpec, n: usize, replication: usize) -> Result<RunRecord> {
    let config = spec.scenario_config(n, replication);
    let scenario = generate(&config)?;
    let outcome = match run_once(&scenario, &spec.search, spec.verify_resolution) {
        Ok(r) => RunOutcome::Completed(r.metrics),
        Err(Error::CycleDetected { cycles }) => RunOutcome::Cycle {
            cycles: cycles.len(),
        },
        Err(Error::InfeasiblePair { p, q }) => RunOutcome::Infeasible { p, q },
        Err(e) => RunOutcome::Failed {
            message: e.to_string(),
        },
    };
    Ok(RunRecord {
        n,
        seed: config.seed,
        delta: config.delta_value(),
        outcome,
    })
}

/// Run every replication for every drone count. Records come back in
/// (count, seed) order whatever the thread scheduling.
pub fn run_campaign(spec: &CampaignSpec) -> Result<CampaignReport> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = spec
        .drone_counts
        .iter()
        .flat_map(|&n| (0..spec.replications).map(move |r| (n, r)))
        .collect();
    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(n, r)| run_record(spec, n, r))
        .collect::<Result<_>>()?;

    let summaries = spec
        .drone_counts
        .iter()
        .map(|&n| {
            let of_n: Vec<&RunRecord> = records.iter().filter(|r| r.n == n).collect();
            CountSummary::from_records(n, spec.delta_mode.value(n), &of_n)
        })
        .collect();
    let report = CampaignReport {
        schema_version: REPORT_SCHEMA_VERSION,
        spec: spec.clone(),
        records,
        summaries,
    };
    if let Some(dir) = &spec.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}

impl CampaignReport {
    /// Write `runs.csv`, `summary.csv`, `long.csv` and `timing.csv` into `dir`.
    /// All but `runs.csv` and `timing.csv` are independent of wall-clock time.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.write_runs(&dir.join("runs.csv"))?;
        self.write_summary(&dir.join("summary.csv"))?;
        self.write_long(&dir.join("long.csv"))?;
        self.write_timing(&dir.join("timing.csv"))?;
        Ok(())
    }

    fn write_runs(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "schema_version",
            "seed",
            "n",
            "delta",
            "status",
            "flock_time",
            "mean_delay",
            "max_delay",
            "overhead_time_pct",
            "overhead_distance_pct",
            "calc_time",
            "min_distance",
            "collision_free",
        ])?;
        for r in &self.records {
            let mut row = vec![
                self.schema_version.to_string(),
                r.seed.to_string(),
                r.n.to_string(),
                r.delta.to_string(),
            ];
            match &r.outcome {
                RunOutcome::Completed(m) => {
                    row.push("completed".into());
                    row.extend(
                        [
                            m.flock_time,
                            m.mean_delay,
                            m.max_delay,
                            m.overhead_time_pct,
                            m.overhead_distance_pct,
                            m.calc_time,
                            m.min_distance,
                        ]
                        .map(|v| v.to_string()),
                    );
                    row.push(m.collision_free.to_string());
                }
                other => {
                    row.push(
                        match other {
                            RunOutcome::Cycle { .. } => "cycle",
                            RunOutcome::Infeasible { .. } => "infeasible",
                            _ => "failed",
                        }
                        .into(),
                    );
                    row.extend(std::iter::repeat_n(String::new(), 8));
                }
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn write_summary(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec![
            "schema_version".to_string(),
            "n".into(),
            "delta".into(),
            "runs".into(),
            "completed".into(),
            "cycles".into(),
            "infeasible".into(),
            "failed".into(),
            "cycle_free_pct".into(),
            "collision_free_pct".into(),
        ];
        if let Some(first) = self.summaries.first() {
            for (name, _) in first.metric_columns() {
                header.push(format!("{name}_mean"));
                header.push(format!("{name}_ci95"));
            }
        }
        w.write_record(&header)?;
        for s in &self.summaries {
            let mut row = vec![
                self.schema_version.to_string(),
                s.n.to_string(),
                s.delta.to_string(),
                s.runs.to_string(),
                s.completed.to_string(),
                s.cycles.to_string(),
                s.infeasible.to_string(),
                s.failed.to_string(),
                s.cycle_free_pct.to_string(),
                s.collision_free_pct.to_string(),
            ];
            for (_, e) in s.metric_columns() {
                row.push(e.mean.to_string());
                row.push(e.half_width_text());
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn write_long(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["schema_version", "n", "metric", "mean", "ci95", "count"])?;
        for s in &self.summaries {
            for (name, e) in s.metric_columns() {
                w.write_record([
                    self.schema_version.to_string(),
                    s.n.to_string(),
                    name.to_string(),
                    e.mean.to_string(),
                    e.half_width_text(),
                    e.count.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn write_timing(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["schema_version", "n", "calc_time_mean", "calc_time_ci95", "calc_time_median"])?;
        for s in &self.summaries {
            w.write_record([
                self.schema_version.to_string(),
                s.n.to_string(),
                s.calc_time.mean.to_string(),
                s.calc_time.half_width_text(),
                s.calc_time_median.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for CampaignReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>6} {:>9} {:>6} {:>9} {:>20} {:>16} {:>16} {:>18} {:>16}",
            "n", "delta", "runs", "no-cycle%", "flock time (s)", "avg delay (s)", "max delay (s)", "T_OH (%)", "calc (s)"
        )?;
        for s in &self.summaries {
            writeln!(
                f,
                "{:>6} {:>9.4} {:>6} {:>9.1} {:>20} {:>16} {:>16} {:>18} {:>16}",
                s.n,
                s.delta,
                s.runs,
                s.cycle_free_pct,
                format!("{:.3}", s.flock_time),
                format!("{:.3}", s.mean_delay),
                format!("{:.3}", s.max_delay),
                format!("{:.3}", s.overhead_time_pct),
                format!("{:.4}", s.calc_time),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_half_width() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        let s = (5.0f64 / 3.0).sqrt();
        assert!((e.half_width.unwrap() - 1.96 * s / 2.0).abs() < 1e-12);
        let one = Estimate::from_samples(&[7.0]);
        assert_eq!(one.half_width, None);
        assert_eq!(one.half_width_text(), "n/a");
        assert_eq!(format!("{one:.1}"), "7.0 ± n/a");
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[1.0, 2.0, 10.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 4.0, 10.0]), 3.0);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn seeds_follow_replication_index() {
        let spec = CampaignSpec {
            base_seed: 100,
            ..Default::default()
        };
        assert_eq!(spec.scenario_config(10, 7).seed, 107);
    }

    #[test]
    fn small_campaign_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let spec = CampaignSpec {
            drone_counts: vec![5, 8],
            replications: 3,
            base_seed: 9,
            ..Default::default()
        };
        let ra = run_campaign(&CampaignSpec {
            output_dir: Some(a.path().into()),
            ..spec.clone()
        })
        .unwrap();
        run_campaign(&CampaignSpec {
            output_dir: Some(b.path().into()),
            ..spec
        })
        .unwrap();
        for name in ["summary.csv", "long.csv"] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name}");
        }
        assert_eq!(ra.records.len(), 6);
        assert_eq!(ra.records[0].seed, 9);
        assert_eq!(ra.records[3].n, 8);
        assert!(format!("{ra}").lines().count() == 3);
    }

    #[test]
    fn single_replication_reports_na() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CampaignSpec {
            drone_counts: vec![4],
            replications: 1,
            output_dir: Some(dir.path().into()),
            ..Default::default()
        };
        let r = run_campaign(&spec).unwrap();
        assert_eq!(r.summaries[0].flock_time.half_width, None);
        let text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(text.contains("n/a"));
    }
}
