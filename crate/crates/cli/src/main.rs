//! `tps`: generate flocks, schedule them, verify schedules and run campaigns.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use tps_core::campaign::{self, CampaignSpec};
use tps_core::collision::build_tables;
use tps_core::delay::{Schedule, SearchParams};
use tps_core::scenario::{self, DeltaMode, Scenario, ScenarioConfig, SpacingMetric};
use tps_core::verify::{self, RunMetrics, DEFAULT_RESOLUTION};
use tps_core::{Error, KinematicLimits, SafetyParams};

const EXIT_FAILURE: u8 = 1;
const EXIT_CYCLE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_COLLISION: u8 = 4;

#[derive(Parser)]
#[command(name = "tps", version, about = "Prioritised start-delay scheduling for drone flocks")]
struct Cli {
    /// JSON file with default settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for output files.
    #[arg(long, global = true, env = "TPS_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random scenario file.
    Generate(Settings),
    /// Compute priorities and delays for a scenario, then verify the result.
    Schedule {
        /// Scenario file; a scenario is generated from the settings when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Also write the collision matrices and the priority trace.
        #[arg(long)]
        dump: bool,
        #[command(flatten)]
        settings: Settings,
    },
    /// Check a schedule against a scenario.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Run a Monte Carlo campaign over several drone counts.
    Campaign(Settings),
    /// Write the collision matrices of a scenario as CSV.
    DumpMatrices {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Metric {
    Euclidean,
    Chebyshev,
}

/// Every tunable. Unset flags fall back to the config file, then to defaults.
#[derive(Args, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Settings {
    /// Number of drones.
    #[arg(long)]
    n: Option<usize>,
    /// Density factor: a number, or `auto` for 1.06·n^0.5329.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Far corner of the target cube as `x,y,z`.
    #[arg(long, value_delimiter = ',')]
    cube_far_corner: Option<Vec<f64>>,
    #[arg(long)]
    min_spacing: Option<f64>,
    #[arg(long, value_enum)]
    spacing_metric: Option<Metric>,
    #[arg(long)]
    r_col: Option<f64>,
    #[arg(long)]
    sf: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    a_max: Option<f64>,
    #[arg(long)]
    v_max: Option<f64>,
    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long)]
    dt_step: Option<f64>,
    #[arg(long)]
    t_sample: Option<f64>,
    #[arg(long)]
    refine_tol: Option<f64>,
    #[arg(long)]
    expansion_cap: Option<f64>,
    /// Verifier time resolution (s).
    #[arg(long)]
    resolution: Option<f64>,
    /// Drone counts for a campaign, comma separated.
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<usize>>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Settings {
    fn merged_with(mut self, file: &Settings) -> Self {
        merge_fields!(self, file; n, delta, seed, cube_far_corner, min_spacing, spacing_metric,
            r_col, sf, lambda, a_max, v_max, d_max, dt_step, t_sample, refine_tol,
            expansion_cap, resolution, counts, replications, base_seed);
        self
    }

    fn delta_mode(&self) -> Result<DeltaMode, Error> {
        match self.delta.as_deref() {
            None => Ok(DeltaMode::Fixed(10.0)),
            Some("auto") => Ok(DeltaMode::Auto),
            Some(v) => v
                .parse()
                .map(DeltaMode::Fixed)
                .map_err(|_| Error::InvalidInput(format!("delta must be a number or `auto`, got `{v}`"))),
        }
    }

    fn cube_far_corner(&self) -> Result<[f64; 3], Error> {
        match &self.cube_far_corner {
            None => Ok(scenario::COMPARISON_CUBE_CORNER),
            Some(v) => <[f64; 3]>::try_from(v.as_slice())
                .map_err(|_| Error::InvalidInput("cube_far_corner needs three values".into())),
        }
    }

    fn safety(&self) -> Result<SafetyParams, Error> {
        let d = SafetyParams::default();
        SafetyParams::new(
            self.r_col.unwrap_or(d.r_col),
            self.sf.unwrap_or(d.sf),
            self.lambda.unwrap_or(d.lambda),
        )
    }

    fn limits(&self) -> Result<KinematicLimits, Error> {
        let d = KinematicLimits::default();
        KinematicLimits::new(
            self.a_max.unwrap_or(d.a_max),
            self.v_max.unwrap_or(d.v_max),
            self.d_max.unwrap_or(d.d_max),
        )
    }

    fn spacing_metric(&self) -> SpacingMetric {
        match self.spacing_metric {
            Some(Metric::Chebyshev) => SpacingMetric::Chebyshev,
            _ => SpacingMetric::Euclidean,
        }
    }

    fn scenario_config(&self) -> Result<ScenarioConfig, Error> {
        let d = ScenarioConfig::default();
        Ok(ScenarioConfig {
            n: self.n.unwrap_or(d.n),
            delta: self.delta_mode()?,
            safety: self.safety()?,
            limits: self.limits()?,
            min_spacing: self.min_spacing.unwrap_or(d.min_spacing),
            spacing_metric: self.spacing_metric(),
            cube_far_corner: self.cube_far_corner()?,
            seed: self.seed.unwrap_or(d.seed),
        })
    }

    fn search(&self) -> Result<SearchParams, Error> {
        let d = SearchParams::default();
        let p = SearchParams {
            dt_step: self.dt_step.unwrap_or(d.dt_step),
            t_sample: self.t_sample.unwrap_or(d.t_sample),
            refine_tol: self.refine_tol.unwrap_or(d.refine_tol),
            expansion_cap: self.expansion_cap.unwrap_or(d.expansion_cap),
        };
        p.validate()?;
        Ok(p)
    }

    fn resolution(&self) -> f64 {
        self.resolution.unwrap_or(DEFAULT_RESOLUTION)
    }

    fn campaign(&self, output_dir: Option<PathBuf>) -> Result<CampaignSpec, Error> {
        let d = CampaignSpec::default();
        let spec = CampaignSpec {
            drone_counts: self.counts.clone().unwrap_or(d.drone_counts),
            replications: self.replications.unwrap_or(d.replications),
            delta_mode: self.delta_mode()?,
            cube_far_corner: self.cube_far_corner()?,
            base_seed: self.base_seed.unwrap_or(d.base_seed),
            output_dir,
            search: self.search()?,
            safety: self.safety()?,
            limits: self.limits()?,
            min_spacing: self.min_spacing.unwrap_or(d.min_spacing),
            spacing_metric: self.spacing_metric(),
            verify_resolution: self.resolution(),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn load_or_generate(&self, file: Option<&Path>) -> Result<Scenario, Error> {
        match file {
            Some(path) => Scenario::load(path),
            None => scenario::generate(&self.scenario_config()?),
        }
    }
}

fn read_config(path: Option<&Path>) -> Result<Settings, Error> {
    let Some(path) = path else {
        return Ok(Settings::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn out_dir(dir: Option<PathBuf>) -> Result<PathBuf, Error> {
    let dir = dir.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn metrics_csv(m: &RunMetrics) -> String {
    format!(
        "schema_version,seed,n,delta,flock_time,mean_delay,max_delay,overhead_time_pct,overhead_distance_pct,calc_time,min_distance,collision_free\n\
         1,{},{},{},{},{},{},{},{},{},{},{}\n",
        m.seed,
        m.n,
        m.delta,
        m.flock_time,
        m.mean_delay,
        m.max_delay,
        m.overhead_time_pct,
        m.overhead_distance_pct,
        m.calc_time,
        m.min_distance,
        m.collision_free
    )
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let file = read_config(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(settings) => {
            let settings = settings.merged_with(&file);
            let s = scenario::generate(&settings.scenario_config()?)?;
            let dir = out_dir(cli.output_dir)?;
            let path = dir.join("scenario.json");
            s.save(&path)?;
            println!("wrote {} drones to {}", s.n(), path.display());
        }
        Command::Schedule {
            scenario,
            dump,
            settings,
        } => {
            let settings = settings.merged_with(&file);
            let s = settings.load_or_generate(scenario.as_deref())?;
            let result = campaign::run_once(&s, &settings.search()?, settings.resolution())?;
            let dir = out_dir(cli.output_dir)?;
            if scenario.is_none() {
                s.save(&dir.join("scenario.json"))?;
            }
            result.schedule.save(&dir.join("schedule.json"))?;
            write_text(&dir.join("metrics.csv"), &metrics_csv(&result.metrics))?;
            if dump {
                result.tables.write_csv(&dir.join("matrices"))?;
                let trace: Vec<String> = result
                    .trace
                    .iter()
                    .map(serde_json::to_string)
                    .collect::<Result<_, _>>()?;
                write_text(&dir.join("priority_trace.jsonl"), &(trace.join("\n") + "\n"))?;
            }
            let m = &result.metrics;
            println!(
                "n={} flock_time={:.3}s mean_delay={:.3}s max_delay={:.3}s T_OH={:.3}% min_distance={:.3}m collision_free={}",
                m.n, m.flock_time, m.mean_delay, m.max_delay, m.overhead_time_pct, m.min_distance, m.collision_free
            );
            if !m.collision_free {
                return Ok(ExitCode::from(EXIT_COLLISION));
            }
        }
        Command::Verify {
            scenario,
            schedule,
            settings,
        } => {
            let settings = settings.merged_with(&file);
            let s = Scenario::load(&scenario)?;
            let sched = Schedule::load(&schedule)?;
            let report = verify::verify(&s.paths, &sched, s.config.safety.r_col, settings.resolution())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.collision_free {
                return Ok(ExitCode::from(EXIT_COLLISION));
            }
        }
        Command::Campaign(settings) => {
            let settings = settings.merged_with(&file);
            let spec = settings.campaign(Some(out_dir(cli.output_dir)?))?;
            let report = campaign::run_campaign(&spec)?;
            print!("{report}");
        }
        Command::DumpMatrices { scenario, settings } => {
            let settings = settings.merged_with(&file);
            let s = settings.load_or_generate(scenario.as_deref())?;
            let tables = build_tables(&s.paths, s.config.safety)?;
            let dir = out_dir(cli.output_dir)?;
            tables.write_csv(&dir)?;
            print!("{tables}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::CycleDetected { .. } => ExitCode::from(EXIT_CYCLE),
                Error::InfeasiblePair { .. } => ExitCode::from(EXIT_INFEASIBLE),
                _ => ExitCode::from(EXIT_FAILURE),
            }
        }
    }
}
