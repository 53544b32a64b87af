//! Random flock scenarios.
//!
//! Starts lie on a 1 m grid in a ground square centred on the origin and
//! targets on a 1 m grid in an elevated cube. Both regions are sized from
//! the drone count and a density factor `δ`, the number of grid positions
//! available per drone.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collision::SafetyParams;
use crate::error::{Error, Result};
use crate::kinematics::{DronePath, KinematicLimits};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Far corner of the target cube for the small-flock comparison runs.
pub const COMPARISON_CUBE_CORNER: [f64; 3] = [200.0, 200.0, 200.0];
/// Far corner of the target cube for the large-flock runs.
pub const SCALABILITY_CUBE_CORNER: [f64; 3] = [500.0, 500.0, 500.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    Fixed(f64),
    /// `δ(n) = 1.06 · n^0.5329`
    Auto,
}

impl DeltaMode {
    pub fn value(self, n: usize) -> f64 {
        match self {
            DeltaMode::Fixed(d) => d,
            DeltaMode::Auto => density(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacingMetric {
    Euclidean,
    /// Max-norm; with 2 m spacing this rules out exactly the grid neighbours.
    Chebyshev,
}

impl SpacingMetric {
    pub fn distance(self, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
        let d = a - b;
        match self {
            SpacingMetric::Euclidean => d.norm(),
            SpacingMetric::Chebyshev => d.amax(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n: usize,
    pub delta: DeltaMode,
    pub safety: SafetyParams,
    pub limits: KinematicLimits,
    pub min_spacing: f64,
    pub spacing_metric: SpacingMetric,
    pub cube_far_corner: [f64; 3],
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 10,
            delta: DeltaMode::Fixed(10.0),
            safety: SafetyParams::default(),
            limits: KinematicLimits::default(),
            min_spacing: 2.0,
            spacing_metric: SpacingMetric::Euclidean,
            cube_far_corner: COMPARISON_CUBE_CORNER,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        let delta = self.delta_value();
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
        }
        if !(self.min_spacing.is_finite() && self.min_spacing > 0.0) {
            return Err(Error::InvalidInput(format!(
                "min_spacing must be positive, got {}",
                self.min_spacing
            )));
        }
        if self.cube_far_corner.iter().any(|c| c.fract() != 0.0 || !c.is_finite()) {
            return Err(Error::InvalidInput(
                "cube_far_corner must have integral coordinates".into(),
            ));
        }
        self.safety.validate()?;
        self.limits.validate()
    }

    pub fn delta_value(&self) -> f64 {
        self.delta.value(self.n)
    }
}

/// `⌈√(n·δ)⌉`
pub fn square_side(n: usize, delta: f64) -> u64 {
    (n as f64 * delta).sqrt().ceil() as u64
}

/// `⌈∛(3·n·δ)⌉`
pub fn cube_side(n: usize, delta: f64) -> u64 {
    (3.0 * n as f64 * delta).cbrt().ceil() as u64
}

pub fn density(n: usize) -> f64 {
    1.06 * (n as f64).powf(0.5329)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub paths: Vec<DronePath>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    schema_version: u32,
    config: ScenarioConfig,
    starts: Vec<[f64; 3]>,
    targets: Vec<[f64; 3]>,
}

impl Scenario {
    /// Build a scenario from explicit endpoints, checking spacing.
    pub fn from_points(
        config: ScenarioConfig,
        starts: &[Point3<f64>],
        targets: &[Point3<f64>],
    ) -> Result<Self> {
        if starts.len() != targets.len() {
            return Err(Error::InvalidInput(format!(
                "{} starts but {} targets",
                starts.len(),
                targets.len()
            )));
        }
        if starts.is_empty() {
            return Err(Error::InvalidInput("scenario has no drones".into()));
        }
        if starts.iter().chain(targets).any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput("coordinates must be finite".into()));
        }
        let config = ScenarioConfig {
            n: starts.len(),
            ..config
        };
        config.validate()?;
        for (label, points) in [("start", starts), ("target", targets)] {
            if let Some((i, j)) = spacing_violation(points, config.min_spacing, config.spacing_metric) {
                return Err(Error::InvalidInput(format!(
                    "{label} positions of drones {i} and {j} are closer than {} m",
                    config.min_spacing
                )));
            }
        }
        let paths = starts
            .iter()
            .zip(targets)
            .map(|(&s, &t)| DronePath::new(s, t, config.limits))
            .collect();
        Ok(Self { config, paths })
    }

    pub fn n(&self) -> usize {
        self.paths.len()
    }

    pub fn starts(&self) -> Vec<Point3<f64>> {
        self.paths.iter().map(|p| p.start).collect()
    }

    pub fn targets(&self) -> Vec<Point3<f64>> {
        self.paths.iter().map(|p| p.target).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ScenarioFile {
            schema_version: SCENARIO_SCHEMA_VERSION,
            config: self.config,
            starts: self.paths.iter().map(|p| p.start.coords.into()).collect(),
            targets: self.paths.iter().map(|p| p.target.coords.into()).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        if file.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported scenario schema_version {}",
                file.schema_version
            )));
        }
        let starts: Vec<Point3<f64>> = file.starts.iter().map(|&c| Point3::from(c)).collect();
        let targets: Vec<Point3<f64>> = file.targets.iter().map(|&c| Point3::from(c)).collect();
        Self::from_points(file.config, &starts, &targets)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn spacing_violation(
    points: &[Point3<f64>],
    min_spacing: f64,
    metric: SpacingMetric,
) -> Option<(usize, usize)> {
    (0..points.len()).find_map(|i| {
        (i + 1..points.len())
            .find(|&j| metric.distance(&points[i], &points[j]) < min_spacing)
            .map(|j| (i, j))
    })
}

/// Rejection sampler over an axis-aligned integer box.
struct GridSampler {
    lo: [i64; 3],
    hi: [i64; 3],
    min_spacing: f64,
    metric: SpacingMetric,
    /// Grid offsets that lie closer than the spacing.
    forbidden: Vec<[i64; 3]>,
    taken: HashSet<[i64; 3]>,
}

impl GridSampler {
    fn new(lo: [i64; 3], hi: [i64; 3], min_spacing: f64, metric: SpacingMetric) -> Self {
        let r = min_spacing.ceil() as i64;
        let span = |axis: usize| if lo[axis] == hi[axis] { 0 } else { r };
        let mut forbidden = Vec::new();
        for dx in -span(0)..=span(0) {
            for dy in -span(1)..=span(1) {
                for dz in -span(2)..=span(2) {
                    let off = Point3::new(dx as f64, dy as f64, dz as f64);
                    if metric.distance(&off, &Point3::origin()) < min_spacing {
                        forbidden.push([dx, dy, dz]);
                    }
                }
            }
        }
        Self {
            lo,
            hi,
            min_spacing,
            metric,
            forbidden,
            taken: HashSet::new(),
        }
    }

    fn capacity(&self) -> f64 {
        (0..3).map(|a| (self.hi[a] - self.lo[a] + 1) as f64).product()
    }

    fn try_place(&mut self, rng: &mut impl Rng) -> Option<[i64; 3]> {
        let c = [
            rng.gen_range(self.lo[0]..=self.hi[0]),
            rng.gen_range(self.lo[1]..=self.hi[1]),
            rng.gen_range(self.lo[2]..=self.hi[2]),
        ];
        let clash = self.forbidden.iter().any(|o| {
            self.taken
                .contains(&[c[0] + o[0], c[1] + o[1], c[2] + o[2]])
        });
        if clash {
            return None;
        }
        self.taken.insert(c);
        Some(c)
    }

    fn sample(&mut self, n: usize, rng: &mut impl Rng) -> Result<Vec<Point3<f64>>> {
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0usize;
        let cap = 1000 * n;
        while out.len() < n {
            if attempts >= cap {
                return Err(Error::Generation {
                    placed: out.len(),
                    requested: n,
                    fill_ratio: out.len() as f64 / self.capacity(),
                });
            }
            attempts += 1;
            if let Some(c) = self.try_place(rng) {
                out.push(Point3::new(c[0] as f64, c[1] as f64, c[2] as f64));
            }
        }
        debug_assert!(spacing_violation(&out, self.min_spacing, self.metric).is_none());
        Ok(out)
    }
}

/// Draw a random scenario. Starts are drawn before targets from a single
/// ChaCha8 stream seeded with `config.seed`.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let n = config.n;
    let delta = config.delta_value();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let l_sq = square_side(n, delta) as i64;
    let half = l_sq / 2;
    let mut ground = GridSampler::new(
        [-half, -half, 0],
        [l_sq - half, l_sq - half, 0],
        config.min_spacing,
        config.spacing_metric,
    );
    let starts = ground.sample(n, &mut rng)?;

    let l_cu = cube_side(n, delta) as i64;
    let far = config.cube_far_corner.map(|c| c as i64);
    let mut cube = GridSampler::new(
        far.map(|c| c - l_cu),
        far,
        config.min_spacing,
        config.spacing_metric,
    );
    let targets = cube.sample(n, &mut rng)?;

    Scenario::from_points(*config, &starts, &targets)
}
