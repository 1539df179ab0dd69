//! JSON configuration documents and the problems they describe.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use geoplan::env::{
    load_map, make_corridor_map, make_doorway_map, ArmWorld, CorridorParams, DoorwayParams, Environment, FreeSpace,
    GridMap, Se2World,
};
use geoplan::geodesy::GeodesicSolveConfig;
use geoplan::metrics::{BarrierMetric, BarrierParams, Se2Weights, StereographicSphereMetric, TwoLinkParams};
use geoplan::planner::PlannerSettings;
use geoplan::{Configuration, Manifold, Retraction};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ManifoldSpec {
    Euclidean {
        dim: usize,
    },
    Constant {
        metric: Vec<Vec<f64>>,
    },
    TwoLink {
        #[serde(default)]
        params: TwoLinkParams,
    },
    Se2 {
        weights: [f64; 3],
        #[serde(default = "default_se2_retraction")]
        retraction: Retraction,
    },
    Sphere {
        dim: usize,
        radius: f64,
    },
}

fn default_se2_retraction() -> Retraction {
    Retraction::Se2Exponential
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<Manifold> {
        Ok(match self {
            Self::Euclidean { dim } => {
                if *dim == 0 {
                    return Err(BenchError::Config("euclidean dim must be positive".into()));
                }
                Manifold::euclidean(*dim)
            }
            Self::Constant { metric } => {
                let n = metric.len();
                if n == 0 || metric.iter().any(|r| r.len() != n) {
                    return Err(BenchError::Config("constant metric must be a nonempty square matrix".into()));
                }
                let flat: Vec<f64> = metric.iter().flatten().copied().collect();
                Manifold::constant(DMatrix::from_row_slice(n, n, &flat))?
            }
            Self::TwoLink { params } => Manifold::two_link(*params)?,
            Self::Se2 { weights, retraction } => {
                Manifold::se2(Se2Weights::new(weights[0], weights[1], weights[2]), *retraction)?
            }
            Self::Sphere { dim, radius } => {
                Manifold::euclidean(*dim).with_metric(Arc::new(StereographicSphereMetric::new(*dim, *radius)?))?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvironmentSpec {
    Free {
        bounds: Vec<[f64; 2]>,
    },
    Arm(ArmWorld),
    Doorway {
        #[serde(default)]
        params: DoorwayParams,
        robot_radius: f64,
    },
    Corridor {
        #[serde(default)]
        params: CorridorParams,
        robot_radius: f64,
    },
    /// ASCII map file, relative to the config file's directory.
    MapFile {
        path: PathBuf,
        robot_radius: f64,
    },
}

/// A collision world, with the occupancy grid kept for barrier metrics.
#[derive(Debug, Clone)]
pub struct World {
    pub env: Arc<dyn Environment>,
    pub grid: Option<Arc<GridMap>>,
}

impl EnvironmentSpec {
    pub fn build(&self, base_dir: &Path) -> Result<World> {
        let se2 = |map: GridMap, robot_radius: f64| -> Result<World> {
            if !(robot_radius >= 0.0) {
                return Err(BenchError::Config("robot_radius must be nonnegative".into()));
            }
            let map = Arc::new(map);
            Ok(World { env: Arc::new(Se2World { map: map.clone(), robot_radius }), grid: Some(map) })
        };
        match self {
            Self::Free { bounds } => {
                if bounds.iter().any(|[lo, hi]| !(lo < hi)) {
                    return Err(BenchError::Config("free-space bounds must satisfy lo < hi".into()));
                }
                Ok(World { env: Arc::new(FreeSpace { bounds: bounds.clone() }), grid: None })
            }
            Self::Arm(w) => {
                w.validate()?;
                Ok(World { env: Arc::new(w.clone()), grid: None })
            }
            Self::Doorway { params, robot_radius } => se2(make_doorway_map(params), *robot_radius),
            Self::Corridor { params, robot_radius } => se2(make_corridor_map(params), *robot_radius),
            Self::MapFile { path, robot_radius } => {
                let map = load_map(base_dir.join(path)).map_err(|e| BenchError::Config(e.to_string()))?;
                se2(map, *robot_radius)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Riemannian,
    EuclideanBaseline,
    Variational,
    Bvp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Riemannian => "riemannian",
            Self::EuclideanBaseline => "euclidean-baseline",
            Self::Variational => "variational",
            Self::Bvp => "bvp",
        }
    }

    pub fn is_sampling(self) -> bool {
        matches!(self, Self::Riemannian | Self::EuclideanBaseline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub manifold: ManifoldSpec,
    pub environment: EnvironmentSpec,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
}

/// A built problem: manifold, world and endpoints.
#[derive(Debug, Clone)]
pub struct Problem {
    pub manifold: Manifold,
    pub world: World,
    pub start: Configuration,
    pub goal: Configuration,
}

impl ProblemSpec {
    pub fn build(&self, base_dir: &Path) -> Result<Problem> {
        let manifold = self.manifold.build()?;
        let world = self.environment.build(base_dir)?;
        if world.env.bounds().len() != manifold.dim() {
            return Err(BenchError::Config(format!(
                "environment has {} coordinates but the manifold has {}",
                world.env.bounds().len(),
                manifold.dim()
            )));
        }
        let start = manifold.configuration(&self.start)?;
        let goal = manifold.configuration(&self.goal)?;
        Ok(Problem { manifold, world, start, goal })
    }
}

/// Random restarts for the variational method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestartSpec {
    pub count: usize,
    /// Per-coordinate bump amplitude; 0.3 per coordinate when unset.
    pub sigma: Option<Vec<f64>>,
}

impl Default for RestartSpec {
    fn default() -> Self {
        Self { count: 8, sigma: None }
    }
}

/// Settings shared by every method on a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSettings {
    pub planner: PlannerSettings,
    pub variational: GeodesicSolveConfig,
    pub bvp: GeodesicSolveConfig,
    pub restarts: RestartSpec,
    /// Clearance barrier applied to the metric for the geodesic solvers on
    /// occupancy grids.
    pub barrier: Option<BarrierParams>,
}

impl Default for MethodSettings {
    fn default() -> Self {
        Self {
            planner: PlannerSettings::default(),
            variational: GeodesicSolveConfig::variational(),
            bvp: GeodesicSolveConfig::bvp(),
            restarts: RestartSpec::default(),
            barrier: None,
        }
    }
}

impl MethodSettings {
    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        self.variational.validate()?;
        self.bvp.validate()?;
        if self.restarts.count == 0 {
            return Err(BenchError::Config("restarts.count must be positive".into()));
        }
        if let Some(b) = &self.barrier {
            b.validate()?;
        }
        Ok(())
    }

    /// The metric the geodesic solvers see: the problem's, reshaped by the
    /// barrier when one is configured and the world is a grid.
    pub fn solver_manifold(&self, p: &Problem) -> Result<Manifold> {
        match (&self.barrier, &p.world.grid) {
            (Some(b), Some(grid)) => Ok(p.manifold.with_metric(Arc::new(BarrierMetric::new(
                p.manifold.metric_field().clone(),
                grid.clone(),
                *b,
            )?))?),
            _ => Ok(p.manifold.clone()),
        }
    }

    pub fn restart_sigma(&self, dim: usize) -> Result<Vec<f64>> {
        match &self.restarts.sigma {
            Some(s) if s.len() == dim => Ok(s.clone()),
            Some(s) => Err(BenchError::Config(format!("restarts.sigma has {} entries, expected {dim}", s.len()))),
            None => Ok(vec![0.3; dim]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierSpec {
    pub trials: usize,
    pub runs: usize,
    /// Iteration budget per sampling-based run.
    pub max_iterations: usize,
    /// Wall-clock budget per run in seconds. Results are reproducible only
    /// when unset.
    #[serde(default)]
    pub time_limit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tiers {
    pub smoke: TierSpec,
    pub full: TierSpec,
}

impl Default for Tiers {
    fn default() -> Self {
        Self {
            smoke: TierSpec { trials: 5, runs: 3, max_iterations: 1000, time_limit: None },
            full: TierSpec { trials: 50, runs: 10, max_iterations: 20_000, time_limit: Some(60.0) },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    Smoke,
    Full,
}

impl Tiers {
    pub fn get(&self, t: Tier) -> TierSpec {
        match t {
            Tier::Smoke => self.smoke,
            Tier::Full => self.full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSeeds {
    pub perturbation: u64,
    pub runs: Vec<u64>,
}

/// Pre-assigned seeds: one perturbation seed and one seed per run for every
/// trial.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedManifest {
    pub trials: Vec<TrialSeeds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub name: String,
    pub problem: ProblemSpec,
    /// Gaussian standard deviation per coordinate applied to both endpoints.
    pub perturbation: Vec<f64>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub settings: MethodSettings,
    #[serde(default)]
    pub tiers: Tiers,
    /// Master seed from which a manifest is derived when none is given.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub seeds: Option<SeedManifest>,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(BenchError::Config("at least one method is required".into()));
        }
        if self.perturbation.len() != self.problem.start.len() || self.perturbation.iter().any(|s| !(*s >= 0.0)) {
            return Err(BenchError::Config("perturbation needs one nonnegative std per coordinate".into()));
        }
        for t in [self.tiers.smoke, self.tiers.full] {
            if t.trials == 0 || t.runs == 0 || t.max_iterations == 0 || t.time_limit.map_or(false, |x| !(x > 0.0)) {
                return Err(BenchError::Config("tier counts and budgets must be positive".into()));
            }
        }
        self.settings.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub name: String,
    pub manifold: ManifoldSpec,
    pub base_points: Vec<Vec<f64>>,
    /// One direction per base point; seeded Gaussian directions when unset.
    #[serde(default)]
    pub directions: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_hs")]
    pub hs: Vec<f64>,
    #[serde(default = "GeodesicSolveConfig::oracle")]
    pub oracle: GeodesicSolveConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_hs() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025, 0.0125]
}

impl ConvergeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_points.is_empty() || self.hs.len() < 2 || self.hs.iter().any(|h| !(*h > 0.0)) {
            return Err(BenchError::Config("need base points and at least two positive step sizes".into()));
        }
        if let Some(d) = &self.directions {
            if d.len() != self.base_points.len() {
                return Err(BenchError::Config("directions must match base_points one to one".into()));
            }
        }
        self.oracle.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub name: String,
    pub problem: ProblemSpec,
    pub method: Method,
    #[serde(default)]
    pub settings: MethodSettings,
    #[serde(default)]
    pub seed: u64,
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        self.settings.validate()
    }
}

/// Reads and parses a JSON document; every failure is a config error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
}

/// Directory against which relative paths in a config resolve.
pub fn base_dir(config_path: &Path) -> PathBuf {
    config_path.parent().map(Path::to_path_buf).unwrap_or_default()
}
