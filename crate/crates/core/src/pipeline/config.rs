use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bev::{ProjectionConfig, ProjectionMode, DEFAULT_CELL_SIZE};
use crate::error::{Error, Result};
use crate::evaluation::Gate;
use crate::explorer::ExplorationConfig;
use crate::intersection::IntersectionConfig;
use crate::regressor::RegressionConfig;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "LANECARTO_SEED";

/// Input locations. Relative paths are taken from the config file's
/// directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub skeleton: PathBuf,
    pub poses: PathBuf,
    /// Pre-built semantic BEV raster; used when no frames are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bev: Option<PathBuf>,
    /// Directory of `NNNN.png` semantic frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<PathBuf>,
    /// Directory holding `cloud_NNNN.bin` scans, one per frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clouds: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: ProjectionMode,
    #[serde(default = "default_cell")]
    pub cell_size: f64,
    #[serde(default)]
    pub exploration: ExplorationConfig,
    #[serde(default)]
    pub regression: RegressionConfig,
    #[serde(default)]
    pub intersection: IntersectionConfig,
    #[serde(default)]
    pub projection: ProjectionConfig,
    #[serde(default)]
    pub gate: Gate,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_mode() -> ProjectionMode {
    ProjectionMode::Flat
}

fn default_cell() -> f64 {
    DEFAULT_CELL_SIZE
}

impl PipelineConfig {
    pub fn new(paths: PathsConfig) -> Self {
        PipelineConfig {
            paths,
            seed: 0,
            mode: ProjectionMode::Flat,
            cell_size: DEFAULT_CELL_SIZE,
            exploration: ExplorationConfig::default(),
            regression: RegressionConfig::default(),
            intersection: IntersectionConfig::default(),
            projection: ProjectionConfig::default(),
            gate: Gate::default(),
            base_dir: PathBuf::new(),
        }
    }

    /// Config for a generated bundle directory: frames when present (and
    /// `mode` decides how they are lifted), the raster otherwise.
    pub fn for_bundle(dir: &Path, mode: ProjectionMode) -> Self {
        let frames = dir.join("frames").is_dir();
        let mut cfg = PipelineConfig::new(PathsConfig {
            skeleton: "skeleton.json".into(),
            poses: "poses.csv".into(),
            bev: (!frames).then(|| "bev.png".into()),
            frames: frames.then(|| "frames".into()),
            camera: frames.then(|| "camera.txt".into()),
            clouds: (frames && mode == ProjectionMode::Mesh).then(|| ".".into()),
        });
        cfg.mode = mode;
        cfg.base_dir = dir.to_path_buf();
        cfg
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Validation(format!("config: {}", e.message())))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    /// Reads a config file and applies the seed override from the
    /// environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut cfg = PipelineConfig::parse(&text, &base)?;
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Validation(format!("{SEED_ENV}={v} is not an unsigned integer")))?;
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolved_paths(&self) -> PathsConfig {
        let r = |p: &PathBuf| self.base_dir.join(p);
        let p = &self.paths;
        PathsConfig {
            skeleton: r(&p.skeleton),
            poses: r(&p.poses),
            bev: p.bev.as_ref().map(r),
            frames: p.frames.as_ref().map(r),
            camera: p.camera.as_ref().map(r),
            clouds: p.clouds.as_ref().map(r),
        }
    }

    /// Checks settings and that every referenced path exists.
    pub fn validate(&self) -> Result<()> {
        self.exploration.validate()?;
        self.regression.validate()?;
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::Validation(format!("cell size {} must be positive", self.cell_size)));
        }
        let pr = &self.projection;
        if !(pr.near >= 0.0 && pr.far > pr.near && pr.lateral > 0.0 && pr.sync_tolerance >= 0.0) {
            return Err(Error::Validation(format!("invalid projection settings {pr:?}")));
        }
        let p = self.resolved_paths();
        if p.frames.is_none() && p.bev.is_none() {
            return Err(Error::Validation("config needs either `bev` or `frames`".into()));
        }
        if p.frames.is_some() && p.camera.is_none() {
            return Err(Error::Validation("frames require a `camera` file".into()));
        }
        if self.mode == ProjectionMode::Mesh && p.clouds.is_none() {
            return Err(Error::Validation("mesh mode requires `clouds`".into()));
        }
        let mut required = vec![&p.skeleton, &p.poses];
        required.extend(p.bev.iter().chain(&p.frames).chain(&p.camera).chain(&p.clouds));
        for path in required {
            if !path.exists() {
                return Err(Error::Validation(format!("{} does not exist", path.display())));
            }
        }
        Ok(())
    }
}
