//! Run configuration, read from TOML or recovered from a run manifest.

use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use radiomap::diffraction::VoglerConfig;
use radiomap::propagation::{PathLossParams, SamplingConfig, DEFAULT_ECCENTRICITY};
use radiomap::reconstruction::FitConfig;
use radiomap::relay::{RelayQuery, SearchMode};
use radiomap::scene::SceneConfig;
use radiomap::Point3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream; see [`RunConfig::stream_seed`].
    pub seed: u64,
    pub eccentricity: f64,
    pub noise_sigma: f64,
    pub measurements: usize,
    pub scene: SceneConfig,
    pub sampling: SamplingConfig,
    pub path_loss: PathLossParams,
    pub vogler: VoglerConfig,
    pub fit: FitConfig,
    pub predict: PredictConfig,
    pub relay: RelayConfig,
    pub paths: Paths,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub tx: Point3,
    /// Height of the receiver lattice above ground.
    pub rx_height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelayConfig {
    pub p1: Point3,
    pub p2: Point3,
    pub z_min: f64,
    pub z_max: f64,
    /// Defaults to the grid cell size.
    pub step_vertical: Option<f64>,
    /// Defaults to the grid cell size.
    pub step_horizontal: Option<f64>,
    pub angle_step_deg: f64,
    pub fixed_altitude: f64,
    /// Also run an exhaustive scan for comparison.
    pub exhaustive: Option<SearchMode>,
}

/// Default file locations; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub map: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub fitted_map: Option<PathBuf>,
    pub grid: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub relay: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            eccentricity: DEFAULT_ECCENTRICITY,
            noise_sigma: 3.0,
            measurements: 50_000,
            scene: SceneConfig::default(),
            sampling: SamplingConfig::default(),
            path_loss: PathLossParams::default(),
            vogler: VoglerConfig::default(),
            fit: FitConfig::default(),
            predict: PredictConfig::default(),
            relay: RelayConfig::default(),
            paths: Paths::default(),
        }
    }
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            tx: Point3::new(160.0, 160.0, 100.0),
            rx_height: 1.5,
        }
    }
}

impl Default for RelayConfig {
    fn default() -> Self {
        Self {
            p1: Point3::new(60.0, 160.0, 1.5),
            p2: Point3::new(260.0, 160.0, 1.5),
            z_min: 10.0,
            z_max: 150.0,
            step_vertical: None,
            step_horizontal: None,
            angle_step_deg: 5.0,
            fixed_altitude: 50.0,
            exhaustive: None,
        }
    }
}

/// Independent random streams derived from the root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scene,
    Data,
    Fit,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: Manifest = crate::formats::parse_json(path, &text)?;
            return Ok(m.config);
        }
        Self::from_toml(path, &text)
    }

    pub fn from_toml(path: &Path, text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| crate::formats::line_col(text, s.start))
                .unwrap_or((1, 1));
            CliError::parse(path, line, column, e.message().to_string())
        })
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }

    pub fn stream_seed(&self, s: Stream) -> u64 {
        let tag = match s {
            Stream::Scene => 0u64,
            Stream::Data => 1,
            Stream::Fit => 2,
        };
        self.seed.wrapping_mul(3).wrapping_add(tag)
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            seed: self.stream_seed(Stream::Fit),
            ..self.fit
        }
    }

    pub fn relay_query(&self) -> CliResult<RelayQuery> {
        let grid = self.scene.grid()?;
        let r = &self.relay;
        let mut q = RelayQuery::new(r.p1, r.p2, &grid);
        q.z_min = r.z_min;
        q.z_max = r.z_max;
        q.step_vertical = r.step_vertical.unwrap_or(grid.cell_size);
        q.step_horizontal = r.step_horizontal.unwrap_or(grid.cell_size);
        q.angle_step_deg = r.angle_step_deg;
        q.fixed_altitude = r.fixed_altitude;
        q.validate()?;
        Ok(q)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        sha256_hex(json.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
