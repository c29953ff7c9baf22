//! Learning the virtual obstacle map and the propagation parameters from
//! labelled-by-position attenuation samples.

mod cluster;
mod fit;
mod init_map;
mod knn;
mod optim;

pub use cluster::{init_cluster, ClusterState, LOS_LABEL, NLOS_LABEL};
pub use fit::{fit_model, fit_model_with, mse_loss_and_grad, FitResult};
pub use init_map::{bce_loss_and_grad, init_obstacle_map, init_obstacle_map_from};
pub use knn::{knn_predict, knn_predict_many, KNN_DEFAULT_BANDWIDTH, KNN_DEFAULT_K};
pub use optim::Adam;

use crate::diffraction::VoglerConfig;
use crate::geometry::{GridSpec, Link, ObstacleMap};
use crate::propagation::{IndicatorMode, Measurement};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Name of the update rule recorded alongside fitted models.
pub const OPTIMIZER: &str = "adam(beta1=0.9,beta2=0.999,eps=1e-8)+global-norm-clip+box-clamp";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Height step scale in meters.
    pub learning_rate: f64,
    /// Factor applied to the height step scale after every epoch.
    pub lr_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub height_clamp_max: f64,
    /// Starting height for [`fit_model`] callers that have no initial map.
    pub init_height: f64,
    /// Stop when the relative loss improvement over one epoch drops below this.
    pub convergence_tol: f64,
    pub seed: u64,
    /// Consecutive loss increases tolerated before the fit aborts.
    pub patience: usize,
    /// Global-norm clip applied to every height gradient.
    pub grad_clip: f64,
    /// Rounds of the two-line clustering.
    pub cluster_rounds: usize,
    /// Epochs of the cross-entropy map initialization.
    pub init_epochs: usize,
    /// Learning rate of the cross-entropy map initialization.
    pub init_learning_rate: f64,
    /// Fit the linear scatter regressor alongside the path-loss parameters.
    pub fit_scatter: bool,
    /// Indicator used while fitting heights.
    pub fit_indicator: IndicatorMode,
    /// Indicator stored in the returned model for prediction.
    pub predict_indicator: IndicatorMode,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.3,
            lr_decay: 0.98,
            epochs: 150,
            batch_size: 512,
            height_clamp_max: 100.0,
            init_height: 0.0,
            convergence_tol: 1e-5,
            seed: 0,
            patience: 20,
            grad_clip: 1e3,
            cluster_rounds: 20,
            init_epochs: 300,
            init_learning_rate: 1.0,
            fit_scatter: false,
            fit_indicator: IndicatorMode::Soft,
            predict_indicator: IndicatorMode::Hard,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if !(self.init_learning_rate > 0.0 && self.init_learning_rate.is_finite()) {
            return bad(format!("init_learning_rate must be positive, got {}", self.init_learning_rate));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.height_clamp_max > 0.0 && self.height_clamp_max.is_finite()) {
            return bad(format!("height_clamp_max must be positive, got {}", self.height_clamp_max));
        }
        if !(0.0..=self.height_clamp_max).contains(&self.init_height) {
            return bad(format!("init_height must lie in [0, {}], got {}", self.height_clamp_max, self.init_height));
        }
        if !(self.convergence_tol >= 0.0) {
            return bad("convergence_tol must be nonnegative".into());
        }
        if !(self.grad_clip > 0.0) {
            return bad("grad_clip must be positive".into());
        }
        Ok(())
    }
}

/// Output of the full reconstruction pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub fit: FitResult,
    pub cluster: ClusterState,
    pub initial_map: ObstacleMap,
}

/// Clusters the samples into LOS and NLOS, initializes the heights from
/// those labels and then fits the full model.
pub fn reconstruct(data: &[Measurement], grid: &GridSpec, cfg: &FitConfig) -> Result<Reconstruction> {
    reconstruct_with(data, grid, cfg, &VoglerConfig::default(), crate::propagation::DEFAULT_ECCENTRICITY)
}

pub fn reconstruct_with(
    data: &[Measurement],
    grid: &GridSpec,
    cfg: &FitConfig,
    vogler: &VoglerConfig,
    eccentricity: f64,
) -> Result<Reconstruction> {
    cfg.validate()?;
    grid.validate()?;
    let cluster = init_cluster(data, cfg.cluster_rounds)?;
    let labeled: Vec<(Link, u8)> = data.iter().zip(&cluster.labels).map(|(m, l)| (m.link, *l)).collect();
    let initial_map = init_obstacle_map(&labeled, grid, cfg)?;
    let fit = fit_model_with(data, &initial_map, cfg, vogler, eccentricity)?;
    Ok(Reconstruction {
        fit,
        cluster,
        initial_map,
    })
}
