//! Multiple knife-edge diffraction: complex error function numerics, the
//! Vogler series and an independent quadrature check.

mod erfc;
mod quadrature;
mod repeated;
mod vogler;

pub use erfc::{erfc_complex, erfcx, erfcx_complex, faddeeva};
pub use quadrature::quadrature_oracle;
pub use repeated::{ierfc_table, repeated_erfc_integral, MAX_ORDER};
pub use vogler::{vogler_attenuation, vogler_with_gradient};

use crate::geometry::{extract_diffraction_path, DiffractionPath, Link, ObstacleMap};
use crate::propagation::PathLossParams;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Speed of light over the default 5.9 GHz carrier.
pub const DEFAULT_WAVELENGTH: f64 = 299_792_458.0 / 5.9e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VoglerConfig {
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Relative size below which trailing series terms are dropped.
    pub series_tolerance: f64,
    pub max_series_terms: usize,
    /// Above this many edges the product of single-edge factors is used.
    pub max_edges_exact: usize,
}

impl Default for VoglerConfig {
    fn default() -> Self {
        Self {
            wavelength: DEFAULT_WAVELENGTH,
            series_tolerance: 1e-8,
            max_series_terms: 64,
            max_edges_exact: 8,
        }
    }
}

impl VoglerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::InvalidArgument(format!("wavelength must be positive, got {}", self.wavelength)));
        }
        if !(self.series_tolerance > 0.0 && self.series_tolerance < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "series_tolerance must lie in (0, 1), got {}",
                self.series_tolerance
            )));
        }
        if self.max_series_terms < 1 || self.max_series_terms > MAX_ORDER {
            return Err(Error::InvalidArgument(format!(
                "max_series_terms must lie in [1, {MAX_ORDER}], got {}",
                self.max_series_terms
            )));
        }
        if self.max_edges_exact < 1 {
            return Err(Error::InvalidArgument("max_edges_exact must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoglerMethod {
    /// Full series (or the closed form for a single edge).
    Exact,
    /// Product of independent single-edge factors.
    Pairwise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoglerResult {
    pub f: Complex64,
    /// `−20 log10 |F|`.
    pub excess_loss_db: f64,
    pub terms_used: usize,
    pub converged: bool,
    pub method: VoglerMethod,
}

/// Diffraction loss together with the pieces it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffractionLoss {
    pub total_db: f64,
    pub curve_length: f64,
    pub path: DiffractionPath,
    pub vogler: VoglerResult,
}

/// Log-distance loss along the diffraction curve plus the knife-edge excess.
pub fn diffraction_loss_db(link: &Link, h: &ObstacleMap, params: &PathLossParams, cfg: &VoglerConfig) -> Result<f64> {
    Ok(diffraction_breakdown(link, h, params, cfg)?.total_db)
}

pub fn diffraction_breakdown(
    link: &Link,
    h: &ObstacleMap,
    params: &PathLossParams,
    cfg: &VoglerConfig,
) -> Result<DiffractionLoss> {
    let path = extract_diffraction_path(link, h)?;
    loss_for_path(path, params, cfg)
}

pub(crate) fn loss_for_path(path: DiffractionPath, params: &PathLossParams, cfg: &VoglerConfig) -> Result<DiffractionLoss> {
    let vogler = vogler_attenuation(&path, cfg)?;
    let curve_length = path.curve_length();
    Ok(DiffractionLoss {
        total_db: params.at_distance(curve_length) + vogler.excess_loss_db,
        curve_length,
        path,
        vogler,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GridSpec, Point2, Point3};

    fn params() -> PathLossParams {
        PathLossParams {
            intercept_db: 30.0,
            slope_db_per_decade: 22.0,
        }
    }

    fn scene() -> (ObstacleMap, Link) {
        let g = GridSpec::new(1, 41, 1.0, Point2::new(-0.5, -0.5)).unwrap();
        let l = Link::new(Point3::new(0.0, 0.0, 30.0), Point3::new(0.0, 40.0, 1.5)).unwrap();
        (ObstacleMap::flat(g, 0.0).unwrap(), l)
    }

    #[test]
    fn grazing_obstacle_adds_six_db() {
        let (mut h, l) = scene();
        h.set_height(0, 20, l.altitude_at(20.0));
        let loss = diffraction_breakdown(&l, &h, &params(), &VoglerConfig::default()).unwrap();
        let want = params().at_distance(loss.curve_length) + 20.0 * 2f64.log10();
        assert!((loss.total_db - want).abs() < 1e-9);
        assert!((loss.curve_length - l.distance()).abs() < 1e-9);
    }

    #[test]
    fn loss_grows_with_obstacle_height() {
        let (mut h, l) = scene();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..40 {
            h.set_height(0, 20, l.altitude_at(20.0) + 0.5 * k as f64);
            let v = diffraction_loss_db(&l, &h, &params(), &VoglerConfig::default()).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn two_edges_compose() {
        let (mut h, l) = scene();
        h.set_height(0, 10, 30.0);
        h.set_height(0, 30, 22.0);
        let cfg = VoglerConfig::default();
        let path = extract_diffraction_path(&l, &h).unwrap();
        assert_eq!(path.edges(), 2);
        let v = vogler_attenuation(&path, &cfg).unwrap();
        let want = params().at_distance(path.curve_length()) + v.excess_loss_db;
        assert_eq!(diffraction_loss_db(&l, &h, &params(), &cfg).unwrap(), want);
    }

    #[test]
    fn los_link_is_rejected() {
        let (h, l) = scene();
        assert!(diffraction_loss_db(&l, &h, &params(), &VoglerConfig::default()).is_err());
    }
}
