//! Joint reconstruction of a virtual obstacle map and a 6D radio map.
//!
//! The forward model blends a log-distance LOS term with multi-knife-edge
//! diffraction (Vogler) and a local-scatter term, switched by a grid-based
//! blockage indicator. The same model drives the synthetic data generator,
//! the gradient-based reconstruction and the relay placement search.

pub mod diffraction;
pub mod error;
pub mod geometry;
mod par;
pub mod propagation;
pub mod reconstruction;
pub mod relay;
pub mod scene;
pub mod stn;

pub use error::{Error, Result};
pub use geometry::{GridSpec, Link, ObstacleMap, Point2, Point3, Raster};
