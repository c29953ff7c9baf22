//! Procedural obstacle maps made of random rectangular blocks.

use crate::geometry::{GridSpec, ObstacleMap, Point2};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub origin: Point2,
    /// Target fraction of cells covered by blocks.
    pub density: f64,
    /// Block heights are drawn uniformly from this range, meters.
    pub height_range: (f64, f64),
    /// Block side lengths in cells, inclusive.
    pub block_cells: (usize, usize),
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            rows: 64,
            cols: 64,
            cell_size: 5.0,
            origin: Point2::new(0.0, 0.0),
            density: 0.2,
            height_range: (10.0, 60.0),
            block_cells: (2, 6),
        }
    }
}

impl SceneConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.rows, self.cols, self.cell_size, self.origin)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(0.0..=1.0).contains(&self.density) {
            return Err(Error::InvalidArgument(format!("density must lie in [0, 1], got {}", self.density)));
        }
        let (lo, hi) = self.height_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("height range [{lo}, {hi}] must be positive and ordered")));
        }
        let (a, b) = self.block_cells;
        if a == 0 || b < a {
            return Err(Error::InvalidArgument(format!("block size range [{a}, {b}] is invalid")));
        }
        Ok(())
    }
}

/// Drops blocks at uniform positions until the covered fraction reaches the
/// target density. Overlapping blocks keep the taller height.
pub fn generate_scene(cfg: &SceneConfig, seed: u64) -> Result<ObstacleMap> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut heights = vec![0.0; grid.len()];
    let target = (cfg.density * grid.len() as f64).round() as usize;
    let mut covered = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = cfg.height_range;
    let mut rounds = 0usize;
    while covered < target {
        rounds += 1;
        if rounds > 1_000_000 {
            return Err(Error::Degenerate("block placement did not reach the target density".into()));
        }
        let h = rng.random_range(lo..=hi);
        let w = rng.random_range(cfg.block_cells.0..=cfg.block_cells.1).min(cfg.rows);
        let l = rng.random_range(cfg.block_cells.0..=cfg.block_cells.1).min(cfg.cols);
        let r0 = rng.random_range(0..=cfg.rows - w);
        let c0 = rng.random_range(0..=cfg.cols - l);
        for r in r0..r0 + w {
            for c in c0..c0 + l {
                let v = &mut heights[grid.index(r, c)];
                if *v == 0.0 {
                    covered += 1;
                }
                *v = f64::max(*v, h);
            }
        }
    }
    ObstacleMap::new(grid, heights)
}
