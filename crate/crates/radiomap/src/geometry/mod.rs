//! Gridded virtual environment, ray-grid traversal, area focusing and
//! knife-edge vertex extraction.

pub(crate) mod features;
pub(crate) mod path;
mod trace;

pub use features::{
    ellipse_mask, focus_ellipse, focus_line, hard_los, line_feature, soft_los_indicator,
    EllipseMask, LineFeature,
};
pub use path::{extract_diffraction_path, DiffractionPath, PathVertex};
pub use trace::{trace_cells, CellTrace, TracedCell};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn ground(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn dist(self, o: Point3) -> f64 {
        let (dx, dy, dz) = (self.x - o.x, self.y - o.y, self.z - o.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Regular grid over the ground plane. Rows run along world `x`, columns
/// along world `y`; cell `(r, c)` covers
/// `[x0 + r·cs, x0 + (r+1)·cs] × [y0 + c·cs, y0 + (c+1)·cs]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub origin: Point2,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, cell_size: f64, origin: Point2) -> Result<Self> {
        let g = Self {
            rows,
            cols,
            cell_size,
            origin,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidArgument("grid must have at least one row and column".into()));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::InvalidArgument(format!("cell_size must be positive, got {}", self.cell_size)));
        }
        if !(self.origin.x.is_finite() && self.origin.y.is_finite()) {
            return Err(Error::InvalidArgument("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Point2 {
        Point2::new(
            self.origin.x + (row as f64 + 0.5) * self.cell_size,
            self.origin.y + (col as f64 + 0.5) * self.cell_size,
        )
    }

    /// Continuous grid coordinates (cell units, corner of cell (0,0) at 0).
    pub fn to_grid(&self, p: Point2) -> Point2 {
        Point2::new(
            (p.x - self.origin.x) / self.cell_size,
            (p.y - self.origin.y) / self.cell_size,
        )
    }

    pub fn from_grid(&self, g: Point2) -> Point2 {
        Point2::new(
            self.origin.x + g.x * self.cell_size,
            self.origin.y + g.y * self.cell_size,
        )
    }

    /// World-space extent `(min, max)` of the grid.
    pub fn extent(&self) -> (Point2, Point2) {
        (
            self.origin,
            Point2::new(
                self.origin.x + self.rows as f64 * self.cell_size,
                self.origin.y + self.cols as f64 * self.cell_size,
            ),
        )
    }

    pub fn center(&self) -> Point2 {
        let (lo, hi) = self.extent();
        Point2::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y))
    }

    /// Cell containing `p` (half-open cells), if any.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let g = self.to_grid(p);
        if g.x < 0.0 || g.y < 0.0 {
            return None;
        }
        let (r, c) = (g.x.floor() as usize, g.y.floor() as usize);
        (r < self.rows && c < self.cols).then_some((r, c))
    }
}

/// Dense row-major `rows × cols` array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "raster of {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.cols + col] = v;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn ensure_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape,
                found: self.shape(),
            });
        }
        Ok(())
    }
}

/// Grid of nonnegative virtual-obstacle heights in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleMap {
    grid: GridSpec,
    heights: Raster,
}

impl ObstacleMap {
    pub fn new(grid: GridSpec, heights: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        let heights = Raster::from_vec(grid.rows, grid.cols, heights)?;
        if let Some(bad) = heights.data.iter().position(|h| !(h.is_finite() && *h >= 0.0)) {
            let (r, c) = grid.row_col(bad);
            return Err(Error::InvalidArgument(format!(
                "height at ({r}, {c}) must be finite and nonnegative, got {}",
                heights.data[bad]
            )));
        }
        Ok(Self { grid, heights })
    }

    pub fn flat(grid: GridSpec, height: f64) -> Result<Self> {
        Self::new(grid, vec![height; grid.len()])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn heights(&self) -> &Raster {
        &self.heights
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.heights.data
    }

    #[inline]
    pub fn height(&self, row: usize, col: usize) -> f64 {
        self.heights.get(row, col)
    }

    #[inline]
    pub fn height_at(&self, index: usize) -> f64 {
        self.heights.data[index]
    }

    /// Sets one height; the value is clamped to be nonnegative.
    pub fn set_height(&mut self, row: usize, col: usize, h: f64) {
        self.heights.set(row, col, h.max(0.0));
    }

    /// Replaces all heights, clamping each into `[0, max]`.
    pub(crate) fn assign_clamped(&mut self, values: &[f64], max: f64) {
        for (h, v) in self.heights.data.iter_mut().zip(values) {
            *h = v.clamp(0.0, max);
        }
    }

    pub fn into_heights(self) -> Vec<f64> {
        self.heights.data
    }
}

/// TX/RX position pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub tx: Point3,
    pub rx: Point3,
}

impl Link {
    pub fn new(tx: Point3, rx: Point3) -> Result<Self> {
        let l = Self { tx, rx };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.tx.x, self.tx.y, self.tx.z, self.rx.x, self.rx.y, self.rx.z];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("link coordinates must be finite".into()));
        }
        if self.tx.z < 0.0 || self.rx.z < 0.0 {
            return Err(Error::InvalidArgument("link altitudes must be nonnegative".into()));
        }
        if self.ground_distance() == 0.0 {
            return Err(Error::InvalidArgument("TX and RX ground projections coincide".into()));
        }
        Ok(())
    }

    pub fn ground_distance(&self) -> f64 {
        self.tx.ground().dist(self.rx.ground())
    }

    pub fn distance(&self) -> f64 {
        self.tx.dist(self.rx)
    }

    /// Line altitude at ground distance `s` from the TX.
    #[inline]
    pub fn altitude_at(&self, s: f64) -> f64 {
        let d0 = self.ground_distance();
        self.tx.z + (self.rx.z - self.tx.z) * (s / d0)
    }

    pub fn reversed(&self) -> Link {
        Link {
            tx: self.rx,
            rx: self.tx,
        }
    }
}

/// Profile distance of a ground point: its projection onto the TX–RX ground
/// segment, measured from the TX and kept strictly inside the segment.
///
/// The margin keeps cells that straddle an endpoint from collapsing onto the
/// endpoint itself, which would give zero-length diffraction segments.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Profile {
    pub origin: Point2,
    pub dir: Point2,
    pub d0: f64,
    pub margin: f64,
}

impl Profile {
    pub fn new(link: &Link, grid: &GridSpec) -> Self {
        let (a, b) = (link.tx.ground(), link.rx.ground());
        let d0 = a.dist(b);
        Self {
            origin: a,
            dir: Point2::new((b.x - a.x) / d0, (b.y - a.y) / d0),
            d0,
            margin: 0.25 * grid.cell_size.min(d0),
        }
    }

    #[inline]
    pub fn project(&self, p: Point2) -> f64 {
        (p.x - self.origin.x) * self.dir.x + (p.y - self.origin.y) * self.dir.y
    }

    #[inline]
    pub fn clamp(&self, s: f64) -> f64 {
        s.clamp(self.margin, self.d0 - self.margin)
    }

    pub fn point_at(&self, s: f64) -> Point2 {
        Point2::new(self.origin.x + s * self.dir.x, self.origin.y + s * self.dir.y)
    }
}
