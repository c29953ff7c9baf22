use super::{trace_cells, CellTrace, GridSpec, Link, ObstacleMap, Raster};
use crate::{Error, Result};

/// Line altitude projected onto the traced cells, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFeature(pub Raster);

/// Binary mask of cells whose centers lie inside the link ellipse.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipseMask {
    pub mask: Raster,
    pub eccentricity: f64,
}

pub fn line_feature(link: &Link, grid: &GridSpec) -> Result<LineFeature> {
    let trace = trace_cells(link, grid)?;
    let mut l = Raster::zeros(grid.rows, grid.cols);
    for c in trace.iter() {
        l.data[c.index] = c.altitude;
    }
    Ok(LineFeature(l))
}

pub(crate) fn check_eccentricity(e: f64) -> Result<()> {
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::InvalidArgument(format!("eccentricity must lie in (0, 1), got {e}")));
    }
    Ok(())
}

/// Cells inside the ellipse with foci at the TX and RX ground points and
/// major axis `d0 / e`.
pub fn ellipse_mask(link: &Link, grid: &GridSpec, e: f64) -> Result<EllipseMask> {
    check_eccentricity(e)?;
    link.validate()?;
    let (f1, f2) = (link.tx.ground(), link.rx.ground());
    let major = link.ground_distance() / e;
    let mut m = Raster::zeros(grid.rows, grid.cols);
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let p = grid.cell_center(r, c);
            if p.dist(f1) + p.dist(f2) <= major {
                m.set(r, c, 1.0);
            }
        }
    }
    Ok(EllipseMask {
        mask: m,
        eccentricity: e,
    })
}

/// `ReLU((H − L) ⊙ sign(L))`.
pub fn focus_line(h: &ObstacleMap, l: &LineFeature) -> Result<Raster> {
    l.0.ensure_shape(h.grid().shape())?;
    let data = h
        .as_slice()
        .iter()
        .zip(&l.0.data)
        .map(|(&hm, &lm)| ((hm - lm) * sign(lm)).max(0.0))
        .collect();
    Raster::from_vec(l.0.rows, l.0.cols, data)
}

/// `H ⊙ M`.
pub fn focus_ellipse(h: &ObstacleMap, m: &EllipseMask) -> Result<Raster> {
    m.mask.ensure_shape(h.grid().shape())?;
    let data = h
        .as_slice()
        .iter()
        .zip(&m.mask.data)
        .map(|(a, b)| a * b)
        .collect();
    Raster::from_vec(m.mask.rows, m.mask.cols, data)
}

/// `1 − tanh(Σ O_L)`.
pub fn soft_los_indicator(o_l: &Raster) -> f64 {
    indicator_from_depth(o_l.sum())
}

#[inline]
pub(crate) fn indicator_from_depth(depth: f64) -> f64 {
    1.0 - depth.tanh()
}

/// True when every traced cell sits strictly below the line.
///
/// Cells where the line itself is at or below ground count as blocked.
pub fn hard_los(link: &Link, h: &ObstacleMap) -> Result<bool> {
    let trace = trace_cells(link, h.grid())?;
    Ok(trace_is_los(&trace, h.as_slice()))
}

pub(crate) fn trace_is_los(trace: &CellTrace, heights: &[f64]) -> bool {
    trace
        .iter()
        .all(|c| c.altitude > 0.0 && heights[c.index] < c.altitude)
}

/// `Σ O_L` evaluated on the trace only.
pub(crate) fn blockage_depth(trace: &CellTrace, heights: &[f64]) -> f64 {
    trace
        .iter()
        .filter(|c| c.altitude > 0.0)
        .map(|c| (heights[c.index] - c.altitude).max(0.0))
        .sum()
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
