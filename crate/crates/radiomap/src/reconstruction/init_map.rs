use super::cluster::{LOS_LABEL, NLOS_LABEL};
use super::optim::Adam;
use super::FitConfig;
use crate::geometry::{trace_cells, GridSpec, Link, ObstacleMap};
use crate::par;
use crate::{Error, Result};
use std::f64::consts::LN_2;

/// Traced cells above ground as `(cell index, line altitude)`.
pub(crate) type Footprint = Vec<(u32, f64)>;

pub(crate) fn footprint(link: &Link, grid: &GridSpec) -> Result<Footprint> {
    Ok(trace_cells(link, grid)?
        .iter()
        .filter(|c| c.altitude > 0.0)
        .map(|c| (c.index as u32, c.altitude))
        .collect())
}

#[inline]
pub(crate) fn depth(fp: &Footprint, heights: &[f64]) -> f64 {
    fp.iter().map(|&(k, a)| (heights[k as usize] - a).max(0.0)).sum()
}

const TANH_FLOOR: f64 = 1e-7;

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Cross-entropy of one link and its derivative in the blockage depth `D`,
/// with `I = 1 − tanh D`. `−ln I = softplus(2D) − ln 2` stays finite for
/// any depth; `−ln(1 − I) = −ln tanh D` is floored at `tanh D = 1e-7`.
fn bce_term(d: f64, label: u8) -> (f64, f64) {
    if label == LOS_LABEL {
        let sig = 1.0 / (1.0 + (-2.0 * d).exp());
        (softplus(2.0 * d) - LN_2, 2.0 * sig)
    } else {
        let t = d.tanh();
        if t > TANH_FLOOR {
            (-t.ln(), -2.0 / (2.0 * d).sinh())
        } else {
            (-TANH_FLOOR.ln(), 0.0)
        }
    }
}

fn bce_cached(fps: &[Footprint], labels: &[u8], heights: &[f64]) -> (f64, Vec<f64>) {
    let n = fps.len() as f64;
    let idx: Vec<usize> = (0..fps.len()).collect();
    let parts = par::map(&idx, |&k| {
        let d = depth(&fps[k], heights);
        let (loss, dd) = bce_term(d, labels[k]);
        (loss, dd, d)
    });
    let mut grad = vec![0.0; heights.len()];
    let mut loss = 0.0;
    for (k, &(l, dd, _)) in parts.iter().enumerate() {
        loss += l;
        if dd == 0.0 {
            continue;
        }
        for &(c, a) in &fps[k] {
            if heights[c as usize] > a {
                grad[c as usize] += dd / n;
            }
        }
    }
    (loss / n, grad)
}

fn check_labels(labeled: &[(Link, u8)]) -> Result<()> {
    if labeled.is_empty() {
        return Err(Error::InvalidArgument("map initialization needs labelled links".into()));
    }
    if let Some((_, l)) = labeled.iter().find(|(_, l)| *l != LOS_LABEL && *l != NLOS_LABEL) {
        return Err(Error::InvalidArgument(format!("labels must be 0 or 1, got {l}")));
    }
    Ok(())
}

/// Mean cross-entropy between the soft indicator and the labels (LOS
/// targets `I = 1`, NLOS targets `I = 0`), with its gradient in `H`.
pub fn bce_loss_and_grad(labeled: &[(Link, u8)], h: &ObstacleMap) -> Result<(f64, Vec<f64>)> {
    check_labels(labeled)?;
    let fps = labeled
        .iter()
        .map(|(l, _)| footprint(l, h.grid()))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<u8> = labeled.iter().map(|(_, l)| *l).collect();
    Ok(bce_cached(&fps, &labels, h.as_slice()))
}

/// Cross-entropy descent started from a flat map at `height_clamp_max`.
///
/// With every cell above every line the LOS-labelled links carve their
/// traces down; a start below the lines would leave the rectified depth and
/// hence every gradient at zero.
pub fn init_obstacle_map(labeled: &[(Link, u8)], grid: &GridSpec, cfg: &FitConfig) -> Result<ObstacleMap> {
    cfg.validate()?;
    init_obstacle_map_from(labeled, &ObstacleMap::flat(*grid, cfg.height_clamp_max)?, cfg)
}

pub fn init_obstacle_map_from(labeled: &[(Link, u8)], start: &ObstacleMap, cfg: &FitConfig) -> Result<ObstacleMap> {
    cfg.validate()?;
    check_labels(labeled)?;
    let grid = *start.grid();
    let fps = labeled
        .iter()
        .map(|(l, _)| footprint(l, &grid))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<u8> = labeled.iter().map(|(_, l)| *l).collect();
    let mut heights: Vec<f64> = start.as_slice().iter().map(|v| v.clamp(0.0, cfg.height_clamp_max)).collect();
    let mut opt = Adam::new(heights.len(), cfg.init_learning_rate, cfg.grad_clip, (0.0, cfg.height_clamp_max));
    for _ in 0..cfg.init_epochs {
        let (loss, grad) = bce_cached(&fps, &labels, &heights);
        if !loss.is_finite() {
            return Err(Error::Degenerate("cross-entropy became non-finite".into()));
        }
        opt.step(&mut heights, &grad);
    }
    ObstacleMap::new(grid, heights)
}
