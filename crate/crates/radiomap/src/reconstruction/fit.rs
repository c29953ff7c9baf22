//! Joint least-squares fit of the path-loss and scatter parameters and
//! gradient descent on the obstacle heights.
//!
//! Given the heights, the prediction is linear in
//! `Θ = (β0, γ0, w_1..w_7)`:
//!
//! ```text
//! ŷ = β0 + γ0·(I·log10 d + (1 − I)·log10 L) + (1 − I)·(excess + w·pooled)
//! ```
//!
//! where `L` is the diffraction curve length, so each epoch first solves for
//! `Θ` exactly and then takes minibatch steps on `H`. The height gradient
//! passes through the indicator, through the knife-edge angles of the
//! current hull vertices (curve length and excess loss) and through the
//! pooled scatter features. Vertex selection itself is held fixed within a
//! step and recomputed whenever the heights change.

use super::optim::Adam;
use super::FitConfig;
use crate::diffraction::{vogler_attenuation, vogler_with_gradient, VoglerConfig};
use crate::geometry::path::path_from_trace;
use crate::geometry::{trace_cells, CellTrace, DiffractionPath, Link, ObstacleMap};
use crate::par;
use crate::propagation::{IndicatorMode, Measurement, PathLossParams, RadioMapModel};
use crate::stn::{pooled_with_gradient, ScatterRegressor, POOLED_LEN};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::LN_10;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Best model seen, carrying `FitConfig::predict_indicator`.
    pub model: RadioMapModel,
    /// Training MSE of the returned model under the fitting indicator.
    pub loss: f64,
    /// Training MSE at the start of every epoch, then after the last.
    pub history: Vec<f64>,
    pub epochs_run: usize,
}

struct Sample {
    link: Link,
    trace: CellTrace,
    log_d: f64,
    y: f64,
}

/// Everything the prediction needs besides `Θ`.
#[derive(Debug, Clone, Copy, Default)]
struct Parts {
    i: f64,
    log_curve: f64,
    excess: f64,
    pooled: [f64; POOLED_LEN],
}

#[derive(Debug, Clone, PartialEq)]
struct Theta {
    los: PathLossParams,
    w: Option<Vec<f64>>,
}

impl Theta {
    fn predict(&self, s: &Sample, p: &Parts) -> f64 {
        let nl = 1.0 - p.i;
        let mut v = self.los.intercept_db + self.los.slope_db_per_decade * (p.i * s.log_d + nl * p.log_curve);
        if nl > 0.0 {
            v += nl * p.excess;
            if let Some(w) = &self.w {
                v += nl * w.iter().zip(&p.pooled).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        v
    }

    fn regressor(&self) -> ScatterRegressor {
        match &self.w {
            Some(w) => ScatterRegressor::Linear { weights: w.clone() },
            None => ScatterRegressor::Null,
        }
    }
}

struct Problem<'a> {
    samples: Vec<Sample>,
    vogler: &'a VoglerConfig,
    eccentricity: f64,
    mode: IndicatorMode,
    scatter: bool,
}

fn indicator(mode: IndicatorMode, trace: &CellTrace, heights: &[f64]) -> (f64, f64) {
    let depth: f64 = trace
        .iter()
        .filter(|c| c.altitude > 0.0)
        .map(|c| (heights[c.index] - c.altitude).max(0.0))
        .sum();
    let los = trace.iter().all(|c| c.altitude > 0.0 && heights[c.index] < c.altitude);
    match mode {
        IndicatorMode::Hard => (f64::from(u8::from(los)), depth),
        IndicatorMode::Soft => (1.0 - depth.tanh(), depth),
    }
}

/// `∂θ_i/∂a_j` for the three altitudes around vertex `i`, zero where the
/// angle is clamped at grazing.
fn angle_partials(path: &DiffractionPath, i: usize) -> [f64; 3] {
    let v = &path.vertices;
    let (dp, dn) = (path.distances[i - 1], path.distances[i]);
    let up = (v[i].altitude - v[i - 1].altitude) / dp;
    let un = (v[i].altitude - v[i + 1].altitude) / dn;
    if up.atan() + un.atan() < 0.0 {
        return [0.0; 3];
    }
    let gp = 1.0 / (dp * (1.0 + up * up));
    let gn = 1.0 / (dn * (1.0 + un * un));
    [-gp, gp + gn, -gn]
}

impl Problem<'_> {
    fn parts(&self, s: &Sample, map: &ObstacleMap, theta: Option<&Theta>, grad: Option<&mut Vec<(usize, f64)>>) -> Result<Parts> {
        let heights = map.as_slice();
        let (i, depth) = indicator(self.mode, &s.trace, heights);
        let mut p = Parts {
            i,
            log_curve: s.log_d,
            ..Parts::default()
        };
        if i >= 1.0 {
            return Ok(p);
        }
        let path = path_from_trace(&s.link, &s.trace, heights);
        let curve = path.curve_length();
        p.log_curve = curve.log10();
        let weights = theta.and_then(|t| t.w.as_deref());
        let mut scatter_grad = Vec::new();
        if self.scatter {
            let (pooled, g) = pooled_with_gradient(&s.link, map, self.eccentricity, grad.as_ref().and(weights))?;
            p.pooled = pooled;
            scatter_grad = g;
        }
        let Some(out) = grad else {
            p.excess = vogler_attenuation(&path, self.vogler)?.excess_loss_db;
            return Ok(p);
        };
        let theta = theta.expect("gradient needs parameters");
        let (res, dex) = vogler_with_gradient(&path, self.vogler)?;
        p.excess = res.excess_loss_db;
        let nl = 1.0 - i;
        let gamma = theta.los.slope_db_per_decade;

        // ∂ŷ/∂I
        if self.mode == IndicatorMode::Soft {
            let mut rest = p.excess;
            if let Some(w) = weights {
                rest += w.iter().zip(&p.pooled).map(|(a, b)| a * b).sum::<f64>();
            }
            let di_coef = gamma * (s.log_d - p.log_curve) - rest;
            let sech2 = 1.0 - depth.tanh().powi(2);
            for c in s.trace.iter() {
                if c.altitude > 0.0 && heights[c.index] > c.altitude {
                    out.push((c.index, -sech2 * di_coef));
                }
            }
        }

        // ∂ŷ/∂a_v through log10 L and the excess loss
        let v = &path.vertices;
        let seg: Vec<f64> = v
            .windows(2)
            .zip(&path.distances)
            .map(|(w, d)| d.hypot(w[1].altitude - w[0].altitude))
            .collect();
        let mut da = vec![0.0; v.len()];
        for k in 1..v.len() - 1 {
            let dl = (v[k].altitude - v[k - 1].altitude) / seg[k - 1] - (v[k + 1].altitude - v[k].altitude) / seg[k];
            da[k] += gamma * dl / (curve * LN_10);
            let part = angle_partials(&path, k);
            for (off, g) in part.iter().enumerate() {
                da[k + off - 1] += dex[k - 1] * g;
            }
        }
        for k in 1..v.len() - 1 {
            if let Some(cell) = v[k].cell {
                out.push((cell, nl * da[k]));
            }
        }
        for (cell, g) in scatter_grad {
            out.push((cell, nl * g));
        }
        Ok(p)
    }

    fn all_parts(&self, map: &ObstacleMap) -> Result<Vec<Parts>> {
        par::map(&self.samples, |s| self.parts(s, map, None, None)).into_iter().collect()
    }

    fn loss(&self, theta: &Theta, parts: &[Parts]) -> f64 {
        self.samples
            .iter()
            .zip(parts)
            .map(|(s, p)| (theta.predict(s, p) - s.y).powi(2))
            .sum::<f64>()
            / self.samples.len() as f64
    }

    /// Exact least squares for `Θ` given the height-dependent parts.
    fn solve_theta(&self, parts: &[Parts]) -> Result<Theta> {
        let k = if self.scatter { 2 + POOLED_LEN } else { 2 };
        let mut ata = vec![vec![0.0; k]; k];
        let mut atb = vec![0.0; k];
        let mut row = vec![0.0; k];
        for (s, p) in self.samples.iter().zip(parts) {
            let nl = 1.0 - p.i;
            row[0] = 1.0;
            row[1] = p.i * s.log_d + nl * p.log_curve;
            if self.scatter {
                for j in 0..POOLED_LEN {
                    row[2 + j] = nl * p.pooled[j];
                }
            }
            let t = s.y - nl * p.excess;
            for a in 0..k {
                atb[a] += row[a] * t;
                for b in a..k {
                    ata[a][b] += row[a] * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                ata[a][b] = ata[b][a];
            }
        }
        let singular = || Error::Degenerate("path-loss design matrix is singular".into());
        let mut x = solve_spd(ata.clone(), atb.clone()).ok_or_else(singular)?;
        if !(x[1] >= MIN_SLOPE) {
            // Convex objective with one active bound: pin the slope and
            // re-solve the remaining columns.
            let keep: Vec<usize> = (0..k).filter(|&j| j != 1).collect();
            let sub = keep.iter().map(|&a| keep.iter().map(|&b| ata[a][b]).collect()).collect();
            let rhs = keep.iter().map(|&a| atb[a] - MIN_SLOPE * ata[a][1]).collect();
            let y = solve_spd(sub, rhs).ok_or_else(singular)?;
            for (v, &j) in y.into_iter().zip(&keep) {
                x[j] = v;
            }
            x[1] = MIN_SLOPE;
        }
        Ok(Theta {
            los: PathLossParams::new(x[0], x[1]),
            w: self.scatter.then(|| x[2..].to_vec()),
        })
    }

    fn batch_grad(&self, idx: &[usize], map: &ObstacleMap, theta: &Theta) -> Result<(Vec<f64>, f64)> {
        let n = idx.len() as f64;
        let per = par::map(idx, |&k| {
            let s = &self.samples[k];
            let mut g = Vec::new();
            let p = self.parts(s, map, Some(theta), Some(&mut g))?;
            Ok((theta.predict(s, &p) - s.y, g))
        });
        let mut grad = vec![0.0; map.grid().len()];
        let mut loss = 0.0;
        for r in per {
            let (resid, g): (f64, Vec<(usize, f64)>) = r?;
            loss += resid * resid / n;
            let scale = 2.0 * resid / n;
            for (cell, v) in g {
                grad[cell] += scale * v;
            }
        }
        Ok((grad, loss))
    }
}

/// Smallest path-loss slope the fit may return, dB per decade.
pub const MIN_SLOPE: f64 = 0.1;

/// Cholesky solve of a symmetric positive semidefinite system with a tiny
/// relative ridge so unused columns resolve to zero.
fn solve_spd(mut a: Vec<Vec<f64>>, b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let ridge = 1e-12 * (0..n).map(|i| a[i][i]).fold(0.0, f64::max).max(1e-300);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += ridge;
    }
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut v = a[i][j];
            for k in 0..j {
                v -= a[i][k] * a[j][k];
            }
            a[i][j] = v / d;
        }
    }
    let mut y = b;
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i][k] * y[k];
        }
        y[i] /= a[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[k][i] * y[k];
        }
        y[i] /= a[i][i];
    }
    y.iter().all(|v| v.is_finite()).then_some(y)
}

fn problem<'a>(data: &[Measurement], map: &ObstacleMap, vogler: &'a VoglerConfig, eccentricity: f64, mode: IndicatorMode, scatter: bool) -> Result<Problem<'a>> {
    let samples = par::map(data, |m| {
        if !m.y.is_finite() {
            return Err(Error::InvalidArgument("measurement values must be finite".into()));
        }
        Ok(Sample {
            link: m.link,
            trace: trace_cells(&m.link, map.grid())?,
            log_d: m.link.distance().log10(),
            y: m.y,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Problem {
        samples,
        vogler,
        eccentricity,
        mode,
        scatter,
    })
}

/// Mean squared error of `model` over `data` and its gradient in the
/// heights, under the model's own indicator and scatter regressor.
pub fn mse_loss_and_grad(data: &[Measurement], model: &RadioMapModel) -> Result<(f64, Vec<f64>)> {
    model.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("need at least one measurement".into()));
    }
    let scatter = !model.scatter.is_null();
    let prob = problem(data, &model.map, &model.vogler, model.eccentricity, model.indicator, scatter)?;
    let theta = Theta {
        los: model.los,
        w: match &model.scatter {
            ScatterRegressor::Linear { weights } => Some(weights.clone()),
            ScatterRegressor::Null => None,
        },
    };
    let idx: Vec<usize> = (0..data.len()).collect();
    let (grad, loss) = prob.batch_grad(&idx, &model.map, &theta)?;
    Ok((loss, grad))
}

/// Minimizes the training MSE over `Θ` and the heights, starting from
/// `init_h`, with default Vogler settings and eccentricity.
pub fn fit_model(data: &[Measurement], init_h: &ObstacleMap, cfg: &FitConfig) -> Result<FitResult> {
    fit_model_with(data, init_h, cfg, &VoglerConfig::default(), crate::propagation::DEFAULT_ECCENTRICITY)
}

pub fn fit_model_with(
    data: &[Measurement],
    init_h: &ObstacleMap,
    cfg: &FitConfig,
    vogler: &VoglerConfig,
    eccentricity: f64,
) -> Result<FitResult> {
    cfg.validate()?;
    vogler.validate()?;
    crate::geometry::features::check_eccentricity(eccentricity)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("need at least one measurement".into()));
    }
    let mut map = init_h.clone();
    let clamped: Vec<f64> = map.as_slice().to_vec();
    map.assign_clamped(&clamped, cfg.height_clamp_max);
    let prob = problem(data, &map, vogler, eccentricity, cfg.fit_indicator, cfg.fit_scatter)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(map.grid().len(), cfg.learning_rate, cfg.grad_clip, (0.0, cfg.height_clamp_max));
    let mut order: Vec<usize> = (0..prob.samples.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, ObstacleMap, Theta)> = None;
    let mut rising = 0usize;
    let mut epochs_run = 0usize;

    for epoch in 0..=cfg.epochs {
        let parts = prob.all_parts(&map)?;
        let theta = prob.solve_theta(&parts)?;
        let loss = prob.loss(&theta, &parts);
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss,
                best: best.as_ref().map_or(f64::NAN, |b| b.0),
            });
        }
        let prev = history.last().copied();
        history.push(loss);
        if best.as_ref().is_none_or(|b| loss < b.0) {
            best = Some((loss, map.clone(), theta.clone()));
        }
        if let Some(p) = prev {
            if loss > p {
                rising += 1;
                if rising >= cfg.patience.max(1) {
                    return Err(Error::Diverged {
                        epoch,
                        loss,
                        best: best.as_ref().map_or(f64::NAN, |b| b.0),
                    });
                }
            } else {
                rising = 0;
                if p - loss <= cfg.convergence_tol * p {
                    break;
                }
            }
        }
        if epoch == cfg.epochs {
            break;
        }
        epochs_run += 1;
        opt.set_learning_rate(cfg.learning_rate * cfg.lr_decay.powi(epoch as i32));
        order.shuffle(&mut rng);
        let mut heights = map.as_slice().to_vec();
        for batch in order.chunks(cfg.batch_size) {
            let (grad, _) = prob.batch_grad(batch, &map, &theta)?;
            opt.step(&mut heights, &grad);
            map.assign_clamped(&heights, cfg.height_clamp_max);
        }
    }

    let (loss, map, theta) = best.expect("at least one epoch evaluated");
    let model = RadioMapModel {
        map,
        los: theta.los,
        vogler: *vogler,
        scatter: theta.regressor(),
        eccentricity,
        indicator: cfg.predict_indicator,
    };
    model.validate()?;
    Ok(FitResult {
        model,
        loss,
        history,
        epochs_run,
    })
}
