use crate::propagation::{fit_line, Measurement, PathLossParams};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

pub const LOS_LABEL: u8 = 0;
pub const NLOS_LABEL: u8 = 1;

/// Two log-distance lines and the per-sample assignment to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    /// Line of the LOS cluster.
    pub los: PathLossParams,
    /// Line of the NLOS cluster.
    pub nlos: PathLossParams,
    /// [`LOS_LABEL`] or [`NLOS_LABEL`] per sample, in input order.
    pub labels: Vec<u8>,
}

impl ClusterState {
    pub fn los_fraction(&self) -> f64 {
        self.labels.iter().filter(|l| **l == LOS_LABEL).count() as f64 / self.labels.len().max(1) as f64
    }
}

/// Alternates nearest-line assignment and per-cluster least squares for
/// `rounds` iterations, starting from the global fit and a copy shifted
/// up by 20 dB. The line with the lower mean prediction over all samples
/// is labelled LOS.
pub fn init_cluster(data: &[Measurement], rounds: usize) -> Result<ClusterState> {
    if data.len() < 2 {
        return Err(Error::Degenerate("clustering needs at least two samples".into()));
    }
    let xs: Vec<f64> = data.iter().map(|m| m.link.distance().log10()).collect();
    let ys: Vec<f64> = data.iter().map(|m| m.y).collect();
    let (b, g) = fit_line(&xs, &ys).ok_or_else(|| Error::Degenerate("all samples share one distance".into()))?;
    let mut lines = [(b, g), (b + 20.0, g)];
    let mut assign = vec![0u8; data.len()];
    for _ in 0..rounds.max(1) {
        for (k, (x, y)) in xs.iter().zip(&ys).enumerate() {
            let r0 = (y - lines[0].0 - lines[0].1 * x).abs();
            let r1 = (y - lines[1].0 - lines[1].1 * x).abs();
            assign[k] = u8::from(r1 < r0);
        }
        let mut changed = false;
        for (c, line) in lines.iter_mut().enumerate() {
            let (cx, cy): (Vec<f64>, Vec<f64>) = xs
                .iter()
                .zip(&ys)
                .zip(&assign)
                .filter(|(_, a)| **a as usize == c)
                .map(|((x, y), _)| (*x, *y))
                .unzip();
            // a cluster without spread in distance keeps its previous line
            if let Some(fit) = fit_line(&cx, &cy) {
                changed |= fit != *line;
                *line = fit;
            }
        }
        if !changed {
            break;
        }
    }
    let mean_pred = |l: (f64, f64)| xs.iter().map(|x| l.0 + l.1 * x).sum::<f64>() / xs.len() as f64;
    let los_first = mean_pred(lines[0]) <= mean_pred(lines[1]);
    let (los, nlos) = if los_first { (lines[0], lines[1]) } else { (lines[1], lines[0]) };
    let labels = assign
        .iter()
        .map(|a| if (*a == 0) == los_first { LOS_LABEL } else { NLOS_LABEL })
        .collect();
    Ok(ClusterState {
        los: PathLossParams::new(los.0, los.1),
        nlos: PathLossParams::new(nlos.0, nlos.1),
        labels,
    })
}
