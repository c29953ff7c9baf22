//! Forward radio-map model, synthetic measurement generation and metrics.

use crate::diffraction::{loss_for_path, VoglerConfig};
use crate::geometry::features::{blockage_depth, check_eccentricity, indicator_from_depth, trace_is_los};
use crate::geometry::path::path_from_trace;
use crate::geometry::{trace_cells, CellTrace, GridSpec, Link, ObstacleMap, Point3};
use crate::par;
use crate::stn::{scatter_features_for, ScatterRegressor};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Log-distance law `β0 + γ0·log10(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    /// `β0`, dB.
    pub intercept_db: f64,
    /// `γ0`, dB per decade of distance.
    pub slope_db_per_decade: f64,
}

impl PathLossParams {
    pub const fn new(intercept_db: f64, slope_db_per_decade: f64) -> Self {
        Self {
            intercept_db,
            slope_db_per_decade,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intercept_db.is_finite() && self.slope_db_per_decade.is_finite()) {
            return Err(Error::InvalidArgument("path-loss parameters must be finite".into()));
        }
        if self.slope_db_per_decade <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "path-loss slope must be positive, got {}",
                self.slope_db_per_decade
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn at_distance(&self, d: f64) -> f64 {
        self.intercept_db + self.slope_db_per_decade * d.log10()
    }
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self::new(40.0, 22.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorMode {
    /// Binary blockage test.
    #[default]
    Hard,
    /// `1 − tanh(Σ O_L)`.
    Soft,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioMapModel {
    pub map: ObstacleMap,
    pub los: PathLossParams,
    pub vogler: VoglerConfig,
    pub scatter: ScatterRegressor,
    pub eccentricity: f64,
    pub indicator: IndicatorMode,
}

pub const DEFAULT_ECCENTRICITY: f64 = 0.5;

impl RadioMapModel {
    /// Hard-indicator model without a scatter term.
    pub fn new(map: ObstacleMap, los: PathLossParams, vogler: VoglerConfig) -> Self {
        Self {
            map,
            los,
            vogler,
            scatter: ScatterRegressor::Null,
            eccentricity: DEFAULT_ECCENTRICITY,
            indicator: IndicatorMode::Hard,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.los.validate()?;
        self.vogler.validate()?;
        self.scatter.validate()?;
        check_eccentricity(self.eccentricity)
    }

    pub fn with_indicator(mut self, mode: IndicatorMode) -> Self {
        self.indicator = mode;
        self
    }
}

/// A link with its measured attenuation in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub link: Link,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub nmae: f64,
    pub count: usize,
}

/// NMAE as reported in [`Metrics`].
pub const NMAE_DEFINITION: &str = "sum(|y - y_hat|) / sum(|y|)";

impl Metrics {
    pub fn from_pairs(y: &[f64], y_hat: &[f64]) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::InvalidArgument("metrics need at least one sample".into()));
        }
        if y.len() != y_hat.len() {
            return Err(Error::InvalidArgument("prediction count differs from data count".into()));
        }
        let abs_err: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum();
        let abs_y: f64 = y.iter().map(|a| a.abs()).sum();
        Ok(Self {
            mae: abs_err / y.len() as f64,
            nmae: if abs_y > 0.0 { abs_err / abs_y } else { 0.0 },
            count: y.len(),
        })
    }
}

pub fn los_gain(link: &Link, p: &PathLossParams) -> Result<f64> {
    let d = link.distance();
    if !(d > 0.0) {
        return Err(Error::InvalidArgument("TX and RX coincide".into()));
    }
    Ok(p.at_distance(d))
}

/// Blockage state of a link under a map.
pub(crate) struct LinkState {
    pub trace: CellTrace,
    pub depth: f64,
    pub hard_los: bool,
}

impl LinkState {
    pub fn new(link: &Link, map: &ObstacleMap) -> Result<Self> {
        let trace = trace_cells(link, map.grid())?;
        let heights = map.as_slice();
        Ok(Self {
            depth: blockage_depth(&trace, heights),
            hard_los: trace_is_los(&trace, heights),
            trace,
        })
    }

    pub fn indicator(&self, mode: IndicatorMode) -> f64 {
        match mode {
            IndicatorMode::Hard => f64::from(u8::from(self.hard_los)),
            IndicatorMode::Soft => indicator_from_depth(self.depth),
        }
    }
}

pub fn predict_attenuation(link: &Link, model: &RadioMapModel) -> Result<f64> {
    let state = LinkState::new(link, &model.map)?;
    let los = los_gain(link, &model.los)?;
    let i = state.indicator(model.indicator);
    if i >= 1.0 {
        return Ok(los);
    }
    let path = path_from_trace(link, &state.trace, model.map.as_slice());
    let diff = loss_for_path(path, &model.los, &model.vogler)?.total_db;
    let scatter = match &model.scatter {
        ScatterRegressor::Null => 0.0,
        r => r.predict(&scatter_features_for(link, &model.map, model.eccentricity)?)?,
    };
    Ok(i * los + (1.0 - i) * (diff + scatter))
}

pub fn predict_many(links: &[Link], model: &RadioMapModel) -> Result<Vec<f64>> {
    par::map(links, |l| predict_attenuation(l, model)).into_iter().collect()
}

/// Where synthetic links are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// TX altitude range in meters.
    pub tx_altitude: (f64, f64),
    /// RX height above ground in meters.
    pub rx_height: f64,
    /// Reject endpoints that would sit inside an obstacle column.
    pub outdoor_only: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            tx_altitude: (50.0, 200.0),
            rx_height: 1.5,
            outdoor_only: true,
        }
    }
}

/// Uniformly drawn links, deterministic per seed.
pub fn sample_links(grid: &GridSpec, map: Option<&ObstacleMap>, cfg: &SamplingConfig, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Link>> {
    let (lo, hi) = cfg.tx_altitude;
    if !(lo >= 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::Degenerate(format!("TX altitude range [{lo}, {hi}] is invalid")));
    }
    if !(cfg.rx_height >= 0.0 && cfg.rx_height.is_finite()) {
        return Err(Error::Degenerate("RX height must be nonnegative".into()));
    }
    let (min, max) = grid.extent();
    let outdoor = |p: Point3| match (cfg.outdoor_only, map) {
        (true, Some(m)) => grid.cell_of(p.ground()).is_none_or(|(r, c)| m.height(r, c) < p.z),
        _ => true,
    };
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * n + 10_000 {
            return Err(Error::Degenerate("could not place outdoor endpoints; the map is too dense".into()));
        }
        let tz = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let tx = Point3::new(rng.random_range(min.x..max.x), rng.random_range(min.y..max.y), tz);
        let rx = Point3::new(rng.random_range(min.x..max.x), rng.random_range(min.y..max.y), cfg.rx_height);
        if !(outdoor(tx) && outdoor(rx)) {
            continue;
        }
        if let Ok(l) = Link::new(tx, rx) {
            out.push(l);
        }
    }
    Ok(out)
}

/// Synthetic measurements with the default sampling configuration.
pub fn generate_measurements(
    h_true: &ObstacleMap,
    p: &PathLossParams,
    cfg: &VoglerConfig,
    n: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<Measurement>> {
    generate_measurements_with(h_true, p, cfg, &SamplingConfig::default(), n, noise_sigma, seed)
}

/// `y = forward model under H_true (hard indicator) + N(0, σ²)`.
pub fn generate_measurements_with(
    h_true: &ObstacleMap,
    p: &PathLossParams,
    cfg: &VoglerConfig,
    sampling: &SamplingConfig,
    n: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<Measurement>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one measurement".into()));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise_sigma must be nonnegative, got {noise_sigma}")));
    }
    let model = RadioMapModel::new(h_true.clone(), *p, *cfg);
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let links = sample_links(h_true.grid(), Some(h_true), sampling, n, &mut rng)?;
    let clean = predict_many(&links, &model)?;
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(links
        .into_iter()
        .zip(clean)
        .map(|(link, y)| Measurement {
            link,
            y: if noise_sigma > 0.0 { y + noise.sample(&mut rng) } else { y },
        })
        .collect())
}

pub fn evaluate(model: &RadioMapModel, data: &[Measurement]) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("evaluation needs at least one measurement".into()));
    }
    let links: Vec<Link> = data.iter().map(|m| m.link).collect();
    let pred = predict_many(&links, model)?;
    let y: Vec<f64> = data.iter().map(|m| m.y).collect();
    Metrics::from_pairs(&y, &pred)
}

/// Least-squares fit of `y ≈ β + γ·log10(d)` over 3D link distances.
pub fn fit_distance_model(data: &[Measurement]) -> Result<PathLossParams> {
    let xs: Vec<f64> = data.iter().map(|m| m.link.distance().log10()).collect();
    let ys: Vec<f64> = data.iter().map(|m| m.y).collect();
    let (b, g) = fit_line(&xs, &ys).ok_or_else(|| Error::Degenerate("all samples share one distance".into()))?;
    Ok(PathLossParams::new(b, g))
}

/// Ordinary least squares `y ≈ a + b·x`; `None` when `x` has no spread.
pub(crate) fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let spread = xs.iter().fold(0.0f64, |m, x| m.max((x - mx).abs()));
    if !(sxx > 0.0) || spread <= 1e-12 * mx.abs().max(1.0) {
        return None;
    }
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

pub fn evaluate_distance_model(p: &PathLossParams, data: &[Measurement]) -> Result<Metrics> {
    let y: Vec<f64> = data.iter().map(|m| m.y).collect();
    let pred: Vec<f64> = data.iter().map(|m| p.at_distance(m.link.distance())).collect();
    Metrics::from_pairs(&y, &pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffraction::diffraction_loss_db;
    use crate::geometry::{hard_los, line_feature, focus_line, soft_los_indicator, Point2};
    use crate::stn::ScatterRegressor;

    fn grid() -> GridSpec {
        GridSpec::new(32, 32, 5.0, Point2::new(0.0, 0.0)).unwrap()
    }

    fn blocky(seed: u64) -> ObstacleMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = grid();
        let mut h = ObstacleMap::flat(g, 0.0).unwrap();
        for _ in 0..25 {
            let (r, c) = (rng.random_range(0..30), rng.random_range(0..30));
            let z = rng.random_range(10.0..60.0);
            for dr in 0..3 {
                for dc in 0..3 {
                    h.set_height(r + dr, c + dc, z);
                }
            }
        }
        h
    }

    fn params() -> PathLossParams {
        PathLossParams::new(30.0, 22.0)
    }

    #[test]
    fn los_gain_values() {
        let p = params();
        let at = |d: f64| los_gain(&Link::new(Point3::new(0.0, 0.0, 0.0), Point3::new(d, 0.0, 0.0)).unwrap(), &p).unwrap();
        assert_eq!(at(1.0), 30.0);
        assert!((at(100.0) - 74.0).abs() < 1e-12);
        assert!((at(20.0) - at(10.0) - 22.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn empty_map_gives_los_gain() {
        let model = RadioMapModel::new(ObstacleMap::flat(grid(), 0.0).unwrap(), params(), VoglerConfig::default());
        let l = Link::new(Point3::new(3.0, 4.0, 60.0), Point3::new(120.0, 90.0, 1.5)).unwrap();
        assert_eq!(predict_attenuation(&l, &model).unwrap(), los_gain(&l, &params()).unwrap());
        let soft = model.clone().with_indicator(IndicatorMode::Soft);
        assert_eq!(predict_attenuation(&l, &soft).unwrap(), los_gain(&l, &params()).unwrap());
    }

    #[test]
    fn blocked_link_gives_diffraction_loss() {
        let h = ObstacleMap::flat(grid(), 80.0).unwrap();
        let model = RadioMapModel::new(h.clone(), params(), VoglerConfig::default());
        let l = Link::new(Point3::new(3.0, 4.0, 60.0), Point3::new(120.0, 90.0, 1.5)).unwrap();
        let d = diffraction_loss_db(&l, &h, &params(), &VoglerConfig::default()).unwrap();
        assert_eq!(predict_attenuation(&l, &model).unwrap(), d);
        let soft = model.with_indicator(IndicatorMode::Soft);
        assert!((predict_attenuation(&l, &soft).unwrap() - d).abs() < 1e-9);
    }

    #[test]
    fn hard_and_soft_differ_by_indicator_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..20 {
            let h = blocky(seed);
            let hard = RadioMapModel::new(h.clone(), params(), VoglerConfig::default());
            let soft = hard.clone().with_indicator(IndicatorMode::Soft);
            let links = sample_links(h.grid(), Some(&h), &SamplingConfig { tx_altitude: (15.0, 60.0), ..Default::default() }, 20, &mut rng).unwrap();
            for l in links {
                let a = predict_attenuation(&l, &hard).unwrap();
                let b = predict_attenuation(&l, &soft).unwrap();
                let is_los = hard_los(&l, &h).unwrap();
                let i_soft = soft_los_indicator(&focus_line(&h, &line_feature(&l, h.grid()).unwrap()).unwrap());
                let i_hard = if is_los { 1.0 } else { 0.0 };
                let los = los_gain(&l, &params()).unwrap();
                let nlos = if is_los && i_soft == 1.0 {
                    los
                } else {
                    diffraction_loss_db(&l, &h, &params(), &VoglerConfig::default()).unwrap()
                };
                assert!((a - b).abs() <= (los - nlos).abs() * (i_soft - i_hard).abs() + 1e-9);
            }
        }
    }

    #[test]
    fn zero_noise_reproduces_the_model_and_seeds_repeat() {
        let h = blocky(5);
        let cfg = VoglerConfig::default();
        let data = generate_measurements(&h, &params(), &cfg, 300, 0.0, 9).unwrap();
        let model = RadioMapModel::new(h.clone(), params(), cfg);
        for m in &data {
            assert_eq!(m.y, predict_attenuation(&m.link, &model).unwrap());
            assert!(m.link.tx.z >= 50.0 && m.link.tx.z <= 200.0);
            assert_eq!(m.link.rx.z, 1.5);
        }
        let metrics = evaluate(&model, &data).unwrap();
        assert_eq!((metrics.mae, metrics.nmae), (0.0, 0.0));
        assert_eq!(data, generate_measurements(&h, &params(), &cfg, 300, 0.0, 9).unwrap());
        let noisy = generate_measurements(&h, &params(), &cfg, 300, 3.0, 9).unwrap();
        assert_eq!(noisy, generate_measurements(&h, &params(), &cfg, 300, 3.0, 9).unwrap());
    }

    #[test]
    fn noise_level_matches_sigma() {
        let h = ObstacleMap::flat(grid(), 0.0).unwrap();
        let model = RadioMapModel::new(h.clone(), params(), VoglerConfig::default());
        let data = generate_measurements(&h, &params(), &VoglerConfig::default(), 100_000, 3.0, 1).unwrap();
        let resid: Vec<f64> = data.iter().map(|m| m.y - predict_attenuation(&m.link, &model).unwrap()).collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64;
        assert!((var.sqrt() - 3.0).abs() < 0.06);
    }

    #[test]
    fn metrics_arithmetic() {
        let m = Metrics::from_pairs(&[10.0, 20.0, 30.0], &[11.0, 21.0, 31.0]).unwrap();
        assert_eq!(m.mae, 1.0);
        let m = Metrics::from_pairs(&[100.0, -50.0, 50.0], &[90.0, -45.0, 50.0]).unwrap();
        assert!((m.nmae - 15.0 / 200.0).abs() < 1e-15);
        assert!((m.mae - 5.0).abs() < 1e-15);
        assert!(Metrics::from_pairs(&[], &[]).is_err());
    }

    #[test]
    fn distance_model_fits_exact_line() {
        let h = ObstacleMap::flat(grid(), 0.0).unwrap();
        let data = generate_measurements(&h, &params(), &VoglerConfig::default(), 200, 0.0, 2).unwrap();
        let p = fit_distance_model(&data).unwrap();
        assert!((p.intercept_db - 30.0).abs() < 1e-9 && (p.slope_db_per_decade - 22.0).abs() < 1e-9);
        let same: Vec<Measurement> = (0..5)
            .map(|_| Measurement { link: data[0].link, y: 3.0 })
            .collect();
        assert!(fit_distance_model(&same).is_err());
    }

    #[test]
    fn raising_heights_keeps_links_blocked() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = blocky(2);
        let links = sample_links(h.grid(), Some(&h), &SamplingConfig { tx_altitude: (15.0, 60.0), ..Default::default() }, 200, &mut rng).unwrap();
        let raised = ObstacleMap::new(*h.grid(), h.as_slice().iter().map(|v| v + 5.0).collect()).unwrap();
        for l in links {
            if !hard_los(&l, &h).unwrap() {
                assert!(!hard_los(&l, &raised).unwrap());
            }
        }
        let _ = ScatterRegressor::Null;
    }
}
