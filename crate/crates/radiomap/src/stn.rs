//! Rotation- and scale-normalized local scatter features.
//!
//! The ellipse-focused obstacle map is resampled so that the TX–RX segment
//! always lands on the same horizontal span of the output window, centred,
//! pointing the same way. The affine map acts on normalized coordinates in
//! `[−1, 1]` per axis where pixel `i` of an axis with `M` pixels sits at
//! `2(i + ½)/M − 1`; bilinear weights are then taken in pixel-index space.

use crate::geometry::{ellipse_mask, focus_ellipse, GridSpec, Link, ObstacleMap, Raster};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Source coordinates `A·(x_t, y_t) + (Δx, Δy)` with
/// `A = [[c1 cos ω, −c2 sin ω], [c1 sin ω, c2 cos ω]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub dx: f64,
    pub dy: f64,
    pub c1: f64,
    pub c2: f64,
    /// Radians in `(−3π/2, π/2]`.
    pub omega: f64,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams {
        dx: 0.0,
        dy: 0.0,
        c1: 1.0,
        c2: 1.0,
        omega: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let finite = [self.dx, self.dy, self.c1, self.c2, self.omega].iter().all(|v| v.is_finite());
        if !finite || self.c1 <= 0.0 || self.c2 <= 0.0 {
            return Err(Error::InvalidArgument(format!("invalid affine parameters {self:?}")));
        }
        if !(self.omega > -1.5 * PI && self.omega <= 0.5 * PI) {
            return Err(Error::InvalidArgument(format!("rotation {} outside (-3pi/2, pi/2]", self.omega)));
        }
        Ok(())
    }

    /// Normalized source point for a normalized target point.
    #[inline]
    pub fn apply(&self, xt: f64, yt: f64) -> (f64, f64) {
        let (s, c) = self.omega.sin_cos();
        (
            self.c1 * c * xt - self.c2 * s * yt + self.dx,
            self.c1 * s * xt + self.c2 * c * yt + self.dy,
        )
    }
}

/// Resampled scatter feature map, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap(pub Raster);

/// Parameters that move the link midpoint to the window centre, scale the
/// ground distance to the window width and rotate the TX onto `x_t = +1`.
pub fn stn_params(link: &Link, grid: &GridSpec) -> Result<AffineParams> {
    grid.validate()?;
    let t = grid.to_grid(link.tx.ground());
    let r = grid.to_grid(link.rx.ground());
    let (m1, m2) = (grid.rows as f64, grid.cols as f64);
    let (d1, d2) = (t.x - r.x, t.y - r.y);
    let d0 = d1.hypot(d2);
    if !(d0 > 0.0) {
        return Err(Error::InvalidArgument("TX and RX share a ground position".into()));
    }
    let mut omega = (d2 / d1).atan();
    if d1 < 0.0 {
        omega -= PI;
    }
    Ok(AffineParams {
        dx: (t.x + r.x - m1) / m1,
        dy: (t.y + r.y - m2) / m2,
        c1: d0 / m1,
        c2: d0 / m2,
        omega,
    })
}

#[inline]
fn normalized(i: usize, m: usize) -> f64 {
    2.0 * (i as f64 + 0.5) / m as f64 - 1.0
}

#[inline]
fn pixel_index(x: f64, m: usize) -> f64 {
    0.5 * (x + 1.0) * m as f64 - 0.5
}

/// The (up to four) in-range source pixels and their weights.
fn neighbours(p: (f64, f64), shape: (usize, usize), mut visit: impl FnMut(usize, f64)) {
    let (pr, pc) = p;
    let (r0, c0) = (pr.floor(), pc.floor());
    for r in [r0, r0 + 1.0] {
        let wr = (1.0 - (pr - r).abs()).max(0.0);
        if wr == 0.0 || r < 0.0 || r >= shape.0 as f64 {
            continue;
        }
        for c in [c0, c0 + 1.0] {
            let wc = (1.0 - (pc - c).abs()).max(0.0);
            if wc == 0.0 || c < 0.0 || c >= shape.1 as f64 {
                continue;
            }
            visit(r as usize * shape.1 + c as usize, wr * wc);
        }
    }
}

fn source_pixel(params: &AffineParams, i: usize, j: usize, out: (usize, usize), src: (usize, usize)) -> (f64, f64) {
    let (xs, ys) = params.apply(normalized(i, out.0), normalized(j, out.1));
    (pixel_index(xs, src.0), pixel_index(ys, src.1))
}

/// `F(i, j) = Σ_{n,m} O_E(n, m) · max(0, 1 − |x_s − n|) · max(0, 1 − |y_s − m|)`.
pub fn sample_bilinear(src: &Raster, params: &AffineParams, out: (usize, usize)) -> Result<FeatureMap> {
    params.validate()?;
    if out.0 == 0 || out.1 == 0 {
        return Err(Error::InvalidArgument("output shape must be nonempty".into()));
    }
    let shape = src.shape();
    let mut f = Raster::zeros(out.0, out.1);
    for i in 0..out.0 {
        for j in 0..out.1 {
            let mut v = 0.0;
            neighbours(source_pixel(params, i, j, out, shape), shape, |k, w| v += w * src.data[k]);
            f.data[i * out.1 + j] = v;
        }
    }
    Ok(FeatureMap(f))
}

pub fn scatter_features(link: &Link, h: &ObstacleMap, e: f64, out: (usize, usize)) -> Result<FeatureMap> {
    let grid = h.grid();
    let o_e = focus_ellipse(h, &ellipse_mask(link, grid, e)?)?;
    sample_bilinear(&o_e, &stn_params(link, grid)?, out)
}

/// Features on a window the size of the obstacle grid.
pub fn scatter_features_for(link: &Link, h: &ObstacleMap, e: f64) -> Result<FeatureMap> {
    scatter_features(link, h, e, h.grid().shape())
}

/// Identifier of the pooled feature layout consumed by the linear regressor.
pub const POOLING_VERSION: &str = "pool-v1";
/// mean, max, nonzero fraction, then the four quadrant means.
pub const POOLED_LEN: usize = 7;

pub fn pooled_features(f: &FeatureMap) -> [f64; POOLED_LEN] {
    let r = &f.0;
    let n = r.data.len() as f64;
    let (hr, hc) = (r.rows / 2, r.cols / 2);
    let mut quad = [0.0; 4];
    let mut count = [0usize; 4];
    let (mut sum, mut max, mut nz) = (0.0, f64::NEG_INFINITY, 0usize);
    for i in 0..r.rows {
        for j in 0..r.cols {
            let v = r.data[i * r.cols + j];
            sum += v;
            max = max.max(v);
            nz += usize::from(v != 0.0);
            let q = usize::from(i >= hr) * 2 + usize::from(j >= hc);
            quad[q] += v;
            count[q] += 1;
        }
    }
    let qm = |q: usize| if count[q] > 0 { quad[q] / count[q] as f64 } else { 0.0 };
    [sum / n, max, nz as f64 / n, qm(0), qm(1), qm(2), qm(3)]
}

/// Stand-in for a learned scattering predictor over [`FeatureMap`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScatterRegressor {
    #[default]
    Null,
    /// `weights · pooled(F)`, dB per unit of each pooled feature.
    Linear { weights: Vec<f64> },
}

impl ScatterRegressor {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Null => Ok(()),
            Self::Linear { weights } => {
                if weights.len() != POOLED_LEN {
                    return Err(Error::ShapeMismatch {
                        expected: (POOLED_LEN, 1),
                        found: (weights.len(), 1),
                    });
                }
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::InvalidArgument("scatter weights must be finite".into()));
                }
                Ok(())
            }
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Self::Null)
    }

    pub fn predict(&self, f: &FeatureMap) -> Result<f64> {
        match self {
            Self::Null => Ok(0.0),
            Self::Linear { weights } => {
                self.validate()?;
                Ok(weights.iter().zip(pooled_features(f)).map(|(w, p)| w * p).sum())
            }
        }
    }
}

pub fn scatter_predict(f: &FeatureMap, r: &ScatterRegressor) -> Result<f64> {
    r.predict(f)
}

/// Pooled features of one link together with `∂(w · pooled)/∂H` for a
/// given weight vector. The nonzero fraction is piecewise constant and
/// contributes nothing; the max contributes through its first argmax.
pub(crate) fn pooled_with_gradient(
    link: &Link,
    h: &ObstacleMap,
    e: f64,
    weights: Option<&[f64]>,
) -> Result<([f64; POOLED_LEN], Vec<(usize, f64)>)> {
    let grid = h.grid();
    let mask = ellipse_mask(link, grid, e)?.mask;
    let params = stn_params(link, grid)?;
    let shape = grid.shape();
    let heights = h.as_slice();

    // taps[offsets[p]..offsets[p + 1]] are the masked sources of pixel p
    let mut taps: Vec<(usize, f64)> = Vec::with_capacity(4 * grid.len());
    let mut offsets = Vec::with_capacity(grid.len() + 1);
    offsets.push(0);
    let mut f = Raster::zeros(shape.0, shape.1);
    for i in 0..shape.0 {
        for j in 0..shape.1 {
            let mut v = 0.0;
            neighbours(source_pixel(&params, i, j, shape, shape), shape, |k, w| {
                if mask.data[k] != 0.0 {
                    v += w * heights[k];
                    taps.push((k, w));
                }
            });
            f.data[i * shape.1 + j] = v;
            offsets.push(taps.len());
        }
    }
    let fm = FeatureMap(f);
    let pooled = pooled_features(&fm);
    let Some(w) = weights else {
        return Ok((pooled, Vec::new()));
    };

    let (rows, cols) = shape;
    let n = (rows * cols) as f64;
    let (hr, hc) = (rows / 2, cols / 2);
    let qcount = |q: usize| {
        let r = if q < 2 { hr } else { rows - hr };
        let c = if q % 2 == 0 { hc } else { cols - hc };
        (r * c) as f64
    };
    let argmax = fm
        .0
        .data
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0;
    let mut grad = vec![0.0; grid.len()];
    for i in 0..rows {
        for j in 0..cols {
            let p = i * cols + j;
            let q = usize::from(i >= hr) * 2 + usize::from(j >= hc);
            let mut coef = w[0] / n + w[3 + q] / qcount(q);
            if p == argmax {
                coef += w[1];
            }
            for &(k, wt) in &taps[offsets[p]..offsets[p + 1]] {
                grad[k] += coef * wt;
            }
        }
    }
    Ok((pooled, grad.into_iter().enumerate().filter(|(_, g)| *g != 0.0).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point2, Point3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid64() -> GridSpec {
        GridSpec::new(64, 64, 1.0, Point2::new(0.0, 0.0)).unwrap()
    }

    fn link(t: (f64, f64), r: (f64, f64)) -> Link {
        Link::new(Point3::new(t.0, t.1, 50.0), Point3::new(r.0, r.1, 1.5)).unwrap()
    }

    #[test]
    fn params_examples() {
        let p = stn_params(&link((30.0, 20.0), (10.0, 20.0)), &grid64()).unwrap();
        assert_eq!((p.dx, p.dy, p.c1, p.c2, p.omega), (-0.375, -0.375, 0.3125, 0.3125, 0.0));
        let p = stn_params(&link((10.0, 20.0), (30.0, 20.0)), &grid64()).unwrap();
        assert!((p.omega + PI).abs() < 1e-15);
        let p = stn_params(&link((20.0, 40.0), (44.0, 24.0)), &grid64()).unwrap();
        assert_eq!((p.dx, p.dy), (0.0, 0.0));
        let same = Link { tx: Point3::new(3.0, 3.0, 50.0), rx: Point3::new(3.0, 3.0, 1.5) };
        assert!(stn_params(&same, &grid64()).is_err());
    }

    #[test]
    fn omega_stays_in_range_and_maps_tx_to_positive_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = grid64();
        for _ in 0..2000 {
            let t = (rng.random_range(0.0..64.0), rng.random_range(0.0..64.0));
            let r = (rng.random_range(0.0..64.0), rng.random_range(0.0..64.0));
            let l = link(t, r);
            let p = stn_params(&l, &g).unwrap();
            p.validate().unwrap();
            let (xs, ys) = p.apply(1.0, 0.0);
            assert!((pixel_index(xs, 64) + 0.5 - t.0).abs() < 1e-9);
            assert!((pixel_index(ys, 64) + 0.5 - t.1).abs() < 1e-9);
            let (xs, ys) = p.apply(-1.0, 0.0);
            assert!((pixel_index(xs, 64) + 0.5 - r.0).abs() < 1e-9);
            assert!((pixel_index(ys, 64) + 0.5 - r.1).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_resampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<f64> = (0..24 * 24).map(|_| rng.random_range(0.0..50.0)).collect();
        let src = Raster::from_vec(24, 24, data).unwrap();
        let f = sample_bilinear(&src, &AffineParams::IDENTITY, (24, 24)).unwrap();
        for (a, b) in f.0.data.iter().zip(&src.data) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn midway_and_out_of_range() {
        let src = Raster::from_vec(2, 1, vec![3.0, 7.0]).unwrap();
        // a single output pixel sampling the centre of the 2x1 source
        let f = sample_bilinear(&src, &AffineParams::IDENTITY, (1, 1)).unwrap();
        assert_eq!(f.0.data[0], 5.0);
        let far = AffineParams { dx: 3.0, ..AffineParams::IDENTITY };
        let f = sample_bilinear(&src, &far, (2, 1)).unwrap();
        assert!(f.0.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn weights_sum_to_one_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let p = (rng.random_range(0.0..9.0), rng.random_range(0.0..9.0));
            let mut s = 0.0;
            neighbours(p, (10, 10), |_, w| s += w);
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_map_gives_zero_features() {
        let h = ObstacleMap::flat(grid64(), 0.0).unwrap();
        let f = scatter_features_for(&link((30.0, 20.0), (10.0, 40.0)), &h, 0.5).unwrap();
        assert!(f.0.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn regressor_contract() {
        let f = FeatureMap(Raster::filled(8, 8, 5.0));
        assert_eq!(ScatterRegressor::Null.predict(&f).unwrap(), 0.0);
        let zero = ScatterRegressor::Linear { weights: vec![0.0; POOLED_LEN] };
        assert_eq!(zero.predict(&f).unwrap(), 0.0);
        let mut w = vec![0.0; POOLED_LEN];
        w[0] = 0.8;
        assert_eq!(scatter_predict(&f, &ScatterRegressor::Linear { weights: w }).unwrap(), 4.0);
        let bad = ScatterRegressor::Linear { weights: vec![1.0; 3] };
        assert!(matches!(bad.predict(&f), Err(Error::ShapeMismatch { .. })));
        let p = pooled_features(&f);
        assert_eq!(p, [5.0, 5.0, 1.0, 5.0, 5.0, 5.0, 5.0]);
    }

    #[test]
    fn pooled_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = GridSpec::new(16, 16, 2.0, Point2::new(0.0, 0.0)).unwrap();
        for _ in 0..10 {
            let hs: Vec<f64> = (0..256).map(|_| rng.random_range(1.0..40.0)).collect();
            let h = ObstacleMap::new(g, hs).unwrap();
            let l = link((rng.random_range(4.0..28.0), rng.random_range(4.0..28.0)), (rng.random_range(4.0..28.0), rng.random_range(4.0..28.0)));
            if l.ground_distance() < 4.0 {
                continue;
            }
            let w: Vec<f64> = (0..POOLED_LEN).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, grad) = pooled_with_gradient(&l, &h, 0.6, Some(&w)).unwrap();
            let mut dense = vec![0.0; 256];
            for (k, v) in grad {
                dense[k] = v;
            }
            let value = |m: &ObstacleMap| -> f64 {
                let (p, _) = pooled_with_gradient(&l, m, 0.6, None).unwrap();
                w.iter().zip(p).map(|(a, b)| a * b).sum()
            };
            let step = 1e-4;
            for k in 0..256 {
                let mut up = h.clone().into_heights();
                let mut dn = up.clone();
                up[k] += step;
                dn[k] -= step;
                let fd = (value(&ObstacleMap::new(g, up).unwrap()) - value(&ObstacleMap::new(g, dn).unwrap())) / (2.0 * step);
                assert!((fd - dense[k]).abs() < 1e-7, "cell {k}: fd {fd} analytic {}", dense[k]);
            }
        }
    }
}
