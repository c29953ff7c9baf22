//! Placement of a relay that sees two ground users, guided by the obstacle
//! map of a fitted model.
//!
//! The search runs in the vertical plane that bisects the two users. It
//! descends while both links stay clear; when the next step down is blocked
//! it walks the circle through that blocked point around the users'
//! midpoint, looking for a clear point lower than the current one.

use crate::geometry::{hard_los, GridSpec, Link, ObstacleMap, Point2, Point3};
use crate::par;
use crate::propagation::{predict_attenuation, RadioMapModel};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayQuery {
    pub p1: Point3,
    pub p2: Point3,
    pub z_min: f64,
    pub z_max: f64,
    /// Vertical step, meters.
    pub step_vertical: f64,
    /// Horizontal lattice spacing of the exhaustive scans, meters.
    pub step_horizontal: f64,
    /// Angular step of the circle search, degrees.
    pub angle_step_deg: f64,
    /// Altitude of the 2D exhaustive scan.
    pub fixed_altitude: f64,
    /// Bound on descend/circle rounds.
    pub max_rounds: usize,
}

impl RelayQuery {
    /// Steps of one cell; altitude range `[10, 150]` m and a 50 m 2D scan.
    pub fn new(p1: Point3, p2: Point3, grid: &GridSpec) -> Self {
        Self {
            p1,
            p2,
            z_min: 10.0,
            z_max: 150.0,
            step_vertical: grid.cell_size,
            step_horizontal: grid.cell_size,
            angle_step_deg: 5.0,
            fixed_altitude: 50.0,
            max_rounds: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.z_min >= 0.0 && self.z_max >= self.z_min && self.z_max.is_finite()) {
            return bad("altitude bounds must satisfy 0 <= z_min <= z_max");
        }
        if !(self.step_vertical > 0.0 && self.step_horizontal > 0.0) {
            return bad("step sizes must be positive");
        }
        if !(self.angle_step_deg > 0.0 && self.angle_step_deg <= 90.0) {
            return bad("angle step must lie in (0, 90] degrees");
        }
        if self.p1.ground().dist(self.p2.ground()) <= 0.0 {
            return bad("users must have distinct ground positions");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayResult {
    pub position: Point3,
    /// Attenuation of the worse of the two links, dB.
    pub worst_attenuation_db: f64,
    /// `−worst_attenuation_db`; higher is better.
    pub min_gain_db: f64,
    pub search_distance: f64,
    pub double_los: bool,
    /// Candidate positions evaluated.
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Lattice at `fixed_altitude` only.
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

/// Both links from `p` clear the map.
pub fn double_los(p: Point3, q: &RelayQuery, h: &ObstacleMap) -> Result<bool> {
    for user in [q.p1, q.p2] {
        if !hard_los(&Link::new(p, user)?, h)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn score(p: Point3, q: &RelayQuery, model: &RadioMapModel) -> Result<f64> {
    let a = predict_attenuation(&Link::new(p, q.p1)?, model)?;
    let b = predict_attenuation(&Link::new(p, q.p2)?, model)?;
    Ok(a.max(b))
}

fn result(p: Point3, q: &RelayQuery, model: &RadioMapModel, distance: f64, evaluations: usize) -> Result<RelayResult> {
    let worst = score(p, q, model)?;
    Ok(RelayResult {
        position: p,
        worst_attenuation_db: worst,
        min_gain_db: -worst,
        search_distance: distance,
        double_los: double_los(p, q, &model.map)?,
        evaluations,
    })
}

/// Coordinates `(u, z)` in the bisector plane: `u` runs horizontally
/// across the users' ground segment from its midpoint.
struct Plane {
    mid: Point2,
    normal: Point2,
    oz: f64,
}

impl Plane {
    fn new(q: &RelayQuery) -> Self {
        let (a, b) = (q.p1.ground(), q.p2.ground());
        let d = a.dist(b);
        Self {
            mid: Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)),
            normal: Point2::new(-(b.y - a.y) / d, (b.x - a.x) / d),
            oz: 0.5 * (q.p1.z + q.p2.z),
        }
    }

    fn point(&self, u: f64, z: f64) -> Point3 {
        Point3::new(self.mid.x + u * self.normal.x, self.mid.y + u * self.normal.y, z)
    }
}

fn inside(p: Point3, grid: &GridSpec) -> bool {
    let (lo, hi) = grid.extent();
    p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y
}

/// Descend-and-circle search on the bisector plane, from `z_max` above
/// the users' midpoint. Travel along a circle is counted per side, as if
/// both directions were probed separately.
pub fn place_relay(q: &RelayQuery, model: &RadioMapModel) -> Result<RelayResult> {
    q.validate()?;
    let h = &model.map;
    let grid = h.grid();
    let plane = Plane::new(q);
    let clear = |u: f64, z: f64| -> Result<bool> {
        let p = plane.point(u, z);
        Ok(inside(p, grid) && double_los(p, q, h)?)
    };
    let step_angle = q.angle_step_deg.to_radians();
    let mut evaluations = 0usize;
    let mut travel = 0.0;

    // walks the circle through (u, z) about (0, oz); the first clear point
    // strictly below `ceiling` and above z_min wins
    let circle = |u: f64, z: f64, ceiling: f64, travel: &mut f64, evaluations: &mut usize| -> Result<Option<(f64, f64)>> {
        let r = u.hypot(z - plane.oz);
        if r == 0.0 {
            return Ok(None);
        }
        let start = u.atan2(z - plane.oz);
        let steps = (std::f64::consts::PI / step_angle).ceil() as usize;
        let mut alive = [true, true];
        for k in 1..=steps {
            for (side, sign) in [1.0, -1.0].into_iter().enumerate() {
                if !alive[side] {
                    continue;
                }
                let a = start + sign * k as f64 * step_angle;
                let (cu, cz) = (r * a.sin(), plane.oz + r * a.cos());
                *travel += r * step_angle;
                if cz < q.z_min || !inside(plane.point(cu, cz), grid) {
                    alive[side] = false;
                    continue;
                }
                if cz >= ceiling {
                    continue;
                }
                *evaluations += 1;
                if clear(cu, cz)? {
                    return Ok(Some((cu, cz)));
                }
            }
            if !alive[0] && !alive[1] {
                break;
            }
        }
        Ok(None)
    };

    // circles through (u, z), then through points further down the radius
    // schedule, until one yields a clear point below `ceiling`
    let schedule = |u: f64, z: f64, ceiling: f64, travel: &mut f64, evaluations: &mut usize| -> Result<Option<(f64, f64)>> {
        let r0 = u.hypot(z - plane.oz);
        let mut r = r0;
        while r > 0.0 {
            let (su, sz) = (u * r / r0, plane.oz + (z - plane.oz) * r / r0);
            if sz < q.z_min {
                break;
            }
            if r < r0 {
                *travel += q.step_vertical;
            }
            *evaluations += 1;
            if sz < ceiling && clear(su, sz)? {
                return Ok(Some((su, sz)));
            }
            if let Some(p) = circle(su, sz, ceiling, travel, evaluations)? {
                return Ok(Some(p));
            }
            r -= q.step_vertical;
        }
        Ok(None)
    };

    let (mut u, mut z) = (0.0, q.z_max);
    evaluations += 1;
    if !clear(u, z)? {
        match schedule(u, z, f64::INFINITY, &mut travel, &mut evaluations)? {
            Some(p) => (u, z) = p,
            None => {
                return Err(Error::Infeasible(format!(
                    "no point with both users in line of sight on the bisector plane below radius {}",
                    q.z_max - plane.oz
                )))
            }
        }
    }

    for _ in 0..q.max_rounds {
        if z <= q.z_min {
            break;
        }
        let nz = (z - q.step_vertical).max(q.z_min);
        travel += z - nz;
        evaluations += 1;
        if clear(u, nz)? {
            z = nz;
            continue;
        }
        match schedule(u, nz, z, &mut travel, &mut evaluations)? {
            Some(p) => (u, z) = p,
            None => break,
        }
    }
    result(plane.point(u, z), q, model, travel, evaluations)
}

fn lattice(q: &RelayQuery, grid: &GridSpec, mode: SearchMode) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (lo, hi) = grid.extent();
    let axis = |a: f64, b: f64, step: f64| -> Vec<f64> {
        let n = ((b - a) / step).floor() as usize;
        (0..=n).map(|k| a + k as f64 * step).filter(|v| *v <= b).collect()
    };
    let half = 0.5 * q.step_horizontal.min(hi.x - lo.x).min(hi.y - lo.y);
    let xs = axis(lo.x + half, hi.x, q.step_horizontal);
    let ys = axis(lo.y + half, hi.y, q.step_horizontal);
    let zs = match mode {
        SearchMode::TwoD => vec![q.fixed_altitude.clamp(q.z_min, q.z_max)],
        SearchMode::ThreeD => axis(q.z_min, q.z_max, q.step_vertical),
    };
    (xs, ys, zs)
}

/// Scans every lattice point and keeps the clear one with the lowest worst
/// attenuation; ties keep the earlier point in scan order (z, then x, then
/// y). The distance is the length of a serpentine path through the lattice.
pub fn exhaustive_search(q: &RelayQuery, model: &RadioMapModel, mode: SearchMode) -> Result<RelayResult> {
    q.validate()?;
    let (xs, ys, zs) = lattice(q, model.map.grid(), mode);
    let mut points = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &z in &zs {
        for &x in &xs {
            // a point straight above a user has no slant link to it
            points.extend(
                ys.iter()
                    .map(|&y| Point3::new(x, y, z))
                    .filter(|p| p.ground() != q.p1.ground() && p.ground() != q.p2.ground()),
            );
        }
    }
    let scores = par::map(&points, |&p| -> Result<Option<f64>> {
        if !double_los(p, q, &model.map)? {
            return Ok(None);
        }
        Ok(Some(score(p, q, model)?))
    });
    let mut best: Option<(f64, Point3)> = None;
    for (p, s) in points.iter().zip(scores) {
        if let Some(v) = s? {
            if best.is_none_or(|(b, _)| v < b) {
                best = Some((v, *p));
            }
        }
    }
    let layer = (xs.len() * ys.len()).saturating_sub(1) as f64 * q.step_horizontal;
    let distance = layer * zs.len() as f64 + zs.len().saturating_sub(1) as f64 * q.step_vertical;
    let (_, p) = best.ok_or_else(|| Error::Infeasible("no lattice point sees both users".into()))?;
    result(p, q, model, distance, points.len())
}
