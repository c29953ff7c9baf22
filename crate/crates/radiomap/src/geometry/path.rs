use super::features::trace_is_los;
use super::{trace_cells, CellTrace, Link, ObstacleMap, Point2};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathVertex {
    pub ground: Point2,
    /// Profile distance from the TX.
    pub distance: f64,
    pub altitude: f64,
    /// Obstacle cell under the vertex; `None` for the TX and RX.
    pub cell: Option<usize>,
}

/// Knife-edge chain from TX to RX: `N` edges, `N + 1` horizontal distances
/// and `N` diffraction angles.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffractionPath {
    pub vertices: Vec<PathVertex>,
    pub distances: Vec<f64>,
    pub angles: Vec<f64>,
}

impl DiffractionPath {
    pub fn edges(&self) -> usize {
        self.angles.len()
    }

    /// Chain with the given horizontal spacing and angles, built as a curve
    /// in the vertical plane starting at the origin. Useful for feeding
    /// arbitrary geometries to the attenuation routines.
    pub fn from_angles(distances: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        if distances.len() != angles.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} angles need {} distances, got {}",
                angles.len(),
                angles.len() + 1,
                distances.len()
            )));
        }
        if distances.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidArgument("distances must be positive".into()));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("angles must be finite".into()));
        }
        let total: f64 = angles.iter().sum();
        let mut elev = 0.5 * total;
        let (mut s, mut h) = (0.0, 0.0);
        let mut vertices = vec![PathVertex {
            ground: Point2::new(0.0, 0.0),
            distance: 0.0,
            altitude: 0.0,
            cell: None,
        }];
        for (k, d) in distances.iter().enumerate() {
            s += d;
            h += d * elev.tan();
            vertices.push(PathVertex {
                ground: Point2::new(s, 0.0),
                distance: s,
                altitude: h,
                cell: None,
            });
            if let Some(a) = angles.get(k) {
                elev -= a;
            }
        }
        Ok(Self {
            vertices,
            distances,
            angles,
        })
    }

    /// Length of the 3D vertex chain.
    pub fn curve_length(&self) -> f64 {
        self.vertices
            .windows(2)
            .zip(&self.distances)
            .map(|(w, d)| d.hypot(w[1].altitude - w[0].altitude))
            .sum()
    }
}

/// Knife-edge vertices of a blocked link: the upper hull of the traced
/// obstacle tops between TX and RX.
pub fn extract_diffraction_path(link: &Link, h: &ObstacleMap) -> Result<DiffractionPath> {
    let trace = trace_cells(link, h.grid())?;
    if trace_is_los(&trace, h.as_slice()) {
        return Err(Error::Precondition("diffraction path requested for a LOS link".into()));
    }
    Ok(path_from_trace(link, &trace, h.as_slice()))
}

/// Upper hull walk from the TX. At each base vertex the next vertex is the
/// later profile point with the greatest elevation slope; equal slopes
/// resolve to the farthest point so collinear tops collapse to one edge.
pub(crate) fn path_from_trace(link: &Link, trace: &CellTrace, heights: &[f64]) -> DiffractionPath {
    let prof = &trace.profile;
    let d0 = prof.d0;
    let mut pts: Vec<(f64, f64, Option<usize>)> = Vec::with_capacity(trace.len() + 2);
    pts.push((0.0, link.tx.z, None));
    pts.extend(trace.iter().map(|c| (c.distance, heights[c.index], Some(c.index))));
    pts.push((d0, link.rx.z, None));

    let last = pts.len() - 1;
    let mut chain = vec![0usize];
    let mut base = 0usize;
    while base != last {
        let (sb, hb, _) = pts[base];
        let mut best = last;
        let mut best_slope = f64::NEG_INFINITY;
        for (j, &(sj, hj, _)) in pts.iter().enumerate().skip(base + 1) {
            if sj <= sb {
                continue;
            }
            let slope = (hj - hb) / (sj - sb);
            if slope >= best_slope {
                best_slope = slope;
                best = j;
            }
        }
        chain.push(best);
        base = best;
    }

    if chain.len() == 2 {
        // Grazing or below-ground blockage: the hull has no interior vertex,
        // so the deepest blocking cell becomes a single edge.
        let mut pick: Option<(f64, usize)> = None;
        for (k, c) in trace.iter().enumerate() {
            let hm = heights[c.index];
            if c.altitude <= 0.0 || hm >= c.altitude {
                let excess = hm - c.altitude;
                if pick.is_none_or(|(e, _)| excess >= e) {
                    pick = Some((excess, k + 1));
                }
            }
        }
        if let Some((_, k)) = pick {
            chain.insert(1, k);
        }
    }

    let vertices: Vec<PathVertex> = chain
        .iter()
        .map(|&k| {
            let (s, a, cell) = pts[k];
            PathVertex {
                ground: prof.point_at(s),
                distance: s,
                altitude: a,
                cell,
            }
        })
        .collect();
    let distances: Vec<f64> = vertices.windows(2).map(|w| w[1].distance - w[0].distance).collect();
    let angles = (1..vertices.len() - 1)
        .map(|i| {
            let (p, v, n) = (&vertices[i - 1], &vertices[i], &vertices[i + 1]);
            let th = ((v.altitude - n.altitude) / distances[i]).atan()
                + ((v.altitude - p.altitude) / distances[i - 1]).atan();
            th.max(0.0)
        })
        .collect();
    DiffractionPath {
        vertices,
        distances,
        angles,
    }
}
