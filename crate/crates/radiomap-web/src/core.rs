use radiomap::diffraction::{vogler_attenuation, VoglerConfig};
use radiomap::geometry::DiffractionPath;
use radiomap::propagation::{predict_attenuation, PathLossParams, RadioMapModel};
use radiomap::relay::{exhaustive_search, place_relay, RelayQuery, SearchMode};
use radiomap::scene::{generate_scene, SceneConfig};
use radiomap::{Error, GridSpec, Link, Point3, Result};

pub fn diffraction_sweep(
    edges: usize,
    spacing: f64,
    wavelength: f64,
    theta_min: f64,
    theta_max: f64,
    samples: usize,
) -> Result<Vec<f64>> {
    if !(1..=3).contains(&edges) {
        return Err(Error::InvalidArgument(format!("edges must be 1, 2 or 3, got {edges}")));
    }
    if samples < 2 || !(theta_max > theta_min) {
        return Err(Error::InvalidArgument("need at least two samples over a nonempty range".into()));
    }
    let cfg = VoglerConfig {
        wavelength,
        ..VoglerConfig::default()
    };
    (0..samples)
        .map(|k| {
            let th = theta_min + (theta_max - theta_min) * k as f64 / (samples - 1) as f64;
            let path = DiffractionPath::from_angles(vec![spacing; edges + 1], vec![th; edges])?;
            Ok(vogler_attenuation(&path, &cfg)?.excess_loss_db)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relay {
    pub position: Point3,
    pub worst_db: f64,
    pub search_distance: f64,
    pub exhaustive_db: f64,
    pub exhaustive_distance: f64,
}

impl Relay {
    pub fn to_vec(self) -> Vec<f64> {
        vec![
            self.position.x,
            self.position.y,
            self.position.z,
            self.worst_db,
            self.search_distance,
            self.exhaustive_db,
            self.exhaustive_distance,
        ]
    }
}

pub struct Scene {
    model: RadioMapModel,
}

impl Scene {
    /// Square scene of `size` cells with block heights in `[10, max_height]`.
    pub fn generate(seed: u64, size: usize, cell_size: f64, density: f64, max_height: f64) -> Result<Self> {
        let cfg = SceneConfig {
            rows: size,
            cols: size,
            cell_size,
            density,
            height_range: (10.0, max_height),
            ..SceneConfig::default()
        };
        let map = generate_scene(&cfg, seed)?;
        Ok(Self {
            model: RadioMapModel::new(map, PathLossParams::default(), VoglerConfig::default()),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.model.map.grid()
    }

    pub fn heights(&self) -> Vec<f64> {
        self.model.map.as_slice().to_vec()
    }

    pub fn heatmap(&self, tx: Point3, rx_height: f64) -> Result<Vec<f64>> {
        let g = *self.grid();
        let mut out = Vec::with_capacity(g.len());
        for r in 0..g.rows {
            for c in 0..g.cols {
                let p = g.cell_center(r, c);
                let rx = Point3::new(p.x, p.y, rx_height);
                out.push(if p == tx.ground() {
                    f64::NAN
                } else {
                    predict_attenuation(&Link::new(tx, rx)?, &self.model)?
                });
            }
        }
        Ok(out)
    }

    pub fn relay(&self, p1: Point3, p2: Point3, z_max: f64) -> Result<Relay> {
        let mut q = RelayQuery::new(p1, p2, self.grid());
        q.z_max = z_max;
        let placed = place_relay(&q, &self.model)?;
        let best = exhaustive_search(&q, &self.model, SearchMode::ThreeD)?;
        Ok(Relay {
            position: placed.position,
            worst_db: placed.worst_attenuation_db,
            search_distance: placed.search_distance,
            exhaustive_db: best.worst_attenuation_db,
            exhaustive_distance: best.search_distance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use radiomap::geometry::hard_los;

    #[test]
    fn sweep_passes_six_db_at_grazing() {
        let v = diffraction_sweep(1, 100.0, 0.05, -0.1, 0.1, 21).unwrap();
        assert_eq!(v.len(), 21);
        assert!((v[10] - 6.0206).abs() < 1e-3);
        // Fresnel ripple above the edge never gains more than about 1.37 dB.
        assert!(v.iter().all(|x| *x > -1.4));
        assert!(v[0] < 1.0 && v[20] > 20.0);
    }

    #[test]
    fn more_edges_lose_more() {
        let one = diffraction_sweep(1, 50.0, 0.05, 0.02, 0.1, 5).unwrap();
        let three = diffraction_sweep(3, 50.0, 0.05, 0.02, 0.1, 5).unwrap();
        assert!(one.iter().zip(&three).all(|(a, b)| b > a));
    }

    #[test]
    fn sweep_rejects_bad_input() {
        assert!(diffraction_sweep(0, 10.0, 0.05, 0.0, 0.1, 5).is_err());
        assert!(diffraction_sweep(4, 10.0, 0.05, 0.0, 0.1, 5).is_err());
        assert!(diffraction_sweep(1, 10.0, 0.05, 0.1, 0.1, 5).is_err());
        assert!(diffraction_sweep(1, 10.0, -1.0, 0.0, 0.1, 5).is_err());
    }

    #[test]
    fn heatmap_covers_every_cell() {
        let s = Scene::generate(3, 16, 5.0, 0.2, 40.0).unwrap();
        let tx = Point3::new(42.5, 42.5, 60.0);
        let v = s.heatmap(tx, 1.5).unwrap();
        assert_eq!(v.len(), 256);
        assert!(v[8 * 16 + 8].is_nan());
        assert_eq!(v.iter().filter(|x| x.is_nan()).count(), 1);
        let near = v[8 * 16 + 9];
        let far = v[0];
        assert!(near.is_finite() && far.is_finite());
        assert_eq!(s.heights().len(), 256);
    }

    #[test]
    fn relay_sees_both_users() {
        let s = Scene::generate(3, 32, 5.0, 0.2, 40.0).unwrap();
        let (p1, p2) = (Point3::new(12.5, 82.5, 1.5), Point3::new(147.5, 37.5, 1.5));
        let r = s.relay(p1, p2, 120.0).unwrap();
        for p in [p1, p2] {
            assert!(hard_los(&Link::new(r.position, p).unwrap(), &s.model.map).unwrap());
        }
        assert!(r.search_distance < r.exhaustive_distance);
        assert!(r.worst_db.is_finite() && r.exhaustive_db.is_finite());
        assert_eq!(r.to_vec().len(), 7);
    }
}
