use crate::geometry::Link;
use crate::par;
use crate::propagation::Measurement;
use crate::{Error, Result};

pub const KNN_DEFAULT_K: usize = 6;
pub const KNN_DEFAULT_BANDWIDTH: f64 = 50.0;

fn coords(l: &Link) -> [f64; 6] {
    [l.tx.x, l.tx.y, l.tx.z, l.rx.x, l.rx.y, l.rx.z]
}

/// Gaussian-kernel mean of the `k` nearest training links, with distance
/// measured between the stacked 6D endpoint coordinates and weights
/// `exp(−‖·‖² / (2s²))`. Equal distances keep the lower sample index.
pub fn knn_predict(train: &[Measurement], query: &Link, k: usize, s: f64) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("KNN needs a nonempty training set".into()));
    }
    if k == 0 || train.len() < k {
        return Err(Error::InvalidArgument(format!("k = {k} needs 1 <= k <= {}", train.len())));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {s}")));
    }
    let q = coords(query);
    // (squared distance, index), kept sorted ascending
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, m) in train.iter().enumerate() {
        let c = coords(&m.link);
        let d2: f64 = c.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.len() == k && d2 >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d2);
        best.insert(pos, (d2, i));
        best.truncate(k);
    }
    // shifting by the nearest distance leaves the normalized weights unchanged
    let d_min = best[0].0;
    let (mut num, mut den) = (0.0, 0.0);
    for &(d2, i) in &best {
        let w = (-(d2 - d_min) / (2.0 * s * s)).exp();
        num += w * train[i].y;
        den += w;
    }
    Ok(num / den)
}

pub fn knn_predict_many(train: &[Measurement], queries: &[Link], k: usize, s: f64) -> Result<Vec<f64>> {
    par::map(queries, |q| knn_predict(train, q, k, s)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(tx: (f64, f64, f64), y: f64) -> Measurement {
        Measurement {
            link: Link::new(Point3::new(tx.0, tx.1, tx.2), Point3::new(0.0, 0.0, 1.5)).unwrap(),
            y,
        }
    }

    #[test]
    fn coincident_neighbours() {
        let train = vec![m((10.0, 0.0, 5.0), 7.0); 6];
        assert_eq!(knn_predict(&train, &train[0].link, 6, 50.0).unwrap(), 7.0);
    }

    #[test]
    fn kernel_weight_at_one_bandwidth() {
        let train = vec![m((10.0, 0.0, 5.0), 0.0), m((60.0, 0.0, 5.0), 1.0)];
        let q = train[0].link;
        let v = knn_predict(&train, &q, 2, 50.0).unwrap();
        let w = (-0.5f64).exp();
        assert!((w - 0.6065).abs() < 1e-4);
        assert!((v - w / (1.0 + w)).abs() < 1e-15);
    }

    #[test]
    fn k1_and_ties() {
        let train = vec![m((10.0, 0.0, 5.0), 1.0), m((30.0, 0.0, 5.0), 2.0), m((30.0, 0.0, 5.0), 3.0)];
        let q = Link::new(Point3::new(29.0, 0.0, 5.0), Point3::new(0.0, 0.0, 1.5)).unwrap();
        assert_eq!(knn_predict(&train, &q, 1, 50.0).unwrap(), 2.0);
        assert!(knn_predict(&[], &q, 1, 50.0).is_err());
        assert!(knn_predict(&train, &q, 4, 50.0).is_err());
    }

    #[test]
    fn convex_combination_and_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let train: Vec<Measurement> = (0..300)
            .map(|_| m((rng.random_range(1.0..100.0), rng.random_range(0.0..100.0), rng.random_range(5.0..50.0)), rng.random_range(60.0..140.0)))
            .collect();
        for _ in 0..50 {
            let q = Link::new(Point3::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0), 20.0), Point3::new(1.0, 1.0, 1.5)).unwrap();
            let v = knn_predict(&train, &q, 6, 20.0).unwrap();
            let mut all: Vec<(f64, usize)> = train
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let (a, b) = (coords(&t.link), coords(&q));
                    (a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum(), i)
                })
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let near = &all[..6];
            let lo = near.iter().map(|&(_, i)| train[i].y).fold(f64::INFINITY, f64::min);
            let hi = near.iter().map(|&(_, i)| train[i].y).fold(f64::NEG_INFINITY, f64::max);
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            let (num, den) = near.iter().fold((0.0, 0.0), |(n, d), &(d2, i)| {
                let w = (-d2 / 800.0f64).exp();
                (n + w * train[i].y, d + w)
            });
            assert!((v - num / den).abs() < 1e-9);
        }
    }
}
