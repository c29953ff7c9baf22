/// Adam with a global-norm gradient clip and a box constraint on the
/// parameters.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    clip: f64,
    lo: f64,
    hi: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Adam {
    pub fn new(len: usize, lr: f64, clip: f64, bounds: (f64, f64)) -> Self {
        Self {
            lr,
            clip,
            lo: bounds.0,
            hi: bounds.1,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = if norm > self.clip { self.clip / norm } else { 1.0 };
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (k, p) in params.iter_mut().enumerate() {
            let g = grad[k] * scale;
            self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * g;
            self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * g * g;
            if self.v[k] == 0.0 {
                continue;
            }
            let step = self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + EPS);
            *p = (*p - step).clamp(self.lo, self.hi);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic_and_respects_bounds() {
        let mut p = vec![5.0, -3.0, 9.0];
        let target = [1.0, 2.0, 20.0];
        let mut opt = Adam::new(3, 0.1, 100.0, (0.0, 10.0));
        for _ in 0..2000 {
            let g: Vec<f64> = p.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            opt.step(&mut p, &g);
            assert!(p.iter().all(|v| (0.0..=10.0).contains(v)));
        }
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] - 2.0).abs() < 1e-3);
        assert_eq!(p[2], 10.0);
    }

    #[test]
    fn untouched_parameters_stay_put() {
        let mut p = vec![3.0, 4.0];
        let mut opt = Adam::new(2, 1.0, 1.0, (0.0, 10.0));
        opt.step(&mut p, &[0.0, 1.0]);
        assert_eq!(p[0], 3.0);
        assert!((p[1] - 3.0).abs() < 1e-6);
    }
}
