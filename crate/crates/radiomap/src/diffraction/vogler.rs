//! Vogler's series for attenuation over `N` successive knife edges.
//!
//! With `β_i = θ_i √(jπ d_i d_{i+1} / (λ(d_i + d_{i+1})))`,
//! `φ_i = √(d_i d_{i+2} / ((d_i + d_{i+1})(d_{i+1} + d_{i+2})))` and
//! `C_N = √(Σd · Π_{i=2}^{N} d_i / Π_{i=1}^{N} (d_i + d_{i+1}))`,
//!
//! ```text
//! F_N = C_N e^{σ_N} / 2^N · Σ_{k_1..k_{N-1}} Π_i (2φ_i)^{k_i}/k_i!
//!                          · Π_i (k_{i-1}+k_i)! I(k_{i-1}+k_i, β_i)
//! ```
//!
//! with `k_0 = k_N = 0`, `σ_N = Σ_{i<N} β_i²` and `I(n, β) = iⁿerfc β`.
//! Terms are grouped by total order `m = Σ k_i` and accumulated with a
//! dynamic program over the edges whose state is `(k_i, partial order)`.

use super::erfc::{erfc_complex, FRAC_2_SQRT_PI};
use super::repeated::ierfc_table;
use super::{VoglerConfig, VoglerMethod, VoglerResult};
use crate::geometry::DiffractionPath;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{LN_10, PI};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn vogler_attenuation(path: &DiffractionPath, cfg: &VoglerConfig) -> Result<VoglerResult> {
    Ok(evaluate(path, cfg, false)?.0)
}

/// Attenuation plus `∂(excess dB)/∂θ_i` for every edge.
pub fn vogler_with_gradient(path: &DiffractionPath, cfg: &VoglerConfig) -> Result<(VoglerResult, Vec<f64>)> {
    evaluate(path, cfg, true)
}

pub(crate) fn edge_scale(d1: f64, d2: f64, wavelength: f64) -> Complex64 {
    Complex64::from_polar((PI * d1 * d2 / (wavelength * (d1 + d2))).sqrt(), PI / 4.0)
}

fn db_from(f: Complex64) -> f64 {
    -20.0 * f.norm().log10()
}

/// `∂(−20 log10|S|)/∂x` given `∂S/∂x`.
fn db_derivative(s: Complex64, ds: Complex64) -> f64 {
    -20.0 / LN_10 * (s.conj() * ds).re / s.norm_sqr()
}

fn evaluate(path: &DiffractionPath, cfg: &VoglerConfig, want_grad: bool) -> Result<(VoglerResult, Vec<f64>)> {
    cfg.validate()?;
    let n = path.angles.len();
    let d = &path.distances;
    if n == 0 {
        return Err(Error::Precondition("attenuation needs at least one knife edge".into()));
    }
    if d.len() != n + 1 || d.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("distances must be positive and one more than the edges".into()));
    }
    let kappa: Vec<Complex64> = (0..n).map(|i| edge_scale(d[i], d[i + 1], cfg.wavelength)).collect();
    let beta: Vec<Complex64> = (0..n).map(|i| path.angles[i] * kappa[i]).collect();

    if n == 1 || n > cfg.max_edges_exact {
        // single edge is exact; many edges fall back to a product of single edges
        let mut f = Complex64::new(1.0, 0.0);
        let mut grad = Vec::new();
        for i in 0..n {
            let e = erfc_complex(beta[i]);
            f *= 0.5 * e;
            if want_grad {
                let de = -FRAC_2_SQRT_PI * (-beta[i] * beta[i]).exp() * kappa[i];
                grad.push(db_derivative(e, de));
            }
        }
        let method = if n == 1 { VoglerMethod::Exact } else { VoglerMethod::Pairwise };
        return Ok((
            VoglerResult {
                f,
                excess_loss_db: db_from(f),
                terms_used: 1,
                converged: true,
                method,
            },
            grad,
        ));
    }

    let phi: Vec<f64> = (0..n - 1)
        .map(|i| (d[i] * d[i + 2] / ((d[i] + d[i + 1]) * (d[i + 1] + d[i + 2]))).sqrt())
        .collect();
    let total: f64 = d.iter().sum();
    let mut cn2 = total;
    for i in 0..n {
        if i >= 1 {
            cn2 *= d[i];
        }
        cn2 /= d[i] + d[i + 1];
    }
    let cn = cn2.sqrt();
    let sigma: Complex64 = beta[..n - 1].iter().map(|b| b * b).sum();
    let prefactor = cn / 2f64.powi(n as i32) * sigma.exp();

    let mut order_cap = 16.min(cfg.max_series_terms);
    loop {
        let series = Series::new(&beta, &phi, order_cap)?;
        let terms = series.orders(None);
        let (used, converged) = truncation(&terms, cfg.series_tolerance);
        let last_try = order_cap >= cfg.max_series_terms;
        if converged || last_try {
            let s: Complex64 = terms[..used].iter().sum();
            let f = prefactor * s;
            let grad = if want_grad {
                (0..n)
                    .map(|j| {
                        let ds: Complex64 = series.orders(Some(j))[..used].iter().sum();
                        db_derivative(s, ds * kappa[j])
                    })
                    .collect()
            } else {
                Vec::new()
            };
            return Ok((
                VoglerResult {
                    f,
                    excess_loss_db: db_from(f),
                    terms_used: used,
                    converged,
                    method: VoglerMethod::Exact,
                },
                grad,
            ));
        }
        order_cap = (order_cap * 2).min(cfg.max_series_terms);
    }
}

/// Number of leading terms to keep and whether the tail test passed: the
/// last two kept terms must each be below `tol` relative to the partial sum.
fn truncation(terms: &[Complex64], tol: f64) -> (usize, bool) {
    let mut partial = ZERO;
    let mut quiet = 0;
    for (m, t) in terms.iter().enumerate() {
        partial += t;
        if m >= 1 && t.norm() <= tol * partial.norm() {
            quiet += 1;
            if quiet == 2 {
                return (m + 1, true);
            }
        } else {
            quiet = 0;
        }
    }
    (terms.len(), false)
}

struct Series {
    /// `n! I(n, β_i)` per edge.
    g: Vec<Vec<Complex64>>,
    /// `d/dβ [n! I(n, β_i)]` per edge.
    dg: Vec<Vec<Complex64>>,
    /// `(2φ_i)^k / k!` per coupling.
    a: Vec<Vec<f64>>,
    cap: usize,
}

impl Series {
    fn new(beta: &[Complex64], phi: &[f64], cap: usize) -> Result<Self> {
        let mut g = Vec::with_capacity(beta.len());
        let mut dg = Vec::with_capacity(beta.len());
        for b in beta {
            let table = ierfc_table(cap, *b)?;
            let mut gi = Vec::with_capacity(cap + 1);
            let mut fact = 1.0;
            for (k, v) in table.iter().enumerate() {
                if k > 0 {
                    fact *= k as f64;
                }
                gi.push(fact * v);
            }
            let mut dgi = Vec::with_capacity(cap + 1);
            dgi.push(-FRAC_2_SQRT_PI * (-b * b).exp());
            for k in 1..=cap {
                dgi.push(-(k as f64) * gi[k - 1]);
            }
            g.push(gi);
            dg.push(dgi);
        }
        let a = phi
            .iter()
            .map(|p| {
                let mut row = Vec::with_capacity(cap);
                let mut v = 1.0;
                for k in 0..cap {
                    if k > 0 {
                        v *= 2.0 * p / k as f64;
                    }
                    row.push(v);
                }
                row
            })
            .collect();
        Ok(Self { g, dg, a, cap })
    }

    /// Series terms by total order `m < cap`; with `Some(j)` edge `j` uses
    /// the β-derivative of its integrals.
    fn orders(&self, diff: Option<usize>) -> Vec<Complex64> {
        let n = self.g.len();
        let cap = self.cap;
        let pick = |i: usize| if diff == Some(i) { &self.dg[i] } else { &self.g[i] };

        // table[k][m]: k = current k_i, m = orders used so far
        let mut table = vec![vec![ZERO; cap]; cap];
        let g0 = pick(0);
        for k in 0..cap {
            table[k][k] = self.a[0][k] * g0[k];
        }
        for i in 1..n - 1 {
            let gi = pick(i);
            let ai = &self.a[i];
            let mut next = vec![vec![ZERO; cap]; cap];
            for k in 0..cap {
                for m in k..cap {
                    let mut acc = ZERO;
                    let prev_m = m - k;
                    for kp in 0..=prev_m {
                        let t = table[kp][prev_m];
                        if t != ZERO {
                            acc += t * gi[kp + k];
                        }
                    }
                    next[k][m] = ai[k] * acc;
                }
            }
            table = next;
        }
        let gl = pick(n - 1);
        (0..cap)
            .map(|m| (0..=m).map(|kp| table[kp][m] * gl[kp]).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn cfg() -> VoglerConfig {
        VoglerConfig {
            wavelength: 0.05,
            ..VoglerConfig::default()
        }
    }

    #[test]
    fn single_edge_is_half_erfc() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (d1, d2, th) = (rng.random_range(1.0..500.0), rng.random_range(1.0..500.0), rng.random_range(0.0..0.5));
            let p = DiffractionPath::from_angles(vec![d1, d2], vec![th]).unwrap();
            let r = vogler_attenuation(&p, &cfg()).unwrap();
            let want = 0.5 * erfc_complex(th * edge_scale(d1, d2, 0.05));
            assert!((r.f - want).norm() <= 1e-10 * want.norm());
        }
    }

    #[test]
    fn grazing_edges() {
        let p = DiffractionPath::from_angles(vec![30.0, 70.0], vec![0.0]).unwrap();
        let r = vogler_attenuation(&p, &cfg()).unwrap();
        assert!((r.f - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((r.excess_loss_db - 6.0206).abs() < 1e-3);

        // two grazing edges: 1/4 + asin(φ)/(2π); equal spacing gives 1/3
        let p = DiffractionPath::from_angles(vec![10.0, 10.0, 10.0], vec![0.0, 0.0]).unwrap();
        let r = vogler_attenuation(&p, &cfg()).unwrap();
        assert!(r.converged);
        assert!((r.f - Complex64::new(1.0 / 3.0, 0.0)).norm() < 1e-8, "{}", r.f);
        let d: [f64; 3] = [12.0, 40.0, 7.0];
        let phi = (d[0] * d[2] / ((d[0] + d[1]) * (d[1] + d[2]))).sqrt();
        let p = DiffractionPath::from_angles(d.to_vec(), vec![0.0, 0.0]).unwrap();
        let r = vogler_attenuation(&p, &cfg()).unwrap();
        assert!((r.f.re - (0.25 + phi.asin() / (2.0 * PI))).abs() < 1e-8);
    }

    #[test]
    fn rejects_empty_path() {
        let p = DiffractionPath::from_angles(vec![10.0], vec![]).unwrap();
        assert!(matches!(vogler_attenuation(&p, &cfg()), Err(Error::Precondition(_))));
    }

    #[test]
    fn magnitude_bounded_and_loss_nonnegative() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let n = rng.random_range(1..=5);
            let d: Vec<f64> = (0..=n).map(|_| rng.random_range(2.0..200.0)).collect();
            let th: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.3)).collect();
            let p = DiffractionPath::from_angles(d, th).unwrap();
            let r = vogler_attenuation(&p, &cfg()).unwrap();
            if r.converged {
                assert!(r.f.norm() <= 1.0 + 1e-9);
                assert!(r.excess_loss_db >= -1e-8);
            }
            assert!(r.terms_used <= cfg().max_series_terms);
        }
    }

    #[test]
    fn converged_results_pass_tail_test() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.random_range(2..=4);
            let d: Vec<f64> = (0..=n).map(|_| rng.random_range(2.0..200.0)).collect();
            let th: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.2)).collect();
            let p = DiffractionPath::from_angles(d.clone(), th.clone()).unwrap();
            let r = vogler_attenuation(&p, &cfg()).unwrap();
            if !r.converged {
                continue;
            }
            let kappa: Vec<_> = (0..n).map(|i| edge_scale(d[i], d[i + 1], 0.05)).collect();
            let beta: Vec<_> = (0..n).map(|i| th[i] * kappa[i]).collect();
            let phi: Vec<f64> = (0..n - 1)
                .map(|i| (d[i] * d[i + 2] / ((d[i] + d[i + 1]) * (d[i + 1] + d[i + 2]))).sqrt())
                .collect();
            let terms = Series::new(&beta, &phi, 64).unwrap().orders(None);
            let partial: Complex64 = terms[..r.terms_used].iter().sum();
            let last = terms[r.terms_used - 1];
            assert!(last.norm() <= 1e-8 * partial.norm());
        }
    }

    #[test]
    fn excess_loss_is_smooth_in_angle() {
        let p = DiffractionPath::from_angles(vec![40.0, 25.0, 60.0], vec![0.12, 0.07]).unwrap();
        let q = DiffractionPath::from_angles(vec![40.0, 25.0, 60.0], vec![0.12 + 1e-6, 0.07]).unwrap();
        let a = vogler_attenuation(&p, &cfg()).unwrap().excess_loss_db;
        let b = vogler_attenuation(&q, &cfg()).unwrap().excess_loss_db;
        assert!((a - b).abs() < 1e-3);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let tight = VoglerConfig {
            series_tolerance: 1e-15,
            ..cfg()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let n = rng.random_range(1..=3);
            let d: Vec<f64> = (0..=n).map(|_| rng.random_range(5.0..100.0)).collect();
            let th: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.2)).collect();
            let p = DiffractionPath::from_angles(d.clone(), th.clone()).unwrap();
            let (_, g) = vogler_with_gradient(&p, &tight).unwrap();
            for j in 0..n {
                let h = 1e-6;
                let mut tp = th.clone();
                tp[j] += h;
                let mut tm = th.clone();
                tm[j] -= h;
                let lp = vogler_attenuation(&DiffractionPath::from_angles(d.clone(), tp).unwrap(), &tight).unwrap();
                let lm = vogler_attenuation(&DiffractionPath::from_angles(d.clone(), tm).unwrap(), &tight).unwrap();
                let fd = (lp.excess_loss_db - lm.excess_loss_db) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-5 * fd.abs().max(1.0), "fd {fd} analytic {}", g[j]);
            }
        }
    }

    #[test]
    fn many_edges_use_pairwise_product() {
        let d = vec![10.0; 11];
        let th = vec![0.05; 10];
        let p = DiffractionPath::from_angles(d, th).unwrap();
        let r = vogler_attenuation(&p, &cfg()).unwrap();
        assert_eq!(r.method, VoglerMethod::Pairwise);
        let single = 0.5 * erfc_complex(0.05 * edge_scale(10.0, 10.0, 0.05));
        assert!((r.f - single.powi(10)).norm() <= 1e-12 * r.f.norm());
    }
}
