//! Repeated integrals of the complementary error function,
//! `iⁿerfc(z) = ∫_z^∞ iⁿ⁻¹erfc(t) dt`, with
//! `iⁿerfc(z) = (2/√π) ∫_z^∞ (u − z)ⁿ e^{−u²} du / n!`.
//!
//! They obey `2n·Iₙ = Iₙ₋₂ − 2z·Iₙ₋₁` with `I₋₁ = (2/√π) e^{−z²}` and
//! `I₀ = erfc z`. Upward recurrence is stable only while the growing
//! companion solution stays small, so arguments with a sizeable positive
//! real part use Miller's backward recurrence on the ratios `Iₙ/Iₙ₋₁`.

use super::erfc::{erfc_complex, erfcx_complex, FRAC_2_SQRT_PI};
use crate::{Error, Result};
use num_complex::Complex64;

/// Largest order served by [`repeated_erfc_integral`].
pub const MAX_ORDER: usize = 1024;

const MILLER_START_CAP: usize = 1 << 17;

/// `I(m, z) = iᵐerfc(z)`.
pub fn repeated_erfc_integral(m: usize, z: Complex64) -> Result<Complex64> {
    Ok(ierfc_table(m, z)?[m])
}

/// `[I(0, z), …, I(n_max, z)]`.
pub fn ierfc_table(n_max: usize, z: Complex64) -> Result<Vec<Complex64>> {
    if n_max > MAX_ORDER {
        return Err(Error::OrderCap {
            order: n_max,
            cap: MAX_ORDER,
        });
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite argument {z}")));
    }
    // Growth of the companion solution relative to the wanted one.
    let growth = 2.0 * z.re * (2.0 * n_max as f64).sqrt() + 2.0 * z.re * z.norm();
    if z.re <= 0.0 || growth < 7.0 {
        return Ok(forward(n_max, z));
    }
    miller(n_max, z)
}

fn forward(n_max: usize, z: Complex64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut prev = FRAC_2_SQRT_PI * (-z * z).exp();
    let mut cur = erfc_complex(z);
    out.push(cur);
    for n in 1..=n_max {
        let next = (prev - 2.0 * z * cur) / (2.0 * n as f64);
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// Backward ratio recurrence `r_{n−1} = 1 / (2z + 2n·r_n)` from a start
/// order that doubles until the table settles; the scaled `I₀` then fixes
/// the normalisation.
fn miller(n_max: usize, z: Complex64) -> Result<Vec<Complex64>> {
    let i0_scaled = erfcx_complex(z);
    let scale = (-z * z).exp();
    let mut start = (2 * n_max + 32).max(64);
    let mut last: Option<Vec<Complex64>> = None;
    loop {
        let mut ratios = vec![Complex64::new(0.0, 0.0); n_max + 1];
        let mut r = Complex64::new(0.0, 0.0);
        for n in (1..=start).rev() {
            r = 1.0 / (2.0 * z + 2.0 * n as f64 * r);
            if (1..=n_max).contains(&(n - 1)) {
                ratios[n - 1] = r;
            }
        }
        let mut table = Vec::with_capacity(n_max + 1);
        let mut v = i0_scaled;
        table.push(v);
        for ratio in ratios.iter().skip(1) {
            v *= ratio;
            table.push(v);
        }
        if let Some(prev) = &last {
            let settled = prev
                .iter()
                .zip(&table)
                .all(|(a, b)| (a - b).norm() <= 1e-14 * b.norm());
            if settled {
                return Ok(table.into_iter().map(|v| v * scale).collect());
            }
        }
        last = Some(table);
        start *= 2;
        if start > MILLER_START_CAP {
            return Err(Error::OrderCap {
                order: n_max,
                cap: MAX_ORDER,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    }

    /// `(2/√π) ∫₀^∞ sᵐ e^{−(z+s)²} ds / m!` by composite Gauss–Legendre.
    fn oracle(m: usize, z: Complex64) -> Complex64 {
        let gl = gauss_legendre(24);
        let t = 12.0 + m as f64;
        let panels = 600;
        let h = t / panels as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..panels {
            for &(x, w) in &gl {
                let s = p as f64 * h + 0.5 * h * (x + 1.0);
                acc += 0.5 * h * w * s.powi(m as i32) * (-(z + s) * (z + s)).exp();
            }
        }
        let fact: f64 = (1..=m).map(|k| k as f64).product();
        FRAC_2_SQRT_PI * acc / fact
    }

    #[test]
    fn low_orders() {
        let z = Complex64::new(0.7, -0.3);
        assert_eq!(repeated_erfc_integral(0, z).unwrap(), erfc_complex(z));
        let i1 = repeated_erfc_integral(1, Complex64::new(0.0, 0.0)).unwrap();
        assert!((i1.re - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert!((i1.re - 0.564_190).abs() < 1e-6);
    }

    #[test]
    fn matches_quadrature() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let z = Complex64::new(rng.random_range(-2.5..4.0), rng.random_range(-4.0..4.0));
            let m = rng.random_range(0..=6);
            let got = repeated_erfc_integral(m, z).unwrap();
            let want = oracle(m, z);
            assert!((got - want).norm() <= 1e-8 * want.norm(), "m={m} z={z} got={got} want={want}");
        }
    }

    #[test]
    fn high_orders_on_the_diagonal_are_consistent() {
        // both evaluation routes agree where each is usable
        for r in [0.2, 1.0, 3.0, 8.0, 25.0] {
            let z = Complex64::from_polar(r, PI / 4.0);
            let t = ierfc_table(128, z).unwrap();
            let m = miller(128, z).unwrap();
            for n in 0..=128 {
                assert!((t[n] - m[n]).norm() <= 1e-10 * m[n].norm(), "r={r} n={n}");
            }
            for n in 2..=128 {
                let lhs = 2.0 * n as f64 * t[n];
                let rhs = t[n - 2] - 2.0 * z * t[n - 1];
                assert!((lhs - rhs).norm() <= 1e-9 * t[n - 2].norm());
            }
        }
    }

    #[test]
    fn order_cap() {
        assert!(matches!(
            repeated_erfc_integral(MAX_ORDER + 1, Complex64::new(1.0, 1.0)),
            Err(Error::OrderCap { .. })
        ));
    }
}
