//! Complementary error function of complex argument via the Faddeeva
//! function `w(z) = e^{-z²} erfc(-iz)`.
//!
//! `w` uses the Zaghloul–Ali sums (ACM TOMS Algorithm 916) for moderate
//! arguments and a continued fraction for large ones, with the region
//! split popularised by the MIT Faddeeva package.

use num_complex::Complex64;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_286_948_079_451_561;
pub(crate) const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// `erfc(z)` for complex `z`.
pub fn erfc_complex(z: Complex64) -> Complex64 {
    if z.re >= 0.0 {
        (-z * z).exp() * faddeeva_upper(Complex64::new(-z.im, z.re))
    } else {
        Complex64::new(2.0, 0.0) - erfc_complex(-z)
    }
}

/// Scaled complementary error function `e^{z²} erfc(z)`, for `Re z ≥ 0`
/// free of overflow.
pub fn erfcx_complex(z: Complex64) -> Complex64 {
    faddeeva(Complex64::new(-z.im, z.re))
}

/// Faddeeva function `w(z)`.
pub fn faddeeva(z: Complex64) -> Complex64 {
    if z.im >= 0.0 {
        faddeeva_upper(z)
    } else {
        2.0 * (-z * z).exp() - faddeeva_upper(-z)
    }
}

/// Real scaled complementary error function `e^{x²} erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        if x < -26.7 {
            return f64::INFINITY;
        }
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 2.0 {
        // e^{x²} − (2/√π) Σ 2ⁿ x^{2n+1} / (2n+1)!!, all terms positive
        let (x2, mut term, mut sum) = (x * x, x, x);
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= 2.0 * x2 / (2.0 * n + 1.0);
            sum += term;
            if term <= 1e-17 * sum {
                break;
            }
        }
        x2.exp() - FRAC_2_SQRT_PI * sum
    } else {
        // Lentz evaluation of 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))
        let tiny = 1e-300;
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for k in 1..5000 {
            let a = 0.5 * k as f64;
            d = x + a * d;
            d = if d == 0.0 { tiny } else { 1.0 / d };
            c = x + a / c;
            if c == 0.0 {
                c = tiny;
            }
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        FRAC_1_SQRT_PI / f
    }
}

fn sinc(x: f64, sinx: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        sinx / x
    }
}

fn sinh_taylor(x: f64) -> f64 {
    x * (1.0 + x * x * (1.0 / 6.0 + x * x / 120.0))
}

/// `w(z)` for `Im z ≥ 0`.
fn faddeeva_upper(z: Complex64) -> Complex64 {
    const A: f64 = 0.518_321_480_430_085_929_872; // π / sqrt(-ln(ε/2))
    const C: f64 = 0.329_973_702_884_629_072_537; // 2a/π
    const A2: f64 = 0.268_657_157_075_235_951_582;
    const RELERR: f64 = f64::EPSILON;

    let x = z.re.abs();
    let y = z.im;
    debug_assert!(y >= 0.0);

    if x == 0.0 {
        return Complex64::new(erfcx(y), z.re);
    }

    if y > 7.0 || (x > 6.0 && (y > 0.1 || (x > 8.0 && y > 1e-10) || x > 28.0)) {
        let xs = z.re;
        if x + y > 4000.0 {
            if x + y > 1e7 {
                if x > y {
                    let yax = y / xs;
                    let denom = FRAC_1_SQRT_PI / (xs + yax * y);
                    return Complex64::new(denom * yax, denom);
                }
                let xya = xs / y;
                let denom = FRAC_1_SQRT_PI / (xya * xs + y);
                return Complex64::new(denom, denom * xya);
            }
            let (dr, di) = (xs * xs - y * y - 0.5, 2.0 * xs * y);
            let denom = FRAC_1_SQRT_PI / (dr * dr + di * di);
            return Complex64::new(denom * (xs * di - y * dr), denom * (xs * dr + y * di));
        }
        let nu = (3.9 + 11.398 / (0.08254 * x + 0.1421 * y + 0.2023)).floor();
        let (mut wr, mut wi) = (xs, y);
        let mut k = 0.5 * (nu - 1.0);
        while k > 0.4 {
            let denom = k / (wr * wr + wi * wi);
            wr = xs - wr * denom;
            wi = y + wi * denom;
            k -= 0.5;
        }
        let denom = FRAC_1_SQRT_PI / (wr * wr + wi * wi);
        return Complex64::new(denom * wi, denom * wr);
    }

    let (mut sum1, mut sum2, mut sum3, mut sum4, mut sum5) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let ret;
    if x < 10.0 {
        let (mut prod2ax, mut prodm2ax) = (1.0, 1.0);
        let expx2;
        if x < 5e-4 {
            let x2 = x * x;
            expx2 = 1.0 - x2 * (1.0 - 0.5 * x2);
            let ax2 = 2.0 * A * x;
            let exp2ax = 1.0 + ax2 * (1.0 + ax2 * (0.5 + ax2 / 6.0));
            let expm2ax = 1.0 - ax2 * (1.0 - ax2 * (0.5 - ax2 / 6.0));
            let mut n = 1.0f64;
            loop {
                let coef = (-A2 * n * n).exp() * expx2 / (A2 * n * n + y * y);
                prod2ax *= exp2ax;
                prodm2ax *= expm2ax;
                sum1 += coef;
                sum2 += coef * prodm2ax;
                sum3 += coef * prod2ax;
                // sum5 − sum4 accumulated directly
                sum5 += coef * (2.0 * A) * n * sinh_taylor(2.0 * A * n * x);
                if coef * prod2ax < RELERR * sum3 {
                    break;
                }
                n += 1.0;
            }
        } else {
            expx2 = (-x * x).exp();
            let exp2ax = (2.0 * A * x).exp();
            let expm2ax = 1.0 / exp2ax;
            let mut n = 1.0f64;
            loop {
                let coef = (-A2 * n * n).exp() * expx2 / (A2 * n * n + y * y);
                prod2ax *= exp2ax;
                prodm2ax *= expm2ax;
                sum1 += coef;
                sum2 += coef * prodm2ax;
                sum4 += coef * prodm2ax * (A * n);
                sum3 += coef * prod2ax;
                sum5 += coef * prod2ax * (A * n);
                if coef * prod2ax * (A * n) < RELERR * sum5 {
                    break;
                }
                n += 1.0;
            }
        }
        let expx2erfcxy = expx2 * erfcx(y);
        if y > 5.0 {
            let sinxy = (x * y).sin();
            ret = Complex64::new(
                (expx2erfcxy - C * y * sum1) * (2.0 * x * y).cos()
                    + (C * x * expx2) * sinxy * sinc(x * y, sinxy),
                0.0,
            );
        } else {
            let xs = z.re;
            let sinxy = (xs * y).sin();
            let (sin2xy, cos2xy) = (2.0 * xs * y).sin_cos();
            let coef1 = expx2erfcxy - C * y * sum1;
            let coef2 = C * xs * expx2;
            ret = Complex64::new(
                coef1 * cos2xy + coef2 * sinxy * sinc(xs * y, sinxy),
                coef2 * sinc(2.0 * xs * y, sin2xy) - coef1 * sin2xy,
            );
        }
    } else {
        // x ≥ 10 with y tiny: only sum3 and sum5 matter
        ret = Complex64::new((-x * x).exp(), 0.0);
        let n0 = (x / A + 0.5).floor();
        let dx = A * n0 - x;
        sum3 = (-dx * dx).exp() / (A2 * n0 * n0 + y * y);
        sum5 = A * n0 * sum3;
        let exp1 = (4.0 * A * dx).exp();
        let mut exp1dn = 1.0;
        let mut dn = 1.0f64;
        let mut done = false;
        while n0 - dn > 0.0 {
            let (np, nm) = (n0 + dn, n0 - dn);
            let mut tp = (-(A * dn + dx) * (A * dn + dx)).exp();
            exp1dn *= exp1;
            let mut tm = tp * exp1dn;
            tp /= A2 * np * np + y * y;
            tm /= A2 * nm * nm + y * y;
            sum3 += tp + tm;
            sum5 += A * (np * tp + nm * tm);
            if A * (np * tp + nm * tm) < RELERR * sum5 {
                done = true;
                break;
            }
            dn += 1.0;
        }
        if !done {
            loop {
                let np = n0 + dn;
                let tp = (-(A * dn + dx) * (A * dn + dx)).exp() / (A2 * np * np + y * y);
                sum3 += tp;
                sum5 += A * np * tp;
                if A * np * tp < RELERR * sum5 {
                    break;
                }
                dn += 1.0;
            }
        }
    }
    ret + Complex64::new(
        0.5 * C * y * (sum2 + sum3),
        0.5 * C * (sum5 - sum4).copysign(z.re),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Gauss–Legendre nodes/weights on [-1, 1].
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

    /// `erfc(z) = (2/√π) e^{-z²} ∫₀^∞ e^{-2zs − s²} ds` by composite quadrature.
    fn erfc_oracle(z: Complex64) -> Complex64 {
        let gl = gauss_legendre(20);
        let panels = 400;
        let t = 9.0;
        let h = t / panels as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..panels {
            let a = p as f64 * h;
            for &(x, w) in &gl {
                let s = a + 0.5 * h * (x + 1.0);
                acc += 0.5 * h * w * (-2.0 * z * s - s * s).exp();
            }
        }
        FRAC_2_SQRT_PI * (-z * z).exp() * acc
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn real_values() {
        assert_eq!(erfc_complex(Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0));
        let e1 = erfc_complex(Complex64::new(1.0, 0.0));
        assert!((e1.re - 0.157_299_207_050_285_13).abs() < 1e-14);
        assert_eq!(e1.im, 0.0);
        let e2 = erfc_complex(Complex64::new(2.5, 0.0));
        assert!((e2.re - 4.069_520_174_449_589_7e-4).abs() < 1e-16);
        let em = erfc_complex(Complex64::new(-0.5, 0.0));
        assert!((em.re - 1.520_499_877_813_046_5).abs() < 1e-14);
    }

    #[test]
    fn real_erfcx() {
        assert!((erfcx(0.0) - 1.0).abs() < 1e-16);
        assert!((erfcx(1.0) - 0.427_583_576_155_807_0).abs() < 1e-15);
        assert!((erfcx(2.0) - 0.255_395_676_310_505_7).abs() < 2e-15);
        assert!((erfcx(3.0) - 0.179_001_151_181_389_95).abs() < 1e-15);
        assert!((erfcx(30.0) - 0.018_795_888_861_416_75).abs() < 1e-16);
    }

    #[test]
    fn matches_quadrature_on_right_half_disk() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut worst: f64 = 0.0;
        for _ in 0..400 {
            let r = 6.0 * rng.random::<f64>().sqrt();
            let a = rng.random_range(-0.5 * PI..0.5 * PI);
            let z = Complex64::from_polar(r, a);
            worst = worst.max(rel(erfc_complex(z), erfc_oracle(z)));
        }
        for z in [
            Complex64::new(0.0, 6.0),
            Complex64::new(0.0, -3.0),
            Complex64::new(4.2, 4.2),
            Complex64::new(1e-12, 2.0),
            Complex64::new(5.9, 0.3),
        ] {
            worst = worst.max(rel(erfc_complex(z), erfc_oracle(z)));
        }
        assert!(worst < 1e-12, "worst relative error {worst:e}");
    }

    #[test]
    fn large_diagonal_arguments_stay_finite() {
        for r in [10.0, 28.0, 60.0, 300.0] {
            let z = Complex64::from_polar(r, PI / 4.0);
            let v = erfc_complex(z);
            assert!(v.re.is_finite() && v.im.is_finite());
            // asymptotically e^{-z²}/(z√π)
            let asym = (-z * z).exp() / (z * PI.sqrt()) * (1.0 - 0.5 / (z * z));
            assert!(rel(v, asym) < 1.0 / (r * r * r), "r={r}");
        }
    }

    proptest! {
        #[test]
        fn conjugate_symmetry(re in -8.0f64..8.0, im in -8.0f64..8.0) {
            let z = Complex64::new(re, im);
            let a = erfc_complex(z.conj());
            let b = erfc_complex(z).conj();
            prop_assert!((a - b).norm() <= 1e-14 * b.norm().max(1.0));
        }

        #[test]
        fn reflection(re in -5.0f64..5.0, im in -5.0f64..5.0) {
            let z = Complex64::new(re, im);
            let s = erfc_complex(z) + erfc_complex(-z);
            prop_assert!((s - Complex64::new(2.0, 0.0)).norm() <= 1e-12 * erfc_complex(z).norm().max(1.0));
        }
    }
}
