//! Hurwitz zeta `zeta(s, q) = sum_{k>=0} (q+k)^-s` for complex `s` by
//! Euler-Maclaurin summation, with a rigorous remainder bound.

use num_complex::Complex64;
use std::f64::consts::PI;

// B_{2k} / (2k)!
const BERNOULLI_OVER_FACT: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
];

/// Value and remainder bound.
#[derive(Debug, Clone, Copy)]
pub struct ZetaValue {
    pub value: Complex64,
    pub error_bound: f64,
}

/// Requires `Re s > 1` and `q > 0`.
pub fn hurwitz_zeta(s: Complex64, q: f64) -> ZetaValue {
    assert!(s.re > 1.0 && q > 0.0, "hurwitz_zeta needs Re s > 1, q > 0");
    // shift so the asymptotic part starts far enough out
    let direct = if q < 24.0 { (24.0 - q).ceil() as usize } else { 0 };
    let mut value = Complex64::new(0.0, 0.0);
    for k in 0..direct {
        value += (-s * (q + k as f64).ln()).exp();
    }
    let a = q + direct as f64;
    let la = a.ln();
    let a_pow = (-s * la).exp(); // a^-s
    value += a_pow * a / (s - 1.0) + a_pow * 0.5;
    let m = BERNOULLI_OVER_FACT.len();
    // rising factorial (s)_{2k-1} and a^{-s-2k+1}
    let mut rising = s;
    let mut pow = a_pow / a;
    for (k, b) in BERNOULLI_OVER_FACT.iter().enumerate() {
        value += rising * pow * *b;
        let j = (2 * k + 1) as f64;
        rising *= (s + j) * (s + j + 1.0);
        pow /= a * a;
    }
    // |R| <= 4 |(s)_{2M}| / (2 pi)^{2M} * a^{-Re s - 2M + 1} / (Re s + 2M - 1)
    let mut r2m = Complex64::new(1.0, 0.0);
    for j in 0..2 * m {
        r2m *= s + j as f64;
    }
    let two_m = 2.0 * m as f64;
    let error_bound = 4.0 * r2m.norm() / (2.0 * PI).powf(two_m) * a.powf(-s.re - two_m + 1.0)
        / (s.re + two_m - 1.0);
    ZetaValue { value, error_bound }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riemann_values() {
        let z2 = hurwitz_zeta(Complex64::new(2.0, 0.0), 1.0);
        assert!((z2.value.re - PI * PI / 6.0).abs() < 1e-14);
        assert!(z2.error_bound < 1e-14);
        let z4 = hurwitz_zeta(Complex64::new(4.0, 0.0), 1.0);
        assert!((z4.value.re - PI.powi(4) / 90.0).abs() < 1e-14);
    }

    #[test]
    fn matches_direct_sum_complex() {
        let s = Complex64::new(2.3, 7.0);
        let q = 3.7;
        let mut direct = Complex64::new(0.0, 0.0);
        for k in 0..200_000 {
            direct += (-s * (q + k as f64).ln()).exp();
        }
        // tail beyond the direct sum is below 200000^-1.3 / 1.3
        let z = hurwitz_zeta(s, q);
        assert!((z.value - direct).norm() < 2e-7);
        let shifted = hurwitz_zeta(s, q + 1.0).value + (-s * q.ln()).exp();
        assert!((z.value - shifted).norm() < 1e-13);
    }
}
