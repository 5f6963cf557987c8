//! Standard normal distribution functions.

use libm::erfc;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Density of the standard normal.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF Φ(x), evaluated through `erfc` so both tails keep
/// full relative precision.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail Φ̄(x) = 1 − Φ(x).
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

// Acklam's rational approximation for the lower half, relative error ~1e-9.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.024_25;

fn acklam_lower(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Quantile Φ⁻¹(p) of the standard normal for p in (0, 1).
///
/// The rational starting value is polished with two Newton steps against
/// [`norm_cdf`].
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("normal quantile needs 0 < p < 1, got {p}")));
    }
    if p > 0.5 {
        // 1 - p is exact for p >= 0.5.
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    let mut x = acklam_lower(p);
    for _ in 0..2 {
        let density = norm_pdf(x);
        if density == 0.0 {
            break;
        }
        x -= (norm_cdf(x) - p) / density;
    }
    x
}

/// Upper-α quantile Φ̄⁻¹(α), the critical value of a one-sided level-α test.
pub fn norm_isf(alpha: f64) -> Result<f64> {
    norm_quantile(alpha).map(|x| -x)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Φ(x) from the Taylor series of erf, summed in extended steps. Only
    /// used for |x| ≤ 3 where the alternating series is well conditioned.
    fn series_cdf(x: f64) -> f64 {
        let z = x / std::f64::consts::SQRT_2;
        let mut term = z;
        let mut sum = z;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -z * z / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        0.5 + sum / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn cdf_matches_series_oracle() {
        for i in -300..=300 {
            let x = f64::from(i) / 100.0;
            assert!((norm_cdf(x) - series_cdf(x)).abs() < 1e-12, "x = {x}");
        }
        assert_eq!(norm_cdf(0.0), 0.5);
        assert!((norm_cdf(std::f64::consts::FRAC_1_SQRT_2) - 0.760_249_938_906_523_4).abs() < 1e-12);
        assert!((norm_cdf(1.6449) - 0.950_004_782_531_653_7).abs() < 1e-12);
    }

    #[test]
    fn cdf_symmetry_and_monotone() {
        let mut prev = 0.0;
        for i in -800..=800 {
            let x = f64::from(i) / 100.0;
            let c = norm_cdf(x);
            assert!((c + norm_cdf(-x) - 1.0).abs() < 1e-12);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(norm_quantile(0.5).unwrap(), 0.0);
        assert!((norm_quantile(0.95).unwrap() - 1.644_853_626_951_472_2).abs() < 1e-12);
        assert!((norm_quantile(0.995).unwrap() - 2.575_829_303_548_900_4).abs() < 1e-12);
        assert!((norm_isf(0.05).unwrap() - 1.644_853_626_951_472_2).abs() < 1e-12);
    }

    #[test]
    fn quantile_newton_oracle() {
        // Independent Newton iteration on the series CDF.
        for &p in &[0.01, 0.05, 0.2, 0.5, 0.8, 0.95, 0.995] {
            let mut x = 0.0;
            for _ in 0..100 {
                x -= (series_cdf(x) - p) / norm_pdf(x);
            }
            assert!((norm_quantile(p).unwrap() - x).abs() < 1e-10, "p = {p}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for k in 1..10_000 {
            let p = f64::from(k) / 10_000.0;
            let x = norm_quantile(p).unwrap();
            assert!((norm_cdf(x) - p).abs() < 1e-10);
        }
        for &p in &[1e-300, 1e-100, 1e-12, 1e-6] {
            let x = norm_quantile(p).unwrap();
            assert!(((norm_cdf(x) - p) / p).abs() < 1e-9);
        }
        for i in -600..=600 {
            let x = f64::from(i) / 100.0;
            assert!((norm_quantile(norm_cdf(x)).unwrap() - x).abs() < 1e-8);
        }
    }

    #[test]
    fn quantile_rejects_outside_unit_interval() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(norm_quantile(p), Err(Error::Domain(_))));
        }
    }
}
