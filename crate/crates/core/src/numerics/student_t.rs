//! Student-t density and CDF.

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

fn check_dof(dof: f64) -> Result<()> {
    if dof > 0.0 && dof.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("degrees of freedom must be positive, got {dof}")))
    }
}

/// Log density of the t distribution; callers validate `dof`.
pub(crate) fn t_ln_density_unchecked(x: f64, dof: f64) -> f64 {
    ln_gamma(0.5 * (dof + 1.0))
        - ln_gamma(0.5 * dof)
        - 0.5 * (dof * std::f64::consts::PI).ln()
        - 0.5 * (dof + 1.0) * (x * x / dof).ln_1p()
}

pub(crate) fn t_cdf_unchecked(x: f64, dof: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    // P(|T| > |x|) = I_{ν/(ν+x²)}(ν/2, 1/2)
    let w = dof / (dof + x * x);
    let tail = 0.5 * beta_reg(0.5 * dof, 0.5, w);
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

pub fn t_density(x: f64, dof: f64) -> Result<f64> {
    check_dof(dof)?;
    Ok(t_ln_density_unchecked(x, dof).exp())
}

pub fn t_cdf(x: f64, dof: f64) -> Result<f64> {
    check_dof(dof)?;
    Ok(t_cdf_unchecked(x, dof))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::integrate;

    fn cdf2(x: f64) -> f64 {
        x / (2.0 * (2.0 + x * x).sqrt()) + 0.5
    }

    #[test]
    fn two_dof_closed_forms() {
        assert_eq!(t_cdf(0.0, 2.0).unwrap(), 0.5);
        assert!((t_density(0.0, 2.0).unwrap() - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-14);
        assert!((t_cdf(1.0, 2.0).unwrap() - 0.788_675_134_594_812_9).abs() < 1e-13);
        for i in -50..=50 {
            let x = f64::from(i) / 5.0;
            assert!((t_cdf(x, 2.0).unwrap() - cdf2(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        for &dof in &[1.5, 2.0, 5.0, 30.0] {
            // x = tan(π(u − 1/2)) maps (0,1) onto the real line.
            let mass = integrate(
                |u| {
                    let angle = std::f64::consts::PI * (u - 0.5);
                    let x = angle.tan();
                    let jac = std::f64::consts::PI / angle.cos().powi(2);
                    t_density(x, dof).unwrap() * jac
                },
                1e-10,
            )
            .unwrap();
            assert!((mass - 1.0).abs() < 1e-8, "dof {dof}: {mass}");
        }
    }

    #[test]
    fn cdf_monotone() {
        let mut prev = 0.0;
        for i in -400..=400 {
            let c = t_cdf(f64::from(i) / 20.0, 3.0).unwrap();
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn rejects_nonpositive_dof() {
        assert!(t_cdf(0.0, 0.0).is_err());
        assert!(t_density(0.0, -1.0).is_err());
    }
}
