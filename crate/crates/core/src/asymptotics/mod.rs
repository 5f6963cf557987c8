//! Large-sample behaviour of sensitivity values under an alternative F:
//! g(u), μ_F, σ_F, the laws of κ*, design sensitivity and power.

mod alt;

use std::cell::RefCell;
use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

pub use alt::{read_samples, AltModel, Empirical};

use crate::error::{Error, Result};
use crate::numerics::{integrate_unit, norm_cdf, norm_isf, norm_quantile, Rng};
use crate::scores::{psi_l1, score_vector, sigma_q_sq, PairDiffs, ScoreSpec};
use crate::senscore::{kappa_of, statistic};

const MU_TOL: f64 = 1e-8;
const PROB_TOL: f64 = 1e-10;

/// g(u) = f(y)/(f(y)+f(−y)) at y = (F⁺)⁻¹(u), given u and v = 1 − u.
pub fn g_split(alt: &AltModel, u: f64, v: f64) -> Result<f64> {
    let y = alt.abs_quantile_split(u, v)?;
    let (lp, ln) = (alt.ln_density(y), alt.ln_density(-y));
    if lp == f64::NEG_INFINITY && ln == f64::NEG_INFINITY {
        return Err(Error::domain(format!("density vanishes at ±{y}")));
    }
    Ok(1.0 / (1.0 + (ln - lp).exp()))
}

/// Probability that a difference at absolute-value quantile u is positive.
pub fn g_function(alt: &AltModel, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("u must lie in (0, 1), got {u}")));
    }
    g_split(alt, u, 1.0 - u)
}

/// Integrates over the unit interval with a fallible integrand, reporting
/// the integrand's own error rather than the quadrature's.
fn integrate_fallible<F>(mut f: F, tol: f64) -> Result<f64>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let out = integrate_unit(
        |u, v| match f(u, v) {
            Ok(x) => x,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        tol,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => out,
    }
}

/// μ_F = ⟨ψ, g⟩/‖ψ‖₁.
pub fn mu_f(spec: ScoreSpec, alt: &AltModel) -> Result<f64> {
    alt.validate()?;
    let l1 = psi_l1(spec)?;
    let integral = match spec {
        ScoreSpec::Binary { lower, upper } => {
            // integrate g over [lower, upper] only, keeping 1 − u exact
            let width = upper - lower;
            width * integrate_fallible(|w, wc| g_split(alt, lower + width * w, (1.0 - upper) + width * wc), MU_TOL)?
                / width
        }
        _ => integrate_fallible(|u, v| Ok(spec.psi_split(u, v) * g_split(alt, u, v)?), MU_TOL)?,
    };
    Ok((integral / l1).clamp(0.0, 1.0))
}

/// Which algebraic form of σ_F² the Wilcoxon law uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaFReading {
    /// 4[P(Y₁+Y₂>0, Y₁+Y₃>0) − P(Y₁+Y₂>0)²], the variance of the Hájek
    /// projection.
    #[default]
    Standard,
    /// 4[P(Y₁+Y₂>0) − P(Y₁+Y₂>0, Y₁+Y₃>0)²], kept for comparison.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    ClosedForm,
    Quadrature,
    Simulated { draws: usize, i_sim: usize, seed: u64 },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::ClosedForm => f.write_str("closed_form"),
            Provenance::Quadrature => f.write_str("quadrature"),
            Provenance::Simulated { draws, i_sim, seed } => {
                write!(f, "simulated(B={draws},I_sim={i_sim},seed={seed})")
            }
        }
    }
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Constants of the limiting law of κ* under one alternative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticLaw {
    pub mu_f: f64,
    pub sigma_f_sq: f64,
    pub sigma_q_sq: f64,
    pub design_sensitivity: f64,
    pub provenance: Provenance,
}

impl AsymptoticLaw {
    pub fn new(mu_f: f64, sigma_f_sq: f64, sigma_q_sq: f64, provenance: Provenance) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu_f) {
            return Err(Error::domain(format!("mu_F must lie in [0, 1], got {mu_f}")));
        }
        if !(sigma_f_sq >= 0.0) {
            return Err(Error::domain(format!("sigma_F^2 must be nonnegative, got {sigma_f_sq}")));
        }
        if !(sigma_q_sq > 0.0) {
            return Err(Error::domain(format!("sigma_q^2 must be positive, got {sigma_q_sq}")));
        }
        let design_sensitivity = if mu_f >= 1.0 { f64::INFINITY } else { mu_f / (1.0 - mu_f) };
        Ok(AsymptoticLaw { mu_f, sigma_f_sq, sigma_q_sq, design_sensitivity, provenance })
    }

    pub fn sigma_f(&self) -> f64 {
        self.sigma_f_sq.sqrt()
    }
}

/// Law under a symmetric null: μ_F = 1/2 and σ_F² = σ_q²/4.
pub fn null_law(spec: ScoreSpec) -> Result<AsymptoticLaw> {
    let sq = sigma_q_sq(spec)?;
    if sq.is_infinite() {
        return Err(Error::NotSquareIntegrable(spec.to_string()));
    }
    AsymptoticLaw::new(0.5, sq / 4.0, sq, Provenance::ClosedForm)
}

/// P(Y₁+Y₂>0) and P(Y₁+Y₂>0, Y₁+Y₃>0).
pub fn wilcoxon_probabilities(alt: &AltModel) -> Result<(f64, f64)> {
    alt.validate()?;
    match *alt {
        AltModel::NormalShift { d, s } => {
            let p1 = norm_cdf(std::f64::consts::SQRT_2 * d / s);
            // Given Y₁ = d + sZ, each of Y₁+Y₂ > 0 and Y₁+Y₃ > 0 has
            // probability Φ(2d/s + Z).
            let shift = 2.0 * d / s;
            let p2 = integrate_fallible(
                |u, v| {
                    let z = if u <= 0.5 { norm_quantile(u)? } else { -norm_quantile(v)? };
                    Ok(norm_cdf(shift + z).powi(2))
                },
                PROB_TOL,
            )?;
            Ok((p1, p2))
        }
        _ => wilcoxon_probabilities_by_quadrature(alt),
    }
}

/// E[S(−Y)] and E[S(−Y)²] with S the survival function, by quadrature
/// over y = c + w·tan(π(u − 1/2)).
pub fn wilcoxon_probabilities_by_quadrature(alt: &AltModel) -> Result<(f64, f64)> {
    let (center, width) = match alt {
        AltModel::NormalShift { d, s } => (*d, *s),
        AltModel::TShift { d, .. } => (*d, 1.0),
        AltModel::Empirical(e) => {
            let n = e.samples().len() as f64;
            let mean = e.samples().iter().sum::<f64>() / n;
            let sd = (e.samples().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            (mean, if sd > 0.0 { sd } else { 1.0 })
        }
    };
    let moment = |k: i32| {
        integrate_fallible(
            |u, v| {
                let xi = u.min(v);
                let (sin, cos) = (std::f64::consts::PI * xi).sin_cos();
                let t = cos / sin;
                let y = if u <= 0.5 { center - width * t } else { center + width * t };
                let jac = std::f64::consts::PI * width / (sin * sin);
                let dens = alt.density(y);
                if dens == 0.0 {
                    return Ok(0.0);
                }
                Ok(dens * jac * alt.sf(-y).powi(k))
            },
            PROB_TOL,
        )
    };
    Ok((moment(1)?, moment(2)?))
}

/// The law of Wilcoxon's statistic: μ_F = P(Y₁+Y₂>0) and σ_F² from the
/// pair-overlap probability.
pub fn wilcoxon_law(alt: &AltModel) -> Result<AsymptoticLaw> {
    wilcoxon_law_with(alt, SigmaFReading::Standard)
}

pub fn wilcoxon_law_with(alt: &AltModel, reading: SigmaFReading) -> Result<AsymptoticLaw> {
    let (p1, p2) = wilcoxon_probabilities(alt)?;
    let sigma_f_sq = match reading {
        SigmaFReading::Standard => 4.0 * (p2 - p1 * p1),
        SigmaFReading::Literal => 4.0 * (p1 - p2 * p2),
    };
    let provenance = match alt {
        AltModel::NormalShift { .. } => Provenance::ClosedForm,
        _ => Provenance::Quadrature,
    };
    AsymptoticLaw::new(p1, sigma_f_sq.max(0.0), 4.0 / 3.0, provenance)
}

/// Sample variance of √I·T over `draws` simulated samples of size `i_sim`.
pub fn sigma_f_simulated(spec: ScoreSpec, alt: &AltModel, i_sim: usize, draws: usize, rng: &Rng) -> Result<f64> {
    if i_sim < 30 {
        return Err(Error::Size { have: i_sim, need: 30 });
    }
    if draws < 1000 {
        return Err(Error::Size { have: draws, need: 1000 });
    }
    spec.validate()?;
    alt.validate()?;
    let root_i = (i_sim as f64).sqrt();
    let values = (0..draws)
        .into_par_iter()
        .map(|b| {
            let mut r = rng.substream(b as u64);
            let d = PairDiffs::new(alt.sample_n(i_sim, &mut r))?;
            let sv = score_vector(spec, &d)?;
            Ok(root_i * statistic(&sv, &d)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    // shifting by the first value keeps a constant sample at exactly zero
    let shift = values[0];
    let n = values.len() as f64;
    let mean = values.iter().map(|v| v - shift).sum::<f64>() / n;
    Ok(values.iter().map(|v| (v - shift - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Settings for simulating σ_F² when no closed form is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimSettings {
    pub i_sim: usize,
    pub draws: usize,
    pub seed: u64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings { i_sim: 500, draws: 2000, seed: 0 }
    }
}

/// The law of κ* for any score under any alternative. Symmetric nulls and
/// Wilcoxon-type scores use exact constants; otherwise μ_F comes from
/// quadrature and σ_F² from simulation.
pub fn law_for(spec: ScoreSpec, alt: &AltModel, sim: &SimSettings) -> Result<AsymptoticLaw> {
    if alt.is_symmetric_null() {
        return null_law(spec);
    }
    if spec.is_wilcoxon_like() {
        return wilcoxon_law(alt);
    }
    let sq = sigma_q_sq(spec)?;
    if sq.is_infinite() {
        return Err(Error::NotSquareIntegrable(spec.to_string()));
    }
    let mu = mu_f(spec, alt)?;
    let rng = Rng::new(sim.seed, 0);
    let sigma_f_sq = sigma_f_simulated(spec, alt, sim.i_sim, sim.draws, &rng)?;
    AsymptoticLaw::new(
        mu,
        sigma_f_sq,
        sq,
        Provenance::Simulated { draws: sim.draws, i_sim: sim.i_sim, seed: sim.seed },
    )
}

/// Approximate normal law of κ*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaLaw {
    pub center: f64,
    pub sd: f64,
}

fn check_law_inputs(alpha: f64, n: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(n >= 1.0) {
        return Err(Error::domain(format!("I must be at least 1, got {n}")));
    }
    norm_isf(alpha)
}

/// mean = μ_F − σ_q Φ̄⁻¹(α)√(μ_F(1−μ_F))/√I, sd = σ_F/√I. `n` may be
/// infinite.
pub fn kappa_law_asymptotic(law: &AsymptoticLaw, alpha: f64, n: f64) -> Result<KappaLaw> {
    let z = check_law_inputs(alpha, n)?;
    let mu = law.mu_f;
    let root_n = n.sqrt();
    Ok(KappaLaw {
        center: mu - law.sigma_q_sq.sqrt() * z * (mu * (1.0 - mu)).sqrt() / root_n,
        sd: law.sigma_f() / root_n,
    })
}

/// The finite-sample refinement with η = σ_q²Φ̄⁻¹(α)²/I.
pub fn kappa_law_finite(law: &AsymptoticLaw, alpha: f64, n: f64) -> Result<KappaLaw> {
    let z = check_law_inputs(alpha, n)?;
    let mu = law.mu_f;
    let eta = law.sigma_q_sq * z * z / n;
    let root = (4.0 * eta * mu * (1.0 - mu) + eta * eta).sqrt();
    let center = mu - ((2.0 * mu - 1.0) * eta + root) / (2.0 * (1.0 + eta));
    let slope = if root > 0.0 { 1.0 + eta * (2.0 * mu - 1.0) / root } else { 1.0 };
    let sd = law.sigma_f() / (n.sqrt() * (1.0 + eta)) * slope;
    Ok(KappaLaw { center, sd })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerVariant {
    /// From the limiting law of √I(κ* − μ_F).
    Asymptotic,
    /// From the finite-sample refinement.
    Finite,
    /// The limiting law with its constant term dropped.
    NoConstant,
}

fn normal_prob(num: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        norm_cdf(num / sd)
    } else if num > 0.0 {
        1.0
    } else if num < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Approximate P(κ* > Γ/(1+Γ)), the power of a sensitivity analysis at Γ.
pub fn power(law: &AsymptoticLaw, alpha: f64, n: f64, gamma: f64, variant: PowerVariant) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
    }
    let kappa = kappa_of(gamma);
    let p = match variant {
        PowerVariant::Asymptotic => {
            let l = kappa_law_asymptotic(law, alpha, n)?;
            normal_prob(l.center - kappa, l.sd)
        }
        PowerVariant::Finite => {
            let l = kappa_law_finite(law, alpha, n)?;
            normal_prob(l.center - kappa, l.sd)
        }
        PowerVariant::NoConstant => {
            check_law_inputs(alpha, n)?;
            normal_prob(n.sqrt() * (law.mu_f - kappa), law.sigma_f())
        }
    };
    Ok(p)
}
