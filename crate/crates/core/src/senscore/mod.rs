//! Signed score statistics, p-value bounds under the Γ sensitivity model,
//! and sensitivity values.

mod bounds;
mod value;

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scores::{PairDiffs, ScoreVector};

pub use bounds::{
    pvalue_bounds_exact, pvalue_bounds_mc, pvalue_bounds_normal, ExactTail, McTail, NormalTail, UpperTail,
    EXACT_MAX_PAIRS,
};
pub use value::{
    kappa_star_closed, kappa_star_quadratic, kappa_star_search, search_kappa, sensitivity_table,
    sensitivity_value, two_sided, DEFAULT_MC_DRAWS, DEFAULT_TOL,
};

/// Maps Γ to the κ scale, κ = Γ/(1+Γ).
pub fn kappa_of(gamma: f64) -> f64 {
    if gamma.is_infinite() {
        1.0
    } else {
        gamma / (1.0 + gamma)
    }
}

/// Maps κ back to Γ = κ/(1−κ).
pub fn gamma_of(kappa: f64) -> f64 {
    if kappa >= 1.0 {
        f64::INFINITY
    } else {
        kappa / (1.0 - kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tail {
    Greater,
    Less,
    TwoSided,
}

impl Tail {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tail::Greater => "greater",
            Tail::Less => "less",
            Tail::TwoSided => "two_sided",
        }
    }
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tail {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "greater" => Ok(Tail::Greater),
            "less" => Ok(Tail::Less),
            "two_sided" | "two" => Ok(Tail::TwoSided),
            _ => Err(Error::domain(format!("unknown tail `{s}` (expected greater, less or two-sided)"))),
        }
    }
}

impl Serialize for Tail {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// How p̄_Γ is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    NormalApprox,
    MonteCarlo { draws: usize, seed: u64 },
    ExactEnum,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::NormalApprox => f.write_str("normal_approx"),
            Method::MonteCarlo { draws, seed } => write!(f, "monte_carlo(B={draws},seed={seed})"),
            Method::ExactEnum => f.write_str("exact_enum"),
        }
    }
}

impl Method {
    /// Parses `approx`, `exact` or `mc:<B>`; the seed is supplied separately.
    pub fn parse(s: &str, seed: u64) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "approx" | "normal" | "normal_approx" | "closed" => Ok(Method::NormalApprox),
            "exact" | "exact_enum" => Ok(Method::ExactEnum),
            "mc" => Ok(Method::MonteCarlo { draws: DEFAULT_MC_DRAWS, seed }),
            _ => match s.strip_prefix("mc:") {
                Some(b) => {
                    let draws: usize = b
                        .trim()
                        .parse()
                        .map_err(|_| Error::domain(format!("invalid Monte Carlo size `{b}`")))?;
                    if draws == 0 {
                        return Err(Error::domain("Monte Carlo size must be at least 1"));
                    }
                    Ok(Method::MonteCarlo { draws, seed })
                }
                None => Err(Error::domain(format!("unknown method `{s}` (expected approx, mc:<B> or exact)"))),
            },
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// p-value bounds at one value of Γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaBound {
    pub gamma: f64,
    pub p_upper: f64,
    pub p_lower: f64,
    pub method: Method,
}

/// A sensitivity value on both the κ and Γ scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensResult {
    pub statistic: f64,
    pub kappa_star: f64,
    pub gamma_star: f64,
    pub gamma_star_trunc: f64,
    pub alpha: f64,
    pub tail: Tail,
    pub method: Method,
    #[serde(rename = "effective_I")]
    pub effective_i: usize,
    /// Set when the statistic sits below the support of every bounding
    /// distribution, so Γ* is reported as 0.
    pub degenerate: bool,
}

impl SensResult {
    pub(crate) fn from_kappa(
        kappa: f64,
        statistic: f64,
        alpha: f64,
        tail: Tail,
        method: Method,
        effective_i: usize,
        degenerate: bool,
    ) -> Self {
        let kappa_star = kappa.clamp(0.0, 1.0);
        let gamma_star = gamma_of(kappa_star);
        SensResult {
            statistic,
            kappa_star,
            gamma_star,
            gamma_star_trunc: gamma_star.max(1.0),
            alpha,
            tail,
            method,
            effective_i,
            degenerate,
        }
    }
}

/// T = Σ 1{Y_i > 0} q_i / Σ q_i.
pub fn statistic(sv: &ScoreVector, d: &PairDiffs) -> Result<f64> {
    if sv.q.len() != d.len() {
        return Err(Error::domain(format!("{} scores for {} pairs", sv.q.len(), d.len())));
    }
    if !(sv.sum_q > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let positive: f64 = sv.q.iter().zip(d.values()).filter(|(_, y)| **y > 0.0).map(|(q, _)| q).sum();
    Ok((positive / sv.sum_q).clamp(0.0, 1.0))
}

/// The statistic of the lower-tailed test, Σ 1{Y_i < 0} q_i / Σ q_i.
pub fn statistic_less(sv: &ScoreVector, d: &PairDiffs) -> Result<f64> {
    statistic(sv, &d.negated())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}
