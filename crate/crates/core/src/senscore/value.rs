//! Sensitivity values: the closed-form quadratic and searches over κ.

use super::bounds::{bound_at, ExactTail, McTail, NormalTail, UpperTail};
use super::{check_alpha, statistic, statistic_less, GammaBound, Method, SensResult, Tail};
use crate::error::{Error, Result};
use crate::numerics::{norm_isf, Rng};
use crate::scores::{PairDiffs, ScoreVector};

/// Default bisection tolerance on the κ scale.
pub const DEFAULT_TOL: f64 = 1e-4;
/// Default number of Monte Carlo replicates.
pub const DEFAULT_MC_DRAWS: usize = 100_000;

/// Solves √n(t − κ) = c √(κ(1−κ)) σ for κ with c = Φ̄⁻¹(α).
///
/// For α < 1/2 this is the smaller root of the quadratic; for α > 1/2 the
/// crossing lies above t and the larger root is taken.
pub fn kappa_star_quadratic(t: f64, alpha: f64, sigma_sq: f64, n: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("statistic must lie in [0, 1], got {t}")));
    }
    if !(sigma_sq > 0.0) {
        return Err(Error::DegenerateSample);
    }
    if !(n > 0.0) {
        return Err(Error::Size { have: 0, need: 1 });
    }
    if n.is_infinite() {
        return Ok(t);
    }
    let c = sigma_sq.sqrt() * norm_isf(alpha)?;
    let c2 = c * c;
    let disc = (4.0 * c2 * n * t * (1.0 - t) + c2 * c2).sqrt();
    let kappa = (2.0 * n * t + c2 - c.signum() * disc) / (2.0 * (n + c2));
    Ok(kappa.clamp(0.0, 1.0))
}

/// κ* from the normal approximation in closed form.
pub fn kappa_star_closed(sv: &ScoreVector, t: f64, alpha: f64, effective_i: usize) -> Result<SensResult> {
    check_alpha(alpha)?;
    let method = Method::NormalApprox;
    if t == 0.0 {
        return Ok(SensResult::from_kappa(0.0, t, alpha, Tail::Greater, method, effective_i, true));
    }
    let kappa = kappa_star_quadratic(t, alpha, sv.sigma_qi_sq, effective_i as f64)?;
    Ok(SensResult::from_kappa(kappa, t, alpha, Tail::Greater, method, effective_i, false))
}

/// Bisection for the κ at which p̄ first exceeds α.
///
/// Returns the midpoint of a bracket of width at most `tol` whose lower end
/// has p̄ ≤ α and upper end p̄ > α, plus a flag set when p̄ > α already at
/// κ = 0.
pub fn search_kappa(tail: &impl UpperTail, alpha: f64, tol: f64) -> (f64, bool) {
    if tail.p_upper(0.0) > alpha {
        return (0.0, true);
    }
    if tail.p_upper(1.0) <= alpha {
        return (1.0, false);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if tail.p_upper(mid) > alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (0.5 * (lo + hi), false)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("tolerance must lie in (0, 1), got {tol}")))
    }
}

fn tail_for(sv: &ScoreVector, t: f64, method: Method) -> Result<Box<dyn UpperTail + Send + Sync>> {
    Ok(match method {
        Method::NormalApprox => Box::new(NormalTail::new(t, sv.sigma_qi_sq, sv.effective_i as f64)?),
        Method::ExactEnum => Box::new(ExactTail::new(&sv.q, t)?),
        Method::MonteCarlo { draws, seed } => Box::new(McTail::new(&sv.q, t, draws, &Rng::new(seed, 0))?),
    })
}

impl UpperTail for Box<dyn UpperTail + Send + Sync> {
    fn p_upper(&self, kappa: f64) -> f64 {
        self.as_ref().p_upper(kappa)
    }
}

/// κ* by bisection on p̄ computed with `method`.
pub fn kappa_star_search(sv: &ScoreVector, t: f64, alpha: f64, method: Method, tol: f64) -> Result<SensResult> {
    check_alpha(alpha)?;
    check_tol(tol)?;
    let tail = tail_for(sv, t, method)?;
    let (kappa, degenerate) = search_kappa(&tail, alpha, tol);
    Ok(SensResult::from_kappa(kappa, t, alpha, Tail::Greater, method, sv.effective_i, degenerate))
}

fn one_sided(sv: &ScoreVector, t: f64, alpha: f64, method: Method, tol: f64) -> Result<SensResult> {
    match method {
        Method::NormalApprox => kappa_star_closed(sv, t, alpha, sv.effective_i),
        _ => kappa_star_search(sv, t, alpha, method, tol),
    }
}

/// Sensitivity value for the requested tail. The normal approximation uses
/// the closed form; other methods search.
pub fn sensitivity_value(
    sv: &ScoreVector,
    d: &PairDiffs,
    alpha: f64,
    tail: Tail,
    method: Method,
    tol: f64,
) -> Result<SensResult> {
    match tail {
        Tail::Greater => one_sided(sv, statistic(sv, d)?, alpha, method, tol),
        Tail::Less => {
            let mut r = one_sided(sv, statistic_less(sv, d)?, alpha, method, tol)?;
            r.tail = Tail::Less;
            Ok(r)
        }
        Tail::TwoSided => two_sided(sv, d, alpha, method, tol),
    }
}

/// The larger of the two one-sided sensitivity values at level α/2.
pub fn two_sided(sv: &ScoreVector, d: &PairDiffs, alpha: f64, method: Method, tol: f64) -> Result<SensResult> {
    check_alpha(alpha)?;
    let t = statistic(sv, d)?;
    let greater = one_sided(sv, t, alpha / 2.0, method, tol)?;
    let less = one_sided(sv, statistic_less(sv, d)?, alpha / 2.0, method, tol)?;
    let best = if less.kappa_star > greater.kappa_star { less } else { greater };
    Ok(SensResult {
        statistic: t,
        alpha,
        tail: Tail::TwoSided,
        degenerate: greater.degenerate && less.degenerate,
        ..best
    })
}

/// p-value bounds over a grid of Γ ≥ 1. Two-sided bounds double the smaller
/// one-sided bound and cap it at 1.
pub fn sensitivity_table(
    sv: &ScoreVector,
    d: &PairDiffs,
    gammas: &[f64],
    method: Method,
    tail: Tail,
) -> Result<Vec<GammaBound>> {
    if gammas.is_empty() {
        return Err(Error::domain("at least one gamma is required"));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g >= 1.0 && g.is_finite())) {
        return Err(Error::domain(format!("gammas must be finite and at least 1, got {g}")));
    }
    let rows = match tail {
        Tail::Greater | Tail::Less => {
            let t = if tail == Tail::Greater { statistic(sv, d)? } else { statistic_less(sv, d)? };
            let upper = tail_for(sv, t, method)?;
            gammas.iter().map(|&g| bound_at(&upper, g, method)).collect()
        }
        Tail::TwoSided => {
            let greater = tail_for(sv, statistic(sv, d)?, method)?;
            let less = tail_for(sv, statistic_less(sv, d)?, method)?;
            gammas
                .iter()
                .map(|&g| {
                    let a = bound_at(&greater, g, method);
                    let b = bound_at(&less, g, method);
                    GammaBound {
                        gamma: g,
                        p_upper: (2.0 * a.p_upper.min(b.p_upper)).min(1.0),
                        p_lower: (2.0 * a.p_lower.min(b.p_lower)).min(1.0),
                        method,
                    }
                })
                .collect()
        }
    };
    Ok(rows)
}
