//! Upper-tail probabilities of the bounding variable T̄ on the κ scale.

use rayon::prelude::*;

use super::{kappa_of, GammaBound, Method};
use crate::error::{Error, Result};
use crate::numerics::{norm_sf, Rng};
use crate::scores::ScoreVector;

/// Largest number of nonzero pairs accepted by exact enumeration.
pub const EXACT_MAX_PAIRS: usize = 22;

/// Replicates generated per random substream in Monte Carlo bounds.
const MC_CHUNK: usize = 4096;

/// Relative slack when comparing a weighted sum with t·Σq, so that a
/// replicate reproducing the observed signs always counts.
const SUM_SLACK: f64 = 1e-10;

/// p̄ as a function of κ = Γ/(1+Γ), nondecreasing in κ.
pub trait UpperTail {
    fn p_upper(&self, kappa: f64) -> f64;
}

/// Central-limit approximation to P(T̄ ≥ t).
#[derive(Debug, Clone, Copy)]
pub struct NormalTail {
    t: f64,
    sigma_qi: f64,
    n: f64,
}

impl NormalTail {
    pub fn new(t: f64, sigma_qi_sq: f64, n: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::domain(format!("statistic must lie in [0, 1], got {t}")));
        }
        if !(sigma_qi_sq > 0.0 && sigma_qi_sq.is_finite()) {
            return Err(Error::DegenerateSample);
        }
        if !(n >= 1.0) {
            return Err(Error::Size { have: n.max(0.0) as usize, need: 1 });
        }
        Ok(NormalTail { t, sigma_qi: sigma_qi_sq.sqrt(), n })
    }
}

impl UpperTail for NormalTail {
    fn p_upper(&self, kappa: f64) -> f64 {
        if kappa <= 0.0 || kappa >= 1.0 {
            // T̄ is degenerate at κ
            return if self.t > kappa { 0.0 } else { 1.0 };
        }
        let z = self.n.sqrt() * (self.t - kappa) / ((kappa * (1.0 - kappa)).sqrt() * self.sigma_qi);
        norm_sf(z)
    }
}

/// Exact P(T̄ ≥ t) by enumerating every sign pattern of the nonzero pairs.
///
/// Patterns are tallied once by their number of positive signs, so each
/// evaluation afterwards is a polynomial in κ.
#[derive(Debug, Clone)]
pub struct ExactTail {
    counts: Vec<f64>,
    everything: bool,
}

impl ExactTail {
    pub fn new(q: &[f64], t: f64) -> Result<Self> {
        let q: Vec<f64> = q.iter().copied().filter(|v| *v > 0.0).collect();
        if q.len() > EXACT_MAX_PAIRS {
            return Err(Error::EnumerationBudget { got: q.len(), max: EXACT_MAX_PAIRS });
        }
        if q.is_empty() {
            return Err(Error::DegenerateSample);
        }
        let total: f64 = q.iter().sum();
        let threshold = t * total - SUM_SLACK * total;

        // Meet in the middle: sums over the right half grouped by the number
        // of positive signs, then matched against each left-half pattern.
        let (left, right) = q.split_at(q.len() / 2);
        let mut right_sums: Vec<Vec<f64>> = vec![Vec::new(); right.len() + 1];
        for (sum, k) in subset_sums(right) {
            right_sums[k].push(sum);
        }
        for group in &mut right_sums {
            group.sort_by(f64::total_cmp);
        }
        let mut counts = vec![0.0; q.len() + 1];
        for (sum_left, k_left) in subset_sums(left) {
            let need = threshold - sum_left;
            for (k_right, group) in right_sums.iter().enumerate() {
                let below = group.partition_point(|s| *s < need);
                counts[k_left + k_right] += (group.len() - below) as f64;
            }
        }
        let everything = counts.iter().sum::<f64>() == (1u64 << q.len()) as f64;
        Ok(ExactTail { counts, everything })
    }

    /// Number of sign patterns with k positive signs reaching the statistic.
    pub fn counts(&self) -> &[f64] {
        &self.counts
    }
}

fn subset_sums(q: &[f64]) -> Vec<(f64, usize)> {
    (0u32..1 << q.len())
        .map(|mask| {
            let sum = q.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, v)| v).sum();
            (sum, mask.count_ones() as usize)
        })
        .collect()
}

impl UpperTail for ExactTail {
    fn p_upper(&self, kappa: f64) -> f64 {
        if self.everything {
            return 1.0;
        }
        let n = self.counts.len() - 1;
        let p: f64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0.0)
            .map(|(k, c)| c * kappa.powi(k as i32) * (1.0 - kappa).powi((n - k) as i32))
            .sum();
        p.clamp(0.0, 1.0)
    }
}

/// Monte Carlo P(T̄ ≥ t) with common random numbers across κ.
///
/// Replicate b draws U_1..U_I once and sets W_i = 1{U_i < κ}; its T̄ reaches
/// t exactly when κ exceeds a replicate-specific threshold, so the whole
/// curve in κ is summarized by the sorted thresholds.
#[derive(Debug, Clone)]
pub struct McTail {
    thresholds: Vec<f64>,
}

impl McTail {
    pub fn new(q: &[f64], t: f64, draws: usize, rng: &Rng) -> Result<Self> {
        if draws == 0 {
            return Err(Error::domain("Monte Carlo size must be at least 1"));
        }
        let q: Vec<f64> = q.iter().copied().filter(|v| *v > 0.0).collect();
        if q.is_empty() {
            return Err(Error::DegenerateSample);
        }
        let total: f64 = q.iter().sum();
        let threshold = t * total - SUM_SLACK * total;
        let chunks = draws.div_ceil(MC_CHUNK);
        let mut thresholds: Vec<f64> = (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut rng = rng.substream(c as u64);
                let size = MC_CHUNK.min(draws - c * MC_CHUNK);
                let mut draw: Vec<(f64, f64)> = Vec::with_capacity(q.len());
                let mut out = Vec::with_capacity(size);
                for _ in 0..size {
                    draw.clear();
                    draw.extend(q.iter().map(|&qi| (rng.uniform(), qi)));
                    out.push(replicate_threshold(&mut draw, threshold));
                }
                out
            })
            .collect();
        thresholds.sort_by(f64::total_cmp);
        Ok(McTail { thresholds })
    }

    pub fn draws(&self) -> usize {
        self.thresholds.len()
    }

    /// Sorted κ thresholds, one per replicate.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}

fn replicate_threshold(draw: &mut [(f64, f64)], threshold: f64) -> f64 {
    if threshold <= 0.0 {
        return f64::NEG_INFINITY;
    }
    draw.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = 0.0;
    for &(u, qi) in draw.iter() {
        cum += qi;
        if cum >= threshold {
            return u;
        }
    }
    f64::INFINITY
}

impl UpperTail for McTail {
    fn p_upper(&self, kappa: f64) -> f64 {
        let hits = self.thresholds.partition_point(|x| *x < kappa);
        (1 + hits) as f64 / (self.thresholds.len() + 1) as f64
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("gamma must be positive and finite, got {gamma}")))
    }
}

/// Both bounds at Γ; the lower bound is the upper bound at 1/Γ.
pub(crate) fn bound_at(tail: &impl UpperTail, gamma: f64, method: Method) -> GammaBound {
    GammaBound {
        gamma,
        p_upper: tail.p_upper(kappa_of(gamma)),
        p_lower: tail.p_upper(kappa_of(1.0 / gamma)),
        method,
    }
}

pub fn pvalue_bounds_normal(sv: &ScoreVector, t: f64, gamma: f64, effective_i: usize) -> Result<GammaBound> {
    check_gamma(gamma)?;
    let tail = NormalTail::new(t, sv.sigma_qi_sq, effective_i as f64)?;
    Ok(bound_at(&tail, gamma, Method::NormalApprox))
}

pub fn pvalue_bounds_mc(sv: &ScoreVector, t: f64, gamma: f64, draws: usize, rng: &Rng) -> Result<GammaBound> {
    check_gamma(gamma)?;
    let tail = McTail::new(&sv.q, t, draws, rng)?;
    Ok(bound_at(&tail, gamma, Method::MonteCarlo { draws, seed: rng.seed() }))
}

pub fn pvalue_bounds_exact(sv: &ScoreVector, t: f64, gamma: f64) -> Result<GammaBound> {
    check_gamma(gamma)?;
    let tail = ExactTail::new(&sv.q, t)?;
    Ok(bound_at(&tail, gamma, Method::ExactEnum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::{score_vector, PairDiffs, ScoreSpec};
    use crate::senscore::statistic;
    use proptest::prelude::*;
    use crate::numerics::Rng;

    /// Direct sum over all 2^n sign patterns.
    fn brute_force(q: &[f64], t: f64, kappa: f64) -> f64 {
        let total: f64 = q.iter().sum();
        let mut p = 0.0;
        for mask in 0u32..1 << q.len() {
            let mut sum = 0.0;
            let mut prob = 1.0;
            for (i, qi) in q.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    sum += qi;
                    prob *= kappa;
                } else {
                    prob *= 1.0 - kappa;
                }
            }
            if sum >= t * total - 1e-9 {
                p += prob;
            }
        }
        p
    }

    fn wilcoxon(y: &[f64]) -> (ScoreVector, f64) {
        let d = PairDiffs::new(y.to_vec()).unwrap();
        let sv = score_vector(ScoreSpec::Wilcoxon, &d).unwrap();
        let t = statistic(&sv, &d).unwrap();
        (sv, t)
    }

    #[test]
    fn exact_examples() {
        let tail = ExactTail::new(&[1.0], 1.0).unwrap();
        assert!((tail.p_upper(kappa_of(3.0)) - 0.75).abs() < 1e-15);
        let tail = ExactTail::new(&[1.0, 2.0], 1.0).unwrap();
        assert!((tail.p_upper(0.5) - 0.25).abs() < 1e-15);
        let (sv, t) = wilcoxon(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let b = pvalue_bounds_exact(&sv, t, 1.0).unwrap();
        assert!((b.p_upper - 1.0 / 32.0).abs() < 1e-15);
        assert_eq!(b.p_upper, b.p_lower);
    }

    #[test]
    fn exact_matches_signed_rank_table() {
        // n = 10: P(W+ ≤ 10) = 43/1024, the familiar 0.042 critical level,
        // and P(W+ ≥ 45) equals it by symmetry.
        let ranks: Vec<f64> = (1..=10).map(f64::from).collect();
        let tail = ExactTail::new(&ranks, 45.0 / 55.0).unwrap();
        let mut count = 0u32;
        for mask in 0u32..1 << 10 {
            let w: u32 = (0..10).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
            if w <= 10 {
                count += 1;
            }
        }
        assert_eq!(count, 43);
        assert!((tail.p_upper(0.5) - 43.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn exact_budget() {
        let q: Vec<f64> = (1..=23).map(f64::from).collect();
        assert!(matches!(
            ExactTail::new(&q, 0.6),
            Err(Error::EnumerationBudget { got: 23, max: 22 })
        ));
        let q: Vec<f64> = (1..=22).map(f64::from).collect();
        let tail = ExactTail::new(&q, 0.6).unwrap();
        assert!((tail.counts().iter().sum::<f64>() - tail.p_upper(0.5) * 4194304.0).abs() < 1e-6);
    }

    #[test]
    fn normal_examples() {
        let (sv, _) = wilcoxon(&[1.0, -2.0, 3.0, -4.0]);
        let b = pvalue_bounds_normal(&sv, 0.5, 1.0, 4).unwrap();
        assert_eq!(b.p_upper, 0.5);
        assert_eq!(b.p_lower, 0.5);
        let mut last = 1.0;
        for n in [5usize, 10, 50, 200, 1000] {
            let b = pvalue_bounds_normal(&sv, 1.0, 2.0, n).unwrap();
            assert!(b.p_upper < last);
            last = b.p_upper;
        }
    }

    #[test]
    fn mc_thresholds_are_thread_independent() {
        let q: Vec<f64> = (1..=15).map(f64::from).collect();
        let rng = Rng::new(7, 0);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| McTail::new(&q, 0.7, 20_000, &rng).unwrap());
        let b = four.install(|| McTail::new(&q, 0.7, 20_000, &rng).unwrap());
        assert_eq!(a.thresholds(), b.thresholds());
    }

    #[test]
    fn mc_common_random_numbers_monotone() {
        let (sv, t) = wilcoxon(&[0.3, 1.2, -0.4, 2.2, 0.9, -1.5, 0.7, 2.9, 1.1, -0.2]);
        let rng = Rng::new(11, 0);
        let lo = pvalue_bounds_mc(&sv, t, 2.0, 50_000, &rng).unwrap();
        let hi = pvalue_bounds_mc(&sv, t, 50.0, 50_000, &rng).unwrap();
        assert!(hi.p_upper >= lo.p_upper);
        assert!(lo.p_lower <= lo.p_upper);
    }

    #[test]
    fn mc_agrees_with_exact_on_toy_data() {
        let (sv, t) = wilcoxon(&[0.3, 1.2, -0.4, 2.2, 0.9, -1.5, 0.7, 2.9, 1.1, -0.2]);
        let rng = Rng::new(1, 0);
        let draws = 100_000;
        let mc = pvalue_bounds_mc(&sv, t, 2.0, draws, &rng).unwrap();
        let ex = pvalue_bounds_exact(&sv, t, 2.0).unwrap();
        let se = (ex.p_upper * (1.0 - ex.p_upper) / draws as f64).sqrt();
        assert!((mc.p_upper - ex.p_upper).abs() < 3.0 * se, "{} vs {}", mc.p_upper, ex.p_upper);
    }

    #[test]
    fn mc_at_gamma_one_matches_randomization_p_value() {
        // symmetric data: p is the classical signed-rank p-value
        let (sv, t) = wilcoxon(&[1.0, -2.0, 3.0, 4.0, -5.0, 6.0, 7.0, 8.0]);
        let ex = pvalue_bounds_exact(&sv, t, 1.0).unwrap();
        let mc = pvalue_bounds_mc(&sv, t, 1.0, 100_000, &Rng::new(2, 0)).unwrap();
        let se = (ex.p_upper * (1.0 - ex.p_upper) / 1e5).sqrt();
        assert!((mc.p_upper - ex.p_upper).abs() < 3.0 * se);
    }

    proptest! {
        #[test]
        fn exact_equals_brute_force(
            q in proptest::collection::vec(0.1f64..10.0, 1..11),
            t in 0.0f64..=1.0,
            kappa in 0.0f64..=1.0,
        ) {
            let tail = ExactTail::new(&q, t).unwrap();
            prop_assert!((tail.p_upper(kappa) - brute_force(&q, t, kappa)).abs() < 1e-12);
        }

        #[test]
        fn bounds_are_monotone_and_dual(
            y in proptest::collection::vec(-5.0f64..5.0, 2..12),
            g1 in 1.0f64..8.0,
            dg in 0.0f64..5.0,
        ) {
            let d = PairDiffs::new(y).unwrap();
            let sv = score_vector(ScoreSpec::Wilcoxon, &d).unwrap();
            prop_assume!(sv.sum_q > 0.0);
            let t = statistic(&sv, &d).unwrap();
            let n = sv.effective_i;
            let g2 = g1 + dg;
            for (a, b, inv) in [
                (pvalue_bounds_exact(&sv, t, g1).unwrap(), pvalue_bounds_exact(&sv, t, g2).unwrap(),
                 pvalue_bounds_exact(&sv, t, 1.0 / g1).unwrap()),
                (pvalue_bounds_normal(&sv, t, g1, n).unwrap(), pvalue_bounds_normal(&sv, t, g2, n).unwrap(),
                 pvalue_bounds_normal(&sv, t, 1.0 / g1, n).unwrap()),
            ] {
                prop_assert!(b.p_upper >= a.p_upper);
                prop_assert!(b.p_lower <= a.p_lower);
                prop_assert!(a.p_lower <= a.p_upper);
                prop_assert_eq!(a.p_lower, inv.p_upper);
            }
        }
    }
}
