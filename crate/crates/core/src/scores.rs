//! Score families and the per-pair scores q_i they induce.
//!
//! Scores depend on the data only through the ranks of |Y_i| among the
//! nonzero differences, so every family here is invariant to rescaling the
//! outcome.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numerics::integrate_unit;

/// Treated-minus-control differences of one outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDiffs {
    y: Vec<f64>,
}

impl PairDiffs {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::domain("at least one pair is required"));
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("difference {pos} is not finite ({})", y[pos])));
        }
        Ok(PairDiffs { y })
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Number of nonzero differences, the sample size the tests use.
    pub fn nonzero_count(&self) -> usize {
        self.y.iter().filter(|v| **v != 0.0).count()
    }

    /// Differences with every sign flipped, for the lower-tailed test.
    pub fn negated(&self) -> PairDiffs {
        PairDiffs { y: self.y.iter().map(|v| -v).collect() }
    }
}

/// One observed unit of a matched pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RawUnit {
    pub pair_id: String,
    pub unit: u8,
    pub treated: bool,
    pub outcome: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawPairs {
    pub units: Vec<RawUnit>,
}

/// Ordering key that puts integer-looking labels in numeric order.
pub(crate) fn natural_cmp(a: &str, b: &str) -> Ordering {
    match (a.trim().parse::<i64>(), b.trim().parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PairKey(String);

impl Ord for PairKey {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.0, &other.0)
    }
}
impl PartialOrd for PairKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Collapses raw unit records into one difference per pair, ordered by
/// pair id.
pub fn differences(raw: &RawPairs) -> Result<PairDiffs> {
    let mut pairs: BTreeMap<PairKey, Vec<&RawUnit>> = BTreeMap::new();
    for unit in &raw.units {
        pairs.entry(PairKey(unit.pair_id.clone())).or_default().push(unit);
    }
    if pairs.is_empty() {
        return Err(Error::domain("no pairs"));
    }
    let mut y = Vec::with_capacity(pairs.len());
    for (PairKey(id), units) in pairs {
        let invalid = |reason: String| Error::InvalidPair { pair_id: id.clone(), reason };
        if units.len() != 2 {
            return Err(invalid(format!("expected 2 units, found {}", units.len())));
        }
        let (a, b) = (units[0], units[1]);
        if !matches!((a.unit, b.unit), (1, 2) | (2, 1)) {
            return Err(invalid(format!("unit indices must be 1 and 2, found {} and {}", a.unit, b.unit)));
        }
        let treated = usize::from(a.treated) + usize::from(b.treated);
        if treated != 1 {
            return Err(invalid(format!("treatment indicators sum to {treated}, expected 1")));
        }
        if !(a.outcome.is_finite() && b.outcome.is_finite()) {
            return Err(invalid("outcome is not finite".into()));
        }
        let (t, c) = if a.treated { (a, b) } else { (b, a) };
        y.push(t.outcome - c.outcome);
    }
    PairDiffs::new(y)
}

/// Mid-ranks of |Y_i| among the nonzero differences; zeros get rank 0.
pub fn ranks_abs(d: &PairDiffs) -> Vec<f64> {
    let y = d.values();
    let mut order: Vec<usize> = (0..y.len()).filter(|&i| y[i] != 0.0).collect();
    order.sort_by(|&i, &j| y[i].abs().total_cmp(&y[j].abs()));
    let mut ranks = vec![0.0; y.len()];
    let mut start = 0;
    while start < order.len() {
        let value = y[order[start]].abs();
        let mut end = start + 1;
        while end < order.len() && y[order[end]].abs() == value {
            end += 1;
        }
        // positions start..end share ranks start+1..=end
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    ranks
}

fn has_ties(ranks: &[f64]) -> bool {
    ranks.iter().any(|r| r.fract() != 0.0)
}

/// A score-statistic family ψ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreSpec {
    /// Wilcoxon's signed rank statistic, q_i = rank(|Y_i|).
    Wilcoxon,
    /// U-statistic of order `m` counting positive differences among the
    /// order statistics `lo..=hi`.
    UStat { m: u32, lo: u32, hi: u32 },
    /// ψ = 1/(upper − lower) on [lower, upper], zero elsewhere.
    Binary { lower: f64, upper: f64 },
    /// ψ(u) = u^(a−1)(1−u)^(b−1)/B(a, b).
    Beta { a: f64, b: f64 },
}

impl ScoreSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScoreSpec::Wilcoxon => Ok(()),
            ScoreSpec::UStat { m, lo, hi } => {
                if m >= 1 && 1 <= lo && lo <= hi && hi <= m {
                    Ok(())
                } else {
                    Err(Error::domain(format!("U-statistic needs 1 <= lo <= hi <= m, got ({m},{lo},{hi})")))
                }
            }
            ScoreSpec::Binary { lower, upper } => {
                if (0.0..=1.0).contains(&lower) && (0.0..=1.0).contains(&upper) && lower < upper {
                    Ok(())
                } else {
                    Err(Error::domain(format!("binary score needs 0 <= lower < upper <= 1, got ({lower},{upper})")))
                }
            }
            ScoreSpec::Beta { a, b } => {
                if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain(format!("beta score needs a, b > 0, got ({a},{b})")))
                }
            }
        }
    }

    /// The score function ψ(u) on (0, 1).
    pub fn psi(&self, u: f64) -> f64 {
        self.psi_split(u, 1.0 - u)
    }

    /// ψ(u) given u and its complement `v` = 1 − u separately, for accuracy
    /// near the upper end.
    pub fn psi_split(&self, u: f64, v: f64) -> f64 {
        match *self {
            ScoreSpec::Wilcoxon => u,
            ScoreSpec::UStat { m, lo, hi } => ustat_psi(m, lo, hi, u, v),
            ScoreSpec::Binary { lower, upper } => {
                if (lower..=upper).contains(&u) {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
            ScoreSpec::Beta { a, b } => {
                ((a - 1.0) * u.ln() + (b - 1.0) * v.ln() - ln_beta(a, b)).exp()
            }
        }
    }

    /// True when ψ is proportional to u, so the statistic is asymptotically
    /// equivalent to Wilcoxon's.
    pub fn is_wilcoxon_like(&self) -> bool {
        match *self {
            ScoreSpec::Wilcoxon => true,
            ScoreSpec::UStat { m: 2, lo: 2, hi: 2 } => true,
            ScoreSpec::Beta { a, b } => a == 2.0 && b == 1.0,
            _ => false,
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (ln_gamma(f64::from(n) + 1.0) - ln_gamma(f64::from(k) + 1.0) - ln_gamma(f64::from(n - k) + 1.0))
        .exp()
        .round()
}

fn ln_choose(n: f64, k: f64) -> f64 {
    if k < 0.0 || k > n {
        f64::NEG_INFINITY
    } else {
        ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
    }
}

fn ustat_psi(m: u32, lo: u32, hi: u32, u: f64, v: f64) -> f64 {
    (lo..=hi)
        .map(|l| {
            f64::from(l) * binomial(m, l) * u.powi(l as i32 - 1) * v.powi((m - l) as i32)
        })
        .sum()
}

impl fmt::Display for ScoreSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ScoreSpec::Wilcoxon => write!(f, "wilcoxon"),
            ScoreSpec::UStat { m, lo, hi } => write!(f, "ustat:{m},{lo},{hi}"),
            ScoreSpec::Binary { lower, upper } => write!(f, "binary:{lower},{upper}"),
            ScoreSpec::Beta { a, b } => write!(f, "beta:{a},{b}"),
        }
    }
}

impl FromStr for ScoreSpec {
    type Err = Error;

    /// Parses `wilcoxon`, `ustat:m,lo,hi`, `binary:tl,tu` or `beta:a,b`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (s, None),
        };
        let numbers = |expected: usize| -> Result<Vec<f64>> {
            let args = args.ok_or_else(|| Error::domain(format!("score `{s}` needs {expected} parameters")))?;
            let vals = args
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::domain(format!("score `{s}`: {e}")))?;
            if vals.len() != expected {
                return Err(Error::domain(format!("score `{s}` needs {expected} parameters")));
            }
            Ok(vals)
        };
        let spec = match name.to_ascii_lowercase().as_str() {
            "wilcoxon" if args.is_none() => ScoreSpec::Wilcoxon,
            "ustat" => {
                let v = numbers(3)?;
                if v.iter().any(|x| x.fract() != 0.0 || *x < 0.0 || *x > f64::from(u32::MAX)) {
                    return Err(Error::domain(format!("score `{s}`: U-statistic orders must be integers")));
                }
                ScoreSpec::UStat { m: v[0] as u32, lo: v[1] as u32, hi: v[2] as u32 }
            }
            "binary" => {
                let v = numbers(2)?;
                ScoreSpec::Binary { lower: v[0], upper: v[1] }
            }
            "beta" => {
                let v = numbers(2)?;
                ScoreSpec::Beta { a: v[0], b: v[1] }
            }
            _ => return Err(Error::domain(format!("unknown score `{s}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl Serialize for ScoreSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// How U-statistic scores are computed from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UStatScoring {
    /// Exact combinatorial scores when the data are untied and I ≥ m,
    /// otherwise the polynomial approximation.
    #[default]
    Auto,
    Exact,
    Approximate,
}

/// Norms of a score function and the limit of σ²_{q,I}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiNorms {
    pub l1: f64,
    pub l2: f64,
    pub sigma_q_sq: f64,
}

/// Realized scores for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub spec: ScoreSpec,
    pub q: Vec<f64>,
    pub sum_q: f64,
    /// (I⁻¹Σq²)/(I⁻¹Σq)² over the nonzero pairs.
    pub sigma_qi_sq: f64,
    /// ‖ψ‖₂²/‖ψ‖₁²; infinite when ψ is not square integrable.
    pub sigma_q_sq_limit: f64,
    pub psi_l1: f64,
    pub psi_l2: f64,
    pub effective_i: usize,
}

impl ScoreVector {
    /// Scores of the nonzero pairs only.
    pub fn nonzero_scores(&self) -> Vec<f64> {
        self.q.iter().copied().filter(|q| *q > 0.0).collect()
    }
}

pub fn score_vector(spec: ScoreSpec, d: &PairDiffs) -> Result<ScoreVector> {
    score_vector_with(spec, d, UStatScoring::Auto)
}

pub fn score_vector_with(spec: ScoreSpec, d: &PairDiffs, mode: UStatScoring) -> Result<ScoreVector> {
    spec.validate()?;
    let ranks = ranks_abs(d);
    let n = d.nonzero_count();
    let scale = n as f64 + 1.0;

    let q: Vec<f64> = match spec {
        ScoreSpec::Wilcoxon => ranks.clone(),
        ScoreSpec::UStat { m, lo, hi } => {
            let exact = match mode {
                UStatScoring::Approximate => false,
                UStatScoring::Exact => {
                    if n < m as usize || has_ties(&ranks) {
                        return Err(Error::Size { have: if has_ties(&ranks) { 0 } else { n }, need: m as usize });
                    }
                    true
                }
                UStatScoring::Auto => n >= m as usize && !has_ties(&ranks),
            };
            if exact {
                ranks.iter().map(|&a| if a == 0.0 { 0.0 } else { exact_ustat_score(n, m, lo, hi, a) }).collect()
            } else {
                ranks.iter().map(|&a| if a == 0.0 { 0.0 } else { spec.psi(a / scale) }).collect()
            }
        }
        ScoreSpec::Binary { .. } | ScoreSpec::Beta { .. } => {
            ranks.iter().map(|&a| if a == 0.0 { 0.0 } else { spec.psi(a / scale) }).collect()
        }
    };

    let sum_q: f64 = q.iter().sum();
    let sum_sq: f64 = q.iter().map(|v| v * v).sum();
    let sigma_qi_sq = if sum_q > 0.0 { n as f64 * sum_sq / (sum_q * sum_q) } else { f64::NAN };
    let norms = psi_norms_unchecked(spec)?;
    Ok(ScoreVector {
        spec,
        q,
        sum_q,
        sigma_qi_sq,
        sigma_q_sq_limit: norms.sigma_q_sq,
        psi_l1: norms.l1,
        psi_l2: norms.l2,
        effective_i: n,
    })
}

/// C(I,m)⁻¹ Σ_l C(a−1, l−1) C(I−a, m−l) for an untied rank a.
fn exact_ustat_score(n: usize, m: u32, lo: u32, hi: u32, rank: f64) -> f64 {
    let n = n as f64;
    let m = f64::from(m);
    let denom = ln_choose(n, m);
    (lo..=hi)
        .map(|l| {
            let l = f64::from(l);
            (ln_choose(rank - 1.0, l - 1.0) + ln_choose(n - rank, m - l) - denom).exp()
        })
        .sum()
}

/// ‖ψ‖₁, ‖ψ‖₂ and σ_q² = ‖ψ‖₂²/‖ψ‖₁². Errors for Beta scores that are not
/// square integrable (a ≤ 1/2 or b ≤ 1/2).
pub fn psi_norms(spec: ScoreSpec) -> Result<PsiNorms> {
    spec.validate()?;
    let norms = psi_norms_unchecked(spec)?;
    if norms.l2.is_infinite() {
        return Err(Error::NotSquareIntegrable(format!("{spec} needs a > 1/2 and b > 1/2")));
    }
    Ok(norms)
}

fn psi_norms_unchecked(spec: ScoreSpec) -> Result<PsiNorms> {
    let (l1, l2_sq) = match spec {
        ScoreSpec::Wilcoxon => (0.5, 1.0 / 3.0),
        ScoreSpec::UStat { m, lo, hi } => {
            // ∫ l C(m,l) u^(l−1)(1−u)^(m−l) du = 1 for every l
            let l1 = f64::from(hi - lo + 1);
            let mut l2_sq = 0.0;
            for l in lo..=hi {
                for k in lo..=hi {
                    let coef = f64::from(l) * f64::from(k) * binomial(m, l) * binomial(m, k);
                    let a = f64::from(l + k - 1);
                    let b = f64::from(2 * m - l - k + 1);
                    l2_sq += coef * ln_beta(a, b).exp();
                }
            }
            (l1, l2_sq)
        }
        ScoreSpec::Binary { lower, upper } => (1.0, 1.0 / (upper - lower)),
        ScoreSpec::Beta { a, b } => {
            if a <= 0.5 || b <= 0.5 {
                (1.0, f64::INFINITY)
            } else {
                (1.0, (ln_beta(2.0 * a - 1.0, 2.0 * b - 1.0) - 2.0 * ln_beta(a, b)).exp())
            }
        }
    };
    let l2 = l2_sq.sqrt();
    Ok(PsiNorms { l1, l2, sigma_q_sq: l2_sq / (l1 * l1) })
}

/// ‖ψ‖₁, defined for every valid spec.
pub fn psi_l1(spec: ScoreSpec) -> Result<f64> {
    spec.validate()?;
    Ok(psi_norms_unchecked(spec)?.l1)
}

/// σ_q² = ‖ψ‖₂²/‖ψ‖₁², infinite when ψ is not square integrable.
pub fn sigma_q_sq(spec: ScoreSpec) -> Result<f64> {
    spec.validate()?;
    Ok(psi_norms_unchecked(spec)?.sigma_q_sq)
}

/// ‖ψ‖₁ and ‖ψ‖₂ by quadrature; an independent check on the closed forms.
pub fn psi_norms_by_quadrature(spec: ScoreSpec, tol: f64) -> Result<PsiNorms> {
    spec.validate()?;
    let l1 = integrate_unit(|u, v| spec.psi_split(u, v), tol)?;
    let l2 = integrate_unit(|u, v| spec.psi_split(u, v).powi(2), tol)?.sqrt();
    Ok(PsiNorms { l1, l2, sigma_q_sq: (l2 / l1).powi(2) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diffs(y: &[f64]) -> PairDiffs {
        PairDiffs::new(y.to_vec()).unwrap()
    }

    fn unit(id: &str, unit: u8, treated: bool, outcome: f64) -> RawUnit {
        RawUnit { pair_id: id.into(), unit, treated, outcome }
    }

    #[test]
    fn differences_follow_treatment() {
        let raw = RawPairs {
            units: vec![
                unit("2", 1, false, 3.0),
                unit("1", 1, true, 3.0),
                unit("1", 2, false, 1.0),
                unit("2", 2, true, 1.0),
                unit("10", 1, true, 5.0),
                unit("10", 2, false, 5.0),
            ],
        };
        assert_eq!(differences(&raw).unwrap().values(), &[2.0, -2.0, 0.0]);
    }

    #[test]
    fn malformed_pairs_name_the_pair() {
        let raw = RawPairs { units: vec![unit("a", 1, true, 1.0), unit("a", 2, true, 0.0)] };
        match differences(&raw) {
            Err(Error::InvalidPair { pair_id, .. }) => assert_eq!(pair_id, "a"),
            other => panic!("{other:?}"),
        }
        let raw = RawPairs { units: vec![unit("b", 1, true, 1.0)] };
        assert!(matches!(differences(&raw), Err(Error::InvalidPair { .. })));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(ranks_abs(&diffs(&[3.0, 1.0, 2.0])), vec![3.0, 1.0, 2.0]);
        assert_eq!(ranks_abs(&diffs(&[2.0, -2.0, 5.0])), vec![1.5, 1.5, 3.0]);
        assert_eq!(ranks_abs(&diffs(&[0.0, 4.0])), vec![0.0, 1.0]);
    }

    #[test]
    fn wilcoxon_example() {
        let sv = score_vector(ScoreSpec::Wilcoxon, &diffs(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(sv.q, vec![3.0, 1.0, 2.0]);
        assert_eq!(sv.sum_q, 6.0);
        assert!((sv.sigma_qi_sq - 7.0 / 6.0).abs() < 1e-15);
        assert!((sv.sigma_q_sq_limit - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sign_test_is_binary_zero_one() {
        let spec = ScoreSpec::Binary { lower: 0.0, upper: 1.0 };
        let sv = score_vector(spec, &diffs(&[0.5, -2.0, 0.0, 7.0])).unwrap();
        assert_eq!(sv.q, vec![1.0, 1.0, 0.0, 1.0]);
        assert_eq!(sv.psi_l2, 1.0);
        assert_eq!(sv.sigma_q_sq_limit, 1.0);
    }

    #[test]
    fn norm_examples() {
        let n = psi_norms(ScoreSpec::Binary { lower: 0.2, upper: 0.7 }).unwrap();
        assert_eq!(n.l1, 1.0);
        assert!((n.l2 - 1.0 / 0.5f64.sqrt()).abs() < 1e-14);
        let n = psi_norms(ScoreSpec::Beta { a: 2.0, b: 1.0 }).unwrap();
        assert!((n.l1 - 1.0).abs() < 1e-14);
        assert!((n.l2 - 2.0 / 3f64.sqrt()).abs() < 1e-13);
        assert!((n.sigma_q_sq - 4.0 / 3.0).abs() < 1e-13);
        let n = psi_norms(ScoreSpec::UStat { m: 2, lo: 2, hi: 2 }).unwrap();
        assert!((n.sigma_q_sq - 4.0 / 3.0).abs() < 1e-13);
        assert!(matches!(
            psi_norms(ScoreSpec::Beta { a: 0.5, b: 2.0 }),
            Err(Error::NotSquareIntegrable(_))
        ));
    }

    #[test]
    fn closed_form_norms_match_quadrature() {
        let specs = [
            ScoreSpec::Wilcoxon,
            ScoreSpec::UStat { m: 8, lo: 6, hi: 7 },
            ScoreSpec::UStat { m: 20, lo: 16, hi: 20 },
            ScoreSpec::UStat { m: 5, lo: 1, hi: 5 },
            ScoreSpec::Binary { lower: 0.45, upper: 0.87 },
            ScoreSpec::Beta { a: 4.0, b: 0.6 },
            ScoreSpec::Beta { a: 0.8, b: 2.0 },
        ];
        for spec in specs {
            let closed = psi_norms(spec).unwrap();
            let quad = psi_norms_by_quadrature(spec, 1e-10).unwrap();
            assert!((closed.l1 - quad.l1).abs() < 1e-8, "{spec}");
            assert!((closed.sigma_q_sq - quad.sigma_q_sq).abs() < 1e-6 * closed.sigma_q_sq, "{spec}");
        }
    }

    #[test]
    fn exact_ustat_scores() {
        // (2,2,2): q = (a−1)/C(I,2)
        let y = [0.3, -1.2, 2.5, 0.9, -0.1];
        let sv = score_vector(ScoreSpec::UStat { m: 2, lo: 2, hi: 2 }, &diffs(&y)).unwrap();
        let ranks = ranks_abs(&diffs(&y));
        for (q, r) in sv.q.iter().zip(ranks) {
            assert!((q - (r - 1.0) / 10.0).abs() < 1e-13);
        }
        // Scores of a U-statistic of order m sum to m·C(I,m)/C(I,m) over
        // the counted positions: Σ_i q_i = hi − lo + 1.
        let y: Vec<f64> = (1..=40).map(|i| f64::from(i) * 0.37 - 3.0).collect();
        let sv = score_vector(ScoreSpec::UStat { m: 8, lo: 6, hi: 7 }, &diffs(&y)).unwrap();
        assert!((sv.sum_q - 2.0).abs() < 1e-10);
    }

    #[test]
    fn exact_mode_size_error() {
        let d = diffs(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            score_vector_with(ScoreSpec::UStat { m: 5, lo: 5, hi: 5 }, &d, UStatScoring::Exact),
            Err(Error::Size { .. })
        ));
        // auto mode falls back to the polynomial
        let sv = score_vector(ScoreSpec::UStat { m: 5, lo: 5, hi: 5 }, &d).unwrap();
        assert!(sv.q.iter().all(|q| *q > 0.0));
    }

    #[test]
    fn wilcoxon_sigma_exact_formula() {
        for n in [1usize, 2, 5, 17, 100] {
            let y: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            let sv = score_vector(ScoreSpec::Wilcoxon, &diffs(&y)).unwrap();
            let nf = n as f64;
            assert_eq!(sv.sum_q, nf * (nf + 1.0) / 2.0);
            let exact = 2.0 * (2.0 * nf + 1.0) / (3.0 * (nf + 1.0));
            assert!((sv.sigma_qi_sq - exact).abs() < 1e-12);
            assert!((sv.sigma_qi_sq - 4.0 / 3.0).abs() <= 2.0 / (3.0 * (nf + 1.0)) + 1e-12);
        }
    }

    #[test]
    fn spec_text_round_trip() {
        for s in ["wilcoxon", "ustat:8,6,7", "binary:0.45,0.87", "beta:2,0.6"] {
            let spec: ScoreSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        for bad in ["ustat:8,9,7", "binary:0.5,0.5", "beta:0,1", "ustat:8,6", "median", "ustat:2.5,1,2"] {
            assert!(bad.parse::<ScoreSpec>().is_err(), "{bad}");
        }
    }

    fn spec_strategy() -> impl Strategy<Value = ScoreSpec> {
        prop_oneof![
            Just(ScoreSpec::Wilcoxon),
            (1u32..12).prop_flat_map(|m| (Just(m), 1..=m)).prop_flat_map(|(m, lo)| {
                (Just(m), Just(lo), lo..=m).prop_map(|(m, lo, hi)| ScoreSpec::UStat { m, lo, hi })
            }),
            (0.0f64..0.9, 0.05f64..1.0).prop_map(|(l, w)| ScoreSpec::Binary { lower: l, upper: (l + w).min(1.0) }),
            (0.3f64..6.0, 0.3f64..6.0).prop_map(|(a, b)| ScoreSpec::Beta { a, b }),
        ]
    }

    fn data_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(prop_oneof![Just(0.0), -50.0f64..50.0, Just(1.5), Just(-1.5)], 1..40)
    }

    proptest! {
        #[test]
        fn scores_nonnegative_and_zero_at_zero(spec in spec_strategy(), y in data_strategy()) {
            let d = PairDiffs::new(y.clone()).unwrap();
            let sv = score_vector(spec, &d).unwrap();
            for (q, y) in sv.q.iter().zip(&y) {
                prop_assert!(*q >= 0.0);
                if *y == 0.0 { prop_assert_eq!(*q, 0.0); }
            }
            if matches!(spec, ScoreSpec::Wilcoxon | ScoreSpec::Beta { .. }) {
                for (q, y) in sv.q.iter().zip(&y) {
                    if *y != 0.0 { prop_assert!(*q > 0.0); }
                }
            }
        }

        #[test]
        fn scores_are_scale_invariant(spec in spec_strategy(), y in data_strategy(), c in 0.001f64..1000.0) {
            let d = PairDiffs::new(y.clone()).unwrap();
            let scaled = PairDiffs::new(y.iter().map(|v| v * c).collect()).unwrap();
            let a = score_vector(spec, &d).unwrap();
            let b = score_vector(spec, &scaled).unwrap();
            prop_assert_eq!(ranks_abs(&d), ranks_abs(&scaled));
            prop_assert_eq!(a.q, b.q);
        }

        #[test]
        fn approximate_222_is_proportional_to_ranks(y in proptest::collection::hash_set(1i32..10_000, 2..60)) {
            let y: Vec<f64> = y.into_iter().enumerate()
                .map(|(i, v)| if i % 3 == 0 { -f64::from(v) } else { f64::from(v) }).collect();
            let d = PairDiffs::new(y).unwrap();
            let u = score_vector_with(ScoreSpec::UStat { m: 2, lo: 2, hi: 2 }, &d, UStatScoring::Approximate).unwrap();
            let w = score_vector(ScoreSpec::Wilcoxon, &d).unwrap();
            let ratio = u.q[0] / w.q[0];
            for (a, b) in u.q.iter().zip(&w.q) {
                prop_assert!((a - ratio * b).abs() < 1e-12);
            }
        }
    }
}
