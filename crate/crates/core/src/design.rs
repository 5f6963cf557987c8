//! Study-design calculators built on the finite-sample law of κ*.

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{g_split, kappa_law_finite, law_for, AltModel, AsymptoticLaw, Provenance, SimSettings};
use crate::error::{Error, Result};
use crate::numerics::{find_root, integrate_unit, norm_cdf, norm_isf, norm_quantile};
use crate::scores::{sigma_q_sq, ScoreSpec};

/// Center of the finite-sample law of κ* for mean μ and η = σ_q²Φ̄⁻¹(α)²/I.
pub fn finite_center(mu: f64, eta: f64) -> f64 {
    if eta == 0.0 {
        return mu;
    }
    mu - ((2.0 * mu - 1.0) * eta + (4.0 * eta * mu * (1.0 - mu) + eta * eta).sqrt()) / (2.0 * (1.0 + eta))
}

/// Two subgroups with different effect sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubgroupSpec {
    pub mu_f1: f64,
    pub mu_f2: f64,
    pub pi1: f64,
    pub alpha: f64,
    pub sigma_q_sq: f64,
}

impl SubgroupSpec {
    pub fn pooled_mu(&self) -> f64 {
        self.pi1 * self.mu_f1 + (1.0 - self.pi1) * self.mu_f2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalSize {
    #[serde(rename = "I_star")]
    pub i_star: f64,
    pub eta_star: f64,
}

const ETA_LO: f64 = 1e-8;
const ETA_HI: f64 = 10.0;
const ETA_SCAN: usize = 400;

/// Sample size above which analysing subgroup 1 alone gives the larger
/// expected κ*.
pub fn critical_sample_size(sub: &SubgroupSpec) -> Result<CriticalSize> {
    let SubgroupSpec { mu_f1, mu_f2, pi1, alpha, sigma_q_sq } = *sub;
    for (name, v) in [("mu_F1", mu_f1), ("mu_F2", mu_f2)] {
        if !(v > 0.5 && v < 1.0) {
            return Err(Error::domain(format!("{name} must lie in (1/2, 1), got {v}")));
        }
    }
    if !(pi1 > 0.0 && pi1 < 1.0) {
        return Err(Error::domain(format!("pi1 must lie in (0, 1), got {pi1}")));
    }
    if !(sigma_q_sq > 0.0 && sigma_q_sq.is_finite()) {
        return Err(Error::domain(format!("sigma_q^2 must be positive, got {sigma_q_sq}")));
    }
    let z = norm_isf(alpha)?;
    if mu_f1 == mu_f2 {
        return Err(Error::NoCrossing("identical subgroups: pooling never loses".into()));
    }
    if mu_f1 < mu_f2 {
        return Err(Error::domain("subgroup 1 must have the larger mu_F; swap the groups"));
    }
    let pooled = sub.pooled_mu();
    let gap = |eta: f64| finite_center(mu_f1, eta / pi1) - finite_center(pooled, eta);

    // log-spaced scan for the first sign change, then Brent inside it
    let ratio = (ETA_HI / ETA_LO).ln();
    let mut prev = (ETA_LO, gap(ETA_LO));
    if prev.1 <= 0.0 {
        return Err(Error::NoCrossing(format!("subgroup 1 is preferred beyond every eta >= {ETA_LO}")));
    }
    for k in 1..=ETA_SCAN {
        let eta = ETA_LO * (ratio * k as f64 / ETA_SCAN as f64).exp();
        let cur = (eta, gap(eta));
        if cur.1 <= 0.0 {
            let eta_star = find_root(gap, prev.0, cur.0, 1e-14 * prev.0)?;
            return Ok(CriticalSize { i_star: sigma_q_sq * z * z / eta_star, eta_star });
        }
        prev = cur;
    }
    Err(Error::NoCrossing(format!("no crossing for eta in [{ETA_LO}, {ETA_HI}]")))
}

/// One cell of the critical-sample-size map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalCell {
    pub mu_f1: f64,
    pub mu_f2: f64,
    /// 1 or 2 for the group with the larger effect, 0 when equal.
    pub preferred: u8,
    #[serde(rename = "I_star")]
    pub i_star: Option<f64>,
}

/// `points` equally spaced values strictly inside (1/2, 10/11).
pub fn mu_grid(points: usize) -> Vec<f64> {
    let (lo, hi) = (0.5, 10.0 / 11.0);
    (1..=points).map(|k| lo + (hi - lo) * k as f64 / (points + 1) as f64).collect()
}

/// I* over every (μ_F1, μ_F2) pair of the grid. The preferred group is the
/// one with the larger μ_F, analysed with its own share of the sample.
pub fn critical_size_grid(pi1: f64, alpha: f64, sigma_q_sq: f64, points: usize) -> Result<Vec<CriticalCell>> {
    let grid = mu_grid(points);
    let pairs: Vec<(f64, f64)> = grid.iter().flat_map(|&a| grid.iter().map(move |&b| (a, b))).collect();
    pairs
        .par_iter()
        .map(|&(mu_f1, mu_f2)| {
            if mu_f1 == mu_f2 {
                return Ok(CriticalCell { mu_f1, mu_f2, preferred: 0, i_star: None });
            }
            let (preferred, sub) = if mu_f1 > mu_f2 {
                (1, SubgroupSpec { mu_f1, mu_f2, pi1, alpha, sigma_q_sq })
            } else {
                (2, SubgroupSpec { mu_f1: mu_f2, mu_f2: mu_f1, pi1: 1.0 - pi1, alpha, sigma_q_sq })
            };
            let i_star = match critical_sample_size(&sub) {
                Ok(c) => Some(c.i_star),
                Err(Error::NoCrossing(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(CriticalCell { mu_f1, mu_f2, preferred, i_star })
        })
        .collect()
}

/// Summary of the predicted law of κ* used to rank scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Summary {
    Mean,
    Median,
    Quantile(f64),
}

impl std::str::FromStr for Summary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "mean" => Ok(Summary::Mean),
            "median" => Ok(Summary::Median),
            _ => {
                let p = s
                    .strip_prefix("quantile:")
                    .and_then(|p| p.parse::<f64>().ok())
                    .ok_or_else(|| Error::domain(format!("unknown summary `{s}` (mean, median or quantile:<p>)")))?;
                if p > 0.0 && p < 1.0 {
                    Ok(Summary::Quantile(p))
                } else {
                    Err(Error::domain(format!("quantile level must lie in (0, 1), got {p}")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreChoice {
    pub spec: ScoreSpec,
    pub mu_f: f64,
    pub sigma_q_sq: f64,
    pub sigma_f_sq: Option<f64>,
    pub center: f64,
    pub sd: f64,
    pub summary: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreChoiceReport {
    pub alt: String,
    #[serde(rename = "I")]
    pub n: f64,
    pub alpha: f64,
    pub rows: Vec<ScoreChoice>,
}

impl ScoreChoiceReport {
    pub fn best(&self) -> &ScoreChoice {
        self.rows.iter().find(|r| r.rank == 1).expect("report has at least one row")
    }
}

/// Ranks candidate scores by a summary of their predicted κ* at sample
/// size `n` (infinite for the design-sensitivity limit).
pub fn choose_score(
    candidates: &[ScoreSpec],
    alt: &AltModel,
    n: f64,
    alpha: f64,
    summary: Summary,
    sim: &SimSettings,
) -> Result<ScoreChoiceReport> {
    if candidates.is_empty() {
        return Err(Error::domain("at least one candidate score is required"));
    }
    let mut rows = Vec::with_capacity(candidates.len());
    for &spec in candidates {
        let law = if n.is_infinite() {
            // only μ_F matters in the limit
            let mu = crate::asymptotics::mu_f(spec, alt)?;
            AsymptoticLaw::new(mu, 0.0, sigma_q_sq(spec)?, Provenance::Quadrature)?
        } else {
            law_for(spec, alt, sim)?
        };
        let k = kappa_law_finite(&law, alpha, n)?;
        let value = match summary {
            Summary::Mean | Summary::Median => k.center,
            Summary::Quantile(p) => k.center + k.sd * norm_quantile(p)?,
        };
        rows.push(ScoreChoice {
            spec,
            mu_f: law.mu_f,
            sigma_q_sq: law.sigma_q_sq,
            sigma_f_sq: if n.is_infinite() { None } else { Some(law.sigma_f_sq) },
            center: k.center,
            sd: k.sd,
            summary: value,
            rank: 0,
        });
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[b].summary.total_cmp(&rows[a].summary).then(a.cmp(&b)));
    for (rank, i) in order.into_iter().enumerate() {
        rows[i].rank = rank + 1;
    }
    Ok(ScoreChoiceReport { alt: alt.to_string(), n, alpha, rows })
}

/// One (τ_l, τ_u) cell of the binary-score search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryCell {
    pub tau_l: f64,
    pub tau_u: f64,
    pub mu_f: f64,
    pub mean_kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryGrid {
    pub best: BinaryCell,
    pub cells: Vec<BinaryCell>,
}

/// Predicted mean κ* of every binary score ψ = 1{τ_l ≤ u ≤ τ_u}/(τ_u − τ_l)
/// with both ends on a grid of spacing `step`.
pub fn binary_score_grid(alt: &AltModel, n: f64, alpha: f64, step: f64) -> Result<BinaryGrid> {
    if !(step > 0.0 && step <= 0.05) {
        return Err(Error::domain(format!("grid step must lie in (0, 0.05], got {step}")));
    }
    let nodes = (1.0 / step).round() as usize;
    if ((nodes as f64) * step - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("grid step {step} does not divide [0, 1]")));
    }
    alt.validate()?;
    let z = norm_isf(alpha)?;
    if !(n >= 1.0) {
        return Err(Error::domain(format!("I must be at least 1, got {n}")));
    }
    let tau = |k: usize| k as f64 / nodes as f64;

    // G(τ_k) = ∫_0^τ_k g, accumulated over the grid cells
    let pieces = (0..nodes)
        .into_par_iter()
        .map(|k| {
            let (a, b) = (tau(k), tau(k + 1));
            let w = b - a;
            let mut failure = None;
            let v = integrate_unit(
                |s, sc| match g_split(alt, a + w * s, (1.0 - b) + w * sc) {
                    Ok(g) => g,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                },
                1e-11,
            );
            match failure {
                Some(e) => Err(e),
                None => Ok(w * v?),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut cumulative = vec![0.0; nodes + 1];
    for k in 0..nodes {
        cumulative[k + 1] = cumulative[k] + pieces[k];
    }

    let mut cells = Vec::with_capacity(nodes * (nodes + 1) / 2);
    for l in 0..nodes {
        for u in l + 1..=nodes {
            let width = tau(u) - tau(l);
            let mu = ((cumulative[u] - cumulative[l]) / width).clamp(0.0, 1.0);
            let eta = z * z / (width * n);
            cells.push(BinaryCell { tau_l: tau(l), tau_u: tau(u), mu_f: mu, mean_kappa: finite_center(mu, eta) });
        }
    }
    let best = *cells
        .iter()
        .max_by(|a, b| a.mean_kappa.total_cmp(&b.mean_kappa))
        .expect("grid is nonempty");
    Ok(BinaryGrid { best, cells })
}

/// Screen-then-report design with a held-out fraction ζ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitSpec {
    pub zeta: f64,
    pub kappa_tilde: f64,
    pub alpha_tilde: f64,
    pub alpha_fp: f64,
    pub alpha_fn: f64,
    /// Law of the statistic under the alternative of interest.
    pub law: AsymptoticLaw,
}

impl SplitSpec {
    fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::domain(format!("zeta must lie in (0, 1), got {}", self.zeta)));
        }
        for (name, a) in [("alpha_tilde", self.alpha_tilde), ("alpha_FP", self.alpha_fp), ("alpha_FN", self.alpha_fn)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::domain(format!("{name} must lie in (0, 1), got {a}")));
            }
        }
        if !(self.kappa_tilde > 0.0 && self.kappa_tilde < 1.0) {
            return Err(Error::domain(format!("kappa_tilde must lie in (0, 1), got {}", self.kappa_tilde)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitRates {
    pub fpr: f64,
    pub fnr: f64,
}

/// False positive and false negative rates of the screening half, which
/// uses (1 − ζ)I pairs.
pub fn split_rates(split: &SplitSpec, n: f64) -> Result<SplitRates> {
    split.validate()?;
    let m = (1.0 - split.zeta) * n;
    let root_m = m.sqrt();
    let sq = split.law.sigma_q_sq.sqrt();
    let z = norm_isf(split.alpha_tilde)?;
    let k = split.kappa_tilde;
    // null: μ = 1/2, σ_F = σ_q/2
    let fpr = 1.0 - norm_cdf((-root_m * (0.5 - k) + sq * z * 0.5) / (sq / 2.0));
    let mu = split.law.mu_f;
    let num = -root_m * (mu - k) + sq * z * (mu * (1.0 - mu)).sqrt();
    let sf = split.law.sigma_f();
    let fnr = if sf > 0.0 { norm_cdf(num / sf) } else if num > 0.0 { 1.0 } else { 0.0 };
    Ok(SplitRates { fpr, fnr })
}

/// The larger of the two lower bounds on √((1 − ζ)I) at (α̃, κ̃).
pub fn split_bound(law: &AsymptoticLaw, alpha_fp: f64, alpha_fn: f64, alpha_tilde: f64, kappa_tilde: f64) -> Result<f64> {
    if !(kappa_tilde > 0.5 && kappa_tilde < law.mu_f) {
        return Err(Error::domain(format!(
            "kappa_tilde must lie in (1/2, mu_F = {}), got {kappa_tilde}",
            law.mu_f
        )));
    }
    let sq = law.sigma_q_sq.sqrt();
    let (z_fp, z_fn, z) = (norm_isf(alpha_fp)?, norm_isf(alpha_fn)?, norm_isf(alpha_tilde)?);
    let mu = law.mu_f;
    let first = (z_fp - z) * sq / 2.0 / (kappa_tilde - 0.5);
    let second = (law.sigma_f() * z_fn + sq * z * (mu * (1.0 - mu)).sqrt()) / (mu - kappa_tilde);
    Ok(first.max(second))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitMinimum {
    /// Lower bound on the screening sample size (1 − ζ)I.
    pub required_screening_pairs: f64,
    pub sqrt_bound: f64,
    pub alpha_tilde: f64,
    /// The bound is approached as κ̃ decreases to this value.
    pub kappa_tilde: f64,
}

/// The smallest screening sample meeting both error targets, attained at
/// α̃ = α_FP in the limit κ̃ → 1/2.
pub fn split_minimum_sample(split: &SplitSpec) -> Result<SplitMinimum> {
    split.validate()?;
    let law = &split.law;
    if !(law.mu_f > 0.5) {
        return Err(Error::domain(format!("mu_F must exceed 1/2, got {}", law.mu_f)));
    }
    let sq = law.sigma_q_sq.sqrt();
    let mu = law.mu_f;
    let bound =
        (law.sigma_f() * norm_isf(split.alpha_fn)? + sq * norm_isf(split.alpha_fp)? * (mu * (1.0 - mu)).sqrt()) / (mu - 0.5);
    let bound = bound.max(0.0);
    Ok(SplitMinimum {
        required_screening_pairs: bound * bound,
        sqrt_bound: bound,
        alpha_tilde: split.alpha_fp,
        kappa_tilde: 0.5,
    })
}
