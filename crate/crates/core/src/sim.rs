//! Seeded simulation jobs that regenerate tables and plot data.
//!
//! Replication `r` of scenario `s` draws from `rng.substream(s).substream(r)`,
//! so every job is bit-identical for a given seed whatever the thread count.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotics::{
    g_function, kappa_law_asymptotic, kappa_law_finite, law_for, mu_f, power, AltModel, AsymptoticLaw, PowerVariant,
    Provenance, SimSettings,
};
use crate::design::{binary_score_grid, critical_size_grid};
use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::scores::{score_vector, sigma_q_sq, PairDiffs, ScoreSpec};
use crate::senscore::{kappa_of, kappa_star_closed, search_kappa, statistic, McTail, DEFAULT_MC_DRAWS};

/// Registered job names.
pub const JOBS: [&str; 7] = ["table2", "table3", "table4", "fig1", "fig2", "appB", "beta_table"];

/// Optional overrides of a job's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct JobParams {
    /// Sample sizes; `f64::INFINITY` is allowed where a job has a limit column.
    pub sizes: Option<Vec<f64>>,
    pub reps: Option<usize>,
    pub alpha: Option<f64>,
    /// Bounding-variable draws for Monte Carlo p-value bounds.
    pub draws: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimJob {
    pub name: String,
    pub params: JobParams,
}

impl SimJob {
    pub fn new(name: &str, params: JobParams) -> Result<Self> {
        let job = SimJob { name: name.to_string(), params };
        job.validate()?;
        Ok(job)
    }

    pub fn validate(&self) -> Result<()> {
        if !JOBS.contains(&self.name.as_str()) {
            return Err(Error::UnknownJob(self.name.clone()));
        }
        let p = &self.params;
        if p.reps == Some(0) {
            return Err(Error::domain("replication count must be at least 1"));
        }
        if p.draws == Some(0) {
            return Err(Error::domain("draw count must be at least 1"));
        }
        if let Some(a) = p.alpha {
            if !(a > 0.0 && a < 0.5) {
                return Err(Error::domain(format!("alpha must lie in (0, 1/2), got {a}")));
            }
        }
        if let Some(sizes) = &p.sizes {
            if sizes.is_empty() || sizes.iter().any(|&n| !(n >= 2.0) || (n.is_finite() && n.fract() != 0.0)) {
                return Err(Error::domain("sizes must be integers of at least 2, or inf"));
            }
        }
        Ok(())
    }
}

/// A table cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Missing,
}

impl Cell {
    fn size(n: f64) -> Cell {
        if n.is_finite() {
            Cell::Int(n as i64)
        } else {
            Cell::Text("inf".into())
        }
    }

    fn text(&self, decimals: Option<usize>) -> String {
        match self {
            Cell::Num(x) => match decimals {
                Some(d) => format!("{x:.d$}"),
                None => x.to_string(),
            },
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(k) => Some(*k as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Audit trail carried with every table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub job: String,
    pub seed: u64,
    pub replications: Option<usize>,
    /// Which summary the simulated columns report, where relevant.
    pub summary: Option<String>,
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub metadata: Metadata,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Writes `# key: value` metadata lines followed by the CSV body.
    /// `decimals` rounds floating-point cells.
    pub fn write_csv<W: Write>(&self, mut out: W, decimals: Option<usize>) -> Result<()> {
        let m = &self.metadata;
        writeln!(out, "# job: {}", m.job)?;
        writeln!(out, "# seed: {}", m.seed)?;
        if let Some(r) = m.replications {
            writeln!(out, "# replications: {r}")?;
        }
        if let Some(s) = &m.summary {
            writeln!(out, "# summary: {s}")?;
        }
        for (k, v) in &m.params {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        let to_io = |e: csv::Error| Error::Io(e.into());
        w.write_record(&self.columns).map_err(to_io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.text(decimals))).map_err(to_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobOutput {
    pub table: Table,
    pub runtime: Duration,
}

/// Runs a registered job. Output depends only on the job and `rng`'s seed
/// and stream.
pub fn run_job(job: &SimJob, rng: &Rng) -> Result<JobOutput> {
    job.validate()?;
    let start = Instant::now();
    let p = &job.params;
    let table = match job.name.as_str() {
        "table2" => table2(p, rng)?,
        "table3" => ustat_table(p, rng, "table3", AltModel::normal(0.3, 1.0)?, Summary::Median)?,
        "table4" => ustat_table(p, rng, "table4", AltModel::t(2.0, 0.8)?, Summary::Mean)?,
        "fig1" => fig1(rng)?,
        "fig2" => fig2(p, rng)?,
        "appB" => app_b(p, rng)?,
        "beta_table" => beta_table(p, rng)?,
        other => return Err(Error::UnknownJob(other.to_string())),
    };
    Ok(JobOutput { table, runtime: start.elapsed() })
}

fn metadata(job: &str, rng: &Rng, reps: Option<usize>, summary: Option<&str>, params: Value) -> Metadata {
    let params = match params {
        Value::Object(map) => map.into_iter().collect(),
        _ => BTreeMap::new(),
    };
    Metadata { job: job.into(), seed: rng.seed(), replications: reps, summary: summary.map(str::to_string), params }
}

fn sizes_json(sizes: &[f64]) -> Value {
    Value::Array(
        sizes
            .iter()
            .map(|&n| if n.is_finite() { json!(n as u64) } else { json!("inf") })
            .collect(),
    )
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 { x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn sorted(mut x: Vec<f64>) -> Vec<f64> {
    x.sort_by(f64::total_cmp);
    x
}

/// κ* by the closed form for one simulated dataset.
fn closed_kappa(spec: ScoreSpec, d: &PairDiffs, alpha: f64) -> Result<f64> {
    let sv = score_vector(spec, d)?;
    let t = statistic(&sv, d)?;
    Ok(kappa_star_closed(&sv, t, alpha, sv.effective_i)?.kappa_star)
}

/// |κ*closed − κ*search| for one dataset, the search running on Monte Carlo
/// bounds with common random numbers across Γ.
pub fn accuracy_gap(d: &PairDiffs, alpha: f64, draws: usize, rng: &Rng) -> Result<f64> {
    let sv = score_vector(ScoreSpec::Wilcoxon, d)?;
    let t = statistic(&sv, d)?;
    let closed = kappa_star_closed(&sv, t, alpha, sv.effective_i)?.kappa_star;
    let tail = McTail::new(&sv.q, t, draws, rng)?;
    let (searched, _) = search_kappa(&tail, alpha, 1e-5);
    Ok((closed - searched).abs())
}

fn table2(p: &JobParams, rng: &Rng) -> Result<Table> {
    let reps = p.reps.unwrap_or(100);
    let draws = p.draws.unwrap_or(DEFAULT_MC_DRAWS);
    let sizes = p.sizes.clone().unwrap_or_else(|| vec![30.0, 100.0]);
    let alphas = p.alpha.map_or_else(|| vec![0.05, 0.005], |a| vec![a]);
    if sizes.iter().any(|n| n.is_infinite()) {
        return Err(Error::domain("table2 needs finite sizes"));
    }
    let alts = [("N(1,1)", AltModel::normal(1.0, 1.0)?), ("t2+1.5", AltModel::t(2.0, 1.5)?)];

    let mut rows = Vec::new();
    let mut scenario = 0u64;
    for &n in &sizes {
        for (label, alt) in &alts {
            let stream = rng.substream(scenario);
            scenario += 1;
            // the same datasets serve every α
            let data: Vec<PairDiffs> = (0..reps)
                .map(|r| PairDiffs::new(alt.sample_n(n as usize, &mut stream.substream(r as u64))))
                .collect::<Result<_>>()?;
            for &alpha in &alphas {
                let gaps = data
                    .par_iter()
                    .enumerate()
                    .map(|(r, d)| accuracy_gap(d, alpha, draws, &stream.substream(r as u64).substream(1)))
                    .collect::<Result<Vec<f64>>>()?;
                let (mean, _) = mean_sd(&gaps);
                let s = sorted(gaps);
                rows.push(vec![
                    Cell::size(n),
                    (*label).into(),
                    alpha.into(),
                    quantile(&s, 0.1).into(),
                    mean.into(),
                    quantile(&s, 0.9).into(),
                ]);
            }
        }
    }
    Ok(Table {
        metadata: metadata(
            "table2",
            rng,
            Some(reps),
            Some("mean and 10%/90% quantiles of |kappa_closed - kappa_search|"),
            json!({ "sizes": sizes_json(&sizes), "alphas": alphas, "draws": draws, "score": "wilcoxon" }),
        ),
        columns: ["I", "dist", "alpha", "q10", "mean", "q90"].map(String::from).to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Summary {
    Median,
    Mean,
}

/// The ten U-statistic scores compared in the score-choice tables.
pub fn ustat_candidates() -> Vec<ScoreSpec> {
    [(2, 2, 2), (8, 8, 8), (8, 7, 8), (8, 6, 8), (8, 5, 8), (20, 20, 20), (20, 18, 20), (20, 16, 20), (8, 7, 7), (8, 6, 7)]
        .into_iter()
        .map(|(m, lo, hi)| ScoreSpec::UStat { m, lo, hi })
        .collect()
}

fn ustat_table(p: &JobParams, rng: &Rng, name: &str, alt: AltModel, summary: Summary) -> Result<Table> {
    let reps = p.reps.unwrap_or(1000);
    let alpha = p.alpha.unwrap_or(0.05);
    let sizes: Vec<f64> = p.sizes.clone().unwrap_or_else(|| vec![100.0, 500.0]).into_iter().filter(|n| n.is_finite()).collect();
    let sim = SimSettings { seed: rng.seed(), ..SimSettings::default() };
    let label = match summary {
        Summary::Median => "median",
        Summary::Mean => "mean",
    };

    let datasets: Vec<Vec<PairDiffs>> = sizes
        .iter()
        .enumerate()
        .map(|(s, &n)| {
            let stream = rng.substream(s as u64);
            (0..reps)
                .map(|r| PairDiffs::new(alt.sample_n(n as usize, &mut stream.substream(r as u64))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut columns = vec!["score".to_string()];
    for &n in &sizes {
        let n = n as u64;
        columns.extend([format!("approx_{n}"), format!("approx_sd_{n}"), format!("sim_{label}_{n}"), format!("sim_sd_{n}")]);
    }
    columns.push("mu_f".into());

    let mut rows = Vec::new();
    for spec in ustat_candidates() {
        let law = law_for(spec, &alt, &sim)?;
        let mut row = vec![Cell::Text(spec.to_string())];
        for (s, &n) in sizes.iter().enumerate() {
            // the Eq.10 law is normal, so its median and mean are its center
            let k = kappa_law_finite(&law, alpha, n)?;
            let kappas = datasets[s].par_iter().map(|d| closed_kappa(spec, d, alpha)).collect::<Result<Vec<f64>>>()?;
            let (mean, sd) = mean_sd(&kappas);
            let center = match summary {
                Summary::Mean => mean,
                Summary::Median => quantile(&sorted(kappas), 0.5),
            };
            row.extend([k.center.into(), k.sd.into(), center.into(), sd.into()]);
        }
        row.push(law.mu_f.into());
        rows.push(row);
    }
    Ok(Table {
        metadata: metadata(
            name,
            rng,
            Some(reps),
            Some(label),
            json!({
                "alt": alt.to_string(),
                "alpha": alpha,
                "sizes": sizes_json(&sizes),
                "sigma_f_i_sim": sim.i_sim,
                "sigma_f_draws": sim.draws,
            }),
        ),
        columns,
        rows,
    })
}

fn fig1(rng: &Rng) -> Result<Table> {
    let shifts = [0.0, 0.5, 1.0, 2.0];
    let mut models = Vec::new();
    for &d in &shifts {
        models.push((format!("normal_{d}"), AltModel::normal(d, 1.0)?));
    }
    for &d in &shifts {
        models.push((format!("t2_{d}"), AltModel::t(2.0, d)?));
    }
    let mut columns = vec!["u".to_string()];
    columns.extend(models.iter().map(|(n, _)| n.clone()));
    let rows = (1..=99)
        .into_par_iter()
        .map(|i| {
            let u = f64::from(i) / 100.0;
            let mut row = vec![Cell::Num(u)];
            for (_, alt) in &models {
                row.push(g_function(alt, u)?.into());
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table {
        metadata: metadata("fig1", rng, None, None, json!({ "shifts": shifts, "noise": ["normal", "t2"], "grid": 99 })),
        columns,
        rows,
    })
}

fn fig2(p: &JobParams, rng: &Rng) -> Result<Table> {
    let alpha = p.alpha.unwrap_or(0.05);
    let points = 50;
    let sq = sigma_q_sq(ScoreSpec::Wilcoxon)?;
    let mut rows = Vec::new();
    for pi1 in [0.5, 0.75] {
        for c in critical_size_grid(pi1, alpha, sq, points)? {
            rows.push(vec![
                pi1.into(),
                c.mu_f1.into(),
                c.mu_f2.into(),
                Cell::Int(i64::from(c.preferred)),
                c.i_star.map_or(Cell::Missing, Cell::Num),
            ]);
        }
    }
    Ok(Table {
        metadata: metadata(
            "fig2",
            rng,
            None,
            None,
            json!({ "alpha": alpha, "pi1": [0.5, 0.75], "points": points, "score": "wilcoxon", "sigma_q_sq": sq }),
        ),
        columns: ["pi1", "mu_f1", "mu_f2", "preferred", "I_star"].map(String::from).to_vec(),
        rows,
    })
}

fn app_b(p: &JobParams, rng: &Rng) -> Result<Table> {
    let alpha = p.alpha.unwrap_or(0.05);
    let step = 0.01;
    let sizes = p.sizes.clone().unwrap_or_else(|| vec![50.0, 100.0, 500.0, f64::INFINITY]);
    let normal = AltModel::normal(0.3, 1.0)?;
    let heavy = AltModel::t(2.0, 0.8)?;
    let mut rows = Vec::new();
    for &n in &sizes {
        let grid = binary_score_grid(&normal, n, alpha, step)?;
        for c in grid.cells.iter().filter(|c| c.tau_u == 1.0) {
            rows.push(vec!["normal_tau_u_1".into(), Cell::size(n), c.tau_l.into(), c.tau_u.into(), c.mu_f.into(), c.mean_kappa.into()]);
        }
    }
    let grid = binary_score_grid(&heavy, 500.0, alpha, step)?;
    for c in &grid.cells {
        rows.push(vec!["t2_contour".into(), Cell::Int(500), c.tau_l.into(), c.tau_u.into(), c.mu_f.into(), c.mean_kappa.into()]);
    }
    let b = grid.best;
    Ok(Table {
        metadata: metadata(
            "appB",
            rng,
            None,
            None,
            json!({
                "alpha": alpha,
                "step": step,
                "normal_alt": normal.to_string(),
                "normal_sizes": sizes_json(&sizes),
                "contour_alt": heavy.to_string(),
                "contour_best": { "tau_l": b.tau_l, "tau_u": b.tau_u, "mean_kappa": b.mean_kappa },
            }),
        ),
        columns: ["panel", "I", "tau_l", "tau_u", "mu_f", "mean_kappa"].map(String::from).to_vec(),
        rows,
    })
}

fn beta_table(p: &JobParams, rng: &Rng) -> Result<Table> {
    let alpha = p.alpha.unwrap_or(0.05);
    let sizes = p.sizes.clone().unwrap_or_else(|| vec![100.0, 500.0, f64::INFINITY]);
    let alts = [
        ("N(0.5,1)", AltModel::normal(0.5, 1.0)?),
        ("N(1,1)", AltModel::normal(1.0, 1.0)?),
        ("t2+0.5", AltModel::t(2.0, 0.5)?),
        ("t2+1", AltModel::t(2.0, 1.0)?),
    ];
    let specs: Vec<ScoreSpec> = [2.0, 4.0, 8.0]
        .into_iter()
        .flat_map(|a| [0.6, 1.0, 2.0, 4.0].into_iter().map(move |b| ScoreSpec::Beta { a, b }))
        .collect();
    let mut columns = vec!["a".to_string(), "b".to_string()];
    for (label, _) in &alts {
        for &n in &sizes {
            columns.push(if n.is_finite() { format!("{label} I={}", n as u64) } else { format!("{label} I=inf") });
        }
    }
    let rows = specs
        .par_iter()
        .map(|&spec| {
            let ScoreSpec::Beta { a, b } = spec else { unreachable!() };
            let sq = sigma_q_sq(spec)?;
            let mut row = vec![Cell::Num(a), Cell::Num(b)];
            for (_, alt) in &alts {
                let law = AsymptoticLaw::new(mu_f(spec, alt)?, 0.0, sq, Provenance::Quadrature)?;
                for &n in &sizes {
                    row.push(kappa_law_asymptotic(&law, alpha, n)?.center.into());
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table {
        metadata: metadata(
            "beta_table",
            rng,
            None,
            Some("asymptotic mean of kappa*"),
            json!({ "alpha": alpha, "sizes": sizes_json(&sizes) }),
        ),
        columns,
        rows,
    })
}

/// Simulated power next to the three analytic approximations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerCheck {
    pub simulated: f64,
    pub simulated_se: f64,
    pub eq9: f64,
    pub eq10: f64,
    pub no_constant: f64,
    pub replications: usize,
    pub seed: u64,
}

/// Power of a sensitivity analysis at Γ: the share of `reps` simulated
/// datasets whose closed-form κ* exceeds Γ/(1+Γ), with the analytic
/// approximations for comparison.
pub fn power_check(
    alt: &AltModel,
    spec: ScoreSpec,
    n: usize,
    gamma: f64,
    alpha: f64,
    reps: usize,
    rng: &Rng,
) -> Result<PowerCheck> {
    if reps < 1000 {
        return Err(Error::domain(format!("power check needs at least 1000 replications, got {reps}")));
    }
    if n < 2 {
        return Err(Error::domain(format!("I must be at least 2, got {n}")));
    }
    let law = law_for(spec, alt, &SimSettings { seed: rng.seed(), ..SimSettings::default() })?;
    let nf = n as f64;
    let eq9 = power(&law, alpha, nf, gamma, PowerVariant::Asymptotic)?;
    let eq10 = power(&law, alpha, nf, gamma, PowerVariant::Finite)?;
    let no_constant = power(&law, alpha, nf, gamma, PowerVariant::NoConstant)?;
    let kappa = kappa_of(gamma);
    let hits = (0..reps)
        .into_par_iter()
        .map(|r| {
            let d = PairDiffs::new(alt.sample_n(n, &mut rng.substream(r as u64)))?;
            Ok(usize::from(closed_kappa(spec, &d, alpha)? > kappa))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    let simulated = hits as f64 / reps as f64;
    Ok(PowerCheck {
        simulated,
        simulated_se: (simulated * (1.0 - simulated) / reps as f64).sqrt(),
        eq9,
        eq10,
        no_constant,
        replications: reps,
        seed: rng.seed(),
    })
}
