//! Screening many outcomes by their sensitivity values.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{kappa_law_finite, null_law, KappaLaw};
use crate::error::{Error, Result};
use crate::numerics::{norm_quantile, Rng};
use crate::scores::{differences, natural_cmp, score_vector, PairDiffs, RawPairs, RawUnit, ScoreSpec};
use crate::senscore::{sensitivity_value, statistic, Method, Tail, DEFAULT_TOL};

/// Outcomes with fewer nonzero pairs are flagged rather than analysed.
pub const MIN_NONZERO_PAIRS: usize = 5;

/// Differences for several outcomes over a shared set of pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeMatrix {
    ids: Vec<String>,
    pairs: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl OutcomeMatrix {
    pub fn new(ids: Vec<String>, pairs: Vec<String>, rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::domain("at least one outcome is required"));
        }
        if ids.len() != rows.len() {
            return Err(Error::domain(format!("{} ids for {} rows", ids.len(), rows.len())));
        }
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id) {
                return Err(Error::domain(format!("duplicate outcome id `{id}`")));
            }
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != pairs.len()) {
            return Err(Error::domain(format!("outcome `{}` has {} entries for {} pairs", ids[i], r.len(), pairs.len())));
        }
        if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::domain("differences must be finite"));
        }
        Ok(OutcomeMatrix { ids, pairs, rows })
    }

    /// Builds a matrix with complete rows and pairs labelled 1..I.
    pub fn from_complete(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        let pairs = (1..=width).map(|k| k.to_string()).collect();
        OutcomeMatrix::new(ids, pairs, rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect())
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn pairs(&self) -> &[String] {
        &self.pairs
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// The observed differences of one outcome, skipping missing entries.
    pub fn diffs(&self, i: usize) -> Option<PairDiffs> {
        PairDiffs::new(self.rows[i].iter().flatten().copied().collect()).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    /// `outcome,p1,...,pI`, one row per outcome.
    Wide,
    /// `outcome,pair,y`.
    Long,
    /// `outcome,pair,z,r`, one row per unit.
    Raw,
}

impl FromStr for InputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wide" => Ok(InputFormat::Wide),
            "long" => Ok(InputFormat::Long),
            "raw" => Ok(InputFormat::Raw),
            _ => Err(Error::domain(format!("unknown format `{s}` (expected wide, long or raw)"))),
        }
    }
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn load_matrix(path: &Path, format: InputFormat) -> Result<OutcomeMatrix> {
    read_matrix(open(path)?, format)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            Error::Parse { line, msg: format!("expected {expected_len} fields, found {len}") }
        }
        other => Error::Parse { line, msg: format!("{other:?}") },
    }
}

fn parse_cell(cell: &str, line: u64, what: &str) -> Result<Option<f64>> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Parse { line, msg: format!("{what} `{cell}` is not a finite number") }),
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Parse { line: 1, msg: format!("missing column `{name}`") })
}

pub fn read_matrix<R: Read>(reader: R, format: InputFormat) -> Result<OutcomeMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    match format {
        InputFormat::Wide => read_wide(&mut rdr, &headers),
        InputFormat::Long => read_long(&mut rdr, &headers),
        InputFormat::Raw => read_raw(&mut rdr, &headers),
    }
}

fn records<R: Read>(rdr: &mut csv::Reader<R>) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + '_ {
    rdr.records().map(|r| {
        let rec = r.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        Ok((line, rec))
    })
}

fn read_wide<R: Read>(rdr: &mut csv::Reader<R>, headers: &csv::StringRecord) -> Result<OutcomeMatrix> {
    if headers.len() < 2 {
        return Err(Error::Parse { line: 1, msg: "wide format needs an outcome column and at least one pair".into() });
    }
    let pairs: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let (mut ids, mut rows) = (Vec::new(), Vec::new());
    let mut seen = HashSet::new();
    for rec in records(rdr) {
        let (line, rec) = rec?;
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::Parse { line, msg: format!("duplicate outcome id `{id}`") });
        }
        let row = rec.iter().skip(1).map(|c| parse_cell(c, line, "difference")).collect::<Result<Vec<_>>>()?;
        ids.push(id);
        rows.push(row);
    }
    OutcomeMatrix::new(ids, pairs, rows)
}

/// Collects labelled cells into a matrix whose outcomes keep their order of
/// first appearance and whose pairs are in natural order.
fn assemble(order: Vec<String>, cells: HashMap<(String, String), f64>) -> Result<OutcomeMatrix> {
    let mut pairs: Vec<String> = cells.keys().map(|(_, p)| p.clone()).collect::<HashSet<_>>().into_iter().collect();
    pairs.sort_by(|a, b| natural_cmp(a, b));
    let rows = order
        .iter()
        .map(|o| pairs.iter().map(|p| cells.get(&(o.clone(), p.clone())).copied()).collect())
        .collect();
    OutcomeMatrix::new(order, pairs, rows)
}

fn read_long<R: Read>(rdr: &mut csv::Reader<R>, headers: &csv::StringRecord) -> Result<OutcomeMatrix> {
    let (co, cp, cy) = (column(headers, "outcome")?, column(headers, "pair")?, column(headers, "y")?);
    let mut order = Vec::new();
    let mut known = HashSet::new();
    let mut cells = HashMap::new();
    for rec in records(rdr) {
        let (line, rec) = rec?;
        let (o, p) = (rec[co].to_string(), rec[cp].to_string());
        let Some(y) = parse_cell(&rec[cy], line, "y")? else { continue };
        if known.insert(o.clone()) {
            order.push(o.clone());
        }
        if cells.insert((o.clone(), p.clone()), y).is_some() {
            return Err(Error::Parse { line, msg: format!("pair `{p}` repeated for outcome `{o}`") });
        }
    }
    assemble(order, cells)
}

fn read_raw<R: Read>(rdr: &mut csv::Reader<R>, headers: &csv::StringRecord) -> Result<OutcomeMatrix> {
    // a file without an outcome column holds a single outcome
    let co = column(headers, "outcome").ok();
    let cp = column(headers, "pair")?;
    let (cz, cr) = (column(headers, "z")?, column(headers, "r")?);
    let mut order = Vec::new();
    let mut units: BTreeMap<(String, String), Vec<(u64, RawUnit)>> = BTreeMap::new();
    for rec in records(rdr) {
        let (line, rec) = rec?;
        let o = co.map_or_else(|| "y".to_string(), |c| rec[c].to_string());
        let p = rec[cp].to_string();
        let treated = match &rec[cz] {
            "1" => true,
            "0" => false,
            z => return Err(Error::Parse { line, msg: format!("z must be 0 or 1, found `{z}`") }),
        };
        let outcome = parse_cell(&rec[cr], line, "r")?
            .ok_or_else(|| Error::Parse { line, msg: "missing outcome r".into() })?;
        if !order.contains(&o) {
            order.push(o.clone());
        }
        let entry = units.entry((o, p.clone())).or_default();
        let unit = (entry.len() + 1).min(u8::MAX as usize) as u8;
        entry.push((line, RawUnit { pair_id: p, unit, treated, outcome }));
    }
    let mut cells = HashMap::new();
    for ((o, p), recs) in units {
        let lines: Vec<String> = recs.iter().map(|(l, _)| l.to_string()).collect();
        let raw = RawPairs { units: recs.into_iter().map(|(_, u)| u).collect() };
        let y = differences(&raw).map_err(|e| match e {
            Error::InvalidPair { pair_id, reason } => Error::InvalidPair {
                pair_id,
                reason: format!("outcome `{o}`, lines {}: {reason}", lines.join(",")),
            },
            other => other,
        })?;
        cells.insert((o, p), y.values()[0]);
    }
    assemble(order, cells)
}

/// Reads the pair differences of a single dataset: either a `y` column of
/// differences or raw `pair,z,r` records.
pub fn read_pairs<R: Read>(reader: R) -> Result<PairDiffs> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let m = if column(&headers, "y").is_ok() {
        let cy = column(&headers, "y")?;
        let mut values = Vec::new();
        for rec in records(&mut rdr) {
            let (line, rec) = rec?;
            let y = parse_cell(&rec[cy], line, "y")?.ok_or_else(|| Error::Parse { line, msg: "missing y".into() })?;
            values.push(y);
        }
        return PairDiffs::new(values).map_err(|_| Error::Parse { line: 1, msg: "no pair differences found".into() });
    } else if column(&headers, "z").is_ok() && column(&headers, "r").is_ok() {
        read_raw(&mut rdr, &headers)?
    } else {
        return Err(Error::Parse { line: 1, msg: "expected a `y` column or `pair,z,r` columns".into() });
    };
    if m.len() != 1 {
        return Err(Error::Parse { line: 1, msg: format!("expected one outcome, found {}", m.len()) });
    }
    m.diffs(0).ok_or_else(|| Error::Parse { line: 1, msg: "no pair differences found".into() })
}

pub fn load_pairs(path: &Path) -> Result<PairDiffs> {
    read_pairs(open(path)?)
}

/// Per-outcome screening result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreenRow {
    pub outcome: String,
    #[serde(rename = "effective_I")]
    pub effective_i: usize,
    #[serde(rename = "T")]
    pub statistic: Option<f64>,
    pub kappa_greater: Option<f64>,
    pub kappa_less: Option<f64>,
    pub kappa_two_sided: Option<f64>,
    /// Γ** for the requested tail.
    pub gamma_trunc: Option<f64>,
    pub rank: Option<usize>,
    pub flags: Vec<String>,
}

impl ScreenRow {
    /// κ* of the requested tail.
    pub fn kappa(&self, tail: Tail) -> Option<f64> {
        match tail {
            Tail::Greater => self.kappa_greater,
            Tail::Less => self.kappa_less,
            Tail::TwoSided => self.kappa_two_sided,
        }
    }
}

/// The finite-sample law of κ* under the null, for overplotting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullReference {
    pub center: f64,
    pub sd: f64,
    #[serde(rename = "median_effective_I")]
    pub median_effective_i: f64,
    pub alpha_per_side: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningTable {
    pub score: ScoreSpec,
    pub alpha: f64,
    pub tail: Tail,
    pub method: Method,
    pub null_reference: Option<NullReference>,
    /// Rows in input order.
    pub outcomes: Vec<ScreenRow>,
}

impl ScreeningTable {
    /// Rows ordered by rank, unranked rows last in input order.
    pub fn ranked(&self) -> Vec<&ScreenRow> {
        let mut rows: Vec<&ScreenRow> = self.outcomes.iter().collect();
        rows.sort_by_key(|r| r.rank.unwrap_or(usize::MAX));
        rows
    }

    pub fn kappas(&self) -> Vec<f64> {
        self.outcomes.iter().filter_map(|r| r.kappa(self.tail)).collect()
    }
}

fn outcome_method(method: Method, index: usize) -> Method {
    match method {
        Method::MonteCarlo { draws, seed } => {
            Method::MonteCarlo { draws, seed: Rng::new(seed, 0).substream(index as u64).next_u64() }
        }
        m => m,
    }
}

fn screen_one(d: Option<PairDiffs>, id: &str, spec: ScoreSpec, alpha: f64, tail: Tail, method: Method) -> Result<ScreenRow> {
    let mut row = ScreenRow {
        outcome: id.to_string(),
        effective_i: 0,
        statistic: None,
        kappa_greater: None,
        kappa_less: None,
        kappa_two_sided: None,
        gamma_trunc: None,
        rank: None,
        flags: Vec::new(),
    };
    let Some(d) = d else {
        row.flags.push("insufficient_pairs".into());
        return Ok(row);
    };
    row.effective_i = d.nonzero_count();
    if row.effective_i < MIN_NONZERO_PAIRS {
        row.flags.push("insufficient_pairs".into());
        return Ok(row);
    }
    let sv = score_vector(spec, &d)?;
    row.statistic = Some(statistic(&sv, &d)?);
    let greater = sensitivity_value(&sv, &d, alpha, Tail::Greater, method, DEFAULT_TOL)?;
    let less = sensitivity_value(&sv, &d, alpha, Tail::Less, method, DEFAULT_TOL)?;
    let two = sensitivity_value(&sv, &d, alpha, Tail::TwoSided, method, DEFAULT_TOL)?;
    let chosen = match tail {
        Tail::Greater => greater,
        Tail::Less => less,
        Tail::TwoSided => two,
    };
    row.kappa_greater = Some(greater.kappa_star);
    row.kappa_less = Some(less.kappa_star);
    row.kappa_two_sided = Some(two.kappa_star);
    row.gamma_trunc = Some(chosen.gamma_star_trunc);
    if chosen.degenerate {
        row.flags.push("degenerate".into());
    }
    Ok(row)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Sensitivity values for every outcome, ranked by the requested tail.
pub fn screen(m: &OutcomeMatrix, spec: ScoreSpec, alpha: f64, tail: Tail, method: Method) -> Result<ScreeningTable> {
    spec.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut outcomes = (0..m.len())
        .into_par_iter()
        .map(|i| screen_one(m.diffs(i), &m.ids[i], spec, alpha, tail, outcome_method(method, i)))
        .collect::<Result<Vec<ScreenRow>>>()?;

    let mut order: Vec<usize> = (0..outcomes.len()).filter(|&i| outcomes[i].kappa(tail).is_some()).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (outcomes[a].kappa(tail).unwrap(), outcomes[b].kappa(tail).unwrap());
        kb.total_cmp(&ka).then_with(|| natural_cmp(&outcomes[a].outcome, &outcomes[b].outcome))
    });
    for (rank, &i) in order.iter().enumerate() {
        outcomes[i].rank = Some(rank + 1);
    }

    let mut sizes: Vec<f64> = order.iter().map(|&i| outcomes[i].effective_i as f64).collect();
    let null_reference = if sizes.is_empty() {
        None
    } else {
        let n = median(&mut sizes);
        let per_side = if tail == Tail::TwoSided { alpha / 2.0 } else { alpha };
        let KappaLaw { center, sd } = kappa_law_finite(&null_law(spec)?, per_side, n)?;
        Some(NullReference { center, sd, median_effective_i: n, alpha_per_side: per_side })
    };
    Ok(ScreeningTable { score: spec, alpha, tail, method, null_reference, outcomes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub observed: f64,
}

/// Sorted κ* against standard-normal quantiles at (i − 1/2)/n.
pub fn qq_data(table: &ScreeningTable) -> Result<Vec<QqPoint>> {
    let mut kappas = table.kappas();
    if kappas.len() < 2 {
        return Err(Error::Size { have: kappas.len(), need: 2 });
    }
    kappas.sort_by(f64::total_cmp);
    let n = kappas.len() as f64;
    kappas
        .into_iter()
        .enumerate()
        .map(|(i, observed)| Ok(QqPoint { theoretical: norm_quantile((i as f64 + 0.5) / n)?, observed }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Right-open bins of the given width covering [0, 1]; κ* = 1 falls in the
/// last bin.
pub fn histogram_bins(table: &ScreeningTable, bin_width: f64) -> Result<Vec<Bin>> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(Error::domain(format!("bin width must lie in (0, 1], got {bin_width}")));
    }
    let nbins = ((1.0 / bin_width) - 1e-9).ceil() as usize;
    let mut bins: Vec<Bin> = (0..nbins)
        .map(|k| Bin { lo: k as f64 * bin_width, hi: ((k + 1) as f64 * bin_width).min(1.0), count: 0 })
        .collect();
    for k in table.kappas() {
        let idx = ((k / bin_width).floor() as usize).min(nbins - 1);
        bins[idx].count += 1;
    }
    Ok(bins)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Writes the ranked table as CSV.
pub fn write_csv<W: Write>(table: &ScreeningTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header = ["outcome", "effective_I", "T", "kappa_greater", "kappa_less", "kappa_two_sided", "gamma_trunc", "rank", "flags"];
    w.write_record(header).map_err(csv_error)?;
    for r in table.ranked() {
        w.write_record([
            r.outcome.clone(),
            r.effective_i.to_string(),
            opt(r.statistic),
            opt(r.kappa_greater),
            opt(r.kappa_less),
            opt(r.kappa_two_sided),
            opt(r.gamma_trunc),
            r.rank.map_or_else(String::new, |k| k.to_string()),
            r.flags.join(";"),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
