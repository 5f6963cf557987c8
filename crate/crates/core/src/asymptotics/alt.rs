//! Alternative distributions for the pair differences.

use std::fmt;
use std::path::Path;

use rand_distr::{Distribution, StudentT};

use crate::error::{Error, Result};
use crate::numerics::student_t::{t_cdf_unchecked, t_ln_density_unchecked};
use crate::numerics::{find_root, grow_upper_bracket, norm_cdf, Rng};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Absolute tolerance for (F⁺)⁻¹.
const QUANTILE_TOL: f64 = 1e-10;

/// Distribution F of a treated-minus-control difference.
#[derive(Debug, Clone, PartialEq)]
pub enum AltModel {
    /// d + s·Z with Z standard normal.
    NormalShift { d: f64, s: f64 },
    /// d + T with T Student-t on `dof` degrees of freedom.
    TShift { dof: f64, d: f64 },
    /// Gaussian kernel smoothing of an observed sample.
    Empirical(Empirical),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Empirical {
    samples: Vec<f64>,
    bandwidth: f64,
}

impl Empirical {
    /// Uses Silverman's rule of thumb for the bandwidth.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Size { have: samples.len(), need: 2 });
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("empirical sample contains a non-finite value"));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
        let bandwidth = 0.9 * spread * n.powf(-0.2);
        Ok(Empirical { samples, bandwidth })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl AltModel {
    pub fn normal(d: f64, s: f64) -> Result<Self> {
        let m = AltModel::NormalShift { d, s };
        m.validate()?;
        Ok(m)
    }

    pub fn t(dof: f64, d: f64) -> Result<Self> {
        let m = AltModel::TShift { dof, d };
        m.validate()?;
        Ok(m)
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        Ok(AltModel::Empirical(Empirical::new(samples)?))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AltModel::NormalShift { d, s } => {
                if d.is_finite() && *s > 0.0 && s.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain(format!("normal model needs finite d and s > 0, got ({d},{s})")))
                }
            }
            AltModel::TShift { dof, d } => {
                if d.is_finite() && *dof > 0.0 && dof.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain(format!("t model needs dof > 0 and finite d, got ({dof},{d})")))
                }
            }
            AltModel::Empirical(e) => {
                if e.samples.len() >= 2 {
                    Ok(())
                } else {
                    Err(Error::Size { have: e.samples.len(), need: 2 })
                }
            }
        }
    }

    /// Parses `normal:d,s` or `t:dof,d`, reading `empirical:<path>` from
    /// a file of numbers separated by whitespace, commas or newlines.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = s
            .split_once(':')
            .ok_or_else(|| Error::domain(format!("alternative `{s}` needs the form family:params")))?;
        let two = || -> Result<(f64, f64)> {
            let v: Vec<f64> = args
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::domain(format!("alternative `{s}`: {e}")))?;
            match v[..] {
                [a, b] => Ok((a, b)),
                _ => Err(Error::domain(format!("alternative `{s}` needs two parameters"))),
            }
        };
        match name.trim().to_ascii_lowercase().as_str() {
            "normal" => {
                let (d, sd) = two()?;
                AltModel::normal(d, sd)
            }
            "t" => {
                let (dof, d) = two()?;
                AltModel::t(dof, d)
            }
            "empirical" => AltModel::empirical(read_samples(Path::new(args.trim()))?),
            _ => Err(Error::domain(format!("unknown alternative `{s}`"))),
        }
    }

    /// True for a zero-shift member of a symmetric family.
    pub fn is_symmetric_null(&self) -> bool {
        match self {
            AltModel::NormalShift { d, .. } | AltModel::TShift { d, .. } => *d == 0.0,
            AltModel::Empirical(_) => false,
        }
    }

    pub fn ln_density(&self, y: f64) -> f64 {
        match self {
            AltModel::NormalShift { d, s } => {
                let z = (y - d) / s;
                -0.5 * z * z - LN_SQRT_2PI - s.ln()
            }
            AltModel::TShift { dof, d } => t_ln_density_unchecked(y - d, *dof),
            AltModel::Empirical(e) => {
                if e.bandwidth == 0.0 {
                    return if e.samples.contains(&y) { f64::INFINITY } else { f64::NEG_INFINITY };
                }
                let h = e.bandwidth;
                let n = e.samples.len() as f64;
                log_sum_exp(e.samples.iter().map(|x| -0.5 * ((y - x) / h).powi(2)))
                    - LN_SQRT_2PI
                    - h.ln()
                    - n.ln()
            }
        }
    }

    pub fn density(&self, y: f64) -> f64 {
        self.ln_density(y).exp()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            AltModel::NormalShift { d, s } => norm_cdf((y - d) / s),
            AltModel::TShift { dof, d } => t_cdf_unchecked(y - d, *dof),
            AltModel::Empirical(e) => e.smoothed_cdf(y),
        }
    }

    /// P(Y > y), computed without cancellation in the upper tail.
    pub fn sf(&self, y: f64) -> f64 {
        match self {
            AltModel::NormalShift { d, s } => norm_cdf((d - y) / s),
            AltModel::TShift { dof, d } => t_cdf_unchecked(d - y, *dof),
            AltModel::Empirical(e) => e.smoothed_sf(y),
        }
    }

    /// F⁺(y) = P(|Y| ≤ y).
    pub fn abs_cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        (self.cdf(y) - self.cdf(-y)).max(0.0)
    }

    /// P(|Y| > y).
    pub fn abs_sf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        self.sf(y) + self.cdf(-y)
    }

    /// (F⁺)⁻¹(u), given u and v = 1 − u separately.
    pub fn abs_quantile_split(&self, u: f64, v: f64) -> Result<f64> {
        if !(u > 0.0 && v > 0.0) {
            return Err(Error::domain(format!("quantile level must lie in (0, 1), got {u}")));
        }
        if let AltModel::Empirical(e) = self {
            if e.bandwidth == 0.0 {
                return Err(Error::domain("empirical sample has no spread"));
            }
        }
        // increasing in y, crossing zero at the quantile
        let excess = |y: f64| if u <= 0.5 { self.abs_cdf(y) - u } else { v - self.abs_sf(y) };
        let hi = grow_upper_bracket(excess, 1.0)?;
        let lo = if hi > 1.0 { 0.5 * hi } else { 0.0 };
        find_root(excess, lo, hi, QUANTILE_TOL)
    }

    pub fn abs_quantile(&self, u: f64) -> Result<f64> {
        self.abs_quantile_split(u, 1.0 - u)
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            AltModel::NormalShift { d, s } => d + s * rng.standard_normal(),
            AltModel::TShift { dof, d } => {
                let t = StudentT::new(*dof).expect("validated degrees of freedom");
                d + t.sample(rng)
            }
            AltModel::Empirical(e) => {
                let x = e.samples[rng.below(e.samples.len())];
                if e.bandwidth > 0.0 {
                    x + e.bandwidth * rng.standard_normal()
                } else {
                    x
                }
            }
        }
    }

    pub fn sample_n(&self, n: usize, rng: &mut Rng) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

impl Empirical {
    fn smoothed_cdf(&self, y: f64) -> f64 {
        let n = self.samples.len() as f64;
        if self.bandwidth == 0.0 {
            return self.samples.iter().filter(|x| **x <= y).count() as f64 / n;
        }
        self.samples.iter().map(|x| norm_cdf((y - x) / self.bandwidth)).sum::<f64>() / n
    }

    fn smoothed_sf(&self, y: f64) -> f64 {
        let n = self.samples.len() as f64;
        if self.bandwidth == 0.0 {
            return self.samples.iter().filter(|x| **x > y).count() as f64 / n;
        }
        self.samples.iter().map(|x| norm_cdf((x - y) / self.bandwidth)).sum::<f64>() / n
    }
}

impl fmt::Display for AltModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AltModel::NormalShift { d, s } => write!(f, "normal:{d},{s}"),
            AltModel::TShift { dof, d } => write!(f, "t:{dof},{d}"),
            AltModel::Empirical(e) => write!(f, "empirical(n={})", e.samples.len()),
        }
    }
}

/// Reads every numeric token of a file; a non-numeric first line is taken
/// as a header.
pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).collect();
        for tok in tokens {
            match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ if lineno == 0 && out.is_empty() => break,
                _ => {
                    return Err(Error::Parse { line: lineno as u64 + 1, msg: format!("`{tok}` is not a finite number") })
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{norm_quantile, t_cdf};

    #[test]
    fn abs_quantile_inverts() {
        for alt in [AltModel::normal(0.5, 1.0).unwrap(), AltModel::t(2.0, 0.8).unwrap(), AltModel::normal(-2.0, 3.0).unwrap()] {
            for u in [1e-6, 0.01, 0.3, 0.5, 0.9, 0.999_999] {
                let y = alt.abs_quantile(u).unwrap();
                let back = if u <= 0.5 { alt.abs_cdf(y) } else { 1.0 - alt.abs_sf(y) };
                assert!((back - u).abs() < 1e-9, "{alt} {u}");
            }
        }
    }

    #[test]
    fn null_normal_quantile_is_half_normal() {
        let alt = AltModel::normal(0.0, 2.0).unwrap();
        let y = alt.abs_quantile(0.8).unwrap();
        assert!((y - 2.0 * norm_quantile(0.9).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn t_tail_is_accurate() {
        let alt = AltModel::t(2.0, 0.0).unwrap();
        // P(T > y) for ν = 2 is (1 − y/√(2+y²))/2
        let y: f64 = 1e4;
        let exact = 0.5 * (1.0 - y / (2.0 + y * y).sqrt());
        assert!((alt.sf(y) / exact - 1.0).abs() < 1e-8);
        assert!((alt.cdf(1.0) - t_cdf(1.0, 2.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn empirical_smoothing() {
        let alt = AltModel::empirical(vec![-1.0, 0.0, 1.0, 2.0, 3.0]).unwrap();
        let AltModel::Empirical(e) = &alt else { unreachable!() };
        assert!(e.bandwidth() > 0.0);
        assert!((alt.cdf(1.0) - 0.5).abs() < 0.1);
        assert!((alt.cdf(1.0) + alt.sf(1.0) - 1.0).abs() < 1e-14);
        let mut rng = Rng::new(0, 0);
        let xs = alt.sample_n(20_000, &mut rng);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 1.0).abs() < 0.05);
        assert!(AltModel::empirical(vec![1.0]).is_err());
    }

    #[test]
    fn parse_alternatives() {
        assert_eq!(AltModel::parse("normal:0.5,1").unwrap(), AltModel::NormalShift { d: 0.5, s: 1.0 });
        assert_eq!(AltModel::parse("t:2,0.8").unwrap(), AltModel::TShift { dof: 2.0, d: 0.8 });
        assert!(AltModel::parse("normal:0.5,0").is_err());
        assert!(AltModel::parse("cauchy:1,2").is_err());
        assert!(AltModel::parse("normal:1").is_err());
        let dir = std::env::temp_dir().join(format!("alt-parse-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("y.csv");
        std::fs::write(&path, "y\n0.5\n1.5\n-0.25\n").unwrap();
        let alt = AltModel::parse(&format!("empirical:{}", path.display())).unwrap();
        let AltModel::Empirical(e) = alt else { unreachable!() };
        assert_eq!(e.samples(), &[0.5, 1.5, -0.25]);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
