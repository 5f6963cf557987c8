//! Adaptive Gauss–Kronrod quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// 7-point Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 20_000;

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(non_finite(center, fc));
    }
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(non_finite(x1, f1));
        }
        if !f2.is_finite() {
            return Err(non_finite(x2, f2));
        }
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Ok(Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

fn non_finite(x: f64, fx: f64) -> Error {
    Error::Integration(format!("integrand evaluated to {fx} at {x}"))
}

/// Globally adaptive G7/K15 quadrature of `f` over the finite interval
/// `[a, b]`. The endpoints themselves are never evaluated.
pub fn integrate_interval<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!("interval [{a}, {b}] must be finite")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let first = kronrod15(&mut f, a, b)?;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    while total_err > tol {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Integration(format!(
                "no convergence after {MAX_SEGMENTS} segments (error estimate {total_err:e})"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Segment cannot be split further in floating point.
            heap.push(worst);
            break;
        }
        let left = kronrod15(&mut f, worst.a, mid)?;
        let right = kronrod15(&mut f, mid, worst.b)?;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Sum from the segments rather than a running total to avoid drift.
    Ok(heap.iter().map(|s| s.value).sum())
}

/// Integrates `f` over the open unit interval.
///
/// The substitution u = 3t² − 2t³ flattens the integrand near both ends,
/// which tames integrable power singularities such as u^(−1/2).
pub fn integrate<F>(mut f: F, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate_unit(|u, _| f(u), tol)
}

/// Like [`integrate`], but `f` receives both u and 1 − u, each computed
/// without cancellation, so integrands singular at 1 can be evaluated
/// arbitrarily close to it.
pub fn integrate_unit<F>(mut f: F, tol: f64) -> Result<f64>
where
    F: FnMut(f64, f64) -> f64,
{
    // Each half is parametrized by the distance to its own endpoint so
    // that points next to u = 1 stay resolvable.
    let mut half = |t: f64, upper: bool| {
        let w = t * t * (3.0 - 2.0 * t);
        let jac = 6.0 * t * (1.0 - t);
        if jac == 0.0 {
            return 0.0;
        }
        let value = if upper { f(1.0 - w, w) } else { f(w, 1.0 - w) };
        value * jac
    };
    let lower = integrate_interval(|t| half(t, false), 0.0, 0.5, 0.5 * tol)?;
    let upper = integrate_interval(|t| half(t, true), 0.0, 0.5, 0.5 * tol)?;
    Ok(lower + upper)
}
