//! Scalar primitives: binary entropy, binomial coefficients and the
//! exponential integral. All entropies are in bits.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Relative stopping threshold for truncated series: a series stops once a
/// term falls below `SERIES_REL_TOL * (|partial sum| + 1)`.
pub const SERIES_REL_TOL: f64 = 1e-14;

/// Where a truncated series was cut and a bound on what was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub terms: usize,
    pub tail_bound: f64,
}

/// `x log2 x` with the continuous extension `0 log2 0 = 0`.
#[inline]
pub fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Binary entropy without range checks. Callers guarantee `0 <= x <= 1`.
#[inline]
pub fn h2(x: f64) -> f64 {
    -xlog2x(x) - xlog2x(1.0 - x)
}

/// Binary entropy in bits, `-x log2 x - (1-x) log2 (1-x)`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("binary entropy needs 0 <= x <= 1, got {x}")));
    }
    Ok(h2(x))
}

/// Binomial coefficient `C(n, k)`, zero for `k > n`.
///
/// Exact (integer arithmetic) for `n <= 64`; above that a multiplicative
/// product in floating point with relative error far below 1e-12.
pub fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if n <= 64 {
        let mut acc: u128 = 1;
        for i in 0..k {
            // acc * (n - i) is divisible by (i + 1) at every step
            acc = acc * u128::from(n - i) / u128::from(i + 1);
        }
        return acc as f64;
    }
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Exponential integral `Ei(x) = ∫_{-∞}^{x} e^t / t dt` for `x < 0`.
pub fn exp_integral_ei(x: f64) -> Result<f64> {
    exp_integral_ei_with_report(x).map(|(v, _)| v)
}

/// As [`exp_integral_ei`], also returning how many terms were summed.
///
/// Small `|x|` uses the power series `γ + ln|x| + Σ x^k/(k k!)`. For
/// `|x| > 6` the alternating terms grow past 1e2 and cancellation would eat
/// the absolute accuracy, so the continued fraction for `E1(-x)` is used.
pub fn exp_integral_ei_with_report(x: f64) -> Result<(f64, TruncationReport)> {
    if !(x < 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Ei is implemented for finite x < 0, got {x}")));
    }
    let z = -x;
    if z <= 6.0 {
        let mut sum = 0.0;
        let mut pow_fact = 1.0; // x^k / k!
        let mut k = 0usize;
        loop {
            k += 1;
            pow_fact *= x / k as f64;
            let term = pow_fact / k as f64;
            sum += term;
            if term.abs() < SERIES_REL_TOL * (sum.abs() + 1.0) {
                break;
            }
        }
        let report = TruncationReport { terms: k, tail_bound: pow_fact.abs() };
        return Ok((EULER_GAMMA + z.ln() + sum, report));
    }
    // modified Lentz evaluation of E1(z) = e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...)))
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    let mut i = 0usize;
    loop {
        i += 1;
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 || i > 10_000 {
            break;
        }
    }
    let e1 = h * (-z).exp();
    Ok((-e1, TruncationReport { terms: i, tail_bound: f64::EPSILON * e1.abs() }))
}

/// Maximize a function on `[a, b]` by golden-section search. Returns
/// `(argmax, max)`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    // endpoints can win for monotone brackets
    let mid = 0.5 * (lo + hi);
    let mut best = (mid, f(mid));
    for e in [a, b] {
        let v = f(e);
        if v > best.1 {
            best = (e, v);
        }
    }
    best
}

/// Parse an inclusive grid `start:stop:step`. Endpoints are kept when they
/// fall within 1e-12 of a grid point.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Domain(format!("grid must be start:stop:step, got '{spec}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-12).floor() as usize;
    Ok((0..=count)
        .map(|k| {
            let v = start + k as f64 * step;
            if (v - stop).abs() < 1e-12 { stop } else { v }
        })
        .collect())
}
