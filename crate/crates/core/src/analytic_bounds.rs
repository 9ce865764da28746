//! Closed-form and series bounds for the deletion and replication channels.

use crate::channel_core::ChannelParams;
use crate::core_math::{binom, exp_integral_ei, golden_section_max, h2, TruncationReport};
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest `m + i - 1` for which [`h_im`] enumerates.
pub const H_IM_MAX_LEN: usize = 20;
/// Largest truncation order accepted by [`bdc_markov1_d2`].
pub const MARKOV1_D2_MAX_M: usize = 64;
/// Tolerance of every scalar search over the Markov flip probability.
pub const ALPHA_TOL: f64 = 1e-6;
/// Default truncation of the replication series.
pub const DEFAULT_KMAX: usize = 400;
/// `i` at which `ψ_{i,1}` stands in for its limit.
pub const PSI_LIMIT_I: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    Lower,
    Upper,
    ExactRate,
}

/// A bound or rate in bits per channel use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub kind: BoundKind,
    pub validity: String,
    pub truncation: Option<TruncationReport>,
}

impl BoundValue {
    fn new(value: f64, kind: BoundKind, validity: impl Into<String>) -> Self {
        Self { value, kind, validity: validity.into(), truncation: None }
    }

    fn truncated(mut self, terms: usize, tail_bound: f64) -> Self {
        self.truncation = Some(TruncationReport { terms, tail_bound });
        self
    }
}

/// Erasure-channel sandwich `(lower, upper)` for any deletion-replication
/// channel.
pub fn drc_simple_bounds(params: &ChannelParams) -> (BoundValue, BoundValue) {
    let (pd, pr) = (params.p_d, params.p_r);
    let lower = ((1.0 - pd) * (1.0 - h2(pr) / (1.0 - pr)) - h2(pd)).max(0.0);
    (
        BoundValue::new(lower, BoundKind::Lower, "0 <= p_d, p_r < 1"),
        BoundValue::new(1.0 - pd, BoundKind::Upper, "0 <= p_d, p_r < 1"),
    )
}

/// `H(Z_1 | Z_i = -m, X, Y)` for i.u.d. inputs on the deletion channel,
/// by enumerating every input of length `m + i - 1` and every output of
/// length `i - 1`.
pub fn h_im(i: usize, m: usize) -> Result<f64> {
    if i < 2 {
        return Err(Error::Domain(format!("h_im needs i >= 2, got {i}")));
    }
    let len = m + i - 1;
    if len > H_IM_MAX_LEN {
        return Err(Error::Size(format!("h_im enumerates 2^(m+i-1) inputs; m+i-1={len} exceeds {H_IM_MAX_LEN}")));
    }
    if m == 0 {
        return Ok(0.0);
    }
    let total: f64 = (0..1u64 << len)
        .into_par_iter()
        .map(|code| {
            let x: Vec<u8> = (0..len).map(|t| ((code >> (len - 1 - t)) & 1) as u8).collect();
            let ones = vec![1.0; len + 2];
            let mut acc = 0.0;
            h_im_walk(&x, m, i - 2, &ones, &mut acc);
            acc
        })
        .sum();
    Ok(total / (binom(len as u64, m as u64) * (len as f64).exp2()))
}

/// Walk every suffix `v` of length `depth` below the current one. `wv[t]`
/// holds `w_v(x_t..x_L)` for `t = 1..=L+1` (entry 0 unused).
fn h_im_walk(x: &[u8], m: usize, depth: usize, wv: &[f64], acc: &mut f64) {
    let len = x.len();
    for b in 0..2u8 {
        if depth == 0 {
            // y = b v; w_y(x) and the per-offset counts c_s
            let mut w = 0.0;
            for t in 1..=len {
                if x[t - 1] == b {
                    w += wv[t + 1];
                }
            }
            if w == 0.0 {
                continue;
            }
            let mut sc = 0.0;
            for s in 1..=m + 1 {
                if x[s - 1] == b {
                    let c = wv[s + 1];
                    if c > 0.0 {
                        sc += c * c.log2();
                    }
                }
            }
            *acc += w * w.log2() - sc;
        } else {
            let mut next = vec![0.0; len + 2];
            let mut run = 0.0;
            for t in (1..=len).rev() {
                if x[t - 1] == b {
                    run += wv[t + 1];
                }
                next[t] = run;
            }
            if next[1] == 0.0 {
                continue;
            }
            h_im_walk(x, m, depth - 1, &next, acc);
        }
    }
}

/// `ψ_{i,m} = C(m+i-1, m) · H(Z_1 | Z_i = -m, X, Y)`.
pub fn psi_im(i: usize, m: usize) -> Result<f64> {
    if i < 2 || m == 0 {
        return Ok(0.0);
    }
    Ok(binom((m + i - 1) as u64, m as u64) * h_im(i, m)?)
}

/// `log2(n)` minus the mean binary entropy of the weight fraction of a
/// uniform `n`-bit string, with `n = m + 1`.
pub fn h2m_closed(m: usize) -> f64 {
    let n = m + 1;
    let nf = n as f64;
    // binomial(n, 1/2) pmf in log space so large m does not underflow
    let mut ln_pmf = -nf * std::f64::consts::LN_2;
    let mut s = 0.0;
    for j in 0..=n {
        if j > 0 {
            ln_pmf += ((n - j + 1) as f64 / j as f64).ln();
        }
        s += ln_pmf.exp() * h2(j as f64 / nf);
    }
    nf.log2() - s
}

/// `D_2` for i.u.d. inputs on the deletion channel, summed to `m_max`.
pub fn d2_iud(p: f64, m_max: usize) -> Result<BoundValue> {
    check_unit_open(p, "d2_iud")?;
    let q = 1.0 - p;
    let mut sum = 0.0;
    let mut pm = 1.0;
    for m in 0..=m_max {
        sum += (m + 1) as f64 * pm * h2m_closed(m);
        pm *= p;
    }
    // tail bounded through H_m <= log2(m + 1)
    let mut tail = 0.0;
    let mut m = m_max + 1;
    let mut pm_tail = p.powi(m as i32);
    while pm_tail > 0.0 && m < m_max + 100_000 {
        let t = (m + 1) as f64 * pm_tail * ((m + 1) as f64).log2();
        tail += t;
        if t < 1e-18 * (tail + 1e-300) || t < 1e-300 {
            break;
        }
        pm_tail *= p;
        m += 1;
    }
    let value = q - h2(p) + q * q * q * sum;
    Ok(BoundValue::new(value, BoundKind::Lower, "0 <= p < 1").truncated(m_max + 1, q * q * q * tail))
}

/// `p* = exp(-(1 + ln 2) / (2 ln 2))`, where the integral bound on the
/// `D_2` series stops holding.
pub fn p_star_d2() -> f64 {
    let ln2 = std::f64::consts::LN_2;
    (-(1.0 + ln2) / (2.0 * ln2)).exp()
}

/// Closed-form lower bound on `D_2` for i.u.d. inputs, valid for
/// `0 < p < p*`.
pub fn d2_iud_closed(p: f64) -> Result<BoundValue> {
    let ps = p_star_d2();
    if !(p > 0.0 && p < ps) {
        return Err(Error::Validity(format!("closed-form D2 bound needs 0 < p < {ps}, got {p}")));
    }
    let q = 1.0 - p;
    let lp = p.ln();
    let ln2 = std::f64::consts::LN_2;
    let log2e = std::f64::consts::LOG2_E;
    let ei = exp_integral_ei(2.0 * lp)?;
    let series = (log2e / lp) * (p * (1.0 + ln2) / lp - 2.0 * p * ln2 - ei / p);
    let value = 4.0 * q * q * q / ((2.0 - p) * (2.0 - p)) - h2(p) + q * q * q * series;
    Ok(BoundValue::new(value, BoundKind::Lower, format!("0 < p < {ps}")))
}

/// `ψ_{i,1}` from its closed sum.
pub fn psi_i1(i: usize) -> f64 {
    let mut s = 0.0;
    for j in 1..i.saturating_sub(1) {
        s += j as f64 / (j as f64).exp2() * (j as f64).log2();
    }
    let ii = i as f64;
    0.5 * s + 2.0 * ii / ii.exp2() * if i >= 1 { ii.log2() } else { 0.0 }
}

/// `ψ_1`, the limit of `ψ_{i,1}`.
pub fn psi_1() -> f64 {
    psi_i1(PSI_LIMIT_I)
}

/// `d = log2(2e) - ψ_1`.
pub fn constant_d() -> f64 {
    (2.0 * std::f64::consts::E).log2() - psi_1()
}

/// `r = 2 - d`.
pub fn constant_r() -> f64 {
    2.0 - constant_d()
}

/// Small-`p` i.u.d. rate of the deletion channel, `1 + p log2 p - d p`.
pub fn bdc_small_p_sir(p: f64) -> Result<BoundValue> {
    check_unit_open(p, "bdc_small_p_sir")?;
    let v = 1.0 + xlogx2(p) - constant_d() * p;
    Ok(BoundValue::new(v, BoundKind::ExactRate, "small p, exact up to O(p^2)"))
}

/// Small-`p` i.u.d. rate of the replication channel, `1 + p log2 p + r p`.
pub fn brc_small_p_sir(p: f64) -> Result<BoundValue> {
    check_unit_open(p, "brc_small_p_sir")?;
    let v = 1.0 + xlogx2(p) + constant_r() * p;
    Ok(BoundValue::new(v, BoundKind::ExactRate, "small p, exact up to O(p^2)"))
}

fn xlogx2(p: f64) -> f64 {
    if p > 0.0 { p * p.log2() } else { 0.0 }
}

/// Partial sum `1 - p - h2(p) + (1-p) Σ_{m<=j_max} ψ_{i,m} p^m (1-p)^i`.
pub fn bdc_sir_partial(i: usize, j_max: usize, p: f64) -> Result<BoundValue> {
    check_unit_open(p, "bdc_sir_partial")?;
    if i == 0 {
        return Err(Error::Domain("bdc_sir_partial needs i >= 1".into()));
    }
    if i >= 2 && j_max + i - 1 > H_IM_MAX_LEN {
        return Err(Error::Size(format!("i + j_max - 1 = {} exceeds {H_IM_MAX_LEN}", i + j_max - 1)));
    }
    let q = 1.0 - p;
    let mut sum = 0.0;
    for m in 1..=j_max {
        sum += psi_im(i, m)? * p.powi(m as i32) * q.powi(i as i32);
    }
    let value = q - h2(p) + q * sum;
    Ok(BoundValue::new(value, BoundKind::Lower, "0 <= p < 1").truncated(j_max + 1, f64::NAN))
}

/// `η(α, j, len)` for `j = 0..=len`: the weight distribution of a length-
/// `len` symmetric Markov string with flip probability `α`.
pub fn eta_row(alpha: f64, len: usize) -> Vec<f64> {
    eta_table(alpha, len).pop().expect("len >= 0")
}

/// Rows `η(α, ·, k)` for `k = 0..=len` (row 0 is the point mass at 0).
pub fn eta_table(alpha: f64, len: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![1.0]];
    if len == 0 {
        return rows;
    }
    // (η_0, η_1): last symbol 0 or 1
    let mut e0 = vec![0.5, 0.0];
    let mut e1 = vec![0.0, 0.5];
    rows.push(vec![0.5, 0.5]);
    for k in 2..=len {
        let mut n0 = vec![0.0; k + 1];
        let mut n1 = vec![0.0; k + 1];
        for j in 0..=k {
            if j < k {
                n0[j] = (1.0 - alpha) * e0[j] + alpha * e1[j];
            }
            if j >= 1 {
                n1[j] = (1.0 - alpha) * e1[j - 1] + alpha * e0[j - 1];
            }
        }
        rows.push(n0.iter().zip(&n1).map(|(a, b)| a + b).collect());
        e0 = n0;
        e1 = n1;
    }
    rows
}

/// Inner bracket of `D_2` for first-order Markov inputs at fixed `α`.
pub fn markov1_d2_bracket(p: f64, alpha: f64, m_max: usize) -> f64 {
    let q = 1.0 - p;
    let table = eta_table(alpha, m_max + 1);
    let mut sum = 0.0;
    let mut pm = 1.0;
    for m in 0..=m_max {
        let n = m + 1;
        let ell = (n as f64).log2()
            - table[n].iter().enumerate().map(|(j, e)| h2(j as f64 / n as f64) * e).sum::<f64>();
        sum += n as f64 * pm * ell;
        pm *= p;
    }
    h2(alpha) + q * q * sum
}

/// `D_2` for symmetric first-order Markov inputs, maximized over `α`.
pub fn bdc_markov1_d2(p: f64, m_max: usize) -> Result<BoundValue> {
    check_unit_open(p, "bdc_markov1_d2")?;
    if m_max > MARKOV1_D2_MAX_M {
        return Err(Error::Size(format!("m_max must be <= {MARKOV1_D2_MAX_M}, got {m_max}")));
    }
    let (_, best) = golden_section_max(|a| markov1_d2_bracket(p, a, m_max), 0.0, 1.0, ALPHA_TOL);
    let value = best * (1.0 - p) - h2(p);
    Ok(BoundValue::new(value, BoundKind::Lower, "0 <= p < 1").truncated(m_max + 1, f64::NAN))
}

/// `(1-p)^i (α Σ_{j<=i} j (1-α)^(j-1) h2(1/j) + i (1-α)^i h2(1/i))`.
pub fn markov1_frak_d1_inner(p: f64, alpha: f64, i: usize) -> f64 {
    let mut s = 0.0;
    let mut w = 1.0; // (1-α)^(j-1)
    for j in 1..=i {
        s += j as f64 * w * h2(1.0 / j as f64);
        w *= 1.0 - alpha;
    }
    (1.0 - p).powi(i as i32) * (alpha * s + i as f64 * w * h2(1.0 / i as f64))
}

/// Single-deletion bound for first-order Markov inputs at fixed `(α, i)`.
pub fn markov1_frak_d1_term(p: f64, alpha: f64, i: usize) -> f64 {
    -h2(p) + (1.0 - p) * (h2(alpha) + p * markov1_frak_d1_inner(p, alpha, i))
}

/// Single-deletion bound for first-order Markov inputs: sup over `i <=
/// i_max` and max over `α`.
pub fn bdc_markov1_frak_d1(p: f64, i_max: usize) -> Result<BoundValue> {
    check_unit_open(p, "bdc_markov1_frak_d1")?;
    if i_max == 0 {
        return Err(Error::Domain("i_max must be >= 1".into()));
    }
    let bracket = |a: f64| {
        let sup = (1..=i_max).map(|i| markov1_frak_d1_inner(p, a, i)).fold(f64::NEG_INFINITY, f64::max);
        h2(a) + p * sup
    };
    let (_, best) = golden_section_max(bracket, 0.0, 1.0, ALPHA_TOL);
    let value = -h2(p) + (1.0 - p) * best;
    Ok(BoundValue::new(value, BoundKind::Lower, "0 <= p < 1").truncated(i_max, f64::NAN))
}

/// `H(Z_1 | X, Y)` for the replication channel with a symmetric Markov
/// input, summed over `k <= k_max`. Returns the value and the probability
/// mass of the dropped terms (each weighs at most one bit).
pub fn brc_h_z1_given_xy(p: f64, alpha: f64, k_max: usize) -> (f64, f64) {
    let q = 1.0 - p;
    let mut total = 0.0;
    let mut missed = 0.0;
    let mut lead = alpha * (1.0 - alpha); // α (1-α)^l
    let mut base = q * q; // (1-p)^(l+1)
    for l in 1..=k_max {
        if lead == 0.0 || base == 0.0 {
            break;
        }
        // u = C(k,l) (1-p)^(l+1) p^(k-l), a negative binomial pmf in k
        let mut u = base;
        let mut inner = 0.0;
        let mut mass = 0.0;
        for k in l..=k_max {
            if k > l {
                u *= k as f64 / (k - l) as f64 * p;
            }
            inner += u * h2(l as f64 / k as f64);
            mass += u;
            if u == 0.0 {
                break;
            }
        }
        total += lead * inner;
        missed += lead * (1.0 - mass).max(0.0);
        lead *= 1.0 - alpha;
        base *= q;
    }
    // l > k_max contributes nothing; its weight is (1-α)^(k_max+1)
    missed += (1.0 - alpha).powi(k_max as i32 + 1);
    (total, missed)
}

/// `H(Z_1 | Y)` for the replication channel with a symmetric Markov input.
pub fn brc_h_z1_given_y(p: f64, alpha: f64) -> f64 {
    let s = p + (1.0 - alpha) * (1.0 - p);
    if s <= 0.0 {
        0.0
    } else {
        s * h2(p / s)
    }
}

/// Markov-1 rate bracket of the replication channel at fixed `α`,
/// `h2(α) + [H(Z_1|X,Y) - H(Z_1|Y)] / (1 - p)`.
pub fn brc_markov1_rate(p: f64, alpha: f64, k_max: usize) -> Result<BoundValue> {
    check_unit_open(p, "brc_markov1_rate")?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let (hxy, missed) = brc_h_z1_given_xy(p, alpha, k_max);
    let value = h2(alpha) + (hxy - brc_h_z1_given_y(p, alpha)) / (1.0 - p);
    Ok(BoundValue::new(value, BoundKind::Lower, "0 <= p < 1").truncated(k_max, missed / (1.0 - p)))
}

/// Markov-1 rate of the replication channel maximized over `α`. Returns
/// the maximizing `α` with the bound.
pub fn brc_markov1_max(p: f64, k_max: usize) -> Result<(f64, BoundValue)> {
    check_unit_open(p, "brc_markov1_max")?;
    let f = |a: f64| brc_markov1_rate(p, a, k_max).map(|b| b.value).unwrap_or(f64::NEG_INFINITY);
    let (a, _) = golden_section_max(f, 0.0, 1.0, ALPHA_TOL);
    Ok((a, brc_markov1_rate(p, a, k_max)?))
}

/// `R_2` bracket at fixed `α`.
pub fn brc_r2_bracket(p: f64, alpha: f64) -> f64 {
    h2(alpha) + 2.0 * p * (1.0 - alpha) - brc_h_z1_given_y(p, alpha) / (1.0 - p)
}

/// Optimal flip probability `α* = 1 / ((1-p)(4^p + 1))` of the `R_2` bound.
pub fn brc_r2_alpha_star(p: f64) -> f64 {
    1.0 / ((1.0 - p) * (4f64.powf(p) + 1.0))
}

/// `p_*`, the root of `(1-p)(4^p + 1) = 1` on `(1/2, 1)`, by bisection.
pub fn p_star_brc() -> f64 {
    let f = |p: f64| (1.0 - p) * (4f64.powf(p) + 1.0) - 1.0;
    let (mut lo, mut hi) = (0.5, 0.999);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form `R_2` lower bound for the replication channel, valid for
/// `0 <= p <= p_*`.
pub fn brc_r2_closed(p: f64) -> Result<BoundValue> {
    let ps = p_star_brc();
    if !(0.0..=ps).contains(&p) {
        return Err(Error::Validity(format!("closed-form R2 needs 0 <= p <= {ps}, got {p}")));
    }
    let f = 4f64.powf(p);
    let q = 1.0 - p;
    let value = h2(brc_r2_alpha_star(p)) + (2.0 * p / q) * ((q * f - p) / (f + 1.0))
        - (1.0 / q) * (f / (f + 1.0)) * h2(p * (f + 1.0) / f);
    Ok(BoundValue::new(value, BoundKind::Lower, format!("0 <= p <= {ps}")))
}

fn check_unit_open(p: f64, what: &str) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!("{what} needs 0 <= p < 1, got {p}")));
    }
    Ok(())
}
