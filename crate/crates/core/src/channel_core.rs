//! The deletion-replication channel written as a channel with states.
//!
//! The drift `Z_i` and index `Γ_i = i - Z_i` processes start synchronized at
//! `Z_0 = Γ_0 = 0`. Output `i` reproduces input `x_{Γ_i}`; index 0 is the
//! synchronization symbol `x_0`, which is fixed to 0 and never part of the
//! block output.

use crate::core_math::h2;
use crate::error::{Error, Result};
use crate::sequences::BitString;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Largest input length accepted by [`exact_output_law`].
pub const EXACT_MAX_INPUT: usize = 10;
/// Largest output length the dense output-law tables can hold.
pub const EXACT_MAX_OUTPUT: usize = 24;

/// Deletion and replication probabilities with the derived transmission
/// probability `p_t = (1 - p_d)(1 - p_r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub p_d: f64,
    pub p_r: f64,
    pub p_t: f64,
}

impl ChannelParams {
    pub fn new(p_d: f64, p_r: f64) -> Result<Self> {
        make_params(p_d, p_r)
    }

    /// Binary deletion channel.
    pub fn bdc(p: f64) -> Result<Self> {
        make_params(p, 0.0)
    }

    /// Binary replication channel.
    pub fn brc(p: f64) -> Result<Self> {
        make_params(0.0, p)
    }

    /// Symmetric channel with `p_d = p_r = p`.
    pub fn sdrc(p: f64) -> Result<Self> {
        make_params(p, p)
    }
}

pub fn make_params(p_d: f64, p_r: f64) -> Result<ChannelParams> {
    for (name, v) in [("p_d", p_d), ("p_r", p_r)] {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::Domain(format!("{name} must lie in [0, 1), got {v}")));
        }
    }
    Ok(ChannelParams { p_d, p_r, p_t: (1.0 - p_d) * (1.0 - p_r) })
}

/// Mean and variance of the drift increment `Z_i - Z_{i-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftMoments {
    pub chi: f64,
    pub nu_sq: f64,
}

pub fn drift_moments(params: &ChannelParams) -> DriftMoments {
    let (pd, pr) = (params.p_d, params.p_r);
    DriftMoments {
        chi: (pr - pd) / (1.0 - pd),
        // E[Ξ^2] is (p_r + p_d + p_d^2 - 3 p_d p_r) / (1-p_d)^2; subtract χ^2 for the variance
        nu_sq: (1.0 - pr) * (pd + pr) / ((1.0 - pd) * (1.0 - pd)),
    }
}

/// Burst length beyond which the sampler treats the geometric tail as
/// empty: `ceil(log(1e-15) / log(p_d))`.
pub fn ell_max(p_d: f64) -> u64 {
    if p_d <= 0.0 {
        0
    } else {
        ((1e-15f64).ln() / p_d.ln()).ceil() as u64
    }
}

/// `P(Z_i - Z_{i-1} = delta)`. Exact; `_ell_max` only names the sampler's
/// truncation point.
pub fn state_transition_pmf(params: &ChannelParams, delta: i64, _ell_max: u64) -> f64 {
    match delta {
        d if d > 1 => 0.0,
        1 => params.p_r,
        d => params.p_t * params.p_d.powi((-d) as i32),
    }
}

/// `P(Γ_i - Γ_{i-1} = delta)` away from the synchronization symbol.
pub fn index_increment_pmf(params: &ChannelParams, delta: u64) -> f64 {
    if delta == 0 {
        params.p_r
    } else {
        params.p_t * params.p_d.powi((delta - 1) as i32)
    }
}

/// Inverse-CDF sampler for the index increments.
#[derive(Debug, Clone, Copy)]
pub struct IncrementSampler {
    p_r: f64,
    inv_ln_pd: f64,
    cap: u64,
}

impl IncrementSampler {
    pub fn new(params: &ChannelParams) -> Self {
        let inv_ln_pd = if params.p_d > 0.0 { 1.0 / params.p_d.ln() } else { 0.0 };
        Self { p_r: params.p_r, inv_ln_pd, cap: ell_max(params.p_d) }
    }

    /// One index increment `Δ ≥ 0`.
    #[inline]
    pub fn next_delta<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        if u < self.p_r {
            return 0;
        }
        if self.inv_ln_pd == 0.0 {
            return 1;
        }
        // reuse the conditional uniform above p_r
        let v = (u - self.p_r) / (1.0 - self.p_r);
        let burst = ((1.0 - v).ln() * self.inv_ln_pd).floor() as u64;
        1 + burst.min(self.cap)
    }

    /// One drift increment `Z_i - Z_{i-1} = 1 - Δ`.
    #[inline]
    pub fn next_drift<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        1 - self.next_delta(rng) as i64
    }
}

/// One sampled transmission.
///
/// `z` and `gamma` hold `Z_0..=Z_N` and `Γ_0..=Γ_N`, so both have length
/// `N + 1`. `y` has length `N` with `y[i-1] = x_{Γ_i}`, reading `x_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTrace {
    pub x: BitString,
    pub z: Vec<i64>,
    pub gamma: Vec<i64>,
    pub y: BitString,
    pub n: usize,
    pub seed: u64,
}

impl ChannelTrace {
    /// `N_n`, the number of channel uses before the index passes `n`.
    pub fn output_len(&self) -> usize {
        self.y.len()
    }

    /// Number of leading outputs that replicate the synchronization symbol.
    pub fn lead(&self) -> usize {
        self.gamma[1..].iter().take_while(|&&g| g == 0).count()
    }

    /// The block output: `y` without the synchronization replicas.
    pub fn block_output(&self) -> BitString {
        self.y.slice(self.lead(), self.y.len())
    }

    /// One-line JSON dump `{seed, n, x, z, y}`.
    pub fn to_json(&self) -> Result<String> {
        let v = serde_json::json!({
            "seed": self.seed,
            "n": self.n,
            "x": self.x.to_string(),
            "z": self.z,
            "y": self.y.to_string(),
        });
        Ok(serde_json::to_string(&v)?)
    }
}

/// Sample one transmission of `x`, reproducible from `seed`.
pub fn sample_trace(params: &ChannelParams, x: &BitString, seed: u64) -> Result<ChannelTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_trace_with(params, x, seed, &mut rng)
}

/// As [`sample_trace`] but drawing from a caller-owned generator.
pub fn sample_trace_with<R: Rng + ?Sized>(
    params: &ChannelParams,
    x: &BitString,
    seed: u64,
    rng: &mut R,
) -> Result<ChannelTrace> {
    let n = x.len();
    if n == 0 {
        return Err(Error::Domain("sample_trace needs |x| >= 1".into()));
    }
    let sampler = IncrementSampler::new(params);
    let expect = (n as f64 * (1.0 - params.p_d) / (1.0 - params.p_r)) as usize + 16;
    let mut gamma = Vec::with_capacity(expect);
    let mut z = Vec::with_capacity(expect);
    let mut y = BitString::empty();
    gamma.push(0i64);
    z.push(0i64);
    let mut g = 0i64;
    loop {
        let next = g + sampler.next_delta(rng) as i64;
        if next > n as i64 {
            break;
        }
        g = next;
        let i = gamma.len() as i64;
        gamma.push(g);
        z.push(i - g);
        y.push(if g == 0 { 0 } else { x.get(g as usize - 1) });
    }
    Ok(ChannelTrace { x: x.clone(), z, gamma, y, n, seed })
}

/// Block output length for an `n`-symbol input, without storing the paths.
pub fn sample_block_output_len<R: Rng + ?Sized>(params: &ChannelParams, n: usize, rng: &mut R) -> usize {
    let sampler = IncrementSampler::new(params);
    let mut g = 0u64;
    let mut count = 0usize;
    loop {
        let next = g + sampler.next_delta(rng);
        if next > n as u64 {
            return count;
        }
        if next > 0 {
            count += 1;
        }
        g = next;
    }
}

/// `Z_1..=Z_len` from `Z_0 = 0`.
pub fn sample_drift_path<R: Rng + ?Sized>(params: &ChannelParams, len: usize, rng: &mut R) -> Vec<i64> {
    let sampler = IncrementSampler::new(params);
    let mut z = 0i64;
    (0..len)
        .map(|_| {
            z += sampler.next_drift(rng);
            z
        })
        .collect()
}

/// `log2 P(Z_1..Z_n = path)` given `Z_0 = 0`.
pub fn drift_path_log2_prob(params: &ChannelParams, path: &[i64]) -> f64 {
    let mut prev = 0i64;
    let mut acc = 0.0;
    for &z in path {
        acc += state_transition_pmf(params, z - prev, 0).log2();
        prev = z;
    }
    acc
}

/// `H(Z_1..Z_n)` in bits.
pub fn state_block_entropy(params: &ChannelParams, n: usize) -> f64 {
    let (pd, pr) = (params.p_d, params.p_r);
    n as f64 * (h2(pr) + (1.0 - pr) / (1.0 - pd) * h2(pd))
}

/// Which construction of the channel law to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formulation {
    /// Independent output fragment per input symbol.
    Dobrushin,
    /// Sum over compatible non-decreasing index paths.
    States,
}

/// Output distribution over all strings up to `max_len`.
///
/// Strings are stored densely at index `2^len + value`. `deficit` is the
/// probability of an output longer than `max_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputLaw {
    pub n: usize,
    pub max_len: usize,
    probs: Vec<f64>,
    pub deficit: f64,
}

#[inline]
fn dense_index(len: usize, value: u64) -> usize {
    (1usize << len) + value as usize
}

impl OutputLaw {
    fn zeros(n: usize, max_len: usize) -> Self {
        Self { n, max_len, probs: vec![0.0; 1usize << (max_len + 1)], deficit: 0.0 }
    }

    /// `P(y)`; zero for strings longer than `max_len`.
    pub fn prob(&self, y: &BitString) -> f64 {
        if y.len() > self.max_len {
            return 0.0;
        }
        self.probs[dense_index(y.len(), y.to_u64().unwrap_or(0))]
    }

    /// Nonzero entries as `(y, P(y))`.
    pub fn iter(&self) -> impl Iterator<Item = (BitString, f64)> + '_ {
        (0..=self.max_len).flat_map(move |len| {
            (0..1u64 << len).filter_map(move |v| {
                let p = self.probs[dense_index(len, v)];
                (p > 0.0).then(|| (BitString::from_u64(v, len), p))
            })
        })
    }

    /// Raw dense table, aligned across laws with equal `max_len`.
    pub fn dense(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `Σ |y| P(y)` over the stored strings.
    pub fn expected_len(&self) -> f64 {
        (0..=self.max_len)
            .map(|len| {
                let base = 1usize << len;
                len as f64 * self.probs[base..2 * base].iter().sum::<f64>()
            })
            .sum()
    }
}

/// Exact output law of the channel on input `x`, for outputs up to
/// `|x| + extra` symbols.
pub fn exact_output_law(
    params: &ChannelParams,
    x: &BitString,
    formulation: Formulation,
    extra: usize,
) -> Result<OutputLaw> {
    let n = x.len();
    if n > EXACT_MAX_INPUT {
        return Err(Error::Size(format!("exact output law needs |x| <= {EXACT_MAX_INPUT}, got {n}")));
    }
    let max_len = n + extra;
    if max_len > EXACT_MAX_OUTPUT {
        return Err(Error::Size(format!(
            "exact output law stores outputs up to {EXACT_MAX_OUTPUT} symbols, asked for {max_len}"
        )));
    }
    Ok(match formulation {
        Formulation::Dobrushin => dobrushin_law(params, x, max_len),
        Formulation::States => states_law(params, x, max_len),
    })
}

fn dobrushin_law(params: &ChannelParams, x: &BitString, max_len: usize) -> OutputLaw {
    let n = x.len();
    let (pd, pr, pt) = (params.p_d, params.p_r, params.p_t);
    let mut law = OutputLaw::zeros(n, max_len);
    let mut cur = vec![0.0f64; 1usize << (max_len + 1)];
    cur[dense_index(0, 0)] = 1.0;
    let mut deficit = 0.0;
    for j in 0..n {
        let xb = u64::from(x.get(j));
        let mut next = vec![0.0f64; cur.len()];
        for len in 0..=max_len {
            let base = 1usize << len;
            for v in 0..base as u64 {
                let q = cur[base + v as usize];
                if q == 0.0 {
                    continue;
                }
                next[base + v as usize] += q * pd;
                let room = max_len - len;
                let mut w = q * pt;
                for ell in 1..=room {
                    let run = if xb == 1 { (1u64 << ell) - 1 } else { 0 };
                    next[dense_index(len + ell, (v << ell) | run)] += w;
                    w *= pr;
                }
                // fragments longer than the remaining room
                deficit += q * (1.0 - pd) * pr.powi(room as i32);
            }
        }
        cur = next;
    }
    law.probs = cur;
    law.deficit = deficit;
    law
}

fn states_law(params: &ChannelParams, x: &BitString, max_len: usize) -> OutputLaw {
    let n = x.len();
    let (pd, pr, pt) = (params.p_d, params.p_r, params.p_t);
    let mut law = OutputLaw::zeros(n, max_len);
    let xv = |g: usize| u64::from(x.get(g - 1));
    law.probs[dense_index(0, 0)] = pd.powi(n as i32);
    if max_len == 0 {
        law.deficit = 1.0 - pd.powi(n as i32);
        return law;
    }
    // layer[k][(g - 1) * 2^k + v]: prefix of length k with value v, index g
    let mut layer = vec![0.0f64; n * 2];
    for g in 1..=n {
        layer[(g - 1) * 2 + xv(g) as usize] += (1.0 - pd) * pd.powi(g as i32 - 1);
    }
    let mut deficit = 0.0;
    for k in 1..=max_len {
        let width = 1usize << k;
        let mut next = if k < max_len { vec![0.0f64; n * 2 * width] } else { Vec::new() };
        for g in 1..=n {
            let stop = (1.0 - pr) * pd.powi((n - g) as i32);
            for v in 0..width as u64 {
                let q = layer[(g - 1) * width + v as usize];
                if q == 0.0 {
                    continue;
                }
                law.probs[dense_index(k, v)] += q * stop;
                if k == max_len {
                    deficit += q * (1.0 - stop);
                    continue;
                }
                let nw = 2 * width;
                next[(g - 1) * nw + ((v << 1) | xv(g)) as usize] += q * pr;
                let mut w = q * pt;
                for g2 in g + 1..=n {
                    next[(g2 - 1) * nw + ((v << 1) | xv(g2)) as usize] += w;
                    w *= pd;
                }
            }
        }
        layer = next;
    }
    law.deficit = deficit;
    law
}

/// Distribution of the block output length `N` for an `n`-symbol input,
/// truncated at `max_len`; returns `(pmf[0..=max_len], P(N > max_len))`.
pub fn output_length_law(params: &ChannelParams, n: usize, max_len: usize) -> (Vec<f64>, f64) {
    let (pd, pr, pt) = (params.p_d, params.p_r, params.p_t);
    let mut frag = vec![0.0; max_len + 1];
    frag[0] = pd;
    let mut w = pt;
    for f in frag.iter_mut().skip(1) {
        *f = w;
        w *= pr;
    }
    let mut pmf = vec![0.0; max_len + 1];
    pmf[0] = 1.0;
    for _ in 0..n {
        let mut next = vec![0.0; max_len + 1];
        for (a, &pa) in pmf.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (b, &fb) in frag.iter().enumerate().take(max_len + 1 - a) {
                next[a + b] += pa * fb;
            }
        }
        pmf = next;
    }
    let tail = (1.0 - pmf.iter().sum::<f64>()).max(0.0);
    (pmf, tail)
}
