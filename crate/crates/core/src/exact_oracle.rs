//! Exact small-block mutual information for the true channel and its two
//! finite-drift approximations.
//!
//! Each channel is compiled into a hidden-state emission chain whose states
//! carry the referenced input index. `H(Y)` and every `H(Y | x)` are then
//! obtained by walking the tree of output prefixes with forward vectors,
//! pruning prefixes of probability zero.

use crate::channel_core::{output_length_law, ChannelParams};
use crate::error::{Error, Result};
use crate::fsc_approx::build_star_fsc;
use crate::rate_estimation::TrellisSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const TRUE_MAX_N: usize = 10;
pub const DAGGER_MAX_N: usize = 8;
pub const STAR_MAX_N: usize = 12;
/// Default bound on the probability of outputs longer than the walk depth.
pub const DEFAULT_DEFICIT: f64 = 1e-10;
/// Runs with a larger deficit are rejected.
pub const MAX_ACCEPTED_DEFICIT: f64 = 1e-9;

/// Input laws with exact block probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InputLaw {
    Iud,
    /// Symmetric first-order Markov with flip probability `alpha`.
    Markov1(f64),
}

impl InputLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            InputLaw::Iud => Ok(()),
            InputLaw::Markov1(a) if (0.0..=1.0).contains(&a) => Ok(()),
            InputLaw::Markov1(a) => Err(Error::Domain(format!("flip probability {a} outside [0, 1]"))),
        }
    }

    /// Probability of the block `x`.
    pub fn prob(&self, x: &[u8]) -> f64 {
        match *self {
            InputLaw::Iud => 0.5f64.powi(x.len() as i32),
            InputLaw::Markov1(a) => {
                let mut p = if x.is_empty() { 1.0 } else { 0.5 };
                for w in x.windows(2) {
                    p *= if w[0] != w[1] { a } else { 1.0 - a };
                }
                p
            }
        }
    }

    /// Probability that two inputs `delta >= 1` apart differ.
    fn flip(&self, delta: u32) -> f64 {
        match *self {
            InputLaw::Iud => 0.5,
            InputLaw::Markov1(a) => 0.5 * (1.0 - (1.0 - 2.0 * a).powi(delta as i32)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExactVariant {
    TrueDrc,
    Dagger,
    Star,
}

/// Exact `(1/n) I(X; Y)` with the entropy terms behind it (in bits per
/// input symbol).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMi {
    pub n: usize,
    pub m: Option<usize>,
    pub variant: ExactVariant,
    pub value: f64,
    pub deficit: f64,
    pub h_y: f64,
    pub h_y_given_x: f64,
}

impl ExactMi {
    pub const CSV_HEADER: [&'static str; 8] = ["n", "m", "variant", "p_d", "p_r", "value", "deficit", "h_y"];

    pub fn csv_record(&self, params: &ChannelParams) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.m.map_or_else(String::new, |m| m.to_string()),
            format!("{:?}", self.variant),
            params.p_d.to_string(),
            params.p_r.to_string(),
            format!("{:.15}", self.value),
            format!("{:e}", self.deficit),
            format!("{:.15}", self.h_y),
        ]
    }
}

/// Emission chain: each state emits the input at `gamma[s]`.
#[derive(Debug, Clone)]
struct Chain {
    gamma: Vec<u32>,
    /// `(to, prob, gamma[to] - gamma[from])`
    succ: Vec<Vec<(u32, f64, u32)>>,
    stop: Vec<f64>,
    init: Vec<(u32, f64)>,
    init_stop: f64,
    max_len: usize,
}

const DEEP: i64 = i64::MIN;

impl Chain {
    /// True channel: the state is the referenced index `g ∈ [1, n]`.
    fn true_drc(params: &ChannelParams, n: usize, max_len: usize) -> Self {
        let (pd, pr, pt) = (params.p_d, params.p_r, params.p_t);
        let s = n;
        let gamma = (1..=n as u32).collect();
        let mut succ = vec![Vec::new(); s];
        let mut stop = vec![0.0; s];
        for g in 1..=n {
            let row = &mut succ[g - 1];
            if pr > 0.0 {
                row.push((g as u32 - 1, pr, 0));
            }
            for g2 in g + 1..=n {
                let p = pt * pd.powi((g2 - g - 1) as i32);
                if p > 0.0 {
                    row.push((g2 as u32 - 1, p, (g2 - g) as u32));
                }
            }
            stop[g - 1] = (1.0 - pr) * pd.powi((n - g) as i32);
        }
        let init = (1..=n)
            .map(|g| (g as u32 - 1, (1.0 - pd) * pd.powi(g as i32 - 1)))
            .filter(|&(_, p)| p > 0.0)
            .collect();
        Chain { gamma, succ, stop, init, init_stop: pd.powi(n as i32), max_len }
    }

    /// Chain over `(time, key)` states explored from `(0, 0)`. States with
    /// referenced index 0 emit nothing; index above `n` ends the block.
    fn explore<S, G>(n: usize, step: S, gamma_of: G) -> Self
    where
        S: Fn(usize, i64) -> Vec<(i64, f64)>,
        G: Fn(usize, i64) -> i64,
    {
        let n_i = n as i64;
        let mut ids: BTreeMap<(usize, i64), u32> = BTreeMap::new();
        let mut order: Vec<(usize, i64)> = Vec::new();
        let intern = |key: (usize, i64), ids: &mut BTreeMap<(usize, i64), u32>, order: &mut Vec<_>| {
            *ids.entry(key).or_insert_with(|| {
                order.push(key);
                (order.len() - 1) as u32
            })
        };
        let mut init_map: BTreeMap<u32, f64> = BTreeMap::new();
        let mut init_stop = 0.0;
        let mut pre = vec![(0i64, 1.0f64)];
        let mut t = 0;
        while !pre.is_empty() {
            let mut next: BTreeMap<i64, f64> = BTreeMap::new();
            for &(key, mass) in &pre {
                for (k2, p) in step(t, key) {
                    let g = gamma_of(t + 1, k2);
                    if g == 0 {
                        *next.entry(k2).or_default() += mass * p;
                    } else if g > n_i {
                        init_stop += mass * p;
                    } else {
                        let id = intern((t + 1, k2), &mut ids, &mut order);
                        *init_map.entry(id).or_default() += mass * p;
                    }
                }
            }
            pre = next.into_iter().collect();
            t += 1;
        }
        let mut gamma = Vec::new();
        let mut succ = Vec::new();
        let mut stop = Vec::new();
        let mut k = 0;
        while k < order.len() {
            let (t, key) = order[k];
            let g = gamma_of(t, key);
            let mut row: Vec<(u32, f64, u32)> = Vec::new();
            let mut st = 0.0;
            for (k2, p) in step(t, key) {
                if p == 0.0 {
                    continue;
                }
                let g2 = gamma_of(t + 1, k2);
                debug_assert!(g2 >= g);
                if g2 > n_i {
                    st += p;
                } else {
                    let id = intern((t + 1, k2), &mut ids, &mut order);
                    row.push((id, p, (g2 - g) as u32));
                }
            }
            gamma.push(g as u32);
            succ.push(row);
            stop.push(st);
            k += 1;
        }
        let mut init: Vec<(u32, f64)> = init_map.into_iter().collect();
        init.sort_by_key(|e| e.0);
        let max_len = order.iter().map(|e| e.0).max().unwrap_or(0);
        Chain { gamma, succ, stop, init, init_stop, max_len }
    }

    fn dagger(params: &ChannelParams, n: usize, m: usize) -> Self {
        let (pd, pr, pt) = (params.p_d, params.p_r, params.p_t);
        let mi = m as i64;
        let horizon = (n + m) as i64;
        // below this, Z can no longer climb back to -m before the block ends
        let deep_at = move |t: usize| -mi - (horizon - t as i64) - 1;
        let step = move |t: usize, z: i64| -> Vec<(i64, f64)> {
            if z == DEEP {
                return vec![(DEEP, 1.0)];
            }
            let lo = deep_at(t + 1);
            let mut out = Vec::new();
            if pr > 0.0 {
                out.push((z + 1, pr));
            }
            for z2 in (lo + 1..=z).rev() {
                let p = pt * pd.powi((z - z2) as i32);
                if p == 0.0 {
                    break;
                }
                out.push((z2, p));
            }
            let deep = (1.0 - pr) * pd.powi((z - lo) as i32);
            if deep > 0.0 {
                out.push((DEEP, deep));
            }
            out
        };
        let gamma_of = move |t: usize, z: i64| -> i64 {
            let c = if z == DEEP { -mi } else { z.clamp(-mi, mi) };
            t as i64 - c
        };
        Self::explore(n, step, gamma_of)
    }

    fn star(params: &ChannelParams, n: usize, m: usize) -> Self {
        let model = build_star_fsc(params, m);
        let mi = m as i64;
        let step = move |_t: usize, z: i64| -> Vec<(i64, f64)> {
            model.star_row(z).iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(k, &p)| (k as i64 - mi, p)).collect()
        };
        Self::explore(n, step, |t, z| t as i64 - z)
    }

    fn num_states(&self) -> usize {
        self.gamma.len()
    }
}

/// Accumulated `-Σ P log2 P` over complete outputs and the mass cut off at
/// the depth limit.
#[derive(Debug, Default, Clone, Copy)]
struct Walk {
    entropy: f64,
    mass: f64,
    deficit: f64,
}

/// Walk the output tree. `first(b, s)` weighs the first emission and
/// `emit(b, prev, s, delta)` every later one.
fn walk<F, E>(chain: &Chain, first: F, emit: E) -> Walk
where
    F: Fn(u8, usize) -> f64,
    E: Fn(u8, u8, usize, u32) -> f64,
{
    let s = chain.num_states();
    let mut acc = Walk::default();
    let p0 = chain.init_stop;
    if p0 > 0.0 {
        acc.entropy -= p0 * p0.log2();
        acc.mass += p0;
    }
    let mut bufs = vec![vec![0.0; s]; chain.max_len + 1];
    for b in 0..2u8 {
        bufs[1].iter_mut().for_each(|v| *v = 0.0);
        let mut tot = 0.0;
        for &(h, p) in &chain.init {
            let w = p * first(b, h as usize);
            bufs[1][h as usize] = w;
            tot += w;
        }
        if tot > 0.0 && chain.max_len >= 1 {
            visit(chain, &emit, &mut bufs, 1, b, &mut acc);
        } else if tot > 0.0 {
            acc.deficit += tot;
        }
    }
    acc
}

fn visit<E>(chain: &Chain, emit: &E, bufs: &mut [Vec<f64>], depth: usize, prev: u8, acc: &mut Walk)
where
    E: Fn(u8, u8, usize, u32) -> f64,
{
    let mut p_stop = 0.0;
    let mut total = 0.0;
    for (h, &a) in bufs[depth].iter().enumerate() {
        if a != 0.0 {
            p_stop += a * chain.stop[h];
            total += a;
        }
    }
    if p_stop > 0.0 {
        acc.entropy -= p_stop * p_stop.log2();
        acc.mass += p_stop;
    }
    if depth == chain.max_len {
        acc.deficit += (total - p_stop).max(0.0);
        return;
    }
    for b in 0..2u8 {
        let tot = {
            let (head, tail) = bufs.split_at_mut(depth + 1);
            let alpha = &head[depth];
            let child = &mut tail[0];
            child.iter_mut().for_each(|v| *v = 0.0);
            let mut tot = 0.0;
            for (h, &a) in alpha.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for &(h2, p, d) in &chain.succ[h] {
                    let e = emit(b, prev, h2 as usize, d);
                    if e != 0.0 {
                        let w = a * p * e;
                        child[h2 as usize] += w;
                        tot += w;
                    }
                }
            }
            tot
        };
        if tot > 0.0 {
            visit(chain, emit, bufs, depth + 1, b, acc);
        }
    }
}

/// `H(Y)` under an input law.
fn output_entropy(chain: &Chain, law: InputLaw) -> Walk {
    walk(
        chain,
        |_, _| 0.5,
        |b, prev, _, d| {
            if d == 0 {
                f64::from(u8::from(b == prev))
            } else {
                let f = law.flip(d);
                if b == prev { 1.0 - f } else { f }
            }
        },
    )
}

/// `H(Y | X = x)`.
fn conditional_entropy(chain: &Chain, x: &[u8]) -> Walk {
    let ind = |b: u8, h: usize| f64::from(u8::from(x[chain.gamma[h] as usize - 1] == b));
    walk(chain, ind, |b, _, h, _| ind(b, h))
}

fn mutual_information(chain: &Chain, n: usize, law: InputLaw) -> (f64, f64, f64, f64) {
    let hy = output_entropy(chain, law);
    // complementing x leaves H(Y | x) unchanged, so only x_1 = 0 is walked
    let half: Vec<(f64, Walk)> = (0..1u64 << (n - 1))
        .into_par_iter()
        .map(|v| {
            let x: Vec<u8> = (0..n).map(|k| if k == 0 { 0 } else { ((v >> (n - 1 - k)) & 1) as u8 }).collect();
            let px = law.prob(&x);
            (2.0 * px, conditional_entropy(chain, &x))
        })
        .collect();
    let hyx: f64 = half.iter().map(|(p, w)| p * w.entropy).sum();
    let def_x: f64 = half.iter().map(|(p, w)| p * w.deficit).sum();
    let deficit = hy.deficit.max(def_x);
    (hy.entropy, hyx, deficit, hy.mass + hy.deficit)
}

/// Smallest walk depth whose length tail is below `tol`.
fn length_cap(params: &ChannelParams, n: usize, tol: f64) -> usize {
    let mut cap = n;
    loop {
        let (_, tail) = output_length_law(params, n, cap);
        if tail < tol || cap >= 64 * n + 64 {
            return cap;
        }
        cap += 1;
    }
}

fn finish(n: usize, m: Option<usize>, variant: ExactVariant, parts: (f64, f64, f64, f64)) -> ExactMi {
    let (h_y, h_yx, deficit, _) = parts;
    let nf = n as f64;
    ExactMi { n, m, variant, value: (h_y - h_yx) / nf, deficit, h_y: h_y / nf, h_y_given_x: h_yx / nf }
}

/// Exact `I_n` for the true channel, output lengths truncated so the lost
/// mass is below [`DEFAULT_DEFICIT`].
pub fn exact_mi_true(params: &ChannelParams, n: usize, input: InputLaw) -> Result<ExactMi> {
    exact_mi_true_with(params, n, input, DEFAULT_DEFICIT)
}

/// [`exact_mi_true`] with an explicit truncation target.
pub fn exact_mi_true_with(params: &ChannelParams, n: usize, input: InputLaw, tol: f64) -> Result<ExactMi> {
    if n == 0 || n > TRUE_MAX_N {
        return Err(Error::Size(format!("exact true-channel MI needs 1 <= n <= {TRUE_MAX_N}, got {n}")));
    }
    input.validate()?;
    let cap = length_cap(params, n, tol);
    let chain = Chain::true_drc(params, n, cap);
    let r = finish(n, None, ExactVariant::TrueDrc, mutual_information(&chain, n, input));
    if r.deficit > MAX_ACCEPTED_DEFICIT {
        return Err(Error::Validity(format!("truncation deficit {:e} too large", r.deficit)));
    }
    Ok(r)
}

/// Exact `I†_{n,m}` for the clipped channel. No truncation is involved:
/// clipped outputs are at most `n + m` long.
pub fn exact_mi_dagger(params: &ChannelParams, n: usize, m: usize, input: InputLaw) -> Result<ExactMi> {
    if n == 0 || n > DAGGER_MAX_N {
        return Err(Error::Size(format!("exact clipped MI needs 1 <= n <= {DAGGER_MAX_N}, got {n}")));
    }
    input.validate()?;
    let chain = Chain::dagger(params, n, m);
    Ok(finish(n, Some(m), ExactVariant::Dagger, mutual_information(&chain, n, input)))
}

/// Exact `I★_{n,m}` for the star channel started at drift 0.
pub fn exact_mi_star(params: &ChannelParams, n: usize, m: usize, input: InputLaw) -> Result<ExactMi> {
    if n == 0 || n > STAR_MAX_N {
        return Err(Error::Size(format!("exact star MI needs 1 <= n <= {STAR_MAX_N}, got {n}")));
    }
    input.validate()?;
    let chain = Chain::star(params, n, m);
    Ok(finish(n, Some(m), ExactVariant::Star, mutual_information(&chain, n, input)))
}

/// Exact block entropies of the stationary star channel in the form used
/// for Monte Carlo estimation: `Z_0 ~ π`, i.u.d. window `x_{-m..=n+m}`,
/// `y_i = x_{i - Z_i}` for `i = 1..=n`. Totals in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarWindowEntropies {
    pub n: usize,
    pub m: usize,
    pub h_y: f64,
    pub h_y_given_x: f64,
    pub total_mass: f64,
}

/// Enumerate the stationary star channel exactly. The window has
/// `n + 2m + 1` symbols, so this is limited to `n + 2m + 1 <= 20`.
pub fn star_window_entropies(params: &ChannelParams, n: usize, m: usize) -> Result<StarWindowEntropies> {
    let wlen = n + 2 * m + 1;
    if n == 0 || n > STAR_MAX_N || wlen > 20 {
        return Err(Error::Size(format!("window enumeration needs n <= {STAR_MAX_N} and n+2m+1 <= 20")));
    }
    let spec = TrellisSpec::iud(params, m)?;
    let d = spec.drift_states();
    let a = &spec.drift_matrix;

    // H(Y): all y through the y-only recursion
    let (h_y, total_mass) = (0..1u64 << n)
        .into_par_iter()
        .map(|v| {
            let y: Vec<u8> = (0..n).map(|k| ((v >> k) & 1) as u8).collect();
            let mut f = crate::rate_estimation::Forward::y_only(&spec, &spec.pi);
            f.feed(&y);
            let p = (-f.neglog2()).exp2();
            (if p > 0.0 { -p * p.log2() } else { 0.0 }, p)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));

    // H(Y | X): walk y given each window, windows with x_{-m} = 0 only
    let h_yx: f64 = (0..1u64 << (wlen - 1))
        .into_par_iter()
        .map(|v| {
            let x: Vec<u8> = (0..wlen).map(|k| if k == 0 { 0 } else { ((v >> (k - 1)) & 1) as u8 }).collect();
            let mut bufs = vec![vec![0.0; d]; n + 1];
            bufs[0].copy_from_slice(&spec.pi);
            let mut h = 0.0;
            joint_walk(&x, a, d, m, n, &mut bufs, 0, &mut h);
            h
        })
        .sum::<f64>()
        / (1u64 << (wlen - 1)) as f64;
    Ok(StarWindowEntropies { n, m, h_y, h_y_given_x: h_yx, total_mass })
}

fn joint_walk(x: &[u8], a: &[f64], d: usize, m: usize, n: usize, bufs: &mut [Vec<f64>], t: usize, h: &mut f64) {
    if t == n {
        let p: f64 = bufs[t].iter().sum();
        if p > 0.0 {
            *h -= p * p.log2();
        }
        return;
    }
    let mut v = vec![0.0; d];
    for k in 0..d {
        let ak = bufs[t][k];
        if ak != 0.0 {
            for k2 in 0..d {
                v[k2] += ak * a[k * d + k2];
            }
        }
    }
    let i = t + 1;
    for b in 0..2u8 {
        let mut tot = 0.0;
        for k2 in 0..d {
            let w = if x[i + 2 * m - k2] == b { v[k2] } else { 0.0 };
            bufs[t + 1][k2] = w;
            tot += w;
        }
        if tot > 0.0 {
            joint_walk(x, a, d, m, n, bufs, t + 1, h);
        }
    }
}
