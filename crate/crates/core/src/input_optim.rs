//! Markov input laws and their optimization for the star channel by
//! generalized Blahut-Arimoto iterations.

use crate::channel_core::ChannelParams;
use crate::core_math::{h2, xlog2x};
use crate::error::{Error, Result};
use crate::fsc_approx::build_star_fsc;
use crate::rate_estimation::{initial_drift_law, markov_rate_estimate, RateEstimate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Largest context width for which stationary context laws are tabulated.
pub const MAX_CONTEXT_BITS: usize = 16;

/// A stationary Markov input of order `mu`.
///
/// `transition[c] = [P(0 | c), P(1 | c)]` where the context `c` packs the
/// last `mu` bits with the newest bit in the least significant position.
/// Order 0 has a single row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovInputMu {
    pub mu: usize,
    pub transition: Vec<[f64; 2]>,
}

impl MarkovInputMu {
    pub fn new(mu: usize, transition: Vec<[f64; 2]>) -> Result<Self> {
        if mu > MAX_CONTEXT_BITS {
            return Err(Error::Size(format!("Markov order {mu} exceeds {MAX_CONTEXT_BITS}")));
        }
        if transition.len() != 1 << mu {
            return Err(Error::Domain(format!(
                "order {mu} needs {} rows, got {}",
                1usize << mu,
                transition.len()
            )));
        }
        for (c, row) in transition.iter().enumerate() {
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) || (row[0] + row[1] - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("transition row {c} = {row:?} is not a distribution")));
            }
        }
        Ok(Self { mu, transition })
    }

    /// Independent uniform bits written as an order-`mu` law.
    pub fn iud(mu: usize) -> Self {
        Self { mu, transition: vec![[0.5, 0.5]; 1 << mu] }
    }

    /// Symmetric first-order law flipping with probability `alpha`.
    pub fn markov1(alpha: f64) -> Result<Self> {
        Self::new(1, vec![[1.0 - alpha, alpha], [alpha, 1.0 - alpha]])
    }

    pub fn num_contexts(&self) -> usize {
        1 << self.mu
    }

    pub fn is_iud(&self) -> bool {
        self.transition.iter().all(|r| r[1] == 0.5)
    }

    /// `P(next = 1 | last w bits = c)` for any `w >= mu`.
    #[inline]
    pub fn p_one(&self, c: usize) -> f64 {
        self.transition[c & ((1 << self.mu) - 1)][1]
    }

    /// Stationary law of the last `w` bits (`w >= mu`), from a lazy power
    /// iteration so periodic laws are handled.
    pub fn stationary_contexts(&self, w: usize) -> Vec<f64> {
        assert!(w >= self.mu && w <= MAX_CONTEXT_BITS);
        let size = 1usize << w;
        let mask = size - 1;
        let mut pi = vec![1.0 / size as f64; size];
        for _ in 0..100_000 {
            let mut next = vec![0.0; size];
            for (c, &v) in pi.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let p1 = self.p_one(c);
                next[(c << 1) & mask] += v * (1.0 - p1);
                next[((c << 1) | 1) & mask] += v * p1;
            }
            let mut diff = 0.0;
            for (a, b) in pi.iter_mut().zip(&next) {
                let lazy = 0.5 * (*a + b);
                diff += (lazy - *a).abs();
                *a = lazy;
            }
            if diff < 1e-15 {
                break;
            }
        }
        pi
    }

    /// Entropy rate in bits per symbol.
    pub fn entropy_rate(&self) -> f64 {
        let sigma = self.stationary_contexts(self.mu);
        sigma.iter().zip(&self.transition).map(|(s, r)| s * h2(r[1])).sum()
    }

    /// A stationary sample of `len` bits.
    pub fn sample<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<u8> {
        let mut out = Vec::with_capacity(len);
        let mut ctx = if self.mu == 0 {
            0
        } else {
            let sigma = self.stationary_contexts(self.mu);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = sigma.len() - 1;
            for (c, s) in sigma.iter().enumerate() {
                acc += s;
                if u < acc {
                    pick = c;
                    break;
                }
            }
            pick
        };
        let mask = (1usize << self.mu) - 1;
        for _ in 0..len {
            let b = u8::from(rng.random::<f64>() < self.p_one(ctx));
            out.push(b);
            ctx = ((ctx << 1) | b as usize) & mask;
        }
        out
    }

    /// The law of the complemented process.
    pub fn complement(&self) -> Self {
        let n = self.num_contexts();
        let transition = (0..n).map(|c| {
            let r = self.transition[(!c) & (n - 1)];
            [r[1], r[0]]
        });
        Self { mu: self.mu, transition: transition.collect() }
    }
}

/// Outcome of [`gbaa_optimize`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimResult {
    pub input: MarkovInputMu,
    pub best_rate: RateEstimate,
    pub rate_trace: Vec<RateEstimate>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Stopping threshold on transition entries.
pub const GBAA_TOL: f64 = 1e-4;
/// Transition entries are kept inside `[FLOOR, 1 - FLOOR]`.
const PROB_FLOOR: f64 = 1e-6;
/// Number of chunks used for each per-iteration rate evaluation.
pub const GBAA_EVAL_CHUNKS: usize = 20;

/// Optimize an order-`mu` Markov input for the star channel.
///
/// Each iteration samples a fresh `(x, y)` of length `n` in the causal
/// form of the channel, runs one forward-backward sweep over
/// `(input window, shifted drift)` states to estimate per-branch T-values,
/// and re-weights the transition table by `2^T` with the Perron
/// normalization. The rate of every iterate is evaluated on a common seed.
pub fn gbaa_optimize(
    params: &ChannelParams,
    m: usize,
    mu: usize,
    n: usize,
    max_iter: usize,
    seed: u64,
) -> Result<OptimResult> {
    let width = (2 * m).max(mu);
    if width > 12 {
        return Err(Error::Size(format!("input window of {width} bits exceeds the trellis budget")));
    }
    let mut input = MarkovInputMu::iud(mu);
    let eval_seed = seed ^ 0x5eed_0f_e7a1;
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut best: Option<(MarkovInputMu, RateEstimate)> = None;
    let mut converged = false;
    let mut prev_change: Option<Vec<f64>> = None;
    let mut iterations = 0;
    for iter in 0..max_iter {
        iterations = iter + 1;
        let est = markov_rate_estimate_chunks(params, m, &input, n, eval_seed)?;
        if best.as_ref().is_none_or(|(_, b)| est.value > b.value) {
            best = Some((input.clone(), est.clone()));
        }
        trace.push(est);
        let tvals = t_values(params, m, &input, n, seed.wrapping_add(iter as u64 + 1))?;
        let proposal = reweight(&input, &tvals, &mut warnings, iter);
        let old: Vec<f64> = input.transition.iter().map(|r| r[1]).collect();
        let mut newp: Vec<f64> = proposal.iter().map(|r| r[1]).collect();
        let change: Vec<f64> = newp.iter().zip(&old).map(|(a, b)| a - b).collect();
        if let Some(prev) = &prev_change {
            let dot: f64 = prev.iter().zip(&change).map(|(a, b)| a * b).sum();
            if dot < 0.0 {
                for (p, o) in newp.iter_mut().zip(&old) {
                    *p = 0.5 * (*p + o);
                }
            }
        }
        let applied: Vec<f64> = newp.iter().zip(&old).map(|(a, b)| a - b).collect();
        let max_change = applied.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        input = MarkovInputMu {
            mu,
            transition: newp.iter().map(|&p| [1.0 - p, p]).collect(),
        };
        prev_change = Some(applied);
        if max_change < GBAA_TOL {
            converged = true;
            let est = markov_rate_estimate_chunks(params, m, &input, n, eval_seed)?;
            if best.as_ref().is_none_or(|(_, b)| est.value > b.value) {
                best = Some((input.clone(), est.clone()));
            }
            trace.push(est);
            break;
        }
    }
    let (input, best_rate) = best.expect("at least one iteration");
    Ok(OptimResult { input, best_rate, rate_trace: trace, iterations, converged, warnings })
}

fn markov_rate_estimate_chunks(
    params: &ChannelParams,
    m: usize,
    input: &MarkovInputMu,
    n: usize,
    seed: u64,
) -> Result<RateEstimate> {
    crate::rate_estimation::markov_rate_estimate_with(params, m, input, n, seed, GBAA_EVAL_CHUNKS)
}

/// Exponentiated re-weighting of the transition table by the T-values.
fn reweight(input: &MarkovInputMu, t: &[[f64; 2]], warnings: &mut Vec<String>, iter: usize) -> Vec<[f64; 2]> {
    let nc = input.num_contexts();
    let mask = nc - 1;
    let next_ctx = |c: usize, b: usize| if input.mu == 0 { 0 } else { ((c << 1) | b) & mask };
    let mut weight = vec![[0.0f64; 2]; nc];
    let mut ok = vec![true; nc];
    for c in 0..nc {
        for b in 0..2 {
            if t[c][b].is_finite() {
                weight[c][b] = t[c][b].exp2();
            } else {
                ok[c] = false;
            }
        }
        if !ok[c] {
            warnings.push(format!("iteration {iter}: non-finite T-value in context {c}, row kept"));
            weight[c] = [input.transition[c][0].max(PROB_FLOOR), input.transition[c][1].max(PROB_FLOOR)];
        }
    }
    // right Perron vector of A_{c,c'} = Σ_b [c' = next(c,b)] 2^T_{cb}
    let mut beta = vec![1.0; nc];
    let mut rho = 1.0;
    for _ in 0..10_000 {
        let mut nb = vec![0.0; nc];
        for c in 0..nc {
            for b in 0..2 {
                nb[c] += weight[c][b] * beta[next_ctx(c, b)];
            }
        }
        let norm = nb.iter().cloned().fold(0.0, f64::max);
        let diff: f64 = nb.iter().zip(&beta).map(|(a, b)| (a / norm - b).abs()).sum();
        rho = norm / beta.iter().cloned().fold(0.0, f64::max);
        beta = nb.iter().map(|v| v / norm).collect();
        if diff < 1e-14 {
            break;
        }
    }
    let _ = rho;
    (0..nc)
        .map(|c| {
            let w0 = weight[c][0] * beta[next_ctx(c, 0)];
            let w1 = weight[c][1] * beta[next_ctx(c, 1)];
            let p1 = (w1 / (w0 + w1)).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            [1.0 - p1, p1]
        })
        .collect()
}

/// Per-branch T-values estimated from one sampled block of length `n`.
pub fn t_values(
    params: &ChannelParams,
    m: usize,
    input: &MarkovInputMu,
    n: usize,
    seed: u64,
) -> Result<Vec<[f64; 2]>> {
    let model = build_star_fsc(params, m);
    let pi = initial_drift_law(&model)?;
    let d = 2 * m + 1;
    let a = model.star_matrix.clone().expect("star");
    let mu = input.mu;
    let width = (2 * m).max(mu);
    let nw = 1usize << width;
    let wmask = nw - 1;
    let cmask = (1usize << mu) - 1;
    let ns = nw * d;
    let sigma_w = input.stationary_contexts(width);

    // causal sample: y_t = x_{t - ź_t}, ź_t = m + Z_{t-m}
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = input.sample(n + width, &mut rng);
    let mut zh = sample_index(&pi, &mut rng);
    let mut y = Vec::with_capacity(n);
    for t in 0..n {
        y.push(x[width + t - zh]);
        zh = sample_index(&a[zh * d..(zh + 1) * d], &mut rng);
    }

    let emit = |win: usize, zh: usize, b: usize| -> u8 {
        if zh == 0 { b as u8 } else { ((win >> (zh - 1)) & 1) as u8 }
    };
    let p_in = |win: usize, b: usize| -> f64 {
        let p1 = input.p_one(win);
        if b == 1 { p1 } else { 1.0 - p1 }
    };

    // backward pass, stored for every t (scaled)
    let mut beta = vec![0.0f64; (n + 1) * ns];
    beta[n * ns..].iter_mut().for_each(|v| *v = 1.0);
    for t in (0..n).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * ns);
        let cur = &mut cur[t * ns..];
        let mut total = 0.0;
        for win in 0..nw {
            for zh in 0..d {
                let mut acc = 0.0;
                for b in 0..2 {
                    if emit(win, zh, b) != y[t] {
                        continue;
                    }
                    let pb = p_in(win, b);
                    if pb == 0.0 {
                        continue;
                    }
                    let w2 = ((win << 1) | b) & wmask;
                    let row = &a[zh * d..(zh + 1) * d];
                    let nb = &next[w2 * d..(w2 + 1) * d];
                    let s: f64 = row.iter().zip(nb).map(|(p, q)| p * q).sum();
                    acc += pb * s;
                }
                cur[win * d + zh] = acc;
                total += acc;
            }
        }
        if total > 0.0 {
            cur.iter_mut().for_each(|v| *v /= total);
        }
    }

    // forward pass with branch posteriors
    let nc = 1usize << mu;
    let sigma_mu = input.stationary_contexts(mu);
    let mut tacc = vec![[0.0f64; 2]; nc];
    let mut alpha = vec![0.0f64; ns];
    for win in 0..nw {
        for zh in 0..d {
            alpha[win * d + zh] = sigma_w[win] * pi[zh];
        }
    }
    let mut nalpha = vec![0.0f64; ns];
    let mut post = vec![[0.0f64; 2]; nc];
    for t in 0..n {
        let next = &beta[(t + 1) * ns..(t + 2) * ns];
        nalpha.iter_mut().for_each(|v| *v = 0.0);
        post.iter_mut().for_each(|r| *r = [0.0, 0.0]);
        let mut norm = 0.0;
        for win in 0..nw {
            let c = win & cmask;
            for zh in 0..d {
                let av = alpha[win * d + zh];
                if av == 0.0 {
                    continue;
                }
                for b in 0..2 {
                    if emit(win, zh, b) != y[t] {
                        continue;
                    }
                    let pb = p_in(win, b);
                    if pb == 0.0 {
                        continue;
                    }
                    let w2 = ((win << 1) | b) & wmask;
                    let row = &a[zh * d..(zh + 1) * d];
                    let base = av * pb;
                    let mut branch = 0.0;
                    for z2 in 0..d {
                        let tr = base * row[z2];
                        nalpha[w2 * d + z2] += tr;
                        branch += tr * next[w2 * d + z2];
                    }
                    post[if mu == 0 { 0 } else { c }][b] += branch;
                    norm += branch;
                }
            }
        }
        if norm > 0.0 {
            for c in 0..nc {
                let pc = (post[c][0] + post[c][1]) / norm;
                for b in 0..2 {
                    let pcb = post[c][b] / norm;
                    let denom = sigma_mu[c] * input.transition[c][b];
                    tacc[c][b] += xlog2x(pcb) / denom - xlog2x(pc) / sigma_mu[c];
                }
            }
        }
        let s: f64 = nalpha.iter().sum();
        if s > 0.0 {
            for (a0, v) in alpha.iter_mut().zip(&nalpha) {
                *a0 = v / s;
            }
        }
    }
    Ok(tacc.iter().map(|r| [r[0] / n as f64, r[1] / n as f64]).collect())
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Rate of the best Bernoulli(q) input on a grid, for the order-0 check.
pub fn bernoulli_scan(params: &ChannelParams, m: usize, n: usize, seed: u64, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    grid.iter()
        .map(|&q| {
            let input = MarkovInputMu::new(0, vec![[1.0 - q, q]])?;
            Ok((q, markov_rate_estimate(params, m, 0, &input, n, seed)?.value))
        })
        .collect()
}
