//! Monte Carlo information rates of the star channel.
//!
//! The star channel is simulated in its non-causal form: a stationary input
//! window `x_{-m..=n+m}`, a drift chain `Z_0 ~ π`, and outputs
//! `y_i = x_{i - Z_i}` for `i = 1..=n`. Entropies come from normalized
//! forward recursions, one over drift and input context (`y` alone) and one
//! over drift only (`y` given the window).

use crate::channel_core::ChannelParams;
use crate::error::{Error, Result};
use crate::fsc_approx::{build_star_fsc, star_stationary, FscModel};
use crate::input_optim::MarkovInputMu;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default number of independent chunks behind a stderr.
pub const DEFAULT_CHUNKS: usize = 50;
/// Smallest total length accepted by [`sir_estimate`].
pub const MIN_SIR_LEN: usize = 1000;

/// Everything the forward recursions need for one `(params, m, input)`.
#[derive(Debug, Clone)]
pub struct TrellisSpec {
    pub params: ChannelParams,
    pub m: usize,
    pub input: MarkovInputMu,
    /// Star matrix, row-major over drift index `z + m`.
    pub drift_matrix: Vec<f64>,
    /// Initial drift law.
    pub pi: Vec<f64>,
    /// Context width `max(1, mu)`.
    pub ctx_bits: usize,
    ctx_law: Vec<f64>,
    /// `jumps[δ][c]`: contexts reachable from `c` after `δ` more inputs.
    jumps: Vec<Vec<Vec<(u32, f64)>>>,
    iud: bool,
}

impl TrellisSpec {
    pub fn new(params: &ChannelParams, m: usize, input: MarkovInputMu) -> Result<Self> {
        let model = build_star_fsc(params, m);
        let pi = initial_drift_law(&model)?;
        let ctx_bits = input.mu.max(1);
        if ctx_bits > 12 {
            return Err(Error::Size(format!("context of {ctx_bits} bits exceeds the trellis budget")));
        }
        let ctx_law = input.stationary_contexts(ctx_bits);
        let jumps = jump_tables(&input, ctx_bits, 2 * m + 1);
        let iud = input.is_iud();
        Ok(Self {
            params: *params,
            m,
            input,
            drift_matrix: model.star_matrix.expect("star"),
            pi,
            ctx_bits,
            ctx_law,
            jumps,
            iud,
        })
    }

    pub fn iud(params: &ChannelParams, m: usize) -> Result<Self> {
        Self::new(params, m, MarkovInputMu::iud(0))
    }

    pub fn drift_states(&self) -> usize {
        2 * self.m + 1
    }

    /// Size of the `y`-only hidden state: drift times input context.
    pub fn hidden_states(&self) -> usize {
        self.drift_states() << self.ctx_bits
    }

    /// Largest deviation of a drift row sum from 1.
    pub fn row_sum_error(&self) -> f64 {
        let d = self.drift_states();
        (0..d)
            .map(|k| (self.drift_matrix[k * d..(k + 1) * d].iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// One sample of the non-causal star channel.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> StarSample {
        let m = self.m as i64;
        let d = self.drift_states();
        let x_window = self.input.sample(n + 2 * self.m + 1, rng);
        let mut k = draw(&self.pi, rng);
        let mut z = Vec::with_capacity(n + 1);
        z.push(k as i64 - m);
        let mut y = Vec::with_capacity(n);
        for i in 1..=n {
            k = draw(&self.drift_matrix[k * d..(k + 1) * d], rng);
            let zi = k as i64 - m;
            z.push(zi);
            y.push(x_window[(i as i64 - zi + m) as usize]);
        }
        StarSample { x_window, z, y }
    }
}

/// `x_window[g + m]` holds input `g` for `g ∈ [-m, n+m]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarSample {
    pub x_window: Vec<u8>,
    pub z: Vec<i64>,
    pub y: Vec<u8>,
}

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
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

fn jump_tables(input: &MarkovInputMu, w: usize, max_delta: usize) -> Vec<Vec<Vec<(u32, f64)>>> {
    let size = 1usize << w;
    let mask = size - 1;
    let mut out = Vec::with_capacity(max_delta + 1);
    let mut cur: Vec<Vec<(u32, f64)>> = (0..size).map(|c| vec![(c as u32, 1.0)]).collect();
    for _ in 0..=max_delta {
        out.push(cur.clone());
        cur = cur
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; size];
                for &(c, p) in row {
                    let c = c as usize;
                    let p1 = input.p_one(c);
                    dense[(c << 1) & mask] += p * (1.0 - p1);
                    dense[((c << 1) | 1) & mask] += p * p1;
                }
                dense.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(c, &v)| (c as u32, v)).collect()
            })
            .collect();
    }
    out
}

/// Initial drift law: the stationary law when the chain is indecomposable,
/// otherwise the Cesàro limit of the chain started at drift 0.
pub fn initial_drift_law(model: &FscModel) -> Result<Vec<f64>> {
    match star_stationary(model) {
        Ok(pi) => Ok(pi),
        Err(Error::Reducible(_)) => {
            let d = model.num_states();
            let t = model.star_matrix.as_ref().expect("star");
            let mut cur = vec![0.0; d];
            cur[model.m] = 1.0;
            let mut avg = vec![0.0; d];
            let steps = 20_000;
            for _ in 0..steps {
                for (a, c) in avg.iter_mut().zip(&cur) {
                    *a += c / steps as f64;
                }
                let mut next = vec![0.0; d];
                for (j, &v) in cur.iter().enumerate() {
                    for k in 0..d {
                        next[k] += v * t[j * d + k];
                    }
                }
                cur = next;
            }
            Ok(avg)
        }
        Err(e) => Err(e),
    }
}

/// Normalized forward recursion. Feeding a trace in pieces gives the same
/// total as feeding it at once.
#[derive(Debug, Clone)]
pub struct Forward<'a> {
    spec: &'a TrellisSpec,
    alpha: Vec<f64>,
    next: Vec<f64>,
    neglog2: f64,
    t: usize,
    prev_y: Option<u8>,
    joint: bool,
}

impl<'a> Forward<'a> {
    /// Recursion for `P(y)`, inputs marginalized.
    pub fn y_only(spec: &'a TrellisSpec, pi0: &[f64]) -> Self {
        let d = spec.drift_states();
        let alpha = if spec.iud {
            pi0.to_vec()
        } else {
            let nc = 1usize << spec.ctx_bits;
            let mut a = vec![0.0; d * nc];
            for k in 0..d {
                for c in 0..nc {
                    a[k * nc + c] = pi0[k] * spec.ctx_law[c];
                }
            }
            a
        };
        let next = vec![0.0; alpha.len()];
        Self { spec, alpha, next, neglog2: 0.0, t: 0, prev_y: None, joint: false }
    }

    /// Recursion for `P(y | x)` over the drift alone.
    pub fn joint(spec: &'a TrellisSpec, pi0: &[f64]) -> Self {
        Self {
            spec,
            alpha: pi0.to_vec(),
            next: vec![0.0; pi0.len()],
            neglog2: 0.0,
            t: 0,
            prev_y: None,
            joint: true,
        }
    }

    /// Total `-log2` probability of everything fed so far.
    pub fn neglog2(&self) -> f64 {
        self.neglog2
    }

    pub fn steps(&self) -> usize {
        self.t
    }

    /// The normalized hidden-state law after the last step.
    pub fn state(&self) -> &[f64] {
        &self.alpha
    }

    /// Feed outputs to the `y`-only recursion.
    pub fn feed(&mut self, ys: &[u8]) {
        assert!(!self.joint, "feed_joint is required for the joint recursion");
        for &y in ys {
            if self.neglog2.is_infinite() {
                break;
            }
            let c = if self.spec.iud { self.step_iud(y) } else { self.step_ctx(y) };
            self.finish(c);
            self.prev_y = Some(y);
        }
    }

    /// Feed outputs to the joint recursion; `x_window[g + m]` is input `g`.
    pub fn feed_joint(&mut self, ys: &[u8], x_window: &[u8]) {
        assert!(self.joint, "feed is required for the y-only recursion");
        let d = self.spec.drift_states();
        let a = &self.spec.drift_matrix;
        for &y in ys {
            if self.neglog2.is_infinite() {
                break;
            }
            let i = self.t + 1;
            for k2 in 0..d {
                // referenced input i - z' sits at window index i - k2 + 2m
                let idx = i + 2 * self.spec.m - k2;
                if x_window[idx] != y {
                    self.next[k2] = 0.0;
                    continue;
                }
                let mut s = 0.0;
                for k in 0..d {
                    s += self.alpha[k] * a[k * d + k2];
                }
                self.next[k2] = s;
            }
            let c: f64 = self.next.iter().sum();
            self.finish(c);
        }
    }

    fn finish(&mut self, c: f64) {
        self.t += 1;
        if c > 0.0 && c.is_finite() {
            self.neglog2 -= c.log2();
            for (a, v) in self.alpha.iter_mut().zip(&self.next) {
                *a = v / c;
            }
        } else {
            self.neglog2 = f64::INFINITY;
        }
    }

    fn step_iud(&mut self, y: u8) -> f64 {
        let d = self.spec.drift_states();
        let a = &self.spec.drift_matrix;
        // δ = 0 reuses the previous referenced symbol
        let stay = match self.prev_y {
            None => 0.5,
            Some(p) => f64::from(u8::from(p == y)),
        };
        for k2 in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                let w = self.alpha[k] * a[k * d + k2];
                if w != 0.0 {
                    s += if k + 1 == k2 { w * stay } else { w * 0.5 };
                }
            }
            self.next[k2] = s;
        }
        self.next.iter().sum()
    }

    fn step_ctx(&mut self, y: u8) -> f64 {
        let spec = self.spec;
        let d = spec.drift_states();
        let nc = 1usize << spec.ctx_bits;
        let a = &spec.drift_matrix;
        self.next.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..d {
            let row = &self.alpha[k * nc..(k + 1) * nc];
            for k2 in 0..d {
                let w = a[k * d + k2];
                if w == 0.0 {
                    continue;
                }
                let delta = 1 + k - k2;
                let table = &spec.jumps[delta];
                let out = &mut self.next[k2 * nc..(k2 + 1) * nc];
                for (c, &av) in row.iter().enumerate() {
                    if av == 0.0 {
                        continue;
                    }
                    let base = av * w;
                    for &(c2, p) in &table[c] {
                        if (c2 & 1) as u8 == y {
                            out[c2 as usize] += base * p;
                        }
                    }
                }
            }
        }
        self.next.iter().sum()
    }
}

/// `-(1/n) log2 P(y)`, or `-(1/n) log2 P(y | x)` when the input window is
/// given. Zero-probability traces give `+inf`.
pub fn forward_neglog_prob(spec: &TrellisSpec, y: &[u8], x_window: Option<&[u8]>, pi0: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    match x_window {
        None => {
            let mut f = Forward::y_only(spec, pi0);
            f.feed(y);
            f.neglog2() / y.len() as f64
        }
        Some(x) => {
            let mut f = Forward::joint(spec, pi0);
            f.feed_joint(y, x);
            f.neglog2() / y.len() as f64
        }
    }
}

/// Estimated information rate with its components, in bits per use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub p_d: f64,
    pub p_r: f64,
    pub m: usize,
    pub mu: usize,
    pub n: usize,
    pub seed: u64,
    pub chunks: usize,
    pub value: f64,
    pub stderr: f64,
    pub h_x: f64,
    pub h_y_hat: f64,
    pub h_xy_hat: f64,
    pub stderr_h_y: f64,
    pub stderr_h_xy: f64,
}

impl RateEstimate {
    pub const CSV_HEADER: [&'static str; 10] =
        ["p_d", "p_r", "m", "mu", "n", "seed", "value", "stderr", "H_Y_hat", "H_XY_hat"];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.p_d.to_string(),
            self.p_r.to_string(),
            self.m.to_string(),
            self.mu.to_string(),
            self.n.to_string(),
            self.seed.to_string(),
            format!("{:.10}", self.value),
            format!("{:.10}", self.stderr),
            format!("{:.10}", self.h_y_hat),
            format!("{:.10}", self.h_xy_hat),
        ]
    }
}

/// Per-chunk `(-log2 P(y)/len, -log2 P(y|x)/len)`.
pub fn chunk_entropies(spec: &TrellisSpec, len: usize, seed: u64, chunk: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let s = spec.sample(len, &mut rng);
    let hy = forward_neglog_prob(spec, &s.y, None, &spec.pi);
    let hyx = forward_neglog_prob(spec, &s.y, Some(&s.x_window), &spec.pi);
    (hy, hyx)
}

/// Rate estimate from `chunks` independent blocks of `n / chunks` uses.
pub fn estimate_with_chunks(spec: &TrellisSpec, n: usize, seed: u64, chunks: usize) -> Result<RateEstimate> {
    if chunks < 2 || n < chunks {
        return Err(Error::Domain(format!("need at least 2 chunks of length >= 1, got n={n}, chunks={chunks}")));
    }
    let len = n / chunks;
    let parts: Vec<(f64, f64)> =
        (0..chunks as u64).into_par_iter().map(|c| chunk_entropies(spec, len, seed, c)).collect();
    let h_x = spec.input.entropy_rate();
    let k = chunks as f64;
    let mean = |f: &dyn Fn(&(f64, f64)) -> f64| parts.iter().map(f).sum::<f64>() / k;
    let se = |f: &dyn Fn(&(f64, f64)) -> f64, mu: f64| {
        let var = parts.iter().map(|p| (f(p) - mu).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    };
    let h_y = mean(&|p| p.0);
    let h_yx = mean(&|p| p.1);
    let val = mean(&|p| p.0 - p.1);
    Ok(RateEstimate {
        p_d: spec.params.p_d,
        p_r: spec.params.p_r,
        m: spec.m,
        mu: spec.input.mu,
        n: len * chunks,
        seed,
        chunks,
        value: val,
        stderr: se(&|p| p.0 - p.1, val),
        h_x,
        h_y_hat: h_y,
        h_xy_hat: h_x + h_yx,
        stderr_h_y: se(&|p| p.0, h_y),
        stderr_h_xy: se(&|p| p.1, h_yx),
    })
}

/// Symmetric information rate of the star channel from `n` total uses.
pub fn sir_estimate(params: &ChannelParams, m: usize, n: usize, seed: u64) -> Result<RateEstimate> {
    if n < MIN_SIR_LEN {
        return Err(Error::Domain(format!("sir_estimate needs n >= {MIN_SIR_LEN}, got {n}")));
    }
    let spec = TrellisSpec::iud(params, m)?;
    estimate_with_chunks(&spec, n, seed, DEFAULT_CHUNKS)
}

/// Rate of an order-`mu` Markov input on the star channel.
pub fn markov_rate_estimate(
    params: &ChannelParams,
    m: usize,
    mu: usize,
    input: &MarkovInputMu,
    n: usize,
    seed: u64,
) -> Result<RateEstimate> {
    if input.mu != mu {
        return Err(Error::Domain(format!("input has order {}, expected {mu}", input.mu)));
    }
    markov_rate_estimate_with(params, m, input, n, seed, DEFAULT_CHUNKS)
}

/// [`markov_rate_estimate`] with an explicit chunk count.
pub fn markov_rate_estimate_with(
    params: &ChannelParams,
    m: usize,
    input: &MarkovInputMu,
    n: usize,
    seed: u64,
    chunks: usize,
) -> Result<RateEstimate> {
    let input = MarkovInputMu::new(input.mu, input.transition.clone())?;
    let spec = TrellisSpec::new(params, m, input)?;
    estimate_with_chunks(&spec, n, seed, chunks)
}

/// `m(n) = ceil(c · n^0.6)`, a clip radius growing faster than `sqrt(n)`.
pub fn growing_clip_radius(n: usize, c: f64) -> usize {
    (c * (n as f64).powf(0.6)).ceil() as usize
}

/// Rate estimates as CSV with `# ` provenance lines first.
pub fn estimates_csv(rows: &[RateEstimate], provenance: &[String]) -> Result<String> {
    let mut out = String::new();
    for line in provenance {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RateEstimate::CSV_HEADER)?;
    for r in rows {
        w.write_record(r.csv_record())?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}
