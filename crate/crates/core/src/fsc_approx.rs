//! Finite-drift approximations of the channel.
//!
//! The dagger family clips the true drift to `[-m, m]` and is therefore
//! time-inhomogeneous at the boundary. The star family replaces the boundary
//! rows with fixed ones, giving a homogeneous `(2m+1)`-state chain.

use crate::channel_core::{state_transition_pmf, ChannelParams};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FscVariant {
    Dagger,
    Star,
}

/// A clipped-drift channel. `star_matrix` is row-major over drift labels
/// `-m..=m` and is present only for the star variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FscModel {
    pub m: usize,
    pub variant: FscVariant,
    pub params: ChannelParams,
    pub star_matrix: Option<Vec<f64>>,
}

impl FscModel {
    pub fn num_states(&self) -> usize {
        2 * self.m + 1
    }

    /// Drift labels `-m..=m` in state order.
    pub fn drift_states(&self) -> Vec<i64> {
        let m = self.m as i64;
        (-m..=m).collect()
    }

    /// Transition probability between drift labels (star only).
    pub fn star_prob(&self, from: i64, to: i64) -> f64 {
        let s = self.num_states();
        let m = self.m as i64;
        let mat = self.star_matrix.as_ref().expect("star variant carries a matrix");
        mat[(from + m) as usize * s + (to + m) as usize]
    }

    /// Row `from` of the star matrix (star only), indexed by `to + m`.
    pub fn star_row(&self, from: i64) -> &[f64] {
        let s = self.num_states();
        let m = self.m as i64;
        let mat = self.star_matrix.as_ref().expect("star variant carries a matrix");
        let r = (from + m) as usize;
        &mat[r * s..(r + 1) * s]
    }

    fn dmatrix(&self) -> Result<DMatrix<f64>> {
        let mat = self
            .star_matrix
            .as_ref()
            .ok_or_else(|| Error::Domain("operation needs the star variant".into()))?;
        let s = self.num_states();
        Ok(DMatrix::from_row_slice(s, s, mat))
    }
}

/// Row for a drift strictly inside `(-m, m)`, indexed by `to + m`.
pub fn interior_row(params: &ChannelParams, m: usize, from: i64) -> Vec<f64> {
    let mi = m as i64;
    let mut row = vec![0.0; 2 * m + 1];
    row[(from + 1 + mi) as usize] = params.p_r;
    for k in (-mi + 1)..=from {
        row[(k + mi) as usize] = state_transition_pmf(params, k - from, 0);
    }
    row[0] = (1.0 - params.p_r) * params.p_d.powi((from + mi) as i32);
    row
}

/// Row from `-m`, where `p_under = P(Z = -m | Z <= -m)` for the clipped
/// chain and 1 for the star chain.
pub fn lower_boundary_row(params: &ChannelParams, m: usize, p_under: f64) -> Vec<f64> {
    let mut row = vec![0.0; 2 * m + 1];
    row[0] = 1.0 - params.p_r * p_under;
    row[1] = params.p_r * p_under;
    row
}

/// Row from `+m`, where `p_over = E[p_d^(Z - m) | Z >= m]` for the clipped
/// chain and 1 for the star chain.
pub fn upper_boundary_row(params: &ChannelParams, m: usize, p_over: f64) -> Vec<f64> {
    let (pd, pr, pt) = (params.p_d, params.p_r, params.p_t);
    let mi = m as i64;
    let mut row = vec![0.0; 2 * m + 1];
    row[2 * m] = 1.0 - pd * (1.0 - pr) * p_over;
    for k in (-mi + 1)..mi {
        row[(k + mi) as usize] = pt * pd.powi((mi - k) as i32) * p_over;
    }
    row[0] = (1.0 - pr) * pd.powi(2 * m as i32) * p_over;
    row
}

/// The star chain on `2m + 1` drift states.
pub fn build_star_fsc(params: &ChannelParams, m: usize) -> FscModel {
    let s = 2 * m + 1;
    let mi = m as i64;
    let mut mat = Vec::with_capacity(s * s);
    if m == 0 {
        mat.push(1.0);
    } else {
        for from in -mi..=mi {
            let row = if from == -mi {
                lower_boundary_row(params, m, 1.0)
            } else if from == mi {
                upper_boundary_row(params, m, 1.0)
            } else {
                interior_row(params, m, from)
            };
            mat.extend(row);
        }
    }
    FscModel { m, variant: FscVariant::Star, params: *params, star_matrix: Some(mat) }
}

/// The clipped chain; its transitions come from [`dagger_transition_pmf`].
pub fn build_dagger_fsc(params: &ChannelParams, m: usize) -> FscModel {
    FscModel { m, variant: FscVariant::Dagger, params: *params, star_matrix: None }
}

/// Clip each drift to `[-m, m]`.
pub fn clip_drift_path(z: &[i64], m: usize) -> Vec<i64> {
    let mi = m as i64;
    z.iter().map(|&v| v.clamp(-mi, mi)).collect()
}

/// Distribution of the unclipped drift `Z_n` on `[floor, n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZMarginal {
    pub n: usize,
    pub floor: i64,
    /// `probs[k] = P(Z_n = floor + k)`.
    pub probs: Vec<f64>,
    /// `P(Z_n < floor)`.
    pub deficit: f64,
}

impl ZMarginal {
    /// Point mass at 0 (time 0).
    pub fn origin(floor: i64) -> Self {
        let floor = floor.min(0);
        let mut probs = vec![0.0; (-floor) as usize + 1];
        probs[(-floor) as usize] = 1.0;
        Self { n: 0, floor, probs, deficit: 0.0 }
    }

    pub fn top(&self) -> i64 {
        self.floor + self.probs.len() as i64 - 1
    }

    pub fn prob(&self, z: i64) -> f64 {
        if z < self.floor || z > self.top() {
            0.0
        } else {
            self.probs[(z - self.floor) as usize]
        }
    }

    /// `P(Z_n <= z)`, counting the mass below the floor.
    pub fn prob_le(&self, z: i64) -> f64 {
        if z < self.floor {
            return self.deficit;
        }
        let hi = (z.min(self.top()) - self.floor) as usize;
        self.deficit + self.probs[..=hi].iter().sum::<f64>()
    }

    /// `P(Z_n >= z)`.
    pub fn prob_ge(&self, z: i64) -> f64 {
        if z > self.top() {
            return 0.0;
        }
        let lo = (z.max(self.floor) - self.floor) as usize;
        let s: f64 = self.probs[lo..].iter().sum();
        if z <= self.floor { s + self.deficit } else { s }
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| p * (self.floor + k as i64) as f64).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let d = (self.floor + k as i64) as f64 - mu;
                p * d * d
            })
            .sum()
    }

    /// One drift step.
    pub fn step(&self, params: &ChannelParams) -> Self {
        let (pd, pr, pt) = (params.p_d, params.p_r, params.p_t);
        let len = self.probs.len() + 1;
        let mut out = vec![0.0; len];
        // s = Σ_{l>=0} p_d^l old(z + l), built from the top down
        let mut s = 0.0;
        for k in (0..len).rev() {
            if k < self.probs.len() {
                s = self.probs[k] + pd * s;
            } else {
                s = 0.0;
            }
            let up = if k >= 1 { self.probs[k - 1] } else { 0.0 };
            out[k] = pr * up + pt * s;
        }
        // mass pushed below the floor: from z, a drop of more than z - floor
        let below: f64 = self
            .probs
            .iter()
            .enumerate()
            .map(|(k, p)| p * (1.0 - pr) * pd.powi(k as i32 + 1))
            .sum();
        Self { n: self.n + 1, floor: self.floor, probs: out, deficit: self.deficit + below }
    }
}

/// Default truncation floor `-(n + 20 / ln(1/p_d))`.
pub fn default_floor(params: &ChannelParams, n: usize) -> i64 {
    if params.p_d <= 0.0 {
        return -(n as i64);
    }
    -(n as f64 + 20.0 / (1.0 / params.p_d).ln()).ceil() as i64
}

/// Exact law of `Z_n` by `n`-fold convolution, truncated at `floor`.
pub fn z_marginal(params: &ChannelParams, n: usize, floor: i64) -> ZMarginal {
    z_marginals(params, n, floor).pop().expect("at least time 0")
}

/// Laws of `Z_0..=Z_n`; index `i` holds `Z_i`.
pub fn z_marginals(params: &ChannelParams, n: usize, floor: i64) -> Vec<ZMarginal> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(ZMarginal::origin(floor));
    for _ in 0..n {
        let next = out.last().expect("nonempty").step(params);
        out.push(next);
    }
    out
}

/// `P(Z^(m)_i = to | Z^(m)_{i-1} = from)` for the clipped chain.
/// `marginals[i - 1]` must hold the law of `Z_{i-1}`.
pub fn dagger_transition_pmf(
    params: &ChannelParams,
    m: usize,
    i: usize,
    from: i64,
    to: i64,
    marginals: &[ZMarginal],
) -> Result<f64> {
    let row = dagger_row(params, m, i, from, marginals)?;
    let mi = m as i64;
    if to.abs() > mi {
        return Ok(0.0);
    }
    Ok(row[(to + mi) as usize])
}

/// Full clipped-chain row from `from` at time `i`, indexed by `to + m`.
pub fn dagger_row(
    params: &ChannelParams,
    m: usize,
    i: usize,
    from: i64,
    marginals: &[ZMarginal],
) -> Result<Vec<f64>> {
    let mi = m as i64;
    if from.abs() > mi || i == 0 {
        return Err(Error::Domain(format!("dagger row needs |from| <= m and i >= 1, got from={from}, i={i}")));
    }
    if m == 0 {
        return Ok(vec![1.0]);
    }
    if from > -mi && from < mi {
        return Ok(interior_row(params, m, from));
    }
    let marg = marginals
        .get(i - 1)
        .ok_or_else(|| Error::Size(format!("no drift marginal cached for time {}", i - 1)))?;
    if from == -mi {
        let tail = marg.prob_le(-mi);
        if tail <= 0.0 {
            return Err(Error::UndefinedConditional(format!("P(Z_{} <= -{m}) = 0", i - 1)));
        }
        Ok(lower_boundary_row(params, m, marg.prob(-mi) / tail))
    } else {
        let tail = marg.prob_ge(mi);
        if tail <= 0.0 {
            return Err(Error::UndefinedConditional(format!("P(Z_{} >= {m}) = 0", i - 1)));
        }
        let mut num = 0.0;
        let mut w = 1.0;
        for z in mi..=marg.top() {
            num += marg.prob(z) * w;
            w *= params.p_d;
        }
        Ok(upper_boundary_row(params, m, num / tail))
    }
}

/// True if some power `k <= horizon` of the star matrix is entrywise
/// positive.
pub fn check_indecomposable(model: &FscModel, horizon: usize) -> Result<bool> {
    let t = model.dmatrix()?;
    let mut pow = t.clone();
    for _ in 0..horizon {
        if pow.iter().all(|&v| v > 0.0) {
            return Ok(true);
        }
        pow = &pow * &t;
    }
    Ok(false)
}

/// Default certificate horizon `4m + 4`.
pub fn default_horizon(m: usize) -> usize {
    4 * m + 4
}

/// Stationary law of the star chain, indexed by drift `+ m`.
///
/// Solved directly from `π(T - I) = 0, Σπ = 1`; the residual `||πT - π||_1`
/// is checked against 1e-12.
pub fn star_stationary(model: &FscModel) -> Result<Vec<f64>> {
    if !check_indecomposable(model, default_horizon(model.m))? {
        return Err(Error::Reducible(format!(
            "star chain with m={} at (p_d={}, p_r={}) has no positive power",
            model.m, model.params.p_d, model.params.p_r
        )));
    }
    let s = model.num_states();
    let t = model.dmatrix()?;
    let mut a = t.transpose() - DMatrix::<f64>::identity(s, s);
    for c in 0..s {
        a[(s - 1, c)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(s);
    b[s - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Reducible("singular stationary system".into()))?;
    let mut pi: Vec<f64> = pi.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    let resid = stationary_residual(model, &pi);
    if resid >= 1e-12 {
        return Err(Error::Validity(format!("stationary residual {resid:e} exceeds 1e-12")));
    }
    Ok(pi)
}

/// `||πT - π||_1` for the star matrix.
pub fn stationary_residual(model: &FscModel, pi: &[f64]) -> f64 {
    let s = model.num_states();
    let mat = model.star_matrix.as_ref().expect("star variant");
    (0..s)
        .map(|k| {
            let v: f64 = (0..s).map(|j| pi[j] * mat[j * s + k]).sum();
            (v - pi[k]).abs()
        })
        .sum()
}

/// Star matrix as CSV: header of drift labels, one row per source state.
pub fn star_matrix_csv(model: &FscModel) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let labels: Vec<String> = std::iter::once("from".to_string())
        .chain(model.drift_states().iter().map(|z| z.to_string()))
        .collect();
    w.write_record(&labels)?;
    for from in model.drift_states() {
        let mut rec = vec![from.to_string()];
        rec.extend(model.star_row(from).iter().map(|v| format!("{v:.17e}")));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
