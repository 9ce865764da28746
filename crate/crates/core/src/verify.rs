//! Quick invariant suite behind `synchan verify`.
//!
//! Each check is small enough that the whole suite runs in seconds; the
//! long statistical reproductions live in the acceptance test target.

use crate::analytic_bounds::{
    brc_markov1_rate, brc_r2_closed, constant_d, constant_r, d2_iud, drc_simple_bounds, eta_row, h2m_closed, h_im,
    psi_i1, psi_im, DEFAULT_KMAX,
};
use crate::channel_core::{
    exact_output_law, make_params, sample_block_output_len, sample_trace, ChannelParams, Formulation,
};
use crate::core_math::{exp_integral_ei, h2};
use crate::exact_oracle::{exact_mi_dagger, exact_mi_star, exact_mi_true, InputLaw};
use crate::fsc_approx::{
    build_star_fsc, check_indecomposable, dagger_row, default_floor, default_horizon, interior_row, star_stationary,
    stationary_residual, z_marginals,
};
use crate::input_optim::MarkovInputMu;
use crate::rate_estimation::{forward_neglog_prob, Forward, TrellisSpec};
use crate::sequences::{subsequence_weight, subsequence_weight_brute, BitString};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Outcome of one check. Soft checks are reported but never fail the suite.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub hard: bool,
    pub detail: String,
}

fn hard(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, hard: true, detail }
}

fn soft(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, hard: false, detail }
}

fn guarded<F: FnOnce() -> crate::Result<Check>>(name: &'static str, f: F) -> Check {
    f().unwrap_or_else(|e| hard(name, false, format!("error: {e}")))
}

/// Run every check in module order.
pub fn run_all() -> Vec<Check> {
    let checks: Vec<fn() -> Check> = vec![
        entropy_symmetry,
        ei_branch_continuity,
        subsequence_dp_matches_brute,
        output_law_formulations_agree,
        output_law_mass,
        trace_index_monotone,
        output_length_mean,
        constants,
        closed_forms,
        psi_monotone,
        d2_between_simple_bounds,
        eta_rows_sum_to_one,
        brc_endpoints,
        star_rows_stochastic,
        star_stationary_residual,
        dagger_interior_equals_star,
        dagger_ordering_small,
        exact_identity_values,
        forward_chunk_invariance,
        joint_dominates_marginal,
        markov_input_entropy,
        star_drift_symmetry,
    ];
    checks.into_iter().map(|c| c()).collect()
}

/// True when no hard check failed.
pub fn all_hard_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed || !c.hard)
}

fn entropy_symmetry() -> Check {
    let worst = (0..=100).map(|k| k as f64 / 100.0).map(|p| (h2(p) - h2(1.0 - p)).abs()).fold(0.0, f64::max);
    hard("h2 symmetric", worst < 1e-15, format!("max |h2(p) - h2(1-p)| = {worst:e}"))
}

fn ei_branch_continuity() -> Check {
    guarded("Ei continuous across branches", || {
        let (a, b) = (exp_integral_ei(-6.0 + 1e-9)?, exp_integral_ei(-6.0 - 1e-9)?);
        let rel = (a - b).abs() / a.abs();
        Ok(hard("Ei continuous across branches", rel < 1e-7, format!("relative jump {rel:e}")))
    })
}

fn subsequence_dp_matches_brute() -> Check {
    guarded("subsequence weight dp = brute", || {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = rng.random_range(0..12);
            let k = rng.random_range(0..=n);
            let x = BitString::from_u64(rng.random::<u64>(), n);
            let y = BitString::from_u64(rng.random::<u64>(), k);
            let (a, b) = (subsequence_weight(&y, &x)?, subsequence_weight_brute(&y, &x)?);
            if a != b {
                return Ok(hard("subsequence weight dp = brute", false, format!("w_{y}({x}): {a} vs {b}")));
            }
        }
        Ok(hard("subsequence weight dp = brute", true, "200 random pairs".into()))
    })
}

fn output_law_formulations_agree() -> Check {
    guarded("output law formulations agree", || {
        let mut worst = 0.0f64;
        for (pd, pr) in [(0.1, 0.3), (0.3, 0.1), (0.0, 0.3), (0.3, 0.0)] {
            let p = make_params(pd, pr)?;
            for v in 0..32u64 {
                let x = BitString::from_u64(v, 5);
                let a = exact_output_law(&p, &x, Formulation::Dobrushin, 4)?;
                let b = exact_output_law(&p, &x, Formulation::States, 4)?;
                for (u, w) in a.dense().iter().zip(b.dense()) {
                    worst = worst.max((u - w).abs());
                }
            }
        }
        Ok(hard("output law formulations agree", worst < 1e-12, format!("max difference {worst:e}")))
    })
}

fn output_law_mass() -> Check {
    guarded("output law mass + deficit = 1", || {
        let p = make_params(0.2, 0.3)?;
        let x: BitString = "0110101".parse()?;
        let law = exact_output_law(&p, &x, Formulation::States, 6)?;
        let err = (law.total() + law.deficit - 1.0).abs();
        Ok(hard("output law mass + deficit = 1", err < 1e-12, format!("|sum + deficit - 1| = {err:e}")))
    })
}

fn trace_index_monotone() -> Check {
    guarded("index process non-decreasing", || {
        let p = make_params(0.2, 0.2)?;
        let x = BitString::from_u64(0b1011_0010_1110, 12);
        for seed in 0..200 {
            let t = sample_trace(&p, &x, seed)?;
            let ok = t.gamma.windows(2).all(|w| w[1] >= w[0]) && t.gamma[..t.gamma.len() - 1].iter().all(|&g| g <= 12);
            if !ok {
                return Ok(hard("index process non-decreasing", false, format!("seed {seed}")));
            }
        }
        Ok(hard("index process non-decreasing", true, "200 traces".into()))
    })
}

fn output_length_mean() -> Check {
    guarded("E[N_n]/n", || {
        let p = make_params(0.1, 0.2)?;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let len = sample_block_output_len(&p, n, &mut rng) as f64 / n as f64;
        let target = 0.9 / 0.8;
        let rel = (len - target).abs() / target;
        Ok(hard("E[N_n]/n", rel < 0.01, format!("N_n/n = {len:.5}, (1-p_d)/(1-p_r) = {target:.5}")))
    })
}

fn constants() -> Check {
    let (d, r) = (constant_d(), constant_r());
    let ok = (d - 1.154163765).abs() < 1e-8 && (r - 0.845836235).abs() < 1e-8;
    hard("constants d and r", ok, format!("d = {d:.10}, r = {r:.10}"))
}

fn closed_forms() -> Check {
    guarded("series match closed forms", || {
        let mut worst = 0.0f64;
        for m in 0..=6 {
            worst = worst.max((h_im(2, m)? - h2m_closed(m)).abs());
        }
        for i in 2..=8 {
            worst = worst.max((i as f64 * h_im(i, 1)? - psi_i1(i)).abs());
            worst = worst.max((psi_im(i, 1)? - psi_i1(i)).abs());
        }
        Ok(hard("series match closed forms", worst < 1e-12, format!("max difference {worst:e}")))
    })
}

fn psi_monotone() -> Check {
    let v: Vec<f64> = (1..=64).map(psi_i1).collect();
    let ok = v.windows(2).all(|w| w[1] >= w[0] - 1e-15);
    hard("psi_{i,1} non-decreasing", ok, format!("psi_64,1 = {:.10}", v[63]))
}

fn d2_between_simple_bounds() -> Check {
    guarded("D2 below the erasure bound", || {
        for k in 1..10 {
            let p = k as f64 * 0.05;
            let d2 = d2_iud(p, 200)?.value;
            let (_, up) = drc_simple_bounds(&ChannelParams::bdc(p)?);
            if d2 > up.value + 1e-12 {
                return Ok(hard("D2 below the erasure bound", false, format!("p={p}: {d2} > {}", up.value)));
            }
        }
        Ok(hard("D2 below the erasure bound", true, "p in 0.05..0.45".into()))
    })
}

fn eta_rows_sum_to_one() -> Check {
    let mut worst = 0.0f64;
    for k in 1..10 {
        let a = k as f64 / 10.0;
        for m in 1..=12 {
            worst = worst.max((eta_row(a, m).iter().sum::<f64>() - 1.0).abs());
        }
    }
    hard("eta rows sum to 1", worst < 1e-12, format!("max |sum - 1| = {worst:e}"))
}

fn brc_endpoints() -> Check {
    guarded("BRC rates at p = 0", || {
        let a = brc_markov1_rate(0.0, 0.5, DEFAULT_KMAX)?.value;
        let b = brc_r2_closed(0.0)?.value;
        let ok = (a - 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12;
        Ok(hard("BRC rates at p = 0", ok, format!("Markov-1 {a}, R2 {b}")))
    })
}

fn star_rows_stochastic() -> Check {
    guarded("star rows stochastic", || {
        let mut worst = 0.0f64;
        for m in 0..=8 {
            let spec = TrellisSpec::iud(&ChannelParams::sdrc(0.2)?, m)?;
            worst = worst.max(spec.row_sum_error());
        }
        Ok(hard("star rows stochastic", worst < 1e-12, format!("max row-sum error {worst:e}")))
    })
}

fn star_stationary_residual() -> Check {
    guarded("star stationary residual", || {
        let mut worst = 0.0f64;
        for m in 0..=8 {
            let model = build_star_fsc(&make_params(0.1, 0.2)?, m);
            if !check_indecomposable(&model, default_horizon(m))? {
                return Ok(hard("star stationary residual", false, format!("m={m} not indecomposable")));
            }
            let pi = star_stationary(&model)?;
            worst = worst.max(stationary_residual(&model, &pi));
        }
        Ok(hard("star stationary residual", worst < 1e-12, format!("max ||πT - π||_1 = {worst:e}")))
    })
}

fn dagger_interior_equals_star() -> Check {
    guarded("dagger interior rows = star rows", || {
        let p = make_params(0.15, 0.1)?;
        let m = 3;
        let marg = z_marginals(&p, 10, default_floor(&p, 10));
        let star = build_star_fsc(&p, m);
        for from in -2..=2i64 {
            let a = dagger_row(&p, m, 5, from, &marg)?;
            if a != star.star_row(from) || a != interior_row(&p, m, from) {
                return Ok(hard("dagger interior rows = star rows", false, format!("from {from}")));
            }
        }
        Ok(hard("dagger interior rows = star rows", true, "m = 3".into()))
    })
}

fn dagger_ordering_small() -> Check {
    guarded("I_n <= I†_{n,m+1} <= I†_{n,m}", || {
        let p = ChannelParams::sdrc(0.2)?;
        let n = 4;
        let tr = exact_mi_true(&p, n, InputLaw::Iud)?;
        let vals: Vec<f64> =
            (0..=4).map(|m| exact_mi_dagger(&p, n, m, InputLaw::Iud).map(|r| r.value)).collect::<crate::Result<_>>()?;
        let tol = 1e-10 + tr.deficit;
        let ok = vals.windows(2).all(|w| w[1] <= w[0] + 1e-10) && vals.iter().all(|&v| v >= tr.value - tol);
        Ok(hard("I_n <= I†_{n,m+1} <= I†_{n,m}", ok, format!("I_4 = {:.8}, dagger {vals:.8?}", tr.value)))
    })
}

fn exact_identity_values() -> Check {
    guarded("exact MI endpoints", || {
        let a = exact_mi_true(&make_params(0.0, 0.0)?, 5, InputLaw::Iud)?.value;
        let b = exact_mi_star(&ChannelParams::sdrc(0.2)?, 6, 0, InputLaw::Iud)?.value;
        let c = exact_mi_true(&ChannelParams::bdc(0.3)?, 1, InputLaw::Iud)?.value;
        let ok = (a - 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12 && (c - 0.7).abs() < 1e-9;
        Ok(hard("exact MI endpoints", ok, format!("identity {a}, star m=0 {b}, BDC n=1 {c}")))
    })
}

fn forward_chunk_invariance() -> Check {
    guarded("forward pass split invariance", || {
        let spec = TrellisSpec::new(&ChannelParams::sdrc(0.1)?, 2, MarkovInputMu::markov1(0.3)?)?;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = spec.sample(2000, &mut rng);
        let whole = forward_neglog_prob(&spec, &s.y, None, &spec.pi) * 2000.0;
        let mut f = Forward::y_only(&spec, &spec.pi);
        for part in s.y.chunks(333) {
            f.feed(part);
        }
        let diff = (f.neglog2() - whole).abs();
        Ok(hard("forward pass split invariance", diff < 1e-10, format!("difference {diff:e} bits")))
    })
}

fn joint_dominates_marginal() -> Check {
    guarded("-log P(x,y) >= -log P(y)", || {
        let spec = TrellisSpec::iud(&ChannelParams::sdrc(0.2)?, 3)?;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let s = spec.sample(500, &mut rng);
            let hy = forward_neglog_prob(&spec, &s.y, None, &spec.pi) * 500.0;
            let hyx = forward_neglog_prob(&spec, &s.y, Some(&s.x_window), &spec.pi) * 500.0;
            let hx = s.x_window.len() as f64;
            if hx + hyx < hy - 1e-9 {
                return Ok(hard("-log P(x,y) >= -log P(y)", false, format!("{} < {hy}", hx + hyx)));
            }
        }
        Ok(hard("-log P(x,y) >= -log P(y)", true, "20 traces".into()))
    })
}

fn markov_input_entropy() -> Check {
    guarded("Markov input entropy rate", || {
        let a = MarkovInputMu::markov1(0.2)?.entropy_rate();
        let b = MarkovInputMu::iud(4).entropy_rate();
        let ok = (a - h2(0.2)).abs() < 1e-12 && (b - 1.0).abs() < 1e-12;
        Ok(hard("Markov input entropy rate", ok, format!("Markov-1(0.2) {a:.12}, iud(4) {b:.12}")))
    })
}

/// The boundary rows are not mirror images, so the stationary law need not
/// be symmetric under drift negation; the asymmetry is only reported.
fn star_drift_symmetry() -> Check {
    guarded("star stationary law symmetry", || {
        let model = build_star_fsc(&ChannelParams::sdrc(0.2)?, 3);
        let pi = star_stationary(&model)?;
        let asym = pi.iter().zip(pi.iter().rev()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok(soft("star stationary law symmetry", asym < 1e-12, format!("max |π(z) - π(-z)| = {asym:.3e} (not asserted)")))
    })
}
