use std::collections::HashMap;

use synchan::analytic_bounds::*;
use synchan::channel_core::ChannelParams;
use synchan::core_math::{binom, h2};

/// `H(Z_1 | Z_i = -m, X, Y)` by listing deletion patterns directly: given
/// `Z_i = -m`, exactly `m` of the first `m+i-1` inputs are deleted, all
/// patterns equally likely, and `Z_1 = -(first kept position)`.
fn h_im_oracle(i: usize, m: usize) -> f64 {
    let len = m + i - 1;
    let mut total = 0.0;
    for xv in 0..1u32 << len {
        let x: Vec<u8> = (0..len).map(|k| (xv >> k & 1) as u8).collect();
        // y -> counts of first-kept position
        let mut groups: HashMap<Vec<u8>, HashMap<usize, f64>> = HashMap::new();
        for keep in 0..1u32 << len {
            if keep.count_ones() as usize != i - 1 {
                continue;
            }
            let y: Vec<u8> = (0..len).filter(|k| keep >> k & 1 == 1).map(|k| x[k]).collect();
            let first = (0..len).find(|k| keep >> k & 1 == 1).unwrap_or(len);
            *groups.entry(y).or_default().entry(first).or_default() += 1.0;
        }
        let patterns = binom(len as u64, m as u64);
        for firsts in groups.values() {
            let w: f64 = firsts.values().sum();
            let h: f64 = firsts.values().map(|c| -(c / w) * (c / w).log2()).sum();
            total += w / patterns * h;
        }
    }
    total / (1u64 << len) as f64
}

/// Weight distribution of a symmetric Markov string, by listing strings.
fn eta_oracle(alpha: f64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len + 1];
    for v in 0..1u32 << len {
        let mut p = 0.5;
        for k in 1..len {
            p *= if (v >> k & 1) != (v >> (k - 1) & 1) { alpha } else { 1.0 - alpha };
        }
        out[v.count_ones() as usize] += p;
    }
    out
}

fn p_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| lo + step * k as f64).collect()
}

#[test]
fn simple_bounds_examples() {
    let (lo, up) = drc_simple_bounds(&ChannelParams::new(0.0, 0.0).unwrap());
    assert_eq!((lo.value, up.value), (1.0, 1.0));
    for p in [0.05, 0.1, 0.2] {
        let (lo, up) = drc_simple_bounds(&ChannelParams::bdc(p).unwrap());
        assert!((lo.value - (1.0 - p - h2(p))).abs() < 1e-15);
        assert!((up.value - (1.0 - p)).abs() < 1e-15);
        let (lo, _) = drc_simple_bounds(&ChannelParams::sdrc(p).unwrap());
        assert!((lo.value - (1.0 - p - 2.0 * h2(p)).max(0.0)).abs() < 1e-12);
    }
}

#[test]
fn h_im_matches_pattern_enumeration() {
    for i in 2..=5 {
        for m in 0..=4 {
            let got = h_im(i, m).unwrap();
            let want = h_im_oracle(i, m);
            assert!((got - want).abs() < 1e-12, "i={i} m={m}: {got} vs {want}");
        }
    }
}

#[test]
fn h_im_examples_and_limits() {
    for i in 2..=8 {
        assert_eq!(h_im(i, 0).unwrap(), 0.0);
    }
    assert!((h_im(2, 1).unwrap() - 0.5).abs() < 1e-15);
    assert!(h_im(1, 1).is_err());
    assert!(h_im(10, 12).is_err());
}

#[test]
fn h2m_closed_examples() {
    assert_eq!(h2m_closed(0), 0.0);
    assert!((h2m_closed(1) - 0.5).abs() < 1e-15);
    for m in 0..=10 {
        assert!((h_im(2, m).unwrap() - h2m_closed(m)).abs() < 1e-12);
    }
    for m in 0..=20 {
        let lower = ((m + 1) as f64).log2() - 1.0 + 2f64.powi(-(m as i32));
        assert!(h2m_closed(m) >= lower - 1e-12, "m={m}");
    }
}

#[test]
fn psi_i1_closed_sum_matches_enumeration() {
    assert_eq!(psi_i1(1), 0.0);
    assert!((psi_i1(2) - 1.0).abs() < 1e-15);
    for i in 2..=12 {
        let via_h = i as f64 * h_im(i, 1).unwrap();
        assert!((psi_i1(i) - via_h).abs() < 1e-12, "i={i}");
    }
}

#[test]
fn psi_i1_monotone_and_geometric() {
    let limit = psi_1();
    assert!((limit - 1.288_531_275).abs() < 1e-8);
    let mut prev_gap = f64::INFINITY;
    for i in 1..=40 {
        assert!(psi_i1(i + 1) >= psi_i1(i) - 1e-15);
        let gap = (psi_i1(i) - limit).abs();
        if i >= 4 && gap > 1e-13 {
            assert!(gap <= 0.5 * prev_gap + 1e-15, "i={i}: {gap} vs {prev_gap}");
        }
        prev_gap = gap;
    }
}

#[test]
fn small_p_constants() {
    assert!((constant_d() - 1.154_163_765).abs() < 1e-8);
    assert!((constant_r() - 0.845_836_235).abs() < 1e-8);
    assert_eq!(constant_r() + constant_d(), 2.0);
    assert_eq!(bdc_small_p_sir(0.0).unwrap().value, 1.0);
    assert_eq!(brc_small_p_sir(0.0).unwrap().value, 1.0);
    let p: f64 = 0.01;
    let plug_in = 1.0 + p * p.log2() - constant_d() * p;
    assert!((bdc_small_p_sir(p).unwrap().value - plug_in).abs() < 1e-15);
    assert!((plug_in - 0.922_019_8).abs() < 1e-6);
}

#[test]
fn d2_iud_basics() {
    assert_eq!(d2_iud(0.0, 50).unwrap().value, 1.0);
    let a = d2_iud(0.1, 200).unwrap().value;
    let b = d2_iud(0.1, 400).unwrap().value;
    assert!((a - b).abs() < 1e-8);
    let r = d2_iud(0.3, 30).unwrap();
    let t = r.truncation.unwrap();
    let full = d2_iud(0.3, 400).unwrap().value;
    assert!(full - r.value <= t.tail_bound + 1e-15);
}

#[test]
fn d2_closed_below_series() {
    let ps = p_star_d2();
    assert!((ps - 0.294_832_606).abs() < 1e-9);
    for p in p_grid(0.05, 0.25, 0.05) {
        let series = d2_iud(p, 400).unwrap().value;
        let closed = d2_iud_closed(p).unwrap().value;
        assert!(closed <= series + 1e-12, "p={p}: {closed} > {series}");
    }
    // at p = 1e-4 the first-order terms alone are 1.5e-3, so the limit is checked further in
    assert!((d2_iud_closed(1e-6).unwrap().value - 1.0).abs() < 1e-4);
    assert!(d2_iud_closed(1e-4).unwrap().value <= d2_iud(1e-4, 400).unwrap().value);
    assert!(d2_iud_closed(ps).is_err());
    assert!(d2_iud_closed(0.0).is_err());
}

#[test]
fn d2_small_p_expansion() {
    // D_i = 1 + p log2 p - p log2(2e) + ψ_{i,1} p + O(p^2) with ψ_{2,1} = 1
    let ks: Vec<f64> = [1e-3, 2e-3, 4e-3]
        .iter()
        .map(|&p: &f64| {
            let exp = 1.0 + p * p.log2() - p * (2.0 * std::f64::consts::E).log2() + psi_i1(2) * p;
            (d2_iud(p, 400).unwrap().value - exp).abs() / (p * p)
        })
        .collect();
    let spread = ks.iter().cloned().fold(f64::MIN, f64::max) / ks.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1.5, "K values {ks:?}");
}

#[test]
fn sir_partial_sums() {
    for p in [0.05, 0.1, 0.2] {
        for i in 1..=6 {
            let d0 = bdc_sir_partial(i, 0, p).unwrap().value;
            assert!((d0 - (1.0 - p - h2(p))).abs() < 1e-15);
            if i >= 2 {
                let d1 = bdc_sir_partial(i, 1, p).unwrap().value;
                let want = 1.0 - p - h2(p) + p * (1.0 - p).powi(i as i32 + 1) * psi_i1(i);
                assert!((d1 - want).abs() < 1e-12);
            }
            let mut prev = f64::NEG_INFINITY;
            for j in 0..=6 {
                let v = bdc_sir_partial(i, j, p).unwrap().value;
                assert!(v >= prev - 1e-15, "i={i} j={j}");
                prev = v;
            }
        }
    }
    // in i only the full series is monotone; j = 12 leaves a tail below p^13
    for p in [0.05, 0.1] {
        let mut prev = f64::NEG_INFINITY;
        for i in 1..=5 {
            let v = bdc_sir_partial(i, 12, p).unwrap().value;
            assert!(v >= prev - 1e-12, "i={i} p={p}: {v} < {prev}");
            prev = v;
        }
    }
    assert!(bdc_sir_partial(10, 12, 0.1).is_err());
}

#[test]
fn eta_matches_string_enumeration() {
    for alpha in p_grid(0.1, 0.9, 0.1) {
        let table = eta_table(alpha, 12);
        for (len, row) in table.iter().enumerate().skip(1) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in row.iter().zip(eta_oracle(alpha, len)) {
                assert!((a - b).abs() < 1e-14, "alpha={alpha} len={len}");
            }
        }
    }
}

#[test]
fn markov1_d2_at_half_is_iud() {
    for p in [0.05, 0.1, 0.2, 0.3] {
        let iud = d2_iud(p, MARKOV1_D2_MAX_M).unwrap().value;
        let half = markov1_d2_bracket(p, 0.5, MARKOV1_D2_MAX_M) * (1.0 - p) - h2(p);
        assert!((iud - half).abs() < 1e-9, "p={p}");
    }
}

#[test]
fn markov1_d2_gain_is_small() {
    // the < 2% gain over the i.u.d. bound holds up to p = 0.15 here
    for p in p_grid(0.05, 0.15, 0.05) {
        let m1 = bdc_markov1_d2(p, MARKOV1_D2_MAX_M).unwrap().value;
        let iud = d2_iud(p, MARKOV1_D2_MAX_M).unwrap().value;
        assert!(m1 >= iud - 1e-12);
        assert!((m1 - iud) / iud < 0.02, "p={p}: {m1} vs {iud}");
    }
}

#[test]
#[ignore = "relative gain is 3.2% at p=0.2 and 17% at p=0.3, so the 2% figure does not hold on the whole grid"]
fn markov1_d2_gain_full_grid() {
    for p in p_grid(0.05, 0.3, 0.05) {
        let m1 = bdc_markov1_d2(p, MARKOV1_D2_MAX_M).unwrap().value;
        let iud = d2_iud(p, MARKOV1_D2_MAX_M).unwrap().value;
        assert!((m1 - iud) / iud < 0.02, "p={p}: {m1} vs {iud}");
    }
}

#[test]
fn markov1_frak_d1_consistency() {
    for p in [0.05, 0.1, 0.2] {
        for i in 2..=10 {
            let term = markov1_frak_d1_term(p, 0.5, i);
            let partial = bdc_sir_partial(i, 1, p).unwrap().value;
            assert!((term - partial).abs() < 1e-9, "p={p} i={i}: {term} vs {partial}");
        }
        let a = bdc_markov1_frak_d1(p, 64).unwrap().value;
        let b = bdc_markov1_frak_d1(p, 128).unwrap().value;
        assert!((a - b).abs() < 1e-10);
    }
    assert!((bdc_markov1_frak_d1(0.0, 64).unwrap().value - 1.0).abs() < 1e-12);
}

#[test]
fn brc_markov1_examples() {
    assert!((brc_markov1_rate(0.0, 0.5, DEFAULT_KMAX).unwrap().value - 1.0).abs() < 1e-12);
    for (p, a) in [(0.1, 0.3), (0.4, 0.6), (0.7, 0.2)] {
        let s: f64 = p + (1.0 - a) * (1.0 - p);
        assert!((brc_h_z1_given_y(p, a) - s * h2(p / s)).abs() < 1e-15);
    }
    let witness = p_grid(0.05, 0.9, 0.05).into_iter().any(|p| {
        let (_, best) = brc_markov1_max(p, DEFAULT_KMAX).unwrap();
        best.value > 1.0 - p
    });
    assert!(witness);
}

#[test]
fn brc_max_dominates_sir_and_r2() {
    for p in p_grid(0.1, 0.6, 0.1) {
        let (_, best) = brc_markov1_max(p, DEFAULT_KMAX).unwrap();
        let sir = brc_markov1_rate(p, 0.5, DEFAULT_KMAX).unwrap().value;
        assert!(best.value >= sir - 1e-9);
        assert!(brc_r2_closed(p).unwrap().value <= best.value + 1e-9, "p={p}");
    }
}

#[test]
fn brc_r2_endpoints() {
    let ps = p_star_brc();
    assert!((ps - 0.734_675_821).abs() < 1e-6);
    assert!(((1.0 - ps) * (4f64.powf(ps) + 1.0) - 1.0).abs() < 1e-12);
    assert!((brc_r2_closed(0.0).unwrap().value - 1.0).abs() < 1e-15);
    assert!((brc_r2_alpha_star(0.0) - 0.5).abs() < 1e-15);
    assert!(brc_r2_closed(ps + 1e-3).is_err());
    // the closed form is the bracket at its optimum
    for p in [0.1, 0.3, 0.5] {
        let a = brc_r2_alpha_star(p);
        assert!((brc_r2_closed(p).unwrap().value - brc_r2_bracket(p, a)).abs() < 1e-12);
        let grid_best = (0..=1000).map(|k| brc_r2_bracket(p, k as f64 / 1000.0)).fold(f64::MIN, f64::max);
        assert!(brc_r2_bracket(p, a) >= grid_best - 1e-12);
    }
}

#[test]
fn brc_small_p_matches_sir_to_second_order() {
    let ks: Vec<f64> = [1e-3, 2e-3, 4e-3]
        .iter()
        .map(|&p| {
            let sir = brc_markov1_rate(p, 0.5, DEFAULT_KMAX).unwrap().value;
            (sir - brc_small_p_sir(p).unwrap().value).abs() / (p * p)
        })
        .collect();
    let spread = ks.iter().cloned().fold(f64::MIN, f64::max) / ks.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1.5, "K values {ks:?}");
}

#[test]
fn alpha_brackets_are_unimodal() {
    // golden-section optimum agrees with a 1e-3 grid scan
    for p in [0.1, 0.3, 0.5] {
        let (a, best) = brc_markov1_max(p, DEFAULT_KMAX).unwrap();
        let grid = (0..=1000)
            .map(|k| brc_markov1_rate(p, k as f64 / 1000.0, DEFAULT_KMAX).unwrap().value)
            .fold(f64::MIN, f64::max);
        assert!(best.value >= grid - 1e-9, "p={p} alpha={a}");
    }
    for p in [0.1, 0.2] {
        let golden = bdc_markov1_d2(p, 32).unwrap().value;
        let grid = (0..=1000)
            .map(|k| markov1_d2_bracket(p, k as f64 / 1000.0, 32) * (1.0 - p) - h2(p))
            .fold(f64::MIN, f64::max);
        assert!(golden >= grid - 1e-9);
    }
}

#[test]
fn lower_bounds_stay_below_upper() {
    for p in p_grid(0.0, 0.25, 0.05) {
        let upper = 1.0 - p;
        let lowers = [
            d2_iud(p, 200).unwrap().value,
            bdc_markov1_d2(p, 32).unwrap().value,
            bdc_sir_partial(4, 4, p).unwrap().value,
            bdc_markov1_frak_d1(p, 64).unwrap().value,
        ];
        for l in lowers {
            assert!(l <= upper + 1e-12, "p={p}: {l} > {upper}");
        }
    }
}
