use std::collections::HashMap;

use synchan::channel_core::{exact_output_law, make_params, output_length_law, state_transition_pmf, ChannelParams, Formulation};
use synchan::exact_oracle::*;
use synchan::fsc_approx::build_star_fsc;
use synchan::sequences::BitString;

/// `(1/n) I(X;Y)` from a table `x -> (y -> P(y|x))`.
fn mi_from_laws(n: usize, law: &InputLaw, table: &[HashMap<Vec<u8>, f64>]) -> f64 {
    let mut py: HashMap<Vec<u8>, f64> = HashMap::new();
    let mut h_cond = 0.0;
    for (v, row) in table.iter().enumerate() {
        let x: Vec<u8> = (0..n).map(|k| (v >> (n - 1 - k) & 1) as u8).collect();
        let px = law.prob(&x);
        for (y, &p) in row {
            *py.entry(y.clone()).or_default() += px * p;
            if p > 0.0 {
                h_cond -= px * p * p.log2();
            }
        }
    }
    let h_y: f64 = py.values().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum();
    (h_y - h_cond) / n as f64
}

fn x_bits(v: usize, n: usize) -> Vec<u8> {
    (0..n).map(|k| (v >> (n - 1 - k) & 1) as u8).collect()
}

/// True-channel MI through the dense output laws.
fn true_mi_oracle(params: &ChannelParams, n: usize, law: InputLaw) -> (f64, f64) {
    // cap the dense table at 2^19 strings; the lost tail is carried in the tolerance
    let extra = (0..=18 - n).find(|&e| output_length_law(params, n, n + e).1 < 1e-12).unwrap_or(18 - n);
    let mut deficit: f64 = 0.0;
    let table: Vec<HashMap<Vec<u8>, f64>> = (0..1usize << n)
        .map(|v| {
            let x = BitString::from_bits(&x_bits(v, n));
            let out = exact_output_law(params, &x, Formulation::Dobrushin, extra).unwrap();
            deficit = deficit.max(out.deficit);
            out.iter().filter(|(_, p)| *p > 0.0).map(|(y, p)| (y.bits().to_vec(), p)).collect()
        })
        .collect();
    (mi_from_laws(n, &law, &table), deficit)
}

/// Output laws from an explicit list of drift paths `(Z_1..Z_T, prob)`;
/// output `i` reads `x_{i - Z_i}` while that index lies in `[1, n]`.
fn laws_from_paths(n: usize, paths: &[(Vec<i64>, f64)]) -> Vec<HashMap<Vec<u8>, f64>> {
    (0..1usize << n)
        .map(|v| {
            let x = x_bits(v, n);
            let mut row: HashMap<Vec<u8>, f64> = HashMap::new();
            for (z, p) in paths {
                let y: Vec<u8> = z
                    .iter()
                    .enumerate()
                    .map(|(k, &zi)| k as i64 + 1 - zi)
                    .filter(|&g| (1..=n as i64).contains(&g))
                    .map(|g| x[g as usize - 1])
                    .collect();
                *row.entry(y).or_default() += p;
            }
            row
        })
        .collect()
}

/// Every clipped drift path over `n + m` steps. States below `deep` can
/// never climb back to `-m` in time, so they are lumped.
fn dagger_paths(params: &ChannelParams, n: usize, m: usize) -> Vec<(Vec<i64>, f64)> {
    let steps = n + m;
    let mi = m as i64;
    let deep = -mi - steps as i64 - 1;
    let mut out = Vec::new();
    let mut stack = vec![(Vec::<i64>::new(), 0i64, 1.0f64)];
    while let Some((path, z, p)) = stack.pop() {
        if path.len() == steps {
            out.push((path, p));
            continue;
        }
        let mut next = |to: i64, w: f64| {
            if w > 0.0 {
                let mut q = path.clone();
                q.push(to.clamp(-mi, mi));
                stack.push((q, to, p * w));
            }
        };
        if z <= deep {
            next(z, 1.0);
            continue;
        }
        let mut below = 1.0;
        for to in (deep + 1)..=(z + 1) {
            let w = state_transition_pmf(params, to - z, 0);
            below -= w;
            next(to, w);
        }
        next(deep, below.max(0.0));
    }
    out
}

/// Every star-chain path over `n + m` steps from drift 0.
fn star_paths(params: &ChannelParams, n: usize, m: usize) -> Vec<(Vec<i64>, f64)> {
    let model = build_star_fsc(params, m);
    let mi = m as i64;
    let mut out = vec![(Vec::new(), 1.0)];
    let mut cur = 0;
    while cur < n + m {
        out = out
            .into_iter()
            .flat_map(|(path, p): (Vec<i64>, f64)| {
                let from = path.last().copied().unwrap_or(0);
                model
                    .star_row(from)
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(k, &w)| {
                        let mut q = path.clone();
                        q.push(k as i64 - mi);
                        (q, p * w)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        cur += 1;
    }
    out
}

#[test]
fn identity_and_bdc_single_symbol() {
    let id = make_params(0.0, 0.0).unwrap();
    for n in 1..=6 {
        assert!((exact_mi_true(&id, n, InputLaw::Iud).unwrap().value - 1.0).abs() < 1e-12);
    }
    for p in [0.1, 0.25, 0.6] {
        let r = exact_mi_true(&ChannelParams::bdc(p).unwrap(), 1, InputLaw::Iud).unwrap();
        assert!((r.value - (1.0 - p)).abs() < 1e-12);
    }
}

#[test]
fn true_channel_matches_output_law_oracle() {
    for (pd, pr) in [(0.1, 0.1), (0.2, 0.0), (0.0, 0.2), (0.3, 0.15)] {
        let params = make_params(pd, pr).unwrap();
        for n in 1..=5 {
            for law in [InputLaw::Iud, InputLaw::Markov1(0.3)] {
                let got = exact_mi_true(&params, n, law).unwrap();
                let (want, deficit) = true_mi_oracle(&params, n, law);
                let tol = 1e-9 + 20.0 * (deficit + got.deficit);
                assert!((got.value - want).abs() < tol, "({pd},{pr}) n={n} {law:?}: {} vs {want}", got.value);
            }
        }
    }
}

#[test]
fn dagger_matches_path_enumeration() {
    for (pd, pr) in [(0.1, 0.1), (0.2, 0.05), (0.05, 0.25)] {
        let params = make_params(pd, pr).unwrap();
        for n in 1..=3 {
            for m in 0..=2 {
                let paths = dagger_paths(&params, n, m);
                let want = mi_from_laws(n, &InputLaw::Iud, &laws_from_paths(n, &paths));
                let got = exact_mi_dagger(&params, n, m, InputLaw::Iud).unwrap().value;
                assert!((got - want).abs() < 1e-10, "({pd},{pr}) n={n} m={m}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn star_matches_path_enumeration() {
    for (pd, pr) in [(0.1, 0.1), (0.2, 0.05), (0.05, 0.25)] {
        let params = make_params(pd, pr).unwrap();
        for n in 1..=4 {
            for m in 0..=2 {
                let paths = star_paths(&params, n, m);
                for law in [InputLaw::Iud, InputLaw::Markov1(0.2)] {
                    let want = mi_from_laws(n, &law, &laws_from_paths(n, &paths));
                    let got = exact_mi_star(&params, n, m, law).unwrap().value;
                    assert!((got - want).abs() < 1e-10, "({pd},{pr}) n={n} m={m}: {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn formulation_agreement_carries_to_mutual_information() {
    let params = make_params(0.15, 0.1).unwrap();
    for n in 1..=4 {
        let extra = (0..=24 - n).find(|&e| output_length_law(&params, n, n + e).1 < 1e-12).unwrap();
        let table = |f: Formulation| -> Vec<HashMap<Vec<u8>, f64>> {
            (0..1usize << n)
                .map(|v| {
                    let x = BitString::from_bits(&x_bits(v, n));
                    exact_output_law(&params, &x, f, extra).unwrap().iter().map(|(y, p)| (y.bits().to_vec(), p)).collect()
                })
                .collect()
        };
        let a = mi_from_laws(n, &InputLaw::Iud, &table(Formulation::Dobrushin));
        let b = mi_from_laws(n, &InputLaw::Iud, &table(Formulation::States));
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn markov_half_is_iud() {
    let params = make_params(0.1, 0.2).unwrap();
    let a = exact_mi_true(&params, 5, InputLaw::Iud).unwrap();
    let b = exact_mi_true(&params, 5, InputLaw::Markov1(0.5)).unwrap();
    assert!((a.value - b.value).abs() < 1e-12);
    assert!(exact_mi_true(&params, 3, InputLaw::Markov1(1.5)).is_err());
}

#[test]
fn star_without_room_is_identity() {
    for p in [0.1, 0.3] {
        let params = ChannelParams::sdrc(p).unwrap();
        for n in [1, 4, 8] {
            assert!((exact_mi_star(&params, n, 0, InputLaw::Iud).unwrap().value - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn dagger_with_full_room_equals_true_for_deletions() {
    // with p_r = 0 the drift never exceeds 0 and only reaches -n at the very end
    for p in [0.1, 0.3] {
        let params = ChannelParams::bdc(p).unwrap();
        for n in 1..=5 {
            let t = exact_mi_true(&params, n, InputLaw::Iud).unwrap().value;
            let d = exact_mi_dagger(&params, n, n, InputLaw::Iud).unwrap().value;
            assert!((t - d).abs() < 1e-10, "p={p} n={n}");
        }
    }
}

#[test]
fn true_rate_non_increasing_in_block_length() {
    let params = make_params(0.1, 0.1).unwrap();
    let vals: Vec<f64> = [2, 4, 6, 8].iter().map(|&n| exact_mi_true(&params, n, InputLaw::Iud).unwrap().value).collect();
    assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-10), "{vals:?}");
}

#[test]
fn dagger_ordering() {
    for p in [0.1, 0.2] {
        let params = ChannelParams::sdrc(p).unwrap();
        for n in 1..=5 {
            let truth = exact_mi_true(&params, n, InputLaw::Iud).unwrap();
            let mut prev = f64::INFINITY;
            for m in 0..=4 {
                let d = exact_mi_dagger(&params, n, m, InputLaw::Iud).unwrap().value;
                assert!(d <= prev + 1e-10, "p={p} n={n} m={m}");
                assert!(d >= truth.value - 1e-10 - truth.deficit, "p={p} n={n} m={m}");
                prev = d;
            }
        }
    }
}

#[test]
fn star_gap_shrinks_with_radius() {
    let params = ChannelParams::sdrc(0.1).unwrap();
    let n = 6;
    let truth = exact_mi_true(&params, n, InputLaw::Iud).unwrap().value;
    let gaps: Vec<f64> = (1..=4)
        .map(|m| (exact_mi_star(&params, n, m, InputLaw::Iud).unwrap().value - truth).abs())
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    // ordering of the star values themselves is only reported
    let stars: Vec<f64> = (0..=4).map(|m| exact_mi_star(&params, n, m, InputLaw::Iud).unwrap().value).collect();
    println!("star values n={n}: {stars:?}");
}

#[test]
fn values_in_unit_interval() {
    for (pd, pr) in [(0.3, 0.3), (0.5, 0.0), (0.0, 0.5)] {
        let params = make_params(pd, pr).unwrap();
        for n in [1, 3, 5] {
            for r in [
                exact_mi_true(&params, n, InputLaw::Iud).unwrap(),
                exact_mi_dagger(&params, n, 2, InputLaw::Iud).unwrap(),
                exact_mi_star(&params, n, 2, InputLaw::Markov1(0.3)).unwrap(),
            ] {
                assert!((-1e-12..=1.0 + 1e-12).contains(&r.value), "{r:?}");
                assert!(r.deficit < MAX_ACCEPTED_DEFICIT);
            }
        }
    }
}

#[test]
fn size_limits() {
    let params = make_params(0.1, 0.1).unwrap();
    assert!(exact_mi_true(&params, TRUE_MAX_N + 1, InputLaw::Iud).is_err());
    assert!(exact_mi_dagger(&params, DAGGER_MAX_N + 1, 1, InputLaw::Iud).is_err());
    assert!(exact_mi_star(&params, STAR_MAX_N + 1, 1, InputLaw::Iud).is_err());
    assert!(exact_mi_true(&params, 0, InputLaw::Iud).is_err());
    assert!(star_window_entropies(&params, 12, 4).is_err());
}

#[test]
fn window_entropies_small_cases() {
    // m = 0: the output is the input window, so H(Y) = n and H(Y|X) = 0
    let params = ChannelParams::sdrc(0.2).unwrap();
    let w = star_window_entropies(&params, 5, 0).unwrap();
    assert!((w.h_y - 5.0).abs() < 1e-12);
    assert!(w.h_y_given_x.abs() < 1e-12);
    let w = star_window_entropies(&params, 4, 1).unwrap();
    assert!((w.total_mass - 1.0).abs() < 1e-12);
    assert!(w.h_y <= 4.0 + 1e-12 && w.h_y_given_x >= 0.0 && w.h_y_given_x <= w.h_y);
}

#[test]
fn csv_row_layout() {
    let params = make_params(0.1, 0.2).unwrap();
    let r = exact_mi_star(&params, 3, 1, InputLaw::Iud).unwrap();
    let rec = r.csv_record(&params);
    assert_eq!(rec.len(), ExactMi::CSV_HEADER.len());
    assert_eq!(rec[0], "3");
    assert_eq!(rec[1], "1");
    assert_eq!(rec[2], "Star");
}
