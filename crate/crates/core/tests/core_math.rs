use proptest::prelude::*;
use synchan::core_math::*;

/// `Ei(x) = -∫_{-x}^∞ e^{-s}/s ds` for `x < 0`, by adaptive Simpson on
/// `s = a + u/(1-u)`.
fn ei_quadrature(x: f64) -> f64 {
    let a = -x;
    let f = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let s = a + u / (1.0 - u);
        (-s).exp() / s / (1.0 - u).powi(2)
    };
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(0.0), f(0.5), f(1.0));
    let whole = (fa + 4.0 * fm + fb) / 6.0;
    -simpson(&f, 0.0, 1.0, fa, fm, fb, whole, 1e-14, 50)
}

#[test]
fn h2_endpoints_and_quarter() {
    assert_eq!(h2(0.0), 0.0);
    assert_eq!(h2(1.0), 0.0);
    assert!((h2(0.5) - 1.0).abs() < 1e-15);
    let oracle = -(0.25f64.log2() * 0.25 + 0.75 * 0.75f64.log2());
    assert!((h2(0.25) - 0.811_278_124_459_132_8).abs() < 1e-12);
    assert!((h2(0.25) - oracle).abs() < 1e-15);
}

#[test]
fn binary_entropy_rejects_out_of_range() {
    assert!(binary_entropy(-0.1).is_err());
    assert!(binary_entropy(1.1).is_err());
    assert!(binary_entropy(f64::NAN).is_err());
    assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
}

#[test]
fn binom_small_values() {
    assert_eq!(binom(5, 2), 10.0);
    assert_eq!(binom(7, 0), 1.0);
    assert_eq!(binom(3, 5), 0.0);
}

#[test]
fn binom_matches_pascal_triangle() {
    let mut row = vec![1u128];
    for n in 0..=64u64 {
        for (k, &c) in row.iter().enumerate() {
            assert_eq!(binom(n, k as u64), c as f64, "C({n},{k})");
        }
        let mut next = vec![1u128; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    assert_eq!(binom(10, 5), 252.0);
}

#[test]
fn binom_large_n_relative_error() {
    // C(100, 50) = 100891344545564193334812497256
    let exact = 1.008_913_445_455_641_9e29;
    assert!((binom(100, 50) / exact - 1.0).abs() < 1e-12);
}

#[test]
fn ei_matches_quadrature() {
    for &x in &[-1e-3, -0.1, -0.5, -1.0, -2.0, -3.218_875_824_868_201, -5.0, -6.0, -7.5, -12.0, -30.0] {
        let got = exp_integral_ei(x).unwrap();
        let want = ei_quadrature(x);
        assert!((got - want).abs() < 1e-10, "Ei({x}): {got} vs {want}");
    }
    assert!((exp_integral_ei(-1.0).unwrap() + 0.219_383_934_395_520_3).abs() < 1e-12);
}

#[test]
fn ei_at_two_ln_point_two() {
    // the quadrature oracle gives -0.0098955..., not -0.0101330
    let x = 2.0 * 0.2f64.ln();
    let got = exp_integral_ei(x).unwrap();
    assert!((got - ei_quadrature(x)).abs() < 1e-10);
    assert!((got + 0.009_895_501_31).abs() < 1e-10);
}

#[test]
fn ei_tail_and_domain() {
    assert!(exp_integral_ei(-50.0).unwrap().abs() < 1e-20);
    assert!(exp_integral_ei(0.0).is_err());
    assert!(exp_integral_ei(1.0).is_err());
    let (_, report) = exp_integral_ei_with_report(-1.0).unwrap();
    assert!(report.terms > 0);
}

#[test]
fn golden_section_finds_parabola_peak() {
    let (x, v) = golden_section_max(|t| -(t - 0.3) * (t - 0.3) + 2.0, 0.0, 1.0, 1e-9);
    assert!((x - 0.3).abs() < 1e-6);
    assert!((v - 2.0).abs() < 1e-12);
}

#[test]
fn grid_includes_endpoints() {
    let g = parse_grid("0:0.9:0.01").unwrap();
    assert_eq!(g.len(), 91);
    assert_eq!(g[0], 0.0);
    assert!((g[90] - 0.9).abs() < 1e-12);
    assert!(parse_grid("0:1:0").is_err());
    assert!(parse_grid("bogus").is_err());
}

proptest! {
    #[test]
    fn h2_symmetric(x in 0.0f64..=1.0) {
        prop_assert!((h2(x) - h2(1.0 - x)).abs() < 1e-12);
    }

    #[test]
    fn h2_concave(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        prop_assert!(h2(0.5 * (a + b)) + 1e-12 >= 0.5 * (h2(a) + h2(b)));
    }

    #[test]
    fn h2_in_unit_interval(x in 0.0f64..=1.0) {
        let v = h2(x);
        prop_assert!((0.0..=1.0 + 1e-15).contains(&v));
    }

    #[test]
    fn pascal_identity(n in 1u64..=64, k in 1u64..=64) {
        let lhs = binom(n, k);
        let rhs = binom(n - 1, k - 1) + binom(n - 1, k);
        if lhs < 2f64.powi(53) {
            prop_assert_eq!(lhs, rhs);
        } else {
            // f64 cannot hold these exactly; the integers agree (see the triangle test)
            prop_assert!((lhs - rhs).abs() <= 2.0 * f64::EPSILON * lhs);
        }
    }

    // Ei' = e^x / x < 0 on the negative axis
    #[test]
    fn ei_decreasing(a in -40.0f64..-1e-3, d in 1e-3f64..5.0) {
        let b = (a + d).min(-1e-4);
        prop_assume!(b > a);
        prop_assert!(exp_integral_ei(a).unwrap() > exp_integral_ei(b).unwrap());
    }
}
