//! Invariants across modules, checked against independent computations.

use bellcert::{
    azuma_pvalue, beta_win, bentkus_pvalue_total, binom_tail, chsh_beta_win, exact_tail_iid,
    fisher_combine, games, interp_binom_tail, mcdiarmid_pvalue, winlose_pvalue, AzumaVariant,
    BiasBound, SweepContext,
};
use proptest::prelude::*;

/// Binomial tail by direct summation of `C(n, k) g^k (1-g)^(n-k)` in log space.
fn direct_tail(n: u64, c: u64, g: f64) -> f64 {
    let ln_fact = |m: u64| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    (c..=n)
        .map(|k| (ln_fact(n) - ln_fact(k) - ln_fact(n - k) + k as f64 * g.ln() + (n - k) as f64 * (1.0 - g).ln()).exp())
        .sum()
}

#[test]
fn tail_matches_direct_sum_for_moderate_n() {
    for n in [50u64, 200, 1000] {
        for c in (0..=n).step_by((n / 10) as usize) {
            let a = binom_tail(n, c, 0.75).unwrap().value;
            let b = direct_tail(n, c, 0.75);
            assert!((a - b).abs() <= 1e-11 * b.max(1e-300) + 1e-300, "n={n} c={c}: {a} vs {b}");
        }
    }
}

#[test]
fn extreme_tails_stay_in_log_space() {
    let t = binom_tail(100_000, 100_000, 0.75).unwrap();
    assert_eq!(t.value, 0.0);
    assert!((t.log_value - 100_000.0 * 0.75f64.ln()).abs() < 1e-6);
}

#[test]
fn bias_only_raises_the_winning_probability() {
    let none = beta_win(&games::chsh(), BiasBound::NONE).unwrap().beta_win;
    let some = chsh_beta_win(BiasBound::new(0.01, 0.02).unwrap()).unwrap().beta_win;
    assert_eq!(none, 0.75);
    assert!((some - (0.75 + 0.015 - 0.0002)).abs() < 1e-12);
}

#[test]
fn enumerated_chsh_agrees_with_closed_form_under_bias() {
    let bias = BiasBound::new(0.03, 0.01).unwrap();
    let closed = chsh_beta_win(bias).unwrap().beta_win;
    let enumerated = bellcert::beta_win_optimize(&games::chsh(), bias).unwrap().beta_win;
    assert!((closed - enumerated).abs() < 1e-12, "{closed} vs {enumerated}");
}

#[test]
fn dp_oracle_with_c_zero_is_one() {
    assert_eq!(exact_tail_iid(0.75, 20, 0).unwrap(), 1.0);
}

proptest! {
    #[test]
    fn tail_is_monotone_in_c(n in 1u64..2000, frac in 0.0f64..1.0, g in 0.05f64..0.95) {
        let c = ((n as f64) * frac) as u64;
        let a = binom_tail(n, c, g).unwrap().value;
        let b = binom_tail(n, c + 1, g).unwrap().value;
        prop_assert!(b <= a * (1.0 + 1e-12));
    }

    #[test]
    fn interpolation_hits_integers(n in 1u64..500, frac in 0.0f64..1.0) {
        let c = ((n as f64) * frac) as u64;
        let a = interp_binom_tail(n, c as f64, 0.75).unwrap().value;
        let b = binom_tail(n, c, 0.75).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-13 * b.max(1e-300));
    }

    #[test]
    fn pvalues_are_probabilities(n in 1u64..5000, frac in 0.0f64..1.0) {
        let c = ((n as f64) * frac) as u64;
        let bound = beta_win(&games::chsh(), BiasBound::NONE).unwrap();
        let p = winlose_pvalue(n, c, &bound).unwrap().p_value;
        prop_assert!((0.0..=1.0).contains(&p));
    }

    // Below a few hundred trials the factor e in Bentkus can outweigh its
    // sharper tail, so only McDiarmid <= Azuma holds there.
    #[test]
    fn general_bounds_order_on_cglmp(n in 500u64..5000, mean in 2.1f64..3.5) {
        let ctx = SweepContext::new(&games::cglmp(3).unwrap(), BiasBound::NONE).unwrap();
        let params = ctx.params();
        let total = mean * n as f64;
        let b = bentkus_pvalue_total(params, total, n).unwrap().p_value;
        let m = mcdiarmid_pvalue(params, total, n).unwrap().p_value;
        let a = azuma_pvalue(params, total, n, AzumaVariant::Symmetric).unwrap().p_value;
        prop_assert!(m <= a * (1.0 + 1e-12));
        prop_assert!(b <= m * (1.0 + 1e-12));
    }

    #[test]
    fn fisher_is_symmetric(p in 1e-9f64..1.0, q in 1e-9f64..1.0) {
        let a = fisher_combine(&[p, q]).unwrap().p_value;
        let b = fisher_combine(&[q, p]).unwrap().p_value;
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=1.0).contains(&a));
    }
}
