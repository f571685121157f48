//! Tail probabilities in log space: binomial upper tail, its geometric
//! interpolation in the threshold, the standard normal tail, the
//! even-degree chi-squared tail and Fisher's combination.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A probability together with its natural logarithm, which stays usable
/// after the value itself underflows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailResult {
    pub value: f64,
    pub log_value: f64,
}

impl TailResult {
    pub const ONE: TailResult = TailResult {
        value: 1.0,
        log_value: 0.0,
    };
    pub const ZERO: TailResult = TailResult {
        value: 0.0,
        log_value: f64::NEG_INFINITY,
    };

    pub fn from_log(log_value: f64) -> Self {
        let log_value = log_value.min(0.0);
        Self {
            value: log_value.exp(),
            log_value,
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("{name} = {p} outside [0, 1]")));
    }
    Ok(())
}

/// `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)`, the Stirling remainder.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        // Exact log-factorial for small integers.
        let mut lf = KahanSum::default();
        let mut i = 2.0;
        while i <= n {
            lf.add(f64::ln(i));
            i += 1.0;
        }
        return lf.total() - (n + 0.5) * n.ln() + n - 0.5 * (2.0 * PI).ln();
    }
    let nn = n * n;
    if n > 500.0 {
        return (S0 - S1 / nn) / n;
    }
    if n > 80.0 {
        return (S0 - (S1 - S2 / nn) / nn) / n;
    }
    if n > 35.0 {
        return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n;
    }
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// Deviance term `x ln(x / np) + np - x`, accurate when `x ~ np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        return s;
    }
    x * (x / np).ln() + np - x
}

/// `ln C(n,x) + x ln p + (n-x) ln q` via the saddle-point expansion, which
/// keeps full relative accuracy for large `n`.
pub(crate) fn log_binom_pmf(x: u64, n: u64, p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if x == 0 {
        if n == 0 {
            return 0.0;
        }
        return if p < 0.1 { nf * (-p).ln_1p() } else { nf * q.ln() };
    }
    if x == n {
        return if q < 0.1 { nf * (-q).ln_1p() } else { nf * p.ln() };
    }
    if x > n {
        return f64::NEG_INFINITY;
    }
    let xf = x as f64;
    let lc = stirlerr(nf) - stirlerr(xf) - stirlerr(nf - xf) - bd0(xf, nf * p) - bd0(nf - xf, nf * q);
    let lf = (2.0 * PI).ln() + xf.ln() + (-xf / nf).ln_1p();
    lc - 0.5 * lf
}

fn log_binom_tail_raw(n: u64, k: u64, gamma: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k > n || gamma == 0.0 {
        return f64::NEG_INFINITY;
    }
    if gamma == 1.0 {
        return 0.0;
    }
    let q = 1.0 - gamma;
    let odds = gamma / q;
    let mode = ((n + 1) as f64 * gamma).floor() as u64;
    if k > mode {
        // Terms decrease from k upwards.
        let first = log_binom_pmf(k, n, gamma, q);
        let mut acc = KahanSum::default();
        acc.add(1.0);
        let mut term = 1.0;
        for i in k..n {
            term *= (n - i) as f64 / (i + 1) as f64 * odds;
            acc.add(term);
            if term < 1e-17 * acc.total() {
                break;
            }
        }
        first + acc.total().ln()
    } else {
        // Lower tail P[X < k], with terms decreasing from k-1 downwards.
        let first = log_binom_pmf(k - 1, n, gamma, q);
        let mut acc = KahanSum::default();
        acc.add(1.0);
        let mut term = 1.0;
        let mut i = k - 1;
        while i > 0 {
            term *= i as f64 / (n - i + 1) as f64 / odds;
            acc.add(term);
            if term < 1e-17 * acc.total() {
                break;
            }
            i -= 1;
        }
        let lower = (first + acc.total().ln()).exp();
        (-lower.min(1.0)).ln_1p()
    }
}

/// `P[Bin(n, gamma) >= k]`, i.e. `sum_{i=k}^{n} C(n,i) gamma^i (1-gamma)^(n-i)`.
///
/// Returns exactly 1 for `k = 0` and exactly 0 for `k > n`.
pub fn binom_tail(n: u64, k: u64, gamma: f64) -> Result<TailResult> {
    check_probability("gamma", gamma)?;
    if k == 0 {
        return Ok(TailResult::ONE);
    }
    if k > n {
        return Ok(TailResult::ZERO);
    }
    Ok(TailResult::from_log(log_binom_tail_raw(n, k, gamma)))
}

/// Geometric interpolation of [`binom_tail`] between the integers around
/// `y`: `P(floor y)^(1 - frac) * P(ceil y)^frac`.
pub fn interp_binom_tail(n: u64, y: f64, gamma: f64) -> Result<TailResult> {
    check_probability("gamma", gamma)?;
    if !(y >= 0.0 && y <= n as f64) {
        return Err(domain(format!("threshold {y} outside [0, {n}]")));
    }
    let lo = y.floor();
    let frac = y - lo;
    let lo = lo as u64;
    if frac == 0.0 {
        return binom_tail(n, lo, gamma);
    }
    let log_lo = log_binom_tail_raw(n, lo, gamma);
    let log_hi = log_binom_tail_raw(n, lo + 1, gamma);
    if log_hi == f64::NEG_INFINITY {
        return Ok(TailResult::ZERO);
    }
    Ok(TailResult::from_log((1.0 - frac) * log_lo + frac * log_hi))
}

/// Upper tail of the standard normal distribution.
pub fn gaussian_tail_q(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// `P[chi^2_{2n} >= 2x] = e^{-x} sum_{i<n} x^i / i!`.
pub fn chi2_tail_even(n_pairs: u64, x: f64) -> Result<f64> {
    if n_pairs == 0 {
        return Err(domain("need at least one pair of degrees of freedom"));
    }
    if !(x >= 0.0) {
        return Err(domain(format!("chi-squared half-statistic {x} must be >= 0")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let lx = x.ln();
    let mut log_terms = Vec::with_capacity(n_pairs as usize);
    let mut log_fact = 0.0;
    for i in 0..n_pairs {
        if i > 0 {
            log_fact += (i as f64).ln();
        }
        log_terms.push(i as f64 * lx - log_fact - x);
    }
    Ok(log_sum_exp(&log_terms).exp().min(1.0))
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let mut acc = KahanSum::default();
    for t in terms {
        acc.add((t - max).exp());
    }
    max + acc.total().ln()
}

/// Outcome of Fisher's combination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    pub p_value: f64,
    /// `-2 sum ln p_i`.
    pub statistic: f64,
    pub dof: u64,
    /// Set when some input was exactly zero; the combination is then 0.
    pub zero_input: bool,
}

/// Fisher's method: `P[chi^2_{2k} >= -2 sum ln p_i]` for `k` independent
/// P-values.
pub fn fisher_combine(pvalues: &[f64]) -> Result<FisherResult> {
    if pvalues.is_empty() {
        return Err(domain("no P-values to combine"));
    }
    if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(domain(format!("P-value {p} outside (0, 1]")));
    }
    let k = pvalues.len() as u64;
    if pvalues.contains(&0.0) {
        return Ok(FisherResult {
            p_value: 0.0,
            statistic: f64::INFINITY,
            dof: 2 * k,
            zero_input: true,
        });
    }
    let mut sum = KahanSum::default();
    for p in pvalues {
        sum.add(-p.ln());
    }
    let x = sum.total();
    let p_value = if k == 1 { pvalues[0] } else { chi2_tail_even(k, x)? };
    Ok(FisherResult {
        p_value,
        statistic: 2.0 * x,
        dof: 2 * k,
        zero_input: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs())
        }
    }

    /// Exhaustive enumeration over all 2^n outcome strings.
    fn enumerated_tail(n: u32, k: u32, g: f64) -> f64 {
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            let w = mask.count_ones();
            if w >= k {
                total += g.powi(w as i32) * (1.0 - g).powi((n - w) as i32);
            }
        }
        total
    }

    #[test]
    fn binom_tail_examples() {
        assert_eq!(binom_tail(2, 1, 0.5).unwrap().value, 0.75);
        assert_eq!(binom_tail(10, 11, 0.3).unwrap(), TailResult::ZERO);
        assert_eq!(binom_tail(10, 0, 0.3).unwrap(), TailResult::ONE);
        assert!(binom_tail(10, 2, 1.5).is_err());
        assert!(binom_tail(10, 2, -0.1).is_err());
    }

    #[test]
    fn binom_tail_gamma_extremes() {
        assert_eq!(binom_tail(10, 3, 0.0).unwrap().value, 0.0);
        assert_eq!(binom_tail(10, 10, 1.0).unwrap().value, 1.0);
    }

    #[test]
    fn binom_tail_matches_enumeration() {
        for n in 0..=12u32 {
            for k in 0..=n + 1 {
                for g in [0.0, 0.1, 0.25, 0.5, 0.75, 0.7500108, 0.93, 1.0] {
                    let exact = enumerated_tail(n, k, g);
                    let got = binom_tail(n as u64, k as u64, g).unwrap().value;
                    assert!(
                        rel(got, exact) <= 1e-12,
                        "n={n} k={k} g={g}: {got} vs {exact}"
                    );
                }
            }
        }
    }

    // Reference values from 50-digit evaluation of the defining sum.
    #[test]
    fn binom_tail_large_n_reference() {
        let cases: &[(u64, u64, f64, f64)] = &[
            (245, 196, 0.750_010_799_883_36, 3.910_997_241_371_418e-2),
            (10_000, 7_600, 0.75, 1.054_746_752_771_739e-2),
            (10_000, 8_000, 0.75, 1.543_722_035_651_269e-32),
            (1_000_000, 500_500, 0.5, 1.588_973_456_816_528e-1),
            (1_000_000, 510_000, 0.5, 2.772_181_643_849_612e-89),
            (100_000, 200, 0.001, 8.887_059_167_655_865e-19),
        ];
        for &(n, k, g, want) in cases {
            let got = binom_tail(n, k, g).unwrap().value;
            assert!(rel(got, want) <= 1e-12, "n={n} k={k}: {got:e} vs {want:e}");
        }
    }

    #[test]
    fn log_value_survives_underflow() {
        let t = binom_tail(100_000, 1_000, 0.001).unwrap();
        assert_eq!(t.value, 0.0);
        assert!((t.log_value - -1410.915_012_902_627).abs() < 1e-9);
    }

    #[test]
    fn interp_examples() {
        assert_eq!(
            interp_binom_tail(10, 4.0, 0.5).unwrap(),
            binom_tail(10, 4, 0.5).unwrap()
        );
        let v = interp_binom_tail(2, 0.5, 0.5).unwrap().value;
        assert!((v - 0.75f64.sqrt()).abs() < 1e-15);
        // Endpoints by direct summation.
        let p3 = enumerated_tail(10, 3, 0.2);
        let p4 = enumerated_tail(10, 4, 0.2);
        let want = p3.powf(0.7) * p4.powf(0.3);
        let got = interp_binom_tail(10, 3.3, 0.2).unwrap().value;
        assert!(rel(got, want) < 1e-12);
        assert!(interp_binom_tail(10, 10.5, 0.2).is_err());
        assert!(interp_binom_tail(10, -0.5, 0.2).is_err());
    }

    #[test]
    fn gaussian_q_examples() {
        assert_eq!(gaussian_tail_q(0.0), 0.5);
        assert!(rel(gaussian_tail_q(1.6448536269514722), 0.05) < 1e-12);
        assert!((gaussian_tail_q(-8.0) - 1.0).abs() < 1e-14);
        // 50-digit references.
        assert!(rel(gaussian_tail_q(8.0), 6.220960574271784e-16) < 1e-12);
        assert!(rel(gaussian_tail_q(3.0), 1.3498980316300946e-3) < 1e-12);
    }

    #[test]
    fn chi2_examples() {
        for x in [0.1, 1.0, 7.5] {
            assert!(rel(chi2_tail_even(1, x).unwrap(), (-x).exp()) < 1e-15);
        }
        assert_eq!(chi2_tail_even(7, 0.0).unwrap(), 1.0);
        assert!((chi2_tail_even(2, 4.605_170_185_988_091).unwrap() - 0.056_051_701_859_880_9).abs() < 1e-12);
        assert!(chi2_tail_even(2, -1.0).is_err());
        assert!(chi2_tail_even(0, 1.0).is_err());
    }

    #[test]
    fn fisher_examples() {
        assert_eq!(fisher_combine(&[0.3]).unwrap().p_value, 0.3);
        assert_eq!(fisher_combine(&[1.0, 1.0, 1.0]).unwrap().p_value, 1.0);
        let r = fisher_combine(&[0.1, 0.1]).unwrap();
        assert!((r.p_value - 0.0560517).abs() < 1e-7);
        assert_eq!(r.dof, 4);
        let z = fisher_combine(&[0.0, 0.5]).unwrap();
        assert!(z.zero_input);
        assert_eq!(z.p_value, 0.0);
        assert!(fisher_combine(&[1.2]).is_err());
        assert!(fisher_combine(&[]).is_err());
    }

    proptest! {
        #[test]
        fn tail_monotone_in_threshold(n in 1u64..400, k in 0u64..400, g in 0.0f64..1.0) {
            let k = k.min(n);
            let a = binom_tail(n, k, g).unwrap().value;
            let b = binom_tail(n, k + 1, g).unwrap().value;
            prop_assert!(b <= a * (1.0 + 1e-13));
        }

        #[test]
        fn tail_monotone_in_gamma(n in 1u64..400, k in 0u64..400, g in 0.0f64..0.99, dg in 0.0f64..0.01) {
            let k = k.min(n);
            let a = binom_tail(n, k, g).unwrap().value;
            let b = binom_tail(n, k, g + dg).unwrap().value;
            prop_assert!(b >= a * (1.0 - 1e-13));
        }

        #[test]
        fn interpolation_is_continuous(n in 2u64..300, k in 1u64..300, g in 0.05f64..0.95) {
            let k = k.min(n - 1);
            let at = binom_tail(n, k, g).unwrap().value;
            let below = interp_binom_tail(n, k as f64 - 1e-9, g).unwrap().value;
            let above = interp_binom_tail(n, k as f64 + 1e-9, g).unwrap().value;
            prop_assert!(rel(below, at) < 1e-6);
            prop_assert!(rel(above, at) < 1e-6);
        }

        #[test]
        fn fisher_more_copies_lower(p in 1e-6f64..0.28, k in 1usize..12) {
            let a = fisher_combine(&vec![p; k]).unwrap().p_value;
            let b = fisher_combine(&vec![p; k + 1]).unwrap().p_value;
            prop_assert!(b <= a * (1.0 + 1e-12));
        }
    }
}
