//! P-value bounds for games with general scores: Bentkus' inequality and the
//! McDiarmid and Azuma-Hoeffding comparators.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::game::{Affine, BiasBound, GameSpec};
use crate::report::{BoundParams, Method, PValueReport};
use crate::tails::{interp_binom_tail, KahanSum};
use crate::winlose::max_expected_value;

/// Score range and local expectation bounds of a general game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralGameParams {
    pub s_min: f64,
    pub s_max: f64,
    pub beta_max: f64,
    pub beta_min: f64,
    /// `(beta_max - s_min) / (s_max - s_min)`.
    pub gamma_hat: f64,
    /// Map taking `[s_min, s_max]` onto `[0, 1]`.
    pub affine: Affine,
    pub bias: BiasBound,
}

impl GeneralGameParams {
    /// Params from explicit values, bypassing the game.
    pub fn new(s_min: f64, s_max: f64, beta_max: f64, beta_min: f64) -> Result<Self> {
        Self::build(s_min, s_max, beta_max, beta_min, BiasBound::NONE)
    }

    fn build(s_min: f64, s_max: f64, beta_max: f64, beta_min: f64, bias: BiasBound) -> Result<Self> {
        if !(s_min.is_finite() && s_max.is_finite() && s_min < s_max) {
            return Err(domain(format!("score range [{s_min}, {s_max}] is empty")));
        }
        if !(s_min <= beta_min && beta_min <= beta_max && beta_max <= s_max) {
            return Err(domain(format!(
                "need s_min <= beta_min <= beta_max <= s_max, got {s_min}, {beta_min}, {beta_max}, {s_max}"
            )));
        }
        let width = s_max - s_min;
        Ok(Self {
            s_min,
            s_max,
            beta_max,
            beta_min,
            gamma_hat: ((beta_max - s_min) / width).clamp(0.0, 1.0),
            affine: Affine { scale: 1.0 / width, offset: -s_min / width },
            bias,
        })
    }

    pub fn width(&self) -> f64 {
        self.s_max - self.s_min
    }

    fn check_score(&self, s: f64) -> Result<()> {
        let slack = 1e-12 * self.width().max(self.s_min.abs()).max(self.s_max.abs());
        if s.is_finite() && s >= self.s_min - slack && s <= self.s_max + slack {
            Ok(())
        } else {
            Err(domain(format!("score {s} outside [{}, {}]", self.s_min, self.s_max)))
        }
    }
}

/// Score range over all tags, widened for biased inputs.
///
/// With bias the range covers `s^{xy}_{ab} / q(x, y)` for every input
/// distribution `q` in the box, where `s^{xy}_{ab} = p(x, y) s_{ab|xy}`.
pub fn score_range(spec: &GameSpec, bias: BiasBound) -> Result<(f64, f64)> {
    if bias.is_zero() {
        return Ok(spec.score_range());
    }
    let boxes = bias.site_boxes(spec)?;
    let ranges: Vec<Vec<(f64, f64)>> = boxes.iter().map(|b| b.coordinate_ranges()).collect();
    let dims = spec.dims();
    let n_out = dims.num_output_tuples();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &tag in spec.tags() {
        let coef = spec.bell_coefficients(tag).expect("declared tag");
        for x in 0..dims.num_input_tuples() {
            let (q_lo, q_hi) = dims
                .input_tuple(x)
                .iter()
                .enumerate()
                .fold((1.0, 1.0), |(a, b), (site, &xi)| {
                    (a * ranges[site][xi].0, b * ranges[site][xi].1)
                });
            for &c in &coef[x * n_out..(x + 1) * n_out] {
                if c == 0.0 {
                    lo = lo.min(0.0);
                    hi = hi.max(0.0);
                    continue;
                }
                if q_lo <= 0.0 {
                    return Err(domain(format!(
                        "input tuple {:?} can have probability 0 within the bias box, so scores are unbounded",
                        dims.input_tuple(x)
                    )));
                }
                let (u, v) = (c / q_lo, c / q_hi);
                lo = lo.min(u.min(v));
                hi = hi.max(u.max(v));
            }
        }
    }
    Ok((lo, hi))
}

/// Params for `spec` with user-supplied expectation bounds.
pub fn game_params(spec: &GameSpec, bias: BiasBound, beta_max: f64, beta_min: f64) -> Result<GeneralGameParams> {
    let (s_min, s_max) = score_range(spec, bias)?;
    GeneralGameParams::build(s_min, s_max, beta_max, beta_min, bias)
}

/// Largest and smallest expected score of a local strategy, over tags and
/// input distributions in the bias box.
pub fn local_score_bounds(spec: &GameSpec, bias: BiasBound) -> Result<(f64, f64)> {
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for &tag in spec.tags() {
        let table = spec.score_table(tag).expect("declared tag");
        hi = hi.max(max_expected_value(spec, table, bias)?.value);
        let negated: Vec<f64> = table.iter().map(|s| -s).collect();
        lo = lo.min(-max_expected_value(spec, &negated, bias)?.value);
    }
    Ok((hi, lo))
}

/// [`game_params`] with the expectation bounds computed by enumeration.
pub fn game_params_auto(spec: &GameSpec, bias: BiasBound) -> Result<GeneralGameParams> {
    let (s_min, s_max) = score_range(spec, bias)?;
    let (beta_max, beta_min) = local_score_bounds(spec, bias)?;
    GeneralGameParams::build(
        s_min,
        s_max,
        beta_max.clamp(s_min, s_max),
        beta_min.clamp(s_min, s_max),
        bias,
    )
}

fn report(method: Method, n: u64, statistic: f64, params: &GeneralGameParams, raw: f64) -> PValueReport {
    PValueReport::new(method, n, statistic, BoundParams::General(params.clone()), raw)
}

/// Bentkus' bound `e * P(n, delta; gamma_hat)` with
/// `delta = sum_i (c_i - s_min) / (s_max - s_min)`.
pub fn bentkus_pvalue(params: &GeneralGameParams, per_trial_scores: &[f64]) -> Result<PValueReport> {
    let mut delta = KahanSum::default();
    for &s in per_trial_scores {
        params.check_score(s)?;
        delta.add((s - params.s_min) / params.width());
    }
    bentkus_from_delta(params, per_trial_scores.len() as u64, delta.total())
}

/// [`bentkus_pvalue`] from a score total instead of per-trial scores.
pub fn bentkus_pvalue_total(params: &GeneralGameParams, total: f64, n: u64) -> Result<PValueReport> {
    check_mean(params, total, n)?;
    bentkus_from_delta(params, n, (total - n as f64 * params.s_min) / params.width())
}

fn bentkus_from_delta(params: &GeneralGameParams, n: u64, delta: f64) -> Result<PValueReport> {
    if n == 0 {
        return Ok(report(Method::Bentkus, 0, 0.0, params, 1.0));
    }
    let delta = delta.clamp(0.0, n as f64);
    let tail = interp_binom_tail(n, delta, params.gamma_hat)?;
    Ok(report(Method::Bentkus, n, delta, params, E * tail.value))
}

fn check_mean(params: &GeneralGameParams, total: f64, n: u64) -> Result<()> {
    if n == 0 {
        return if total == 0.0 { Ok(()) } else { Err(invalid("nonzero total over zero trials")) };
    }
    params.check_score(total / n as f64)
}

/// McDiarmid's bound, `exp(-n D(m || gamma_hat))` in normalized form, with
/// `m` the normalized mean score.
pub fn mcdiarmid_pvalue(params: &GeneralGameParams, c: f64, n: u64) -> Result<PValueReport> {
    check_mean(params, c, n)?;
    if n == 0 {
        return Ok(report(Method::Mcdiarmid, 0, c, params, 1.0));
    }
    let mean = (c / n as f64).clamp(params.s_min, params.s_max);
    if mean < params.beta_max {
        return Ok(PValueReport::no_evidence(Method::Mcdiarmid, n, c, BoundParams::General(params.clone())));
    }
    let w = params.width();
    let upper = (params.s_max - mean) / w;
    let lower = (mean - params.s_min) / w;
    let term = |weight: f64, num: f64, den: f64| if weight == 0.0 { 0.0 } else { weight * (num / den).ln() };
    let log = n as f64
        * (term(upper, params.s_max - params.beta_max, params.s_max - mean)
            + term(lower, params.beta_max - params.s_min, mean - params.s_min));
    Ok(report(Method::Mcdiarmid, n, c, params, log.min(0.0).exp()))
}

/// Which increment bound `d` the Azuma-Hoeffding bound uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AzumaVariant {
    /// `d = max(beta_max - s_min, s_max - beta_max)`, the largest possible
    /// deviation of a score from `beta_max`.
    #[default]
    Symmetric,
    /// `d = max(beta_max - s_min, s_min - beta_min)`, taken literally.
    Printed,
}

impl AzumaVariant {
    pub fn d(&self, params: &GeneralGameParams) -> f64 {
        match self {
            AzumaVariant::Symmetric => {
                (params.beta_max - params.s_min).max(params.s_max - params.beta_max)
            }
            AzumaVariant::Printed => {
                (params.beta_max - params.s_min).max(params.s_min - params.beta_min)
            }
        }
    }
}

/// Azuma-Hoeffding bound `exp(-n (c/n - beta_max)^2 / (2 d^2))`.
pub fn azuma_pvalue(params: &GeneralGameParams, c: f64, n: u64, variant: AzumaVariant) -> Result<PValueReport> {
    check_mean(params, c, n)?;
    if n == 0 {
        return Ok(report(Method::Azuma, 0, c, params, 1.0));
    }
    let mean = c / n as f64;
    if mean < params.beta_max {
        return Ok(PValueReport::no_evidence(Method::Azuma, n, c, BoundParams::General(params.clone())));
    }
    let d = variant.d(params);
    if !(d > 0.0) {
        return Err(domain(format!("Azuma increment bound d = {d} is not positive")));
    }
    let gap = mean - params.beta_max;
    Ok(report(Method::Azuma, n, c, params, (-(n as f64) * gap * gap / (2.0 * d * d)).exp()))
}
