//! Bounds evaluated over grids of trial counts and average scores, with
//! fractional win counts, and the smallest `n` reaching a target P-value.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::game::{BiasBound, GameKind, GameSpec};
use crate::general::{
    azuma_pvalue, bentkus_pvalue_total, game_params_auto, mcdiarmid_pvalue, AzumaVariant,
    GeneralGameParams,
};
use crate::report::{BoundParams, Method, PValueReport};
use crate::tails::{gaussian_tail_q, interp_binom_tail};
use crate::winlose::{beta_win, max_expected_value, WinLoseBound};

pub const GRID_CAP: u64 = 1_000_000;

/// What the second grid axis measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// CHSH correlator `S = 8 (c/n - 1/2)`; win/lose games only.
    S,
    /// Average score per trial in the game's own units.
    Mean,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::S => "s",
            Axis::Mean => "mean",
        }
    }
}

/// A Cartesian grid of trial counts and axis values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: Vec<u64>,
    pub axis: Axis,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn points(&self) -> u64 {
        self.n.len() as u64 * self.values.len() as u64
    }
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    let bad = |t: &str| invalid(format!("bad grid value {t:?}"));
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let fields: Vec<&str> = part.split(':').collect();
        match fields.as_slice() {
            [v] => out.push(v.parse::<f64>().map_err(|_| bad(part))?),
            [a, b, step] => {
                let (a, b, step): (f64, f64, f64) = (
                    a.parse().map_err(|_| bad(part))?,
                    b.parse().map_err(|_| bad(part))?,
                    step.parse().map_err(|_| bad(part))?,
                );
                if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
                    return Err(bad(part));
                }
                let count = ((b - a) / step + 1e-9).floor() as u64 + 1;
                if count > GRID_CAP {
                    return Err(Error::CapExceeded { requested: count as u128, cap: GRID_CAP as u128 });
                }
                out.extend((0..count).map(|i| a + i as f64 * step));
            }
            _ => return Err(bad(part)),
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(invalid("grid values must be finite"));
    }
    Ok(out)
}

impl FromStr for Grid {
    type Err = Error;

    /// `n=245;s=2.2:3.0:0.05` or `n=100,500;mean=2.5`. Ranges are
    /// `start:stop:step` with `stop` included. `n` may be omitted for
    /// threshold searches.
    fn from_str(text: &str) -> Result<Self> {
        let (mut n, mut axis) = (None, None);
        for field in text.split(';').map(str::trim).filter(|f| !f.is_empty()) {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| invalid(format!("grid field {field:?} lacks '='")))?;
            match key.trim() {
                "n" => {
                    let vals = parse_values(value)?;
                    if vals.iter().any(|&v| v < 1.0 || v.fract() != 0.0 || v > u64::MAX as f64) {
                        return Err(invalid("grid n values must be positive integers"));
                    }
                    n = Some(vals.into_iter().map(|v| v as u64).collect());
                }
                "s" => axis = Some((Axis::S, parse_values(value)?)),
                "mean" => axis = Some((Axis::Mean, parse_values(value)?)),
                other => return Err(invalid(format!("unknown grid key {other:?}"))),
            }
        }
        let n: Vec<u64> = n.unwrap_or_default();
        let (axis, values) = axis.ok_or_else(|| invalid("grid needs an s or mean field"))?;
        let grid = Grid { n, axis, values };
        if grid.points() > GRID_CAP {
            return Err(Error::CapExceeded { requested: grid.points() as u128, cap: GRID_CAP as u128 });
        }
        Ok(grid)
    }
}

/// Everything needed to evaluate bounds for one game.
#[derive(Clone, Debug)]
pub struct SweepContext {
    kind: GameKind,
    /// Score range of a win/lose game, mapping scores to wins.
    score_range: (f64, f64),
    winlose: Option<WinLoseBound>,
    /// Params on the win fraction for win/lose games, on scores otherwise.
    params: GeneralGameParams,
    pub azuma: AzumaVariant,
}

impl SweepContext {
    pub fn new(spec: &GameSpec, bias: BiasBound) -> Result<Self> {
        match spec.kind() {
            GameKind::WinLose => {
                let bound = beta_win(spec, bias)?;
                let mut losing = Vec::new();
                let (_, s_max) = spec.score_range();
                for &tag in spec.tags() {
                    let table = spec.score_table(tag).expect("declared tag");
                    let neg: Vec<f64> = table.iter().map(|&s| -f64::from(s >= s_max - 1e-12)).collect();
                    losing.push(-max_expected_value(spec, &neg, bias)?.value);
                }
                let beta_min = losing.into_iter().fold(1.0, f64::min).min(bound.beta_win);
                Ok(Self::winlose(bound, spec.score_range(), beta_min)?)
            }
            GameKind::General => Ok(Self {
                kind: GameKind::General,
                score_range: spec.score_range(),
                winlose: None,
                params: game_params_auto(spec, bias)?,
                azuma: AzumaVariant::Symmetric,
            }),
        }
    }

    /// Context for a win/lose game from a known bound.
    pub fn winlose(bound: WinLoseBound, score_range: (f64, f64), beta_min: f64) -> Result<Self> {
        Ok(Self {
            kind: GameKind::WinLose,
            score_range,
            params: GeneralGameParams::new(0.0, 1.0, bound.beta_win, beta_min.min(bound.beta_win))?,
            winlose: Some(bound),
            azuma: AzumaVariant::Symmetric,
        })
    }

    /// Context for a general game from known params.
    pub fn general(params: GeneralGameParams) -> Self {
        Self {
            kind: GameKind::General,
            score_range: (params.s_min, params.s_max),
            params,
            winlose: None,
            azuma: AzumaVariant::Symmetric,
        }
    }

    pub fn kind(&self) -> GameKind {
        self.kind
    }

    pub fn params(&self) -> &GeneralGameParams {
        &self.params
    }

    pub fn winlose_bound(&self) -> Option<&WinLoseBound> {
        self.winlose.as_ref()
    }

    /// Methods that apply to this game.
    pub fn methods(&self) -> Vec<Method> {
        match self.kind {
            GameKind::WinLose => vec![Method::Binomial, Method::Bentkus, Method::Mcdiarmid, Method::Azuma],
            GameKind::General => vec![Method::Bentkus, Method::Mcdiarmid, Method::Azuma],
        }
    }

    /// Per-trial statistic in the units the bounds work in: win fraction for
    /// win/lose games, score for general ones.
    fn statistic(&self, axis: Axis, value: f64) -> Result<f64> {
        match (axis, self.kind) {
            (Axis::S, GameKind::WinLose) => {
                if !(-4.0..=4.0).contains(&value) {
                    return Err(domain(format!("CHSH value {value} outside [-4, 4]")));
                }
                Ok((value + 4.0) / 8.0)
            }
            (Axis::S, GameKind::General) => Err(invalid("the s axis needs a win/lose game; use mean")),
            (Axis::Mean, GameKind::WinLose) => {
                let (lo, hi) = self.score_range;
                Ok((value - lo) / (hi - lo))
            }
            (Axis::Mean, GameKind::General) => Ok(value),
        }
    }

    /// One bound at `n` trials and average `value` on `axis`.
    pub fn evaluate(&self, method: Method, n: u64, axis: Axis, value: f64) -> Result<PValueReport> {
        let m = self.statistic(axis, value)?;
        if !(m >= self.params.s_min && m <= self.params.s_max) {
            return Err(domain(format!("average {value} outside the score range")));
        }
        let total = m * n as f64;
        match method {
            Method::Binomial => {
                let bound = self.winlose.as_ref().ok_or_else(|| {
                    Error::Precondition("the binomial bound needs a win/lose game".into())
                })?;
                let p = interp_binom_tail(n, total.min(n as f64), bound.beta_win)?.value;
                Ok(PValueReport::new(method, n, total, BoundParams::WinLose(bound.clone()), p))
            }
            Method::Bentkus => bentkus_pvalue_total(&self.params, total, n),
            Method::Mcdiarmid => mcdiarmid_pvalue(&self.params, total, n),
            Method::Azuma => azuma_pvalue(&self.params, total, n, self.azuma),
            Method::GaussianNonrigorous => {
                let bound = self.winlose.as_ref().ok_or_else(|| {
                    Error::Precondition("the normal approximation needs a win/lose game".into())
                })?;
                let b = bound.beta_win;
                let params = BoundParams::WinLose(bound.clone());
                let mean = n as f64 * b;
                if !(total > mean) {
                    let mut r = PValueReport::no_evidence(method, n, total, params);
                    r.certifying = false;
                    return Ok(r);
                }
                let sd = (mean * (1.0 - b)).sqrt();
                let p = if sd == 0.0 { 0.0 } else { gaussian_tail_q((total - mean) / sd) };
                Ok(PValueReport::new(method, n, total, params, p))
            }
        }
    }
}

/// One evaluated grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub axis: Axis,
    pub value: f64,
    pub method: Method,
    pub p_value: f64,
    pub raw_value: f64,
    pub precondition_failed: bool,
}

/// Every method at every grid point, ordered by n, then value, then method.
pub fn sweep_grid(ctx: &SweepContext, methods: &[Method], grid: &Grid) -> Result<Vec<SweepRow>> {
    let points = grid.points().saturating_mul(methods.len() as u64);
    if grid.points() > GRID_CAP {
        return Err(Error::CapExceeded { requested: grid.points() as u128, cap: GRID_CAP as u128 });
    }
    if grid.n.is_empty() {
        return Err(invalid("grid needs an n field"));
    }
    let mut rows = Vec::with_capacity(points as usize);
    for &n in &grid.n {
        for &value in &grid.values {
            for &method in methods {
                let r = ctx.evaluate(method, n, grid.axis, value)?;
                rows.push(SweepRow {
                    n,
                    axis: grid.axis,
                    value,
                    method,
                    p_value: r.p_value,
                    raw_value: r.raw_value,
                    precondition_failed: r.precondition_failed,
                });
            }
        }
    }
    Ok(rows)
}

/// Smallest trial count reaching a target P-value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub axis: Axis,
    pub value: f64,
    pub method: Method,
    pub target: f64,
    pub n: u64,
    pub p_value: f64,
}

pub const THRESHOLD_MAX_N: u64 = 1 << 40;

/// Smallest `n` with bound `<= target` at average `value`, by doubling then
/// bisection on `n`.
pub fn threshold_n(ctx: &SweepContext, method: Method, axis: Axis, value: f64, target: f64) -> Result<Threshold> {
    if !(target > 0.0 && target < 1.0) {
        return Err(domain(format!("target P-value {target} outside (0, 1)")));
    }
    let p_at = |n: u64| -> Result<f64> { Ok(ctx.evaluate(method, n, axis, value)?.raw_value) };
    let mut hi = 1u64;
    while p_at(hi)? > target {
        if hi >= THRESHOLD_MAX_N {
            return Err(Error::Precondition(format!(
                "{method} never reaches P = {target} at {}={value}",
                axis.name()
            )));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    // Invariant: p(lo) > target or lo = 0; p(hi) <= target.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if p_at(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Threshold { axis, value, method, target, n: hi, p_value: p_at(hi)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games;

    fn delft() -> SweepContext {
        SweepContext::new(&games::chsh(), BiasBound::symmetric(1.08e-5).unwrap()).unwrap()
    }

    #[test]
    fn parses_grids() {
        let g: Grid = "n=245;s=2.2:3.0:0.1".parse().unwrap();
        assert_eq!(g.n, vec![245]);
        assert_eq!(g.values.len(), 9);
        assert!((g.values[8] - 3.0).abs() < 1e-12);
        let g: Grid = "n=100,200:400:100; mean=2.5".parse().unwrap();
        assert_eq!(g.n, vec![100, 200, 300, 400]);
        assert_eq!(g.axis, Axis::Mean);
        assert!("s=2".parse::<Grid>().unwrap().n.is_empty());
        for bad in ["n=5", "n=0;s=2", "n=1.5;s=2", "n=3;q=1", "n=3;s=1:0:1", "n=3;s=a"] {
            assert!(bad.parse::<Grid>().is_err(), "{bad}");
        }
        assert!(matches!(
            "n=1:2000:1;s=0:1:0.001".parse::<Grid>(),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn single_point_single_row() {
        let rows = sweep_grid(&delft(), &[Method::Binomial], &"n=245;s=2.4".parse().unwrap()).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].p_value - 0.039).abs() < 1e-3);
    }

    #[test]
    fn fig3_thresholds() {
        let ctx = delft();
        for (s, n) in [(2.08, 10195u64), (2.12, 4534), (2.16, 2552), (2.20, 1635)] {
            let t = threshold_n(&ctx, Method::Binomial, Axis::S, s, 0.01).unwrap();
            assert!((t.n as f64 / n as f64 - 1.0).abs() < 0.02, "S={s}: {} vs {n}", t.n);
            assert!(t.p_value <= 0.01);
            assert!(ctx.evaluate(Method::Binomial, t.n - 1, Axis::S, s).unwrap().raw_value > 0.01);
        }
    }

    #[test]
    fn unreachable_threshold_fails() {
        assert!(matches!(
            threshold_n(&delft(), Method::Binomial, Axis::S, 1.9, 0.01),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn general_games_reject_binomial_and_s() {
        let ctx = SweepContext::new(&games::cglmp(3).unwrap(), BiasBound::NONE).unwrap();
        assert!(ctx.evaluate(Method::Binomial, 500, Axis::Mean, 2.5).is_err());
        assert!(ctx.evaluate(Method::Bentkus, 500, Axis::S, 2.5).is_err());
        assert_eq!(ctx.methods().len(), 3);
        assert!((ctx.params().gamma_hat - 0.75).abs() < 1e-12);
    }

    #[test]
    fn mean_axis_matches_s_axis_for_chsh() {
        let ctx = delft();
        let a = ctx.evaluate(Method::Mcdiarmid, 245, Axis::S, 2.4).unwrap().raw_value;
        let b = ctx.evaluate(Method::Mcdiarmid, 245, Axis::Mean, 0.8).unwrap().raw_value;
        assert!((a / b - 1.0).abs() < 1e-12);
    }
}
