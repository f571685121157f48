//! Win/lose games: the local winning probability under RNG bias and the
//! binomial P-value bound, which holds against LHVMs with arbitrary memory
//! and for event-ready data restricted to heralded trials.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::game::{
    marginals, BiasBound, DeterministicStrategy, ExperimentData, GameKind, GameSpec, Tag,
    TrialRecord,
};
use crate::lp::{box_polytope_max, check_cap, ResponseTables};
use crate::report::{BoundParams, Method, PValueReport};
use crate::tails::{binom_tail, gaussian_tail_q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaProvenance {
    AnalyticChsh,
    Enumeration,
    UserSupplied,
}

/// Upper bound on the probability that an LHVM wins a single trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinLoseBound {
    pub beta_win: f64,
    pub provenance: BetaProvenance,
    pub bias: BiasBound,
    /// A maximizing strategy, when found by enumeration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<DeterministicStrategy>,
    /// Per-site input marginals at which the maximum is attained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_case_inputs: Option<Vec<Vec<f64>>>,
}

impl WinLoseBound {
    pub fn user_supplied(beta_win: f64, bias: BiasBound) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta_win) {
            return Err(domain(format!("beta_win = {beta_win} outside [0, 1]")));
        }
        Ok(Self {
            beta_win,
            provenance: BetaProvenance::UserSupplied,
            bias,
            strategy: None,
            worst_case_inputs: None,
        })
    }
}

/// Tight CHSH winning probability with biased inputs:
/// `3/4 + (tau_a + tau_b)/2 - tau_a tau_b`.
pub fn chsh_beta_win(bias: BiasBound) -> Result<WinLoseBound> {
    if bias.tau_a >= 0.5 || bias.tau_b >= 0.5 {
        return Err(domain("the CHSH bias bound needs tau_a, tau_b < 1/2"));
    }
    let (ta, tb) = (bias.tau_a, bias.tau_b);
    Ok(WinLoseBound {
        beta_win: 0.75 + 0.5 * (ta + tb) - ta * tb,
        provenance: BetaProvenance::AnalyticChsh,
        bias,
        strategy: None,
        worst_case_inputs: Some(vec![vec![0.5 + ta, 0.5 - ta], vec![0.5 + tb, 0.5 - tb]]),
    })
}

/// True when `spec` is CHSH (either winning condition orientation aside) with
/// uniform inputs and a single tag.
pub fn is_chsh(spec: &GameSpec) -> bool {
    let reference = crate::games::chsh();
    spec.dims() == reference.dims()
        && spec.tags().len() == 1
        && spec.kind() == GameKind::WinLose
        && spec.input_distribution() == reference.input_distribution()
        && win_table(spec, spec.tags()[0]) == win_table(&reference, 1)
}

fn win_table(spec: &GameSpec, tag: Tag) -> Vec<bool> {
    let (_, s_max) = spec.score_range();
    spec.score_table(tag)
        .expect("declared tag")
        .iter()
        .map(|&s| s >= s_max - 1e-12 * s_max.abs().max(1.0))
        .collect()
}

/// Analytic bound for CHSH, exhaustive optimization otherwise.
pub fn beta_win(spec: &GameSpec, bias: BiasBound) -> Result<WinLoseBound> {
    if is_chsh(spec) && bias.tau() < 0.5 {
        bias.site_boxes(spec)?;
        chsh_beta_win(bias)
    } else {
        beta_win_optimize(spec, bias)
    }
}

/// Exact maximum winning probability over deterministic strategies and
/// input distributions inside the bias box, maximized over tags.
pub fn beta_win_optimize(spec: &GameSpec, bias: BiasBound) -> Result<WinLoseBound> {
    let mut best: Option<WinLoseBound> = None;
    for &tag in spec.tags() {
        let b = beta_win_for_tag(spec, tag, bias)?;
        if best.as_ref().map_or(true, |cur| b.beta_win > cur.beta_win) {
            best = Some(b);
        }
    }
    Ok(best.expect("games have at least one tag"))
}

/// [`beta_win_optimize`] restricted to the table of one tag.
pub fn beta_win_for_tag(spec: &GameSpec, tag: Tag, bias: BiasBound) -> Result<WinLoseBound> {
    if spec.kind() != GameKind::WinLose {
        return Err(invalid("beta_win needs a win/lose game"));
    }
    if spec.score_table(tag).is_none() {
        return Err(invalid(format!("undeclared tag {tag}")));
    }
    let values: Vec<f64> = win_table(spec, tag).into_iter().map(f64::from).collect();
    let best = max_expected_value(spec, &values, bias)?;
    Ok(WinLoseBound {
        beta_win: best.value.clamp(0.0, 1.0),
        provenance: BetaProvenance::Enumeration,
        bias,
        strategy: Some(DeterministicStrategy::from_rank(spec.dims(), best.rank)),
        worst_case_inputs: Some(best.inputs),
    })
}

pub(crate) struct Optimum {
    pub value: f64,
    pub rank: u128,
    pub inputs: Vec<Vec<f64>>,
}

/// Maximum of `sum_x q(x) values[x, lambda(x)]` over deterministic strategies
/// `lambda` and product input distributions `q` inside the bias box.
pub(crate) fn max_expected_value(spec: &GameSpec, values: &[f64], bias: BiasBound) -> Result<Optimum> {
    let dims = spec.dims();
    check_cap(dims.strategy_count())?;
    let boxes = bias.site_boxes(spec)?;
    let n_out = dims.num_output_tuples();

    let mut best = Optimum { value: f64::NEG_INFINITY, rank: 0, inputs: Vec::new() };
    if bias.is_zero() {
        let p = spec.input_distribution();
        for (rank, resp) in ResponseTables::new(dims).enumerate() {
            let v: f64 = resp
                .iter()
                .enumerate()
                .map(|(x, &a)| p[x] * values[x * n_out + a])
                .sum();
            if v > best.value {
                best.value = v;
                best.rank = rank as u128;
            }
        }
        best.inputs = marginals(spec);
        return Ok(best);
    }
    // Multilinear in the site marginals: enumerate the vertices of every
    // site but the last and solve an LP over the last site's box.
    let last = dims.sites() - 1;
    let vertex_sets: Vec<Vec<Vec<f64>>> = boxes[..last].iter().map(|b| b.vertices()).collect();
    let combos = cartesian(&vertex_sets.iter().map(Vec::len).collect::<Vec<_>>());
    let k_last = dims.inputs()[last];
    let rest_count = dims.num_input_tuples() / k_last;
    let mut memo: HashMap<Vec<u64>, (f64, Vec<f64>)> = HashMap::new();
    for (rank, resp) in ResponseTables::new(dims).enumerate() {
        for combo in &combos {
            let mut weights = vec![0.0; k_last];
            for rest in 0..rest_count {
                let mut prob = 1.0;
                let mut r = rest;
                for site in (0..last).rev() {
                    let k = dims.inputs()[site];
                    prob *= vertex_sets[site][combo[site]][r % k];
                    r /= k;
                }
                for (y, w) in weights.iter_mut().enumerate() {
                    let x = rest * k_last + y;
                    *w += prob * values[x * n_out + resp[x]];
                }
            }
            let key: Vec<u64> = weights.iter().map(|w| w.to_bits()).collect();
            let (v, q) = match memo.get(&key) {
                Some(hit) => hit.clone(),
                None => {
                    let sol = box_polytope_max(&weights, &boxes[last])?;
                    memo.insert(key, sol.clone());
                    sol
                }
            };
            if v > best.value + 1e-15 {
                let mut inputs: Vec<Vec<f64>> =
                    (0..last).map(|s| vertex_sets[s][combo[s]].clone()).collect();
                inputs.push(q);
                best = Optimum { value: v, rank: rank as u128, inputs };
            }
        }
    }
    Ok(best)
}

fn cartesian(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &k in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..k).map(move |i| {
                    let mut v = prefix.clone();
                    v.push(i);
                    v
                })
            })
            .collect();
    }
    out
}

/// `P[Bin(n, beta_win) >= c]`, valid for arbitrary-memory LHVMs. Only
/// heralded trials enter `n` and `c`.
pub fn winlose_pvalue(n: u64, c: u64, bound: &WinLoseBound) -> Result<PValueReport> {
    if c > n {
        return Err(domain(format!("{c} wins out of {n} trials")));
    }
    let p = binom_tail(n, c, bound.beta_win)?.value;
    Ok(PValueReport::new(
        Method::Binomial,
        n,
        c as f64,
        BoundParams::WinLose(bound.clone()),
        p,
    ))
}

/// Normal approximation `Q((c - n b) / sqrt(n b (1 - b)))`. Not a valid
/// bound; the report is marked non-certifying.
pub fn gaussian_approx_pvalue(n: u64, c: u64, bound: &WinLoseBound) -> Result<PValueReport> {
    let b = bound.beta_win;
    let mean = n as f64 * b;
    if c > n {
        return Err(domain(format!("{c} wins out of {n} trials")));
    }
    if !(c as f64 > mean) {
        return Err(Error::Precondition(format!(
            "normal approximation needs c > n beta_win ({c} <= {mean})"
        )));
    }
    let sd = (mean * (1.0 - b)).sqrt();
    let p = if sd == 0.0 { 0.0 } else { gaussian_tail_q((c as f64 - mean) / sd) };
    Ok(PValueReport::new(
        Method::GaussianNonrigorous,
        n,
        c as f64,
        BoundParams::WinLose(bound.clone()),
        p,
    ))
}

/// Per-site, per-input output permutations: `maps[site][input][a] = a'`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRelabeling {
    pub maps: Vec<Vec<Vec<usize>>>,
}

impl OutputRelabeling {
    pub fn identity(spec: &GameSpec) -> Self {
        let dims = spec.dims();
        Self {
            maps: dims
                .inputs()
                .iter()
                .zip(dims.outputs())
                .map(|(&k, &m)| vec![(0..m).collect(); k])
                .collect(),
        }
    }

    fn check(&self, spec: &GameSpec) -> Result<()> {
        let dims = spec.dims();
        let ok = self.maps.len() == dims.sites()
            && self.maps.iter().enumerate().all(|(site, per_input)| {
                per_input.len() == dims.inputs()[site]
                    && per_input.iter().all(|perm| {
                        let m = dims.outputs()[site];
                        let mut seen = vec![false; m];
                        perm.len() == m
                            && perm.iter().all(|&a| a < m && !std::mem::replace(&mut seen[a], true))
                    })
            });
        if ok {
            Ok(())
        } else {
            Err(invalid("relabeling must be a permutation per site and input"))
        }
    }

    pub fn apply(&self, inputs: &[usize], outputs: &[usize]) -> Vec<usize> {
        outputs
            .iter()
            .enumerate()
            .map(|(site, &a)| self.maps[site][inputs[site]][a])
            .collect()
    }
}

fn relabeling_matches(spec: &GameSpec, tag: Tag, reference: Tag, map: &OutputRelabeling) -> bool {
    let dims = spec.dims();
    let n_out = dims.num_output_tuples();
    let from = spec.score_table(tag).expect("declared tag");
    let to = spec.score_table(reference).expect("declared tag");
    (0..dims.num_cells()).all(|cell| {
        let x = dims.input_tuple(cell / n_out);
        let a = dims.output_tuple(cell % n_out);
        let b = dims.output_index(&map.apply(&x, &a)).expect("permutation stays in range");
        (from[cell] - to[(cell / n_out) * n_out + b]).abs() <= 1e-12
    })
}

/// Searches for an output relabeling taking `tag`'s table onto `reference`'s.
pub fn find_relabeling(spec: &GameSpec, tag: Tag, reference: Tag) -> Result<Option<OutputRelabeling>> {
    let dims = spec.dims();
    let slots: Vec<(usize, usize)> = (0..dims.sites())
        .flat_map(|site| (0..dims.inputs()[site]).map(move |x| (site, x)))
        .collect();
    let perms: Vec<Vec<Vec<usize>>> = dims.outputs().iter().map(|&m| permutations(m)).collect();
    let total = slots
        .iter()
        .fold(1u128, |acc, &(site, _)| acc.saturating_mul(perms[site].len() as u128));
    check_cap(total)?;
    let sizes: Vec<usize> = slots.iter().map(|&(site, _)| perms[site].len()).collect();
    let mut idx = vec![0usize; slots.len()];
    loop {
        let mut map = OutputRelabeling::identity(spec);
        for (&(site, x), &i) in slots.iter().zip(&idx) {
            map.maps[site][x] = perms[site][i].clone();
        }
        if relabeling_matches(spec, tag, reference, &map) {
            return Ok(Some(map));
        }
        let mut pos = idx.len();
        loop {
            if pos == 0 {
                return Ok(None);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < sizes[pos] {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(m - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, m - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}

/// Merges every heralded tag into the lowest-numbered one, relabeling the
/// outputs of other tags so the reference table scores them.
///
/// Tags without an explicit relabeling get one by exhaustive search. All
/// tags must share the same winning probability under `bias`.
pub fn relabel_event_ready(
    spec: &GameSpec,
    data: &ExperimentData,
    relabelings: &BTreeMap<Tag, OutputRelabeling>,
    bias: BiasBound,
) -> Result<(GameSpec, ExperimentData)> {
    data.check_against(spec)?;
    let tags = spec.tags();
    let reference = tags[0];
    if tags.len() == 1 {
        return Ok((spec.clone(), data.clone()));
    }
    let beta_ref = beta_win_for_tag(spec, reference, bias)?.beta_win;
    let mut maps: BTreeMap<Tag, OutputRelabeling> = BTreeMap::new();
    maps.insert(reference, OutputRelabeling::identity(spec));
    for &tag in &tags[1..] {
        let beta = beta_win_for_tag(spec, tag, bias)?.beta_win;
        if (beta - beta_ref).abs() > 1e-12 {
            return Err(Error::Precondition(format!(
                "tag {tag} has winning probability {beta}, tag {reference} has {beta_ref}; \
                 merging needs equal values"
            )));
        }
        let map = match relabelings.get(&tag) {
            Some(m) => {
                m.check(spec)?;
                if !relabeling_matches(spec, tag, reference, m) {
                    return Err(invalid(format!(
                        "relabeling for tag {tag} does not map its table onto tag {reference}"
                    )));
                }
                m.clone()
            }
            None => find_relabeling(spec, tag, reference)?.ok_or_else(|| {
                invalid(format!("no output relabeling maps tag {tag} onto tag {reference}"))
            })?,
        };
        maps.insert(tag, map);
    }
    let merged_spec = spec.with_tables(
        vec![reference],
        vec![spec.score_table(reference).expect("declared tag").to_vec()],
    )?;
    let records = data
        .records()
        .iter()
        .map(|r| {
            if !r.is_trial() {
                return r.clone();
            }
            let map = &maps[&r.tag];
            TrialRecord {
                index: r.index,
                tag: reference,
                inputs: r.inputs.clone(),
                outputs: r.outputs.as_ref().map(|a| map.apply(&r.inputs, a)),
            }
        })
        .collect();
    Ok((merged_spec, ExperimentData::new(records)?))
}
