//! Games, trial records, behaviors and the scoring operations every bound
//! consumes.
//!
//! Input and output symbols are dense integers `0..k` per site. Tuples over
//! sites are flattened in mixed radix with the first site most significant,
//! so for two sites with two inputs each the order is `(0,0) (0,1) (1,0)
//! (1,1)`.


use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};

/// Event-ready tag. [`NULL_TAG`] marks an attempt without a heralded event.
pub type Tag = u32;

/// The tag of a failed attempt; such attempts are not trials.
pub const NULL_TAG: Tag = 0;

const NORM_TOL: f64 = 1e-12;
const SCORE_TOL: f64 = 1e-12;

/// Number of inputs and outputs at each site.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    inputs: Vec<usize>,
    outputs: Vec<usize>,
}

impl Dims {
    pub fn new(inputs: Vec<usize>, outputs: Vec<usize>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(invalid("a game needs at least one site"));
        }
        if inputs.len() != outputs.len() {
            return Err(invalid(format!(
                "{} input cardinalities but {} output cardinalities",
                inputs.len(),
                outputs.len()
            )));
        }
        if inputs.iter().chain(&outputs).any(|&k| k == 0) {
            return Err(invalid("every site needs at least one input and one output"));
        }
        let cells = inputs
            .iter()
            .chain(&outputs)
            .try_fold(1usize, |acc, &k| acc.checked_mul(k));
        if cells.map_or(true, |c| c > 1 << 28) {
            return Err(invalid("input/output table too large"));
        }
        Ok(Self { inputs, outputs })
    }

    /// Uniform dimensions: `sites` parties with the same alphabet sizes.
    pub fn uniform(sites: usize, inputs: usize, outputs: usize) -> Result<Self> {
        Self::new(vec![inputs; sites], vec![outputs; sites])
    }

    pub fn sites(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn num_input_tuples(&self) -> usize {
        self.inputs.iter().product()
    }

    pub fn num_output_tuples(&self) -> usize {
        self.outputs.iter().product()
    }

    pub fn num_cells(&self) -> usize {
        self.num_input_tuples() * self.num_output_tuples()
    }

    pub fn input_index(&self, x: &[usize]) -> Result<usize> {
        flatten(x, &self.inputs, "input")
    }

    pub fn output_index(&self, a: &[usize]) -> Result<usize> {
        flatten(a, &self.outputs, "output")
    }

    pub fn input_tuple(&self, index: usize) -> Vec<usize> {
        unflatten(index, &self.inputs)
    }

    pub fn output_tuple(&self, index: usize) -> Vec<usize> {
        unflatten(index, &self.outputs)
    }

    /// Number of deterministic local strategies, `prod_site |A_site|^|X_site|`.
    pub fn strategy_count(&self) -> u128 {
        self.inputs
            .iter()
            .zip(&self.outputs)
            .fold(1u128, |acc, (&x, &a)| {
                let per_site = (a as u128).checked_pow(x as u32).unwrap_or(u128::MAX);
                acc.saturating_mul(per_site)
            })
    }
}

fn flatten(t: &[usize], radix: &[usize], what: &str) -> Result<usize> {
    if t.len() != radix.len() {
        return Err(invalid(format!(
            "{what} tuple has {} entries, expected {}",
            t.len(),
            radix.len()
        )));
    }
    let mut idx = 0;
    for (site, (&v, &k)) in t.iter().zip(radix).enumerate() {
        if v >= k {
            return Err(invalid(format!(
                "{what} symbol {v} at site {site} outside 0..{k}"
            )));
        }
        idx = idx * k + v;
    }
    Ok(idx)
}

fn unflatten(mut index: usize, radix: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radix.len()];
    for (slot, &k) in out.iter_mut().zip(radix).rev() {
        *slot = index % k;
        index /= k;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    WinLose,
    General,
}

/// One score entry of the on-disk game format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub tag: Tag,
    pub x: Vec<usize>,
    pub a: Vec<usize>,
    pub value: f64,
}

/// One input-distribution entry of the on-disk game format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputProbability {
    pub x: Vec<usize>,
    pub p: f64,
}

/// A game exactly as read from JSON, before any invariant is checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGame {
    pub sites: usize,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub tags: Vec<Tag>,
    pub input_distribution: Vec<InputProbability>,
    pub scores: Vec<ScoreEntry>,
}

/// A validated scored game: score tables per non-null tag and the target
/// input distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct GameSpec {
    dims: Dims,
    tags: Vec<Tag>,
    // scores[tag_pos][input_idx * n_out + output_idx]
    scores: Vec<Vec<f64>>,
    input_distribution: Vec<f64>,
    kind: GameKind,
}

impl GameSpec {
    /// Builds a game from dense tables, checking every invariant.
    pub fn new(
        dims: Dims,
        tags: Vec<Tag>,
        scores: Vec<Vec<f64>>,
        input_distribution: Vec<f64>,
    ) -> Result<Self> {
        if tags.is_empty() {
            return Err(invalid("a game needs at least one non-null tag"));
        }
        if tags.contains(&NULL_TAG) {
            return Err(invalid("tag 0 is reserved for the null event"));
        }
        if tags.len() != scores.len() {
            return Err(invalid("one score table per tag is required"));
        }
        let mut order: Vec<usize> = (0..tags.len()).collect();
        order.sort_by_key(|&i| tags[i]);
        if order.windows(2).any(|w| tags[w[0]] == tags[w[1]]) {
            return Err(invalid("duplicate tag"));
        }
        let tags: Vec<Tag> = order.iter().map(|&i| tags[i]).collect();
        let scores: Vec<Vec<f64>> = order.iter().map(|&i| scores[i].clone()).collect();

        let n_in = dims.num_input_tuples();
        let n_cells = dims.num_cells();
        if input_distribution.len() != n_in {
            return Err(invalid(format!(
                "input distribution has {} entries, expected {n_in}",
                input_distribution.len()
            )));
        }
        if input_distribution.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(invalid("input probabilities must be finite and nonnegative"));
        }
        let total: f64 = input_distribution.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(invalid(format!("input distribution sums to {total}, not 1")));
        }
        for (t, table) in tags.iter().zip(&scores) {
            if table.len() != n_cells {
                return Err(invalid(format!(
                    "score table for tag {t} has {} cells, expected {n_cells}",
                    table.len()
                )));
            }
            if table.iter().any(|s| !s.is_finite()) {
                return Err(invalid(format!("score table for tag {t} has a non-finite score")));
            }
        }
        let mut spec = Self {
            dims,
            tags,
            scores,
            input_distribution,
            kind: GameKind::General,
        };
        spec.kind = if spec.distinct_scores().len() <= 2 {
            GameKind::WinLose
        } else {
            GameKind::General
        };
        Ok(spec)
    }

    /// Single-tag game from a scoring closure `f(x, a)`.
    pub fn from_fn(
        dims: Dims,
        input_distribution: Vec<f64>,
        f: impl Fn(&[usize], &[usize]) -> f64,
    ) -> Result<Self> {
        let table = dense_table(&dims, f);
        Self::new(dims, vec![1], vec![table], input_distribution)
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn kind(&self) -> GameKind {
        self.kind
    }

    pub fn input_distribution(&self) -> &[f64] {
        &self.input_distribution
    }

    pub fn score_table(&self, tag: Tag) -> Option<&[f64]> {
        self.tag_position(tag).map(|i| self.scores[i].as_slice())
    }

    fn tag_position(&self, tag: Tag) -> Option<usize> {
        self.tags.binary_search(&tag).ok()
    }

    /// Score of one cell; the null tag always scores zero.
    pub fn score(&self, tag: Tag, input_idx: usize, output_idx: usize) -> Option<f64> {
        if tag == NULL_TAG {
            return Some(0.0);
        }
        let t = self.tag_position(tag)?;
        self.scores[t]
            .get(input_idx * self.dims.num_output_tuples() + output_idx)
            .copied()
    }

    /// Cells that can actually occur: positive input probability.
    fn live_scores(&self) -> impl Iterator<Item = f64> + '_ {
        let n_out = self.dims.num_output_tuples();
        self.scores.iter().flat_map(move |table| {
            table
                .chunks(n_out)
                .zip(&self.input_distribution)
                .filter(|(_, &p)| p > 0.0)
                .flat_map(|(row, _)| row.iter().copied())
        })
    }

    /// Distinct scores (to 1e-12) over live cells, ascending.
    pub fn distinct_scores(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.live_scores().collect();
        all.sort_by(f64::total_cmp);
        all.dedup_by(|a, b| (*a - *b).abs() <= SCORE_TOL * b.abs().max(1.0));
        all
    }

    /// `(s_min, s_max)` over live cells.
    pub fn score_range(&self) -> (f64, f64) {
        self.live_scores()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s), hi.max(s))
            })
    }

    /// Bell coefficients `s^{x}_{a} = p(x) * s_{a|x}` for one tag.
    pub fn bell_coefficients(&self, tag: Tag) -> Option<Vec<f64>> {
        let table = self.score_table(tag)?;
        let n_out = self.dims.num_output_tuples();
        Some(
            table
                .iter()
                .enumerate()
                .map(|(cell, s)| s * self.input_distribution[cell / n_out])
                .collect(),
        )
    }

    pub fn to_raw(&self) -> RawGame {
        let n_out = self.dims.num_output_tuples();
        let input_distribution = self
            .input_distribution
            .iter()
            .enumerate()
            .map(|(i, &p)| InputProbability {
                x: self.dims.input_tuple(i),
                p,
            })
            .collect();
        let mut scores = Vec::new();
        for (&tag, table) in self.tags.iter().zip(&self.scores) {
            for (cell, &value) in table.iter().enumerate() {
                scores.push(ScoreEntry {
                    tag,
                    x: self.dims.input_tuple(cell / n_out),
                    a: self.dims.output_tuple(cell % n_out),
                    value,
                });
            }
        }
        RawGame {
            sites: self.dims.sites(),
            inputs: self.dims.inputs.clone(),
            outputs: self.dims.outputs.clone(),
            tags: self.tags.clone(),
            input_distribution,
            scores,
        }
    }

    /// Same game with the per-tag tables replaced.
    pub(crate) fn with_tables(&self, tags: Vec<Tag>, scores: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.dims.clone(), tags, scores, self.input_distribution.clone())
    }
}

pub(crate) fn dense_table(dims: &Dims, f: impl Fn(&[usize], &[usize]) -> f64) -> Vec<f64> {
    let n_out = dims.num_output_tuples();
    (0..dims.num_cells())
        .map(|cell| f(&dims.input_tuple(cell / n_out), &dims.output_tuple(cell % n_out)))
        .collect()
}

/// Checks a parsed game and puts it in canonical form (tags ascending, dense
/// tables). Applying it to `spec.to_raw()` returns `spec` again.
pub fn validate_game(raw: &RawGame) -> Result<GameSpec> {
    if raw.sites != raw.inputs.len() || raw.sites != raw.outputs.len() {
        return Err(invalid(format!(
            "sites = {} but {} input and {} output cardinalities given",
            raw.sites,
            raw.inputs.len(),
            raw.outputs.len()
        )));
    }
    let dims = Dims::new(raw.inputs.clone(), raw.outputs.clone())?;
    let n_out = dims.num_output_tuples();

    let mut dist = vec![None; dims.num_input_tuples()];
    for entry in &raw.input_distribution {
        let i = dims.input_index(&entry.x)?;
        if dist[i].replace(entry.p).is_some() {
            return Err(invalid(format!("duplicate input probability for {:?}", entry.x)));
        }
    }
    // Inputs left out of the distribution have probability zero.
    let dist: Vec<f64> = dist.into_iter().map(|p| p.unwrap_or(0.0)).collect();

    let mut tags = raw.tags.clone();
    tags.sort_unstable();
    let mut tables: Vec<Vec<Option<f64>>> = vec![vec![None; dims.num_cells()]; tags.len()];
    for entry in &raw.scores {
        if entry.tag == NULL_TAG {
            if entry.value != 0.0 {
                return Err(invalid("the null tag must score 0"));
            }
            continue;
        }
        let t = tags
            .binary_search(&entry.tag)
            .map_err(|_| invalid(format!("score entry for undeclared tag {}", entry.tag)))?;
        let cell = dims.input_index(&entry.x)? * n_out + dims.output_index(&entry.a)?;
        if tables[t][cell].replace(entry.value).is_some() {
            return Err(invalid(format!(
                "duplicate score for tag {} x={:?} a={:?}",
                entry.tag, entry.x, entry.a
            )));
        }
    }
    let mut scores = Vec::with_capacity(tags.len());
    for (&tag, table) in tags.iter().zip(tables) {
        let mut dense = Vec::with_capacity(table.len());
        for (cell, s) in table.into_iter().enumerate() {
            match s {
                Some(v) => dense.push(v),
                None => {
                    return Err(invalid(format!(
                        "missing score for tag {tag} x={:?} a={:?}",
                        dims.input_tuple(cell / n_out),
                        dims.output_tuple(cell % n_out)
                    )))
                }
            }
        }
        scores.push(dense);
    }
    GameSpec::new(dims, tags, scores, dist)
}

/// One attempt: its tag, the inputs and (for non-null tags) the outputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialRecord {
    pub index: u64,
    pub tag: Tag,
    pub inputs: Vec<usize>,
    pub outputs: Option<Vec<usize>>,
}

impl TrialRecord {
    pub fn is_trial(&self) -> bool {
        self.tag != NULL_TAG
    }
}

/// An ordered sequence of attempts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExperimentData {
    records: Vec<TrialRecord>,
    trials: usize,
}

impl ExperimentData {
    pub fn new(records: Vec<TrialRecord>) -> Result<Self> {
        if let Some(w) = records.windows(2).find(|w| w[0].index >= w[1].index) {
            return Err(invalid(format!(
                "attempt indices must be strictly increasing ({} then {})",
                w[0].index, w[1].index
            )));
        }
        if let Some(r) = records.iter().find(|r| r.is_trial() && r.outputs.is_none()) {
            return Err(invalid(format!("trial {} has no outputs", r.index)));
        }
        let trials = records.iter().filter(|r| r.is_trial()).count();
        Ok(Self { records, trials })
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    /// Number of attempts.
    pub fn attempts(&self) -> usize {
        self.records.len()
    }

    /// Number of trials (attempts with a non-null tag).
    pub fn trials(&self) -> usize {
        self.trials
    }

    /// Concatenation, re-indexing `other` after the last attempt of `self`.
    pub fn concat(&self, other: &ExperimentData) -> ExperimentData {
        let offset = self.records.last().map_or(0, |r| r.index + 1);
        let mut records = self.records.clone();
        records.extend(other.records.iter().map(|r| TrialRecord {
            index: r.index + offset,
            ..r.clone()
        }));
        let trials = self.trials + other.trials;
        ExperimentData { records, trials }
    }

    /// Checks arities, symbol ranges and tags against a game.
    pub fn check_against(&self, spec: &GameSpec) -> Result<()> {
        for r in &self.records {
            spec.dims.input_index(&r.inputs)
                .map_err(|e| invalid(format!("attempt {}: {e}", r.index)))?;
            if r.is_trial() {
                if spec.tag_position(r.tag).is_none() {
                    return Err(invalid(format!("attempt {}: undeclared tag {}", r.index, r.tag)));
                }
                let outputs = r.outputs.as_deref().unwrap_or_default();
                spec.dims.output_index(outputs)
                    .map_err(|e| invalid(format!("attempt {}: {e}", r.index)))?;
            }
        }
        Ok(())
    }
}

/// Total and per-trial scores of a data set.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSummary {
    pub total: f64,
    pub per_trial: Vec<f64>,
    /// Number of trials at the maximal score; present for win/lose games.
    pub wins: Option<u64>,
}

/// Sums the scores of every non-null trial.
pub fn score_experiment(spec: &GameSpec, data: &ExperimentData) -> Result<ScoreSummary> {
    data.check_against(spec)?;
    let mut per_trial = Vec::with_capacity(data.trials());
    for r in data.records.iter().filter(|r| r.is_trial()) {
        let x = spec.dims.input_index(&r.inputs)?;
        let a = spec.dims.output_index(r.outputs.as_deref().unwrap_or_default())?;
        let s = spec
            .score(r.tag, x, a)
            .ok_or_else(|| invalid(format!("attempt {}: undefined cell", r.index)))?;
        per_trial.push(s);
    }
    let total = per_trial.iter().sum();
    let wins = match spec.kind {
        GameKind::WinLose => {
            let (_, s_max) = spec.score_range();
            Some(
                per_trial
                    .iter()
                    .filter(|&&s| (s - s_max).abs() <= SCORE_TOL * s_max.abs().max(1.0))
                    .count() as u64,
            )
        }
        GameKind::General => None,
    };
    Ok(ScoreSummary {
        total,
        per_trial,
        wins,
    })
}

/// Affine map `s -> scale * s + offset` applied by [`normalize_game`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub scale: f64,
    pub offset: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        scale: 1.0,
        offset: 0.0,
    };

    pub fn apply(&self, s: f64) -> f64 {
        self.scale * s + self.offset
    }

    pub fn invert(&self, s: f64) -> f64 {
        (s - self.offset) / self.scale
    }
}

/// Rescales scores onto `[0, 1]` with `(s - s_min) / (s_max - s_min)`.
pub fn normalize_game(spec: &GameSpec) -> Result<(GameSpec, Affine)> {
    let (lo, hi) = spec.score_range();
    if !(hi > lo) {
        return Err(domain("cannot normalize a game with a constant score table"));
    }
    let affine = if lo == 0.0 && hi == 1.0 {
        Affine::IDENTITY
    } else {
        let scale = 1.0 / (hi - lo);
        Affine {
            scale,
            offset: -lo * scale,
        }
    };
    let n_out = spec.dims.num_output_tuples();
    let tables = spec
        .scores
        .iter()
        .map(|table| {
            table
                .iter()
                .enumerate()
                .map(|(cell, &s)| {
                    if spec.input_distribution[cell / n_out] > 0.0 {
                        affine.apply(s).clamp(0.0, 1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Ok((spec.with_tables(spec.tags.clone(), tables)?, affine))
}

/// Fractional CHSH win count `n (S + 4) / 8` for a correlator value `S`.
pub fn s_to_wins(n: u64, s: f64) -> Result<f64> {
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    if !(-4.0..=4.0).contains(&s) {
        return Err(domain(format!("CHSH value {s} outside [-4, 4]")));
    }
    Ok(n as f64 * (s + 4.0) / 8.0)
}

/// CHSH correlator `8 (c / n - 1/2)` for `c` wins out of `n`.
pub fn wins_to_s(n: u64, c: u64) -> Result<f64> {
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    if c > n {
        return Err(domain(format!("{c} wins out of {n} trials")));
    }
    Ok(8.0 * (c as f64 / n as f64 - 0.5))
}

/// A conditional probability table `p(a|x)` over input and output tuples.
#[derive(Clone, Debug, PartialEq)]
pub struct Behavior {
    dims: Dims,
    table: Vec<f64>,
}

impl Behavior {
    pub fn new(dims: Dims, table: Vec<f64>) -> Result<Self> {
        if table.len() != dims.num_cells() {
            return Err(invalid(format!(
                "behavior has {} entries, expected {}",
                table.len(),
                dims.num_cells()
            )));
        }
        if table.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(invalid("behavior entries must be finite and nonnegative"));
        }
        for (i, row) in table.chunks(dims.num_output_tuples()).enumerate() {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > NORM_TOL {
                return Err(invalid(format!(
                    "behavior row for input {:?} sums to {total}",
                    dims.input_tuple(i)
                )));
            }
        }
        Ok(Self { dims, table })
    }

    pub fn from_fn(dims: Dims, f: impl Fn(&[usize], &[usize]) -> f64) -> Result<Self> {
        let table = dense_table(&dims, f);
        Self::new(dims, table)
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    /// Flat table indexed `input_idx * n_out + output_idx`.
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn get(&self, input_idx: usize, output_idx: usize) -> f64 {
        self.table[input_idx * self.dims.num_output_tuples() + output_idx]
    }
}

/// A deterministic local strategy: each site answers with a fixed output per
/// input.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    /// `responses[site][input] = output`
    pub responses: Vec<Vec<usize>>,
}

impl DeterministicStrategy {
    pub fn new(dims: &Dims, responses: Vec<Vec<usize>>) -> Result<Self> {
        if responses.len() != dims.sites() {
            return Err(invalid("one response table per site is required"));
        }
        for (site, table) in responses.iter().enumerate() {
            if table.len() != dims.inputs()[site] {
                return Err(invalid(format!("site {site} needs one response per input")));
            }
            if table.iter().any(|&a| a >= dims.outputs()[site]) {
                return Err(invalid(format!("site {site} answers outside its alphabet")));
            }
        }
        Ok(Self { responses })
    }

    /// The `rank`-th strategy in canonical order (site 0 most significant,
    /// input 0 most significant within a site).
    pub fn from_rank(dims: &Dims, mut rank: u128) -> Self {
        let mut responses: Vec<Vec<usize>> =
            dims.inputs().iter().map(|&k| vec![0; k]).collect();
        for (site, table) in responses.iter_mut().enumerate().rev() {
            let k = dims.outputs()[site] as u128;
            for slot in table.iter_mut().rev() {
                *slot = (rank % k) as usize;
                rank /= k;
            }
        }
        Self { responses }
    }

    /// Flat output index for the given flat input index.
    pub fn respond(&self, dims: &Dims, input_idx: usize) -> usize {
        let x = dims.input_tuple(input_idx);
        let mut idx = 0;
        for (site, &xi) in x.iter().enumerate() {
            idx = idx * dims.outputs()[site] + self.responses[site][xi];
        }
        idx
    }

    /// Output index per input index, `d_lambda` in compact form.
    pub fn response_table(&self, dims: &Dims) -> Vec<usize> {
        (0..dims.num_input_tuples())
            .map(|i| self.respond(dims, i))
            .collect()
    }

    /// The behavior `d_lambda(a|x)` of this strategy.
    pub fn behavior(&self, dims: &Dims) -> Behavior {
        let n_out = dims.num_output_tuples();
        let mut table = vec![0.0; dims.num_cells()];
        for (x, a) in self.response_table(dims).into_iter().enumerate() {
            table[x * n_out + a] = 1.0;
        }
        Behavior {
            dims: dims.clone(),
            table,
        }
    }
}

/// Limits on the RNG bias: each site's input marginal may deviate from its
/// target by at most `tau`, conditioned on any history.
///
/// Site 0 uses `tau_a`; every other site uses `tau_b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasBound {
    pub tau_a: f64,
    pub tau_b: f64,
}

impl BiasBound {
    pub const NONE: BiasBound = BiasBound {
        tau_a: 0.0,
        tau_b: 0.0,
    };

    pub fn new(tau_a: f64, tau_b: f64) -> Result<Self> {
        for (name, t) in [("tau_a", tau_a), ("tau_b", tau_b)] {
            if !(0.0..1.0).contains(&t) {
                return Err(domain(format!("{name} = {t} outside [0, 1)")));
            }
        }
        Ok(Self { tau_a, tau_b })
    }

    pub fn symmetric(tau: f64) -> Result<Self> {
        Self::new(tau, tau)
    }

    pub fn tau(&self) -> f64 {
        self.tau_a.max(self.tau_b)
    }

    pub fn tau_for_site(&self, site: usize) -> f64 {
        if site == 0 {
            self.tau_a
        } else {
            self.tau_b
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tau_a == 0.0 && self.tau_b == 0.0
    }

    /// The per-site input polytopes for `spec`, rejecting boxes that leave
    /// `[0, 1]`.
    ///
    /// A nonzero bias needs a product input distribution, since the bias
    /// model acts on each site's marginal independently.
    pub fn site_boxes(&self, spec: &GameSpec) -> Result<Vec<SiteBox>> {
        let marginals = marginals(spec);
        if !self.is_zero() && !is_product(spec, &marginals) {
            return Err(invalid(
                "a nonzero bias needs a product input distribution",
            ));
        }
        marginals
            .into_iter()
            .enumerate()
            .map(|(site, target)| SiteBox::new(target, self.tau_for_site(site)))
            .collect()
    }
}

/// Marginal input distribution of every site.
pub fn marginals(spec: &GameSpec) -> Vec<Vec<f64>> {
    let dims = spec.dims();
    let mut out: Vec<Vec<f64>> = dims.inputs().iter().map(|&k| vec![0.0; k]).collect();
    for (i, &p) in spec.input_distribution().iter().enumerate() {
        for (site, &x) in dims.input_tuple(i).iter().enumerate() {
            out[site][x] += p;
        }
    }
    out
}

fn is_product(spec: &GameSpec, marginals: &[Vec<f64>]) -> bool {
    let dims = spec.dims();
    spec.input_distribution().iter().enumerate().all(|(i, &p)| {
        let prod: f64 = dims
            .input_tuple(i)
            .iter()
            .enumerate()
            .map(|(site, &x)| marginals[site][x])
            .product();
        (prod - p).abs() <= 1e-12
    })
}

/// `{q : |q_x - p_x| <= tau, sum q = 1}` for one site.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteBox {
    pub target: Vec<f64>,
    pub tau: f64,
}

impl SiteBox {
    pub fn new(target: Vec<f64>, tau: f64) -> Result<Self> {
        if tau > 0.0 {
            if let Some((x, p)) = target
                .iter()
                .enumerate()
                .find(|(_, &p)| p - tau < 0.0 || p + tau > 1.0)
            {
                return Err(domain(format!(
                    "bias {tau} moves p(input {x}) = {p} outside [0, 1]"
                )));
            }
        }
        Ok(Self { target, tau })
    }

    /// Attainable range of each coordinate, accounting for normalization.
    pub fn coordinate_ranges(&self) -> Vec<(f64, f64)> {
        let lo: Vec<f64> = self.target.iter().map(|p| (p - self.tau).max(0.0)).collect();
        let hi: Vec<f64> = self.target.iter().map(|p| (p + self.tau).min(1.0)).collect();
        let sum_lo: f64 = lo.iter().sum();
        let sum_hi: f64 = hi.iter().sum();
        (0..lo.len())
            .map(|x| {
                let l = lo[x].max(1.0 - (sum_hi - hi[x]));
                let h = hi[x].min(1.0 - (sum_lo - lo[x]));
                (l.max(0.0), h.min(1.0))
            })
            .collect()
    }

    /// Vertices of the polytope: all coordinates but one at a bound, the
    /// free one fixing the sum.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let k = self.target.len();
        if self.tau == 0.0 || k == 1 {
            return vec![self.target.clone()];
        }
        let lo: Vec<f64> = self.target.iter().map(|p| p - self.tau).collect();
        let hi: Vec<f64> = self.target.iter().map(|p| p + self.tau).collect();
        let mut out: Vec<Vec<f64>> = Vec::new();
        for free in 0..k {
            for mask in 0u64..(1u64 << (k - 1)) {
                let mut v = vec![0.0; k];
                let mut bit = 0;
                let mut rest = 0.0;
                for x in (0..k).filter(|&x| x != free) {
                    v[x] = if mask >> bit & 1 == 1 { hi[x] } else { lo[x] };
                    rest += v[x];
                    bit += 1;
                }
                v[free] = 1.0 - rest;
                if v[free] >= lo[free] - 1e-15 && v[free] <= hi[free] + 1e-15 {
                    if !out
                        .iter()
                        .any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-14))
                    {
                        out.push(v);
                    }
                }
            }
        }
        out
    }
}
