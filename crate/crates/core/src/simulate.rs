//! Local hidden variable model (LHVM) simulation and brute-force oracles.
//!
//! The harness owns input generation: a strategy commits to a tag and a
//! deterministic local strategy from its pool before the inputs of an
//! attempt are drawn, so outputs depend only on each site's own input and
//! inputs never depend on the tag.
//!
//! Replica `r` of a run with master seed `s` draws from a xoshiro256++
//! stream seeded with `mix(s ^ mix(r))`, where `mix` is the SplitMix64
//! finalizer. Replicas are therefore independent of evaluation order.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::game::{
    BiasBound, DeterministicStrategy, Dims, ExperimentData, GameKind, GameSpec, Tag, TrialRecord,
    NULL_TAG,
};
use crate::lp::{check_cap, ResponseTables};
use crate::winlose::{beta_win_for_tag, WinLoseBound};

pub type SimRng = Xoshiro256PlusPlus;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The random stream of one replica.
pub fn replica_rng(seed: u64, replica: u64) -> SimRng {
    SimRng::seed_from_u64(mix(seed ^ mix(replica)))
}

/// What a strategy may remember about earlier attempts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct History {
    pub attempts: u64,
    pub trials: u64,
    pub wins: u64,
    pub last_tag: Tag,
    /// Outcome of the most recent trial.
    pub last_win: Option<bool>,
    /// Length of the current run of equal outcomes.
    pub streak: u64,
}

impl History {
    fn record(&mut self, tag: Tag, win: Option<bool>) {
        self.attempts += 1;
        self.last_tag = tag;
        if let Some(w) = win {
            self.trials += 1;
            self.wins += u64::from(w);
            self.streak = if self.last_win == Some(w) { self.streak + 1 } else { 1 };
            self.last_win = Some(w);
        }
    }
}

/// An LHVM. Each attempt the harness calls [`Lhvm::herald`], then
/// [`Lhvm::respond`] for heralded attempts, and only then draws inputs.
pub trait Lhvm {
    fn name(&self) -> &str;

    /// Deterministic strategies this model plays.
    fn pool(&self) -> &[DeterministicStrategy];

    fn has_memory(&self) -> bool;

    /// Called before every replica.
    fn reset(&mut self) {}

    /// Tag of the next attempt, [`NULL_TAG`] for no event-ready signal.
    fn herald(&mut self, history: &History, rng: &mut SimRng) -> Tag;

    /// Index into [`Lhvm::pool`] of the strategy for the next trial.
    fn respond(&mut self, history: &History, tag: Tag, rng: &mut SimRng) -> usize;
}

/// How the harness draws inputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputPolicy {
    /// Product of the marginals at which the local winning probability is
    /// largest within the bias box.
    #[default]
    WorstCase,
    /// The game's nominal input distribution.
    Nominal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub replicas: u64,
    /// Heralded trials per replica.
    pub trials: u64,
    pub bias: BiasBound,
    pub inputs: InputPolicy,
}

impl SimConfig {
    pub fn new(seed: u64, replicas: u64, trials: u64) -> Self {
        Self { seed, replicas, trials, bias: BiasBound::NONE, inputs: InputPolicy::WorstCase }
    }

    pub fn with_bias(mut self, bias: BiasBound, inputs: InputPolicy) -> Self {
        self.bias = bias;
        self.inputs = inputs;
        self
    }
}

/// Joint input distribution used by the harness.
pub fn sampling_distribution(spec: &GameSpec, bias: BiasBound, policy: InputPolicy) -> Result<Vec<f64>> {
    if bias.is_zero() || policy == InputPolicy::Nominal {
        return Ok(spec.input_distribution().to_vec());
    }
    let tag = best_tag(spec, bias)?.0;
    let marginals = beta_win_for_tag(spec, tag, bias)?
        .worst_case_inputs
        .expect("enumeration records its maximizer");
    let dims = spec.dims();
    Ok((0..dims.num_input_tuples())
        .map(|i| {
            dims.input_tuple(i)
                .iter()
                .enumerate()
                .map(|(site, &x)| marginals[site][x])
                .product()
        })
        .collect())
}

fn best_tag(spec: &GameSpec, bias: BiasBound) -> Result<(Tag, WinLoseBound)> {
    let mut best: Option<(Tag, WinLoseBound)> = None;
    for &tag in spec.tags() {
        let b = beta_win_for_tag(spec, tag, bias)?;
        if best.as_ref().map_or(true, |(_, cur)| b.beta_win > cur.beta_win) {
            best = Some((tag, b));
        }
    }
    Ok(best.expect("games have at least one tag"))
}

fn win_table(spec: &GameSpec, tag: Tag) -> Vec<bool> {
    let (_, s_max) = spec.score_range();
    spec.score_table(tag)
        .expect("declared tag")
        .iter()
        .map(|&s| s >= s_max - 1e-12 * s_max.abs().max(1.0))
        .collect()
}

/// Expected win probability of every strategy under `q`, in rank order.
fn strategy_values(spec: &GameSpec, tag: Tag, q: &[f64]) -> Result<Vec<f64>> {
    let dims = spec.dims();
    check_cap(dims.strategy_count())?;
    let wins = win_table(spec, tag);
    let n_out = dims.num_output_tuples();
    Ok(ResponseTables::new(dims)
        .map(|resp| {
            resp.iter()
                .enumerate()
                .filter(|(x, &a)| wins[x * n_out + a])
                .map(|(x, _)| q[x])
                .sum()
        })
        .collect())
}

struct Harness {
    dims: Dims,
    tags: Vec<Tag>,
    wins: Vec<Vec<bool>>,
    responses: Vec<Vec<usize>>,
    sampler: WeightedIndex<f64>,
    n_out: usize,
    max_attempts: u64,
}

impl Harness {
    fn new(strategy: &dyn Lhvm, spec: &GameSpec, q: &[f64], trials: u64) -> Result<Self> {
        let dims = spec.dims().clone();
        let responses = strategy
            .pool()
            .iter()
            .map(|s| {
                DeterministicStrategy::new(&dims, s.responses.clone())?;
                Ok(s.response_table(&dims))
            })
            .collect::<Result<Vec<_>>>()?;
        if responses.is_empty() {
            return Err(invalid(format!("strategy {} has an empty pool", strategy.name())));
        }
        let sampler = WeightedIndex::new(q).map_err(|e| invalid(format!("input distribution: {e}")))?;
        Ok(Self {
            n_out: dims.num_output_tuples(),
            tags: spec.tags().to_vec(),
            wins: spec.tags().iter().map(|&t| win_table(spec, t)).collect(),
            dims,
            responses,
            sampler,
            max_attempts: trials.saturating_mul(1000).saturating_add(1000),
        })
    }

    /// Runs attempts until `trials` are heralded, reporting each attempt as
    /// `(tag, input index, output index)`.
    fn run(
        &self,
        strategy: &mut dyn Lhvm,
        trials: u64,
        rng: &mut SimRng,
        mut sink: impl FnMut(Tag, usize, Option<usize>, bool),
    ) -> Result<History> {
        strategy.reset();
        let mut history = History::default();
        while history.trials < trials {
            if history.attempts >= self.max_attempts {
                return Err(Error::Precondition(format!(
                    "{} heralded only {} trials in {} attempts",
                    strategy.name(),
                    history.trials,
                    history.attempts
                )));
            }
            let tag = strategy.herald(&history, rng);
            if tag == NULL_TAG {
                let x = self.sampler.sample(rng);
                sink(tag, x, None, false);
                history.record(tag, None);
                continue;
            }
            let slot = self
                .tags
                .iter()
                .position(|&t| t == tag)
                .ok_or_else(|| invalid(format!("{} heralded undeclared tag {tag}", strategy.name())))?;
            let k = strategy.respond(&history, tag, rng);
            let resp = self.responses.get(k).ok_or_else(|| {
                invalid(format!("{} chose strategy {k} outside its pool", strategy.name()))
            })?;
            let x = self.sampler.sample(rng);
            let a = resp[x];
            let win = self.wins[slot][x * self.n_out + a];
            sink(tag, x, Some(a), win);
            history.record(tag, Some(win));
        }
        Ok(history)
    }
}

/// One replica of `strategy` against `spec`, recorded attempt by attempt.
pub fn run_lhvm(strategy: &mut dyn Lhvm, spec: &GameSpec, config: &SimConfig) -> Result<ExperimentData> {
    run_lhvm_replica(strategy, spec, config, 0)
}

pub fn run_lhvm_replica(
    strategy: &mut dyn Lhvm,
    spec: &GameSpec,
    config: &SimConfig,
    replica: u64,
) -> Result<ExperimentData> {
    let q = sampling_distribution(spec, config.bias, config.inputs)?;
    let harness = Harness::new(strategy, spec, &q, config.trials)?;
    let mut rng = replica_rng(config.seed, replica);
    let mut records = Vec::new();
    let dims = &harness.dims;
    harness.run(strategy, config.trials, &mut rng, |tag, x, a, _| {
        records.push(TrialRecord {
            index: records.len() as u64,
            tag,
            inputs: dims.input_tuple(x),
            outputs: a.map(|a| dims.output_tuple(a)),
        });
    })?;
    ExperimentData::new(records)
}

/// Empirical `Pr[C >= c]` with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub c: u64,
    pub hits: u64,
    pub replicas: u64,
    pub estimate: f64,
    pub stderr: f64,
}

pub const MIN_REPLICAS: u64 = 1000;

/// Monte Carlo estimate of `Pr[wins >= c]` after `config.trials` heralded
/// trials, for every `c` in `thresholds`, from one pass per replica.
pub fn mc_tail_estimate(
    strategy: &mut dyn Lhvm,
    spec: &GameSpec,
    config: &SimConfig,
    thresholds: &[u64],
) -> Result<Vec<TailEstimate>> {
    if spec.kind() != GameKind::WinLose {
        return Err(invalid("tail estimates count wins and need a win/lose game"));
    }
    if config.replicas < MIN_REPLICAS {
        return Err(domain(format!("at least {MIN_REPLICAS} replicas are required")));
    }
    let q = sampling_distribution(spec, config.bias, config.inputs)?;
    let harness = Harness::new(strategy, spec, &q, config.trials)?;
    let mut hits = vec![0u64; thresholds.len()];
    for r in 0..config.replicas {
        let mut rng = replica_rng(config.seed, r);
        let h = harness.run(strategy, config.trials, &mut rng, |_, _, _, _| {})?;
        for (hit, &c) in hits.iter_mut().zip(thresholds) {
            *hit += u64::from(h.wins >= c);
        }
    }
    let m = config.replicas as f64;
    Ok(thresholds
        .iter()
        .zip(hits)
        .map(|(&c, hits)| {
            let p = hits as f64 / m;
            TailEstimate {
                c,
                hits,
                replicas: config.replicas,
                estimate: p,
                stderr: (p * (1.0 - p) / m).sqrt(),
            }
        })
        .collect())
}

/// Always plays one deterministic strategy.
#[derive(Clone, Debug)]
pub struct Memoryless {
    tag: Tag,
    pool: Vec<DeterministicStrategy>,
}

impl Memoryless {
    pub fn new(tag: Tag, strategy: DeterministicStrategy) -> Self {
        Self { tag, pool: vec![strategy] }
    }
}

impl Lhvm for Memoryless {
    fn name(&self) -> &str {
        "optimal"
    }
    fn pool(&self) -> &[DeterministicStrategy] {
        &self.pool
    }
    fn has_memory(&self) -> bool {
        false
    }
    fn herald(&mut self, _: &History, _: &mut SimRng) -> Tag {
        self.tag
    }
    fn respond(&mut self, _: &History, _: Tag, _: &mut SimRng) -> usize {
        0
    }
}

/// The maximizer of the local winning probability, replayed every trial.
pub fn optimal_memoryless_strategy(spec: &GameSpec, bias: BiasBound) -> Result<(Memoryless, WinLoseBound)> {
    let (tag, bound) = best_tag(spec, bias)?;
    let strategy = bound.strategy.clone().expect("enumeration records its maximizer");
    Ok((Memoryless::new(tag, strategy), bound))
}

/// Cycles through the optimal strategies, moving on after every loss.
#[derive(Clone, Debug)]
pub struct Switcher {
    tag: Tag,
    pool: Vec<DeterministicStrategy>,
    current: usize,
}

impl Lhvm for Switcher {
    fn name(&self) -> &str {
        "switcher"
    }
    fn pool(&self) -> &[DeterministicStrategy] {
        &self.pool
    }
    fn has_memory(&self) -> bool {
        true
    }
    fn reset(&mut self) {
        self.current = 0;
    }
    fn herald(&mut self, _: &History, _: &mut SimRng) -> Tag {
        self.tag
    }
    fn respond(&mut self, history: &History, _: Tag, _: &mut SimRng) -> usize {
        if history.last_win == Some(false) {
            self.current = (self.current + 1) % self.pool.len();
        }
        self.current
    }
}

/// Plays optimally but heralds more eagerly after a loss than after a win.
#[derive(Clone, Debug)]
pub struct HeraldingAdversary {
    inner: Memoryless,
    after_win: f64,
    after_loss: f64,
}

impl Lhvm for HeraldingAdversary {
    fn name(&self) -> &str {
        "heralding"
    }
    fn pool(&self) -> &[DeterministicStrategy] {
        self.inner.pool()
    }
    fn has_memory(&self) -> bool {
        true
    }
    fn herald(&mut self, history: &History, rng: &mut SimRng) -> Tag {
        let p = if history.last_win == Some(true) { self.after_win } else { self.after_loss };
        if rng.gen_bool(p) {
            self.inner.tag
        } else {
            NULL_TAG
        }
    }
    fn respond(&mut self, _: &History, _: Tag, _: &mut SimRng) -> usize {
        0
    }
}

/// Memoryless mixture: an optimal strategy with probability `p_optimal`,
/// otherwise any strategy uniformly at random.
#[derive(Clone, Debug)]
pub struct Mixture {
    tag: Tag,
    pool: Vec<DeterministicStrategy>,
    optimal: Vec<usize>,
    p_optimal: f64,
}

impl Lhvm for Mixture {
    fn name(&self) -> &str {
        "mixture"
    }
    fn pool(&self) -> &[DeterministicStrategy] {
        &self.pool
    }
    fn has_memory(&self) -> bool {
        false
    }
    fn herald(&mut self, _: &History, _: &mut SimRng) -> Tag {
        self.tag
    }
    fn respond(&mut self, _: &History, _: Tag, rng: &mut SimRng) -> usize {
        if rng.gen_bool(self.p_optimal) {
            self.optimal[rng.gen_range(0..self.optimal.len())]
        } else {
            rng.gen_range(0..self.pool.len())
        }
    }
}

/// Knows the target `c` out of `n`: plays optimally while `c` is still
/// reachable and not yet reached, and its worst strategy otherwise.
#[derive(Clone, Debug)]
pub struct Gambler {
    tag: Tag,
    pool: Vec<DeterministicStrategy>,
    trials: u64,
    target: u64,
}

impl Lhvm for Gambler {
    fn name(&self) -> &str {
        "gambler"
    }
    fn pool(&self) -> &[DeterministicStrategy] {
        &self.pool
    }
    fn has_memory(&self) -> bool {
        true
    }
    fn herald(&mut self, _: &History, _: &mut SimRng) -> Tag {
        self.tag
    }
    fn respond(&mut self, history: &History, _: Tag, _: &mut SimRng) -> usize {
        let remaining = self.trials.saturating_sub(history.trials);
        let live = history.wins < self.target && history.wins + remaining >= self.target;
        if live {
            0
        } else {
            1
        }
    }
}

pub const ADVERSARIES: [&str; 5] = ["optimal", "switcher", "heralding", "mixture", "gambler"];

/// Builds a named adversary for `spec` whose strategies are optimal for the
/// input distribution `q`. `target` is the win count the gambler aims for.
pub fn adversary(name: &str, spec: &GameSpec, q: &[f64], trials: u64, target: u64) -> Result<Box<dyn Lhvm>> {
    if spec.kind() != GameKind::WinLose {
        return Err(invalid("adversaries are defined for win/lose games"));
    }
    let mut best: Option<(Tag, Vec<f64>)> = None;
    for &tag in spec.tags() {
        let v = strategy_values(spec, tag, q)?;
        let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if best.as_ref().map_or(true, |(_, b)| top > b.iter().cloned().fold(f64::NEG_INFINITY, f64::max)) {
            best = Some((tag, v));
        }
    }
    let (tag, values) = best.expect("games have at least one tag");
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dims = spec.dims();
    let optimal: Vec<usize> = (0..values.len()).filter(|&i| values[i] >= top - 1e-12).collect();
    let worst = (0..values.len())
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .expect("at least one strategy");
    let strat = |i: usize| DeterministicStrategy::from_rank(dims, i as u128);
    Ok(match name {
        "optimal" => Box::new(Memoryless::new(tag, strat(optimal[0]))),
        "switcher" => Box::new(Switcher { tag, pool: optimal.iter().map(|&i| strat(i)).collect(), current: 0 }),
        "heralding" => Box::new(HeraldingAdversary {
            inner: Memoryless::new(tag, strat(optimal[0])),
            after_win: 0.3,
            after_loss: 0.9,
        }),
        "mixture" => Box::new(Mixture {
            tag,
            pool: (0..values.len()).map(strat).collect(),
            optimal,
            p_optimal: 0.9,
        }),
        "gambler" => Box::new(Gambler { tag, pool: vec![strat(optimal[0]), strat(worst)], trials, target }),
        other => {
            return Err(invalid(format!(
                "unknown strategy {other:?}; expected one of {}",
                ADVERSARIES.join(", ")
            )))
        }
    })
}

pub const EXACT_TAIL_MAX_N: u64 = 25;

/// `Pr[wins >= c]` for `n` i.i.d. Bernoulli(`beta`) trials by dynamic
/// programming over the win count.
pub fn exact_tail_iid(beta: f64, n: u64, c: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(domain(format!("beta = {beta} outside [0, 1]")));
    }
    if n > EXACT_TAIL_MAX_N {
        return Err(domain(format!("exact tails are limited to n <= {EXACT_TAIL_MAX_N}")));
    }
    if c == 0 {
        return Ok(1.0);
    }
    let mut dist = vec![0.0; n as usize + 1];
    dist[0] = 1.0;
    for i in 0..n as usize {
        for w in (0..=i + 1).rev() {
            let stay = if w <= i { dist[w] * (1.0 - beta) } else { 0.0 };
            let step = if w > 0 { dist[w - 1] * beta } else { 0.0 };
            dist[w] = stay + step;
        }
    }
    Ok(dist.iter().skip(c as usize).sum())
}

/// Largest `Pr[wins >= c]` over `n` trials that any LHVM with full memory
/// can reach, by backward induction over the tree of histories.
///
/// At every history node the model picks a tag and a deterministic
/// strategy; the inputs follow the game's distribution.
pub fn adversarial_memory_search(spec: &GameSpec, n: u64, c: u64) -> Result<f64> {
    if spec.kind() != GameKind::WinLose {
        return Err(invalid("memory search needs a win/lose game"));
    }
    if c == 0 {
        return Ok(1.0);
    }
    if c > n {
        return Ok(0.0);
    }
    let dims = spec.dims();
    let p = spec.input_distribution();
    let live: Vec<usize> = (0..p.len()).filter(|&x| p[x] > 0.0).collect();
    let branching = (live.len() * dims.num_output_tuples()) as u128;
    let nodes = (0..n).fold((0u128, 1u128), |(sum, level), _| {
        (sum.saturating_add(level), level.saturating_mul(branching))
    });
    let per_node = dims.strategy_count().saturating_mul(spec.tags().len() as u128);
    check_cap(nodes.0.saturating_mul(per_node))?;

    let tables: Vec<Vec<usize>> = ResponseTables::new(dims).collect();
    let wins: Vec<Vec<bool>> = spec.tags().iter().map(|&t| win_table(spec, t)).collect();
    let search = TreeSearch { p, live, tables, wins, n_out: dims.num_output_tuples(), n, c };
    Ok(search.value(0, 0))
}

struct TreeSearch<'a> {
    p: &'a [f64],
    live: Vec<usize>,
    tables: Vec<Vec<usize>>,
    wins: Vec<Vec<bool>>,
    n_out: usize,
    n: u64,
    c: u64,
}

impl TreeSearch<'_> {
    /// Value of a node at `depth` with `won` wins; every child is a distinct
    /// history and is searched separately.
    fn value(&self, depth: u64, won: u64) -> f64 {
        if won >= self.c {
            return 1.0;
        }
        if won + (self.n - depth) < self.c {
            return 0.0;
        }
        let mut best = 0.0f64;
        for wins in &self.wins {
            // Children (x, a): the outcome depends only on whether (x, a) wins.
            let child: Vec<Vec<f64>> = self
                .live
                .iter()
                .map(|&x| {
                    (0..self.n_out)
                        .map(|a| self.value(depth + 1, won + u64::from(wins[x * self.n_out + a])))
                        .collect()
                })
                .collect();
            for table in &self.tables {
                let v: f64 = self
                    .live
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| self.p[x] * child[i][table[x]])
                    .sum();
                best = best.max(v);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::score_experiment;
    use crate::games;
    use crate::tails::binom_tail;

    fn chsh_adversary(name: &str) -> Box<dyn Lhvm> {
        let spec = games::chsh();
        adversary(name, &spec, spec.input_distribution(), 100, 80).unwrap()
    }

    #[test]
    fn runs_are_reproducible() {
        let spec = games::chsh();
        let config = SimConfig::new(7, 1, 50);
        let mut s = chsh_adversary("mixture");
        let a = run_lhvm(s.as_mut(), &spec, &config).unwrap();
        let b = run_lhvm(s.as_mut(), &spec, &config).unwrap();
        assert_eq!(a, b);
        let c = run_lhvm(s.as_mut(), &spec, &SimConfig::new(8, 1, 50)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn always_win_strategy_wins_every_trial() {
        let dims = Dims::uniform(2, 2, 2).unwrap();
        let spec = GameSpec::from_fn(dims.clone(), vec![0.25; 4], |_, a| f64::from(a[0] == 0)).unwrap();
        let mut s = Memoryless::new(1, DeterministicStrategy::from_rank(&dims, 0));
        let data = run_lhvm(&mut s, &spec, &SimConfig::new(1, 1, 40)).unwrap();
        assert_eq!(score_experiment(&spec, &data).unwrap().wins, Some(40));
    }

    #[test]
    fn heralding_stops_at_target() {
        let spec = games::chsh();
        let (opt, _) = optimal_memoryless_strategy(&spec, BiasBound::NONE).unwrap();
        let mut s = HeraldingAdversary { inner: opt, after_win: 0.1, after_loss: 0.1 };
        let data = run_lhvm(&mut s, &spec, &SimConfig::new(3, 1, 100)).unwrap();
        assert_eq!(data.trials(), 100);
        assert!(data.records().last().unwrap().is_trial());
        assert!((600..1600).contains(&data.attempts()), "{}", data.attempts());
    }

    #[test]
    fn optimal_strategy_examples() {
        let spec = games::chsh();
        let (s, b) = optimal_memoryless_strategy(&spec, BiasBound::NONE).unwrap();
        assert_eq!(b.beta_win, 0.75);
        let wins = win_table(&spec, 1);
        let resp = s.pool()[0].response_table(spec.dims());
        assert_eq!(resp.iter().enumerate().filter(|(x, &a)| wins[x * 4 + a]).count(), 3);
        let (_, b) = optimal_memoryless_strategy(&games::mermin(), BiasBound::NONE).unwrap();
        assert_eq!(b.beta_win, 0.75);
    }

    #[test]
    fn out_of_pool_choice_is_an_error() {
        struct Bad(Vec<DeterministicStrategy>);
        impl Lhvm for Bad {
            fn name(&self) -> &str {
                "bad"
            }
            fn pool(&self) -> &[DeterministicStrategy] {
                &self.0
            }
            fn has_memory(&self) -> bool {
                false
            }
            fn herald(&mut self, _: &History, _: &mut SimRng) -> Tag {
                1
            }
            fn respond(&mut self, _: &History, _: Tag, _: &mut SimRng) -> usize {
                3
            }
        }
        let spec = games::chsh();
        let mut bad = Bad(vec![DeterministicStrategy::from_rank(spec.dims(), 0)]);
        assert!(run_lhvm(&mut bad, &spec, &SimConfig::new(0, 1, 5)).is_err());
        assert!(adversary("oracle", &spec, spec.input_distribution(), 10, 5).is_err());
    }

    #[test]
    fn tail_estimate_edges() {
        let spec = games::chsh();
        let mut s = chsh_adversary("optimal");
        let est = mc_tail_estimate(s.as_mut(), &spec, &SimConfig::new(1, 1000, 10), &[0, 11]).unwrap();
        assert_eq!((est[0].estimate, est[0].stderr), (1.0, 0.0));
        assert_eq!(est[1].estimate, 0.0);
        assert!(mc_tail_estimate(s.as_mut(), &spec, &SimConfig::new(1, 10, 10), &[1]).is_err());
    }

    #[test]
    fn tail_estimate_tracks_binomial() {
        let spec = games::chsh();
        let mut s = chsh_adversary("optimal");
        let est = mc_tail_estimate(s.as_mut(), &spec, &SimConfig::new(11, 20_000, 20), &[15, 17]).unwrap();
        for e in est {
            let exact = binom_tail(20, e.c, 0.75).unwrap().value;
            assert!((e.estimate - exact).abs() < 4.0 * e.stderr, "{e:?} vs {exact}");
        }
    }

    #[test]
    fn worst_case_inputs_follow_bias() {
        let spec = games::chsh();
        let bias = BiasBound::symmetric(0.1).unwrap();
        let q = sampling_distribution(&spec, bias, InputPolicy::WorstCase).unwrap();
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (_, b) = optimal_memoryless_strategy(&spec, bias).unwrap();
        let top = strategy_values(&spec, 1, &q).unwrap().into_iter().fold(0.0, f64::max);
        assert!((top - b.beta_win).abs() < 1e-12);
        assert_eq!(sampling_distribution(&spec, bias, InputPolicy::Nominal).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn exact_tail_examples() {
        assert_eq!(exact_tail_iid(0.5, 2, 1).unwrap(), 0.75);
        assert_eq!(exact_tail_iid(0.3, 9, 0).unwrap(), 1.0);
        let dp = exact_tail_iid(0.75, 12, 10).unwrap();
        let closed = binom_tail(12, 10, 0.75).unwrap().value;
        assert!((dp / closed - 1.0).abs() < 1e-12);
        assert!(exact_tail_iid(0.5, 26, 3).is_err());
    }

    #[test]
    fn memory_search_examples() {
        let spec = games::chsh();
        assert_eq!(adversarial_memory_search(&spec, 2, 2).unwrap(), 0.5625);
        assert_eq!(adversarial_memory_search(&spec, 1, 1).unwrap(), 0.75);
        assert_eq!(adversarial_memory_search(&spec, 3, 0).unwrap(), 1.0);
        assert_eq!(adversarial_memory_search(&spec, 3, 4).unwrap(), 0.0);
        assert!(matches!(
            adversarial_memory_search(&spec, 12, 6),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn seeds_differ_per_replica() {
        let a: u64 = replica_rng(5, 0).gen();
        let b: u64 = replica_rng(5, 1).gen();
        let c: u64 = replica_rng(5, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
