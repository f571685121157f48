//! The local polytope: deterministic strategies, classical bounds, the
//! membership test and Bell-inequality selection.

use serde::{Deserialize, Serialize};

use super::simplex::{simplex_solve, LpProblem, LpStatus, Sense};
use crate::error::{invalid, Error, Result};
use crate::game::{Behavior, DeterministicStrategy, Dims, GameSpec, SiteBox};

/// Default ceiling on enumerated strategies.
pub const DEFAULT_STRATEGY_CAP: u128 = 10_000_000;

/// The enumeration cap, overridable through `BELLCERT_CAP`.
pub fn strategy_cap() -> u128 {
    std::env::var("BELLCERT_CAP")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_STRATEGY_CAP)
}

pub(crate) fn check_cap(requested: u128) -> Result<()> {
    let cap = strategy_cap();
    if requested > cap {
        return Err(Error::CapExceeded { requested, cap });
    }
    Ok(())
}

/// Every deterministic strategy in canonical order.
pub fn enumerate_strategies(dims: &Dims) -> Result<Vec<DeterministicStrategy>> {
    let count = dims.strategy_count();
    check_cap(count)?;
    Ok((0..count)
        .map(|r| DeterministicStrategy::from_rank(dims, r))
        .collect())
}

/// Iterates response tables (output index per input index) of every
/// strategy in canonical order without materialising strategy objects.
pub(crate) struct ResponseTables<'a> {
    dims: &'a Dims,
    // digits[site][input]
    digits: Vec<Vec<usize>>,
    done: bool,
    inputs: Vec<Vec<usize>>,
}

impl<'a> ResponseTables<'a> {
    pub(crate) fn new(dims: &'a Dims) -> Self {
        let inputs = (0..dims.num_input_tuples())
            .map(|i| dims.input_tuple(i))
            .collect();
        Self {
            dims,
            digits: dims.inputs().iter().map(|&k| vec![0; k]).collect(),
            done: false,
            inputs,
        }
    }

    fn current(&self) -> Vec<usize> {
        self.inputs
            .iter()
            .map(|x| {
                x.iter().enumerate().fold(0, |acc, (site, &xi)| {
                    acc * self.dims.outputs()[site] + self.digits[site][xi]
                })
            })
            .collect()
    }

    fn advance(&mut self) {
        for site in (0..self.digits.len()).rev() {
            let k = self.dims.outputs()[site];
            for slot in self.digits[site].iter_mut().rev() {
                *slot += 1;
                if *slot < k {
                    return;
                }
                *slot = 0;
            }
        }
        self.done = true;
    }
}

impl Iterator for ResponseTables<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current();
        self.advance();
        Some(out)
    }
}

/// Local extremes of a game's expected score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalBound {
    pub beta_max: f64,
    pub beta_min: f64,
    pub argmax: DeterministicStrategy,
    pub argmin: DeterministicStrategy,
}

/// Extremes of `sum_x p(x) s(x, lambda(x))` over deterministic strategies,
/// taken over every tag (the heralding station may pick any of them).
/// Ties go to the lowest canonical rank.
pub fn classical_bound(spec: &GameSpec) -> Result<ClassicalBound> {
    let dims = spec.dims();
    check_cap(dims.strategy_count())?;
    let n_out = dims.num_output_tuples();
    let coefs: Vec<Vec<f64>> = spec
        .tags()
        .iter()
        .map(|&t| spec.bell_coefficients(t).expect("declared tag"))
        .collect();
    let mut best = (f64::NEG_INFINITY, 0u128);
    let mut worst = (f64::INFINITY, 0u128);
    for (rank, resp) in ResponseTables::new(dims).enumerate() {
        for table in &coefs {
            let v: f64 = resp
                .iter()
                .enumerate()
                .map(|(x, &a)| table[x * n_out + a])
                .sum();
            if v > best.0 {
                best = (v, rank as u128);
            }
            if v < worst.0 {
                worst = (v, rank as u128);
            }
        }
    }
    Ok(ClassicalBound {
        beta_max: best.0,
        beta_min: worst.0,
        argmax: DeterministicStrategy::from_rank(dims, best.1),
        argmin: DeterministicStrategy::from_rank(dims, worst.1),
    })
}

/// Bell inequality `sum s(x,a) p(a|x) <= bound` with coefficients in `[0,1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellInequality {
    pub dims: Dims,
    /// Indexed `input_idx * n_out + output_idx`.
    pub coefficients: Vec<f64>,
    pub bound: f64,
    /// `sum s p - bound` for the behavior the inequality was selected for.
    pub violation: f64,
}

impl BellInequality {
    /// `sum_{x,a} s(x,a) p(a|x)`.
    pub fn value(&self, behavior: &Behavior) -> f64 {
        self.coefficients
            .iter()
            .zip(behavior.table())
            .map(|(s, p)| s * p)
            .sum()
    }

    /// Largest value over deterministic strategies.
    pub fn local_maximum(&self) -> Result<f64> {
        check_cap(self.dims.strategy_count())?;
        let n_out = self.dims.num_output_tuples();
        Ok(ResponseTables::new(&self.dims)
            .map(|resp| {
                resp.iter()
                    .enumerate()
                    .map(|(x, &a)| self.coefficients[x * n_out + a])
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// The game whose expected score under `input_distribution` is this
    /// inequality's left-hand side: `s(a|x) = s(x,a) / p(x)`.
    pub fn to_game(&self, input_distribution: Vec<f64>) -> Result<GameSpec> {
        let n_out = self.dims.num_output_tuples();
        if input_distribution.len() != self.dims.num_input_tuples() {
            return Err(invalid("input distribution has the wrong length"));
        }
        let mut table = Vec::with_capacity(self.coefficients.len());
        for (cell, &s) in self.coefficients.iter().enumerate() {
            let p = input_distribution[cell / n_out];
            if p > 0.0 {
                table.push(s / p);
            } else if s == 0.0 {
                table.push(0.0);
            } else {
                return Err(invalid("a zero-probability input carries a nonzero coefficient"));
            }
        }
        GameSpec::new(self.dims.clone(), vec![1], vec![table], input_distribution)
    }
}

/// Verdict of the local-polytope membership test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Locality {
    /// Mixture weights `(strategy, q)` reproducing the behavior.
    Local {
        weights: Vec<(DeterministicStrategy, f64)>,
    },
    /// A Bell inequality the behavior violates.
    NonLocal { certificate: BellInequality },
}

impl Locality {
    pub fn is_local(&self) -> bool {
        matches!(self, Locality::Local { .. })
    }
}

/// Decides whether `behavior` is a mixture of deterministic strategies.
///
/// Feasibility is settled by phase one of the simplex method. A non-local
/// verdict comes with the inequality returned by [`select_inequality`],
/// which separates the behavior from every deterministic strategy.
pub fn is_local(behavior: &Behavior) -> Result<Locality> {
    let dims = behavior.dims();
    check_cap(dims.strategy_count())?;
    let n_out = dims.num_output_tuples();
    let tables: Vec<Vec<usize>> = ResponseTables::new(dims).collect();
    let n_strat = tables.len();

    let mut lp = LpProblem::maximize(vec![0.0; n_strat]);
    for cell in 0..dims.num_cells() {
        let (x, a) = (cell / n_out, cell % n_out);
        let row = tables
            .iter()
            .map(|resp| f64::from(resp[x] == a))
            .collect();
        lp.constraint(row, Sense::Eq, behavior.table()[cell]);
    }
    lp.constraint(vec![1.0; n_strat], Sense::Eq, 1.0);
    let sol = simplex_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let weights = sol
                .x
                .iter()
                .enumerate()
                .filter(|(_, &q)| q > 1e-12)
                .map(|(r, &q)| (DeterministicStrategy::from_rank(dims, r as u128), q))
                .collect();
            Ok(Locality::Local { weights })
        }
        LpStatus::Infeasible => {
            let certificate = select_inequality(behavior)?;
            if certificate.violation <= 1e-9 {
                return Err(Error::Lp(format!(
                    "membership infeasible but best violation is only {:e}",
                    certificate.violation
                )));
            }
            Ok(Locality::NonLocal { certificate })
        }
        other => Err(Error::Lp(format!("membership LP ended with {other:?}"))),
    }
}

/// Maximizes `sum s p - S` subject to `sum s d_lambda <= S` for every
/// deterministic strategy and `0 <= s <= 1`.
pub fn select_inequality(behavior: &Behavior) -> Result<BellInequality> {
    let dims = behavior.dims();
    check_cap(dims.strategy_count())?;
    let n_out = dims.num_output_tuples();
    let cells = dims.num_cells();

    let mut objective: Vec<f64> = behavior.table().to_vec();
    objective.push(-1.0);
    let mut lp = LpProblem::maximize(objective);
    for c in 0..cells {
        lp.bound(c, 0.0, 1.0);
    }
    for resp in ResponseTables::new(dims) {
        let mut row = vec![0.0; cells + 1];
        for (x, &a) in resp.iter().enumerate() {
            row[x * n_out + a] = 1.0;
        }
        row[cells] = -1.0;
        lp.constraint(row, Sense::Le, 0.0);
    }
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(format!("selection LP ended with {:?}", sol.status)));
    }
    let coefficients: Vec<f64> = sol.x[..cells].iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let mut ineq = BellInequality {
        dims: dims.clone(),
        coefficients,
        bound: 0.0,
        violation: 0.0,
    };
    // Make the bound exactly the local maximum of the returned coefficients.
    ineq.bound = ineq.local_maximum()?;
    ineq.violation = ineq.value(behavior) - ineq.bound;
    Ok(ineq)
}

/// Brute-force search for the best inequality with `{0,1}` coefficients.
/// Only tables with at most 20 cells are supported.
pub fn select_winlose_inequality(behavior: &Behavior) -> Result<BellInequality> {
    let dims = behavior.dims();
    let cells = dims.num_cells();
    if cells > 20 {
        return Err(invalid(format!(
            "{cells} cells: the 0/1 search supports at most 20"
        )));
    }
    check_cap(dims.strategy_count())?;
    let n_out = dims.num_output_tuples();
    let tables: Vec<Vec<usize>> = ResponseTables::new(dims).collect();
    let mut best: Option<(f64, u32, f64)> = None;
    for mask in 0u32..(1u32 << cells) {
        let bit = |cell: usize| (mask >> cell) & 1;
        let value: f64 = (0..cells)
            .filter(|&c| bit(c) == 1)
            .map(|c| behavior.table()[c])
            .sum();
        let bound = tables
            .iter()
            .map(|resp| {
                resp.iter()
                    .enumerate()
                    .filter(|(x, &a)| bit(x * n_out + a) == 1)
                    .count()
            })
            .max()
            .unwrap_or(0) as f64;
        let violation = value - bound;
        if best.map_or(true, |(v, _, _)| violation > v + 1e-12) {
            best = Some((violation, mask, bound));
        }
    }
    let (violation, mask, bound) = best.expect("at least the empty table");
    Ok(BellInequality {
        dims: dims.clone(),
        coefficients: (0..cells).map(|c| f64::from((mask >> c) & 1)).collect(),
        bound,
        violation,
    })
}

/// Maximizes `weights . q` over `{q : |q_x - p_x| <= tau, sum q = 1}`.
/// Returns the optimum and a maximizer.
pub fn box_polytope_max(weights: &[f64], sitebox: &SiteBox) -> Result<(f64, Vec<f64>)> {
    let k = sitebox.target.len();
    if weights.len() != k {
        return Err(invalid("one weight per input is required"));
    }
    if sitebox.tau == 0.0 {
        let v = weights.iter().zip(&sitebox.target).map(|(w, p)| w * p).sum();
        return Ok((v, sitebox.target.clone()));
    }
    let mut lp = LpProblem::maximize(weights.to_vec());
    for (x, p) in sitebox.target.iter().enumerate() {
        lp.bound(x, (p - sitebox.tau).max(0.0), (p + sitebox.tau).min(1.0));
    }
    lp.constraint(vec![1.0; k], Sense::Eq, 1.0);
    let sol = simplex_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok((sol.objective, sol.x)),
        other => Err(Error::Lp(format!("bias box LP ended with {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games;

    fn chsh_dims() -> Dims {
        Dims::uniform(2, 2, 2).unwrap()
    }

    fn pr_box() -> Behavior {
        Behavior::from_fn(chsh_dims(), |x, a| {
            if (a[0] ^ a[1]) == x[0] & x[1] {
                0.5
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn strategy_counts() {
        assert_eq!(enumerate_strategies(&chsh_dims()).unwrap().len(), 16);
        assert_eq!(enumerate_strategies(&Dims::uniform(3, 2, 2).unwrap()).unwrap().len(), 64);
        assert_eq!(enumerate_strategies(&Dims::uniform(1, 1, 3).unwrap()).unwrap().len(), 3);
    }

    #[test]
    fn response_tables_match_strategy_objects() {
        let d = Dims::new(vec![2, 3], vec![3, 2]).unwrap();
        for (rank, resp) in ResponseTables::new(&d).enumerate() {
            let s = DeterministicStrategy::from_rank(&d, rank as u128);
            assert_eq!(resp, s.response_table(&d));
        }
        assert_eq!(ResponseTables::new(&d).count() as u128, d.strategy_count());
    }

    #[test]
    fn classical_bounds() {
        let b = classical_bound(&games::chsh()).unwrap();
        assert_eq!(b.beta_max, 0.75);
        assert_eq!(b.beta_min, 0.25);
        assert_eq!(classical_bound(&games::mermin()).unwrap().beta_max, 0.75);
        let flat = GameSpec::from_fn(chsh_dims(), vec![0.25; 4], |_, _| 0.4).unwrap();
        let b = classical_bound(&flat).unwrap();
        assert!((b.beta_max - 0.4).abs() < 1e-15 && (b.beta_min - 0.4).abs() < 1e-15);
        let b = classical_bound(&games::cglmp(3).unwrap()).unwrap();
        assert!((b.beta_max - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let huge = Dims::uniform(2, 30, 2).unwrap();
        assert!(matches!(enumerate_strategies(&huge), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn uniform_behavior_is_local() {
        let u = Behavior::from_fn(chsh_dims(), |_, _| 0.25).unwrap();
        match is_local(&u).unwrap() {
            Locality::Local { weights } => {
                let total: f64 = weights.iter().map(|(_, q)| q).sum();
                assert!((total - 1.0).abs() < 1e-9);
                // The mixture reproduces the behavior.
                let mut table = vec![0.0; 16];
                for (s, q) in &weights {
                    for (c, d) in s.behavior(&chsh_dims()).table().iter().enumerate() {
                        table[c] += q * d;
                    }
                }
                for (got, want) in table.iter().zip(u.table()) {
                    assert!((got - want).abs() < 1e-9);
                }
            }
            other => panic!("expected local, got {other:?}"),
        }
    }

    #[test]
    fn pr_box_is_nonlocal() {
        let pr = pr_box();
        let verdict = is_local(&pr).unwrap();
        let Locality::NonLocal { certificate } = verdict else {
            panic!("PR box classified local");
        };
        assert!(certificate.violation >= 0.25);
        assert!(certificate.local_maximum().unwrap() <= certificate.bound + 1e-9);
    }

    #[test]
    fn deterministic_behaviors_are_local() {
        let d = chsh_dims();
        for s in enumerate_strategies(&d).unwrap() {
            assert!(is_local(&s.behavior(&d)).unwrap().is_local());
        }
    }

    #[test]
    fn winlose_search_finds_chsh_for_pr_box() {
        let ineq = select_winlose_inequality(&pr_box()).unwrap();
        assert!((ineq.violation - 1.0).abs() < 1e-12);
        let big = Behavior::from_fn(Dims::uniform(2, 3, 2).unwrap(), |_, _| 0.25).unwrap();
        assert!(select_winlose_inequality(&big).is_err());
    }

    #[test]
    fn bias_box_examples() {
        let sb = SiteBox::new(vec![0.5, 0.5], 0.0).unwrap();
        assert_eq!(box_polytope_max(&[1.0, 3.0], &sb).unwrap().0, 2.0);
        let sb = SiteBox::new(vec![0.5, 0.5], 0.1).unwrap();
        let (v, q) = box_polytope_max(&[1.0, 0.0], &sb).unwrap();
        assert!((v - 0.6).abs() < 1e-12);
        assert!((q[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn bias_box_matches_vertex_enumeration() {
        let targets = [
            vec![0.25; 4],
            vec![0.1, 0.2, 0.3, 0.4],
            vec![0.4, 0.3, 0.2, 0.1],
        ];
        let weights = [
            [0.3, -1.0, 2.0, 0.5],
            [1.0, 1.0, 1.0, 1.0],
            [-0.2, 0.7, 0.1, -0.9],
        ];
        for t in &targets {
            for w in &weights {
                let sb = SiteBox::new(t.clone(), 0.07).unwrap();
                let brute = sb
                    .vertices()
                    .iter()
                    .map(|v| v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                let (lp, _) = box_polytope_max(w, &sb).unwrap();
                assert!((lp - brute).abs() < 1e-12, "{lp} vs {brute}");
            }
        }
    }
}
