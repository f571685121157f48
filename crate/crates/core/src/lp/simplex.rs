//! Dense two-phase tableau simplex.
//!
//! Pricing is Dantzig's largest reduced cost until `2 * (rows + cols)`
//! pivots have been made, after which Bland's smallest-index rule takes
//! over so degenerate problems cannot cycle.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Maximize,
    Minimize,
}

/// `opt c.x  s.t.  rows[i].x (sense_i) rhs_i,  lo_j <= x_j <= hi_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub direction: Direction,
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    /// Per-variable `(lower, upper)`; either may be infinite.
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    /// A problem over `objective.len()` nonnegative variables.
    pub fn new(direction: Direction, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            direction,
            objective,
            rows: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Direction::Maximize, objective)
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Direction::Minimize, objective)
    }

    pub fn constraint(&mut self, row: Vec<f64>, sense: Sense, rhs: f64) -> &mut Self {
        self.rows.push(row);
        self.senses.push(sense);
        self.rhs.push(rhs);
        self
    }

    pub fn bound(&mut self, var: usize, lo: f64, hi: f64) -> &mut Self {
        self.bounds[var] = (lo, hi);
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if self.rows.len() != self.senses.len() || self.rows.len() != self.rhs.len() {
            return Err(invalid("row, sense and rhs counts differ"));
        }
        if self.bounds.len() != n {
            return Err(invalid("one bound pair per variable is required"));
        }
        if let Some(i) = self.rows.iter().position(|r| r.len() != n) {
            return Err(invalid(format!("row {i} has the wrong number of coefficients")));
        }
        let finite = self
            .objective
            .iter()
            .chain(self.rows.iter().flatten())
            .chain(&self.rhs)
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("LP data must be finite"));
        }
        if self
            .bounds
            .iter()
            .any(|&(lo, hi)| lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY)
        {
            return Err(invalid("invalid variable bounds"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The pivot budget ran out before a verdict.
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value; meaningful only when optimal.
    pub objective: f64,
    pub x: Vec<f64>,
    /// One multiplier per constraint row, `d objective / d rhs_i`.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// How an original variable is expressed through standard-form columns.
#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// `x = offset + sign * y_col`
    Shift { col: usize, offset: f64, sign: f64 },
    /// `x = y_pos - y_neg`
    Free { pos: usize, neg: usize },
}

struct Tableau {
    m: usize,
    width: usize,
    // m rows of `width + 1` entries; the last entry is the rhs.
    t: Vec<f64>,
    // reduced costs, plus objective value in the last slot
    z: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    bland_after: usize,
    max_iterations: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.width + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.t[r * (self.width + 1) + self.width]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width + 1;
        let inv = 1.0 / self.t[pr * w + pc];
        for c in 0..w {
            self.t[pr * w + c] *= inv;
        }
        self.t[pr * w + pc] = 1.0;
        let (before, rest) = self.t.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[pc];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[pc] = 0.0;
            }
        }
        let f = self.z[pc];
        if f != 0.0 {
            for (v, p) in self.z.iter_mut().zip(prow.iter()) {
                *v -= f * p;
            }
            self.z[pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.iterations += 1;
    }

    /// Sets the reduced-cost row for maximizing `cost . y`.
    fn price(&mut self, cost: &[f64]) {
        let w = self.width + 1;
        self.z = vec![0.0; w];
        for (c, z) in self.z.iter_mut().enumerate().take(self.width) {
            *z = -cost[c];
        }
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for c in 0..w {
                    self.z[c] += cb * self.t[r * w + c];
                }
            }
        }
    }

    /// Runs primal simplex iterations over the columns allowed by `enter`.
    fn optimize(&mut self, enter: &dyn Fn(usize) -> bool) -> LpStatus {
        loop {
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            let bland = self.iterations >= self.bland_after;
            let mut pc = None;
            let mut best = -COST_TOL;
            for c in (0..self.width).filter(|&c| enter(c)) {
                let d = self.z[c];
                if d < best || (bland && d < -COST_TOL) {
                    pc = Some(c);
                    best = d;
                    if bland {
                        break;
                    }
                }
            }
            let Some(pc) = pc else {
                return LpStatus::Optimal;
            };
            let mut pr: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for r in 0..self.m {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let q = self.rhs(r).max(0.0) / a;
                    let better = match pr {
                        None => true,
                        Some(p) => {
                            q < ratio - 1e-12
                                || (q <= ratio + 1e-12 && self.basis[r] < self.basis[p])
                        }
                    };
                    if better {
                        pr = Some(r);
                        ratio = q;
                    }
                }
            }
            match pr {
                Some(pr) => self.pivot(pr, pc),
                None => return LpStatus::Unbounded,
            }
        }
    }
}

/// Solves `problem` with the two-phase method.
pub fn simplex_solve(problem: &LpProblem) -> Result<LpSolution> {
    problem.check()?;
    let n = problem.num_vars();

    // Standard form: y >= 0 columns for the structural variables.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut extra_rows: Vec<(usize, f64)> = Vec::new(); // y_col <= ub
    for &(lo, hi) in &problem.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: ncols, offset: lo, sign: 1.0 });
            if hi.is_finite() {
                extra_rows.push((ncols, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Shift { col: ncols, offset: hi, sign: -1.0 });
            ncols += 1;
        } else {
            maps.push(VarMap::Free { pos: ncols, neg: ncols + 1 });
            ncols += 2;
        }
    }
    let structural = ncols;

    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for ((row, &sense), &b) in problem.rows.iter().zip(&problem.senses).zip(&problem.rhs) {
        let mut r = vec![0.0; structural];
        let mut shift = 0.0;
        for (j, &a) in row.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, offset, sign } => {
                    r[col] += a * sign;
                    shift += a * offset;
                }
                VarMap::Free { pos, neg } => {
                    r[pos] += a;
                    r[neg] -= a;
                }
            }
        }
        rows.push((r, sense, b - shift));
    }
    let user_rows = rows.len();
    for &(col, ub) in &extra_rows {
        let mut r = vec![0.0; structural];
        r[col] = 1.0;
        rows.push((r, Sense::Le, ub));
    }

    let mut cost = vec![0.0; structural];
    let dir = match problem.direction {
        Direction::Maximize => 1.0,
        Direction::Minimize => -1.0,
    };
    for (j, &c) in problem.objective.iter().enumerate() {
        match maps[j] {
            VarMap::Shift { col, sign, .. } => cost[col] += dir * c * sign,
            VarMap::Free { pos, neg } => {
                cost[pos] += dir * c;
                cost[neg] -= dir * c;
            }
        }
    }

    // Flip rows to nonnegative rhs, then add slack/surplus/artificial columns.
    let m = rows.len();
    let mut flip = vec![1.0; m];
    for (i, (r, sense, b)) in rows.iter_mut().enumerate() {
        if *b < 0.0 {
            flip[i] = -1.0;
            r.iter_mut().for_each(|v| *v = -*v);
            *b = -*b;
            *sense = match *sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    let n_slack = rows.iter().filter(|(_, s, _)| *s != Sense::Eq).count();
    let n_art = rows.iter().filter(|(_, s, _)| *s != Sense::Le).count();
    let width = structural + n_slack + n_art;
    let art_start = structural + n_slack;

    let w = width + 1;
    let mut t = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let mut unit_col = vec![0; m];
    let mut next_slack = structural;
    let mut next_art = art_start;
    for (i, (r, sense, b)) in rows.iter().enumerate() {
        t[i * w..i * w + structural].copy_from_slice(r);
        t[i * w + width] = *b;
        match sense {
            Sense::Le => {
                t[i * w + next_slack] = 1.0;
                basis[i] = next_slack;
                unit_col[i] = next_slack;
                next_slack += 1;
            }
            Sense::Ge => {
                t[i * w + next_slack] = -1.0;
                next_slack += 1;
                t[i * w + next_art] = 1.0;
                basis[i] = next_art;
                unit_col[i] = next_art;
                next_art += 1;
            }
            Sense::Eq => {
                t[i * w + next_art] = 1.0;
                basis[i] = next_art;
                unit_col[i] = next_art;
                next_art += 1;
            }
        }
    }

    let mut tab = Tableau {
        m,
        width,
        t,
        z: vec![0.0; w],
        basis,
        iterations: 0,
        bland_after: 2 * (m + width),
        max_iterations: 50 * (m + width) + 10_000,
    };

    let fail = |status: LpStatus, iterations: usize| LpSolution {
        status,
        objective: f64::NAN,
        x: vec![f64::NAN; n],
        duals: vec![f64::NAN; user_rows],
        iterations,
    };

    // Phase 1: maximize -sum(artificials).
    if n_art > 0 {
        let mut p1 = vec![0.0; width];
        p1[art_start..].iter_mut().for_each(|c| *c = -1.0);
        tab.price(&p1);
        let status = tab.optimize(&|_| true);
        if status == LpStatus::IterationLimit {
            return Ok(fail(status, tab.iterations));
        }
        let scale = 1.0 + rows.iter().map(|(_, _, b)| b.abs()).fold(0.0, f64::max);
        if -tab.z[width] > FEAS_TOL * scale {
            return Ok(fail(LpStatus::Infeasible, tab.iterations));
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| tab.at(r, c).abs() > PIVOT_TOL) {
                    tab.pivot(r, c);
                }
            }
        }
    }

    // Phase 2.
    let mut p2 = vec![0.0; width];
    p2[..structural].copy_from_slice(&cost);
    tab.price(&p2);
    let status = tab.optimize(&|c| c < art_start);
    if status != LpStatus::Optimal {
        return Ok(fail(status, tab.iterations));
    }

    let mut y = vec![0.0; width];
    for r in 0..m {
        y[tab.basis[r]] = tab.rhs(r);
    }
    let x: Vec<f64> = maps
        .iter()
        .zip(&problem.bounds)
        .map(|(map, &(lo, hi))| {
            let v = match *map {
                VarMap::Shift { col, offset, sign } => offset + sign * y[col].max(0.0),
                VarMap::Free { pos, neg } => y[pos] - y[neg],
            };
            v.clamp(lo, hi)
        })
        .collect();
    let objective = problem
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum::<f64>();
    let duals = (0..user_rows)
        .map(|i| dir * flip[i] * tab.z[unit_col[i]])
        .collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective,
        x,
        duals,
        iterations: tab.iterations,
    })
}
