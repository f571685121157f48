//! Linear programming: the simplex solver and the local-polytope problems
//! built on it.

mod polytope;
mod simplex;

pub use polytope::{
    box_polytope_max, classical_bound, enumerate_strategies, is_local, select_inequality,
    select_winlose_inequality, strategy_cap, BellInequality, ClassicalBound, Locality,
    DEFAULT_STRATEGY_CAP,
};
pub(crate) use polytope::{check_cap, ResponseTables};
pub use simplex::{simplex_solve, Direction, LpProblem, LpSolution, LpStatus, Sense};
