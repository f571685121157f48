//! Rigorous P-value bounds for Bell tests.
//!
//! Win/lose games use the binomial bound; games with general scores use
//! Bentkus' inequality, with McDiarmid and Azuma-Hoeffding as comparators.
//! The [`lp`] module holds the local-polytope tools and [`simulate`] the
//! local hidden variable simulator used to check the bounds.

pub mod error;
pub mod game;
pub mod games;
pub mod general;
pub mod io;
pub mod lp;
pub mod report;
pub mod simulate;
pub mod sweep;
pub mod tails;
pub mod winlose;

pub use error::{Error, Result};
pub use game::{
    marginals, normalize_game, s_to_wins, score_experiment, validate_game, wins_to_s, Affine,
    Behavior, BiasBound, DeterministicStrategy, Dims, ExperimentData, GameKind, GameSpec,
    InputProbability, RawGame, ScoreEntry, ScoreSummary, SiteBox, Tag, TrialRecord, NULL_TAG,
};
pub use general::{
    azuma_pvalue, bentkus_pvalue, bentkus_pvalue_total, game_params, game_params_auto,
    local_score_bounds, mcdiarmid_pvalue, AzumaVariant, GeneralGameParams,
};
pub use lp::{
    classical_bound, enumerate_strategies, is_local, select_inequality, BellInequality,
    ClassicalBound, Locality,
};
pub use report::{BoundParams, Method, PValueReport};
pub use simulate::{
    adversarial_memory_search, adversary, exact_tail_iid, mc_tail_estimate,
    optimal_memoryless_strategy, run_lhvm, InputPolicy, Lhvm, SimConfig, TailEstimate,
};
pub use sweep::{sweep_grid, threshold_n, Axis, Grid, SweepContext, SweepRow, Threshold};
pub use tails::{
    binom_tail, chi2_tail_even, fisher_combine, gaussian_tail_q, interp_binom_tail, FisherResult,
    TailResult,
};
pub use winlose::{
    beta_win, beta_win_optimize, chsh_beta_win, gaussian_approx_pvalue, relabel_event_ready,
    winlose_pvalue, BetaProvenance, OutputRelabeling, WinLoseBound,
};
