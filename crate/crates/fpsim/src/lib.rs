//! Learning dynamics without regularization in two-player zero-sum games:
//! fictitious play, its optimistic variant, and alternating play, with
//! exact regret and energy bookkeeping, the two-dimensional subspace
//! reduction for normal-form 2x2 games, runtime invariant checkers, and a
//! batch experiment harness.
//!
//! The runnable examples under `examples/` each demonstrate one major
//! capability; the `fpsim` binary exposes the same machinery as `run`,
//! `table`, and `verify` subcommands.

pub mod afp;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod generators;
pub mod harness;
pub mod regret;
pub mod report;
pub mod rng;
pub mod subspace;
pub mod tiebreak;

pub use dynamics::{run, run_alternating, Algo, PlayMode, TrajectoryRecord};
pub use error::{Error, Result};
pub use game::{
    best_response, duality_gap, matching_pennies, nash_2x2, normalize_2x2, rho_params,
    GameMatrix, MixedStrategy, NormalizedGame,
};
pub use generators::{make, random_simplex, GameSpec};
pub use regret::{alternating_regret, energy_full, regret, time_average_gap, RegretBreakdown};
pub use subspace::{classify, project, psi, q_map, threshold_b, RegionLabel, SubspaceParams};
pub use tiebreak::{TiebreakRule, Tiebreaker};
