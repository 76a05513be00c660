//! Evolution of fairness in the two-role ultimatum game on group-structured
//! populations.
//!
//! The crate has three legs that check one another:
//!
//! * [`moran`] — an exact agent-based Moran process on a ring of groups,
//!   with mutation, an empathy fraction, and local or global migration;
//! * [`weak_selection`] — closed-form first-order predictions of the mean
//!   offer for weak selection with empathetic strategies;
//! * [`replicator`] — replicator dynamics with mutation over discrete
//!   strategy grids, approximating the strong-selection regime.
//!
//! [`game`] holds the shared payoff kernels and [`rng`] the deterministic
//! seeding scheme. Everything is bit-reproducible for a fixed seed.

pub mod error;
pub mod game;
mod linalg;
pub mod moran;
pub mod replicator;
pub mod rng;
pub mod stats;
pub mod weak_selection;

pub use error::{Error, Result};
pub use game::{
    fitness, group_payoffs, payoff_matrix_empathetic, payoff_matrix_independent, payoff_pair,
    DiscreteStrategySet, PayoffMatrix, Strategy, StrategyKind,
};
pub use moran::{
    init_population, migrate_target, run_simulation, run_simulation_interruptible,
    run_simulation_naive, step_generation, Measurement, MigrationPattern, Player,
    PopulationState, SimParams,
};
pub use replicator::{
    mean_offer_demand, rhs_empathetic, rhs_independent, solve_stationary, Layout, SolverConfig,
    StationaryResult, StrategyDistribution,
};
pub use rng::{replicate_seed, rng_from_seed};
pub use weak_selection::{
    alpha1, f_kernel, gammas, grid_weighted_mean, mean_offer_global_closed, mean_offer_weak,
    payoff_stats_empathetic, phis, psi, stationary_distribution, stationary_frequency,
    PayoffStats, TheoryParams,
};
