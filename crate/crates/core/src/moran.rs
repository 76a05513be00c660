//! Frequency-dependent Moran process on a ring of groups.
//!
//! `N` players live in `M` groups arranged in a circle and interact only
//! within their group. Each generation is one birth–death event: a player
//! reproduces with probability proportional to fitness, a player drawn
//! uniformly dies, and the offspring inherits or mutates the parent's
//! strategy and either stays in the parent's group or migrates. Mean offer
//! and demand are time averages of the population means after a burn-in.
//!
//! Runs are bit-reproducible for a fixed seed: every random draw comes from
//! a single ChaCha12 stream in a fixed order (reproducer, death, mutation
//! coin, strategy values, migration coin, migration target), and group
//! payoffs are always accumulated in ascending member order.

use std::sync::atomic::{AtomicBool, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{fitness, group_payoffs_into, Strategy};
use crate::rng::rng_from_seed;
use crate::stats::BatchMeans;

/// Where a migrating newborn may settle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MigrationPattern {
    /// One of the two ring-adjacent groups.
    Local,
    /// Any group other than the parent's, uniformly.
    Global,
}

impl std::fmt::Display for MigrationPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MigrationPattern::Local => "local",
            MigrationPattern::Global => "global",
        })
    }
}

impl std::str::FromStr for MigrationPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(MigrationPattern::Local),
            "global" => Ok(MigrationPattern::Global),
            other => Err(Error::InvalidParams(format!(
                "pattern must be `local` or `global`, got `{other}`"
            ))),
        }
    }
}

/// All knobs of one simulation run.
#[derive(Clone, Debug)]
pub struct SimParams {
    /// Population size.
    pub n: usize,
    /// Number of groups on the ring.
    pub m: usize,
    /// Mutation probability per birth.
    pub u: f64,
    /// Migration probability per birth.
    pub v: f64,
    /// Probability that a fresh random strategy is empathetic.
    pub alpha: f64,
    /// Intensity of selection; 0 is neutral drift, 1 makes fitness equal payoff.
    pub omega: f64,
    pub pattern: MigrationPattern,
    /// Number of birth–death events to run.
    pub generations: u64,
    /// Events discarded before sampling starts.
    pub burn_in: u64,
    /// Sampling stride after the burn-in.
    pub sample_every: u64,
    pub seed: u64,
    /// Sensitivity switch: draw the dying player from the N-1 others
    /// instead of all N. Off by default (the reproducer may die).
    pub exclude_reproducer_from_death: bool,
    /// Keep the per-sample series of population means.
    pub record_series: bool,
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n < 2 {
            problems.push(format!("n must be >= 2, got {}", self.n));
        }
        if self.m < 1 {
            problems.push("m must be >= 1".to_string());
        }
        for (name, value) in
            [("u", self.u), ("v", self.v), ("alpha", self.alpha), ("omega", self.omega)]
        {
            if !(0.0..=1.0).contains(&value) {
                problems.push(format!("{name} must lie in [0,1], got {value}"));
            }
        }
        if self.generations < 1 {
            problems.push("generations must be >= 1".to_string());
        }
        if self.burn_in >= self.generations {
            problems.push(format!(
                "burn_in ({}) must be smaller than generations ({})",
                self.burn_in, self.generations
            ));
        }
        if self.sample_every < 1 {
            problems.push("sample_every must be >= 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(problems.join("; ")))
        }
    }

    /// Non-fatal advisories (the model is still well defined).
    pub fn warnings(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if self.n < 2 * self.m {
            notes.push(format!(
                "n = {} is below 2*m = {}; many groups will be empty or singletons",
                self.n,
                2 * self.m
            ));
        }
        notes
    }
}

/// One player: a strategy and a group index.
#[derive(Clone, Copy, Debug)]
pub struct Player {
    pub strategy: Strategy,
    pub group: usize,
}

/// Full population state.
#[derive(Clone, Debug)]
pub struct PopulationState {
    pub players: Vec<Player>,
    pub generation: u64,
}

impl PopulationState {
    /// Population means of offer and demand.
    pub fn means(&self) -> (f64, f64) {
        let n = self.players.len() as f64;
        let mut sum_p = 0.0;
        let mut sum_q = 0.0;
        for pl in &self.players {
            sum_p += pl.strategy.p();
            sum_q += pl.strategy.q();
        }
        (sum_p / n, sum_q / n)
    }
}

/// Time-averaged observables of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub mean_offer: f64,
    pub mean_demand: f64,
    /// Batch-means standard errors; `None` if fewer than two batches completed.
    pub offer_std_err: Option<f64>,
    pub demand_std_err: Option<f64>,
    pub samples: u64,
    /// True when the run was interrupted and the averages cover only part
    /// of the planned horizon.
    pub partial: bool,
    /// Per-sample (generation, mean offer, mean demand) when requested.
    pub series: Option<Vec<(u64, f64, f64)>>,
}

/// Draws the initial population: each player independently gets a random
/// strategy (empathetic with probability `alpha`) and a uniform group.
pub fn init_population<R: Rng + ?Sized>(params: &SimParams, rng: &mut R) -> PopulationState {
    let players = (0..params.n)
        .map(|_| Player {
            strategy: Strategy::random(params.alpha, rng),
            group: rng.gen_range(0..params.m),
        })
        .collect();
    PopulationState { players, generation: 0 }
}

/// Group a migrating newborn settles in. Never the parent's own group,
/// except under local migration with `m = 2`, where both ring neighbours
/// coincide with the single other group.
pub fn migrate_target<R: Rng + ?Sized>(
    parent_group: usize,
    pattern: MigrationPattern,
    m: usize,
    rng: &mut R,
) -> Result<usize> {
    if m < 2 {
        return Err(Error::SingleGroup);
    }
    Ok(match pattern {
        MigrationPattern::Local => {
            if rng.gen_range(0..2u32) == 0 {
                (parent_group + m - 1) % m
            } else {
                (parent_group + 1) % m
            }
        }
        MigrationPattern::Global => {
            let t = rng.gen_range(0..m - 1);
            if t >= parent_group {
                t + 1
            } else {
                t
            }
        }
    })
}

/// Which groups changed composition in one birth–death event.
struct StepEffect {
    vacated: usize,
    settled: usize,
}

/// One birth–death event against precomputed within-group payoffs.
fn birth_death_event<R: Rng + ?Sized>(
    state: &mut PopulationState,
    payoffs: &[f64],
    params: &SimParams,
    rng: &mut R,
) -> StepEffect {
    let n = params.n;

    // Reproducer, proportional to fitness. A total of exactly zero can only
    // happen at omega = 1 with every payoff zero; fall back to a uniform
    // draw there.
    let total: f64 = payoffs.iter().map(|&p| fitness(p, params.omega)).sum();
    let reproducer = if total > 0.0 {
        let mut r = rng.gen::<f64>() * total;
        let mut chosen = n - 1;
        for (i, &p) in payoffs.iter().enumerate() {
            r -= fitness(p, params.omega);
            if r < 0.0 {
                chosen = i;
                break;
            }
        }
        chosen
    } else {
        rng.gen_range(0..n)
    };

    let dying = if params.exclude_reproducer_from_death {
        let d = rng.gen_range(0..n - 1);
        if d >= reproducer {
            d + 1
        } else {
            d
        }
    } else {
        rng.gen_range(0..n)
    };

    let parent = state.players[reproducer];
    let strategy = if rng.gen::<f64>() < params.u {
        Strategy::random(params.alpha, rng)
    } else {
        parent.strategy
    };

    // The migration coin is drawn even when m = 1 so the draw sequence does
    // not depend on the group count; the target draw is skipped there.
    let group = if rng.gen::<f64>() < params.v && params.m >= 2 {
        migrate_target(parent.group, params.pattern, params.m, rng)
            .expect("m >= 2 checked above")
    } else {
        parent.group
    };

    let vacated = state.players[dying].group;
    state.players[dying] = Player { strategy, group };
    state.generation += 1;
    StepEffect { vacated, settled: group }
}

/// Moran engine with a payoff cache.
///
/// After each event only the groups whose composition changed are
/// recomputed; because [`group_payoffs_into`] accumulates in ascending
/// member order, the cache stays bit-identical to a full recomputation,
/// which the naive mode performs every step as a cross-check.
struct Engine {
    state: PopulationState,
    payoffs: Vec<f64>,
    naive: bool,
    members: Vec<usize>,
    member_strategies: Vec<Strategy>,
    member_payoffs: Vec<f64>,
}

impl Engine {
    fn new<R: Rng + ?Sized>(params: &SimParams, naive: bool, rng: &mut R) -> Self {
        let state = init_population(params, rng);
        let mut engine = Engine {
            payoffs: vec![0.0; params.n],
            state,
            naive,
            members: Vec::with_capacity(params.n),
            member_strategies: Vec::with_capacity(params.n),
            member_payoffs: Vec::with_capacity(params.n),
        };
        engine.refresh_all(params.m);
        engine
    }

    fn refresh_group(&mut self, group: usize) {
        self.members.clear();
        self.member_strategies.clear();
        for (i, pl) in self.state.players.iter().enumerate() {
            if pl.group == group {
                self.members.push(i);
                self.member_strategies.push(pl.strategy);
            }
        }
        group_payoffs_into(&self.member_strategies, &mut self.member_payoffs);
        for (&i, &p) in self.members.iter().zip(self.member_payoffs.iter()) {
            self.payoffs[i] = p;
        }
    }

    fn refresh_all(&mut self, m: usize) {
        for g in 0..m {
            self.refresh_group(g);
        }
    }

    fn step<R: Rng + ?Sized>(&mut self, params: &SimParams, rng: &mut R) {
        let effect = birth_death_event(&mut self.state, &self.payoffs, params, rng);
        if self.naive {
            self.refresh_all(params.m);
        } else {
            self.refresh_group(effect.vacated);
            if effect.settled != effect.vacated {
                self.refresh_group(effect.settled);
            }
        }
    }
}

/// Runs exactly one birth–death event on `state`.
///
/// Payoffs are recomputed from scratch on every call; this is the reference
/// path. [`run_simulation`] uses a cached engine that refreshes only the
/// affected groups and is regression-tested to produce identical results.
pub fn step_generation<R: Rng + ?Sized>(
    state: &mut PopulationState,
    params: &SimParams,
    rng: &mut R,
) {
    let mut payoffs = vec![0.0; state.players.len()];
    let mut strategies = Vec::new();
    let mut members = Vec::new();
    let mut scratch = Vec::new();
    for g in 0..params.m {
        members.clear();
        strategies.clear();
        for (i, pl) in state.players.iter().enumerate() {
            if pl.group == g {
                members.push(i);
                strategies.push(pl.strategy);
            }
        }
        group_payoffs_into(&strategies, &mut scratch);
        for (&i, &p) in members.iter().zip(scratch.iter()) {
            payoffs[i] = p;
        }
    }
    birth_death_event(state, &payoffs, params, rng);
}

const INTERRUPT_CHECK_MASK: u64 = 0x3FF;
const BATCHES: usize = 32;

fn run_with(params: &SimParams, naive: bool, stop: Option<&AtomicBool>) -> Result<Measurement> {
    params.validate()?;
    let mut rng = rng_from_seed(params.seed);
    let mut engine = Engine::new(params, naive, &mut rng);

    let planned = (params.generations - params.burn_in) / params.sample_every;
    let mut offer = BatchMeans::new(planned, BATCHES);
    let mut demand = BatchMeans::new(planned, BATCHES);
    let mut series = params.record_series.then(Vec::new);
    let mut partial = false;

    for gen in 1..=params.generations {
        engine.step(params, &mut rng);
        if gen > params.burn_in && (gen - params.burn_in) % params.sample_every == 0 {
            let (mean_p, mean_q) = engine.state.means();
            offer.push(mean_p);
            demand.push(mean_q);
            if let Some(series) = series.as_mut() {
                series.push((gen, mean_p, mean_q));
            }
        }
        if gen & INTERRUPT_CHECK_MASK == 0 {
            if let Some(flag) = stop {
                if flag.load(Ordering::Relaxed) {
                    partial = gen < params.generations;
                    break;
                }
            }
        }
    }

    Ok(Measurement {
        mean_offer: offer.mean(),
        mean_demand: demand.mean(),
        offer_std_err: offer.std_err(),
        demand_std_err: demand.std_err(),
        samples: offer.count(),
        partial,
        series,
    })
}

/// Runs a full simulation and returns the time-averaged measurement.
pub fn run_simulation(params: &SimParams) -> Result<Measurement> {
    run_with(params, false, None)
}

/// [`run_simulation`] with a cooperative stop flag; an interrupted run
/// returns the averages collected so far with `partial` set.
pub fn run_simulation_interruptible(
    params: &SimParams,
    stop: &AtomicBool,
) -> Result<Measurement> {
    run_with(params, false, Some(stop))
}

/// Reference implementation that recomputes all payoffs every generation.
/// Slower than [`run_simulation`] but must produce bit-identical results.
pub fn run_simulation_naive(params: &SimParams) -> Result<Measurement> {
    run_with(params, true, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::StrategyKind;

    fn base_params() -> SimParams {
        SimParams {
            n: 20,
            m: 3,
            u: 0.1,
            v: 0.1,
            alpha: 0.5,
            omega: 0.5,
            pattern: MigrationPattern::Global,
            generations: 1000,
            burn_in: 100,
            sample_every: 1,
            seed: 1,
            exclude_reproducer_from_death: false,
            record_series: false,
        }
    }

    #[test]
    fn validate_rejects_bad_params() {
        let mut p = base_params();
        p.u = 1.5;
        assert!(p.validate().is_err());
        let mut p = base_params();
        p.burn_in = p.generations;
        assert!(p.validate().is_err());
        let mut p = base_params();
        p.n = 1;
        assert!(p.validate().is_err());
        assert!(base_params().validate().is_ok());
    }

    #[test]
    fn small_population_warns() {
        let mut p = base_params();
        p.n = 5;
        p.m = 9;
        assert_eq!(p.warnings().len(), 1);
        assert!(base_params().warnings().is_empty());
    }

    #[test]
    fn init_respects_alpha_extremes() {
        let mut rng = rng_from_seed(3);
        let mut p = base_params();
        p.alpha = 1.0;
        let st = init_population(&p, &mut rng);
        assert!(st
            .players
            .iter()
            .all(|pl| pl.strategy.kind() == StrategyKind::Empathetic
                && pl.strategy.p() == pl.strategy.q()));

        p.alpha = 0.0;
        let st = init_population(&p, &mut rng);
        assert!(st.players.iter().all(|pl| pl.strategy.kind() == StrategyKind::Independent));

        p.m = 1;
        let st = init_population(&p, &mut rng);
        assert!(st.players.iter().all(|pl| pl.group == 0));
        assert_eq!(st.players.len(), p.n);
    }

    #[test]
    fn migrate_target_distributions() {
        let mut rng = rng_from_seed(4);
        let draws = 100_000;

        let mut counts = [0u32; 5];
        for _ in 0..draws {
            counts[migrate_target(0, MigrationPattern::Local, 5, &mut rng).unwrap()] += 1;
        }
        assert_eq!(counts[0] + counts[2] + counts[3], 0);
        assert!((counts[1] as i64 - 50_000).abs() < 1000, "{counts:?}");
        assert!((counts[4] as i64 - 50_000).abs() < 1000, "{counts:?}");

        let mut counts = [0u32; 3];
        for _ in 0..draws {
            counts[migrate_target(2, MigrationPattern::Global, 3, &mut rng).unwrap()] += 1;
        }
        assert_eq!(counts[2], 0);
        assert!((counts[0] as i64 - 50_000).abs() < 1000, "{counts:?}");

        // Both ring neighbours of group 0 coincide with group 1 when m = 2.
        for _ in 0..1000 {
            assert_eq!(migrate_target(0, MigrationPattern::Local, 2, &mut rng).unwrap(), 1);
        }

        assert!(matches!(
            migrate_target(0, MigrationPattern::Local, 1, &mut rng),
            Err(Error::SingleGroup)
        ));
    }

    #[test]
    fn forced_migration_moves_the_newborn() {
        let mut rng = rng_from_seed(5);
        let mut p = base_params();
        p.n = 4;
        p.m = 2;
        p.v = 1.0;
        p.u = 0.0;
        let strategy = Strategy::independent(0.4, 0.3).unwrap();
        let mut state = PopulationState {
            players: vec![Player { strategy, group: 0 }; 4],
            generation: 0,
        };
        step_generation(&mut state, &p, &mut rng);
        let in_other: usize = state.players.iter().filter(|pl| pl.group == 1).count();
        assert_eq!(in_other, 1);
        assert_eq!(state.players.len(), 4);
        assert_eq!(state.generation, 1);
    }

    #[test]
    fn group_indices_stay_in_range_and_population_is_conserved() {
        let mut rng = rng_from_seed(6);
        let p = base_params();
        let mut state = init_population(&p, &mut rng);
        for _ in 0..2000 {
            step_generation(&mut state, &p, &mut rng);
            assert_eq!(state.players.len(), p.n);
            assert!(state.players.iter().all(|pl| pl.group < p.m));
        }
    }

    fn distinct_strategies(state: &PopulationState) -> usize {
        let mut seen: Vec<(u64, u64)> = state
            .players
            .iter()
            .map(|pl| (pl.strategy.p().to_bits(), pl.strategy.q().to_bits()))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    #[test]
    fn without_mutation_diversity_never_grows_and_fixation_happens() {
        let mut rng = rng_from_seed(7);
        let mut p = base_params();
        p.n = 6;
        p.m = 1;
        p.u = 0.0;
        p.v = 0.0;
        let mut state = init_population(&p, &mut rng);
        let mut diversity = distinct_strategies(&state);
        for _ in 0..5000 {
            step_generation(&mut state, &p, &mut rng);
            let now = distinct_strategies(&state);
            assert!(now <= diversity);
            diversity = now;
        }
        assert_eq!(diversity, 1, "classic Moran dynamics must fix");
    }

    #[test]
    fn kinds_are_closed_under_alpha_extremes() {
        let mut rng = rng_from_seed(8);
        let mut p = base_params();
        p.alpha = 0.0;
        p.u = 0.5;
        let mut state = init_population(&p, &mut rng);
        for _ in 0..2000 {
            step_generation(&mut state, &p, &mut rng);
        }
        assert!(state.players.iter().all(|pl| pl.strategy.kind() == StrategyKind::Independent));

        p.alpha = 1.0;
        let mut state = init_population(&p, &mut rng);
        for _ in 0..2000 {
            step_generation(&mut state, &p, &mut rng);
            assert!(state
                .players
                .iter()
                .all(|pl| pl.strategy.kind() == StrategyKind::Empathetic
                    && pl.strategy.p() == pl.strategy.q()));
        }
    }

    #[test]
    fn zero_total_fitness_falls_back_to_uniform_choice() {
        let mut rng = rng_from_seed(9);
        let mut p = base_params();
        p.n = 4;
        p.m = 1;
        p.omega = 1.0;
        p.u = 0.0;
        p.v = 0.0;
        // Everyone offers 0 and demands 1: every proposal is rejected, all
        // payoffs are 0, total fitness is 0 at omega = 1.
        let strategy = Strategy::independent(0.0, 1.0).unwrap();
        let mut state = PopulationState {
            players: vec![Player { strategy, group: 0 }; 4],
            generation: 0,
        };
        for _ in 0..100 {
            step_generation(&mut state, &p, &mut rng);
        }
        assert_eq!(state.generation, 100);
    }

    #[test]
    fn measurement_counts_and_series() {
        let mut p = base_params();
        p.generations = 1003;
        p.burn_in = 103;
        p.sample_every = 10;
        p.record_series = true;
        let m = run_simulation(&p).unwrap();
        assert_eq!(m.samples, 90);
        assert!(!m.partial);
        let series = m.series.unwrap();
        assert_eq!(series.len(), 90);
        assert_eq!(series[0].0, 113);
        assert_eq!(series.last().unwrap().0, 1003);
        assert!((0.0..=1.0).contains(&m.mean_offer));
        assert!((0.0..=1.0).contains(&m.mean_demand));
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let p = base_params();
        let a = run_simulation(&p).unwrap();
        let b = run_simulation(&p).unwrap();
        assert_eq!(a.mean_offer.to_bits(), b.mean_offer.to_bits());
        assert_eq!(a.mean_demand.to_bits(), b.mean_demand.to_bits());
        assert_eq!(a.samples, b.samples);
        assert_eq!(
            a.offer_std_err.map(f64::to_bits),
            b.offer_std_err.map(f64::to_bits)
        );
    }

    #[test]
    fn incremental_engine_matches_naive_reference_bitwise() {
        let mut p = base_params();
        p.n = 12;
        p.m = 3;
        p.u = 0.2;
        p.v = 0.3;
        p.omega = 1.0;
        p.generations = 20_000;
        p.burn_in = 2_000;
        p.sample_every = 3;
        p.seed = 777;
        for pattern in [MigrationPattern::Local, MigrationPattern::Global] {
            p.pattern = pattern;
            let fast = run_simulation(&p).unwrap();
            let naive = run_simulation_naive(&p).unwrap();
            assert_eq!(fast.mean_offer.to_bits(), naive.mean_offer.to_bits());
            assert_eq!(fast.mean_demand.to_bits(), naive.mean_demand.to_bits());
            assert_eq!(fast.offer_std_err.map(f64::to_bits), naive.offer_std_err.map(f64::to_bits));
            assert_eq!(fast.samples, naive.samples);
        }
    }

    #[test]
    fn neutral_drift_centers_on_half() {
        let mut p = base_params();
        p.omega = 0.0;
        p.generations = 400_000;
        p.burn_in = 40_000;
        p.seed = 10;
        let m = run_simulation(&p).unwrap();
        let se = m.offer_std_err.unwrap();
        assert!(
            (m.mean_offer - 0.5).abs() <= 3.0 * se,
            "offer {} se {se}",
            m.mean_offer
        );
        let se_q = m.demand_std_err.unwrap();
        assert!(
            (m.mean_demand - 0.5).abs() <= 3.0 * se_q,
            "demand {} se {se_q}",
            m.mean_demand
        );
    }

    #[test]
    fn full_mutation_keeps_means_at_half() {
        let mut p = base_params();
        p.u = 1.0;
        p.alpha = 1.0;
        p.omega = 1.0;
        p.generations = 200_000;
        p.burn_in = 10_000;
        p.seed = 11;
        let m = run_simulation(&p).unwrap();
        assert!((m.mean_offer - 0.5).abs() < 0.015, "offer {}", m.mean_offer);
        assert!((m.mean_demand - 0.5).abs() < 0.015, "demand {}", m.mean_demand);
    }

    #[test]
    fn interruption_yields_partial_measurement() {
        let mut p = base_params();
        p.generations = 5_000_000;
        p.burn_in = 100;
        let stop = AtomicBool::new(true);
        let m = run_simulation_interruptible(&p, &stop).unwrap();
        assert!(m.partial);
        assert!(m.samples < 5_000_000 - 100);
    }

    #[test]
    fn exclude_reproducer_switch_changes_the_stream_but_stays_valid() {
        let mut p = base_params();
        p.exclude_reproducer_from_death = true;
        let m = run_simulation(&p).unwrap();
        assert!((0.0..=1.0).contains(&m.mean_offer));
    }
}
