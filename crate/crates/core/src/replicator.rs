//! Replicator dynamics with uniform mutation over discrete strategy grids,
//! and a stationary-state solver for the strong-selection regime.
//!
//! Two strategy spaces are supported: the `S` empathetic grid strategies
//! and the `S^2` independent (offer, demand) grid strategies. In both, each
//! frequency grows with its payoff relative to the population average,
//! scaled by `1 - u`, and receives a uniform mutation inflow of `u`
//! divided by the number of strategies:
//!
//! ```text
//! dx_i/dt = x_i * pi_i * (1 - u) / phi  +  u / dim  -  x_i
//! ```
//!
//! where `pi = A x` and `phi = x . pi`. Stationary states are found by
//! damped fixed-point iteration on the underlying generation map,
//! interleaved with occasional Newton steps on the map residual. The
//! Newton steps matter at small `u`, where the flow creeps along a slow
//! manifold and plain iteration would need tens of millions of steps to
//! push the residual below tolerance; a Newton step is only ever accepted
//! when it strictly reduces the residual, so the converged point always
//! satisfies the same method-independent residual test.

use crate::error::{Error, Result};
use crate::game::PayoffMatrix;
use crate::linalg::lu_solve_in_place;
use crate::stats::kahan_sum;

/// Which strategy space a frequency vector lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// `S` empathetic grid strategies.
    Empathetic { s: usize },
    /// `S^2` independent strategies, row-major: index = offer_idx * S + demand_idx.
    Independent { s: usize },
}

impl Layout {
    /// Grid resolution `S`.
    pub fn grid_size(&self) -> usize {
        match *self {
            Layout::Empathetic { s } | Layout::Independent { s } => s,
        }
    }

    /// Number of strategies (vector length).
    pub fn dim(&self) -> usize {
        match *self {
            Layout::Empathetic { s } => s,
            Layout::Independent { s } => s * s,
        }
    }
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Layout::Empathetic { .. } => f.write_str("empathetic"),
            Layout::Independent { .. } => f.write_str("independent"),
        }
    }
}

/// A frequency vector over a strategy grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyDistribution {
    pub layout: Layout,
    pub freqs: Vec<f64>,
}

impl StrategyDistribution {
    /// The uniform distribution on `layout`.
    pub fn uniform(layout: Layout) -> Self {
        let dim = layout.dim();
        Self { layout, freqs: vec![1.0 / dim as f64; dim] }
    }

    pub fn mean_offer_demand(&self) -> (f64, f64) {
        mean_offer_demand(self)
    }
}

/// Grid-weighted mean offer and demand of a distribution.
///
/// On the empathetic layout offer and demand coincide; on the independent
/// layout they are the marginal means over the offer and demand indices.
pub fn mean_offer_demand(dist: &StrategyDistribution) -> (f64, f64) {
    match dist.layout {
        Layout::Empathetic { s } => {
            let denom = (s - 1) as f64;
            let offer =
                kahan_sum(dist.freqs.iter().enumerate().map(|(k, &x)| k as f64 / denom * x));
            (offer, offer)
        }
        Layout::Independent { s } => {
            let denom = (s - 1) as f64;
            let offer = kahan_sum(
                dist.freqs.iter().enumerate().map(|(idx, &x)| (idx / s) as f64 / denom * x),
            );
            let demand = kahan_sum(
                dist.freqs.iter().enumerate().map(|(idx, &x)| (idx % s) as f64 / denom * x),
            );
            (offer, demand)
        }
    }
}

/// One evaluation of the generation map `x_i pi_i (1-u)/phi + u/dim`.
/// Returns true when `phi` was not positive and the neutral flow
/// `x_i (1-u) + u/dim` was used instead (possible only on boundary states
/// where every present strategy earns zero).
fn generation_map(x: &[f64], u: f64, matrix: &PayoffMatrix, out: &mut [f64]) -> bool {
    let dim = x.len();
    let inflow = u / dim as f64;
    let mut phi = 0.0;
    for i in 0..dim {
        let row = matrix.row(i);
        let mut pi = 0.0;
        for j in 0..dim {
            pi += row[j] * x[j];
        }
        out[i] = pi; // stash pi, rescaled below
        phi += x[i] * pi;
    }
    if phi > 0.0 {
        let scale = (1.0 - u) / phi;
        for i in 0..dim {
            out[i] = x[i] * out[i] * scale + inflow;
        }
        false
    } else {
        for i in 0..dim {
            out[i] = x[i] * (1.0 - u) + inflow;
        }
        true
    }
}

fn rhs(x: &[f64], u: f64, matrix: &PayoffMatrix) -> Vec<f64> {
    assert_eq!(
        matrix.dim(),
        x.len(),
        "distribution length {} does not match matrix dimension {}",
        x.len(),
        matrix.dim()
    );
    let mut out = vec![0.0; x.len()];
    generation_map(x, u, matrix, &mut out);
    for (o, &xi) in out.iter_mut().zip(x) {
        *o -= xi;
    }
    out
}

/// Time derivative of the `S` empathetic strategy frequencies.
pub fn rhs_empathetic(x: &[f64], u: f64, matrix: &PayoffMatrix) -> Vec<f64> {
    rhs(x, u, matrix)
}

/// Time derivative of the `S^2` independent strategy frequencies
/// (mutation inflow `u / S^2`).
pub fn rhs_independent(x: &[f64], u: f64, matrix: &PayoffMatrix) -> Vec<f64> {
    rhs(x, u, matrix)
}

/// Stationary solver knobs.
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    /// Max-norm residual of the time derivative at the returned point.
    pub tol: f64,
    pub max_steps: u64,
    /// Initial damping of the fixed-point update, in (0, 1].
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_steps: 2_000_000, damping: 0.5 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParams(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(0.0 < self.damping && self.damping <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "damping must lie in (0,1], got {}",
                self.damping
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParams("max_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// A converged stationary state together with solver diagnostics.
#[derive(Clone, Debug)]
pub struct StationaryResult {
    pub distribution: StrategyDistribution,
    /// Fixed-point iterations performed (map evaluations of the main loop).
    pub steps: u64,
    /// Accepted Newton steps.
    pub newton_steps: u64,
    /// Max-norm residual at the returned point.
    pub residual: f64,
    /// Damping in effect when the solve finished.
    pub final_damping: f64,
    /// How often the zero-average-payoff fallback flow was taken.
    pub phi_floor_hits: u64,
}

const NEWTON_INTERVAL: u64 = 2000;
const GROWTH_WINDOW: u64 = 200;
const MIN_DAMPING: f64 = 1.0 / 1024.0;

/// One backtracking Newton attempt on the residual `F(x) = map(x) - x`.
/// Accepts only a strict residual reduction; returns the new iterate and
/// its residual, or None.
/// Fills `jac` with the Jacobian of `map(x) - x` at an interior point.
/// Returns false when the average payoff is not positive there.
fn fill_residual_jacobian(x: &[f64], u: f64, matrix: &PayoffMatrix, jac: &mut Vec<f64>) -> bool {
    let n = x.len();
    // pi = A x, rho = A^T x, phi = x . pi.
    let mut pi = vec![0.0; n];
    let mut rho = vec![0.0; n];
    for i in 0..n {
        let row = matrix.row(i);
        let mut acc = 0.0;
        for j in 0..n {
            acc += row[j] * x[j];
            rho[j] += row[j] * x[i];
        }
        pi[i] = acc;
    }
    let phi: f64 = x.iter().zip(&pi).map(|(&a, &b)| a * b).sum();
    if phi <= 0.0 {
        return false;
    }
    let keep = 1.0 - u;
    // Dmap[i][j] = (1-u) [ d_ij pi_i / phi + x_i A_ij / phi
    //                      - x_i pi_i (pi_j + rho_j) / phi^2 ].
    jac.clear();
    jac.resize(n * n, 0.0);
    for i in 0..n {
        let row = matrix.row(i);
        let coupling = keep * x[i] * pi[i] / (phi * phi);
        let jrow = &mut jac[i * n..(i + 1) * n];
        for j in 0..n {
            jrow[j] = keep * x[i] * row[j] / phi - coupling * (pi[j] + rho[j]);
        }
        jrow[i] += keep * pi[i] / phi - 1.0;
    }
    true
}

fn newton_attempt(
    x: &[f64],
    u: f64,
    matrix: &PayoffMatrix,
    residual_now: f64,
    scratch: &mut Vec<f64>,
) -> Option<(Vec<f64>, f64)> {
    let n = x.len();
    if !fill_residual_jacobian(x, u, matrix, scratch) {
        return None;
    }
    let mut residual_vec = vec![0.0; n];
    generation_map(x, u, matrix, &mut residual_vec);
    let mut delta: Vec<f64> = residual_vec.iter().zip(x).map(|(&m, &xi)| -(m - xi)).collect();
    if !lu_solve_in_place(scratch, n, &mut delta) {
        return None;
    }

    let mut candidate = vec![0.0; n];
    let mut mapped = vec![0.0; n];
    let mut step_scale = 1.0;
    for _ in 0..8 {
        let mut total = 0.0;
        for i in 0..n {
            candidate[i] = (x[i] + step_scale * delta[i]).max(0.0);
            total += candidate[i];
        }
        if total > 0.0 {
            for c in candidate.iter_mut() {
                *c /= total;
            }
            generation_map(&candidate, u, matrix, &mut mapped);
            let mut res = 0.0f64;
            for (&m, &c) in mapped.iter().zip(&candidate) {
                res = res.max((m - c).abs());
            }
            if res < 0.9 * residual_now {
                return Some((candidate, res));
            }
        }
        step_scale *= 0.5;
    }
    None
}

/// Finds a stationary state of the mutation-augmented replicator flow,
/// starting from the uniform distribution (always; the reached state is
/// certified only for that start).
///
/// Iterates `x <- (1-d) x + d map(x)`, renormalizing each step to absorb
/// roundoff. The damping `d` is halved only when the residual grows well
/// past its best value for a sustained stretch (oscillatory divergence).
/// Every [`NEWTON_INTERVAL`] steps a guarded Newton step is attempted.
/// Fails with the best iterate attached when `max_steps` evaluations do
/// not reach `tol`.
pub fn solve_stationary(
    matrix: &PayoffMatrix,
    layout: Layout,
    u: f64,
    config: &SolverConfig,
) -> Result<StationaryResult> {
    config.validate()?;
    if layout.grid_size() < 2 {
        return Err(Error::GridTooSmall(layout.grid_size()));
    }
    if layout.dim() != matrix.dim() {
        return Err(Error::InvalidParams(format!(
            "layout dimension {} does not match matrix dimension {}",
            layout.dim(),
            matrix.dim()
        )));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidParams(format!("u must lie in [0,1], got {u}")));
    }

    let dim = layout.dim();
    let mut x = vec![1.0 / dim as f64; dim];
    let mut mapped = vec![0.0; dim];
    let mut jac_scratch = Vec::new();
    let mut damping = config.damping;
    let mut phi_floor_hits = 0u64;
    let mut newton_steps = 0u64;
    let mut best_residual = f64::INFINITY;
    let mut best_x = x.clone();
    let mut growth_count = 0u64;

    for step in 1..=config.max_steps {
        if generation_map(&x, u, matrix, &mut mapped) {
            phi_floor_hits += 1;
        }
        let mut residual = 0.0f64;
        for (&m, &xi) in mapped.iter().zip(&x) {
            residual = residual.max((m - xi).abs());
        }
        if residual <= config.tol {
            return Ok(StationaryResult {
                distribution: StrategyDistribution { layout, freqs: x },
                steps: step,
                newton_steps,
                residual,
                final_damping: damping,
                phi_floor_hits,
            });
        }
        if residual < best_residual {
            best_residual = residual;
            best_x.copy_from_slice(&x);
            growth_count = 0;
        } else if residual > 4.0 * best_residual {
            growth_count += 1;
            if growth_count >= GROWTH_WINDOW && damping > MIN_DAMPING {
                damping *= 0.5;
                growth_count = 0;
            }
        }

        if step % NEWTON_INTERVAL == 0 {
            if let Some((next, res)) =
                newton_attempt(&x, u, matrix, residual, &mut jac_scratch)
            {
                x = next;
                newton_steps += 1;
                if res < best_residual {
                    best_residual = res;
                    best_x.copy_from_slice(&x);
                }
                if res <= config.tol {
                    return Ok(StationaryResult {
                        distribution: StrategyDistribution { layout, freqs: x },
                        steps: step,
                        newton_steps,
                        residual: res,
                        final_damping: damping,
                        phi_floor_hits,
                    });
                }
                continue;
            }
        }

        let mut total = 0.0;
        for (xi, &m) in x.iter_mut().zip(&mapped) {
            *xi = (1.0 - damping) * *xi + damping * m;
            if *xi < 0.0 {
                *xi = 0.0;
            }
            total += *xi;
        }
        for xi in x.iter_mut() {
            *xi /= total;
        }
    }

    Err(Error::NonConvergence {
        steps: config.max_steps,
        residual: best_residual,
        tol: config.tol,
        best: Box::new(StrategyDistribution { layout, freqs: best_x }),
    })
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::game::{payoff_matrix_empathetic, payoff_matrix_independent};
    use crate::rng::rng_from_seed;

    fn random_simplex_point<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
        // Normalized exponentials give a uniform Dirichlet(1,...,1) draw.
        let raw: Vec<f64> = (0..dim).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|r| r / total).collect()
    }

    #[test]
    fn rhs_sums_to_zero_on_the_simplex() {
        let mut rng = rng_from_seed(31);
        let a_emp = payoff_matrix_empathetic(17).unwrap();
        let a_ind = payoff_matrix_independent(5).unwrap();
        for _ in 0..200 {
            let x = random_simplex_point(17, &mut rng);
            let total = kahan_sum(rhs_empathetic(&x, 0.23, &a_emp).into_iter());
            assert!(total.abs() < 1e-12, "{total}");
            let x = random_simplex_point(25, &mut rng);
            let total = kahan_sum(rhs_independent(&x, 0.61, &a_ind).into_iter());
            assert!(total.abs() < 1e-12, "{total}");
        }
    }

    #[test]
    fn rhs_full_mutation_is_pull_to_uniform() {
        let a = payoff_matrix_empathetic(8).unwrap();
        let mut rng = rng_from_seed(32);
        let x = random_simplex_point(8, &mut rng);
        let r = rhs_empathetic(&x, 1.0, &a);
        for (k, v) in r.iter().enumerate() {
            assert!((v - (1.0 / 8.0 - x[k])).abs() < 1e-15);
        }
    }

    #[test]
    fn rhs_empathetic_s2_hand_value() {
        // Grid {0,1}: payoffs [[1,1],[0,1]]. At x = (1/2, 1/2), u = 0.1:
        // pi = (1, 1/2), phi = 3/4, so the map is (0.65, 0.35) and the
        // derivative (0.15, -0.15).
        let a = payoff_matrix_empathetic(2).unwrap();
        let r = rhs_empathetic(&[0.5, 0.5], 0.1, &a);
        assert!((r[0] - 0.15).abs() < 1e-15, "{r:?}");
        assert!((r[1] + 0.15).abs() < 1e-15, "{r:?}");
    }

    #[test]
    fn rhs_independent_s2_hand_values() {
        // Grid strategies in row-major order: (0,0), (0,1), (1,0), (1,1).
        let a = payoff_matrix_independent(2).unwrap();
        let x = [0.25; 4];
        let u = 0.2;
        // pi_i = mean of row i at the uniform state.
        let pi: Vec<f64> = (0..4).map(|i| (0..4).map(|j| a.get(i, j)).sum::<f64>() / 4.0).collect();
        let phi: f64 = pi.iter().map(|p| p * 0.25).sum();
        let r = rhs_independent(&x, u, &a);
        for i in 0..4 {
            let expect = 0.25 * pi[i] * (1.0 - u) / phi + u / 4.0 - 0.25;
            assert!((r[i] - expect).abs() < 1e-15, "{i}: {} vs {expect}", r[i]);
        }
        let total: f64 = r.iter().sum();
        assert!(total.abs() < 1e-15);
    }

    #[test]
    fn mean_offer_demand_layouts() {
        let uniform = StrategyDistribution::uniform(Layout::Empathetic { s: 11 });
        let (o, d) = uniform.mean_offer_demand();
        assert!((o - 0.5).abs() < 1e-12);
        assert_eq!(o, d);

        let uniform = StrategyDistribution::uniform(Layout::Independent { s: 9 });
        let (o, d) = uniform.mean_offer_demand();
        assert!((o - 0.5).abs() < 1e-12);
        assert!((d - 0.5).abs() < 1e-12);

        // Point mass on the top offer index.
        let mut freqs = vec![0.0; 7];
        freqs[6] = 1.0;
        let dist = StrategyDistribution { layout: Layout::Empathetic { s: 7 }, freqs };
        assert_eq!(dist.mean_offer_demand(), (1.0, 1.0));

        // Independent point mass on (offer=1, demand=0) for s=3: index 2*3+0.
        let mut freqs = vec![0.0; 9];
        freqs[6] = 1.0;
        let dist = StrategyDistribution { layout: Layout::Independent { s: 3 }, freqs };
        assert_eq!(dist.mean_offer_demand(), (1.0, 0.0));
    }

    #[test]
    fn full_mutation_fixed_point_is_uniform_immediately() {
        let a = payoff_matrix_empathetic(25).unwrap();
        let res =
            solve_stationary(&a, Layout::Empathetic { s: 25 }, 1.0, &SolverConfig::default())
                .unwrap();
        assert_eq!(res.steps, 1);
        assert_eq!(res.residual, 0.0);
        assert!(res.distribution.freqs.iter().all(|&x| x == 1.0 / 25.0));

        let a = payoff_matrix_independent(5).unwrap();
        let res =
            solve_stationary(&a, Layout::Independent { s: 5 }, 1.0, &SolverConfig::default())
                .unwrap();
        assert_eq!(res.residual, 0.0);
        let (o, d) = res.distribution.mean_offer_demand();
        assert!((o - 0.5).abs() < 1e-15);
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn solver_reports_nonconvergence_with_best_iterate() {
        let a = payoff_matrix_empathetic(12).unwrap();
        let config = SolverConfig { tol: 1e-12, max_steps: 3, damping: 0.5 };
        match solve_stationary(&a, Layout::Empathetic { s: 12 }, 0.05, &config) {
            Err(Error::NonConvergence { steps, residual, best, .. }) => {
                assert_eq!(steps, 3);
                assert!(residual > 0.0);
                assert_eq!(best.freqs.len(), 12);
                let total: f64 = best.freqs.iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
            other => panic!("expected nonconvergence, got {other:?}"),
        }
    }

    #[test]
    fn solver_rejects_mismatched_layout() {
        let a = payoff_matrix_empathetic(12).unwrap();
        assert!(solve_stationary(
            &a,
            Layout::Independent { s: 12 },
            0.1,
            &SolverConfig::default()
        )
        .is_err());
    }

    #[test]
    fn stationary_state_has_small_rhs_and_positive_entries() {
        let s = 20;
        let a = payoff_matrix_empathetic(s).unwrap();
        let res = solve_stationary(&a, Layout::Empathetic { s }, 0.15, &SolverConfig::default())
            .unwrap();
        let r = rhs_empathetic(&res.distribution.freqs, 0.15, &a);
        let max = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        assert!(max <= 1e-10, "{max}");
        assert!(res.distribution.freqs.iter().all(|&x| x > 0.0));
        assert_eq!(res.phi_floor_hits, 0);
    }

    #[test]
    fn solver_commutes_with_grid_reflection() {
        // Reflecting the offer grid o -> 1-o permutes the payoff matrix;
        // the solve from the uniform start must produce the permuted
        // stationary state.
        let s = 20;
        let u = 0.15;
        let a = payoff_matrix_empathetic(s).unwrap();
        let reflected = PayoffMatrix::from_fn(s, |i, j| a.get(s - 1 - i, s - 1 - j));
        let base = solve_stationary(&a, Layout::Empathetic { s }, u, &SolverConfig::default())
            .unwrap();
        let refl =
            solve_stationary(&reflected, Layout::Empathetic { s }, u, &SolverConfig::default())
                .unwrap();
        for k in 0..s {
            let diff = (refl.distribution.freqs[k] - base.distribution.freqs[s - 1 - k]).abs();
            assert!(diff < 1e-9, "k={k}: {diff}");
        }
    }

    #[test]
    fn independent_small_grid_offers_rise_with_mutation() {
        let s = 7;
        let a = payoff_matrix_independent(s).unwrap();
        let mut previous = -1.0;
        for u in [0.1, 0.3, 0.5] {
            let res =
                solve_stationary(&a, Layout::Independent { s }, u, &SolverConfig::default())
                    .unwrap();
            let (offer, _) = res.distribution.mean_offer_demand();
            assert!(offer > previous, "u={u}: {offer} <= {previous}");
            previous = offer;
        }
    }

    #[test]
    fn residual_jacobian_matches_finite_differences() {
        let s = 3;
        let a = payoff_matrix_independent(s).unwrap();
        let dim = s * s;
        let mut rng = rng_from_seed(33);
        let x = random_simplex_point(dim, &mut rng);
        let mut jac = Vec::new();
        assert!(fill_residual_jacobian(&x, 0.3, &a, &mut jac));
        let h = 1e-7;
        let mut plus = vec![0.0; dim];
        let mut minus = vec![0.0; dim];
        for j in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            generation_map(&xp, 0.3, &a, &mut plus);
            generation_map(&xm, 0.3, &a, &mut minus);
            for i in 0..dim {
                let fd = ((plus[i] - xp[i]) - (minus[i] - xm[i])) / (2.0 * h);
                assert!(
                    (jac[i * dim + j] - fd).abs() < 1e-5,
                    "({i},{j}): {} vs {}",
                    jac[i * dim + j],
                    fd
                );
            }
        }
    }

    #[test]
    fn newton_polish_reaches_tight_tolerance_on_stiff_case() {
        // Small mutation makes the plain iteration creep; the hybrid must
        // still reach a strict residual in a modest budget.
        let s = 7;
        let a = payoff_matrix_independent(s).unwrap();
        let config = SolverConfig { tol: 1e-12, max_steps: 300_000, damping: 0.5 };
        let res = solve_stationary(&a, Layout::Independent { s }, 0.05, &config).unwrap();
        assert!(res.residual <= 1e-12);
        let r = rhs_independent(&res.distribution.freqs, 0.05, &a);
        let max = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        assert!(max <= 1e-12, "{max}");
    }

    #[test]
    fn zero_average_payoff_state_takes_fallback_flow() {
        // All mass on (offer 0, demand 1): both proposals always rejected.
        let s = 2;
        let a = payoff_matrix_independent(s).unwrap();
        let mut x = vec![0.0; 4];
        x[1] = 1.0; // index 0*2+1 = (offer 0, demand 1)
        let r = rhs_independent(&x, 0.4, &a);
        // Fallback flow: x_i (1-u) + u/4 - x_i.
        assert!((r[1] - (0.6 + 0.1 - 1.0)).abs() < 1e-15);
        assert!((r[0] - 0.1).abs() < 1e-15);
    }
}
