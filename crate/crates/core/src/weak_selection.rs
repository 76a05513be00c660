//! Closed-form predictions for the mean offer under weak selection when the
//! whole population plays empathetic strategies.
//!
//! The migration structure enters through a Fourier-type kernel `f(x)` and
//! two families of rational structure coefficients (psi, phi). From those,
//! three aggregate coefficients (gamma) give the first-order stationary
//! frequency of every strategy on a discrete offer grid, and the continuum
//! limit yields the mean offer directly. For global migration the kernel
//! sum collapses and the mean offer has an explicit closed form, which the
//! kernel-sum route must reproduce to high precision; the two routes
//! cross-check each other.
//!
//! `u = 0` is a pole of all first-order expressions (every formula carries
//! `1/u`) and is rejected.

use crate::error::{Error, Result};
use crate::game::payoff_matrix_empathetic;
use crate::moran::MigrationPattern;
use crate::stats::{kahan_sum, KahanSum};

/// Parameters of the weak-selection expressions.
#[derive(Clone, Copy, Debug)]
pub struct TheoryParams {
    pub n: usize,
    pub m: usize,
    /// Mutation probability; must be positive.
    pub u: f64,
    /// Migration probability.
    pub v: f64,
    /// Intensity of selection; the expressions are first order in omega.
    pub omega: f64,
    pub pattern: MigrationPattern,
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParams(format!("n must be >= 2, got {}", self.n)));
        }
        if self.m < 1 {
            return Err(Error::InvalidParams("m must be >= 1".into()));
        }
        if self.u == 0.0 {
            return Err(Error::MutationPole);
        }
        if !(0.0..=1.0).contains(&self.u) || !(0.0..=1.0).contains(&self.v) {
            return Err(Error::InvalidParams(format!(
                "u and v must lie in [0,1], got u={}, v={}",
                self.u, self.v
            )));
        }
        if !(self.omega >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "omega must be >= 0, got {}",
                self.omega
            )));
        }
        Ok(())
    }
}

/// Migration kernel at group distance `x` (`1 <= x <= m`).
///
/// Global migration averages the cosine over all nonzero modes, which
/// evaluates to `-1/(m-1)` for `x < m` and `1` at `x = m`; local migration
/// keeps the single fundamental mode. With one group both patterns are
/// vacuous and the kernel is 1.
pub fn f_kernel(x: usize, m: usize, pattern: MigrationPattern) -> f64 {
    assert!(x >= 1 && x <= m, "kernel argument x={x} outside 1..={m}");
    if m == 1 {
        return 1.0;
    }
    let m_f = m as f64;
    match pattern {
        MigrationPattern::Global => {
            let mut acc = KahanSum::default();
            for j in 1..m {
                acc.add((2.0 * std::f64::consts::PI * (j * x) as f64 / m_f).cos());
            }
            acc.total() / (m_f - 1.0)
        }
        MigrationPattern::Local => (2.0 * std::f64::consts::PI * x as f64 / m_f).cos(),
    }
}

/// The pair (psi1, psi2) at kernel value `f`.
pub fn psi(f: f64, params: &TheoryParams) -> (f64, f64) {
    let n1 = params.n as f64 - 1.0;
    let u = params.u;
    let w = params.v * (1.0 - f);
    let psi1 = (1.0 - w) / (1.0 + n1 * w);
    let psi2 = (1.0 - u) * (1.0 - w) / (1.0 + n1 * u + n1 * (1.0 - u) * w);
    (psi1, psi2)
}

/// The within-group ancestry coefficient (named `alpha1` to avoid clashing
/// with the empathy fraction `alpha` of the simulation parameters).
pub fn alpha1(params: &TheoryParams) -> f64 {
    (1.0 - params.u) / (1.0 + (params.n as f64 - 1.0) * params.u)
}

/// The five phi coefficients at kernel value `f`.
pub fn phis(f: f64, params: &TheoryParams) -> [f64; 5] {
    let n2 = params.n as f64 - 2.0;
    let u = params.u;
    let w = params.v * (1.0 - f);
    let phi1 = (1.0 - u) * (2.0 - w) / (2.0 + n2 * u + 2.0 / 3.0 * n2 * (1.0 - u) * w);
    let phi2 = (2.0 - u - w) / (2.0 + 2.0 / 3.0 * n2 * u + n2 * (2.0 - u) * w / 3.0);
    let phi3 = (1.0 - u) * (2.0 - w) / (2.0 + 2.0 / 3.0 * n2 * u + n2 * (2.0 - u) * w / 3.0);
    let phi4 = (1.0 - u) * (1.0 - w) / (1.0 + n2 * u / 2.0 + n2 * (1.0 - u) * w / 3.0);
    let phi5 = (2.0 - u) * (1.0 - w) / (2.0 + 2.0 / 3.0 * n2 * u + n2 * (2.0 - u) * w / 3.0);
    [phi1, phi2, phi3, phi4, phi5]
}

/// The three gamma coefficients: kernel sums of psi/phi combinations.
pub fn gammas(params: &TheoryParams) -> (f64, f64, f64) {
    let n1 = params.n as f64 - 1.0;
    let n2 = params.n as f64 - 2.0;
    let m_f = params.m as f64;
    let a1 = alpha1(params);
    let mut s1 = KahanSum::default();
    let mut s2 = KahanSum::default();
    let mut s3 = KahanSum::default();
    for x in 1..=params.m {
        let f = f_kernel(x, params.m, params.pattern);
        let (psi1, psi2) = psi(f, params);
        let [phi1, phi2, phi3, phi4, phi5] = phis(f, params);
        let core = -2.0 * phi1 * psi2 - phi4 * a1 + phi2 * psi2 + phi3 * psi1 + phi5 * a1;
        s1.add(-2.0 * phi1 * psi2 - phi4 * a1 + 3.0 * psi2);
        s2.add(3.0 * psi1 - 3.0 * psi2 + n2 * core);
        s3.add(3.0 * psi1 - 3.0 * psi2 - 2.0 * core);
    }
    (
        n1 * n2 / (3.0 * m_f) * s1.total(),
        n1 / (3.0 * m_f) * s2.total(),
        n1 * n2 / (3.0 * m_f) * s3.total(),
    )
}

/// Row/column statistics of the empathetic grid payoff matrix.
#[derive(Clone, Debug)]
pub struct PayoffStats {
    /// Self-play payoffs `a_kk` (identically 1 on the empathetic grid).
    pub diag: Vec<f64>,
    /// Row means: average payoff of strategy `k` against the grid.
    pub row_mean: Vec<f64>,
    /// Column means: average payoff of the grid against strategy `k`.
    pub col_mean: Vec<f64>,
    /// Mean of the diagonal.
    pub diag_mean: f64,
    /// Mean over all entries.
    pub grand_mean: f64,
}

/// Computes [`PayoffStats`] for the `S`-point empathetic grid.
pub fn payoff_stats_empathetic(s: usize) -> Result<PayoffStats> {
    let matrix = payoff_matrix_empathetic(s)?;
    let s_f = s as f64;
    let mut row_mean = Vec::with_capacity(s);
    let mut col_sums = vec![KahanSum::default(); s];
    let mut diag = Vec::with_capacity(s);
    let mut grand = KahanSum::default();
    for i in 0..s {
        let row = matrix.row(i);
        let total = kahan_sum(row.iter().copied());
        row_mean.push(total / s_f);
        grand.add(total);
        diag.push(matrix.get(i, i));
        for (j, &a) in row.iter().enumerate() {
            col_sums[j].add(a);
        }
    }
    let col_mean: Vec<f64> = col_sums.iter().map(|c| c.total() / s_f).collect();
    let diag_mean = kahan_sum(diag.iter().copied()) / s_f;
    Ok(PayoffStats {
        diag,
        row_mean,
        col_mean,
        diag_mean,
        grand_mean: grand.total() / (s_f * s_f),
    })
}

/// First-order stationary frequencies of all `S` grid strategies.
///
/// Each frequency is `1/S` plus an order-omega correction proportional to
/// how the strategy's payoff statistics deviate from the grid averages; the
/// corrections cancel exactly in the sum, so the result is a distribution.
pub fn stationary_distribution(s: usize, params: &TheoryParams) -> Result<Vec<f64>> {
    params.validate()?;
    let stats = payoff_stats_empathetic(s)?;
    let (g1, g2, g3) = gammas(params);
    let s_f = s as f64;
    let coeff =
        params.omega * (1.0 - params.u) / (params.n as f64 * params.u) / s_f;
    Ok((0..s)
        .map(|k| {
            1.0 / s_f
                + coeff
                    * (g1 * (stats.diag[k] - stats.diag_mean)
                        + g2 * (stats.row_mean[k] - stats.col_mean[k])
                        + g3 * (stats.row_mean[k] - stats.grand_mean))
        })
        .collect())
}

/// Stationary frequency of the single strategy with grid index `k`
/// (zero-based). Convenience wrapper over [`stationary_distribution`].
pub fn stationary_frequency(k: usize, s: usize, params: &TheoryParams) -> Result<f64> {
    if k >= s {
        return Err(Error::InvalidParams(format!("index {k} outside grid of size {s}")));
    }
    Ok(stationary_distribution(s, params)?[k])
}

/// Grid-weighted mean `sum_k o_k x_k` of a frequency vector over the offer
/// grid `{0, 1/(S-1), ..., 1}`.
pub fn grid_weighted_mean(freqs: &[f64]) -> f64 {
    let s1 = freqs.len() as f64 - 1.0;
    kahan_sum(freqs.iter().enumerate().map(|(k, &x)| k as f64 / s1 * x))
}

/// Mean offer to first order in omega, via the migration-kernel sum.
/// Valid for both migration patterns.
pub fn mean_offer_weak(params: &TheoryParams) -> Result<f64> {
    params.validate()?;
    let n1 = params.n as f64 - 1.0;
    let m_f = params.m as f64;
    let mut acc = KahanSum::default();
    for x in 1..=params.m {
        let (psi1, psi2) = psi(f_kernel(x, params.m, params.pattern), params);
        acc.add(psi1 - psi2);
    }
    Ok(0.5 - params.omega * (1.0 - params.u) * n1 / (24.0 * m_f * params.u) * acc.total())
}

/// Mean offer for global migration in explicit closed form.
///
/// Algebraically identical to [`mean_offer_weak`] with the global kernel;
/// the two implementations are kept fully separate so they can serve as
/// cross-checks of each other.
pub fn mean_offer_global_closed(params: &TheoryParams) -> Result<f64> {
    params.validate()?;
    if params.pattern != MigrationPattern::Global {
        return Err(Error::InvalidParams(
            "closed form applies to the global migration pattern".into(),
        ));
    }
    if params.m < 2 {
        return Err(Error::ClosedFormNeedsGroups);
    }
    let n = params.n as f64;
    let n1 = n - 1.0;
    let m_f = params.m as f64;
    let u = params.u;
    let w = params.v * m_f / (m_f - 1.0);
    let term1 = 1.0 / (1.0 + n1 * u);
    let term2 = (m_f - 1.0) * (1.0 - w)
        / ((1.0 + n1 * w) * (1.0 + n1 * u + n1 * w - n1 * u * w));
    Ok(0.5 - params.omega * (1.0 - u) * n1 * n / (24.0 * m_f) * (term1 + term2))
}
