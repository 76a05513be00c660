//! Payoff kernels for the two-role ultimatum game.
//!
//! Every pairwise encounter plays the game twice, with the two players
//! taking the proposer and responder roles in turn. The stake is fixed at 1.
//! A proposal is accepted exactly when the offer meets the responder's
//! demand (weak inequality, so an offer equal to the demand is accepted).

use rand::Rng;

use crate::error::{Error, Result};

/// Whether a strategy couples its offer to its demand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyKind {
    /// Offers exactly what it would accept (`p == q`).
    Empathetic,
    /// Offer and demand vary independently.
    Independent,
}

/// An (offer, demand) pair; the unit of heredity in the population models.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Strategy {
    p: f64,
    q: f64,
    kind: StrategyKind,
}

impl Strategy {
    /// Empathetic strategy offering and demanding `offer`.
    pub fn empathetic(offer: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&offer) {
            return Err(Error::InvalidStrategy { p: offer, q: offer });
        }
        Ok(Self { p: offer, q: offer, kind: StrategyKind::Empathetic })
    }

    /// Independent strategy with offer `p` and minimum demand `q`.
    pub fn independent(p: f64, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidStrategy { p, q });
        }
        Ok(Self { p, q, kind: StrategyKind::Independent })
    }

    /// Draws a fresh random strategy: empathetic with probability `alpha`
    /// (one uniform value draw), otherwise independent (two draws).
    ///
    /// The draw order (kind coin, then value(s)) is fixed; it is part of the
    /// reproducibility contract of the simulation.
    pub fn random<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Self {
        if rng.gen::<f64>() < alpha {
            let offer = rng.gen::<f64>();
            Self { p: offer, q: offer, kind: StrategyKind::Empathetic }
        } else {
            Self { p: rng.gen::<f64>(), q: rng.gen::<f64>(), kind: StrategyKind::Independent }
        }
    }

    /// Offer made when acting as proposer.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Minimum share accepted when acting as responder.
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }
}

/// Payoff to `s1` from the two-role encounter with `s2`.
///
/// The four branches follow from which of the two proposals is accepted:
/// `s1`'s proposal pays `1 - s1.p` to `s1` when accepted (`s1.p >= s2.q`),
/// and `s2`'s proposal pays `s2.p` to `s1` when accepted (`s2.p >= s1.q`).
pub fn payoff_pair(s1: Strategy, s2: Strategy) -> f64 {
    let first_accepted = s1.p >= s2.q;
    let second_accepted = s2.p >= s1.q;
    match (first_accepted, second_accepted) {
        (false, false) => 0.0,
        (false, true) => s2.p,
        (true, false) => 1.0 - s1.p,
        (true, true) => 1.0 - s1.p + s2.p,
    }
}

/// Total payoff of each member of one group against all other members.
///
/// A lone member has no interaction partner and receives 0.
pub fn group_payoffs(strategies: &[Strategy]) -> Vec<f64> {
    let mut out = Vec::new();
    group_payoffs_into(strategies, &mut out);
    out
}

/// In-place variant of [`group_payoffs`], for callers that reuse buffers.
///
/// For each member the partner contributions accumulate in ascending partner
/// index order, so results are bit-identical however often a group is
/// recomputed.
pub fn group_payoffs_into(strategies: &[Strategy], out: &mut Vec<f64>) {
    out.clear();
    out.resize(strategies.len(), 0.0);
    for i in 0..strategies.len() {
        for j in (i + 1)..strategies.len() {
            // One pass per unordered pair; both role assignments share the
            // same two acceptance tests.
            let (si, sj) = (strategies[i], strategies[j]);
            let i_accepted = si.p >= sj.q;
            let j_accepted = sj.p >= si.q;
            let mut to_i = 0.0;
            let mut to_j = 0.0;
            if i_accepted {
                to_i += 1.0 - si.p;
                to_j += si.p;
            }
            if j_accepted {
                to_i += sj.p;
                to_j += 1.0 - sj.p;
            }
            out[i] += to_i;
            out[j] += to_j;
        }
    }
}

/// Reproductive fitness under selection intensity `omega`: `1 - w + w*P`.
pub fn fitness(payoff: f64, omega: f64) -> f64 {
    1.0 - omega + omega * payoff
}

/// The evenly spaced offer grid `{0, 1/(S-1), ..., 1}`.
#[derive(Clone, Debug)]
pub struct DiscreteStrategySet {
    offers: Vec<f64>,
}

impl DiscreteStrategySet {
    pub fn new(s: usize) -> Result<Self> {
        if s < 2 {
            return Err(Error::GridTooSmall(s));
        }
        let offers = (0..s).map(|k| k as f64 / (s - 1) as f64).collect();
        Ok(Self { offers })
    }

    pub fn len(&self) -> usize {
        self.offers.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn offer(&self, k: usize) -> f64 {
        self.offers[k]
    }

    pub fn offers(&self) -> &[f64] {
        &self.offers
    }
}

/// Dense square payoff matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffMatrix {
    n: usize,
    data: Vec<f64>,
}

impl PayoffMatrix {
    /// Builds an `n x n` matrix from an entry function.
    pub fn from_fn(n: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(entry(i, j));
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }
}

/// `S x S` payoff matrix over the empathetic grid strategies.
///
/// Entry `(i, j)` is the payoff of the grid strategy with offer `o_i`
/// against the one with offer `o_j`; the diagonal is identically 1.
pub fn payoff_matrix_empathetic(s: usize) -> Result<PayoffMatrix> {
    let grid = DiscreteStrategySet::new(s)?;
    let mut data = Vec::with_capacity(s * s);
    for i in 0..s {
        let si = Strategy::empathetic(grid.offer(i)).expect("grid offers lie in [0,1]");
        for j in 0..s {
            let sj = Strategy::empathetic(grid.offer(j)).expect("grid offers lie in [0,1]");
            data.push(payoff_pair(si, sj));
        }
    }
    Ok(PayoffMatrix { n: s, data })
}

/// `S^2 x S^2` payoff matrix over independent grid strategies.
///
/// Strategy `(i, j)` denotes offer `o_i` and demand `o_j`; rows and columns
/// use the row-major index `i * S + j`, which is also the layout of the CSV
/// output downstream.
pub fn payoff_matrix_independent(s: usize) -> Result<PayoffMatrix> {
    let grid = DiscreteStrategySet::new(s)?;
    let n = s * s;
    let strategies: Vec<Strategy> = (0..n)
        .map(|idx| {
            Strategy::independent(grid.offer(idx / s), grid.offer(idx % s))
                .expect("grid offers lie in [0,1]")
        })
        .collect();
    let mut data = Vec::with_capacity(n * n);
    for &a in &strategies {
        for &b in &strategies {
            data.push(payoff_pair(a, b));
        }
    }
    Ok(PayoffMatrix { n, data })
}
