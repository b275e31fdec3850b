//! Exact and brute-force reference solutions.
//!
//! Every efficiency ratio in the crate divides by one of these. Note the two
//! denominators in play: [`optimal_ud_equilibrium`] is the optimal *equilibrium*
//! welfare (unique for unit-demand), while [`opt_welfare_additive`] and
//! [`opt_welfare_bruteforce`] maximize welfare with no budget constraint at
//! all. The bounds quoted per algorithm name the denominator they require.

use crate::core::{Bundle, MarketInstance, Outcome, Price, ValuationProfile};
use crate::{Error, Result};

/// Serial dictatorship on true values: players in decreasing budget order each
/// take their best remaining good at price `b_i`; leftovers go to player `n`
/// free. For unit-demand markets with distinct values this is the unique
/// equilibrium welfare.
pub fn optimal_ud_equilibrium(market: &MarketInstance) -> Result<Outcome> {
    let values = match &market.valuations {
        ValuationProfile::UnitDemand { values } => values,
        _ => {
            return Err(Error::InvalidParameter(
                "optimal_ud_equilibrium needs a unit-demand truth".into(),
            ))
        }
    };
    let mut outcome = Outcome::empty(market.n, market.k);
    let mut pool = Bundle::full(market.k);
    for i in 0..market.n {
        if pool.is_empty() {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for g in pool.iter() {
            let v = values[i][g];
            match best {
                Some((_, bv)) if v == bv => {
                    return Err(Error::TiedValues(format!(
                        "player {i} ties on value {v}; serial dictatorship is ambiguous"
                    )));
                }
                Some((_, bv)) if v > bv => best = Some((g, v)),
                None => best = Some((g, v)),
                _ => {}
            }
        }
        let (g, _) = best.expect("pool is nonempty");
        outcome.allocation[i].insert(g);
        outcome.prices[g] = Price::Finite(market.budgets.get(i));
        pool.remove(g);
    }
    // leftovers to the last player at price 0
    let last = market.n - 1;
    for g in pool.iter() {
        outcome.allocation[last].insert(g);
    }
    Ok(outcome)
}

/// Welfare-maximizing allocation for additive truths: every good to its
/// argmax-value player. Ignores budgets entirely.
pub fn opt_welfare_additive(market: &MarketInstance) -> Result<Vec<Bundle>> {
    let values = match &market.valuations {
        ValuationProfile::Additive { values } => values,
        _ => {
            return Err(Error::InvalidParameter(
                "opt_welfare_additive needs an additive truth".into(),
            ))
        }
    };
    let mut allocation = vec![Bundle::empty(market.k); market.n];
    for g in 0..market.k {
        let mut owner = 0;
        for i in 1..market.n {
            if values[i][g] > values[owner][g] {
                owner = i;
            }
        }
        allocation[owner].insert(g);
    }
    Ok(allocation)
}

/// Welfare-maximal partition of the goods for any valuation family, found by
/// branch and bound over per-good assignments. `limit` caps explored nodes.
pub fn opt_welfare_bruteforce(market: &MarketInstance, limit: u64) -> Result<Vec<Bundle>> {
    // Assign goods in descending order of best singleton value; prune with an
    // admissible bound on what the remaining goods can still contribute.
    let singleton_best: Vec<f64> = (0..market.k)
        .map(|g| {
            (0..market.n)
                .map(|i| market.eval(i, &Bundle::from_indices(market.k, [g])))
                .fold(0.0, f64::max)
        })
        .collect();
    let mut order: Vec<usize> = (0..market.k).collect();
    order.sort_by(|&a, &b| singleton_best[b].total_cmp(&singleton_best[a]).then(a.cmp(&b)));

    // For monotone submodular-or-smaller families the marginal gain of a good
    // never exceeds its best singleton value. Single-minded valuations jump,
    // so they get a completion-count bound instead.
    let single_minded = matches!(market.valuations, ValuationProfile::SingleMinded { .. });
    let suffix_bound: Vec<f64> = {
        let mut s = vec![0.0; market.k + 1];
        for d in (0..market.k).rev() {
            s[d] = s[d + 1] + singleton_best[order[d]];
        }
        s
    };

    struct Search<'a> {
        market: &'a MarketInstance,
        order: Vec<usize>,
        suffix_bound: Vec<f64>,
        single_minded: bool,
        limit: u64,
        visited: u64,
        best_welfare: f64,
        best: Vec<Bundle>,
        current: Vec<Bundle>,
        values: Vec<f64>,
    }

    impl Search<'_> {
        fn bound(&self, depth: usize) -> f64 {
            if !self.single_minded {
                return self.suffix_bound[depth];
            }
            let desired = match &self.market.valuations {
                ValuationProfile::SingleMinded { desired } => desired,
                _ => unreachable!(),
            };
            let mut remaining = Bundle::empty(self.market.k);
            for &g in &self.order[depth..] {
                remaining.insert(g);
            }
            let mut completable = 0.0;
            for (i, d) in desired.iter().enumerate() {
                if self.values[i] > 0.0 {
                    continue;
                }
                let reachable = self.current[i].union(&remaining);
                if d.is_subset(&reachable) {
                    completable += 1.0;
                }
            }
            completable
        }

        fn go(&mut self, depth: usize, welfare: f64) -> Result<()> {
            self.visited += 1;
            if self.visited > self.limit {
                return Err(Error::LimitExceeded(format!(
                    "brute-force welfare search visited more than {} nodes",
                    self.limit
                )));
            }
            if depth == self.order.len() {
                if welfare > self.best_welfare {
                    self.best_welfare = welfare;
                    self.best = self.current.clone();
                }
                return Ok(());
            }
            if welfare + self.bound(depth) <= self.best_welfare {
                return Ok(());
            }
            let g = self.order[depth];
            for i in 0..self.market.n {
                self.current[i].insert(g);
                let new_value = self.market.eval(i, &self.current[i]);
                let delta = new_value - self.values[i];
                let old = self.values[i];
                self.values[i] = new_value;
                self.go(depth + 1, welfare + delta)?;
                self.values[i] = old;
                self.current[i].remove(g);
            }
            Ok(())
        }
    }

    let mut search = Search {
        market,
        order,
        suffix_bound,
        single_minded,
        limit,
        visited: 0,
        best_welfare: f64::NEG_INFINITY,
        best: vec![Bundle::empty(market.k); market.n],
        current: vec![Bundle::empty(market.k); market.n],
        values: vec![0.0; market.n],
    };
    search.go(0, 0.0)?;
    Ok(search.best)
}

/// Maximum-cardinality set of players with mutually disjoint desired sets,
/// realized with the lower-bound proof's pricing: winners' sets priced to
/// their budget, everything else priced out of everyone's reach.
///
/// The welfare of the returned outcome upper-bounds the welfare of every
/// true-valuation equilibrium, which is what the efficiency denominators need.
pub fn optimal_sm_welfare_equilibrium(market: &MarketInstance, limit: u64) -> Result<Outcome> {
    let desired = match &market.valuations {
        ValuationProfile::SingleMinded { desired } => desired,
        _ => {
            return Err(Error::InvalidParameter(
                "optimal_sm_welfare_equilibrium needs a single-minded truth".into(),
            ))
        }
    };
    if market.n > 20 {
        return Err(Error::LimitExceeded(format!(
            "winner-set enumeration over {} players exceeds n = 20",
            market.n
        )));
    }
    let masks = 1u64 << market.n;
    let mut best_mask = 0u64;
    let mut best_card = 0u32;
    for mask in 0..masks.min(limit) {
        if mask.count_ones() <= best_card {
            continue;
        }
        let mut union = Bundle::empty(market.k);
        let mut disjoint = true;
        for i in 0..market.n {
            if mask & (1 << i) != 0 {
                if !union.is_disjoint(&desired[i]) {
                    disjoint = false;
                    break;
                }
                union.union_with(&desired[i]);
            }
        }
        if disjoint {
            best_mask = mask;
            best_card = mask.count_ones();
        }
    }

    let mut outcome = Outcome::empty(market.n, market.k);
    let unreachable = market.budgets.get(0) + 1.0;
    for p in outcome.prices.iter_mut() {
        *p = Price::Finite(unreachable);
    }
    for i in 0..market.n {
        if best_mask & (1 << i) != 0 {
            let d = &desired[i];
            let share = market.budgets.get(i) / d.len() as f64;
            for g in d.iter() {
                outcome.prices[g] = Price::Finite(share);
            }
            outcome.allocation[i] = d.clone();
        }
    }
    Ok(outcome)
}

/// A fractional allocation over divisible goods, with market-clearing prices.
#[derive(Clone, Debug)]
pub struct FractionalAllocation {
    /// `shares[i][g]` in `[0,1]`, column sums at most 1.
    pub shares: Vec<Vec<f64>>,
    pub prices: Vec<f64>,
}

/// Divisible-goods equilibrium for additive (linear) utilities via
/// proportional response dynamics: each player's bid on a good moves toward
/// the share of their utility that good provides. The fixed point is the
/// Eisenberg-Gale market equilibrium.
pub fn divisible_additive_equilibrium(
    market: &MarketInstance,
    iterations: usize,
    tolerance: f64,
) -> Result<FractionalAllocation> {
    let values = match &market.valuations {
        ValuationProfile::Additive { values } => values,
        _ => {
            return Err(Error::InvalidParameter(
                "divisible_additive_equilibrium needs an additive truth".into(),
            ))
        }
    };
    let (n, k) = (market.n, market.k);
    for (i, row) in values.iter().enumerate() {
        if row.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidParameter(format!(
                "player {i} values every good at zero"
            )));
        }
    }

    let mut bids: Vec<Vec<f64>> = (0..n)
        .map(|i| vec![market.budgets.get(i) / k as f64; k])
        .collect();
    let mut prices = vec![0.0f64; k];
    let mut residual = f64::INFINITY;
    for _ in 0..iterations {
        for g in 0..k {
            prices[g] = (0..n).map(|i| bids[i][g]).sum();
        }
        residual = 0.0;
        for i in 0..n {
            let utility: f64 = (0..k)
                .map(|g| {
                    if prices[g] > 0.0 {
                        bids[i][g] / prices[g] * values[i][g]
                    } else {
                        0.0
                    }
                })
                .sum();
            debug_assert!(utility > 0.0, "positive-value player lost all utility");
            for g in 0..k {
                let share_value = if prices[g] > 0.0 {
                    bids[i][g] / prices[g] * values[i][g]
                } else {
                    0.0
                };
                let next = market.budgets.get(i) * share_value / utility;
                residual = residual.max((next - bids[i][g]).abs());
                bids[i][g] = next;
            }
        }
        if residual < tolerance {
            for g in 0..k {
                prices[g] = (0..n).map(|i| bids[i][g]).sum();
            }
            let shares = (0..n)
                .map(|i| {
                    (0..k)
                        .map(|g| {
                            if prices[g] > 0.0 {
                                bids[i][g] / prices[g]
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            return Ok(FractionalAllocation { shares, prices });
        }
    }
    Err(Error::NonConvergence {
        iterations,
        residual,
    })
}
