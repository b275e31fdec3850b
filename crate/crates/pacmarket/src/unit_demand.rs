//! Learning outcomes for unit-demand markets.
//!
//! Two routes: [`indirect_ud`] first estimates per-good values from the samples
//! and then runs a serial dictatorship on the estimates (fast, but its output
//! can be arbitrarily far from a PAC equilibrium); [`direct_ud`] learns a
//! consistent outcome straight from the samples, allocating each player the
//! smallest bundle certain to contain their best available good.

use crate::core::{Bundle, BudgetVector, Outcome, Price, SampleSet};

/// Per-good value estimates; `None` marks goods appearing in no sample.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitDemandEstimate {
    /// `est[i][g]` is the smallest observed value of a sample containing `g`,
    /// an overestimate of the true singleton value `v_i({g})`.
    pub est: Vec<Vec<Option<f64>>>,
}

/// Estimate each good's value as the value of the cheapest sample containing it.
pub fn learn_ud_estimate(samples: &SampleSet) -> UnitDemandEstimate {
    let (n, k) = (samples.n(), samples.k());
    let mut est = vec![vec![None; k]; n];
    for r in samples.iter() {
        for g in r.bundle.iter() {
            for (i, &v) in r.values.iter().enumerate() {
                let slot = &mut est[i][g];
                match slot {
                    Some(cur) if *cur <= v => {}
                    _ => *slot = Some(v),
                }
            }
        }
    }
    UnitDemandEstimate { est }
}

/// Serial dictatorship over the learned estimates: players in decreasing budget
/// order take the argmax-estimate good from the observed pool at price `b_i`;
/// once the observed pool empties, selection continues over unobserved goods in
/// ascending index order. Leftovers go to the last player free.
///
/// Ties in the argmax break toward the lowest good index, so the outcome is
/// deterministic.
pub fn indirect_ud(samples: &SampleSet, budgets: &BudgetVector) -> Outcome {
    let (n, k) = (budgets.n(), samples.k());
    let estimate = learn_ud_estimate(samples);
    let mut outcome = Outcome::empty(n, k);
    let mut observed = samples.observed_goods();
    let mut unobserved = observed.complement();

    for i in 0..n {
        let pick = if !observed.is_empty() {
            let mut best: Option<(usize, f64)> = None;
            for g in observed.iter() {
                let v = estimate.est[i][g].expect("observed goods have estimates");
                if best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((g, v));
                }
            }
            best.map(|(g, _)| g)
        } else {
            unobserved.min_index()
        };
        let Some(g) = pick else { break };
        outcome.allocation[i].insert(g);
        outcome.prices[g] = Price::Finite(budgets.get(i));
        observed.remove(g);
        unobserved.remove(g);
    }

    let last = n - 1;
    for g in observed.iter().chain(unobserved.iter()) {
        outcome.allocation[last].insert(g);
    }
    outcome
}

/// Directly learn a consistent outcome.
///
/// Unobserved goods go to player 1 free. Then, per player in decreasing budget
/// order: walk the player's samples in decreasing value groups; a group's core
/// is the intersection of its samples minus every strictly lower-valued sample
/// in the full set. The first core that is nonempty and disjoint from earlier
/// allocations is allocated, its members priced `b_i / |core|`. Players whose
/// groups all fail receive nothing. Leftover observed goods go to the last
/// player free.
pub fn direct_ud(samples: &SampleSet, budgets: &BudgetVector) -> Outcome {
    let (n, k) = (budgets.n(), samples.k());
    let mut outcome = Outcome::empty(n, k);
    let observed = samples.observed_goods();
    outcome.allocation[0] = observed.complement();

    let mut allocated = Bundle::empty(k);
    let m = samples.len();
    let mut order: Vec<usize> = (0..m).collect();
    for i in 0..n {
        if m == 0 {
            break;
        }
        order.sort_by(|&a, &b| {
            samples.records()[b].values[i]
                .total_cmp(&samples.records()[a].values[i])
                .then(a.cmp(&b))
        });
        // group boundaries on exact value equality, descending
        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for j in 1..=m {
            if j == m
                || samples.records()[order[j]].values[i]
                    != samples.records()[order[start]].values[i]
            {
                groups.push((start, j));
                start = j;
            }
        }
        // union of every sample strictly below each group
        let mut below = vec![Bundle::empty(k); groups.len()];
        for gi in (0..groups.len().saturating_sub(1)).rev() {
            let mut u = below[gi + 1].clone();
            for &j in &order[groups[gi + 1].0..groups[gi + 1].1] {
                u.union_with(&samples.records()[j].bundle);
            }
            below[gi] = u;
        }

        for (gi, &(lo, hi)) in groups.iter().enumerate() {
            let mut core = samples.records()[order[lo]].bundle.clone();
            for &j in &order[lo + 1..hi] {
                core.intersect_with(&samples.records()[j].bundle);
            }
            core.subtract(&below[gi]);
            if !core.is_empty() && core.is_disjoint(&allocated) {
                let share = budgets.get(i) / core.len() as f64;
                for g in core.iter() {
                    outcome.prices[g] = Price::Finite(share);
                }
                allocated.union_with(&core);
                outcome.allocation[i].union_with(&core);
                break;
            }
        }
    }

    // leftover observed goods to the last player at price 0
    let mut leftover = observed;
    leftover.subtract(&allocated);
    outcome.allocation[n - 1].union_with(&leftover);
    outcome
}
