//! Loss, welfare, efficiency, envy, Walrasian verification, and sample bounds.

use crate::core::{affordable, eval, Bundle, BudgetVector, MarketInstance, Outcome, SampleSet, ValuationProfile};
use crate::distributions::{sample_bundle, DistributionSpec};
use crate::{Error, Result};
use rand::Rng;

/// Empirical loss of an outcome on a sample set, with violation provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    /// Fraction of samples some player both prefers and can afford.
    pub empirical: f64,
    /// Every `(player, sample index)` pair witnessing a violation.
    pub violating: Vec<(usize, usize)>,
}

/// 1 iff some player strictly prefers `bundle` to their allocation and can
/// afford it at the outcome's prices.
pub fn loss_indicator(
    outcome: &Outcome,
    bundle: &Bundle,
    truth: &ValuationProfile,
    budgets: &BudgetVector,
) -> u8 {
    for i in 0..budgets.n() {
        if affordable(outcome, bundle, budgets.get(i))
            && eval(truth, i, &outcome.allocation[i]) < eval(truth, i, bundle)
        {
            return 1;
        }
    }
    0
}

/// Mean of [`loss_indicator`] over the samples; distinct violating samples
/// count once each even when several players object.
pub fn empirical_loss(
    outcome: &Outcome,
    samples: &SampleSet,
    truth: &ValuationProfile,
    budgets: &BudgetVector,
) -> Result<LossReport> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let own_values: Vec<f64> = (0..budgets.n())
        .map(|i| eval(truth, i, &outcome.allocation[i]))
        .collect();
    let mut violating = Vec::new();
    let mut bad_samples = 0usize;
    for (j, r) in samples.iter().enumerate() {
        let mut hit = false;
        for i in 0..budgets.n() {
            if affordable(outcome, &r.bundle, budgets.get(i))
                && own_values[i] < eval(truth, i, &r.bundle)
            {
                violating.push((i, j));
                hit = true;
            }
        }
        if hit {
            bad_samples += 1;
        }
    }
    Ok(LossReport {
        empirical: bad_samples as f64 / samples.len() as f64,
        violating,
    })
}

/// Monte Carlo estimate of the expected loss over fresh draws from `spec`.
pub fn estimate_expected_loss<R: Rng + ?Sized>(
    outcome: &Outcome,
    market: &MarketInstance,
    spec: &DistributionSpec,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let mut hits = 0usize;
    for _ in 0..trials {
        let bundle = sample_bundle(spec, market.k, rng);
        hits += loss_indicator(outcome, &bundle, &market.valuations, &market.budgets) as usize;
    }
    Ok(hits as f64 / trials as f64)
}

/// Total welfare `sum_i v_i(A_i)` under the given truth.
pub fn welfare(allocation: &[Bundle], truth: &ValuationProfile) -> f64 {
    allocation
        .iter()
        .enumerate()
        .map(|(i, b)| eval(truth, i, b))
        .sum()
}

/// Achieved welfare divided by the welfare of the supplied optimum.
pub fn efficiency_ratio(
    allocation: &[Bundle],
    truth: &ValuationProfile,
    optimal_allocation: &[Bundle],
) -> Result<f64> {
    let opt = welfare(optimal_allocation, truth);
    if opt <= 0.0 {
        return Err(Error::ZeroOptimalWelfare);
    }
    Ok(welfare(allocation, truth) / opt)
}

/// Every player prefers their own bundle to any other player's bundle they
/// could afford.
pub fn is_envy_free(outcome: &Outcome, truth: &ValuationProfile, budgets: &BudgetVector) -> bool {
    let n = budgets.n();
    let own: Vec<f64> = (0..n)
        .map(|i| eval(truth, i, &outcome.allocation[i]))
        .collect();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if affordable(outcome, &outcome.allocation[j], budgets.get(i))
                && own[i] < eval(truth, i, &outcome.allocation[j])
            {
                return false;
            }
        }
    }
    true
}

const WALRASIAN_MAX_K: u32 = 22;

/// Exhaustive Walrasian check: every player's bundle must be affordable and
/// value-maximal among all affordable bundles. Enumerates `2^k` bundles in
/// Gray-code order so the running price needs one update per step.
pub fn is_walrasian(outcome: &Outcome, market: &MarketInstance) -> Result<bool> {
    if market.k as u32 > WALRASIAN_MAX_K {
        return Err(Error::EnumerationTooLarge {
            k: market.k,
            max: WALRASIAN_MAX_K,
        });
    }
    // Bundles through a burnt good are never affordable; enumerate the rest.
    let open: Vec<usize> = (0..market.k)
        .filter(|&g| !outcome.prices[g].is_burn())
        .collect();
    let open_price: Vec<f64> = open
        .iter()
        .map(|&g| outcome.prices[g].finite().expect("open goods are finite"))
        .collect();

    for i in 0..market.n {
        let own_value = market.eval(i, &outcome.allocation[i]);
        let budget = market.budgets.get(i);
        if !affordable(outcome, &outcome.allocation[i], budget) {
            return Ok(false);
        }
        let mut price = 0.0f64;
        let mut current = Bundle::empty(market.k);
        let steps = 1u64 << open.len();
        for step in 1..steps {
            // Gray code: bit t flips between step-1 and step.
            let t = step.trailing_zeros() as usize;
            let g = open[t];
            if current.contains(g) {
                current.remove(g);
                price -= open_price[t];
            } else {
                current.insert(g);
                price += open_price[t];
            }
            if price <= budget && market.eval(i, &current) > own_value {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Samples sufficient for an eps-PAC equilibrium from a consistent learner:
/// `ceil((C/eps) * (k ln(1/eps) + ln(1/delta)))`. The constant hidden by the
/// asymptotic bound is exposed as `c`.
pub fn sample_complexity(k: usize, eps: f64, delta: f64, c: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(Error::InvalidParameter(format!("eps {eps} outside (0,1)")));
    }
    if !(0.0..1.0).contains(&delta) || delta == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} outside (0,1)"
        )));
    }
    if c <= 0.0 {
        return Err(Error::InvalidParameter(format!("multiplier {c} <= 0")));
    }
    let m = (c / eps) * (k as f64 * (1.0 / eps).ln() + (1.0 / delta).ln());
    Ok(m.ceil() as u64)
}
