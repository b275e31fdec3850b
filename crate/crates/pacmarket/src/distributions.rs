//! Bundle samplers and worst-case instance generators.
//!
//! All randomness flows through explicitly seeded ChaCha streams so that the
//! same master seed reproduces sample sets bit for bit.

use crate::core::{Bundle, BudgetVector, MarketInstance, SampleSet, ValuationProfile};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generative description of the bundle distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// Each good is included independently with its own probability.
    Product { probs: Vec<f64> },
    /// Uniform over bundles of exactly `size` goods.
    FixedSize { size: usize },
    /// Uniform over all of `2^G`, i.e. a product distribution with p = 1/2.
    UniformPowerSet,
    /// Finite support with explicit weights summing to 1.
    Explicit {
        bundles: Vec<Bundle>,
        weights: Vec<f64>,
    },
}

impl DistributionSpec {
    /// Product distribution with the same inclusion probability for every good.
    pub fn uniform_product(k: usize, p: f64) -> Self {
        DistributionSpec::Product { probs: vec![p; k] }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        match self {
            DistributionSpec::Product { probs } => {
                if probs.len() != k {
                    return Err(Error::InvalidDistribution(format!(
                        "{} inclusion probabilities for {k} goods",
                        probs.len()
                    )));
                }
                for (g, &p) in probs.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::InvalidDistribution(format!(
                            "good {g}: probability {p} outside [0,1]"
                        )));
                    }
                }
            }
            DistributionSpec::FixedSize { size } => {
                if *size < 1 || *size > k {
                    return Err(Error::InvalidDistribution(format!(
                        "bundle size {size} outside [1, {k}]"
                    )));
                }
            }
            DistributionSpec::UniformPowerSet => {}
            DistributionSpec::Explicit { bundles, weights } => {
                if bundles.is_empty() || bundles.len() != weights.len() {
                    return Err(Error::InvalidDistribution(
                        "explicit support and weights must be nonempty and equal length".into(),
                    ));
                }
                for b in bundles {
                    if b.k() != k {
                        return Err(Error::InvalidDistribution(format!(
                            "support bundle over {} goods, expected {k}",
                            b.k()
                        )));
                    }
                }
                if weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
                    return Err(Error::InvalidDistribution(
                        "weights must lie in [0,1]".into(),
                    ));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidDistribution(format!(
                        "weights sum to {total}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Draw one bundle over `k` goods from the distribution.
pub fn sample_bundle<R: Rng + ?Sized>(spec: &DistributionSpec, k: usize, rng: &mut R) -> Bundle {
    match spec {
        DistributionSpec::Product { probs } => {
            let mut b = Bundle::empty(k);
            for (g, &p) in probs.iter().enumerate() {
                // random_bool panics on p outside [0,1]; validate() guards that.
                if p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p) {
                    b.insert(g);
                }
            }
            b
        }
        DistributionSpec::FixedSize { size } => sample_fixed_size(k, *size, rng),
        DistributionSpec::UniformPowerSet => {
            let mut b = Bundle::empty(k);
            for g in 0..k {
                if rng.random::<bool>() {
                    b.insert(g);
                }
            }
            b
        }
        DistributionSpec::Explicit { bundles, weights } => {
            let roll: f64 = rng.random();
            let mut acc = 0.0;
            for (b, &w) in bundles.iter().zip(weights.iter()) {
                acc += w;
                if roll < acc {
                    return b.clone();
                }
            }
            bundles.last().expect("nonempty support").clone()
        }
    }
}

// Floyd's algorithm: uniform size-s subset in O(s) draws, no rejection.
fn sample_fixed_size<R: Rng + ?Sized>(k: usize, s: usize, rng: &mut R) -> Bundle {
    debug_assert!(s >= 1 && s <= k);
    let mut b = Bundle::empty(k);
    for j in (k - s)..k {
        let t = rng.random_range(0..=j);
        if b.contains(t) {
            b.insert(j);
        } else {
            b.insert(t);
        }
    }
    b
}

/// Draw `m` bundles and fill values from the market's true profile.
pub fn make_sample_set<R: Rng + ?Sized>(
    market: &MarketInstance,
    spec: &DistributionSpec,
    m: usize,
    rng: &mut R,
) -> SampleSet {
    let bundles = (0..m).map(|_| sample_bundle(spec, market.k, rng));
    SampleSet::from_market(market, bundles)
}

/// Derive an independent ChaCha stream from a master seed and a salt path.
///
/// Workers and repetitions get disjoint streams by extending the salt path;
/// the same `(master, salts)` pair always yields the same stream.
pub fn derive_rng(master: u64, salts: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(master ^ 0x9e37_79b9_7f4a_7c15);
    for &s in salts {
        state = splitmix64(state ^ splitmix64(s));
    }
    ChaCha8Rng::seed_from_u64(state)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// === Adversarial lower-bound instances ===

/// Worst-case constructions behind the tightness results: a single sample (the
/// full good set, or an n-subset of it) that is consistent with a whole family
/// of hidden valuation profiles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AdversarialKind {
    /// Hidden favorite goods; `delta` controls how close budgets are, in (0, n).
    UnitDemandWorstCase { delta: f64 },
    /// Hidden single-good desired sets.
    SingleMindedWorstCase,
    /// Hidden favorite goods under additive valuations; `delta` in (0, k).
    AdditiveWorstCase { delta: f64 },
}

/// Build a worst-case instance: the hidden true market plus the single-sample
/// training set the lower-bound argument allows.
pub fn adversarial_instance<R: Rng + ?Sized>(
    kind: AdversarialKind,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<(MarketInstance, SampleSet)> {
    if n < 2 || k < 2 {
        return Err(Error::InvalidParameter(
            "adversarial instances need n >= 2 and k >= 2".into(),
        ));
    }
    match kind {
        AdversarialKind::UnitDemandWorstCase { delta } => {
            if delta <= 0.0 || delta >= n as f64 {
                return Err(Error::InvalidParameter(format!(
                    "delta {delta} outside (0, {n})"
                )));
            }
            let budgets = near_equal_budgets(n, delta)?;
            let favorites = distinct_favorites(n, k, rng);
            // Non-favorite entries get tiny distinct values so the unit-demand
            // rows stay tie-free while the favorite still attains b_i.
            let values: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let b = budgets[i];
                    (0..k)
                        .map(|g| {
                            if g == favorites[i] {
                                b
                            } else {
                                b * 1e-9 * (g + 1) as f64 / (k + 1) as f64
                            }
                        })
                        .collect()
                })
                .collect();
            let market = MarketInstance::new(
                n,
                k,
                BudgetVector::new(budgets)?,
                ValuationProfile::UnitDemand { values },
            )?;
            let samples = SampleSet::from_market(&market, [Bundle::full(k)]);
            Ok((market, samples))
        }
        AdversarialKind::SingleMindedWorstCase => {
            let budgets: Vec<f64> = (0..n).map(|i| 2.0 - i as f64 / n as f64).collect();
            let favorites = distinct_favorites(n, k, rng);
            let desired = favorites
                .iter()
                .map(|&g| Bundle::from_indices(k, [g]))
                .collect();
            let market = MarketInstance::new(
                n,
                k,
                BudgetVector::new(budgets)?,
                ValuationProfile::SingleMinded { desired },
            )?;
            let samples = SampleSet::from_market(&market, [Bundle::full(k)]);
            Ok((market, samples))
        }
        AdversarialKind::AdditiveWorstCase { delta } => {
            if delta <= 0.0 || delta >= k as f64 {
                return Err(Error::InvalidParameter(format!(
                    "delta {delta} outside (0, {k})"
                )));
            }
            let b1 = 1.0;
            // delta_i increasing with delta_n = delta * b1 / k.
            let budgets: Vec<f64> = (0..n)
                .map(|i| b1 - (i as f64 / (n - 1) as f64) * delta * b1 / k as f64)
                .collect();
            let sampled = if n < k {
                random_subset_of_size(k, n, rng)
            } else {
                Bundle::full(k)
            };
            let sampled_goods: Vec<usize> = sampled.iter().collect();
            let favorites = distinct_assignment(&sampled_goods, n, rng);
            let mut values = vec![vec![0.0; k]; n];
            for i in 0..n {
                values[i][favorites[i]] = budgets[i];
            }
            // Goods outside the sample are each valued by exactly one player.
            for g in sampled.complement().iter() {
                let owner = rng.random_range(0..n);
                values[owner][g] = budgets[owner];
            }
            let market = MarketInstance::new(
                n,
                k,
                BudgetVector::new(budgets)?,
                ValuationProfile::Additive { values },
            )?;
            let samples = SampleSet::from_market(&market, [sampled]);
            Ok((market, samples))
        }
    }
}

// b_i = b_1 - delta_i with delta_1 = 0, strictly increasing shares summing to
// delta * b_1. Near-equal shares keep late budgets positive as long as the
// requested delta is feasible at all.
fn near_equal_budgets(n: usize, delta: f64) -> Result<Vec<f64>> {
    let b1 = 1.0;
    let t = (n * n) as f64;
    let total_weight: f64 = (2..=n).map(|i| (i - 1) as f64 + t).sum();
    let budgets: Vec<f64> = (1..=n)
        .map(|i| {
            if i == 1 {
                b1
            } else {
                b1 - delta * b1 * ((i - 1) as f64 + t) / total_weight
            }
        })
        .collect();
    if budgets.last().copied().unwrap_or(0.0) <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "delta {delta} leaves no positive budget for player {n}"
        )));
    }
    Ok(budgets)
}

// Favorite goods, distinct among the top min{n,k} players by budget.
fn distinct_favorites<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let top = n.min(k);
    let mut pool: Vec<usize> = (0..k).collect();
    for i in 0..top {
        let j = rng.random_range(i..k);
        pool.swap(i, j);
    }
    (0..n)
        .map(|i| {
            if i < top {
                pool[i]
            } else {
                pool[rng.random_range(0..k)]
            }
        })
        .collect()
}

fn random_subset_of_size<R: Rng + ?Sized>(k: usize, s: usize, rng: &mut R) -> Bundle {
    sample_fixed_size(k, s, rng)
}

// Injective assignment of `goods` to players when possible, spillover random.
fn distinct_assignment<R: Rng + ?Sized>(goods: &[usize], n: usize, rng: &mut R) -> Vec<usize> {
    let mut pool = goods.to_vec();
    for i in (1..pool.len()).rev() {
        let j = rng.random_range(0..=i);
        pool.swap(i, j);
    }
    (0..n)
        .map(|i| {
            if i < pool.len() {
                pool[i]
            } else {
                goods[rng.random_range(0..goods.len())]
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::eval;

    #[test]
    fn product_extremes_are_forced() {
        let mut rng = derive_rng(7, &[0]);
        let all = sample_bundle(&DistributionSpec::uniform_product(5, 1.0), 5, &mut rng);
        assert_eq!(all, Bundle::full(5));
        let none = sample_bundle(&DistributionSpec::uniform_product(5, 0.0), 5, &mut rng);
        assert!(none.is_empty());
        let full = sample_bundle(&DistributionSpec::FixedSize { size: 5 }, 5, &mut rng);
        assert_eq!(full, Bundle::full(5));
    }

    #[test]
    fn fixed_size_always_exact() {
        let mut rng = derive_rng(11, &[]);
        for s in 1..=9 {
            for _ in 0..200 {
                let b = sample_bundle(&DistributionSpec::FixedSize { size: s }, 9, &mut rng);
                assert_eq!(b.len(), s);
            }
        }
    }

    #[test]
    fn product_marginals_within_three_sigma() {
        let k = 8;
        let probs = vec![0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9, 0.33];
        let spec = DistributionSpec::Product {
            probs: probs.clone(),
        };
        let trials = 10_000;
        let mut counts = vec![0usize; k];
        let mut rng = derive_rng(42, &[1]);
        for _ in 0..trials {
            let b = sample_bundle(&spec, k, &mut rng);
            for g in b.iter() {
                counts[g] += 1;
            }
        }
        for g in 0..k {
            let p = probs[g];
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            let freq = counts[g] as f64 / trials as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma,
                "good {g}: freq {freq} vs p {p}"
            );
        }
    }

    #[test]
    fn fixed_size_is_uniform_over_pairs() {
        // all C(5,2)=10 pairs should appear with ~equal frequency
        let spec = DistributionSpec::FixedSize { size: 2 };
        let mut rng = derive_rng(3, &[9]);
        let mut counts = std::collections::HashMap::new();
        let trials = 20_000;
        for _ in 0..trials {
            let b = sample_bundle(&spec, 5, &mut rng);
            *counts.entry(b.to_indices()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 10);
        for (pair, c) in counts {
            let freq = c as f64 / trials as f64;
            assert!((freq - 0.1).abs() < 0.02, "pair {pair:?}: freq {freq}");
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let spec = DistributionSpec::uniform_product(6, 0.5);
        let draw = |seed| {
            let mut rng = derive_rng(seed, &[4, 2]);
            (0..50)
                .map(|_| sample_bundle(&spec, 6, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(99), draw(99));
        assert_ne!(draw(99), draw(100));
    }

    #[test]
    fn law_of_large_numbers_mean_size() {
        let market = toy_market(10);
        let spec = DistributionSpec::uniform_product(10, 0.5);
        let mut rng = derive_rng(5, &[]);
        let samples = make_sample_set(&market, &spec, 10_000, &mut rng);
        let mean: f64 =
            samples.iter().map(|r| r.bundle.len() as f64).sum::<f64>() / samples.len() as f64;
        assert!((mean - 5.0).abs() < 0.2, "mean bundle size {mean}");
    }

    #[test]
    fn empty_sample_set() {
        let market = toy_market(4);
        let spec = DistributionSpec::UniformPowerSet;
        let mut rng = derive_rng(0, &[]);
        let samples = make_sample_set(&market, &spec, 0, &mut rng);
        assert!(samples.is_empty());
    }

    #[test]
    fn explicit_support_draws_only_members() {
        // Example 1's distribution: {g1,g2} and {g3}, each with weight 1/2.
        let k = 3;
        let b01 = Bundle::from_indices(k, [0, 1]);
        let b2 = Bundle::from_indices(k, [2]);
        let spec = DistributionSpec::Explicit {
            bundles: vec![b01.clone(), b2.clone()],
            weights: vec![0.5, 0.5],
        };
        spec.validate(k).unwrap();
        let market = MarketInstance::new(
            2,
            k,
            BudgetVector::new(vec![2.0, 1.0]).unwrap(),
            ValuationProfile::UnitDemand {
                values: vec![vec![1.0, 5.0, 3.0], vec![4.0, 3.5, 2.0]],
            },
        )
        .unwrap();
        let mut rng = derive_rng(17, &[]);
        let samples = make_sample_set(&market, &spec, 100, &mut rng);
        let mut saw = [false; 2];
        for r in samples.iter() {
            if r.bundle == b01 {
                saw[0] = true;
                assert_eq!(r.values, vec![5.0, 4.0]);
            } else if r.bundle == b2 {
                saw[1] = true;
                assert_eq!(r.values, vec![3.0, 2.0]);
            } else {
                panic!("drew a bundle outside the support: {:?}", r.bundle);
            }
        }
        assert!(saw[0] && saw[1]);
    }

    #[test]
    fn adversarial_unit_demand_sample_is_full_set_of_budgets() {
        let mut rng = derive_rng(1, &[]);
        let (market, samples) = adversarial_instance(
            AdversarialKind::UnitDemandWorstCase { delta: 0.5 },
            3,
            3,
            &mut rng,
        )
        .unwrap();
        assert_eq!(samples.len(), 1);
        let r = &samples.records()[0];
        assert_eq!(r.bundle, Bundle::full(3));
        for i in 0..3 {
            assert!((r.values[i] - market.budgets.get(i)).abs() < 1e-12);
        }
        assert!(market.is_budget_normalized(1e-9));
        samples.verify_against(&market).unwrap();
    }

    #[test]
    fn adversarial_single_minded_sample_is_all_ones() {
        let mut rng = derive_rng(2, &[]);
        let (market, samples) =
            adversarial_instance(AdversarialKind::SingleMindedWorstCase, 2, 2, &mut rng).unwrap();
        let r = &samples.records()[0];
        assert_eq!(r.bundle, Bundle::full(2));
        assert_eq!(r.values, vec![1.0, 1.0]);
        samples.verify_against(&market).unwrap();
    }

    #[test]
    fn adversarial_additive_small_n_samples_a_subset() {
        let mut rng = derive_rng(3, &[]);
        let (market, samples) = adversarial_instance(
            AdversarialKind::AdditiveWorstCase { delta: 1.0 },
            3,
            5,
            &mut rng,
        )
        .unwrap();
        let r = &samples.records()[0];
        assert_eq!(r.bundle.len(), 3);
        for i in 0..3 {
            assert_eq!(r.values[i], eval(&market.valuations, i, &r.bundle));
            assert!((r.values[i] - market.budgets.get(i)).abs() < 1e-12);
        }
        assert!(market.is_budget_normalized(1e-9));
    }

    #[test]
    fn adversarial_rejects_bad_delta() {
        let mut rng = derive_rng(4, &[]);
        assert!(adversarial_instance(
            AdversarialKind::UnitDemandWorstCase { delta: 5.0 },
            3,
            3,
            &mut rng
        )
        .is_err());
        assert!(adversarial_instance(
            AdversarialKind::AdditiveWorstCase { delta: -0.1 },
            3,
            3,
            &mut rng
        )
        .is_err());
    }

    fn toy_market(k: usize) -> MarketInstance {
        MarketInstance::new(
            1,
            k,
            BudgetVector::new(vec![1.0]).unwrap(),
            ValuationProfile::Additive {
                values: vec![vec![1.0; k]],
            },
        )
        .unwrap()
    }
}
