//! Core market types shared by every other module.
//!
//! A market has `n` players with strictly decreasing budgets and `k` indivisible
//! goods. Bundles are bitsets over good indices; valuation profiles evaluate
//! bundles per family rule; an outcome pairs a disjoint allocation with a price
//! vector in which a distinguished [`Price::Burn`] sentinel stands for +infinity.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};
use std::fmt;

const WORD_BITS: usize = 64;

#[inline]
fn word_count(k: usize) -> usize {
    k.div_ceil(WORD_BITS)
}

// === Bundle ===

/// A set of good indices in `[0, k)`, stored as a fixed-width bitset.
///
/// One inline word covers markets with up to 64 goods; larger markets spill to
/// the heap. Set operations run word-parallel.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Bundle {
    words: SmallVec<[u64; 1]>,
    k: usize,
}

impl Bundle {
    /// The empty bundle over `k` goods.
    pub fn empty(k: usize) -> Self {
        Bundle {
            words: smallvec![0; word_count(k).max(1)],
            k,
        }
    }

    /// The full bundle `G` over `k` goods.
    pub fn full(k: usize) -> Self {
        let mut b = Bundle::empty(k);
        for w in 0..b.words.len() {
            b.words[w] = !0;
        }
        b.mask_tail();
        b
    }

    /// Build from good indices; panics if any index is out of range.
    pub fn from_indices<I: IntoIterator<Item = usize>>(k: usize, indices: I) -> Self {
        let mut b = Bundle::empty(k);
        for g in indices {
            b.insert(g);
        }
        b
    }

    /// Build from good indices, rejecting out-of-range ones.
    pub fn try_from_indices<I: IntoIterator<Item = usize>>(k: usize, indices: I) -> Result<Self> {
        let mut b = Bundle::empty(k);
        for g in indices {
            if g >= k {
                return Err(Error::DimensionMismatch(format!(
                    "good index {g} out of range for k={k}"
                )));
            }
            b.insert(g);
        }
        Ok(b)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn insert(&mut self, g: usize) {
        assert!(g < self.k, "good index {g} out of range for k={}", self.k);
        self.words[g / WORD_BITS] |= 1u64 << (g % WORD_BITS);
    }

    pub fn remove(&mut self, g: usize) {
        assert!(g < self.k, "good index {g} out of range for k={}", self.k);
        self.words[g / WORD_BITS] &= !(1u64 << (g % WORD_BITS));
    }

    pub fn contains(&self, g: usize) -> bool {
        g < self.k && self.words[g / WORD_BITS] & (1u64 << (g % WORD_BITS)) != 0
    }

    /// Number of goods in the bundle.
    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_subset(&self, other: &Bundle) -> bool {
        self.zip_words(other).all(|(a, b)| a & !b == 0)
    }

    pub fn is_strict_subset(&self, other: &Bundle) -> bool {
        self.is_subset(other) && self != other
    }

    pub fn is_disjoint(&self, other: &Bundle) -> bool {
        self.zip_words(other).all(|(a, b)| a & b == 0)
    }

    pub fn intersection(&self, other: &Bundle) -> Bundle {
        self.merge(other, |a, b| a & b)
    }

    pub fn union(&self, other: &Bundle) -> Bundle {
        self.merge(other, |a, b| a | b)
    }

    pub fn difference(&self, other: &Bundle) -> Bundle {
        self.merge(other, |a, b| a & !b)
    }

    /// `G \ self`.
    pub fn complement(&self) -> Bundle {
        let mut out = self.clone();
        for w in out.words.iter_mut() {
            *w = !*w;
        }
        out.mask_tail();
        out
    }

    pub fn union_with(&mut self, other: &Bundle) {
        self.check_same_k(other);
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &Bundle) {
        self.check_same_k(other);
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a &= b;
        }
    }

    pub fn subtract(&mut self, other: &Bundle) {
        self.check_same_k(other);
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a &= !b;
        }
    }

    /// Iterate member indices in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let base = wi * WORD_BITS;
            BitIter { word: w }.map(move |b| base + b)
        })
    }

    /// Lowest member index, if any.
    pub fn min_index(&self) -> Option<usize> {
        self.iter().next()
    }

    pub fn to_indices(&self) -> Vec<usize> {
        self.iter().collect()
    }

    fn zip_words<'a>(&'a self, other: &'a Bundle) -> impl Iterator<Item = (u64, u64)> + 'a {
        self.check_same_k(other);
        self.words.iter().copied().zip(other.words.iter().copied())
    }

    fn merge(&self, other: &Bundle, op: impl Fn(u64, u64) -> u64) -> Bundle {
        self.check_same_k(other);
        let words = self
            .words
            .iter()
            .zip(other.words.iter())
            .map(|(&a, &b)| op(a, b))
            .collect();
        Bundle { words, k: self.k }
    }

    fn check_same_k(&self, other: &Bundle) {
        assert_eq!(
            self.k, other.k,
            "bundle universe mismatch: {} vs {}",
            self.k, other.k
        );
    }

    fn mask_tail(&mut self) {
        let used = self.k % WORD_BITS;
        if used != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << used) - 1;
        } else if self.k == 0 {
            for w in self.words.iter_mut() {
                *w = 0;
            }
        }
    }
}

struct BitIter {
    word: u64,
}

impl Iterator for BitIter {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.word == 0 {
            return None;
        }
        let b = self.word.trailing_zeros() as usize;
        self.word &= self.word - 1;
        Some(b)
    }
}

impl Ord for Bundle {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.k
            .cmp(&other.k)
            .then_with(|| self.words.as_slice().cmp(other.words.as_slice()))
    }
}

impl PartialOrd for Bundle {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, g) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{g}")?;
        }
        write!(f, "}}")
    }
}

// === Budgets ===

/// Strictly decreasing positive budgets, one per player.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct BudgetVector(Vec<f64>);

impl BudgetVector {
    pub fn new(budgets: Vec<f64>) -> Result<Self> {
        if budgets.is_empty() {
            return Err(Error::InvalidBudgets("no players".into()));
        }
        for (i, &b) in budgets.iter().enumerate() {
            if !b.is_finite() || b <= 0.0 {
                return Err(Error::InvalidBudgets(format!("budget {i} is {b}")));
            }
        }
        for w in budgets.windows(2) {
            if w[0] <= w[1] {
                return Err(Error::InvalidBudgets(format!(
                    "budgets must be strictly decreasing, found {} followed by {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(BudgetVector(budgets))
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, player: usize) -> f64 {
        self.0[player]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

impl<'de> Deserialize<'de> for BudgetVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        BudgetVector::new(raw).map_err(serde::de::Error::custom)
    }
}

// === Valuations ===

/// A valuation profile: one valuation function per player, all from one family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ValuationProfile {
    /// `v_i(S) = max_{g in S} v_i({g})`; rows must have pairwise distinct entries.
    UnitDemand { values: Vec<Vec<f64>> },
    /// `v_i(S) = 1` iff `S` contains the player's desired set.
    SingleMinded { desired: Vec<Bundle> },
    /// `v_i(S) = sum_{g in S} v_i({g})`.
    Additive { values: Vec<Vec<f64>> },
    /// Goods sit in slots; a bundle scores the sum of its `threshold` best
    /// per-slot maxima. Monotone submodular by construction.
    ThresholdSubmodular {
        values: Vec<Vec<f64>>,
        slot_of: Vec<usize>,
        threshold: usize,
    },
}

impl ValuationProfile {
    /// Player count the profile is dimensioned for.
    pub fn n(&self) -> usize {
        match self {
            ValuationProfile::UnitDemand { values }
            | ValuationProfile::Additive { values }
            | ValuationProfile::ThresholdSubmodular { values, .. } => values.len(),
            ValuationProfile::SingleMinded { desired } => desired.len(),
        }
    }

    /// Check the profile against market dimensions and family invariants.
    pub fn validate(&self, n: usize, k: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "profile has {} players, market has {n}",
                self.n()
            )));
        }
        let check_matrix = |values: &[Vec<f64>]| -> Result<()> {
            for (i, row) in values.iter().enumerate() {
                if row.len() != k {
                    return Err(Error::DimensionMismatch(format!(
                        "player {i} has {} values, market has {k} goods",
                        row.len()
                    )));
                }
                for (g, &v) in row.iter().enumerate() {
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::InvalidValuations(format!(
                            "player {i}, good {g}: value {v} is not a nonnegative real"
                        )));
                    }
                }
            }
            Ok(())
        };
        match self {
            ValuationProfile::UnitDemand { values } => {
                check_matrix(values)?;
                for (i, row) in values.iter().enumerate() {
                    let mut sorted = row.clone();
                    sorted.sort_by(|a, b| a.total_cmp(b));
                    if sorted.windows(2).any(|w| w[0] == w[1]) {
                        return Err(Error::TiedValues(format!(
                            "player {i} has tied unit-demand values; perturb before building"
                        )));
                    }
                }
            }
            ValuationProfile::SingleMinded { desired } => {
                for (i, d) in desired.iter().enumerate() {
                    if d.k() != k {
                        return Err(Error::DimensionMismatch(format!(
                            "player {i}'s desired set is over {} goods, market has {k}",
                            d.k()
                        )));
                    }
                    if d.is_empty() {
                        return Err(Error::InvalidValuations(format!(
                            "player {i}'s desired set is empty"
                        )));
                    }
                }
            }
            ValuationProfile::Additive { values } => check_matrix(values)?,
            ValuationProfile::ThresholdSubmodular {
                values,
                slot_of,
                threshold,
            } => {
                check_matrix(values)?;
                if slot_of.len() != k {
                    return Err(Error::DimensionMismatch(format!(
                        "slot assignment covers {} goods, market has {k}",
                        slot_of.len()
                    )));
                }
                if *threshold == 0 {
                    return Err(Error::InvalidValuations("threshold must be >= 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Evaluate `v_player(bundle)` under the profile's family rule; `eval(empty) = 0`.
pub fn eval(profile: &ValuationProfile, player: usize, bundle: &Bundle) -> f64 {
    assert!(
        player < profile.n(),
        "player {player} out of range for n={}",
        profile.n()
    );
    match profile {
        ValuationProfile::UnitDemand { values } => {
            let row = &values[player];
            bundle.iter().map(|g| row[g]).fold(0.0, f64::max)
        }
        ValuationProfile::SingleMinded { desired } => {
            if desired[player].is_subset(bundle) {
                1.0
            } else {
                0.0
            }
        }
        ValuationProfile::Additive { values } => {
            let row = &values[player];
            bundle.iter().map(|g| row[g]).sum()
        }
        ValuationProfile::ThresholdSubmodular {
            values,
            slot_of,
            threshold,
        } => {
            let row = &values[player];
            let slots = slot_of.iter().max().map_or(0, |&s| s + 1);
            let mut slot_max = vec![0.0f64; slots];
            for g in bundle.iter() {
                let s = slot_of[g];
                if row[g] > slot_max[s] {
                    slot_max[s] = row[g];
                }
            }
            slot_max.sort_by(|a, b| b.total_cmp(a));
            slot_max.iter().take(*threshold).sum()
        }
    }
}

// === Market instance ===

/// A Fisher market: players, goods, budgets, and the true valuation profile.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarketInstance {
    pub n: usize,
    pub k: usize,
    pub budgets: BudgetVector,
    pub valuations: ValuationProfile,
}

impl MarketInstance {
    pub fn new(
        n: usize,
        k: usize,
        budgets: BudgetVector,
        valuations: ValuationProfile,
    ) -> Result<Self> {
        if budgets.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} budgets for {n} players",
                budgets.n()
            )));
        }
        valuations.validate(n, k)?;
        Ok(MarketInstance {
            n,
            k,
            budgets,
            valuations,
        })
    }

    pub fn eval(&self, player: usize, bundle: &Bundle) -> f64 {
        eval(&self.valuations, player, bundle)
    }

    /// True when `max_g v_i({g}) = b_i` for every player, up to `tol` relative.
    pub fn is_budget_normalized(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            let best = (0..self.k)
                .map(|g| self.eval(i, &Bundle::from_indices(self.k, [g])))
                .fold(0.0, f64::max);
            let b = self.budgets.get(i);
            (best - b).abs() <= tol * b.abs().max(1.0)
        })
    }
}

// === Samples ===

/// One observed bundle together with every player's value for it.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub bundle: Bundle,
    pub values: Vec<f64>,
}

/// I.i.d. sampled bundles with per-player observed values. Duplicates are kept.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    k: usize,
    n: usize,
    records: Vec<SampleRecord>,
}

impl SampleSet {
    pub fn new(k: usize, n: usize, records: Vec<SampleRecord>) -> Result<Self> {
        for (j, r) in records.iter().enumerate() {
            if r.bundle.k() != k {
                return Err(Error::DimensionMismatch(format!(
                    "sample {j} is over {} goods, expected {k}",
                    r.bundle.k()
                )));
            }
            if r.values.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "sample {j} has {} values for {n} players",
                    r.values.len()
                )));
            }
        }
        Ok(SampleSet { k, n, records })
    }

    /// Build from bundles, filling values from the market's true profile.
    pub fn from_market<I: IntoIterator<Item = Bundle>>(
        market: &MarketInstance,
        bundles: I,
    ) -> Self {
        let records = bundles
            .into_iter()
            .map(|bundle| {
                let values = (0..market.n).map(|i| market.eval(i, &bundle)).collect();
                SampleRecord { bundle, values }
            })
            .collect();
        SampleSet {
            k: market.k,
            n: market.n,
            records,
        }
    }

    /// Check every record's values against the generating market.
    pub fn verify_against(&self, market: &MarketInstance) -> Result<()> {
        if self.n != market.n {
            return Err(Error::DimensionMismatch(format!(
                "sample set has {} players, market has {}",
                self.n, market.n
            )));
        }
        for (j, r) in self.records.iter().enumerate() {
            for (i, &v) in r.values.iter().enumerate() {
                let truth = market.eval(i, &r.bundle);
                if (v - truth).abs() > 1e-9 * truth.abs().max(1.0) {
                    return Err(Error::InvalidValuations(format!(
                        "sample {j}, player {i}: recorded {v}, oracle says {truth}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Player count each record carries values for.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn iter(&self) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter()
    }

    /// The first `m` records, as drawn. Used by the growing-prefix sweeps.
    pub fn prefix(&self, m: usize) -> SampleSet {
        SampleSet {
            k: self.k,
            n: self.n,
            records: self.records[..m.min(self.records.len())].to_vec(),
        }
    }

    /// Union of all observed goods.
    pub fn observed_goods(&self) -> Bundle {
        let mut seen = Bundle::empty(self.k);
        for r in &self.records {
            seen.union_with(&r.bundle);
        }
        seen
    }
}

// === Outcome ===

/// A posted price: finite, or burnt (treated as +infinity in every sum).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Price {
    Finite(f64),
    Burn,
}

impl Price {
    pub fn is_burn(&self) -> bool {
        matches!(self, Price::Burn)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Price::Finite(p) => Some(*p),
            Price::Burn => None,
        }
    }
}

/// An allocation (pairwise disjoint bundles, one per player) plus prices.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub allocation: Vec<Bundle>,
    pub prices: Vec<Price>,
}

impl Outcome {
    /// All-empty allocation with zero prices.
    pub fn empty(n: usize, k: usize) -> Self {
        Outcome {
            allocation: vec![Bundle::empty(k); n],
            prices: vec![Price::Finite(0.0); k],
        }
    }

    pub fn n(&self) -> usize {
        self.allocation.len()
    }

    pub fn k(&self) -> usize {
        self.prices.len()
    }

    /// Price of a bundle; any burnt member makes it `Price::Burn`.
    pub fn bundle_price(&self, bundle: &Bundle) -> Price {
        let mut total = 0.0;
        for g in bundle.iter() {
            match self.prices[g] {
                Price::Finite(p) => total += p,
                Price::Burn => return Price::Burn,
            }
        }
        Price::Finite(total)
    }

    pub fn burnt_goods(&self) -> Vec<usize> {
        self.prices
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_burn())
            .map(|(g, _)| g)
            .collect()
    }

    pub fn burn_count(&self) -> usize {
        self.prices.iter().filter(|p| p.is_burn()).count()
    }
}

/// True iff the bundle's price sum is at most `budget`; burnt members never are.
pub fn affordable(outcome: &Outcome, bundle: &Bundle, budget: f64) -> bool {
    match outcome.bundle_price(bundle) {
        Price::Finite(p) => p <= budget,
        Price::Burn => false,
    }
}

/// A structural problem found by [`validate_outcome`].
#[derive(Clone, Debug, PartialEq)]
pub enum OutcomeViolation {
    GoodAllocatedTwice { good: usize },
    GoodOutOfRange { good: usize, k: usize },
    AllocatedGoodBurnt { good: usize },
}

impl fmt::Display for OutcomeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeViolation::GoodAllocatedTwice { good } => {
                write!(f, "good {good} allocated twice")
            }
            OutcomeViolation::GoodOutOfRange { good, k } => {
                write!(f, "good {good} out of range for k={k}")
            }
            OutcomeViolation::AllocatedGoodBurnt { good } => {
                write!(f, "allocated good {good} has a burnt price")
            }
        }
    }
}

/// Diagnostic check of an outcome's structural invariants. Empty means ok.
pub fn validate_outcome(outcome: &Outcome, k: usize) -> Vec<OutcomeViolation> {
    let mut violations = Vec::new();
    let mut seen = vec![false; k];
    for bundle in &outcome.allocation {
        for g in bundle.iter() {
            if g >= k {
                violations.push(OutcomeViolation::GoodOutOfRange { good: g, k });
                continue;
            }
            if seen[g] {
                violations.push(OutcomeViolation::GoodAllocatedTwice { good: g });
            }
            seen[g] = true;
            if g < outcome.prices.len() && outcome.prices[g].is_burn() {
                violations.push(OutcomeViolation::AllocatedGoodBurnt { good: g });
            }
        }
    }
    violations
}

// Bundles serialize as sorted index arrays.
impl Serialize for Bundle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Bundle", 2)?;
        st.serialize_field("k", &self.k)?;
        st.serialize_field("members", &self.to_indices())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Bundle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            k: usize,
            members: Vec<usize>,
        }
        let raw = Raw::deserialize(d)?;
        Bundle::try_from_indices(raw.k, raw.members).map_err(serde::de::Error::custom)
    }
}
