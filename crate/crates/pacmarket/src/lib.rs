//! Fisher markets with indivisible goods, learned from sampled bundles.
//!
//! Players with distinct budgets buy bundles of goods at posted prices. We never
//! see the players' valuation functions directly; instead we get i.i.d. sampled
//! bundles together with each player's value for them, and we want an outcome
//! (an allocation plus a price vector) that is probably approximately a market
//! equilibrium and is not too wasteful.
//!
//! The crate is organized around that pipeline:
//!
//! - [`core`]: bundles, budgets, valuation profiles, market instances, outcomes.
//! - [`distributions`]: bundle samplers and worst-case instance generators.
//! - [`unit_demand`], [`single_minded`], [`additive`], [`submodular`]: the
//!   learning algorithms, one module per valuation family.
//! - [`metrics`]: empirical/expected loss, welfare, efficiency ratios, envy and
//!   Walrasian checks, sample-complexity bounds.
//! - [`baselines`]: exact and brute-force reference solutions the efficiency
//!   ratios are measured against.
//! - [`harness`]: ratings ingestion, market construction, experiment sweeps.
//! - [`formats`]: the on-disk sample/outcome/market formats used by the CLI.

pub mod additive;
pub mod baselines;
pub mod core;
pub mod distributions;
pub mod formats;
pub mod harness;
pub mod metrics;
pub mod single_minded;
pub mod submodular;
pub mod unit_demand;

mod error;

pub use error::{Error, Result};
