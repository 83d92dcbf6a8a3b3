//! Non-additive multi-color discrepancy.
//!
//! The pipeline takes `n` set functions with bounded marginals over `m` items
//! and produces a `k`-coloring whose color classes every agent values almost
//! equally:
//!
//! 1. [`splitter`] lays the items on a necklace `[0, 1]` and searches for at
//!    most `n(k-1)` cuts whose pieces are equal under every agent's
//!    multilinear extension ([`multilinear`]). Each color receives a bounded
//!    number of intervals, so only a few items end up fractional.
//! 2. [`rounding`] rounds the fractional coloring independently per item and
//!    reports the realized discrepancy next to the concentration bound.
//! 3. [`measures`] and [`subsidy`] turn low-discrepancy colorings into
//!    transfer-discrepancy guarantees and envy-free allocations with small
//!    subsidies.
//!
//! [`experiments`] wires everything into seeded, reproducible runs with CSV
//! output; the `nadisc` binary is a thin CLI over it.

pub mod error;
pub mod experiments;
pub mod measures;
pub mod multilinear;
pub mod rounding;
pub mod splitter;
pub mod subset;
pub mod subsidy;
pub mod valuations;

mod rng;

pub use error::{Error, Result};
pub use subset::Subset;
pub use valuations::Valuation;
