//! Discounted-cashflow valuation of music royalty catalogs.
//!
//! The pipeline:
//!
//! 1. [`ingest`] parses monthly/quarterly cashflows, annualizes them from the
//!    first covered month, and drops assets with zero-revenue years or a
//!    dollar age inconsistent with their history.
//! 2. [`curves`] gathers, for a base age `t` and horizon `i`, the revenue
//!    shares `C_{t+i} / C_t` of every asset old enough, and takes their
//!    10th/50th/90th percentiles.
//! 3. [`model`] discounts those shares into LTM multipliers and prices.
//! 4. [`market`] turns bid/ask quotes into implied multipliers and sets them
//!    against the model bands.
//!
//! [`synth`] generates seeded catalogs with known growth rates so every step
//! can be checked against closed forms, and [`cli`] wires it all into the
//! `catalog-dcf` binary.

pub mod cli;
pub mod config;
pub mod curves;
pub mod error;
pub mod ingest;
pub mod market;
pub mod model;
pub mod synth;

pub use error::{Error, Result};
pub use model::{discount_factor, multiplier_from_shares, multiplier_table, price};
