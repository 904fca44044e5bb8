//! Domain types and discounted-cashflow arithmetic.
//!
//! A catalog with last-twelve-months revenue `C_t` and expected revenue
//! shares `S_{t,i} = C_{t+i} / C_t` is worth
//!
//! ```text
//! M_{t,d} = sum_{i=1..d} S_{t,i} / (1 + r)^i      (multiplier)
//! P_{t,d} = M_{t,d} * C_t                          (price)
//! ```
//!
//! Sums run in ascending `i` through a compensated accumulator so results
//! are reproducible to the bit.

use std::fmt;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default annual discount rate.
pub const DEFAULT_RATE: f64 = 0.10;
/// Default longest contract duration, in years.
pub const DEFAULT_MAX_DURATION: u32 = 10;
/// Default percentile levels: bottom decile, median, top decile.
pub const DEFAULT_LEVELS: [f64; 3] = [10.0, 50.0, 90.0];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssetId(String);

impl AssetId {
    pub fn new(id: impl Into<String>) -> Self {
        AssetId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AssetId {
    fn from(s: &str) -> Self {
        AssetId(s.to_owned())
    }
}

/// Annual revenue of one asset; element `k - 1` is revenue during its `k`-th
/// year of life. Every amount is strictly positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnualSeries {
    amounts: Vec<Decimal>,
}

impl AnnualSeries {
    pub fn new(amounts: Vec<Decimal>) -> Result<Self> {
        if amounts.is_empty() {
            return Err(Error::domain("annual series must have at least one year"));
        }
        if let Some((k, a)) = amounts
            .iter()
            .enumerate()
            .find(|(_, a)| **a <= Decimal::ZERO)
        {
            return Err(Error::domain(format!(
                "annual amount {a} in year {} is not strictly positive",
                k + 1
            )));
        }
        Ok(AnnualSeries { amounts })
    }

    pub fn amounts(&self) -> &[Decimal] {
        &self.amounts
    }

    pub fn len(&self) -> usize {
        self.amounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amounts.is_empty()
    }

    /// Revenue in song-age year `year` (1-based).
    pub fn at_age(&self, year: u32) -> Option<Decimal> {
        let idx = usize::try_from(year).ok()?.checked_sub(1)?;
        self.amounts.get(idx).copied()
    }

    /// Same as [`AnnualSeries::at_age`], as a float.
    pub fn at_age_f64(&self, year: u32) -> Option<f64> {
        self.at_age(year).and_then(|a| a.to_f64())
    }

    /// Most recent full year of revenue.
    pub fn ltm(&self) -> Decimal {
        *self.amounts.last().expect("series is non-empty")
    }
}

/// An accepted catalog item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Asset {
    pub id: AssetId,
    pub dollar_age: f64,
    pub series: AnnualSeries,
}

impl Asset {
    pub fn new(id: impl Into<AssetId>, dollar_age: f64, series: AnnualSeries) -> Result<Self> {
        if !(dollar_age.is_finite() && dollar_age > 0.0) {
            return Err(Error::domain(format!(
                "dollar age must be positive, got {dollar_age}"
            )));
        }
        Ok(Asset {
            id: id.into(),
            dollar_age,
            series,
        })
    }

    /// Re-checks the dollar-age rule against the span of the annual series.
    pub fn dollar_age_consistent(&self, tolerance: f64) -> bool {
        let span = self.series.len() as f64;
        (self.dollar_age - span).abs() <= tolerance * span
    }
}

impl From<String> for AssetId {
    fn from(s: String) -> Self {
        AssetId(s)
    }
}

/// Percentile revenue shares `S^p_{t,i}` for one base age `t`.
///
/// Horizons run `1..=max_horizon`. A horizon has a row of shares (one per
/// level) only when its cohort was large enough.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareSurface {
    base_age: u32,
    levels: Vec<f64>,
    counts: Vec<usize>,
    cells: Vec<Option<Vec<f64>>>,
}

impl ShareSurface {
    /// Builds a surface from per-horizon cohort counts and optional share rows.
    /// `counts[i - 1]` and `cells[i - 1]` describe horizon `i`.
    pub fn new(
        base_age: u32,
        levels: Vec<f64>,
        counts: Vec<usize>,
        cells: Vec<Option<Vec<f64>>>,
    ) -> Result<Self> {
        if base_age < 1 {
            return Err(Error::domain("base age must be at least 1"));
        }
        validate_levels(&levels)?;
        if counts.len() != cells.len() {
            return Err(Error::domain(format!(
                "{} cohort counts for {} horizons",
                counts.len(),
                cells.len()
            )));
        }
        if counts.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::domain("cohort counts must not increase with horizon"));
        }
        for (i, row) in cells.iter().enumerate() {
            let Some(row) = row else { continue };
            if row.len() != levels.len() {
                return Err(Error::domain(format!(
                    "horizon {} has {} shares for {} levels",
                    i + 1,
                    row.len(),
                    levels.len()
                )));
            }
            if row.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(Error::domain(format!(
                    "horizon {} has a negative or non-finite share",
                    i + 1
                )));
            }
            if row.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::domain(format!(
                    "horizon {} shares decrease with percentile level",
                    i + 1
                )));
            }
        }
        Ok(ShareSurface {
            base_age,
            levels,
            counts,
            cells,
        })
    }

    /// A surface with the same share at every cell, mostly useful for tests.
    pub fn uniform(base_age: u32, levels: Vec<f64>, max_horizon: u32, share: f64) -> Result<Self> {
        let n = max_horizon as usize;
        let row = vec![share; levels.len()];
        Self::new(base_age, levels, vec![0; n], vec![Some(row); n])
    }

    pub fn base_age(&self) -> u32 {
        self.base_age
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn max_horizon(&self) -> u32 {
        self.cells.len() as u32
    }

    /// Cohort size at horizon `i`.
    pub fn count(&self, horizon: u32) -> Option<usize> {
        self.counts.get((horizon as usize).checked_sub(1)?).copied()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn row(&self, horizon: u32) -> Option<&[f64]> {
        self.cells
            .get((horizon as usize).checked_sub(1)?)?
            .as_deref()
    }

    pub fn level_index(&self, level: f64) -> Option<usize> {
        self.levels.iter().position(|l| *l == level)
    }

    pub fn share(&self, horizon: u32, level: f64) -> Option<f64> {
        let p = self.level_index(level)?;
        self.row(horizon).map(|r| r[p])
    }

    /// Number of leading horizons that carry shares (all horizons up to the
    /// first gap).
    pub fn covered_horizons(&self) -> u32 {
        self.cells.iter().take_while(|c| c.is_some()).count() as u32
    }

    /// Iterates `(horizon, level, share)` cells in horizon-then-level order.
    pub fn iter_cells(&self) -> impl Iterator<Item = (u32, f64, f64)> + '_ {
        self.cells.iter().enumerate().flat_map(move |(i, row)| {
            row.iter().flat_map(move |r| {
                r.iter()
                    .zip(&self.levels)
                    .map(move |(s, l)| (i as u32 + 1, *l, *s))
            })
        })
    }
}

pub(crate) fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::domain("at least one percentile level is required"));
    }
    if levels.iter().any(|l| !(l.is_finite() && *l > 0.0 && *l < 100.0)) {
        return Err(Error::domain("percentile levels must lie strictly between 0 and 100"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("percentile levels must be strictly increasing"));
    }
    Ok(())
}

/// Multipliers `M^p_{t,d}` for durations `1..=max_duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierTable {
    base_age: u32,
    rate: f64,
    levels: Vec<f64>,
    // entries[d - 1][p]
    entries: Vec<Vec<f64>>,
}

impl MultiplierTable {
    pub fn base_age(&self) -> u32 {
        self.base_age
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn max_duration(&self) -> u32 {
        self.entries.len() as u32
    }

    pub fn get(&self, duration: u32, level: f64) -> Option<f64> {
        let p = self.levels.iter().position(|l| *l == level)?;
        let row = self.entries.get((duration as usize).checked_sub(1)?)?;
        Some(row[p])
    }

    /// Multipliers at `duration` for every level, in level order.
    pub fn row(&self, duration: u32) -> Option<&[f64]> {
        self.entries
            .get((duration as usize).checked_sub(1)?)
            .map(Vec::as_slice)
    }

    /// Iterates `(duration, level, multiplier)` in duration-then-level order.
    pub fn iter_entries(&self) -> impl Iterator<Item = (u32, f64, f64)> + '_ {
        self.entries.iter().enumerate().flat_map(move |(d, row)| {
            row.iter()
                .zip(&self.levels)
                .map(move |(m, l)| (d as u32 + 1, *l, *m))
        })
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::domain(format!(
            "discount rate must be finite and non-negative, got {rate}"
        )));
    }
    Ok(())
}

/// `1 / (1 + rate)^year`.
pub fn discount_factor(rate: f64, year: u32) -> Result<f64> {
    check_rate(rate)?;
    if year < 1 {
        return Err(Error::domain("discount year must be at least 1"));
    }
    Ok(discount(rate, year))
}

fn discount(rate: f64, year: u32) -> f64 {
    let exp = i32::try_from(year).unwrap_or(i32::MAX);
    (1.0 + rate).powi(exp).recip()
}

/// Present value of revenue shares `shares[i - 1]` received at the end of
/// year `i`, per unit of current revenue.
pub fn multiplier_from_shares(shares: &[f64], rate: f64) -> Result<f64> {
    check_rate(rate)?;
    if shares.is_empty() {
        return Err(Error::domain("at least one share is required"));
    }
    if let Some(s) = shares.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::domain(format!(
            "shares must be finite and non-negative, got {s}"
        )));
    }
    let mut acc = CompensatedSum::default();
    for (i, s) in shares.iter().enumerate() {
        acc.add(s * discount(rate, i as u32 + 1));
    }
    Ok(acc.value())
}

/// Price implied by a multiplier and last-twelve-months revenue.
pub fn price(multiplier: f64, ltm: f64) -> Result<f64> {
    if !(ltm.is_finite() && ltm > 0.0) {
        return Err(Error::domain(format!("LTM revenue must be positive, got {ltm}")));
    }
    if !(multiplier.is_finite() && multiplier >= 0.0) {
        return Err(Error::domain(format!(
            "multiplier must be finite and non-negative, got {multiplier}"
        )));
    }
    Ok(multiplier * ltm)
}

/// Multipliers for every level of `surface` and durations `1..=max_duration`.
///
/// Fails with [`Error::MissingCell`] naming the first missing cell, scanning
/// horizons in ascending order and levels within each horizon.
pub fn multiplier_table(
    surface: &ShareSurface,
    rate: f64,
    max_duration: u32,
) -> Result<MultiplierTable> {
    check_rate(rate)?;
    if max_duration < 1 {
        return Err(Error::domain("max duration must be at least 1"));
    }
    let levels = surface.levels().to_vec();
    let mut sums = vec![CompensatedSum::default(); levels.len()];
    let mut entries = Vec::with_capacity(max_duration as usize);
    for i in 1..=max_duration {
        let row = surface.row(i).ok_or(Error::MissingCell {
            base_age: surface.base_age(),
            horizon: i,
            level: levels[0],
        })?;
        let df = discount(rate, i);
        let mut out = Vec::with_capacity(levels.len());
        for (acc, share) in sums.iter_mut().zip(row) {
            acc.add(share * df);
            out.push(acc.value());
        }
        entries.push(out);
    }
    Ok(MultiplierTable {
        base_age: surface.base_age(),
        rate,
        levels,
        entries,
    })
}
