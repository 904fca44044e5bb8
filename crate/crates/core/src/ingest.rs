//! Cashflow and asset file parsing, annualization, and the two-step
//! acceptance filter (zero-revenue years, then dollar-age consistency).
//!
//! Amounts stay in exact decimal arithmetic until they leave this module.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnnualSeries, Asset, AssetId};

/// Default dollar-age tolerance, as a fraction of the oldest cashflow age.
pub const DEFAULT_DOLLAR_AGE_TOLERANCE: f64 = 0.30;

pub const CASHFLOWS_HEADER: [&str; 4] = ["asset_id", "period_start", "period_months", "amount"];
pub const ASSETS_HEADER: [&str; 2] = ["asset_id", "dollar_age"];

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::domain(format!("month {month} out of range")));
        }
        Ok(YearMonth { year, month })
    }

    pub const fn from_parts(year: i32, month: u32) -> Option<Self> {
        if month >= 1 && month <= 12 {
            Some(YearMonth { year, month })
        } else {
            None
        }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    /// Months since year 0, January.
    pub fn index(&self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    pub fn from_index(index: i64) -> Self {
        YearMonth {
            year: index.div_euclid(12) as i32,
            month: index.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn add_months(&self, months: i64) -> Self {
        Self::from_index(self.index() + months)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::domain(format!("invalid period '{s}', expected YYYY-MM"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        YearMonth::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
            .map_err(|_| bad())
    }
}

/// One dated revenue observation covering one month or one quarter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CashflowRecord {
    pub asset_id: AssetId,
    pub period_start: YearMonth,
    pub period_months: u32,
    pub amount: Decimal,
}

impl CashflowRecord {
    /// Index of the last month this record covers.
    pub fn end_index(&self) -> i64 {
        self.period_start.index() + i64::from(self.period_months) - 1
    }
}

/// An asset's raw records before annualization and filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAsset {
    pub id: AssetId,
    pub dollar_age: f64,
    /// Sorted by `period_start`; no two records cover the same month.
    pub records: Vec<CashflowRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    NegativeAmount,
    GapInHistory,
    InsufficientHistory,
    ZeroRevenueYear,
    DollarAgeMismatch,
}

impl RejectReason {
    /// Check order; the first failing check names the rejection.
    pub const ALL: [RejectReason; 5] = [
        RejectReason::NegativeAmount,
        RejectReason::GapInHistory,
        RejectReason::InsufficientHistory,
        RejectReason::ZeroRevenueYear,
        RejectReason::DollarAgeMismatch,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::NegativeAmount => "NEGATIVE_AMOUNT",
            RejectReason::GapInHistory => "GAP_IN_HISTORY",
            RejectReason::InsufficientHistory => "INSUFFICIENT_HISTORY",
            RejectReason::ZeroRevenueYear => "ZERO_REVENUE_YEAR",
            RejectReason::DollarAgeMismatch => "DOLLAR_AGE_MISMATCH",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportEntry {
    pub asset_id: AssetId,
    /// `None` when accepted.
    pub reason: Option<RejectReason>,
}

/// Per-asset outcome of [`build_dataset`], sorted by asset id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub entries: Vec<ReportEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub total: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub reasons: BTreeMap<String, usize>,
}

impl FilterReport {
    pub fn accepted(&self) -> usize {
        self.entries.iter().filter(|e| e.reason.is_none()).count()
    }

    pub fn rejected(&self) -> usize {
        self.entries.len() - self.accepted()
    }

    pub fn count(&self, reason: RejectReason) -> usize {
        self.entries
            .iter()
            .filter(|e| e.reason == Some(reason))
            .count()
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            total: self.entries.len(),
            accepted: self.accepted(),
            rejected: self.rejected(),
            reasons: RejectReason::ALL
                .iter()
                .map(|r| (r.code().to_owned(), self.count(*r)))
                .collect(),
        }
    }

    /// Writes `asset_id,status,reason` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["asset_id", "status", "reason"])?;
        for e in &self.entries {
            let (status, reason) = match e.reason {
                None => ("accepted", ""),
                Some(r) => ("rejected", r.code()),
            };
            w.write_record([e.asset_id.as_str(), status, reason])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Knobs for [`build_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub dollar_age_tolerance: f64,
    pub zero_floor: Decimal,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            dollar_age_tolerance: DEFAULT_DOLLAR_AGE_TOLERANCE,
            zero_floor: Decimal::ZERO,
        }
    }
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?;
    if header.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{}'", expected.join(",")),
        });
    }
    Ok(())
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn parse_amount(field: &str, line: usize) -> Result<Decimal> {
    let amount = Decimal::from_str(field).map_err(|_| Error::Parse {
        line,
        message: format!("invalid amount '{field}'"),
    })?;
    if amount.scale() > 2 {
        return Err(Error::Parse {
            line,
            message: format!("amount '{field}' has more than 2 fractional digits"),
        });
    }
    Ok(amount)
}

fn read_cashflow_lines<R: Read>(input: R) -> Result<Vec<(usize, CashflowRecord)>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &CASHFLOWS_HEADER)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields, found {}", row.len()),
            });
        }
        if row[0].is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty asset_id".into(),
            });
        }
        let asset_id = AssetId::new(&row[0]);
        let period_start = row[1].parse::<YearMonth>().map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let period_months = match &row[2] {
            "1" => 1,
            "3" => 3,
            other => {
                return Err(Error::UnknownFrequency {
                    line,
                    value: other.to_owned(),
                })
            }
        };
        let amount = parse_amount(&row[3], line)?;
        if !seen.insert((asset_id.clone(), period_start)) {
            return Err(Error::DuplicatePeriod {
                line,
                asset_id: asset_id.to_string(),
                period: period_start.to_string(),
            });
        }
        out.push((
            line,
            CashflowRecord {
                asset_id,
                period_start,
                period_months,
                amount,
            },
        ));
    }
    Ok(out)
}

/// Parses `cashflows.csv`, rejecting negative amounts at their line.
pub fn parse_cashflows<R: Read>(input: R) -> Result<Vec<CashflowRecord>> {
    read_cashflow_lines(input)?
        .into_iter()
        .map(|(line, rec)| {
            if rec.amount.is_sign_negative() && !rec.amount.is_zero() {
                Err(Error::NegativeAmount {
                    line,
                    amount: rec.amount.to_string(),
                })
            } else {
                Ok(rec)
            }
        })
        .collect()
}

/// Like [`parse_cashflows`] but keeps negative amounts so that
/// [`build_dataset`] can report them as `NEGATIVE_AMOUNT` rejections.
pub fn read_cashflows<R: Read>(input: R) -> Result<Vec<CashflowRecord>> {
    Ok(read_cashflow_lines(input)?
        .into_iter()
        .map(|(_, rec)| rec)
        .collect())
}

/// Parses `assets.csv` into `(asset_id, dollar_age)` pairs.
pub fn parse_assets<R: Read>(input: R) -> Result<Vec<(AssetId, f64)>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &ASSETS_HEADER)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 2 || row[0].is_empty() {
            return Err(Error::Parse {
                line,
                message: "expected asset_id,dollar_age".into(),
            });
        }
        let age: f64 = row[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid dollar_age '{}'", &row[1]),
        })?;
        if !(age.is_finite() && age > 0.0) {
            return Err(Error::Parse {
                line,
                message: format!("dollar_age must be positive, got '{}'", &row[1]),
            });
        }
        let id = AssetId::new(&row[0]);
        if !seen.insert(id.clone()) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate asset {id}"),
            });
        }
        out.push((id, age));
    }
    Ok(out)
}

/// Joins records with asset dollar ages. Records are sorted per asset and
/// checked for overlapping coverage; output is sorted by asset id.
pub fn group_raw_assets(
    records: Vec<CashflowRecord>,
    assets: &[(AssetId, f64)],
) -> Result<Vec<RawAsset>> {
    let ages: HashMap<&AssetId, f64> = assets.iter().map(|(id, a)| (id, *a)).collect();
    let mut grouped: BTreeMap<AssetId, Vec<CashflowRecord>> = BTreeMap::new();
    for rec in records {
        if !ages.contains_key(&rec.asset_id) {
            return Err(Error::UnmatchedAsset {
                asset_id: rec.asset_id.to_string(),
                message: "has cashflows but no dollar age".into(),
            });
        }
        grouped.entry(rec.asset_id.clone()).or_default().push(rec);
    }
    let mut out = Vec::with_capacity(assets.len());
    for (id, _) in assets {
        if !grouped.contains_key(id) {
            return Err(Error::UnmatchedAsset {
                asset_id: id.to_string(),
                message: "has a dollar age but no cashflows".into(),
            });
        }
    }
    for (id, mut recs) in grouped {
        recs.sort_by_key(|r| r.period_start);
        for w in recs.windows(2) {
            if w[1].period_start.index() <= w[0].end_index() {
                return Err(Error::OverlappingRecords {
                    asset_id: id.to_string(),
                    period: w[1].period_start.to_string(),
                });
            }
        }
        let dollar_age = ages[&id];
        out.push(RawAsset {
            id,
            dollar_age,
            records: recs,
        });
    }
    Ok(out)
}

/// Parses both input files and groups them into raw assets.
pub fn load_raw_assets<C: Read, A: Read>(cashflows: C, assets: A) -> Result<Vec<RawAsset>> {
    let records = read_cashflows(cashflows)?;
    let assets = parse_assets(assets)?;
    group_raw_assets(records, &assets)
}

/// Age in years from the first covered month to the end of the last covered
/// period.
pub fn oldest_cashflow_age(records: &[CashflowRecord]) -> Result<f64> {
    let first = records
        .iter()
        .map(|r| r.period_start.index())
        .min()
        .ok_or_else(|| Error::domain("no cashflow records"))?;
    let last = records.iter().map(CashflowRecord::end_index).max().unwrap_or(first);
    Ok((last - first + 1) as f64 / 12.0)
}

/// Splits `amount` into `parts` cent-rounded pieces; the remainder lands on
/// the final piece so the pieces sum to `amount` exactly.
pub fn split_evenly(amount: Decimal, parts: u32) -> Vec<Decimal> {
    let n = Decimal::from(parts);
    let piece = (amount / n).round_dp_with_strategy(2, RoundingStrategy::ToZero);
    let mut out = vec![piece; parts as usize];
    if let Some(last) = out.last_mut() {
        *last = amount - piece * Decimal::from(parts - 1);
    }
    out
}

/// Sums records into song-age-year buckets anchored at the first covered
/// month. A trailing partial year is dropped. Quarterly records are spread
/// over their three months before bucketing.
pub fn annualize(records: &[CashflowRecord]) -> std::result::Result<Vec<Decimal>, RejectReason> {
    let Some(first) = records.first() else {
        return Err(RejectReason::InsufficientHistory);
    };
    if records
        .windows(2)
        .any(|w| w[1].period_start.index() != w[0].end_index() + 1)
    {
        return Err(RejectReason::GapInHistory);
    }
    let monthly: Vec<Decimal> = records
        .iter()
        .flat_map(|r| {
            if r.period_months == 1 {
                vec![r.amount]
            } else {
                split_evenly(r.amount, r.period_months)
            }
        })
        .collect();
    debug_assert_eq!(
        monthly.len() as i64,
        records.last().map_or(0, |l| l.end_index()) - first.period_start.index() + 1
    );
    if monthly.len() < 12 {
        return Err(RejectReason::InsufficientHistory);
    }
    Ok(monthly
        .chunks_exact(12)
        .map(|year| year.iter().copied().sum())
        .collect())
}

/// Rejects the asset when any annual amount is at or below `zero_floor`.
pub fn filter_zero_years(
    annual: &[Decimal],
    zero_floor: Decimal,
) -> std::result::Result<(), RejectReason> {
    if annual.iter().any(|a| *a <= zero_floor) {
        Err(RejectReason::ZeroRevenueYear)
    } else {
        Ok(())
    }
}

/// Accepts when `|dollar_age - oldest_age| <= tolerance * oldest_age`.
/// Boundary equality accepts, with slack for float rounding of the inputs.
pub fn filter_dollar_age(
    dollar_age: f64,
    oldest_age: f64,
    tolerance: f64,
) -> std::result::Result<(), RejectReason> {
    let limit = tolerance * oldest_age;
    if (dollar_age - oldest_age).abs() <= limit + 1e-12 * oldest_age.max(limit) {
        Ok(())
    } else {
        Err(RejectReason::DollarAgeMismatch)
    }
}

fn process(raw: &RawAsset, config: &IngestConfig) -> std::result::Result<Asset, RejectReason> {
    if raw.records.iter().any(|r| r.amount < Decimal::ZERO) {
        return Err(RejectReason::NegativeAmount);
    }
    let annual = annualize(&raw.records)?;
    filter_zero_years(&annual, config.zero_floor)?;
    let oldest = oldest_cashflow_age(&raw.records).map_err(|_| RejectReason::InsufficientHistory)?;
    filter_dollar_age(raw.dollar_age, oldest, config.dollar_age_tolerance)?;
    let series = AnnualSeries::new(annual).map_err(|_| RejectReason::ZeroRevenueYear)?;
    Asset::new(raw.id.clone(), raw.dollar_age, series).map_err(|_| RejectReason::DollarAgeMismatch)
}

/// Runs every raw asset through annualization and both filters. Accepted
/// assets and report entries come out sorted by asset id.
pub fn build_dataset(raw: &[RawAsset], config: &IngestConfig) -> (Vec<Asset>, FilterReport) {
    let mut order: Vec<&RawAsset> = raw.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let outcomes: Vec<_> = order
        .par_iter()
        .map(|r| (r.id.clone(), process(r, config)))
        .collect();
    let mut accepted = Vec::new();
    let mut report = FilterReport::default();
    for (asset_id, outcome) in outcomes {
        match outcome {
            Ok(asset) => {
                accepted.push(asset);
                report.entries.push(ReportEntry {
                    asset_id,
                    reason: None,
                });
            }
            Err(reason) => report.entries.push(ReportEntry {
                asset_id,
                reason: Some(reason),
            }),
        }
    }
    (accepted, report)
}

/// Converts accepted assets back to monthly raw records, each annual amount
/// split evenly over twelve months. The last year ends at `last_month`.
pub fn to_raw(asset: &Asset, last_month: YearMonth) -> RawAsset {
    let years = asset.series.len() as i64;
    let start = last_month.add_months(1 - 12 * years);
    let records = asset
        .series
        .amounts()
        .iter()
        .flat_map(|a| split_evenly(*a, 12))
        .enumerate()
        .map(|(m, amount)| CashflowRecord {
            asset_id: asset.id.clone(),
            period_start: start.add_months(m as i64),
            period_months: 1,
            amount,
        })
        .collect();
    RawAsset {
        id: asset.id.clone(),
        dollar_age: asset.dollar_age,
        records,
    }
}

/// Writes `cashflows.csv` for raw assets, in the given order.
pub fn write_cashflows<W: Write>(assets: &[RawAsset], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CASHFLOWS_HEADER)?;
    for rec in assets.iter().flat_map(|a| &a.records) {
        w.write_record([
            rec.asset_id.to_string(),
            rec.period_start.to_string(),
            rec.period_months.to_string(),
            format!("{:.2}", rec.amount),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `assets.csv` for raw assets, in the given order.
pub fn write_assets<W: Write>(assets: &[RawAsset], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ASSETS_HEADER)?;
    for a in assets {
        w.write_record([a.id.to_string(), a.dollar_age.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
