//! Market quotes: implied multipliers, quote filters, and comparison of
//! bid/ask multipliers against the model's percentile bands.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::curves::SurfaceSet;
use crate::error::{Error, Result};
use crate::model::{multiplier_table, AssetId};

pub const DEFAULT_MIN_BID_ASK_RATIO: f64 = 0.5;
pub const QUOTES_HEADER: [&str; 6] = ["asset_id", "ltm", "best_bid", "ask", "duration_years", "dollar_age"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketQuote {
    pub asset_id: AssetId,
    pub ltm: f64,
    pub best_bid: Option<f64>,
    pub ask: f64,
    pub duration_years: u32,
    pub dollar_age: f64,
}

impl MarketQuote {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.ltm) {
            return Err(Error::domain(format!("{}: LTM must be positive", self.asset_id)));
        }
        if !positive(self.ask) {
            return Err(Error::domain(format!("{}: ask must be positive", self.asset_id)));
        }
        if let Some(b) = self.best_bid {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::domain(format!("{}: bid must be non-negative", self.asset_id)));
            }
        }
        if self.duration_years < 1 {
            return Err(Error::domain(format!("{}: duration must be at least 1", self.asset_id)));
        }
        if !positive(self.dollar_age) {
            return Err(Error::domain(format!("{}: dollar age must be positive", self.asset_id)));
        }
        Ok(())
    }
}

/// `(best_bid / ltm, ask / ltm)`.
pub fn implied_multipliers(quote: &MarketQuote) -> Result<(Option<f64>, f64)> {
    if !(quote.ltm.is_finite() && quote.ltm > 0.0) {
        return Err(Error::domain(format!(
            "{}: LTM must be positive, got {}",
            quote.asset_id, quote.ltm
        )));
    }
    Ok((quote.best_bid.map(|b| b / quote.ltm), quote.ask / quote.ltm))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QuoteRejectReason {
    DurationTooLong,
    BidTooLow,
}

impl QuoteRejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            QuoteRejectReason::DurationTooLong => "DURATION_TOO_LONG",
            QuoteRejectReason::BidTooLow => "BID_TOO_LOW",
        }
    }
}

impl fmt::Display for QuoteRejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedQuote {
    pub quote: MarketQuote,
    pub reason: QuoteRejectReason,
}

/// Keeps quotes with `duration_years <= max_duration` whose bid multiplier,
/// when present, is at least `min_bid_ask_ratio` times the ask multiplier.
/// Duration is checked first. Quotes with invalid LTM are not expected here;
/// validate them on input.
pub fn filter_quotes(
    quotes: &[MarketQuote],
    max_duration: u32,
    min_bid_ask_ratio: f64,
) -> (Vec<MarketQuote>, Vec<RejectedQuote>) {
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for q in quotes {
        let reason = if q.duration_years > max_duration {
            Some(QuoteRejectReason::DurationTooLong)
        } else {
            match implied_multipliers(q) {
                Ok((Some(bid), ask)) => {
                    let floor = min_bid_ask_ratio * ask;
                    (bid < floor - 1e-12 * floor).then_some(QuoteRejectReason::BidTooLow)
                }
                _ => None,
            }
        };
        match reason {
            None => accepted.push(q.clone()),
            Some(reason) => rejected.push(RejectedQuote {
                quote: q.clone(),
                reason,
            }),
        }
    }
    (accepted, rejected)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub asset_id: AssetId,
    pub duration: u32,
    pub dollar_age: f64,
    pub bid_multiplier: Option<f64>,
    pub ask_multiplier: f64,
    pub model_m10: f64,
    pub model_m50: f64,
    pub model_m90: f64,
    pub bid_gap_to_m10: Option<f64>,
    pub ask_gap_to_m50: f64,
}

/// A quote that could not be compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub asset_id: AssetId,
    pub message: String,
}

fn quote_order(a: &MarketQuote, b: &MarketQuote) -> std::cmp::Ordering {
    a.asset_id
        .cmp(&b.asset_id)
        .then(a.duration_years.cmp(&b.duration_years))
        .then(a.dollar_age.total_cmp(&b.dollar_age))
}

/// Model band `(m10, m50, m90)` for a dollar age and duration.
pub fn model_band(surfaces: &SurfaceSet, dollar_age: f64, duration: u32, rate: f64) -> Result<[f64; 3]> {
    let surface = surfaces.resolve(dollar_age, duration).ok_or_else(|| {
        Error::domain(format!(
            "no surface covers duration {duration} near dollar age {dollar_age}"
        ))
    })?;
    let table = multiplier_table(surface, rate, duration)?;
    let mut band = [0.0; 3];
    for (slot, level) in band.iter_mut().zip([10.0, 50.0, 90.0]) {
        *slot = table.get(duration, level).ok_or_else(|| {
            Error::domain(format!("surface for base age {} lacks level {level}", surface.base_age()))
        })?;
    }
    Ok(band)
}

fn compare_one(q: &MarketQuote, surfaces: &SurfaceSet, rate: f64) -> Result<ComparisonRow> {
    q.validate()?;
    let (bid, ask) = implied_multipliers(q)?;
    let [m10, m50, m90] = model_band(surfaces, q.dollar_age, q.duration_years, rate)?;
    Ok(ComparisonRow {
        asset_id: q.asset_id.clone(),
        duration: q.duration_years,
        dollar_age: q.dollar_age,
        bid_multiplier: bid,
        ask_multiplier: ask,
        model_m10: m10,
        model_m50: m50,
        model_m90: m90,
        bid_gap_to_m10: bid.map(|b| b - m10),
        ask_gap_to_m50: ask - m50,
    })
}

/// Places each quote against the model band for its (rounded) dollar age and
/// duration. Failures become row errors; both outputs are sorted by asset id.
pub fn compare(
    quotes: &[MarketQuote],
    surfaces: &SurfaceSet,
    rate: f64,
) -> (Vec<ComparisonRow>, Vec<RowError>) {
    let mut sorted: Vec<&MarketQuote> = quotes.iter().collect();
    sorted.sort_by(|a, b| quote_order(a, b));
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for q in sorted {
        match compare_one(q, surfaces, rate) {
            Ok(row) => rows.push(row),
            Err(e) => errors.push(RowError {
                asset_id: q.asset_id.clone(),
                message: e.to_string(),
            }),
        }
    }
    (rows, errors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotAxis {
    Duration,
    /// Dollar age rounded half up to a whole year.
    DollarAge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub axis_value: u32,
    pub n: usize,
    /// Mean over rows that carry a bid; absent when none do.
    pub mean_bid_mult: Option<f64>,
    pub mean_ask_mult: f64,
    pub mean_m10: f64,
    pub mean_m50: f64,
    pub mean_m90: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Group means of market and model multipliers, by duration or dollar age.
pub fn aggregate_plot_data(rows: &[ComparisonRow], axis: PlotAxis) -> Vec<PlotRow> {
    let mut groups: BTreeMap<u32, Vec<&ComparisonRow>> = BTreeMap::new();
    for r in rows {
        let key = match axis {
            PlotAxis::Duration => r.duration,
            PlotAxis::DollarAge => crate::curves::base_age_for(r.dollar_age),
        };
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(axis_value, g)| PlotRow {
            axis_value,
            n: g.len(),
            mean_bid_mult: mean(g.iter().filter_map(|r| r.bid_multiplier)),
            mean_ask_mult: mean(g.iter().map(|r| r.ask_multiplier)).unwrap_or(0.0),
            mean_m10: mean(g.iter().map(|r| r.model_m10)).unwrap_or(0.0),
            mean_m50: mean(g.iter().map(|r| r.model_m50)).unwrap_or(0.0),
            mean_m90: mean(g.iter().map(|r| r.model_m90)).unwrap_or(0.0),
        })
        .collect()
}

fn opt_f64(s: &str, line: usize, field: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Parse {
        line,
        message: format!("invalid {field} '{s}'"),
    })
}

/// Parses `quotes.csv`. An empty `best_bid` means no bid.
pub fn parse_quotes<R: Read>(input: R) -> Result<Vec<MarketQuote>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    if reader.headers()?.iter().ne(QUOTES_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{}'", QUOTES_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 6 || rec[0].is_empty() {
            return Err(Error::Parse {
                line,
                message: "expected 6 fields with a non-empty asset_id".into(),
            });
        }
        let required = |i: usize, field: &str| -> Result<f64> {
            opt_f64(&rec[i], line, field)?.ok_or_else(|| Error::Parse {
                line,
                message: format!("missing {field}"),
            })
        };
        let q = MarketQuote {
            asset_id: AssetId::new(&rec[0]),
            ltm: required(1, "ltm")?,
            best_bid: opt_f64(&rec[2], line, "best_bid")?,
            ask: required(3, "ask")?,
            duration_years: rec[4].parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid duration_years '{}'", &rec[4]),
            })?,
            dollar_age: required(5, "dollar_age")?,
        };
        q.validate().map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        out.push(q);
    }
    Ok(out)
}

/// Writes `quotes.csv` with shortest round-trip float formatting, so implied
/// multipliers survive a write/read cycle exactly.
pub fn write_quotes<W: Write>(quotes: &[MarketQuote], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(QUOTES_HEADER)?;
    for q in quotes {
        w.write_record([
            q.asset_id.to_string(),
            q.ltm.to_string(),
            q.best_bid.map(|b| b.to_string()).unwrap_or_default(),
            q.ask.to_string(),
            q.duration_years.to_string(),
            q.dollar_age.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

pub const COMPARISON_HEADER: [&str; 10] = [
    "asset_id",
    "duration",
    "dollar_age",
    "bid_multiplier",
    "ask_multiplier",
    "model_m10",
    "model_m50",
    "model_m90",
    "bid_gap_to_m10",
    "ask_gap_to_m50",
];

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARISON_HEADER)?;
    for r in rows {
        w.write_record([
            r.asset_id.to_string(),
            r.duration.to_string(),
            r.dollar_age.to_string(),
            r.bid_multiplier.map(fmt6).unwrap_or_default(),
            fmt6(r.ask_multiplier),
            fmt6(r.model_m10),
            fmt6(r.model_m50),
            fmt6(r.model_m90),
            r.bid_gap_to_m10.map(fmt6).unwrap_or_default(),
            fmt6(r.ask_gap_to_m50),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const PLOT_HEADER: [&str; 7] = [
    "axis_value",
    "n",
    "mean_bid_mult",
    "mean_ask_mult",
    "mean_m10",
    "mean_m50",
    "mean_m90",
];

pub fn write_plot_csv<W: Write>(rows: &[PlotRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLOT_HEADER)?;
    for r in rows {
        w.write_record([
            r.axis_value.to_string(),
            r.n.to_string(),
            r.mean_bid_mult.map(fmt6).unwrap_or_default(),
            fmt6(r.mean_ask_mult),
            fmt6(r.mean_m10),
            fmt6(r.mean_m50),
            fmt6(r.mean_m90),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rejected_quotes_csv<W: Write>(rejected: &[RejectedQuote], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["asset_id", "reason"])?;
    for r in rejected {
        w.write_record([r.quote.asset_id.as_str(), r.reason.code()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_row_errors_csv<W: Write>(errors: &[RowError], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["asset_id", "error"])?;
    for e in errors {
        w.write_record([e.asset_id.as_str(), e.message.as_str()])?;
    }
    w.flush()?;
    Ok(())
}
