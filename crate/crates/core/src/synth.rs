//! Seeded synthetic catalogs and quotes with closed-form expectations.
//!
//! Annual revenue of a synthetic asset follows
//! `C_k = initial * (1 + g)^(k - 1) * exp(eps_k)` with `eps_k ~ N(0, sigma^2)`.
//! Each asset draws from its own ChaCha8 stream seeded by mixing the master
//! seed with the asset index (SplitMix64 finalizer), and normals come from
//! the inverse normal CDF applied to 53-bit uniforms. Generation is therefore
//! identical regardless of how assets are scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rust_decimal::prelude::{FromPrimitive, ToPrimitive};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::curves::SurfaceSet;
use crate::error::{Error, Result};
use crate::ingest::{split_evenly, CashflowRecord, RawAsset, YearMonth};
use crate::market::{model_band, MarketQuote};
use crate::model::{Asset, AssetId, DEFAULT_MAX_DURATION};

/// Synthetic histories all end in this month.
pub const LAST_MONTH: YearMonth = match YearMonth::from_parts(2023, 12) {
    Some(m) => m,
    None => unreachable!(),
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub count: u32,
    pub annual_growth: f64,
    pub noise_sigma: f64,
    pub age_years: u32,
    pub initial_revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuoteParams {
    pub bid_level: f64,
    pub ask_level: f64,
    pub noise: f64,
    #[serde(default = "default_quote_duration")]
    pub max_duration: u32,
}

fn default_quote_duration() -> u32 {
    DEFAULT_MAX_DURATION
}

impl Default for QuoteParams {
    fn default() -> Self {
        QuoteParams {
            bid_level: 10.0,
            ask_level: 50.0,
            noise: 0.0,
            max_duration: DEFAULT_MAX_DURATION,
        }
    }
}

impl QuoteParams {
    pub fn validate(&self) -> Result<()> {
        for (name, level) in [("bid_level", self.bid_level), ("ask_level", self.ask_level)] {
            if ![10.0, 50.0, 90.0].contains(&level) {
                return Err(Error::InvalidSpec(format!("quotes.{name} must be 10, 50 or 90, got {level}")));
            }
        }
        if !(self.noise.is_finite() && (0.0..1.0).contains(&self.noise)) {
            return Err(Error::InvalidSpec(format!("quotes.noise must be in [0, 1), got {}", self.noise)));
        }
        if self.max_duration < 1 {
            return Err(Error::InvalidSpec("quotes.max_duration must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub seed: u64,
    pub groups: Vec<GroupSpec>,
    #[serde(default)]
    pub quotes: Option<QuoteParams>,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::InvalidSpec("groups must not be empty".into()));
        }
        for (k, g) in self.groups.iter().enumerate() {
            let field = |name: &str, msg: &str| Error::InvalidSpec(format!("groups[{k}].{name} {msg}"));
            if g.count < 1 {
                return Err(field("count", "must be at least 1"));
            }
            if !(g.annual_growth.is_finite() && g.annual_growth > -1.0) {
                return Err(field("annual_growth", "must be greater than -1"));
            }
            if !(g.noise_sigma.is_finite() && g.noise_sigma >= 0.0) {
                return Err(field("noise_sigma", "must be non-negative"));
            }
            if g.age_years < 2 {
                return Err(field("age_years", "must be at least 2"));
            }
            if !(g.initial_revenue.is_finite() && g.initial_revenue > 0.0) {
                return Err(field("initial_revenue", "must be positive"));
            }
        }
        if let Some(q) = &self.quotes {
            q.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: PopulationSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

fn unit_open(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let n = Normal::standard();
    n.inverse_cdf(unit_open(rng))
}

fn cents(x: f64) -> Decimal {
    Decimal::from_f64(x)
        .unwrap_or(Decimal::MAX)
        .round_dp(2)
}

/// Annual totals rounded to cents.
pub fn annual_totals(seed: u64, age_years: u32, initial: f64, growth: f64, sigma: f64) -> Vec<Decimal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..age_years)
        .map(|k| {
            let eps = if sigma > 0.0 { sigma * standard_normal(&mut rng) } else { 0.0 };
            cents(initial * (1.0 + growth).powi(k as i32) * eps.exp())
        })
        .collect()
}

/// One synthetic asset as monthly records ending at [`LAST_MONTH`], each
/// annual total split evenly over its twelve months.
pub fn gen_asset(
    id: impl Into<AssetId>,
    seed: u64,
    age_years: u32,
    initial: f64,
    growth: f64,
    sigma: f64,
) -> RawAsset {
    let id = id.into();
    let start = LAST_MONTH.add_months(1 - 12 * i64::from(age_years));
    let records = annual_totals(seed, age_years, initial, growth, sigma)
        .into_iter()
        .flat_map(|a| split_evenly(a, 12))
        .enumerate()
        .map(|(m, amount)| CashflowRecord {
            asset_id: id.clone(),
            period_start: start.add_months(m as i64),
            period_months: 1,
            amount,
        })
        .collect();
    RawAsset {
        id,
        dollar_age: f64::from(age_years),
        records,
    }
}

/// All assets of a population, ids `S00000`, `S00001`, ... in group order.
pub fn gen_population(spec: &PopulationSpec) -> Result<Vec<RawAsset>> {
    spec.validate()?;
    let jobs: Vec<(u64, &GroupSpec)> = spec
        .groups
        .iter()
        .flat_map(|g| std::iter::repeat_n(g, g.count as usize))
        .enumerate()
        .map(|(i, g)| (i as u64, g))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|(i, g)| {
            gen_asset(
                format!("S{i:05}"),
                derive_seed(spec.seed, *i),
                g.age_years,
                g.initial_revenue,
                g.annual_growth,
                g.noise_sigma,
            )
        })
        .collect())
}

/// Multiplier of shares `(1 + g)^i` discounted at `r` over `d` years.
pub fn closed_form_multiplier(growth: f64, rate: f64, duration: u32) -> f64 {
    let q = (1.0 + growth) / (1.0 + rate);
    if (q - 1.0).abs() <= 1e-12 {
        f64::from(duration)
    } else {
        q * (1.0 - q.powi(duration as i32)) / (1.0 - q)
    }
}

fn level_slot(level: f64) -> usize {
    match level as u32 {
        10 => 0,
        50 => 1,
        _ => 2,
    }
}

// Separates the quote streams from the asset-generation streams.
const QUOTE_STREAM: u64 = 0x5155_4F54_4553;

/// Quotes priced off the model bands: bid at `bid_level`, ask at
/// `ask_level`, each scaled by an independent `1 + eta`, `eta` uniform in
/// `[-noise, noise]`. Durations are drawn from `1..=max_duration`, capped by
/// the longest horizon any surface covers. Assets are visited in id order.
pub fn gen_quotes(
    dataset: &[Asset],
    surfaces: &SurfaceSet,
    rate: f64,
    params: &QuoteParams,
    seed: u64,
) -> Result<Vec<MarketQuote>> {
    params.validate()?;
    let cap = surfaces
        .ages()
        .filter_map(|t| surfaces.get(t))
        .map(|s| s.covered_horizons())
        .max()
        .unwrap_or(0)
        .min(params.max_duration);
    if cap == 0 {
        return Ok(Vec::new());
    }
    let mut sorted: Vec<&Asset> = dataset.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted
        .iter()
        .enumerate()
        .map(|(i, asset)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed ^ QUOTE_STREAM, i as u64));
            let duration = rng.gen_range(1..=cap);
            let eta_bid = params.noise * (2.0 * unit_open(&mut rng) - 1.0);
            let eta_ask = params.noise * (2.0 * unit_open(&mut rng) - 1.0);
            let band = model_band(surfaces, asset.dollar_age, duration, rate)?;
            let ltm = asset
                .series
                .ltm()
                .to_f64()
                .ok_or_else(|| Error::domain("LTM does not fit a float"))?;
            Ok(MarketQuote {
                asset_id: asset.id.clone(),
                ltm,
                best_bid: Some(ltm * band[level_slot(params.bid_level)] * (1.0 + eta_bid)),
                ask: ltm * band[level_slot(params.ask_level)] * (1.0 + eta_ask),
                duration_years: duration,
                dollar_age: asset.dollar_age,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{annualize, write_cashflows};

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    #[test]
    fn flat_and_halving_assets() {
        let flat = gen_asset("A", 42, 3, 1200.0, 0.0, 0.0);
        assert_eq!(annualize(&flat.records).unwrap(), vec![d("1200"); 3]);
        assert_eq!(flat.dollar_age, 3.0);
        assert_eq!(flat.records.last().unwrap().period_start, LAST_MONTH);
        let half = gen_asset("B", 7, 3, 1200.0, -0.5, 0.0);
        assert_eq!(annualize(&half.records).unwrap(), vec![d("1200"), d("600"), d("300")]);
    }

    #[test]
    fn same_seed_same_bytes() {
        let render = |seed| {
            let mut buf = Vec::new();
            write_cashflows(&[gen_asset("A", seed, 4, 1000.0, 0.05, 0.3)], &mut buf).unwrap();
            buf
        };
        assert_eq!(render(9), render(9));
        assert_ne!(render(9), render(10));
    }

    #[test]
    fn noise_is_lognormal_and_positive() {
        let totals = annual_totals(3, 200, 1000.0, 0.0, 0.5);
        assert!(totals.iter().all(|t| *t > Decimal::ZERO));
        let logs: Vec<f64> = totals
            .iter()
            .map(|t| (t.to_string().parse::<f64>().unwrap() / 1000.0).ln())
            .collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (logs.len() - 1) as f64;
        assert!(mean.abs() < 0.15, "mean {mean}");
        assert!((var.sqrt() - 0.5).abs() < 0.1, "sd {}", var.sqrt());
    }

    #[test]
    fn closed_form_examples() {
        for d in [1, 5, 10] {
            assert_eq!(closed_form_multiplier(0.1, 0.1, d), f64::from(d));
        }
        assert!((closed_form_multiplier(0.0, 0.10, 10) - 6.144_567_105_704_683).abs() < 1e-12);
        // 0.72727272 + 0.52892561 + 0.38467317
        assert!((closed_form_multiplier(-0.2, 0.10, 3) - 1.640_871_525_169_045_8).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let ok = r#"{"seed": 1, "groups": [{"count": 2, "annual_growth": 0.0, "noise_sigma": 0.0, "age_years": 3, "initial_revenue": 100.0}]}"#;
        assert!(PopulationSpec::from_json(ok).is_ok());
        let zero = ok.replace("\"count\": 2", "\"count\": 0");
        assert!(matches!(PopulationSpec::from_json(&zero), Err(Error::InvalidSpec(m)) if m.contains("count")));
        let young = ok.replace("\"age_years\": 3", "\"age_years\": 1");
        assert!(PopulationSpec::from_json(&young).is_err());
        let extra = ok.replace("\"seed\": 1", "\"seed\": 1, \"colour\": 2");
        assert!(PopulationSpec::from_json(&extra).is_err());
        let bad_level = ok.replace("]}", r#"], "quotes": {"bid_level": 20, "ask_level": 50, "noise": 0}}"#);
        assert!(PopulationSpec::from_json(&bad_level).is_err());
    }

    #[test]
    fn population_ids_and_ages() {
        let spec = PopulationSpec {
            seed: 5,
            groups: vec![
                GroupSpec { count: 2, annual_growth: 0.0, noise_sigma: 0.0, age_years: 3, initial_revenue: 10.0 },
                GroupSpec { count: 1, annual_growth: 0.0, noise_sigma: 0.0, age_years: 5, initial_revenue: 10.0 },
            ],
            quotes: None,
        };
        let pop = gen_population(&spec).unwrap();
        let ids: Vec<_> = pop.iter().map(|a| a.id.to_string()).collect();
        assert_eq!(ids, vec!["S00000", "S00001", "S00002"]);
        assert_eq!(pop[2].records.len(), 60);
    }
}
