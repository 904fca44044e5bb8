//! Test-only oracles and fixtures, kept independent of the library's
//! implementation paths.
#![allow(dead_code)]

use catalog_dcf::ingest::{build_dataset, CashflowRecord, IngestConfig, RawAsset, YearMonth};
use catalog_dcf::model::Asset;
use catalog_dcf::synth::{gen_population, GroupSpec, PopulationSpec};
use rust_decimal::Decimal;

/// Percentile by rank counting and integer position arithmetic; `level`
/// must be a whole number. No sorting of the input.
pub fn brute_percentile(values: &[f64], level: u32) -> f64 {
    let n = values.len();
    let order_stat = |k: usize| -> f64 {
        *values
            .iter()
            .find(|v| {
                let below = values.iter().filter(|x| x < v).count();
                let at_or_below = values.iter().filter(|x| x <= v).count();
                below <= k && k < at_or_below
            })
            .expect("some value holds rank k")
    };
    let num = (n - 1) * level as usize;
    let lo = num / 100;
    let rem = num % 100;
    if rem == 0 {
        order_stat(lo)
    } else {
        let a = order_stat(lo);
        let b = order_stat(lo + 1);
        a + (rem as f64 / 100.0) * (b - a)
    }
}

/// Annuity of unit shares by summing discounted terms one by one.
pub fn annuity_by_terms(rate: f64, d: u32) -> f64 {
    let mut df = 1.0;
    let mut total = 0.0;
    for _ in 0..d {
        df /= 1.0 + rate;
        total += df;
    }
    total
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if b == 0.0 {
        a.abs() <= tol
    } else {
        ((a - b) / b).abs() <= tol
    }
}

pub fn group(count: u32, growth: f64, sigma: f64, age: u32, initial: f64) -> GroupSpec {
    GroupSpec {
        count,
        annual_growth: growth,
        noise_sigma: sigma,
        age_years: age,
        initial_revenue: initial,
    }
}

pub fn population(seed: u64, groups: Vec<GroupSpec>) -> PopulationSpec {
    PopulationSpec { seed, groups, quotes: None }
}

/// Generates and ingests a population with default filters.
pub fn accepted(spec: &PopulationSpec) -> Vec<Asset> {
    let raw = gen_population(spec).expect("valid spec");
    let (assets, report) = build_dataset(&raw, &IngestConfig::default());
    assert_eq!(report.rejected(), 0, "synthetic assets should all pass");
    assets
}

pub fn dec(s: &str) -> Decimal {
    s.parse().unwrap()
}

pub fn records(id: &str, start: &str, months: u32, amounts: &[Decimal]) -> Vec<CashflowRecord> {
    let start: YearMonth = start.parse().unwrap();
    amounts
        .iter()
        .enumerate()
        .map(|(k, a)| CashflowRecord {
            asset_id: id.into(),
            period_start: start.add_months(k as i64 * i64::from(months)),
            period_months: months,
            amount: *a,
        })
        .collect()
}

pub fn raw(id: &str, dollar_age: f64, records: Vec<CashflowRecord>) -> RawAsset {
    RawAsset { id: id.into(), dollar_age, records }
}

/// Seven assets: two clean, and one tripping each rejection reason.
pub fn filter_fixture() -> Vec<RawAsset> {
    let ten = dec("10.00");
    let mut gap = records("C_GAP", "2020-01", 1, &[ten; 6]);
    gap.extend(records("C_GAP", "2020-08", 1, &[ten; 18]));
    let mut neg = records("B_NEG", "2020-01", 1, &[ten; 23]);
    neg.push(records("B_NEG", "2021-12", 1, &[dec("-5.00")]).remove(0));
    let mut zero = records("E_ZERO", "2020-01", 1, &[ten; 12]);
    zero.extend(records("E_ZERO", "2021-01", 1, &[Decimal::ZERO; 12]));
    zero.extend(records("E_ZERO", "2022-01", 1, &[ten; 12]));
    vec![
        raw("A_OK1", 2.0, records("A_OK1", "2020-01", 1, &[ten; 24])),
        // 8 quarters = 2.0 years; 2.6 sits exactly 30% above.
        raw("A_OK2", 2.6, records("A_OK2", "2020-01", 3, &[dec("30.00"); 8])),
        raw("B_NEG", 2.0, neg),
        raw("C_GAP", 2.0, gap),
        raw("D_SHORT", 1.0, records("D_SHORT", "2020-01", 1, &[ten; 11])),
        raw("E_ZERO", 3.0, zero),
        raw("F_AGE", 5.0, records("F_AGE", "2020-01", 1, &[ten; 24])),
    ]
}
