// Parse raw cashflow files, annualize them, and apply the data filters.
//
// Run with `cargo run --example ingest_filter`.

use catalog_dcf::ingest::{build_dataset, load_raw_assets, IngestConfig};

const CASHFLOWS: &str = "\
asset_id,period_start,period_months,amount
steady,2021-01,3,300.00
steady,2021-04,3,310.00
steady,2021-07,3,290.00
steady,2021-10,3,305.00
steady,2022-01,3,280.00
steady,2022-04,3,275.00
steady,2022-07,3,260.00
steady,2022-10,3,250.00
silent,2021-01,3,100.00
silent,2021-04,3,100.00
silent,2021-07,3,100.00
silent,2021-10,3,100.00
silent,2022-01,3,0.00
silent,2022-04,3,0.00
silent,2022-07,3,0.00
silent,2022-10,3,0.00
mislabeled,2022-01,3,80.00
mislabeled,2022-04,3,80.00
mislabeled,2022-07,3,80.00
mislabeled,2022-10,3,80.00
";

const ASSETS: &str = "\
asset_id,dollar_age
steady,2.1
silent,2
mislabeled,6.5
";

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let raw = load_raw_assets(CASHFLOWS.as_bytes(), ASSETS.as_bytes())?;
    let (accepted, report) = build_dataset(&raw, &IngestConfig::default());

    for entry in &report.entries {
        match entry.reason {
            None => println!("{:<12} accepted", entry.asset_id),
            Some(reason) => println!("{:<12} rejected: {reason}", entry.asset_id),
        }
    }
    for asset in &accepted {
        println!("{} annual revenue by year of age: {:?}", asset.id, asset.series.amounts());
    }
    println!("{}", serde_json::to_string_pretty(&report.summary())?);
    assert_eq!(accepted.len(), 1);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
