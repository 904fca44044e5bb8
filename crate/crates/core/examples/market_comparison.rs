// Set market quotes against the model bands and build plot tables.
//
// Quotes are synthesized with bids at the bottom-decile multiplier and asks
// at the median, each with 5% noise.
//
// Run with `cargo run --example market_comparison`.

use catalog_dcf::curves::{SurfaceParams, SurfaceSet};
use catalog_dcf::ingest::{build_dataset, IngestConfig};
use catalog_dcf::market::{aggregate_plot_data, compare, filter_quotes, write_plot_csv, PlotAxis};
use catalog_dcf::synth::{gen_population, gen_quotes, GroupSpec, PopulationSpec, QuoteParams};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let groups = [(-0.3, 10), (-0.1, 12), (0.05, 14)]
        .into_iter()
        .map(|(annual_growth, age_years)| GroupSpec {
            count: 25,
            annual_growth,
            noise_sigma: 0.1,
            age_years,
            initial_revenue: 10_000.0,
        })
        .collect();
    let spec = PopulationSpec { seed: 99, groups, quotes: None };
    let (assets, _) = build_dataset(&gen_population(&spec)?, &IngestConfig::default());
    let surfaces = SurfaceSet::build(&assets, &SurfaceParams::default())?;

    let params = QuoteParams { bid_level: 10.0, ask_level: 50.0, noise: 0.05, ..Default::default() };
    let quotes = gen_quotes(&assets, &surfaces, 0.10, &params, spec.seed)?;
    let (kept, rejected) = filter_quotes(&quotes, 10, 0.5);
    let (rows, errors) = compare(&kept, &surfaces, 0.10);
    println!(
        "{} quotes, {} filtered out, {} compared, {} without a band",
        quotes.len(),
        rejected.len(),
        rows.len(),
        errors.len()
    );

    println!("\nby duration:");
    write_plot_csv(&aggregate_plot_data(&rows, PlotAxis::Duration), std::io::stdout())?;
    println!("\nby dollar age:");
    write_plot_csv(&aggregate_plot_data(&rows, PlotAxis::DollarAge), std::io::stdout())?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
