// Percentile revenue-share curves for young and mature catalogs.
//
// Young catalogs decay at every percentile. Among mature catalogs the
// bottom decile keeps decaying while the top decile grows.
//
// Run with `cargo run --example share_curves`.

use catalog_dcf::curves::{build_surface, SurfaceParams};
use catalog_dcf::ingest::{build_dataset, IngestConfig};
use catalog_dcf::synth::{gen_population, GroupSpec, PopulationSpec};

fn group(count: u32, annual_growth: f64, age_years: u32) -> GroupSpec {
    GroupSpec { count, annual_growth, noise_sigma: 0.05, age_years, initial_revenue: 2_000.0 }
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = PopulationSpec {
        seed: 2024,
        groups: vec![
            group(20, -0.45, 6),
            group(20, -0.25, 6),
            group(20, -0.2, 12),
            group(20, 0.0, 12),
            group(20, 0.12, 12),
        ],
        quotes: None,
    };
    let (assets, _) = build_dataset(&gen_population(&spec)?, &IngestConfig::default());
    let params = SurfaceParams { max_horizon: 5, ..Default::default() };

    for base_age in [1, 7] {
        let surface = build_surface(&assets, base_age, &params)?;
        println!("base age {base_age}");
        println!("  horizon  cohort    S10      S50      S90");
        for i in 1..=surface.max_horizon() {
            let n = surface.count(i).unwrap_or(0);
            match surface.row(i) {
                Some(row) => println!("  {i:>7}  {n:>6}  {:>7.3}  {:>7.3}  {:>7.3}", row[0], row[1], row[2]),
                None => println!("  {i:>7}  {n:>6}  (cohort too small)"),
            }
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
