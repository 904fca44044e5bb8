// Price band for a catalog from a share surface.
//
// Run with `cargo run --example price_catalog`.

use catalog_dcf::model::{multiplier_table, price, ShareSurface};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // Shares for a 3-year-old catalog: bottom decile halves fast, the median
    // drifts down, the top decile holds up.
    let rows = (1..=10)
        .map(|i: i32| Some(vec![0.6f64.powi(i), 0.92f64.powi(i), 1.03f64.powi(i)]))
        .collect();
    let surface = ShareSurface::new(3, vec![10.0, 50.0, 90.0], vec![40; 10], rows)?;
    let table = multiplier_table(&surface, 0.10, 10)?;

    let ltm = 48_000.0;
    println!("LTM {ltm:.2}, base age 3, discount rate 10%");
    println!("duration      M10      M50      M90         P10         P50         P90");
    for d in [1, 3, 5, 10] {
        let m = table.row(d).expect("table covers 1..=10");
        println!(
            "{d:>8}  {:>7.3}  {:>7.3}  {:>7.3}  {:>10.2}  {:>10.2}  {:>10.2}",
            m[0],
            m[1],
            m[2],
            price(m[0], ltm)?,
            price(m[1], ltm)?,
            price(m[2], ltm)?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
