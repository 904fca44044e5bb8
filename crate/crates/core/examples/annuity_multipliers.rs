// Discount factors, multipliers from revenue shares, and prices.
//
// Run with `cargo run --example annuity_multipliers`.

use catalog_dcf::synth::closed_form_multiplier;
use catalog_dcf::{discount_factor, multiplier_from_shares, price};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let rate = 0.10;
    println!("discount factor, year 10 at 10%: {:.8}", discount_factor(rate, 10)?);

    // Revenue that stays flat: a plain annuity.
    let flat = multiplier_from_shares(&[1.0; 10], rate)?;
    println!("flat revenue, 10 years: {flat:.6}x LTM");

    // Revenue that decays 20% a year, summed term by term and in closed form.
    let decaying: Vec<f64> = (1..=10).map(|i| 0.8f64.powi(i)).collect();
    let by_terms = multiplier_from_shares(&decaying, rate)?;
    let closed = closed_form_multiplier(-0.2, rate, 10);
    println!("20% decay, 10 years: {by_terms:.6}x (closed form {closed:.6}x)");
    assert!((by_terms - closed).abs() < 1e-12);

    let ltm = 25_000.0;
    println!("price of a flat catalog with LTM {ltm:.2}: {:.2}", price(flat, ltm)?);
    println!("price of a decaying catalog: {:.2}", price(by_terms, ltm)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
