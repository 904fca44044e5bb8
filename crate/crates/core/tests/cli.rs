mod common;

use std::fs;
use std::path::{Path, PathBuf};

use catalog_dcf::cli::{resolve_config, run};
use catalog_dcf::config::OutputFormat;
use catalog_dcf::curves::read_surface_csv;
use catalog_dcf::ingest::{write_assets, write_cashflows};
use catalog_dcf::market::{write_quotes, MarketQuote};
use common::*;
use tempfile::TempDir;

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["catalog-dcf"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const FLAT_SPEC: &str = r#"{"seed": 11, "groups": [
  {"count": 6, "annual_growth": 0.0, "noise_sigma": 0.0, "age_years": 12, "initial_revenue": 1200.0}
]}"#;

const MIXED_SPEC: &str = r#"{"seed": 5, "groups": [
  {"count": 5, "annual_growth": -0.2, "noise_sigma": 0.0, "age_years": 9, "initial_revenue": 1000000.0},
  {"count": 5, "annual_growth": 0.0, "noise_sigma": 0.0, "age_years": 9, "initial_revenue": 1000000.0},
  {"count": 5, "annual_growth": 0.1, "noise_sigma": 0.0, "age_years": 9, "initial_revenue": 1000000.0}
], "quotes": {"bid_level": 10, "ask_level": 50, "noise": 0.0}}"#;

/// Runs `synth` on a spec and returns (tempdir, data dir).
fn synth_data(spec: &str) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, spec).unwrap();
    let data = dir.path().join("data");
    let (code, _, err) = run_cli(&["synth", "--spec", p(&spec_path), "--out", p(&data)]);
    assert_eq!(code, 0, "{err}");
    (dir, data)
}

#[test]
fn validate_exit_codes() {
    let (dir, data) = synth_data(FLAT_SPEC);
    let out = dir.path().join("v");
    let cf = data.join("cashflows.csv");
    let assets = data.join("assets.csv");
    let (code, stdout, _) = run_cli(&["validate", "--cashflows", p(&cf), "--assets", p(&assets), "--out", p(&out)]);
    assert_eq!(code, 0);
    assert!(stdout.contains("accepted 6 of 6"));
    assert!(out.join("report.csv").exists());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["accepted"], 6);

    // A tolerance of zero with a bogus dollar age rejects everything.
    let bad_assets = dir.path().join("bad_assets.csv");
    fs::write(&bad_assets, fs::read_to_string(&assets).unwrap().replace(",12\n", ",20\n")).unwrap();
    let (code, _, _) = run_cli(&["validate", "--cashflows", p(&cf), "--assets", p(&bad_assets), "--out", p(&out)]);
    assert_eq!(code, 2);
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.contains("DOLLAR_AGE_MISMATCH"));

    let missing = dir.path().join("missing.csv");
    let (code, _, err) = run_cli(&["validate", "--cashflows", p(&missing), "--assets", p(&assets)]);
    assert_eq!(code, 1);
    assert!(err.contains("missing.csv"), "{err}");
}

#[test]
fn validate_reports_parse_line() {
    let dir = TempDir::new().unwrap();
    let cf = dir.path().join("cashflows.csv");
    let assets = dir.path().join("assets.csv");
    fs::write(&cf, "asset_id,period_start,period_months,amount\nA,2020-01,1,1.00\nA,2020-02,2,1.00\n").unwrap();
    fs::write(&assets, "asset_id,dollar_age\nA,1\n").unwrap();
    let (code, _, err) = run_cli(&["validate", "--cashflows", p(&cf), "--assets", p(&assets), "--out", p(dir.path())]);
    assert_eq!(code, 1);
    assert!(err.contains("cashflows.csv") && err.contains("line 3"), "{err}");
}

#[test]
fn validate_reports_negative_amounts_per_asset() {
    let dir = TempDir::new().unwrap();
    let fixture = filter_fixture();
    let cf = dir.path().join("cashflows.csv");
    let assets = dir.path().join("assets.csv");
    write_cashflows(&fixture, fs::File::create(&cf).unwrap()).unwrap();
    write_assets(&fixture, fs::File::create(&assets).unwrap()).unwrap();
    let out = dir.path().join("out");
    let (code, _, err) = run_cli(&["validate", "--cashflows", p(&cf), "--assets", p(&assets), "--out", p(&out)]);
    assert_eq!(code, 0, "{err}");
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(
        report,
        "asset_id,status,reason\nA_OK1,accepted,\nA_OK2,accepted,\nB_NEG,rejected,NEGATIVE_AMOUNT\n\
         C_GAP,rejected,GAP_IN_HISTORY\nD_SHORT,rejected,INSUFFICIENT_HISTORY\n\
         E_ZERO,rejected,ZERO_REVENUE_YEAR\nF_AGE,rejected,DOLLAR_AGE_MISMATCH\n"
    );
}

#[test]
fn curves_command() {
    let (dir, data) = synth_data(FLAT_SPEC);
    let out = dir.path().join("c");
    let cf = data.join("cashflows.csv");
    let assets = data.join("assets.csv");
    let curves = |age: &str| run_cli(&["curves", "--cashflows", p(&cf), "--assets", p(&assets), "--age", age, "--out", p(&out)]);
    let (code, _, err) = curves("1");
    assert_eq!(code, 0, "{err}");
    let surfaces = read_surface_csv(fs::File::open(out.join("surface_t1.csv")).unwrap()).unwrap();
    assert!(surfaces[0].iter_cells().all(|(_, _, s)| s == 1.0));
    assert_eq!(surfaces[0].covered_horizons(), 10);

    let (code, _, err) = curves("40");
    assert_eq!(code, 2);
    assert!(err.contains("cohort"), "{err}");
}

#[test]
fn curves_json_matches_mixed_population() {
    let (dir, data) = synth_data(MIXED_SPEC);
    let out = dir.path().join("c");
    let (code, _, err) = run_cli(&[
        "curves", "--cashflows", p(&data.join("cashflows.csv")), "--assets", p(&data.join("assets.csv")),
        "--age", "1", "--max-duration", "8", "--format", "json", "--out", p(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    let rows: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(out.join("surface_t1.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 24);
    for row in rows {
        let i = row["horizon"].as_i64().unwrap() as i32;
        let growth = match row["level"].as_f64().unwrap() as u32 {
            10 => 0.8,
            50 => 1.0,
            _ => 1.1,
        };
        let share = row["share"].as_f64().unwrap();
        assert!((share - f64::powi(growth, i)).abs() < 1e-9);
    }
}

fn write_surface(dir: &Path, shares: f64, horizons: u32) -> PathBuf {
    let path = dir.join("surface.csv");
    let mut text = String::from("base_age,horizon,level,share,cohort_size\n");
    for i in 1..=horizons {
        for l in [10, 50, 90] {
            text.push_str(&format!("1,{i},{l},{shares},5\n"));
        }
    }
    fs::write(&path, text).unwrap();
    path
}

fn read_multipliers(path: &Path) -> Vec<(u32, f64, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["base_age", "duration", "level", "multiplier"]);
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[1].parse().unwrap(), rec[2].parse().unwrap(), rec[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn multipliers_command() {
    let dir = TempDir::new().unwrap();
    let surface = write_surface(dir.path(), 1.0, 10);
    let out = dir.path().join("m");
    let (code, _, err) = run_cli(&["multipliers", "--surface", p(&surface), "--durations", "1-10", "--out", p(&out)]);
    assert_eq!(code, 0, "{err}");
    let rows = read_multipliers(&out.join("multipliers_t1.csv"));
    assert_eq!(rows.len(), 30);
    for (d, _, m) in rows {
        assert!((m - annuity_by_terms(0.10, d)).abs() < 5e-7, "d={d}");
    }

    let (code, _, _) = run_cli(&["multipliers", "--surface", p(&surface), "--rate", "0", "--out", p(&out)]);
    assert_eq!(code, 0);
    for (d, _, m) in read_multipliers(&out.join("multipliers_t1.csv")) {
        assert_eq!(m, f64::from(d));
    }

    let short = write_surface(dir.path(), 1.0, 4);
    let (code, _, err) = run_cli(&["multipliers", "--surface", p(&short), "--durations", "6", "--out", p(&out)]);
    assert_eq!(code, 2);
    assert!(err.contains("horizon 5"), "{err}");
}

#[test]
fn value_command() {
    let dir = TempDir::new().unwrap();
    let surface = write_surface(dir.path(), 1.0, 10);
    let (code, stdout, err) = run_cli(&["value", "--ltm", "10000", "--age", "1", "--duration", "10", "--surface", p(&surface)]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("1,10,50,6.144567,61445.67"), "{stdout}");

    let (code, stdout, _) = run_cli(&["value", "--ltm", "1", "--age", "1", "--duration", "3", "--surface", p(&surface), "--format", "json"]);
    assert_eq!(code, 0);
    let band: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    for level in band["levels"].as_array().unwrap() {
        assert_eq!(level["price"], level["multiplier"]);
    }

    let (code, _, _) = run_cli(&["value", "--ltm", "1000", "--age", "1", "--duration", "11", "--surface", p(&surface)]);
    assert_eq!(code, 2);
    let (code, _, _) = run_cli(&["value", "--ltm", "0", "--age", "1", "--duration", "3", "--surface", p(&surface)]);
    assert_eq!(code, 1);
}

#[test]
fn compare_command() {
    let (dir, data) = synth_data(MIXED_SPEC);
    let out = dir.path().join("cmp");
    let cf = data.join("cashflows.csv");
    let assets = data.join("assets.csv");
    let quotes = data.join("quotes.csv");
    let (code, _, err) = run_cli(&["compare", "--cashflows", p(&cf), "--assets", p(&assets), "--quotes", p(&quotes), "--format", "json", "--out", p(&out)]);
    assert_eq!(code, 0, "{err}");
    let rows: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(out.join("comparison.json")).unwrap()).unwrap();
    assert!(!rows.is_empty());
    for r in &rows {
        assert!(r["bid_gap_to_m10"].as_f64().unwrap().abs() < 1e-9);
        assert!(r["ask_gap_to_m50"].as_f64().unwrap().abs() < 1e-9);
    }

    // A duration-12 quote is filtered out for its duration.
    let long = dir.path().join("long.csv");
    let q = MarketQuote { asset_id: "S00000".into(), ltm: 100.0, best_bid: Some(300.0), ask: 400.0, duration_years: 12, dollar_age: 9.0 };
    let ok = MarketQuote { duration_years: 3, ..q.clone() };
    write_quotes(&[q, ok], fs::File::create(&long).unwrap()).unwrap();
    let (code, _, err) = run_cli(&["compare", "--cashflows", p(&cf), "--assets", p(&assets), "--quotes", p(&long), "--out", p(&out)]);
    assert_eq!(code, 0, "{err}");
    let rejected = fs::read_to_string(out.join("rejected_quotes.csv")).unwrap();
    assert_eq!(rejected, "asset_id,reason\nS00000,DURATION_TOO_LONG\n");
    for f in ["comparison.csv", "row_errors.csv", "plot_by_duration.csv", "plot_by_dollar_age.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let plot = fs::read_to_string(out.join("plot_by_duration.csv")).unwrap();
    assert!(plot.starts_with("axis_value,n,mean_bid_mult,mean_ask_mult,mean_m10,mean_m50,mean_m90\n3,1,"), "{plot}");

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "asset_id,ltm,best_bid,ask,duration_years,dollar_age\n").unwrap();
    let (code, _, _) = run_cli(&["compare", "--cashflows", p(&cf), "--assets", p(&assets), "--quotes", p(&empty), "--out", p(&out)]);
    assert_eq!(code, 2);
}

#[test]
fn synth_command() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, FLAT_SPEC.replace("\"count\": 6", "\"count\": 0")).unwrap();
    let (code, _, err) = run_cli(&["synth", "--spec", p(&spec), "--out", p(dir.path())]);
    assert_eq!(code, 1);
    assert!(err.contains("count"), "{err}");

    fs::write(&spec, FLAT_SPEC).unwrap();
    let out = dir.path().join("flat");
    assert_eq!(run_cli(&["synth", "--spec", p(&spec), "--out", p(&out)]).0, 0);
    let raw = catalog_dcf::ingest::load_raw_assets(
        fs::File::open(out.join("cashflows.csv")).unwrap(),
        fs::File::open(out.join("assets.csv")).unwrap(),
    )
    .unwrap();
    for a in &raw {
        let annual = catalog_dcf::ingest::annualize(&a.records).unwrap();
        assert!(annual.iter().all(|x| *x == dec("1200")));
    }

    let other = dir.path().join("reseeded");
    assert_eq!(run_cli(&["synth", "--spec", p(&spec), "--seed", "99", "--out", p(&other)]).0, 0);
    assert!(other.join("quotes.csv").exists());
}

#[test]
fn help_and_bad_flags() {
    assert_eq!(run_cli(&["--help"]).0, 0);
    assert_eq!(run_cli(&["frobnicate"]).0, 1);
    assert_eq!(run_cli(&["value", "--ltm", "x", "--age", "1", "--duration", "1"]).0, 1);
}

/// Every combination of {default, file, flag} for two settings.
#[test]
fn flag_precedence_matrix() {
    let dir = TempDir::new().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, r#"{"rate": 0.07, "min_cohort": 8, "output_format": "json"}"#).unwrap();
    let cfg = p(&cfg_path);

    let cases: Vec<(Vec<&str>, f64, usize, OutputFormat)> = vec![
        (vec![], 0.10, 5, OutputFormat::Csv),
        (vec!["--config", cfg], 0.07, 8, OutputFormat::Json),
        (vec!["--rate", "0.2"], 0.2, 5, OutputFormat::Csv),
        (vec!["--config", cfg, "--rate", "0.2"], 0.2, 8, OutputFormat::Json),
        (vec!["--config", cfg, "--min-cohort", "3"], 0.07, 3, OutputFormat::Json),
        (vec!["--config", cfg, "--format", "csv", "--rate", "0"], 0.0, 8, OutputFormat::Csv),
        (vec!["--min-cohort", "2", "--format", "json"], 0.10, 2, OutputFormat::Json),
    ];
    for (flags, rate, min_cohort, format) in cases {
        let mut args = vec!["catalog-dcf", "synth", "--spec", "unused.json"];
        args.extend(flags.iter().copied());
        let c = resolve_config(args).unwrap();
        assert_eq!((c.rate, c.min_cohort, c.output_format), (rate, min_cohort, format), "{flags:?}");
    }

    fs::write(&cfg_path, r#"{"rate": 0.07, "ratee": 1}"#).unwrap();
    assert!(resolve_config(["catalog-dcf", "--config", cfg, "synth", "--spec", "x"]).is_err());
    let (code, _, err) = run_cli(&["--config", cfg, "synth", "--spec", "x"]);
    assert_eq!(code, 1);
    assert!(err.contains("ratee"), "{err}");
}
