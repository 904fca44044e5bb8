//! The `catalog-dcf` command line. [`run`] drives every subcommand and
//! returns the process exit code, so the binary itself stays trivial.
//!
//! Exit codes: 0 success, 1 usage/I-O/parse failure, 2 ran but produced
//! nothing usable (no accepted assets, no cohort, missing horizons, ...).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Config, ConfigLayer, OutputFormat};
use crate::curves::{build_surface, read_surface_csv, read_surface_json, write_surface_csv, write_surface_json, SurfaceSet};
use crate::error::Error;
use crate::ingest::{build_dataset, load_raw_assets, write_assets, write_cashflows};
use crate::market::{
    aggregate_plot_data, compare, filter_quotes, parse_quotes, write_comparison_csv, write_plot_csv,
    write_quotes, write_rejected_quotes_csv, write_row_errors_csv, PlotAxis,
};
use crate::model::{multiplier_table, price, Asset, MultiplierTable, ShareSurface};
use crate::synth::{gen_population, gen_quotes, PopulationSpec};

#[derive(Debug, Parser)]
#[command(name = "catalog-dcf", version, about = "Royalty catalog multipliers from percentile revenue curves")]
struct Cli {
    /// Flat JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file format.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Annual discount rate (default 0.10).
    #[arg(long, global = true)]
    rate: Option<f64>,
    /// Comma-separated percentile levels, e.g. 10,50,90.
    #[arg(long, global = true, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    /// Dollar-age tolerance as a fraction of the oldest cashflow age.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Annual revenue at or below this counts as a zero year.
    #[arg(long, global = true)]
    zero_floor: Option<f64>,
    /// Smallest cohort that yields a surface cell (default 5).
    #[arg(long, global = true)]
    min_cohort: Option<usize>,
    /// Longest horizon or duration in years (default 10).
    #[arg(long, global = true)]
    max_duration: Option<u32>,
    /// Quotes with bid/ask below this are dropped (default 0.5).
    #[arg(long, global = true)]
    min_bid_ask_ratio: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Cashflow records CSV.
    #[arg(long)]
    cashflows: PathBuf,
    /// Asset metadata CSV.
    #[arg(long)]
    assets: PathBuf,
}

#[derive(Debug, Args)]
struct OptionalDataArgs {
    /// Cashflow records CSV.
    #[arg(long, requires = "assets")]
    cashflows: Option<PathBuf>,
    /// Asset metadata CSV.
    #[arg(long, requires = "cashflows")]
    assets: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Annualize and filter the raw data; write the acceptance report.
    Validate {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Build the percentile share surface for one base age.
    Curves {
        #[command(flatten)]
        data: DataArgs,
        /// Base age in years.
        #[arg(long)]
        age: u32,
    },
    /// Multiplier table for one base age, from a surface file or the data.
    Multipliers {
        /// Surface file written by `curves` (CSV or JSON).
        #[arg(long, conflicts_with_all = ["cashflows", "assets"])]
        surface: Option<PathBuf>,
        #[command(flatten)]
        data: OptionalDataArgs,
        /// Base age; required with data, selects a surface from a file.
        #[arg(long)]
        age: Option<u32>,
        /// Largest duration, as `N`, `1-N` or `1..N`.
        #[arg(long)]
        durations: Option<String>,
    },
    /// Price band for one asset.
    Value {
        /// Last-twelve-months revenue.
        #[arg(long, allow_negative_numbers = true)]
        ltm: f64,
        /// Dollar age, rounded half up to a base age.
        #[arg(long)]
        age: f64,
        /// Valuation horizon in years.
        #[arg(long)]
        duration: u32,
        /// Surface file written by `curves` (CSV or JSON).
        #[arg(long, conflicts_with_all = ["cashflows", "assets"])]
        surface: Option<PathBuf>,
        #[command(flatten)]
        data: OptionalDataArgs,
    },
    /// Compare market quotes with the model bands.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        /// Market quotes CSV.
        #[arg(long)]
        quotes: PathBuf,
    },
    /// Generate a synthetic dataset from a population spec.
    Synth {
        /// Population spec JSON.
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: 1, message: msg.into() }
    }

    fn empty(msg: impl Into<String>) -> Self {
        Failure { code: 2, message: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::MissingCell { .. } => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn flags_layer(cli: &Cli) -> ConfigLayer {
    ConfigLayer {
        rate: cli.rate,
        percentile_levels: cli.levels.clone(),
        dollar_age_tolerance: cli.tolerance,
        zero_floor: cli.zero_floor,
        min_cohort: cli.min_cohort,
        max_duration: cli.max_duration,
        min_bid_ask_ratio: cli.min_bid_ask_ratio,
        output_format: cli.format,
    }
}

/// Resolves the effective configuration for an argument list without
/// running a command.
pub fn resolve_config<I, T>(args: I) -> crate::Result<Config>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    config_for(&cli)
}

fn config_for(cli: &Cli) -> crate::Result<Config> {
    let file = cli.config.as_deref().map(ConfigLayer::from_file).transpose()?;
    Config::resolve(file.as_ref(), &flags_layer(cli))
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> CmdResult {
    let cfg = config_for(&cli)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    match &cli.command {
        Command::Validate { data } => cmd_validate(data, &cfg, &out, stdout),
        Command::Curves { data, age } => cmd_curves(data, *age, &cfg, &out, stdout),
        Command::Multipliers { surface, data, age, durations } => {
            cmd_multipliers(surface.as_deref(), data, *age, durations.as_deref(), &cfg, &out, stdout)
        }
        Command::Value { ltm, age, duration, surface, data } => {
            cmd_value(*ltm, *age, *duration, surface.as_deref(), data, &cfg, stdout)
        }
        Command::Compare { data, quotes } => cmd_compare(data, quotes, &cfg, &out, stdout),
        Command::Synth { spec, seed } => cmd_synth(spec, *seed, &cfg, &out, stdout),
    }
}

fn open(path: &Path) -> crate::Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::from(e).in_file(path))
}

fn create(dir: &Path, name: &str) -> crate::Result<BufWriter<File>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::from(e).in_file(path))
}

fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> crate::Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn load_dataset(cashflows: &Path, assets: &Path, cfg: &Config) -> crate::Result<(Vec<Asset>, crate::ingest::FilterReport)> {
    let raw = load_raw_assets(open(cashflows)?, open(assets)?).map_err(|e| match e {
        Error::Parse { .. } | Error::NegativeAmount { .. } | Error::UnknownFrequency { .. } | Error::DuplicatePeriod { .. } => {
            e.in_file(cashflows)
        }
        other => other,
    })?;
    Ok(build_dataset(&raw, &cfg.ingest()))
}

fn accepted_dataset(cashflows: &Path, assets: &Path, cfg: &Config) -> std::result::Result<Vec<Asset>, Failure> {
    let (assets, _) = load_dataset(cashflows, assets, cfg)?;
    if assets.is_empty() {
        return Err(Failure::empty("no assets passed the data filters"));
    }
    Ok(assets)
}

fn cmd_validate(data: &DataArgs, cfg: &Config, out: &Path, stdout: &mut dyn Write) -> CmdResult {
    let (accepted, report) = load_dataset(&data.cashflows, &data.assets, cfg)?;
    let mut w = create(out, "report.csv")?;
    report.write_csv(&mut w)?;
    w.flush().map_err(Error::from)?;
    let summary = report.summary();
    write_json(out, "report_summary.json", &summary)?;
    let _ = writeln!(stdout, "accepted {} of {} assets", summary.accepted, summary.total);
    if accepted.is_empty() {
        return Err(Failure::empty("no assets passed the data filters"));
    }
    Ok(())
}

fn write_surfaces(surfaces: &[&ShareSurface], cfg: &Config, out: &Path, name: &str) -> crate::Result<()> {
    let file = format!("{name}.{}", cfg.output_format.extension());
    let mut w = create(out, &file)?;
    match cfg.output_format {
        OutputFormat::Csv => write_surface_csv(surfaces, &mut w)?,
        OutputFormat::Json => write_surface_json(surfaces, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn cmd_curves(data: &DataArgs, age: u32, cfg: &Config, out: &Path, stdout: &mut dyn Write) -> CmdResult {
    if age < 1 {
        return Err(Failure::usage("--age must be at least 1"));
    }
    let assets = accepted_dataset(&data.cashflows, &data.assets, cfg)?;
    let surface = build_surface(&assets, age, &cfg.surface_params())?;
    if surface.iter_cells().next().is_none() {
        return Err(Failure::empty(format!(
            "no horizon at base age {age} has a cohort of at least {} assets",
            cfg.min_cohort
        )));
    }
    write_surfaces(&[&surface], cfg, out, &format!("surface_t{age}"))?;
    let _ = writeln!(
        stdout,
        "base age {age}: {} of {} horizons populated",
        surface.covered_horizons(),
        surface.max_horizon()
    );
    Ok(())
}

fn read_surfaces(path: &Path) -> crate::Result<Vec<ShareSurface>> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let reader = open(path)?;
    let parsed = if is_json { read_surface_json(reader) } else { read_surface_csv(reader) };
    parsed.map_err(|e| e.in_file(path))
}

fn parse_durations(spec: &str) -> std::result::Result<u32, Failure> {
    let spec = spec.trim();
    let upper = spec
        .strip_prefix("1..=")
        .or_else(|| spec.strip_prefix("1.."))
        .or_else(|| spec.strip_prefix("1-"))
        .unwrap_or(spec);
    match upper.parse::<u32>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(Failure::usage(format!(
            "--durations expects N, 1-N or 1..N with N >= 1, got '{spec}'"
        ))),
    }
}

#[derive(Serialize)]
struct MultiplierRow {
    base_age: u32,
    duration: u32,
    level: f64,
    multiplier: f64,
}

fn write_table(table: &MultiplierTable, cfg: &Config, out: &Path) -> crate::Result<()> {
    let name = format!("multipliers_t{}.{}", table.base_age(), cfg.output_format.extension());
    let rows: Vec<MultiplierRow> = table
        .iter_entries()
        .map(|(duration, level, multiplier)| MultiplierRow {
            base_age: table.base_age(),
            duration,
            level,
            multiplier,
        })
        .collect();
    match cfg.output_format {
        OutputFormat::Json => write_json(out, &name, &rows),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(create(out, &name)?);
            w.write_record(["base_age", "duration", "level", "multiplier"])?;
            for r in &rows {
                w.write_record([
                    r.base_age.to_string(),
                    r.duration.to_string(),
                    r.level.to_string(),
                    format!("{:.6}", r.multiplier),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn cmd_multipliers(
    surface_path: Option<&Path>,
    data: &OptionalDataArgs,
    age: Option<u32>,
    durations: Option<&str>,
    cfg: &Config,
    out: &Path,
    stdout: &mut dyn Write,
) -> CmdResult {
    let max_duration = durations.map(parse_durations).transpose()?.unwrap_or(cfg.max_duration);
    let surface = match (surface_path, &data.cashflows, &data.assets) {
        (Some(path), _, _) => {
            let surfaces = read_surfaces(path)?;
            match age {
                Some(t) => surfaces.into_iter().find(|s| s.base_age() == t).ok_or_else(|| {
                    Failure::empty(format!("{} has no surface for base age {t}", path.display()))
                })?,
                None if surfaces.len() == 1 => surfaces.into_iter().next().expect("one surface"),
                None => return Err(Failure::usage("surface file holds several base ages; pass --age")),
            }
        }
        (None, Some(cashflows), Some(assets)) => {
            let t = age.ok_or_else(|| Failure::usage("--age is required when building from data"))?;
            let params = crate::curves::SurfaceParams {
                max_horizon: max_duration.max(cfg.max_duration),
                ..cfg.surface_params()
            };
            build_surface(&accepted_dataset(cashflows, assets, cfg)?, t, &params)?
        }
        _ => return Err(Failure::usage("pass --surface or both --cashflows and --assets")),
    };
    let table = multiplier_table(&surface, cfg.rate, max_duration)?;
    write_table(&table, cfg, out)?;
    let _ = writeln!(
        stdout,
        "base age {}: multipliers for durations 1..{} at rate {}",
        table.base_age(),
        max_duration,
        cfg.rate
    );
    Ok(())
}

#[derive(Serialize)]
struct ValueBand {
    base_age: u32,
    duration: u32,
    rate: f64,
    ltm: f64,
    levels: Vec<ValueLevel>,
}

#[derive(Serialize)]
struct ValueLevel {
    level: f64,
    multiplier: f64,
    price: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_value(
    ltm: f64,
    age: f64,
    duration: u32,
    surface_path: Option<&Path>,
    data: &OptionalDataArgs,
    cfg: &Config,
    stdout: &mut dyn Write,
) -> CmdResult {
    if !(ltm.is_finite() && ltm > 0.0) {
        return Err(Failure::usage(format!("--ltm must be positive, got {ltm}")));
    }
    if !(age.is_finite() && age > 0.0) {
        return Err(Failure::usage(format!("--age must be positive, got {age}")));
    }
    if duration < 1 {
        return Err(Failure::usage("--duration must be at least 1"));
    }
    let set = match (surface_path, &data.cashflows, &data.assets) {
        (Some(path), _, _) => SurfaceSet::from_surfaces(read_surfaces(path)?),
        (None, Some(cashflows), Some(assets)) => {
            let params = crate::curves::SurfaceParams {
                max_horizon: duration.max(cfg.max_duration),
                ..cfg.surface_params()
            };
            SurfaceSet::build(&accepted_dataset(cashflows, assets, cfg)?, &params)?
        }
        _ => return Err(Failure::usage("pass --surface or both --cashflows and --assets")),
    };
    let surface = set.resolve(age, duration).ok_or_else(|| {
        Failure::empty(format!("no surface covers duration {duration} near dollar age {age}"))
    })?;
    let table = multiplier_table(surface, cfg.rate, duration)?;
    let row = table.row(duration).expect("table covers the duration");
    let band = ValueBand {
        base_age: surface.base_age(),
        duration,
        rate: cfg.rate,
        ltm,
        levels: table
            .levels()
            .iter()
            .zip(row)
            .map(|(level, m)| Ok(ValueLevel { level: *level, multiplier: *m, price: price(*m, ltm)? }))
            .collect::<crate::Result<_>>()?,
    };
    let io = |e: std::io::Error| Failure::from(Error::from(e));
    match cfg.output_format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *stdout, &band).map_err(Error::from)?;
            writeln!(stdout).map_err(io)?;
        }
        OutputFormat::Csv => {
            writeln!(stdout, "base_age,duration,level,multiplier,price").map_err(io)?;
            for l in &band.levels {
                writeln!(
                    stdout,
                    "{},{},{},{:.6},{:.2}",
                    band.base_age, duration, l.level, l.multiplier, l.price
                )
                .map_err(io)?;
            }
        }
    }
    Ok(())
}

fn cmd_compare(data: &DataArgs, quotes_path: &Path, cfg: &Config, out: &Path, stdout: &mut dyn Write) -> CmdResult {
    let quotes = parse_quotes(open(quotes_path)?).map_err(|e| e.in_file(quotes_path))?;
    if quotes.is_empty() {
        return Err(Failure::empty(format!("{} holds no quotes", quotes_path.display())));
    }
    let assets = accepted_dataset(&data.cashflows, &data.assets, cfg)?;
    let surfaces = SurfaceSet::build(&assets, &cfg.surface_params())?;
    let (accepted, rejected) = filter_quotes(&quotes, cfg.max_duration, cfg.min_bid_ask_ratio);
    let (rows, errors) = compare(&accepted, &surfaces, cfg.rate);
    let by_duration = aggregate_plot_data(&rows, PlotAxis::Duration);
    let by_age = aggregate_plot_data(&rows, PlotAxis::DollarAge);

    match cfg.output_format {
        OutputFormat::Csv => {
            let mut w = create(out, "comparison.csv")?;
            write_comparison_csv(&rows, &mut w)?;
            let mut w = create(out, "rejected_quotes.csv")?;
            write_rejected_quotes_csv(&rejected, &mut w)?;
            let mut w = create(out, "row_errors.csv")?;
            write_row_errors_csv(&errors, &mut w)?;
            let mut w = create(out, "plot_by_duration.csv")?;
            write_plot_csv(&by_duration, &mut w)?;
            let mut w = create(out, "plot_by_dollar_age.csv")?;
            write_plot_csv(&by_age, &mut w)?;
        }
        OutputFormat::Json => {
            write_json(out, "comparison.json", &rows)?;
            write_json(out, "rejected_quotes.json", &rejected)?;
            write_json(out, "row_errors.json", &errors)?;
            write_json(out, "plot_by_duration.json", &by_duration)?;
            write_json(out, "plot_by_dollar_age.json", &by_age)?;
        }
    }
    let _ = writeln!(
        stdout,
        "{} quotes: {} compared, {} filtered out, {} without a model band",
        quotes.len(),
        rows.len(),
        rejected.len(),
        errors.len()
    );
    if rows.is_empty() {
        return Err(Failure::empty("no quote could be compared"));
    }
    Ok(())
}

fn cmd_synth(spec_path: &Path, seed: Option<u64>, cfg: &Config, out: &Path, stdout: &mut dyn Write) -> CmdResult {
    let text = std::fs::read_to_string(spec_path).map_err(|e| Error::from(e).in_file(spec_path))?;
    let mut spec = PopulationSpec::from_json(&text).map_err(|e| e.in_file(spec_path))?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let raw = gen_population(&spec)?;
    let (assets, _) = build_dataset(&raw, &cfg.ingest());
    let surfaces = SurfaceSet::build(&assets, &cfg.surface_params())?;
    let params = spec.quotes.clone().unwrap_or_default();
    let quotes = gen_quotes(&assets, &surfaces, cfg.rate, &params, spec.seed)?;

    let mut w = create(out, "cashflows.csv")?;
    write_cashflows(&raw, &mut w)?;
    let mut w = create(out, "assets.csv")?;
    write_assets(&raw, &mut w)?;
    let mut w = create(out, "quotes.csv")?;
    write_quotes(&quotes, &mut w)?;
    let _ = writeln!(
        stdout,
        "generated {} assets and {} quotes into {}",
        raw.len(),
        quotes.len(),
        out.display()
    );
    Ok(())
}
