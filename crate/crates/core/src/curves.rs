//! Percentile revenue-share surfaces.
//!
//! For base age `t` and horizon `i`, every asset old enough to have been
//! observed at age `t + i` contributes the share `C_{t+i} / C_t`. The
//! surface holds chosen percentiles of those shares per horizon.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use rust_decimal::prelude::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_levels, Asset, AssetId, ShareSurface, DEFAULT_LEVELS, DEFAULT_MAX_DURATION};

pub const DEFAULT_MIN_COHORT: usize = 5;

/// The observed shares of every qualifying asset at one `(t, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub base_age: u32,
    pub horizon: u32,
    /// Aligned with `member_ids`.
    pub shares: Vec<f64>,
    pub member_ids: Vec<AssetId>,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }
}

/// `C_{t+i} / C_t` when the asset's dollar age reaches `t + i` and both
/// annual buckets exist.
pub fn observed_share(asset: &Asset, base_age: u32, horizon: u32) -> Option<f64> {
    if base_age < 1 || horizon < 1 {
        return None;
    }
    let target = base_age.checked_add(horizon)?;
    if asset.dollar_age < f64::from(target) {
        return None;
    }
    let base = asset.series.at_age(base_age)?;
    let later = asset.series.at_age(target)?;
    later.checked_div(base)?.to_f64()
}

/// Linear interpolation between closest ranks at position
/// `(n - 1) * level / 100` of the sorted values.
pub fn percentile(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("percentile of an empty set"));
    }
    if !(0.0..=100.0).contains(&level) {
        return Err(Error::domain(format!("percentile level {level} outside [0, 100]")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("percentile input contains a non-finite value"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, level))
}

fn percentile_sorted(sorted: &[f64], level: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * level / 100.0;
    let lo = h.floor() as usize;
    let frac = h - h.floor();
    if frac == 0.0 || lo + 1 >= sorted.len() {
        sorted[lo.min(sorted.len() - 1)]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

pub fn build_cohort(dataset: &[Asset], base_age: u32, horizon: u32) -> Cohort {
    let mut members: Vec<(&AssetId, f64)> = dataset
        .iter()
        .filter_map(|a| observed_share(a, base_age, horizon).map(|s| (&a.id, s)))
        .collect();
    members.sort_by(|a, b| a.0.cmp(b.0));
    Cohort {
        base_age,
        horizon,
        shares: members.iter().map(|m| m.1).collect(),
        member_ids: members.into_iter().map(|m| m.0.clone()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceParams {
    pub levels: Vec<f64>,
    pub max_horizon: u32,
    pub min_cohort: usize,
}

impl Default for SurfaceParams {
    fn default() -> Self {
        SurfaceParams {
            levels: DEFAULT_LEVELS.to_vec(),
            max_horizon: DEFAULT_MAX_DURATION,
            min_cohort: DEFAULT_MIN_COHORT,
        }
    }
}

pub fn build_surface(dataset: &[Asset], base_age: u32, params: &SurfaceParams) -> Result<ShareSurface> {
    validate_levels(&params.levels)?;
    if params.max_horizon < 1 {
        return Err(Error::domain("max horizon must be at least 1"));
    }
    if params.min_cohort < 1 {
        return Err(Error::domain("minimum cohort size must be at least 1"));
    }
    let per_horizon: Vec<(usize, Option<Vec<f64>>)> = (1..=params.max_horizon)
        .into_par_iter()
        .map(|i| {
            let cohort = build_cohort(dataset, base_age, i);
            let n = cohort.len();
            if n < params.min_cohort {
                return (n, None);
            }
            let mut sorted = cohort.shares;
            sorted.sort_by(f64::total_cmp);
            let row = params
                .levels
                .iter()
                .map(|p| percentile_sorted(&sorted, *p))
                .collect();
            (n, Some(row))
        })
        .collect();
    let (counts, cells) = per_horizon.into_iter().unzip();
    ShareSurface::new(base_age, params.levels.clone(), counts, cells)
}

/// Surfaces for several base ages, used to price quotes by dollar age.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SurfaceSet {
    surfaces: BTreeMap<u32, ShareSurface>,
}

/// Rounds a dollar age half up to an integer base age of at least 1.
pub fn base_age_for(dollar_age: f64) -> u32 {
    let t = (dollar_age + 0.5).floor();
    if t < 1.0 {
        1
    } else {
        t.min(f64::from(u32::MAX)) as u32
    }
}

impl SurfaceSet {
    /// Builds surfaces for base ages `1..=` the longest annual series,
    /// keeping those with at least one populated horizon.
    pub fn build(dataset: &[Asset], params: &SurfaceParams) -> Result<Self> {
        let oldest = dataset.iter().map(|a| a.series.len()).max().unwrap_or(0) as u32;
        let built: Vec<Result<ShareSurface>> = (1..=oldest)
            .into_par_iter()
            .map(|t| build_surface(dataset, t, params))
            .collect();
        let mut surfaces = BTreeMap::new();
        for s in built {
            let s = s?;
            if s.covered_horizons() > 0 {
                surfaces.insert(s.base_age(), s);
            }
        }
        Ok(SurfaceSet { surfaces })
    }

    pub fn from_surfaces(surfaces: impl IntoIterator<Item = ShareSurface>) -> Self {
        SurfaceSet {
            surfaces: surfaces.into_iter().map(|s| (s.base_age(), s)).collect(),
        }
    }

    pub fn get(&self, base_age: u32) -> Option<&ShareSurface> {
        self.surfaces.get(&base_age)
    }

    pub fn ages(&self) -> impl Iterator<Item = u32> + '_ {
        self.surfaces.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    /// Picks the surface for a quote: the dollar age rounded half up, moved
    /// to the nearest base age whose surface covers `duration` horizons.
    /// Ties go to the younger age.
    pub fn resolve(&self, dollar_age: f64, duration: u32) -> Option<&ShareSurface> {
        let target = i64::from(base_age_for(dollar_age));
        self.surfaces
            .values()
            .filter(|s| s.covered_horizons() >= duration)
            .min_by_key(|s| ((i64::from(s.base_age()) - target).abs(), s.base_age()))
    }
}

/// One serialized surface row. Horizons below the cohort threshold carry no
/// level or share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub base_age: u32,
    pub horizon: u32,
    pub level: Option<f64>,
    pub share: Option<f64>,
    pub cohort_size: usize,
}

pub fn surface_rows(surface: &ShareSurface) -> Vec<SurfaceRow> {
    let mut rows = Vec::new();
    for i in 1..=surface.max_horizon() {
        let n = surface.count(i).unwrap_or(0);
        match surface.row(i) {
            Some(shares) => rows.extend(surface.levels().iter().zip(shares).map(|(l, s)| SurfaceRow {
                base_age: surface.base_age(),
                horizon: i,
                level: Some(*l),
                share: Some(*s),
                cohort_size: n,
            })),
            None => rows.push(SurfaceRow {
                base_age: surface.base_age(),
                horizon: i,
                level: None,
                share: None,
                cohort_size: n,
            }),
        }
    }
    rows
}

/// Rebuilds a surface from rows in canonical order.
pub fn surface_from_rows(rows: &[SurfaceRow]) -> Result<ShareSurface> {
    let first = rows.first().ok_or_else(|| Error::domain("surface has no rows"))?;
    let base_age = first.base_age;
    let mut levels: Vec<f64> = Vec::new();
    for l in rows.iter().filter_map(|r| r.level) {
        if !levels.contains(&l) {
            levels.push(l);
        }
    }
    levels.sort_by(f64::total_cmp);
    if levels.is_empty() {
        return Err(Error::domain("surface has no share cells"));
    }
    let max_horizon = rows.iter().map(|r| r.horizon).max().unwrap_or(0) as usize;
    let mut counts = vec![0; max_horizon];
    let mut cells: Vec<Option<Vec<f64>>> = vec![None; max_horizon];
    let mut seen = vec![false; max_horizon];
    for r in rows {
        if r.base_age != base_age {
            return Err(Error::domain("surface rows mix base ages"));
        }
        let idx = (r.horizon as usize)
            .checked_sub(1)
            .ok_or_else(|| Error::domain("horizon must be at least 1"))?;
        counts[idx] = r.cohort_size;
        seen[idx] = true;
        match (r.level, r.share) {
            (Some(l), Some(s)) => {
                let p = levels.iter().position(|x| *x == l).expect("level collected above");
                cells[idx].get_or_insert_with(|| vec![f64::NAN; levels.len()])[p] = s;
            }
            (None, None) => {}
            _ => return Err(Error::domain(format!("horizon {} has a level without a share", r.horizon))),
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::domain(format!("surface is missing horizon {}", i + 1)));
    }
    ShareSurface::new(base_age, levels, counts, cells)
}

pub const SURFACE_HEADER: [&str; 5] = ["base_age", "horizon", "level", "share", "cohort_size"];

/// CSV form; shares printed with six fractional digits.
pub fn write_surface_csv<W: Write>(surfaces: &[&ShareSurface], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SURFACE_HEADER)?;
    for s in surfaces {
        for r in surface_rows(s) {
            w.write_record([
                r.base_age.to_string(),
                r.horizon.to_string(),
                r.level.map(|l| l.to_string()).unwrap_or_default(),
                r.share.map(|s| format!("{s:.6}")).unwrap_or_default(),
                r.cohort_size.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// JSON form, an array of rows at full precision.
pub fn write_surface_json<W: Write>(surfaces: &[&ShareSurface], out: W) -> Result<()> {
    let rows: Vec<SurfaceRow> = surfaces.iter().flat_map(|s| surface_rows(s)).collect();
    serde_json::to_writer_pretty(out, &rows)?;
    Ok(())
}

fn split_by_age(rows: Vec<SurfaceRow>) -> Result<Vec<ShareSurface>> {
    let mut by_age: BTreeMap<u32, Vec<SurfaceRow>> = BTreeMap::new();
    for r in rows {
        by_age.entry(r.base_age).or_default().push(r);
    }
    by_age.values().map(|r| surface_from_rows(r)).collect()
}

/// Reads one or more surfaces from the CSV form.
pub fn read_surface_csv<R: Read>(input: R) -> Result<Vec<ShareSurface>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers()?;
    if header.iter().ne(SURFACE_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{}'", SURFACE_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |field: &str| Error::Parse {
            line,
            message: format!("invalid {field}"),
        };
        let opt = |s: &str, field: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| err(field))
            }
        };
        if rec.len() != 5 {
            return Err(err("row length"));
        }
        rows.push(SurfaceRow {
            base_age: rec[0].parse().map_err(|_| err("base_age"))?,
            horizon: rec[1].parse().map_err(|_| err("horizon"))?,
            level: opt(&rec[2], "level")?,
            share: opt(&rec[3], "share")?,
            cohort_size: rec[4].parse().map_err(|_| err("cohort_size"))?,
        });
    }
    split_by_age(rows)
}

pub fn read_surface_json<R: Read>(input: R) -> Result<Vec<ShareSurface>> {
    let rows: Vec<SurfaceRow> = serde_json::from_reader(input)?;
    split_by_age(rows)
}
