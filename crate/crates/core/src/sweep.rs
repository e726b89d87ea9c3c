//! Experiment sweeps: grid expansion, per-point seeds, the worker pool and
//! the CSV/JSON artifacts, plus the schema check over an output directory.
//!
//! Output layout:
//!
//! ```text
//! out/
//!   manifest.json
//!   fundamental.csv
//!   trains.csv
//!   series/<point>.csv
//!   flow_density.svg, speed_density.svg, trains.svg, flow_series.svg
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RawConfig, SweepConfig};
use crate::engine;
use crate::error::HarnessError;
use crate::metrics::{FundamentalPoint, StepRecord, TrainHistogram};
use crate::params::{Scenario, SimParams};
use crate::svg;

pub const MANIFEST_VERSION: u32 = 1;

pub const FUNDAMENTAL_HEADER: [&str; 6] = [
    "scenario",
    "p_mav",
    "density_veh_per_km_per_lane",
    "seed",
    "mean_flow_veh_per_h_per_lane",
    "mean_speed_m_per_s",
];
pub const TRAINS_HEADER: [&str; 6] = ["scenario", "p_mav", "density", "seed", "size", "count"];
pub const SERIES_HEADER: [&str; 5] = [
    "t",
    "flow_veh_per_h_per_lane",
    "mean_speed_m_per_s",
    "frac_independent_or_docking",
    "frac_collective",
];

/// Stable per-point seed: the first 8 bytes (little endian) of
/// `SHA-256("{master}|{density}|{p_mav}|{scenario}|{replicate}")`.
/// Floats use Rust's shortest round-trip formatting.
pub fn derive_seed(master: u64, density: f64, p_mav: f64, scenario: Scenario, replicate: u32) -> u64 {
    let key = format!("{master}|{density}|{p_mav}|{scenario}|{replicate}");
    let digest = Sha256::digest(key.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// One run of the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub scenario: Scenario,
    pub p_mav: f64,
    pub density: f64,
    pub replicate: u32,
    pub seed: u64,
}

impl SweepPoint {
    /// File stem of the series CSV.
    pub fn name(&self) -> String {
        format!(
            "{}_p{}_d{}_r{}",
            self.scenario, self.p_mav, self.density, self.replicate
        )
    }

    pub fn params(&self, base: &SimParams) -> SimParams {
        SimParams {
            scenario: self.scenario,
            p_mav: self.p_mav,
            density: self.density,
            seed: self.seed,
            ..base.clone()
        }
    }
}

/// Expands the grid in (scenario, p_mav, density, replicate) order.
pub fn grid(config: &SweepConfig) -> Vec<SweepPoint> {
    let mut out = Vec::with_capacity(config.run_count());
    for &scenario in &config.scenarios {
        for &p_mav in &config.p_mavs {
            for &density in &config.densities {
                for replicate in 0..config.seeds_per_point {
                    out.push(SweepPoint {
                        scenario,
                        p_mav,
                        density,
                        replicate,
                        seed: derive_seed(config.master_seed(), density, p_mav, scenario, replicate),
                    });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointStatus {
    #[serde(flatten)]
    pub point: SweepPoint,
    pub series: String,
    /// `"ok"` or the error message.
    pub status: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool: String,
    pub version: String,
    pub config: RawConfig,
    pub points: Vec<PointStatus>,
}

/// Result of one finished point.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub point: SweepPoint,
    pub summary: FundamentalPoint,
    pub histogram: TrainHistogram,
}

/// Everything a sweep produced, in grid order.
#[derive(Clone, Debug)]
pub struct SweepReport {
    pub dir: PathBuf,
    pub results: Vec<PointResult>,
    pub failures: Vec<(SweepPoint, String)>,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    pub force: bool,
    /// Overrides `config.workers`.
    pub workers: Option<usize>,
    /// Print one line per finished point to stderr.
    pub progress: bool,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::io(path, e)
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Csv {
        path: path.to_path_buf(),
        source: e,
    }
}

/// Writes `t,flow,speed,fractions` rows.
pub fn write_series(path: &Path, series: &[StepRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(SERIES_HEADER).map_err(csv_err(path))?;
    for r in series {
        w.write_record([
            r.t.to_string(),
            r.flow.to_string(),
            r.mean_speed.to_string(),
            r.frac_independent_or_docking.to_string(),
            r.frac_collective.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn run_point(point: &SweepPoint, base: &SimParams, series_dir: &Path) -> Result<PointResult, String> {
    let params = point.params(base);
    let out = engine::run(&params).map_err(|e| e.to_string())?;
    let path = series_dir.join(format!("{}.csv", point.name()));
    write_series(&path, &out.series).map_err(|e| e.to_string())?;
    Ok(PointResult {
        point: point.clone(),
        summary: out.summary,
        histogram: out.histogram,
    })
}

fn prepare_dir(dir: &Path, force: bool) -> Result<(), HarnessError> {
    if dir.exists() {
        let occupied = fs::read_dir(dir).map_err(io_err(dir))?.next().is_some();
        if occupied && !force {
            return Err(HarnessError::OutputExists(dir.to_path_buf()));
        }
        let series = dir.join("series");
        if series.exists() {
            fs::remove_dir_all(&series).map_err(io_err(&series))?;
        }
    }
    let series = dir.join("series");
    fs::create_dir_all(&series).map_err(io_err(&series))
}

/// Worker count: `SIM_WORKERS`, then the explicit option, then the config.
pub fn resolve_workers(option: Option<usize>, config: &SweepConfig) -> Option<usize> {
    std::env::var("SIM_WORKERS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .or(option)
        .or(config.workers)
}

/// Runs every grid point and writes all artifacts into `dir`.
///
/// Points that fail are listed in the manifest and the call returns
/// [`HarnessError::PointsFailed`] after everything else was written.
pub fn run_sweep(config: &SweepConfig, dir: &Path, options: &SweepOptions) -> Result<SweepReport, HarnessError> {
    prepare_dir(dir, options.force)?;
    let series_dir = dir.join("series");
    let points = grid(config);
    let total = points.len();
    let done = AtomicUsize::new(0);

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = resolve_workers(options.workers, config) {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().expect("thread pool");
    let outcomes: Vec<Result<PointResult, String>> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let r = run_point(p, &config.base, &series_dir);
                if options.progress {
                    let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                    let status = r.as_ref().map_or_else(|e| format!("FAILED: {e}"), |_| "ok".into());
                    eprintln!("[{k}/{total}] {} {status}", p.name());
                }
                r
            })
            .collect()
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    let mut statuses = Vec::new();
    for (point, outcome) in points.into_iter().zip(outcomes) {
        let status = match &outcome {
            Ok(_) => "ok".to_string(),
            Err(e) => e.clone(),
        };
        statuses.push(PointStatus {
            series: format!("series/{}.csv", point.name()),
            point: point.clone(),
            status,
        });
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => failures.push((point, e)),
        }
    }

    write_fundamental(&dir.join("fundamental.csv"), &results)?;
    write_trains(&dir.join("trains.csv"), &results)?;
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.to_physical(),
        points: statuses,
    };
    let manifest_path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::Json {
        path: manifest_path.clone(),
        source: e,
    })?;
    fs::write(&manifest_path, text + "\n").map_err(io_err(&manifest_path))?;
    render_dir(dir)?;

    if !failures.is_empty() {
        return Err(HarnessError::PointsFailed {
            failed: failures.len(),
            total,
        });
    }
    Ok(SweepReport {
        dir: dir.to_path_buf(),
        results,
        failures,
    })
}

fn write_fundamental(path: &Path, results: &[PointResult]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(FUNDAMENTAL_HEADER).map_err(csv_err(path))?;
    for r in results {
        let s = &r.summary;
        w.write_record([
            r.point.scenario.to_string(),
            r.point.p_mav.to_string(),
            s.density.to_string(),
            r.point.seed.to_string(),
            s.mean_flow.to_string(),
            s.mean_speed.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_trains(path: &Path, results: &[PointResult]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(TRAINS_HEADER).map_err(csv_err(path))?;
    for r in results {
        for size in 1..=r.histogram.l_max() {
            w.write_record([
                r.point.scenario.to_string(),
                r.point.p_mav.to_string(),
                r.point.density.to_string(),
                r.point.seed.to_string(),
                size.to_string(),
                r.histogram.count(size).to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// One row of `fundamental.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalRow {
    pub scenario: Scenario,
    pub p_mav: f64,
    pub density_veh_per_km_per_lane: f64,
    pub seed: u64,
    pub mean_flow_veh_per_h_per_lane: f64,
    pub mean_speed_m_per_s: f64,
}

/// One row of `trains.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub scenario: Scenario,
    pub p_mav: f64,
    pub density: f64,
    pub seed: u64,
    pub size: usize,
    pub count: u64,
}

/// One row of a series CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: u32,
    pub flow_veh_per_h_per_lane: f64,
    pub mean_speed_m_per_s: f64,
    pub frac_independent_or_docking: f64,
    pub frac_collective: f64,
}

/// Reads a CSV whose header must equal `header` exactly.
pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let found = r.headers().map_err(csv_err(path))?.clone();
    for (i, want) in header.iter().enumerate() {
        match found.get(i) {
            Some(got) if got == *want => {}
            Some(got) => {
                return Err(HarnessError::Schema {
                    path: path.to_path_buf(),
                    column: want.to_string(),
                    reason: format!("expected `{want}` as column {}, found `{got}`", i + 1),
                })
            }
            None => {
                return Err(HarnessError::Schema {
                    path: path.to_path_buf(),
                    column: want.to_string(),
                    reason: "missing column".into(),
                })
            }
        }
    }
    if found.len() > header.len() {
        return Err(HarnessError::Schema {
            path: path.to_path_buf(),
            column: found[header.len()].to_string(),
            reason: "unexpected extra column".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        rows.push(rec.map_err(|e: csv::Error| {
            let column = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err
                    .field()
                    .and_then(|f| header.get(f as usize))
                    .map_or_else(|| "?".to_string(), |c| c.to_string()),
                _ => "?".to_string(),
            };
            HarnessError::Schema {
                path: path.to_path_buf(),
                column,
                reason: format!("row {}: {e}", i + 2),
            }
        })?);
    }
    Ok(rows)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, HarnessError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Json { path, source: e })
}

/// Outcome of [`check_dir`].
#[derive(Clone, Debug, Default)]
pub struct CheckReport {
    pub files: usize,
    pub rows: usize,
    pub problems: Vec<String>,
}

impl CheckReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Re-validates an output directory: CSV schemas, the `q = k·v̄`
/// identity, histogram module counts, series length and composition
/// fractions, and that every manifest point has its rows and seed.
pub fn check_dir(dir: &Path) -> Result<CheckReport, HarnessError> {
    let manifest = read_manifest(dir)?;
    let config = RawConfig::resolve(&manifest.config).map_err(|source| HarnessError::ConfigFile {
        path: dir.join("manifest.json"),
        source,
    })?;
    let mut report = CheckReport {
        files: 1,
        ..CheckReport::default()
    };
    let mut problem = |s: String| report.problems.push(s);

    let fundamental: Vec<FundamentalRow> = read_csv(&dir.join("fundamental.csv"), &FUNDAMENTAL_HEADER)?;
    let trains: Vec<TrainRow> = read_csv(&dir.join("trains.csv"), &TRAINS_HEADER)?;
    let mut files = 3;
    let mut rows = fundamental.len() + trains.len();

    let expected = grid(&config);
    if expected.len() != manifest.points.len() {
        problem(format!(
            "manifest lists {} points, config expands to {}",
            manifest.points.len(),
            expected.len()
        ));
    }
    let ok_points: Vec<&PointStatus> = manifest.points.iter().filter(|p| p.status == "ok").collect();
    for p in &manifest.points {
        if p.status != "ok" {
            problem(format!("{}: {}", p.point.name(), p.status));
        }
    }
    for (want, got) in expected.iter().zip(&manifest.points) {
        if *want != got.point {
            problem(format!(
                "{}: manifest point differs from the config grid",
                got.point.name()
            ));
        }
    }

    if fundamental.len() != ok_points.len() {
        problem(format!(
            "fundamental.csv has {} rows for {} completed points",
            fundamental.len(),
            ok_points.len()
        ));
    }
    let mut by_key: BTreeMap<(Scenario, u64, u64, u64), usize> = BTreeMap::new();
    for (i, row) in fundamental.iter().enumerate() {
        *by_key
            .entry((
                row.scenario,
                row.p_mav.to_bits(),
                row.density_veh_per_km_per_lane.to_bits(),
                row.seed,
            ))
            .or_default() += 1;
        let q = row.density_veh_per_km_per_lane * row.mean_speed_m_per_s * 3.6;
        if !close(row.mean_flow_veh_per_h_per_lane, q) {
            problem(format!(
                "fundamental.csv row {}: flow {} != density * speed * 3.6 = {q}",
                i + 2,
                row.mean_flow_veh_per_h_per_lane
            ));
        }
        if row.mean_speed_m_per_s < 0.0 || !(0.0..=1.0).contains(&row.p_mav) {
            problem(format!("fundamental.csv row {}: value out of range", i + 2));
        }
    }
    if let Some((k, n)) = by_key.iter().find(|(_, &n)| n > 1) {
        problem(format!("fundamental.csv: {n} rows for scenario {} seed {}", k.0, k.3));
    }

    let l_max = config.base.l_max;
    let samples = {
        let b = &config.base;
        (b.t_measure_start..=b.t_total)
            .filter(|t| (t - b.t_measure_start) % b.histogram_interval == 0)
            .count() as u64
    };
    let mut modules: BTreeMap<(Scenario, u64, u64, u64), u64> = BTreeMap::new();
    for (i, row) in trains.iter().enumerate() {
        if !(1..=l_max).contains(&row.size) {
            problem(format!(
                "trains.csv row {}: size {} outside 1..={l_max}",
                i + 2,
                row.size
            ));
        }
        *modules
            .entry((row.scenario, row.p_mav.to_bits(), row.density.to_bits(), row.seed))
            .or_default() += row.size as u64 * row.count;
    }
    for p in &ok_points {
        let params = p.point.params(&config.base);
        let key = (
            p.point.scenario,
            p.point.p_mav.to_bits(),
            p.point.density.to_bits(),
            p.point.seed,
        );
        let mav_count = (params.mavs_per_lane() * params.lanes) as u64;
        let got = modules.get(&key).copied().unwrap_or(0);
        if got != mav_count * samples {
            problem(format!(
                "trains.csv: {} accounts for {got} module samples, expected {}",
                p.point.name(),
                mav_count * samples
            ));
        }

        let path = dir.join(&p.series);
        let series: Vec<SeriesRow> = match read_csv(&path, &SERIES_HEADER) {
            Ok(s) => s,
            Err(e) => {
                problem(e.to_string());
                continue;
            }
        };
        files += 1;
        rows += series.len();
        if series.len() != params.t_total as usize {
            problem(format!(
                "{}: {} rows, expected {}",
                p.series,
                series.len(),
                params.t_total
            ));
        }
        for (k, r) in series.iter().enumerate() {
            let fi = r.frac_independent_or_docking;
            let fc = r.frac_collective;
            let fractions_ok = (0.0..=1.0).contains(&fi)
                && (0.0..=1.0).contains(&fc)
                && (mav_count == 0 && fi == 0.0 && fc == 0.0 || mav_count > 0 && (fi + fc - 1.0).abs() < 1e-9);
            if r.t != k as u32 || r.flow_veh_per_h_per_lane < 0.0 || !fractions_ok {
                problem(format!("{} row {}: inconsistent values", p.series, k + 2));
                break;
            }
            if r.t < params.t_dock_start && fc > 0.0 {
                problem(format!(
                    "{} row {}: collective modules before docking starts",
                    p.series,
                    k + 2
                ));
                break;
            }
        }
    }
    report.files = files;
    report.rows = rows;
    Ok(report)
}

/// Renders the SVG charts from the CSVs in `dir`.
pub fn render_dir(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let fundamental: Vec<FundamentalRow> = read_csv(&dir.join("fundamental.csv"), &FUNDAMENTAL_HEADER)?;
    let trains: Vec<TrainRow> = read_csv(&dir.join("trains.csv"), &TRAINS_HEADER)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, doc: String| -> Result<(), HarnessError> {
        let path = dir.join(name);
        fs::write(&path, doc).map_err(io_err(&path))?;
        written.push(path);
        Ok(())
    };
    emit(
        "flow_density.svg",
        svg::fundamental_chart(&fundamental, svg::Measure::Flow),
    )?;
    emit(
        "speed_density.svg",
        svg::fundamental_chart(&fundamental, svg::Measure::Speed),
    )?;
    emit("trains.svg", svg::train_histograms(&trains))?;

    let series_dir = dir.join("series");
    let mut series_files: Vec<PathBuf> = match fs::read_dir(&series_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect(),
        Err(_) => Vec::new(),
    };
    series_files.sort();
    let t_dock_start = read_manifest(dir)
        .ok()
        .and_then(|m| m.config.t_dock_start)
        .unwrap_or(SimParams::default().t_dock_start);
    let chosen = pick_series(&series_files);
    let series = match &chosen {
        Some(path) => Some((
            path.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
            read_csv::<SeriesRow>(path, &SERIES_HEADER)?,
        )),
        None => None,
    };
    emit(
        "flow_series.svg",
        svg::flow_series(series.as_ref().map(|(n, s)| (n.as_str(), s.as_slice())), t_dock_start),
    )?;
    Ok(written)
}

/// Prefers the collective (60, 0.5) run, then any collective run.
fn pick_series(files: &[PathBuf]) -> Option<PathBuf> {
    let stem = |p: &PathBuf| p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    files
        .iter()
        .find(|p| stem(p).starts_with("collective_p0.5_d60_"))
        .or_else(|| files.iter().find(|p| stem(p).starts_with("collective_")))
        .or_else(|| files.first())
        .cloned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_distinct() {
        let a = derive_seed(42, 60.0, 0.5, Scenario::Collective, 0);
        assert_eq!(a, derive_seed(42, 60.0, 0.5, Scenario::Collective, 0));
        assert_ne!(a, derive_seed(42, 60.0, 0.5, Scenario::Collective, 1));
        assert_ne!(a, derive_seed(42, 60.0, 0.5, Scenario::IndependentOnly, 0));
        assert_ne!(a, derive_seed(43, 60.0, 0.5, Scenario::Collective, 0));
    }

    #[test]
    fn adding_grid_points_keeps_existing_seeds() {
        let small = SweepConfig {
            densities: vec![10.0, 20.0],
            ..SweepConfig::default()
        };
        let big = SweepConfig {
            densities: vec![10.0, 15.0, 20.0],
            ..SweepConfig::default()
        };
        let big_grid = grid(&big);
        for p in grid(&small) {
            assert!(big_grid.contains(&p));
        }
    }

    #[test]
    fn default_grid_has_672_points() {
        let g = grid(&SweepConfig::default());
        assert_eq!(g.len(), 672);
        assert_eq!(g[0].name(), "independent-only_p0_d5_r0");
    }
}
