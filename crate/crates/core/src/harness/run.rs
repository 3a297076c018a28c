//! Seed sweeps, CSV records and run summaries.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{trailing_slope, MetricsTracker};
use crate::parallel::Executor;
use crate::primal_dual::Simulation;

/// Column order of every record file.
pub const CSV_HEADER: [&str; 9] = [
    "t",
    "regret",
    "ccv",
    "cv",
    "consensus_err",
    "bits",
    "seed",
    "algo",
    "compressor",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub t: usize,
    pub regret: f64,
    pub ccv: f64,
    pub cv: f64,
    pub consensus_err: f64,
    pub bits: u64,
    pub seed: u64,
    pub algo: String,
    pub compressor: String,
}

/// Rounds `1..T` are executed; those divisible by `stride` and the last one
/// are recorded.
pub fn is_recorded(t: usize, stride: usize, horizon: usize) -> bool {
    t.is_multiple_of(stride) || t + 1 == horizon
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub records: Vec<RunRecord>,
    /// Quantizer coordinates that exceeded the `q`-bit range.
    pub overflowed: usize,
    pub wall_secs: f64,
}

/// Runs one seed and evaluates it at the recorded rounds.
pub fn run_seed(cfg: &RunConfig, seed: u64, executor: Executor) -> Result<SeedOutcome> {
    let start = Instant::now();
    let sim_cfg = cfg.simulation(seed, executor)?;
    let problem = cfg.build_problem(seed)?;
    let mut sim = Simulation::new(sim_cfg, &problem)?;
    let mut tracker = MetricsTracker::for_problem(&problem, executor)?;
    let algo = cfg.algo.label().to_string();
    let compressor = cfg.compressor_label();
    let mut records = Vec::new();
    let mut overflowed = 0;
    while let Some(step) = sim.step()? {
        tracker.observe(&step.log, &step.round)?;
        overflowed += step.log.overflowed;
        if is_recorded(step.log.t, cfg.stride, cfg.horizon) {
            let m = tracker.snapshot()?;
            records.push(RunRecord {
                t: m.t,
                regret: m.regret,
                ccv: m.ccv,
                cv: m.cv,
                consensus_err: m.consensus_err,
                bits: m.bits,
                seed,
                algo: algo.clone(),
                compressor: compressor.clone(),
            });
        }
    }
    log::debug!("seed {seed}: {} records", records.len());
    Ok(SeedOutcome {
        seed,
        records,
        overflowed,
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn write_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    // An empty run still gets a header.
    if records.is_empty() {
        w.write_record(CSV_HEADER).map_err(|e| csv_error(path, e))?;
    }
    for r in records {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Schema {
            path: path.display().to_string(),
            reason: format!("{other:?}"),
        },
    }
}

/// Reads a record file, insisting on the exact header.
pub fn read_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CSV_HEADER {
        return Err(Error::Schema {
            path: path.display().to_string(),
            reason: format!("header {header:?} != {CSV_HEADER:?}"),
        });
    }
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

pub fn csv_name(cfg: &RunConfig, seed: u64) -> String {
    let comp = cfg.compressor_label().replace(':', "-");
    format!("{}_{}_seed{seed}.csv", cfg.algo.label(), comp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_regret: f64,
    pub final_ccv: f64,
    pub final_cv: f64,
    pub total_bits: u64,
    pub overflowed: usize,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algo: String,
    pub compressor: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub n: usize,
    pub mean_final_regret: f64,
    pub mean_final_ccv: f64,
    /// Trailing-decade log-log slopes of the cross-seed mean curves; absent
    /// when a curve is not positive over the window.
    pub regret_slope: Option<f64>,
    pub ccv_slope: Option<f64>,
    pub total_bits: u64,
    pub wall_secs: f64,
    pub seeds: Vec<SeedSummary>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub csv_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub summary: RunSummary,
    pub outcomes: Vec<SeedOutcome>,
}

/// Cross-seed mean of one column at the shared recorded rounds.
pub fn mean_curve(runs: &[&[RunRecord]], column: impl Fn(&RunRecord) -> f64) -> Vec<(f64, f64)> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|k| {
            let vals: Vec<f64> = runs.iter().filter_map(|r| r.get(k)).map(&column).collect();
            (first[k].t as f64, vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

/// Runs every seed, writes one CSV per seed and a `summary.toml`.
pub fn run_experiment(cfg: &RunConfig, executor: Executor) -> Result<ExperimentReport> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let start = Instant::now();
    std::fs::create_dir_all(&cfg.out)?;
    let outcomes: Vec<SeedOutcome> = executor
        .map(&cfg.seeds, |&seed| run_seed(cfg, seed, executor))
        .into_iter()
        .collect::<Result<_>>()?;
    let mut csv_paths = Vec::new();
    for o in &outcomes {
        let path = cfg.out.join(csv_name(cfg, o.seed));
        write_csv(&path, &o.records)?;
        csv_paths.push(path);
    }
    let runs: Vec<&[RunRecord]> = outcomes.iter().map(|o| o.records.as_slice()).collect();
    let regret = mean_curve(&runs, |r| r.regret);
    let ccv = mean_curve(&runs, |r| r.ccv);
    let seeds: Vec<SeedSummary> = outcomes
        .iter()
        .map(|o| {
            let last = o.records.last();
            SeedSummary {
                seed: o.seed,
                final_regret: last.map_or(0.0, |r| r.regret),
                final_ccv: last.map_or(0.0, |r| r.ccv),
                final_cv: last.map_or(0.0, |r| r.cv),
                total_bits: last.map_or(0, |r| r.bits),
                overflowed: o.overflowed,
                wall_secs: o.wall_secs,
            }
        })
        .collect();
    let k = seeds.len().max(1) as f64;
    let summary = RunSummary {
        algo: cfg.algo.label().to_string(),
        compressor: cfg.compressor_label(),
        horizon: cfg.horizon,
        n: cfg.n,
        mean_final_regret: seeds.iter().map(|s| s.final_regret).sum::<f64>() / k,
        mean_final_ccv: seeds.iter().map(|s| s.final_ccv).sum::<f64>() / k,
        regret_slope: trailing_slope(&regret).ok(),
        ccv_slope: trailing_slope(&ccv).ok(),
        total_bits: seeds.iter().map(|s| s.total_bits).sum(),
        wall_secs: start.elapsed().as_secs_f64(),
        seeds,
    };
    let summary_path = cfg.out.join(format!(
        "summary_{}_{}.toml",
        cfg.algo.label(),
        cfg.compressor_label().replace(':', "-")
    ));
    let text = toml::to_string(&summary).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&summary_path, text)?;
    Ok(ExperimentReport {
        csv_paths,
        summary_path,
        summary,
        outcomes,
    })
}

/// Mean and standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// One row of the slope table: an algorithm/compressor pair over its seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeRow {
    pub algo: String,
    pub compressor: String,
    pub seeds: usize,
    pub final_t: usize,
    pub final_regret: (f64, f64),
    pub final_ccv: (f64, f64),
    /// Slope of the mean curve, and the standard error across per-seed slopes.
    pub regret_slope: Option<f64>,
    pub regret_slope_se: Option<f64>,
    pub ccv_slope: Option<f64>,
    pub ccv_slope_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeTable {
    pub rows: Vec<SlopeRow>,
    /// Algorithms ordered by mean final regret, e.g. `"two_point < one_point"`.
    pub regret_order: String,
    pub ccv_order: String,
}

impl SlopeTable {
    pub fn render(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
        let mut out = String::from(
            "algo               compressor     seeds  T       regret (se)              ccv (se)                 regret slope (se)  ccv slope (se)\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<18} {:<14} {:<6} {:<7} {:>11.4e} ({:>9.2e})  {:>11.4e} ({:>9.2e})  {:>6} ({:>6})    {:>6} ({:>6})\n",
                r.algo,
                r.compressor,
                r.seeds,
                r.final_t,
                r.final_regret.0,
                r.final_regret.1,
                r.final_ccv.0,
                r.final_ccv.1,
                fmt(r.regret_slope),
                fmt(r.regret_slope_se),
                fmt(r.ccv_slope),
                fmt(r.ccv_slope_se),
            ));
        }
        out.push_str(&format!("regret order: {}\nccv order:    {}\n", self.regret_order, self.ccv_order));
        out
    }
}

fn order(rows: &[SlopeRow], key: impl Fn(&SlopeRow) -> f64) -> String {
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by(|&a, &b| key(&rows[a]).total_cmp(&key(&rows[b])));
    idx.iter()
        .map(|&k| rows[k].algo.as_str())
        .collect::<Vec<_>>()
        .join(" < ")
}

/// Aggregates record files into a slope table.
pub fn summarize(paths: &[PathBuf]) -> Result<SlopeTable> {
    let mut groups: BTreeMap<(String, String), Vec<Vec<RunRecord>>> = BTreeMap::new();
    for path in paths {
        let records = read_csv(path)?;
        let Some(first) = records.first() else {
            continue;
        };
        groups
            .entry((first.algo.clone(), first.compressor.clone()))
            .or_default()
            .push(records);
    }
    let mut rows = Vec::new();
    for ((algo, compressor), runs) in groups {
        let views: Vec<&[RunRecord]> = runs.iter().map(|r| r.as_slice()).collect();
        let len = views[0].len();
        if views.iter().any(|v| v.len() != len || v.iter().zip(views[0]).any(|(a, b)| a.t != b.t)) {
            return Err(Error::Schema {
                path: format!("{algo}/{compressor}"),
                reason: "seeds were recorded at different rounds".to_string(),
            });
        }
        let finals = |f: fn(&RunRecord) -> f64| -> Vec<f64> {
            views.iter().filter_map(|v| v.last()).map(f).collect()
        };
        let per_seed_slopes = |f: fn(&RunRecord) -> f64| -> Option<f64> {
            let slopes: Option<Vec<f64>> = views
                .iter()
                .map(|v| {
                    let pts: Vec<(f64, f64)> = v.iter().map(|r| (r.t as f64, f(r))).collect();
                    trailing_slope(&pts).ok()
                })
                .collect();
            slopes.map(|s| mean_and_se(&s).1).filter(|se| se.is_finite())
        };
        let regret_of: fn(&RunRecord) -> f64 = |r| r.regret;
        let ccv_of: fn(&RunRecord) -> f64 = |r| r.ccv;
        rows.push(SlopeRow {
            seeds: views.len(),
            final_t: views[0].last().map_or(0, |r| r.t),
            final_regret: mean_and_se(&finals(regret_of)),
            final_ccv: mean_and_se(&finals(ccv_of)),
            regret_slope: trailing_slope(&mean_curve(&views, regret_of)).ok(),
            regret_slope_se: per_seed_slopes(regret_of),
            ccv_slope: trailing_slope(&mean_curve(&views, ccv_of)).ok(),
            ccv_slope_se: per_seed_slopes(ccv_of),
            algo,
            compressor,
        });
    }
    Ok(SlopeTable {
        regret_order: order(&rows, |r| r.final_regret.0),
        ccv_order: order(&rows, |r| r.final_ccv.0),
        rows,
    })
}
