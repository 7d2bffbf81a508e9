//! Runs every (arm, seed) cell, aggregates, and writes artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use super::arms::{arm_by_name, ArmContext, ArmRow};
use super::config::ExperimentConfig;
use super::svg::{LinePlot, Series};
use crate::error::{Error, Result};
use crate::hadamard::HadamardBasis;
use crate::reduced::ReducedModel;

/// Logged rows of one arm for one seed.
#[derive(Clone, Debug)]
pub struct ArmTrajectory {
    pub arm: String,
    pub seed: u64,
    pub k: usize,
    pub n: usize,
    pub rows: Vec<ArmRow>,
}

/// Outcome of one cell of the (arm, seed) grid.
#[derive(Debug)]
pub struct CellOutcome {
    pub arm: String,
    pub seed: u64,
    pub result: Result<ArmTrajectory>,
}

/// A float that serializes non-finite values as the strings `inf`,
/// `-inf` and `nan`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JsonFloat(pub f64);

impl Serialize for JsonFloat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_finite() {
            s.serialize_f64(x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesPoint {
    pub iter: usize,
    pub mean: JsonFloat,
    pub stderr: Option<JsonFloat>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Monotonicity {
    Monotone,
    ViolatedAt { iter: usize, t: f64 },
    Undetermined,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ArmSummary {
    pub status: &'static str,
    pub seeds: Vec<u64>,
    pub failures: Vec<SeedFailure>,
    pub series: BTreeMap<String, Vec<SeriesPoint>>,
    pub final_values: BTreeMap<String, JsonFloat>,
    pub monotonicity: BTreeMap<String, Monotonicity>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub arms: BTreeMap<String, ArmSummary>,
}

impl RunSummary {
    pub fn failed_arms(&self) -> Vec<&str> {
        self.arms
            .iter()
            .filter(|(_, s)| !s.failures.is_empty())
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

/// Scalar columns tracked per row, in CSV order.
pub const SCALAR_COLUMNS: [&str; 9] = [
    "loss",
    "M",
    "kl_forward",
    "kl_reverse",
    "frob_nc",
    "log_ratio",
    "min_margin",
    "l1",
    "residual_energy",
];

/// Metrics whose series are expected to be non-increasing.
const DECREASING: [&str; 6] = ["loss", "M", "kl_forward", "kl_reverse", "frob_nc", "log_ratio"];

fn scalar(row: &ArmRow, name: &str) -> Option<f64> {
    let s = &row.sample;
    Some(match name {
        "loss" => s.loss,
        "M" => s.m,
        "kl_forward" => s.kl_forward,
        "kl_reverse" => s.kl_reverse,
        "frob_nc" => s.frob_nc,
        "log_ratio" => s.log_ratio,
        "min_margin" => s.min_margin,
        "l1" => s.l1,
        "residual_energy" => return s.residual_energy,
        "alignment" => row.alignment,
        _ => {
            let idx: usize = name.strip_prefix("sv_")?.parse().ok()?;
            *row.sv.get(idx.checked_sub(1)?)?
        }
    })
}

/// Runs every requested arm for every seed without writing files.
///
/// Cells run in parallel; the result is ordered by (arm, seed) as listed in
/// the config.
pub fn execute(config: &ExperimentConfig) -> Result<Vec<CellOutcome>> {
    config.validate()?;
    let basis = HadamardBasis::for_classes(config.k)?;
    let model = ReducedModel::from_basis(&basis);
    let schedule = config.schedule()?;
    let ctx = ArmContext {
        config,
        basis: &basis,
        model: &model,
        schedule: &schedule,
    };
    let cells: Vec<(String, u64)> = config
        .arms
        .iter()
        .flat_map(|a| config.seeds.iter().map(move |s| (a.clone(), *s)))
        .collect();
    let outcomes = cells
        .into_par_iter()
        .map(|(arm, seed)| {
            let result = arm_by_name(&arm).and_then(|a| a.run(&ctx, seed)).map(|rows| ArmTrajectory {
                arm: arm.clone(),
                seed,
                k: config.k,
                n: config.n,
                rows,
            });
            CellOutcome { arm, seed, result }
        })
        .collect();
    Ok(outcomes)
}

fn mean_stderr(values: &[f64]) -> (f64, Option<f64>) {
    let count = values.len() as f64;
    let mean = crate::numeric::ksum(values.iter().copied()) / count;
    if values.len() < 2 || !mean.is_finite() {
        return (mean, None);
    }
    let var = crate::numeric::ksum(values.iter().map(|x| (x - mean) * (x - mean))) / (count - 1.0);
    (mean, Some((var / count).sqrt()))
}

fn verdict(points: &[(usize, f64, f64)]) -> Monotonicity {
    if points.len() < 2 || points.iter().any(|p| p.2.is_nan()) {
        return Monotonicity::Undetermined;
    }
    for w in points.windows(2) {
        let (prev, next) = (w[0].2, w[1].2);
        if next > prev + 1e-10 * prev.abs().max(1.0) {
            return Monotonicity::ViolatedAt { iter: w[1].0, t: w[1].1 };
        }
    }
    Monotonicity::Monotone
}

/// Per-arm aggregation over the successful seeds.
pub fn summarize(config: &ExperimentConfig, outcomes: &[CellOutcome]) -> RunSummary {
    let mut metric_names: Vec<String> = SCALAR_COLUMNS.iter().map(|s| s.to_string()).collect();
    metric_names.push("alignment".into());
    metric_names.extend((1..config.k).map(|i| format!("sv_{i}")));

    let mut arms = BTreeMap::new();
    for arm in &config.arms {
        let cells: Vec<&CellOutcome> = outcomes.iter().filter(|c| &c.arm == arm).collect();
        let ok: Vec<&ArmTrajectory> = cells.iter().filter_map(|c| c.result.as_ref().ok()).collect();
        let failures: Vec<SeedFailure> = cells
            .iter()
            .filter_map(|c| {
                c.result.as_ref().err().map(|e| SeedFailure {
                    seed: c.seed,
                    error: e.to_string(),
                })
            })
            .collect();
        let mut series = BTreeMap::new();
        let mut final_values = BTreeMap::new();
        let mut monotonicity = BTreeMap::new();
        let rows = ok.first().map_or(0, |t| t.rows.len());
        for name in &metric_names {
            let mut pts = Vec::new();
            let mut raw = Vec::new();
            for idx in 0..rows {
                let values: Vec<f64> = ok.iter().filter_map(|t| t.rows.get(idx)).filter_map(|r| scalar(r, name)).collect();
                if values.is_empty() {
                    continue;
                }
                let (mean, stderr) = mean_stderr(&values);
                let row = &ok[0].rows[idx];
                raw.push((row.iter, row.sample.t, mean));
                pts.push(SeriesPoint {
                    iter: row.iter,
                    mean: JsonFloat(mean),
                    stderr: stderr.map(JsonFloat),
                });
            }
            if pts.is_empty() {
                continue;
            }
            final_values.insert(name.clone(), pts.last().unwrap().mean);
            if DECREASING.contains(&name.as_str()) {
                monotonicity.insert(name.clone(), verdict(&raw));
            }
            series.insert(name.clone(), pts);
        }
        let status = if ok.is_empty() {
            "failed"
        } else if failures.is_empty() {
            "ok"
        } else {
            "partial"
        };
        arms.insert(
            arm.clone(),
            ArmSummary {
                status,
                seeds: ok.iter().map(|t| t.seed).collect(),
                failures,
                series,
                final_values,
                monotonicity,
            },
        );
    }
    RunSummary {
        config: config.clone(),
        arms,
    }
}

fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        // Display prints the shortest round-trip digits and `inf`
        format!("{x}")
    }
}

/// Writes `runs.csv` for the successful cells.
pub fn write_runs_csv(path: &Path, k: usize, outcomes: &[CellOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["arm", "seed", "iter", "t"].iter().map(|s| s.to_string()).collect();
    header.extend(SCALAR_COLUMNS.iter().map(|s| s.to_string()));
    header.extend((1..k).map(|i| format!("sv_{i}")));
    w.write_record(&header)?;
    for traj in outcomes.iter().filter_map(|c| c.result.as_ref().ok()) {
        for row in &traj.rows {
            let mut rec = vec![traj.arm.clone(), traj.seed.to_string(), row.iter.to_string(), fmt_float(row.sample.t)];
            for col in SCALAR_COLUMNS {
                rec.push(scalar(row, col).map(fmt_float).unwrap_or_default());
            }
            for i in 0..k - 1 {
                rec.push(row.sv.get(i).copied().map(fmt_float).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn mean_series(summary: &ArmSummary, metric: &str) -> Vec<(f64, f64)> {
    summary
        .series
        .get(metric)
        .map(|pts| pts.iter().map(|p| (p.iter as f64, p.mean.0)).collect())
        .unwrap_or_default()
}

/// The six standard panels, as (file stem, plot).
pub fn panels(summary: &RunSummary) -> Vec<(&'static str, LinePlot)> {
    let k = summary.config.k;
    let per_arm = |metric: &str| -> Vec<Series> {
        summary
            .arms
            .iter()
            .map(|(arm, s)| Series::new(arm.clone(), mean_series(s, metric)))
            .filter(|s| !s.points.is_empty())
            .collect()
    };
    let mut sv = Vec::new();
    let mut sv_norm = Vec::new();
    for (arm, s) in &summary.arms {
        let cols: Vec<Vec<(f64, f64)>> = (1..k).map(|i| mean_series(s, &format!("sv_{i}"))).collect();
        if cols.iter().any(|c| c.is_empty()) {
            continue;
        }
        for (i, c) in cols.iter().enumerate() {
            sv.push(Series::new(format!("{arm} σ{}", i + 1), c.clone()));
            let normed = c
                .iter()
                .enumerate()
                .map(|(row, &(x, y))| {
                    let total: f64 = cols.iter().map(|col| col[row].1).sum();
                    (x, y / total)
                })
                .collect();
            sv_norm.push(Series::new(format!("{arm} σ{}", i + 1), normed));
        }
    }
    let plot = |title: &str, y: &str, series: Vec<Series>, log_y: bool| LinePlot {
        title: title.into(),
        x_label: "iteration".into(),
        y_label: y.into(),
        log_x: true,
        log_y,
        series,
    };
    vec![
        ("loss", plot("Loss", "loss", per_arm("loss"), true)),
        ("alignment", plot("Distance to simplex ETF", "alignment", per_arm("alignment"), false)),
        ("kl", plot("Forward KL to uniform", "KL", per_arm("kl_forward"), false)),
        ("singular_values", plot("Logit singular values", "σ", sv, true)),
        ("normalized_singular_values", plot("Normalized singular values", "σ / Σσ", sv_norm, false)),
        ("residual_energy", plot("Residual energy", "fraction", per_arm("residual_energy"), false)),
    ]
}

/// Everything produced by [`run_experiment`].
#[derive(Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub cells: Vec<CellOutcome>,
}

/// Executes the experiment and writes `runs.csv`, `summary.json` and one SVG
/// per panel into the configured output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    let cells = execute(config)?;
    let summary = summarize(config, &cells);
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_runs_csv(&dir.join("runs.csv"), config.k, &cells)?;
    let json = serde_json::to_string_pretty(&summary)?;
    let path = dir.join("summary.json");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    for (stem, plot) in panels(&summary) {
        let path = dir.join(format!("{stem}.svg"));
        fs::write(&path, plot.render()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(RunOutput { summary, cells })
}
