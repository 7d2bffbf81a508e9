//! Full descent against the reduced ODE under the variable mapping
//! `a = σ(Z)/(K√n)`, `t = 2√n·lr·iter`.

use serde::Serialize;

use super::arms::{arm_by_name, ArmContext};
use super::config::ExperimentConfig;
use super::run::ArmTrajectory;
use crate::error::{Error, Result};
use crate::hadamard::HadamardBasis;
use crate::reduced::ReducedModel;

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub k: usize,
    pub n: usize,
    pub lr: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Largest `|σ_full − σ_ode| / σ_ode` over modes and logged points.
    pub max_relative_deviation: f64,
    /// Per logged point: (iteration, worst relative deviation).
    pub per_point: Vec<(usize, f64)>,
}

/// Relative singular-value deviation between two trajectories that share
/// K, n and the logging schedule.
pub fn compare_trajectories(full: &ArmTrajectory, reduced: &ArmTrajectory) -> Result<Vec<(usize, f64)>> {
    if full.k != reduced.k || full.n != reduced.n {
        return Err(Error::Config(format!(
            "arms disagree on shape: K={} n={} vs K={} n={}",
            full.k, full.n, reduced.k, reduced.n
        )));
    }
    let a: Vec<usize> = full.rows.iter().map(|r| r.iter).collect();
    let b: Vec<usize> = reduced.rows.iter().map(|r| r.iter).collect();
    if a != b {
        return Err(Error::Config("arms were logged on different schedules".into()));
    }
    Ok(full
        .rows
        .iter()
        .zip(&reduced.rows)
        .map(|(f, r)| {
            let dev = f
                .sv
                .iter()
                .zip(&r.sv)
                .map(|(x, y)| (x - y).abs() / y.abs())
                .fold(0.0, f64::max);
            (f.iter, dev)
        })
        .collect())
}

/// Runs the `hadamard` and `ode` arms for the first configured seed and
/// compares their singular values at every logged point.
pub fn compare_full_reduced(config: &ExperimentConfig) -> Result<CompareReport> {
    config.validate()?;
    let seed = config.seeds[0];
    let basis = HadamardBasis::for_classes(config.k)?;
    let model = ReducedModel::from_basis(&basis);
    let schedule = config.schedule()?;
    let ctx = ArmContext {
        config,
        basis: &basis,
        model: &model,
        schedule: &schedule,
    };
    let traj = |name: &str| -> Result<ArmTrajectory> {
        Ok(ArmTrajectory {
            arm: name.into(),
            seed,
            k: config.k,
            n: config.n,
            rows: arm_by_name(name)?.run(&ctx, seed)?,
        })
    };
    let (full, reduced) = rayon::join(|| traj("hadamard"), || traj("ode"));
    let per_point = compare_trajectories(&full?, &reduced?)?;
    Ok(CompareReport {
        k: config.k,
        n: config.n,
        lr: config.lr,
        iterations: config.iterations,
        seed,
        max_relative_deviation: per_point.iter().map(|p| p.1).fold(0.0, f64::max),
        per_point,
    })
}
