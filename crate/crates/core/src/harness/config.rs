use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::arms;
use crate::error::{Error, Result};
use crate::numeric::is_power_of_two;
use crate::reduced::stepper_by_name;
use crate::schedule::Schedule;
use crate::ufm::VarianceConvention;

/// Declarative description of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub lr: f64,
    pub iterations: usize,
    pub log_points: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub arms: Vec<String>,
    /// Scale of the random initialization.
    pub epsilon: f64,
    pub variance_convention: VarianceConvention,
    /// Stepper for the reduced arms.
    pub ode_integrator: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k: 4,
            n: 1,
            d: 4,
            lr: 0.01,
            iterations: 100_000,
            log_points: 100,
            seeds: (0..10).collect(),
            output_dir: PathBuf::from("out"),
            arms: arms::arm_names().iter().map(|s| s.to_string()).collect(),
            epsilon: (-6f64).exp() / 2.0,
            variance_convention: VarianceConvention::Experiments,
            ode_integrator: "rk4".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k < 2 || !is_power_of_two(self.k) {
            return bad(format!("K must be a power of two >= 2, got {}", self.k));
        }
        if self.n == 0 || self.d == 0 {
            return bad("n and d must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.log_points < 2 {
            return bad(format!("log_points must be at least 2, got {}", self.log_points));
        }
        if self.iterations < self.log_points {
            return bad(format!(
                "iterations ({}) must be at least log_points ({})",
                self.iterations, self.log_points
            ));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.arms.is_empty() {
            return bad("at least one arm is required".into());
        }
        for (i, a) in self.arms.iter().enumerate() {
            arms::arm_by_name(a)?;
            if self.arms[..i].contains(a) {
                return bad(format!("arm `{a}` listed twice"));
            }
        }
        if self.d + 1 < self.k {
            // the paired spectrum comes from a rank <= d random init
            return bad(format!("d must be at least K - 1, got d={} K={}", self.d, self.k));
        }
        if self.arms.iter().any(|a| a == "hadamard") && self.d < self.k {
            return bad(format!("the hadamard arm needs d >= K, got d={} K={}", self.d, self.k));
        }
        stepper_by_name(&self.ode_integrator)?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::geometric(self.iterations, self.log_points)
    }
}
