//! Random search for points where a distance to collapse grows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{metric_time_derivatives, Metric};
use crate::reduced::{ReducedModel, SingularState};

/// Derivatives at or below this are not counted as violations.
pub const SCAN_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Log-uniform components in `[1e-3, 1]`.
    Uniform,
    /// A random subset of one to `K − 2` dominant components near 1, the
    /// rest in `[1e-4, 1e-2]`.
    #[default]
    Biased,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub a: Vec<f64>,
    pub rate: f64,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..=hi.log10()))
}

fn sample_direction(rng: &mut ChaCha8Rng, dim: usize, sampling: Sampling) -> Vec<f64> {
    match sampling {
        Sampling::Uniform => (0..dim).map(|_| log_uniform(rng, 1e-3, 1.0)).collect(),
        Sampling::Biased => {
            let dominant = if dim <= 2 { 1 } else { rng.random_range(1..=dim - 1) };
            let mut idx: Vec<usize> = (0..dim).collect();
            // partial Fisher-Yates for the dominant subset
            for i in 0..dominant {
                let j = rng.random_range(i..dim);
                idx.swap(i, j);
            }
            let mut a = vec![0.0; dim];
            for (pos, &i) in idx.iter().enumerate() {
                a[i] = if pos < dominant {
                    log_uniform(rng, 10f64.powf(-0.3), 10f64.powf(0.3))
                } else {
                    log_uniform(rng, 1e-4, 1e-2)
                };
            }
            a
        }
    }
}

/// Samples `samples` strictly positive states with `‖a‖₁` log-uniform in
/// `norm_range` and returns those where `metric` has derivative above
/// [`SCAN_TOLERANCE`]. Deterministic given `seed`.
pub fn scan_monotonicity(
    k: usize,
    metric: Metric,
    samples: usize,
    seed: u64,
    norm_range: (f64, f64),
    sampling: Sampling,
) -> Result<Vec<Violation>> {
    let (lo, hi) = norm_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::Config(format!("invalid norm range ({lo}, {hi})")));
    }
    if samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    let model = ReducedModel::new(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..samples {
        let dir = sample_direction(&mut rng, model.dim(), sampling);
        let norm = log_uniform(&mut rng, lo, hi);
        let total: f64 = dir.iter().sum();
        let a: Vec<f64> = dir.iter().map(|x| x * norm / total).collect();
        let state = SingularState::new(a)?;
        let rate = metric.rate(&metric_time_derivatives(&model, &state)?);
        if rate > SCAN_TOLERANCE {
            out.push(Violation {
                a: state.as_slice().to_vec(),
                rate,
            });
        }
    }
    Ok(out)
}
