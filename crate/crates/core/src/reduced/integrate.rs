use serde::{Deserialize, Serialize};

use super::field::{CeField, NormalizedFlow, VectorField};
use super::model::{ReducedModel, SingularState};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricSample};
use crate::schedule::Schedule;

/// Smallest step the positivity guard may halve down to.
pub const MIN_STEP: f64 = 1e-15;

/// One fixed-step update rule.
pub trait Stepper: Send + Sync {
    fn name(&self) -> &'static str;

    fn step(&self, field: &dyn VectorField, model: &ReducedModel, a: &[f64], dt: f64) -> Result<Vec<f64>>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Euler;

#[derive(Clone, Copy, Debug, Default)]
pub struct Rk4;

fn axpy(a: &[f64], k: &[f64], h: f64) -> Vec<f64> {
    a.iter().zip(k).map(|(x, d)| x + h * d).collect()
}

impl Stepper for Euler {
    fn name(&self) -> &'static str {
        "euler"
    }

    fn step(&self, field: &dyn VectorField, model: &ReducedModel, a: &[f64], dt: f64) -> Result<Vec<f64>> {
        Ok(axpy(a, &field.eval(model, a)?, dt))
    }
}

impl Stepper for Rk4 {
    fn name(&self) -> &'static str {
        "rk4"
    }

    fn step(&self, field: &dyn VectorField, model: &ReducedModel, a: &[f64], dt: f64) -> Result<Vec<f64>> {
        let k1 = field.eval(model, a)?;
        let k2 = field.eval(model, &axpy(a, &k1, dt / 2.0))?;
        let k3 = field.eval(model, &axpy(a, &k2, dt / 2.0))?;
        let k4 = field.eval(model, &axpy(a, &k3, dt))?;
        Ok((0..a.len())
            .map(|i| a[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect())
    }
}

const STEPPERS: &[&str] = &["euler", "rk4"];

pub fn stepper_names() -> &'static [&'static str] {
    STEPPERS
}

pub fn stepper_by_name(name: &str) -> Result<Box<dyn Stepper>> {
    match name {
        "euler" => Ok(Box::new(Euler)),
        "rk4" => Ok(Box::new(Rk4)),
        _ => Err(Error::Unknown {
            kind: "integrator",
            name: name.to_string(),
        }),
    }
}

/// Integration method of the CE flow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    #[default]
    Rk4,
    /// RK4 on the unit-speed flow; time is then arc length.
    Normalized,
}

impl Method {
    pub fn parts(self) -> (Box<dyn VectorField>, Box<dyn Stepper>) {
        match self {
            Method::Euler => (Box::new(CeField), Box::new(Euler)),
            Method::Rk4 => (Box::new(CeField), Box::new(Rk4)),
            Method::Normalized => (Box::new(NormalizedFlow), Box::new(Rk4)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub t: f64,
    pub a: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub t: f64,
    pub state: SingularState,
    pub sample: MetricSample,
}

fn acceptable(prev: &[f64], next: &[f64]) -> bool {
    prev.iter().zip(next).all(|(p, n)| n.is_finite() && (*p <= 0.0 || *n > 0.0))
}

/// Advances by `dt`, halving into substeps whenever an entry that was
/// positive would become nonpositive.
fn guarded_step(
    field: &dyn VectorField,
    stepper: &dyn Stepper,
    model: &ReducedModel,
    a: &[f64],
    t: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    match stepper.step(field, model, a, dt) {
        Ok(next) if acceptable(a, &next) => return Ok(next),
        Ok(_) | Err(Error::Domain(_)) => {}
        Err(e) => return Err(e),
    }
    let half = dt / 2.0;
    if half < MIN_STEP {
        return Err(Error::Stiffness { t, min_dt: MIN_STEP });
    }
    let mid = guarded_step(field, stepper, model, a, t, half)?;
    guarded_step(field, stepper, model, &mid, t + half, half)
}

/// Fixed-step integration for `steps` steps, recording the scheduled ones.
pub fn integrate_with(
    model: &ReducedModel,
    field: &dyn VectorField,
    stepper: &dyn Stepper,
    a0: &[f64],
    dt: f64,
    steps: usize,
    schedule: &Schedule,
) -> Result<Vec<TrajectoryPoint>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain("step size must be positive"));
    }
    if a0.len() != model.dim() {
        return Err(Error::Shape(format!("initial state has length {}, expected {}", a0.len(), model.dim())));
    }
    let mut a = a0.to_vec();
    let mut cursor = schedule.cursor();
    let mut out = Vec::with_capacity(schedule.len());
    for step in 1..=steps {
        let t = (step - 1) as f64 * dt;
        a = guarded_step(field, stepper, model, &a, t, dt)?;
        if cursor.hit(step) {
            out.push(TrajectoryPoint {
                step,
                t: step as f64 * dt,
                a: a.clone(),
            });
        }
    }
    Ok(out)
}

/// Integrates the CE flow from `a0` to `horizon` (rounded to whole steps)
/// and evaluates every metric at the scheduled steps; `loss` is the energy.
pub fn integrate(
    model: &ReducedModel,
    a0: &SingularState,
    method: Method,
    dt: f64,
    horizon: f64,
    schedule: &Schedule,
) -> Result<Vec<TrajectoryRecord>> {
    if horizon.is_nan() || horizon <= 0.0 {
        return Err(Error::domain("horizon must be positive"));
    }
    let steps = (horizon / dt).round().max(1.0) as usize;
    let (field, stepper) = method.parts();
    let points = integrate_with(model, field.as_ref(), stepper.as_ref(), a0.as_slice(), dt, steps, schedule)?;
    points
        .into_iter()
        .map(|p| {
            let state = SingularState::new(p.a)?;
            let loss = model.energy(state.as_slice())?;
            let sample = metrics::reduced_sample(model, &state, p.t, loss)?;
            Ok(TrajectoryRecord {
                step: p.step,
                t: p.t,
                state,
                sample,
            })
        })
        .collect()
}
