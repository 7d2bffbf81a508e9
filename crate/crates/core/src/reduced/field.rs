use super::model::{mse_reference_field, replicator, ReducedModel};
use crate::error::{Error, Result};
use crate::numeric::norm2;

/// A reduced vector field `a ↦ da/dt`.
pub trait VectorField: Send + Sync {
    fn name(&self) -> &'static str;

    /// True when `daᵢ/dt` carries a factor `aᵢ`, so zero entries stay zero.
    fn multiplicative(&self) -> bool;

    fn eval(&self, model: &ReducedModel, a: &[f64]) -> Result<Vec<f64>>;
}

/// CE flow `aᵢ bᵢ / D`.
#[derive(Clone, Copy, Debug, Default)]
pub struct CeField;

/// Unit-speed CE flow `a⊙b̂ / ‖a⊙b̂‖`, same orbits as [`CeField`].
#[derive(Clone, Copy, Debug, Default)]
pub struct NormalizedFlow;

/// Logit-only flow `bᵢ / D`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LogitField;

/// Replicator flow on the simplex, evaluated at `â = a / ‖a‖₁`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReplicatorField;

/// MSE product dynamics towards fixed targets.
#[derive(Clone, Debug)]
pub struct MseReference {
    pub target: Vec<f64>,
}

fn check_nonnegative(a: &[f64]) -> Result<()> {
    if a.iter().any(|&x| x < 0.0 || x.is_nan()) {
        return Err(Error::domain("multiplicative field needs nonnegative entries"));
    }
    if a.iter().all(|&x| x == 0.0) {
        return Err(Error::domain("multiplicative field is stuck at zero"));
    }
    Ok(())
}

impl VectorField for CeField {
    fn name(&self) -> &'static str {
        "ce"
    }

    fn multiplicative(&self) -> bool {
        true
    }

    fn eval(&self, model: &ReducedModel, a: &[f64]) -> Result<Vec<f64>> {
        check_nonnegative(a)?;
        let ev = model.evaluate(a)?;
        Ok(a.iter().zip(&ev.ratio).map(|(x, r)| x * r).collect())
    }
}

impl VectorField for NormalizedFlow {
    fn name(&self) -> &'static str {
        "normalized-flow"
    }

    fn multiplicative(&self) -> bool {
        true
    }

    fn eval(&self, model: &ReducedModel, a: &[f64]) -> Result<Vec<f64>> {
        check_nonnegative(a)?;
        let ev = model.evaluate(a)?;
        let v: Vec<f64> = a.iter().zip(&ev.stable_b).map(|(x, b)| x * b).collect();
        let norm = norm2(&v);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateField);
        }
        Ok(v.into_iter().map(|x| x / norm).collect())
    }
}

impl VectorField for LogitField {
    fn name(&self) -> &'static str {
        "logit"
    }

    fn multiplicative(&self) -> bool {
        false
    }

    fn eval(&self, model: &ReducedModel, a: &[f64]) -> Result<Vec<f64>> {
        model.logit_field(a)
    }
}

impl VectorField for ReplicatorField {
    fn name(&self) -> &'static str {
        "replicator"
    }

    fn multiplicative(&self) -> bool {
        true
    }

    fn eval(&self, model: &ReducedModel, a: &[f64]) -> Result<Vec<f64>> {
        check_nonnegative(a)?;
        let l1: f64 = crate::numeric::ksum(a.iter().copied());
        let hat: Vec<f64> = a.iter().map(|x| x / l1).collect();
        let ev = model.evaluate(a)?;
        Ok(replicator(&hat, &ev.ratio))
    }
}

impl VectorField for MseReference {
    fn name(&self) -> &'static str {
        "mse-reference"
    }

    fn multiplicative(&self) -> bool {
        true
    }

    fn eval(&self, _model: &ReducedModel, a: &[f64]) -> Result<Vec<f64>> {
        mse_reference_field(a, &self.target)
    }
}

const FIELDS: &[&str] = &["ce", "normalized-flow", "logit", "replicator"];

/// Names accepted by [`field_by_name`]. `mse-reference` needs a target and is
/// built directly.
pub fn field_names() -> &'static [&'static str] {
    FIELDS
}

pub fn field_by_name(name: &str) -> Result<Box<dyn VectorField>> {
    match name {
        "ce" => Ok(Box::new(CeField)),
        "normalized-flow" => Ok(Box::new(NormalizedFlow)),
        "logit" => Ok(Box::new(LogitField)),
        "replicator" => Ok(Box::new(ReplicatorField)),
        _ => Err(Error::Unknown {
            kind: "vector field",
            name: name.to_string(),
        }),
    }
}
