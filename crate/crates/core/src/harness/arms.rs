//! Experiment arms: one way of producing a logged trajectory per seed.

use nalgebra::DMatrix;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::hadamard::HadamardBasis;
use crate::metrics::{self, ModeReadout, MetricSample};
use crate::reduced::{integrate_with, stepper_by_name, CeField, LogitField, MseReference, ReducedModel, SingularState};
use crate::schedule::Schedule;
use crate::ufm::{self, InitSpec, UfmState};

/// One logged row of an arm.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmRow {
    pub iter: usize,
    pub sample: MetricSample,
    /// Nuclear-normalized distance of the class-mean logits to the ETF.
    pub alignment: f64,
    /// Raw logit singular values of the nontrivial modes, descending.
    pub sv: Vec<f64>,
}

/// Shared, read-only inputs of every arm.
pub struct ArmContext<'a> {
    pub config: &'a ExperimentConfig,
    pub basis: &'a HadamardBasis,
    pub model: &'a ReducedModel,
    pub schedule: &'a Schedule,
}

impl ArmContext<'_> {
    fn root_n(&self) -> f64 {
        (self.config.n as f64).sqrt()
    }

    /// `K√n`, the factor between logit singular values and reduced state.
    fn scale(&self) -> f64 {
        self.config.k as f64 * self.root_n()
    }

    fn t(&self, iter: usize) -> f64 {
        self.config.lr * iter as f64
    }
}

pub trait Arm: Send + Sync {
    fn name(&self) -> &'static str;

    fn run(&self, ctx: &ArmContext<'_>, seed: u64) -> Result<Vec<ArmRow>>;
}

fn random_init(cfg: &ExperimentConfig, seed: u64) -> Result<UfmState> {
    let spec = InitSpec::random(cfg.epsilon, seed, cfg.variance_convention);
    ufm::init(&spec, cfg.k, cfg.n, cfg.d)?.into_state()
}

/// Top `K − 1` singular values of the random initialization for `seed`;
/// the Hadamard-family arms start from this spectrum.
pub fn paired_spectrum(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<f64>> {
    let z = random_init(cfg, seed)?.logits();
    let s = metrics::top_singular_values(&z, cfg.k - 1);
    if s.iter().any(|&x| x <= 0.0) {
        return Err(Error::domain("random initialization has a zero singular value"));
    }
    Ok(s)
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn matrix_rows(ctx: &ArmContext<'_>, state: UfmState, readout: ModeReadout) -> Result<Vec<ArmRow>> {
    let cfg = ctx.config;
    let records = ufm::descend_with(state, cfg.lr, cfg.iterations, ctx.schedule, readout)?;
    records
        .into_iter()
        .map(|r| {
            let means = metrics::class_mean_logits(&r.state.logits(), cfg.n);
            Ok(ArmRow {
                iter: r.iter,
                alignment: metrics::alignment(&means, cfg.k)?,
                sv: sorted_desc(&r.sample.modes),
                sample: r.sample,
            })
        })
        .collect()
}

/// Reduced trajectory rows: `a` in reduced units, reported in logit units.
fn reduced_rows(ctx: &ArmContext<'_>, points: Vec<(usize, Vec<f64>)>, loss_scale: f64) -> Result<Vec<ArmRow>> {
    let scale = ctx.scale();
    points
        .into_iter()
        .map(|(iter, a)| {
            let state = SingularState::new(a)?;
            let loss = loss_scale * ctx.model.energy(state.as_slice())?;
            let sample = metrics::reduced_sample(ctx.model, &state, ctx.t(iter), loss)?;
            let alignment = (2.0 * sample.m).sqrt();
            let sv: Vec<f64> = state.as_slice().iter().map(|x| x * scale).collect();
            Ok(ArmRow {
                iter,
                sample,
                alignment,
                sv: sorted_desc(&sv),
            })
        })
        .collect()
}

/// Gradient descent from the random Gaussian initialization.
pub struct RandomArm;

/// Gradient descent from the Hadamard initialization with the paired spectrum.
pub struct HadamardArm;

/// The reduced CE flow under the full-to-reduced mapping.
pub struct OdeArm;

/// The reduced logit-only flow.
pub struct LogitOdeArm;

/// Decoupled MSE dynamics towards the label singular values `√n`.
pub struct MseReferenceArm;

impl Arm for RandomArm {
    fn name(&self) -> &'static str {
        "random"
    }

    fn run(&self, ctx: &ArmContext<'_>, seed: u64) -> Result<Vec<ArmRow>> {
        matrix_rows(ctx, random_init(ctx.config, seed)?, ModeReadout::Sorted)
    }
}

impl Arm for HadamardArm {
    fn name(&self) -> &'static str {
        "hadamard"
    }

    fn run(&self, ctx: &ArmContext<'_>, seed: u64) -> Result<Vec<ArmRow>> {
        let cfg = ctx.config;
        let spec = InitSpec::hadamard(paired_spectrum(cfg, seed)?);
        let state = ufm::init(&spec, cfg.k, cfg.n, cfg.d)?.into_state()?;
        matrix_rows(ctx, state, ModeReadout::Hadamard)
    }
}

impl Arm for OdeArm {
    fn name(&self) -> &'static str {
        "ode"
    }

    fn run(&self, ctx: &ArmContext<'_>, seed: u64) -> Result<Vec<ArmRow>> {
        let cfg = ctx.config;
        let scale = ctx.scale();
        let a0: Vec<f64> = paired_spectrum(cfg, seed)?.iter().map(|s| s / scale).collect();
        let stepper = stepper_by_name(&cfg.ode_integrator)?;
        let dt = 2.0 * ctx.root_n() * cfg.lr;
        let points = integrate_with(ctx.model, &CeField, stepper.as_ref(), &a0, dt, cfg.iterations, ctx.schedule)?;
        let kn = (cfg.k * cfg.n) as f64;
        reduced_rows(ctx, points.into_iter().map(|p| (p.step, p.a)).collect(), kn)
    }
}

impl Arm for LogitOdeArm {
    fn name(&self) -> &'static str {
        "logit-ode"
    }

    fn run(&self, ctx: &ArmContext<'_>, seed: u64) -> Result<Vec<ArmRow>> {
        let cfg = ctx.config;
        let scale = ctx.scale();
        let a0: Vec<f64> = paired_spectrum(cfg, seed)?.iter().map(|s| s / scale).collect();
        let stepper = stepper_by_name(&cfg.ode_integrator)?;
        let dt = cfg.lr / cfg.k as f64;
        let points = integrate_with(ctx.model, &LogitField, stepper.as_ref(), &a0, dt, cfg.iterations, ctx.schedule)?;
        let kn = (cfg.k * cfg.n) as f64;
        reduced_rows(ctx, points.into_iter().map(|p| (p.step, p.a)).collect(), kn)
    }
}

impl Arm for MseReferenceArm {
    fn name(&self) -> &'static str {
        "mse-reference"
    }

    fn run(&self, ctx: &ArmContext<'_>, seed: u64) -> Result<Vec<ArmRow>> {
        let cfg = ctx.config;
        let target = vec![ctx.root_n(); cfg.k - 1];
        let s0 = paired_spectrum(cfg, seed)?;
        let stepper = stepper_by_name(&cfg.ode_integrator)?;
        let field = MseReference { target: target.clone() };
        let points = integrate_with(ctx.model, &field, stepper.as_ref(), &s0, cfg.lr, cfg.iterations, ctx.schedule)?;
        points
            .into_iter()
            .map(|p| {
                // ½‖Z − Y‖²_F; the trivial label mode contributes n/2
                let loss = 0.5 * (cfg.n as f64 + p.a.iter().zip(&target).map(|(a, s)| (s - a) * (s - a)).sum::<f64>());
                let z = logits_from_modes(ctx.basis, cfg.n, &p.a);
                let state = SingularState::new(p.a.clone())?;
                let mut sample = metrics::reduced_sample(ctx.model, &state, ctx.t(p.step), loss)?;
                sample.residual_energy = None;
                Ok(ArmRow {
                    iter: p.step,
                    alignment: metrics::alignment(&metrics::class_mean_logits(&z, cfg.n), cfg.k)?,
                    sv: sorted_desc(&p.a),
                    sample,
                })
            })
            .collect()
    }
}

/// `Σᵢ σᵢ uᵢ₊₁ vᵢ₊₁ᵀ` over the nontrivial modes.
fn logits_from_modes(basis: &HadamardBasis, n: usize, sigma: &[f64]) -> DMatrix<f64> {
    let k = basis.order();
    let v = ufm::signal_right_vectors(basis, n);
    let mut z = DMatrix::zeros(k, k * n);
    for (i, s) in sigma.iter().enumerate() {
        z += basis.u().column(i + 1) * v.column(i + 1).transpose() * *s;
    }
    z
}

const ARMS: &[&str] = &["random", "hadamard", "ode", "logit-ode", "mse-reference"];

pub fn arm_names() -> &'static [&'static str] {
    ARMS
}

pub fn arm_by_name(name: &str) -> Result<Box<dyn Arm>> {
    match name {
        "random" => Ok(Box::new(RandomArm)),
        "hadamard" => Ok(Box::new(HadamardArm)),
        "ode" => Ok(Box::new(OdeArm)),
        "logit-ode" => Ok(Box::new(LogitOdeArm)),
        "mse-reference" => Ok(Box::new(MseReferenceArm)),
        _ => Err(Error::Unknown {
            kind: "arm",
            name: name.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names() {
        for n in arm_names() {
            assert_eq!(arm_by_name(n).unwrap().name(), *n);
        }
        assert!(arm_by_name("adam").is_err());
    }

    #[test]
    fn paired_spectrum_is_seeded() {
        let cfg = ExperimentConfig::default();
        let a = paired_spectrum(&cfg, 3).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a, paired_spectrum(&cfg, 3).unwrap());
        assert_ne!(a, paired_spectrum(&cfg, 4).unwrap());
        assert!(a.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn logits_from_modes_round_trip() {
        let b = HadamardBasis::for_classes(4).unwrap();
        let z = logits_from_modes(&b, 2, &[0.5, 1.0, 2.0]);
        let amps = ufm::mode_amplitudes(&z, &b, 2).unwrap();
        for (x, y) in amps.iter().zip([0.5, 1.0, 2.0]) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
