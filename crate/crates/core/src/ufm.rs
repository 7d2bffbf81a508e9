//! The unconstrained features model: loss, gradient flow and initialization.
//!
//! Columns of `H` (and of the logit matrix `Z = WH`) are in class order,
//! column `c·n + r` being sample `r` of class `c`. Labels are
//! `Y = I_K ⊗ 1_nᵀ`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hadamard::HadamardBasis;
use crate::metrics::{self, MetricSample, ModeReadout};
use crate::numeric::{all_finite, is_power_of_two, ksum};
use crate::schedule::Schedule;
use crate::softmax::softmax_columns;

/// Classifier `W` (K×d) and features `H` (d×Kn).
#[derive(Clone, Debug, PartialEq)]
pub struct UfmState {
    k: usize,
    n: usize,
    d: usize,
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl UfmState {
    pub fn new(k: usize, n: usize, d: usize, w: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self> {
        if k == 0 || n == 0 || d == 0 {
            return Err(Error::Shape(format!("K={k}, n={n}, d={d} must all be positive")));
        }
        if w.shape() != (k, d) {
            return Err(Error::Shape(format!("W is {:?}, expected ({k}, {d})", w.shape())));
        }
        if h.shape() != (d, k * n) {
            return Err(Error::Shape(format!("H is {:?}, expected ({d}, {})", h.shape(), k * n)));
        }
        Ok(Self { k, n, d, w, h })
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn per_class(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.d
    }

    pub fn logits(&self) -> DMatrix<f64> {
        &self.w * &self.h
    }
}

/// `Y = I_K ⊗ 1_nᵀ`.
pub fn label_matrix(k: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k * n, |r, c| if c / n == r { 1.0 } else { 0.0 })
}

/// Simplex ETF `S = I_K − (1/K)·11ᵀ`.
pub fn simplex_etf(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |r, c| if r == c { 1.0 } else { 0.0 } - 1.0 / k as f64)
}

/// `S ⊗ 1_nᵀ`.
pub fn etf_target(k: usize, n: usize) -> DMatrix<f64> {
    let s = simplex_etf(k);
    DMatrix::from_fn(k, k * n, |r, c| s[(r, c / n)])
}

fn check_logits(z: &DMatrix<f64>, k: usize, n: usize) -> Result<()> {
    if z.shape() != (k, k * n) {
        return Err(Error::Shape(format!("logits are {:?}, expected ({k}, {})", z.shape(), k * n)));
    }
    Ok(())
}

/// CE loss of a logit matrix, summed over all `Kn` samples.
pub fn logit_loss(z: &DMatrix<f64>, k: usize, n: usize) -> Result<f64> {
    check_logits(z, k, n)?;
    if !all_finite(z.as_slice()) {
        return Err(Error::domain("logits contain non-finite entries"));
    }
    let per_column = z.column_iter().enumerate().map(|(col, zc)| {
        let label = col / n;
        let (argmax, max) = zc.argmax();
        if argmax == label {
            // log(1 + Σ_{c'≠c} e^{z_c' − z_c}) without cancellation near 0
            ksum((0..k).filter(|&r| r != label).map(|r| (zc[r] - max).exp())).ln_1p()
        } else {
            let lse = ksum(zc.iter().map(|x| (x - max).exp())).ln();
            (max - zc[label]) + lse
        }
    });
    Ok(ksum(per_column))
}

pub fn ce_loss(state: &UfmState) -> Result<f64> {
    logit_loss(&state.logits(), state.k, state.n)
}

/// `Y − P(Z)`: the negative gradient of the CE loss with respect to logits.
pub fn logit_gradient(z: &DMatrix<f64>, k: usize, n: usize) -> Result<DMatrix<f64>> {
    check_logits(z, k, n)?;
    Ok(label_matrix(k, n) - softmax_columns(z)?)
}

/// `(dW, dH) = ((Y − P)Hᵀ, Wᵀ(Y − P))`, the gradient-flow direction.
pub fn ce_gradients(state: &UfmState) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let g = logit_gradient(&state.logits(), state.k, state.n)?;
    Ok((&g * state.h.transpose(), state.w.transpose() * g))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    RandomGaussian,
    HadamardSpectral,
    LogitHadamard,
}

/// Entry scale of the Gaussian initialization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceConvention {
    /// Entries with variance `1/K`, then multiplied by `ε`.
    #[default]
    Experiments,
    /// Entries `ε · d^{-1/2} · N(0, 1)`.
    Theorem8,
}

impl VarianceConvention {
    pub fn entry_std(self, epsilon: f64, k: usize, d: usize) -> f64 {
        match self {
            VarianceConvention::Experiments => epsilon / (k as f64).sqrt(),
            VarianceConvention::Theorem8 => epsilon / (d as f64).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub scheme: InitScheme,
    pub epsilon: f64,
    /// Logit singular values of the `K − 1` nontrivial modes (Hadamard
    /// schemes only). Defaults to `ε` on every mode.
    #[serde(default)]
    pub spectrum: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub variance_convention: VarianceConvention,
}

impl InitSpec {
    pub fn random(epsilon: f64, seed: u64, variance_convention: VarianceConvention) -> Self {
        Self {
            scheme: InitScheme::RandomGaussian,
            epsilon,
            spectrum: None,
            seed,
            variance_convention,
        }
    }

    pub fn hadamard(spectrum: Vec<f64>) -> Self {
        Self {
            scheme: InitScheme::HadamardSpectral,
            epsilon: 1.0,
            spectrum: Some(spectrum),
            seed: 0,
            variance_convention: VarianceConvention::default(),
        }
    }

    pub fn logit_hadamard(spectrum: Vec<f64>) -> Self {
        Self {
            scheme: InitScheme::LogitHadamard,
            ..Self::hadamard(spectrum)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Initialized {
    Factored(UfmState),
    Logits(DMatrix<f64>),
}

impl Initialized {
    pub fn into_state(self) -> Result<UfmState> {
        match self {
            Initialized::Factored(s) => Ok(s),
            Initialized::Logits(_) => Err(Error::Config("logit-hadamard init has no factored state".into())),
        }
    }

    pub fn logits(&self) -> DMatrix<f64> {
        match self {
            Initialized::Factored(s) => s.logits(),
            Initialized::Logits(z) => z.clone(),
        }
    }
}

/// Householder reflector `Q` (symmetric, orthogonal) with `Q e₁ = 1_n/√n`.
pub fn householder_q(n: usize) -> DMatrix<f64> {
    if n <= 1 {
        return DMatrix::identity(n, n);
    }
    let target = 1.0 / (n as f64).sqrt();
    let mut v = DVector::from_element(n, -target);
    v[0] += 1.0;
    let vv = v.dot(&v);
    DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vv)
}

/// Right singular vectors `uᵢ ⊗ q₁` (columns, `Kn × K`) paired with the
/// Hadamard modes, `q₁ = 1_n/√n`.
pub fn signal_right_vectors(basis: &HadamardBasis, n: usize) -> DMatrix<f64> {
    let k = basis.order();
    let q1 = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(k * n, k, |row, i| basis.u()[(row / n, i)] * q1)
}

/// Full right basis `V` with column `p·K + i` equal to `uᵢ ⊗ Q[:, p]`; the
/// first `K` columns are [`signal_right_vectors`].
pub fn right_basis(basis: &HadamardBasis, n: usize) -> DMatrix<f64> {
    let k = basis.order();
    let q = householder_q(n);
    DMatrix::from_fn(k * n, k * n, |row, col| {
        let (p, i) = (col / k, col % k);
        basis.u()[(row / n, i)] * q[(row % n, p)]
    })
}

fn spectrum_for(spec: &InitSpec, k: usize) -> Result<Vec<f64>> {
    let s = spec.spectrum.clone().unwrap_or_else(|| vec![spec.epsilon; k - 1]);
    if s.len() != k - 1 {
        return Err(Error::Shape(format!("spectrum has length {}, expected {}", s.len(), k - 1)));
    }
    if s.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::domain("spectrum entries must be strictly positive"));
    }
    Ok(s)
}

pub fn init(spec: &InitSpec, k: usize, n: usize, d: usize) -> Result<Initialized> {
    if k == 0 || n == 0 || d == 0 {
        return Err(Error::Shape(format!("K={k}, n={n}, d={d} must all be positive")));
    }
    if !(spec.epsilon > 0.0 && spec.epsilon.is_finite()) {
        return Err(Error::domain("epsilon must be positive"));
    }
    match spec.scheme {
        InitScheme::RandomGaussian => {
            let std = spec.variance_convention.entry_std(spec.epsilon, k, d);
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut draw = |rows: usize, cols: usize| {
                let vals: Vec<f64> = (0..rows * cols)
                    .map(|_| std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                    .collect();
                DMatrix::from_row_slice(rows, cols, &vals)
            };
            let w = draw(k, d);
            let h = draw(d, k * n);
            Ok(Initialized::Factored(UfmState::new(k, n, d, w, h)?))
        }
        InitScheme::HadamardSpectral => {
            if !is_power_of_two(k) {
                return Err(Error::NotPowerOfTwo(k));
            }
            if d < k {
                return Err(Error::Shape(format!("hadamard-spectral init needs d >= K, got d={d}, K={k}")));
            }
            let basis = HadamardBasis::for_classes(k)?;
            let s = spectrum_for(spec, k)?;
            // trivial mode zeroed, α = β = √s on the rest, R = I_d
            let root: Vec<f64> = std::iter::once(0.0).chain(s.iter().map(|x| x.sqrt())).collect();
            let mut w = DMatrix::zeros(k, d);
            let mut h = DMatrix::zeros(d, k * n);
            let v = signal_right_vectors(&basis, n);
            for (i, &r) in root.iter().enumerate() {
                w.column_mut(i).copy_from(&(basis.u().column(i) * r));
                h.row_mut(i).copy_from(&(v.column(i).transpose() * r));
            }
            Ok(Initialized::Factored(UfmState::new(k, n, d, w, h)?))
        }
        InitScheme::LogitHadamard => {
            if !is_power_of_two(k) {
                return Err(Error::NotPowerOfTwo(k));
            }
            let basis = HadamardBasis::for_classes(k)?;
            let s = spectrum_for(spec, k)?;
            let v = signal_right_vectors(&basis, n);
            let mut z = DMatrix::zeros(k, k * n);
            for (i, &si) in s.iter().enumerate() {
                z += basis.u().column(i + 1) * v.column(i + 1).transpose() * si;
            }
            Ok(Initialized::Logits(z))
        }
    }
}

/// One explicit Euler step `W += lr·dW`, `H += lr·dH`.
pub fn descend_step(state: &mut UfmState, lr: f64) -> Result<()> {
    let (dw, dh) = ce_gradients(state)?;
    state.w += dw * lr;
    state.h += dh * lr;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DescentRecord {
    pub iter: usize,
    pub state: UfmState,
    pub sample: MetricSample,
}

/// Gradient descent with metrics read from sorted singular values.
pub fn descend(state: UfmState, lr: f64, steps: usize, schedule: &Schedule) -> Result<Vec<DescentRecord>> {
    descend_with(state, lr, steps, schedule, ModeReadout::Sorted)
}

/// Gradient descent, logging a snapshot and a [`MetricSample`] at each
/// scheduled iteration (`t = lr · iter`).
pub fn descend_with(
    mut state: UfmState,
    lr: f64,
    steps: usize,
    schedule: &Schedule,
    readout: ModeReadout,
) -> Result<Vec<DescentRecord>> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::domain("learning rate must be positive"));
    }
    let basis = if is_power_of_two(state.k) && state.k >= 2 {
        Some(HadamardBasis::for_classes(state.k)?)
    } else {
        None
    };
    let mut cursor = schedule.cursor();
    let mut out = Vec::with_capacity(schedule.len());
    for iter in 1..=steps {
        let blowup = |e: Error| match e {
            Error::Domain(_) => Error::NonFinite { iteration: iter },
            other => other,
        };
        descend_step(&mut state, lr).map_err(blowup)?;
        if !all_finite(state.w.as_slice()) || !all_finite(state.h.as_slice()) {
            return Err(Error::NonFinite { iteration: iter });
        }
        if cursor.hit(iter) {
            let sample = metrics::matrix_sample(&state, basis.as_ref(), readout, lr * iter as f64).map_err(blowup)?;
            out.push(DescentRecord {
                iter,
                state: state.clone(),
                sample,
            });
        }
    }
    Ok(out)
}

/// `Cᵢ = αᵢ² − βᵢ²` over the nontrivial modes.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservedCharges {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub c: Vec<f64>,
}

impl ConservedCharges {
    /// Largest `|ΔCᵢ| / (αᵢ² + βᵢ²)` relative to `reference`.
    pub fn relative_drift(&self, reference: &ConservedCharges) -> f64 {
        self.c
            .iter()
            .zip(&reference.c)
            .zip(self.alpha.iter().zip(&self.beta))
            .map(|((c, c0), (a, b))| (c - c0).abs() / (a * a + b * b))
            .fold(0.0, f64::max)
    }
}

/// Singular values of `W` and `H` read along the Hadamard modes:
/// `αᵢ = ‖uᵢᵀW‖`, `βᵢ = ‖H vᵢ‖` with `vᵢ = uᵢ ⊗ q₁`.
pub fn charges(state: &UfmState, basis: &HadamardBasis) -> Result<ConservedCharges> {
    if basis.order() != state.k {
        return Err(Error::Shape(format!("basis order {} vs K = {}", basis.order(), state.k)));
    }
    let v = signal_right_vectors(basis, state.n);
    let uw = basis.u().transpose() * &state.w;
    let hv = &state.h * v;
    let alpha: Vec<f64> = (1..state.k).map(|i| uw.row(i).norm()).collect();
    let beta: Vec<f64> = (1..state.k).map(|i| hv.column(i).norm()).collect();
    let c = alpha.iter().zip(&beta).map(|(a, b)| a * a - b * b).collect();
    Ok(ConservedCharges { alpha, beta, c })
}

/// Logit amplitudes `uᵢᵀ Z vᵢ` on the nontrivial Hadamard modes.
pub fn mode_amplitudes(z: &DMatrix<f64>, basis: &HadamardBasis, n: usize) -> Result<Vec<f64>> {
    let k = basis.order();
    check_logits(z, k, n)?;
    let v = signal_right_vectors(basis, n);
    Ok((1..k).map(|i| basis.u().column(i).dot(&(z * v.column(i)))).collect())
}

/// Leading-order logits after the zeroth-order phase of a small random
/// initialization: `t* = ln(1/ε) / (2√n)` and
/// `Z(t*) ≈ ε² e^{2t*√n} / (2√n) · (S ⊗ 1ᵀ) = ε/(2√n) · (S ⊗ 1ᵀ)`.
pub fn zeroth_order_prediction(k: usize, n: usize, epsilon: f64) -> Result<(f64, DMatrix<f64>)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain("epsilon must lie in (0, 1)"));
    }
    let root_n = (n as f64).sqrt();
    let t_star = (1.0 / epsilon).ln() / (2.0 * root_n);
    let coeff = epsilon * epsilon * (2.0 * t_star * root_n).exp() / (2.0 * root_n);
    Ok((t_star, etf_target(k, n) * coeff))
}

/// `⟨Z, S⊗1ᵀ⟩ / (‖Z‖_F ‖S⊗1ᵀ‖_F)`.
pub fn etf_correlation(z: &DMatrix<f64>, k: usize, n: usize) -> Result<f64> {
    check_logits(z, k, n)?;
    let target = etf_target(k, n);
    let denom = z.norm() * target.norm();
    if denom == 0.0 {
        return Err(Error::domain("zero logit matrix has no direction"));
    }
    Ok(z.dot(&target) / denom)
}
