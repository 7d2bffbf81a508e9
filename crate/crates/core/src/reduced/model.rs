use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hadamard::HadamardBasis;
use crate::numeric::{all_finite, ksum, norm2};

/// Positions of the 2-entries of `Ψ` for a fixed class count.
///
/// Every entry of `Ψ` is 0 or 2, so products `Ψv` are evaluated as twice a
/// sum over the support of each row.
#[derive(Clone, Debug)]
pub struct ReducedModel {
    k: usize,
    support: Vec<Vec<usize>>,
}

/// Nonnegative vector of nontrivial logit singular values.
///
/// Zero entries are allowed and form the frozen part of the state; negative,
/// non-finite or all-zero vectors are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SingularState {
    a: Vec<f64>,
}

impl TryFrom<Vec<f64>> for SingularState {
    type Error = Error;

    fn try_from(a: Vec<f64>) -> Result<Self> {
        Self::new(a)
    }
}

impl From<SingularState> for Vec<f64> {
    fn from(s: SingularState) -> Self {
        s.a
    }
}

impl SingularState {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Shape("singular state must be nonempty".into()));
        }
        if !all_finite(&a) {
            return Err(Error::domain("singular values must be finite"));
        }
        if a.iter().any(|&x| x < 0.0) {
            return Err(Error::domain("singular values must be nonnegative"));
        }
        if a.iter().all(|&x| x == 0.0) {
            return Err(Error::domain("singular state is identically zero"));
        }
        Ok(Self { a })
    }

    /// `c · 1` in dimension `dim`.
    pub fn uniform(dim: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn l1(&self) -> f64 {
        ksum(self.a.iter().copied())
    }

    pub fn l2(&self) -> f64 {
        norm2(&self.a)
    }

    pub fn a_hat(&self) -> Vec<f64> {
        let l1 = self.l1();
        self.a.iter().map(|x| x / l1).collect()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.a.iter().all(|&x| x > 0.0)
    }

    pub(crate) fn require_positive(&self) -> Result<()> {
        if self.is_strictly_positive() {
            Ok(())
        } else {
            Err(Error::domain("singular values must be strictly positive"))
        }
    }
}

/// Quantities shared by every reduced vector field at one point.
///
/// With `s = min(m_min, 0)`, `weights[j] = e^{−(m_j − s)}` and
/// `denom = e^{s} + Σ weights`, so `D = e^{−s}·denom` and
/// `ratio[i] = bᵢ / D` are formed without any positive exponent.
#[derive(Clone, Debug)]
pub struct FieldEval {
    pub margins: Vec<f64>,
    pub m_min: f64,
    pub shift: f64,
    pub weights: Vec<f64>,
    pub denom: f64,
    /// `bᵢ / D`.
    pub ratio: Vec<f64>,
    /// `Σⱼ Ψᵢⱼ e^{−(mⱼ − m_min)}`.
    pub stable_b: Vec<f64>,
}

impl FieldEval {
    /// `bᵢ = Σⱼ Ψᵢⱼ e^{−mⱼ}`; underflows to 0 for large margins.
    pub fn b(&self) -> Vec<f64> {
        let scale = (-self.m_min).exp();
        self.stable_b.iter().map(|x| x * scale).collect()
    }

    /// `D = 1 + Σⱼ e^{−mⱼ}`.
    pub fn d(&self) -> f64 {
        self.denom * (-self.shift).exp()
    }

    /// `log D`, exact for arbitrarily large or negative margins.
    pub fn log_d(&self) -> f64 {
        if self.shift == 0.0 {
            ksum(self.weights.iter().copied()).ln_1p()
        } else {
            self.denom.ln() - self.shift
        }
    }
}

impl ReducedModel {
    pub fn new(k: usize) -> Result<Self> {
        let basis = HadamardBasis::for_classes(k)?;
        Ok(Self::from_basis(&basis))
    }

    pub fn from_basis(basis: &HadamardBasis) -> Self {
        Self {
            k: basis.order(),
            support: basis.psi_support(),
        }
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.k - 1
    }

    fn check_len(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.dim() {
            return Err(Error::Shape(format!(
                "state has length {}, expected {} for K = {}",
                a.len(),
                self.dim(),
                self.k
            )));
        }
        Ok(())
    }

    /// `Ψ v`.
    pub fn psi_mul(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        Ok(self.psi_mul_unchecked(v))
    }

    fn psi_mul_unchecked(&self, v: &[f64]) -> Vec<f64> {
        self.support
            .iter()
            .map(|row| 2.0 * ksum(row.iter().map(|&j| v[j])))
            .collect()
    }

    /// Margins `m = Ψa`.
    pub fn margins(&self, a: &[f64]) -> Result<Vec<f64>> {
        self.psi_mul(a)
    }

    pub fn evaluate(&self, a: &[f64]) -> Result<FieldEval> {
        self.check_len(a)?;
        if !all_finite(a) {
            return Err(Error::domain("reduced state contains non-finite entries"));
        }
        let margins = self.psi_mul_unchecked(a);
        let m_min = margins.iter().copied().fold(f64::INFINITY, f64::min);
        let shift = m_min.min(0.0);
        let weights: Vec<f64> = margins.iter().map(|m| (-(m - shift)).exp()).collect();
        let denom = shift.exp() + ksum(weights.iter().copied());
        let ratio: Vec<f64> = self.psi_mul_unchecked(&weights).into_iter().map(|x| x / denom).collect();
        let top: Vec<f64> = margins.iter().map(|m| (-(m - m_min)).exp()).collect();
        let stable_b = self.psi_mul_unchecked(&top);
        Ok(FieldEval {
            margins,
            m_min,
            shift,
            weights,
            denom,
            ratio,
            stable_b,
        })
    }

    fn evaluate_state(&self, a: &SingularState) -> Result<FieldEval> {
        self.evaluate(a.as_slice())
    }

    /// `daᵢ/dt = aᵢ bᵢ / D`.
    pub fn field(&self, a: &SingularState) -> Result<Vec<f64>> {
        let ev = self.evaluate_state(a)?;
        Ok(a.as_slice().iter().zip(&ev.ratio).map(|(x, r)| x * r).collect())
    }

    /// Replicator form `(âᵢ / D)(bᵢ − b̄)` with `b̄ = Σ âⱼ bⱼ`.
    pub fn normalized_field(&self, a: &SingularState) -> Result<Vec<f64>> {
        let ev = self.evaluate_state(a)?;
        let hat = a.a_hat();
        Ok(replicator(&hat, &ev.ratio))
    }

    /// `E(a) = log(1 + Σⱼ e^{−(Ψa)ⱼ})`.
    pub fn energy(&self, a: &[f64]) -> Result<f64> {
        Ok(self.evaluate(a)?.log_d())
    }

    /// `∂E/∂a = −b / D`.
    pub fn energy_gradient(&self, a: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(a)?.ratio.into_iter().map(|r| -r).collect())
    }

    /// Unit vector along `a ⊙ b̂`, `b̂ᵢ = Σⱼ Ψᵢⱼ e^{−(mⱼ − m_min)}`.
    pub fn normalized_flow_field(&self, a: &SingularState) -> Result<Vec<f64>> {
        let ev = self.evaluate_state(a)?;
        let v: Vec<f64> = a.as_slice().iter().zip(&ev.stable_b).map(|(x, b)| x * b).collect();
        let norm = norm2(&v);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateField);
        }
        Ok(v.into_iter().map(|x| x / norm).collect())
    }

    /// Logit-only flow `daᵢ/dt = bᵢ / D`; any finite `a` is accepted.
    pub fn logit_field(&self, a: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(a)?.ratio)
    }

    /// Embeds `a*` of this model as `(a*, 0_K)` in the model for `2K`.
    pub fn embed_zero_padded(&self, a: &[f64]) -> Result<(ReducedModel, Vec<f64>)> {
        self.check_len(a)?;
        let bigger = ReducedModel::new(2 * self.k)?;
        let mut out = a.to_vec();
        out.resize(bigger.dim(), 0.0);
        Ok((bigger, out))
    }
}

pub(crate) fn replicator(hat: &[f64], ratio: &[f64]) -> Vec<f64> {
    let mean = ksum(hat.iter().zip(ratio).map(|(h, r)| h * r));
    hat.iter().zip(ratio).map(|(h, r)| h * (r - mean)).collect()
}

/// Decoupled MSE product dynamics `2aᵢ(sᵢ − aᵢ)`.
pub fn mse_reference_field(a: &[f64], s: &[f64]) -> Result<Vec<f64>> {
    if a.len() != s.len() {
        return Err(Error::Shape(format!("state length {} vs target length {}", a.len(), s.len())));
    }
    if !all_finite(a) || !all_finite(s) {
        return Err(Error::domain("mse reference inputs must be finite"));
    }
    Ok(a.iter().zip(s).map(|(x, t)| 2.0 * x * (t - x)).collect())
}

/// `(1/(K−1))·1`.
pub fn uniform_stable_direction(k: usize) -> Result<Vec<f64>> {
    if k < 2 || !crate::numeric::is_power_of_two(k) {
        return Err(Error::NotPowerOfTwo(k));
    }
    Ok(vec![1.0 / (k - 1) as f64; k - 1])
}

/// `aᵢ(t) = aᵢ(0) / (aᵢ(0) + (1 − aᵢ(0)) e^{−t})`.
pub fn linearized_solution(a0: &[f64], t: f64) -> Result<Vec<f64>> {
    if a0.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::domain("linearized solution needs every a0 in (0, 1)"));
    }
    let decay = (-t).exp();
    Ok(a0.iter().map(|&x| x / (x + (1.0 - x) * decay)).collect())
}

/// Compensated `Σ xᵢ yᵢ`.
#[cfg(test)]
pub(crate) fn kdot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = crate::numeric::KahanSum::new();
    for (a, b) in x.iter().zip(y) {
        acc.add(a * b);
    }
    acc.value()
}
