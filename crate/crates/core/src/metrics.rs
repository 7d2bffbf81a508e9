//! Distances to collapse, their time derivatives along the reduced flow,
//! and diagnostics on logit matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hadamard::HadamardBasis;
use crate::numeric::{ksum, norm2, KahanSum};
use crate::reduced::{ReducedModel, SingularState};
use crate::ufm::{self, UfmState};

/// One logged row of every tracked scalar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub t: f64,
    /// CE loss for matrix runs, energy `E(a)` (or a rescaling of it) for
    /// reduced runs.
    pub loss: f64,
    pub m: f64,
    pub kl_forward: f64,
    pub kl_reverse: f64,
    pub frob_nc: f64,
    pub log_ratio: f64,
    pub min_margin: f64,
    pub l1: f64,
    pub residual_energy: Option<f64>,
    /// The mode amplitudes the metrics were computed from.
    pub modes: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NcDistances {
    pub m: f64,
    pub kl_forward: f64,
    pub kl_reverse: f64,
    pub frob_nc: f64,
    pub log_ratio: f64,
}

/// Metric selector used by monotonicity scans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "M")]
    M,
    #[serde(rename = "kl_forward")]
    KlForward,
    #[serde(rename = "kl_reverse")]
    KlReverse,
    #[serde(rename = "frob_nc")]
    FrobNc,
    #[serde(rename = "log_ratio")]
    LogRatio,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::M, Metric::KlForward, Metric::KlReverse, Metric::FrobNc, Metric::LogRatio];

    pub fn name(self) -> &'static str {
        match self {
            Metric::M => "M",
            Metric::KlForward => "kl_forward",
            Metric::KlReverse => "kl_reverse",
            Metric::FrobNc => "frob_nc",
            Metric::LogRatio => "log_ratio",
        }
    }

    pub fn rate(self, r: &MetricRates) -> f64 {
        match self {
            Metric::M => r.m,
            Metric::KlForward => r.kl_forward,
            Metric::KlReverse => r.kl_reverse,
            Metric::FrobNc => r.frob_nc,
            Metric::LogRatio => r.log_ratio,
        }
    }

    pub fn value(self, d: &NcDistances) -> f64 {
        match self {
            Metric::M => d.m,
            Metric::KlForward => d.kl_forward,
            Metric::KlReverse => d.kl_reverse,
            Metric::FrobNc => d.frob_nc,
            Metric::LogRatio => d.log_ratio,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unknown {
                kind: "metric",
                name: s.to_string(),
            })
    }
}

/// Time derivatives of the five distances along the CE flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRates {
    pub m: f64,
    pub kl_forward: f64,
    pub kl_reverse: f64,
    pub frob_nc: f64,
    /// `Σᵢⱼ aᵢ aⱼ bⱼ (aⱼ − aᵢ)` with unshifted `b`.
    pub frob_raw: f64,
    pub log_ratio: f64,
}

pub fn nc_distances(a: &SingularState) -> NcDistances {
    let v = a.as_slice();
    let dim = v.len() as f64;
    let hat = a.a_hat();
    let target = 1.0 / dim;
    let m = 0.5 * ksum(hat.iter().map(|h| (h - target) * (h - target)));
    let kl_forward = if hat.contains(&0.0) {
        f64::INFINITY
    } else {
        (-dim.ln() - ksum(hat.iter().map(|h| h.ln())) / dim).max(0.0)
    };
    let kl_reverse = (dim.ln() + ksum(hat.iter().filter(|&&h| h > 0.0).map(|h| h * h.ln()))).max(0.0);
    let l2 = a.l2();
    let c = 1.0 / dim.sqrt();
    let frob_nc = ksum(v.iter().map(|x| (x / l2 - c) * (x / l2 - c)));
    let (lo, hi) = v
        .iter()
        .filter(|&&x| x > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let log_ratio = hi.ln() - lo.ln();
    NcDistances {
        m,
        kl_forward,
        kl_reverse,
        frob_nc,
        log_ratio,
    }
}

fn arg_extrema(v: &[f64]) -> (usize, usize) {
    let mut imax = 0;
    let mut imin = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[imax] {
            imax = i;
        }
        if x < v[imin] {
            imin = i;
        }
    }
    (imax, imin)
}

pub fn metric_time_derivatives(model: &ReducedModel, a: &SingularState) -> Result<MetricRates> {
    a.require_positive()?;
    let ev = model.evaluate(a.as_slice())?;
    let v = a.as_slice();
    let dim = v.len();
    let hat = a.a_hat();
    let r = &ev.ratio;
    let rbar = ksum(hat.iter().zip(r).map(|(h, x)| h * x));

    let m = ksum(hat.iter().zip(r).map(|(h, x)| h * h * (x - rbar)));

    let x = &ev.margins;
    let w = &ev.weights;
    let mut pairs = KahanSum::new();
    for i in 0..dim {
        for j in 0..dim {
            pairs.add((x[i] - x[j]) * (w[i] - w[j]));
        }
    }
    let kl_forward = pairs.value() / (2.0 * dim as f64 * a.l1() * ev.denom);

    let kl_reverse = ksum(hat.iter().zip(r).map(|(h, x)| (x - rbar) * h * h.ln()));

    let b = ev.b();
    let mut raw = KahanSum::new();
    let mut scaled = KahanSum::new();
    for i in 0..dim {
        for j in 0..dim {
            raw.add(v[i] * v[j] * b[j] * (v[j] - v[i]));
            scaled.add(v[i] * v[j] * r[j] * (v[j] - v[i]));
        }
    }
    let l2 = a.l2();
    let frob_nc = 2.0 * scaled.value() / (l2.powi(3) * (dim as f64).sqrt());

    let (imax, imin) = arg_extrema(v);
    let log_ratio = r[imax] - r[imin];

    Ok(MetricRates {
        m,
        kl_forward,
        kl_reverse,
        frob_nc,
        frob_raw: raw.value(),
        log_ratio,
    })
}

/// Probe at which the log-ratio distance grows for `K = 16`.
pub const LOG_RATIO_PROBE_K16: [f64; 15] = [5.01, 0.99, 2.0, 5.0, 1.0, 5.0, 1.0, 2.0, 1.0, 5.0, 3.0, 5.0, 1.0, 5.0, 1.0];

/// `dM_LR/dt` at [`LOG_RATIO_PROBE_K16`].
pub fn log_ratio_derivative_k16() -> Result<f64> {
    let model = ReducedModel::new(16)?;
    let a = SingularState::new(LOG_RATIO_PROBE_K16.to_vec())?;
    Ok(metric_time_derivatives(&model, &a)?.log_ratio)
}

/// Whether `M ≤ min(1/(8K²), 1/(18K³‖a‖₁²))`, and that threshold.
pub fn basin_check(model: &ReducedModel, a: &SingularState) -> Result<(bool, f64)> {
    a.require_positive()?;
    let k = model.classes() as f64;
    let l1 = a.l1();
    let threshold = (1.0 / (8.0 * k * k)).min(1.0 / (18.0 * k.powi(3) * l1 * l1));
    Ok((nc_distances(a).m <= threshold, threshold))
}

/// Smallest entry of `Ψâ` with every index attaining it.
pub fn min_normalized_margin(model: &ReducedModel, a: &SingularState) -> Result<(f64, Vec<usize>)> {
    let margins = model.psi_mul(&a.a_hat())?;
    let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * min.abs().max(1.0);
    let argmin = margins
        .iter()
        .enumerate()
        .filter(|(_, &m)| m - min <= tol)
        .map(|(i, _)| i)
        .collect();
    Ok((min, argmin))
}

/// Fraction of `‖Z‖_F` outside the nontrivial Hadamard modes.
pub fn residual_energy(z: &DMatrix<f64>, basis: &HadamardBasis, n: usize) -> Result<f64> {
    let k = basis.order();
    if z.shape() != (k, k * n) {
        return Err(Error::Shape(format!("logits are {:?}, expected ({k}, {})", z.shape(), k * n)));
    }
    let norm = z.norm();
    if norm == 0.0 {
        return Err(Error::domain("residual energy of a zero matrix"));
    }
    let left = basis.u().columns(1, k - 1);
    let right_all = ufm::signal_right_vectors(basis, n);
    let right = right_all.columns(1, k - 1);
    let core = left.transpose() * z * right;
    let projected = left * core * right.transpose();
    Ok((z - projected).norm() / norm)
}

fn nuclear_norm(a: &DMatrix<f64>) -> f64 {
    ksum(a.singular_values().iter().copied())
}

/// `‖A/‖A‖_* − S/‖S‖_*‖_F` for a `K × K` matrix `A`.
pub fn alignment(a: &DMatrix<f64>, k: usize) -> Result<f64> {
    if a.shape() != (k, k) {
        return Err(Error::Shape(format!("alignment needs a {k}×{k} matrix, got {:?}", a.shape())));
    }
    let nuc = nuclear_norm(a);
    if nuc == 0.0 {
        return Err(Error::domain("alignment of a zero matrix"));
    }
    let s = ufm::simplex_etf(k);
    let s_nuc = (k - 1) as f64;
    Ok((a / nuc - s / s_nuc).norm())
}

/// Class means of the logit columns, a `K × K` matrix.
pub fn class_mean_logits(z: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let k = z.nrows();
    DMatrix::from_fn(k, z.ncols() / n, |r, c| ksum((0..n).map(|p| z[(r, c * n + p)])) / n as f64)
}

/// Largest `count` singular values in descending order.
pub fn top_singular_values(z: &DMatrix<f64>, count: usize) -> Vec<f64> {
    let mut sv: Vec<f64> = z.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.truncate(count);
    sv
}

/// How mode amplitudes are read off a logit matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ModeReadout {
    /// Top `K − 1` singular values, descending.
    #[default]
    Sorted,
    /// `uᵢᵀ Z vᵢ` in Hadamard mode order (magnitudes).
    Hadamard,
}

fn distances_or_zero(modes: &[f64]) -> (Option<SingularState>, NcDistances) {
    match SingularState::new(modes.to_vec()) {
        Ok(s) => {
            let d = nc_distances(&s);
            (Some(s), d)
        }
        Err(_) => (
            None,
            NcDistances {
                m: f64::NAN,
                kl_forward: f64::NAN,
                kl_reverse: f64::NAN,
                frob_nc: f64::NAN,
                log_ratio: f64::NAN,
            },
        ),
    }
}

/// Metrics of a reduced state; `loss` is supplied by the caller.
pub fn reduced_sample(model: &ReducedModel, a: &SingularState, t: f64, loss: f64) -> Result<MetricSample> {
    let d = nc_distances(a);
    let (min_margin, _) = min_normalized_margin(model, a)?;
    Ok(MetricSample {
        t,
        loss,
        m: d.m,
        kl_forward: d.kl_forward,
        kl_reverse: d.kl_reverse,
        frob_nc: d.frob_nc,
        log_ratio: d.log_ratio,
        min_margin,
        l1: a.l1(),
        residual_energy: None,
        modes: a.as_slice().to_vec(),
    })
}

/// Metrics of a full-model state. Mode metrics use raw singular values;
/// the residual energy and margins need a Hadamard basis of order `K`.
pub fn matrix_sample(state: &UfmState, basis: Option<&HadamardBasis>, readout: ModeReadout, t: f64) -> Result<MetricSample> {
    let z = state.logits();
    let k = state.classes();
    let n = state.per_class();
    let loss = ufm::logit_loss(&z, k, n)?;
    logits_sample(&z, k, n, basis, readout, t, loss)
}

/// Metrics of a logit matrix with a known loss.
pub fn logits_sample(
    z: &DMatrix<f64>,
    k: usize,
    n: usize,
    basis: Option<&HadamardBasis>,
    readout: ModeReadout,
    t: f64,
    loss: f64,
) -> Result<MetricSample> {
    let modes = match (readout, basis) {
        (ModeReadout::Hadamard, Some(b)) => ufm::mode_amplitudes(z, b, n)?.into_iter().map(f64::abs).collect(),
        _ => top_singular_values(z, k.saturating_sub(1)),
    };
    let (state, d) = distances_or_zero(&modes);
    let (min_margin, residual) = match basis {
        Some(b) => {
            let model = ReducedModel::from_basis(b);
            let margin = match &state {
                Some(s) => min_normalized_margin(&model, s)?.0,
                None => f64::NAN,
            };
            let res = if z.norm() > 0.0 { Some(residual_energy(z, b, n)?) } else { None };
            (margin, res)
        }
        None => (f64::NAN, None),
    };
    Ok(MetricSample {
        t,
        loss,
        m: d.m,
        kl_forward: d.kl_forward,
        kl_reverse: d.kl_reverse,
        frob_nc: d.frob_nc,
        log_ratio: d.log_ratio,
        min_margin,
        l1: ksum(modes.iter().copied()),
        residual_energy: residual,
        modes,
    })
}

/// `‖v‖₂`, exposed for the harness.
pub fn l2(v: &[f64]) -> f64 {
    norm2(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn st(v: &[f64]) -> SingularState {
        SingularState::new(v.to_vec()).unwrap()
    }

    #[test]
    fn uniform_has_zero_distances() {
        let d = nc_distances(&st(&[0.7; 7]));
        assert!(d.m.abs() < 1e-15);
        assert!(d.kl_forward.abs() < 1e-15);
        assert!(d.kl_reverse.abs() < 1e-15);
        assert!(d.frob_nc.abs() < 1e-15);
        assert_eq!(d.log_ratio, 0.0);
    }

    #[test]
    fn point_mass_k4() {
        let d = nc_distances(&st(&[1.0, 0.0, 0.0]));
        assert!((d.m - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.kl_reverse - 3f64.ln()).abs() < 1e-15);
        assert_eq!(d.kl_forward, f64::INFINITY);
        assert_eq!(d.log_ratio, 0.0);
    }

    #[test]
    fn kl_forward_against_direct_sum() {
        let a = st(&[0.2, 1.0, 3.0]);
        let hat = a.a_hat();
        let u = 1.0 / 3.0;
        let direct: f64 = hat.iter().map(|h| u * (u / h).ln()).sum();
        assert!((nc_distances(&a).kl_forward - direct).abs() < 1e-15);
    }

    #[test]
    fn counterexample_probes() {
        let m8 = ReducedModel::new(8).unwrap();
        let r = metric_time_derivatives(&m8, &st(&[1.0, 1.0, 1.0, 1.25, 0.01, 0.01, 0.01])).unwrap();
        assert!((r.m - 7.3e-4).abs() < 0.073e-4, "{}", r.m);
        let r = metric_time_derivatives(&m8, &st(&[1.0, 1.0, 1.0, 1.25, 1e-4, 1e-4, 1e-4])).unwrap();
        assert!((r.kl_reverse - 0.0037).abs() < 0.00037, "{}", r.kl_reverse);
        assert!((r.frob_raw - 0.088).abs() < 0.0088, "{}", r.frob_raw);
        let lr = log_ratio_derivative_k16().unwrap();
        assert!((1e-14..=1e-12).contains(&lr), "{lr}");
    }

    #[test]
    fn uniform_k16_log_ratio_rate_vanishes() {
        let m = ReducedModel::new(16).unwrap();
        let r = metric_time_derivatives(&m, &st(&[2.0; 15])).unwrap();
        assert!(r.log_ratio.abs() < 1e-15);
    }

    #[test]
    fn derivatives_need_positive_state() {
        let m = ReducedModel::new(4).unwrap();
        assert!(matches!(
            metric_time_derivatives(&m, &st(&[1.0, 0.0, 1.0])),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn log_ratio_decreases_for_k8() {
        let m = ReducedModel::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let a: Vec<f64> = (0..7).map(|_| rng.random_range(0.01..3.0)).collect();
            assert!(metric_time_derivatives(&m, &st(&a)).unwrap().log_ratio <= 0.0);
        }
    }

    #[test]
    fn basin_examples() {
        let m = ReducedModel::new(8).unwrap();
        let (inside, th) = basin_check(&m, &st(&[1.0, 1.0, 1.0, 1.25, 0.01, 0.01, 0.01])).unwrap();
        assert!(!inside);
        assert!(th <= 1.0 / 512.0);
        assert!((nc_distances(&st(&[1.0, 1.0, 1.0, 1.25, 0.01, 0.01, 0.01])).m - 0.053).abs() < 1e-3);
        assert!(basin_check(&m, &st(&[40.0; 7])).unwrap().0);
    }

    #[test]
    fn min_margin_examples() {
        let m = ReducedModel::new(8).unwrap();
        let (v, arg) = min_normalized_margin(&m, &st(&[3.0; 7])).unwrap();
        assert!((v - 8.0 / 7.0).abs() < 1e-14);
        assert_eq!(arg, (0..7).collect::<Vec<_>>());
        let (conv, _) = min_normalized_margin(&m, &st(&[1.0, 1.0, 1.0, 2.0, 0.0, 0.0, 0.0])).unwrap();
        let (star, _) = min_normalized_margin(&m, &st(&[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(conv > star, "{conv} vs {star}");
    }

    #[test]
    fn residual_energy_examples() {
        let b = HadamardBasis::for_classes(4).unwrap();
        assert!(residual_energy(&ufm::simplex_etf(4), &b, 1).unwrap() < 1e-12);
        let b8 = HadamardBasis::for_classes(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = DMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
        let r = residual_energy(&z, &b8, 1).unwrap();
        assert!(r > 0.1 && r <= 1.0);
        assert!(residual_energy(&DMatrix::zeros(4, 4), &b, 1).is_err());
    }

    #[test]
    fn alignment_examples() {
        let s = ufm::simplex_etf(4);
        assert!(alignment(&(&s * 3.5), 4).unwrap() < 1e-14);
        let id = alignment(&DMatrix::identity(4, 4), 4).unwrap();
        // I/4 − S/3 has zero diagonal and 1/12 off the diagonal
        assert!((id - (1.0f64 / 12.0).sqrt()).abs() < 1e-14, "{id}");
        let mut p = s.clone();
        p[(0, 1)] += 1e-9;
        assert!(alignment(&p, 4).unwrap() < 1e-8);
        assert!(alignment(&DMatrix::zeros(4, 4), 4).is_err());
    }

    #[test]
    fn metric_names_parse() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("loss".parse::<Metric>().is_err());
    }
}
