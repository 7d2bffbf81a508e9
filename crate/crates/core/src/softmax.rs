//! Column-wise softmax and its spectral form in the Hadamard basis.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hadamard::HadamardBasis;
use crate::numeric::{all_finite, ksum};

/// Softmax applied to each column, with a per-column max shift.
pub fn softmax_columns(z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !all_finite(z.as_slice()) {
        return Err(Error::domain("softmax input contains non-finite entries"));
    }
    let mut out = z.clone();
    for mut col in out.column_iter_mut() {
        let max = col.max();
        col.apply(|x| *x = (*x - max).exp());
        let total = ksum(col.iter().copied());
        col /= total;
    }
    Ok(out)
}

/// Eigencoefficients of a Hadamard-diagonal logit matrix and of its softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSoftmax {
    pub a: Vec<f64>,
    pub nu: Vec<f64>,
}

impl SpectralSoftmax {
    /// `Σ νᵢ uᵢ uᵢᵀ`.
    pub fn reconstruct(&self, basis: &HadamardBasis) -> DMatrix<f64> {
        diag_in_basis(basis.u(), &self.nu)
    }
}

/// `U · diag(v) · Uᵀ` for a square basis `U`.
pub fn diag_in_basis(u: &DMatrix<f64>, v: &[f64]) -> DMatrix<f64> {
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(v));
    u * d * u.transpose()
}

/// `νᵢ = Σⱼ Φᵢⱼ e^{(Φa)ⱼ/K} / Σⱼ e^{(Φa)ⱼ/K}`.
pub fn spectral_softmax(basis: &HadamardBasis, a: &[f64]) -> Result<SpectralSoftmax> {
    let k = basis.order();
    if a.len() != k {
        return Err(Error::Shape(format!("coefficient vector has length {}, expected {k}", a.len())));
    }
    if !all_finite(a) {
        return Err(Error::domain("spectral softmax input contains non-finite entries"));
    }
    let exponents: Vec<f64> = (0..k)
        .map(|j| ksum((0..k).map(|l| f64::from(basis.sign(j, l)) * a[l])) / k as f64)
        .collect();
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exponents.iter().map(|e| (e - max).exp()).collect();
    let denom = ksum(weights.iter().copied());
    let nu = (0..k)
        .map(|i| ksum((0..k).map(|j| f64::from(basis.sign(i, j)) * weights[j])) / denom)
        .collect();
    Ok(SpectralSoftmax { a: a.to_vec(), nu })
}

/// `‖P(U diag(a) Uᵀ) − Σ νᵢ uᵢuᵢᵀ‖_F` with `ν` from [`spectral_softmax`].
pub fn diagonalization_residual(basis: &HadamardBasis, a: &[f64]) -> Result<f64> {
    let spectral = spectral_softmax(basis, a)?;
    let p = softmax_columns(&diag_in_basis(basis.u(), a))?;
    Ok((p - spectral.reconstruct(basis)).norm())
}

/// Best diagonal fit of `P(Q diag(a) Qᵀ)` in an arbitrary orthogonal basis
/// `Q`: `νᵢ = qᵢᵀ P qᵢ`, residual `‖P − Σ νᵢ qᵢqᵢᵀ‖_F`. For the Hadamard
/// basis this coincides with [`diagonalization_residual`].
pub fn diagonal_fit_residual(q: &DMatrix<f64>, a: &[f64]) -> Result<f64> {
    if q.nrows() != q.ncols() || q.nrows() != a.len() {
        return Err(Error::Shape(format!(
            "basis is {}x{}, coefficients have length {}",
            q.nrows(),
            q.ncols(),
            a.len()
        )));
    }
    let p = softmax_columns(&diag_in_basis(q, a))?;
    let nu: Vec<f64> = q.column_iter().map(|c| c.dot(&(&p * c))).collect();
    Ok((p - diag_in_basis(q, &nu)).norm())
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal<R: rand::Rng + ?Sized>(k: usize, rng: &mut R) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let g = DMatrix::from_fn(k, k, |_, _| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hadamard::sylvester;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_orthogonal(8, &mut rng);
        assert!((q.transpose() * &q - DMatrix::identity(8, 8)).norm() < 1e-13);
    }

    #[test]
    fn zero_logits_give_uniform_columns() {
        let p = softmax_columns(&DMatrix::zeros(4, 4)).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn saturated_diagonal() {
        let z = DMatrix::from_diagonal(&DVector::from_vec(vec![1000.0, 1000.0]));
        let p = softmax_columns(&z).unwrap();
        assert!((p - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let mut z = DMatrix::zeros(2, 2);
        z[(0, 1)] = f64::NAN;
        assert!(matches!(softmax_columns(&z), Err(Error::Domain(_))));
    }

    #[test]
    fn spectral_softmax_at_zero_is_first_unit_vector() {
        for m in 1..=5 {
            let b = sylvester(m).unwrap();
            let s = spectral_softmax(&b, &vec![0.0; b.order()]).unwrap();
            assert_eq!(s.nu[0], 1.0);
            assert!(s.nu[1..].iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn binary_closed_form_is_tanh() {
        let b = sylvester(1).unwrap();
        let s = spectral_softmax(&b, &[0.0, 2.0]).unwrap();
        assert_eq!(s.nu[0], 1.0);
        assert!((s.nu[1] - 1f64.tanh()).abs() < 1e-15);
        assert!((s.nu[1] - 0.761_594_155_955_764_9).abs() < 1e-15);
    }

    #[test]
    fn first_coefficient_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = sylvester(4).unwrap();
        for _ in 0..20 {
            let a: Vec<f64> = (0..16).map(|_| rng.random_range(-40.0..40.0)).collect();
            let s = spectral_softmax(&b, &a).unwrap();
            assert!((s.nu[0] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_coefficients_have_zero_residual() {
        for m in 0..=5 {
            let b = sylvester(m).unwrap();
            assert!(diagonalization_residual(&b, &vec![0.0; b.order()]).unwrap() < 1e-15);
        }
    }

    #[test]
    fn reconstruction_matches_brute_force_k8() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = sylvester(3).unwrap();
        let a: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s = spectral_softmax(&b, &a).unwrap();
        let brute = softmax_columns(&diag_in_basis(b.u(), &a)).unwrap();
        let rec = s.reconstruct(&b);
        for (x, y) in rec.iter().zip(brute.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
        // column-stochastic reconstruction
        for c in rec.column_iter() {
            assert!((c.sum() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hadamard_fit_equals_spectral_residual() {
        let b = sylvester(3).unwrap();
        let a = [0.3, -1.0, 2.0, 0.5, -0.7, 1.1, 0.0, 2.5];
        let r = diagonal_fit_residual(b.u(), &a).unwrap();
        assert!(r < 1e-13);
    }

    #[test]
    fn softmax_output_is_dyadic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in 0..=4 {
            let b = sylvester(m).unwrap();
            let k = b.order();
            let a: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = softmax_columns(&diag_in_basis(b.u(), &a)).unwrap();
            for i in 0..k {
                for j in 0..k {
                    assert!((p[(i, j)] - p[(0, i ^ j)]).abs() < 1e-14, "K={k} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn spectral_matches_projection_onto_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = sylvester(4).unwrap();
        let a: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = softmax_columns(&diag_in_basis(b.u(), &a)).unwrap();
        let s = spectral_softmax(&b, &a).unwrap();
        for (i, u) in b.u().column_iter().enumerate() {
            assert!((u.dot(&(&p * u)) - s.nu[i]).abs() < 1e-12);
        }
    }
}
