//! Sylvester-Hadamard matrices and the derived core matrix `Ψ`.
//!
//! Rows and columns of `Φ` are indexed from 0, with index 0 the all-ones
//! (trivial) mode. `Ψ` drops that mode, so `Ψ[i][j]` corresponds to
//! `Φ[i + 1][j + 1]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numeric::is_power_of_two;

/// Default upper bound on the Hadamard order `K`.
pub const DEFAULT_MAX_ORDER: usize = 1 << 10;

/// `Φ`, its orthonormal form `U = Φ / √K`, and the core matrix `Ψ`.
#[derive(Clone, Debug)]
pub struct HadamardBasis {
    order: usize,
    signs: Vec<i8>,
    phi: DMatrix<f64>,
    u: DMatrix<f64>,
    psi: DMatrix<f64>,
}

/// Builds `Φ_{2^m}` with the default order limit.
pub fn sylvester(m: u32) -> Result<HadamardBasis> {
    sylvester_with_max(m, DEFAULT_MAX_ORDER)
}

pub fn sylvester_with_max(m: u32, max_order: usize) -> Result<HadamardBasis> {
    let too_big = Error::Size {
        exponent: m,
        max: max_order,
    };
    let order = 1usize.checked_shl(m).ok_or(too_big)?;
    if order > max_order || m >= usize::BITS {
        return Err(Error::Size {
            exponent: m,
            max: max_order,
        });
    }

    // Recursive doubling in integer arithmetic: [[Φ, Φ], [Φ, -Φ]].
    let mut signs = vec![1i8];
    let mut k = 1usize;
    while k < order {
        let two_k = 2 * k;
        let mut next = vec![0i8; two_k * two_k];
        for i in 0..k {
            for j in 0..k {
                let s = signs[i * k + j];
                next[i * two_k + j] = s;
                next[i * two_k + j + k] = s;
                next[(i + k) * two_k + j] = s;
                next[(i + k) * two_k + j + k] = -s;
            }
        }
        signs = next;
        k = two_k;
    }

    let phi = DMatrix::from_fn(order, order, |i, j| f64::from(signs[i * order + j]));
    let u = &phi / (order as f64).sqrt();
    let psi = DMatrix::from_fn(order.saturating_sub(1), order.saturating_sub(1), |i, j| {
        1.0 - f64::from(signs[(i + 1) * order + j + 1])
    });
    Ok(HadamardBasis {
        order,
        signs,
        phi,
        u,
        psi,
    })
}

impl HadamardBasis {
    /// Basis for `k` classes; `k` must be a power of two.
    pub fn for_classes(k: usize) -> Result<Self> {
        if !is_power_of_two(k) {
            return Err(Error::NotPowerOfTwo(k));
        }
        sylvester(k.trailing_zeros())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Integer entry `Φ[i][j] ∈ {±1}`.
    pub fn sign(&self, i: usize, j: usize) -> i8 {
        self.signs[i * self.order + j]
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// `Ψ = 1·1ᵀ − Φ[1.., 1..]`, a `(K−1)×(K−1)` matrix with entries in {0, 2}.
    pub fn core_psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    /// Row `i` of `Φ` as integers.
    pub fn row(&self, i: usize) -> &[i8] {
        &self.signs[i * self.order..(i + 1) * self.order]
    }

    /// Permutation `Π_i` sending row `j` to row `i ⊕ j`, so that
    /// `Φ · diag(φ_i) = Π_i · Φ`.
    pub fn row_xor_permutation(&self, i: usize) -> Result<DMatrix<f64>> {
        if i >= self.order {
            return Err(Error::Index {
                index: i,
                order: self.order,
            });
        }
        let k = self.order;
        Ok(DMatrix::from_fn(k, k, |r, c| if c == (i ^ r) { 1.0 } else { 0.0 }))
    }

    /// For each row of `Ψ`, the column indices holding a 2.
    pub fn psi_support(&self) -> Vec<Vec<usize>> {
        let n = self.order.saturating_sub(1);
        (0..n)
            .map(|i| (0..n).filter(|&j| self.psi[(i, j)] != 0.0).collect())
            .collect()
    }
}
