//! Small dense linear-algebra helpers on 6×6 matrices.

use nalgebra::{Matrix6, Schur, SVD};
use num_complex::Complex64;

use crate::{Error, Result};

pub type RMat6 = Matrix6<f64>;
pub type CMat6 = Matrix6<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Eigenvalues and unit-norm right eigenvectors (columns of `vectors`).
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: [Complex64; 6],
    pub vectors: CMat6,
}

impl EigenDecomposition {
    /// Condition number of the eigenvector matrix in the 2-norm.
    pub fn condition(&self) -> f64 {
        condition_number(&self.vectors)
    }
}

pub fn to_complex(m: &RMat6) -> CMat6 {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Complex Schur form `M = Q T Q†`, then back-substitution on the triangular
/// factor for each eigenvector.
pub fn eigen_decompose(m: &RMat6) -> Result<EigenDecomposition> {
    eigen_decompose_complex(&to_complex(m))
}

pub fn eigen_decompose_complex(m: &CMat6) -> Result<EigenDecomposition> {
    let norm = m.norm();
    let schur = Schur::try_new(*m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::InvalidInput("Schur iteration failed to converge".into()))?;
    let (q, t) = schur.unpack();
    let mut values = [Complex64::new(0.0, 0.0); 6];
    for (k, v) in values.iter_mut().enumerate() {
        *v = t[(k, k)];
    }
    let smin = (f64::EPSILON * norm).max(f64::MIN_POSITIVE);
    let mut vectors = CMat6::zeros();
    for k in 0..6 {
        let mut y = nalgebra::Vector6::<Complex64>::zeros();
        y[k] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for l in (j + 1)..=k {
                s += t[(j, l)] * y[l];
            }
            let mut den = t[(j, j)] - t[(k, k)];
            if den.norm() < smin {
                den = Complex64::new(smin, 0.0);
            }
            y[j] = -s / den;
        }
        let v = q * y;
        let n = v.norm();
        vectors.set_column(k, &(v / Complex64::new(n, 0.0)));
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Ratio of extreme singular values; infinite for a singular matrix.
pub fn condition_number(m: &CMat6) -> f64 {
    let svd = SVD::new(*m, false, false);
    let s = &svd.singular_values;
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Symplectic form `⊕ [[0, 1], [-1, 0]]` for three modes in
/// `[X_a, Y_a, X_b1, Y_b1, X_b2, Y_b2]` order.
pub fn symplectic_form() -> RMat6 {
    let mut s = RMat6::zeros();
    for k in 0..3 {
        s[(2 * k, 2 * k + 1)] = 1.0;
        s[(2 * k + 1, 2 * k)] = -1.0;
    }
    s
}

/// Smallest eigenvalue of the Hermitian matrix `V + (i/2) Σ`; nonnegative for
/// a physical Gaussian state with vacuum variance 1/2.
pub fn physicality_margin(v_sym: &RMat6) -> f64 {
    let sigma = symplectic_form();
    let h = CMat6::from_fn(|i, j| Complex64::new(v_sym[(i, j)], 0.5 * sigma[(i, j)]));
    let eig = nalgebra::SymmetricEigen::new(h);
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Elementwise maximum of `|a - b| / max(|b|, floor)` over entries.
pub fn max_rel_diff(a: &RMat6, b: &RMat6, floor: f64) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor))
        .fold(0.0, f64::max)
}
