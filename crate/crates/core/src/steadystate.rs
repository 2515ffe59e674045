//! Stationary covariance of the unmodulated system.
//!
//! Two independent routes are provided: the residue formula evaluated in the
//! eigenbasis of `M⁽⁰⁾`, and the algebraic Lyapunov equation
//! `M V + V Mᵀ + D = 0` (eigenbasis form, or the vectorised 36×36 solve that
//! needs no diagonalisation).

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::drift::NoiseMatrices;
use crate::linalg::{eigen_decompose, CMat6, EigenDecomposition, RMat6};
use crate::{Error, Result};

/// Eigenvector matrices with a larger condition number are treated as
/// defective.
pub const DEFECTIVE_COND: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct Stability {
    pub stable: bool,
    /// Sorted by imaginary part.
    pub eigvals: Vec<Complex64>,
    pub max_re: f64,
}

pub fn stability(m0: &RMat6) -> Result<Stability> {
    let e = eigen_decompose(m0)?;
    let mut eigvals = e.values.to_vec();
    eigvals.sort_by(|a, b| a.im.total_cmp(&b.im));
    let max_re = eigvals.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(Stability {
        stable: max_re < 0.0,
        eigvals,
        max_re,
    })
}

fn diagonalize(m0: &RMat6) -> Result<(EigenDecomposition, CMat6, f64)> {
    let e = eigen_decompose(m0)?;
    let cond = e.condition();
    if !(cond <= DEFECTIVE_COND) {
        return Err(Error::DefectiveMatrix { cond });
    }
    let u_inv = e
        .vectors
        .try_inverse()
        .ok_or(Error::DefectiveMatrix { cond: f64::INFINITY })?;
    Ok((e, u_inv, cond))
}

/// Non-symmetrised stationary covariance `⟨R_i R_j⟩` from the residue
/// formula `V = Σ U N U⁻¹ C U⁻ᵀ Uᵀ` with pole weights
/// `(sgn Re λ_k + sgn Re λ_k') / (2 (λ_k + λ_k'))`.
pub fn covariance_residue(m0: &RMat6, c_mat: &CMat6) -> Result<CMat6> {
    let (e, u_inv, _) = diagonalize(m0)?;
    let sign = |z: Complex64| -> Result<f64> {
        if z.re == 0.0 {
            Err(Error::Unstable { max_re: 0.0 })
        } else {
            Ok(z.re.signum())
        }
    };
    let c_eig = u_inv * c_mat * u_inv.transpose();
    let mut w = CMat6::zeros();
    for k in 0..6 {
        for kp in 0..6 {
            let (lk, lkp) = (e.values[k], e.values[kp]);
            let weight = (sign(lk)? + sign(lkp)?) / (2.0 * (lk + lkp));
            w[(k, kp)] = c_eig[(k, kp)] * weight;
        }
    }
    Ok(e.vectors * w * e.vectors.transpose())
}

/// Lyapunov solution in the eigenbasis: `V = U X Uᵀ` with
/// `X_kq = -D'_kq / (λ_k + λ_q)` and `D' = U⁻¹ D U⁻ᵀ`.
pub fn lyapunov_eigenbasis(m0: &RMat6, d_mat: &RMat6) -> Result<RMat6> {
    let (e, u_inv, _) = diagonalize(m0)?;
    let d = d_mat.map(|x| Complex64::new(x, 0.0));
    let dp = u_inv * d * u_inv.transpose();
    let x = CMat6::from_fn(|k, q| -dp[(k, q)] / (e.values[k] + e.values[q]));
    let v = e.vectors * x * e.vectors.transpose();
    Ok(symmetrize(&v.map(|z| z.re)))
}

/// Lyapunov solution from the vectorised system
/// `(I ⊗ M + M ⊗ I) vec V = -vec D`.
pub fn lyapunov_direct(m0: &RMat6, d_mat: &RMat6) -> Result<RMat6> {
    let mut k = SMatrix::<f64, 36, 36>::zeros();
    // column-major vec: index(i, j) = i + 6 j
    for i in 0..6 {
        for j in 0..6 {
            let row = i + 6 * j;
            for l in 0..6 {
                k[(row, l + 6 * j)] += m0[(i, l)];
                k[(row, i + 6 * l)] += m0[(j, l)];
            }
        }
    }
    let rhs = SVector::<f64, 36>::from_iterator(d_mat.iter().map(|x| -x));
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidInput("singular Lyapunov operator".into()))?;
    let v = RMat6::from_iterator(sol.iter().cloned());
    Ok(symmetrize(&v))
}

pub fn lyapunov_residual(m0: &RMat6, v: &RMat6, d_mat: &RMat6) -> f64 {
    (m0 * v + v * m0.transpose() + d_mat).norm()
}

/// Symmetrised stationary covariance `V^s`. Uses the eigenbasis route when
/// the drift is comfortably diagonalisable and falls back to the direct
/// solve otherwise, or whenever the residual is not small enough.
pub fn covariance_lyapunov(m0: &RMat6, d_mat: &RMat6) -> Result<RMat6> {
    let st = stability(m0)?;
    if !st.stable {
        return Err(Error::Unstable { max_re: st.max_re });
    }
    let target = 1e-10 * d_mat.norm();
    if let Ok(v) = lyapunov_eigenbasis(m0, d_mat) {
        if lyapunov_residual(m0, &v, d_mat) < target {
            return Ok(v);
        }
    }
    let v = lyapunov_direct(m0, d_mat)?;
    Ok(v)
}

fn symmetrize(v: &RMat6) -> RMat6 {
    (v + v.transpose()) * 0.5
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryCovariance {
    #[serde(skip)]
    pub v: CMat6,
    #[serde(skip)]
    pub v_sym: RMat6,
    pub stable: bool,
    #[serde(skip)]
    pub eigvals: Vec<Complex64>,
    pub cond_u: f64,
}

impl StationaryCovariance {
    pub fn nbar(&self, resonator: usize) -> f64 {
        mean_phonon(&self.v_sym, resonator)
    }
}

/// Both stationary routes at once; fails if the drift is unstable or
/// defective.
pub fn stationary_covariance(m0: &RMat6, noise: &NoiseMatrices) -> Result<StationaryCovariance> {
    let st = stability(m0)?;
    if !st.stable {
        return Err(Error::Unstable { max_re: st.max_re });
    }
    let cond_u = eigen_decompose(m0)?.condition();
    let v = covariance_residue(m0, &noise.c_mat)?;
    let v_sym = covariance_lyapunov(m0, &noise.d_mat)?;
    Ok(StationaryCovariance {
        v,
        v_sym,
        stable: st.stable,
        eigvals: st.eigvals,
        cond_u,
    })
}

/// Mean phonon number `(V_XX + V_YY - 1)/2` of resonator 1 or 2 (0 selects
/// the cavity).
pub fn mean_phonon(v_sym: &RMat6, resonator: usize) -> f64 {
    let s = 2 * resonator;
    0.5 * (v_sym[(s, s)] + v_sym[(s + 1, s + 1)] - 1.0)
}
