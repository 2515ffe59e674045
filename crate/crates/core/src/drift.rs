//! Linearised quadrature dynamics `dR/dt = M(t) R + N(t)`.
//!
//! Ordering of `R` is `[X_a, Y_a, X_b1, Y_b1, X_b2, Y_b2]` with
//! `X = (δ + δ†)/√2` and `Y = (δ - δ†)/(i√2)`, so the vacuum variance is 1/2.
//!
//! Harmonic convention (a sign flip here silently corrupts every Floquet
//! result): `M(t) = M⁽¹⁾ e^{-iΩt} + M⁽⁰⁾ + M⁽⁻¹⁾ e^{+iΩt}`, matching
//! `⟨a⟩(t) = a_0 + a_{+1} e^{-iΩt} + a_{-1} e^{+iΩt}`.
//!
//! For a mode pair `(j, k)` the complex fluctuation equation
//! `dδ_j/dt = A δ_k + B δ_k†` becomes the real 2×2 block
//!
//! ```text
//! [ Re(A+B)  -Im(A-B) ]
//! [ Im(A+B)   Re(A-B) ]
//! ```
//!
//! which gives, with `α = ⟨a⟩` and coupling `g`:
//!
//! ```text
//! cavity self     [ -κ/2   Δ_a ]      mech self      [ -γ/2   ω_m ]
//!                 [ -Δ_a  -κ/2 ]                     [ -ω_m  -γ/2 ]
//!
//! cavity <- b_j   [ -2 Re g Im α   -2 Im g Im α ]
//!                 [  2 Re g Re α    2 Im g Re α ]
//!
//! b_j <- cavity   [ -2 Im g Re α   -2 Im g Im α ]
//!                 [  2 Re g Re α    2 Re g Im α ]
//!
//! b1 <- b2        [ -Im μ  -Re μ ]    b2 <- b1       [ Im μ  -Re μ ]
//!                 [  Re μ  -Im μ ]                   [ Re μ   Im μ ]
//! ```
//!
//! The time-dependent entries are linear in `Re α(t)`, `Im α(t)` and
//! `Δ_a(t)`; their harmonics follow from those of `α` and `Δ_a`.

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::classical::ClassicalSteadyState;
use crate::linalg::{CMat6, RMat6, I};
use crate::params::{DerivedParams, SystemParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DriftHarmonics {
    /// Coefficient of `e^{+iΩt}`; equals the elementwise conjugate of
    /// `m_plus1`.
    pub m_minus1: CMat6,
    pub m0: RMat6,
    /// Coefficient of `e^{-iΩt}`.
    pub m_plus1: CMat6,
    pub omega_mod: f64,
}

impl DriftHarmonics {
    /// A drift without modulation harmonics.
    pub fn stationary(m0: RMat6, omega_mod: f64) -> Self {
        DriftHarmonics {
            m_minus1: CMat6::zeros(),
            m0,
            m_plus1: CMat6::zeros(),
            omega_mod,
        }
    }

    /// Real drift matrix at time `t`.
    pub fn at(&self, t: f64) -> RMat6 {
        let e = Complex64::from_polar(1.0, -self.omega_mod * t);
        let osc = self.m_plus1 * e + self.m_minus1 * e.conj();
        self.m0 + osc.map(|z| z.re)
    }

    /// Largest imaginary part of `M(t)` over `samples` equally spaced times,
    /// relative to the norm of `M⁽⁰⁾`.
    pub fn reality_defect(&self, samples: usize) -> f64 {
        let period = 2.0 * std::f64::consts::PI / self.omega_mod;
        (0..samples)
            .map(|k| {
                let t = period * k as f64 / samples as f64;
                let e = Complex64::from_polar(1.0, -self.omega_mod * t);
                let osc = self.m_plus1 * e + self.m_minus1 * e.conj();
                osc.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
            / self.m0.norm()
    }

    pub fn is_modulated(&self) -> bool {
        self.m_plus1.iter().any(|z| z.norm() > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMatrices {
    /// Two-time correlation matrix of the quadrature noise (non-symmetrised).
    pub c_mat: CMat6,
    /// Diffusion matrix of the symmetrised covariance; the Hermitian part of
    /// `c_mat`.
    pub d_mat: RMat6,
}

/// Time-dependent inputs of the quadrature drift for one harmonic: the
/// harmonic of `Re α`, of `Im α` and of the effective detuning.
struct Modulation {
    re_alpha: Complex64,
    im_alpha: Complex64,
    detuning: Complex64,
}

fn set_block(m: &mut CMat6, row: usize, col: usize, b: Matrix2<Complex64>) {
    m.fixed_view_mut::<2, 2>(2 * row, 2 * col).copy_from(&b);
}

fn block(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Matrix2<Complex64> {
    Matrix2::new(a, b, c, d)
}

/// Part of the drift that depends on the classical orbit, for one harmonic.
fn orbit_part(params: &SystemParams, h: &Modulation) -> CMat6 {
    let mut m = CMat6::zeros();
    let zero = Complex64::new(0.0, 0.0);
    let (re, im) = (h.re_alpha, h.im_alpha);
    set_block(&mut m, 0, 0, block(zero, h.detuning, -h.detuning, zero));
    for (j, g) in [(1, params.g1()), (2, params.g2())] {
        let (gr, gi) = (g.re, g.im);
        set_block(
            &mut m,
            0,
            j,
            block(-2.0 * gr * im, -2.0 * gi * im, 2.0 * gr * re, 2.0 * gi * re),
        );
        set_block(
            &mut m,
            j,
            0,
            block(-2.0 * gi * re, -2.0 * gi * im, 2.0 * gr * re, 2.0 * gr * im),
        );
    }
    m
}

/// Orbit-independent part: decay, mechanical rotation and the mechanical
/// exchange coupling.
fn fixed_part(params: &SystemParams) -> RMat6 {
    let mut m = RMat6::zeros();
    let hk = 0.5 * params.kappa;
    m[(0, 0)] = -hk;
    m[(1, 1)] = -hk;
    for (j, gamma) in [(1, params.gamma1), (2, params.gamma2)] {
        let s = 2 * j;
        m[(s, s)] = -0.5 * gamma;
        m[(s + 1, s + 1)] = -0.5 * gamma;
        m[(s, s + 1)] = params.omega_m;
        m[(s + 1, s)] = -params.omega_m;
    }
    let mu = params.mu();
    m.fixed_view_mut::<2, 2>(2, 4)
        .copy_from(&Matrix2::new(-mu.im, -mu.re, mu.re, -mu.im));
    m.fixed_view_mut::<2, 2>(4, 2)
        .copy_from(&Matrix2::new(mu.im, -mu.re, mu.re, mu.im));
    m
}

pub fn build_drift(
    params: &SystemParams,
    _derived: &DerivedParams,
    classical: &ClassicalSteadyState,
) -> Result<DriftHarmonics> {
    // harmonics of Re α and Im α: the e^{-iΩt} coefficient of α* is conj(a_{-1})
    let harmonic = |alpha: Complex64, alpha_bar: Complex64, detuning: Complex64| Modulation {
        re_alpha: 0.5 * (alpha + alpha_bar),
        im_alpha: (alpha - alpha_bar) / (2.0 * I),
        detuning,
    };
    let h0 = harmonic(
        classical.a0,
        classical.a0.conj(),
        Complex64::new(classical.delta_a0, 0.0),
    );
    let hp = harmonic(classical.a_p1, classical.a_m1.conj(), classical.delta_a_p1);
    let hm = harmonic(
        classical.a_m1,
        classical.a_p1.conj(),
        classical.delta_a_p1.conj(),
    );

    let orbit0 = orbit_part(params, &h0);
    let scale = orbit0.norm().max(fixed_part(params).norm());
    let imag0 = orbit0.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag0 > 1e-12 * scale {
        return Err(Error::InvalidInput(format!(
            "static drift has imaginary residue {imag0:.3e}"
        )));
    }
    let m0 = fixed_part(params) + orbit0.map(|z| z.re);
    let m_plus1 = orbit_part(params, &hp);
    let m_minus1 = orbit_part(params, &hm);
    let h = DriftHarmonics {
        m_minus1,
        m0,
        m_plus1,
        omega_mod: params.omega_mod,
    };
    let defect = h.reality_defect(16);
    if defect > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "reconstructed drift is not real (defect {defect:.3e})"
        )));
    }
    Ok(h)
}

/// Derived parameters, classical steady state, drift harmonics and noise in
/// one call.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub derived: DerivedParams,
    pub classical: ClassicalSteadyState,
    pub drift: DriftHarmonics,
    pub noise: NoiseMatrices,
}

pub fn linearize(params: &SystemParams) -> Result<Linearization> {
    let derived = crate::params::derive(params)?;
    let classical = crate::classical::solve_classical(params, &derived)?;
    let drift = build_drift(params, &derived, &classical)?;
    let noise = build_noise(params, &derived);
    Ok(Linearization {
        derived,
        classical,
        drift,
        noise,
    })
}

pub fn build_noise(params: &SystemParams, derived: &DerivedParams) -> NoiseMatrices {
    let mut c = CMat6::zeros();
    let mut d = RMat6::zeros();
    let baths = [
        (params.kappa, derived.n_a),
        (params.gamma1, derived.n_m),
        (params.gamma2, derived.n_m),
    ];
    for (k, (rate, n)) in baths.into_iter().enumerate() {
        let s = 2 * k;
        let diag = 0.5 * rate * (2.0 * n + 1.0);
        c[(s, s)] = Complex64::new(diag, 0.0);
        c[(s + 1, s + 1)] = Complex64::new(diag, 0.0);
        c[(s, s + 1)] = -rate / (2.0 * I);
        c[(s + 1, s)] = rate / (2.0 * I);
        d[(s, s)] = diag;
        d[(s + 1, s + 1)] = diag;
    }
    NoiseMatrices { c_mat: c, d_mat: d }
}

/// Conjugates the drift by the permutation exchanging the two mechanical
/// quadrature pairs.
pub fn swap_mechanical(m: &RMat6) -> RMat6 {
    let perm = [0usize, 1, 4, 5, 2, 3];
    RMat6::from_fn(|i, j| m[(perm[i], perm[j])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::solve_classical;
    use crate::params::derive;
    use std::f64::consts::PI;

    fn harmonics(p: &SystemParams) -> DriftHarmonics {
        let d = derive(p).unwrap();
        let c = solve_classical(p, &d).unwrap();
        build_drift(p, &d, &c).unwrap()
    }

    #[test]
    fn decoupled_blocks() {
        let mut p = SystemParams::preset_default();
        p.g1_mag = 0.0;
        p.g2_mag = 0.0;
        let h = harmonics(&p);
        let mut expected = RMat6::zeros();
        let hk = p.kappa / 2.0;
        expected[(0, 0)] = -hk;
        expected[(1, 1)] = -hk;
        expected[(0, 1)] = p.delta;
        expected[(1, 0)] = -p.delta;
        for s in [2, 4] {
            expected[(s, s)] = -p.gamma1 / 2.0;
            expected[(s + 1, s + 1)] = -p.gamma1 / 2.0;
            expected[(s, s + 1)] = p.omega_m;
            expected[(s + 1, s)] = -p.omega_m;
        }
        assert_eq!(h.m0, expected);
        assert!(!h.is_modulated());
    }

    #[test]
    fn trace_identity() {
        for depth in [0.0, 0.5] {
            let p = SystemParams::preset_default()
                .with_mu_over_gamma_sum(52.5)
                .with_loop_phase(1.1)
                .with_depth(depth);
            let h = harmonics(&p);
            let tr = -(p.kappa + p.gamma1 + p.gamma2);
            assert!((h.m0.trace() - tr).abs() < 1e-12 * tr.abs());
            assert!(h.m_plus1.trace().norm() < 1e-12 * tr.abs());
            if depth == 0.0 {
                assert!(!h.is_modulated());
            }
        }
    }

    #[test]
    fn modulation_touches_only_cavity_rows_and_columns() {
        let p = SystemParams::preset_default()
            .with_mu_over_gamma_sum(52.5)
            .with_loop_phase(PI / 2.0)
            .with_depth(0.5);
        let h = harmonics(&p);
        assert!(h.is_modulated());
        for i in 2..6 {
            for j in 2..6 {
                assert_eq!(h.m_plus1[(i, j)].norm(), 0.0);
            }
        }
        assert_eq!(h.m_minus1, h.m_plus1.map(|z| z.conj()));
        assert!(h.reality_defect(64) < 1e-12);
    }

    #[test]
    fn noise_matrices() {
        let p = SystemParams::preset_default().with_temperature(0.0);
        let d = derive(&p).unwrap();
        let n = build_noise(&p, &d);
        let diag = [p.kappa, p.kappa, p.gamma1, p.gamma1, p.gamma2, p.gamma2];
        for (k, r) in diag.iter().enumerate() {
            assert_eq!(n.d_mat[(k, k)], r / 2.0);
        }
        let mut d100 = d.clone();
        d100.n_m = 100.0;
        let n = build_noise(&p, &d100);
        assert!((n.d_mat[(2, 2)] - p.gamma1 * 201.0 / 2.0).abs() < 1e-9);
        assert!((n.d_mat[(5, 5)] - p.gamma2 * 201.0 / 2.0).abs() < 1e-9);
        let sym = (n.c_mat + n.c_mat.transpose()) * Complex64::new(0.5, 0.0);
        assert_eq!(sym.map(|z| z.re), n.d_mat);
        assert!(sym.iter().all(|z| z.im == 0.0));
        assert_eq!(n.c_mat, n.c_mat.adjoint());
        assert_eq!(n.c_mat[(0, 1)], Complex64::new(0.0, p.kappa / 2.0));
    }

    #[test]
    fn loop_phase_swap_permutes_drift() {
        let base = SystemParams::preset_default()
            .with_mu_over_gamma_sum(65.0)
            .with_depth(0.3);
        for phi in [0.4, 1.3, 2.9] {
            let a = harmonics(&base.clone().with_loop_phase(phi));
            let b = harmonics(&base.clone().with_loop_phase(2.0 * PI - phi));
            let pb = swap_mechanical(&b.m0);
            let err = (a.m0 - pb).abs().max();
            assert!(err < 1e-10 * a.m0.abs().max(), "{err}");
        }
    }

    #[test]
    fn drift_spectrum_is_stable_and_conjugate_paired() {
        let p = SystemParams::preset_default()
            .with_mu_over_gamma_sum(52.5)
            .with_loop_phase(PI / 2.0);
        let h = harmonics(&p);
        let e = crate::linalg::eigen_decompose(&h.m0).unwrap();
        for l in e.values {
            assert!(l.re < 0.0);
            assert!(e
                .values
                .iter()
                .any(|m| (m - l.conj()).norm() < 1e-9 * p.omega_m));
        }
    }
}
