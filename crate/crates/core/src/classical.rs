//! Classical mean-field steady state with first-sideband truncation.
//!
//! Every mean amplitude is expanded as `x(t) = x_0 + x_{+1} e^{-iΩt} +
//! x_{-1} e^{+iΩt}`. The nine harmonic amplitudes satisfy a coupled set of
//! algebraic relations, solved here by damped fixed-point iteration with a
//! damped Newton fallback when the iteration stalls. If both fail, Newton is
//! restarted from each exact fixed point of the unmodulated problem.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::I;
use crate::params::{DerivedParams, SystemParams};
use crate::{Error, Result};

const N_UNKNOWNS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalOptions {
    /// Relative residual accepted on return.
    pub tol: f64,
    pub max_iter: usize,
    /// Mixing factor β in `x ← (1-β) x + β F(x)`.
    pub damping: f64,
    /// Iterations without improvement of the best residual before the
    /// Newton fallback is tried.
    pub stall_window: usize,
}

impl Default for ClassicalOptions {
    fn default() -> Self {
        ClassicalOptions {
            tol: 1e-12,
            max_iter: 10_000,
            damping: 0.5,
            stall_window: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSteadyState {
    pub a0: Complex64,
    pub a_p1: Complex64,
    pub a_m1: Complex64,
    pub b1_0: Complex64,
    pub b1_p1: Complex64,
    pub b1_m1: Complex64,
    pub b2_0: Complex64,
    pub b2_p1: Complex64,
    pub b2_m1: Complex64,
    /// Static part of the effective detuning (rad/s).
    pub delta_a0: f64,
    /// `e^{-iΩt}` harmonic of the effective detuning; the `e^{+iΩt}`
    /// harmonic is its conjugate.
    pub delta_a_p1: Complex64,
    pub omega_mod: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl ClassicalSteadyState {
    pub fn cavity_at(&self, t: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, -self.omega_mod * t);
        self.a0 + self.a_p1 * e + self.a_m1 * e.conj()
    }

    pub fn mech1_at(&self, t: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, -self.omega_mod * t);
        self.b1_0 + self.b1_p1 * e + self.b1_m1 * e.conj()
    }

    pub fn mech2_at(&self, t: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, -self.omega_mod * t);
        self.b2_0 + self.b2_p1 * e + self.b2_m1 * e.conj()
    }

    /// Real effective detuning `Δ_a(t)`.
    pub fn detuning_at(&self, t: f64) -> f64 {
        let e = Complex64::from_polar(1.0, -self.omega_mod * t);
        self.delta_a0 + 2.0 * (self.delta_a_p1 * e).re
    }

    pub fn amplitudes(&self) -> [Complex64; N_UNKNOWNS] {
        [
            self.a0, self.a_p1, self.a_m1, self.b1_0, self.b1_p1, self.b1_m1, self.b2_0,
            self.b2_p1, self.b2_m1,
        ]
    }

    /// Mean intracavity photon number averaged over a modulation period.
    pub fn photon_number(&self) -> f64 {
        self.a0.norm_sqr() + self.a_p1.norm_sqr() + self.a_m1.norm_sqr()
    }
}

/// Coefficients of the amplitude relations that do not depend on the
/// unknowns.
struct Relations {
    delta: f64,
    half_kappa: f64,
    omega_m: f64,
    omega_mod: f64,
    half_gamma1: f64,
    half_gamma2: f64,
    g1: Complex64,
    g2: Complex64,
    mu: Complex64,
    pump: [f64; 3],
}

impl Relations {
    fn new(params: &SystemParams, derived: &DerivedParams) -> Self {
        Relations {
            delta: params.delta,
            half_kappa: 0.5 * params.kappa,
            omega_m: params.omega_m,
            omega_mod: params.omega_mod,
            half_gamma1: 0.5 * params.gamma1,
            half_gamma2: 0.5 * params.gamma2,
            g1: params.g1(),
            g2: params.g2(),
            mu: params.mu(),
            pump: [derived.pump(0), derived.pump(1), derived.pump(-1)],
        }
    }

    fn detuning(&self, x: &[Complex64; N_UNKNOWNS]) -> (f64, Complex64) {
        let [_, _, _, b10, b1p, b1m, b20, b2p, b2m] = *x;
        let d0 = self.delta - 2.0 * (self.g1 * b10.conj() + self.g2 * b20.conj()).re;
        let d1 = -(self.g1.conj() * b1p + self.g1 * b1m.conj() + self.g2.conj() * b2p
            + self.g2 * b2m.conj());
        (d0, d1)
    }

    /// Right-hand sides of the nine amplitude relations evaluated at `x`.
    fn map(&self, x: &[Complex64; N_UNKNOWNS]) -> [Complex64; N_UNKNOWNS] {
        let [a0, ap, am, b10, b1p, b1m, b20, b2p, b2m] = *x;
        let (d0, d1) = self.detuning(x);
        let dm = d1.conj();
        let w = self.omega_mod;
        let cav = I * d0 + self.half_kappa;
        let na0 = (self.pump[0] - I * (d1 * am + dm * ap)) / cav;
        let nap = (self.pump[1] - I * d1 * a0) / (cav - I * w);
        let nam = (self.pump[2] - I * dm * a0) / (cav + I * w);

        let s0 = a0.norm_sqr() + ap.norm_sqr() + am.norm_sqr();
        let sp = a0 * am.conj() + a0.conj() * ap;
        let sm = a0 * ap.conj() + a0.conj() * am;

        let om = self.omega_m;
        let (mu, g1, g2) = (self.mu, self.g1, self.g2);
        let den1 = |shift: f64| I * (om - shift) + self.half_gamma1;
        let den2 = |shift: f64| I * (om - shift) + self.half_gamma2;
        [
            na0,
            nap,
            nam,
            (I * mu * b20 + I * g1 * s0) / den1(0.0),
            (I * mu * b2p + I * g1 * sp) / den1(w),
            (I * mu * b2m + I * g1 * sm) / den1(-w),
            (I * mu.conj() * b10 + I * g2 * s0) / den2(0.0),
            (I * mu.conj() * b1p + I * g2 * sp) / den2(w),
            (I * mu.conj() * b1m + I * g2 * sm) / den2(-w),
        ]
    }

    /// Fixed points without sidebands, in order of increasing photon number.
    /// The mechanics respond linearly to `n = |a_0|²`, so the cavity balance
    /// is a cubic in `n`.
    fn static_seeds(&self) -> Vec<[Complex64; N_UNKNOWNS]> {
        let (a11, a22) = (
            I * self.omega_m + self.half_gamma1,
            I * self.omega_m + self.half_gamma2,
        );
        let (a12, a21) = (-I * self.mu, -I * self.mu.conj());
        let det = a11 * a22 - a12 * a21;
        let (r1, r2) = (I * self.g1, I * self.g2);
        let u1 = (r1 * a22 - a12 * r2) / det;
        let u2 = (a11 * r2 - a21 * r1) / det;
        let s = 2.0 * (self.g1 * u1.conj() + self.g2 * u2.conj()).re;
        let (d, hk, p2) = (self.delta, self.half_kappa, self.pump[0] * self.pump[0]);
        let mut roots: Vec<f64> = if s.abs() * p2 < 1e-300 {
            vec![p2 / (d * d + hk * hk)]
        } else {
            // s² n³ - 2Δs n² + (Δ² + κ²/4) n - P² = 0
            let c2 = -2.0 * d / s;
            let c1 = (d * d + hk * hk) / (s * s);
            let c0 = -p2 / (s * s);
            let companion = nalgebra::Matrix3::new(0.0, 0.0, -c0, 1.0, 0.0, -c1, 0.0, 1.0, -c2);
            companion
                .complex_eigenvalues()
                .iter()
                .filter(|z| z.re > 0.0 && z.im.abs() <= 1e-9 * z.re)
                .map(|z| z.re)
                .collect()
        };
        roots.sort_by(f64::total_cmp);
        let zero = Complex64::new(0.0, 0.0);
        roots
            .into_iter()
            .map(|n| {
                let a0 = self.pump[0] / (I * (d - s * n) + hk);
                [a0, zero, zero, u1 * n, zero, zero, u2 * n, zero, zero]
            })
            .collect()
    }

    fn residual(&self, x: &[Complex64; N_UNKNOWNS]) -> f64 {
        let fx = self.map(x);
        x.iter()
            .zip(fx.iter())
            .map(|(l, r)| (l - r).norm() / (1.0 + l.norm()))
            .fold(0.0, f64::max)
    }
}

pub fn solve_classical(params: &SystemParams, derived: &DerivedParams) -> Result<ClassicalSteadyState> {
    solve_classical_with(params, derived, &ClassicalOptions::default())
}

pub fn solve_classical_with(
    params: &SystemParams,
    derived: &DerivedParams,
    opts: &ClassicalOptions,
) -> Result<ClassicalSteadyState> {
    let rel = Relations::new(params, derived);
    let zero = Complex64::new(0.0, 0.0);
    let mut x = [zero; N_UNKNOWNS];
    x[0] = rel.pump[0] / (I * params.delta + rel.half_kappa);

    let mut iterations = 0;
    let mut beta = opts.damping;
    let (mut x, mut residual) = (x, f64::INFINITY);
    // halve the mixing factor whenever Picard plus Newton stalls
    while beta > 1e-3 {
        let (xa, ra, used) = attempt(&rel, x, beta, opts);
        iterations += used;
        if ra < residual {
            x = xa;
            residual = ra;
        }
        if residual < opts.tol || iterations >= opts.max_iter {
            break;
        }
        beta *= 0.5;
    }
    if !(residual < opts.tol) {
        for seed in rel.static_seeds() {
            let (xn, rn, used) = newton_polish(&rel, seed, opts);
            iterations += used;
            if rn < residual {
                x = xn;
                residual = rn;
            }
            if residual < opts.tol {
                break;
            }
        }
    }
    if !(residual < opts.tol) {
        return Err(Error::NonConvergence {
            iterations,
            residual,
        });
    }

    let (d0, d1) = rel.detuning(&x);
    Ok(ClassicalSteadyState {
        a0: x[0],
        a_p1: x[1],
        a_m1: x[2],
        b1_0: x[3],
        b1_p1: x[4],
        b1_m1: x[5],
        b2_0: x[6],
        b2_p1: x[7],
        b2_m1: x[8],
        delta_a0: d0,
        delta_a_p1: d1,
        omega_mod: params.omega_mod,
        iterations,
        residual,
    })
}

fn pack(x: &[Complex64; N_UNKNOWNS]) -> DVector<f64> {
    DVector::from_iterator(2 * N_UNKNOWNS, x.iter().flat_map(|z| [z.re, z.im]))
}

fn unpack(v: &DVector<f64>) -> [Complex64; N_UNKNOWNS] {
    std::array::from_fn(|k| Complex64::new(v[2 * k], v[2 * k + 1]))
}

fn attempt(
    rel: &Relations,
    start: [Complex64; N_UNKNOWNS],
    beta: f64,
    opts: &ClassicalOptions,
) -> ([Complex64; N_UNKNOWNS], f64, usize) {
    let mut x = start;
    let mut best = (f64::INFINITY, x);
    let mut since_best = 0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let fx = rel.map(&x);
        let res = x
            .iter()
            .zip(fx.iter())
            .map(|(l, r)| (l - r).norm() / (1.0 + l.norm()))
            .fold(0.0, f64::max);
        if res < best.0 {
            best = (res, x);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if res < opts.tol || since_best >= opts.stall_window || !res.is_finite() {
            break;
        }
        for (xi, fi) in x.iter_mut().zip(fx.iter()) {
            *xi = (1.0 - beta) * *xi + beta * fi;
        }
        iterations += 1;
    }
    let x = best.1;
    let residual = rel.residual(&x);
    if residual < opts.tol {
        return (x, residual, iterations);
    }
    let (xn, rn, used) = newton_polish(rel, x, opts);
    if rn < residual {
        (xn, rn, iterations + used)
    } else {
        (x, residual, iterations + used)
    }
}

/// Damped Newton on the 18 real unknowns of `x - F(x) = 0` with a
/// finite-difference Jacobian (the map is not holomorphic).
fn newton_polish(
    rel: &Relations,
    start: [Complex64; N_UNKNOWNS],
    opts: &ClassicalOptions,
) -> ([Complex64; N_UNKNOWNS], f64, usize) {
    let g = |v: &DVector<f64>| -> DVector<f64> {
        let x = unpack(v);
        let fx = rel.map(&x);
        let d: [Complex64; N_UNKNOWNS] = std::array::from_fn(|k| x[k] - fx[k]);
        pack(&d)
    };
    let mut v = pack(&start);
    let mut res = rel.residual(&start);
    let n = 2 * N_UNKNOWNS;
    let mut steps = 0;
    for _ in 0..50 {
        if res < opts.tol {
            break;
        }
        steps += 1;
        let g0 = g(&v);
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let h = 1e-7 * (1.0 + v[j].abs());
            let mut vp = v.clone();
            vp[j] += h;
            let mut vm = v.clone();
            vm[j] -= h;
            let col = (g(&vp) - g(&vm)) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let Some(step) = jac.lu().solve(&(-&g0)) else {
            break;
        };
        let mut alpha = 1.0;
        let mut improved = false;
        while alpha > 1e-4 {
            let trial = &v + &step * alpha;
            let r = rel.residual(&unpack(&trial));
            if r < res {
                v = trial;
                res = r;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (unpack(&v), res, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn solve(p: &SystemParams) -> ClassicalSteadyState {
        let d = crate::params::derive(p).unwrap();
        solve_classical(p, &d).unwrap()
    }

    #[test]
    fn decoupled_cavity_is_a_driven_lorentzian() {
        let mut p = SystemParams::preset_default();
        p.g1_mag = 0.0;
        p.g2_mag = 0.0;
        for norm in [
            crate::params::DriveNormalization::Standard,
            crate::params::DriveNormalization::Reference,
        ] {
            p.drive_normalization = norm;
            let d = crate::params::derive(&p).unwrap();
            let s = solve_classical(&p, &d).unwrap();
            let expected = (p.eta * p.kappa).sqrt() * norm.amplitude_factor() * d.eps0
                / (I * p.delta + 0.5 * p.kappa);
            assert!((s.a0 - expected).norm() / expected.norm() < 1e-14);
            for b in [s.b1_0, s.b2_0, s.b1_p1, s.b2_m1, s.a_p1, s.a_m1] {
                assert_eq!(b.norm(), 0.0);
            }
        }
    }

    #[test]
    fn unmodulated_drive_has_no_sidebands() {
        let p = SystemParams::preset_default()
            .with_mu_over_gamma_sum(52.5)
            .with_loop_phase(PI / 2.0);
        let s = solve(&p);
        assert!(s.residual < 1e-12);
        for z in [s.a_p1, s.a_m1, s.b1_p1, s.b1_m1, s.b2_p1, s.b2_m1] {
            assert_eq!(z.norm(), 0.0);
        }
        assert!(s.a0.norm() > 1.0 && s.b1_0.norm() > 0.0 && s.b2_0.norm() > 0.0);
        assert_eq!(s.delta_a_p1.norm(), 0.0);
    }

    #[test]
    fn modulated_drive_populates_all_harmonics() {
        let p = SystemParams::preset_default()
            .with_mu_over_gamma_sum(52.5)
            .with_loop_phase(PI / 2.0)
            .with_depth(0.5);
        let s = solve(&p);
        for z in s.amplitudes() {
            assert!(z.norm() > 0.0);
        }
        // fixed-point consistency
        let d = crate::params::derive(&p).unwrap();
        let rel = Relations::new(&p, &d);
        assert!(rel.residual(&s.amplitudes()) < 1e-12);
    }

    #[test]
    fn swap_symmetry_exchanges_resonators() {
        for phi in [0.3, 1.2, PI / 2.0, 2.5] {
            let p = SystemParams::preset_default()
                .with_mu_over_gamma_sum(60.0)
                .with_depth(0.4);
            let s = solve(&p.clone().with_loop_phase(phi));
            let t = solve(&p.with_loop_phase(2.0 * PI - phi));
            let pairs = [
                (s.b1_0, t.b2_0),
                (s.b1_p1, t.b2_p1),
                (s.b1_m1, t.b2_m1),
                (s.b2_0, t.b1_0),
                (s.a0, t.a0),
                (s.a_p1, t.a_p1),
            ];
            for (x, y) in pairs {
                assert!((x - y).norm() <= 1e-10 * x.norm().max(1e-300), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn newton_fallback_recovers_when_picard_diverges() {
        // undamped iteration with a huge mixing factor oscillates; Newton
        // must still deliver the fixed point
        let p = SystemParams::preset_default()
            .with_mu_over_gamma_sum(52.5)
            .with_loop_phase(1.0)
            .with_depth(0.5);
        let d = crate::params::derive(&p).unwrap();
        let opts = ClassicalOptions {
            damping: 1.9,
            stall_window: 20,
            ..Default::default()
        };
        let s = solve_classical_with(&p, &d, &opts).unwrap();
        let r = solve(&p);
        assert!(s.residual < 1e-12);
        assert!((s.a0 - r.a0).norm() / r.a0.norm() < 1e-10);
    }

    #[test]
    fn bistable_point_is_found_from_cubic_seeds() {
        // Picard and Newton from the linear guess both stall here
        let mut p = SystemParams::preset_default()
            .with_mu_over_gamma_sum(1.5 * 52.5)
            .with_loop_phase(PI / 2.0);
        p.delta = 0.515 * p.omega_m;
        let d = crate::params::derive(&p).unwrap();
        let rel = Relations::new(&p, &d);
        let seeds = rel.static_seeds();
        assert!(!seeds.is_empty());
        for x in &seeds {
            assert!(rel.residual(x) < 1e-10);
        }
        let s = solve(&p);
        assert!(s.residual < 1e-12);
        assert_eq!(s.a_p1.norm(), 0.0);
    }

    #[test]
    fn reports_non_convergence() {
        let p = SystemParams::preset_default().with_mu_over_gamma_sum(52.5);
        let d = crate::params::derive(&p).unwrap();
        let opts = ClassicalOptions {
            max_iter: 2,
            tol: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            solve_classical_with(&p, &d, &opts),
            Err(Error::NonConvergence { .. })
        ));
    }
}
