//! Brute-force time-domain reference.
//!
//! Covariances are propagated with classical fixed-step RK4 on
//! `V̇ = M(t) V + V M(t)ᵀ + D`, and mean fields on the full nonlinear
//! equations. Nothing here goes through the stationary or Floquet solvers.
//!
//! The late-time periodic covariance is reached without integrating tens of
//! thousands of periods: one period of RK4 gives the affine map
//! `V ↦ Φ V Φᵀ + Q`, whose fixed point is summed by repeated squaring.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::drift::DriftHarmonics;
use crate::linalg::{RMat6, I};
use crate::params::{DerivedParams, SystemParams};
use crate::{Error, Result};

/// Any variance above this is treated as divergence.
pub const BLOW_UP: f64 = 1e12;

/// Default RK4 steps per modulation period.
pub const STEPS_PER_PERIOD: usize = 200;

#[derive(Debug, Clone, Default)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub covariances: Vec<RMat6>,
    /// Cavity, resonator 1 and resonator 2 mean amplitudes.
    pub classical_means: Vec<[Complex64; 3]>,
}

fn lyapunov_rhs(m: &RMat6, v: &RMat6, d: &RMat6) -> RMat6 {
    let mv = m * v;
    mv + mv.transpose() + d
}

fn rk4_cov(h: &DriftHarmonics, d: &RMat6, v: &RMat6, t: f64, dt: f64) -> RMat6 {
    let m1 = h.at(t);
    let m2 = h.at(t + 0.5 * dt);
    let m3 = h.at(t + dt);
    let k1 = lyapunov_rhs(&m1, v, d);
    let k2 = lyapunov_rhs(&m2, &(v + k1 * (0.5 * dt)), d);
    let k3 = lyapunov_rhs(&m2, &(v + k2 * (0.5 * dt)), d);
    let k4 = lyapunov_rhs(&m3, &(v + k3 * dt), d);
    v + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

fn rk4_lin(h: &DriftHarmonics, x: &RMat6, t: f64, dt: f64) -> RMat6 {
    let m1 = h.at(t);
    let m2 = h.at(t + 0.5 * dt);
    let m3 = h.at(t + dt);
    let k1 = m1 * x;
    let k2 = m2 * (x + k1 * (0.5 * dt));
    let k3 = m2 * (x + k2 * (0.5 * dt));
    let k4 = m3 * (x + k3 * dt);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

fn check_blow_up(v: &RMat6, t: f64) -> Result<()> {
    let worst = (0..6).map(|k| v[(k, k)].abs()).fold(0.0, f64::max);
    if !(worst <= BLOW_UP) {
        return Err(Error::BlowUp { time: t });
    }
    Ok(())
}

/// Propagates the symmetrised covariance from `v_init` at `t = 0` to `t_end`,
/// recording every `stride`-th step and the final state.
pub fn propagate_covariance(
    h: &DriftHarmonics,
    d_mat: &RMat6,
    v_init: &RMat6,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<OdeTrajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidInput("dt must be positive and t_end nonnegative".into()));
    }
    let steps = (t_end / dt).round() as usize;
    let stride = stride.max(1);
    let mut out = OdeTrajectory::default();
    let mut v = *v_init;
    out.times.push(0.0);
    out.covariances.push(v);
    for k in 0..steps {
        let t = k as f64 * dt;
        v = rk4_cov(h, d_mat, &v, t, dt);
        check_blow_up(&v, t + dt)?;
        if (k + 1) % stride == 0 || k + 1 == steps {
            out.times.push(t + dt);
            out.covariances.push(v);
        }
    }
    Ok(out)
}

/// One-period affine map `V(T) = Φ V(0) Φᵀ + Q` under RK4.
pub fn period_map(h: &DriftHarmonics, d_mat: &RMat6, steps: usize) -> (RMat6, RMat6) {
    let dt = 2.0 * PI / h.omega_mod / steps as f64;
    let mut phi = RMat6::identity();
    let mut q = RMat6::zeros();
    for k in 0..steps {
        let t = k as f64 * dt;
        phi = rk4_lin(h, &phi, t, dt);
        q = rk4_cov(h, d_mat, &q, t, dt);
    }
    (phi, q)
}

/// Late-time periodic covariance sampled on one modulation period.
#[derive(Debug, Clone)]
pub struct PeriodicCovariance {
    pub period: f64,
    pub times: Vec<f64>,
    pub covariances: Vec<RMat6>,
}

impl PeriodicCovariance {
    /// Fourier coefficient `c_ℓ` of `V_ij(t) = Σ c_ℓ e^{-iℓΩt}`.
    pub fn harmonic(&self, i: usize, j: usize, ell: i32) -> Complex64 {
        let n = self.covariances.len() as f64;
        let w = 2.0 * PI / self.period;
        self.times
            .iter()
            .zip(&self.covariances)
            .map(|(t, v)| v[(i, j)] * Complex64::from_polar(1.0, ell as f64 * w * t))
            .sum::<Complex64>()
            / n
    }

    /// Continuous minimum of `V_ii(t)` from the trigonometric interpolant.
    pub fn min_variance(&self, i: usize) -> f64 {
        let order = (self.covariances.len() / 2 - 1).min(16) as i32;
        let coeffs: Vec<Complex64> = (0..=order).map(|l| self.harmonic(i, i, l)).collect();
        let w = 2.0 * PI / self.period;
        (0..4096)
            .map(|k| {
                let t = self.period * k as f64 / 4096.0;
                let mut v = coeffs[0].re;
                for (l, c) in coeffs.iter().enumerate().skip(1) {
                    v += 2.0 * (c * Complex64::from_polar(1.0, -(l as f64) * w * t)).re;
                }
                v
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Time average over the period.
    pub fn mean(&self) -> RMat6 {
        self.covariances.iter().sum::<RMat6>() / self.covariances.len() as f64
    }
}

/// Fixed point of the period map, then one more period sampled at every
/// step. Works equally for the unmodulated system, where every sample
/// coincides with the stationary covariance.
pub fn periodic_covariance(
    h: &DriftHarmonics,
    d_mat: &RMat6,
    steps: usize,
) -> Result<PeriodicCovariance> {
    let period = 2.0 * PI / h.omega_mod;
    let (mut phi, mut q) = period_map(h, d_mat, steps);
    let mut converged = false;
    for _ in 0..80 {
        q = phi * q * phi.transpose() + q;
        phi = phi * phi;
        check_blow_up(&q, f64::INFINITY)?;
        if phi.norm() < 1e-20 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::BlowUp { time: f64::INFINITY });
    }
    let v = (q + q.transpose()) * 0.5;
    let dt = period / steps as f64;
    let mut times = Vec::with_capacity(steps);
    let mut covariances = Vec::with_capacity(steps);
    let mut v = v;
    for k in 0..steps {
        let t = k as f64 * dt;
        times.push(t);
        covariances.push(v);
        v = rk4_cov(h, d_mat, &v, t, dt);
    }
    Ok(PeriodicCovariance {
        period,
        times,
        covariances,
    })
}

/// Right-hand side of the nonlinear mean-field equations for
/// `[a, b1, b2]` at time `t`.
pub fn mean_field_rhs(
    params: &SystemParams,
    derived: &DerivedParams,
    t: f64,
    y: &[Complex64; 3],
) -> [Complex64; 3] {
    let [a, b1, b2] = *y;
    let (g1, g2, mu) = (params.g1(), params.g2(), params.mu());
    let e = Complex64::from_polar(1.0, -params.omega_mod * t);
    let pump = derived.pump(0) + derived.pump(1) * e + derived.pump(-1) * e.conj();
    let shift = 2.0 * (g1 * b1.conj() + g2 * b2.conj()).re;
    let n = a.norm_sqr();
    [
        -(I * (params.delta - shift) + 0.5 * params.kappa) * a + pump,
        -(I * params.omega_m + 0.5 * params.gamma1) * b1 + I * mu * b2 + I * g1 * n,
        -(I * params.omega_m + 0.5 * params.gamma2) * b2 + I * mu.conj() * b1 + I * g2 * n,
    ]
}

fn rk4_mean(
    params: &SystemParams,
    derived: &DerivedParams,
    t: f64,
    dt: f64,
    y: &[Complex64; 3],
) -> [Complex64; 3] {
    let add = |y: &[Complex64; 3], k: &[Complex64; 3], s: f64| {
        [y[0] + k[0] * s, y[1] + k[1] * s, y[2] + k[2] * s]
    };
    let k1 = mean_field_rhs(params, derived, t, y);
    let k2 = mean_field_rhs(params, derived, t + 0.5 * dt, &add(y, &k1, 0.5 * dt));
    let k3 = mean_field_rhs(params, derived, t + 0.5 * dt, &add(y, &k2, 0.5 * dt));
    let k4 = mean_field_rhs(params, derived, t + dt, &add(y, &k3, dt));
    let mut out = *y;
    for i in 0..3 {
        out[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
    }
    out
}

/// Harmonics `[x_0, x_{+1}, x_{-1}]` of cavity, resonator 1 and resonator 2
/// over the final period, with `x(t) = x_0 + x_{+1} e^{-iΩt} + x_{-1} e^{iΩt}`.
pub type ProjectedHarmonics = [[Complex64; 3]; 3];

/// Integrates the mean fields from rest to (at least) `t_end`, stopping on a
/// whole number of modulation periods, and projects the final period.
pub fn propagate_classical(
    params: &SystemParams,
    derived: &DerivedParams,
    t_end: f64,
    dt: f64,
) -> Result<(OdeTrajectory, ProjectedHarmonics)> {
    let period = 2.0 * PI / params.omega_mod;
    let per_period = (period / dt).round().max(4.0) as usize;
    let dt = period / per_period as f64;
    let periods = (t_end / period).ceil().max(1.0) as usize;
    let zero = Complex64::new(0.0, 0.0);
    let mut y = [zero; 3];
    let mut out = OdeTrajectory::default();
    let mut harm = [[zero; 3]; 3];
    for p in 0..periods {
        let last = p + 1 == periods;
        for k in 0..per_period {
            let t = (p * per_period + k) as f64 * dt;
            if last {
                out.times.push(t);
                out.classical_means.push(y);
                let e = Complex64::from_polar(1.0, params.omega_mod * t);
                for (m, slot) in harm.iter_mut().enumerate() {
                    slot[0] += y[m];
                    slot[1] += y[m] * e;
                    slot[2] += y[m] * e.conj();
                }
            }
            y = rk4_mean(params, derived, t, dt, &y);
            if y.iter().any(|z| !(z.norm() <= BLOW_UP)) {
                return Err(Error::BlowUp { time: t + dt });
            }
        }
    }
    for slot in harm.iter_mut() {
        for c in slot.iter_mut() {
            *c /= per_period as f64;
        }
    }
    Ok((out, harm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::solve_classical;
    use crate::drift::{build_drift, build_noise};
    use crate::params::derive;
    use crate::steadystate::covariance_lyapunov;

    fn drift(p: &SystemParams) -> (DriftHarmonics, RMat6) {
        let d = derive(p).unwrap();
        let c = solve_classical(p, &d).unwrap();
        (build_drift(p, &d, &c).unwrap(), build_noise(p, &d).d_mat)
    }

    #[test]
    fn decoupled_relaxation_to_vacuum() {
        let mut p = SystemParams::preset_default().with_temperature(0.0);
        p.g1_mag = 0.0;
        p.g2_mag = 0.0;
        p.gamma1 = 0.05 * p.omega_m;
        p.gamma2 = 0.05 * p.omega_m;
        let (h, d) = drift(&p);
        let dt = 2.0 * PI / p.omega_mod / 200.0;
        let t_end = 2.0 / p.gamma1;
        let tr = propagate_covariance(&h, &d, &(RMat6::identity() * 5.0), t_end, dt, 50).unwrap();
        for (t, v) in tr.times.iter().zip(&tr.covariances) {
            // cavity relaxes at κ, mechanics at γ: V - 1/2 = 4.5 e^{-rate t}
            let cav = 0.5 + 4.5 * (-p.kappa * t).exp();
            let mech = 0.5 + 4.5 * (-p.gamma1 * t).exp();
            assert!((v[(0, 0)] - cav).abs() < 1e-6 * cav);
            assert!((v[(2, 2)] - mech).abs() < 1e-6 * mech);
            assert!((v - v.transpose()).norm() == 0.0);
        }
    }

    #[test]
    fn unstable_system_blows_up() {
        let mut h = DriftHarmonics::stationary(RMat6::identity() * 1e9, 1e10);
        h.m0[(0, 1)] = 1.0;
        let r = propagate_covariance(&h, &RMat6::identity(), &RMat6::identity(), 1e-7, 1e-11, 1);
        assert!(matches!(r, Err(Error::BlowUp { .. })));
        assert!(periodic_covariance(&h, &RMat6::identity(), 50).is_err());
    }

    #[test]
    fn stationary_fixed_point_matches_lyapunov() {
        let p = SystemParams::preset_default()
            .with_mu_over_gamma_sum(52.5)
            .with_loop_phase(PI / 2.0);
        let (h, d) = drift(&p);
        let pc = periodic_covariance(&h, &d, STEPS_PER_PERIOD).unwrap();
        let v = covariance_lyapunov(&h.m0, &d).unwrap();
        let last = pc.covariances.last().unwrap();
        assert!(crate::linalg::max_rel_diff(last, &v, 1e-3) < 1e-6);
    }

    #[test]
    fn doubling_agrees_with_direct_propagation() {
        // strong damping keeps the direct run short
        let mut p = SystemParams::preset_default()
            .with_mu_over_gamma_sum(10.0)
            .with_depth(0.4);
        p.gamma1 = 0.02 * p.omega_m;
        p.gamma2 = 0.02 * p.omega_m;
        let (h, d) = drift(&p);
        let period = 2.0 * PI / p.omega_mod;
        let periods = (60.0 / p.gamma1 / period).ceil();
        // the direct run needs a finer step: its Lyapunov operator carries
        // twice the oscillation frequency of the state map
        let tr = propagate_covariance(&h, &d, &RMat6::zeros(), periods * period, period / 800.0, 800)
            .unwrap();
        let pc = periodic_covariance(&h, &d, 800).unwrap();
        let a = tr.covariances.last().unwrap();
        let diff = crate::linalg::max_rel_diff(a, &pc.covariances[0], 1e-3);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn decoupled_mean_field_is_driven_lorentzian() {
        let mut p = SystemParams::preset_default();
        p.g1_mag = 0.0;
        p.g2_mag = 0.0;
        let d = derive(&p).unwrap();
        let dt = 2.0 * PI / p.omega_mod / 200.0;
        let (tr, h) = propagate_classical(&p, &d, 40.0 / p.kappa, dt).unwrap();
        let a = Complex64::new(d.pump(0), 0.0) / (I * p.delta + 0.5 * p.kappa);
        assert!((h[0][0] - a).norm() < 1e-8 * a.norm());
        assert!(h[1][0].norm() == 0.0);
        assert_eq!(tr.times.len(), 200);
    }
}
