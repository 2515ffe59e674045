//! Physical inputs of the plaquette and the quantities derived from them.
//!
//! All rates are angular frequencies in rad/s stored as plain `f64`.
//! Coupling constants are kept in polar form because the physics depends on
//! the phases only through the loop phase `-phi1 + phi2 + phi_mu`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Reduced Planck constant (J s), from the exact SI value of h.
pub const HBAR: f64 = 6.626_070_15e-34 / (2.0 * PI);
/// Boltzmann constant (J/K), exact SI value.
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light in vacuum (m/s).
pub const C_LIGHT: f64 = 299_792_458.0;

/// How the pump photon flux enters the classical amplitude equations.
///
/// `Reference` multiplies the intracavity photon number by 2π relative to
/// `Standard`. This is what one obtains when the amplitude equations are
/// evaluated with every rate expressed in cycles per second while the
/// photon flux `2P/(ħω_L)` stays per second, and it is the convention under
/// which the published exceptional-point magnitudes and cooling optimum are
/// reproduced. `Standard` keeps all rates in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveNormalization {
    #[default]
    Reference,
    Standard,
}

impl DriveNormalization {
    /// Factor applied to the drive amplitude `sqrt(eta kappa) eps_n`.
    pub fn amplitude_factor(self) -> f64 {
        match self {
            DriveNormalization::Reference => (2.0 * PI).sqrt(),
            DriveNormalization::Standard => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Mechanical angular frequency (rad/s).
    pub omega_m: f64,
    /// Cavity energy decay rate (rad/s).
    pub kappa: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub g1_mag: f64,
    pub g2_mag: f64,
    pub phi1: f64,
    pub phi2: f64,
    /// Intermechanical coupling magnitude (rad/s).
    pub mu_mag: f64,
    pub phi_mu: f64,
    /// Laser detuning `omega_cav - omega_L` (rad/s).
    pub delta: f64,
    /// Cavity escape efficiency.
    pub eta: f64,
    /// Pump power (W).
    pub power: f64,
    /// Pump wavelength (m).
    pub lambda_laser: f64,
    /// Amplitude-modulation angular frequency (rad/s).
    pub omega_mod: f64,
    /// Modulation depth of the `e^{-i Omega t}` sideband.
    pub depth_plus: f64,
    /// Modulation depth of the `e^{+i Omega t}` sideband.
    pub depth_minus: f64,
    pub t_cavity: f64,
    pub t_mech: f64,
    #[serde(default)]
    pub drive_normalization: DriveNormalization,
}

impl SystemParams {
    /// The reference parameter set: a silicon optomechanical crystal with two
    /// identical mechanical resonators, red-detuned by one mechanical
    /// frequency and modulated at twice the mechanical frequency (depth 0).
    pub fn preset_default() -> Self {
        let omega_m = 2.0 * PI * 3.75e9;
        let gamma = 5e-4 * omega_m;
        SystemParams {
            omega_m,
            kappa: 2.0 * PI * 900e6,
            gamma1: gamma,
            gamma2: gamma,
            g1_mag: 2.0 * PI * 800e3,
            g2_mag: 2.0 * PI * 800e3,
            phi1: 0.0,
            phi2: 0.0,
            mu_mag: 0.0,
            phi_mu: 0.0,
            delta: omega_m,
            eta: 0.5,
            power: 0.25e-3,
            lambda_laser: 1550e-9,
            omega_mod: 2.0 * omega_m,
            depth_plus: 0.0,
            depth_minus: 0.0,
            t_cavity: 18.1,
            t_mech: 18.1,
            drive_normalization: DriveNormalization::Reference,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_m", self.omega_m),
            ("kappa", self.kappa),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("omega_mod", self.omega_mod),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be a positive rate, got {v}")));
            }
        }
        let non_negative = [
            ("g1_mag", self.g1_mag),
            ("g2_mag", self.g2_mag),
            ("mu_mag", self.mu_mag),
            ("power", self.power),
            ("t_cavity", self.t_cavity),
            ("t_mech", self.t_mech),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [
            ("phi1", self.phi1),
            ("phi2", self.phi2),
            ("phi_mu", self.phi_mu),
            ("delta", self.delta),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::param("eta", format!("must lie in [0, 1], got {}", self.eta)));
        }
        for (name, d) in [("depth_plus", self.depth_plus), ("depth_minus", self.depth_minus)] {
            if !(d.is_finite() && d.abs() < 1.0) {
                return Err(Error::param(name, format!("|d| must be < 1, got {d}")));
            }
        }
        if !(self.lambda_laser.is_finite() && self.lambda_laser > 0.0) {
            return Err(Error::param(
                "lambda_laser",
                format!("must be > 0, got {}", self.lambda_laser),
            ));
        }
        Ok(())
    }

    pub fn g1(&self) -> Complex64 {
        Complex64::from_polar(self.g1_mag, self.phi1)
    }

    pub fn g2(&self) -> Complex64 {
        Complex64::from_polar(self.g2_mag, self.phi2)
    }

    pub fn mu(&self) -> Complex64 {
        Complex64::from_polar(self.mu_mag, self.phi_mu)
    }

    /// `gamma1 + gamma2`, the unit in which coupling magnitudes are quoted.
    pub fn gamma_sum(&self) -> f64 {
        self.gamma1 + self.gamma2
    }

    pub fn loop_phase(&self) -> f64 {
        wrap_phase(-self.phi1 + self.phi2 + self.phi_mu)
    }

    pub fn resolved_sideband(&self) -> bool {
        self.kappa < self.omega_m
    }

    /// Sets `phi_mu` so that the loop phase equals `phi`, leaving the
    /// optomechanical phases untouched.
    pub fn with_loop_phase(mut self, phi: f64) -> Self {
        self.phi_mu = phi + self.phi1 - self.phi2;
        self
    }

    pub fn with_mu_over_gamma_sum(mut self, ratio: f64) -> Self {
        self.mu_mag = ratio * self.gamma_sum();
        self
    }

    pub fn with_temperature(mut self, kelvin: f64) -> Self {
        self.t_cavity = kelvin;
        self.t_mech = kelvin;
        self
    }

    pub fn with_depth(mut self, depth_plus: f64) -> Self {
        self.depth_plus = depth_plus;
        self
    }

    /// Exchanges the two mechanical resonators. Combined with the loop phase
    /// `phi -> 2π - phi` this is a symmetry of the model for identical
    /// resonators.
    pub fn swapped(&self) -> Self {
        let mut p = self.clone();
        std::mem::swap(&mut p.gamma1, &mut p.gamma2);
        std::mem::swap(&mut p.g1_mag, &mut p.g2_mag);
        std::mem::swap(&mut p.phi1, &mut p.phi2);
        p.phi_mu = -self.phi_mu;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Laser angular frequency `2πc/λ` (rad/s).
    pub omega_l: f64,
    /// Carrier amplitude `sqrt(2P/(ħ ω_L))` (s^-1/2).
    pub eps0: f64,
    pub eps_plus: f64,
    pub eps_minus: f64,
    /// Mean thermal occupancy of the optical bath, evaluated at `omega_l`.
    pub n_a: f64,
    pub n_m: f64,
    /// Loop phase reduced to `[0, 2π)`.
    pub loop_phase: f64,
    /// `sqrt(eta kappa)` times the drive normalization factor.
    pub pump_coupling: f64,
}

impl DerivedParams {
    /// Drive term `sqrt(eta kappa) eps_n` entering the cavity equation for
    /// harmonic `n` in {-1, 0, 1}.
    pub fn pump(&self, n: i32) -> f64 {
        let eps = match n {
            0 => self.eps0,
            1 => self.eps_plus,
            -1 => self.eps_minus,
            _ => 0.0,
        };
        self.pump_coupling * eps
    }
}

/// Bose-Einstein occupancy `1/(exp(ħω/k_B T) - 1)`; exactly zero at `T = 0`.
pub fn thermal_occupancy(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega / (K_B * temperature);
    1.0 / x.exp_m1()
}

pub fn derive(params: &SystemParams) -> Result<DerivedParams> {
    params.validate()?;
    let omega_l = 2.0 * PI * C_LIGHT / params.lambda_laser;
    let eps0 = (2.0 * params.power / (HBAR * omega_l)).sqrt();
    Ok(DerivedParams {
        omega_l,
        eps0,
        eps_plus: params.depth_plus * eps0,
        eps_minus: params.depth_minus * eps0,
        n_a: thermal_occupancy(omega_l, params.t_cavity),
        n_m: thermal_occupancy(params.omega_m, params.t_mech),
        loop_phase: params.loop_phase(),
        pump_coupling: (params.eta * params.kappa).sqrt()
            * params.drive_normalization.amplitude_factor(),
    })
}

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(2.0 * PI);
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}
