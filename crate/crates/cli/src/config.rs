//! Run configuration.
//!
//! The file format is TOML. JSON is accepted too, including a run manifest,
//! whose echoed config is then reused as is. Physical quantities use SI
//! with a unit suffix on the key; `_hz` values are ordinary frequencies and
//! are multiplied by 2π on load.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use plaquette::floquet::QuadratureConfig;
use plaquette::params::DriveNormalization;
use plaquette::spectral::{Branch, Chirality, SearchOptions, SurfaceOptions, SurfaceParam};
use plaquette::SystemParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub floquet: FloquetConfig,
    #[serde(default)]
    pub loci: LociConfig,
    #[serde(default)]
    pub ep: EpConfig,
    #[serde(default)]
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub figure: FigureConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

fn default_preset() -> String {
    "default".into()
}

/// Overrides on top of the preset. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_m_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g1_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi1_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi2_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_hz: Option<f64>,
    /// |μ| in units of γ₁+γ₂; exclusive with `mu_hz`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_over_gamma_sum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_mu_rad: Option<f64>,
    /// Sets `phi_mu` so the loop phase takes this value; exclusive with
    /// `phi_mu_rad`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loop_phase_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_mod_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_plus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_minus: Option<f64>,
    /// Both bath temperatures; exclusive with the two below.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_cavity_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_mech_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive_normalization: Option<DriveNormalization>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FloquetConfig {
    pub zones: usize,
    pub rel_tol: f64,
    pub max_panels: usize,
    pub panel_width_kappa: f64,
}

impl Default for FloquetConfig {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        FloquetConfig {
            zones: plaquette::floquet::DEFAULT_ZONES,
            rel_tol: q.rel_tol,
            max_panels: q.max_panels,
            panel_width_kappa: q.panel_width_kappa,
        }
    }
}

impl FloquetConfig {
    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            rel_tol: self.rel_tol,
            max_panels: self.max_panels,
            panel_width_kappa: self.panel_width_kappa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LociConfig {
    pub phi_min_rad: f64,
    pub phi_max_rad: f64,
    pub phi_points: usize,
}

impl Default for LociConfig {
    fn default() -> Self {
        LociConfig {
            phi_min_rad: 0.0,
            phi_max_rad: PI,
            phi_points: 201,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpConfig {
    /// Search range of |μ|/(γ₁+γ₂).
    pub mu_min: f64,
    pub mu_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<Branch>,
    pub chirality: Chirality,
    pub grid: usize,
    pub max_simplex_iter: u64,
    pub max_newton_iter: usize,
}

impl Default for EpConfig {
    fn default() -> Self {
        let s = SearchOptions::default();
        EpConfig {
            mu_min: 5.0,
            mu_max: 300.0,
            branch: None,
            chirality: Chirality::Clockwise,
            grid: s.grid,
            max_simplex_iter: s.max_simplex_iter,
            max_newton_iter: s.max_newton_iter,
        }
    }
}

impl EpConfig {
    pub fn search(&self) -> SearchOptions {
        SearchOptions {
            grid: self.grid,
            max_simplex_iter: self.max_simplex_iter,
            max_newton_iter: self.max_newton_iter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub param: SurfaceParam,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceConfig {
    pub axis1: AxisConfig,
    pub axis2: AxisConfig,
    pub options: SurfaceOptions,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        let axis = |param| AxisConfig {
            param,
            lo: 0.5,
            hi: 1.5,
            points: 21,
        };
        SurfaceConfig {
            axis1: axis(SurfaceParam::Kappa),
            axis2: axis(SurfaceParam::Power),
            options: SurfaceOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FigureConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// JSON merge patch applied to the built-in recipe.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overrides: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// RK4 steps per modulation period.
    pub steps_per_period: usize,
    /// Largest accepted relative disagreement.
    pub rel_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            steps_per_period: plaquette::oracle::STEPS_PER_PERIOD,
            rel_tol: 1e-5,
        }
    }
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    let bad = |e: &dyn std::fmt::Display| CliError::Config(format!("{}: {e}", path.display()));
    let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
        let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
        // a run manifest carries its resolved config under `config`
        if v.get("tool").and_then(|t| t.as_str()) == Some("plaquette") {
            v = v.get("config").cloned().unwrap_or_default();
        }
        serde_json::from_value(v).map_err(|e| bad(&e))?
    } else {
        toml::from_str(&text).map_err(|e| bad(&e))?
    };
    Ok(cfg)
}

pub fn preset(name: &str) -> Result<SystemParams, CliError> {
    match name {
        "default" => Ok(SystemParams::preset_default()),
        other => Err(CliError::Config(format!("unknown preset `{other}` (available: default)"))),
    }
}

fn hz(v: f64) -> f64 {
    2.0 * PI * v
}

impl ParamsConfig {
    /// Applies the overrides to `base` and validates the result.
    pub fn resolve(&self, mut p: SystemParams) -> Result<SystemParams, CliError> {
        let exclusive = |a: bool, b: bool, what: &str| {
            if a && b {
                Err(CliError::Config(format!("params: {what} are mutually exclusive")))
            } else {
                Ok(())
            }
        };
        exclusive(self.mu_hz.is_some(), self.mu_over_gamma_sum.is_some(), "mu_hz and mu_over_gamma_sum")?;
        exclusive(self.phi_mu_rad.is_some(), self.loop_phase_rad.is_some(), "phi_mu_rad and loop_phase_rad")?;
        exclusive(
            self.temperature_k.is_some(),
            self.t_cavity_k.is_some() || self.t_mech_k.is_some(),
            "temperature_k and t_cavity_k/t_mech_k",
        )?;

        if let Some(v) = self.omega_m_hz {
            p.omega_m = hz(v);
        }
        if let Some(v) = self.kappa_hz {
            p.kappa = hz(v);
        }
        if let Some(v) = self.gamma1_hz {
            p.gamma1 = hz(v);
        }
        if let Some(v) = self.gamma2_hz {
            p.gamma2 = hz(v);
        }
        if let Some(v) = self.g1_hz {
            p.g1_mag = hz(v);
        }
        if let Some(v) = self.g2_hz {
            p.g2_mag = hz(v);
        }
        if let Some(v) = self.phi1_rad {
            p.phi1 = v;
        }
        if let Some(v) = self.phi2_rad {
            p.phi2 = v;
        }
        if let Some(v) = self.delta_hz {
            p.delta = hz(v);
        }
        if let Some(v) = self.eta {
            p.eta = v;
        }
        if let Some(v) = self.power_w {
            p.power = v;
        }
        if let Some(v) = self.wavelength_m {
            p.lambda_laser = v;
        }
        if let Some(v) = self.omega_mod_hz {
            p.omega_mod = hz(v);
        }
        if let Some(v) = self.depth_plus {
            p.depth_plus = v;
        }
        if let Some(v) = self.depth_minus {
            p.depth_minus = v;
        }
        if let Some(v) = self.temperature_k {
            p = p.with_temperature(v);
        }
        if let Some(v) = self.t_cavity_k {
            p.t_cavity = v;
        }
        if let Some(v) = self.t_mech_k {
            p.t_mech = v;
        }
        if let Some(v) = self.drive_normalization {
            p.drive_normalization = v;
        }
        // coupling and phase last: both depend on other fields
        if let Some(v) = self.mu_hz {
            p.mu_mag = hz(v);
        }
        if let Some(v) = self.mu_over_gamma_sum {
            p = p.with_mu_over_gamma_sum(v);
        }
        if let Some(v) = self.phi_mu_rad {
            p.phi_mu = v;
        }
        if let Some(v) = self.loop_phase_rad {
            p = p.with_loop_phase(v);
        }
        p.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(p)
    }
}

impl RunConfig {
    pub fn system_params(&self) -> Result<SystemParams, CliError> {
        self.params.resolve(preset(&self.preset)?)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.system_params()?;
        let bad = |m: String| Err(CliError::Config(m));
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        let f = &self.floquet;
        if !(f.rel_tol > 0.0) || f.max_panels == 0 || !(f.panel_width_kappa > 0.0) {
            return bad("floquet: rel_tol, max_panels and panel_width_kappa must be positive".into());
        }
        if self.loci.phi_points < 2 || !(self.loci.phi_max_rad > self.loci.phi_min_rad) {
            return bad("loci: need phi_points >= 2 and phi_max_rad > phi_min_rad".into());
        }
        let e = &self.ep;
        if !(e.mu_min >= 0.0 && e.mu_max > e.mu_min) || e.grid == 0 {
            return bad("ep: need 0 <= mu_min < mu_max and grid >= 1".into());
        }
        for (name, a) in [("axis1", &self.surface.axis1), ("axis2", &self.surface.axis2)] {
            if a.points == 0 || !(a.lo > 0.0 && a.hi > 0.0) {
                return bad(format!("surface.{name}: need points >= 1 and positive multipliers"));
            }
        }
        if self.surface.axis1.param == self.surface.axis2.param {
            return bad("surface: the two axes must sweep different parameters".into());
        }
        let o = &self.oracle;
        if o.steps_per_period < 8 || !(o.rel_tol > 0.0) {
            return bad("oracle: need steps_per_period >= 8 and rel_tol > 0".into());
        }
        Ok(())
    }
}
