//! Reported quantities and figure recipes.
//!
//! A recipe is plain data: a base parameter set plus a task describing what
//! to sweep. The built-in recipes can be forked by applying a JSON merge
//! patch before running them, see [`figure_recipe`].

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

use crate::drift::linearize;
use crate::floquet::{floquet_covariance, QuadratureConfig, DEFAULT_ZONES};
use crate::params::SystemParams;
use crate::spectral::{eigen_loci, trace_surface, Branch, EpPoint, SurfaceAxis, SurfaceOptions, SurfaceParam};
use crate::steadystate::{stability, stationary_covariance};
use crate::{Error, Result};

/// Names accepted by [`builtin_recipe`].
pub const RECIPE_NAMES: [&str; 7] = [
    "fig3_phase_sweep",
    "fig4_mu_phase_map",
    "fig5_loci",
    "fig6_temperature",
    "fig7_surfaces",
    "fig8_squeezing",
    "fig9_detuning",
];

/// Squeezing in dB relative to the vacuum variance 1/2; positive below vacuum.
pub fn squeezing_db(v_min: f64) -> Result<f64> {
    if !(v_min > 0.0) {
        return Err(Error::InvalidInput(format!("variance must be positive, got {v_min}")));
    }
    Ok(-10.0 * (v_min / 0.5).log10())
}

/// Hex SHA-256 of the JSON form of `value`.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable");
    hex::encode(Sha256::digest(&bytes))
}

/// Observables of one mechanical-mode pair at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeValues {
    pub nbar: [f64; 2],
    /// Best quadrature squeezing of each resonator (dB).
    pub squeezing_db: [f64; 2],
    pub stable: bool,
}

impl NodeValues {
    const UNSTABLE: NodeValues = NodeValues {
        nbar: [f64::NAN; 2],
        squeezing_db: [f64::NAN; 2],
        stable: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FloquetSettings {
    pub zones: usize,
    pub quadrature: QuadratureConfig,
}

impl Default for FloquetSettings {
    fn default() -> Self {
        FloquetSettings {
            zones: DEFAULT_ZONES,
            quadrature: QuadratureConfig::default(),
        }
    }
}

/// Phonon numbers and squeezing at `params`. Unmodulated points use the
/// stationary solver, modulated ones the Floquet solver. An unstable drift
/// is a regular outcome, not an error.
pub fn evaluate_point(params: &SystemParams, floquet: &FloquetSettings) -> Result<NodeValues> {
    let lin = linearize(params)?;
    if !stability(&lin.drift.m0)?.stable {
        return Ok(NodeValues::UNSTABLE);
    }
    if lin.drift.is_modulated() {
        let f = floquet_covariance(&lin.drift, &lin.noise, floquet.zones, &floquet.quadrature)?;
        return Ok(NodeValues {
            nbar: [f.nbar(1), f.nbar(2)],
            squeezing_db: [f.mode_squeezing_db(1), f.mode_squeezing_db(2)],
            stable: true,
        });
    }
    let s = stationary_covariance(&lin.drift.m0, &lin.noise)?;
    let sq = |k: usize| {
        let v = s.v_sym[(2 * k, 2 * k)].min(s.v_sym[(2 * k + 1, 2 * k + 1)]);
        squeezing_db(v)
    };
    Ok(NodeValues {
        nbar: [s.nbar(1), s.nbar(2)],
        squeezing_db: [sq(1)?, sq(2)?],
        stable: true,
    })
}

/// Quantities a sweep can be run over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    /// |μ| in units of the panel's `mu_ep1`.
    MuOverEp1,
    MuOverGammaSum,
    PhiOverPi,
    DeltaOverOmegaM,
    TemperatureK,
    Depth,
}

impl SweepVar {
    pub fn column(self) -> &'static str {
        match self {
            SweepVar::MuOverEp1 => "mu_over_ep1",
            SweepVar::MuOverGammaSum => "mu_over_gamma_sum",
            SweepVar::PhiOverPi => "phi_over_pi",
            SweepVar::DeltaOverOmegaM => "delta_over_omega_m",
            SweepVar::TemperatureK => "temperature_k",
            SweepVar::Depth => "depth",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            SweepVar::MuOverEp1 => "|mu_EP,1|",
            SweepVar::MuOverGammaSum => "gamma1+gamma2",
            SweepVar::PhiOverPi => "pi rad",
            SweepVar::DeltaOverOmegaM => "omega_m",
            SweepVar::TemperatureK => "K",
            SweepVar::Depth => "1",
        }
    }
}

/// Operating point of a sweep panel before the swept variables are applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setting {
    pub mu_over_gamma_sum: f64,
    pub phi_over_pi: f64,
    pub delta_over_omega_m: f64,
    pub temperature_k: f64,
    pub depth: f64,
}

impl Setting {
    fn set(&mut self, var: SweepVar, value: f64, mu_ep1: f64) {
        match var {
            SweepVar::MuOverEp1 => self.mu_over_gamma_sum = value * mu_ep1,
            SweepVar::MuOverGammaSum => self.mu_over_gamma_sum = value,
            SweepVar::PhiOverPi => self.phi_over_pi = value,
            SweepVar::DeltaOverOmegaM => self.delta_over_omega_m = value,
            SweepVar::TemperatureK => self.temperature_k = value,
            SweepVar::Depth => self.depth = value,
        }
    }

    pub fn apply(&self, base: &SystemParams) -> SystemParams {
        let mut p = base
            .clone()
            .with_mu_over_gamma_sum(self.mu_over_gamma_sum)
            .with_loop_phase(self.phi_over_pi * PI)
            .with_temperature(self.temperature_k)
            .with_depth(self.depth);
        p.delta = self.delta_over_omega_m * p.omega_m;
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub var: SweepVar,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.points)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// A discrete family of curves sharing the panel axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Nbar1,
    Nbar2,
    Squeezing1Db,
    Squeezing2Db,
    Stable,
}

impl Output {
    pub fn column(self) -> &'static str {
        match self {
            Output::Nbar1 => "nbar1",
            Output::Nbar2 => "nbar2",
            Output::Squeezing1Db => "squeezing1_db",
            Output::Squeezing2Db => "squeezing2_db",
            Output::Stable => "stable",
        }
    }

    fn of(self, v: &NodeValues) -> f64 {
        match self {
            Output::Nbar1 => v.nbar[0],
            Output::Nbar2 => v.nbar[1],
            Output::Squeezing1Db => v.squeezing_db[0],
            Output::Squeezing2Db => v.squeezing_db[1],
            Output::Stable => f64::from(u8::from(v.stable)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Min,
    Max,
}

/// Extremum to report per curve, optionally refined off the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Objective {
    pub output: Output,
    pub sense: Sense,
    #[serde(default)]
    pub polish: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPanel {
    pub name: String,
    /// Reference |μ_EP,1|/(γ₁+γ₂) used by `mu_over_ep1`.
    pub mu_ep1: f64,
    pub base: Setting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Series>,
    pub axes: Vec<Grid>,
    pub outputs: Vec<Output>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Objective>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceGrid {
    pub param: SurfaceParam,
    /// Multipliers of the base parameter.
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl SurfaceGrid {
    pub fn axis(&self) -> SurfaceAxis {
        SurfaceAxis::linspace(self.param, self.lo, self.hi, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfacePanel {
    pub name: String,
    pub axis1: SurfaceGrid,
    pub axis2: SurfaceGrid,
    #[serde(default)]
    pub options: SurfaceOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    Sweep {
        panels: Vec<SweepPanel>,
    },
    Loci {
        /// One locus per |μ|/(γ₁+γ₂).
        mu_over_gamma_sum: Vec<f64>,
        phi_points: usize,
    },
    Surfaces {
        panels: Vec<SurfacePanel>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub name: String,
    pub params: SystemParams,
    #[serde(default)]
    pub floquet: FloquetSettings,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisInfo {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// Printed as an integer rather than a float.
    pub integer: bool,
}

impl Column {
    fn float(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            integer: false,
        }
    }

    fn int(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            integer: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFailure {
    pub row: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub series: Option<f64>,
    /// Axis coordinates in panel order.
    pub coords: Vec<f64>,
    pub value: f64,
    pub polished: bool,
}

/// One table of results. Failed or unstable nodes keep their row with
/// `NaN` observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub recipe: String,
    pub panel: String,
    pub axes: Vec<AxisInfo>,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
    pub failures: Vec<NodeFailure>,
    pub preset_fingerprint: String,
    pub optima: Vec<Optimum>,
}

impl SweepResult {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

#[derive(Serialize)]
struct PanelIdentity<'a, P: Serialize> {
    params: &'a SystemParams,
    floquet: &'a FloquetSettings,
    panel: &'a P,
}

pub fn builtin_recipe(name: &str) -> Result<Recipe> {
    let params = SystemParams::preset_default();
    let base = Setting {
        mu_over_gamma_sum: EP1,
        phi_over_pi: 0.5,
        delta_over_omega_m: 1.0,
        temperature_k: params.t_mech,
        depth: 0.0,
    };
    let phi_full = Grid {
        var: SweepVar::PhiOverPi,
        lo: 0.0,
        hi: 2.0,
        points: POINTS_1D,
    };
    let nbar = vec![Output::Nbar1, Output::Nbar2, Output::Stable];
    let squeeze = vec![
        Output::Squeezing1Db,
        Output::Squeezing2Db,
        Output::Nbar1,
        Output::Nbar2,
        Output::Stable,
    ];
    let depths = Series {
        var: SweepVar::Depth,
        values: vec![0.0, 0.3, 0.5, 0.7],
    };
    let mu_family = Series {
        var: SweepVar::MuOverEp1,
        values: vec![0.0, 0.5, 1.0, 1.5],
    };
    let delta = Grid {
        var: SweepVar::DeltaOverOmegaM,
        lo: 0.5,
        hi: 1.5,
        points: POINTS_1D,
    };
    let sweep = |panels| Task::Sweep { panels };
    let task = match name {
        "fig3_phase_sweep" => sweep(vec![
            SweepPanel {
                name: "ep1".into(),
                mu_ep1: EP1,
                base,
                series: None,
                axes: vec![phi_full],
                outputs: nbar.clone(),
                objective: None,
            },
            SweepPanel {
                name: "ep2".into(),
                mu_ep1: EP1,
                base: Setting {
                    mu_over_gamma_sum: EP2,
                    ..base
                },
                series: None,
                axes: vec![phi_full],
                outputs: nbar.clone(),
                objective: None,
            },
        ]),
        "fig4_mu_phase_map" => sweep(vec![SweepPanel {
            name: "map".into(),
            mu_ep1: EP1,
            base,
            series: None,
            axes: vec![
                Grid {
                    var: SweepVar::MuOverEp1,
                    lo: 0.5,
                    hi: 2.0,
                    points: POINTS_2D,
                },
                Grid {
                    var: SweepVar::PhiOverPi,
                    lo: 0.0,
                    hi: 2.0,
                    points: POINTS_2D,
                },
            ],
            outputs: nbar.clone(),
            objective: Some(Objective {
                output: Output::Nbar2,
                sense: Sense::Min,
                polish: true,
            }),
        }]),
        "fig5_loci" => Task::Loci {
            mu_over_gamma_sum: [0.95, 1.0, 1.05]
                .iter()
                .map(|f| f * EP1)
                .chain([0.95, 1.0, 1.05].iter().map(|f| f * EP2))
                .collect(),
            phi_points: POINTS_1D,
        },
        "fig6_temperature" => sweep(vec![SweepPanel {
            name: "temperature".into(),
            mu_ep1: EP1,
            base,
            series: Some(Series {
                var: SweepVar::PhiOverPi,
                values: vec![0.25, 0.5, 0.75],
            }),
            axes: vec![Grid {
                var: SweepVar::TemperatureK,
                lo: 1.0,
                hi: 300.0,
                points: POINTS_1D,
            }],
            outputs: nbar.clone(),
            objective: None,
        }]),
        "fig7_surfaces" => {
            let g = |param, lo, hi| SurfaceGrid {
                param,
                lo,
                hi,
                points: POINTS_SURFACE,
            };
            let (glo, ghi) = (0.5f64.sqrt(), 1.5f64.sqrt());
            let panel = |name: &str, axis1, axis2| SurfacePanel {
                name: name.into(),
                axis1,
                axis2,
                options: SurfaceOptions::default(),
            };
            Task::Surfaces {
                panels: vec![
                    panel("kappa_power", g(SurfaceParam::Kappa, 0.5, 1.5), g(SurfaceParam::Power, 0.5, 1.5)),
                    panel("kappa_gamma", g(SurfaceParam::Kappa, 0.5, 1.5), g(SurfaceParam::Gamma, 0.5, 1.5)),
                    panel("g1_g2", g(SurfaceParam::G1, glo, ghi), g(SurfaceParam::G2, glo, ghi)),
                    panel("detuning_power", g(SurfaceParam::Detuning, 0.5, 1.5), g(SurfaceParam::Power, 0.5, 1.5)),
                ],
            }
        }
        "fig8_squeezing" => {
            let cold = Setting {
                mu_over_gamma_sum: EP1_DEPTH_05,
                temperature_k: 1.9,
                ..base
            };
            sweep(vec![
                SweepPanel {
                    name: "phase".into(),
                    mu_ep1: EP1_DEPTH_05,
                    base: cold,
                    series: Some(depths.clone()),
                    axes: vec![phi_full],
                    outputs: squeeze.clone(),
                    objective: None,
                },
                SweepPanel {
                    name: "coupling".into(),
                    mu_ep1: EP1_DEPTH_05,
                    base: cold,
                    series: Some(depths),
                    axes: vec![Grid {
                        var: SweepVar::MuOverEp1,
                        lo: 0.5,
                        hi: 1.5,
                        points: POINTS_1D,
                    }],
                    outputs: squeeze.clone(),
                    objective: None,
                },
                SweepPanel {
                    name: "depth".into(),
                    mu_ep1: EP1_DEPTH_05,
                    base: cold,
                    series: None,
                    axes: vec![Grid {
                        var: SweepVar::Depth,
                        lo: 0.0,
                        hi: 0.7,
                        points: 71,
                    }],
                    outputs: squeeze.clone(),
                    objective: None,
                },
            ])
        }
        "fig9_detuning" => sweep(vec![
            SweepPanel {
                name: "cooling".into(),
                mu_ep1: EP1,
                base,
                series: Some(mu_family.clone()),
                axes: vec![delta],
                outputs: nbar,
                objective: Some(Objective {
                    output: Output::Nbar2,
                    sense: Sense::Min,
                    polish: false,
                }),
            },
            SweepPanel {
                name: "squeezing".into(),
                mu_ep1: EP1_DEPTH_04,
                base: Setting {
                    mu_over_gamma_sum: EP1_DEPTH_04,
                    temperature_k: 1.9,
                    depth: 0.4,
                    ..base
                },
                series: Some(mu_family),
                axes: vec![delta],
                outputs: squeeze,
                objective: Some(Objective {
                    output: Output::Squeezing2Db,
                    sense: Sense::Max,
                    polish: false,
                }),
            },
        ]),
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown recipe `{other}`; expected one of {}",
                RECIPE_NAMES.join(", ")
            )))
        }
    };
    Ok(Recipe {
        name: name.into(),
        params,
        floquet: FloquetSettings::default(),
        task,
    })
}

const EP1: f64 = 52.5;
const EP2: f64 = 80.45;
const EP1_DEPTH_05: f64 = 50.83;
const EP1_DEPTH_04: f64 = 51.36;
const POINTS_1D: usize = 201;
const POINTS_2D: usize = 101;
const POINTS_SURFACE: usize = 21;

/// RFC 7396 merge patch: objects merge recursively, `null` deletes, anything
/// else replaces.
pub fn merge_patch(target: &mut serde_json::Value, patch: &serde_json::Value) {
    use serde_json::Value;
    match patch {
        Value::Object(p) => {
            if !target.is_object() {
                *target = Value::Object(Default::default());
            }
            let t = target.as_object_mut().unwrap();
            for (k, v) in p {
                if v.is_null() {
                    t.remove(k);
                } else {
                    merge_patch(t.entry(k.clone()).or_insert(Value::Null), v);
                }
            }
        }
        _ => *target = patch.clone(),
    }
}

/// Applies a merge patch to a recipe and revalidates it.
pub fn apply_overrides(recipe: &Recipe, overrides: &serde_json::Value) -> Result<Recipe> {
    let mut v = serde_json::to_value(recipe).expect("serializable");
    if !overrides.is_null() {
        merge_patch(&mut v, overrides);
    }
    let r: Recipe = serde_json::from_value(v).map_err(|e| Error::InvalidInput(format!("recipe override: {e}")))?;
    r.params.validate()?;
    Ok(r)
}

/// Runs the named built-in recipe with `overrides` merged in (pass
/// `Value::Null` or an empty object for the stock settings).
pub fn figure_recipe(name: &str, overrides: &serde_json::Value) -> Result<Vec<SweepResult>> {
    let recipe = apply_overrides(&builtin_recipe(name)?, overrides)?;
    run_recipe(&recipe)
}

pub fn run_recipe(recipe: &Recipe) -> Result<Vec<SweepResult>> {
    recipe.params.validate()?;
    match &recipe.task {
        Task::Sweep { panels } => panels.iter().map(|p| run_sweep(recipe, p)).collect(),
        Task::Loci {
            mu_over_gamma_sum,
            phi_points,
        } => Ok(vec![run_loci(recipe, mu_over_gamma_sum, *phi_points)]),
        Task::Surfaces { panels } => Ok(panels.iter().map(|p| run_surface(recipe, p)).collect()),
    }
}

fn run_sweep(recipe: &Recipe, panel: &SweepPanel) -> Result<SweepResult> {
    if panel.axes.is_empty() || panel.axes.len() > 2 {
        return Err(Error::InvalidInput(format!(
            "panel `{}` needs one or two axes, got {}",
            panel.name,
            panel.axes.len()
        )));
    }
    let series: Vec<Option<f64>> = match &panel.series {
        Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let grids: Vec<Vec<f64>> = panel.axes.iter().map(Grid::values).collect();
    let per_curve: usize = grids.iter().map(Vec::len).product();

    // node index -> (series value, axis coordinates)
    let node = |idx: usize| {
        let s = series[idx / per_curve];
        let mut rem = idx % per_curve;
        let mut coords = vec![0.0; grids.len()];
        for (k, g) in grids.iter().enumerate().rev() {
            coords[k] = g[rem % g.len()];
            rem /= g.len();
        }
        (s, coords)
    };
    let point = |s: Option<f64>, coords: &[f64]| {
        let mut set = panel.base;
        if let (Some(v), Some(ser)) = (s, &panel.series) {
            set.set(ser.var, v, panel.mu_ep1);
        }
        for (g, &c) in panel.axes.iter().zip(coords) {
            set.set(g.var, c, panel.mu_ep1);
        }
        set.apply(&recipe.params)
    };

    let total = series.len() * per_curve;
    let results: Vec<Result<NodeValues>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let (s, coords) = node(idx);
            evaluate_point(&point(s, &coords), &recipe.floquet)
        })
        .collect();

    let mut columns = Vec::new();
    if let Some(s) = &panel.series {
        columns.push(Column::float(s.var.column()));
    }
    columns.extend(panel.axes.iter().map(|g| Column::float(g.var.column())));
    columns.extend(panel.outputs.iter().map(|o| match o {
        Output::Stable => Column::int(o.column()),
        _ => Column::float(o.column()),
    }));

    let mut rows = Vec::with_capacity(total);
    let mut failures = Vec::new();
    for (idx, r) in results.iter().enumerate() {
        let (s, coords) = node(idx);
        let mut row: Vec<f64> = s.into_iter().chain(coords).collect();
        match r {
            Ok(v) => row.extend(panel.outputs.iter().map(|o| o.of(v))),
            Err(e) => {
                failures.push(NodeFailure {
                    row: idx,
                    error: e.to_string(),
                });
                row.extend(panel.outputs.iter().map(|o| match o {
                    Output::Stable => 0.0,
                    _ => f64::NAN,
                }));
            }
        }
        rows.push(row);
    }

    let mut optima = Vec::new();
    if let Some(obj) = panel.objective {
        for (c, &s) in series.iter().enumerate() {
            let score = |v: &NodeValues| {
                let x = obj.output.of(v);
                match obj.sense {
                    Sense::Min => x,
                    Sense::Max => -x,
                }
            };
            let best = (c * per_curve..(c + 1) * per_curve)
                .filter_map(|idx| match &results[idx] {
                    Ok(v) if v.stable && score(v).is_finite() => Some((idx, score(v))),
                    _ => None,
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            let Some((idx, val)) = best else { continue };
            let (_, mut coords) = node(idx);
            let mut val = val;
            let mut polished = false;
            if obj.polish {
                let cost = PolishCost {
                    eval: &|x: &[f64]| {
                        evaluate_point(&point(s, x), &recipe.floquet)
                            .ok()
                            .filter(|v| v.stable)
                            .map_or(f64::INFINITY, |v| score(&v))
                    },
                    bounds: panel.axes.iter().map(|g| (g.lo.min(g.hi), g.lo.max(g.hi))).collect(),
                };
                let steps: Vec<f64> = panel
                    .axes
                    .iter()
                    .map(|g| 0.5 * (g.hi - g.lo) / (g.points.max(2) - 1) as f64)
                    .collect();
                if let Some((x, f)) = polish(&cost, &coords, &steps) {
                    if f < val {
                        coords = x;
                        val = f;
                        polished = true;
                    }
                }
            }
            optima.push(Optimum {
                series: s,
                coords,
                value: match obj.sense {
                    Sense::Min => val,
                    Sense::Max => -val,
                },
                polished,
            });
        }
    }

    Ok(SweepResult {
        recipe: recipe.name.clone(),
        panel: panel.name.clone(),
        axes: panel
            .axes
            .iter()
            .zip(&grids)
            .map(|(g, v)| AxisInfo {
                name: g.var.column().into(),
                unit: g.var.unit().into(),
                values: v.clone(),
            })
            .collect(),
        columns,
        rows,
        failures,
        preset_fingerprint: fingerprint(&PanelIdentity {
            params: &recipe.params,
            floquet: &recipe.floquet,
            panel,
        }),
        optima,
    })
}

struct PolishCost<'a> {
    eval: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    bounds: Vec<(f64, f64)>,
}

impl CostFunction for &PolishCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        if x.iter().zip(&self.bounds).any(|(v, (lo, hi))| v < lo || v > hi) {
            return Ok(f64::INFINITY);
        }
        Ok((self.eval)(x))
    }
}

fn polish(cost: &PolishCost<'_>, start: &[f64], steps: &[f64]) -> Option<(Vec<f64>, f64)> {
    let mut init = vec![start.to_vec()];
    for (k, &h) in steps.iter().enumerate() {
        let mut v = start.to_vec();
        // step inward if the start sits on the upper bound
        v[k] += if v[k] + h > cost.bounds[k].1 { -h } else { h };
        init.push(v);
    }
    let solver = NelderMead::new(init).with_sd_tolerance(1e-12).ok()?;
    let res = Executor::new(cost, solver)
        .configure(|s| s.max_iters(200))
        .run()
        .ok()?;
    let x = res.state.best_param?;
    let f = res.state.best_cost;
    f.is_finite().then_some((x, f))
}

fn run_loci(recipe: &Recipe, mus: &[f64], phi_points: usize) -> SweepResult {
    let phi_grid = linspace(0.0, PI, phi_points);
    let omega_m = recipe.params.omega_m;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &mu in mus {
        let p = recipe.params.clone().with_mu_over_gamma_sum(mu);
        match eigen_loci(&p, &phi_grid) {
            Ok(loci) => {
                for (phi, eig) in loci.phi_samples.iter().zip(&loci.eigvals_per_phi) {
                    for (b, z) in eig.iter().enumerate() {
                        rows.push(vec![mu, phi / PI, b as f64, z.re / omega_m, z.im / omega_m]);
                    }
                }
            }
            Err(e) => {
                failures.push(NodeFailure {
                    row: rows.len(),
                    error: format!("mu_over_gamma_sum = {mu}: {e}"),
                });
            }
        }
    }
    SweepResult {
        recipe: recipe.name.clone(),
        panel: "loci".into(),
        axes: vec![
            AxisInfo {
                name: "mu_over_gamma_sum".into(),
                unit: SweepVar::MuOverGammaSum.unit().into(),
                values: mus.to_vec(),
            },
            AxisInfo {
                name: "phi_over_pi".into(),
                unit: SweepVar::PhiOverPi.unit().into(),
                values: phi_grid.iter().map(|p| p / PI).collect(),
            },
        ],
        columns: vec![
            Column::float("mu_over_gamma_sum"),
            Column::float("phi_over_pi"),
            Column::int("branch"),
            Column::float("re_over_omega_m"),
            Column::float("im_over_omega_m"),
        ],
        rows,
        failures,
        preset_fingerprint: fingerprint(&PanelIdentity {
            params: &recipe.params,
            floquet: &recipe.floquet,
            panel: &(mus, phi_points),
        }),
        optima: Vec::new(),
    }
}

fn run_surface(recipe: &Recipe, panel: &SurfacePanel) -> SweepResult {
    let (a1, a2) = (panel.axis1.axis(), panel.axis2.axis());
    let surface = trace_surface(&recipe.params, &a1, &a2, &panel.options);
    let ep_cols = |ep: &Option<EpPoint>| match ep {
        Some(e) => [e.mu_over_gamma_sum, e.phi / PI, e.omega_ep],
        None => [f64::NAN; 3],
    };
    let rows = surface
        .nodes
        .iter()
        .map(|n| {
            let mut r = vec![n.value1, n.value2];
            r.extend(ep_cols(&n.upper));
            r.extend(ep_cols(&n.lower));
            r
        })
        .collect();
    let failures = surface
        .nodes
        .iter()
        .enumerate()
        .flat_map(|(row, n)| {
            [(Branch::Upper, n.upper.is_none()), (Branch::Lower, n.lower.is_none())]
                .into_iter()
                .filter(|&(_, missing)| missing)
                .map(move |(b, _)| NodeFailure {
                    row,
                    error: format!("no {} exceptional point", branch_name(b)),
                })
        })
        .collect();
    let mut columns = vec![
        Column::float(format!("{}_factor", a1.param.name())),
        Column::float(format!("{}_factor", a2.param.name())),
    ];
    for b in ["upper", "lower"] {
        columns.push(Column::float(format!("{b}_mu_over_gamma_sum")));
        columns.push(Column::float(format!("{b}_phi_over_pi")));
        columns.push(Column::float(format!("{b}_omega_ep_over_omega_m")));
    }
    let axis_info = |a: &SurfaceAxis| AxisInfo {
        name: format!("{}_factor", a.param.name()),
        unit: "base value".into(),
        values: a.values.clone(),
    };
    SweepResult {
        recipe: recipe.name.clone(),
        panel: panel.name.clone(),
        axes: vec![axis_info(&a1), axis_info(&a2)],
        columns,
        rows,
        failures,
        preset_fingerprint: fingerprint(&PanelIdentity {
            params: &recipe.params,
            floquet: &recipe.floquet,
            panel,
        }),
        optima: Vec::new(),
    }
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Upper => "upper",
        Branch::Lower => "lower",
    }
}
