use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use plaquette::floquet::floquet_covariance;
use plaquette::linalg::physicality_margin;
use plaquette::observables::{
    apply_overrides, builtin_recipe, run_recipe, squeezing_db, FloquetSettings, Recipe, SurfaceGrid, SurfacePanel,
    SweepResult, Task,
};
use plaquette::oracle::periodic_covariance;
use plaquette::spectral::{eigen_loci, find_ep, SearchBox};
use plaquette::steadystate::{stability, stationary_covariance};
use plaquette::{derive, linearize, SystemParams};
use serde_json::{json, Value};

use crate::config::{AxisConfig, RunConfig};
use crate::output::{csv_text, write_file, write_json};
use crate::{CliError, Command, Outcome};

pub(crate) fn dispatch(
    cmd: &Command,
    cfg: &RunConfig,
    params: &SystemParams,
    out: &Path,
    explicit_output: bool,
) -> Result<Outcome, CliError> {
    match cmd {
        Command::Steady => steady(params, out),
        Command::Floquet => floquet(cfg, params, out),
        Command::Loci => loci(cfg, params, out),
        Command::EpFind { .. } => ep_find(cfg, params, out),
        Command::EpSurface { .. } => ep_surface(cfg, params, out),
        Command::Figure { .. } => figure(cfg, params, out),
        Command::OracleCheck => oracle_check(cfg, params, out),
        Command::Validate => validate(params, out, explicit_output),
    }
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn json_outcome(out: &Path, name: &str, value: Value) -> Result<Outcome, CliError> {
    let path = write_json(out, name, &value)?;
    Ok(Outcome {
        outputs: vec![file_name(&path)],
        stdout: format!("{}\n", serde_json::to_string_pretty(&value).unwrap()),
        summary: value,
        node_failures: Vec::new(),
    })
}

fn steady(params: &SystemParams, out: &Path) -> Result<Outcome, CliError> {
    let lin = linearize(params)?;
    let s = stationary_covariance(&lin.drift.m0, &lin.noise)?;
    let residue_sym = s.v.map(|z| z.re);
    let residue_sym = (residue_sym + residue_sym.transpose()) * 0.5;
    let scale = s.v_sym.amax();
    let agreement = (residue_sym - s.v_sym).amax() / scale;
    let mut sq = Vec::with_capacity(6);
    for i in 0..6 {
        sq.push(squeezing_db(s.v_sym[(i, i)])?);
    }
    let v_sym: Vec<Vec<f64>> = (0..6).map(|i| (0..6).map(|j| s.v_sym[(i, j)]).collect()).collect();
    let value = json!({
        "stable": s.stable,
        "eigenvalues_over_omega_m": s.eigvals.iter().map(|z| pair(z / params.omega_m)).collect::<Vec<_>>(),
        "nbar": [s.nbar(0), s.nbar(1), s.nbar(2)],
        "squeezing_db": sq,
        "v_sym": v_sym,
        "residue_lyapunov_rel_diff": agreement,
        "physicality_margin": physicality_margin(&s.v_sym),
        "eigenvector_condition": s.cond_u,
        "intracavity_photons": lin.classical.photon_number(),
    });
    json_outcome(out, "steady.json", value)
}

fn floquet(cfg: &RunConfig, params: &SystemParams, out: &Path) -> Result<Outcome, CliError> {
    let lin = linearize(params)?;
    let f = floquet_covariance(&lin.drift, &lin.noise, cfg.floquet.zones, &cfg.floquet.quadrature())?;
    let value = json!({
        "n_zones": f.n_zones,
        "nbar": [f.nbar(0), f.nbar(1), f.nbar(2)],
        "v0": f.v0,
        "v1": f.v1.iter().map(|z| pair(*z)).collect::<Vec<_>>(),
        "v2": f.v2.iter().map(|z| pair(*z)).collect::<Vec<_>>(),
        "v_min": f.v_min,
        "squeezing_db": f.squeezing_db,
        "convergence": f.convergence,
        "panels": f.panels,
    });
    json_outcome(out, "floquet.json", value)
}

fn loci(cfg: &RunConfig, params: &SystemParams, out: &Path) -> Result<Outcome, CliError> {
    let l = &cfg.loci;
    let grid: Vec<f64> = (0..l.phi_points)
        .map(|k| l.phi_min_rad + (l.phi_max_rad - l.phi_min_rad) * k as f64 / (l.phi_points - 1) as f64)
        .collect();
    let loci = eigen_loci(params, &grid)?;
    let mut text = String::from("phi_over_pi,branch,re_over_omega_m,im_over_omega_m\n");
    for (phi, eig) in grid.iter().zip(&loci.eigvals_per_phi) {
        for (b, z) in eig.iter().enumerate() {
            text.push_str(&format!(
                "{:.16e},{b},{:.16e},{:.16e}\n",
                phi / PI,
                z.re / params.omega_m,
                z.im / params.omega_m
            ));
        }
    }
    let path = write_file(out, "loci.csv", text.as_bytes())?;
    Ok(Outcome {
        outputs: vec![file_name(&path)],
        summary: json!({"phi_points": grid.len()}),
        stdout: format!("wrote {}\n", path.display()),
        node_failures: Vec::new(),
    })
}

fn ep_find(cfg: &RunConfig, params: &SystemParams, out: &Path) -> Result<Outcome, CliError> {
    let e = &cfg.ep;
    let bx = SearchBox::new(e.mu_min, e.mu_max, e.chirality);
    let ep = find_ep(params, &bx, e.branch, &e.search())?;
    let value = serde_json::to_value(ep).expect("serializable");
    json_outcome(out, "ep_point.json", value)
}

fn surface_grid(a: &AxisConfig) -> SurfaceGrid {
    SurfaceGrid {
        param: a.param,
        lo: a.lo,
        hi: a.hi,
        points: a.points,
    }
}

fn ep_surface(cfg: &RunConfig, params: &SystemParams, out: &Path) -> Result<Outcome, CliError> {
    let s = &cfg.surface;
    let recipe = Recipe {
        name: "ep_surface".into(),
        params: params.clone(),
        floquet: FloquetSettings::default(),
        task: Task::Surfaces {
            panels: vec![SurfacePanel {
                name: "surface".into(),
                axis1: surface_grid(&s.axis1),
                axis2: surface_grid(&s.axis2),
                options: s.options,
            }],
        },
    };
    let tables = run_recipe(&recipe)?;
    write_tables(out, "ep_surface", &tables)
}

fn figure(cfg: &RunConfig, params: &SystemParams, out: &Path) -> Result<Outcome, CliError> {
    let name = cfg.figure.name.as_deref().expect("validated");
    let mut recipe = builtin_recipe(name)?;
    recipe.params = params.clone();
    recipe.floquet = FloquetSettings {
        zones: cfg.floquet.zones,
        quadrature: cfg.floquet.quadrature(),
    };
    if let Some(o) = &cfg.figure.overrides {
        recipe = apply_overrides(&recipe, o)?;
    }
    let tables = run_recipe(&recipe)?;
    write_tables(out, name, &tables)
}

fn write_tables(out: &Path, stem: &str, tables: &[SweepResult]) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let mut summaries = Vec::new();
    for t in tables {
        let file = if tables.len() == 1 {
            format!("{stem}.csv")
        } else {
            format!("{stem}_{}.csv", t.panel)
        };
        write_file(out, &file, csv_text(t).as_bytes())?;
        for f in &t.failures {
            outcome.node_failures.push(json!({"file": file, "row": f.row, "error": f.error}));
        }
        summaries.push(json!({
            "file": file,
            "panel": t.panel,
            "rows": t.rows.len(),
            "columns": t.columns.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
            "axes": t.axes,
            "preset_fingerprint": t.preset_fingerprint,
            "optima": t.optima,
            "failures": t.failures.len(),
        }));
        outcome.stdout.push_str(&format!("wrote {} ({} rows, {} node failures)\n", file, t.rows.len(), t.failures.len()));
        outcome.outputs.push(file);
    }
    outcome.summary = json!({"recipe": stem, "tables": summaries});
    Ok(outcome)
}

fn oracle_check(cfg: &RunConfig, params: &SystemParams, out: &Path) -> Result<Outcome, CliError> {
    let lin = linearize(params)?;
    let per = periodic_covariance(&lin.drift, &lin.noise.d_mat, cfg.oracle.steps_per_period)?;
    let mean = per.mean();
    let tol = cfg.oracle.rel_tol;
    let (method, rel, detail) = if lin.drift.is_modulated() {
        let f = floquet_covariance(&lin.drift, &lin.noise, cfg.floquet.zones, &cfg.floquet.quadrature())?;
        let v0_rel = (0..6)
            .map(|i| (f.v0[i] - mean[(i, i)]).abs() / mean[(i, i)].abs())
            .fold(0.0, f64::max);
        let vmin_rel = (2..6)
            .map(|i| (f.v_min[i] - per.min_variance(i)).abs() / per.min_variance(i).abs())
            .fold(0.0, f64::max);
        (
            "floquet",
            v0_rel,
            json!({"v0_rel_diff": v0_rel, "v_min_rel_diff": vmin_rel,
                   "v_min_floquet": f.v_min, "v0_floquet": f.v0}),
        )
    } else {
        let s = stationary_covariance(&lin.drift.m0, &lin.noise)?;
        let rel = (s.v_sym - mean).amax() / mean.amax();
        ("stationary", rel, json!({"max_rel_diff": rel}))
    };
    let pass = rel <= tol;
    let value = json!({
        "method": method,
        "steps_per_period": cfg.oracle.steps_per_period,
        "rel_tol": tol,
        "rel_diff": rel,
        "pass": pass,
        "detail": detail,
        "stable": stability(&lin.drift.m0)?.stable,
    });
    let outcome = json_outcome(out, "oracle_check.json", value)?;
    if !pass {
        return Err(CliError::Numerical(format!(
            "{method} result disagrees with time-domain propagation: relative difference {rel:.3e} > {tol:.1e}"
        )));
    }
    Ok(outcome)
}

fn validate(params: &SystemParams, out: &Path, write: bool) -> Result<Outcome, CliError> {
    let d = derive(params)?;
    let lin = linearize(params);
    let stab = match &lin {
        Ok(l) => {
            let s = stability(&l.drift.m0)?;
            json!({"stable": s.stable, "max_re_over_omega_m": s.max_re / params.omega_m})
        }
        Err(e) => json!({"stable": Value::Null, "error": e.to_string()}),
    };
    let value = json!({
        "params": params,
        "derived": d,
        "gamma_sum_hz": params.gamma_sum() / (2.0 * PI),
        "mu_over_gamma_sum": params.mu_mag / params.gamma_sum(),
        "resolved_sideband": params.resolved_sideband(),
        "intracavity_photons": lin.as_ref().ok().map(|l| l.classical.photon_number()),
        "stability": stab,
    });
    if write {
        return json_outcome(out, "validation.json", value);
    }
    Ok(Outcome {
        stdout: format!("{}\n", serde_json::to_string_pretty(&value).unwrap()),
        summary: value,
        ..Default::default()
    })
}
