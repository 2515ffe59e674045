use std::path::{Path, PathBuf};

use serde_json::{json, Value};

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["plaquette"];
    argv.extend_from_slice(args);
    plaquette_cli::run(argv)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn assert_schema(doc: &Value, schema: &str) {
    let schema = read_json(&schema_dir().join(schema));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

/// A 5×5 version of the fig4 map, written as a JSON config.
fn small_map_config(dir: &Path) -> PathBuf {
    let cfg = json!({
        "preset": "default",
        "figure": {
            "name": "fig4_mu_phase_map",
            "overrides": {"task": {"panels": [{
                "name": "map", "mu_ep1": 52.5,
                "base": {"mu_over_gamma_sum": 52.5, "phi_over_pi": 0.5,
                         "delta_over_omega_m": 1.0, "temperature_k": 18.1, "depth": 0.0},
                "axes": [{"var": "mu_over_ep1", "lo": 1.0, "hi": 1.2, "points": 5},
                         {"var": "phi_over_pi", "lo": 0.4, "hi": 0.6, "points": 5}],
                "outputs": ["nbar1", "nbar2", "stable"],
                "objective": {"output": "nbar2", "sense": "min", "polish": true}
            }]}}
        }
    });
    let path = dir.join("small.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn validate_prints_derived_quantities() {
    assert_eq!(run(&["validate", "--preset", "default", "--workers", "1"]), 0);
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    assert_eq!(run(&["validate", "--workers", "1", "-o", out.to_str().unwrap()]), 0);
    let v = read_json(&out.join("validation.json"));
    assert_schema(&v, "validation.schema.json");
    assert!(v["derived"]["eps0"].as_f64().unwrap() > 0.0);
    assert!((v["derived"]["n_m"].as_f64().unwrap() - 100.07).abs() < 0.01);
    assert_eq!(v["stability"]["stable"], json!(true));
    assert_schema(&read_json(&out.join("manifest.json")), "manifest.schema.json");
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "preset = \"default\"\n[params]\nkappa = 1.0\n").unwrap();
    assert_eq!(run(&["validate", "--workers", "1", "--config", bad.to_str().unwrap()]), 2);
    std::fs::write(&bad, "colour = 3\n").unwrap();
    assert_eq!(run(&["validate", "--workers", "1", "--config", bad.to_str().unwrap()]), 2);
    assert_eq!(run(&["validate", "--workers", "1", "--preset", "nonexistent"]), 2);
    assert_eq!(run(&["validate", "--workers", "1", "--set", "kappa_hz=-5"]), 2);
    assert_eq!(run(&["validate", "--workers", "1", "--set", "mu_hz=1e6", "--set", "mu_over_gamma_sum=3"]), 2);
    assert_eq!(run(&["figure", "fig99", "--workers", "1", "-o", tmp.path().to_str().unwrap()]), 2);
    assert_eq!(run(&["no-such-command"]), 2);
    assert_eq!(run(&["ep-find", "--box-mu", "40-65", "--workers", "1"]), 2);
}

#[test]
fn toml_config_with_unit_suffixes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        "preset = \"default\"\nworkers = 1\n\n[params]\nkappa_hz = 900e6\nmu_over_gamma_sum = 52.5\nloop_phase_rad = 1.5707963267948966\ntemperature_k = 18.1\n",
    )
    .unwrap();
    let out = tmp.path().join("s");
    assert_eq!(run(&["steady", "--config", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]), 0);
    let s = read_json(&out.join("steady.json"));
    assert_schema(&s, "steady.schema.json");
    let nbar2 = s["nbar"][2].as_f64().unwrap();
    assert!(nbar2 > 0.5 && nbar2 < 2.0, "{nbar2}");
    assert!(s["residue_lyapunov_rel_diff"].as_f64().unwrap() < 1e-8);
}

#[test]
fn numerical_failure_exits_3_with_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ep");
    // no exceptional point at these couplings
    let code = run(&["ep-find", "--box-mu", "5:10", "--branch", "upper", "--workers", "1", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 3);
    let m = read_json(&out.join("manifest.json"));
    assert_schema(&m, "manifest.schema.json");
    assert_eq!(m["status"], "failed");
    assert_eq!(m["error"]["exit_code"], 3);

    // blue-detuned drive has no steady state
    let out = tmp.path().join("st");
    let code = run(&["steady", "--set", "delta_hz=-3.75e9", "--workers", "1", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 3);
}

#[test]
fn io_failure_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert_eq!(run(&["steady", "--set", "mu_over_gamma_sum=52.5", "--workers", "1", "-o", blocker.to_str().unwrap()]), 4);
    assert_eq!(run(&["validate", "--config", tmp.path().join("missing.toml").to_str().unwrap()]), 4);
}

#[test]
fn ep_find_output_matches_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ep");
    let code = run(&["ep-find", "--box-mu", "40:65", "--branch", "upper", "--chirality", "cw", "--workers", "1", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let ep = read_json(&out.join("ep_point.json"));
    assert_schema(&ep, "ep_point.schema.json");
    assert!((ep["mu_over_gamma_sum"].as_f64().unwrap() - 52.5).abs() < 1.05);
    assert_eq!(ep["chirality"], "clockwise");

    let out = tmp.path().join("ccw");
    let code = run(&["ep-find", "--box-mu", "40:65", "--branch", "upper", "--chirality", "ccw", "--workers", "1", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let mirror = read_json(&out.join("ep_point.json"));
    let phi = ep["phi"].as_f64().unwrap() + mirror["phi"].as_f64().unwrap();
    assert!((phi - 2.0 * std::f64::consts::PI).abs() < 1e-6);
}

#[test]
fn figure_csv_layout_and_manifest_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_map_config(tmp.path());
    let a = tmp.path().join("a");
    assert_eq!(run(&["figure", "--config", cfg.to_str().unwrap(), "--workers", "2", "-o", a.to_str().unwrap()]), 0);
    let csv = std::fs::read_to_string(a.join("fig4_mu_phase_map.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "mu_over_ep1,phi_over_pi,nbar1,nbar2,stable");
    assert_eq!(csv.lines().count(), 26);
    assert!(!csv.contains('\r'));
    let first: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0], "1.0000000000000000e0");
    assert_eq!(first[4], "1");

    let manifest = a.join("manifest.json");
    let m = read_json(&manifest);
    assert_schema(&m, "manifest.schema.json");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["workers"], 2);
    let optimum = &m["summary"]["tables"][0]["optima"][0];
    assert_eq!(optimum["polished"], true);

    // replay from the manifest with a different worker count
    let b = tmp.path().join("b");
    assert_eq!(run(&["figure", "--config", manifest.to_str().unwrap(), "--workers", "1", "-o", b.to_str().unwrap()]), 0);
    let replay = std::fs::read(b.join("fig4_mu_phase_map.csv")).unwrap();
    assert_eq!(replay, csv.as_bytes());
}

#[test]
fn floquet_and_oracle_check() {
    let tmp = tempfile::tempdir().unwrap();
    let common = ["--set", "mu_over_gamma_sum=50.83", "--set", "loop_phase_rad=1.5707963267948966", "--set", "temperature_k=1.9", "--set", "depth_plus=0.5", "--workers", "1"];
    let out = tmp.path().join("f");
    let mut args = vec!["floquet"];
    args.extend_from_slice(&common);
    args.extend_from_slice(&["-o", out.to_str().unwrap()]);
    assert_eq!(run(&args), 0);
    let f = read_json(&out.join("floquet.json"));
    assert_schema(&f, "floquet.schema.json");
    assert!(f["squeezing_db"][5].as_f64().unwrap() > 0.0 || f["squeezing_db"][4].as_f64().unwrap() > 0.0);

    let out = tmp.path().join("o");
    let mut args = vec!["oracle-check"];
    args.extend_from_slice(&common);
    args.extend_from_slice(&["-o", out.to_str().unwrap()]);
    assert_eq!(run(&args), 0);
    let o = read_json(&out.join("oracle_check.json"));
    assert_schema(&o, "oracle_check.schema.json");
    assert_eq!(o["method"], "floquet");
    assert_eq!(o["pass"], true);

    // a tolerance below the RK4 error is reported as a numerical failure
    let out = tmp.path().join("strict");
    let cfg = tmp.path().join("strict.toml");
    std::fs::write(&cfg, "[oracle]\nsteps_per_period = 16\nrel_tol = 1e-12\n").unwrap();
    let mut args = vec!["oracle-check", "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(&common);
    args.extend_from_slice(&["-o", out.to_str().unwrap()]);
    assert_eq!(run(&args), 3);
}

#[test]
fn loci_and_surface_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("l");
    assert_eq!(run(&["loci", "--set", "mu_over_gamma_sum=52.5", "--workers", "1", "-o", out.to_str().unwrap()]), 0);
    let csv = std::fs::read_to_string(out.join("loci.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "phi_over_pi,branch,re_over_omega_m,im_over_omega_m");
    assert_eq!(csv.lines().count(), 1 + 3 * 201);

    let out = tmp.path().join("s");
    let code = run(&["ep-surface", "--axis1", "kappa:0.9:1.1:2", "--axis2", "power:0.9:1.1:2", "--workers", "1", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(out.join("ep_surface.csv")).unwrap();
    assert!(csv.starts_with("kappa_factor,power_factor,upper_mu_over_gamma_sum,"));
    assert_eq!(csv.lines().count(), 5);
    assert!(!csv.contains("NaN"));
}

#[test]
fn workers_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("w");
    std::env::set_var(plaquette_cli::WORKERS_ENV, "3");
    let code = run(&["validate", "-o", out.to_str().unwrap()]);
    std::env::remove_var(plaquette_cli::WORKERS_ENV);
    assert_eq!(code, 0);
    assert_eq!(read_json(&out.join("manifest.json"))["workers"], 3);
}
