//! Floquet covariance harmonics against late-time propagation of the
//! covariance equation.

use std::f64::consts::PI;

use plaquette::floquet::{floquet_covariance, QuadratureConfig};
use plaquette::oracle::periodic_covariance;
use plaquette::{linearize, SystemParams};

fn point(depth: f64) -> SystemParams {
    SystemParams::preset_default()
        .with_mu_over_gamma_sum(50.83)
        .with_loop_phase(PI / 2.0)
        .with_temperature(1.9)
        .with_depth(depth)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn harmonics_match_time_domain() {
    let cfg = QuadratureConfig::default();
    for d in [0.3, 0.5, 0.7] {
        let lin = linearize(&point(d)).unwrap();
        let f = floquet_covariance(&lin.drift, &lin.noise, 2, &cfg).unwrap();
        let per = periodic_covariance(&lin.drift, &lin.noise.d_mat, 400).unwrap();
        let mean = per.mean();
        for i in 0..6 {
            assert!(rel(f.v0[i], mean[(i, i)]) < 1e-4, "d = {d}, v0[{i}]");
            let c1 = per.harmonic(i, i, 1);
            assert!((f.v1[i] - c1).norm() < 1e-3 * c1.norm(), "d = {d}, v1[{i}]");
        }
        // mechanical quadrature minima over a late period
        for i in 2..6 {
            let r = rel(f.v_min[i], per.min_variance(i));
            assert!(r < 1e-4, "d = {d}, v_min[{i}]: {r:.3e}");
        }
    }
}

#[test]
fn zone_count_has_converged() {
    let cfg = QuadratureConfig::default();
    for d in [0.3, 0.5, 0.7] {
        let lin = linearize(&point(d)).unwrap();
        let f2 = floquet_covariance(&lin.drift, &lin.noise, 2, &cfg).unwrap();
        let f3 = floquet_covariance(&lin.drift, &lin.noise, 3, &cfg).unwrap();
        for i in 0..6 {
            assert!(rel(f2.v0[i], f3.v0[i]) < 1e-4, "d = {d}, v0[{i}]");
        }
    }
}

#[test]
fn second_harmonic_is_small_at_the_squeezing_point() {
    let lin = linearize(&point(0.5)).unwrap();
    let f = floquet_covariance(&lin.drift, &lin.noise, 2, &QuadratureConfig::default()).unwrap();
    // the truncation argument concerns the resonators; the cavity sits near 0.065
    for i in 2..6 {
        assert!(f.v2[i].norm() < 0.05 * f.v1[i].norm(), "{i}");
    }
    for i in 0..6 {
        assert!(f.v_min[i] <= f.v0[i]);
    }
    assert!(f.mode_squeezing_db(2) > 0.0);
}
