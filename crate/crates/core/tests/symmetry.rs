//! Resonator exchange and loop-phase mirror symmetries.

use std::f64::consts::PI;

use plaquette::drift::swap_mechanical;
use plaquette::floquet::{floquet_covariance, QuadratureConfig};
use plaquette::spectral::{find_ep, Branch, Chirality, SearchBox, SearchOptions};
use plaquette::steadystate::stationary_covariance;
use plaquette::{linearize, SystemParams};

fn asymmetric() -> SystemParams {
    let mut p = SystemParams::preset_default()
        .with_mu_over_gamma_sum(40.0)
        .with_loop_phase(1.1);
    p.gamma2 *= 1.3;
    p.g2_mag *= 0.8;
    p.phi1 = 0.4;
    p
}

#[test]
fn exchanging_resonators_permutes_the_covariance() {
    let p = asymmetric();
    let a = linearize(&p).unwrap();
    let b = linearize(&p.swapped()).unwrap();
    let va = stationary_covariance(&a.drift.m0, &a.noise).unwrap().v_sym;
    let vb = stationary_covariance(&b.drift.m0, &b.noise).unwrap().v_sym;
    let diff = (swap_mechanical(&va) - vb).amax() / va.amax();
    assert!(diff < 1e-10, "{diff:.3e}");
}

#[test]
fn exchange_symmetry_survives_modulation() {
    let p = asymmetric().with_depth(0.4);
    let cfg = QuadratureConfig::default();
    let a = linearize(&p).unwrap();
    let b = linearize(&p.swapped()).unwrap();
    let fa = floquet_covariance(&a.drift, &a.noise, 2, &cfg).unwrap();
    let fb = floquet_covariance(&b.drift, &b.noise, 2, &cfg).unwrap();
    let perm = [0usize, 1, 4, 5, 2, 3];
    for i in 0..6 {
        let (x, y) = (fa.v0[perm[i]], fb.v0[i]);
        assert!((x - y).abs() < 1e-8 * x, "v0[{i}]");
        assert!((fa.v1[perm[i]] - fb.v1[i]).norm() < 1e-7 * fa.v1[perm[i]].norm(), "v1[{i}]");
    }
}

#[test]
fn loop_phase_mirror_exchanges_occupations() {
    // identical resonators: φ -> 2π - φ swaps the roles of the two modes
    for phi in [0.3, PI / 2.0, 2.2] {
        let base = SystemParams::preset_default().with_mu_over_gamma_sum(52.5);
        let a = linearize(&base.clone().with_loop_phase(phi)).unwrap();
        let b = linearize(&base.with_loop_phase(2.0 * PI - phi)).unwrap();
        let sa = stationary_covariance(&a.drift.m0, &a.noise).unwrap();
        let sb = stationary_covariance(&b.drift.m0, &b.noise).unwrap();
        assert!((sa.nbar(1) - sb.nbar(2)).abs() < 1e-9 * sa.nbar(1));
        assert!((sa.nbar(2) - sb.nbar(1)).abs() < 1e-9 * sa.nbar(2));
        assert!((sa.nbar(0) - sb.nbar(0)).abs() < 1e-9 * sa.nbar(0));
    }
}

#[test]
fn chirality_partners_share_the_coupling_magnitude() {
    let p = SystemParams::preset_default();
    let opts = SearchOptions::default();
    let cw = find_ep(&p, &SearchBox::new(40.0, 65.0, Chirality::Clockwise), Some(Branch::Upper), &opts).unwrap();
    let ccw = find_ep(&p, &SearchBox::new(40.0, 65.0, Chirality::Counterclockwise), Some(Branch::Upper), &opts).unwrap();
    assert_eq!(cw.chirality, Chirality::Clockwise);
    assert_eq!(ccw.chirality, Chirality::Counterclockwise);
    assert!((cw.mu_mag - ccw.mu_mag).abs() < 1e-8 * cw.mu_mag);
    assert!((cw.phi + ccw.phi - 2.0 * PI).abs() < 1e-6);
    assert!((cw.omega_ep - ccw.omega_ep).abs() < 1e-8);
}
