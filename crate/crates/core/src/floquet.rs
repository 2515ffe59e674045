//! Covariance harmonics of the periodically modulated system.
//!
//! The fluctuation vector is expanded over Floquet zones `n = -N..=N`, each a
//! copy of the system shifted by `nΩ`. In the frequency domain the zones obey
//! `P(ω) R = n` with the block-tridiagonal operator
//!
//! ```text
//! P_nn     = i(ω + nΩ) I + M⁽⁰⁾
//! P_n,n-1  = M⁽¹⁾
//! P_n,n+1  = M⁽⁻¹⁾
//! ```
//!
//! and white noise entering the central zone. Writing `T_m(ω)` for the blocks
//! of the central column of `P⁻¹`, the harmonics of the diagonal variances are
//!
//! ```text
//! V⁽ℓ⁾ = (1/2π) ∫ Σ_m T_m(ω) C T_{m-ℓ}(ω)† dω
//! ```
//!
//! with `V(t) = V⁽⁰⁾ + V⁽¹⁾ e^{-iΩt} + c.c. + …`. Only the central column is
//! needed, so it is obtained by a matrix continued fraction instead of a full
//! inverse.

use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{DriftHarmonics, NoiseMatrices};
use crate::linalg::{to_complex, CMat6, I};
use crate::observables::squeezing_db;
use crate::steadystate::stability;
use crate::{Error, Result};

pub const DEFAULT_ZONES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Target relative accuracy of every `V⁽⁰⁾_ii`.
    pub rel_tol: f64,
    /// Upper bound on the number of Gauss–Kronrod panels.
    pub max_panels: usize,
    /// Initial panel width as a fraction of the cavity linewidth.
    pub panel_width_kappa: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            max_panels: 40_000,
            panel_width_kappa: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FloquetCovariance {
    pub n_zones: usize,
    pub v0: [f64; 6],
    pub v1: [Complex64; 6],
    /// Second harmonic; enters only the time-domain minimum `v_min`.
    pub v2: [Complex64; 6],
    pub v_min: [f64; 6],
    pub squeezing_db: [f64; 6],
    /// Estimated relative quadrature error of `v0`.
    pub convergence: f64,
    pub panels: usize,
}

impl FloquetCovariance {
    /// Time-averaged occupation of mode `k` (0 = cavity).
    pub fn nbar(&self, k: usize) -> f64 {
        0.5 * (self.v0[2 * k] + self.v0[2 * k + 1] - 1.0)
    }

    /// Smaller of the two quadrature minima of mode `k`.
    pub fn min_variance(&self, k: usize) -> f64 {
        self.v_min[2 * k].min(self.v_min[2 * k + 1])
    }

    pub fn mode_squeezing_db(&self, k: usize) -> f64 {
        self.squeezing_db[2 * k].max(self.squeezing_db[2 * k + 1])
    }

    /// `V_ii(t)` reconstructed from the harmonics up to the second.
    pub fn variance_at(&self, i: usize, omega_mod: f64, t: f64) -> f64 {
        let e = Complex64::from_polar(1.0, -omega_mod * t);
        self.v0[i] + 2.0 * (self.v1[i] * e + self.v2[i] * e * e).re
    }
}

/// Dense `6(2N+1)` square operator with zone `n` in rows `6(n+N)..`.
pub fn assemble_p(h: &DriftHarmonics, omega: f64, n_zones: usize) -> DMatrix<Complex64> {
    let nz = 2 * n_zones + 1;
    let mut p = DMatrix::<Complex64>::zeros(6 * nz, 6 * nz);
    let m0 = to_complex(&h.m0);
    for b in 0..nz {
        let n = b as f64 - n_zones as f64;
        let diag = m0 + CMat6::identity() * (I * (omega + n * h.omega_mod));
        p.fixed_view_mut::<6, 6>(6 * b, 6 * b).copy_from(&diag);
        if b > 0 {
            p.fixed_view_mut::<6, 6>(6 * b, 6 * (b - 1)).copy_from(&h.m_plus1);
        }
        if b + 1 < nz {
            p.fixed_view_mut::<6, 6>(6 * b, 6 * (b + 1)).copy_from(&h.m_minus1);
        }
    }
    p
}

fn inv6(m: &CMat6) -> Result<CMat6> {
    m.try_inverse()
        .ok_or_else(|| Error::InvalidInput("singular Floquet block".into()))
}

/// Central block column `T_m(ω)`, `m = -N..=N`, of `P(ω)⁻¹`.
pub fn central_column(h: &DriftHarmonics, omega: f64, n_zones: usize) -> Result<Vec<CMat6>> {
    let m0 = to_complex(&h.m0);
    let a = |n: i64| m0 + CMat6::identity() * (I * (omega + n as f64 * h.omega_mod));
    let nz = n_zones as i64;
    // X_n = S_n X_{n-1} for n > 0 and X_n = Q_n X_{n+1} for n < 0
    let mut s = vec![CMat6::zeros(); n_zones + 1];
    let mut q = vec![CMat6::zeros(); n_zones + 1];
    let mut next = CMat6::zeros();
    for n in (1..=nz).rev() {
        let sn = -inv6(&(a(n) + h.m_minus1 * next))? * h.m_plus1;
        s[n as usize] = sn;
        next = sn;
    }
    let mut prev = CMat6::zeros();
    for n in (1..=nz).rev() {
        // q[k] holds Q_{-k}; build from the outermost zone inwards
        let qn = -inv6(&(a(-n) + h.m_plus1 * prev))? * h.m_minus1;
        q[n as usize] = qn;
        prev = qn;
    }
    let (s1, q1) = if n_zones > 0 {
        (s[1], q[1])
    } else {
        (CMat6::zeros(), CMat6::zeros())
    };
    let x0 = inv6(&(a(0) + h.m_plus1 * q1 + h.m_minus1 * s1))?;
    let mut out = vec![CMat6::zeros(); 2 * n_zones + 1];
    out[n_zones] = x0;
    for n in 1..=n_zones {
        out[n_zones + n] = s[n] * out[n_zones + n - 1];
        out[n_zones - n] = q[n] * out[n_zones - n + 1];
    }
    Ok(out)
}

/// Integrand packed as `[Re V⁽⁰⁾ (6), V⁽¹⁾ (6 re, 6 im), V⁽²⁾ (6 re, 6 im)]`.
type Sample = [f64; 30];

fn integrand(h: &DriftHarmonics, c: &CMat6, omega: f64, n_zones: usize) -> Result<Sample> {
    let t = central_column(h, omega, n_zones)?;
    let tc: Vec<CMat6> = t.iter().map(|tm| tm * c).collect();
    let mut out = [0.0; 30];
    let nz = n_zones as i64;
    for ell in 0..3i64 {
        let mut acc = [Complex64::new(0.0, 0.0); 6];
        for m in -nz..=nz {
            let k = m - ell;
            if k < -nz {
                continue;
            }
            let a = &tc[(m + nz) as usize];
            let b = &t[(k + nz) as usize];
            for (i, slot) in acc.iter_mut().enumerate() {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..6 {
                    s += a[(i, j)] * b[(i, j)].conj();
                }
                *slot += s;
            }
        }
        for i in 0..6 {
            match ell {
                0 => out[i] = acc[i].re,
                _ => {
                    let base = 6 + 12 * (ell as usize - 1);
                    out[base + i] = acc[i].re;
                    out[base + 6 + i] = acc[i].im;
                }
            }
        }
    }
    Ok(out)
}

// Gauss–Kronrod 7-15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_2,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integration variable: either ω itself on a finite panel or `u` with
/// `ω = sign · W / u` on a tail.
#[derive(Debug, Clone, Copy)]
enum Map {
    Core,
    Tail { sign: f64, w: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    map: Map,
    value: Sample,
    error: Sample,
    /// Weighted scalar error used for ranking.
    score: f64,
    /// Creation order, breaks ties deterministically.
    id: usize,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn gk15<F: Fn(f64) -> Result<Sample>>(f: &F, lo: f64, hi: f64, map: Map) -> Result<(Sample, Sample)> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let eval = |x: f64| -> Result<Sample> {
        match map {
            Map::Core => f(x),
            Map::Tail { sign, w } => {
                let mut v = f(sign * w / x)?;
                let jac = w / (x * x);
                v.iter_mut().for_each(|e| *e *= jac);
                Ok(v)
            }
        }
    };
    let mut kron = [0.0; 30];
    let mut gauss = [0.0; 30];
    let fc = eval(center)?;
    for k in 0..30 {
        kron[k] = WGK[7] * fc[k];
        gauss[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        for k in 0..30 {
            let s = f1[k] + f2[k];
            kron[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err = [0.0; 30];
    for k in 0..30 {
        kron[k] *= half;
        gauss[k] *= half;
        err[k] = (kron[k] - gauss[k]).abs();
    }
    Ok((kron, err))
}

/// Steady-state covariance harmonics with `n_zones` Floquet zones on each
/// side of the central one.
pub fn floquet_covariance(
    h: &DriftHarmonics,
    noise: &NoiseMatrices,
    n_zones: usize,
    cfg: &QuadratureConfig,
) -> Result<FloquetCovariance> {
    if h.is_modulated() && n_zones == 0 {
        return Err(Error::InvalidInput(
            "modulated drive needs at least one Floquet zone".into(),
        ));
    }
    let st = stability(&h.m0)?;
    if !st.stable {
        return Err(Error::Unstable { max_re: st.max_re });
    }
    let c = noise.c_mat;
    let omega_mod = h.omega_mod;
    let kappa = 2.0 * st.eigvals.iter().map(|z| -z.re).fold(0.0, f64::max);
    let f = |w: f64| integrand(h, &c, w, n_zones);

    // core interval with breakpoints at every resonance of every zone
    let width = (n_zones as f64 + 1.0) * omega_mod + 20.0 * kappa;
    let mut cuts = vec![-width, width];
    for z in &st.eigvals {
        let half_width = (-z.re).max(1e-300);
        for n in -(n_zones as i64 + 1)..=(n_zones as i64 + 1) {
            let centre = -z.im + n as f64 * omega_mod;
            for k in [0.0, 1.0, -1.0, 4.0, -4.0, 16.0, -16.0] {
                let x = centre + k * half_width;
                if x.abs() < width {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * width);
    let max_panel = cfg.panel_width_kappa * kappa;
    let mut spans: Vec<(f64, f64, Map)> = Vec::new();
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let pieces = ((hi - lo) / max_panel).ceil().max(1.0) as usize;
        let step = (hi - lo) / pieces as f64;
        for k in 0..pieces {
            let a = lo + step * k as f64;
            let b = if k + 1 == pieces { hi } else { a + step };
            spans.push((a, b, Map::Core));
        }
    }
    for sign in [-1.0, 1.0] {
        for k in 0..4 {
            let (a, b) = (0.25 * k as f64, 0.25 * (k + 1) as f64);
            spans.push((a, b, Map::Tail { sign, w: width }));
        }
    }

    let evaluate = |spans: &[(f64, f64, Map)]| -> Result<Vec<(Sample, Sample)>> {
        spans
            .par_iter()
            .map(|&(lo, hi, map)| gk15(&f, lo, hi, map))
            .collect()
    };

    let first = evaluate(&spans)?;
    let mut next_id = 0;
    let mut heap = BinaryHeap::new();
    let mut scale = [0.0f64; 6];
    for (v, _) in &first {
        for i in 0..6 {
            scale[i] += v[i];
        }
    }
    let score = |err: &Sample, scale: &[f64; 6]| -> f64 {
        // every harmonic is measured against the variance it modulates
        (0..30)
            .map(|k| {
                let i = if k < 6 { k } else { (k - 6) % 6 };
                err[k] / scale[i].abs().max(1e-300)
            })
            .fold(0.0, f64::max)
    };
    for ((lo, hi, map), (value, error)) in spans.iter().zip(first) {
        heap.push(Panel {
            lo: *lo,
            hi: *hi,
            map: *map,
            value,
            error,
            score: score(&error, &scale),
            id: next_id,
        });
        next_id += 1;
    }

    let total_error = |heap: &BinaryHeap<Panel>| -> f64 {
        let mut err = [0.0; 30];
        for p in heap.iter() {
            for k in 0..30 {
                err[k] += p.error[k];
            }
        }
        score(&err, &scale)
    };
    let target = 0.1 * cfg.rel_tol;
    let mut estimate = total_error(&heap);
    while estimate > target && heap.len() < cfg.max_panels {
        let batch = (heap.len() / 8).clamp(1, 64);
        let worst: Vec<Panel> = (0..batch).filter_map(|_| heap.pop()).collect();
        let halves: Vec<(f64, f64, Map)> = worst
            .iter()
            .flat_map(|p| {
                let mid = 0.5 * (p.lo + p.hi);
                [(p.lo, mid, p.map), (mid, p.hi, p.map)]
            })
            .collect();
        let results = evaluate(&halves)?;
        for ((lo, hi, map), (value, error)) in halves.iter().zip(results) {
            heap.push(Panel {
                lo: *lo,
                hi: *hi,
                map: *map,
                value,
                error,
                score: score(&error, &scale),
                id: next_id,
            });
            next_id += 1;
        }
        estimate = total_error(&heap);
    }

    // fixed summation order: sort panels by creation id
    let mut panels = heap.into_vec();
    panels.sort_by_key(|p| p.id);
    let mut sum = [0.0; 30];
    for p in &panels {
        for k in 0..30 {
            sum[k] += p.value[k];
        }
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI);
    let mut v0 = [0.0; 6];
    let mut v1 = [Complex64::new(0.0, 0.0); 6];
    let mut v2 = [Complex64::new(0.0, 0.0); 6];
    for i in 0..6 {
        v0[i] = sum[i] * norm;
        v1[i] = Complex64::new(sum[6 + i], sum[12 + i]) * norm;
        v2[i] = Complex64::new(sum[18 + i], sum[24 + i]) * norm;
    }
    let rel = estimate;
    if !(rel <= cfg.rel_tol) {
        return Err(Error::QuadratureNotConverged { estimate: rel });
    }
    let mut v_min = [0.0; 6];
    let mut sq = [0.0; 6];
    for i in 0..6 {
        v_min[i] = harmonic_min(v0[i], v1[i], v2[i]);
        sq[i] = if v_min[i] > 0.0 {
            squeezing_db(v_min[i])?
        } else {
            f64::NAN
        };
    }
    Ok(FloquetCovariance {
        n_zones,
        v0,
        v1,
        v2,
        v_min,
        squeezing_db: sq,
        convergence: rel,
        panels: panels.len(),
    })
}

/// Minimum over one period of `v0 + 2 Re(v1 e^{-iθ} + v2 e^{-2iθ})`: a
/// sampled scan refined by a parabola through the best sample.
fn harmonic_min(v0: f64, v1: Complex64, v2: Complex64) -> f64 {
    const SAMPLES: usize = 1024;
    let f = |theta: f64| {
        let e = Complex64::from_polar(1.0, -theta);
        v0 + 2.0 * (v1 * e + v2 * e * e).re
    };
    let step = 2.0 * std::f64::consts::PI / SAMPLES as f64;
    let (k, _) = (0..SAMPLES)
        .map(|k| (k, f(k as f64 * step)))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let theta = k as f64 * step;
    let (lo, mid, hi) = (f(theta - step), f(theta), f(theta + step));
    let curv = lo - 2.0 * mid + hi;
    if curv > 0.0 {
        f(theta + 0.5 * step * (lo - hi) / curv).min(mid)
    } else {
        mid
    }
}

/// Condition number of the dense operator, used to confirm invertibility.
pub fn p_condition(h: &DriftHarmonics, omega: f64, n_zones: usize) -> f64 {
    let p = assemble_p(h, omega, n_zones);
    let s = p.singular_values();
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::solve_classical;
    use crate::drift::{build_drift, build_noise};
    use crate::params::{derive, SystemParams};
    use crate::steadystate::covariance_residue;
    use std::f64::consts::PI;

    fn setup(p: &SystemParams) -> (DriftHarmonics, NoiseMatrices) {
        let d = derive(p).unwrap();
        let c = solve_classical(p, &d).unwrap();
        (build_drift(p, &d, &c).unwrap(), build_noise(p, &d))
    }

    fn modulated() -> SystemParams {
        SystemParams::preset_default()
            .with_mu_over_gamma_sum(50.83)
            .with_loop_phase(PI / 2.0)
            .with_temperature(1.9)
            .with_depth(0.5)
    }

    #[test]
    fn unmodulated_p_is_block_diagonal() {
        let (h, _) = setup(&SystemParams::preset_default().with_mu_over_gamma_sum(52.5));
        let p = assemble_p(&h, 0.3 * h.omega_mod, 2);
        for r in 0..30 {
            for c in 0..30 {
                if r / 6 != c / 6 {
                    assert_eq!(p[(r, c)], Complex64::new(0.0, 0.0));
                }
            }
        }
        let t = central_column(&h, 0.3 * h.omega_mod, 2).unwrap();
        let direct = (to_complex(&h.m0) + CMat6::identity() * (I * 0.3 * h.omega_mod))
            .try_inverse()
            .unwrap();
        assert!((t[2] - direct).norm() < 1e-12 * direct.norm());
        for m in [0, 1, 3, 4] {
            assert_eq!(t[m].norm(), 0.0);
        }
    }

    #[test]
    fn zero_zones_is_stationary_resolvent() {
        let (h, _) = setup(&modulated());
        let t = central_column(&h, 1e9, 0).unwrap();
        let direct = (to_complex(&h.m0) + CMat6::identity() * (I * 1e9))
            .try_inverse()
            .unwrap();
        assert!((t[0] - direct).norm() < 1e-12 * direct.norm());
    }

    #[test]
    fn continued_fraction_matches_dense_inverse() {
        let (h, _) = setup(&modulated());
        for &w in &[0.0, 0.7 * h.omega_mod, -1.3e10] {
            let p = assemble_p(&h, w, 2);
            let inv = p.try_inverse().unwrap();
            let t = central_column(&h, w, 2).unwrap();
            for (b, tb) in t.iter().enumerate() {
                let dense = inv.view((6 * b, 12), (6, 6));
                let diff = (tb - dense).norm();
                assert!(diff < 1e-10 * inv.norm(), "zone {b}: {diff}");
            }
        }
    }

    #[test]
    fn modulated_p_is_invertible_at_zero() {
        let (h, _) = setup(&modulated());
        assert!(p_condition(&h, 0.0, 2).is_finite());
    }

    #[test]
    fn unmodulated_reduces_to_stationary() {
        let p = SystemParams::preset_default()
            .with_mu_over_gamma_sum(52.5)
            .with_loop_phase(PI / 2.0);
        let (h, n) = setup(&p);
        let f = floquet_covariance(&h, &n, 2, &QuadratureConfig::default()).unwrap();
        let v = covariance_residue(&h.m0, &n.c_mat).unwrap();
        for i in 0..6 {
            assert!((f.v0[i] - v[(i, i)].re).abs() < 1e-6 * v[(i, i)].re, "{i}");
            assert!(f.v1[i].norm() < 1e-12 * f.v0[i]);
        }
    }

    #[test]
    fn modulated_invariants() {
        let (h, n) = setup(&modulated());
        let f = floquet_covariance(&h, &n, 2, &QuadratureConfig::default()).unwrap();
        for i in 0..6 {
            assert!(f.v0[i] > 0.0);
            assert!(f.v_min[i] <= f.v0[i]);
            for k in 0..32 {
                let t = 2.0 * PI / h.omega_mod * k as f64 / 32.0;
                assert!(f.variance_at(i, h.omega_mod, t) >= 0.0);
            }
        }
        assert!(f.v1[4].norm() > 0.0);
        assert!(f.convergence <= 1e-6);
    }

    #[test]
    fn rejects_zero_zones_under_modulation() {
        let (h, n) = setup(&modulated());
        assert!(floquet_covariance(&h, &n, 0, &QuadratureConfig::default()).is_err());
    }
}
