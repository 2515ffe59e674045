//! Eigenvalue loci, exceptional points and exceptional surfaces of the
//! static drift `M⁽⁰⁾`.
//!
//! An exceptional point is located in two stages. A grid scan plus simplex
//! search on the coalescence measure lands in the right basin; the point is
//! then polished by Newton's method on the double-root conditions
//! `p(z) = p'(z) = 0` of the characteristic polynomial, which are smooth in
//! the parameters even though the measure itself is not.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::drift::linearize;
use crate::linalg::{eigen_decompose, RMat6};
use crate::params::SystemParams;
use crate::{Error, Result};

/// Refined minima above this are reported as `NotFound`.
pub const EP_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Coalescence above the mechanical frequency.
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chirality {
    /// `φ_ℓ < π`.
    Clockwise,
    Counterclockwise,
}

impl Chirality {
    pub fn of_phase(phi: f64) -> Self {
        if crate::params::wrap_phase(phi) < PI {
            Chirality::Clockwise
        } else {
            Chirality::Counterclockwise
        }
    }
}

/// The three upper-half-plane eigenpairs of a real 6×6 matrix, ordered by
/// frequency.
fn upper_pairs(m0: &RMat6) -> Result<Vec<(Complex64, nalgebra::Vector6<Complex64>)>> {
    let e = eigen_decompose(m0)?;
    let mut pairs: Vec<_> = (0..6)
        .filter(|&k| e.values[k].im > 0.0)
        .map(|k| (e.values[k], e.vectors.column(k).into_owned()))
        .collect();
    pairs.sort_by(|a, b| a.0.im.total_cmp(&b.0.im));
    Ok(pairs)
}

#[derive(Debug, Clone, Copy)]
pub struct Coalescence {
    pub measure: f64,
    /// Mean of the two closest eigenvalues (rad/s).
    pub eigenvalue: Complex64,
    pub overlap: f64,
}

/// Closest upper-half-plane pair, optionally restricted to pairs whose mean
/// frequency lies on the given side of `omega_m`.
pub fn coalescence(m0: &RMat6, omega_m: f64, branch: Option<Branch>) -> Option<Coalescence> {
    let pairs = upper_pairs(m0).ok()?;
    let mut best: Option<Coalescence> = None;
    for i in 0..pairs.len() {
        for j in (i + 1)..pairs.len() {
            let (li, vi) = &pairs[i];
            let (lj, vj) = &pairs[j];
            let mean = 0.5 * (li + lj);
            let side = if mean.im > omega_m {
                Branch::Upper
            } else {
                Branch::Lower
            };
            if branch.is_some_and(|b| b != side) {
                continue;
            }
            let overlap = vi.dotc(vj).norm() / (vi.norm() * vj.norm());
            let measure = (li - lj).norm() / omega_m + (1.0 - overlap);
            if best.is_none_or(|b| measure < b.measure) {
                best = Some(Coalescence {
                    measure,
                    eigenvalue: mean,
                    overlap,
                });
            }
        }
    }
    best
}

/// Minimum over upper-half-plane pairs of `|λ_i - λ_j|/ω_m + (1 - |⟨v̂_i, v̂_j⟩|)`;
/// zero exactly at a second-order exceptional point.
pub fn coalescence_measure(m0: &RMat6, omega_m: f64) -> f64 {
    coalescence(m0, omega_m, None).map_or(f64::INFINITY, |c| c.measure)
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenLoci {
    pub phi_samples: Vec<f64>,
    /// Three eigenvalues per sample; column `k` follows one continuous branch.
    pub eigvals_per_phi: Vec<[Complex64; 3]>,
}

/// Upper-half-plane eigenvalues of `M⁽⁰⁾` along a loop-phase sweep. Phases
/// above π are folded to `2π - φ`, where the same loci are retraced.
pub fn eigen_loci(params: &SystemParams, phi_grid: &[f64]) -> Result<EigenLoci> {
    let raw: Vec<[Complex64; 3]> = phi_grid
        .par_iter()
        .map(|&phi| {
            let folded = crate::params::wrap_phase(phi);
            let folded = if folded > PI { 2.0 * PI - folded } else { folded };
            let lin = linearize(&params.clone().with_loop_phase(folded))?;
            let pairs = upper_pairs(&lin.drift.m0)?;
            if pairs.len() != 3 {
                return Err(Error::InvalidInput(format!(
                    "expected three upper-half-plane eigenvalues, found {}",
                    pairs.len()
                )));
            }
            Ok([pairs[0].0, pairs[1].0, pairs[2].0])
        })
        .collect::<Result<_>>()?;
    // continuity tracking by minimal total displacement over permutations
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut tracked: Vec<[Complex64; 3]> = Vec::with_capacity(raw.len());
    for cur in raw {
        let next = match tracked.last() {
            None => cur,
            Some(prev) => {
                let best = PERMS
                    .iter()
                    .min_by(|a, b| {
                        let cost = |p: &[usize; 3]| -> f64 {
                            (0..3).map(|k| (cur[p[k]] - prev[k]).norm()).sum()
                        };
                        cost(a).total_cmp(&cost(b))
                    })
                    .unwrap();
                [cur[best[0]], cur[best[1]], cur[best[2]]]
            }
        };
        tracked.push(next);
    }
    Ok(EigenLoci {
        phi_samples: phi_grid.to_vec(),
        eigvals_per_phi: tracked,
    })
}

/// Search region in `(|μ|/(γ₁+γ₂), φ_ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBox {
    pub mu_min: f64,
    pub mu_max: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

impl SearchBox {
    /// Full half-range of φ belonging to one chirality.
    pub fn new(mu_min: f64, mu_max: f64, chirality: Chirality) -> Self {
        let margin = 1e-3;
        let (lo, hi) = match chirality {
            Chirality::Clockwise => (margin, PI - margin),
            Chirality::Counterclockwise => (PI + margin, 2.0 * PI - margin),
        };
        SearchBox {
            mu_min,
            mu_max,
            phi_min: lo,
            phi_max: hi,
        }
    }

    fn contains(&self, mu: f64, phi: f64) -> bool {
        (self.mu_min..=self.mu_max).contains(&mu) && (self.phi_min..=self.phi_max).contains(&phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchOptions {
    /// Nodes per axis of the initial scan.
    pub grid: usize,
    pub max_simplex_iter: u64,
    pub max_newton_iter: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            grid: 64,
            max_simplex_iter: 400,
            max_newton_iter: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpPoint {
    /// |μ_EP| in rad/s.
    pub mu_mag: f64,
    pub mu_over_gamma_sum: f64,
    pub phi: f64,
    pub chirality: Chirality,
    pub branch: Branch,
    pub residual: f64,
    /// Coalescence frequency in units of ω_m.
    pub omega_ep: f64,
    /// Coalescing eigenvalue (rad/s).
    pub eigenvalue: Complex64,
    pub overlap: f64,
}

struct Objective<'a> {
    params: &'a SystemParams,
    branch: Option<Branch>,
    bx: SearchBox,
}

impl Objective<'_> {
    fn at(&self, mu: f64, phi: f64) -> SystemParams {
        self.params
            .clone()
            .with_mu_over_gamma_sum(mu)
            .with_loop_phase(phi)
    }

    fn coalescence(&self, mu: f64, phi: f64) -> Option<Coalescence> {
        let lin = linearize(&self.at(mu, phi)).ok()?;
        coalescence(&lin.drift.m0, self.params.omega_m, self.branch)
    }

    fn measure(&self, mu: f64, phi: f64) -> f64 {
        if !self.bx.contains(mu, phi) {
            return 1e3;
        }
        self.coalescence(mu, phi).map_or(1e3, |c| c.measure)
    }

    /// Monic characteristic polynomial of `M⁽⁰⁾/ω_m`, lowest degree first.
    fn char_poly(&self, mu: f64, phi: f64) -> Option<[f64; 7]> {
        let lin = linearize(&self.at(mu, phi)).ok()?;
        Some(char_poly(&(lin.drift.m0 / self.params.omega_m)))
    }
}

impl CostFunction for &Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.measure(p[0], p[1]))
    }
}

/// Faddeev–LeVerrier coefficients of `det(zI - A)`.
fn char_poly(a: &RMat6) -> [f64; 7] {
    let mut c = [0.0; 7];
    c[6] = 1.0;
    let mut mk = RMat6::zeros();
    for k in 1..=6 {
        mk = a * mk + RMat6::identity() * c[7 - k];
        c[6 - k] = -(a * mk).trace() / k as f64;
    }
    c
}

/// `p(z)`, `p'(z)` and `p''(z)`.
fn poly_eval(c: &[f64; 7], z: Complex64) -> [Complex64; 3] {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = p;
    let mut ddp = p;
    for &ck in c.iter().rev() {
        ddp = ddp * z + dp * 2.0;
        dp = dp * z + p;
        p = p * z + ck;
    }
    [p, dp, ddp]
}

fn poly_only(c: &[f64; 7], z: Complex64) -> [Complex64; 2] {
    let [p, dp, _] = poly_eval(c, z);
    [p, dp]
}

/// Newton iteration on `p(z) = p'(z) = 0` in `(μ, φ, Re z, Im z)`.
fn newton_double_root(
    obj: &Objective,
    start: (f64, f64, Complex64),
    max_iter: usize,
) -> Option<(f64, f64)> {
    let (mut mu, mut phi, mut z) = start;
    for _ in 0..max_iter {
        let c = obj.char_poly(mu, phi)?;
        let [p, dp, ddp] = poly_eval(&c, z);
        let f = Vector4::new(p.re, p.im, dp.re, dp.im);
        let hm = 1e-6 * mu;
        let hp = 1e-6;
        let dc = |a: [f64; 7], b: [f64; 7], h: f64| {
            let mut out = [0.0; 7];
            for k in 0..7 {
                out[k] = (a[k] - b[k]) / (2.0 * h);
            }
            out
        };
        let cm = dc(obj.char_poly(mu + hm, phi)?, obj.char_poly(mu - hm, phi)?, hm);
        let cp = dc(obj.char_poly(mu, phi + hp)?, obj.char_poly(mu, phi - hp)?, hp);
        let [pm, dpm] = poly_only(&cm, z);
        let [pp, dpp] = poly_only(&cp, z);
        let jz = [dp, ddp];
        let mut j = Matrix4::zeros();
        for (row, (dmu, dphi, dz)) in [(pm, pp, jz[0]), (dpm, dpp, jz[1])].iter().enumerate() {
            for (part, sel) in [(0usize, true), (1, false)] {
                let pick = |w: Complex64| if sel { w.re } else { w.im };
                let r = 2 * row + part;
                j[(r, 0)] = pick(*dmu);
                j[(r, 1)] = pick(*dphi);
                j[(r, 2)] = pick(*dz);
                j[(r, 3)] = pick(*dz * Complex64::new(0.0, 1.0));
            }
        }
        let step = j.lu().solve(&(-f))?;
        mu += step[0];
        phi += step[1];
        z += Complex64::new(step[2], step[3]);
        if !obj.bx.contains(mu, phi) {
            return None;
        }
        if step[0].abs() < 1e-14 * mu && step[1].abs() < 1e-14 && step.fixed_rows::<2>(2).norm() < 1e-14 {
            break;
        }
    }
    Some((mu, phi))
}

fn refine(
    obj: &Objective,
    start: (f64, f64),
    simplex: (f64, f64),
    opts: &SearchOptions,
) -> Result<EpPoint> {
    let (mu0, phi0) = start;
    let init = vec![
        vec![mu0, phi0],
        vec![mu0 + simplex.0, phi0],
        vec![mu0, phi0 + simplex.1],
    ];
    let solver = NelderMead::new(init)
        .with_sd_tolerance(1e-15)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let res = Executor::new(obj, solver)
        .configure(|s| s.max_iters(opts.max_simplex_iter))
        .run()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let best = res.state.best_param.clone().unwrap_or(vec![mu0, phi0]);
    let (mut mu, mut phi) = (best[0], best[1]);
    let mut coal = obj
        .coalescence(mu, phi)
        .ok_or(Error::NotFound { residual: f64::INFINITY })?;

    let z0 = coal.eigenvalue / obj.params.omega_m;
    if let Some((m, p)) = newton_double_root(obj, (mu, phi, z0), opts.max_newton_iter) {
        if let Some(c) = obj.coalescence(m, p) {
            if c.measure < coal.measure {
                mu = m;
                phi = p;
                coal = c;
            }
        }
    }
    if !(coal.measure <= EP_TOLERANCE) {
        return Err(Error::NotFound {
            residual: coal.measure,
        });
    }
    let omega_ep = coal.eigenvalue.im / obj.params.omega_m;
    Ok(EpPoint {
        mu_mag: mu * obj.params.gamma_sum(),
        mu_over_gamma_sum: mu,
        phi,
        chirality: Chirality::of_phase(phi),
        branch: if omega_ep > 1.0 {
            Branch::Upper
        } else {
            Branch::Lower
        },
        residual: coal.measure,
        omega_ep,
        eigenvalue: coal.eigenvalue,
        overlap: coal.overlap,
    })
}

/// Locates an exceptional point of `M⁽⁰⁾` inside `bx`. The classical state
/// is re-solved for every candidate `(|μ|, φ_ℓ)`.
pub fn find_ep(
    params: &SystemParams,
    bx: &SearchBox,
    branch: Option<Branch>,
    opts: &SearchOptions,
) -> Result<EpPoint> {
    let obj = Objective {
        params,
        branch,
        bx: *bx,
    };
    let n = opts.grid.max(2);
    let node = |k: usize, lo: f64, hi: f64| lo + (hi - lo) * (k as f64 + 0.5) / n as f64;
    let scores: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            obj.measure(node(i, bx.mu_min, bx.mu_max), node(j, bx.phi_min, bx.phi_max))
        })
        .collect();
    let best = (0..n * n)
        .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
        .unwrap();
    let (i, j) = (best / n, best % n);
    let start = (node(i, bx.mu_min, bx.mu_max), node(j, bx.phi_min, bx.phi_max));
    let cell = (
        (bx.mu_max - bx.mu_min) / n as f64,
        (bx.phi_max - bx.phi_min) / n as f64,
    );
    refine(&obj, start, (0.5 * cell.0, 0.5 * cell.1), opts)
}

/// Continuation step: refine from a nearby known exceptional point.
pub fn find_ep_near(
    params: &SystemParams,
    guess: &EpPoint,
    bx: &SearchBox,
    opts: &SearchOptions,
) -> Result<EpPoint> {
    let obj = Objective {
        params,
        branch: Some(guess.branch),
        bx: *bx,
    };
    let start = (guess.mu_over_gamma_sum, guess.phi);
    refine(&obj, start, (0.02 * start.0, 0.02), opts)
}

/// Parameters that can span an exceptional-surface axis. Axis values are
/// multipliers of the base parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceParam {
    Kappa,
    Power,
    /// Both mechanical damping rates together.
    Gamma,
    G1,
    G2,
    Detuning,
}

impl SurfaceParam {
    pub fn apply(self, base: &SystemParams, factor: f64) -> SystemParams {
        let mut p = base.clone();
        match self {
            SurfaceParam::Kappa => p.kappa *= factor,
            SurfaceParam::Power => p.power *= factor,
            SurfaceParam::Gamma => {
                p.gamma1 *= factor;
                p.gamma2 *= factor;
            }
            SurfaceParam::G1 => p.g1_mag *= factor,
            SurfaceParam::G2 => p.g2_mag *= factor,
            SurfaceParam::Detuning => p.delta *= factor,
        }
        p
    }

    pub fn name(self) -> &'static str {
        match self {
            SurfaceParam::Kappa => "kappa",
            SurfaceParam::Power => "power",
            SurfaceParam::Gamma => "gamma",
            SurfaceParam::G1 => "g1",
            SurfaceParam::G2 => "g2",
            SurfaceParam::Detuning => "detuning",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceAxis {
    pub param: SurfaceParam,
    pub values: Vec<f64>,
}

impl SurfaceAxis {
    pub fn linspace(param: SurfaceParam, lo: f64, hi: f64, n: usize) -> Self {
        let values = (0..n)
            .map(|k| {
                if n == 1 {
                    lo
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect();
        SurfaceAxis { param, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceOptions {
    pub mu_min: f64,
    pub mu_max: f64,
    pub chirality: Chirality,
    /// Scan used when continuation fails or at the start of a row.
    pub cold: SearchOptions,
    pub warm: SearchOptions,
}

impl Default for SurfaceOptions {
    fn default() -> Self {
        SurfaceOptions {
            mu_min: 5.0,
            mu_max: 300.0,
            chirality: Chirality::Clockwise,
            cold: SearchOptions {
                grid: 48,
                ..Default::default()
            },
            warm: SearchOptions {
                grid: 1,
                max_simplex_iter: 150,
                max_newton_iter: 30,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceNode {
    pub i: usize,
    pub j: usize,
    pub value1: f64,
    pub value2: f64,
    pub upper: Option<EpPoint>,
    pub lower: Option<EpPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpSurface {
    pub axis1: SurfaceAxis,
    pub axis2: SurfaceAxis,
    /// Row-major over `(axis1, axis2)`.
    pub nodes: Vec<SurfaceNode>,
}

impl EpSurface {
    /// Nodes at which the given branch has no exceptional point.
    pub fn gaps(&self, branch: Branch) -> Vec<(usize, usize)> {
        self.nodes
            .iter()
            .filter(|n| match branch {
                Branch::Upper => n.upper.is_none(),
                Branch::Lower => n.lower.is_none(),
            })
            .map(|n| (n.i, n.j))
            .collect()
    }
}

fn node_search(
    params: &SystemParams,
    branch: Branch,
    guess: Option<&EpPoint>,
    opts: &SurfaceOptions,
) -> Option<EpPoint> {
    let bx = SearchBox::new(opts.mu_min, opts.mu_max, opts.chirality);
    if let Some(g) = guess {
        if let Ok(ep) = find_ep_near(params, g, &bx, &opts.warm) {
            if ep.branch == branch {
                return Some(ep);
            }
        }
    }
    find_ep(params, &bx, Some(branch), &opts.cold)
        .ok()
        .filter(|ep| ep.branch == branch)
}

/// Traces both exceptional-point branches over a two-parameter grid. The
/// first column is walked sequentially; each row then continues from its
/// first node, rows running in parallel. Missing points are recorded, never
/// fatal.
pub fn trace_surface(
    params: &SystemParams,
    axis1: &SurfaceAxis,
    axis2: &SurfaceAxis,
    opts: &SurfaceOptions,
) -> EpSurface {
    let at = |i: usize, j: usize| {
        let p = axis1.param.apply(params, axis1.values[i]);
        axis2.param.apply(&p, axis2.values[j])
    };
    let mut column: Vec<(Option<EpPoint>, Option<EpPoint>)> = Vec::new();
    let mut prev: (Option<EpPoint>, Option<EpPoint>) = (None, None);
    for i in 0..axis1.values.len() {
        if axis2.values.is_empty() {
            break;
        }
        let p = at(i, 0);
        let up = node_search(&p, Branch::Upper, prev.0.as_ref(), opts);
        let lo = node_search(&p, Branch::Lower, prev.1.as_ref(), opts);
        prev = (up.or(prev.0), lo.or(prev.1));
        column.push((up, lo));
    }
    let rows: Vec<Vec<SurfaceNode>> = column
        .par_iter()
        .enumerate()
        .map(|(i, first)| {
            let mut out = Vec::with_capacity(axis2.values.len());
            let mut guess = *first;
            for j in 0..axis2.values.len() {
                let (up, lo) = if j == 0 {
                    *first
                } else {
                    let p = at(i, j);
                    (
                        node_search(&p, Branch::Upper, guess.0.as_ref(), opts),
                        node_search(&p, Branch::Lower, guess.1.as_ref(), opts),
                    )
                };
                guess = (up.or(guess.0), lo.or(guess.1));
                out.push(SurfaceNode {
                    i,
                    j,
                    value1: axis1.values[i],
                    value2: axis2.values[j],
                    upper: up,
                    lower: lo,
                });
            }
            out
        })
        .collect();
    EpSurface {
        axis1: axis1.clone(),
        axis2: axis2.clone(),
        nodes: rows.into_iter().flatten().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jordan_block_is_exceptional() {
        let w = 1.0e10;
        let mut m = RMat6::zeros();
        // mode pair with eigenvalue -γ + iω twice and a single eigenvector
        let blk = nalgebra::Matrix2::new(-0.01 * w, w, -w, -0.01 * w);
        for k in 0..3 {
            m.fixed_view_mut::<2, 2>(2 * k, 2 * k).copy_from(&blk);
        }
        m.fixed_view_mut::<2, 2>(0, 2)
            .copy_from(&nalgebra::Matrix2::identity());
        // third mode detuned
        m[(4, 5)] = 1.5 * w;
        m[(5, 4)] = -1.5 * w;
        assert!(coalescence_measure(&m, w) < 1e-10);
    }

    #[test]
    fn diabolic_degeneracy_is_not_exceptional() {
        let w = 1.0e10;
        let mut m = RMat6::zeros();
        let blk = nalgebra::Matrix2::new(-0.01 * w, w, -w, -0.01 * w);
        for k in 0..3 {
            m.fixed_view_mut::<2, 2>(2 * k, 2 * k).copy_from(&blk);
        }
        m[(4, 5)] = 1.5 * w;
        m[(5, 4)] = -1.5 * w;
        let c = coalescence_measure(&m, w);
        assert!((c - 1.0).abs() < 1e-8, "{c}");
    }

    #[test]
    fn char_poly_roots_are_eigenvalues() {
        let m = RMat6::from_fn(|i, j| ((i * 5 + j * 3) % 7) as f64 * 0.3 - 1.0);
        let c = char_poly(&m);
        for z in eigen_decompose(&m).unwrap().values {
            let [p, _, _] = poly_eval(&c, z);
            assert!(p.norm() < 1e-10, "{p}");
        }
    }

    #[test]
    fn decoupled_loci_are_fixed_points() {
        let mut p = SystemParams::preset_default().with_mu_over_gamma_sum(20.0);
        p.g1_mag = 0.0;
        p.g2_mag = 0.0;
        let grid: Vec<f64> = (0..9).map(|k| PI * k as f64 / 8.0).collect();
        let loci = eigen_loci(&p, &grid).unwrap();
        let mu = p.mu_mag;
        for row in &loci.eigvals_per_phi {
            let mut expect = [
                Complex64::new(-p.gamma1 / 2.0, p.omega_m - mu),
                Complex64::new(-p.gamma1 / 2.0, p.omega_m + mu),
                Complex64::new(-p.kappa / 2.0, p.delta),
            ];
            for z in row {
                let k = (0..3)
                    .min_by(|&a, &b| (expect[a] - z).norm().total_cmp(&(expect[b] - z).norm()))
                    .unwrap();
                assert!((expect[k] - z).norm() < 1e-6 * p.omega_m, "{z} vs {}", expect[k]);
                expect[k] = Complex64::new(f64::NAN, f64::NAN);
            }
        }
    }

    #[test]
    fn loci_retrace_above_pi() {
        let p = SystemParams::preset_default().with_mu_over_gamma_sum(52.5);
        let a = eigen_loci(&p, &[0.4, 1.3]).unwrap();
        let b = eigen_loci(&p, &[2.0 * PI - 0.4, 2.0 * PI - 1.3]).unwrap();
        for (ra, rb) in a.eigvals_per_phi.iter().zip(&b.eigvals_per_phi) {
            for (za, zb) in ra.iter().zip(rb) {
                assert!((za - zb).norm() < 1e-12 * za.norm());
            }
        }
    }
}
