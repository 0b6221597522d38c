//! The Abrikosov parameter `beta(tau) = <|psi0|^4> / <|psi0|^2>^2`, its
//! critical points over the fundamental domain, and the energy landscape of
//! lattice states near the normal state.

use std::f64::consts::PI;

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bifurcation::{branch_by_field, ReductionOptions, ReductionSetup};
use crate::landau::{LandauBasis, ThetaCoeffs};
use crate::lattice::{normalize_tau, LatticeShape};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMethod {
    Quadrature,
    LatticeSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaResult {
    pub tau: LatticeShape,
    pub beta: f64,
    pub method: BetaMethod,
    /// Theta terms (quadrature) or lattice-sum cutoff.
    pub k: usize,
    /// Quadrature grid size; 0 for the lattice sum.
    pub grid: usize,
}

/// Quadrature grid used by default for `beta`.
pub fn default_beta_grid(shape: &LatticeShape) -> usize {
    let k = ThetaCoeffs::truncation(1, shape.im()) as usize;
    let nu = (2.0 * PI * shape.im()).sqrt();
    let n = (4 * k).max(32).max((3.0 * nu).ceil() as usize);
    n + n % 2
}

/// `beta(tau)` by rectangle-rule quadrature of the level-0 theta function.
pub fn beta_quadrature(shape: LatticeShape) -> Result<BetaResult> {
    beta_quadrature_with(shape, default_beta_grid(&shape))
}

pub fn beta_quadrature_with(shape: LatticeShape, grid: usize) -> Result<BetaResult> {
    let basis = LandauBasis::new(1, shape, grid, 0)?;
    let side = grid + 1;
    let values = basis.values(0, 0);
    let (mut m2, mut m4) = (0.0, 0.0);
    for j2 in 0..grid {
        for v in &values[j2 * side..j2 * side + grid] {
            let r = v.norm_sqr();
            m2 += r;
            m4 += r * r;
        }
    }
    let cnt = (grid * grid) as f64;
    let (m2, m4) = (m2 / cnt, m4 / cnt);
    Ok(BetaResult {
        tau: shape,
        beta: m4 / (m2 * m2),
        method: BetaMethod::Quadrature,
        k: ThetaCoeffs::truncation(1, shape.im()) as usize,
        grid,
    })
}

/// `beta(tau) = sum_{(m,k)} exp(-pi |m tau + k|^2 / Im tau)`, summed over
/// square shells until the last shell is negligible (at least `cutoff`).
pub fn beta_lattice_sum(shape: LatticeShape, cutoff: usize) -> BetaResult {
    let tau = shape.tau();
    let term = |m: i64, k: i64| {
        let z = tau * m as f64 + k as f64;
        (-PI * z.norm_sqr() / tau.im).exp()
    };
    let mut sum = term(0, 0);
    let mut shell = 1i64;
    loop {
        let mut s = 0.0;
        for m in -shell..=shell {
            for k in [-shell, shell] {
                s += term(m, k);
            }
        }
        for k in (-shell + 1)..shell {
            for m in [-shell, shell] {
                s += term(m, k);
            }
        }
        sum += s;
        if shell as usize >= cutoff && s < 1e-17 * sum {
            break;
        }
        shell += 1;
    }
    BetaResult { tau: shape, beta: sum, method: BetaMethod::LatticeSum, k: shell as usize, grid: 0 }
}

/// `beta` at any point of the upper half plane, by modular invariance.
pub fn beta_at(tau: C64) -> Result<f64> {
    let (shape, _) = normalize_tau(tau)?;
    Ok(beta_quadrature(shape)?.beta)
}

/// `kappa_c = (1/2 (1 - 1/beta))^{1/2}`.
pub fn kappa_c_from_beta(beta: f64) -> f64 {
    (0.5 * (1.0 - 1.0 / beta)).max(0.0).sqrt()
}

pub fn kappa_c(shape: LatticeShape) -> Result<f64> {
    Ok(kappa_c_from_beta(beta_quadrature(shape)?.beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Minimum,
    Maximum,
    Saddle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub tau: C64,
    pub beta: f64,
    pub kind: CriticalKind,
    pub gradient_norm: f64,
    pub hessian_eigenvalues: [f64; 2],
}

/// Step of the central differences on `beta`.
const FD_STEP: f64 = 1e-4;

fn central_gradient(f: &impl Fn(C64) -> Result<f64>, tau: C64, h: f64) -> Result<Vector2<f64>> {
    let g1 = (f(tau + h)? - f(tau - h)?) / (2.0 * h);
    let ih = C64::new(0.0, h);
    let g2 = (f(tau + ih)? - f(tau - ih)?) / (2.0 * h);
    Ok(Vector2::new(g1, g2))
}

/// Gradient of `beta` in `(Re tau, Im tau)`: central differences with one
/// Richardson halving.
pub fn beta_gradient(tau: C64) -> Result<Vector2<f64>> {
    let gh = central_gradient(&beta_at, tau, FD_STEP)?;
    let gh2 = central_gradient(&beta_at, tau, 0.5 * FD_STEP)?;
    Ok((gh2 * 4.0 - gh) / 3.0)
}

/// Hessian of `beta` by second differences of the Richardson gradient.
pub fn beta_hessian(tau: C64) -> Result<Matrix2<f64>> {
    let h = 1e-3;
    let gp1 = beta_gradient(tau + h)?;
    let gm1 = beta_gradient(tau - h)?;
    let gp2 = beta_gradient(tau + C64::new(0.0, h))?;
    let gm2 = beta_gradient(tau - C64::new(0.0, h))?;
    let c1 = (gp1 - gm1) / (2.0 * h);
    let c2 = (gp2 - gm2) / (2.0 * h);
    let off = 0.5 * (c1[1] + c2[0]);
    Ok(Matrix2::new(c1[0], off, off, c2[1]))
}

fn canonical(tau: C64) -> Result<C64> {
    Ok(normalize_tau(tau)?.0.tau())
}

/// Distance between two shapes modulo the boundary identifications of the
/// fundamental domain.
pub fn shape_distance(a: C64, b: C64) -> f64 {
    let (a, b) = match (canonical(a), canonical(b)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return f64::INFINITY,
    };
    let mut d = (a - b).norm();
    for shift in [-1.0, 1.0] {
        d = d.min((a + shift - b).norm());
    }
    // the arc is glued to itself by tau -> -1/tau
    d.min((-1.0 / a - b).norm())
}

fn classify(eig: [f64; 2]) -> CriticalKind {
    if eig[0] > 0.0 && eig[1] > 0.0 {
        CriticalKind::Minimum
    } else if eig[0] < 0.0 && eig[1] < 0.0 {
        CriticalKind::Maximum
    } else {
        CriticalKind::Saddle
    }
}

fn critical_point(tau: C64) -> Result<CriticalPoint> {
    let tau = canonical(tau)?;
    let g = beta_gradient(tau)?;
    let h = beta_hessian(tau)?;
    let eig = SymmetricEigen::new(h).eigenvalues;
    let mut e = [eig[0], eig[1]];
    e.sort_by(|a, b| a.total_cmp(b));
    Ok(CriticalPoint { tau, beta: beta_at(tau)?, kind: classify(e), gradient_norm: g.norm(), hessian_eigenvalues: e })
}

/// Newton iteration on `grad beta = 0`, mapping iterates back into the
/// fundamental domain.
fn newton_critical(start: C64, tol: f64) -> Result<Option<C64>> {
    let mut tau = canonical(start)?;
    for _ in 0..60 {
        let g = beta_gradient(tau)?;
        if g.norm() < tol {
            return Ok(Some(tau));
        }
        let h = beta_hessian(tau)?;
        let Some(inv) = h.try_inverse() else { return Ok(None) };
        let mut step = inv * g;
        let len = step.norm();
        if len > 0.1 {
            step *= 0.1 / len;
        }
        tau = canonical(tau - C64::new(step[0], step[1]))?;
        if tau.im > 4.0 {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Upper edge of the scanned part of the fundamental domain.
pub const SCAN_TAU_IM_MAX: f64 = 2.0;

/// Critical points of `beta` in the fundamental domain: a scan of
/// `|grad beta|` seeds Newton refinements, and the converged points are
/// deduplicated modulo the boundary identifications.
pub fn find_beta_critical_points(tolerance: f64) -> Result<Vec<CriticalPoint>> {
    let (n1, n2) = (13usize, 13usize);
    let mut pts = Vec::new();
    let mut grads = Vec::new();
    for i in 0..n1 {
        let t1 = -0.5 + i as f64 / (n1 - 1) as f64;
        let lo = (1.0 - t1 * t1).sqrt();
        for j in 0..n2 {
            let t2 = lo + (SCAN_TAU_IM_MAX - lo) * j as f64 / (n2 - 1) as f64;
            let tau = C64::new(t1, t2);
            pts.push(tau);
            grads.push(central_gradient(&beta_at, tau, 1e-4)?.norm());
        }
    }
    let idx = |i: usize, j: usize| i * n2 + j;
    let mut seeds = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            let g = grads[idx(i, j)];
            let mut is_min = true;
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1), (-1, -1), (1, 1), (-1, 1), (1, -1)] {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if a < 0 || b < 0 || a >= n1 as i64 || b >= n2 as i64 {
                    continue;
                }
                if grads[idx(a as usize, b as usize)] < g {
                    is_min = false;
                }
            }
            if is_min {
                seeds.push(pts[idx(i, j)]);
            }
        }
    }
    let mut found: Vec<CriticalPoint> = Vec::new();
    for s in seeds {
        if let Some(tau) = newton_critical(s, tolerance)? {
            if found.iter().all(|c| shape_distance(c.tau, tau) > 1e-6) {
                found.push(critical_point(tau)?);
            }
        }
    }
    found.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    Ok(found)
}

/// Descent on `beta` from `start` by BFGS with Armijo backtracking.
///
/// Iterates move freely in the upper half plane (`beta` is evaluated through
/// its modular invariance), so no chart changes interrupt the curvature
/// updates; the limit is mapped into the fundamental domain at the end.
pub fn descend_beta(start: C64, tol: f64) -> Result<C64> {
    let mut tau = start;
    let mut val = beta_at(tau)?;
    let mut g = beta_gradient(tau)?;
    let mut inv_h = Matrix2::identity();
    for _ in 0..500 {
        if g.norm() < tol {
            break;
        }
        let mut dir = -(inv_h * g);
        if g.dot(&dir) >= 0.0 {
            inv_h = Matrix2::identity();
            dir = -g;
        }
        let mut t = 1.0f64.min(0.2 / dir.norm());
        let slope = g.dot(&dir);
        // below rounding the values cannot rank candidates; trust the step
        let flat = (t * slope).abs() < 1e-13 * val.abs();
        let (cand, v) = loop {
            let cand = tau + C64::new(t * dir[0], t * dir[1]);
            let v = beta_at(cand)?;
            if flat || v <= val + 1e-4 * t * slope || t < 1e-14 {
                break (cand, v);
            }
            t *= 0.5;
        };
        let g_new = beta_gradient(cand)?;
        let sv = Vector2::new(cand.re - tau.re, cand.im - tau.im);
        let yv = g_new - g;
        let sy = sv.dot(&yv);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let i = Matrix2::identity();
            inv_h = (i - sv * yv.transpose() * rho) * inv_h * (i - yv * sv.transpose() * rho) + sv * sv.transpose() * rho;
        }
        tau = cand;
        val = v;
        g = g_new;
    }
    canonical(tau)
}

/// Random starts in the scanned fundamental domain, each descended.
pub fn multistart_minima(starts: usize, seed: u64, tol: f64) -> Result<Vec<(C64, C64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..starts)
        .map(|_| {
            let t1: f64 = rng.gen_range(-0.5..0.5);
            let lo = (1.0 - t1 * t1).sqrt();
            let t2 = rng.gen_range(lo..SCAN_TAU_IM_MAX);
            let start = C64::new(t1, t2);
            Ok((start, descend_beta(start, tol)?))
        })
        .collect()
}

fn landscape_denominator(kappa: f64, beta: f64) -> Result<f64> {
    let den = (2.0 * kappa * kappa - 1.0) * beta + 1.0;
    if den.abs() < 1e-12 {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok(den)
}

/// `E_b(tau) ~ kappa^2/2 + b^2 - (kappa^2 - b)^2 / ((2 kappa^2 - 1) beta + 1)`.
pub fn energy_landscape_asymptotic_beta(beta: f64, kappa: f64, b: f64) -> Result<f64> {
    let k2 = kappa * kappa;
    let den = landscape_denominator(kappa, beta)?;
    Ok(0.5 * k2 + b * b - (k2 - b) * (k2 - b) / den)
}

pub fn energy_landscape_asymptotic(shape: LatticeShape, kappa: f64, b: f64) -> Result<f64> {
    energy_landscape_asymptotic_beta(beta_quadrature(shape)?.beta, kappa, b)
}

/// `h0 ~ b + (kappa^2 - b) / ((2 kappa^2 - 1) beta + 1)`.
pub fn applied_field_beta(beta: f64, kappa: f64, b: f64) -> Result<f64> {
    let den = landscape_denominator(kappa, beta)?;
    Ok(b + (kappa * kappa - b) / den)
}

pub fn applied_field(shape: LatticeShape, kappa: f64, b: f64) -> Result<f64> {
    applied_field_beta(beta_quadrature(shape)?.beta, kappa, b)
}

/// Points of the fundamental domain with `Re tau >= 0` (the other half
/// follows by the reflection `tau -> -conj(tau)`), `n1 x n2` evenly spaced
/// in `Re tau` and in `Im tau` between the arc and `tau_im_max`.
pub fn fundamental_domain_grid(n1: usize, n2: usize, half: bool, tau_im_max: f64) -> Vec<C64> {
    let mut out = Vec::with_capacity(n1 * n2);
    let t1_lo = if half { 0.0 } else { -0.5 };
    for i in 0..n1 {
        let t1 = if n1 == 1 { t1_lo } else { t1_lo + (0.5 - t1_lo) * i as f64 / (n1 - 1) as f64 };
        let lo = (1.0 - t1 * t1).sqrt();
        for j in 0..n2 {
            let t2 = if n2 == 1 { lo } else { lo + (tau_im_max - lo) * j as f64 / (n2 - 1) as f64 };
            out.push(C64::new(t1, t2));
        }
    }
    out
}

/// One sample of the numerically computed energy landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSample {
    pub tau: C64,
    pub b: f64,
    pub energy: f64,
    pub s: f64,
    pub residual_psi: f64,
}

/// `E_b(tau)` from the bifurcating branch for every shape (normalized first)
/// and every field in `bs`, in shape-major order. Each shape builds its
/// Landau basis once and reuses it for all fields; shapes are spread over
/// `jobs` threads. Failures are kept per sample.
pub fn landscape_results(kappa: f64, bs: &[f64], taus: &[C64], opts: ReductionOptions, jobs: usize) -> Vec<Result<LandscapeSample>> {
    let per_shape = |tau: C64| -> Vec<Result<LandscapeSample>> {
        let setup = match normalize_tau(tau).and_then(|(shape, _)| ReductionSetup::new(kappa, shape, opts)) {
            Ok(s) => s,
            Err(e) => {
                let msg = e.to_string();
                return bs.iter().map(|_| Err(Error::InvalidShape(msg.clone()))).collect();
            }
        };
        bs.iter()
            .map(|&b| {
                let p = branch_by_field(&setup, b, 0.0)?;
                Ok(LandscapeSample { tau, b, energy: p.energy, s: p.s, residual_psi: p.residual_psi })
            })
            .collect()
    };
    let jobs = jobs.max(1).min(taus.len().max(1));
    let chunk = taus.len().div_ceil(jobs).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = taus
            .chunks(chunk)
            .map(|c| scope.spawn(move || c.iter().flat_map(|t| per_shape(*t)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("landscape worker panicked")).collect()
    })
}

/// [`landscape_results`] for a single field, failing on the first error.
pub fn energy_landscape_numeric(kappa: f64, b: f64, taus: &[C64], opts: ReductionOptions, jobs: usize) -> Result<Vec<LandscapeSample>> {
    landscape_results(kappa, &[b], taus, opts, jobs).into_iter().collect()
}

/// Minimizer of the numeric energy landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericMinimum {
    pub kappa: f64,
    pub b: f64,
    pub samples: Vec<LandscapeSample>,
    /// Grid point with the lowest energy.
    pub argmin: C64,
    /// Stationary point of a quadratic fit through a ring of shapes around
    /// `argmin`, in the disk coordinate centred there (stencil points outside
    /// the domain are normalized).
    pub refined: C64,
    pub refine_step: f64,
}

/// Grid search for the minimizer of `E_b` over `taus`, followed by a local
/// quadratic refinement.
pub fn minimize_eb_numeric(kappa: f64, b: f64, taus: &[C64], opts: ReductionOptions, jobs: usize) -> Result<NumericMinimum> {
    if taus.is_empty() {
        return Err(Error::InvalidParameter("empty shape grid".into()));
    }
    let samples = energy_landscape_numeric(kappa, b, taus, opts, jobs)?;
    refine_minimum(kappa, b, samples, opts, jobs)
}

/// Picks the lowest of `samples` (all at field `b`) and refines it; see
/// [`NumericMinimum::refined`].
pub fn refine_minimum(kappa: f64, b: f64, samples: Vec<LandscapeSample>, opts: ReductionOptions, jobs: usize) -> Result<NumericMinimum> {
    let best = *samples
        .iter()
        .min_by(|a, b| a.energy.total_cmp(&b.energy))
        .ok_or_else(|| Error::InvalidParameter("no landscape samples".into()))?;
    let center = best.tau;
    // disk coordinate w = (tau - c) / (tau - conj c) centred on the grid minimizer
    let to_tau = |w: C64| (center - w * center.conj()) / (1.0 - w);
    let h = 0.02;
    let offsets: Vec<C64> = std::iter::once(C64::new(0.0, 0.0))
        .chain((0..8).map(|k| C64::from_polar(h, PI * k as f64 / 4.0)))
        .collect();
    let stencil: Vec<C64> = offsets.iter().map(|w| to_tau(*w)).collect();
    let local = energy_landscape_numeric(kappa, b, &stencil, opts, jobs)?;
    // E = e0 + g.w + w^T H w / 2
    let a = nalgebra::DMatrix::from_fn(offsets.len(), 6, |i, j| {
        let d = offsets[i];
        [1.0, d.re, d.im, 0.5 * d.re * d.re, d.re * d.im, 0.5 * d.im * d.im][j]
    });
    let y = nalgebra::DVector::from_iterator(local.len(), local.iter().map(|p| p.energy - best.energy));
    let coef = a.svd(true, true).solve(&y, 1e-14).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let g = Vector2::new(coef[1], coef[2]);
    let hess = Matrix2::new(coef[3], coef[4], coef[4], coef[5]);
    let refined = match hess.try_inverse() {
        Some(inv) if hess.determinant() > 0.0 && hess[(0, 0)] > 0.0 => {
            let d = -inv * g;
            if d.norm() <= 2.0 * h {
                to_tau(C64::new(d[0], d[1]))
            } else {
                center
            }
        }
        _ => center,
    };
    Ok(NumericMinimum { kappa, b, samples, argmin: center, refined, refine_step: h })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_sum_square_is_separable() {
        let s: f64 = (-20..=20).map(|m: i32| (-PI * (m * m) as f64).exp()).sum();
        let b = beta_lattice_sum(LatticeShape::square(), 8);
        assert!((b.beta - s * s).abs() < 1e-14);
        let shifted = LatticeShape::unreduced(C64::new(1.0, 1.0));
        assert!((beta_lattice_sum(shifted, 8).beta - b.beta).abs() < 1e-13);
    }

    #[test]
    fn quadrature_matches_known_values() {
        let sq = beta_quadrature(LatticeShape::square()).unwrap();
        assert!((sq.beta - 1.180_340_599_016).abs() < 1e-10);
        let tri = beta_quadrature(LatticeShape::triangular()).unwrap();
        let oracle = beta_lattice_sum(LatticeShape::triangular(), 8).beta;
        assert!((tri.beta - oracle).abs() < 1e-12);
        assert!((tri.beta - 1.159_595_3).abs() < 1e-6);
        assert!((kappa_c(LatticeShape::square()).unwrap() - 0.276_393_664).abs() < 1e-8);
        assert!((kappa_c(LatticeShape::triangular()).unwrap() - 0.262_326_273).abs() < 1e-8);
        assert_eq!(kappa_c_from_beta(1.0), 0.0);
    }

    #[test]
    fn landscape_formulas() {
        let k = 2.0f64.sqrt();
        let tri = beta_quadrature(LatticeShape::triangular()).unwrap().beta;
        let sq = beta_quadrature(LatticeShape::square()).unwrap().beta;
        assert!((energy_landscape_asymptotic_beta(tri, k, 2.0).unwrap() - 5.0).abs() < 1e-14);
        assert!(energy_landscape_asymptotic_beta(tri, k, 1.9).unwrap() < energy_landscape_asymptotic_beta(sq, k, 1.9).unwrap());
        let h0 = applied_field_beta(tri, k, 1.9).unwrap();
        assert!((h0 - 1.922_327_48).abs() < 1e-8);
        // h0 = (1/2) dE/db
        let d = 1e-5;
        let de = (energy_landscape_asymptotic_beta(tri, k, 1.9 + d).unwrap()
            - energy_landscape_asymptotic_beta(tri, k, 1.9 - d).unwrap())
            / (2.0 * d);
        assert!((0.5 * de - h0).abs() < 1e-8);
        // the denominator vanishes exactly at kappa = kappa_c
        let kc = kappa_c_from_beta(tri);
        assert!(matches!(energy_landscape_asymptotic_beta(tri, kc, 0.05), Err(Error::DegenerateDenominator(_))));
    }

    #[test]
    fn distance_respects_identifications() {
        let rho = C64::new(0.5, 3f64.sqrt() / 2.0);
        assert!(shape_distance(rho, rho - 1.0) < 1e-12);
        assert!(shape_distance(C64::new(0.3, (1.0 - 0.09f64).sqrt()), C64::new(-0.3, (1.0 - 0.09f64).sqrt())) < 1e-12);
    }
}
