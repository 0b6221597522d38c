//! Rescaled Ginzburg-Landau functionals on a lattice cell.
//!
//! States are `(psi, alpha)` with total potential `a = A0 + alpha`,
//! `A0 = (b/2) J x`, and `alpha` periodic, mean-zero and divergence-free.
//! Everything here works on any cell; the normalized cell (field `n`) is the
//! one used by the bifurcation analysis, where
//!
//! `F(lambda, psi) = (L - lambda) psi + 2i alpha.D psi + |alpha|^2 psi + kappa^2 |psi|^2 psi`
//!
//! with `alpha = alpha(psi)` solving `(M + |psi|^2) alpha = Im(conj(psi) D psi)`
//! on divergence-free, mean-zero fields (`M = curl^* curl`).

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::landau::{covariant_samples_with, ladder_coeffs, Ladder, LandauBasis, QuasiPeriodicField};
use crate::lattice::Cell;
use crate::spectral::{mean, rms, SpectralGrid};
use crate::{Error, Result, C64};

/// Real periodic 2-vector field on the `N x N` logical grid of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicVectorField {
    pub cell: Cell,
    pub grid: usize,
    pub comp: [Vec<f64>; 2],
}

impl PeriodicVectorField {
    pub fn zeros(cell: Cell, grid: usize) -> Self {
        Self { cell, grid, comp: [vec![0.0; grid * grid], vec![0.0; grid * grid]] }
    }

    pub fn new(cell: Cell, grid: usize, comp: [Vec<f64>; 2]) -> Result<Self> {
        if comp[0].len() != grid * grid || comp[1].len() != grid * grid {
            return Err(Error::GridMismatch(format!("vector field components must have {} samples", grid * grid)));
        }
        Ok(Self { cell, grid, comp })
    }

    /// Projected copy: divergence-free and mean-zero.
    pub fn projected(&self, sg: &SpectralGrid) -> Self {
        Self { comp: sg.helmholtz_project(&self.comp), ..self.clone() }
    }

    pub fn mean(&self) -> [f64; 2] {
        [mean(&self.comp[0]), mean(&self.comp[1])]
    }

    pub fn curl(&self, sg: &SpectralGrid) -> Vec<f64> {
        sg.curl(&self.comp)
    }

    /// Largest spectral divergence.
    pub fn divergence_residual(&self, sg: &SpectralGrid) -> f64 {
        crate::spectral::max_abs(&sg.divergence(&self.comp))
    }

    /// `(<|v|^2>)^{1/2}`.
    pub fn norm(&self) -> f64 {
        (self.comp[0].iter().chain(&self.comp[1]).map(|v| v * v).sum::<f64>() / (self.grid * self.grid) as f64).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { comp: [self.comp[0].iter().map(|v| v * s).collect(), self.comp[1].iter().map(|v| v * s).collect()], ..self.clone() }
    }
}

/// Helmholtz projection onto divergence-free, mean-zero fields.
pub fn helmholtz_project(v: &PeriodicVectorField) -> PeriodicVectorField {
    let sg = SpectralGrid::new(v.cell, v.grid);
    v.projected(&sg)
}

/// Ginzburg-Landau parameters in the normalized variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GLParams {
    pub kappa: f64,
    pub n: u32,
    /// Spectral parameter `lambda = kappa^2 n / b`.
    pub lambda: f64,
}

impl GLParams {
    pub fn new(kappa: f64, n: u32, lambda: f64) -> Result<Self> {
        if !(kappa > 0.0) || n == 0 || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid parameters kappa={kappa}, n={n}, lambda={lambda}")));
        }
        Ok(Self { kappa, n, lambda })
    }

    /// Parameters at average field `b`.
    pub fn from_field(kappa: f64, n: u32, b: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::InvalidParameter(format!("field b must be positive, got {b}")));
        }
        Self::new(kappa, n, kappa * kappa * n as f64 / b)
    }

    pub fn b(&self) -> f64 {
        self.kappa * self.kappa * self.n as f64 / self.lambda
    }

    /// `kappa > 1/sqrt(2)`.
    pub fn is_type_ii(&self) -> bool {
        self.kappa > std::f64::consts::FRAC_1_SQRT_2
    }
}

/// A lattice state in the normalized variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GLState {
    pub psi: QuasiPeriodicField,
    pub alpha: PeriodicVectorField,
    pub params: GLParams,
}

impl GLState {
    /// `psi = 0`, `alpha = 0` on the cell of `template`.
    pub fn normal(template: &QuasiPeriodicField, params: GLParams) -> Self {
        let psi = template.scale(C64::new(0.0, 0.0));
        let alpha = PeriodicVectorField::zeros(template.cell, template.grid);
        Self { psi, alpha, params }
    }
}

/// Tolerances for the inner potential solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AlphaSolveOptions {
    fn default() -> Self {
        Self { tol: 1e-13, max_iter: 500 }
    }
}

/// Field strength of the constant part of the potential on a cell with `n`
/// flux quanta.
pub fn background_field(cell: &Cell, n: u32) -> f64 {
    2.0 * PI * n as f64 / cell.area()
}

/// Caches what repeated evaluations on one cell need: the spectral grid and,
/// optionally, a Landau basis for exact derivatives of coefficient fields.
#[derive(Debug, Clone)]
pub struct GLContext {
    pub sg: SpectralGrid,
    pub basis: Option<Arc<LandauBasis>>,
    pub alpha_opts: AlphaSolveOptions,
}

impl GLContext {
    pub fn new(cell: Cell, grid: usize) -> Self {
        Self { sg: SpectralGrid::new(cell, grid), basis: None, alpha_opts: AlphaSolveOptions::default() }
    }

    pub fn with_basis(basis: Arc<LandauBasis>) -> Self {
        Self { sg: SpectralGrid::new(basis.cell(), basis.grid()), basis: Some(basis), alpha_opts: AlphaSolveOptions::default() }
    }

    fn check(&self, psi: &QuasiPeriodicField) -> Result<()> {
        if psi.grid != self.sg.n || psi.cell != self.sg.cell {
            return Err(Error::GridMismatch("field and context cells differ".into()));
        }
        Ok(())
    }

    /// Interior samples of `(D1 psi, D2 psi)`; exact in coefficients when a
    /// basis is available and `psi` carries coefficients.
    pub fn covariant(&self, psi: &QuasiPeriodicField) -> Result<[Vec<C64>; 2]> {
        self.check(psi)?;
        if let (Some(c), Some(basis)) = (&psi.coeffs, &self.basis) {
            let lo = ladder_coeffs(psi.n, c, Ladder::Lower);
            let hi = ladder_coeffs(psi.n, c, Ladder::Raise);
            if hi.len() <= basis.coeff_len(basis.max_level()) && psi.cocycle == [0.0, 0.0] {
                let mut d1 = vec![C64::new(0.0, 0.0); hi.len()];
                let mut d2 = vec![C64::new(0.0, 0.0); hi.len()];
                for idx in 0..hi.len() {
                    let a = lo.get(idx).copied().unwrap_or_default();
                    d1[idx] = (a - hi[idx]) * 0.5;
                    d2[idx] = (a + hi[idx]) * C64::new(0.0, -0.5);
                }
                let f1 = interior(&basis.synthesize(&d1), psi.grid);
                let f2 = interior(&basis.synthesize(&d2), psi.grid);
                return Ok([f1, f2]);
            }
        }
        Ok(covariant_samples_with(&self.sg, psi.n, psi.cocycle, &psi.interior()))
    }

    /// `Im(conj(psi) D psi)` for the background potential only.
    pub fn source_current(&self, psi: &[C64], dpsi: &[Vec<C64>; 2]) -> [Vec<f64>; 2] {
        let f = |d: &Vec<C64>| psi.iter().zip(d).map(|(p, q)| (p.conj() * q).im).collect();
        [f(&dpsi[0]), f(&dpsi[1])]
    }

    /// Solves `P (M + |psi|^2) alpha = P Im(conj(psi) D psi)` for
    /// divergence-free, mean-zero `alpha` by conjugate gradients
    /// preconditioned with `M^{-1}` (`P` is the Helmholtz projection).
    pub fn solve_alpha(&self, psi: &QuasiPeriodicField) -> Result<PeriodicVectorField> {
        let dpsi = self.covariant(psi)?;
        let p = psi.interior();
        let rho: Vec<f64> = p.iter().map(|z| z.norm_sqr()).collect();
        let j0 = self.source_current(&p, &dpsi);
        let comp = self.solve_alpha_raw(&rho, &j0)?;
        PeriodicVectorField::new(self.sg.cell, self.sg.n, comp)
    }

    pub(crate) fn solve_alpha_raw(&self, rho: &[f64], j0: &[Vec<f64>; 2]) -> Result<[Vec<f64>; 2]> {
        let sg = &self.sg;
        let len = sg.len();
        let rhs = sg.helmholtz_project(j0);
        let rhs_norm = vnorm(&rhs);
        if rhs_norm == 0.0 {
            return Ok([vec![0.0; len], vec![0.0; len]]);
        }
        let apply = |v: &[Vec<f64>; 2]| -> [Vec<f64>; 2] {
            let mv = self.apply_m(v);
            let w = [
                v[0].iter().zip(rho).map(|(a, r)| a * r).collect::<Vec<_>>(),
                v[1].iter().zip(rho).map(|(a, r)| a * r).collect::<Vec<_>>(),
            ];
            let pw = sg.helmholtz_project(&w);
            [add(&mv[0], &pw[0]), add(&mv[1], &pw[1])]
        };
        let mut x = self.apply_m_inv(&rhs);
        let ax = apply(&x);
        let mut r = [sub(&rhs[0], &ax[0]), sub(&rhs[1], &ax[1])];
        let mut z = self.apply_m_inv(&r);
        let mut d = z.clone();
        let mut rz = vdot(&r, &z);
        let tol = self.alpha_opts.tol.max(1e-15 * rhs_norm);
        for _ in 0..self.alpha_opts.max_iter {
            if vnorm(&r) < tol {
                return Ok(x);
            }
            let ad = apply(&d);
            let step = rz / vdot(&d, &ad);
            for c in 0..2 {
                for i in 0..len {
                    x[c][i] += step * d[c][i];
                    r[c][i] -= step * ad[c][i];
                }
            }
            z = self.apply_m_inv(&r);
            let rz_new = vdot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for c in 0..2 {
                for i in 0..len {
                    d[c][i] = z[c][i] + beta * d[c][i];
                }
            }
        }
        let res = vnorm(&r);
        if res < 1e3 * tol {
            return Ok(x);
        }
        Err(Error::NoConvergence { what: "potential solve", iterations: self.alpha_opts.max_iter, residual: res })
    }

    /// `M v = -Delta v` on divergence-free fields.
    fn apply_m(&self, v: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let sg = &self.sg;
        let f = |c: &Vec<f64>| {
            let mut s = sg.spectrum(c);
            for (k, z) in s.iter_mut().enumerate() {
                *z *= sg.g2[k];
            }
            sg.real_field(s)
        };
        [f(&v[0]), f(&v[1])]
    }

    fn apply_m_inv(&self, v: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let sg = &self.sg;
        let f = |c: &Vec<f64>| {
            let mut s = sg.spectrum(c);
            for (k, z) in s.iter_mut().enumerate() {
                *z = if sg.g2[k] == 0.0 { C64::new(0.0, 0.0) } else { *z / sg.g2[k] };
            }
            sg.real_field(s)
        };
        [f(&v[0]), f(&v[1])]
    }

    /// Pointwise `2i alpha.D psi + |alpha|^2 psi + kappa^2 |psi|^2 psi`.
    pub fn nonlinear(&self, kappa: f64, psi: &[C64], dpsi: &[Vec<C64>; 2], alpha: &PeriodicVectorField) -> Vec<C64> {
        let k2 = kappa * kappa;
        let i2 = C64::new(0.0, 2.0);
        (0..psi.len())
            .map(|i| {
                let (a1, a2) = (alpha.comp[0][i], alpha.comp[1][i]);
                i2 * (dpsi[0][i] * a1 + dpsi[1][i] * a2) + psi[i] * (a1 * a1 + a2 * a2 + k2 * psi[i].norm_sqr())
            })
            .collect()
    }

    /// Interior samples of `L psi = -(D1 D1 + D2 D2) psi`.
    pub fn landau_samples(&self, psi: &QuasiPeriodicField) -> Result<Vec<C64>> {
        self.check(psi)?;
        if let (Some(c), Some(basis)) = (&psi.coeffs, &self.basis) {
            if psi.cocycle == [0.0, 0.0] && c.len() <= basis.coeff_len(basis.max_level()) {
                let nn = psi.n as usize;
                let nf = psi.n as f64;
                let lc: Vec<C64> = c.iter().enumerate().map(|(idx, d)| *d * ((2 * (idx / nn) + 1) as f64 * nf)).collect();
                return Ok(interior(&basis.synthesize(&lc), psi.grid));
            }
        }
        let [d1, d2] = covariant_samples_with(&self.sg, psi.n, psi.cocycle, &psi.interior());
        let g1 = covariant_samples_with(&self.sg, psi.n, psi.cocycle, &d1);
        let g2 = covariant_samples_with(&self.sg, psi.n, psi.cocycle, &d2);
        Ok(g1[0].iter().zip(&g2[1]).map(|(a, b)| -(*a + *b)).collect())
    }

    /// `F(lambda, psi)` sampled on the grid, together with `alpha(psi)`.
    pub fn map_f(&self, kappa: f64, lambda: f64, psi: &QuasiPeriodicField) -> Result<(QuasiPeriodicField, PeriodicVectorField)> {
        let alpha = self.solve_alpha(psi)?;
        let f = self.psi_residual(kappa, lambda, psi, &alpha)?;
        Ok((f, alpha))
    }

    /// `(L - lambda) psi + N(psi, alpha)` for a given `alpha`.
    pub fn psi_residual(
        &self,
        kappa: f64,
        lambda: f64,
        psi: &QuasiPeriodicField,
        alpha: &PeriodicVectorField,
    ) -> Result<QuasiPeriodicField> {
        let p = psi.interior();
        let dpsi = self.covariant(psi)?;
        let lp = self.landau_samples(psi)?;
        let nl = self.nonlinear(kappa, &p, &dpsi, alpha);
        let out: Vec<C64> = (0..p.len()).map(|i| lp[i] - p[i] * lambda + nl[i]).collect();
        Ok(psi.with_interior(out))
    }

    /// Unprojected potential residual `(M + |psi|^2) alpha - Im(conj(psi) D psi)`.
    pub fn alpha_residual(&self, psi: &QuasiPeriodicField, alpha: &PeriodicVectorField) -> Result<[Vec<f64>; 2]> {
        let p = psi.interior();
        let dpsi = self.covariant(psi)?;
        let j0 = self.source_current(&p, &dpsi);
        // M = curl^* curl
        let curl = self.sg.curl(&alpha.comp);
        let ma = self.sg.curl_star(&curl);
        let out = |c: usize| (0..p.len()).map(|i| ma[c][i] + p[i].norm_sqr() * alpha.comp[c][i] - j0[c][i]).collect();
        Ok([out(0), out(1)])
    }

    /// Rescaled energy
    /// `(kappa^4/lambda^2) <|D_a psi|^2 + (b + curl alpha)^2 + (kappa^2/2)(|psi|^2 - lambda/kappa^2)^2>`
    /// (`b = n` on the normalized cell).
    pub fn energy(&self, state: &GLState) -> Result<f64> {
        let GLParams { kappa, n, lambda } = state.params;
        let psi = &state.psi;
        let p = psi.interior();
        let dpsi = self.covariant(psi)?;
        let b = background_field(&psi.cell, n);
        let curl = state.alpha.curl(&self.sg);
        let k2 = kappa * kappa;
        let i = C64::new(0.0, 1.0);
        let mut acc = 0.0;
        for idx in 0..p.len() {
            let g1 = dpsi[0][idx] - i * state.alpha.comp[0][idx] * p[idx];
            let g2 = dpsi[1][idx] - i * state.alpha.comp[1][idx] * p[idx];
            let field = b + curl[idx];
            let pot = p[idx].norm_sqr() - lambda / k2;
            acc += g1.norm_sqr() + g2.norm_sqr() + field * field + 0.5 * k2 * pot * pot;
        }
        Ok(k2 * k2 / (lambda * lambda) * acc / p.len() as f64)
    }

    /// `J = Im(conj(psi) D_a psi) = Im(conj(psi) D psi) - alpha |psi|^2`.
    pub fn supercurrent(&self, state: &GLState) -> Result<[Vec<f64>; 2]> {
        let p = state.psi.interior();
        let dpsi = self.covariant(&state.psi)?;
        let j0 = self.source_current(&p, &dpsi);
        let out = |c: usize| (0..p.len()).map(|i| j0[c][i] - state.alpha.comp[c][i] * p[i].norm_sqr()).collect();
        Ok([out(0), out(1)])
    }
}

pub(crate) fn interior(closed: &[C64], grid: usize) -> Vec<C64> {
    let side = grid + 1;
    let mut out = Vec::with_capacity(grid * grid);
    for j2 in 0..grid {
        out.extend_from_slice(&closed[j2 * side..j2 * side + grid]);
    }
    out
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn vdot(a: &[Vec<f64>; 2], b: &[Vec<f64>; 2]) -> f64 {
    let len = a[0].len() as f64;
    (a[0].iter().zip(&b[0]).map(|(x, y)| x * y).sum::<f64>() + a[1].iter().zip(&b[1]).map(|(x, y)| x * y).sum::<f64>()) / len
}

fn vnorm(a: &[Vec<f64>; 2]) -> f64 {
    vdot(a, a).sqrt()
}

/// `alpha(psi)` with a fresh context.
pub fn solve_alpha(psi: &QuasiPeriodicField) -> Result<PeriodicVectorField> {
    GLContext::new(psi.cell, psi.grid).solve_alpha(psi)
}

/// `F(lambda, psi)` with a fresh context.
pub fn map_f(kappa: f64, lambda: f64, psi: &QuasiPeriodicField) -> Result<QuasiPeriodicField> {
    GLContext::new(psi.cell, psi.grid).map_f(kappa, lambda, psi).map(|(f, _)| f)
}

pub fn energy(state: &GLState) -> Result<f64> {
    GLContext::new(state.psi.cell, state.psi.grid).energy(state)
}

/// Residuals of the two equations: `(psi-equation samples, potential equation)`.
pub fn residuals(state: &GLState) -> Result<(QuasiPeriodicField, [Vec<f64>; 2])> {
    let ctx = GLContext::new(state.psi.cell, state.psi.grid);
    let r1 = ctx.psi_residual(state.params.kappa, state.params.lambda, &state.psi, &state.alpha)?;
    let r2 = ctx.alpha_residual(&state.psi, &state.alpha)?;
    Ok((r1, r2))
}

pub fn supercurrent(state: &GLState) -> Result<[Vec<f64>; 2]> {
    GLContext::new(state.psi.cell, state.psi.grid).supercurrent(state)
}

/// Flux `int curl a` of `a = A0 + alpha` over the cell.
pub fn flux(cell: &Cell, n: u32, alpha: &PeriodicVectorField) -> f64 {
    let sg = SpectralGrid::new(*cell, alpha.grid);
    cell.area() * (background_field(cell, n) + mean(&alpha.curl(&sg)))
}

/// Root-mean-square of a residual pair.
pub fn residual_norm(r: &[Vec<f64>; 2]) -> f64 {
    (rms(&r[0]).powi(2) + rms(&r[1]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landau::LandauBasis;
    use crate::lattice::LatticeShape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: u32, grid: usize) -> (Arc<LandauBasis>, GLContext) {
        let basis = Arc::new(LandauBasis::new(n, LatticeShape::triangular(), grid, 9).unwrap());
        let ctx = GLContext::with_basis(basis.clone());
        (basis, ctx)
    }

    fn random_coeffs(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<C64> {
        (0..len).map(|k| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale / (1.0 + k as f64)).collect()
    }

    #[test]
    fn normal_state_energy() {
        let (basis, ctx) = setup(1, 16);
        let psi = basis.field(vec![C64::new(0.0, 0.0)]).unwrap();
        let state = GLState::normal(&psi, GLParams::new(1.0, 1, 1.0).unwrap());
        assert!((ctx.energy(&state).unwrap() - 1.5).abs() < 1e-14);
        let state = GLState::normal(&psi, GLParams::new(1.3, 1, 0.8).unwrap());
        let k4 = 1.3f64.powi(4);
        assert!((ctx.energy(&state).unwrap() - (0.5 * 1.69 + k4 / 0.64)).abs() < 1e-13);
    }

    #[test]
    fn m_is_minus_laplacian_on_projected_fields() {
        let (_, ctx) = setup(1, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = [0, 1].map(|_| (0..1024).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());
        let v = ctx.sg.helmholtz_project(&v);
        let cc = ctx.sg.curl_star(&ctx.sg.curl(&v));
        for c in 0..2 {
            let lap = ctx.sg.laplacian(&v[c]);
            for i in 0..1024 {
                assert!((cc[c][i] + lap[i]).abs() < 1e-10 * (1.0 + lap[i].abs()));
            }
        }
    }

    #[test]
    fn alpha_leading_order() {
        let (basis, ctx) = setup(1, 48);
        let zero = basis.field(vec![C64::new(0.0, 0.0)]).unwrap();
        assert_eq!(ctx.solve_alpha(&zero).unwrap().norm(), 0.0);
        let mut errs = Vec::new();
        for eps in [0.1, 0.05] {
            let psi = basis.field(vec![C64::new(eps, 0.0)]).unwrap();
            let alpha = ctx.solve_alpha(&psi).unwrap();
            assert!(alpha.divergence_residual(&ctx.sg) < 1e-12);
            let curl = alpha.curl(&ctx.sg);
            assert!(mean(&curl).abs() < 1e-14);
            let p = psi.interior();
            let err = curl
                .iter()
                .zip(&p)
                .map(|(c, z)| (c - 0.5 * (eps * eps - z.norm_sqr())).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        // O(eps^4)
        let ratio = errs[0] / errs[1];
        assert!(ratio > 14.0 && ratio < 18.0, "{errs:?}");
    }

    #[test]
    fn map_f_properties() {
        let (basis, ctx) = setup(1, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = basis.field(random_coeffs(&mut rng, 6, 0.3)).unwrap();
        let zero = basis.field(vec![C64::new(0.0, 0.0)]).unwrap();
        let (f0, _) = ctx.map_f(1.2, 1.1, &zero).unwrap();
        assert_eq!(f0.norm(), 0.0);
        let (f, alpha) = ctx.map_f(1.2, 1.1, &psi).unwrap();
        assert!(psi.inner(&f).im.abs() < 1e-12);
        let rot = C64::from_polar(1.0, 0.7);
        let (fr, alpha_r) = ctx.map_f(1.2, 1.1, &psi.scale(rot)).unwrap();
        let diff = fr.axpy(-rot, &f).unwrap();
        assert!(diff.norm() < 1e-12);
        let da = alpha_r.comp[0].iter().zip(&alpha.comp[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(da < 1e-13);
        // the projected potential equation holds
        let r = ctx.alpha_residual(&psi, &alpha).unwrap();
        let pr = ctx.sg.helmholtz_project(&r);
        assert!(residual_norm(&pr) < 1e-11);
    }

    #[test]
    fn flux_is_quantized() {
        for n in [1u32, 3] {
            let (basis, ctx) = setup(n, 32);
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let psi = basis.field(random_coeffs(&mut rng, 2 * n as usize, 0.5)).unwrap();
            let alpha = ctx.solve_alpha(&psi).unwrap();
            let phi = flux(&basis.cell(), n, &alpha);
            assert!((phi - 2.0 * PI * n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_properties() {
        let (_, ctx) = setup(1, 16);
        let cell = ctx.sg.cell;
        let gv = cell.wavevector(1.0, 2.0);
        let chi: Vec<f64> = (0..256)
            .map(|k| {
                let x = cell.point(ctx.sg.y(k % 16), ctx.sg.y(k / 16));
                (gv[0] * x[0] + gv[1] * x[1]).sin()
            })
            .collect();
        let grad = PeriodicVectorField::new(cell, 16, ctx.sg.gradient(&chi)).unwrap();
        assert!(grad.projected(&ctx.sg).norm() < 1e-13);
        let v = PeriodicVectorField::new(cell, 16, ctx.sg.curl_star(&chi)).unwrap();
        let pv = v.projected(&ctx.sg);
        assert!(pv.comp[0].iter().zip(&v.comp[0]).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
