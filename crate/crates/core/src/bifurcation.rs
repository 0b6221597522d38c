//! Lyapunov-Schmidt reduction for the `n = 1` bifurcation from the normal
//! state at `lambda = 1`.
//!
//! Writing `psi = c psi0 + w` with `w` orthogonal to the lowest Landau level,
//! the complementary equation `Q F(lambda, psi) = 0` is solved in the Landau
//! basis, where `L` is diagonal:
//!
//! `w_k = -<phi_k, N(psi)> / ((2k + 1) - lambda)`, `k >= 1`,
//!
//! iterated to a fixed point with `alpha(psi)` recomputed every sweep
//! (`N` is the nonlinear part of `F`). What is left is the scalar equation
//! `gamma_1(lambda, s) = s^{-1} <psi0, F(lambda, s psi0 + w)> = 0`.
//!
//! Inner products are cell averages and `<|psi0|^2> = 1`, so
//! `d gamma_1 / d lambda (1, 0) = -1` and the predicted slope of
//! `lambda_s` in `s^2` is `(kappa^2 - 1/2) beta + 1/2`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::glcore::{flux, residual_norm, GLContext, GLParams, GLState, PeriodicVectorField};
use crate::landau::{LandauBasis, QuasiPeriodicField};
use crate::lattice::LatticeShape;
use crate::spectral::{max_abs, rms_c};
use crate::{Error, Result, C64};

/// Largest amplitude inside the trusted neighbourhood; points beyond it are
/// still computed but labelled as extrapolated.
pub const S_MAX: f64 = 0.3;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Discretization and solver controls for the reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionOptions {
    pub grid: usize,
    /// Highest Landau level kept in `w`.
    pub levels: usize,
    /// Fixed-point stopping threshold on the coefficient update, relative to `|s|`.
    pub w_tol: f64,
    pub max_sweeps: usize,
    /// Absolute tolerance of the scalar root solves.
    pub root_tol: f64,
    pub max_root_iter: usize,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self { grid: 64, levels: 48, w_tol: 1e-14, max_sweeps: 400, root_tol: 1e-14, max_root_iter: 60 }
    }
}

impl ReductionOptions {
    pub fn with_grid(grid: usize) -> Self {
        Self { grid, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.grid < 8 || self.levels == 0 {
            return Err(Error::InvalidParameter(format!("need grid >= 8 and levels >= 1, got {} and {}", self.grid, self.levels)));
        }
        if !(self.w_tol > 0.0) || !(self.root_tol > 0.0) || self.max_sweeps == 0 || self.max_root_iter == 0 {
            return Err(Error::InvalidParameter("tolerances and iteration budgets must be positive".into()));
        }
        Ok(())
    }
}

/// Solution of the complementary equation at fixed `(lambda, c)`.
#[derive(Debug, Clone)]
pub struct WSolution {
    /// Landau coefficients of `w` (entry 0 is always zero).
    pub w: Vec<C64>,
    /// `c psi0 + w`.
    pub psi: QuasiPeriodicField,
    pub alpha: PeriodicVectorField,
    /// `<psi0, F(lambda, psi)>`.
    pub gamma: C64,
    pub sweeps: usize,
    /// Ratio of the last two update norms.
    pub contraction: f64,
}

/// Everything the reduction needs for one `(kappa, tau)`: the basis, the
/// rank-one projection onto `psi0` and the diagonal resolvent on its
/// complement.
#[derive(Debug, Clone)]
pub struct ReductionSetup {
    kappa: f64,
    basis: Arc<LandauBasis>,
    ctx: GLContext,
    psi0: QuasiPeriodicField,
    beta: f64,
    opts: ReductionOptions,
}

impl ReductionSetup {
    pub fn new(kappa: f64, shape: LatticeShape, opts: ReductionOptions) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
        }
        opts.validate()?;
        // one spare level so that D psi stays inside the basis
        let basis = Arc::new(LandauBasis::new(1, shape, opts.grid, opts.levels + 1)?);
        let ctx = GLContext::with_basis(basis.clone());
        let psi0 = basis.field(vec![C64::new(1.0, 0.0)])?;
        let rho: Vec<f64> = psi0.interior().iter().map(|z| z.norm_sqr()).collect();
        let m2 = rho.iter().sum::<f64>() / rho.len() as f64;
        let m4 = rho.iter().map(|r| r * r).sum::<f64>() / rho.len() as f64;
        Ok(Self { kappa, basis, ctx, psi0, beta: m4 / (m2 * m2), opts })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn shape(&self) -> LatticeShape {
        self.basis.shape()
    }

    pub fn basis(&self) -> &Arc<LandauBasis> {
        &self.basis
    }

    pub fn context(&self) -> &GLContext {
        &self.ctx
    }

    pub fn options(&self) -> &ReductionOptions {
        &self.opts
    }

    /// Normalized null vector, `<|psi0|^2> = 1`.
    pub fn psi0(&self) -> &QuasiPeriodicField {
        &self.psi0
    }

    /// `<|psi0|^4> / <|psi0|^2>^2` measured on the grid.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Predicted `g'_lambda(0) = (kappa^2 - 1/2) beta + 1/2`.
    pub fn slope_prediction(&self) -> f64 {
        (self.kappa * self.kappa - 0.5) * self.beta + 0.5
    }

    pub fn params(&self, lambda: f64) -> Result<GLParams> {
        GLParams::new(self.kappa, 1, lambda)
    }

    fn coefficients(&self, interior: &[C64]) -> Vec<C64> {
        self.basis.analyze_interior(interior, self.opts.levels)
    }

    /// `P f = <psi0, f> psi0`.
    pub fn project_p(&self, f: &QuasiPeriodicField) -> Result<QuasiPeriodicField> {
        let c0 = self.psi0.inner(f);
        self.basis.field(vec![c0])
    }

    /// `Q f = f - P f`.
    pub fn project_q(&self, f: &QuasiPeriodicField) -> Result<QuasiPeriodicField> {
        let p = self.project_p(f)?;
        let mut q = f.axpy(C64::new(-1.0, 0.0), &p)?;
        q.coeffs = f.coeffs.as_ref().map(|c| {
            let mut c = c.clone();
            c[0] = ZERO;
            c
        });
        Ok(q)
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
        }
        for k in 1..=self.opts.levels {
            if ((2 * k + 1) as f64 - lambda).abs() < 1e-8 {
                return Err(Error::SpectralCollision { lambda, level: k });
            }
        }
        Ok(())
    }

    fn apply_resolvent(&self, lambda: f64, c: &mut [C64]) {
        c[0] = ZERO;
        for (k, z) in c.iter_mut().enumerate().skip(1) {
            *z /= (2 * k + 1) as f64 - lambda;
        }
    }

    /// `(L - lambda)^{-1} Q f` on the retained levels.
    pub fn resolvent(&self, lambda: f64, f: &QuasiPeriodicField) -> Result<QuasiPeriodicField> {
        self.check_lambda(lambda)?;
        let mut c = self.coefficients(&f.interior());
        self.apply_resolvent(lambda, &mut c);
        self.basis.field(c)
    }

    fn field_from(&self, amp: C64, w: &[C64]) -> Result<QuasiPeriodicField> {
        let mut c = w.to_vec();
        c[0] = amp;
        self.basis.field(c)
    }

    /// Samples of `N(psi)` and `alpha(psi)`.
    fn nonlinear(&self, psi: &QuasiPeriodicField) -> Result<(Vec<C64>, PeriodicVectorField)> {
        let alpha = self.ctx.solve_alpha(psi)?;
        let dpsi = self.ctx.covariant(psi)?;
        let nl = self.ctx.nonlinear(self.kappa, &psi.interior(), &dpsi, &alpha);
        Ok((nl, alpha))
    }

    /// Solves `Q F(lambda, c psi0 + w) = 0` for `w` in the span of levels
    /// `1..=levels`, starting from `guess` when given.
    pub fn solve_w(&self, lambda: f64, amp: C64, guess: Option<&[C64]>) -> Result<WSolution> {
        self.check_lambda(lambda)?;
        let len = self.opts.levels + 1;
        let mut w = vec![ZERO; len];
        if let Some(g) = guess {
            for (d, s) in w.iter_mut().zip(g).skip(1) {
                *d = *s;
            }
        }
        if amp == ZERO {
            let psi = self.field_from(ZERO, &vec![ZERO; len])?;
            let alpha = PeriodicVectorField::zeros(psi.cell, psi.grid);
            return Ok(WSolution { w: vec![ZERO; len], psi, alpha, gamma: ZERO, sweeps: 0, contraction: 0.0 });
        }
        let scale = amp.norm();
        let tol = self.opts.w_tol * scale;
        let mut prev = f64::INFINITY;
        let mut contraction = 0.0;
        let mut damping = 1.0;
        let mut growth = 0;
        for sweep in 1..=self.opts.max_sweeps {
            let psi = self.field_from(amp, &w)?;
            let (nl, alpha) = self.nonlinear(&psi)?;
            let mut c = self.coefficients(&nl);
            let n0 = c[0];
            for z in c.iter_mut() {
                *z = -*z;
            }
            self.apply_resolvent(lambda, &mut c);
            let delta = c.iter().zip(&w).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            if !delta.is_finite() {
                return Err(Error::NoConvergence { what: "complementary equation", iterations: sweep, residual: delta });
            }
            // stagnation at rounding level counts as converged
            let stalled = delta >= prev && delta < 1e-12 * scale;
            if delta <= tol || stalled {
                let gamma = amp * (1.0 - lambda) + n0;
                return Ok(WSolution { w, psi, alpha, gamma, sweeps: sweep, contraction });
            }
            contraction = delta / prev;
            if delta > prev {
                growth += 1;
                damping = 0.5;
                if growth > 20 {
                    return Err(Error::NoConvergence { what: "complementary equation", iterations: sweep, residual: delta });
                }
            }
            prev = delta;
            for (a, b) in w.iter_mut().zip(&c) {
                *a += damping * (b - *a);
            }
        }
        Err(Error::NoConvergence { what: "complementary equation", iterations: self.opts.max_sweeps, residual: prev })
    }

    /// `gamma(lambda, c) = <psi0, F(lambda, c psi0 + w(lambda, c psi0))>`.
    pub fn gamma(&self, lambda: f64, amp: C64) -> Result<C64> {
        Ok(self.solve_w(lambda, amp, None)?.gamma)
    }

    /// `gamma_1(lambda, s) = gamma(lambda, s) / s`, with the limit `1 - lambda`
    /// at `s = 0`. Even in `s`.
    pub fn gamma1(&self, lambda: f64, s: f64) -> Result<f64> {
        if s == 0.0 {
            self.check_lambda(lambda)?;
            return Ok(1.0 - lambda);
        }
        Ok(self.gamma(lambda, C64::new(s, 0.0))?.re / s)
    }

    /// `e_lambda(c psi0) = E_lambda(c psi0 + w(lambda, c psi0))`.
    pub fn effective_energy(&self, lambda: f64, amp: C64) -> Result<f64> {
        let sol = self.solve_w(lambda, amp, None)?;
        let state = GLState { psi: sol.psi, alpha: sol.alpha, params: self.params(lambda)? };
        self.ctx.energy(&state)
    }

    /// Solves `gamma_1(., s) = 0` by a safeguarded secant iteration started at
    /// `lambda_guess`; the root must stay within `1 +- width s^2`.
    fn solve_lambda(&self, s: f64, phase: f64, lambda_guess: f64, guess: Option<&[C64]>) -> Result<(f64, WSolution)> {
        let rot = C64::from_polar(1.0, phase);
        let amp = rot * s;
        let width = (5.0f64).max(2.0 * self.slope_prediction().abs() + 1.0) * s * s;
        let (lo, hi) = (1.0 - width, 1.0 + width);
        let mut warm = guess.map(|g| g.to_vec());
        let mut eval = |lambda: f64| -> Result<(f64, WSolution)> {
            let sol = self.solve_w(lambda, amp, warm.as_deref())?;
            warm = Some(sol.w.clone());
            Ok(((sol.gamma / rot).re / s, sol))
        };
        let mut l0 = lambda_guess.clamp(lo, hi);
        let (mut g0, _) = eval(l0)?;
        // gamma_1 has slope -1 + O(s^2) in lambda
        let mut l1 = l0 + g0;
        for _ in 0..self.opts.max_root_iter {
            if !(lo..=hi).contains(&l1) {
                return Err(Error::NotBracketed(format!("lambda at s = {s}: iterate {l1} left [{lo}, {hi}]")));
            }
            let (g1, sol) = eval(l1)?;
            if g1 == 0.0 || (l1 - l0).abs() < self.opts.root_tol {
                return Ok((l1, sol));
            }
            let next = if g1 == g0 { l1 + g1 } else { l1 - g1 * (l1 - l0) / (g1 - g0) };
            l0 = l1;
            g0 = g1;
            l1 = next;
        }
        Err(Error::NoConvergence { what: "lambda root", iterations: self.opts.max_root_iter, residual: g0.abs() })
    }

    /// Diagnostics of a solved point.
    pub fn branch_point(&self, s: f64, lambda: f64, sol: WSolution) -> Result<BranchPoint> {
        let params = self.params(lambda)?;
        let state = GLState { psi: sol.psi, alpha: sol.alpha, params };
        let f = self.ctx.psi_residual(self.kappa, lambda, &state.psi, &state.alpha)?;
        let psi_norm = rms_c(&state.psi.interior());
        let residual_psi = if psi_norm > 0.0 { rms_c(&f.interior()) / psi_norm } else { rms_c(&f.interior()) };
        let residual_alpha = residual_norm(&self.ctx.alpha_residual(&state.psi, &state.alpha)?);
        let curl = state.alpha.curl(&self.ctx.sg);
        let b0 = crate::glcore::background_field(&state.psi.cell, 1);
        let max_curl_a = curl.iter().map(|c| b0 + c).fold(f64::NEG_INFINITY, f64::max);
        let min_abs_psi = state.psi.interior().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let energy = self.ctx.energy(&state)?;
        let w_norm = (sol.w.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
        Ok(BranchPoint {
            s,
            lambda,
            b: params.b(),
            energy,
            residual_psi,
            residual_alpha,
            flux: flux(&state.psi.cell, 1, &state.alpha),
            max_curl_a,
            min_abs_psi,
            w_norm,
            extrapolated: s > S_MAX,
            state,
        })
    }

    fn normal_point(&self) -> Result<BranchPoint> {
        let sol = self.solve_w(1.0, ZERO, None)?;
        self.branch_point(0.0, 1.0, sol)
    }
}

/// One solved point `(lambda_s, psi_s, alpha_s)` of the branch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchPoint {
    pub s: f64,
    pub lambda: f64,
    /// `kappa^2 / lambda`.
    pub b: f64,
    pub energy: f64,
    /// `||F(lambda, psi)|| / ||psi||`.
    pub residual_psi: f64,
    pub residual_alpha: f64,
    pub flux: f64,
    pub max_curl_a: f64,
    pub min_abs_psi: f64,
    pub w_norm: f64,
    pub extrapolated: bool,
    pub state: GLState,
}

/// A branch sampled on an `s`-grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub kappa: f64,
    pub shape: LatticeShape,
    pub grid: usize,
    pub levels: usize,
    pub phase: f64,
    pub beta: f64,
    pub points: Vec<BranchPoint>,
}

impl Branch {
    /// Whether the branch lies on `b <= kappa^2` (`true`) or `b >= kappa^2`.
    pub fn below_kappa2(&self) -> Option<bool> {
        let k2 = self.kappa * self.kappa;
        self.points.iter().find(|p| p.s > 0.0).map(|p| p.b <= k2)
    }
}

/// Solves the branch on `s_grid` (non-negative amplitudes), with the
/// amplitude rotated by `exp(i phase)`. Points are warm-started in order.
pub fn solve_branch(setup: &ReductionSetup, s_grid: &[f64], phase: f64) -> Result<Branch> {
    match solve_branch_partial(setup, s_grid, phase)? {
        (branch, None) => Ok(branch),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`solve_branch`] but keeps the points converged before a failure.
/// Only invalid input is reported through the outer `Result`.
pub fn solve_branch_partial(setup: &ReductionSetup, s_grid: &[f64], phase: f64) -> Result<(Branch, Option<Error>)> {
    if s_grid.is_empty() || s_grid.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParameter("s-grid must be non-empty and non-negative".into()));
    }
    let mut points = Vec::with_capacity(s_grid.len());
    let failure = extend_branch(setup, s_grid, phase, &mut points).err();
    let branch = Branch {
        kappa: setup.kappa,
        shape: setup.shape(),
        grid: setup.opts.grid,
        levels: setup.opts.levels,
        phase,
        beta: setup.beta,
        points,
    };
    Ok((branch, failure))
}

fn extend_branch(setup: &ReductionSetup, s_grid: &[f64], phase: f64, points: &mut Vec<BranchPoint>) -> Result<()> {
    let c = setup.slope_prediction();
    let mut last: Option<(f64, f64, Vec<C64>)> = None;
    for &s in s_grid {
        if s == 0.0 {
            points.push(setup.normal_point()?);
            continue;
        }
        let (guess_lambda, guess_w) = match &last {
            Some((sp, lp, w)) => {
                let slope = (lp - 1.0) / (sp * sp);
                let ratio = (s / sp).powi(3);
                (1.0 + slope * s * s, Some(w.iter().map(|z| z * ratio).collect::<Vec<_>>()))
            }
            None => (1.0 + c * s * s, None),
        };
        let (lambda, sol) = setup.solve_lambda(s, phase, guess_lambda, guess_w.as_deref()).map_err(|e| match e {
            Error::NotBracketed(msg) => Error::NotBracketed(match &last {
                Some((sp, _, _)) => format!("{msg}; last converged s = {sp}"),
                None => msg,
            }),
            other => other,
        })?;
        last = Some((s, lambda, sol.w.clone()));
        points.push(setup.branch_point(s, lambda, sol)?);
    }
    Ok(())
}

/// Solves for the branch point with average field `b_target`, i.e.
/// `lambda = kappa^2 / b_target`, by a secant iteration on `t = s^2`.
pub fn branch_by_field(setup: &ReductionSetup, b_target: f64, phase: f64) -> Result<BranchPoint> {
    let k2 = setup.kappa * setup.kappa;
    if !(b_target > 0.0) || !b_target.is_finite() {
        return Err(Error::InvalidParameter(format!("field b must be positive, got {b_target}")));
    }
    let c = setup.slope_prediction();
    if (b_target - k2).abs() <= 1e-15 * k2 {
        return setup.normal_point();
    }
    if c >= 0.0 && b_target > k2 {
        return Err(Error::WrongSide { b: b_target, kappa2: k2, side: "b <= kappa^2 since (kappa^2 - 1/2) beta + 1/2 >= 0" });
    }
    if c < 0.0 && b_target < k2 {
        return Err(Error::WrongSide { b: b_target, kappa2: k2, side: "b > kappa^2 since (kappa^2 - 1/2) beta + 1/2 < 0" });
    }
    let lambda = k2 / b_target;
    let rot = C64::from_polar(1.0, phase);
    let mut warm: Option<Vec<C64>> = None;
    let mut eval = |t: f64| -> Result<(f64, WSolution)> {
        if !(t > 0.0) {
            return Err(Error::NotBracketed(format!("amplitude for b = {b_target}: s^2 = {t}")));
        }
        let s = t.sqrt();
        let sol = setup.solve_w(lambda, rot * s, warm.as_deref())?;
        warm = Some(sol.w.clone());
        Ok(((sol.gamma / rot).re / s, sol))
    };
    let mut t0 = (lambda - 1.0) / c;
    let (mut g0, _) = eval(t0)?;
    let mut t1 = t0 - g0 / c;
    for _ in 0..setup.opts.max_root_iter {
        let (g1, sol) = eval(t1)?;
        if g1 == 0.0 || (t1 - t0).abs() < setup.opts.root_tol * t1.max(1e-300).sqrt() {
            return setup.branch_point(t1.sqrt(), lambda, sol);
        }
        let next = if g1 == g0 { t1 - g1 / c } else { t1 - g1 * (t1 - t0) / (g1 - g0) };
        t0 = t1;
        g0 = g1;
        t1 = next;
    }
    Err(Error::NoConvergence { what: "amplitude root", iterations: setup.opts.max_root_iter, residual: g0.abs() })
}

/// Fitted and predicted expansion coefficients of a branch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub kappa: f64,
    pub tau: [f64; 2],
    pub grid: usize,
    pub levels: usize,
    pub norm_convention: String,
    pub beta_used: f64,
    /// Fitted `d lambda / d(s^2)` at `s = 0`.
    pub g_lambda_prime0: f64,
    pub g_lambda_prime0_stderr: f64,
    pub fit_constant: f64,
    pub fit_quartic: f64,
    pub fit_points: usize,
    pub fit_rms: f64,
    /// `(kappa^2 - 1/2) beta + 1/2`.
    pub lambda1: f64,
    pub lambda1_relative_error: f64,
    /// `max |curl(alpha_s / s^2) - (1 - |psi0|^2)/2|` at the smallest `s`.
    pub curl_a1_error: f64,
    pub curl_a1_s: f64,
    /// `max |Im(conj(psi0) D psi0) + (1/2) curl^* |psi0|^2|`.
    pub current_identity_residual: f64,
    /// Log-log slope of `|E(s) - E_pred(s)|` against `s`.
    pub energy_error_slope: f64,
    pub energy_points: usize,
    /// Fitted `d(s^2) / d(kappa^2 - b)` and its prediction `1 / (kappa^2 lambda1)`.
    pub s2_slope: f64,
    pub s2_slope_predicted: f64,
    pub under_resolved: bool,
}

/// Predicted branch energy
/// `kappa^2/2 + kappa^4/lambda^2 - (kappa^4 s^4 / 2) lambda1` (with `<|psi0|^2> = 1`).
pub fn energy_prediction(kappa: f64, lambda1: f64, s: f64, lambda: f64) -> f64 {
    let k2 = kappa * kappa;
    0.5 * k2 + k2 * k2 / (lambda * lambda) - 0.5 * k2 * k2 * s.powi(4) * lambda1
}

/// Least squares of `y` on the given columns; returns coefficients, their
/// standard errors and the rms residual.
fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let m = y.len();
    let p = cols.len();
    let a = DMatrix::from_fn(m, p, |i, j| cols[j][i]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-14).map_err(|e| Error::InvalidParameter(format!("least squares failed: {e}")))?;
    let r = &a * &x - &b;
    let rms = (r.norm_squared() / m as f64).sqrt();
    let dof = (m as f64 - p as f64).max(1.0);
    let sigma2 = r.norm_squared() / dof;
    let cov = (a.transpose() * &a).try_inverse().unwrap_or_else(|| DMatrix::zeros(p, p));
    let se = (0..p).map(|j| (sigma2 * cov[(j, j)]).max(0.0).sqrt()).collect();
    Ok((x.iter().copied().collect(), se, rms))
}

/// Fits the branch against the small-amplitude expansion.
///
/// Needs at least five points with `0 < s <= 0.1`; the energy slope uses the
/// points with `0.02 <= s <= 0.08`.
pub fn fit_expansion(branch: &Branch, setup: &ReductionSetup) -> Result<ExpansionReport> {
    let kappa = branch.kappa;
    let k2 = kappa * kappa;
    let small: Vec<&BranchPoint> = branch.points.iter().filter(|p| p.s > 0.0 && p.s <= 0.1 + 1e-12).collect();
    if small.len() < 5 {
        return Err(Error::InvalidParameter(format!("need at least 5 branch points with 0 < s <= 0.1, got {}", small.len())));
    }
    let s2: Vec<f64> = small.iter().map(|p| p.s * p.s).collect();
    let lam: Vec<f64> = small.iter().map(|p| p.lambda).collect();
    let (coef, se, fit_rms) = least_squares(&[vec![1.0; s2.len()], s2.clone(), s2.iter().map(|t| t * t).collect()], &lam)?;
    let lambda1 = setup.slope_prediction();

    // second-order potential at the smallest amplitude
    let first = small.iter().min_by(|a, b| a.s.total_cmp(&b.s)).expect("non-empty");
    let sg = &setup.context().sg;
    let curl = first.state.alpha.curl(sg);
    let psi0 = setup.psi0().interior();
    let inv = 1.0 / (first.s * first.s);
    let curl_a1_error = curl
        .iter()
        .zip(&psi0)
        .map(|(c, p)| (c * inv - 0.5 * (1.0 - p.norm_sqr())).abs())
        .fold(0.0, f64::max);

    let dpsi0 = setup.context().covariant(setup.psi0())?;
    let j0 = setup.context().source_current(&psi0, &dpsi0);
    let rho: Vec<f64> = psi0.iter().map(|z| z.norm_sqr()).collect();
    let cs = sg.curl_star(&rho);
    let current_identity_residual = (0..2)
        .map(|c| max_abs(&j0[c].iter().zip(&cs[c]).map(|(a, b)| a + 0.5 * b).collect::<Vec<_>>()))
        .fold(0.0, f64::max);

    let band: Vec<&BranchPoint> = branch.points.iter().filter(|p| p.s >= 0.02 - 1e-12 && p.s <= 0.08 + 1e-12).collect();
    let energy_error_slope = if band.len() >= 2 {
        let xs: Vec<f64> = band.iter().map(|p| p.s.ln()).collect();
        let ys: Vec<f64> = band.iter().map(|p| (p.energy - energy_prediction(kappa, lambda1, p.s, p.lambda)).abs().max(1e-300).ln()).collect();
        least_squares(&[vec![1.0; xs.len()], xs], &ys)?.0[1]
    } else {
        f64::NAN
    };

    let mu: Vec<f64> = small.iter().map(|p| k2 - p.b).collect();
    let s2_fit = least_squares(&[mu.clone(), mu.iter().map(|m| m * m).collect()], &s2)?.0;

    let lambda1_relative_error = (coef[1] - lambda1).abs() / lambda1.abs();
    let tau = branch.shape.tau();
    Ok(ExpansionReport {
        kappa,
        tau: [tau.re, tau.im],
        grid: branch.grid,
        levels: branch.levels,
        norm_convention: "inner products are cell averages; <|psi0|^2> = 1, so ||psi0||^2 = 1".into(),
        beta_used: setup.beta(),
        g_lambda_prime0: coef[1],
        g_lambda_prime0_stderr: se[1],
        fit_constant: coef[0],
        fit_quartic: coef[2],
        fit_points: small.len(),
        fit_rms,
        lambda1,
        lambda1_relative_error,
        curl_a1_error,
        curl_a1_s: first.s,
        current_identity_residual,
        energy_error_slope,
        energy_points: band.len(),
        s2_slope: s2_fit[0],
        s2_slope_predicted: 1.0 / (k2 * lambda1),
        under_resolved: se[1] > 1e-3 * coef[1].abs(),
    })
}
