use std::f64::consts::PI;
use std::sync::Arc;

use abrikosov_core::bifurcation::{fit_expansion, solve_branch, ReductionSetup};
use abrikosov_core::gauge::{fix_gauge, magnetic_translation, observable_distance, translate_state, RawLatticeState};
use abrikosov_core::glcore::GLContext;
use abrikosov_core::landau::fd::fd_spectrum;
use abrikosov_core::landau::{ladder_apply, quasi_periodicity_residual, theta_null_basis, Ladder, LandauBasis, QuasiPeriodicField};
use abrikosov_core::lattice::LatticeShape;
use abrikosov_core::spectral::{max_abs, mean, SpectralGrid};
use abrikosov_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::commands::scramble;
use crate::config::RunConfig;
use crate::{CliError, Output, Suite};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    /// `true` when `measured` must stay below `tolerance`, `false` for a lower bound.
    pub upper: bool,
    pub pass: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, upper: true, pass: measured.is_finite() && measured < tolerance }
    }

    pub fn above(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, upper: false, pass: measured.is_finite() && measured >= tolerance }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub suite: Suite,
    pub pass: bool,
    pub checks: Vec<Check>,
}

/// Runs a suite and writes `verify_<suite>.json`. Failed checks are data:
/// only errors in setting a suite up are reported as errors.
pub fn run(suite: Suite, config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let checks = match suite {
        Suite::Spectrum => spectrum(config)?,
        Suite::Symmetry => symmetry(config)?,
        Suite::Gauge => gauge(config)?,
        Suite::Asymptotics => asymptotics(config)?,
    };
    let verdict = Verdict { suite, pass: checks.iter().all(|c| c.pass), checks };
    for c in &verdict.checks {
        let rel = if c.upper { "<" } else { ">=" };
        eprintln!("{} {}: {:.3e} {rel} {:.1e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.measured, c.tolerance);
    }
    let name = format!("verify_{}.json", serde_json::to_value(suite).expect("suite serializes").as_str().unwrap_or("suite"));
    out.report(&name, json!({ "pass": verdict.pass }), &verdict)
}

fn rel_diff(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den.max(1e-300)).sqrt()
}

/// Lowest eigenvalues of the discretized operator cluster at `n(2k+1)` with
/// multiplicity `n`; the theta fields are annihilated by the lowering operator.
pub fn spectrum(_config: &RunConfig) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    for n in 1..=3u32 {
        let expected: Vec<f64> = (0..4).flat_map(|k| std::iter::repeat((2 * k + 1) as f64 * n as f64).take(n as usize)).collect();
        let mut errs = Vec::new();
        for grid in [64usize, 128] {
            let ev = fd_spectrum(n, grid, expected.len())?;
            let err = ev.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            checks.push(Check::below(format!("n={n} N={grid} cluster deviation"), err, 0.1 * n as f64));
            errs.push(err);
        }
        checks.push(Check::above(format!("n={n} convergence order"), (errs[0] / errs[1]).log2(), 1.8));
        let shape = LatticeShape::triangular();
        let grid = 64;
        let k = abrikosov_core::landau::ThetaCoeffs::truncation(n, shape.im()) as usize;
        let basis = LandauBasis::new(n, shape, grid, 1)?;
        for (j, f) in theta_null_basis(n, shape, k, grid)?.into_iter().enumerate() {
            // sample path: spectral differentiation of the theta samples
            let plain = QuasiPeriodicField { coeffs: None, ..f };
            let low = ladder_apply(&basis, &plain, Ladder::Lower)?;
            checks.push(Check::below(format!("n={n} theta field {j}: |alpha psi0| / |psi0|"), low.norm() / plain.norm(), 1e-10));
        }
    }
    Ok(checks)
}

fn random_field(rng: &mut ChaCha8Rng, basis: &LandauBasis, levels: usize) -> Result<QuasiPeriodicField, CliError> {
    let len = basis.coeff_len(levels);
    let coeffs = (0..len)
        .map(|i| {
            let decay = 0.5f64.powi(i as i32);
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay
        })
        .collect();
    let f = basis.field(coeffs)?;
    Ok(QuasiPeriodicField { coeffs: None, ..f })
}

/// Phase and magnetic-translation equivariance of `F`, realness of
/// `<psi, F(psi)>`, and phase equivariance of `w` and `gamma`.
pub fn symmetry(config: &RunConfig) -> Result<Vec<Check>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let kappa = config.kappa2.sqrt();
    let grid = 64;
    let mut worst = [0.0f64; 5];
    for shape in [LatticeShape::square(), LatticeShape::triangular()] {
        let basis = Arc::new(LandauBasis::new(1, shape, grid, 12)?);
        let ctx = GLContext::new(basis.cell(), grid);
        for _ in 0..config.samples.clamp(1, 5) {
            let psi = random_field(&mut rng, &basis, 6)?.scale(C64::new(0.3, 0.0));
            let lambda = rng.gen_range(0.8..1.2);
            let (f, _) = ctx.map_f(kappa, lambda, &psi)?;
            let theta = rng.gen_range(0.0..2.0 * PI);
            let rot = C64::from_polar(1.0, theta);
            let (fr, _) = ctx.map_f(kappa, lambda, &psi.scale(rot))?;
            worst[0] = worst[0].max(rel_diff(&fr.samples, &f.scale(rot).samples));
            let l = basis.cell().point(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let (ft, _) = ctx.map_f(kappa, lambda, &magnetic_translation(&psi, l)?)?;
            worst[1] = worst[1].max(rel_diff(&ft.interior(), &magnetic_translation(&f, l)?.interior()));
            let ip = psi.inner(&f);
            worst[2] = worst[2].max(ip.im.abs() / ip.norm().max(1e-300));
        }
        let opts = abrikosov_core::bifurcation::ReductionOptions { grid: 48, levels: 16, ..config.reduction() };
        let setup = ReductionSetup::new(kappa, shape, opts)?;
        for _ in 0..2 {
            let s = rng.gen_range(0.05..0.2);
            let lambda = 1.0 + setup.slope_prediction() * s * s;
            let rot = C64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
            let base = setup.solve_w(lambda, C64::new(s, 0.0), None)?;
            let turned = setup.solve_w(lambda, rot * s, None)?;
            let expect: Vec<C64> = base.w.iter().map(|z| z * rot).collect();
            worst[3] = worst[3].max(rel_diff(&turned.w, &expect));
            worst[4] = worst[4].max((turned.gamma - base.gamma * rot).norm() / base.gamma.norm().max(1e-300));
        }
    }
    Ok(vec![
        Check::below("F(e^{i theta} psi) = e^{i theta} F(psi)", worst[0], 1e-10),
        Check::below("F(T_l psi) = T_l F(psi)", worst[1], 1e-10),
        Check::below("Im <psi, F(psi)> / |<psi, F(psi)>|", worst[2], 1e-10),
        Check::below("w(e^{i theta} s) = e^{i theta} w(s)", worst[3], 1e-10),
        Check::below("gamma(e^{i theta} s) = e^{i theta} gamma(s)", worst[4], 1e-10),
    ])
}

/// Randomized gauge distortions and translations of a branch state.
pub fn gauge(config: &RunConfig) -> Result<Vec<Check>, CliError> {
    let setup = ReductionSetup::new(config.kappa2.sqrt(), config.shape()?, config.reduction())?;
    let s = config.s_values().last().copied().unwrap_or(config.s_max);
    let point = solve_branch(&setup, &[s], 0.0)?.points.remove(0);
    let state = RawLatticeState::from_gl(&point.state);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut worst = [0.0f64; 5];
    let sg = SpectralGrid::new(state.cell(), state.grid());
    for _ in 0..config.samples.max(1) {
        let (input, _) = scramble(&state, &mut rng)?;
        let fixed = fix_gauge(&input)?;
        let qp = quasi_periodicity_residual(&fixed.psi) + fixed.psi.cocycle[0].abs() + fixed.psi.cocycle[1].abs();
        worst[0] = worst[0].max(qp);
        worst[1] = worst[1].max(max_abs(&sg.divergence(&fixed.alpha.comp)));
        worst[2] = worst[2].max(mean(&fixed.alpha.comp[0]).abs().max(mean(&fixed.alpha.comp[1]).abs()));
        let moved = translate_state(&input, fixed.translation)?;
        worst[3] = worst[3].max(observable_distance(&fixed.raw().observables(), &moved.observables()));
        let again = fix_gauge(&fixed.raw())?;
        let d = again.psi.samples.iter().zip(&fixed.psi.samples).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        worst[4] = worst[4].max(d);
    }
    Ok(vec![
        Check::below("quasi-periodicity with zero boundary constants", worst[0], 1e-10),
        Check::below("max |div alpha|", worst[1], 1e-10),
        Check::below("max |<alpha>|", worst[2], 1e-10),
        Check::below("observables reproduced", worst[3], 1e-8),
        Check::below("idempotence after phase normalization", worst[4], 1e-8),
    ])
}

/// Expansion coefficients of the branch against their predictions.
pub fn asymptotics(config: &RunConfig) -> Result<Vec<Check>, CliError> {
    let setup = ReductionSetup::new(config.kappa2.sqrt(), config.shape()?, config.reduction())?;
    let s_grid = [0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1];
    let branch = solve_branch(&setup, &s_grid, 0.0)?;
    let rep = fit_expansion(&branch, &setup)?;
    let worst = branch.points.iter().map(|p| p.residual_psi).fold(0.0, f64::max);
    let flux = branch.points.iter().map(|p| (p.flux - 2.0 * PI).abs()).fold(0.0, f64::max);
    Ok(vec![
        Check::below(format!("d lambda / d s^2 at 0: fitted {:.9} vs predicted {:.9} (relative)", rep.g_lambda_prime0, rep.lambda1), rep.lambda1_relative_error, 1e-3),
        Check::below(format!("|curl a1 - (<|psi0|^2> - |psi0|^2)/2| at s = {}", rep.curl_a1_s), rep.curl_a1_error, 1e-4),
        Check::below("first-order current identity", rep.current_identity_residual, 1e-10),
        Check::above("log-log slope of the energy error", rep.energy_error_slope, 5.7),
        Check::below("max branch residual", worst, 1e-8),
        Check::below("|flux - 2 pi|", flux, 1e-12),
    ])
}
