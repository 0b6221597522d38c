use std::f64::consts::PI;

use abrikosov_core::abrikosov::{
    beta_lattice_sum, beta_quadrature, energy_landscape_asymptotic_beta, find_beta_critical_points, kappa_c_from_beta,
    landscape_results, multistart_minima, refine_minimum, shape_distance,
};
use abrikosov_core::bifurcation::{fit_expansion, solve_branch_partial, ReductionSetup};
use abrikosov_core::gauge::{fix_gauge, gauge_transform, observable_distance, translate_state, GaugeFunction, RawLatticeState};
use abrikosov_core::io::{read_table, state_rows, write_state, BRANCH_COLUMNS, STATE_COLUMNS};
use abrikosov_core::lattice::{cell_geometry, LatticeShape};
use abrikosov_core::spectral::{max_abs, mean, SpectralGrid};
use abrikosov_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::RunConfig;
use crate::{failed, CliError, Output};

pub const CLOSED_COLUMNS: [&str; 6] = ["y1", "y2", "re_psi", "im_psi", "a1", "a2"];

/// Maps `f` over `items` on up to `jobs` scoped threads, preserving order.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.max(1).min(items.len().max(1));
    let chunk = items.len().div_ceil(jobs).max(1);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| scope.spawn(move || c.iter().map(f).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

pub fn beta(config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let taus = config.tau_points()?;
    let rows = par_map(&taus, config.jobs, |&tau| -> Result<Vec<f64>, CliError> {
        let shape = LatticeShape::new(tau)?;
        let q = beta_quadrature(shape)?.beta;
        let l = beta_lattice_sum(shape, 8).beta;
        Ok(vec![tau.re, tau.im, q, l, kappa_c_from_beta(q)])
    });
    let mut good = Vec::with_capacity(rows.len());
    let mut first_err = None;
    for r in rows {
        match r {
            Ok(v) => good.push(v),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let extra = if first_err.is_some() { failed() } else { json!({}) };
    out.table("beta_scan.csv", extra, &["tau_re", "tau_im", "beta", "beta_lattice_sum", "kappa_c"], &good)?;
    first_err.map_or(Ok(()), Err)
}

pub fn critical_points(config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let points = find_beta_critical_points(config.critical_tol)?;
    let runs = multistart_minima(config.starts, config.seed, config.critical_tol)?;
    let rho = LatticeShape::triangular().tau();
    let distances: Vec<f64> = runs.iter().map(|(_, end)| shape_distance(*end, rho)).collect();
    let reached = distances.iter().filter(|d| **d < 1e-6).count();
    let result = json!({
        "points": points,
        "multistart": {
            "starts": config.starts,
            "seed": config.seed,
            "reached_triangular": reached,
            "worst_distance": distances.iter().cloned().fold(0.0, f64::max),
            "runs": runs.iter().map(|(s, e)| json!({ "start": [s.re, s.im], "end": [e.re, e.im] })).collect::<Vec<_>>(),
        },
    });
    out.report("critical_points.json", json!({}), &result)
}

pub fn branch(config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let shape = config.shape()?;
    let setup = ReductionSetup::new(config.kappa2.sqrt(), shape, config.reduction())?;
    let (branch, failure) = solve_branch_partial(&setup, &config.s_values(), 0.0)?;
    let extra = json!({ "tau": [shape.re(), shape.im()], "beta": branch.beta });
    let rows = abrikosov_core::io::branch_rows(&branch);
    if let Some(e) = failure {
        let marker = json!({ "status": "failed", "tau": [shape.re(), shape.im()], "beta": branch.beta });
        out.table("branch.csv", marker, &BRANCH_COLUMNS, &rows)?;
        return Err(e.into());
    }
    out.table("branch.csv", extra.clone(), &BRANCH_COLUMNS, &rows)?;
    if let Some(last) = branch.points.last() {
        let path = out.path("state.csv");
        write_state(&path, &last.state, &out.stamp(json!({ "s": last.s, "lambda": last.lambda, "b": last.b })))?;
        out.written.push(path);
    }
    match fit_expansion(&branch, &setup) {
        Ok(report) => out.report("expansion.json", extra, &report),
        Err(abrikosov_core::Error::InvalidParameter(why)) => out.report("expansion.json", extra, &json!({ "skipped": why })),
        Err(e) => Err(e.into()),
    }
}

pub fn field_landscape(config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let taus = config.tau_points()?;
    let bs = config.fields();
    let kappa = config.kappa2.sqrt();
    let opts = config.reduction();
    let betas = par_map(&taus, config.jobs, |&tau| LatticeShape::new(tau).and_then(beta_quadrature).map(|b| b.beta));
    let results = landscape_results(kappa, &bs, &taus, opts, config.jobs);
    let mut rows = Vec::with_capacity(results.len());
    let mut per_b: Vec<Vec<_>> = vec![Vec::new(); bs.len()];
    let mut first_err: Option<CliError> = None;
    for (k, r) in results.into_iter().enumerate() {
        let (it, ib) = (k / bs.len(), k % bs.len());
        let (tau, b) = (taus[it], bs[ib]);
        let asym = betas[it].as_ref().ok().and_then(|beta| energy_landscape_asymptotic_beta(*beta, kappa, b).ok()).unwrap_or(f64::NAN);
        let beta = betas[it].as_ref().map_or(f64::NAN, |v| *v);
        match r {
            Ok(p) => {
                rows.push(vec![b, tau.re, tau.im, beta, p.energy, asym, p.s, p.residual_psi]);
                per_b[ib].push(p);
            }
            Err(e) => {
                rows.push(vec![b, tau.re, tau.im, beta, f64::NAN, asym, f64::NAN, f64::NAN]);
                first_err.get_or_insert(e.into());
            }
        }
    }
    let columns = ["b", "tau_re", "tau_im", "beta", "energy_numeric", "energy_asymptotic", "s", "residual_psi"];
    if let Some(e) = first_err {
        out.table("landscape.csv", failed(), &columns, &rows)?;
        return Err(e);
    }
    out.table("landscape.csv", json!({}), &columns, &rows)?;
    let rho = LatticeShape::triangular().tau();
    let mut minima = Vec::with_capacity(bs.len());
    for (b, samples) in bs.iter().zip(per_b) {
        let m = refine_minimum(kappa, *b, samples, opts, config.jobs)?;
        minima.push(json!({
            "b": b,
            "mu": config.kappa2 - b,
            "argmin": [m.argmin.re, m.argmin.im],
            "refined": [m.refined.re, m.refined.im],
            "argmin_distance_to_triangular": (m.argmin - rho).norm(),
            "refined_distance_to_triangular": (m.refined - rho).norm(),
        }));
    }
    out.report("landscape_minima.json", json!({}), &minima)
}

/// Smooth random gauge function: a few low Fourier modes plus a linear part.
pub fn random_gauge(rng: &mut ChaCha8Rng, grid: usize, amplitude: f64) -> GaugeFunction {
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (rng.gen_range(-2..=2) as f64, rng.gen_range(-2..=2) as f64, rng.gen_range(-amplitude..amplitude), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let mut periodic = vec![0.0; grid * grid];
    for j2 in 0..grid {
        for j1 in 0..grid {
            let y = [j1 as f64 / grid as f64, j2 as f64 / grid as f64];
            periodic[j2 * grid + j1] = modes.iter().map(|(p, q, a, ph)| a * (2.0 * PI * (p * y[0] + q * y[1]) + ph).cos()).sum();
        }
    }
    GaugeFunction { linear: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], periodic }
}

/// Random gauge distortion followed by a random translation.
pub fn scramble(state: &RawLatticeState, rng: &mut ChaCha8Rng) -> Result<(RawLatticeState, [f64; 2]), CliError> {
    let eta = random_gauge(rng, state.grid(), 0.25);
    let t = state.cell().point(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
    Ok((translate_state(&gauge_transform(state, &eta)?, t)?, t))
}

fn closed_rows(state: &RawLatticeState) -> Vec<Vec<f64>> {
    let grid = state.grid();
    let side = grid + 1;
    let a = state.total_potential();
    let mut rows = Vec::with_capacity(side * side);
    for j2 in 0..side {
        for j1 in 0..side {
            let i = j2 * side + j1;
            let z = state.psi.samples[i];
            rows.push(vec![j1 as f64 / grid as f64, j2 as f64 / grid as f64, z.re, z.im, a[0][i], a[1][i]]);
        }
    }
    rows
}

fn read_closed(config: &RunConfig, path: &std::path::Path) -> Result<RawLatticeState, CliError> {
    let table = read_table(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if table.columns.iter().map(String::as_str).ne(CLOSED_COLUMNS.iter().copied()) {
        return Err(CliError::Config(format!("{}: expected columns {:?}", path.display(), CLOSED_COLUMNS)));
    }
    let side = (table.rows.len() as f64).sqrt().round() as usize;
    if side * side != table.rows.len() || side < 3 {
        return Err(CliError::Config(format!("{}: rows do not form a closed square grid", path.display())));
    }
    let grid = side - 1;
    let mut psi = vec![C64::new(0.0, 0.0); side * side];
    let mut a = [vec![0.0; side * side], vec![0.0; side * side]];
    for row in &table.rows {
        let j1 = (row[0] * grid as f64).round() as usize;
        let j2 = (row[1] * grid as f64).round() as usize;
        if j1 > grid || j2 > grid {
            return Err(CliError::Config(format!("{}: grid point out of range", path.display())));
        }
        let i = j2 * side + j1;
        psi[i] = C64::new(row[2], row[3]);
        a[0][i] = row[4];
        a[1][i] = row[5];
    }
    let shape = config.shape()?;
    let cell = cell_geometry(shape, 1, 1.0)?.normalized_cell();
    Ok(RawLatticeState::from_closed_samples(shape, cell, grid, &psi, [&a[0], &a[1]])?)
}

pub fn gauge_fix(config: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let (input, expected) = match &config.input {
        Some(path) => (read_closed(config, path)?, None),
        None => {
            let setup = ReductionSetup::new(config.kappa2.sqrt(), config.shape()?, config.reduction())?;
            let s = config.s_values().last().copied().unwrap_or(config.s_max);
            let p = abrikosov_core::bifurcation::solve_branch(&setup, &[s], 0.0)?.points.remove(0);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let (scrambled, _) = scramble(&RawLatticeState::from_gl(&p.state), &mut rng)?;
            out.table("input_closed.csv", json!({ "s": p.s, "lambda": p.lambda }), &CLOSED_COLUMNS, &closed_rows(&scrambled))?;
            (scrambled, Some(p.lambda))
        }
    };
    let fixed = fix_gauge(&input)?;
    let sg = SpectralGrid::new(fixed.alpha.cell, fixed.alpha.grid);
    let moved = translate_state(&input, fixed.translation)?;
    let result = json!({
        "translation": fixed.translation,
        "phase": fixed.phase,
        "path_residual": fixed.path_residual,
        "cocycle": fixed.psi.cocycle,
        "max_divergence": max_abs(&sg.divergence(&fixed.alpha.comp)),
        "mean_alpha": [mean(&fixed.alpha.comp[0]), mean(&fixed.alpha.comp[1])],
        "quasi_periodicity": abrikosov_core::landau::quasi_periodicity_residual(&fixed.psi),
        "observable_distance": observable_distance(&fixed.raw().observables(), &moved.observables()),
        "flux": fixed.raw().flux(),
        "lambda": expected,
    });
    out.table("fixed_state.csv", json!({}), &STATE_COLUMNS, &state_rows(&fixed.psi, &fixed.alpha))?;
    out.report("gauge_fix.json", json!({}), &result)
}
