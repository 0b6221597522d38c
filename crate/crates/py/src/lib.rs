//! Python bindings: shape functions, critical points and bifurcating branches.

use pyo3::prelude::*;

#[pymodule]
mod abrikosov {
    use abrikosov_core::abrikosov::{beta_at, find_beta_critical_points, kappa_c_from_beta};
    use abrikosov_core::bifurcation::{fit_expansion, solve_branch, ReductionOptions, ReductionSetup};
    use abrikosov_core::gauge::{fix_gauge, RawLatticeState};
    use abrikosov_core::lattice::normalize_tau as normalize;
    use abrikosov_core::{Error, C64};
    use pyo3::exceptions::{PyRuntimeError, PyValueError};
    use pyo3::prelude::*;
    use pyo3::types::PyDict;

    fn to_py(e: Error) -> PyErr {
        match e {
            Error::InvalidShape(_)
            | Error::ShapeOutOfRange { .. }
            | Error::InvalidParameter(_)
            | Error::GridMismatch(_)
            | Error::WrongSide { .. }
            | Error::Unsupported(_) => PyValueError::new_err(e.to_string()),
            _ => PyRuntimeError::new_err(e.to_string()),
        }
    }

    fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
        py.import("json")?.call_method1("loads", (value.to_string(),))
    }

    fn setup(kappa2: f64, tau: (f64, f64), grid: usize, levels: usize) -> PyResult<ReductionSetup> {
        if !(kappa2 > 0.0) {
            return Err(PyValueError::new_err(format!("kappa2 must be positive, got {kappa2}")));
        }
        let (shape, _) = normalize(C64::new(tau.0, tau.1)).map_err(to_py)?;
        let opts = ReductionOptions { grid, levels, ..Default::default() };
        ReductionSetup::new(kappa2.sqrt(), shape, opts).map_err(to_py)
    }

    /// Representative of `tau` in the fundamental domain, as `(re, im)`.
    #[pyfunction]
    fn normalize_tau(re: f64, im: f64) -> PyResult<(f64, f64)> {
        let (shape, _) = normalize(C64::new(re, im)).map_err(to_py)?;
        Ok((shape.tau().re, shape.tau().im))
    }

    /// Abrikosov constant `beta(tau)`.
    #[pyfunction]
    fn beta(py: Python<'_>, re: f64, im: f64) -> PyResult<f64> {
        py.detach(|| beta_at(C64::new(re, im))).map_err(to_py)
    }

    /// Critical Ginzburg-Landau parameter of the lattice with shape `tau`.
    #[pyfunction]
    fn kappa_c(py: Python<'_>, re: f64, im: f64) -> PyResult<f64> {
        py.detach(|| beta_at(C64::new(re, im))).map(kappa_c_from_beta).map_err(to_py)
    }

    /// Critical points of `beta` in the fundamental domain, as dicts.
    #[pyfunction]
    #[pyo3(signature = (tolerance = 1e-10))]
    fn critical_points<'py>(py: Python<'py>, tolerance: f64) -> PyResult<Bound<'py, PyAny>> {
        let points = py.detach(|| find_beta_critical_points(tolerance)).map_err(to_py)?;
        let value = serde_json::to_value(&points).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        json_to_py(py, &value)
    }

    /// Branch points bifurcating from `lambda = 1` at the given amplitudes.
    /// Each point is a dict of scalars; fields are not returned.
    #[pyfunction]
    #[pyo3(signature = (kappa2, s_grid, tau = (0.0, 1.0), grid = 64, levels = 32))]
    fn branch<'py>(py: Python<'py>, kappa2: f64, s_grid: Vec<f64>, tau: (f64, f64), grid: usize, levels: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let setup = setup(kappa2, tau, grid, levels)?;
        let branch = py.detach(|| solve_branch(&setup, &s_grid, 0.0)).map_err(to_py)?;
        branch
            .points
            .iter()
            .map(|p| {
                let d = PyDict::new(py);
                d.set_item("s", p.s)?;
                d.set_item("lambda", p.lambda)?;
                d.set_item("b", p.b)?;
                d.set_item("energy", p.energy)?;
                d.set_item("residual_psi", p.residual_psi)?;
                d.set_item("residual_alpha", p.residual_alpha)?;
                d.set_item("flux", p.flux)?;
                d.set_item("min_abs_psi", p.min_abs_psi)?;
                Ok(d)
            })
            .collect()
    }

    /// Fitted expansion coefficients of the branch against their predictions.
    #[pyfunction]
    #[pyo3(signature = (kappa2, s_grid, tau = (0.0, 1.0), grid = 64, levels = 32))]
    fn expansion<'py>(py: Python<'py>, kappa2: f64, s_grid: Vec<f64>, tau: (f64, f64), grid: usize, levels: usize) -> PyResult<Bound<'py, PyAny>> {
        let setup = setup(kappa2, tau, grid, levels)?;
        let report = py
            .detach(|| solve_branch(&setup, &s_grid, 0.0).and_then(|b| fit_expansion(&b, &setup)))
            .map_err(to_py)?;
        let value = serde_json::to_value(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        json_to_py(py, &value)
    }

    /// Branch state at amplitude `s` brought to canonical gauge. Returns the
    /// translation, phase and sample arrays `psi` (complex, row-major in `y2`),
    /// `alpha1`, `alpha2`.
    #[pyfunction]
    #[pyo3(signature = (kappa2, s, tau = (0.0, 1.0), grid = 48, levels = 16))]
    fn canonical_state<'py>(py: Python<'py>, kappa2: f64, s: f64, tau: (f64, f64), grid: usize, levels: usize) -> PyResult<Bound<'py, PyDict>> {
        let setup = setup(kappa2, tau, grid, levels)?;
        let fixed = py
            .detach(|| {
                let mut b = solve_branch(&setup, &[s], 0.0)?;
                fix_gauge(&RawLatticeState::from_gl(&b.points.remove(0).state))
            })
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("translation", fixed.translation)?;
        d.set_item("phase", fixed.phase)?;
        d.set_item("path_residual", fixed.path_residual)?;
        d.set_item("psi", fixed.psi.samples.clone())?;
        d.set_item("alpha1", fixed.alpha.comp[0].clone())?;
        d.set_item("alpha2", fixed.alpha.comp[1].clone())?;
        Ok(d)
    }
}
