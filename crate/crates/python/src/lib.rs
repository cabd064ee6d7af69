//! Python bindings for `dwnls`.
//!
//! ```python
//! import dwnls_py as dwnls
//! v = dwnls.Potential.quartic(1.0, 1.0)
//! s = dwnls.lowest_eigenpairs(v, dwnls.Grid(1, 4.0, 256), 0.2)
//! print(s.omega_split, s.beat_period)
//! ```

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dwnls::eigensolver::{self, CSigmaConvention};
use dwnls::nls::{self, ObserverSet};
use dwnls::twomode::{self, ScanOptions};
use dwnls::{Error, TimeScheme};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_)
        | Error::NotADoubleWell(_)
        | Error::GridMismatch
        | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Potential", module = "dwnls", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyPotential {
    inner: dwnls::Potential,
}

#[pymethods]
impl PyPotential {
    /// `1 + β(x₁² − a²)² + Σ ω_j² x_j²`.
    #[staticmethod]
    #[pyo3(signature = (a=1.0, beta=1.0, transverse_freqs=Vec::new()))]
    fn quartic(a: f64, beta: f64, transverse_freqs: Vec<f64>) -> PyResult<Self> {
        dwnls::Potential::builtin_quartic(a, beta, &transverse_freqs)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (omega0, barrier_height, barrier_width, dim=1))]
    fn harmonic_barrier(omega0: f64, barrier_height: f64, barrier_width: f64, dim: usize) -> PyResult<Self> {
        dwnls::Potential::builtin_harmonic_barrier(omega0, barrier_height, barrier_width, dim)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (omega0=1.0, dim=1))]
    fn harmonic(omega0: f64, dim: usize) -> PyResult<Self> {
        dwnls::Potential::harmonic(omega0, dim)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn x_plus(&self) -> Vec<f64> {
        self.inner.x_plus()[..self.inner.dim()].to_vec()
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "expected {} coordinates, got {}",
                self.inner.dim(),
                x.len()
            )));
        }
        Ok(self.inner.eval(&x))
    }

    fn agmon_closed_form(&self) -> Option<f64> {
        self.inner.agmon_closed_form()
    }

    fn __repr__(&self) -> String {
        format!("Potential({:?})", self.inner.family())
    }
}

#[pyclass(name = "Grid", module = "dwnls", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyGrid {
    inner: dwnls::Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(dim: usize, half_width: f64, n: usize) -> PyResult<Self> {
        dwnls::Grid::new(dim, half_width, n)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Coordinates of every grid point along the first axis.
    fn axis(&self) -> Vec<f64> {
        (0..self.inner.n).map(|i| self.inner.axis(i)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(dim={}, half_width={}, n={})",
            self.inner.dim, self.inner.half_width, self.inner.n
        )
    }
}

#[pyclass(name = "SpectralData", module = "dwnls", frozen)]
pub struct PySpectralData {
    inner: dwnls::SpectralData,
}

#[pymethods]
impl PySpectralData {
    #[getter]
    fn hbar(&self) -> f64 {
        self.inner.hbar
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }

    #[getter]
    fn residuals(&self) -> Vec<f64> {
        self.inner.residuals.clone()
    }

    #[getter]
    fn omega_mean(&self) -> f64 {
        self.inner.omega_mean
    }

    #[getter]
    fn omega_split(&self) -> f64 {
        self.inner.omega_split
    }

    #[getter]
    fn beat_period(&self) -> f64 {
        self.inner.beat_period()
    }

    #[getter]
    fn phi_r(&self) -> Vec<C64> {
        self.inner.phi_r.values().to_vec()
    }

    #[getter]
    fn phi_l(&self) -> Vec<C64> {
        self.inner.phi_l.values().to_vec()
    }

    fn eigenvector(&self, k: usize) -> PyResult<Vec<C64>> {
        self.inner
            .eigenvectors
            .get(k)
            .map(|f| f.values().to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("no eigenvector {k}")))
    }

    /// Two-mode self-interaction coefficient.
    #[pyo3(signature = (sigma=1, fourth_power=false))]
    fn c_sigma(&self, sigma: u32, fourth_power: bool) -> PyResult<f64> {
        let conv = if fourth_power {
            CSigmaConvention::FourthPower
        } else {
            CSigmaConvention::Projection
        };
        eigensolver::c_sigma(&self.inner, sigma, conv).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "SpectralData(hbar={}, Omega={}, omega={:e})",
            self.inner.hbar, self.inner.omega_mean, self.inner.omega_split
        )
    }
}

#[pyfunction]
#[pyo3(signature = (potential, grid, hbar, k=3, tol=1e-10, seed=0))]
fn lowest_eigenpairs(
    potential: &PyPotential,
    grid: &PyGrid,
    hbar: f64,
    k: usize,
    tol: f64,
    seed: u64,
) -> PyResult<PySpectralData> {
    dwnls::lowest_eigenpairs(&potential.inner, &grid.inner, hbar, k, tol, seed)
        .map(|inner| PySpectralData { inner })
        .map_err(to_py)
}

/// Returns `(gamma, method)`.
#[pyfunction]
#[pyo3(signature = (potential, resolution=2048))]
fn agmon_distance(potential: &PyPotential, resolution: usize) -> PyResult<(f64, String)> {
    dwnls::agmon_distance(&potential.inner, resolution)
        .map(|r| (r.gamma, r.method.as_str().to_string()))
        .map_err(to_py)
}

/// `(hbar, omega)` rows and the fitted slope of `ln ω` against `1/ħ`.
#[pyfunction]
#[pyo3(signature = (potential, grid, hbars, tol=1e-10, seed=0))]
fn splitting_sweep(
    potential: &PyPotential,
    grid: &PyGrid,
    hbars: Vec<f64>,
    tol: f64,
    seed: u64,
) -> PyResult<(Vec<(f64, f64)>, Option<f64>, Option<f64>)> {
    let t = eigensolver::splitting_sweep(&potential.inner, &grid.inner, &hbars, tol, seed)
        .map_err(to_py)?;
    let rows = t.rows.iter().map(|r| (r.hbar, r.omega)).collect();
    Ok((rows, t.fit.map(|f| f.slope), t.fit.map(|f| f.r2)))
}

/// Evolves `c_R φ_R + c_L φ_L` and returns the observable columns.
#[pyfunction]
#[pyo3(signature = (spectrum, epsilon, dt, t_final, sigma=1, c_r=C64::new(1.0, 0.0), c_l=C64::new(0.0, 0.0), output_stride=1, eigenbasis=false, modes=None, time_rescaled=true))]
#[allow(clippy::too_many_arguments)]
fn evolve(
    spectrum: &PySpectralData,
    epsilon: f64,
    dt: f64,
    t_final: f64,
    sigma: u32,
    c_r: C64,
    c_l: C64,
    output_stride: usize,
    eigenbasis: bool,
    modes: Option<usize>,
    time_rescaled: bool,
) -> PyResult<HashMap<String, Vec<f64>>> {
    let s = &spectrum.inner;
    let mut cfg = dwnls::SimConfig::new(s.hbar, epsilon, sigma, s.grid().dim, dt, t_final);
    cfg.output_stride = output_stride;
    cfg.time_rescaled = time_rescaled;
    cfg.modes = modes;
    if eigenbasis {
        cfg.scheme = TimeScheme::EigenbasisStrang;
    }
    let mut psi0 = s.phi_r.scaled(c_r);
    psi0.add_scaled(c_l, &s.phi_l).map_err(to_py)?;
    let psi0 = psi0.normalized();
    let traj = nls::evolve(&psi0, &cfg, s, &ObserverSet::default()).map_err(to_py)?;
    let mut out = HashMap::new();
    out.insert("t".into(), traj.times.clone());
    out.insert("norm".into(), traj.column(|r| r.norm));
    out.insert("energy".into(), traj.column(|r| r.energy));
    out.insert("mu".into(), traj.column(|r| r.mu));
    out.insert("pop_R".into(), traj.column(|r| r.pop_r));
    out.insert("pop_L".into(), traj.column(|r| r.pop_l));
    out.insert("h0_gap".into(), traj.column(|r| r.h0_gap));
    Ok(out)
}

fn params(
    omega_split: f64,
    omega_mean: f64,
    epsilon: f64,
    sigma: u32,
    c_sigma: f64,
) -> twomode::TwoModeParams {
    twomode::TwoModeParams {
        omega_split,
        omega_mean,
        epsilon,
        sigma,
        c_sigma,
        time_rescaled: true,
        hbar: 1.0,
    }
}

/// Two-mode RK4 run in rescaled time; returns `(tau, z, invariant_I, min_z)`.
#[pyfunction]
#[pyo3(signature = (omega_split, omega_mean, epsilon, c_sigma, dt, t_final, sigma=1, c_r=C64::new(1.0, 0.0), c_l=C64::new(0.0, 0.0), stride=1))]
#[allow(clippy::too_many_arguments)]
fn twomode_integrate(
    omega_split: f64,
    omega_mean: f64,
    epsilon: f64,
    c_sigma: f64,
    dt: f64,
    t_final: f64,
    sigma: u32,
    c_r: C64,
    c_l: C64,
    stride: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    let p = params(omega_split, omega_mean, epsilon, sigma, c_sigma);
    let t = twomode::integrate(&twomode::TwoModeState::new(c_r, c_l), &p, dt, t_final, stride)
        .map_err(to_py)?;
    Ok((t.tau, t.z, t.invariant, t.min_z))
}

/// Self-trapping scan over `η = εC_σ/ω`; returns `(rows, eta_star)` with
/// rows `(eta, min_z, trapped)`.
#[pyfunction]
#[pyo3(signature = (eta_values, sigma=1, periods=10.0, steps_per_period=10_000, bisection_width=0.01))]
fn selftrap_scan(
    eta_values: Vec<f64>,
    sigma: u32,
    periods: f64,
    steps_per_period: usize,
    bisection_width: f64,
) -> PyResult<(Vec<(f64, f64, bool)>, Option<f64>)> {
    let p = params(1.0, 0.0, 0.0, sigma, 1.0);
    let opts = ScanOptions {
        periods,
        steps_per_period,
        bisection_width,
    };
    let t = twomode::selftrap_scan(&p, &eta_values, sigma, &opts).map_err(to_py)?;
    let rows = t.rows.iter().map(|r| (r.eta, r.min_z, r.trapped)).collect();
    Ok((rows, t.eta_star))
}

#[pymodule]
pub fn dwnls_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPotential>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PySpectralData>()?;
    m.add_function(wrap_pyfunction!(lowest_eigenpairs, m)?)?;
    m.add_function(wrap_pyfunction!(agmon_distance, m)?)?;
    m.add_function(wrap_pyfunction!(splitting_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(twomode_integrate, m)?)?;
    m.add_function(wrap_pyfunction!(selftrap_scan, m)?)?;
    Ok(())
}
