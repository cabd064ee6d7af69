//! Periodic grids, complex fields and the Fourier-spectral `H₀ = −ħ²Δ + V`.
//!
//! Fields are sampled on `[−L, L)^d` with `n` points per axis (row-major,
//! `x₁` slowest). Integrals use the rectangle rule, which is spectrally
//! accurate for smooth periodic integrands.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{Point, Potential};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub half_width: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "points per axis must be a power of two ≥ 4, got {n}"
            )));
        }
        Ok(Self { dim, half_width, n })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn axis(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn coords(&self, idx: usize) -> Point {
        match self.dim {
            1 => [self.axis(idx), 0.0],
            _ => [self.axis(idx / self.n), self.axis(idx % self.n)],
        }
    }

    /// Index of the mirror image under `x₁ → −x₁`. Exact on the grid because
    /// `−x_i = x_{n−i}` modulo the period.
    pub fn reflect_index(&self, idx: usize) -> usize {
        let n = self.n;
        match self.dim {
            1 => (n - idx) % n,
            _ => ((n - idx / n) % n) * n + idx % n,
        }
    }

    /// Non-periodic grid neighbours (2 in 1D, up to 8 in 2D).
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        let n = self.n as isize;
        let (i, j) = match self.dim {
            1 => (idx as isize, 0),
            _ => ((idx / self.n) as isize, (idx % self.n) as isize),
        };
        let mut out = Vec::with_capacity(8);
        let dj_range: &[isize] = if self.dim == 1 { &[0] } else { &[-1, 0, 1] };
        for di in [-1isize, 0, 1] {
            for &dj in dj_range {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (a, b) = (i + di, j + dj);
                if a < 0 || a >= n || b < 0 || (self.dim == 2 && b >= n) {
                    continue;
                }
                out.push(if self.dim == 1 {
                    a as usize
                } else {
                    (a * n + b) as usize
                });
            }
        }
        out
    }

    /// Angular wavenumber of FFT bin `j`, in `(π/L)·{−n/2, …, n/2−1}`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.n as isize;
        let m = if (j as isize) < n / 2 {
            j as isize
        } else {
            j as isize - n
        };
        m as f64 * std::f64::consts::PI / self.half_width
    }

    /// `|k|²` for every point of the Fourier grid, in field order.
    pub fn k_squared(&self) -> Vec<f64> {
        (0..self.len())
            .map(|idx| match self.dim {
                1 => self.wavenumber(idx).powi(2),
                _ => self.wavenumber(idx / self.n).powi(2) + self.wavenumber(idx % self.n).powi(2),
            })
            .collect()
    }

    /// The box must extend well beyond both wells.
    pub fn check_covers(&self, v: &Potential) -> Result<()> {
        let reach = v.x_plus()[..self.dim]
            .iter()
            .chain(&v.x_minus()[..self.dim])
            .fold(0.0f64, |m, c| m.max(c.abs()));
        if self.half_width <= 3.0 * reach {
            return Err(Error::InvalidParameter(format!(
                "half width {} must exceed 3·max|x±| = {}",
                self.half_width,
                3.0 * reach
            )));
        }
        if v.dim() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "potential is {}-dimensional but the grid is {}-dimensional",
                v.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// True for points in the outer layer `max_j |x_j| ≥ 7L/8`.
    pub fn in_boundary_layer(&self, idx: usize) -> bool {
        let x = self.coords(idx);
        x[..self.dim]
            .iter()
            .any(|c| c.abs() >= 0.875 * self.half_width)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldC {
    grid: Grid,
    values: Vec<C64>,
}

impl FieldC {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} samples, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidParameter("field has non-finite entries".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(&Point) -> C64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self { grid, values }
    }

    pub fn from_real(grid: Grid, re: &[f64]) -> Self {
        Self {
            grid,
            values: re.iter().map(|&r| C64::new(r, 0.0)).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn norm0(&self) -> f64 {
        (self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn scale(&mut self, a: C64) {
        self.values.iter_mut().for_each(|z| *z *= a);
    }

    pub fn scaled(&self, a: C64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a · other`.
    pub fn add_scaled(&mut self, a: C64, other: &FieldC) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(z, w)| *z += a * w);
        Ok(())
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm0();
        self.scaled(C64::new(1.0 / n, 0.0))
    }

    /// `f(−x₁, x₂)`.
    pub fn reflect(&self) -> Self {
        let values = (0..self.grid.len())
            .map(|i| self.values[self.grid.reflect_index(i)])
            .collect();
        Self {
            grid: self.grid,
            values,
        }
    }

    /// `∫ |f|^p dx` by quadrature.
    pub fn lp_integral(&self, p: f64) -> f64 {
        self.values.iter().map(|z| z.norm().powf(p)).sum::<f64>() * self.grid.cell_volume()
    }

    /// Mass in the outer layer of the box.
    pub fn tail_mass(&self) -> f64 {
        (0..self.grid.len())
            .filter(|&i| self.grid.in_boundary_layer(i))
            .map(|i| self.values[i].norm_sqr())
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `⟨f, g⟩ = Σ conj(f)·g·h^d`, conjugate-linear in the first slot.
pub fn inner(f: &FieldC, g: &FieldC) -> Result<C64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    Ok(inner_slices(f.values(), g.values()) * f.grid.cell_volume())
}

pub(crate) fn inner_slices(f: &[C64], g: &[C64]) -> C64 {
    f.iter().zip(g).map(|(a, b)| a.conj() * b).sum()
}

/// Forward/inverse FFT over the full `d`-dimensional grid. The inverse is
/// normalised so that `inverse(forward(f)) = f`.
#[derive(Clone)]
pub struct FftNd {
    n: usize,
    dim: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftNd {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n: grid.n,
            dim: grid.dim,
            fwd: planner.plan_fft_forward(grid.n),
            inv: planner.plan_fft_inverse(grid.n),
        }
    }

    fn transpose(&self, data: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                data.swap(i * n + j, j * n + i);
            }
        }
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [C64]) {
        plan.process(data);
        if self.dim == 2 {
            self.transpose(data);
            plan.process(data);
            self.transpose(data);
        }
    }

    pub fn forward(&self, data: &mut [C64]) {
        self.run(&self.fwd, data);
    }

    pub fn inverse(&self, data: &mut [C64]) {
        self.run(&self.inv, data);
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn scratch_len(&self) -> usize {
        self.fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len())
    }

    fn run_scratch(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [C64], scratch: &mut [C64]) {
        plan.process_with_scratch(data, scratch);
        if self.dim == 2 {
            self.transpose(data);
            plan.process_with_scratch(data, scratch);
            self.transpose(data);
        }
    }

    /// Allocation-free forward transform; `scratch` needs `scratch_len()` entries.
    pub fn forward_with_scratch(&self, data: &mut [C64], scratch: &mut [C64]) {
        self.run_scratch(&self.fwd, data, scratch);
    }

    /// Inverse transform without the `1/N` normalisation.
    pub fn inverse_unnormalized_with_scratch(&self, data: &mut [C64], scratch: &mut [C64]) {
        self.run_scratch(&self.inv, data, scratch);
    }
}

/// The discrete operator `H₀ = −ħ²Δ + V` with the spectral Laplacian.
#[derive(Clone)]
pub struct Hamiltonian {
    grid: Grid,
    hbar: f64,
    v_min: f64,
    potential: Arc<Vec<f64>>,
    kinetic: Arc<Vec<f64>>,
    fft: FftNd,
}

impl Hamiltonian {
    pub fn new(v: &Potential, grid: Grid, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("ħ must be positive, got {hbar}")));
        }
        if v.dim() != grid.dim {
            return Err(Error::InvalidParameter(format!(
                "potential is {}-dimensional but the grid is {}-dimensional",
                v.dim(),
                grid.dim
            )));
        }
        let potential: Vec<f64> = (0..grid.len()).map(|i| v.eval(&grid.coords(i))).collect();
        if potential.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("potential is not finite on the grid".into()));
        }
        let kinetic = grid.k_squared().into_iter().map(|k2| hbar * hbar * k2).collect();
        Ok(Self {
            grid,
            hbar,
            v_min: v.v_min(),
            potential: Arc::new(potential),
            kinetic: Arc::new(kinetic),
            fft: FftNd::new(&grid),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    /// Potential sampled on the grid.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Fourier symbol `ħ²|k|²` of the kinetic term.
    pub fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }

    pub fn fft(&self) -> &FftNd {
        &self.fft
    }

    pub fn apply_slice(&self, f: &[C64], out: &mut [C64]) {
        out.copy_from_slice(f);
        self.fft.forward(out);
        out.iter_mut()
            .zip(self.kinetic.iter())
            .for_each(|(z, k)| *z *= *k);
        self.fft.inverse(out);
        out.iter_mut()
            .zip(self.potential.iter().zip(f))
            .for_each(|(o, (v, x))| *o += *v * x);
    }

    pub fn apply(&self, f: &FieldC) -> Result<FieldC> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = vec![C64::new(0.0, 0.0); f.values().len()];
        self.apply_slice(f.values(), &mut out);
        Ok(FieldC {
            grid: self.grid,
            values: out,
        })
    }

    /// Real-symmetric action on real vectors (the operator maps real fields
    /// to real fields).
    pub fn apply_real(&self, f: &[f64], out: &mut [f64]) {
        let buf: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
        let mut res = vec![C64::new(0.0, 0.0); buf.len()];
        self.apply_slice(&buf, &mut res);
        out.iter_mut().zip(res).for_each(|(o, z)| *o = z.re);
    }

    /// `Re ⟨f, H₀ f⟩`.
    pub fn expectation(&self, f: &FieldC) -> Result<f64> {
        let hf = self.apply(f)?;
        Ok(inner(f, &hf)?.re)
    }
}

/// Convenience wrapper building the operator on the fly.
pub fn apply_h0(f: &FieldC, v: &Potential, hbar: f64) -> Result<FieldC> {
    Hamiltonian::new(v, *f.grid(), hbar)?.apply(f)
}

/// `‖f‖_s` for `s ∈ {0, 1}`: `‖f‖₀ = ‖f‖_{L²}`, `‖f‖₁² = ⟨f, H₀f⟩`.
pub fn norm_xs(f: &FieldC, h0: &Hamiltonian, s: u32) -> Result<f64> {
    match s {
        0 => Ok(f.norm0()),
        1 => {
            let e = h0.expectation(f)?;
            clamp_sqrt(e, f.norm0().powi(2).max(1.0))
        }
        _ => Err(Error::InvalidParameter(format!(
            "only s ∈ {{0, 1}} is supported, got {s}"
        ))),
    }
}

/// Square root of a quantity that is nonnegative in exact arithmetic.
/// Rounding noise down to `−1e−12·scale` is clamped to zero.
pub(crate) fn clamp_sqrt(x: f64, scale: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x.sqrt())
    } else if x >= -1e-12 * scale {
        Ok(0.0)
    } else {
        Err(Error::Consistency(format!(
            "negative quadratic form {x} for a positive operator"
        )))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    /// Strang split-step Fourier: potential+nonlinear phase, kinetic step,
    /// potential+nonlinear phase.
    #[default]
    FourierStrang,
    /// Strang splitting between the exact linear flow in the discrete
    /// eigenbasis of `H₀` and the exact nonlinear phase rotation.
    EigenbasisStrang,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub hbar: f64,
    pub epsilon: f64,
    pub sigma: u32,
    pub dim: usize,
    /// Evolve in `τ = t/ħ` (`iψ_τ = H₀ψ + εWψ`); otherwise in physical time.
    pub time_rescaled: bool,
    pub dt: f64,
    pub t_final: f64,
    pub output_stride: usize,
    pub snapshot_stride: Option<usize>,
    pub scheme: TimeScheme,
    /// Number of eigenmodes kept by the eigenbasis scheme (all when `None`).
    pub modes: Option<usize>,
}

impl SimConfig {
    pub fn new(hbar: f64, epsilon: f64, sigma: u32, dim: usize, dt: f64, t_final: f64) -> Self {
        Self {
            hbar,
            epsilon,
            sigma,
            dim,
            time_rescaled: true,
            dt,
            t_final,
            output_stride: 1,
            snapshot_stride: None,
            scheme: TimeScheme::FourierStrang,
            modes: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("ħ must be positive, got {}", self.hbar)));
        }
        if self.sigma < 1 {
            return Err(Error::InvalidParameter("σ must be a positive integer".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter("t_final must be nonnegative".into()));
        }
        if !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter("ε must be finite".into()));
        }
        if self.output_stride == 0 {
            return Err(Error::InvalidParameter("output stride must be ≥ 1".into()));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidParameter("dimension must be 1 or 2".into()));
        }
        Ok(())
    }

    /// Multiplier turning `H₀ + εW` into the generator of the configured time
    /// variable: 1 in rescaled time, `1/ħ` in physical time.
    pub fn generator_scale(&self) -> f64 {
        if self.time_rescaled {
            1.0
        } else {
            1.0 / self.hbar
        }
    }

    pub fn total_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// JSON sidecar of a field snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub n: usize,
    pub dim: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub hbar: f64,
    pub t: f64,
}

fn sidecar(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

/// Writes `field` as little-endian interleaved `(re, im)` f64 pairs to `bin`
/// and its metadata to the sibling `.json` file.
pub fn write_snapshot(bin: &Path, field: &FieldC, hbar: f64, t: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(bin)?);
    for z in field.values() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    let g = field.grid();
    let meta = SnapshotMeta {
        n: g.n,
        dim: g.dim,
        half_width: g.half_width,
        hbar,
        t,
    };
    let mut s = serde_json::to_string_pretty(&meta)?;
    s.push('\n');
    std::fs::write(sidecar(bin), s)?;
    Ok(())
}

pub fn read_snapshot(bin: &Path) -> Result<(FieldC, SnapshotMeta)> {
    let meta: SnapshotMeta = serde_json::from_str(&std::fs::read_to_string(sidecar(bin))?)?;
    let grid = Grid::new(meta.dim, meta.half_width, meta.n)?;
    let mut bytes = Vec::new();
    BufReader::new(File::open(bin)?).read_to_end(&mut bytes)?;
    if bytes.len() != 16 * grid.len() {
        return Err(Error::InvalidParameter(format!(
            "snapshot holds {} bytes, expected {}",
            bytes.len(),
            16 * grid.len()
        )));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            C64::new(re, im)
        })
        .collect();
    Ok((FieldC::new(grid, values)?, meta))
}
