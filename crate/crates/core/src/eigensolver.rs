//! Lowest eigenpairs of the discrete `H₀` and the tunnelling-doublet data
//! derived from them.
//!
//! The splitting `ω = (λ₂ − λ₁)/2` is exponentially small in `1/ħ`, far below
//! what any solver can resolve if it treats `λ₁, λ₂` as a near-degenerate
//! pair. `H₀` commutes with the reflection `x₁ → −x₁`, so we run a separate
//! Lanczos iteration in the even and in the odd sector: each sector ground
//! state is then well separated from the rest of its sector's spectrum, and
//! `ω` is obtained as a difference of two independently converged numbers.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{inner, FieldC, Grid, Hamiltonian};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::potential::{Point, Potential};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }

    fn sign(&self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Projects a real vector onto a parity sector in place: `v ← (v ± Rv)/2`.
pub fn symmetrize(grid: &Grid, parity: Parity, v: &mut [f64]) {
    let s = parity.sign();
    for i in 0..v.len() {
        let r = grid.reflect_index(i);
        if r > i {
            let avg = 0.5 * (v[i] + s * v[r]);
            v[i] = avg;
            v[r] = s * avg;
        } else if r == i {
            if parity == Parity::Odd {
                v[i] = 0.0;
            }
        }
    }
}

fn sector_dimension(grid: &Grid, parity: Parity) -> usize {
    (0..grid.len())
        .filter(|&i| {
            let r = grid.reflect_index(i);
            r > i || (r == i && parity == Parity::Even)
        })
        .count()
}

#[derive(Clone)]
pub struct SpectralData {
    pub hbar: f64,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<FieldC>,
    pub parities: Vec<Parity>,
    pub residuals: Vec<f64>,
    pub omega_mean: f64,
    pub omega_split: f64,
    pub phi_r: FieldC,
    pub phi_l: FieldC,
    pub seed: u64,
    /// Largest boundary-layer mass among `φ₁, φ₂`.
    pub tail_mass: f64,
    pub x_plus: Point,
    pub x_minus: Point,
    hamiltonian: Hamiltonian,
}

impl std::fmt::Debug for SpectralData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralData")
            .field("hbar", &self.hbar)
            .field("eigenvalues", &self.eigenvalues)
            .field("parities", &self.parities)
            .field("omega_mean", &self.omega_mean)
            .field("omega_split", &self.omega_split)
            .finish()
    }
}

impl SpectralData {
    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn grid(&self) -> &Grid {
        self.hamiltonian.grid()
    }

    pub fn phi1(&self) -> &FieldC {
        &self.eigenvectors[0]
    }

    pub fn phi2(&self) -> &FieldC {
        &self.eigenvectors[1]
    }

    /// Largest eigenvalue that was computed.
    pub fn lambda_top(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// Relative gap `g = min_{k≥3} (λ_k − Ω)/λ_k` over the computed spectrum.
    /// Since `(λ − Ω)/λ` increases with `λ`, this is `(λ₃ − Ω)/λ₃`.
    pub fn relative_gap(&self) -> Option<f64> {
        self.eigenvalues
            .iter()
            .skip(2)
            .map(|l| (l - self.omega_mean) / l)
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Beating period `2π/ω` in rescaled time.
    pub fn beat_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega_split
    }
}

struct SectorPair {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
}

/// Lanczos with full reorthogonalisation restricted to one parity sector.
/// Residuals are relative: `‖Hv − θv‖ / (|θ|‖v‖)`.
fn lanczos_sector(
    h: &Hamiltonian,
    parity: Parity,
    want: usize,
    tol: f64,
    seed: u64,
) -> Result<Vec<SectorPair>> {
    let grid = *h.grid();
    let len = grid.len();
    let sector_dim = sector_dimension(&grid, parity);
    let want = want.min(sector_dim);
    let max_krylov = sector_dim.min(1500);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (parity as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut start: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut total_iterations = 0;
    let mut best: Vec<f64> = vec![f64::INFINITY; want];
    for _restart in 0..8 {
        symmetrize(&grid, parity, &mut start);
        let nrm = dot(&start, &start).sqrt();
        start.iter_mut().for_each(|x| *x /= nrm);

        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; len];
        let mut next_check = (want + 20).max(30);
        let mut ritz: Option<(Vec<f64>, DMatrix<f64>)>;
        loop {
            let j = basis.len() - 1;
            h.apply_real(&basis[j], &mut w);
            symmetrize(&grid, parity, &mut w);
            let a = dot(&basis[j], &w);
            alpha.push(a);
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
            let b = dot(&w, &w).sqrt();
            total_iterations += 1;
            let m = alpha.len();
            let exhausted = m >= max_krylov || b <= 1e-12 * a.abs().max(1.0);
            if m >= next_check || exhausted {
                let (theta, s) = tridiagonal_eigen(&alpha, &beta);
                let converged = (0..want.min(m))
                    .all(|i| (b * s[(m - 1, i)]).abs() <= 0.1 * tol * theta[i].abs());
                ritz = Some((theta, s));
                if (converged && m >= want) || exhausted {
                    break;
                }
                next_check = m + (m / 2).max(10);
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }

        let (_, s) = ritz.unwrap();
        let m = alpha.len();
        let mut pairs = Vec::with_capacity(want);
        for i in 0..want.min(m) {
            let mut y = vec![0.0; len];
            for (k, q) in basis.iter().take(m).enumerate() {
                axpy(s[(k, i)], q, &mut y);
            }
            symmetrize(&grid, parity, &mut y);
            let nrm = dot(&y, &y).sqrt();
            y.iter_mut().for_each(|x| *x /= nrm);
            let mut hy = vec![0.0; len];
            h.apply_real(&y, &mut hy);
            let lam = dot(&y, &hy);
            let res = hy
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - lam * b).powi(2))
                .sum::<f64>()
                .sqrt()
                / lam.abs().max(f64::MIN_POSITIVE);
            pairs.push(SectorPair {
                value: lam,
                vector: y,
                residual: res,
            });
        }
        for (b, p) in best.iter_mut().zip(&pairs) {
            *b = b.min(p.residual);
        }
        if pairs.len() == want && pairs.iter().all(|p| p.residual <= tol) {
            return Ok(pairs);
        }
        // Explicit restart from the sum of the current Ritz vectors.
        start = vec![0.0; len];
        for p in &pairs {
            axpy(1.0, &p.vector, &mut start);
        }
    }
    Err(Error::NotConverged {
        iterations: total_iterations,
        residuals: best,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Ascending eigenvalues and eigenvectors (columns) of the Lanczos matrix.
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Fixes the sign of an eigenvector: positive at the grid point nearest `x₊`,
/// or, when that value vanishes (odd states of a single well), positive
/// half-space sum over `x₁ > 0`, or finally a positive largest entry.
fn fix_sign(grid: &Grid, x_plus: &Point, v: &mut [f64]) {
    let at = v[nearest_index(grid, x_plus)];
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut s = if at.abs() > 1e-8 * peak { at } else { 0.0 };
    if s == 0.0 {
        s = (0..grid.len())
            .filter(|&i| grid.coords(i)[0] > 0.0)
            .map(|i| v[i])
            .sum();
        if s.abs() <= 1e-8 * peak {
            s = *v
                .iter()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(&1.0);
        }
    }
    if s < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn nearest_index(grid: &Grid, x: &Point) -> usize {
    let h = grid.spacing();
    let axis = |c: f64| (((c + grid.half_width) / h).round() as isize).rem_euclid(grid.n as isize) as usize;
    match grid.dim {
        1 => axis(x[0]),
        _ => axis(x[0]) * grid.n + axis(x[1]),
    }
}

/// Lowest `k ≥ 2` eigenpairs of `H₀`. `φ₁` is the even-sector and `φ₂` the
/// odd-sector ground state; the remaining `k − 2` states are merged from
/// both sectors in ascending order. `tol` bounds `‖H₀φ − λφ‖₀ / λ`.
pub fn lowest_eigenpairs(
    v: &Potential,
    grid: &Grid,
    hbar: f64,
    k: usize,
    tol: f64,
    seed: u64,
) -> Result<SpectralData> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need k ≥ 2 eigenpairs, got {k}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let h = Hamiltonian::new(v, *grid, hbar)?;
    let per_sector = k - 1;
    let even = lanczos_sector(&h, Parity::Even, per_sector, tol, seed)?;
    let odd = lanczos_sector(&h, Parity::Odd, per_sector, tol, seed)?;
    if even.is_empty() || odd.is_empty() {
        return Err(Error::InvalidParameter("grid too small for both parity sectors".into()));
    }
    if even[0].value >= odd[0].value {
        return Err(Error::Consistency(format!(
            "even ground state {} is not below odd ground state {}",
            even[0].value, odd[0].value
        )));
    }

    let mut even = even.into_iter().map(|p| (p, Parity::Even));
    let mut odd = odd.into_iter().map(|p| (p, Parity::Odd));
    let first_even = even.next().unwrap();
    let first_odd = odd.next().unwrap();
    let mut rest: Vec<(SectorPair, Parity)> = even.chain(odd).collect();
    rest.sort_by(|a, b| a.0.value.total_cmp(&b.0.value));
    rest.truncate(k - 2);

    let scale = 1.0 / grid.cell_volume().sqrt();
    let x_plus = v.x_plus();
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    let mut parities = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for (mut pair, parity) in std::iter::once(first_even)
        .chain(std::iter::once(first_odd))
        .chain(rest)
    {
        fix_sign(grid, &x_plus, &mut pair.vector);
        let re: Vec<f64> = pair.vector.iter().map(|x| x * scale).collect();
        eigenvalues.push(pair.value);
        eigenvectors.push(FieldC::from_real(*grid, &re));
        parities.push(parity);
        residuals.push(pair.residual);
    }

    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut phi_r = eigenvectors[0].scaled(C64::new(r2, 0.0));
    phi_r.add_scaled(C64::new(r2, 0.0), &eigenvectors[1])?;
    let mut phi_l = eigenvectors[0].scaled(C64::new(r2, 0.0));
    phi_l.add_scaled(C64::new(-r2, 0.0), &eigenvectors[1])?;
    let tail_mass = eigenvectors[0].tail_mass().max(eigenvectors[1].tail_mass());

    Ok(SpectralData {
        hbar,
        omega_mean: 0.5 * (eigenvalues[0] + eigenvalues[1]),
        omega_split: 0.5 * (eigenvalues[1] - eigenvalues[0]),
        eigenvalues,
        eigenvectors,
        parities,
        residuals,
        phi_r,
        phi_l,
        seed,
        tail_mass,
        x_plus,
        x_minus: v.x_minus(),
        hamiltonian: h,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalizationReport {
    pub radius: f64,
    /// `∫_{D_r(x₊)} |φ_R|²`
    pub mass_r_at_plus: f64,
    /// `∫_{D_r(x₋)} |φ_R|²`
    pub mass_r_at_minus: f64,
    /// `∫_{D_r(x₋)} |φ_L|²`
    pub mass_l_at_minus: f64,
    /// `‖φ_R φ_L‖_{L^∞}` over the grid.
    pub overlap_sup: f64,
}

pub fn localization_report(s: &SpectralData, v: &Potential, r: f64) -> Result<LocalizationReport> {
    let sep = v.well_separation();
    if !(r > 0.0 && r < sep / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "radius {r} must lie in (0, {})",
            sep / 2.0
        )));
    }
    let grid = *s.grid();
    let dim = grid.dim;
    let inside = |i: usize, c: &Point| {
        let x = grid.coords(i);
        (0..dim).map(|j| (x[j] - c[j]).powi(2)).sum::<f64>() <= r * r
    };
    let mass = |f: &FieldC, c: &Point| {
        (0..grid.len())
            .filter(|&i| inside(i, c))
            .map(|i| f.values()[i].norm_sqr())
            .sum::<f64>()
            * grid.cell_volume()
    };
    let overlap_sup = s
        .phi_r
        .values()
        .iter()
        .zip(s.phi_l.values())
        .map(|(a, b)| (a * b).norm())
        .fold(0.0, f64::max);
    Ok(LocalizationReport {
        radius: r,
        mass_r_at_plus: mass(&s.phi_r, &v.x_plus()),
        mass_r_at_minus: mass(&s.phi_r, &v.x_minus()),
        mass_l_at_minus: mass(&s.phi_l, &v.x_minus()),
        overlap_sup,
    })
}

/// Below this the splitting cannot be certified positive in double precision.
pub const OMEGA_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub hbar: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub omega: f64,
    #[serde(rename = "Omega")]
    pub omega_mean: f64,
    /// False when `ω` fell below [`OMEGA_FLOOR`] and was left out of the fit.
    pub included: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Fit of `ln ω` against `1/ħ`; the slope estimates `−Γ`.
    pub fit: Option<LinearFit>,
    pub excluded_below_floor: usize,
    /// `R² ≥ 0.99`.
    pub r2_ok: bool,
    /// Every splitting is small against the next level spacing
    /// (`ω ≤ 0.1·(λ₃ − λ₂)`), i.e. the lowest pair is a tunnelling doublet.
    pub doublet_ok: bool,
}

impl SweepTable {
    pub fn accepted(&self) -> bool {
        self.r2_ok && self.doublet_ok && self.fit.is_some()
    }

    /// CSV with columns `hbar,lambda1,lambda2,omega,Omega,gamma_fit_slope,r2`.
    pub fn to_csv(&self) -> String {
        let (slope, r2) = self
            .fit
            .map(|f| (format!("{:.17e}", f.slope), format!("{:.17e}", f.r2)))
            .unwrap_or_else(|| ("nan".into(), "nan".into()));
        let mut out = String::from("hbar,lambda1,lambda2,omega,Omega,gamma_fit_slope,r2\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{}\n",
                r.hbar, r.lambda1, r.lambda2, r.omega, r.omega_mean, slope, r2
            ));
        }
        out
    }
}

/// Spectra over a list of `ħ` values (independent solves run in parallel and
/// are merged in input order) and the fit `ln ω = intercept + slope/ħ`.
pub fn splitting_sweep(
    v: &Potential,
    grid: &Grid,
    hbars: &[f64],
    tol: f64,
    seed: u64,
) -> Result<SweepTable> {
    if hbars.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "a splitting sweep needs at least 4 values of ħ, got {}",
            hbars.len()
        )));
    }
    let spectra: Vec<Result<SpectralData>> = hbars
        .par_iter()
        .map(|&hb| lowest_eigenpairs(v, grid, hb, 3, tol, seed))
        .collect();
    let rows = spectra
        .into_iter()
        .map(|s| s.map(|s| SweepRow::from_spectrum(&s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable::from_rows(rows))
}

impl SweepRow {
    /// Row for a spectrum with at least three eigenpairs.
    pub fn from_spectrum(s: &SpectralData) -> Self {
        Self {
            hbar: s.hbar,
            lambda1: s.eigenvalues[0],
            lambda2: s.eigenvalues[1],
            lambda3: s.eigenvalues.get(2).copied().unwrap_or(f64::INFINITY),
            omega: s.omega_split,
            omega_mean: s.omega_mean,
            included: s.omega_split > OMEGA_FLOOR,
        }
    }
}

impl SweepTable {
    /// Fits `ln ω` against `1/ħ` over the rows above the floor.
    pub fn from_rows(rows: Vec<SweepRow>) -> Self {
        let (x, y): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.included)
            .map(|r| (1.0 / r.hbar, r.omega.ln()))
            .unzip();
        let fit = linear_fit(&x, &y);
        let excluded_below_floor = rows.iter().filter(|r| !r.included).count();
        let doublet_ok = rows
            .iter()
            .all(|r| r.omega <= 0.1 * (r.lambda3 - r.lambda2));
        Self {
            r2_ok: fit.map(|f| f.r2 >= 0.99).unwrap_or(false),
            doublet_ok,
            rows,
            fit,
            excluded_below_floor,
        }
    }
}

/// `η = ε ħ^{−dσ/2} / ω`.
pub fn effective_eta(epsilon: f64, hbar: f64, sigma: u32, dim: usize, omega_split: f64) -> Result<f64> {
    if !(omega_split > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "splitting must be positive, got {omega_split}"
        )));
    }
    Ok(epsilon * hbar.powf(-(dim as f64) * sigma as f64 / 2.0) / omega_split)
}

/// Inverse of [`effective_eta`].
pub fn epsilon_for_eta(eta: f64, hbar: f64, sigma: u32, dim: usize, omega_split: f64) -> f64 {
    eta * omega_split * hbar.powf(dim as f64 * sigma as f64 / 2.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CSigmaConvention {
    /// `∫|φ_R|^{2σ+2}`, the coefficient obtained by projecting
    /// `ε|ψ|^{2σ}ψ` onto `φ_R`.
    #[default]
    Projection,
    /// `‖φ_R^{2σ}‖²_{L²} = ∫|φ_R|^{4σ}`.
    FourthPower,
}

/// Self-interaction coefficient of the two-mode model.
pub fn c_sigma(s: &SpectralData, sigma: u32, convention: CSigmaConvention) -> Result<f64> {
    let p = match convention {
        CSigmaConvention::Projection => 2.0 * sigma as f64 + 2.0,
        CSigmaConvention::FourthPower => 4.0 * sigma as f64,
    };
    let cr = s.phi_r.lp_integral(p);
    let cl = s.phi_l.lp_integral(p);
    if (cr - cl).abs() > 1e-10 * cr.max(1.0) {
        return Err(Error::Consistency(format!(
            "C_σ differs between the wells: {cr} vs {cl}"
        )));
    }
    Ok(cr)
}

/// Orthonormality defect `max_{j≠k} |⟨φ_j, φ_k⟩|` and `max_j |‖φ_j‖ − 1|`.
pub fn orthonormality_defect(s: &SpectralData) -> Result<(f64, f64)> {
    let mut off = 0.0f64;
    let mut diag = 0.0f64;
    for (j, a) in s.eigenvectors.iter().enumerate() {
        for (k, b) in s.eigenvectors.iter().enumerate() {
            let ip = inner(a, b)?;
            if j == k {
                diag = diag.max((ip.norm() - 1.0).abs());
            } else {
                off = off.max(ip.norm());
            }
        }
    }
    Ok((off, diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic() -> Potential {
        Potential::builtin_quartic(1.0, 1.0, &[]).unwrap()
    }

    #[test]
    fn symmetrizer_idempotent_and_sectors_orthogonal() {
        let g = Grid::new(2, 3.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut e = base.clone();
        symmetrize(&g, Parity::Even, &mut e);
        let mut e2 = e.clone();
        symmetrize(&g, Parity::Even, &mut e2);
        assert_eq!(e, e2);
        let mut o = base.clone();
        symmetrize(&g, Parity::Odd, &mut o);
        assert!(dot(&e, &o).abs() < 1e-12);
        let sum: Vec<f64> = e.iter().zip(&o).map(|(a, b)| a + b).collect();
        for (a, b) in sum.iter().zip(&base) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn harmonic_spectrum() {
        let hbar = 0.1;
        let g = Grid::new(1, 8.0, 512).unwrap();
        let v = Potential::harmonic(1.0, 1).unwrap();
        let s = lowest_eigenpairs(&v, &g, hbar, 3, 1e-10, 1).unwrap();
        for (n, l) in s.eigenvalues.iter().enumerate() {
            let exact = 1.0 + hbar * (2.0 * n as f64 + 1.0);
            assert!((l - exact).abs() / exact < 1e-8, "{n}: {l} vs {exact}");
        }
        assert_eq!(s.parities, vec![Parity::Even, Parity::Odd, Parity::Even]);
    }

    #[test]
    fn k_must_be_at_least_two() {
        let g = Grid::new(1, 4.0, 64).unwrap();
        assert!(lowest_eigenpairs(&quartic(), &g, 0.2, 1, 1e-10, 0).is_err());
    }

    #[test]
    fn quartic_doublet_structure() {
        let hbar = 0.05;
        let g = Grid::new(1, 4.0, 256).unwrap();
        let v = quartic();
        let s = lowest_eigenpairs(&v, &g, hbar, 4, 1e-10, 7).unwrap();
        // Well-bottom oscillator: V ≈ 1 + 4β a²(x ∓ a)², λ ≈ 1 + 2ħ√β a.
        assert!((s.eigenvalues[0] - 1.1).abs() < 10.0 * hbar * hbar);
        assert!(s.omega_split > 0.0 && s.omega_split < 1e-3);
        let (off, diag) = orthonormality_defect(&s).unwrap();
        assert!(off < 1e-8 && diag < 1e-10);
        for (l, r) in s.eigenvalues.iter().zip(&s.residuals) {
            assert!(*r <= 1e-10, "residual {r} for {l}");
        }
        let i = nearest_index(&g, &v.x_plus());
        assert!(s.phi1().values()[i].re > 0.0 && s.phi2().values()[i].re > 0.0);
        let mirrored = s.phi_r.reflect();
        for (a, b) in mirrored.values().iter().zip(s.phi_l.values()) {
            assert!((a - b).norm() < 1e-10);
        }
        let phi1 = s.phi1().values();
        let phi2 = s.phi2().values();
        for idx in 0..g.len() {
            let r = g.reflect_index(idx);
            assert!((phi1[idx] - phi1[r]).norm() < 1e-12);
            assert!((phi2[idx] + phi2[r]).norm() < 1e-12);
        }
    }

    #[test]
    fn localization() {
        let v = quartic();
        let g = Grid::new(1, 4.0, 256).unwrap();
        let s = lowest_eigenpairs(&v, &g, 0.05, 2, 1e-10, 0).unwrap();
        let rep = localization_report(&s, &v, 0.5).unwrap();
        assert!(rep.mass_r_at_plus >= 0.99);
        assert!(rep.mass_r_at_plus + rep.mass_r_at_minus <= 1.0 + 1e-10);
        assert!(localization_report(&s, &v, 1.5).is_err());
    }

    #[test]
    fn eta_arithmetic() {
        assert_eq!(effective_eta(0.0, 0.1, 1, 1, 1e-3).unwrap(), 0.0);
        let w = 2e-4;
        let eps = w * 0.1f64.powf(0.5);
        assert!((effective_eta(eps, 0.1, 1, 1, w).unwrap() - 1.0).abs() < 1e-12);
        let e = effective_eta(1e-4, 0.1, 1, 1, 1e-3).unwrap();
        assert!((e - 0.31622776601683794).abs() < 1e-12);
        assert!(effective_eta(1.0, 0.1, 1, 1, 0.0).is_err());
        assert!((epsilon_for_eta(e, 0.1, 1, 1, 1e-3) - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn c_sigma_conventions_agree_at_sigma_one() {
        let v = quartic();
        let g = Grid::new(1, 4.0, 128).unwrap();
        let s = lowest_eigenpairs(&v, &g, 0.15, 2, 1e-10, 0).unwrap();
        let a = c_sigma(&s, 1, CSigmaConvention::Projection).unwrap();
        let b = c_sigma(&s, 1, CSigmaConvention::FourthPower).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((s.phi_l.lp_integral(4.0) - a).abs() < 1e-10);
        let c2 = c_sigma(&s, 2, CSigmaConvention::Projection).unwrap();
        let c2p = c_sigma(&s, 2, CSigmaConvention::FourthPower).unwrap();
        assert!(c2 < c2p);
    }
}
