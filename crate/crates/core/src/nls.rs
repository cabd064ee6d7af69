//! Time integration of `iψ_τ = H₀ψ + ε|ψ|^{2σ}ψ` (or `iħψ_t = …` in physical
//! time) by Strang splitting, with conserved-quantity and projection
//! observables recorded along the way.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::diagnostics::project;
use crate::discretization::{norm_xs, FieldC, FftNd, Hamiltonian, SimConfig, TimeScheme};
use crate::eigensolver::SpectralData;
use crate::error::{Error, Result};

/// States with more boundary-layer mass than this are rejected at setup.
pub const TAIL_MASS_LIMIT: f64 = 1e-10;

/// Largest grid accepted by the dense eigenbasis scheme.
pub const EIGENBASIS_MAX_POINTS: usize = 2048;

/// `Re⟨ψ, H₀ψ⟩ + (ε/(1+σ)) ∫|ψ|^{2σ+2}`.
pub fn energy(psi: &FieldC, cfg: &SimConfig, h0: &Hamiltonian) -> Result<f64> {
    let e0 = h0.expectation(psi)?;
    let p = psi.lp_integral(2.0 * cfg.sigma as f64 + 2.0) / (1.0 + cfg.sigma as f64);
    Ok(e0 + cfg.epsilon * p)
}

/// `(sin θ, cos θ)`, by series for tiny angles. The truncation keeps
/// `sin² + cos² = 1` to `O(θ⁶)`.
#[inline]
fn sin_cos_small(theta: f64) -> (f64, f64) {
    if theta.abs() < 1e-4 {
        let t2 = theta * theta;
        (theta * (1.0 - t2 / 6.0), 1.0 - 0.5 * t2 * (1.0 - t2 / 12.0))
    } else {
        theta.sin_cos()
    }
}

/// Rotates each value by `exp(−i·tau·(V + ε|ψ|^{2σ}))`.
fn phase_rotate(values: &mut [C64], potential: &[f64], tau: f64, eps: f64, sigma: i32) {
    for (z, v) in values.iter_mut().zip(potential) {
        let w = v + eps * z.norm_sqr().powi(sigma);
        let (s, c) = (tau * w).sin_cos();
        *z *= C64::new(c, -s);
    }
}

/// Split-step Fourier propagator. Consecutive potential half-steps are
/// merged, which is exact because the phase rotation leaves `|ψ|` unchanged.
pub struct FourierStrang {
    dt: f64,
    eps: f64,
    sigma: i32,
    potential: Vec<f64>,
    kinetic_phase: Vec<C64>,
    fft: FftNd,
    scratch: Vec<C64>,
}

impl FourierStrang {
    pub fn new(cfg: &SimConfig, h0: &Hamiltonian) -> Self {
        let s = cfg.generator_scale();
        let norm = 1.0 / h0.grid().len() as f64;
        let kinetic_phase = h0
            .kinetic()
            .iter()
            .map(|k| C64::from_polar(norm, -s * cfg.dt * k))
            .collect();
        let fft = h0.fft().clone();
        let scratch = vec![C64::new(0.0, 0.0); fft.scratch_len()];
        Self {
            dt: s * cfg.dt,
            eps: cfg.epsilon,
            sigma: cfg.sigma as i32,
            potential: h0.potential().to_vec(),
            kinetic_phase,
            fft,
            scratch,
        }
    }

    fn kinetic(&mut self, values: &mut [C64]) {
        self.fft.forward_with_scratch(values, &mut self.scratch);
        values
            .iter_mut()
            .zip(&self.kinetic_phase)
            .for_each(|(z, p)| *z *= p);
        self.fft
            .inverse_unnormalized_with_scratch(values, &mut self.scratch);
    }

    pub fn advance(&mut self, values: &mut [C64], steps: usize) {
        if steps == 0 {
            return;
        }
        phase_rotate(values, &self.potential, 0.5 * self.dt, self.eps, self.sigma);
        for k in 0..steps {
            self.kinetic(values);
            let tau = if k + 1 < steps { self.dt } else { 0.5 * self.dt };
            phase_rotate(values, &self.potential, tau, self.eps, self.sigma);
        }
    }
}

/// Strang splitting between the exact linear flow in the discrete eigenbasis
/// of `H₀` (optionally truncated to the lowest `K` modes) and the exact
/// nonlinear phase rotation. Avoids the potential/kinetic commutator error of
/// the Fourier scheme, so it stays accurate at large `dt`.
pub struct EigenbasisStrang {
    dt: f64,
    eps: f64,
    sigma: i32,
    n: usize,
    modes: usize,
    /// Mode-major Euclidean-orthonormal eigenvectors.
    basis: Vec<f64>,
    half_phase: Vec<C64>,
    full_phase: Vec<C64>,
    eigenvalues: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
    cr: Vec<f64>,
    ci: Vec<f64>,
}

impl EigenbasisStrang {
    pub fn new(cfg: &SimConfig, h0: &Hamiltonian) -> Result<Self> {
        let n = h0.grid().len();
        if n > EIGENBASIS_MAX_POINTS {
            return Err(Error::InvalidParameter(format!(
                "eigenbasis scheme limited to {EIGENBASIS_MAX_POINTS} grid points, got {n}"
            )));
        }
        let modes = cfg.modes.unwrap_or(n);
        if modes < 2 || modes > n {
            return Err(Error::InvalidParameter(format!(
                "mode count must lie in [2, {n}], got {modes}"
            )));
        }
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            h0.apply_real(&e, &mut col);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        let m = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut basis = Vec::with_capacity(modes * n);
        let mut eigenvalues = Vec::with_capacity(modes);
        for &k in order.iter().take(modes) {
            basis.extend(eig.eigenvectors.column(k).iter());
            eigenvalues.push(eig.eigenvalues[k]);
        }
        let s = cfg.generator_scale();
        let half_phase = eigenvalues
            .iter()
            .map(|l| C64::from_polar(1.0, -0.5 * s * cfg.dt * l))
            .collect();
        let full_phase = eigenvalues
            .iter()
            .map(|l| C64::from_polar(1.0, -s * cfg.dt * l))
            .collect();
        Ok(Self {
            dt: s * cfg.dt,
            eps: cfg.epsilon,
            sigma: cfg.sigma as i32,
            n,
            modes,
            basis,
            half_phase,
            full_phase,
            eigenvalues,
            re: vec![0.0; n],
            im: vec![0.0; n],
            cr: vec![0.0; modes],
            ci: vec![0.0; modes],
        })
    }

    /// Eigenvalues of the retained modes, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn analyse(&mut self) {
        for k in 0..self.modes {
            let u = &self.basis[k * self.n..(k + 1) * self.n];
            let (mut a, mut b) = (0.0, 0.0);
            for i in 0..self.n {
                a += u[i] * self.re[i];
                b += u[i] * self.im[i];
            }
            self.cr[k] = a;
            self.ci[k] = b;
        }
    }

    fn synthesise(&mut self) {
        self.re.iter_mut().for_each(|x| *x = 0.0);
        self.im.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..self.modes {
            let u = &self.basis[k * self.n..(k + 1) * self.n];
            let (a, b) = (self.cr[k], self.ci[k]);
            for i in 0..self.n {
                self.re[i] += u[i] * a;
                self.im[i] += u[i] * b;
            }
        }
    }

    fn rotate_modes(&mut self, full: bool) {
        let phase = if full { &self.full_phase } else { &self.half_phase };
        for k in 0..self.modes {
            let z = C64::new(self.cr[k], self.ci[k]) * phase[k];
            self.cr[k] = z.re;
            self.ci[k] = z.im;
        }
    }

    fn nonlinear(&mut self) {
        let tau = self.dt * self.eps;
        for i in 0..self.n {
            let (x, y) = (self.re[i], self.im[i]);
            let (s, c) = sin_cos_small(tau * (x * x + y * y).powi(self.sigma));
            self.re[i] = c * x + s * y;
            self.im[i] = c * y - s * x;
        }
    }

    /// Fraction of `‖values‖²` outside the retained modes.
    pub fn truncation_loss(&mut self, values: &[C64]) -> f64 {
        self.load(values);
        let total: f64 = values.iter().map(|z| z.norm_sqr()).sum();
        let kept: f64 = self
            .cr
            .iter()
            .zip(&self.ci)
            .map(|(a, b)| a * a + b * b)
            .sum();
        if total == 0.0 {
            0.0
        } else {
            (1.0 - kept / total).max(0.0)
        }
    }

    fn load(&mut self, values: &[C64]) {
        for (i, z) in values.iter().enumerate() {
            self.re[i] = z.re;
            self.im[i] = z.im;
        }
        self.analyse();
    }

    pub fn advance(&mut self, values: &mut [C64], steps: usize) {
        if steps == 0 {
            return;
        }
        self.load(values);
        if self.eps == 0.0 {
            for k in 0..self.modes {
                let z = C64::new(self.cr[k], self.ci[k])
                    * C64::from_polar(1.0, -self.dt * steps as f64 * self.eigenvalues[k]);
                self.cr[k] = z.re;
                self.ci[k] = z.im;
            }
        } else {
            self.rotate_modes(false);
            for k in 0..steps {
                self.synthesise();
                self.nonlinear();
                self.analyse();
                self.rotate_modes(k + 1 < steps);
            }
        }
        self.synthesise();
        for (i, z) in values.iter_mut().enumerate() {
            *z = C64::new(self.re[i], self.im[i]);
        }
    }
}

enum Propagator {
    Fourier(FourierStrang),
    Eigen(Box<EigenbasisStrang>),
}

impl Propagator {
    fn new(cfg: &SimConfig, h0: &Hamiltonian) -> Result<Self> {
        Ok(match cfg.scheme {
            TimeScheme::FourierStrang => Self::Fourier(FourierStrang::new(cfg, h0)),
            TimeScheme::EigenbasisStrang => Self::Eigen(Box::new(EigenbasisStrang::new(cfg, h0)?)),
        })
    }

    fn advance(&mut self, values: &mut [C64], steps: usize) {
        match self {
            Self::Fourier(p) => p.advance(values, steps),
            Self::Eigen(p) => p.advance(values, steps),
        }
    }
}

/// One Strang split-step Fourier step.
pub fn step(psi: &FieldC, cfg: &SimConfig, h0: &Hamiltonian) -> Result<FieldC> {
    cfg.validate()?;
    if psi.grid() != h0.grid() {
        return Err(Error::GridMismatch);
    }
    let mut out = psi.clone();
    FourierStrang::new(cfg, h0).advance(out.values_mut(), 1);
    if out.values().iter().any(|z| !z.is_finite()) {
        return Err(Error::BlowUp {
            t: cfg.dt,
            reason: "non-finite field after one step".into(),
            partial: Box::default(),
        });
    }
    Ok(out)
}

/// Which observables `evolve` records.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ObserverSet {
    pub energy: bool,
    pub projections: bool,
}

impl Default for ObserverSet {
    fn default() -> Self {
        Self {
            energy: true,
            projections: true,
        }
    }
}

/// Per-time record. Observables that were not requested are `NaN`.
#[derive(Clone, Copy, Debug)]
pub struct Observables {
    pub t: f64,
    pub norm: f64,
    pub energy: f64,
    pub zeta1: C64,
    pub zeta2: C64,
    pub mu: f64,
    pub pop_r: f64,
    pub pop_l: f64,
    pub h0_gap: f64,
    /// `‖ψ‖₁`.
    pub x1_norm: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub records: Vec<Observables>,
    pub snapshots: Vec<(f64, FieldC)>,
    pub steps_taken: usize,
    /// Field at the last recorded time.
    pub last: Option<FieldC>,
}

impl Trajectory {
    /// CSV with columns `t,norm,energy,re_zeta1,im_zeta1,re_zeta2,im_zeta2,mu,pop_R,pop_L,h0_gap`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("t,norm,energy,re_zeta1,im_zeta1,re_zeta2,im_zeta2,mu,pop_R,pop_L,h0_gap\n");
        for r in &self.records {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.t, r.norm, r.energy, r.zeta1.re, r.zeta1.im, r.zeta2.re, r.zeta2.im, r.mu, r.pop_r,
                r.pop_l, r.h0_gap
            ));
        }
        out
    }

    pub fn column(&self, f: impl Fn(&Observables) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    /// `max_t |N(t) − N(0)|`.
    pub fn norm_drift(&self) -> f64 {
        max_drift(&self.column(|r| r.norm))
    }

    /// `max_t |E(t) − E(0)|`.
    pub fn energy_drift(&self) -> f64 {
        max_drift(&self.column(|r| r.energy))
    }

    pub fn x1_norm_max(&self) -> f64 {
        self.records.iter().map(|r| r.x1_norm).fold(0.0, f64::max)
    }
}

fn max_drift(x: &[f64]) -> f64 {
    x.first()
        .map(|x0| x.iter().map(|v| (v - x0).abs()).fold(0.0, f64::max))
        .unwrap_or(0.0)
}

fn observe(
    psi: &FieldC,
    t: f64,
    cfg: &SimConfig,
    s: &SpectralData,
    observers: &ObserverSet,
) -> Result<Observables> {
    let h0 = s.hamiltonian();
    let nan = f64::NAN;
    let cnan = C64::new(nan, nan);
    let mut rec = Observables {
        t,
        norm: psi.norm0().powi(2),
        energy: nan,
        zeta1: cnan,
        zeta2: cnan,
        mu: nan,
        pop_r: nan,
        pop_l: nan,
        h0_gap: nan,
        x1_norm: norm_xs(psi, h0, 1)?,
    };
    if observers.energy {
        rec.energy = energy(psi, cfg, h0)?;
    }
    if observers.projections {
        let pd = project(psi, s)?;
        rec.zeta1 = pd.zeta1;
        rec.zeta2 = pd.zeta2;
        rec.mu = pd.mu;
        rec.pop_r = pd.pop_r;
        rec.pop_l = pd.pop_l;
        rec.h0_gap = pd.h0_gap;
    }
    Ok(rec)
}

/// Evolves `psi0` to `cfg.t_final`, recording observables every
/// `cfg.output_stride` steps and at the final step.
pub fn evolve(
    psi0: &FieldC,
    cfg: &SimConfig,
    s: &SpectralData,
    observers: &ObserverSet,
) -> Result<Trajectory> {
    cfg.validate()?;
    if psi0.grid() != s.grid() || cfg.dim != s.grid().dim {
        return Err(Error::GridMismatch);
    }
    let n0 = psi0.norm0();
    if (n0 * n0 - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "initial datum must be normalised, ‖ψ⁰‖₀² = {}",
            n0 * n0
        )));
    }
    if s.tail_mass > TAIL_MASS_LIMIT || psi0.tail_mass() > TAIL_MASS_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "boundary-layer mass exceeds {TAIL_MASS_LIMIT:e}; enlarge the box"
        )));
    }
    let mut prop = Propagator::new(cfg, s.hamiltonian())?;
    if let Propagator::Eigen(p) = &mut prop {
        let loss = p.truncation_loss(psi0.values());
        if loss > 1e-8 {
            return Err(Error::InvalidParameter(format!(
                "initial datum has {loss:e} of its mass outside the retained modes"
            )));
        }
    }
    let mut traj = Trajectory::default();
    let mut psi = psi0.clone();
    let first = observe(&psi, 0.0, cfg, s, observers)?;
    let x1_limit = 10.0 * first.x1_norm;
    traj.times.push(0.0);
    traj.records.push(first);
    if cfg.snapshot_stride.is_some() {
        traj.snapshots.push((0.0, psi.clone()));
    }
    let steps = cfg.total_steps();
    let mut done = 0;
    while done < steps {
        let chunk = cfg.output_stride.min(steps - done);
        prop.advance(psi.values_mut(), chunk);
        done += chunk;
        let t = done as f64 * cfg.dt;
        traj.steps_taken = done;
        if psi.values().iter().any(|z| !z.is_finite()) {
            return Err(Error::BlowUp {
                t,
                reason: "non-finite field value".into(),
                partial: Box::new(traj),
            });
        }
        let rec = observe(&psi, t, cfg, s, observers)?;
        traj.times.push(t);
        traj.records.push(rec);
        if let Some(ss) = cfg.snapshot_stride {
            if ss > 0 && done % ss == 0 {
                traj.snapshots.push((t, psi.clone()));
            }
        }
        if !(rec.x1_norm <= x1_limit) {
            traj.last = Some(psi);
            return Err(Error::BlowUp {
                t,
                reason: format!(
                    "‖ψ‖₁ = {:e} exceeds ten times its initial value {:e}",
                    rec.x1_norm,
                    x1_limit / 10.0
                ),
                partial: Box::new(traj),
            });
        }
    }
    traj.last = Some(psi);
    Ok(traj)
}

/// Closed-form linear (`ε = 0`) solution started from `ζ_Rφ_R + ζ_Lφ_L`:
/// `e^{−iΩt}[(ζ_Rφ_R + ζ_Lφ_L) cos ωt + i(ζ_Lφ_R + ζ_Rφ_L) sin ωt]`, with `t`
/// replaced by `t/ħ` in physical time.
pub fn linear_beating_exact(
    zeta_r: C64,
    zeta_l: C64,
    t: f64,
    s: &SpectralData,
    time_rescaled: bool,
) -> Result<FieldC> {
    let tt = if time_rescaled { t } else { t / s.hbar };
    let (sn, cs) = (s.omega_split * tt).sin_cos();
    let global = C64::from_polar(1.0, -s.omega_mean * tt);
    let i = C64::new(0.0, 1.0);
    let mut out = FieldC::zeros(*s.grid());
    out.add_scaled(global * (zeta_r * cs + i * zeta_l * sn), &s.phi_r)?;
    out.add_scaled(global * (zeta_l * cs + i * zeta_r * sn), &s.phi_l)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::Grid;
    use crate::eigensolver::lowest_eigenpairs;
    use crate::potential::Potential;

    fn setup(hbar: f64) -> SpectralData {
        let v = Potential::builtin_quartic(1.0, 1.0, &[]).unwrap();
        let grid = Grid::new(1, 4.0, 128).unwrap();
        lowest_eigenpairs(&v, &grid, hbar, 3, 1e-11, 7).unwrap()
    }

    #[test]
    fn merged_half_steps_match_single_steps() {
        let s = setup(0.3);
        let mut cfg = SimConfig::new(0.3, 0.4, 1, 1, 0.05, 1.0);
        cfg.output_stride = 5;
        let mut a = s.phi_r.clone();
        for _ in 0..5 {
            a = step(&a, &cfg, s.hamiltonian()).unwrap();
        }
        let mut b = s.phi_r.clone();
        FourierStrang::new(&cfg, s.hamiltonian()).advance(b.values_mut(), 5);
        let mut d = a.clone();
        d.add_scaled(C64::new(-1.0, 0.0), &b).unwrap();
        assert!(d.norm0() < 1e-12);
    }

    #[test]
    fn step_preserves_norm() {
        let s = setup(0.3);
        let cfg = SimConfig::new(0.3, 2.0, 2, 1, 0.1, 0.1);
        let psi = step(&s.phi_r, &cfg, s.hamiltonian()).unwrap();
        assert!((psi.norm0() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn energy_constant_field_potential_term() {
        let grid = Grid::new(1, 2.0, 64).unwrap();
        let v = Potential::harmonic(1.0, 1).unwrap();
        let h0 = Hamiltonian::new(&v, grid, 0.5).unwrap();
        let psi = FieldC::from_fn(grid, |_| C64::new(0.5, 0.0));
        let e0 = energy(&psi, &SimConfig::new(0.5, 0.0, 1, 1, 0.1, 1.0), &h0).unwrap();
        let e1 = energy(&psi, &SimConfig::new(0.5, 1.0, 1, 1, 0.1, 1.0), &h0).unwrap();
        let em = energy(&psi, &SimConfig::new(0.5, -1.0, 1, 1, 0.1, 1.0), &h0).unwrap();
        assert!((e1 - e0 - 0.5 / 4.0).abs() < 1e-14);
        assert!((e1 - e0 + (em - e0)).abs() < 1e-14);
    }

    #[test]
    fn eigenbasis_matches_fourier_at_small_dt() {
        let s = setup(0.3);
        let mut cfg = SimConfig::new(0.3, 0.5, 1, 1, 2e-3, 2.0);
        let mut a = s.phi_r.clone();
        FourierStrang::new(&cfg, s.hamiltonian()).advance(a.values_mut(), 1000);
        cfg.scheme = TimeScheme::EigenbasisStrang;
        let mut b = s.phi_r.clone();
        EigenbasisStrang::new(&cfg, s.hamiltonian())
            .unwrap()
            .advance(b.values_mut(), 1000);
        let mut d = a.clone();
        d.add_scaled(C64::new(-1.0, 0.0), &b).unwrap();
        assert!(d.norm0() < 1e-5, "{}", d.norm0());
    }

    #[test]
    fn beating_oracle_endpoints() {
        let s = setup(0.3);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let f0 = linear_beating_exact(one, zero, 0.0, &s, true).unwrap();
        let mut d = f0.clone();
        d.add_scaled(-one, &s.phi_r).unwrap();
        assert!(d.norm0() < 1e-14);
        let t = std::f64::consts::FRAC_PI_2 / s.omega_split;
        let f = linear_beating_exact(one, zero, t, &s, true).unwrap();
        let pop_l = crate::discretization::inner(&s.phi_l, &f).unwrap().norm_sqr();
        assert!((pop_l - 1.0).abs() < 1e-12);
        assert!((f.norm0() - 1.0).abs() < 1e-12);
        let fp = linear_beating_exact(one, zero, t * s.hbar, &s, false).unwrap();
        let mut d = fp.clone();
        d.add_scaled(-one, &f).unwrap();
        assert!(d.norm0() < 1e-12);
    }
}
