//! Projections onto the tunneling doublet and the monitors built on them.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::discretization::{inner, FieldC, SimConfig};
use crate::eigensolver::SpectralData;
use crate::error::{Error, Result};
use crate::fit::{power_law_exponent, slope_through_origin};
use crate::nls::Trajectory;
use crate::twomode::TwoModeTrajectory;

/// Absolute slack allowed in the `H₀`-gap sandwich before a violation is
/// reported. Covers rounding in the projected field.
pub const SANDWICH_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ProjectionData {
    pub zeta1: C64,
    pub zeta2: C64,
    /// `Π_c ψ = ψ − ζ₁φ₁ − ζ₂φ₂`.
    pub pic_field: FieldC,
    /// `‖Π_c ψ‖₁`.
    pub mu: f64,
    pub pic_norm0: f64,
    pub pop_r: f64,
    pub pop_l: f64,
    /// `⟨(H₀ − Ω)Π_cψ, Π_cψ⟩ = μ² − Ω‖Π_cψ‖₀²`.
    pub h0_gap: f64,
}

pub fn project(psi: &FieldC, s: &SpectralData) -> Result<ProjectionData> {
    if psi.grid() != s.grid() {
        return Err(Error::GridMismatch);
    }
    let zeta1 = inner(s.phi1(), psi)?;
    let zeta2 = inner(s.phi2(), psi)?;
    let mut pic = psi.clone();
    pic.add_scaled(-zeta1, s.phi1())?;
    pic.add_scaled(-zeta2, s.phi2())?;
    let pic_norm0 = pic.norm0();
    let mu2 = s.hamiltonian().expectation(&pic)?.max(0.0);
    let h0_gap = mu2 - s.omega_mean * pic_norm0 * pic_norm0;
    let pop_r = inner(&s.phi_r, psi)?.norm_sqr();
    let pop_l = inner(&s.phi_l, psi)?.norm_sqr();
    Ok(ProjectionData {
        zeta1,
        zeta2,
        pic_field: pic,
        mu: mu2.sqrt(),
        pic_norm0,
        pop_r,
        pop_l,
        h0_gap,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SandwichMargins {
    /// `μ² − h0_gap`.
    pub upper: f64,
    /// `h0_gap − gμ²/λ_top`.
    pub lower: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SandwichReport {
    pub h0_gap: f64,
    pub sandwich_margins: SandwichMargins,
    pub mu_squared: f64,
    pub lower_bound: f64,
    pub relative_gap: f64,
    pub lambda_top: f64,
    pub upper_ok: bool,
    pub lower_ok: bool,
    /// `h0_gap < ħ³`: the orthogonal part is in the small-gap regime.
    pub small_gap_regime: bool,
}

impl SandwichReport {
    pub fn ok(&self) -> bool {
        self.upper_ok && self.lower_ok
    }
}

/// Checks `g μ²/λ_top ≤ ⟨(H₀ − Ω)Π_cψ, Π_cψ⟩ ≤ μ²`.
pub fn h0_sandwich_check(pd: &ProjectionData, s: &SpectralData) -> Result<SandwichReport> {
    sandwich_from_values(pd.mu, pd.h0_gap, s)
}

/// Sandwich check from a recorded `(μ, h0_gap)` pair.
pub fn sandwich_from_values(mu: f64, h0_gap: f64, s: &SpectralData) -> Result<SandwichReport> {
    let g = s.relative_gap().ok_or_else(|| {
        Error::InvalidParameter("the sandwich check needs at least three eigenpairs".into())
    })?;
    let mu2 = mu * mu;
    let lambda_top = s.lambda_top();
    let lower_bound = g * mu2 / lambda_top;
    Ok(SandwichReport {
        h0_gap,
        sandwich_margins: SandwichMargins {
            upper: mu2 - h0_gap,
            lower: h0_gap - lower_bound,
        },
        mu_squared: mu2,
        lower_bound,
        relative_gap: g,
        lambda_top,
        upper_ok: h0_gap <= mu2 + SANDWICH_SLACK,
        lower_ok: h0_gap >= lower_bound - SANDWICH_SLACK,
        small_gap_regime: h0_gap < s.hbar.powi(3),
    })
}

/// Sandwich checks folded over every record of a trajectory.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SandwichSummary {
    pub records: usize,
    pub violations: usize,
    /// Smallest margins seen over the run.
    pub sandwich_margins: SandwichMargins,
    /// Fraction of records with `h0_gap < ħ³`.
    pub small_gap_fraction: f64,
}

pub fn sandwich_over_trajectory(traj: &Trajectory, s: &SpectralData) -> Result<SandwichSummary> {
    let mut violations = 0;
    let mut small = 0;
    let mut margins = SandwichMargins {
        upper: f64::INFINITY,
        lower: f64::INFINITY,
    };
    for r in &traj.records {
        let rep = sandwich_from_values(r.mu, r.h0_gap, s)?;
        if !rep.ok() {
            violations += 1;
        }
        if rep.small_gap_regime {
            small += 1;
        }
        margins.upper = margins.upper.min(rep.sandwich_margins.upper);
        margins.lower = margins.lower.min(rep.sandwich_margins.lower);
    }
    let n = traj.records.len();
    Ok(SandwichSummary {
        records: n,
        violations,
        sandwich_margins: margins,
        small_gap_fraction: if n == 0 { 0.0 } else { small as f64 / n as f64 },
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Theorem1Report {
    pub mu0: f64,
    pub mu_max: f64,
    /// `μ_max/√|ε|`; absent for `ε = 0`.
    pub amplification: Option<f64>,
    pub first_half_max: f64,
    pub second_half_max: f64,
    /// Whether the initial orthogonal part obeys `μ(0) ≤ c₀√|ε|`.
    pub initial_ok: bool,
}

impl Theorem1Report {
    /// `second_half_max / first_half_max`.
    pub fn secular_ratio(&self) -> f64 {
        self.second_half_max / self.first_half_max
    }
}

/// Leakage monitor over a run; `c0` is the constant in the hypothesis
/// `μ(0) ≤ c₀√|ε|`.
pub fn theorem1_monitor(traj: &Trajectory, cfg: &SimConfig, c0: f64) -> Result<Theorem1Report> {
    if traj.records.is_empty() || traj.records.iter().any(|r| r.mu.is_nan()) {
        return Err(Error::InvalidParameter(
            "trajectory must record μ at every output time".into(),
        ));
    }
    let epsilon = cfg.epsilon;
    let half = 0.5 * traj.records.last().unwrap().t;
    let fold = |pred: &dyn Fn(f64) -> bool| {
        traj.records
            .iter()
            .filter(|r| pred(r.t))
            .fold(0.0f64, |m, r| m.max(r.mu))
    };
    let mu_max = fold(&|_| true);
    let mu0 = traj.records[0].mu;
    Ok(Theorem1Report {
        mu0,
        mu_max,
        amplification: (epsilon != 0.0).then(|| mu_max / epsilon.abs().sqrt()),
        first_half_max: fold(&|t| t <= half),
        second_half_max: fold(&|t| t > half),
        initial_ok: mu0 <= c0 * epsilon.abs().sqrt(),
    })
}

/// Exponent `p` in `μ_max ∝ ε^p` across runs.
pub fn eps_scaling_exponent(pairs: &[(f64, f64)]) -> Option<f64> {
    let (e, m): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    power_law_exponent(&e, &m)
}

#[derive(Clone, Debug, Serialize)]
pub struct Corollary1Report {
    pub t: Vec<f64>,
    pub e: Vec<f64>,
    pub e0: f64,
    /// Slope of `e(t) − e(0)` against `t` through the origin, fitted while
    /// `e < window`.
    pub slope: Option<f64>,
    pub window_end: f64,
}

/// Distance between `Πψ` and the two-mode approximation `c_Rφ_R + c_Lφ_L`,
/// using orthonormality of `φ₁, φ₂`:
/// `φ^a = ((c_R + c_L)/√2) φ₁ + ((c_R − c_L)/√2) φ₂`.
pub fn corollary1_monitor(
    traj: &Trajectory,
    twomode: &TwoModeTrajectory,
    window: f64,
) -> Result<Corollary1Report> {
    let t: Vec<f64> = traj.records.iter().map(|r| r.t).collect();
    if t.len() != twomode.tau.len() {
        return Err(Error::InvalidParameter(format!(
            "time grids differ: {} NLS records vs {} two-mode records",
            t.len(),
            twomode.tau.len()
        )));
    }
    let tol = 1e-9 * t.last().copied().unwrap_or(1.0).abs().max(1.0);
    if t.iter().zip(&twomode.tau).any(|(a, b)| (a - b).abs() > tol) {
        return Err(Error::InvalidParameter("time grids differ".into()));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let e: Vec<f64> = traj
        .records
        .iter()
        .zip(&twomode.states)
        .map(|(rec, c)| {
            let a1 = (c.c_r + c.c_l) * r;
            let a2 = (c.c_r - c.c_l) * r;
            ((rec.zeta1 - a1).norm_sqr() + (rec.zeta2 - a2).norm_sqr()).sqrt()
        })
        .collect();
    let e0 = e.first().copied().unwrap_or(0.0);
    let end = e.iter().position(|&x| x >= window).unwrap_or(e.len());
    let (ts, es): (Vec<f64>, Vec<f64>) = t[..end]
        .iter()
        .zip(&e[..end])
        .map(|(t, x)| (*t, x - e0))
        .unzip();
    let slope = if ts.len() >= 2 {
        slope_through_origin(&ts, &es)
    } else {
        None
    };
    let window_end = t.get(end.saturating_sub(1)).copied().unwrap_or(0.0);
    Ok(Corollary1Report {
        t,
        e,
        e0,
        slope,
        window_end,
    })
}

/// Exponent `p` in `slope ∝ ε^p` across runs.
pub fn slope_eps_exponent(pairs: &[(f64, f64)]) -> Option<f64> {
    eps_scaling_exponent(pairs)
}

/// Bound `√(2Ω)` on `‖ψ(t)‖₁` for defocusing runs near the doublet; `None`
/// when `ε < 0`.
pub fn existence_bound(s: &SpectralData, cfg: &SimConfig) -> Option<f64> {
    (cfg.epsilon >= 0.0).then(|| (2.0 * s.omega_mean).sqrt())
}
