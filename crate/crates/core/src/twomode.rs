//! Reduced two-mode (dimer) dynamics on the single-well states `φ_R, φ_L`:
//!
//! ```text
//! i ċ_R = −ω c_L + Ω c_R + ε C_σ |c_R|^{2σ} c_R
//! i ċ_L = −ω c_R + Ω c_L + ε C_σ |c_L|^{2σ} c_L
//! ```
//!
//! (divided by `ħ` in physical time). The common frequency `Ω` is factored out
//! exactly: RK4 advances `b = e^{iΩτ} c`, and `c` is rebuilt with the exact
//! phase at every step. This keeps the fast `Ω` rotation from dominating the
//! truncation error while reported trajectories still include it.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoModeState {
    pub c_r: C64,
    pub c_l: C64,
}

impl TwoModeState {
    pub fn new(c_r: C64, c_l: C64) -> Self {
        Self { c_r, c_l }
    }

    /// All population in the right well.
    pub fn right() -> Self {
        Self::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn norm2(&self) -> f64 {
        self.c_r.norm_sqr() + self.c_l.norm_sqr()
    }

    /// Population imbalance `|c_R|² − |c_L|²`.
    pub fn z(&self) -> f64 {
        self.c_r.norm_sqr() - self.c_l.norm_sqr()
    }

    pub fn scaled(&self, a: C64) -> Self {
        Self::new(self.c_r * a, self.c_l * a)
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.c_l, self.c_r)
    }

    fn axpy(&self, a: f64, d: &Self) -> Self {
        Self::new(self.c_r + d.c_r * a, self.c_l + d.c_l * a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoModeParams {
    pub omega_split: f64,
    pub omega_mean: f64,
    pub epsilon: f64,
    pub sigma: u32,
    pub c_sigma: f64,
    pub time_rescaled: bool,
    /// Only used in physical time.
    pub hbar: f64,
}

impl TwoModeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_split > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ω must be positive, got {}",
                self.omega_split
            )));
        }
        if !(self.c_sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "C_σ must be positive, got {}",
                self.c_sigma
            )));
        }
        if self.sigma < 1 {
            return Err(Error::InvalidParameter("σ must be a positive integer".into()));
        }
        if !self.time_rescaled && !(self.hbar > 0.0) {
            return Err(Error::InvalidParameter("physical time needs ħ > 0".into()));
        }
        Ok(())
    }

    fn time_scale(&self) -> f64 {
        if self.time_rescaled {
            1.0
        } else {
            1.0 / self.hbar
        }
    }

    /// Linear beating period `2π/ω` in the configured time variable.
    pub fn beat_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.omega_split * self.time_scale())
    }

    fn self_term(&self, c: C64) -> C64 {
        c * (self.epsilon * self.c_sigma * c.norm_sqr().powi(self.sigma as i32))
    }
}

/// Time derivative `(ċ_R, ċ_L)` of the full system.
pub fn rhs(state: &TwoModeState, p: &TwoModeParams) -> TwoModeState {
    let mi = C64::new(0.0, -p.time_scale());
    let (cr, cl) = (state.c_r, state.c_l);
    TwoModeState::new(
        mi * (-p.omega_split * cl + p.omega_mean * cr + p.self_term(cr)),
        mi * (-p.omega_split * cr + p.omega_mean * cl + p.self_term(cl)),
    )
}

/// Derivative with the `Ω` term removed (co-rotating frame).
fn rhs_rotating(state: &TwoModeState, p: &TwoModeParams) -> TwoModeState {
    let mi = C64::new(0.0, -p.time_scale());
    let (br, bl) = (state.c_r, state.c_l);
    TwoModeState::new(
        mi * (-p.omega_split * bl + p.self_term(br)),
        mi * (-p.omega_split * br + p.self_term(bl)),
    )
}

/// `I = Ω(|c_R|²+|c_L|²) − ω(c̄_R c_L + c̄_L c_R) + (C_σ ε/(σ+1))(|c_R|^{2(σ+1)} + |c_L|^{2(σ+1)})`.
pub fn invariant_i(state: &TwoModeState, p: &TwoModeParams) -> f64 {
    let (cr, cl) = (state.c_r, state.c_l);
    let s1 = p.sigma as i32 + 1;
    p.omega_mean * state.norm2() - p.omega_split * (cr.conj() * cl + cl.conj() * cr).re
        + p.c_sigma * p.epsilon / s1 as f64
            * (cr.norm_sqr().powi(s1) + cl.norm_sqr().powi(s1))
}

fn rk4(b: &TwoModeState, p: &TwoModeParams, dt: f64) -> TwoModeState {
    let k1 = rhs_rotating(b, p);
    let k2 = rhs_rotating(&b.axpy(0.5 * dt, &k1), p);
    let k3 = rhs_rotating(&b.axpy(0.5 * dt, &k2), p);
    let k4 = rhs_rotating(&b.axpy(dt, &k3), p);
    TwoModeState::new(
        b.c_r + (k1.c_r + 2.0 * k2.c_r + 2.0 * k3.c_r + k4.c_r) * (dt / 6.0),
        b.c_l + (k1.c_l + 2.0 * k2.c_l + 2.0 * k3.c_l + k4.c_l) * (dt / 6.0),
    )
}

#[derive(Clone, Debug, Default)]
pub struct TwoModeTrajectory {
    pub tau: Vec<f64>,
    pub states: Vec<TwoModeState>,
    pub norm2: Vec<f64>,
    pub invariant: Vec<f64>,
    pub z: Vec<f64>,
    /// Minimum of `z` over every integration step, not only recorded ones.
    pub min_z: f64,
    pub max_norm_drift: f64,
    pub max_invariant_drift: f64,
    pub steps: usize,
}

impl TwoModeTrajectory {
    /// CSV with columns `tau,re_cR,im_cR,re_cL,im_cL,norm2,invariant_I,z`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,re_cR,im_cR,re_cL,im_cL,norm2,invariant_I,z\n");
        for i in 0..self.tau.len() {
            let s = &self.states[i];
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                self.tau[i],
                s.c_r.re,
                s.c_r.im,
                s.c_l.re,
                s.c_l.im,
                self.norm2[i],
                self.invariant[i],
                self.z[i]
            ));
        }
        out
    }
}

/// Fixed-step RK4 from `state0` to `t_final`, recording every `stride` steps
/// (and the final step). The step must resolve the beat: `dt ≤ T/10³`.
pub fn integrate(
    state0: &TwoModeState,
    p: &TwoModeParams,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<TwoModeTrajectory> {
    p.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if dt > p.beat_period() / 1e3 {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} does not resolve the beat period {} (need dt ≤ T/1000)",
            p.beat_period()
        )));
    }
    integrate_unchecked(state0, p, dt, t_final, stride.max(1))
}

pub(crate) fn integrate_unchecked(
    state0: &TwoModeState,
    p: &TwoModeParams,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<TwoModeTrajectory> {
    let steps = (t_final / dt).round() as usize;
    let w = p.omega_mean * p.time_scale();
    let norm0 = state0.norm2();
    let i0 = invariant_i(state0, p);
    let mut traj = TwoModeTrajectory {
        min_z: state0.z(),
        ..Default::default()
    };
    let record = |traj: &mut TwoModeTrajectory, tau: f64, c: &TwoModeState| {
        traj.tau.push(tau);
        traj.states.push(*c);
        traj.norm2.push(c.norm2());
        traj.invariant.push(invariant_i(c, p));
        traj.z.push(c.z());
    };
    record(&mut traj, 0.0, state0);
    let mut b = *state0;
    for k in 1..=steps {
        b = rk4(&b, p, dt);
        let tau = k as f64 * dt;
        let c = b.scaled(C64::from_polar(1.0, -w * tau));
        traj.min_z = traj.min_z.min(c.z());
        traj.max_norm_drift = traj.max_norm_drift.max((c.norm2() - norm0).abs());
        traj.max_invariant_drift = traj
            .max_invariant_drift
            .max((invariant_i(&c, p) - i0).abs());
        if k % stride == 0 || k == steps {
            record(&mut traj, tau, &c);
        }
    }
    traj.steps = steps;
    Ok(traj)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScanOptions {
    /// Integration length in linear beat periods.
    pub periods: f64,
    pub steps_per_period: usize,
    /// Bisection stops once the bracket is at most this wide.
    pub bisection_width: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            periods: 10.0,
            steps_per_period: 10_000,
            bisection_width: 0.01,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    /// Coupling ratio `ε C_σ / ω`.
    pub eta: f64,
    pub min_z: f64,
    pub trapped: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    pub eta_star: Option<f64>,
    pub bisection_width: f64,
    /// Beating for every value below the transition, trapped for every value
    /// above it.
    pub monotone: bool,
}

impl ScanTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eta,min_z,trapped\n");
        for r in &self.rows {
            out.push_str(&format!("{:.17e},{:.17e},{}\n", r.eta, r.min_z, r.trapped));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "eta_star": self.eta_star,
            "bisection_width": self.bisection_width,
        })
    }
}

/// Minimum imbalance reached from `c_R = 1, c_L = 0` at coupling ratio
/// `η = εC_σ/ω`.
pub fn min_imbalance(p_template: &TwoModeParams, eta: f64, sigma: u32, opts: &ScanOptions) -> Result<f64> {
    let p = TwoModeParams {
        epsilon: eta * p_template.omega_split / p_template.c_sigma,
        sigma,
        ..*p_template
    };
    p.validate()?;
    let period = p.beat_period();
    let dt = period / opts.steps_per_period as f64;
    let steps = (opts.periods * opts.steps_per_period as f64).round() as usize;
    let traj = integrate_unchecked(&TwoModeState::right(), &p, dt, steps as f64 * dt, steps.max(1))?;
    Ok(traj.min_z)
}

/// Beating/self-trapping map over sorted coupling ratios `η = εC_σ/ω`, with
/// the threshold refined by bisection between the last beating and the
/// first trapped value.
pub fn selftrap_scan(
    p_template: &TwoModeParams,
    eta_values: &[f64],
    sigma: u32,
    opts: &ScanOptions,
) -> Result<ScanTable> {
    if eta_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("η values must be sorted".into()));
    }
    let mins: Vec<Result<f64>> = eta_values
        .par_iter()
        .map(|&eta| min_imbalance(p_template, eta, sigma, opts))
        .collect();
    let mut rows = Vec::with_capacity(eta_values.len());
    for (&eta, m) in eta_values.iter().zip(mins) {
        let min_z = m?;
        rows.push(ScanRow {
            eta,
            min_z,
            trapped: min_z > 0.0,
        });
    }
    let first_trapped = rows.iter().position(|r| r.trapped);
    let monotone = match first_trapped {
        Some(i) => rows[i..].iter().all(|r| r.trapped),
        None => true,
    };
    let (eta_star, width) = match first_trapped {
        Some(i) if i > 0 => {
            let (mut lo, mut hi) = (rows[i - 1].eta, rows[i].eta);
            while hi - lo > opts.bisection_width {
                let mid = 0.5 * (lo + hi);
                if min_imbalance(p_template, mid, sigma, opts)? > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            (Some(0.5 * (lo + hi)), hi - lo)
        }
        _ => (None, f64::NAN),
    };
    Ok(ScanTable {
        rows,
        eta_star,
        bisection_width: width,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(eps: f64) -> TwoModeParams {
        TwoModeParams {
            omega_split: 1e-2,
            omega_mean: 1.3,
            epsilon: eps,
            sigma: 1,
            c_sigma: 2.0,
            time_rescaled: true,
            hbar: 0.1,
        }
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn rhs_on_linear_eigenmodes() {
        let p = params(0.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let sym = TwoModeState::new(C64::new(r, 0.0), C64::new(r, 0.0));
        let d = rhs(&sym, &p);
        let want = C64::new(0.0, -(p.omega_mean - p.omega_split));
        assert!(close(d.c_r, want * sym.c_r, 1e-15) && close(d.c_l, want * sym.c_l, 1e-15));
        let anti = TwoModeState::new(C64::new(r, 0.0), C64::new(-r, 0.0));
        let d = rhs(&anti, &p);
        let want = C64::new(0.0, -(p.omega_mean + p.omega_split));
        assert!(close(d.c_r, want * anti.c_r, 1e-15) && close(d.c_l, want * anti.c_l, 1e-15));
    }

    #[test]
    fn rhs_preserves_norm_infinitesimally() {
        let p = params(0.7);
        for (a, b, c, d) in [(0.3, -0.2, 0.5, 0.9), (1.0, 0.0, 0.0, 0.0), (-0.4, 0.8, 0.1, -0.3)] {
            let s = TwoModeState::new(C64::new(a, b), C64::new(c, d));
            let ds = rhs(&s, &p);
            let n = (s.c_r.conj() * ds.c_r + s.c_l.conj() * ds.c_l).re;
            assert!(n.abs() < 1e-15);
        }
    }

    #[test]
    fn invariant_substitutions() {
        let p = params(0.0);
        assert!((invariant_i(&TwoModeState::right(), &p) - p.omega_mean).abs() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let sym = TwoModeState::new(C64::new(r, 0.0), C64::new(r, 0.0));
        assert!((invariant_i(&sym, &p) - (p.omega_mean - p.omega_split)).abs() < 1e-15);
        let q = params(0.3);
        let want = q.omega_mean + q.epsilon * q.c_sigma / 2.0;
        assert!((invariant_i(&TwoModeState::right(), &q) - want).abs() < 1e-15);
    }

    #[test]
    fn linear_full_beat() {
        let p = params(0.0);
        let dt = p.beat_period() / 2000.0;
        let traj = integrate(&TwoModeState::right(), &p, dt, p.beat_period(), 10).unwrap();
        for (tau, s) in traj.tau.iter().zip(&traj.states) {
            let exact = (p.omega_split * tau).sin().powi(2);
            assert!((s.c_l.norm_sqr() - exact).abs() < 1e-8);
        }
        assert!((traj.min_z + 1.0).abs() < 1e-5);
    }

    #[test]
    fn rejects_unresolved_step() {
        let p = params(0.0);
        let dt = p.beat_period() / 100.0;
        assert!(integrate(&TwoModeState::right(), &p, dt, 1.0, 1).is_err());
        let mut bad = params(0.0);
        bad.omega_split = 0.0;
        assert!(integrate(&TwoModeState::right(), &bad, 1e-3, 1.0, 1).is_err());
    }

    #[test]
    fn gauge_and_exchange_symmetry() {
        let p = params(1.5 * 1e-2 / 2.0);
        let dt = p.beat_period() / 2000.0;
        let s0 = TwoModeState::new(C64::new(0.8, 0.1), C64::new(0.3, -0.5));
        let s0 = s0.scaled(C64::new(1.0 / s0.norm2().sqrt(), 0.0));
        let base = integrate(&s0, &p, dt, 2.0 * p.beat_period(), 50).unwrap();
        let phase = C64::from_polar(1.0, 0.7);
        let rot = integrate(&s0.scaled(phase), &p, dt, 2.0 * p.beat_period(), 50).unwrap();
        let swp = integrate(&s0.swapped(), &p, dt, 2.0 * p.beat_period(), 50).unwrap();
        for i in 0..base.tau.len() {
            assert!(close(rot.states[i].c_r, base.states[i].c_r * phase, 1e-12));
            assert!(close(rot.states[i].c_l, base.states[i].c_l * phase, 1e-12));
            assert!((rot.z[i] - base.z[i]).abs() < 1e-12);
            assert!((rot.invariant[i] - base.invariant[i]).abs() < 1e-12);
            assert!(close(swp.states[i].c_r, base.states[i].c_l, 1e-10));
            assert!(close(swp.states[i].c_l, base.states[i].c_r, 1e-10));
        }
    }

    #[test]
    fn strong_coupling_self_traps() {
        let p = params(0.0);
        let opts = ScanOptions {
            steps_per_period: 2000,
            ..Default::default()
        };
        assert!(min_imbalance(&p, 10.0, 1, &opts).unwrap() > 0.0);
        let lin = min_imbalance(&p, 0.0, 1, &opts).unwrap();
        assert!((lin + 1.0).abs() < 1e-5);
    }

    #[test]
    fn scan_brackets_threshold() {
        let p = params(0.0);
        let opts = ScanOptions {
            steps_per_period: 2000,
            ..Default::default()
        };
        let t = selftrap_scan(&p, &[0.0, 1.0, 2.0, 3.0, 5.0, 8.0], 1, &opts).unwrap();
        assert!(t.monotone);
        let star = t.eta_star.unwrap();
        assert!(star > 3.0 && star < 5.0);
        assert!(t.bisection_width <= 0.01);
        let none = selftrap_scan(&p, &[0.0, 0.5], 1, &opts).unwrap();
        assert!(none.eta_star.is_none());
        assert!(none.to_json()["eta_star"].is_null());
        assert!(selftrap_scan(&p, &[2.0, 1.0], 1, &opts).is_err());
    }
}
