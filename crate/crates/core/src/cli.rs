//! Command-line driver. Every command reads a TOML config, writes its
//! artifacts plus `manifest.json` into the output directory and maps errors
//! onto a fixed set of exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::diagnostics::{
    corollary1_monitor, eps_scaling_exponent, existence_bound, sandwich_over_trajectory,
    theorem1_monitor,
};
use crate::discretization::{write_snapshot, FieldC, SimConfig};
use crate::eigensolver::{
    c_sigma, effective_eta, lowest_eigenpairs, orthonormality_defect, SpectralData, SweepRow,
    SweepTable,
};
use crate::error::{Error, Result};
use crate::nls::{evolve, ObserverSet, Trajectory};
use crate::potential::{agmon_distance, Potential};
use crate::twomode::{integrate, selftrap_scan, TwoModeParams, TwoModeState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_BLOWUP: i32 = 4;
pub const EXIT_PARTIAL: i32 = 5;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "DWNLS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dwnls", version, about = "Double-well nonlinear Schrödinger laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lowest eigenpairs, tunnelling doublet and two-mode constants.
    Spectrum(RunArgs),
    /// Agmon distance between the wells.
    Agmon(RunArgs),
    /// Full NLS run with diagnostics.
    Evolve(RunArgs),
    /// Two-mode run and optional self-trapping scan.
    Twomode(RunArgs),
    /// NLS and two-mode runs from matched initial data.
    Compare(RunArgs),
    /// Sweeps over ħ (splitting fit) or ε (leakage scaling).
    Sweep(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `[solver] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::NotADoubleWell(_) | Error::GridMismatch => {
            EXIT_CONFIG
        }
        Error::BlowUp { .. } => EXIT_BLOWUP,
        Error::NotConverged { .. } | Error::Consistency(_) | Error::Io(_) | Error::Json(_) => EXIT_SOLVER,
    }
}

/// Sizes the global pool from `DWNLS_THREADS` (default: logical cores).
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn run(cli: Cli) -> i32 {
    configure_threads();
    let (name, args) = match &cli.command {
        Command::Spectrum(a) => ("spectrum", a),
        Command::Agmon(a) => ("agmon", a),
        Command::Evolve(a) => ("evolve", a),
        Command::Twomode(a) => ("twomode", a),
        Command::Compare(a) => ("compare", a),
        Command::Sweep(a) => ("sweep", a),
    };
    let result = Run::open(name, args).and_then(|mut r| {
        let code = match &cli.command {
            Command::Spectrum(_) => cmd_spectrum(&mut r),
            Command::Agmon(_) => cmd_agmon(&mut r),
            Command::Evolve(_) => cmd_evolve(&mut r),
            Command::Twomode(_) => cmd_twomode(&mut r),
            Command::Compare(_) => cmd_compare(&mut r),
            Command::Sweep(_) => cmd_sweep(&mut r),
        };
        let code = match code {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        };
        r.finish(code)?;
        Ok(code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    exit_code: i32,
    config: &'a RunConfig,
    resolved: &'a Option<SimConfig>,
    config_hash: String,
    artifacts: &'a [String],
    started_unix: f64,
    elapsed_seconds: f64,
}

/// Output directory, loaded config and the artifact list of one command.
pub struct Run {
    command: &'static str,
    pub cfg: RunConfig,
    pub out: PathBuf,
    artifacts: Vec<String>,
    resolved: Option<SimConfig>,
    started: Instant,
    started_unix: f64,
}

impl Run {
    pub fn open(command: &'static str, args: &RunArgs) -> Result<Self> {
        let mut cfg = RunConfig::load(&args.config)?;
        if let Some(seed) = args.seed {
            cfg.solver.seed = seed;
        }
        let out = args
            .out
            .clone()
            .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out)?;
        Ok(Self {
            command,
            cfg,
            out,
            artifacts: Vec::new(),
            resolved: None,
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.out.join(name), contents)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write(name, &(text + "\n"))
    }

    fn snapshot(&mut self, name: &str, field: &FieldC, hbar: f64, t: f64) -> Result<()> {
        write_snapshot(&self.out.join(name), field, hbar, t)?;
        self.artifacts.push(name.to_string());
        self.artifacts
            .push(Path::new(name).with_extension("json").display().to_string());
        Ok(())
    }

    /// SHA-256 over `blob <len>\0<canonical JSON>` of the effective config.
    pub fn config_hash(&self) -> Result<String> {
        let body = serde_json::to_string(&self.cfg)?;
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(body.as_bytes());
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    fn finish(&mut self, exit_code: i32) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            exit_code,
            config: &self.cfg,
            resolved: &self.resolved,
            config_hash: self.config_hash()?,
            artifacts: &self.artifacts,
            started_unix: self.started_unix,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(self.out.join("manifest.json"), text + "\n")?;
        Ok(())
    }

    fn setup(&self) -> Result<(Potential, SpectralData)> {
        let v = self.cfg.potential()?;
        let grid = self.cfg.grid()?;
        grid.check_covers(&v)?;
        let s = lowest_eigenpairs(
            &v,
            &grid,
            self.cfg.physics.hbar,
            self.cfg.solver.eigenpairs.max(3),
            self.cfg.solver.tol,
            self.cfg.solver.seed,
        )?;
        Ok((v, s))
    }

    fn initial_field(&self, s: &SpectralData) -> Result<(FieldC, TwoModeState)> {
        let (cr, cl) = self.cfg.initial.amplitudes()?;
        let mut psi = s.phi_r.scaled(cr);
        psi.add_scaled(cl, &s.phi_l)?;
        let psi = psi.normalized();
        Ok((psi, TwoModeState::new(cr, cl)))
    }

    fn twomode_params(&self, s: &SpectralData) -> Result<TwoModeParams> {
        let p = &self.cfg.physics;
        Ok(TwoModeParams {
            omega_split: s.omega_split,
            omega_mean: s.omega_mean,
            epsilon: p.epsilon,
            sigma: p.sigma,
            c_sigma: c_sigma(s, p.sigma, p.c_sigma)?,
            time_rescaled: p.time_rescaled,
            hbar: p.hbar,
        })
    }
}

fn spectrum_csv(s: &SpectralData) -> String {
    let mut out = String::from("k,lambda,parity,residual,Omega,omega\n");
    for (k, lam) in s.eigenvalues.iter().enumerate() {
        out.push_str(&format!(
            "{},{:.17e},{},{:.6e},{:.17e},{:.17e}\n",
            k + 1,
            lam,
            s.parities[k].as_str(),
            s.residuals[k],
            s.omega_mean,
            s.omega_split
        ));
    }
    out
}

pub fn cmd_spectrum(r: &mut Run) -> Result<i32> {
    let (_, s) = r.setup()?;
    let sigma = r.cfg.physics.sigma;
    let (off, diag) = orthonormality_defect(&s)?;
    r.write("spectrum.csv", &spectrum_csv(&s))?;
    let summary = json!({
        "hbar": s.hbar,
        "lambda": s.eigenvalues,
        "Omega": s.omega_mean,
        "omega": s.omega_split,
        "beat_period": s.beat_period(),
        "relative_gap": s.relative_gap(),
        "c_sigma": c_sigma(&s, sigma, r.cfg.physics.c_sigma)?,
        "tail_mass": s.tail_mass,
        "orthogonality_defect": off,
        "normalisation_defect": diag,
        "seed": s.seed,
    });
    r.write_json("spectrum.json", &summary)?;
    if r.cfg.output.dump_eigenvectors {
        for (k, f) in s.eigenvectors.iter().enumerate() {
            r.snapshot(&format!("phi{}.bin", k + 1), f, s.hbar, 0.0)?;
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_agmon(r: &mut Run) -> Result<i32> {
    let v = r.cfg.potential()?;
    let res = agmon_distance(&v, r.cfg.solver.agmon_resolution)?;
    let mut j = res.to_json();
    j["closed_form"] = json!(v.agmon_closed_form());
    r.write_json("agmon.json", &j)?;
    Ok(EXIT_OK)
}

fn write_trajectory(r: &mut Run, traj: &Trajectory, hbar: f64) -> Result<()> {
    r.write("trajectory.csv", &traj.to_csv())?;
    for (i, (t, f)) in traj.snapshots.iter().enumerate() {
        r.snapshot(&format!("snapshot_{i:05}.bin"), f, hbar, *t)?;
    }
    Ok(())
}

pub fn cmd_evolve(r: &mut Run) -> Result<i32> {
    let (_, s) = r.setup()?;
    let sim = r.cfg.sim_config(&s)?;
    r.resolved = Some(sim.clone());
    let (psi0, _) = r.initial_field(&s)?;
    let traj = match evolve(&psi0, &sim, &s, &ObserverSet::default()) {
        Ok(t) => t,
        Err(Error::BlowUp { t, reason, partial }) => {
            write_trajectory(r, &partial, sim.hbar)?;
            r.write_json("blowup.json", &json!({ "t": t, "reason": reason }))?;
            eprintln!("blow-up at t = {t}: {reason}");
            return Ok(EXIT_BLOWUP);
        }
        Err(e) => return Err(e),
    };
    write_trajectory(r, &traj, sim.hbar)?;
    let thm = theorem1_monitor(&traj, &sim, 1.0)?;
    let sandwich = sandwich_over_trajectory(&traj, &s)?;
    let bound = existence_bound(&s, &sim);
    let x1_max = traj.x1_norm_max();
    let report = json!({
        "hbar": sim.hbar,
        "epsilon": sim.epsilon,
        "eta": effective_eta(sim.epsilon, sim.hbar, sim.sigma, sim.dim, s.omega_split)?,
        "steps": traj.steps_taken,
        "norm_drift": traj.norm_drift(),
        "energy_drift": traj.energy_drift(),
        "mu_max": thm.mu_max,
        "amplification": thm.amplification,
        "theorem1": thm,
        "sandwich": sandwich,
        "x1_norm_max": x1_max,
        "existence_bound": bound,
        "existence_ok": bound.map(|b| x1_max <= b),
    });
    r.write_json("report.json", &report)?;
    Ok(EXIT_OK)
}

pub fn cmd_twomode(r: &mut Run) -> Result<i32> {
    let (_, s) = r.setup()?;
    let p = r.twomode_params(&s)?;
    let (_, c0) = r.initial_field(&s)?;
    let period = p.beat_period();
    let dt = period / r.cfg.twomode.steps_per_period as f64;
    let t_final = r.cfg.time.t_final.unwrap_or(r.cfg.time.periods * period);
    let traj = integrate(&c0, &p, dt, t_final, r.cfg.time.output_stride)?;
    r.write("twomode.csv", &traj.to_csv())?;
    let mut report = json!({
        "eta": p.epsilon * p.c_sigma / p.omega_split,
        "c_sigma": p.c_sigma,
        "min_z": traj.min_z,
        "trapped": traj.min_z > 0.0,
        "max_norm_drift": traj.max_norm_drift,
        "max_invariant_drift": traj.max_invariant_drift,
    });
    if !r.cfg.twomode.scan_eta.is_empty() {
        let scan = selftrap_scan(&p, &r.cfg.twomode.scan_eta, p.sigma, &r.cfg.twomode.scan_options())?;
        r.write("scan.csv", &scan.to_csv())?;
        r.write_json("scan.json", &scan.to_json())?;
        report["scan_monotone"] = json!(scan.monotone);
    }
    r.write_json("twomode.json", &report)?;
    Ok(EXIT_OK)
}

pub fn cmd_compare(r: &mut Run) -> Result<i32> {
    let (_, s) = r.setup()?;
    let sim = r.cfg.sim_config(&s)?;
    r.resolved = Some(sim.clone());
    let p = r.twomode_params(&s)?;
    let steps = sim.total_steps();
    if steps % sim.output_stride != 0 {
        return Err(Error::Config(format!(
            "compare needs total steps ({steps}) to be a multiple of output_stride ({})",
            sim.output_stride
        )));
    }
    let (psi0, c0) = r.initial_field(&s)?;
    let traj = evolve(&psi0, &sim, &s, &ObserverSet::default())?;
    let interval = sim.dt * sim.output_stride as f64;
    let sub = (interval / (p.beat_period() / 1e4)).ceil().max(1.0) as usize;
    let tm = integrate(&c0, &p, interval / sub as f64, steps as f64 * sim.dt, sub)?;
    let rep = corollary1_monitor(&traj, &tm, r.cfg.twomode.compare_window)?;
    let mut csv = String::from("t,e\n");
    for (t, e) in rep.t.iter().zip(&rep.e) {
        csv.push_str(&format!("{t:.17e},{e:.17e}\n"));
    }
    r.write("compare.csv", &csv)?;
    r.write_json(
        "corollary1.json",
        &json!({
            "epsilon": sim.epsilon,
            "slope": rep.slope,
            "e0": rep.e0,
            "e_max": rep.e.iter().cloned().fold(0.0, f64::max),
            "window_end": rep.window_end,
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_sweep(r: &mut Run) -> Result<i32> {
    let sweep = r.cfg.sweep.clone().unwrap_or_default();
    if sweep.hbar.is_empty() && sweep.epsilon.is_empty() {
        return Err(Error::Config("the [sweep] section lists no ħ or ε values".into()));
    }
    let mut code = EXIT_OK;
    if !sweep.hbar.is_empty() {
        code = code.max(sweep_hbar(r, &sweep.hbar)?);
    }
    if !sweep.epsilon.is_empty() {
        code = code.max(sweep_epsilon(r, &sweep.epsilon)?);
    }
    Ok(code)
}

fn sweep_hbar(r: &mut Run, hbars: &[f64]) -> Result<i32> {
    if hbars.len() < 4 {
        return Err(Error::Config(format!(
            "a splitting sweep needs at least 4 values of ħ, got {}",
            hbars.len()
        )));
    }
    let v = r.cfg.potential()?;
    let grid = r.cfg.grid()?;
    grid.check_covers(&v)?;
    let (tol, seed) = (r.cfg.solver.tol, r.cfg.solver.seed);
    let results: Vec<Result<SpectralData>> = hbars
        .par_iter()
        .map(|&hb| lowest_eigenpairs(&v, &grid, hb, 3, tol, seed))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (hb, res) in hbars.iter().zip(results) {
        match res {
            Ok(s) => rows.push(SweepRow::from_spectrum(&s)),
            Err(e) => failures.push(json!({ "hbar": hb, "error": e.to_string() })),
        }
    }
    let table = SweepTable::from_rows(rows);
    r.write("sweep.csv", &table.to_csv())?;
    r.write_json(
        "sweep.json",
        &json!({
            "fit": table.fit,
            "gamma_estimate": table.fit.map(|f| -f.slope),
            "agmon_closed_form": v.agmon_closed_form(),
            "r2_ok": table.r2_ok,
            "doublet_ok": table.doublet_ok,
            "accepted": table.accepted(),
            "excluded_below_floor": table.excluded_below_floor,
            "failures": failures,
        }),
    )?;
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

fn sweep_epsilon(r: &mut Run, eps: &[f64]) -> Result<i32> {
    let (_, s) = r.setup()?;
    let base = r.cfg.sim_config(&s)?;
    r.resolved = Some(base.clone());
    let (psi0, _) = r.initial_field(&s)?;
    let runs: Vec<Result<(f64, f64)>> = eps
        .par_iter()
        .map(|&e| {
            let cfg = SimConfig {
                epsilon: e,
                ..base.clone()
            };
            let traj = evolve(&psi0, &cfg, &s, &ObserverSet::default())?;
            Ok((e, theorem1_monitor(&traj, &cfg, 1.0)?.mu_max))
        })
        .collect();
    let mut csv = String::from("epsilon,mu_max,amplification\n");
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for (e, res) in eps.iter().zip(runs) {
        match res {
            Ok((e, m)) => {
                let amp = if e != 0.0 { m / e.abs().sqrt() } else { f64::NAN };
                csv.push_str(&format!("{e:.17e},{m:.17e},{amp:.17e}\n"));
                pairs.push((e.abs(), m));
            }
            Err(err) => failures.push(json!({ "epsilon": e, "error": err.to_string() })),
        }
    }
    r.write("eps_sweep.csv", &csv)?;
    r.write_json(
        "eps_sweep.json",
        &json!({
            "eps_scaling_exponent": eps_scaling_exponent(&pairs),
            "failures": failures,
        }),
    )?;
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}
