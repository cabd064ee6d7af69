//! TOML run configuration. Unknown keys are rejected.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::discretization::{Grid, SimConfig, TimeScheme};
use crate::eigensolver::{CSigmaConvention, SpectralData};
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::twomode::ScanOptions;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    pub grid: GridConfig,
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub twomode: TwoModeConfig,
    pub sweep: Option<SweepConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Quartic {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        beta: f64,
        #[serde(default)]
        transverse_freqs: Vec<f64>,
    },
    HarmonicBarrier {
        omega0: f64,
        barrier_height: f64,
        barrier_width: f64,
        #[serde(default = "one_usize")]
        dim: usize,
    },
    Harmonic {
        #[serde(default = "one")]
        omega0: f64,
        #[serde(default = "one_usize")]
        dim: usize,
    },
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl PotentialConfig {
    pub fn build(&self) -> Result<Potential> {
        match self {
            Self::Quartic {
                a,
                beta,
                transverse_freqs,
            } => Potential::builtin_quartic(*a, *beta, transverse_freqs),
            Self::HarmonicBarrier {
                omega0,
                barrier_height,
                barrier_width,
                dim,
            } => Potential::builtin_harmonic_barrier(*omega0, *barrier_height, *barrier_width, *dim),
            Self::Harmonic { omega0, dim } => Potential::harmonic(*omega0, *dim),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    /// Half-width `L` of the box `[−L, L)^d`.
    pub half_width: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub hbar: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "one_u32")]
    pub sigma: u32,
    #[serde(default = "yes")]
    pub time_rescaled: bool,
    #[serde(default)]
    pub c_sigma: CSigmaConvention,
}

fn one_u32() -> u32 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Explicit step; otherwise the beat period divided by `steps_per_period`.
    pub dt: Option<f64>,
    #[serde(default = "default_steps_per_period")]
    pub steps_per_period: usize,
    /// Explicit final time; otherwise `periods` beat periods.
    pub t_final: Option<f64>,
    #[serde(default = "one")]
    pub periods: f64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    pub snapshot_stride: Option<usize>,
    #[serde(default)]
    pub scheme: TimeScheme,
    pub modes: Option<usize>,
}

fn default_steps_per_period() -> usize {
    10_000
}

fn default_stride() -> usize {
    100
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            dt: None,
            steps_per_period: default_steps_per_period(),
            t_final: None,
            periods: 1.0,
            output_stride: default_stride(),
            snapshot_stride: None,
            scheme: TimeScheme::default(),
            modes: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_eigenpairs")]
    pub eigenpairs: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_agmon_resolution")]
    pub agmon_resolution: usize,
}

fn default_eigenpairs() -> usize {
    3
}

fn default_tol() -> f64 {
    1e-10
}

fn default_agmon_resolution() -> usize {
    2048
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eigenpairs: default_eigenpairs(),
            tol: default_tol(),
            seed: 0,
            agmon_resolution: default_agmon_resolution(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
    #[serde(default)]
    pub dump_eigenvectors: bool,
}

/// Initial datum `c_R φ_R + c_L φ_L`, renormalised.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default = "right_amp")]
    pub c_r: [f64; 2],
    #[serde(default)]
    pub c_l: [f64; 2],
}

fn right_amp() -> [f64; 2] {
    [1.0, 0.0]
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            c_r: right_amp(),
            c_l: [0.0, 0.0],
        }
    }
}

impl InitialConfig {
    /// Normalised amplitudes `(c_R, c_L)`.
    pub fn amplitudes(&self) -> Result<(C64, C64)> {
        let cr = C64::new(self.c_r[0], self.c_r[1]);
        let cl = C64::new(self.c_l[0], self.c_l[1]);
        let n = (cr.norm_sqr() + cl.norm_sqr()).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Config("initial amplitudes must not all vanish".into()));
        }
        Ok((cr / n, cl / n))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoModeConfig {
    /// Coupling ratios `εC_σ/ω` for the self-trapping scan.
    #[serde(default)]
    pub scan_eta: Vec<f64>,
    #[serde(default = "default_scan_periods")]
    pub scan_periods: f64,
    #[serde(default = "default_steps_per_period")]
    pub steps_per_period: usize,
    #[serde(default = "default_bisection_width")]
    pub bisection_width: f64,
    /// Window `e < window` for the two-mode comparison slope.
    #[serde(default = "default_window")]
    pub compare_window: f64,
}

fn default_scan_periods() -> f64 {
    10.0
}

fn default_bisection_width() -> f64 {
    0.01
}

fn default_window() -> f64 {
    0.1
}

impl Default for TwoModeConfig {
    fn default() -> Self {
        Self {
            scan_eta: Vec::new(),
            scan_periods: default_scan_periods(),
            steps_per_period: default_steps_per_period(),
            bisection_width: default_bisection_width(),
            compare_window: default_window(),
        }
    }
}

impl TwoModeConfig {
    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions {
            periods: self.scan_periods,
            steps_per_period: self.steps_per_period,
            bisection_width: self.bisection_width,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub hbar: Vec<f64>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    fn check(&self) -> Result<()> {
        if self.time.steps_per_period == 0 || self.twomode.steps_per_period == 0 {
            return Err(Error::Config("steps_per_period must be positive".into()));
        }
        if self.time.output_stride == 0 {
            return Err(Error::Config("output_stride must be positive".into()));
        }
        if !(self.time.periods > 0.0) {
            return Err(Error::Config("periods must be positive".into()));
        }
        if self.solver.eigenpairs < 2 {
            return Err(Error::Config("eigenpairs must be at least 2".into()));
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<Potential> {
        self.potential.build()
    }

    pub fn dim(&self) -> usize {
        match &self.potential {
            PotentialConfig::Quartic {
                transverse_freqs, ..
            } => 1 + transverse_freqs.len(),
            PotentialConfig::HarmonicBarrier { dim, .. } | PotentialConfig::Harmonic { dim, .. } => *dim,
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dim(), self.grid.half_width, self.grid.n)
    }

    /// Time-stepping parameters resolved against the computed splitting.
    pub fn sim_config(&self, s: &SpectralData) -> Result<SimConfig> {
        let p = &self.physics;
        let scale = if p.time_rescaled { 1.0 } else { 1.0 / p.hbar };
        let period = s.beat_period() / scale;
        let dt = self
            .time
            .dt
            .unwrap_or(period / self.time.steps_per_period as f64);
        let t_final = self.time.t_final.unwrap_or(self.time.periods * period);
        let cfg = SimConfig {
            hbar: p.hbar,
            epsilon: p.epsilon,
            sigma: p.sigma,
            dim: self.dim(),
            time_rescaled: p.time_rescaled,
            dt,
            t_final,
            output_stride: self.time.output_stride,
            snapshot_stride: self.time.snapshot_stride,
            scheme: self.time.scheme,
            modes: self.time.modes,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[potential]
family = "quartic"

[grid]
n = 128
half_width = 4.0

[physics]
hbar = 0.3
"#;

    #[test]
    fn minimal_config_defaults() {
        let c = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.dim(), 1);
        assert_eq!(c.physics.sigma, 1);
        assert!(c.physics.time_rescaled);
        assert_eq!(c.time.scheme, TimeScheme::FourierStrang);
        assert_eq!(c.physics.c_sigma, CSigmaConvention::Projection);
        assert!(c.sweep.is_none());
        c.potential().unwrap();
        c.grid().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let typo = MINIMAL.replace("hbar = 0.3", "hbar = 0.3\nepsilonn = 0.1");
        assert!(matches!(RunConfig::from_toml_str(&typo), Err(Error::Config(_))));
        let section = format!("{MINIMAL}\n[solvr]\ntol = 1e-9\n");
        assert!(RunConfig::from_toml_str(&section).is_err());
        let family = MINIMAL.replace("\"quartic\"", "\"sextic\"");
        assert!(RunConfig::from_toml_str(&family).is_err());
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
[potential]
family = "harmonic_barrier"
omega0 = 1.0
barrier_height = 4.0
barrier_width = 0.5
dim = 2

[grid]
n = 64
half_width = 6.0

[physics]
hbar = 0.2
epsilon = -0.01
sigma = 2
time_rescaled = false
c_sigma = "fourth_power"

[time]
dt = 0.01
t_final = 1.0
output_stride = 10
scheme = "eigenbasis_strang"
modes = 32

[solver]
eigenpairs = 4
tol = 1e-9
seed = 42

[output]
dir = "out"

[initial]
c_r = [1.0, 0.0]
c_l = [0.0, 1.0]

[twomode]
scan_eta = [0.0, 1.0, 2.0]

[sweep]
hbar = [0.3, 0.25, 0.2, 0.15]
"#;
        let c = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(c.dim(), 2);
        assert_eq!(c.time.modes, Some(32));
        let (cr, cl) = c.initial.amplitudes().unwrap();
        assert!((cr.norm_sqr() + cl.norm_sqr() - 1.0).abs() < 1e-15);
        assert_eq!(c.sweep.unwrap().hbar.len(), 4);
    }

    #[test]
    fn invalid_values_rejected() {
        let zero = MINIMAL.replace("[physics]", "[time]\noutput_stride = 0\n\n[physics]");
        assert!(RunConfig::from_toml_str(&zero).is_err());
        let amps = InitialConfig {
            c_r: [0.0, 0.0],
            c_l: [0.0, 0.0],
        };
        assert!(amps.amplitudes().is_err());
    }
}
