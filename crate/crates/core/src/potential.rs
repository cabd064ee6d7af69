//! Symmetric double-well potentials.
//!
//! Every potential is normalised so that its two global minima sit at
//! `x± = (±a, …)` with value `v_min = 1`, and is symmetric under the
//! reflection `x₁ → −x₁`. Two builtin families are provided together with a
//! custom escape hatch:
//!
//! * quartic: `V(x) = 1 + β(x₁² − a²)² + Σ_{j≥2} ω_j² x_j²`
//! * harmonic + Gaussian barrier: `V(x) = 1 + ω₀²|x|² + B exp(−x₁²/s²) − shift`
//!
//! The single-well oscillator `V(x) = 1 + ω₀²|x|²` is also available; it is
//! not a double well and is used as a negative control.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::discretization::Grid;
use crate::error::{Error, Result};

/// A point in R^d, padded with zeros when `d = 1`.
pub type Point = [f64; 2];

pub type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Family {
    Quartic {
        a: f64,
        beta: f64,
        transverse_freqs: Vec<f64>,
    },
    HarmonicBarrier {
        omega0: f64,
        barrier_height: f64,
        barrier_width: f64,
        shift: f64,
    },
    Harmonic {
        omega0: f64,
    },
    Custom(EvalFn),
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Quartic {
                a,
                beta,
                transverse_freqs,
            } => f
                .debug_struct("Quartic")
                .field("a", a)
                .field("beta", beta)
                .field("transverse_freqs", transverse_freqs)
                .finish(),
            Family::HarmonicBarrier {
                omega0,
                barrier_height,
                barrier_width,
                shift,
            } => f
                .debug_struct("HarmonicBarrier")
                .field("omega0", omega0)
                .field("barrier_height", barrier_height)
                .field("barrier_width", barrier_width)
                .field("shift", shift)
                .finish(),
            Family::Harmonic { omega0 } => {
                f.debug_struct("Harmonic").field("omega0", omega0).finish()
            }
            Family::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Potential {
    dim: usize,
    family: Family,
    x_minus: Point,
    x_plus: Point,
    v_min: f64,
    growth_exponent: f64,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "dimension must be 1 or 2, got {dim}"
        )))
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

impl Potential {
    /// `V(x) = 1 + β(x₁² − a²)² + Σ ω_j² x_j²`, minima at `(±a, 0)`.
    pub fn builtin_quartic(a: f64, beta: f64, transverse_freqs: &[f64]) -> Result<Self> {
        positive("a", a)?;
        positive("beta", beta)?;
        let dim = 1 + transverse_freqs.len();
        check_dim(dim)?;
        for &w in transverse_freqs {
            positive("transverse frequency", w)?;
        }
        Ok(Self {
            dim,
            family: Family::Quartic {
                a,
                beta,
                transverse_freqs: transverse_freqs.to_vec(),
            },
            x_minus: [-a, 0.0],
            x_plus: [a, 0.0],
            v_min: 1.0,
            growth_exponent: 4.0,
        })
    }

    /// Harmonic trap split by a Gaussian bump along `x₁`, shifted so that
    /// the minimum value is exactly 1.
    ///
    /// The minima are the nonzero roots of `∂₁V` on the `x₁` axis. They exist
    /// only when `B > ω₀² s²`; otherwise the origin is the unique minimum and
    /// construction fails.
    pub fn builtin_harmonic_barrier(
        omega0: f64,
        barrier_height: f64,
        barrier_width: f64,
        dim: usize,
    ) -> Result<Self> {
        check_dim(dim)?;
        positive("omega0", omega0)?;
        positive("barrier_width", barrier_width)?;
        if !(barrier_height.is_finite() && barrier_height >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "barrier_height must be nonnegative, got {barrier_height}"
            )));
        }
        let w2 = omega0 * omega0;
        let s2 = barrier_width * barrier_width;
        if barrier_height <= w2 * s2 {
            return Err(Error::NotADoubleWell(format!(
                "barrier height {barrier_height} ≤ ω₀²s² = {}: the origin is the only minimum",
                w2 * s2
            )));
        }
        // ∂₁V / (2x₁) = ω₀² − (B/s²) e^{−x₁²/s²}; increasing in |x₁|.
        let reduced = |x: f64| w2 - barrier_height / s2 * (-x * x / s2).exp();
        let reduced_dx = |x: f64| 2.0 * x * barrier_height / (s2 * s2) * (-x * x / s2).exp();
        let x_star = newton_bisect(reduced, reduced_dx, 0.0, barrier_width, 1e-12)?;
        let unshifted = 1.0 + w2 * x_star * x_star + barrier_height * (-x_star * x_star / s2).exp();
        Ok(Self {
            dim,
            family: Family::HarmonicBarrier {
                omega0,
                barrier_height,
                barrier_width,
                shift: unshifted - 1.0,
            },
            x_minus: [-x_star, 0.0],
            x_plus: [x_star, 0.0],
            v_min: 1.0,
            growth_exponent: 2.0,
        })
    }

    /// Single harmonic well `1 + ω₀²|x|²`. Both "minima" coincide at the origin.
    pub fn harmonic(omega0: f64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        positive("omega0", omega0)?;
        Ok(Self {
            dim,
            family: Family::Harmonic { omega0 },
            x_minus: [0.0, 0.0],
            x_plus: [0.0, 0.0],
            v_min: 1.0,
            growth_exponent: 2.0,
        })
    }

    /// Arbitrary user-supplied potential. Nothing is checked beyond the
    /// dimension; run [`verify_hypotheses`] to audit it.
    pub fn custom(
        dim: usize,
        eval: EvalFn,
        x_plus: Point,
        v_min: f64,
        growth_exponent: f64,
    ) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            family: Family::Custom(eval),
            x_minus: [-x_plus[0], x_plus[1]],
            x_plus,
            v_min,
            growth_exponent,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.family {
            Family::Quartic {
                a,
                beta,
                transverse_freqs,
            } => {
                let q = x[0] * x[0] - a * a;
                let mut v = 1.0 + beta * q * q;
                for (w, xj) in transverse_freqs.iter().zip(&x[1..self.dim]) {
                    v += w * w * xj * xj;
                }
                v
            }
            Family::HarmonicBarrier {
                omega0,
                barrier_height,
                barrier_width,
                shift,
            } => {
                let r2: f64 = x[..self.dim].iter().map(|xi| xi * xi).sum();
                let s2 = barrier_width * barrier_width;
                1.0 + omega0 * omega0 * r2 + barrier_height * (-x[0] * x[0] / s2).exp() - shift
            }
            Family::Harmonic { omega0 } => {
                let r2: f64 = x[..self.dim].iter().map(|xi| xi * xi).sum();
                1.0 + omega0 * omega0 * r2
            }
            Family::Custom(f) => f(&x[..self.dim]),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn x_minus(&self) -> Point {
        self.x_minus
    }

    pub fn x_plus(&self) -> Point {
        self.x_plus
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn growth_exponent(&self) -> f64 {
        self.growth_exponent
    }

    /// Distance between the two minima.
    pub fn well_separation(&self) -> f64 {
        dist(&self.x_plus, &self.x_minus, self.dim)
    }

    /// Exact Agmon distance where one is known (1D quartic: `(4/3)√β a³`).
    pub fn agmon_closed_form(&self) -> Option<f64> {
        match &self.family {
            Family::Quartic { a, beta, .. } => Some(4.0 / 3.0 * beta.sqrt() * a * a * a),
            _ => None,
        }
    }

    /// Replaces the evaluation function, keeping the recorded minima. Used to
    /// build negative controls for the hypothesis verifier.
    pub fn with_eval(&self, eval: EvalFn) -> Self {
        Self {
            family: Family::Custom(eval),
            ..self.clone()
        }
    }
}

fn dist(p: &Point, q: &Point, dim: usize) -> f64 {
    (0..dim).map(|j| (p[j] - q[j]).powi(2)).sum::<f64>().sqrt()
}

/// Root of an increasing function on `(lo, ∞)` with `f(lo) < 0`. Newton steps
/// are taken when they stay inside the current bracket, bisection otherwise.
fn newton_bisect(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    lo: f64,
    guess: f64,
    tol: f64,
) -> Result<f64> {
    let mut lo = lo;
    let mut hi = guess.max(lo + 1e-3);
    let mut expansions = 0;
    while f(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Consistency("could not bracket the minimum".into()));
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = df(x);
        let newton = x - fx / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= tol * x.abs().max(1.0) || hi - lo <= tol {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub symmetric: bool,
    pub two_minima: bool,
    pub above_min_off_minima: bool,
    pub minima_values_ok: bool,
    pub hessian_positive: bool,
    pub minimizers_found: Vec<Point>,
    pub hessian_eigen_lower: [f64; 2],
    pub growth_exponent: f64,
    /// Hypotheses that cannot be certified on a finite grid.
    pub assumed: Vec<String>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.symmetric
            && self.two_minima
            && self.above_min_off_minima
            && self.minima_values_ok
            && self.hessian_positive
    }
}

/// Audits a potential on a probe grid.
pub fn verify_hypotheses(v: &Potential, probe: &Grid) -> HypothesisReport {
    let dim = v.dim();
    let h = probe.spacing();
    let values: Vec<f64> = (0..probe.len()).map(|i| v.eval(&probe.coords(i))).collect();

    let symmetric = (0..probe.len()).all(|i| {
        let mut x = probe.coords(i);
        let vx = values[i];
        x[0] = -x[0];
        (v.eval(&x) - vx).abs() <= 1e-12 * (1.0 + vx.abs())
    });

    // Discrete local minima that are also global within a relative tolerance.
    let global = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol_v = 1e-9 * (1.0 + global.abs());
    let mut candidates: Vec<Point> = Vec::new();
    for i in 0..probe.len() {
        if values[i] > global + tol_v {
            continue;
        }
        if probe
            .neighbors(i)
            .into_iter()
            .all(|j| values[i] <= values[j])
        {
            candidates.push(probe.coords(i));
        }
    }
    let mut clusters: Vec<Point> = Vec::new();
    for c in candidates {
        if !clusters
            .iter()
            .any(|k| dist(k, &c, dim) <= 1.5 * h * (dim as f64).sqrt())
        {
            clusters.push(c);
        }
    }
    let reach = h * (dim as f64).sqrt() + 1e-12;
    let two_minima = clusters.len() == 2
        && v.well_separation() > reach
        && clusters.iter().any(|c| dist(c, &v.x_plus(), dim) <= reach)
        && clusters.iter().any(|c| dist(c, &v.x_minus(), dim) <= reach);

    let minima_values_ok = [v.x_minus(), v.x_plus()]
        .iter()
        .all(|m| (v.eval(m) - v.v_min()).abs() <= 1e-12 * (1.0 + v.v_min().abs()));

    let above_min_off_minima = (0..probe.len()).all(|i| {
        let x = probe.coords(i);
        let at_min = dist(&x, &v.x_plus(), dim) <= 1e-12 || dist(&x, &v.x_minus(), dim) <= 1e-12;
        at_min || values[i] > v.v_min()
    });

    let hp = hessian_lower_eigen(v, &v.x_plus());
    let hm = hessian_lower_eigen(v, &v.x_minus());
    let hessian_positive = hp > 1e-6 && hm > 1e-6;

    HypothesisReport {
        symmetric,
        two_minima,
        above_min_off_minima,
        minima_values_ok,
        hessian_positive,
        minimizers_found: clusters,
        hessian_eigen_lower: [hm, hp],
        growth_exponent: v.growth_exponent(),
        assumed: vec![
            format!(
                "polynomial growth |V(x)| ~ |x|^{} at infinity",
                v.growth_exponent()
            ),
            "global bounds on derivatives of V (smoothness at infinity)".to_string(),
        ],
    }
}

/// Smallest eigenvalue of the central-difference Hessian.
fn hessian_lower_eigen(v: &Potential, x: &Point) -> f64 {
    let d = 1e-4;
    let at = |dx: f64, dy: f64| v.eval(&[x[0] + dx, x[1] + dy]);
    let f0 = at(0.0, 0.0);
    let hxx = (at(d, 0.0) - 2.0 * f0 + at(-d, 0.0)) / (d * d);
    if v.dim() == 1 {
        return hxx;
    }
    let hyy = (at(0.0, d) - 2.0 * f0 + at(0.0, -d)) / (d * d);
    let hxy = (at(d, d) - at(d, -d) - at(-d, d) + at(-d, -d)) / (4.0 * d * d);
    let mean = 0.5 * (hxx + hyy);
    let rad = (0.25 * (hxx - hyy).powi(2) + hxy * hxy).sqrt();
    mean - rad
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AgmonMethod {
    ClosedForm1d,
    Quadrature1d,
    Eikonal2d,
}

impl AgmonMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            AgmonMethod::ClosedForm1d => "closed_form_1d",
            AgmonMethod::Quadrature1d => "quadrature_1d",
            AgmonMethod::Eikonal2d => "eikonal_2d",
        }
    }
}

#[derive(Clone, Debug)]
pub struct AgmonResult {
    pub gamma: f64,
    /// Minimising grid path from `x₋` to `x₊` (2D only).
    pub path: Vec<Point>,
    pub method: AgmonMethod,
    pub resolution: usize,
}

impl AgmonResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "gamma": self.gamma,
            "method": self.method.as_str(),
            "resolution": self.resolution,
        })
    }
}

/// Agmon distance `Γ = inf_γ ∫_γ √(V − v_min)` between the wells.
///
/// In 1D every path joining the wells covers the segment `[x₋, x₊]`, so the
/// segment integral (composite two-point Gauss–Legendre over `resolution`
/// panels) is the infimum. In 2D the metric shortest path is found by
/// Dijkstra on an 8-neighbour grid graph of `resolution` nodes per axis, which
/// is first-order accurate off the axes.
pub fn agmon_distance(v: &Potential, resolution: usize) -> Result<AgmonResult> {
    if resolution < 64 {
        return Err(Error::InvalidParameter(format!(
            "Agmon resolution must be at least 64, got {resolution}"
        )));
    }
    if v.well_separation() <= 1e-12 {
        return Err(Error::InvalidParameter(
            "the two wells coincide; no Agmon distance between them".into(),
        ));
    }
    let weight = |x: &[f64]| (v.eval(x) - v.v_min()).max(0.0).sqrt();
    match v.dim() {
        1 => {
            let (lo, hi) = (v.x_minus()[0], v.x_plus()[0]);
            let panel = (hi - lo) / resolution as f64;
            let g = 0.5 / 3f64.sqrt();
            let gamma: f64 = (0..resolution)
                .map(|p| {
                    let mid = lo + (p as f64 + 0.5) * panel;
                    0.5 * panel * (weight(&[mid - g * panel]) + weight(&[mid + g * panel]))
                })
                .sum();
            Ok(AgmonResult {
                gamma,
                path: Vec::new(),
                method: AgmonMethod::Quadrature1d,
                resolution,
            })
        }
        _ => agmon_dijkstra(v, resolution, weight),
    }
}

#[derive(Copy, Clone, PartialEq)]
struct State {
    cost: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| self.node.cmp(&other.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn agmon_dijkstra(
    v: &Potential,
    resolution: usize,
    weight: impl Fn(&[f64]) -> f64,
) -> Result<AgmonResult> {
    // Odd node count so that the symmetry axis is a grid line; the minima sit
    // exactly on nodes at ±m·h and the box extends half a separation beyond.
    let nodes = resolution | 1;
    let half = (nodes - 1) / 2;
    let m = (2 * half) / 3;
    let a = v.x_plus()[0];
    let h = a / m as f64;
    let y0 = v.x_plus()[1];
    let coord = |i: usize, j: usize| -> Point {
        [
            (i as f64 - half as f64) * h,
            y0 + (j as f64 - half as f64) * h,
        ]
    };
    let w: Vec<f64> = (0..nodes * nodes)
        .map(|idx| weight(&coord(idx / nodes, idx % nodes)))
        .collect();

    let start = (half - m) * nodes + half;
    let goal = (half + m) * nodes + half;
    let mut best = vec![f64::INFINITY; nodes * nodes];
    let mut prev = vec![usize::MAX; nodes * nodes];
    let mut heap = BinaryHeap::new();
    best[start] = 0.0;
    heap.push(State {
        cost: 0.0,
        node: start,
    });
    let diag = std::f64::consts::SQRT_2 * h;
    while let Some(State { cost, node }) = heap.pop() {
        if node == goal {
            break;
        }
        if cost > best[node] {
            continue;
        }
        let (i, j) = ((node / nodes) as isize, (node % nodes) as isize);
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ni, nj) = (i + di, j + dj);
                if ni < 0 || nj < 0 || ni >= nodes as isize || nj >= nodes as isize {
                    continue;
                }
                let next = ni as usize * nodes + nj as usize;
                let len = if di != 0 && dj != 0 { diag } else { h };
                let c = cost + len * 0.5 * (w[node] + w[next]);
                if c < best[next] {
                    best[next] = c;
                    prev[next] = node;
                    heap.push(State { cost: c, node: next });
                }
            }
        }
    }
    let mut path = vec![coord(goal / nodes, goal % nodes)];
    let mut cur = goal;
    while cur != start {
        cur = prev[cur];
        path.push(coord(cur / nodes, cur % nodes));
    }
    path.reverse();
    Ok(AgmonResult {
        gamma: best[goal],
        path,
        method: AgmonMethod::Eikonal2d,
        resolution: nodes,
    })
}
