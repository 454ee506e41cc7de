//! Pinned Wiener measure on paths from `x` to `y` over `[0, t]`.
//!
//! The measure has total mass `φ(x − y, t)`, not 1. Integrals of cylindrical
//! functionals are computed against the normalized Brownian-bridge law and
//! then rescaled by that mass, both in the tensor quadrature and in the Monte
//! Carlo estimator.
//!
//! The state space is scalar. The kernels factor over coordinates in higher
//! dimensions, so a vector state would be a product of these routines.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::numerics::{adaptive_integrate_with_breaks, gauss_hermite, pairwise_sum};

pub const DEFAULT_D: f64 = 0.5;
/// Upper limit on `N · n^N` kernel evaluations for tensor quadrature.
pub const WORK_BUDGET: f64 = 1e8;
pub const DEFAULT_CYLINDER_TOL: f64 = 1e-11;
/// Deepest box recursion accepted by [`cylinder_probability`].
pub const MAX_CYLINDER_TIMES: usize = 6;

const SQRT_PI: f64 = 1.772_453_850_905_516;
/// Standardized half-width beyond which a Gaussian factor is dropped.
const Z_WINDOW: f64 = 12.0;

/// `φ(dx, dt) = (4πD·dt)^{-1/2} exp(−dx²/(4D·dt))`.
pub fn heat_kernel(dx: f64, dt: f64, d: f64) -> Result<f64> {
    if !(dt > 0.0) || !(d > 0.0) {
        return Err(invalid(format!("heat kernel needs dt > 0 and D > 0, got dt={dt}, D={d}")));
    }
    if !dx.is_finite() {
        return Err(invalid(format!("displacement must be finite, got {dx}")));
    }
    Ok(kernel(dx, dt, d))
}

fn kernel(dx: f64, dt: f64, d: f64) -> f64 {
    let four_dt = 4.0 * d * dt;
    (-dx * dx / four_dt).exp() / (std::f64::consts::PI * four_dt).sqrt()
}

/// Endpoints, horizon and diffusion coefficient of the pinned measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WienerParams {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub d: f64,
}

impl WienerParams {
    pub fn new(x: f64, y: f64, t: f64, d: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(invalid("endpoints must be finite"));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(invalid(format!("horizon must be positive, got {t}")));
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(invalid(format!("diffusion coefficient must be positive, got {d}")));
        }
        Ok(WienerParams { x, y, t, d })
    }

    /// Total mass `φ(x − y, t)`.
    pub fn mass(&self) -> f64 {
        kernel(self.x - self.y, self.t, self.d)
    }

    fn check_times(&self, times: &[f64]) -> Result<()> {
        if times.iter().any(|s| !(*s > 0.0 && *s < self.t)) {
            return Err(invalid(format!("times must lie in (0, {})", self.t)));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("times must be strictly increasing"));
        }
        Ok(())
    }

    /// Mean and standard deviation of `γ(times[i])` given `γ(prev_time) = a`
    /// and the pinned endpoint.
    fn bridge_step(&self, prev_time: f64, a: f64, time: f64) -> (f64, f64) {
        let gap = time - prev_time;
        let rest = self.t - prev_time;
        let mean = a + gap / rest * (self.y - a);
        let var = 2.0 * self.d * gap * (self.t - time) / rest;
        (mean, var.sqrt())
    }
}

type PathFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A function of the path through its values at finitely many times.
#[derive(Clone)]
pub struct CylindricalFunctional {
    times: Vec<f64>,
    f: PathFn,
    bound: Option<f64>,
}

impl fmt::Debug for CylindricalFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylindricalFunctional")
            .field("times", &self.times)
            .field("bound", &self.bound)
            .finish()
    }
}

impl CylindricalFunctional {
    pub fn new<F>(times: Vec<f64>, f: F, bound: Option<f64>) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if times.iter().any(|s| !s.is_finite()) || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("times must be finite and strictly increasing"));
        }
        if let Some(b) = bound {
            if !(b >= 0.0) {
                return Err(invalid(format!("sup bound must be nonnegative, got {b}")));
            }
        }
        Ok(CylindricalFunctional {
            times,
            f: Arc::new(f),
            bound,
        })
    }

    pub fn constant(c: f64) -> Self {
        CylindricalFunctional {
            times: Vec::new(),
            f: Arc::new(move |_| c),
            bound: Some(c.abs()),
        }
    }

    /// `γ(times[index])^power`.
    pub fn monomial(times: Vec<f64>, index: usize, power: u32) -> Result<Self> {
        if index >= times.len() {
            return Err(invalid(format!("index {index} out of range for {} times", times.len())));
        }
        Self::new(times, move |p| p[index].powi(power as i32), if power == 0 { Some(1.0) } else { None })
    }

    /// `∏_i γ(t_i)^{powers[i]}`.
    pub fn product(times: Vec<f64>, powers: Vec<u32>) -> Result<Self> {
        if powers.len() != times.len() {
            return Err(invalid("one power per time is required"));
        }
        let bound = powers.iter().all(|&p| p == 0).then_some(1.0);
        Self::new(
            times,
            move |p| p.iter().zip(&powers).map(|(v, &k)| v.powi(k as i32)).product(),
            bound,
        )
    }

    /// Indicator of the cylinder set.
    pub fn indicator(set: &CylinderSet) -> Result<Self> {
        let boxes = set.boxes.clone();
        Self::new(
            set.times.clone(),
            move |p| {
                if p.iter().zip(&boxes).all(|(v, b)| b.contains(*v)) {
                    1.0
                } else {
                    0.0
                }
            },
            Some(1.0),
        )
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn eval(&self, path: &[f64]) -> f64 {
        (self.f)(path)
    }

    /// The same functional read off a finer time grid containing its own.
    pub fn lift(&self, grid: &[f64]) -> Result<Self> {
        let index: Vec<usize> = self
            .times
            .iter()
            .map(|s| {
                grid.iter()
                    .position(|g| g == s)
                    .ok_or_else(|| invalid(format!("time {s} missing from the refined grid")))
            })
            .collect::<Result<_>>()?;
        let inner = self.f.clone();
        Self::new(
            grid.to_vec(),
            move |p| {
                let picked: Vec<f64> = index.iter().map(|&i| p[i]).collect();
                inner(&picked)
            },
            self.bound,
        )
    }
}

/// A closed interval, possibly unbounded. Empty when `lo > hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn real_line() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.is_empty() || (self.lo <= other.lo && other.hi <= self.hi)
    }
}

/// Paths with `γ(t_i) ∈ V_i` for each `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderSet {
    times: Vec<f64>,
    boxes: Vec<Interval>,
}

impl CylinderSet {
    pub fn new(times: Vec<f64>, boxes: Vec<Interval>) -> Result<Self> {
        if times.is_empty() || times.len() != boxes.len() {
            return Err(invalid("a cylinder set needs one box per time and at least one time"));
        }
        if times.iter().any(|s| !s.is_finite()) || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("times must be finite and strictly increasing"));
        }
        if boxes.iter().any(|b| b.lo.is_nan() || b.hi.is_nan()) {
            return Err(invalid("box endpoints must not be NaN"));
        }
        Ok(CylinderSet { times, boxes })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn boxes(&self) -> &[Interval] {
        &self.boxes
    }

    /// The same set with an extra, unconstrained time coordinate.
    pub fn with_free_time(&self, s: f64) -> Result<Self> {
        let at = self.times.partition_point(|&u| u < s);
        if self.times.get(at) == Some(&s) {
            return Err(invalid(format!("time {s} already present")));
        }
        let mut times = self.times.clone();
        let mut boxes = self.boxes.clone();
        times.insert(at, s);
        boxes.insert(at, Interval::real_line());
        Self::new(times, boxes)
    }
}

/// Path values at the functional's times. Endpoints come from the params.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgePath {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
}

/// `|∫ φ(x−y, t−s) φ(y−z, s−u) dy − φ(x−z, t−u)|` with the integral by
/// `n_nodes`-point Gauss–Hermite.
///
/// The narrower of the two kernels serves as the Hermite weight and the wider
/// one is the integrand, which keeps the integrand's scale at least as large
/// as the weight's.
pub fn check_compatibility(x: f64, z: f64, u: f64, s: f64, t: f64, d: f64, n_nodes: usize) -> Result<f64> {
    if !(u < s && s < t) {
        return Err(invalid(format!("need u < s < t, got u={u}, s={s}, t={t}")));
    }
    if n_nodes < 8 {
        return Err(invalid(format!("need at least 8 nodes, got {n_nodes}")));
    }
    if !(d > 0.0) || !x.is_finite() || !z.is_finite() {
        return Err(invalid("need D > 0 and finite endpoints"));
    }
    let rule = gauss_hermite(n_nodes)?;
    let (late, early) = (t - s, s - u);
    let lhs = if late <= early {
        let scale = (4.0 * d * late).sqrt();
        rule.integrate(|xi| kernel(x + scale * xi - z, early, d)) / SQRT_PI
    } else {
        let scale = (4.0 * d * early).sqrt();
        rule.integrate(|xi| kernel(x - (z + scale * xi), late, d)) / SQRT_PI
    };
    Ok((lhs - kernel(x - z, t - u, d)).abs())
}

fn std_normal_mass(a: f64, b: f64) -> f64 {
    // Φ(b) − Φ(a), written to keep accuracy in either tail.
    let r = std::f64::consts::FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (libm::erfc(a * r) - libm::erfc(b * r))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b * r) - libm::erfc(-a * r))
    } else {
        1.0 - 0.5 * (libm::erfc(-a * r) + libm::erfc(b * r))
    }
}

/// `𝒲(C) = ∫_{V_1}…∫_{V_N} ∏ φ(x_i − x_{i−1}, t_i − t_{i−1}) dx` with the
/// endpoint fixed at `y`.
///
/// Computed as `φ(x − y, t)` times the bridge probability of the boxes. The
/// bridge is Markov, so the probability is a nested integral of one-step
/// Gaussian transitions: the last box is closed form, the others use adaptive
/// Gauss–Kronrod on the standardized window `|z| ≤ 12`. Tolerances tighten by
/// a factor 10 per nesting level so that inner noise stays below the outer
/// error estimate.
pub fn cylinder_probability(set: &CylinderSet, params: &WienerParams, tol: f64) -> Result<f64> {
    params.check_times(&set.times)?;
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let n = set.times.len();
    if n > MAX_CYLINDER_TIMES {
        return Err(Error::Budget {
            work: n as f64,
            limit: MAX_CYLINDER_TIMES as f64,
        });
    }
    if set.boxes.iter().any(Interval::is_empty) {
        return Ok(0.0);
    }
    let bridge = bridge_box_probability(set, params, 0, 0.0, params.x, tol)?;
    Ok(params.mass() * bridge.clamp(0.0, 1.0))
}

fn bridge_box_probability(
    set: &CylinderSet,
    params: &WienerParams,
    level: usize,
    prev_time: f64,
    prev: f64,
    tol: f64,
) -> Result<f64> {
    let time = set.times[level];
    let (m, s) = params.bridge_step(prev_time, prev, time);
    let v = set.boxes[level];
    let lo = ((v.lo - m) / s).max(-Z_WINDOW);
    let hi = ((v.hi - m) / s).min(Z_WINDOW);
    if level + 1 == set.times.len() {
        return Ok(if v.lo <= m - Z_WINDOW * s && v.hi >= m + Z_WINDOW * s {
            1.0
        } else {
            std_normal_mass((v.lo - m) / s, (v.hi - m) / s)
        });
    }
    if !(lo < hi) {
        return Ok(0.0);
    }
    let inner_tol = tol / 10.0;
    let failure = std::cell::Cell::new(None);
    let integrand = |z: f64| {
        let pos = m + s * z;
        let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        match bridge_box_probability(set, params, level + 1, time, pos, inner_tol) {
            Ok(p) => density * p,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        }
    };
    let mut breaks = vec![lo];
    breaks.extend((-11..=11).map(|k| k as f64).filter(|&k| k > lo && k < hi));
    breaks.push(hi);
    let result = adaptive_integrate_with_breaks(integrand, &breaks, tol);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    result
}

/// Value of the tensor rule and the work it took.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub n_nodes: usize,
    pub evaluations: f64,
}

fn check_budget(n: usize, n_nodes: usize) -> Result<f64> {
    let work = n.max(1) as f64 * (n_nodes as f64).powi(n as i32);
    if work > WORK_BUDGET {
        return Err(Error::Budget {
            work,
            limit: WORK_BUDGET,
        });
    }
    Ok(work)
}

/// `∫ F d𝒲^{x,y;t}` by tensor Gauss–Hermite in bridge coordinates.
///
/// Axis `i` is standardized by the conditional mean and deviation of
/// `γ(t_i)` given `γ(t_{i−1})` and the endpoint, so `F̃` polynomial of degree
/// below `2n` per coordinate is integrated exactly. The first axis is split
/// across threads; each branch sums in node order and branches are combined
/// with a pairwise sum.
pub fn wiener_integral_quadrature(
    functional: &CylindricalFunctional,
    params: &WienerParams,
    n_nodes: usize,
) -> Result<QuadratureEstimate> {
    params.check_times(&functional.times)?;
    if n_nodes < 8 {
        return Err(invalid(format!("need at least 8 nodes per axis, got {n_nodes}")));
    }
    let n = functional.times.len();
    let evaluations = check_budget(n, n_nodes)?;
    let rule = gauss_hermite(n_nodes)?;
    let nodes = rule.nodes();
    let weights: Vec<f64> = rule.weights().iter().map(|w| w / SQRT_PI).collect();

    if n == 0 {
        let v = functional.eval(&[]);
        return finish(v, params, n_nodes, evaluations);
    }

    let bad = AtomicUsize::new(usize::MAX);
    let branches: Vec<f64> = (0..n_nodes)
        .into_par_iter()
        .map(|k| {
            let mut path = vec![0.0; n];
            let (m, s) = params.bridge_step(0.0, params.x, functional.times[0]);
            path[0] = m + std::f64::consts::SQRT_2 * s * nodes[k];
            weights[k] * nested(functional, params, nodes, &weights, 1, &mut path, &bad)
        })
        .collect();
    let value = pairwise_sum(&branches);
    if !value.is_finite() {
        return Err(Error::Numeric {
            at: bad.load(Ordering::Relaxed) as f64,
            value,
        });
    }
    finish(value, params, n_nodes, evaluations)
}

fn finish(
    bridge_mean: f64,
    params: &WienerParams,
    n_nodes: usize,
    evaluations: f64,
) -> Result<QuadratureEstimate> {
    if !bridge_mean.is_finite() {
        return Err(Error::Numeric {
            at: 0.0,
            value: bridge_mean,
        });
    }
    Ok(QuadratureEstimate {
        value: params.mass() * bridge_mean,
        n_nodes,
        evaluations,
    })
}

fn nested(
    functional: &CylindricalFunctional,
    params: &WienerParams,
    nodes: &[f64],
    weights: &[f64],
    level: usize,
    path: &mut [f64],
    bad: &AtomicUsize,
) -> f64 {
    if level == path.len() {
        let v = functional.eval(path);
        if !v.is_finite() {
            bad.store(level, Ordering::Relaxed);
        }
        return v;
    }
    let times = &functional.times;
    let (m, s) = params.bridge_step(times[level - 1], path[level - 1], times[level]);
    let mut acc = 0.0;
    for (xi, w) in nodes.iter().zip(weights) {
        path[level] = m + std::f64::consts::SQRT_2 * s * xi;
        acc += w * nested(functional, params, nodes, weights, level + 1, path, bad);
    }
    acc
}

/// One row of a node-refinement table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementRow {
    pub n_nodes: usize,
    pub value: f64,
    /// Change from the previous row; `None` on the first.
    pub delta: Option<f64>,
}

/// [`wiener_integral_quadrature`] at each node count in turn.
pub fn quadrature_refinement(
    functional: &CylindricalFunctional,
    params: &WienerParams,
    node_counts: &[usize],
) -> Result<Vec<RefinementRow>> {
    let mut rows: Vec<RefinementRow> = Vec::with_capacity(node_counts.len());
    for &n in node_counts {
        let value = wiener_integral_quadrature(functional, params, n)?.value;
        let delta = rows.last().map(|r| (value - r.value).abs());
        rows.push(RefinementRow {
            n_nodes: n,
            value,
            delta,
        });
    }
    Ok(rows)
}

/// Draws `γ(t_1), …, γ(t_N)` of the normalized bridge by sequential
/// conditioning on the previous point and the endpoint.
pub fn sample_bridge<R: Rng + ?Sized>(params: &WienerParams, times: &[f64], rng: &mut R) -> Result<BridgePath> {
    params.check_times(times)?;
    Ok(BridgePath {
        times: times.to_vec(),
        positions: draw_positions(params, times, rng),
    })
}

fn draw_positions<R: Rng + ?Sized>(params: &WienerParams, times: &[f64], rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let (mut prev_t, mut prev_x) = (0.0, params.x);
    for &s in times {
        let (m, sd) = params.bridge_step(prev_t, prev_x, s);
        let z: f64 = rng.sample(StandardNormal);
        prev_x = m + sd * z;
        prev_t = s;
        out.push(prev_x);
    }
    out
}

/// The generator for path `index` under `seed`: one ChaCha stream per path,
/// so results do not depend on how paths are scheduled.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Monte Carlo estimate with its standard error, both scaled by the mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

/// `φ(x − y, t) · mean F̃(γ)` over `n_paths` bridge paths.
pub fn wiener_integral_mc(
    functional: &CylindricalFunctional,
    params: &WienerParams,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    params.check_times(&functional.times)?;
    if n_paths < 100 {
        return Err(invalid(format!("need at least 100 paths, got {n_paths}")));
    }
    let values: Vec<std::result::Result<f64, Vec<f64>>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let path = draw_positions(params, &functional.times, &mut rng);
            let v = functional.eval(&path);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(path)
            }
        })
        .collect();
    let mut samples = Vec::with_capacity(n_paths);
    for (v, i) in values.into_iter().zip(0..) {
        match v {
            Ok(v) => samples.push(v),
            Err(path) => {
                let value = {
                    let mut rng = path_rng(seed, i);
                    let p = draw_positions(params, &functional.times, &mut rng);
                    functional.eval(&p)
                };
                return Err(Error::PathEvaluation { path, value });
            }
        }
    }
    let n = n_paths as f64;
    let mean = pairwise_sum(&samples) / n;
    let squares: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&squares) / (n - 1.0);
    let mass = params.mass();
    Ok(McEstimate {
        estimate: mass * mean,
        stderr: mass * (var / n).sqrt(),
        n_paths,
    })
}

/// Limit of quadrature values along a sequence, with successive changes.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    pub value: f64,
    pub values: Vec<f64>,
    pub deltas: Vec<f64>,
}

/// `lim_j ∫ F_j d𝒲` for `F_j → F` pointwise with `|F̃_j| ≤ G̃` for an
/// integrable dominator `G`.
///
/// All functionals are lifted to the union of their time grids. Domination is
/// checked at every quadrature node; a violation names the offending index.
/// Stabilization means the last change is below `tol`.
pub fn integrate_pointwise_limit(
    sequence: &[CylindricalFunctional],
    dominator: Option<&CylindricalFunctional>,
    params: &WienerParams,
    n_nodes: usize,
    tol: f64,
) -> Result<LimitReport> {
    let dominator = dominator.ok_or_else(|| invalid("a dominating functional is required"))?;
    if sequence.len() < 2 {
        return Err(invalid("need at least two terms to judge stabilization"));
    }
    let mut grid: Vec<f64> = sequence
        .iter()
        .chain(std::iter::once(dominator))
        .flat_map(|f| f.times.iter().copied())
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let g = dominator.lift(&grid)?;

    let mut values = Vec::with_capacity(sequence.len());
    for (j, f) in sequence.iter().enumerate() {
        let lifted = f.lift(&grid)?;
        let violations = Arc::new(AtomicUsize::new(0));
        let (fc, gc, seen) = (lifted, g.clone(), violations.clone());
        let checked = CylindricalFunctional::new(
            grid.clone(),
            move |p| {
                let v = fc.eval(p);
                if v.abs() > gc.eval(p).abs() * (1.0 + 1e-12) {
                    seen.fetch_add(1, Ordering::Relaxed);
                }
                v
            },
            f.bound,
        )?;
        let v = wiener_integral_quadrature(&checked, params, n_nodes)?.value;
        if violations.load(Ordering::Relaxed) > 0 {
            return Err(Error::ContractViolation {
                index: j,
                reason: "functional exceeds the dominator at a quadrature node".into(),
            });
        }
        values.push(v);
    }
    let deltas: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let last = *deltas.last().expect("two terms");
    let value = *values.last().expect("nonempty");
    if last >= tol {
        return Err(Error::Convergence {
            reason: format!("sequence did not stabilize to {tol}"),
            last: value,
            previous: values[values.len() - 2],
        });
    }
    Ok(LimitReport { value, values, deltas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn standard() -> WienerParams {
        WienerParams::new(0.0, 0.0, 1.0, DEFAULT_D).unwrap()
    }

    #[test]
    fn heat_kernel_examples() {
        let one = heat_kernel(0.0, 1.0, 1.0 / (4.0 * std::f64::consts::PI)).unwrap();
        assert!((one - 1.0).abs() < 1e-15);
        let v = heat_kernel(1.0, 1.0, 0.5).unwrap();
        let oracle = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 0.24197).abs() < 1e-5);
        assert!(heat_kernel(0.0, 0.0, 0.5).is_err());
        assert!(heat_kernel(0.0, 1.0, -1.0).is_err());
        assert_eq!(heat_kernel(0.3, 0.7, 0.5).unwrap(), heat_kernel(-0.3, 0.7, 0.5).unwrap());
    }

    #[test]
    fn heat_kernel_normalized() {
        // u = √(4D·dt) ξ turns the kernel into e^{−ξ²}/√π.
        let (dt, d) = (0.7f64, 0.5f64);
        let scale = (4.0 * d * dt).sqrt();
        let rule = gauss_hermite(32).unwrap();
        let total = rule.integrate(|xi| heat_kernel(scale * xi, dt, d).unwrap() * scale * (xi * xi).exp());
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn compatibility_examples() {
        assert!(check_compatibility(0.0, 0.0, 0.0, 0.5, 1.0, 0.5, 64).unwrap() < 1e-10);
        assert!(check_compatibility(1.0, -1.0, 0.0, 0.3, 1.0, 0.5, 64).unwrap() < 1e-10);
        assert!(check_compatibility(0.0, 0.0, 0.5, 0.5, 1.0, 0.5, 64).is_err());
        assert!(check_compatibility(0.0, 0.0, 0.0, 0.5, 1.0, 0.5, 4).is_err());
    }

    #[test]
    fn compatibility_converges_monotonically() {
        let r: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&n| check_compatibility(0.0, 0.0, 0.0, 0.5, 1.0, 0.5, n).unwrap())
            .collect();
        assert!(r.windows(2).all(|w| w[1] <= w[0]), "{r:?}");
        assert!(r[3] < 1e-14);
    }

    #[test]
    fn wiener_mass_by_quadrature_and_cylinders() {
        let p = WienerParams::new(0.3, -0.4, 1.3, 0.7).unwrap();
        for times in [vec![0.4], vec![0.2, 0.9], vec![0.1, 0.5, 1.2]] {
            let f = CylindricalFunctional::new(times.clone(), |_| 1.0, Some(1.0)).unwrap();
            let q = wiener_integral_quadrature(&f, &p, 16).unwrap().value;
            assert!((q - p.mass()).abs() < 1e-8);
            let boxes = vec![Interval::real_line(); times.len()];
            let c = CylinderSet::new(times, boxes).unwrap();
            let v = cylinder_probability(&c, &p, DEFAULT_CYLINDER_TOL).unwrap();
            assert!((v - p.mass()).abs() < 1e-8, "{v} vs {}", p.mass());
        }
        let q = wiener_integral_quadrature(&CylindricalFunctional::constant(1.0), &p, 8).unwrap();
        assert_eq!(q.value, p.mass());
    }

    #[test]
    fn half_line_cylinders() {
        let p = standard();
        let up = CylinderSet::new(vec![0.5], vec![Interval::new(0.0, f64::INFINITY)]).unwrap();
        let down = CylinderSet::new(vec![0.5], vec![Interval::new(f64::NEG_INFINITY, 0.0)]).unwrap();
        let a = cylinder_probability(&up, &p, 1e-12).unwrap();
        let b = cylinder_probability(&down, &p, 1e-12).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!((a - p.mass() / 2.0).abs() < 1e-14);
        let empty = CylinderSet::new(vec![0.5], vec![Interval::new(1.0, 0.0)]).unwrap();
        assert_eq!(cylinder_probability(&empty, &p, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn cylinder_matches_bridge_mc() {
        let p = standard();
        let set = CylinderSet::new(vec![0.3, 0.7], vec![Interval::new(0.0, 1.0), Interval::new(-0.5, 0.2)]).unwrap();
        let exact = cylinder_probability(&set, &p, 1e-12).unwrap();
        let mc = wiener_integral_mc(&CylindricalFunctional::indicator(&set).unwrap(), &p, 100_000, 11).unwrap();
        assert!((mc.estimate - exact).abs() < 3.0 * mc.stderr, "{exact} vs {mc:?}");
    }

    fn random_set<R: Rng>(rng: &mut R, t: f64) -> CylinderSet {
        let n = rng.random_range(1..=3);
        let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..0.98) * t).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let boxes = times
            .iter()
            .map(|_| match rng.random_range(0..4) {
                0 => Interval::real_line(),
                1 => Interval::new(rng.random_range(-1.0..0.5), f64::INFINITY),
                _ => {
                    let a = rng.random_range(-1.5..1.0);
                    Interval::new(a, a + rng.random_range(0.1..1.5))
                }
            })
            .collect();
        CylinderSet::new(times, boxes).unwrap()
    }

    #[test]
    fn free_time_insertion_leaves_probability() {
        let mut rng = path_rng(7, 0);
        for _ in 0..20 {
            let t = rng.random_range(0.5..2.0);
            let p = WienerParams::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), t, rng.random_range(0.1..1.0)).unwrap();
            let set = random_set(&mut rng, t);
            let base = cylinder_probability(&set, &p, DEFAULT_CYLINDER_TOL).unwrap();
            let refined = set.with_free_time(rng.random_range(0.01..0.99) * t).unwrap();
            let other = cylinder_probability(&refined, &p, DEFAULT_CYLINDER_TOL).unwrap();
            assert!((base - other).abs() < 1e-8, "{base} vs {other} for {set:?} -> {refined:?}");
        }
    }

    #[test]
    fn quadrature_examples() {
        let p = standard();
        let odd = CylindricalFunctional::monomial(vec![0.5], 0, 1).unwrap();
        assert!(wiener_integral_quadrature(&odd, &p, 16).unwrap().value.abs() < 1e-15);
        for s in [0.2, 0.5, 0.8] {
            let sq = CylindricalFunctional::monomial(vec![s], 0, 2).unwrap();
            let v = wiener_integral_quadrature(&sq, &p, 16).unwrap().value;
            let oracle = p.mass() * 2.0 * p.d * s * (1.0 - s);
            assert!((v - oracle).abs() < 1e-14, "{v} vs {oracle}");
        }
    }

    #[test]
    fn quadrature_budget() {
        let f = CylindricalFunctional::new((1..=5).map(|k| k as f64 / 6.0).collect(), |_| 1.0, Some(1.0)).unwrap();
        assert!(matches!(wiener_integral_quadrature(&f, &standard(), 64), Err(Error::Budget { .. })));
        assert!(wiener_integral_quadrature(&f, &standard(), 8).is_ok());
    }

    #[test]
    fn refinement_table_stabilizes() {
        let f = CylindricalFunctional::new(vec![0.3, 0.6], |p| (p[0] - p[1]).cos(), Some(1.0)).unwrap();
        let rows = quadrature_refinement(&f, &standard(), &[8, 16, 32]).unwrap();
        assert_eq!(rows[0].delta, None);
        assert!(rows[2].delta.unwrap() < 1e-12);
    }

    #[test]
    fn bridge_marginals() {
        let p = standard();
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|i| sample_bridge(&p, &[0.5], &mut path_rng(3, i)).unwrap().positions[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let target = 2.0 * p.d * p.t / 4.0;
        assert!(mean.abs() < 3.0 * (target / n as f64).sqrt());
        // Var of the sample variance for a Gaussian is 2σ⁴/(n−1).
        assert!((var - target).abs() < 3.0 * (2.0 * target * target / (n as f64 - 1.0)).sqrt());
        let tight = WienerParams::new(0.7, 0.7, 1.0, 1e-12).unwrap();
        let path = sample_bridge(&tight, &[0.2, 0.5, 0.9], &mut path_rng(0, 0)).unwrap();
        assert!(path.positions.iter().all(|v| (v - 0.7).abs() < 1e-5));
    }

    #[test]
    fn mc_examples() {
        let p = WienerParams::new(0.2, -0.1, 1.5, 0.5).unwrap();
        let one = CylindricalFunctional::new(vec![0.5, 1.0], |_| 1.0, Some(1.0)).unwrap();
        let e = wiener_integral_mc(&one, &p, 1000, 5).unwrap();
        assert_eq!(e.estimate, p.mass());
        assert_eq!(e.stderr, 0.0);
        let odd = CylindricalFunctional::monomial(vec![0.5], 0, 1).unwrap();
        let e = wiener_integral_mc(&odd, &standard(), 100_000, 9).unwrap();
        assert!(e.estimate.abs() < 3.0 * e.stderr);
        let bad = CylindricalFunctional::new(vec![0.5], |p| if p[0] > 0.0 { f64::NAN } else { 0.0 }, None).unwrap();
        assert!(matches!(wiener_integral_mc(&bad, &standard(), 100, 1), Err(Error::PathEvaluation { .. })));
        assert!(wiener_integral_mc(&one, &p, 99, 1).is_err());
    }

    #[test]
    fn mc_is_schedule_independent() {
        let f = CylindricalFunctional::new(vec![0.25, 0.75], |p| p[0] * p[1] + p[1].sin(), None).unwrap();
        let a = wiener_integral_mc(&f, &standard(), 5000, 42).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| wiener_integral_mc(&f, &standard(), 5000, 42).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn pointwise_limit_examples() {
        let p = standard();
        let f = CylindricalFunctional::monomial(vec![0.5], 0, 2).unwrap();
        let direct = wiener_integral_quadrature(&f, &p, 32).unwrap().value;
        let same = integrate_pointwise_limit(&[f.clone(), f.clone()], Some(&f), &p, 32, 1e-12).unwrap();
        assert_eq!(same.value, direct);

        let clipped: Vec<_> = (1..=30u32)
            .map(|j| CylindricalFunctional::new(vec![0.5], move |p| (p[0] * p[0]).min(j as f64), Some(j as f64)).unwrap())
            .collect();
        let lim = integrate_pointwise_limit(&clipped, Some(&f), &p, 32, 1e-10).unwrap();
        assert!((lim.value - direct).abs() < 1e-9);
        assert!(integrate_pointwise_limit(&clipped, None, &p, 32, 1e-10).is_err());

        let alternating: Vec<_> = (0..4)
            .map(|j| CylindricalFunctional::new(vec![0.5], move |p| if j % 2 == 0 { 2.0 * p[0] * p[0] } else { 0.0 }, None).unwrap())
            .collect();
        assert!(matches!(
            integrate_pointwise_limit(&alternating, Some(&f), &p, 32, 1e-10),
            Err(Error::ContractViolation { index: 0, .. })
        ));
    }

    #[test]
    fn lift_onto_finer_grid() {
        let p = standard();
        let f = CylindricalFunctional::monomial(vec![0.5], 0, 2).unwrap();
        let lifted = f.lift(&[0.25, 0.5, 0.75]).unwrap();
        let a = wiener_integral_quadrature(&f, &p, 16).unwrap().value;
        let b = wiener_integral_quadrature(&lifted, &p, 16).unwrap().value;
        assert!((a - b).abs() < 1e-14);
        assert!(f.lift(&[0.25]).is_err());
    }

    proptest! {
        #[test]
        fn compatibility_closure(x in -2.0f64..2.0, z in -2.0f64..2.0, u in 0.0f64..1.0,
                                 g1 in 0.05f64..1.0, g2 in 0.05f64..1.0, d in 0.1f64..1.0) {
            let r = check_compatibility(x, z, u, u + g1, u + g1 + g2, d, 64).unwrap();
            prop_assert!(r < 1e-8);
        }

        #[test]
        fn norm_bound(c in proptest::collection::vec(-1.0f64..1.0, 4), s in 0.05f64..0.95, y in -1.0f64..1.0) {
            let p = WienerParams::new(0.0, y, 1.0, 0.5).unwrap();
            let sup = c.iter().map(|v| v.abs()).sum::<f64>();
            let f = CylindricalFunctional::new(vec![s], move |q| c[0] + c[1] * q[0].sin() + c[2] * q[0].cos().powi(2) + c[3] * q[0].tanh(), Some(sup)).unwrap();
            let v = wiener_integral_quadrature(&f, &p, 32).unwrap().value;
            prop_assert!(v.abs() <= p.mass() * sup + 1e-8);
        }

        #[test]
        fn linearity(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let p = standard();
            let times = vec![0.3, 0.6];
            let f = CylindricalFunctional::new(times.clone(), |q| q[0] * q[1], None).unwrap();
            let g = CylindricalFunctional::new(times.clone(), |q| q[1].cos(), Some(1.0)).unwrap();
            let (f2, g2) = (f.clone(), g.clone());
            let h = CylindricalFunctional::new(times, move |q| a * f2.eval(q) + b * g2.eval(q), None).unwrap();
            let lhs = wiener_integral_quadrature(&h, &p, 24).unwrap().value;
            let rhs = a * wiener_integral_quadrature(&f, &p, 24).unwrap().value
                + b * wiener_integral_quadrature(&g, &p, 24).unwrap().value;
            prop_assert!((lhs - rhs).abs() < 1e-8);
        }

        #[test]
        fn enlarging_boxes_increases_mass(a in -1.0f64..0.5, w in 0.1f64..1.0, grow in 0.0f64..1.0) {
            let p = standard();
            let small = CylinderSet::new(vec![0.3, 0.7], vec![Interval::new(a, a + w), Interval::new(-0.2, 0.4)]).unwrap();
            let big = CylinderSet::new(vec![0.3, 0.7], vec![Interval::new(a - grow, a + w + grow), Interval::new(-0.2, 0.4)]).unwrap();
            let vs = cylinder_probability(&small, &p, 1e-12).unwrap();
            let vb = cylinder_probability(&big, &p, 1e-12).unwrap();
            prop_assert!(vs >= 0.0 && vs <= vb + 1e-12 && vb <= p.mass() + 1e-12);
        }
    }
}
