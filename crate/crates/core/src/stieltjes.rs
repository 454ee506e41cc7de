//! Lebesgue–Stieltjes integration against monotone generators, and recovery
//! of a distribution function from a black-box expectation functional.
//!
//! Recovery evaluates the functional on `g_{j,m} = f_j θ_m`, where `f_j` is a
//! ramp dropping from 1 at `x` to 0 at `x + 1/j` and `θ_m` is a trapezoidal
//! cutoff equal to 1 on `[-m, m]`. The inner limit in `m` is nondecreasing and
//! the outer limit in `j` is nonincreasing; both monotonicities are checked
//! as contracts on every call.
//!
//! A sub-probability functional (total mass below 1) goes through the same
//! construction and yields a defective distribution function whose right
//! limit is the total mass.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::numerics::pairwise_sum;

/// Defaults for the double limit.
pub const DEFAULT_J_MAX: usize = 64;
pub const DEFAULT_M_MAX: usize = 64;
pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_RESOLUTION: f64 = 1e-6;

const MAX_LEVEL: u32 = 18;
const FIRST_LEVEL: u32 = 2;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A right-continuous nondecreasing generator with its limits at ±∞.
#[derive(Clone)]
pub struct CdfLike {
    eval: RealFn,
    c_minus: f64,
    c_plus: f64,
    /// `(location, jump size)`, sorted by location.
    jumps: Vec<(f64, f64)>,
    /// Points where the generator is continuous but not smooth.
    knots: Vec<f64>,
}

impl fmt::Debug for CdfLike {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CdfLike")
            .field("c_minus", &self.c_minus)
            .field("c_plus", &self.c_plus)
            .field("jumps", &self.jumps)
            .field("knots", &self.knots)
            .finish()
    }
}

impl CdfLike {
    pub fn new<F>(eval: F, c_minus: f64, c_plus: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(c_minus <= c_plus) {
            return Err(invalid(format!("limits out of order: {c_minus} > {c_plus}")));
        }
        Ok(CdfLike {
            eval: Arc::new(eval),
            c_minus,
            c_plus,
            jumps: Vec::new(),
            knots: Vec::new(),
        })
    }

    /// Declares discontinuities; each jump size is read off as
    /// `α(b) − α(b − ε)` with `ε` a few ulps of `b`.
    pub fn with_breakpoints(mut self, breakpoints: &[f64]) -> Self {
        let mut bps = breakpoints.to_vec();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        self.jumps = bps
            .into_iter()
            .map(|b| {
                let eps = 1e-12 * b.abs().max(1.0);
                (b, ((self.eval)(b) - (self.eval)(b - eps)).max(0.0))
            })
            .collect();
        self
    }

    fn with_jumps(mut self, mut jumps: Vec<(f64, f64)>) -> Self {
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.jumps = jumps;
        self
    }

    pub fn with_knots(mut self, knots: &[f64]) -> Self {
        self.knots = knots.to_vec();
        self.knots.sort_by(f64::total_cmp);
        self.knots.dedup();
        self
    }

    /// `clamp((x − a)/(b − a), 0, 1)`.
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(invalid(format!("uniform law needs a < b, got [{a}, {b}]")));
        }
        Ok(Self::new(move |x| ((x - a) / (b - a)).clamp(0.0, 1.0), 0.0, 1.0)?.with_knots(&[a, b]))
    }

    /// Triangular law on `[a, b]` with mode `c`.
    pub fn triangular(a: f64, c: f64, b: f64) -> Result<Self> {
        if !(a <= c && c <= b && a < b) {
            return Err(invalid(format!("triangular law needs a <= c <= b, a < b; got {a}, {c}, {b}")));
        }
        let f = move |x: f64| {
            if x <= a {
                0.0
            } else if x <= c {
                (x - a) * (x - a) / ((b - a) * (c - a))
            } else if x < b {
                1.0 - (b - x) * (b - x) / ((b - a) * (b - c))
            } else {
                1.0
            }
        };
        Ok(Self::new(f, 0.0, 1.0)?.with_knots(&[a, c, b]))
    }

    /// Purely atomic law `Σ p_k δ_{x_k}`. Masses must be nonnegative; they need
    /// not sum to 1.
    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.iter().any(|(x, p)| !x.is_finite() || !(*p >= 0.0)) {
            return Err(invalid("atoms need finite locations and nonnegative masses"));
        }
        let table = atoms.to_vec();
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        let f = move |x: f64| table.iter().filter(|(at, _)| *at <= x).map(|(_, p)| p).sum();
        Ok(Self::new(f, 0.0, total)?.with_jumps(atoms.to_vec()))
    }

    /// Unit step at `at`.
    pub fn point_mass(at: f64) -> Result<Self> {
        Self::discrete(&[(at, 1.0)])
    }

    /// `1 − e^{−rate·x}` for `x ≥ 0`.
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(invalid(format!("exponential rate must be positive, got {rate}")));
        }
        Ok(Self::new(move |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() }, 0.0, 1.0)?
            .with_knots(&[0.0]))
    }

    /// Piecewise-linear interpolant through `(x_i, F_i)` with explicit jumps.
    /// Constant beyond the table ends.
    pub fn tabulated(points: &[(f64, f64)], jumps: &[(f64, f64)], c_plus: f64) -> Result<Self> {
        if points.len() < 2 || points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(invalid("tabulated generator needs at least two increasing abscissae"));
        }
        let table = points.to_vec();
        let jump_table = jumps.to_vec();
        let f = move |x: f64| {
            let first = table[0];
            let last = table[table.len() - 1];
            if x <= first.0 {
                return first.1;
            }
            if x >= last.0 {
                return last.1;
            }
            let i = table.partition_point(|p| p.0 <= x);
            let (x0, y0) = table[i - 1];
            let (x1, y1) = table[i];
            // Right value at x0, left limit at x1.
            let left_limit = y1 - jump_table.iter().filter(|j| j.0 == x1).map(|j| j.1).sum::<f64>();
            y0 + (left_limit - y0) * (x - x0) / (x1 - x0)
        };
        let knots: Vec<f64> = points.iter().map(|p| p.0).collect();
        Ok(Self::new(f, points[0].1.min(0.0), c_plus)?
            .with_knots(&knots)
            .with_jumps(jumps.to_vec()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn c_minus(&self) -> f64 {
        self.c_minus
    }

    pub fn c_plus(&self) -> f64 {
        self.c_plus
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.0).collect()
    }

    pub fn jumps(&self) -> &[(f64, f64)] {
        &self.jumps
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn jump_at(&self, x: f64) -> f64 {
        self.jumps.iter().filter(|j| j.0 == x).map(|j| j.1).sum()
    }

    /// `α(x) − c₋`, the normalized distribution function.
    pub fn normalized(&self, x: f64) -> f64 {
        self.eval(x) - self.c_minus
    }
}

/// `λ_α((a, b]) = α(b) − α(a)`.
pub fn ls_measure_interval(alpha: &CdfLike, a: f64, b: f64) -> Result<f64> {
    if a > b {
        return Err(invalid(format!("interval ({a}, {b}] is reversed")));
    }
    if a == b {
        return Ok(0.0);
    }
    Ok(alpha.eval(b) - alpha.eval(a))
}

/// `∫ f dλ_α` over `support = [lo, hi]`.
pub fn ls_integrate<F: Fn(f64) -> f64>(
    f: F,
    alpha: &CdfLike,
    support: (f64, f64),
    tol: f64,
) -> Result<f64> {
    ls_integrate_with_kinks(f, &[], alpha, support, tol)
}

/// Riemann–Stieltjes sums under dyadic refinement of the partition cut at
/// `kinks` of `f`, the knots of `α`, and the jumps of `α`. Jumps inside the
/// support contribute `f(b)·Δα(b)` exactly. The refinement sequence is
/// Richardson-accelerated and stops when successive values differ by less
/// than `tol`.
pub fn ls_integrate_with_kinks<F: Fn(f64) -> f64>(
    f: F,
    kinks: &[f64],
    alpha: &CdfLike,
    support: (f64, f64),
    tol: f64,
) -> Result<f64> {
    let (lo, hi) = support;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(format!("support [{lo}, {hi}] must be a finite interval")));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let inside = |p: &f64| *p > lo && *p < hi;
    let mut points: Vec<f64> = vec![lo, hi];
    points.extend(kinks.iter().filter(|p| inside(p)));
    points.extend(alpha.knots.iter().filter(|p| inside(p)));
    points.extend(alpha.jumps.iter().map(|j| j.0).filter(|p| inside(p)));
    points.sort_by(f64::total_cmp);
    points.dedup();

    let atoms: f64 = alpha
        .jumps
        .iter()
        .filter(|j| j.0 >= lo && j.0 <= hi)
        .map(|j| f(j.0) * j.1)
        .sum();
    if lo == hi {
        return Ok(atoms);
    }

    // Continuous part of α on a piece: the jump at the right end is excluded.
    let sum_at = |level: u32| -> f64 {
        let cells = 1u64 << level;
        let mut parts = Vec::with_capacity(points.len());
        for w in points.windows(2) {
            let (p, q) = (w[0], w[1]);
            let h = (q - p) / cells as f64;
            let right_jump = alpha.jump_at(q);
            let mut prev = alpha.eval(p);
            let mut acc = 0.0;
            for i in 0..cells {
                let s = p + h * i as f64;
                let e = if i + 1 == cells { q } else { p + h * (i + 1) as f64 };
                let mut ae = alpha.eval(e);
                if i + 1 == cells {
                    ae -= right_jump;
                }
                acc += f(0.5 * (s + e)) * (ae - prev);
                prev = ae;
            }
            parts.push(acc);
        }
        pairwise_sum(&parts)
    };

    let mut coarse = sum_at(FIRST_LEVEL);
    let mut previous: Option<f64> = None;
    for level in FIRST_LEVEL + 1..=MAX_LEVEL {
        let fine = sum_at(level);
        let extrapolated = (4.0 * fine - coarse) / 3.0;
        if !extrapolated.is_finite() {
            return Err(Error::Numeric {
                at: lo,
                value: extrapolated,
            });
        }
        if let Some(prev) = previous {
            if (extrapolated - prev).abs() < tol {
                return Ok(atoms + extrapolated);
            }
        }
        previous = Some(extrapolated);
        coarse = fine;
    }
    let last = previous.unwrap_or(coarse);
    Err(Error::Convergence {
        reason: format!("Stieltjes sums did not settle to {tol} after {MAX_LEVEL} refinements"),
        last: atoms + last,
        previous: atoms + coarse,
    })
}

/// Threshold `x` and integer slope `j ≥ 1` of a ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampSpec {
    pub x: f64,
    pub j: u64,
}

impl RampSpec {
    pub fn new(x: f64, j: u64) -> Result<Self> {
        if j == 0 {
            return Err(invalid("ramp slope j must be at least 1"));
        }
        Ok(RampSpec { x, j })
    }
}

/// `f_j`: 1 up to `x`, affine down to 0 at `x + 1/j`, 0 beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ramp {
    x: f64,
    slope: f64,
}

impl Ramp {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.x {
            1.0
        } else {
            (1.0 - self.slope * (t - self.x)).max(0.0)
        }
    }

    pub fn kinks(&self) -> [f64; 2] {
        [self.x, self.x + 1.0 / self.slope]
    }
}

pub fn make_ramp(spec: RampSpec) -> Ramp {
    Ramp {
        x: spec.x,
        slope: spec.j.max(1) as f64,
    }
}

/// `ψ_j`: 1 on `[-j, j]`, 0 outside `[-(j+1), j+1]`, affine between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    j: f64,
}

impl Cutoff {
    pub fn eval(&self, t: f64) -> f64 {
        (self.j + 1.0 - t.abs()).clamp(0.0, 1.0)
    }

    pub fn support(&self) -> (f64, f64) {
        (-(self.j + 1.0), self.j + 1.0)
    }

    pub fn kinks(&self) -> [f64; 4] {
        [-(self.j + 1.0), -self.j, self.j, self.j + 1.0]
    }
}

pub fn make_cutoff(j: u64) -> Result<Cutoff> {
    if j == 0 {
        return Err(invalid("cutoff index j must be at least 1"));
    }
    Ok(Cutoff { j: j as f64 })
}

/// A continuous compactly supported test function with its support, kinks
/// and a bound on its sup norm.
#[derive(Clone)]
pub struct CompactFn {
    f: RealFn,
    support: (f64, f64),
    kinks: Vec<f64>,
    sup_norm: f64,
}

impl fmt::Debug for CompactFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompactFn")
            .field("support", &self.support)
            .field("kinks", &self.kinks)
            .field("sup_norm", &self.sup_norm)
            .finish()
    }
}

impl CompactFn {
    pub fn new<F>(f: F, support: (f64, f64), kinks: Vec<f64>, sup_norm: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(support.0 <= support.1) || !support.0.is_finite() || !support.1.is_finite() {
            return Err(invalid("compact support must be a finite interval"));
        }
        let (lo, hi) = support;
        Ok(CompactFn {
            f: Arc::new(move |t| if t < lo || t > hi { 0.0 } else { f(t) }),
            support,
            kinks,
            sup_norm,
        })
    }

    pub fn cutoff(c: Cutoff) -> Self {
        CompactFn {
            f: Arc::new(move |t| c.eval(t)),
            support: c.support(),
            kinks: c.kinks().to_vec(),
            sup_norm: 1.0,
        }
    }

    /// `g_{j,m} = f_j θ_m`.
    pub fn ramp_cutoff(ramp: Ramp, cutoff: Cutoff) -> Self {
        let mut kinks = cutoff.kinks().to_vec();
        kinks.extend(ramp.kinks());
        CompactFn {
            f: Arc::new(move |t| ramp.eval(t) * cutoff.eval(t)),
            support: cutoff.support(),
            kinks,
            sup_norm: 1.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }
}

/// A linear functional on continuous compactly supported functions.
pub trait ExpectationOracle: Sync {
    fn apply(&self, f: &CompactFn) -> Result<f64>;

    fn is_positive(&self) -> bool {
        true
    }
}

/// `f ↦ ∫ f dλ_α` for a known generator.
#[derive(Debug, Clone)]
pub struct LawOracle {
    pub cdf: CdfLike,
    pub tol: f64,
}

impl LawOracle {
    pub fn new(cdf: CdfLike) -> Self {
        LawOracle { cdf, tol: 1e-9 }
    }
}

impl ExpectationOracle for LawOracle {
    fn apply(&self, f: &CompactFn) -> Result<f64> {
        ls_integrate_with_kinks(|t| f.eval(t), &f.kinks, &self.cdf, f.support, self.tol)
    }
}

/// Sample mean `(1/n) Σ f(X_i)`.
#[derive(Debug, Clone)]
pub struct EmpiricalOracle {
    samples: Vec<f64>,
}

impl EmpiricalOracle {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|s| !s.is_finite()) {
            return Err(invalid("empirical oracle needs finite samples"));
        }
        Ok(EmpiricalOracle { samples })
    }
}

impl ExpectationOracle for EmpiricalOracle {
    fn apply(&self, f: &CompactFn) -> Result<f64> {
        let values: Vec<f64> = self.samples.iter().map(|&s| f.eval(s)).collect();
        Ok(pairwise_sum(&values) / self.samples.len() as f64)
    }
}

/// `c · L`.
pub struct ScaledOracle<O> {
    pub inner: O,
    pub factor: f64,
}

impl<O: ExpectationOracle> ExpectationOracle for ScaledOracle<O> {
    fn apply(&self, f: &CompactFn) -> Result<f64> {
        Ok(self.factor * self.inner.apply(f)?)
    }

    fn is_positive(&self) -> bool {
        self.factor >= 0.0 && self.inner.is_positive()
    }
}

/// An oracle given by a closure.
pub struct FnOracle<F> {
    f: F,
    positive: bool,
}

impl<F: Fn(&CompactFn) -> Result<f64> + Sync> FnOracle<F> {
    pub fn new(f: F, positive: bool) -> Self {
        FnOracle { f, positive }
    }
}

impl<F: Fn(&CompactFn) -> Result<f64> + Sync> ExpectationOracle for FnOracle<F> {
    fn apply(&self, f: &CompactFn) -> Result<f64> {
        (self.f)(f)
    }

    fn is_positive(&self) -> bool {
        self.positive
    }
}

fn cutoff_sequence<O: ExpectationOracle + ?Sized>(oracle: &O, count: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(count);
    for j in 1..=count {
        let v = oracle.apply(&CompactFn::cutoff(make_cutoff(j as u64)?))?;
        if let Some(&prev) = values.last() {
            if v < prev - 1e-12 {
                return Err(Error::ContractViolation {
                    index: j,
                    reason: format!("L(ψ_j) decreased from {prev} to {v}"),
                });
            }
        }
        values.push(v);
    }
    Ok(values)
}

/// `lim_j L(ψ_j)`, the total mass of the representing measure.
pub fn total_mass<O: ExpectationOracle + ?Sized>(oracle: &O, j_max: usize) -> Result<f64> {
    if j_max == 0 {
        return Err(invalid("total_mass needs j_max >= 1"));
    }
    Ok(*cutoff_sequence(oracle, j_max)?.last().expect("nonempty"))
}

/// Parameters of the double limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryConfig {
    /// Number of ramp rungs; rung `k` uses slope `2^k`.
    pub j_max: usize,
    /// Largest cutoff index `m`.
    pub m_max: usize,
    pub tol: f64,
    /// The outer limit may only stop once the ramp width `1/j` is at most
    /// this. Mass closer than this to the right of `x` is not resolved.
    pub resolution: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            j_max: DEFAULT_J_MAX,
            m_max: DEFAULT_M_MAX,
            tol: DEFAULT_TOL,
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

/// One recovered value `F(x)` and where the double limit stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfEstimate {
    pub x: f64,
    pub value: f64,
    /// Ramp slope of the last rung.
    pub j: u64,
    /// Cutoff index reached on the last rung.
    pub m: usize,
    pub converged: bool,
}

/// Queryable distribution function recovered from an oracle, memoized by
/// abscissa.
pub struct RecoveredCdf<'a, O: ExpectationOracle + ?Sized> {
    oracle: &'a O,
    config: RecoveryConfig,
    /// `L(θ_m)` for `m = 1..=max(j_max, m_max)`.
    cutoffs: Vec<f64>,
    total: f64,
    memo: Mutex<HashMap<u64, CdfEstimate>>,
}

impl<'a, O: ExpectationOracle + ?Sized> RecoveredCdf<'a, O> {
    pub fn new(oracle: &'a O, config: RecoveryConfig) -> Result<Self> {
        if config.j_max == 0 || config.m_max == 0 {
            return Err(invalid("j_max and m_max must be at least 1"));
        }
        if !(config.resolution > 0.0) {
            return Err(invalid(format!("resolution must be positive, got {}", config.resolution)));
        }
        if !(config.tol > 0.0) {
            return Err(invalid(format!("tolerance must be positive, got {}", config.tol)));
        }
        if !oracle.is_positive() {
            return Err(Error::ContractViolation {
                index: 0,
                reason: "distribution recovery needs a positive functional".into(),
            });
        }
        let cutoffs = cutoff_sequence(oracle, config.j_max.max(config.m_max))?;
        let total = *cutoffs.last().expect("nonempty");
        Ok(RecoveredCdf {
            oracle,
            config,
            cutoffs,
            total,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn config(&self) -> RecoveryConfig {
        self.config
    }

    fn checked_apply(&self, g: &CompactFn, index: usize) -> Result<f64> {
        let v = self.oracle.apply(g)?;
        if v.abs() > g.sup_norm() + self.config.tol {
            return Err(Error::ContractViolation {
                index,
                reason: format!("|L(g)| = {} exceeds sup|g| = {}", v.abs(), g.sup_norm()),
            });
        }
        Ok(v)
    }

    /// Inner limit `lim_m L(f_j θ_m)`.
    fn inner_limit(&self, ramp: Ramp) -> Result<(f64, usize, bool)> {
        let tol = self.config.tol;
        let mut prev: Option<f64> = None;
        for m in 1..=self.config.m_max {
            let g = CompactFn::ramp_cutoff(ramp, make_cutoff(m as u64)?);
            let v = self.checked_apply(&g, m)?;
            if let Some(p) = prev {
                if v < p - tol {
                    return Err(Error::ContractViolation {
                        index: m,
                        reason: format!("inner sequence decreased from {p} to {v}"),
                    });
                }
                // |lim − v| ≤ L(1 − θ_m) = total − L(θ_m).
                let tail = self.total - self.cutoffs[m - 1];
                if (v - p).abs() < tol / 2.0 && tail < tol / 2.0 {
                    return Ok((v, m, true));
                }
            }
            prev = Some(v);
        }
        Ok((prev.expect("m_max >= 1"), self.config.m_max, false))
    }

    fn compute(&self, x: f64) -> Result<CdfEstimate> {
        let tol = self.config.tol;
        let mut prev: Option<f64> = None;
        let mut last = CdfEstimate {
            x,
            value: f64::NAN,
            j: 1,
            m: 0,
            converged: false,
        };
        for k in 0..self.config.j_max {
            let slope = 1u64 << k.min(62);
            let (v, m, inner_ok) = self.inner_limit(make_ramp(RampSpec { x, j: slope }))?;
            if let Some(p) = prev {
                if v > p + tol {
                    return Err(Error::ContractViolation {
                        index: k,
                        reason: format!("outer sequence increased from {p} to {v}"),
                    });
                }
                if (v - p).abs() < tol && 1.0 / slope as f64 <= self.config.resolution {
                    return Ok(CdfEstimate {
                        x,
                        value: v,
                        j: slope,
                        m,
                        converged: inner_ok,
                    });
                }
            }
            prev = Some(v);
            last = CdfEstimate {
                x,
                value: v,
                j: slope,
                m,
                converged: false,
            };
        }
        Ok(last)
    }

    /// `F(x)`, computed once per distinct `x`.
    pub fn at(&self, x: f64) -> Result<CdfEstimate> {
        let key = x.to_bits();
        if let Some(hit) = self.memo.lock().expect("memo lock").get(&key) {
            return Ok(*hit);
        }
        let estimate = self.compute(x)?;
        Ok(*self
            .memo
            .lock()
            .expect("memo lock")
            .entry(key)
            .or_insert(estimate))
    }

    /// `F` on a grid, evaluated in parallel.
    pub fn eval_grid(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.par_iter()
            .map(|&x| self.at(x).map(|e| e.value))
            .collect()
    }

    /// Grid points where `F(x + h) − F(x − h) > 10·tol`.
    pub fn detect_jumps(&self, xs: &[f64], h: f64) -> Result<Vec<(f64, f64)>> {
        let threshold = 10.0 * self.config.tol;
        let found = xs
            .par_iter()
            .map(|&x| -> Result<Option<(f64, f64)>> {
                let left = self.at(x - h)?.value;
                let right = self.at(x + h)?.value;
                if right - left > threshold {
                    Ok(Some((x, self.at(x)?.value - left)))
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(found.into_iter().flatten().collect())
    }

    /// Piecewise-linear generator through the recovered values on `xs`, with
    /// detected jumps kept as jumps.
    pub fn to_cdf_like(&self, xs: &[f64], h: f64) -> Result<CdfLike> {
        let mut grid = xs.to_vec();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let values = self.eval_grid(&grid)?;
        let jumps = self.detect_jumps(&grid, h)?;
        let points: Vec<(f64, f64)> = grid.into_iter().zip(values).collect();
        CdfLike::tabulated(&points, &jumps, self.total)
    }
}

/// `F(x)` from the double limit `lim_j lim_m L(f_j θ_m)`.
pub fn recover_cdf<O: ExpectationOracle + ?Sized>(
    oracle: &O,
    x: f64,
    j_max: usize,
    m_max: usize,
    tol: f64,
) -> Result<CdfEstimate> {
    RecoveredCdf::new(
        oracle,
        RecoveryConfig {
            j_max,
            m_max,
            tol,
            resolution: DEFAULT_RESOLUTION,
        },
    )?
    .at(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interval_measure_examples() {
        let u = CdfLike::uniform(0.0, 1.0).unwrap();
        assert_eq!(ls_measure_interval(&u, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(ls_measure_interval(&u, 0.25, 0.5).unwrap(), 0.25);
        assert_eq!(ls_measure_interval(&u, 0.3, 0.3).unwrap(), 0.0);
        assert!(ls_measure_interval(&u, 0.5, 0.4).is_err());
    }

    #[test]
    fn stieltjes_integral_examples() {
        let u = CdfLike::uniform(0.0, 1.0).unwrap();
        assert!((ls_integrate(|_| 1.0, &u, (0.0, 1.0), 1e-12).unwrap() - 1.0).abs() < 1e-12);
        assert!((ls_integrate(|t| t, &u, (0.0, 1.0), 1e-12).unwrap() - 0.5).abs() < 1e-12);
        let step = CdfLike::point_mass(0.0).unwrap();
        assert_eq!(ls_integrate(|t| t, &step, (-1.0, 1.0), 1e-12).unwrap(), 0.0);
        let v = ls_integrate(|t| 2.0 + t, &step, (-1.0, 1.0), 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn stieltjes_smooth_and_mixed() {
        // Triangular(0, 0.5, 1): E X² = 1/4 + 1/24.
        let tri = CdfLike::triangular(0.0, 0.5, 1.0).unwrap();
        let v = ls_integrate(|t| t * t, &tri, (0.0, 1.0), 1e-12).unwrap();
        assert!((v - 7.0 / 24.0).abs() < 1e-10, "{v}");
        // Half uniform plus half atom at 0.5.
        let mixed = CdfLike::new(
            |x| 0.5 * x.clamp(0.0, 1.0) + if x >= 0.5 { 0.5 } else { 0.0 },
            0.0,
            1.0,
        )
        .unwrap()
        .with_breakpoints(&[0.5])
        .with_knots(&[0.0, 1.0]);
        assert!((mixed.jumps()[0].1 - 0.5).abs() < 1e-9);
        let v = ls_integrate(|t| t, &mixed, (0.0, 1.0), 1e-12).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
    }

    #[test]
    fn stieltjes_reports_nonconvergence() {
        let u = CdfLike::uniform(0.0, 1.0).unwrap();
        let wild = |t: f64| (1e7 * t).sin();
        match ls_integrate(wild, &u, (0.0, 1.0), 1e-14) {
            Err(Error::Convergence { .. }) => {}
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn ramp_and_cutoff_examples() {
        let r = make_ramp(RampSpec::new(0.0, 1).unwrap());
        assert_eq!(r.eval(0.5), 0.5);
        let r4 = make_ramp(RampSpec::new(0.0, 4).unwrap());
        assert_eq!(r4.eval(-3.0), 1.0);
        assert_eq!(r4.eval(0.25), 0.0);
        assert!(RampSpec::new(0.0, 0).is_err());

        let c = make_cutoff(1).unwrap();
        assert_eq!(c.eval(0.0), 1.0);
        assert_eq!(c.eval(1.5), 0.5);
        assert_eq!(c.eval(-1.5), 0.5);
        assert_eq!(c.eval(3.0), 0.0);
        assert!(make_cutoff(0).is_err());
    }

    #[test]
    fn cutoffs_increase_pointwise() {
        for j in 1..10u64 {
            let a = make_cutoff(j).unwrap();
            let b = make_cutoff(j + 1).unwrap();
            for k in -200..=200 {
                let t = k as f64 * 0.07;
                assert!(a.eval(t) <= b.eval(t));
                assert!((0.0..=1.0).contains(&a.eval(t)));
            }
        }
    }

    #[test]
    fn total_mass_examples() {
        let law = LawOracle::new(CdfLike::uniform(0.0, 1.0).unwrap());
        assert!((total_mass(&law, 64).unwrap() - 1.0).abs() < 1e-6);
        let half = ScaledOracle {
            inner: law.clone(),
            factor: 0.5,
        };
        assert!((total_mass(&half, 64).unwrap() - 0.5).abs() < 1e-9);
        let zero = FnOracle::new(|_| Ok(0.0), true);
        assert_eq!(total_mass(&zero, 8).unwrap(), 0.0);
        let shrinking = FnOracle::new(|g: &CompactFn| Ok(1.0 / g.support().1), true);
        assert!(matches!(total_mass(&shrinking, 4), Err(Error::ContractViolation { index: 2, .. })));
    }

    #[test]
    fn recover_examples() {
        let law = LawOracle::new(CdfLike::uniform(0.0, 1.0).unwrap());
        let e = recover_cdf(&law, 0.5, 64, 64, 1e-4).unwrap();
        assert!((e.value - 0.5).abs() < 1e-3, "{e:?}");
        assert!(e.converged);
        let e = recover_cdf(&law, -1.0, 64, 64, 1e-4).unwrap();
        assert!(e.value.abs() < 1e-4);
        let atom = LawOracle::new(CdfLike::point_mass(0.0).unwrap());
        let e = recover_cdf(&atom, 0.0, 64, 64, 1e-4).unwrap();
        assert!((e.value - 1.0).abs() < 1e-4);
        let e = recover_cdf(&atom, -1e-3, 64, 64, 1e-4).unwrap();
        assert!(e.value.abs() < 1e-4, "{e:?}");
    }

    #[test]
    fn recover_far_support_and_empirical() {
        let far = LawOracle::new(CdfLike::uniform(-20.0, -19.0).unwrap());
        let e = recover_cdf(&far, 0.0, 64, 64, 1e-4).unwrap();
        assert!((e.value - 1.0).abs() < 1e-4, "{e:?}");
        let emp = EmpiricalOracle::new(vec![0.1, 0.2, 0.2, 0.9]).unwrap();
        let e = recover_cdf(&emp, 0.2, 64, 64, 1e-6).unwrap();
        assert!((e.value - 0.75).abs() < 1e-6);
    }

    #[test]
    fn recover_rejects_bad_oracles() {
        let neg = FnOracle::new(|_| Ok(0.0), false);
        assert!(matches!(recover_cdf(&neg, 0.0, 4, 4, 1e-3), Err(Error::ContractViolation { .. })));
        let big = FnOracle::new(|_| Ok(2.0), true);
        assert!(matches!(recover_cdf(&big, 0.0, 4, 4, 1e-3), Err(Error::ContractViolation { .. })));
        // Increasing in the ramp slope violates the outer monotonicity.
        let up = FnOracle::new(
            |g: &CompactFn| Ok(1.0 - 0.5 * g.eval(0.3)),
            true,
        );
        assert!(matches!(recover_cdf(&up, 0.0, 8, 4, 1e-3), Err(Error::ContractViolation { .. })));
    }

    #[test]
    fn sub_probability_recovery() {
        let half = ScaledOracle {
            inner: LawOracle::new(CdfLike::uniform(0.0, 1.0).unwrap()),
            factor: 0.5,
        };
        let rec = RecoveredCdf::new(&half, RecoveryConfig::default()).unwrap();
        assert!((rec.total_mass() - 0.5).abs() < 1e-9);
        assert!((rec.at(5.0).unwrap().value - 0.5).abs() < 1e-4);
        assert!((rec.at(0.5).unwrap().value - 0.25).abs() < 1e-3);
    }

    #[test]
    fn jump_detection_and_tabulation() {
        let atoms = LawOracle::new(CdfLike::discrete(&[(0.3, 0.4), (0.7, 0.6)]).unwrap());
        let rec = RecoveredCdf::new(&atoms, RecoveryConfig::default()).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        let jumps = rec.detect_jumps(&grid, 1e-4).unwrap();
        let locs: Vec<f64> = jumps.iter().map(|j| j.0).collect();
        assert_eq!(locs, vec![0.3, 0.7]);
        assert!((jumps[0].1 - 0.4).abs() < 1e-3 && (jumps[1].1 - 0.6).abs() < 1e-3);
        let tab = rec.to_cdf_like(&grid, 1e-4).unwrap();
        assert!((tab.eval(0.5) - 0.4).abs() < 1e-3);
        assert!((tab.eval(0.69) - 0.4).abs() < 1e-3);
        assert!((tab.eval(0.7) - 1.0).abs() < 1e-3);
    }

    fn grid101() -> Vec<f64> {
        (0..=100).map(|k| (k as f64 - 25.0) / 50.0).collect()
    }

    fn exact_triangular(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x <= 0.5 {
            2.0 * x * x
        } else if x < 1.0 {
            1.0 - 2.0 * (1.0 - x) * (1.0 - x)
        } else {
            1.0
        }
    }

    #[test]
    fn round_trip_on_grid() {
        let cases: Vec<(CdfLike, Box<dyn Fn(f64) -> f64>)> = vec![
            (CdfLike::uniform(0.0, 1.0).unwrap(), Box::new(|x: f64| x.clamp(0.0, 1.0))),
            (CdfLike::triangular(0.0, 0.5, 1.0).unwrap(), Box::new(exact_triangular)),
            (
                CdfLike::discrete(&[(0.3, 0.4), (0.7, 0.6)]).unwrap(),
                Box::new(|x: f64| if x < 0.3 { 0.0 } else if x < 0.7 { 0.4 } else { 1.0 }),
            ),
        ];
        let grid = grid101();
        for (cdf, exact) in cases {
            let law = LawOracle::new(cdf);
            let rec = RecoveredCdf::new(&law, RecoveryConfig::default()).unwrap();
            let values = rec.eval_grid(&grid).unwrap();
            let worst = grid
                .iter()
                .zip(&values)
                .map(|(&x, &v)| (v - exact(x)).abs())
                .fold(0.0, f64::max);
            assert!(worst < 5e-3, "sup error {worst} for {:?}", law.cdf);
            assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-4));
        }
    }

    #[test]
    fn tabulated_recovery_reproduces_functional() {
        let law = LawOracle::new(CdfLike::triangular(0.0, 0.5, 1.0).unwrap());
        let rec = RecoveredCdf::new(&law, RecoveryConfig::default()).unwrap();
        let table = LawOracle::new(rec.to_cdf_like(&grid101(), 1e-4).unwrap());
        for (c, w, h) in [(0.5, 0.3, 1.0), (0.2, 0.5, -2.0), (0.9, 0.2, 0.7)] {
            let g = hat(c, w, h);
            let diff = (table.apply(&g).unwrap() - law.apply(&g).unwrap()).abs();
            assert!(diff < 1e-2, "{diff}");
        }
    }

    fn hat(center: f64, width: f64, height: f64) -> CompactFn {
        CompactFn::new(
            move |t| height * (1.0 - (t - center).abs() / width).max(0.0),
            (center - width, center + width),
            vec![center],
            height.abs(),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn generator_monotone_and_bounded(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let (x, y) = if a <= b { (a, b) } else { (b, a) };
            for cdf in [
                CdfLike::uniform(0.0, 1.0).unwrap(),
                CdfLike::triangular(-1.0, 0.2, 2.0).unwrap(),
                CdfLike::discrete(&[(0.3, 0.4), (0.7, 0.6)]).unwrap(),
                CdfLike::exponential(1.5).unwrap(),
            ] {
                prop_assert!(cdf.eval(x) <= cdf.eval(y));
                prop_assert!(cdf.c_minus() <= cdf.eval(x) && cdf.eval(y) <= cdf.c_plus());
            }
        }

        #[test]
        fn recovered_cdf_monotone_right_continuous(x in -1.0f64..2.0, d in 0.0f64..0.5) {
            let law = LawOracle::new(CdfLike::discrete(&[(0.3, 0.4), (0.7, 0.6)]).unwrap());
            let rec = RecoveredCdf::new(&law, RecoveryConfig::default()).unwrap();
            let lo = rec.at(x).unwrap().value;
            prop_assert!(rec.at(x + d).unwrap().value >= lo - 1e-4);
            prop_assert!((rec.at(x + 1e-5).unwrap().value - lo).abs() < 1e-4
                || (x < 0.3 && x + 1e-5 >= 0.3) || (x < 0.7 && x + 1e-5 >= 0.7));
        }

        #[test]
        fn oracle_bounded_by_sup_norm(center in -2.0f64..2.0, width in 0.01f64..2.0, height in -3.0f64..3.0) {
            let g = hat(center, width, height);
            for law in [
                LawOracle::new(CdfLike::uniform(0.0, 1.0).unwrap()),
                LawOracle::new(CdfLike::discrete(&[(0.3, 0.4), (0.7, 0.6)]).unwrap()),
            ] {
                prop_assert!(law.apply(&g).unwrap().abs() <= g.sup_norm() + 1e-12);
            }
        }
    }
}
