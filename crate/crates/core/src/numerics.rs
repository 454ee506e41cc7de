//! Quadrature rules and an adaptive integrator shared by every other module.
//!
//! Gauss–Legendre and Gauss–Hermite nodes are computed by Newton iteration on
//! the three-term recurrences; the adaptive integrator bisects with an embedded
//! Gauss–Kronrod 7/15 pair.

use crate::error::{invalid, Error, Result};

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;

/// Which weight function a [`QuadratureRule`] was built for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleKind {
    /// Unit weight on the closed interval `[a, b]`.
    Legendre { a: f64, b: f64 },
    /// Weight `exp(-u^2)` on the real line.
    Hermite,
}

/// Nodes (strictly increasing) and positive weights of an interpolatory rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: RuleKind,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `Σ w_i f(x_i)`. For a Hermite rule this approximates `∫ f(u) e^{-u²} du`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self.iter().map(|(x, w)| w * f(x)).collect();
        pairwise_sum(&terms)
    }

    /// Same rule affinely mapped onto `[a, b]`. Only meaningful for Legendre rules.
    pub fn mapped(&self, a: f64, b: f64) -> Result<QuadratureRule> {
        let RuleKind::Legendre { a: a0, b: b0 } = self.kind else {
            return Err(invalid("only Legendre rules can be remapped"));
        };
        if !(a < b) {
            return Err(invalid(format!("empty interval [{a}, {b}]")));
        }
        let scale = (b - a) / (b0 - a0);
        Ok(QuadratureRule {
            nodes: self.nodes.iter().map(|x| a + (x - a0) * scale).collect(),
            weights: self.weights.iter().map(|w| w * scale).collect(),
            kind: RuleKind::Legendre { a, b },
        })
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(invalid("Gauss–Legendre rule needs n >= 1"));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(invalid(format!("Gauss–Legendre needs finite a < b, got [{a}, {b}]")));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = (n + 1) / 2;
    let nf = n as f64;
    for i in 0..half {
        // Tricomi initial guess for the i-th largest root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let mid = 0.5 * (a + b);
    let half_len = 0.5 * (b - a);
    for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
        *x = mid + half_len * *x;
        *w *= half_len;
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        kind: RuleKind::Legendre { a, b },
    })
}

/// `n`-point Gauss–Hermite rule for the weight `exp(-u^2)`.
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(invalid("Gauss–Hermite rule needs n >= 1"));
    }
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let half = (n + 1) / 2;
    let mut roots = vec![0.0; half];
    let mut wts = vec![0.0; half];
    // Orthonormal Hermite recurrence; roots found from the largest down.
    let orthonormal = |z: f64| -> (f64, f64) {
        let mut p1 = pim4;
        let mut p2 = 0.0;
        for j in 1..=n {
            let jf = j as f64;
            let p3 = p2;
            p2 = p1;
            p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        }
        let pp = (2.0 * nf).sqrt() * p2;
        (p1, pp)
    };
    let mut z = 0.0;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * roots[0],
            3 => 1.91 * z - 0.91 * roots[1],
            _ => 2.0 * z - roots[i - 2],
        };
        for _ in 0..NEWTON_MAX_ITER {
            let (p, pp) = orthonormal(z);
            let dz = p / pp;
            z -= dz;
            if dz.abs() <= NEWTON_TOL * z.abs().max(1.0) {
                break;
            }
        }
        let (_, pp) = orthonormal(z);
        roots[i] = z;
        wts[i] = 2.0 / (pp * pp);
    }
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..half {
        if n % 2 == 1 && i == half - 1 {
            continue;
        }
        nodes.push(-roots[i]);
        weights.push(wts[i]);
    }
    if n % 2 == 1 {
        nodes.push(0.0);
        weights.push(wts[half - 1]);
    }
    for i in (0..half).rev() {
        if n % 2 == 1 && i == half - 1 {
            continue;
        }
        nodes.push(roots[i]);
        weights.push(wts[i]);
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        kind: RuleKind::Hermite,
    })
}

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: usize = 60;

fn checked<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric { at: x, value: v })
    }
}

/// Kronrod estimate and |Kronrod − Gauss| on one panel.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = checked(f, c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = h * XGK[k];
        let f1 = checked(f, c - dx)?;
        let f2 = checked(f, c + dx)?;
        kronrod += WGK[k] * (f1 + f2);
        if k % 2 == 1 {
            gauss += WG[k / 2] * (f1 + f2);
        }
    }
    Ok((kronrod * h, ((kronrod - gauss) * h).abs()))
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> Result<f64> {
    let (k, err) = gk15(f, a, b)?;
    if err <= tol || depth >= MAX_DEPTH || (b - a) <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
        return Ok(k);
    }
    let m = 0.5 * (a + b);
    Ok(adapt(f, a, m, 0.5 * tol, depth + 1)? + adapt(f, m, b, 0.5 * tol, depth + 1)?)
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Kinked integrands converge too, but the error bound is best-effort there;
/// pass the kink locations to [`adaptive_integrate_with_breaks`] when known.
pub fn adaptive_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    adaptive_integrate_with_breaks(f, &[a, b], tol)
}

/// Like [`adaptive_integrate`], over consecutive panels `points[i]..points[i+1]`.
/// The tolerance budget is split in proportion to panel length.
pub fn adaptive_integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    tol: f64,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    if points.len() < 2 {
        return Err(invalid("need at least two break points"));
    }
    if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("break points must be finite and nondecreasing"));
    }
    let total = points[points.len() - 1] - points[0];
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut parts = Vec::with_capacity(points.len() - 1);
    for w in points.windows(2) {
        if w[1] > w[0] {
            let share = tol * (w[1] - w[0]) / total;
            parts.push(adapt(&f, w[0], w[1], share, 0)?);
        }
    }
    Ok(pairwise_sum(&parts))
}

/// Pairwise (tree) summation; deterministic for a fixed input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}
