//! Riesz representers and Bochner expectations in `L²(0,1)`.
//!
//! Vectors are coefficient sequences against a truncated orthonormal basis
//! `e_0, …, e_{N-1}`. Every statement here is made inside that span; raising
//! `N` is how the infinite-dimensional claims are checked for convergence.
//!
//! Random variables come in two forms. An atom law carries finitely many
//! weighted vectors. A sampler law maps `ω ∈ (0,1)` (uniform) to an actual
//! `L²(0,1)` function, so norms are exact rather than truncated, and the
//! `ω`-integral is done by Gauss–Legendre quadrature.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::numerics::{gauss_legendre, pairwise_sum, QuadratureRule};

/// Default truncation order.
pub const DEFAULT_ORDER: usize = 32;
/// Default number of Gauss–Legendre nodes for the `ω`-integral of sampler laws.
pub const DEFAULT_OMEGA_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// `e_k(t) = √(2k+1) P_k(2t − 1)`.
    ShiftedLegendre,
    /// `e_k(t) = √2 sin((k+1)πt)`.
    FourierSine,
}

/// A truncated orthonormal basis of `L²(0,1)` with the quadrature used to
/// extract coefficients.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    kind: BasisKind,
    len: usize,
    rule: QuadratureRule,
}

impl PartialEq for OrthonormalBasis {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.len == other.len
    }
}

impl OrthonormalBasis {
    pub fn new(kind: BasisKind, len: usize) -> Result<Arc<Self>> {
        if len == 0 {
            return Err(invalid("basis needs at least one element"));
        }
        // Enough nodes to resolve products e_i e_j for both families.
        let rule = gauss_legendre(4 * len + 32, 0.0, 1.0)?;
        Ok(Arc::new(OrthonormalBasis { kind, len, rule }))
    }

    pub fn shifted_legendre(len: usize) -> Result<Arc<Self>> {
        Self::new(BasisKind::ShiftedLegendre, len)
    }

    pub fn fourier_sine(len: usize) -> Result<Arc<Self>> {
        Self::new(BasisKind::FourierSine, len)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Value of `e_index` at `t`.
    pub fn eval(&self, index: usize, t: f64) -> f64 {
        match self.kind {
            BasisKind::ShiftedLegendre => {
                let x = 2.0 * t - 1.0;
                let (mut p0, mut p1) = (1.0, x);
                let p = match index {
                    0 => 1.0,
                    1 => x,
                    _ => {
                        for k in 2..=index {
                            let kf = k as f64;
                            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                            p0 = p1;
                            p1 = p2;
                        }
                        p1
                    }
                };
                (2.0 * index as f64 + 1.0).sqrt() * p
            }
            BasisKind::FourierSine => {
                std::f64::consts::SQRT_2 * ((index as f64 + 1.0) * std::f64::consts::PI * t).sin()
            }
        }
    }

    /// `[e_0(t), …, e_{N-1}(t)]`.
    pub fn eval_all(&self, t: f64) -> Vec<f64> {
        match self.kind {
            BasisKind::ShiftedLegendre => {
                let x = 2.0 * t - 1.0;
                let mut out = Vec::with_capacity(self.len);
                let (mut p0, mut p1) = (1.0, x);
                for k in 0..self.len {
                    let p = match k {
                        0 => 1.0,
                        1 => x,
                        _ => {
                            let kf = k as f64;
                            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                            p0 = p1;
                            p1 = p2;
                            p2
                        }
                    };
                    out.push((2.0 * k as f64 + 1.0).sqrt() * p);
                }
                out
            }
            BasisKind::FourierSine => (0..self.len).map(|k| self.eval(k, t)).collect(),
        }
    }

    /// Gram matrix `⟨e_i, e_j⟩` by quadrature.
    pub fn gram_matrix(&self) -> Vec<Vec<f64>> {
        let values: Vec<Vec<f64>> = self.rule.nodes().iter().map(|&t| self.eval_all(t)).collect();
        (0..self.len)
            .map(|i| {
                (0..self.len)
                    .map(|j| {
                        let terms: Vec<f64> = values
                            .iter()
                            .zip(self.rule.weights())
                            .map(|(v, w)| w * v[i] * v[j])
                            .collect();
                        pairwise_sum(&terms)
                    })
                    .collect()
            })
            .collect()
    }

    fn piece_rule(&self, a: f64, b: f64) -> Result<QuadratureRule> {
        self.rule.mapped(a, b)
    }
}

/// Coordinates of a vector against an [`OrthonormalBasis`].
#[derive(Clone, PartialEq)]
pub struct HilbertVector {
    coeffs: Vec<f64>,
    basis: Arc<OrthonormalBasis>,
}

impl fmt::Debug for HilbertVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HilbertVector")
            .field("kind", &self.basis.kind)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl HilbertVector {
    pub fn new(coeffs: Vec<f64>, basis: &Arc<OrthonormalBasis>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(invalid(format!(
                "expected {} coefficients, got {}",
                basis.len(),
                coeffs.len()
            )));
        }
        Ok(HilbertVector {
            coeffs,
            basis: Arc::clone(basis),
        })
    }

    pub fn zero(basis: &Arc<OrthonormalBasis>) -> Self {
        HilbertVector {
            coeffs: vec![0.0; basis.len()],
            basis: Arc::clone(basis),
        }
    }

    /// The basis element `e_index`.
    pub fn unit(index: usize, basis: &Arc<OrthonormalBasis>) -> Result<Self> {
        if index >= basis.len() {
            return Err(invalid(format!("index {index} outside basis of size {}", basis.len())));
        }
        let mut v = Self::zero(basis);
        v.coeffs[index] = 1.0;
        Ok(v)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> &Arc<OrthonormalBasis> {
        &self.basis
    }

    /// `√(Σ c_i²)`.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `Σ c_i e_i(t)`.
    pub fn reconstruct(&self, t: f64) -> f64 {
        self.basis
            .eval_all(t)
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| e * c)
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        HilbertVector {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            basis: Arc::clone(&self.basis),
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &HilbertVector, b: f64) -> Result<Self> {
        same_basis(self, other)?;
        Ok(HilbertVector {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            basis: Arc::clone(&self.basis),
        })
    }

    /// Truncated-norm distance `‖self − other‖`.
    pub fn distance(&self, other: &HilbertVector) -> Result<f64> {
        Ok(self.combine(1.0, other, -1.0)?.norm())
    }
}

fn same_basis(u: &HilbertVector, v: &HilbertVector) -> Result<()> {
    if u.basis != v.basis {
        return Err(invalid(format!(
            "basis mismatch: {:?}/{} vs {:?}/{}",
            u.basis.kind, u.basis.len, v.basis.kind, v.basis.len
        )));
    }
    Ok(())
}

/// `⟨u, v⟩ = Σ u_i v_i`.
pub fn inner_product(u: &HilbertVector, v: &HilbertVector) -> Result<f64> {
    same_basis(u, v)?;
    let terms: Vec<f64> = u.coeffs.iter().zip(&v.coeffs).map(|(a, b)| a * b).collect();
    Ok(pairwise_sum(&terms))
}

/// Coefficients `⟨f, e_i⟩` by quadrature over the whole of `(0,1)`.
pub fn project<F: Fn(f64) -> f64>(f: F, basis: &Arc<OrthonormalBasis>) -> Result<HilbertVector> {
    project_piecewise(f, &[], basis)
}

/// Like [`project`], but the quadrature is split at `breaks` so that
/// piecewise-smooth functions (indicators, ramps) are integrated piece by piece.
pub fn project_piecewise<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    basis: &Arc<OrthonormalBasis>,
) -> Result<HilbertVector> {
    let mut coeffs = vec![0.0; basis.len()];
    for (a, b) in pieces(breaks) {
        let rule = if a == 0.0 && b == 1.0 {
            basis.rule.clone()
        } else {
            basis.piece_rule(a, b)?
        };
        for (t, w) in rule.iter() {
            let value = f(t);
            if !value.is_finite() {
                return Err(Error::Numeric { at: t, value });
            }
            for (c, e) in coeffs.iter_mut().zip(basis.eval_all(t)) {
                *c += w * value * e;
            }
        }
    }
    HilbertVector::new(coeffs, basis)
}

/// Sorted sub-intervals of `(0,1)` cut at the interior `breaks`.
fn pieces(breaks: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|b| *b > 0.0 && *b < 1.0).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut points = Vec::with_capacity(cuts.len() + 2);
    points.push(0.0);
    points.extend(cuts);
    points.push(1.0);
    points.windows(2).map(|w| (w[0], w[1])).collect()
}

/// The Riesz representer of a functional given by its values `L(e_i)`.
///
/// On the truncated span the representer's coordinates are exactly those values.
pub fn riesz_representer(
    values_on_basis: &[f64],
    basis: &Arc<OrthonormalBasis>,
) -> Result<HilbertVector> {
    HilbertVector::new(values_on_basis.to_vec(), basis)
}

/// `[L(e_0), …, L(e_{N-1})]` for a functional given as a closure.
pub fn tabulate_functional<L: Fn(&HilbertVector) -> f64>(
    functional: L,
    basis: &Arc<OrthonormalBasis>,
) -> Vec<f64> {
    (0..basis.len())
        .map(|i| functional(&HilbertVector::unit(i, basis).expect("index in range")))
        .collect()
}

/// An element of `L²(0,1)` given pointwise, smooth between its `breaks`.
#[derive(Clone)]
pub struct L2Function {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    breaks: Vec<f64>,
}

impl fmt::Debug for L2Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("L2Function").field("breaks", &self.breaks).finish()
    }
}

impl L2Function {
    pub fn new<F>(f: F, breaks: Vec<f64>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        L2Function {
            f: Arc::new(f),
            breaks,
        }
    }

    /// Indicator of the interval `(a, b)`.
    pub fn indicator(a: f64, b: f64) -> Self {
        L2Function::new(move |t| if t > a && t < b { 1.0 } else { 0.0 }, vec![a, b])
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Piecewise-quadrature `L²` norm; exact for piecewise polynomials of
    /// moderate degree.
    pub fn norm(&self, basis: &Arc<OrthonormalBasis>) -> Result<f64> {
        let mut parts = Vec::new();
        for (a, b) in pieces(&self.breaks) {
            let rule = basis.piece_rule(a, b)?;
            for (t, w) in rule.iter() {
                let v = self.eval(t);
                if !v.is_finite() {
                    return Err(Error::Numeric { at: t, value: v });
                }
                parts.push(w * v * v);
            }
        }
        Ok(pairwise_sum(&parts).sqrt())
    }

    pub fn project(&self, basis: &Arc<OrthonormalBasis>) -> Result<HilbertVector> {
        project_piecewise(|t| self.eval(t), &self.breaks, basis)
    }
}

type Sampler = Arc<dyn Fn(f64) -> L2Function + Send + Sync>;

/// Law of an `L²(0,1)`-valued random variable.
#[derive(Clone)]
pub enum DiscreteHValuedLaw {
    /// Finitely many `(probability, vector)` pairs.
    Atoms(Vec<(f64, HilbertVector)>),
    /// `ω ↦ X(ω)` with `ω` uniform on `(0,1)`; integrated by `omega_rule`.
    Sampler {
        sample: Sampler,
        omega_rule: QuadratureRule,
    },
}

impl fmt::Debug for DiscreteHValuedLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Atoms(atoms) => f.debug_tuple("Atoms").field(atoms).finish(),
            Self::Sampler { omega_rule, .. } => f
                .debug_struct("Sampler")
                .field("omega_nodes", &omega_rule.len())
                .finish(),
        }
    }
}

impl DiscreteHValuedLaw {
    /// Atom law; probabilities must lie in `[0,1]` and sum to 1 within 1e-12.
    pub fn atoms(atoms: Vec<(f64, HilbertVector)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("atom law needs at least one atom"));
        }
        if let Some((_, v0)) = atoms.first() {
            for (_, v) in &atoms[1..] {
                same_basis(v0, v)?;
            }
        }
        if atoms.iter().any(|(p, _)| !(0.0..=1.0).contains(p)) {
            return Err(invalid("atom probabilities must lie in [0, 1]"));
        }
        let total: f64 = atoms.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("atom probabilities sum to {total}, not 1")));
        }
        Ok(Self::Atoms(atoms))
    }

    /// Sampler law with `omega_nodes` Gauss–Legendre nodes in `ω`.
    pub fn sampler<F>(sample: F, omega_nodes: usize) -> Result<Self>
    where
        F: Fn(f64) -> L2Function + Send + Sync + 'static,
    {
        Ok(Self::Sampler {
            sample: Arc::new(sample),
            omega_rule: gauss_legendre(omega_nodes, 0.0, 1.0)?,
        })
    }

    /// `χ(ω) = 1_{(0,ω)}` under the uniform law on `(0,1)`.
    pub fn indicator_example(omega_nodes: usize) -> Result<Self> {
        Self::sampler(|omega| L2Function::indicator(0.0, omega), omega_nodes)
    }

    /// The mixture `alpha·first ⊕ (1 − alpha)·second` of two atom laws.
    pub fn mixture(alpha: f64, first: &Self, second: &Self) -> Result<Self> {
        let (Self::Atoms(a), Self::Atoms(b)) = (first, second) else {
            return Err(invalid("mixtures are only formed between atom laws"));
        };
        if !(0.0..=1.0).contains(&alpha) {
            return Err(invalid(format!("mixture weight {alpha} outside [0, 1]")));
        }
        let atoms = a
            .iter()
            .map(|(p, v)| (alpha * p, v.clone()))
            .chain(b.iter().map(|(p, v)| ((1.0 - alpha) * p, v.clone())))
            .collect();
        Self::atoms(atoms)
    }
}

/// `E‖X‖`.
pub fn expected_norm(law: &DiscreteHValuedLaw, basis: &Arc<OrthonormalBasis>) -> Result<f64> {
    let value = match law {
        DiscreteHValuedLaw::Atoms(atoms) => {
            let terms: Vec<f64> = atoms.iter().map(|(p, v)| p * v.norm()).collect();
            pairwise_sum(&terms)
        }
        DiscreteHValuedLaw::Sampler { sample, omega_rule } => {
            let terms = omega_rule
                .nodes()
                .par_iter()
                .zip(omega_rule.weights().par_iter())
                .map(|(&omega, &w)| Ok(w * sample(omega).norm(basis)?))
                .collect::<Result<Vec<f64>>>()?;
            pairwise_sum(&terms)
        }
    };
    if !value.is_finite() {
        return Err(Error::Integrability(format!("expected norm is {value}")));
    }
    Ok(value)
}

/// The Bochner expectation `E X`: the vector whose `i`-th coordinate is
/// `E⟨X, e_i⟩`, i.e. the representer of `u ↦ E⟨u, X⟩`.
pub fn bochner_expectation(
    law: &DiscreteHValuedLaw,
    basis: &Arc<OrthonormalBasis>,
) -> Result<HilbertVector> {
    expected_norm(law, basis)?;
    match law {
        DiscreteHValuedLaw::Atoms(atoms) => {
            let mut coeffs = vec![0.0; basis.len()];
            for (p, v) in atoms {
                if v.basis() != basis {
                    return Err(invalid("atom vectors live in a different basis"));
                }
                for (c, x) in coeffs.iter_mut().zip(v.coeffs()) {
                    *c += p * x;
                }
            }
            HilbertVector::new(coeffs, basis)
        }
        DiscreteHValuedLaw::Sampler { sample, omega_rule } => {
            let projected = omega_rule
                .nodes()
                .par_iter()
                .map(|&omega| sample(omega).project(basis))
                .collect::<Result<Vec<HilbertVector>>>()?;
            let coeffs = (0..basis.len())
                .map(|i| {
                    let terms: Vec<f64> = projected
                        .iter()
                        .zip(omega_rule.weights())
                        .map(|(v, w)| w * v.coeffs()[i])
                        .collect();
                    pairwise_sum(&terms)
                })
                .collect();
            HilbertVector::new(coeffs, basis)
        }
    }
}
