//! Conditional expectation on finite probability spaces.
//!
//! A sub-σ-algebra is presented as a partition of the atoms. The conditional
//! expectation is the block-constant `ξ` satisfying `∫_A X dP = ∫_A ξ dP` for
//! every block `A`; on blocks of positive mass that pins `ξ` to the block
//! average. Null blocks get `ξ = 0` and are reported.

use crate::error::{invalid, Result};

const MASS_TOL: f64 = 1e-12;

/// Labelled atoms with probabilities summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasureSpace {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl FiniteMeasureSpace {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(invalid("labels and probabilities differ in length"));
        }
        if probs.is_empty() {
            return Err(invalid("space needs at least one atom"));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(invalid(format!("probability {p} outside [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(FiniteMeasureSpace { labels, probs })
    }

    /// `n` atoms of mass `1/n`, labelled `1..=n`.
    pub fn uniform(n: usize) -> Result<Self> {
        let labels = (1..=n).map(|i| i.to_string()).collect();
        Self::new(labels, vec![1.0 / n as f64; n])
    }

    /// Atoms labelled `1..=n` with the given masses.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let labels = (1..=probs.len()).map(|i| i.to_string()).collect();
        Self::new(labels, probs)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `E X`.
    pub fn expectation(&self, x: &RandomVariable) -> f64 {
        x.values.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    fn block_mass(&self, block: &[usize]) -> f64 {
        block.iter().map(|&k| self.probs[k]).sum()
    }

    fn block_integral(&self, x: &RandomVariable, block: &[usize]) -> f64 {
        block.iter().map(|&k| x.values[k] * self.probs[k]).sum()
    }

    fn check(&self, x: &RandomVariable) -> Result<()> {
        if x.len() != self.len() {
            return Err(invalid(format!(
                "random variable has {} values for {} atoms",
                x.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// Real values aligned with the atoms of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable {
    values: Vec<f64>,
}

impl RandomVariable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value {v}")));
        }
        Ok(RandomVariable { values })
    }

    pub fn constant(value: f64, n: usize) -> Self {
        RandomVariable {
            values: vec![value; n],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RandomVariable {
        RandomVariable {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `X⁺ = max(X, 0)`.
    pub fn positive_part(&self) -> RandomVariable {
        self.map(|v| v.max(0.0))
    }

    /// `X⁻ = max(−X, 0)`.
    pub fn negative_part(&self) -> RandomVariable {
        self.map(|v| (-v).max(0.0))
    }

    /// `min(X, level)`.
    pub fn truncated(&self, level: f64) -> RandomVariable {
        self.map(|v| v.min(level))
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &RandomVariable, b: f64) -> Result<RandomVariable> {
        if self.len() != other.len() {
            return Err(invalid("random variables differ in length"));
        }
        Ok(RandomVariable {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }
}

/// Disjoint blocks of atom indices covering the space.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    owner: Vec<usize>,
}

impl Partition {
    /// Blocks of 0-based atom indices; must be disjoint and cover `0..n`.
    pub fn new(blocks: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut owner = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(invalid(format!("block {b} is empty")));
            }
            for &k in block {
                if k >= n {
                    return Err(invalid(format!("atom index {k} out of range for {n} atoms")));
                }
                if owner[k] != usize::MAX {
                    return Err(invalid(format!("atom {k} appears in two blocks")));
                }
                owner[k] = b;
            }
        }
        if let Some(k) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(invalid(format!("atom {k} is not covered by any block")));
        }
        Ok(Partition { blocks, owner })
    }

    /// The single-block partition (trivial σ-algebra).
    pub fn trivial(n: usize) -> Self {
        Partition::new(vec![(0..n).collect()], n).expect("trivial partition is valid")
    }

    /// One block per atom (the full power set).
    pub fn discrete(n: usize) -> Self {
        Partition::new((0..n).map(|k| vec![k]).collect(), n).expect("discrete partition is valid")
    }

    /// Parses `"1,2|3,4"`. Tokens are matched against the space labels first,
    /// then read as 1-based atom positions.
    pub fn parse(spec: &str, space: &FiniteMeasureSpace) -> Result<Self> {
        let mut blocks = Vec::new();
        for part in spec.split('|') {
            let mut block = Vec::new();
            for token in part.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let index = match space.labels.iter().position(|l| l == token) {
                    Some(k) => k,
                    None => match token.parse::<usize>() {
                        Ok(k) if k >= 1 && k <= space.len() => k - 1,
                        _ => return Err(invalid(format!("unknown atom '{token}' in partition"))),
                    },
                };
                block.push(index);
            }
            blocks.push(block);
        }
        Partition::new(blocks, space.len())
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Block index containing atom `k`.
    pub fn block_of(&self, k: usize) -> usize {
        self.owner[k]
    }

    /// True when every block of `self` sits inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.owner.len() == coarser.owner.len()
            && self.blocks.iter().all(|block| {
                let target = coarser.owner[block[0]];
                block.iter().all(|&k| coarser.owner[k] == target)
            })
    }

    fn check(&self, space: &FiniteMeasureSpace) -> Result<()> {
        if self.owner.len() != space.len() {
            return Err(invalid(format!(
                "partition covers {} atoms, space has {}",
                self.owner.len(),
                space.len()
            )));
        }
        Ok(())
    }
}

/// Hölder conjugate pair `1/p + 1/q = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateExponents {
    p: f64,
    q: f64,
}

impl ConjugateExponents {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(invalid(format!("exponent p must lie in (1, ∞), got {p}")));
        }
        Ok(ConjugateExponents { p, q: p / (p - 1.0) })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

impl Default for ConjugateExponents {
    fn default() -> Self {
        ConjugateExponents { p: 2.0, q: 2.0 }
    }
}

/// Result of [`cond_expectation`].
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioned {
    pub xi: RandomVariable,
    /// Indices of blocks with zero mass, where `ξ` was set to 0.
    pub null_blocks: Vec<usize>,
}

/// `E(X | G)` as block averages.
pub fn cond_expectation(
    x: &RandomVariable,
    partition: &Partition,
    space: &FiniteMeasureSpace,
) -> Result<Conditioned> {
    space.check(x)?;
    partition.check(space)?;
    let mut values = vec![0.0; space.len()];
    let mut null_blocks = Vec::new();
    for (b, block) in partition.blocks.iter().enumerate() {
        let mass = space.block_mass(block);
        let avg = if mass > 0.0 {
            space.block_integral(x, block) / mass
        } else {
            null_blocks.push(b);
            0.0
        };
        for &k in block {
            values[k] = avg;
        }
    }
    Ok(Conditioned {
        xi: RandomVariable { values },
        null_blocks,
    })
}

/// Outcome of the `min(X^±, j)` truncation ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationLadder {
    /// `ξ_j⁺ − ξ_j⁻` at the last rung.
    pub xi: RandomVariable,
    /// Last truncation level used.
    pub level: usize,
    /// True once `level ≥ max(X⁺)` and `level ≥ max(X⁻)`, after which the
    /// ladder no longer moves.
    pub converged: bool,
    /// `ξ_j⁺` for `j = 1..=level`, kept for monotonicity checks.
    pub positive_rungs: Vec<RandomVariable>,
    /// `ξ_j⁻` for `j = 1..=level`.
    pub negative_rungs: Vec<RandomVariable>,
    pub null_blocks: Vec<usize>,
}

/// `E(X | G)` for `X ∈ L¹` via `X = X⁺ − X⁻` and the truncations `min(X^±, j)`.
pub fn cond_expectation_l1(
    x: &RandomVariable,
    partition: &Partition,
    space: &FiniteMeasureSpace,
    j_max: usize,
) -> Result<TruncationLadder> {
    space.check(x)?;
    partition.check(space)?;
    if j_max == 0 {
        return Err(invalid("truncation ladder needs j_max >= 1"));
    }
    let plus = x.positive_part();
    let minus = x.negative_part();
    let top = plus
        .values
        .iter()
        .chain(&minus.values)
        .fold(0.0f64, |m, &v| m.max(v));
    let mut positive_rungs = Vec::new();
    let mut negative_rungs = Vec::new();
    let mut null_blocks = Vec::new();
    let mut level = 0;
    for j in 1..=j_max {
        level = j;
        let cut = j as f64;
        let p = cond_expectation(&plus.truncated(cut), partition, space)?;
        let m = cond_expectation(&minus.truncated(cut), partition, space)?;
        null_blocks = p.null_blocks;
        positive_rungs.push(p.xi);
        negative_rungs.push(m.xi);
        if cut >= top {
            break;
        }
    }
    let converged = level as f64 >= top;
    let xi = positive_rungs[level - 1].combine(1.0, &negative_rungs[level - 1], -1.0)?;
    Ok(TruncationLadder {
        xi,
        level,
        converged,
        positive_rungs,
        negative_rungs,
        null_blocks,
    })
}

/// Per-block residuals of the duality identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    /// `|Σ_A X p − Σ_A ξ p|` for each block `A`.
    pub residuals: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

impl DualityReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, &r| m.max(r))
    }
}

pub fn verify_duality(
    x: &RandomVariable,
    xi: &RandomVariable,
    partition: &Partition,
    space: &FiniteMeasureSpace,
    tol: f64,
) -> Result<DualityReport> {
    space.check(x)?;
    space.check(xi)?;
    partition.check(space)?;
    let residuals: Vec<f64> = partition
        .blocks
        .iter()
        .map(|block| (space.block_integral(x, block) - space.block_integral(xi, block)).abs())
        .collect();
    let pass = residuals.iter().all(|&r| r < tol);
    Ok(DualityReport {
        residuals,
        tol,
        pass,
    })
}

/// Both sides of `|E(XY)| ≤ ‖X‖_p ‖Y‖_q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn lp_norm(x: &RandomVariable, p: f64, space: &FiniteMeasureSpace) -> f64 {
    x.values
        .iter()
        .zip(&space.probs)
        .map(|(v, w)| w * v.abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

pub fn holder_bound_check(
    x: &RandomVariable,
    y: &RandomVariable,
    exps: ConjugateExponents,
    space: &FiniteMeasureSpace,
) -> Result<HolderReport> {
    space.check(x)?;
    space.check(y)?;
    let lhs = x
        .values
        .iter()
        .zip(&y.values)
        .zip(&space.probs)
        .map(|((a, b), p)| a * b * p)
        .sum::<f64>()
        .abs();
    let rhs = lp_norm(x, exps.p, space) * lp_norm(y, exps.q, space);
    // Equality cases land on the boundary up to rounding.
    let holds = lhs <= rhs * (1.0 + 1e-12) + 1e-15;
    Ok(HolderReport { lhs, rhs, holds })
}
