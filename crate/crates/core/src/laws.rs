//! Laws of reinforcement: maps from edge-traversal counts `p ∈ Z_+^d` to
//! probability vectors on the `d` ordered neighbours of a vertex.
//!
//! Directions are 0-based throughout the crate: a law of dimension `d`
//! assigns weights to directions `0..d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice;
use crate::numeric::{ln_gamma, ln_power_product, log_sum_exp};

/// Smallest weight accepted as strictly positive.
pub const MIN_WEIGHT: f64 = 1e-300;

/// Absolute tolerance on `Σ w_i = 1`.
pub const SIMPLEX_SUM_TOLERANCE: f64 = 1e-12;

/// Above this `y + k` the rising factorial goes through log-gamma.
const RISING_DIRECT_LIMIT: f64 = 30.0;

/// A probability vector on `d` outcomes.
///
/// Points built with [`SimplexPoint::new`] lie in the open simplex: every
/// coordinate is at least [`MIN_WEIGHT`] and, for `d >= 2`, strictly below 1.
/// [`SimplexPoint::closed`] also accepts exact zeros; those points describe
/// deterministic environments (`point_mass` on a face of the simplex) and the
/// constant laws derived from them.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexPoint {
    weights: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::validate(&weights, false)?;
        Ok(Self { weights })
    }

    pub fn closed(weights: Vec<f64>) -> Result<Self> {
        Self::validate(&weights, true)?;
        Ok(Self { weights })
    }

    pub fn uniform(dimension: usize) -> Self {
        assert!(dimension > 0, "simplex dimension must be positive");
        Self {
            weights: vec![1.0 / dimension as f64; dimension],
        }
    }

    /// The corner `e_i` of the closed simplex.
    pub fn corner(dimension: usize, index: usize) -> Self {
        assert!(index < dimension);
        let mut weights = vec![0.0; dimension];
        weights[index] = 1.0;
        Self { weights }
    }

    /// Normalizes log-weights; the result may contain zeros after underflow.
    pub fn from_log_weights(log_weights: &[f64]) -> Result<Self> {
        let norm = log_sum_exp(log_weights);
        if !norm.is_finite() {
            return Err(Error::InvalidSimplex(format!(
                "log-weights {log_weights:?} cannot be normalized"
            )));
        }
        Self::closed(log_weights.iter().map(|l| (l - norm).exp()).collect())
    }

    fn validate(weights: &[f64], allow_zero: bool) -> Result<()> {
        if weights.is_empty() {
            return Err(Error::InvalidSimplex("empty weight vector".into()));
        }
        let d = weights.len();
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w > 1.0 + SIMPLEX_SUM_TOLERANCE {
                return Err(Error::InvalidSimplex(format!(
                    "weight {i} = {w} outside [0, 1]"
                )));
            }
            if allow_zero {
                if w < 0.0 {
                    return Err(Error::InvalidSimplex(format!(
                        "weight {i} = {w} is negative"
                    )));
                }
            } else {
                if w < MIN_WEIGHT {
                    return Err(Error::InvalidSimplex(format!(
                        "weight {i} = {w} is not strictly positive"
                    )));
                }
                if d >= 2 && w >= 1.0 {
                    return Err(Error::InvalidSimplex(format!(
                        "weight {i} = {w} leaves no mass for the other coordinates"
                    )));
                }
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOLERANCE {
            return Err(Error::InvalidSimplex(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    pub fn ln_weight(&self, index: usize) -> f64 {
        self.weights[index].ln()
    }

    /// True when every coordinate is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.weights.iter().all(|&w| w >= MIN_WEIGHT)
    }

    /// Inverse-CDF draw over the ordered coordinates using one uniform
    /// variate `u ∈ [0, 1)`. Zero-weight coordinates are never returned.
    pub fn sample_index(&self, u: f64) -> usize {
        let mut cumulative = 0.0;
        let mut last_positive = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                last_positive = i;
                cumulative += w;
                if u < cumulative {
                    return i;
                }
            }
        }
        last_positive
    }
}

/// A point of `Z_+^d`: traversal counts of the `d` oriented edges leaving a
/// vertex, or an endpoint of a lattice path.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VisitVector(Vec<u32>);

impl VisitVector {
    pub fn new(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn zeros(dimension: usize) -> Self {
        Self(vec![0; dimension])
    }

    /// The canonical basis vector `e_i`.
    pub fn unit(dimension: usize, index: usize) -> Self {
        let mut v = Self::zeros(dimension);
        v.0[index] = 1;
        v
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// `|k| = Σ k_i`.
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| c as u64).sum()
    }

    pub fn increment(&mut self, index: usize) {
        self.0[index] += 1;
    }

    /// `self + e_i`.
    pub fn incremented(&self, index: usize) -> Self {
        let mut v = self.clone();
        v.increment(index);
        v
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dimension(), other.dimension());
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn max_count(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

impl From<Vec<u32>> for VisitVector {
    fn from(v: Vec<u32>) -> Self {
        Self(v)
    }
}

/// `y (y+1) ··· (y+k-1)`, with `(y, 0) = 1`.
pub fn rising_factorial(y: f64, k: u32) -> f64 {
    if y + k as f64 > RISING_DIRECT_LIMIT {
        return ln_rising_factorial(y, k).exp();
    }
    (0..k).fold(1.0, |acc, j| acc * (y + j as f64))
}

/// `ln (y, k)` for `y > 0`.
pub fn ln_rising_factorial(y: f64, k: u32) -> f64 {
    if k <= 64 {
        (0..k).map(|j| (y + j as f64).ln()).sum()
    } else {
        ln_gamma(y + k as f64) - ln_gamma(y)
    }
}

/// Parameters of a Dirichlet kernel weighted by a homogeneous polynomial
/// `P(t) = Σ_{|m| = n} a_m t^m` with non-negative coefficients.
///
/// The same parameters describe both the environment density
/// `∝ ∏ t_i^{α_i - 1} P(t)` and the reinforcement law it induces through the
/// rising-factorial polynomial `Q(y) = Σ a_m ∏ (y_i, m_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialDirichlet {
    alpha: Vec<f64>,
    degree: u32,
    /// Sorted lexicographically by multi-index, zeros dropped.
    coefficients: Vec<(VisitVector, f64)>,
}

impl PolynomialDirichlet {
    pub fn new<I>(alpha: Vec<f64>, degree: u32, coefficients: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        validate_alpha(&alpha)?;
        let d = alpha.len();
        let mut coeffs: Vec<(VisitVector, f64)> = Vec::new();
        for (index, value) in coefficients {
            if index.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: index.len(),
                });
            }
            let index = VisitVector::new(index);
            if index.total() != degree as u64 {
                return Err(Error::InvalidParameter(format!(
                    "coefficient index {:?} has degree {}, expected {degree}",
                    index.counts(),
                    index.total()
                )));
            }
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "coefficient {value} at {:?} must be a non-negative real",
                    index.counts()
                )));
            }
            coeffs.push((index, value));
        }
        coeffs.sort_by(|a, b| a.0.cmp(&b.0));
        if coeffs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter(
                "duplicate coefficient index".into(),
            ));
        }
        coeffs.retain(|(_, v)| *v > 0.0);
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter(
                "polynomial needs at least one positive coefficient".into(),
            ));
        }
        Ok(Self {
            alpha,
            degree,
            coefficients: coeffs,
        })
    }

    pub fn dimension(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Positive coefficients in lexicographic order of their multi-index.
    pub fn coefficients(&self) -> &[(VisitVector, f64)] {
        &self.coefficients
    }

    /// All degree-`n` coefficients in lexicographic order, zeros included.
    pub fn dense_coefficients(&self) -> Vec<(VisitVector, f64)> {
        lattice::multi_indices_of_degree(self.dimension(), self.degree)
            .into_iter()
            .map(|m| {
                let value = self
                    .coefficients
                    .binary_search_by(|(k, _)| k.cmp(&m))
                    .map(|pos| self.coefficients[pos].1)
                    .unwrap_or(0.0);
                (m, value)
            })
            .collect()
    }

    /// `ln Q(y)`.
    pub fn ln_eval_q(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: y.len(),
            });
        }
        if let Some(bad) = y.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Q arguments must be positive, got {bad}"
            )));
        }
        let terms: Vec<f64> = self
            .coefficients
            .iter()
            .map(|(m, a)| {
                a.ln()
                    + m.counts()
                        .iter()
                        .zip(y)
                        .map(|(&mi, &yi)| ln_rising_factorial(yi, mi))
                        .sum::<f64>()
            })
            .collect();
        let value = log_sum_exp(&terms);
        if !value.is_finite() {
            return Err(Error::NumericUnderflow(format!("Q at {y:?}")));
        }
        Ok(value)
    }

    /// `Q(y) = Σ a_m ∏ (y_i, m_i)`.
    pub fn eval_q(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: y.len(),
            });
        }
        let total: f64 = self
            .coefficients
            .iter()
            .map(|(m, a)| {
                a * m
                    .counts()
                    .iter()
                    .zip(y)
                    .map(|(&mi, &yi)| rising_factorial(yi, mi))
                    .product::<f64>()
            })
            .sum();
        if !(total > 0.0) || !total.is_finite() {
            // Fall back to the log route, which reports underflow properly.
            return self.ln_eval_q(y).map(f64::exp);
        }
        Ok(total)
    }

    fn eval(&self, p: &VisitVector) -> Result<Vec<f64>> {
        let n = self.degree as f64;
        let y: Vec<f64> = self
            .alpha
            .iter()
            .zip(p.counts())
            .map(|(a, &c)| a + c as f64)
            .collect();
        let denom: f64 = y.iter().sum::<f64>() + n;
        let ln_q_base = self.ln_eval_q(&y)?;
        let mut shifted = y.clone();
        let mut weights = Vec::with_capacity(y.len());
        for i in 0..y.len() {
            shifted[i] += 1.0;
            let ratio = (self.ln_eval_q(&shifted)? - ln_q_base).exp();
            shifted[i] -= 1.0;
            weights.push(y[i] / denom * ratio);
        }
        Ok(weights)
    }
}

fn validate_alpha(alpha: &[f64]) -> Result<()> {
    if alpha.is_empty() {
        return Err(Error::InvalidParameter("alpha must be non-empty".into()));
    }
    if let Some(bad) = alpha.iter().find(|&&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "alpha entries must be positive reals, got {bad}"
        )));
    }
    Ok(())
}

/// Finite mixture of point masses `Σ_m w_m δ_{ω_m}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    atoms: Vec<(f64, SimplexPoint)>,
}

impl Mixture {
    pub fn new(atoms: Vec<(f64, SimplexPoint)>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(Error::InvalidParameter(
                "mixture needs at least one atom".into(),
            ));
        };
        let d = first.1.dimension();
        for (w, point) in &atoms {
            if point.dimension() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: point.dimension(),
                });
            }
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "mixture weight {w} must be positive"
                )));
            }
        }
        let total: f64 = atoms.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > SIMPLEX_SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        Ok(Self { atoms })
    }

    pub fn dimension(&self) -> usize {
        self.atoms[0].1.dimension()
    }

    pub fn atoms(&self) -> &[(f64, SimplexPoint)] {
        &self.atoms
    }

    /// `ln Σ_m w_m ∏_j ω_{m,j}^{k_j}`.
    pub fn ln_moment(&self, k: &VisitVector) -> f64 {
        let terms: Vec<f64> = self
            .atoms
            .iter()
            .map(|(w, point)| w.ln() + ln_power_product(point.weights(), k.counts()))
            .collect();
        log_sum_exp(&terms)
    }
}

/// What to do with counts beyond a tabulated box.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Out-of-box evaluation is an error.
    #[default]
    Reject,
    /// Each coordinate is clamped to the box edge before lookup.
    Clamp,
}

/// A law given by its values on the box `{0..=K}^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedLaw {
    dimension: usize,
    box_size: u32,
    /// Indexed by the mixed-radix (base `K+1`) encoding of the counts.
    table: Vec<SimplexPoint>,
    fallback: Fallback,
}

impl TabulatedLaw {
    pub fn new<I>(dimension: usize, box_size: u32, entries: I, fallback: Fallback) -> Result<Self>
    where
        I: IntoIterator<Item = (VisitVector, SimplexPoint)>,
    {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let side = box_size as usize + 1;
        let cells = side
            .checked_pow(dimension as u32)
            .filter(|&c| c <= 10_000_000)
            .ok_or_else(|| Error::InvalidParameter("tabulated box is too large".into()))?;
        let mut table: Vec<Option<SimplexPoint>> = vec![None; cells];
        for (p, v) in entries {
            if p.dimension() != dimension || v.dimension() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: if p.dimension() != dimension {
                        p.dimension()
                    } else {
                        v.dimension()
                    },
                });
            }
            if p.max_count() > box_size {
                return Err(Error::OutOfBox {
                    counts: p.counts().to_vec(),
                    box_size,
                });
            }
            let slot = &mut table[Self::flat_index(side, &p)];
            if slot.is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate table entry at {:?}",
                    p.counts()
                )));
            }
            *slot = Some(v);
        }
        let table = table
            .into_iter()
            .enumerate()
            .map(|(flat, v)| {
                v.ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "table does not cover the box: missing entry #{flat}"
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dimension,
            box_size,
            table,
            fallback,
        })
    }

    /// Tabulates `f` over the whole box.
    pub fn from_fn<F>(dimension: usize, box_size: u32, fallback: Fallback, mut f: F) -> Result<Self>
    where
        F: FnMut(&VisitVector) -> Result<SimplexPoint>,
    {
        let entries = lattice::box_indices(dimension, box_size)
            .into_iter()
            .map(|p| f(&p).map(|v| (p, v)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dimension, box_size, entries, fallback)
    }

    fn flat_index(side: usize, p: &VisitVector) -> usize {
        p.counts().iter().fold(0, |acc, &c| acc * side + c as usize)
    }

    pub fn box_size(&self) -> u32 {
        self.box_size
    }

    pub fn fallback(&self) -> Fallback {
        self.fallback
    }

    /// Entries in lexicographic order of the counts.
    pub fn entries(&self) -> impl Iterator<Item = (VisitVector, &SimplexPoint)> {
        lattice::box_indices(self.dimension, self.box_size)
            .into_iter()
            .zip(self.table.iter())
    }

    fn lookup(&self, p: &VisitVector) -> Result<&SimplexPoint> {
        let side = self.box_size as usize + 1;
        if p.max_count() <= self.box_size {
            return Ok(&self.table[Self::flat_index(side, p)]);
        }
        match self.fallback {
            Fallback::Reject => Err(Error::OutOfBox {
                counts: p.counts().to_vec(),
                box_size: self.box_size,
            }),
            Fallback::Clamp => {
                let clamped =
                    VisitVector::new(p.counts().iter().map(|&c| c.min(self.box_size)).collect());
                Ok(&self.table[Self::flat_index(side, &clamped)])
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LawFamily {
    /// `V(p) = (1/d, ..., 1/d)`.
    Uniform,
    /// Pólya urn: `V_i(p) = (α_i + p_i) / Σ_j (α_j + p_j)`.
    Dirichlet {
        alpha: Vec<f64>,
    },
    /// Pólya urn reweighted by the polynomial `Q`.
    PolynomialDirichlet(PolynomialDirichlet),
    Tabulated(TabulatedLaw),
    /// `V(p) = w` for every `p`; induced by a point-mass environment.
    Constant(SimplexPoint),
    /// Moment ratios of a finite mixture of point masses.
    Mixture(Mixture),
}

/// A law of reinforcement with `d` neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct ReinforcementLaw {
    dimension: usize,
    family: LawFamily,
}

impl ReinforcementLaw {
    pub fn uniform(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Self {
            dimension,
            family: LawFamily::Uniform,
        })
    }

    pub fn dirichlet(alpha: Vec<f64>) -> Result<Self> {
        validate_alpha(&alpha)?;
        Ok(Self {
            dimension: alpha.len(),
            family: LawFamily::Dirichlet { alpha },
        })
    }

    pub fn polynomial_dirichlet(params: PolynomialDirichlet) -> Self {
        Self {
            dimension: params.dimension(),
            family: LawFamily::PolynomialDirichlet(params),
        }
    }

    pub fn tabulated(table: TabulatedLaw) -> Self {
        Self {
            dimension: table.dimension,
            family: LawFamily::Tabulated(table),
        }
    }

    pub fn constant(weights: SimplexPoint) -> Self {
        Self {
            dimension: weights.dimension(),
            family: LawFamily::Constant(weights),
        }
    }

    pub fn mixture(mixture: Mixture) -> Self {
        Self {
            dimension: mixture.dimension(),
            family: LawFamily::Mixture(mixture),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn family(&self) -> &LawFamily {
        &self.family
    }

    /// `V(p)`.
    pub fn eval(&self, p: &VisitVector) -> Result<SimplexPoint> {
        if p.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: p.dimension(),
            });
        }
        match &self.family {
            LawFamily::Uniform => Ok(SimplexPoint::uniform(self.dimension)),
            LawFamily::Dirichlet { alpha } => {
                let y: Vec<f64> = alpha
                    .iter()
                    .zip(p.counts())
                    .map(|(a, &c)| a + c as f64)
                    .collect();
                let total: f64 = y.iter().sum();
                SimplexPoint::new(y.into_iter().map(|v| v / total).collect())
            }
            LawFamily::PolynomialDirichlet(params) => SimplexPoint::new(params.eval(p)?),
            LawFamily::Tabulated(table) => table.lookup(p).cloned(),
            LawFamily::Constant(w) => Ok(w.clone()),
            LawFamily::Mixture(mixture) => {
                let base = mixture.ln_moment(p);
                if !base.is_finite() {
                    return Err(Error::NumericUnderflow(format!(
                        "mixture moment at {:?}",
                        p.counts()
                    )));
                }
                let weights = (0..self.dimension)
                    .map(|i| (mixture.ln_moment(&p.incremented(i)) - base).exp())
                    .collect();
                if mixture.atoms().iter().all(|(_, a)| a.is_interior()) {
                    SimplexPoint::new(weights)
                } else {
                    SimplexPoint::closed(weights)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn simplex_point_rejects_boundary_and_bad_sums() {
        assert!(SimplexPoint::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexPoint::new(vec![1.0, 0.0]).is_err());
        assert!(SimplexPoint::new(vec![0.6, 0.5]).is_err());
        assert!(SimplexPoint::new(vec![1e-301, 1.0 - 1e-301]).is_err());
        assert!(SimplexPoint::new(vec![1.0]).is_ok());
        assert!(SimplexPoint::new(vec![]).is_err());
        assert!(SimplexPoint::closed(vec![1.0, 0.0]).is_ok());
        assert!(SimplexPoint::closed(vec![1.2, -0.2]).is_err());
    }

    #[test]
    fn inverse_cdf_skips_zero_weights() {
        let p = SimplexPoint::closed(vec![0.0, 1.0]).unwrap();
        assert_eq!(p.sample_index(0.0), 1);
        assert_eq!(p.sample_index(0.999), 1);
        let q = SimplexPoint::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(q.sample_index(0.2), 0);
        assert_eq!(q.sample_index(0.25), 1);
    }

    #[test]
    fn dirichlet_examples() {
        let law = ReinforcementLaw::dirichlet(vec![1.0, 1.0]).unwrap();
        let v = law.eval(&VisitVector::zeros(2)).unwrap();
        assert_eq!(v.weights(), &[0.5, 0.5]);
        let v = law.eval(&VisitVector::new(vec![2, 1])).unwrap();
        assert!(close(v.weight(0), 3.0 / 5.0, 1e-15));
        assert!(close(v.weight(1), 2.0 / 5.0, 1e-15));
    }

    #[test]
    fn polynomial_dirichlet_linear_example() {
        let params = PolynomialDirichlet::new(vec![1.0, 1.0], 1, [(vec![1, 0], 1.0)]).unwrap();
        let law = ReinforcementLaw::polynomial_dirichlet(params);
        let v = law.eval(&VisitVector::zeros(2)).unwrap();
        assert!(close(v.weight(0), 2.0 / 3.0, 1e-15));
        assert!(close(v.weight(1), 1.0 / 3.0, 1e-15));
        // Density ∝ t_1 is Dirichlet(2, 1): V_1(p) = (2 + p_1) / (3 + p_1 + p_2).
        let dirichlet = ReinforcementLaw::dirichlet(vec![2.0, 1.0]).unwrap();
        for p in lattice::box_indices(2, 6) {
            let a = law.eval(&p).unwrap();
            let b = dirichlet.eval(&p).unwrap();
            let expected = (2.0 + p.counts()[0] as f64) / (3.0 + p.total() as f64);
            assert!(close(a.weight(0), expected, 1e-14));
            assert!(close(a.weight(0), b.weight(0), 1e-14));
        }
    }

    #[test]
    fn rising_factorial_examples() {
        assert_eq!(rising_factorial(2.0, 3), 24.0);
        assert_eq!(rising_factorial(7.3, 0), 1.0);
        assert!(close(rising_factorial(0.5, 2), 0.75, 1e-15));
        // Log-gamma route above the direct limit: (25, 10) = 34! / 24!.
        let direct: f64 = (25..35).map(|j| j as f64).product();
        assert!((rising_factorial(25.0, 10) / direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn q_examples() {
        let q = PolynomialDirichlet::new(vec![1.0, 1.0], 1, [(vec![1, 0], 1.0)]).unwrap();
        assert_eq!(q.eval_q(&[3.0, 2.0]).unwrap(), 3.0);
        let q = PolynomialDirichlet::new(vec![1.0, 1.0], 2, [(vec![2, 0], 1.0), (vec![0, 2], 1.0)])
            .unwrap();
        assert_eq!(q.eval_q(&[1.0, 1.0]).unwrap(), 4.0);
        assert!(close(q.ln_eval_q(&[1.0, 1.0]).unwrap(), 4f64.ln(), 1e-15));
        let q = PolynomialDirichlet::new(vec![1.0, 2.0], 0, [(vec![0, 0], 2.5)]).unwrap();
        assert_eq!(q.eval_q(&[0.3, 9.0]).unwrap(), 2.5);
    }

    #[test]
    fn polynomial_parameters_are_validated() {
        assert!(PolynomialDirichlet::new(vec![1.0, 1.0], 2, [(vec![1, 0], 1.0)]).is_err());
        assert!(PolynomialDirichlet::new(vec![1.0, 1.0], 1, [(vec![1, 0], 0.0)]).is_err());
        assert!(PolynomialDirichlet::new(vec![1.0, 1.0], 1, [(vec![1, 0], -1.0)]).is_err());
        assert!(PolynomialDirichlet::new(vec![1.0, 0.0], 1, [(vec![1, 0], 1.0)]).is_err());
        assert!(PolynomialDirichlet::new(
            vec![1.0, 1.0],
            1,
            [(vec![1, 0], 1.0), (vec![1, 0], 2.0)]
        )
        .is_err());
        let p = PolynomialDirichlet::new(vec![1.0, 1.0], 2, [(vec![2, 0], 1.0)]).unwrap();
        let dense: Vec<f64> = p.dense_coefficients().iter().map(|(_, v)| *v).collect();
        assert_eq!(dense, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let law = ReinforcementLaw::dirichlet(vec![1.0, 1.0]).unwrap();
        assert_eq!(
            law.eval(&VisitVector::zeros(3)),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 3
            })
        );
    }

    #[test]
    fn tabulated_law_box_and_fallback() {
        let entries = lattice::box_indices(2, 1)
            .into_iter()
            .map(|p| (p, SimplexPoint::uniform(2)))
            .collect::<Vec<_>>();
        let strict = TabulatedLaw::new(2, 1, entries.clone(), Fallback::Reject).unwrap();
        let law = ReinforcementLaw::tabulated(strict);
        assert!(law.eval(&VisitVector::new(vec![1, 1])).is_ok());
        assert!(matches!(
            law.eval(&VisitVector::new(vec![2, 0])),
            Err(Error::OutOfBox { .. })
        ));
        let clamped = TabulatedLaw::new(2, 1, entries.clone(), Fallback::Clamp).unwrap();
        assert!(ReinforcementLaw::tabulated(clamped)
            .eval(&VisitVector::new(vec![5, 0]))
            .is_ok());
        assert!(TabulatedLaw::new(2, 1, entries[..3].to_vec(), Fallback::Reject).is_err());
    }

    #[test]
    fn degree_zero_polynomial_reduces_to_dirichlet() {
        let alpha = vec![0.7, 1.9, 3.1];
        let poly = PolynomialDirichlet::new(alpha.clone(), 0, [(vec![0, 0, 0], 4.2)]).unwrap();
        let poly = ReinforcementLaw::polynomial_dirichlet(poly);
        let dir = ReinforcementLaw::dirichlet(alpha).unwrap();
        for p in lattice::box_indices(3, 5) {
            let a = poly.eval(&p).unwrap();
            let b = dir.eval(&p).unwrap();
            for i in 0..3 {
                assert!((a.weight(i) / b.weight(i) - 1.0).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn mixture_law_with_single_atom_is_constant() {
        let w = SimplexPoint::new(vec![0.2, 0.3, 0.5]).unwrap();
        let law = ReinforcementLaw::mixture(Mixture::new(vec![(1.0, w.clone())]).unwrap());
        let v = law.eval(&VisitVector::new(vec![3, 0, 2])).unwrap();
        for i in 0..3 {
            assert!(close(v.weight(i), w.weight(i), 1e-14));
        }
    }

    fn arb_law() -> impl Strategy<Value = ReinforcementLaw> {
        let dirichlet = prop::collection::vec(0.1f64..5.0, 2..=4)
            .prop_map(|a| ReinforcementLaw::dirichlet(a).unwrap());
        let poly = (
            prop::collection::vec(0.1f64..5.0, 2..=4),
            0u32..=3,
            any::<u64>(),
        )
            .prop_map(|(alpha, degree, bits)| {
                let d = alpha.len();
                let coeffs: Vec<_> = lattice::multi_indices_of_degree(d, degree)
                    .into_iter()
                    .enumerate()
                    .map(|(i, m)| {
                        let a = if i == 0 {
                            1.0
                        } else {
                            ((bits >> (i % 64)) & 3) as f64 * 0.5
                        };
                        (m.counts().to_vec(), a)
                    })
                    .collect();
                ReinforcementLaw::polynomial_dirichlet(
                    PolynomialDirichlet::new(alpha, degree, coeffs).unwrap(),
                )
            });
        prop_oneof![
            dirichlet,
            poly,
            (2usize..=4).prop_map(|d| ReinforcementLaw::uniform(d).unwrap())
        ]
    }

    proptest! {
        #[test]
        fn law_outputs_are_simplex_points(law in arb_law(), seed in prop::collection::vec(0u32..12, 4)) {
            let p = VisitVector::new(seed[..law.dimension()].to_vec());
            let v = law.eval(&p).unwrap();
            let sum: f64 = v.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(v.weights().iter().all(|&w| w > 0.0));
        }

        #[test]
        fn rising_factorial_recurrence(y in 0.01f64..60.0, k in 0u32..40) {
            let lhs = rising_factorial(y, k + 1);
            let rhs = rising_factorial(y, k) * (y + k as f64);
            prop_assert!((lhs / rhs - 1.0).abs() < 1e-11, "{} vs {}", lhs, rhs);
        }
    }
}
