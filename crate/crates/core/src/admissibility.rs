//! Admissibility of a reinforcement law: closedness of the 1-form
//! `w(p, p + e_i) = ln V_i(p)` on the oriented lattice `Z_+^d`, checked over
//! elementary squares of a finite box.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice;
use crate::laws::{ReinforcementLaw, VisitVector};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// A monotone lattice path from the origin: step `n` moves along `e_{s(n)}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticePath {
    dimension: usize,
    steps: Vec<usize>,
}

impl LatticePath {
    pub fn new(dimension: usize, steps: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = steps.iter().find(|&&s| s >= dimension) {
            return Err(Error::InvalidParameter(format!(
                "step direction {bad} out of range for dimension {dimension}"
            )));
        }
        Ok(Self { dimension, steps })
    }

    /// All `e_0` steps first, then all `e_1`, and so on.
    pub fn staircase(endpoint: &VisitVector) -> Self {
        let steps = endpoint
            .counts()
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize))
            .collect();
        Self {
            dimension: endpoint.dimension(),
            steps,
        }
    }

    /// Staircase visiting the axes in reverse order.
    pub fn reverse_staircase(endpoint: &VisitVector) -> Self {
        let steps = endpoint
            .counts()
            .iter()
            .enumerate()
            .rev()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize))
            .collect();
        Self {
            dimension: endpoint.dimension(),
            steps,
        }
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// `U(s, n) = Σ_{i<n} e_{s(i)}`.
    pub fn endpoint(&self) -> VisitVector {
        let mut end = VisitVector::zeros(self.dimension);
        for &s in &self.steps {
            end.increment(s);
        }
        end
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub p: VisitVector,
    pub i: usize,
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub violations: Vec<Violation>,
    pub box_size: u32,
    pub tolerance: f64,
}

/// The two sides of the square relation
/// `ln V_i(p) + ln V_j(p + e_i)` and `ln V_j(p) + ln V_i(p + e_j)`.
fn square_sides(law: &ReinforcementLaw, p: &VisitVector, i: usize, j: usize) -> Result<(f64, f64)> {
    let d = law.dimension();
    if i >= d || j >= d || i == j {
        return Err(Error::InvalidParameter(format!(
            "square directions ({i}, {j}) must be distinct and below {d}"
        )));
    }
    let here = law.eval(p)?;
    let after_i = law.eval(&p.incremented(i))?;
    let after_j = law.eval(&p.incremented(j))?;
    let lhs = here.ln_weight(i) + after_i.ln_weight(j);
    let rhs = here.ln_weight(j) + after_j.ln_weight(i);
    Ok((lhs, rhs))
}

fn defect(lhs: f64, rhs: f64) -> f64 {
    // Both sides -inf: the square carries zero probability either way.
    if lhs == rhs {
        0.0
    } else {
        lhs - rhs
    }
}

/// Circulation of `w` around the elementary square at `p` spanned by
/// directions `i` and `j`. Zero iff `V_i(p) V_j(p+e_i) = V_j(p) V_i(p+e_j)`.
pub fn square_defect(law: &ReinforcementLaw, p: &VisitVector, i: usize, j: usize) -> Result<f64> {
    let (lhs, rhs) = square_sides(law, p, i, j)?;
    Ok(defect(lhs, rhs))
}

/// Scans every elementary square with lower corner in `{0..K-1}^d`.
pub fn check_admissible(
    law: &ReinforcementLaw,
    box_size: u32,
    tolerance: f64,
) -> Result<AdmissibilityReport> {
    if box_size == 0 {
        return Err(Error::InvalidParameter(
            "box size must be at least 1".into(),
        ));
    }
    let d = law.dimension();
    let mut violations = Vec::new();
    for p in lattice::box_indices(d, box_size - 1) {
        for i in 0..d {
            for j in (i + 1)..d {
                let (lhs, rhs) = square_sides(law, &p, i, j)?;
                let gap = defect(lhs, rhs);
                if !(gap.abs() <= tolerance) {
                    violations.push(Violation {
                        p: p.clone(),
                        i,
                        j,
                        lhs,
                        rhs,
                        gap,
                    });
                }
            }
        }
    }
    Ok(AdmissibilityReport {
        admissible: violations.is_empty(),
        violations,
        box_size,
        tolerance,
    })
}

/// `ln M(s, n) = Σ_i ln V_{s(i)}(U(s, i))`.
pub fn path_product(law: &ReinforcementLaw, path: &LatticePath) -> Result<f64> {
    if path.dimension() != law.dimension() {
        return Err(Error::DimensionMismatch {
            expected: law.dimension(),
            found: path.dimension(),
        });
    }
    let mut position = VisitVector::zeros(law.dimension());
    let mut acc = 0.0;
    for &s in path.steps() {
        acc += law.eval(&position)?.ln_weight(s);
        position.increment(s);
    }
    Ok(acc)
}
