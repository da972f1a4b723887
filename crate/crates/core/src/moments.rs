//! Candidate moment sequences `v_k` built from admissible laws, the lattice
//! difference operator `Δ^h`, and the Hildebrandt–Schoenberg positivity test
//! for moment sequences of measures on `[0, 1]^d`.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::admissibility::{path_product, LatticePath};
use crate::error::{Error, Result};
use crate::lattice;
use crate::laws::{ReinforcementLaw, VisitVector};
use crate::numeric::{ln_gamma, CompensatedSum};

/// Staircase and reverse-staircase products must agree this closely.
pub const PATH_INDEPENDENCE_TOLERANCE: f64 = 1e-10;

/// Relative cancellation level (in units of machine epsilon) below which a
/// signed difference is indistinguishable from zero.
const CANCELLATION_ULPS: f64 = 1e3;

/// Exact multinomial coefficients are computed up to this total.
const EXACT_MULTINOMIAL_LIMIT: u64 = 30;

/// Values `v_k` for every `|k| <= order`, stored as logarithms.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    dimension: usize,
    order: u32,
    entries: Vec<(VisitVector, f64)>,
    index: HashMap<VisitVector, usize>,
}

impl MomentTable {
    /// Fills the table from `ln v_k`.
    pub fn from_log_fn<F>(dimension: usize, order: u32, mut ln_value: F) -> Result<Self>
    where
        F: FnMut(&VisitVector) -> Result<f64>,
    {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let keys = lattice::multi_indices_up_to_degree(dimension, order);
        let mut entries = Vec::with_capacity(keys.len());
        let mut index = HashMap::with_capacity(keys.len());
        for (pos, k) in keys.into_iter().enumerate() {
            let v = ln_value(&k)?;
            index.insert(k.clone(), pos);
            entries.push((k, v));
        }
        Ok(Self {
            dimension,
            order,
            entries,
            index,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// `(k, ln v_k)` grouped by total degree, lexicographic within a degree.
    pub fn entries(&self) -> &[(VisitVector, f64)] {
        &self.entries
    }

    pub fn ln_value(&self, k: &VisitVector) -> Result<f64> {
        self.position(k).map(|pos| self.entries[pos].1)
    }

    pub fn value(&self, k: &VisitVector) -> Result<f64> {
        self.ln_value(k).map(f64::exp)
    }

    fn position(&self, k: &VisitVector) -> Result<usize> {
        if k.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: k.dimension(),
            });
        }
        self.index.get(k).copied().ok_or(Error::OutOfOrder {
            requested: k.total(),
            order: self.order,
        })
    }

    /// Replaces `v_k` by a linear value. Used to inject corrupted entries
    /// when exercising the certification path.
    pub fn overwrite(&mut self, k: &VisitVector, value: f64) -> Result<()> {
        let pos = self.position(k)?;
        self.entries[pos].1 = value.ln();
        Ok(())
    }

    /// Structural problems: `v_0 != 1`, non-positive entries, and increases
    /// `v_{k+e_i} > v_k`.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if let Some((_, v0)) = self.entries.first() {
            if v0.abs() > 1e-12 {
                problems.push(format!("v_0 = {} instead of 1", v0.exp()));
            }
        }
        for (k, ln_v) in &self.entries {
            if !ln_v.is_finite() {
                problems.push(format!("v_{:?} is not positive", k.counts()));
            }
            if k.total() < self.order as u64 {
                for i in 0..self.dimension {
                    let next = self.entries[self.index[&k.incremented(i)]].1;
                    if next > *ln_v + 1e-12 {
                        problems.push(format!(
                            "v_{:?} = {} exceeds v_{:?} = {}",
                            k.incremented(i).counts(),
                            next.exp(),
                            k.counts(),
                            ln_v.exp()
                        ));
                    }
                }
            }
        }
        problems
    }

    /// CSV with header `k_1,...,k_d,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dimension).map(|i| format!("k_{i}")).collect();
        let _ = writeln!(out, "{},value", header.join(","));
        for (k, ln_v) in &self.entries {
            let cols: Vec<String> = k.counts().iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{},{:e}", cols.join(","), ln_v.exp());
        }
        out
    }

    fn linear_values(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, l)| l.exp()).collect()
    }
}

#[derive(Serialize)]
struct EntryRecord<'a> {
    k: &'a VisitVector,
    value: f64,
    log_value: f64,
}

impl Serialize for MomentTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries: Vec<EntryRecord<'_>> = self
            .entries
            .iter()
            .map(|(k, l)| EntryRecord {
                k,
                value: l.exp(),
                log_value: *l,
            })
            .collect();
        let mut s = serializer.serialize_struct("MomentTable", 3)?;
        s.serialize_field("dimension", &self.dimension)?;
        s.serialize_field("order", &self.order)?;
        s.serialize_field("entries", &entries)?;
        s.end()
    }
}

/// `v_k` as the product of `V` along the staircase to `k`, cross-checked
/// along the reverse staircase.
pub fn build_moment_table(law: &ReinforcementLaw, order: u32) -> Result<MomentTable> {
    MomentTable::from_log_fn(law.dimension(), order, |k| {
        let forward = path_product(law, &LatticePath::staircase(k))?;
        let backward = path_product(law, &LatticePath::reverse_staircase(k))?;
        if forward != backward {
            let gap = (forward - backward).abs();
            if !(gap <= PATH_INDEPENDENCE_TOLERANCE) {
                return Err(Error::PathDependence {
                    endpoint: k.counts().to_vec(),
                    gap,
                });
            }
        }
        Ok(forward)
    })
}

/// `Π_i C(h_i, m_i)`.
fn binomial_product(h: &VisitVector, m: &VisitVector) -> f64 {
    h.counts()
        .iter()
        .zip(m.counts())
        .map(|(&n, &r)| binomial(n, r))
        .product()
}

fn binomial(n: u32, r: u32) -> f64 {
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(-1)^{|h|} Δ^h(v)(k)` together with the total magnitude of its terms.
fn signed_difference(
    table: &MomentTable,
    values: &[f64],
    h: &VisitVector,
    k: &VisitVector,
) -> Result<(f64, f64)> {
    let mut acc = CompensatedSum::new();
    for m in lattice::sub_indices(h) {
        let sign = if m.total() % 2 == 0 { 1.0 } else { -1.0 };
        let pos = table.position(&k.add(&m))?;
        acc.add(sign * binomial_product(h, &m) * values[pos]);
    }
    Ok((acc.value(), acc.magnitude()))
}

fn check_request(table: &MomentTable, h: &VisitVector, k: &VisitVector) -> Result<()> {
    for v in [h, k] {
        if v.dimension() != table.dimension {
            return Err(Error::DimensionMismatch {
                expected: table.dimension,
                found: v.dimension(),
            });
        }
    }
    let requested = h.total() + k.total();
    if requested > table.order as u64 {
        return Err(Error::OutOfOrder {
            requested,
            order: table.order,
        });
    }
    Ok(())
}

/// `Δ^h(v)(k) = Σ_{0<=m<=h} (-1)^{|h|-|m|} C(h, m) v_{k+m}`.
pub fn finite_difference(table: &MomentTable, h: &VisitVector, k: &VisitVector) -> Result<f64> {
    check_request(table, h, k)?;
    let values = table.linear_values();
    let (signed, _) = signed_difference(table, &values, h, k)?;
    Ok(if h.total().is_multiple_of(2) {
        signed
    } else {
        -signed
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DifferenceLocation {
    pub h: VisitVector,
    pub k: VisitVector,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HsReport {
    pub passed: bool,
    /// Most negative `(-1)^{|h|} Δ^h(v)(k)` found, or 0 when none is negative.
    pub max_negativity: f64,
    /// Location of the smallest signed difference.
    pub worst_case: DifferenceLocation,
    pub order_checked: u32,
    pub tolerance: f64,
}

/// Evaluates `(-1)^{|h|} Δ^h(v)(k)` for every `|h| + |k| <= order` and
/// passes when none is below `-tolerance`.
pub fn hildebrandt_schoenberg_check(table: &MomentTable, tolerance: f64) -> Result<HsReport> {
    let d = table.dimension;
    let values = table.linear_values();
    let pairs = lattice::multi_indices_up_to_degree(2 * d, table.order);
    let minimum = pairs
        .par_iter()
        .map(|hk| {
            let h = VisitVector::new(hk.counts()[..d].to_vec());
            let k = VisitVector::new(hk.counts()[d..].to_vec());
            let (value, magnitude) = signed_difference(table, &values, &h, &k)?;
            let value = if value.abs() <= CANCELLATION_ULPS * f64::EPSILON * magnitude {
                0.0
            } else {
                value
            };
            Ok((value, h, k))
        })
        .try_reduce_with(|a, b| {
            // Ties resolve to the earlier pair so the report is deterministic.
            let a_first = (&a.1, &a.2) <= (&b.1, &b.2);
            Ok(match a.0.partial_cmp(&b.0) {
                Some(std::cmp::Ordering::Less) => a,
                Some(std::cmp::Ordering::Greater) => b,
                _ if a.0.is_nan() => a,
                _ if b.0.is_nan() => b,
                _ if a_first => a,
                _ => b,
            })
        })
        .expect("the pair h = k = 0 is always present")?;
    let (value, h, k) = minimum;
    let max_negativity = if value.is_nan() {
        f64::NAN
    } else {
        value.min(0.0)
    };
    Ok(HsReport {
        passed: max_negativity >= -tolerance,
        max_negativity,
        worst_case: DifferenceLocation { h, k },
        order_checked: table.order,
        tolerance,
    })
}

/// `Σ_{|k| = n} (n! / k_1! ··· k_d!) v_k`, the `n`-th moment of `Σ_i X_i`.
pub fn simplex_mass(table: &MomentTable, n: u32) -> Result<f64> {
    if n > table.order {
        return Err(Error::OutOfOrder {
            requested: n as u64,
            order: table.order,
        });
    }
    let mut acc = CompensatedSum::new();
    for k in lattice::multi_indices_of_degree(table.dimension, n) {
        let weight = multinomial(&k).ln();
        acc.add((weight + table.ln_value(&k)?).exp());
    }
    Ok(acc.value())
}

/// Number of words in `{1..d}^{|k|}` with letter counts `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Multinomial {
    Exact(u128),
    /// Natural logarithm of the coefficient, from log-gamma.
    Approximate(f64),
}

impl Multinomial {
    pub fn ln(&self) -> f64 {
        match *self {
            Multinomial::Exact(n) => (n as f64).ln(),
            Multinomial::Approximate(l) => l,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match *self {
            Multinomial::Exact(n) => n as f64,
            Multinomial::Approximate(l) => l.exp(),
        }
    }
}

pub fn multinomial(k: &VisitVector) -> Multinomial {
    let total = k.total();
    if total <= EXACT_MULTINOMIAL_LIMIT {
        // Product of binomials C(k_1 + ... + k_j, k_j); each stays integral.
        let mut acc: u128 = 1;
        let mut running: u128 = 0;
        for &c in k.counts() {
            for i in 1..=c as u128 {
                running += 1;
                acc = acc * running / i;
            }
        }
        Multinomial::Exact(acc)
    } else {
        let ln = ln_gamma(total as f64 + 1.0)
            - k.counts()
                .iter()
                .map(|&c| ln_gamma(c as f64 + 1.0))
                .sum::<f64>();
        Multinomial::Approximate(ln)
    }
}
