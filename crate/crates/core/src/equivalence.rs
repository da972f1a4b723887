//! Exact and statistical comparison of the reinforced law with the annealed
//! law, and recovery of environment moments from a reinforcement law.
//!
//! Trajectories are compared as vertex sequences. On multigraphs a vertex
//! sequence can come from several neighbour-index sequences; its probability
//! is the sum over all of them.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::admissibility::{check_admissible, DEFAULT_TOLERANCE};
use crate::environment::VertexEnvLaw;
use crate::error::{Error, Result};
use crate::laws::{ReinforcementLaw, VisitVector};
use crate::moments::{build_moment_table, MomentTable};
use crate::numeric::log_add;
use crate::walk::{path_key, Graph, Trajectory, WalkState};

/// Largest number of move sequences an exhaustive enumeration may visit.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Cells with fewer expected counts than this are pooled.
pub const CHI_SQUARE_POOLING_THRESHOLD: f64 = 5.0;

/// Quantile of the chi-square distribution used as the acceptance bound.
pub const CHI_SQUARE_QUANTILE: f64 = 0.999;

pub const MIN_SAMPLES: usize = 100;

/// Which process assigns probabilities to paths.
#[derive(Clone, Copy, Debug)]
pub enum Model<'a> {
    Reinforced(&'a [ReinforcementLaw]),
    Annealed(&'a [VertexEnvLaw]),
}

impl Model<'_> {
    fn check(&self, graph: &Graph) -> Result<()> {
        match self {
            Model::Reinforced(laws) => graph.check_laws(laws),
            Model::Annealed(envs) => graph.check_envs(envs),
        }
    }
}

/// The exact law of `(X_0, ..., X_T)`: every length-`T` vertex sequence from
/// `x0`, sorted, with its log-probability (`-inf` for impossible paths).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathDistribution {
    pub start: usize,
    pub steps: usize,
    pub paths: Vec<(Vec<usize>, f64)>,
}

impl PathDistribution {
    pub fn total_mass(&self) -> f64 {
        let mut acc = crate::numeric::CompensatedSum::new();
        acc.extend(self.paths.iter().map(|(_, l)| l.exp()));
        acc.value()
    }

    pub fn probability(&self, vertices: &[usize]) -> Option<f64> {
        self.paths
            .binary_search_by(|(p, _)| p.as_slice().cmp(vertices))
            .ok()
            .map(|pos| self.paths[pos].1.exp())
    }

    /// CSV with header `path,probability`; paths are dash-joined vertex ids.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,probability\n");
        for (p, l) in &self.paths {
            let _ = writeln!(out, "{},{:e}", path_key(p), l.exp());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub critical_value: f64,
    pub quantile: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub total_variation: f64,
    /// Largest per-path difference of probabilities.
    pub max_abs_gap: f64,
    /// Largest per-path difference of log-probabilities (exact comparisons).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_log_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_square: Option<ChiSquareTest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<usize>,
}

/// Log-probability of a vertex sequence, summed over the neighbour-index
/// sequences that realize it.
fn path_logprob(graph: &Graph, model: Model<'_>, vertices: &[usize]) -> Result<f64> {
    model.check(graph)?;
    let Some(&x0) = vertices.first() else {
        return Err(Error::InvalidTrajectory("empty vertex sequence".into()));
    };
    let mut state =
        WalkState::new(graph, x0).map_err(|e| Error::InvalidTrajectory(e.to_string()))?;
    let choices: Vec<Vec<usize>> = vertices
        .windows(2)
        .map(|w| {
            let idx = graph.move_indices(w[0], w[1]);
            if idx.is_empty() {
                Err(Error::InvalidTrajectory(format!(
                    "{} -> {} is not an edge",
                    w[0], w[1]
                )))
            } else {
                Ok(idx)
            }
        })
        .collect::<Result<_>>()?;

    fn go(
        graph: &Graph,
        model: Model<'_>,
        choices: &[Vec<usize>],
        state: &mut WalkState,
        acc: f64,
    ) -> Result<f64> {
        match choices.split_first() {
            None => leaf_logprob(model, state, acc),
            Some((here, rest)) => {
                let mut total = f64::NEG_INFINITY;
                for &i in here {
                    let step = edge_logprob(model, state, i)?;
                    let mut next = state.clone();
                    next.advance(graph, i);
                    total = log_add(total, go(graph, model, rest, &mut next, acc + step)?);
                }
                Ok(total)
            }
        }
    }
    go(graph, model, &choices, &mut state, 0.0)
}

/// `ln P̂_{x0}(X_0, ..., X_T)` under the reinforced walk.
pub fn reinforced_path_logprob(
    graph: &Graph,
    laws: &[ReinforcementLaw],
    vertices: &[usize],
) -> Result<f64> {
    path_logprob(graph, Model::Reinforced(laws), vertices)
}

/// `ln P_{x0}(X_0, ..., X_T)` under the annealed law:
/// `Σ_x ln E_{μ_x}[∏_j ω(x, j)^{N_j(x)}]`.
pub fn annealed_path_logprob(
    graph: &Graph,
    envs: &[VertexEnvLaw],
    vertices: &[usize],
) -> Result<f64> {
    path_logprob(graph, Model::Annealed(envs), vertices)
}

fn leaf_logprob(model: Model<'_>, state: &WalkState, acc: f64) -> Result<f64> {
    match model {
        Model::Reinforced(_) => Ok(acc),
        Model::Annealed(envs) => annealed_leaf(envs, state.all_counts()),
    }
}

fn annealed_leaf(envs: &[VertexEnvLaw], counts: &[VisitVector]) -> Result<f64> {
    let mut acc = 0.0;
    for (env, n) in envs.iter().zip(counts) {
        if n.total() > 0 {
            acc += env.ln_mixed_moment(n)?;
        }
    }
    Ok(acc)
}

/// Number of neighbour-index sequences of length `steps` from `x0`.
pub fn count_move_sequences(graph: &Graph, x0: usize, steps: usize) -> u128 {
    let mut ways = vec![0u128; graph.vertex_count()];
    ways[x0] = 1;
    for _ in 0..steps {
        let mut next = vec![0u128; graph.vertex_count()];
        for (x, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for &y in graph.neighbours(x) {
                next[y] = next[y].saturating_add(w);
            }
        }
        ways = next;
    }
    ways.into_iter().fold(0u128, |a, b| a.saturating_add(b))
}

/// Every length-`steps` path from `x0` with its exact probability.
pub fn enumerate_distribution(
    graph: &Graph,
    model: Model<'_>,
    x0: usize,
    steps: usize,
) -> Result<PathDistribution> {
    model.check(graph)?;
    let root = WalkState::new(graph, x0)?;
    let paths = count_move_sequences(graph, x0, steps);
    if paths > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            paths,
            limit: ENUMERATION_LIMIT,
        });
    }

    let leaves: Vec<(Vec<usize>, f64)> = if steps == 0 {
        vec![(vec![x0], leaf_logprob(model, &root, 0.0)?)]
    } else {
        (0..graph.degree(x0))
            .into_par_iter()
            .map(|i| {
                let mut out = Vec::new();
                let mut trajectory = vec![x0];
                let mut state = root.clone();
                let first = edge_logprob(model, &state, i)?;
                state.advance(graph, i);
                trajectory.push(state.position());
                expand(
                    graph,
                    model,
                    &mut state,
                    &mut trajectory,
                    first,
                    steps - 1,
                    &mut out,
                )?;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect()
    };

    let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (vertices, ln_p) in leaves {
        merged
            .entry(vertices)
            .and_modify(|acc| *acc = log_add(*acc, ln_p))
            .or_insert(ln_p);
    }
    Ok(PathDistribution {
        start: x0,
        steps,
        paths: merged.into_iter().collect(),
    })
}

/// Per-step log-weight; the annealed model is scored at the leaves.
fn edge_logprob(model: Model<'_>, state: &WalkState, i: usize) -> Result<f64> {
    match model {
        Model::Reinforced(laws) => {
            let x = state.position();
            Ok(laws[x].eval(state.counts(x))?.ln_weight(i))
        }
        Model::Annealed(_) => Ok(0.0),
    }
}

fn expand(
    graph: &Graph,
    model: Model<'_>,
    state: &mut WalkState,
    trajectory: &mut Vec<usize>,
    acc: f64,
    remaining: usize,
    out: &mut Vec<(Vec<usize>, f64)>,
) -> Result<()> {
    if remaining == 0 {
        out.push((trajectory.clone(), leaf_logprob(model, state, acc)?));
        return Ok(());
    }
    for i in 0..graph.degree(state.position()) {
        let step = edge_logprob(model, state, i)?;
        let mut next = state.clone();
        next.advance(graph, i);
        trajectory.push(next.position());
        expand(
            graph,
            model,
            &mut next,
            trajectory,
            acc + step,
            remaining - 1,
            out,
        )?;
        trajectory.pop();
    }
    Ok(())
}

/// Total variation and per-path gaps between two exact distributions over
/// the same set of paths.
pub fn compare_distributions(
    a: &PathDistribution,
    b: &PathDistribution,
) -> Result<ComparisonReport> {
    if a.start != b.start || a.steps != b.steps || a.paths.len() != b.paths.len() {
        return Err(Error::SupportMismatch(format!(
            "({} paths from {} in {} steps) vs ({} paths from {} in {} steps)",
            a.paths.len(),
            a.start,
            a.steps,
            b.paths.len(),
            b.start,
            b.steps
        )));
    }
    let mut tv = crate::numeric::CompensatedSum::new();
    let mut max_abs_gap = 0.0f64;
    let mut max_log_gap = 0.0f64;
    for ((pa, la), (pb, lb)) in a.paths.iter().zip(&b.paths) {
        if pa != pb {
            return Err(Error::SupportMismatch(format!(
                "path {} vs {}",
                path_key(pa),
                path_key(pb)
            )));
        }
        let gap = (la.exp() - lb.exp()).abs();
        tv.add(gap);
        max_abs_gap = max_abs_gap.max(gap);
        let log_gap = if la == lb { 0.0 } else { (la - lb).abs() };
        max_log_gap = max_log_gap.max(log_gap);
    }
    Ok(ComparisonReport {
        total_variation: (0.5 * tv.value()).clamp(0.0, 1.0),
        max_abs_gap,
        max_log_gap: Some(max_log_gap),
        chi_square: None,
        sample_count: None,
    })
}

/// Chi-square goodness of fit of sampled trajectories against an exact
/// distribution, plus the empirical total variation.
pub fn compare_empirical(
    samples: &[Trajectory],
    reference: &PathDistribution,
) -> Result<ComparisonReport> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            found: samples.len(),
            required: MIN_SAMPLES,
        });
    }
    let index: HashMap<&[usize], usize> = reference
        .paths
        .iter()
        .enumerate()
        .map(|(pos, (p, _))| (p.as_slice(), pos))
        .collect();
    let mut observed = vec![0u64; reference.paths.len()];
    for s in samples {
        let pos = index.get(s.vertices()).ok_or_else(|| {
            Error::SupportMismatch(format!(
                "sampled path {} is not a length-{} path from {}",
                s.key(),
                reference.steps,
                reference.start
            ))
        })?;
        observed[*pos] += 1;
    }
    let n = samples.len() as f64;
    let cells: Vec<(f64, f64)> = observed
        .iter()
        .zip(&reference.paths)
        .map(|(&o, (_, l))| (o as f64, n * l.exp()))
        .collect();

    let tv = 0.5
        * cells
            .iter()
            .map(|(o, e)| (o / n - e / n).abs())
            .sum::<f64>();
    let max_abs_gap = cells
        .iter()
        .map(|(o, e)| (o / n - e / n).abs())
        .fold(0.0, f64::max);

    Ok(ComparisonReport {
        total_variation: tv.clamp(0.0, 1.0),
        max_abs_gap,
        max_log_gap: None,
        chi_square: Some(chi_square_test(&cells)),
        sample_count: Some(samples.len()),
    })
}

/// Pearson statistic over `(observed, expected)` cells after pooling every
/// cell with expected count below the threshold.
fn chi_square_test(cells: &[(f64, f64)]) -> ChiSquareTest {
    let mut kept: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for &(o, e) in cells {
        if e < CHI_SQUARE_POOLING_THRESHOLD {
            pooled.0 += o;
            pooled.1 += e;
        } else {
            kept.push((o, e));
        }
    }
    if pooled.0 > 0.0 || pooled.1 > 0.0 {
        if pooled.1 < CHI_SQUARE_POOLING_THRESHOLD && !kept.is_empty() {
            // Still too small: fold into the smallest kept cell.
            let smallest = kept
                .iter()
                .enumerate()
                .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .map(|(pos, _)| pos)
                .expect("non-empty");
            kept[smallest].0 += pooled.0;
            kept[smallest].1 += pooled.1;
        } else {
            kept.push(pooled);
        }
    }
    let statistic: f64 = kept
        .iter()
        .map(|&(o, e)| {
            if e > 0.0 {
                (o - e).powi(2) / e
            } else if o > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    let degrees_of_freedom = kept.len().saturating_sub(1);
    let critical_value = if degrees_of_freedom == 0 {
        0.0
    } else {
        ChiSquared::new(degrees_of_freedom as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(CHI_SQUARE_QUANTILE)
    };
    ChiSquareTest {
        statistic,
        degrees_of_freedom,
        critical_value,
        quantile: CHI_SQUARE_QUANTILE,
        passed: statistic <= critical_value + 1e-9 * critical_value.max(1.0),
    }
}

/// The moment table of the unique environment law behind an admissible
/// reinforcement law. Two environment laws inducing the same reinforcement
/// law produce identical tables at every order.
pub fn recover_env_moments(law: &ReinforcementLaw, order: u32) -> Result<MomentTable> {
    let box_size = order.max(1);
    let report = check_admissible(law, box_size, DEFAULT_TOLERANCE)?;
    if !report.admissible {
        return Err(Error::NonAdmissible {
            box_size,
            violations: report.violations.len(),
        });
    }
    build_moment_table(law, order)
}
