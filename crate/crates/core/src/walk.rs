//! Finite graphs with ordered neighbour lists and the three walk processes:
//! reinforced, quenched (fixed environment) and annealed (fresh environment
//! per trajectory).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::environment::{EnvironmentAssignment, VertexEnvLaw};
use crate::error::{Error, Result};
use crate::laws::{ReinforcementLaw, SimplexPoint, VisitVector};
use crate::rng::stream_rng;

/// A finite directed multigraph. Vertex `x` has the ordered neighbour list
/// `e(x, 0), ..., e(x, d(x) - 1)`; repeated neighbours are distinct oriented
/// edges and self-loops are allowed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(adjacency: Vec<Vec<usize>>) -> Result<Self> {
        if adjacency.is_empty() {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let n = adjacency.len();
        for (x, neighbours) in adjacency.iter().enumerate() {
            if neighbours.is_empty() {
                return Err(Error::InvalidGraph(format!("vertex {x} has no neighbours")));
            }
            if let Some(&y) = neighbours.iter().find(|&&y| y >= n) {
                return Err(Error::InvalidGraph(format!(
                    "vertex {x} lists neighbour {y}, but there are only {n} vertices"
                )));
            }
        }
        Ok(Self { adjacency })
    }

    /// Path `0 - 1 - ... - (length-1)` with reflecting ends.
    pub fn segment(length: usize) -> Result<Self> {
        if length < 2 {
            return Err(Error::InvalidGraph(
                "a segment needs at least 2 vertices".into(),
            ));
        }
        let adjacency = (0..length)
            .map(|x| match x {
                0 => vec![1],
                _ if x + 1 == length => vec![x - 1],
                _ => vec![x - 1, x + 1],
            })
            .collect();
        Self::new(adjacency)
    }

    /// Centre `0` joined to leaves `1..=leaves`; each leaf's only neighbour is
    /// the centre.
    pub fn star(leaves: usize) -> Result<Self> {
        if leaves == 0 {
            return Err(Error::InvalidGraph("a star needs at least one leaf".into()));
        }
        let mut adjacency = vec![(1..=leaves).collect::<Vec<_>>()];
        adjacency.extend(std::iter::repeat_n(vec![0], leaves));
        Self::new(adjacency)
    }

    /// Cycle on `length` vertices; neighbours listed as (previous, next).
    pub fn cycle(length: usize) -> Result<Self> {
        if length < 3 {
            return Err(Error::InvalidGraph(
                "a cycle needs at least 3 vertices".into(),
            ));
        }
        Self::new(
            (0..length)
                .map(|x| vec![(x + length - 1) % length, (x + 1) % length])
                .collect(),
        )
    }

    /// `rows × cols` grid, vertex `r * cols + c`, neighbours in increasing
    /// vertex order.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        if rows * cols < 2 {
            return Err(Error::InvalidGraph(
                "a grid needs at least 2 vertices".into(),
            ));
        }
        let adjacency = (0..rows * cols)
            .map(|x| {
                let (r, c) = (x / cols, x % cols);
                let mut nb = Vec::with_capacity(4);
                if r > 0 {
                    nb.push(x - cols);
                }
                if c > 0 {
                    nb.push(x - 1);
                }
                if c + 1 < cols {
                    nb.push(x + 1);
                }
                if r + 1 < rows {
                    nb.push(x + cols);
                }
                nb
            })
            .collect();
        Self::new(adjacency)
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adjacency[x].len()
    }

    pub fn neighbours(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Every index `i` with `e(x, i) = y`.
    pub fn move_indices(&self, x: usize, y: usize) -> Vec<usize> {
        self.adjacency[x]
            .iter()
            .enumerate()
            .filter_map(|(i, &z)| (z == y).then_some(i))
            .collect()
    }

    fn check_vertex(&self, x: usize) -> Result<()> {
        if x >= self.vertex_count() {
            return Err(Error::InvalidParameter(format!(
                "vertex {x} out of range ({} vertices)",
                self.vertex_count()
            )));
        }
        Ok(())
    }

    /// Checks that `laws[x]` has dimension `d(x)` at every vertex.
    pub fn check_laws(&self, laws: &[ReinforcementLaw]) -> Result<()> {
        self.check_dimensions(laws.iter().map(|l| l.dimension()), laws.len())
    }

    pub fn check_envs(&self, envs: &[VertexEnvLaw]) -> Result<()> {
        self.check_dimensions(envs.iter().map(|e| e.dimension()), envs.len())
    }

    fn check_dimensions(&self, dims: impl Iterator<Item = usize>, count: usize) -> Result<()> {
        if count != self.vertex_count() {
            return Err(Error::InvalidParameter(format!(
                "{count} per-vertex specs for {} vertices",
                self.vertex_count()
            )));
        }
        for (x, d) in dims.enumerate() {
            if d != self.degree(x) {
                return Err(Error::DimensionMismatch {
                    expected: self.degree(x),
                    found: d,
                });
            }
        }
        Ok(())
    }
}

/// Current vertex and the oriented-edge counts `N(x)` at every vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkState {
    position: usize,
    counts: Vec<VisitVector>,
    steps: u64,
}

impl WalkState {
    pub fn new(graph: &Graph, start: usize) -> Result<Self> {
        graph.check_vertex(start)?;
        Ok(Self {
            position: start,
            counts: (0..graph.vertex_count())
                .map(|x| VisitVector::zeros(graph.degree(x)))
                .collect(),
            steps: 0,
        })
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn counts(&self, x: usize) -> &VisitVector {
        &self.counts[x]
    }

    pub fn all_counts(&self) -> &[VisitVector] {
        &self.counts
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    /// Leaves the current vertex along its `index`-th oriented edge.
    pub fn advance(&mut self, graph: &Graph, index: usize) {
        let x = self.position;
        self.counts[x].increment(index);
        self.position = graph.neighbours(x)[index];
        self.steps += 1;
    }
}

/// A vertex sequence `X_0, ..., X_T` with the neighbour index used at each
/// step.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Trajectory {
    vertices: Vec<usize>,
    moves: Vec<usize>,
}

impl Trajectory {
    pub fn start(x0: usize) -> Self {
        Self {
            vertices: vec![x0],
            moves: Vec::new(),
        }
    }

    /// Resolves the neighbour index of each step; fails when a step is not an
    /// edge or when repeated neighbours make the index ambiguous.
    pub fn from_vertices(graph: &Graph, vertices: Vec<usize>) -> Result<Self> {
        let Some(&x0) = vertices.first() else {
            return Err(Error::InvalidTrajectory("empty vertex sequence".into()));
        };
        graph.check_vertex(x0)?;
        let mut moves = Vec::with_capacity(vertices.len().saturating_sub(1));
        for pair in vertices.windows(2) {
            match graph.move_indices(pair[0], pair[1]).as_slice() {
                [i] => moves.push(*i),
                [] => {
                    return Err(Error::InvalidTrajectory(format!(
                        "{} -> {} is not an edge",
                        pair[0], pair[1]
                    )))
                }
                _ => {
                    return Err(Error::InvalidTrajectory(format!(
                        "{} -> {} matches several oriented edges",
                        pair[0], pair[1]
                    )))
                }
            }
        }
        Ok(Self { vertices, moves })
    }

    fn push(&mut self, graph: &Graph, index: usize) {
        let x = *self.vertices.last().expect("trajectories are never empty");
        self.vertices.push(graph.neighbours(x)[index]);
        self.moves.push(index);
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn moves(&self) -> &[usize] {
        &self.moves
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// Recomputes `N(x)` at every vertex by replaying the moves.
    pub fn replay_counts(&self, graph: &Graph) -> Result<Vec<VisitVector>> {
        let mut state = WalkState::new(graph, self.vertices[0])?;
        for &i in &self.moves {
            if i >= graph.degree(state.position()) {
                return Err(Error::InvalidTrajectory(format!(
                    "move index {i} out of range"
                )));
            }
            state.advance(graph, i);
        }
        Ok(state.counts)
    }

    /// Dash-joined vertex ids, e.g. `0-1-0-2`.
    pub fn key(&self) -> String {
        path_key(&self.vertices)
    }
}

pub fn path_key(vertices: &[usize]) -> String {
    vertices
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

fn draw_index<R: Rng + ?Sized>(weights: &SimplexPoint, rng: &mut R) -> usize {
    weights.sample_index(rng.random())
}

/// One reinforced move: index `i` with probability `V_i(x, N(x))`.
pub fn step_reinforced<R: Rng + ?Sized>(
    state: &mut WalkState,
    graph: &Graph,
    laws: &[ReinforcementLaw],
    rng: &mut R,
) -> Result<usize> {
    let x = state.position();
    let law = laws
        .get(x)
        .ok_or_else(|| Error::InvalidParameter(format!("no reinforcement law for vertex {x}")))?;
    if law.dimension() != graph.degree(x) {
        return Err(Error::DimensionMismatch {
            expected: graph.degree(x),
            found: law.dimension(),
        });
    }
    let weights = law.eval(state.counts(x))?;
    let i = draw_index(&weights, rng);
    state.advance(graph, i);
    Ok(i)
}

/// A reinforced trajectory together with the final counters.
pub fn run_reinforced_with_state<R: Rng + ?Sized>(
    graph: &Graph,
    laws: &[ReinforcementLaw],
    x0: usize,
    steps: usize,
    rng: &mut R,
) -> Result<(Trajectory, WalkState)> {
    graph.check_laws(laws)?;
    let mut state = WalkState::new(graph, x0)?;
    let mut trajectory = Trajectory::start(x0);
    for _ in 0..steps {
        let i = step_reinforced(&mut state, graph, laws, rng)?;
        trajectory.push(graph, i);
    }
    Ok((trajectory, state))
}

pub fn run_reinforced<R: Rng + ?Sized>(
    graph: &Graph,
    laws: &[ReinforcementLaw],
    x0: usize,
    steps: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    run_reinforced_with_state(graph, laws, x0, steps, rng).map(|(t, _)| t)
}

/// One Markov move in a fixed environment: index `i` with probability
/// `ω(x, i)`.
pub fn step_quenched<R: Rng + ?Sized>(
    environment: &EnvironmentAssignment,
    x: usize,
    rng: &mut R,
) -> Result<usize> {
    let omega = environment
        .omega(x)
        .ok_or_else(|| Error::InvalidParameter(format!("environment does not cover vertex {x}")))?;
    Ok(draw_index(omega, rng))
}

pub fn run_quenched<R: Rng + ?Sized>(
    graph: &Graph,
    environment: &EnvironmentAssignment,
    x0: usize,
    steps: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    graph.check_vertex(x0)?;
    let mut trajectory = Trajectory::start(x0);
    let mut x = x0;
    for _ in 0..steps {
        let i = step_quenched(environment, x, rng)?;
        trajectory.push(graph, i);
        x = graph.neighbours(x)[i];
    }
    Ok(trajectory)
}

/// Samples `ω ~ ⊗ μ_x`, then runs a quenched walk in it.
pub fn run_annealed_with_env<R: Rng + ?Sized>(
    graph: &Graph,
    envs: &[VertexEnvLaw],
    x0: usize,
    steps: usize,
    rng: &mut R,
) -> Result<(Trajectory, EnvironmentAssignment)> {
    graph.check_envs(envs)?;
    let environment = EnvironmentAssignment::sample(graph, envs, rng)?;
    let trajectory = run_quenched(graph, &environment, x0, steps, rng)?;
    Ok((trajectory, environment))
}

pub fn run_annealed<R: Rng + ?Sized>(
    graph: &Graph,
    envs: &[VertexEnvLaw],
    x0: usize,
    steps: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    run_annealed_with_env(graph, envs, x0, steps, rng).map(|(t, _)| t)
}

/// Runs `count` independent trajectories; trajectory `j` draws from stream
/// `j` of `seed`, so the output is the same for any thread count.
pub fn run_batch<F>(count: usize, seed: u64, run: F) -> Result<Vec<Trajectory>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Trajectory> + Sync,
{
    (0..count as u64)
        .into_par_iter()
        .map(|j| run(&mut stream_rng(seed, j)))
        .collect()
}
