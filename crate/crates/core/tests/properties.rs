use std::collections::BTreeMap;

use proptest::prelude::*;

use rwre::environment::{law_from_env, VertexEnvLaw};
use rwre::equivalence::{
    annealed_path_logprob, compare_distributions, enumerate_distribution, recover_env_moments,
    reinforced_path_logprob, Model,
};
use rwre::laws::{PolynomialDirichlet, SimplexPoint, VisitVector};
use rwre::walk::{Graph, Trajectory};

fn graphs() -> Vec<Graph> {
    vec![
        Graph::star(2).unwrap(),
        Graph::segment(3).unwrap(),
        Graph::cycle(3).unwrap(),
        Graph::grid(2, 2).unwrap(),
    ]
}

/// A random environment law of dimension `d`: Dirichlet, polynomial-Dirichlet
/// or an interior point mass, chosen by `kind`.
fn env_of(d: usize, kind: u8, alpha: &[f64], coef: &[f64]) -> VertexEnvLaw {
    let alpha = alpha[..d].to_vec();
    match kind % 3 {
        0 => VertexEnvLaw::dirichlet(alpha).unwrap(),
        1 => {
            let terms = (0..d).map(|i| {
                let mut m = vec![0u32; d];
                m[i] = 1;
                (m, coef[i])
            });
            VertexEnvLaw::polynomial_dirichlet(PolynomialDirichlet::new(alpha, 1, terms).unwrap())
        }
        _ => {
            let total: f64 = alpha.iter().sum();
            VertexEnvLaw::point_mass(
                SimplexPoint::new(alpha.iter().map(|a| a / total).collect()).unwrap(),
            )
        }
    }
}

fn envs_for(graph: &Graph, kinds: &[u8], alpha: &[f64], coef: &[f64]) -> Vec<VertexEnvLaw> {
    (0..graph.vertex_count())
        .map(|x| env_of(graph.degree(x), kinds[x], &alpha[3 * x..], &coef[3 * x..]))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reinforced_and_annealed_laws_coincide(
        which in 0usize..4,
        kinds in prop::collection::vec(any::<u8>(), 4),
        alpha in prop::collection::vec(0.2f64..5.0, 12),
        coef in prop::collection::vec(0.05f64..3.0, 12),
        x0 in 0usize..4,
        steps in 0usize..=7,
    ) {
        let graph = &graphs()[which];
        let x0 = x0 % graph.vertex_count();
        let envs = envs_for(graph, &kinds, &alpha, &coef);
        let laws: Vec<_> = envs.iter().map(law_from_env).collect();
        let r = enumerate_distribution(graph, Model::Reinforced(&laws), x0, steps).unwrap();
        let a = enumerate_distribution(graph, Model::Annealed(&envs), x0, steps).unwrap();
        let report = compare_distributions(&r, &a).unwrap();
        prop_assert!(report.total_variation <= 1e-10);
        prop_assert!(report.max_log_gap.unwrap() <= 1e-10);
        prop_assert!((r.total_mass() - 1.0).abs() <= 1e-10);
        prop_assert!((a.total_mass() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn point_mass_reinforced_walk_is_the_quenched_walk(
        weights in prop::collection::vec(0.05f64..1.0, 8),
        moves in prop::collection::vec(0usize..2, 0..10),
        x0 in 0usize..4,
    ) {
        let graph = Graph::grid(2, 2).unwrap();
        let omegas: Vec<SimplexPoint> = weights
            .chunks(2)
            .map(|w| SimplexPoint::new(vec![w[0] / (w[0] + w[1]), w[1] / (w[0] + w[1])]).unwrap())
            .collect();
        let laws: Vec<_> = omegas
            .iter()
            .map(|w| law_from_env(&VertexEnvLaw::point_mass(w.clone())))
            .collect();
        let mut vertices = vec![x0];
        let mut quenched = 0.0;
        for &i in &moves {
            let x = *vertices.last().unwrap();
            quenched += omegas[x].ln_weight(i);
            vertices.push(graph.neighbours(x)[i]);
        }
        let reinforced = reinforced_path_logprob(&graph, &laws, &vertices).unwrap();
        prop_assert!((reinforced - quenched).abs() <= 1e-12);
    }

    #[test]
    fn round_trip_recovers_dirichlet_moments(alpha in prop::collection::vec(0.1f64..6.0, 2..=4)) {
        let env = VertexEnvLaw::dirichlet(alpha).unwrap();
        let table = recover_env_moments(&law_from_env(&env), 6).unwrap();
        for (k, l) in table.entries() {
            prop_assert!((l - env.ln_mixed_moment(k).unwrap()).abs() <= 1e-10);
        }
    }
}

/// Paths with the same per-vertex count vectors have the same probability,
/// under the annealed law and under the admissible reinforced law.
#[test]
fn path_probability_depends_only_on_vertex_counts() {
    let graph = Graph::grid(2, 2).unwrap();
    let envs = envs_for(
        &graph,
        &[0, 1, 0, 1],
        &[0.5, 1.5, 0.0, 2.0, 1.0, 0.0, 3.0, 0.7, 0.0, 1.2, 0.4, 0.0],
        &[1.0, 0.3, 0.0, 0.2, 2.0, 0.0, 1.0, 1.0, 0.0, 0.5, 0.9, 0.0],
    );
    let laws: Vec<_> = envs.iter().map(law_from_env).collect();
    let dist = enumerate_distribution(&graph, Model::Annealed(&envs), 0, 8).unwrap();
    let mut classes: BTreeMap<Vec<VisitVector>, Vec<(f64, f64)>> = BTreeMap::new();
    for (vertices, _) in &dist.paths {
        let counts = Trajectory::from_vertices(&graph, vertices.clone())
            .unwrap()
            .replay_counts(&graph)
            .unwrap();
        let a = annealed_path_logprob(&graph, &envs, vertices).unwrap();
        let r = reinforced_path_logprob(&graph, &laws, vertices).unwrap();
        classes.entry(counts).or_default().push((a, r));
    }
    let mut shared = 0;
    for members in classes.values() {
        let (a0, r0) = members[0];
        for &(a, r) in members {
            assert!((a - a0).abs() <= 1e-12);
            assert!((r - r0).abs() <= 1e-10);
            assert!((a - r).abs() <= 1e-10);
        }
        shared += usize::from(members.len() > 1);
    }
    assert!(
        shared > 10,
        "too few interleaving classes to be a meaningful check"
    );
}
