//! Named built-in environment laws and reinforcement laws used by the test
//! suites and as CLI shorthands.

use crate::environment::{law_from_env, VertexEnvLaw};
use crate::laws::{
    Fallback, Mixture, PolynomialDirichlet, ReinforcementLaw, SimplexPoint, TabulatedLaw,
    VisitVector,
};

fn dirichlet(alpha: &[f64]) -> VertexEnvLaw {
    VertexEnvLaw::dirichlet(alpha.to_vec()).expect("built-in parameters are valid")
}

fn point(weights: &[f64]) -> SimplexPoint {
    SimplexPoint::new(weights.to_vec()).expect("built-in parameters are valid")
}

/// Degree-2 polynomial-Dirichlet law on two neighbours.
pub fn polynomial_pair() -> PolynomialDirichlet {
    PolynomialDirichlet::new(
        vec![1.5, 0.5],
        2,
        [(vec![2, 0], 1.0), (vec![1, 1], 0.5), (vec![0, 2], 2.0)],
    )
    .expect("built-in parameters are valid")
}

/// Degree-2 polynomial-Dirichlet law on three neighbours.
pub fn polynomial_triple() -> PolynomialDirichlet {
    PolynomialDirichlet::new(
        vec![1.0, 2.0, 0.5],
        2,
        [
            (vec![1, 1, 0], 1.0),
            (vec![0, 0, 2], 0.3),
            (vec![2, 0, 0], 0.7),
        ],
    )
    .expect("built-in parameters are valid")
}

/// Every built-in environment law, by name.
pub fn builtin_envs() -> Vec<(&'static str, VertexEnvLaw)> {
    vec![
        ("dirichlet-1-1", dirichlet(&[1.0, 1.0])),
        ("dirichlet-2-3", dirichlet(&[2.0, 3.0])),
        ("dirichlet-0.5-0.5-2", dirichlet(&[0.5, 0.5, 2.0])),
        ("dirichlet-1-0.5-2-1.5", dirichlet(&[1.0, 0.5, 2.0, 1.5])),
        (
            "polynomial-pair",
            VertexEnvLaw::polynomial_dirichlet(polynomial_pair()),
        ),
        (
            "polynomial-triple",
            VertexEnvLaw::polynomial_dirichlet(polynomial_triple()),
        ),
        (
            "point-mass-0.3-0.7",
            VertexEnvLaw::point_mass(point(&[0.3, 0.7])),
        ),
        (
            "point-mass-0.2-0.5-0.3",
            VertexEnvLaw::point_mass(point(&[0.2, 0.5, 0.3])),
        ),
        (
            "empirical-pair",
            VertexEnvLaw::empirical(
                Mixture::new(vec![
                    (0.25, point(&[0.1, 0.9])),
                    (0.5, point(&[0.5, 0.5])),
                    (0.25, point(&[0.8, 0.2])),
                ])
                .expect("built-in parameters are valid"),
            ),
        ),
    ]
}

/// Every built-in admissible reinforcement law: the laws induced by the
/// built-in environments plus the uniform laws for `d = 2..=4`.
pub fn builtin_laws() -> Vec<(String, ReinforcementLaw)> {
    let mut laws: Vec<(String, ReinforcementLaw)> = builtin_envs()
        .into_iter()
        .map(|(name, env)| (name.to_string(), law_from_env(&env)))
        .collect();
    for d in 2..=4 {
        laws.push((
            format!("uniform-{d}"),
            ReinforcementLaw::uniform(d).expect("d >= 1"),
        ));
    }
    laws
}

/// The environment laws named in the admissibility and path-independence
/// checks: three Dirichlet laws and the two polynomial-Dirichlet laws.
pub fn admissibility_envs() -> Vec<(&'static str, VertexEnvLaw)> {
    builtin_envs()
        .into_iter()
        .filter(|(name, _)| {
            matches!(
                *name,
                "dirichlet-1-1"
                    | "dirichlet-2-3"
                    | "dirichlet-0.5-0.5-2"
                    | "polynomial-pair"
                    | "polynomial-triple"
            )
        })
        .collect()
}

/// A tabulated law on `{0, 1}^2` whose square at the origin does not close:
/// `V(0,0) = V(0,1) = V(1,1) = (0.5, 0.5)` and `V(1,0) = (0.9, 0.1)`, so the
/// defect is `ln 0.05 - ln 0.25`.
pub fn non_admissible_witness() -> ReinforcementLaw {
    let entries = [
        (vec![0, 0], [0.5, 0.5]),
        (vec![0, 1], [0.5, 0.5]),
        (vec![1, 0], [0.9, 0.1]),
        (vec![1, 1], [0.5, 0.5]),
    ]
    .map(|(p, v)| (VisitVector::new(p), point(&v)));
    ReinforcementLaw::tabulated(
        TabulatedLaw::new(2, 1, entries, Fallback::Reject).expect("witness table covers the box"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_consistent() {
        let envs = builtin_envs();
        assert_eq!(envs.len(), 9);
        assert_eq!(builtin_laws().len(), 12);
        assert_eq!(admissibility_envs().len(), 5);
        for (name, env) in envs {
            let law = law_from_env(&env);
            assert_eq!(law.dimension(), env.dimension(), "{name}");
        }
    }

    #[test]
    fn witness_rejects_points_outside_its_box() {
        let w = non_admissible_witness();
        assert_eq!(
            w.eval(&VisitVector::new(vec![1, 0])).unwrap().weights(),
            &[0.9, 0.1]
        );
        assert!(w.eval(&VisitVector::new(vec![2, 0])).is_err());
    }
}
