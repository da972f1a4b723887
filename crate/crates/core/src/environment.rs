//! Environment laws `μ_x` on the simplex, their mixed moments
//! `E[∏ ω_j^{k_j}]`, samplers, and the map sending `μ_x` to the
//! reinforcement law `V_i(p) = E[ω_i ω^p] / E[ω^p]`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice;
use crate::laws::{
    ln_rising_factorial, Mixture, PolynomialDirichlet, ReinforcementLaw, SimplexPoint, VisitVector,
};
use crate::moments::MomentTable;
use crate::numeric::{ln_gamma, ln_power_product, log_sum_exp};
use crate::walk::Graph;

#[derive(Clone, Debug, PartialEq)]
pub enum EnvFamily {
    Dirichlet {
        alpha: Vec<f64>,
    },
    /// Density `∝ ∏ t_i^{α_i - 1} P(t)`.
    PolynomialDirichlet(PolynomialDirichlet),
    PointMass(SimplexPoint),
    /// Finitely many weighted simplex points.
    Empirical(Mixture),
}

/// A probability measure `μ_x` on the simplex `T_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexEnvLaw {
    dimension: usize,
    family: EnvFamily,
}

impl VertexEnvLaw {
    pub fn dirichlet(alpha: Vec<f64>) -> Result<Self> {
        // Reuse the law constructor for parameter validation.
        ReinforcementLaw::dirichlet(alpha.clone())?;
        Ok(Self {
            dimension: alpha.len(),
            family: EnvFamily::Dirichlet { alpha },
        })
    }

    pub fn polynomial_dirichlet(params: PolynomialDirichlet) -> Self {
        Self {
            dimension: params.dimension(),
            family: EnvFamily::PolynomialDirichlet(params),
        }
    }

    pub fn point_mass(point: SimplexPoint) -> Self {
        Self {
            dimension: point.dimension(),
            family: EnvFamily::PointMass(point),
        }
    }

    pub fn empirical(mixture: Mixture) -> Self {
        Self {
            dimension: mixture.dimension(),
            family: EnvFamily::Empirical(mixture),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn family(&self) -> &EnvFamily {
        &self.family
    }

    /// `ln E[∏_j ω_j^{k_j}]`.
    pub fn ln_mixed_moment(&self, k: &VisitVector) -> Result<f64> {
        if k.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: k.dimension(),
            });
        }
        Ok(match &self.family {
            EnvFamily::Dirichlet { alpha } => ln_dirichlet_moment(alpha, k),
            EnvFamily::PolynomialDirichlet(params) => {
                // E[t^k] = ∏(α_i, k_i) · Q(α+k)/Q(α) · (|α|, n)/(|α|, n+|k|)
                let alpha = params.alpha();
                let shifted: Vec<f64> = alpha
                    .iter()
                    .zip(k.counts())
                    .map(|(a, &c)| a + c as f64)
                    .collect();
                let total_alpha: f64 = alpha.iter().sum();
                let n = params.degree();
                let k_total = u32::try_from(k.total())
                    .map_err(|_| Error::InvalidParameter("moment order too large".into()))?;
                ln_dirichlet_numerator(alpha, k) + params.ln_eval_q(&shifted)?
                    - params.ln_eval_q(alpha)?
                    + ln_rising_factorial(total_alpha, n)
                    - ln_rising_factorial(total_alpha, n + k_total)
            }
            EnvFamily::PointMass(point) => ln_power_product(point.weights(), k.counts()),
            EnvFamily::Empirical(mixture) => mixture.ln_moment(k),
        })
    }

    /// Table of `E[ω^k]` for every `|k| <= order`.
    pub fn moment_table(&self, order: u32) -> Result<MomentTable> {
        MomentTable::from_log_fn(self.dimension, order, |k| self.ln_mixed_moment(k))
    }

    /// One draw `ω ~ μ_x`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SimplexPoint> {
        match &self.family {
            EnvFamily::Dirichlet { alpha } => sample_dirichlet(alpha, rng),
            EnvFamily::PolynomialDirichlet(params) => {
                // Exact mixture: component m has weight ∝ a_m ∏ Γ(α_i + m_i);
                // the common factor 1/Γ(|α| + n) cancels.
                let alpha = params.alpha();
                let log_weights: Vec<f64> = params
                    .coefficients()
                    .iter()
                    .map(|(m, a)| {
                        a.ln()
                            + alpha
                                .iter()
                                .zip(m.counts())
                                .map(|(al, &mi)| ln_gamma(al + mi as f64))
                                .sum::<f64>()
                    })
                    .collect();
                let choice = SimplexPoint::from_log_weights(&log_weights)?;
                let m = &params.coefficients()[choice.sample_index(rng.random())].0;
                let component: Vec<f64> = alpha
                    .iter()
                    .zip(m.counts())
                    .map(|(a, &c)| a + c as f64)
                    .collect();
                sample_dirichlet(&component, rng)
            }
            EnvFamily::PointMass(point) => Ok(point.clone()),
            EnvFamily::Empirical(mixture) => {
                let weights =
                    SimplexPoint::closed(mixture.atoms().iter().map(|(w, _)| *w).collect())?;
                Ok(mixture.atoms()[weights.sample_index(rng.random())]
                    .1
                    .clone())
            }
        }
    }
}

fn ln_dirichlet_numerator(alpha: &[f64], k: &VisitVector) -> f64 {
    alpha
        .iter()
        .zip(k.counts())
        .map(|(&a, &c)| ln_rising_factorial(a, c))
        .sum()
}

/// `ln [∏ (α_i, k_i) / (|α|, |k|)]`.
fn ln_dirichlet_moment(alpha: &[f64], k: &VisitVector) -> f64 {
    let total: f64 = alpha.iter().sum();
    ln_dirichlet_numerator(alpha, k) - ln_rising_factorial(total, k.total() as u32)
}

/// Normalized independent gamma variates, carried in log space so that
/// small shape parameters do not underflow: for `a < 1`,
/// `G_a = G_{a+1} · U^{1/a}`.
fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<SimplexPoint> {
    let mut log_gammas = Vec::with_capacity(alpha.len());
    for &a in alpha {
        let boosted = if a < 1.0 { a + 1.0 } else { a };
        let gamma = Gamma::new(boosted, 1.0)
            .map_err(|e| Error::InvalidParameter(format!("gamma shape {boosted}: {e}")))?;
        let mut ln_g = gamma.sample(rng).ln();
        if a < 1.0 {
            let u: f64 = rng.random();
            // Guard u == 0, which `random` can return.
            ln_g += (1.0 - u).ln() / a;
        }
        log_gammas.push(ln_g);
    }
    SimplexPoint::from_log_weights(&log_gammas)
}

/// `E[∏ ω_j^{k_j}]` under `μ_x`, as a logarithm.
pub fn env_mixed_moment(env: &VertexEnvLaw, k: &VisitVector) -> Result<f64> {
    env.ln_mixed_moment(k)
}

/// The reinforcement law induced by `env` through moment ratios.
pub fn law_from_env(env: &VertexEnvLaw) -> ReinforcementLaw {
    match &env.family {
        EnvFamily::Dirichlet { alpha } => {
            ReinforcementLaw::dirichlet(alpha.clone()).expect("validated at construction")
        }
        EnvFamily::PolynomialDirichlet(params) => {
            ReinforcementLaw::polynomial_dirichlet(params.clone())
        }
        EnvFamily::PointMass(point) => ReinforcementLaw::constant(point.clone()),
        EnvFamily::Empirical(mixture) => ReinforcementLaw::mixture(mixture.clone()),
    }
}

pub fn sample_vertex_env<R: Rng + ?Sized>(env: &VertexEnvLaw, rng: &mut R) -> Result<SimplexPoint> {
    env.sample(rng)
}

/// One transition vector `ω(x)` per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentAssignment {
    omegas: Vec<SimplexPoint>,
}

impl EnvironmentAssignment {
    pub fn new(graph: &Graph, omegas: Vec<SimplexPoint>) -> Result<Self> {
        if omegas.len() != graph.vertex_count() {
            return Err(Error::InvalidParameter(format!(
                "environment covers {} vertices, graph has {}",
                omegas.len(),
                graph.vertex_count()
            )));
        }
        for (x, omega) in omegas.iter().enumerate() {
            if omega.dimension() != graph.degree(x) {
                return Err(Error::DimensionMismatch {
                    expected: graph.degree(x),
                    found: omega.dimension(),
                });
            }
        }
        Ok(Self { omegas })
    }

    /// Independent draws `ω(x) ~ μ_x`, in vertex order.
    pub fn sample<R: Rng + ?Sized>(
        graph: &Graph,
        envs: &[VertexEnvLaw],
        rng: &mut R,
    ) -> Result<Self> {
        if envs.len() != graph.vertex_count() {
            return Err(Error::InvalidParameter(format!(
                "{} environment laws for {} vertices",
                envs.len(),
                graph.vertex_count()
            )));
        }
        let omegas = envs
            .iter()
            .map(|env| env.sample(rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(graph, omegas)
    }

    pub fn omega(&self, x: usize) -> Option<&SimplexPoint> {
        self.omegas.get(x)
    }

    pub fn omegas(&self) -> &[SimplexPoint] {
        &self.omegas
    }
}

/// Nodes per axis of the quadrature oracle.
pub const QUADRATURE_POINTS: usize = 2001;

/// Half-width of the tanh-sinh parameter interval.
const TANH_SINH_HALF_WIDTH: f64 = 4.0;

/// Trapezoidal rule in the tanh-sinh variable on `(0, 1)`:
/// `x(s) = 1 / (1 + exp(-π sinh s))`. Returns `(ln x, ln(1 - x), ln weight)`
/// per node; logs are exact even where `x` itself underflows.
fn tanh_sinh_nodes(points: usize) -> Vec<(f64, f64, f64)> {
    let step = 2.0 * TANH_SINH_HALF_WIDTH / (points - 1) as f64;
    (0..points)
        .map(|j| {
            let s = -TANH_SINH_HALF_WIDTH + j as f64 * step;
            let u = std::f64::consts::PI * s.sinh();
            let ln_x = -softplus(-u);
            let ln_1mx = -softplus(u);
            let end = if j == 0 || j + 1 == points { 0.5 } else { 1.0 };
            let ln_w = (end * step * std::f64::consts::PI * s.cosh()).ln() + ln_x + ln_1mx;
            (ln_x, ln_1mx, ln_w)
        })
        .collect()
}

/// `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln` of the unnormalized density `∏ t_i^{α_i - 1} P(t)`.
fn ln_density(alpha: &[f64], poly: Option<&PolynomialDirichlet>, ln_t: &[f64]) -> f64 {
    let kernel: f64 = alpha.iter().zip(ln_t).map(|(a, l)| (a - 1.0) * l).sum();
    match poly {
        None => kernel,
        Some(p) => {
            let terms: Vec<f64> = p
                .coefficients()
                .iter()
                .map(|(m, a)| {
                    a.ln()
                        + m.counts()
                            .iter()
                            .zip(ln_t)
                            .map(|(&mi, l)| if mi == 0 { 0.0 } else { mi as f64 * l })
                            .sum::<f64>()
                })
                .collect();
            kernel + log_sum_exp(&terms)
        }
    }
}

/// Quadrature nodes on the simplex as `(ln t, ln weight · density)`.
fn simplex_nodes(env: &VertexEnvLaw) -> Result<Vec<(Vec<f64>, f64)>> {
    let (alpha, poly) = match &env.family {
        EnvFamily::Dirichlet { alpha } => (alpha.as_slice(), None),
        EnvFamily::PolynomialDirichlet(p) => (p.alpha(), Some(p)),
        _ => {
            return Err(Error::OracleUnsupported(
                "quadrature applies to densities only; atoms have direct moments".into(),
            ))
        }
    };
    let axis = tanh_sinh_nodes(QUADRATURE_POINTS);
    match env.dimension {
        1 => Ok(vec![(vec![0.0], 0.0)]),
        2 => Ok(axis
            .iter()
            .map(|&(lx, l1mx, lw)| {
                let ln_t = vec![lx, l1mx];
                let ln_f = ln_density(alpha, poly, &ln_t);
                (ln_t, lw + ln_f)
            })
            .collect()),
        3 => {
            // t_1 = u, t_2 = (1 - u) v, t_3 = (1 - u)(1 - v); Jacobian 1 - u.
            Ok(axis
                .par_iter()
                .flat_map_iter(|&(lu, l1mu, lwu)| {
                    axis.iter().map(move |&(lv, l1mv, lwv)| {
                        let ln_t = vec![lu, l1mu + lv, l1mu + l1mv];
                        let ln_f = ln_density(alpha, poly, &ln_t);
                        (ln_t, lwu + lwv + l1mu + ln_f)
                    })
                })
                .collect())
        }
        d => Err(Error::OracleUnsupported(format!(
            "quadrature oracle supports d <= 3, got {d}"
        ))),
    }
}

/// `E[∏ ω_j^{k_j}]` by tensor-grid tanh-sinh quadrature over the simplex,
/// independent of the closed-form moment formulas. Densities only, `d <= 3`.
pub fn quadrature_moment_oracle(env: &VertexEnvLaw, k: &VisitVector) -> Result<f64> {
    if k.dimension() != env.dimension {
        return Err(Error::DimensionMismatch {
            expected: env.dimension,
            found: k.dimension(),
        });
    }
    let table = quadrature_moments(env, std::slice::from_ref(k))?;
    Ok(table[0])
}

/// Quadrature moments for every `|k| <= order`, in the order of
/// [`lattice::multi_indices_up_to_degree`].
pub fn quadrature_moment_table(env: &VertexEnvLaw, order: u32) -> Result<Vec<(VisitVector, f64)>> {
    let keys = lattice::multi_indices_up_to_degree(env.dimension, order);
    let values = quadrature_moments(env, &keys)?;
    Ok(keys.into_iter().zip(values).collect())
}

fn quadrature_moments(env: &VertexEnvLaw, keys: &[VisitVector]) -> Result<Vec<f64>> {
    let nodes = simplex_nodes(env)?;
    let shift = nodes.iter().map(|n| n.1).fold(f64::NEG_INFINITY, f64::max);
    let max_power = keys.iter().map(|k| k.max_count()).max().unwrap_or(0) as usize;
    let d = env.dimension;
    let (mass, sums) = nodes
        .par_iter()
        .fold(
            || (0.0, vec![0.0; keys.len()]),
            |(mut mass, mut sums), (ln_t, ln_w)| {
                let w = (ln_w - shift).exp();
                mass += w;
                let powers: Vec<Vec<f64>> = ln_t
                    .iter()
                    .map(|l| {
                        let t = l.exp();
                        let mut row = Vec::with_capacity(max_power + 1);
                        let mut acc = 1.0;
                        for _ in 0..=max_power {
                            row.push(acc);
                            acc *= t;
                        }
                        row
                    })
                    .collect();
                for (sum, k) in sums.iter_mut().zip(keys) {
                    let mut term = w;
                    for (i, &c) in k.counts().iter().enumerate().take(d) {
                        term *= powers[i][c as usize];
                    }
                    *sum += term;
                }
                (mass, sums)
            },
        )
        .reduce(
            || (0.0, vec![0.0; keys.len()]),
            |(ma, sa), (mb, sb)| (ma + mb, sa.iter().zip(&sb).map(|(a, b)| a + b).collect()),
        );
    Ok(sums.into_iter().map(|s| s / mass).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admissibility::{check_admissible, DEFAULT_TOLERANCE};
    use crate::moments::build_moment_table;
    use crate::rng::stream_rng;

    fn v(c: &[u32]) -> VisitVector {
        VisitVector::new(c.to_vec())
    }

    fn linear_poly() -> VertexEnvLaw {
        VertexEnvLaw::polynomial_dirichlet(
            PolynomialDirichlet::new(vec![1.0, 1.0], 1, [(vec![1, 0], 1.0)]).unwrap(),
        )
    }

    #[test]
    fn mixed_moment_examples() {
        let env = VertexEnvLaw::dirichlet(vec![1.0, 1.0]).unwrap();
        assert!((env_mixed_moment(&env, &v(&[1, 1])).unwrap().exp() - 1.0 / 6.0).abs() < 1e-15);
        let pm = VertexEnvLaw::point_mass(SimplexPoint::new(vec![0.3, 0.7]).unwrap());
        assert!((env_mixed_moment(&pm, &v(&[2, 1])).unwrap().exp() - 0.063).abs() < 1e-15);
        for env in [env, pm, linear_poly()] {
            assert_eq!(env_mixed_moment(&env, &v(&[0, 0])).unwrap(), 0.0);
        }
    }

    #[test]
    fn quadrature_examples() {
        let env = VertexEnvLaw::dirichlet(vec![1.0, 1.0]).unwrap();
        assert!((quadrature_moment_oracle(&env, &v(&[1, 1])).unwrap() - 1.0 / 6.0).abs() < 1e-6);
        let env = VertexEnvLaw::dirichlet(vec![2.0, 3.0]).unwrap();
        assert!((quadrature_moment_oracle(&env, &v(&[1, 0])).unwrap() - 0.4).abs() < 1e-6);
        let pm = VertexEnvLaw::point_mass(SimplexPoint::new(vec![0.3, 0.7]).unwrap());
        assert!(matches!(
            quadrature_moment_oracle(&pm, &v(&[1, 0])),
            Err(Error::OracleUnsupported(_))
        ));
        let d4 = VertexEnvLaw::dirichlet(vec![1.0; 4]).unwrap();
        assert!(quadrature_moment_oracle(&d4, &v(&[1, 0, 0, 0])).is_err());
    }

    #[test]
    fn quadrature_handles_singular_edges() {
        // Dirichlet(1/2, 1/2, 2): E[t_1] = 1/6, E[t_1 t_3] = (1/2 · 2) / (3 · 4).
        let env = VertexEnvLaw::dirichlet(vec![0.5, 0.5, 2.0]).unwrap();
        let m1 = quadrature_moment_oracle(&env, &v(&[1, 0, 0])).unwrap();
        let m13 = quadrature_moment_oracle(&env, &v(&[1, 0, 1])).unwrap();
        assert!((m1 - 1.0 / 6.0).abs() < 1e-9, "{m1}");
        assert!((m13 - 1.0 / 12.0).abs() < 1e-9, "{m13}");
    }

    #[test]
    fn law_from_env_examples() {
        let law = law_from_env(&VertexEnvLaw::dirichlet(vec![1.0, 2.0]).unwrap());
        let p = v(&[3, 1]);
        assert!((law.eval(&p).unwrap().weight(0) - 4.0 / 7.0).abs() < 1e-15);

        let w = SimplexPoint::new(vec![0.2, 0.8]).unwrap();
        let law = law_from_env(&VertexEnvLaw::point_mass(w.clone()));
        assert_eq!(law.eval(&v(&[5, 2])).unwrap(), w);

        let law = law_from_env(&linear_poly());
        for p in lattice::box_indices(2, 5) {
            let expected = (2.0 + p.counts()[0] as f64) / (3.0 + p.total() as f64);
            assert!((law.eval(&p).unwrap().weight(0) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn derived_laws_are_moment_ratios_and_admissible() {
        let envs = [
            VertexEnvLaw::dirichlet(vec![0.5, 0.5, 2.0]).unwrap(),
            VertexEnvLaw::polynomial_dirichlet(
                PolynomialDirichlet::new(
                    vec![1.5, 0.5, 1.0],
                    2,
                    [
                        (vec![2, 0, 0], 1.0),
                        (vec![0, 1, 1], 0.5),
                        (vec![0, 0, 2], 2.0),
                    ],
                )
                .unwrap(),
            ),
            VertexEnvLaw::empirical(
                Mixture::new(vec![
                    (0.25, SimplexPoint::new(vec![0.2, 0.3, 0.5]).unwrap()),
                    (0.75, SimplexPoint::new(vec![0.6, 0.3, 0.1]).unwrap()),
                ])
                .unwrap(),
            ),
        ];
        for env in &envs {
            let law = law_from_env(env);
            for p in lattice::box_indices(3, 4) {
                let base = env.ln_mixed_moment(&p).unwrap();
                let out = law.eval(&p).unwrap();
                for i in 0..3 {
                    let ratio = (env.ln_mixed_moment(&p.incremented(i)).unwrap() - base).exp();
                    assert!((out.weight(i) - ratio).abs() < 1e-12);
                }
            }
            assert!(
                check_admissible(&law, 8, DEFAULT_TOLERANCE)
                    .unwrap()
                    .admissible
            );
            let from_law = build_moment_table(&law, 8).unwrap();
            let from_env = env.moment_table(8).unwrap();
            for ((k, a), (_, b)) in from_law.entries().iter().zip(from_env.entries()) {
                assert!((a - b).abs() < 1e-10, "{k:?}");
            }
        }
    }

    #[test]
    fn moments_strictly_decrease() {
        let env = VertexEnvLaw::dirichlet(vec![0.7, 2.0, 1.1]).unwrap();
        for k in lattice::multi_indices_up_to_degree(3, 6) {
            let base = env.ln_mixed_moment(&k).unwrap();
            for i in 0..3 {
                assert!(env.ln_mixed_moment(&k.incremented(i)).unwrap() < base);
            }
        }
    }

    #[test]
    fn sampler_means() {
        let mut rng = stream_rng(20_241_015, 0);
        let n = 100_000;
        let env = VertexEnvLaw::dirichlet(vec![1.0, 1.0]).unwrap();
        let mean: f64 = (0..n)
            .map(|_| env.sample(&mut rng).unwrap().weight(0))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");

        let env = linear_poly();
        let mean: f64 = (0..n)
            .map(|_| env.sample(&mut rng).unwrap().weight(0))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 2.0 / 3.0).abs() < 0.005, "{mean}");

        let w = SimplexPoint::new(vec![0.3, 0.7]).unwrap();
        let env = VertexEnvLaw::point_mass(w.clone());
        assert!((0..10).all(|_| env.sample(&mut rng).unwrap() == w));
    }

    #[test]
    fn small_shape_dirichlet_samples_stay_on_the_simplex() {
        let env = VertexEnvLaw::dirichlet(vec![0.05, 0.05, 0.05]).unwrap();
        let mut rng = stream_rng(3, 9);
        for _ in 0..1000 {
            let w = env.sample(&mut rng).unwrap();
            let sum: f64 = w.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn assignment_checks_degrees() {
        let g = Graph::star(2).unwrap();
        let center = SimplexPoint::uniform(2);
        let leaf = SimplexPoint::uniform(1);
        assert!(
            EnvironmentAssignment::new(&g, vec![center.clone(), leaf.clone(), leaf.clone()])
                .is_ok()
        );
        assert!(EnvironmentAssignment::new(&g, vec![leaf.clone(), leaf.clone(), leaf]).is_err());
        assert!(EnvironmentAssignment::new(&g, vec![center]).is_err());
    }
}
