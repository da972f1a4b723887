//! Command-line front end: reads a JSON run configuration, runs one command
//! and writes a JSON or CSV report.
//!
//! Exit codes: 0 the checked property holds, 1 it fails, 2 the configuration
//! is malformed, 3 evaluation failed, 4 a resource guard tripped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::admissibility::{check_admissible, DEFAULT_TOLERANCE};
use crate::catalog;
use crate::environment::{law_from_env, EnvironmentAssignment, VertexEnvLaw};
use crate::equivalence::{
    compare_distributions, compare_empirical, enumerate_distribution, recover_env_moments, Model,
};
use crate::error::Error;
use crate::lattice;
use crate::laws::{
    Fallback, Mixture, PolynomialDirichlet, ReinforcementLaw, SimplexPoint, TabulatedLaw,
    VisitVector,
};
use crate::moments::{build_moment_table, hildebrandt_schoenberg_check, simplex_mass, MomentTable};
use crate::rng::{stream_rng, ENVIRONMENT_STREAM};
use crate::walk::{
    path_key, run_annealed, run_batch, run_quenched, run_reinforced, Graph, Trajectory,
};

pub const SCHEMA_VERSION: u64 = 1;
pub const DEFAULT_BOX_SIZE: u32 = 8;
pub const DEFAULT_ORDER: u32 = 10;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EVAL: i32 = 3;
pub const EXIT_GUARD: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "rwre",
    version,
    about = "Reinforced random walks and random walks in random environment"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(clap::Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the configured tolerance.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Scan the elementary squares of a box for non-closing defects.
    CheckAdmissibility,
    /// Build moment tables and run the completely-monotone and mass checks.
    VerifyMoments,
    /// Sample trajectories of the reinforced, quenched or annealed walk.
    Simulate,
    /// Compare the reinforced law with the annealed law.
    Compare,
    /// Tabulate the reinforcement law induced by an environment law.
    DeriveLaw,
    /// Recover environment moments from an admissible reinforcement law.
    RecoverMoments,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::CheckAdmissibility => "check-admissibility",
            Command::VerifyMoments => "verify-moments",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::DeriveLaw => "derive-law",
            Command::RecoverMoments => "recover-moments",
        }
    }
}

#[derive(ValueEnum, Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum WalkMode {
    #[default]
    Reinforced,
    Quenched,
    Annealed,
}

impl WalkMode {
    fn name(self) -> &'static str {
        match self {
            WalkMode::Reinforced => "reinforced",
            WalkMode::Quenched => "quenched",
            WalkMode::Annealed => "annealed",
        }
    }
}

#[derive(Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum CompareMode {
    #[default]
    Exact,
    Empirical,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(untagged)]
enum GraphSpec {
    Adjacency { adjacency: Vec<Vec<usize>> },
    Generator(GeneratorSpec),
}

#[derive(Deserialize, Debug, Clone)]
#[serde(tag = "generator", rename_all = "snake_case")]
enum GeneratorSpec {
    Segment { length: usize },
    Star { leaves: usize },
    Cycle { length: usize },
    Grid { rows: usize, cols: usize },
}

#[derive(Deserialize, Debug, Clone)]
struct Coefficient {
    index: Vec<u32>,
    value: f64,
}

#[derive(Deserialize, Debug, Clone)]
struct TableEntry {
    counts: Vec<u32>,
    weights: Vec<f64>,
}

#[derive(Deserialize, Debug, Clone)]
struct Atom {
    weight: f64,
    point: Vec<f64>,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(untagged)]
enum LawSpec {
    Builtin { builtin: String },
    Family(LawFamilySpec),
}

#[derive(Deserialize, Debug, Clone)]
#[serde(tag = "family", rename_all = "snake_case")]
enum LawFamilySpec {
    Uniform {
        dimension: Option<usize>,
    },
    Dirichlet {
        alpha: Vec<f64>,
    },
    PolynomialDirichlet {
        alpha: Vec<f64>,
        degree: u32,
        coefficients: Vec<Coefficient>,
    },
    Tabulated {
        #[serde(rename = "box")]
        box_size: u32,
        entries: Vec<TableEntry>,
        #[serde(default)]
        fallback: Fallback,
    },
    Constant {
        weights: Vec<f64>,
    },
}

#[derive(Deserialize, Debug, Clone)]
#[serde(untagged)]
enum EnvSpec {
    Builtin { builtin: String },
    Family(EnvFamilySpec),
}

#[derive(Deserialize, Debug, Clone)]
#[serde(tag = "family", rename_all = "snake_case")]
enum EnvFamilySpec {
    Dirichlet {
        alpha: Vec<f64>,
    },
    PolynomialDirichlet {
        alpha: Vec<f64>,
        degree: u32,
        coefficients: Vec<Coefficient>,
    },
    PointMass {
        weights: Vec<f64>,
    },
    Empirical {
        atoms: Vec<Atom>,
    },
}

/// Overwrites one moment-table entry before certification.
#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
struct Corruption {
    vertex: Option<usize>,
    k: Vec<u32>,
    value: f64,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    schema: u64,
    graph: Option<GraphSpec>,
    /// Default law for vertices without an entry in `laws`.
    law: Option<LawSpec>,
    #[serde(default)]
    laws: BTreeMap<usize, LawSpec>,
    /// Default environment law for vertices without an entry in `envs`.
    env: Option<EnvSpec>,
    #[serde(default)]
    envs: BTreeMap<usize, EnvSpec>,
    /// Inline quenched environment, one transition vector per vertex.
    environment: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    start: usize,
    steps: Option<usize>,
    samples: Option<usize>,
    #[serde(default)]
    mode: WalkMode,
    box_size: Option<u32>,
    order: Option<u32>,
    #[serde(default)]
    compare: CompareMode,
    tolerance: Option<f64>,
    seed: Option<u64>,
    format: Option<Format>,
    output: Option<PathBuf>,
    corrupt: Option<Corruption>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Eval(Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Eval(Error::EnumerationGuard { .. }) => EXIT_GUARD,
            CliError::Eval(Error::TooFewSamples { .. }) => EXIT_CONFIG,
            CliError::Eval(_) => EXIT_EVAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Eval(e) => write!(f, "evaluation error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Eval(e)
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

type CliResult<T> = std::result::Result<T, CliError>;

/// A finished command: whether the property held, the JSON payload and,
/// when the command has one, its CSV rendering.
struct Outcome {
    passed: bool,
    json: Value,
    csv: String,
    /// Extra metadata for the CSV sidecar.
    meta: Value,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rwre: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> CliResult<i32> {
    let path = cli
        .common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let mut raw: Value = serde_json::from_str(&text).map_err(config_err)?;
    apply_overrides(&mut raw, &cli.common)?;
    let config: RunConfig = serde_json::from_value(raw.clone()).map_err(config_err)?;
    if config.schema != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "unsupported schema {} (expected {SCHEMA_VERSION})",
            config.schema
        )));
    }
    let hash = config_hash(&raw);

    let pool = match cli.common.threads {
        Some(0) => return Err(CliError::Config("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(config_err)?;

    let command = cli.command;
    let outcome = pool.install(|| match command {
        Command::CheckAdmissibility => cmd_check_admissibility(&config),
        Command::VerifyMoments => cmd_verify_moments(&config),
        Command::Simulate => cmd_simulate(&config),
        Command::Compare => cmd_compare(&config),
        Command::DeriveLaw => cmd_derive_law(&config),
        Command::RecoverMoments => cmd_recover_moments(&config),
    })?;

    let format = config.format.unwrap_or_default();
    let out = cli.common.out.clone().or(config.output.clone());
    write_outcome(command, &hash, format, out.as_deref(), outcome)
}

/// Folds command-line overrides into the configuration document so that the
/// recorded hash describes the run actually performed.
fn apply_overrides(raw: &mut Value, common: &CommonArgs) -> CliResult<()> {
    let Value::Object(map) = raw else {
        return Err(CliError::Config(
            "configuration must be a JSON object".into(),
        ));
    };
    if let Some(seed) = common.seed {
        map.insert("seed".into(), json!(seed));
    }
    if let Some(tol) = common.tolerance {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(CliError::Config(
                "--tolerance must be finite and non-negative".into(),
            ));
        }
        map.insert("tolerance".into(), json!(tol));
    }
    if let Some(format) = common.format {
        let name = match format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        map.insert("format".into(), json!(name));
    }
    Ok(())
}

/// SHA-256 of the canonical (key-sorted, compact) configuration, excluding
/// the output path.
pub fn config_hash_of(raw: &Value) -> String {
    let mut canonical = raw.clone();
    if let Value::Object(map) = &mut canonical {
        map.remove("output");
    }
    let bytes = serde_json::to_vec(&canonical).expect("JSON values serialize");
    hex::encode(Sha256::digest(&bytes))
}

fn config_hash(raw: &Value) -> String {
    config_hash_of(raw)
}

fn write_outcome(
    command: Command,
    hash: &str,
    format: Format,
    out: Option<&Path>,
    outcome: Outcome,
) -> CliResult<i32> {
    let mut metadata = json!({
        "command": command.name(),
        "config_hash": hash,
        "passed": outcome.passed,
    });
    if let (Value::Object(m), Value::Object(extra)) = (&mut metadata, &outcome.meta) {
        m.extend(extra.clone());
    }
    let code = if outcome.passed { EXIT_PASS } else { EXIT_FAIL };
    match format {
        Format::Json => {
            let mut doc = json!({ "metadata": metadata });
            if let (Value::Object(d), Value::Object(body)) = (&mut doc, outcome.json) {
                d.extend(body);
            }
            let mut text = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
            text.push('\n');
            emit(out, &text)?;
        }
        Format::Csv => {
            emit(out, &outcome.csv)?;
            let mut sidecar =
                serde_json::to_string_pretty(&metadata).expect("JSON values serialize");
            sidecar.push('\n');
            match out {
                Some(path) => {
                    let mut meta_path = path.as_os_str().to_owned();
                    meta_path.push(".meta.json");
                    write_file(Path::new(&meta_path), &sidecar)?;
                }
                None => eprint!("{sidecar}"),
            }
        }
    }
    Ok(code)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn build_graph(spec: &GraphSpec) -> CliResult<Graph> {
    let graph = match spec {
        GraphSpec::Adjacency { adjacency } => Graph::new(adjacency.clone()),
        GraphSpec::Generator(GeneratorSpec::Segment { length }) => Graph::segment(*length),
        GraphSpec::Generator(GeneratorSpec::Star { leaves }) => Graph::star(*leaves),
        GraphSpec::Generator(GeneratorSpec::Cycle { length }) => Graph::cycle(*length),
        GraphSpec::Generator(GeneratorSpec::Grid { rows, cols }) => Graph::grid(*rows, *cols),
    };
    graph.map_err(config_err)
}

fn polynomial(
    alpha: &[f64],
    degree: u32,
    coefficients: &[Coefficient],
) -> crate::Result<PolynomialDirichlet> {
    PolynomialDirichlet::new(
        alpha.to_vec(),
        degree,
        coefficients.iter().map(|c| (c.index.clone(), c.value)),
    )
}

/// Resolves a law spec; `degree` fills in the dimension of uniform laws.
fn build_law(spec: &LawSpec, degree: Option<usize>) -> CliResult<ReinforcementLaw> {
    let law = match spec {
        LawSpec::Builtin { builtin } => {
            if builtin == "non-admissible-witness" {
                return Ok(catalog::non_admissible_witness());
            }
            return catalog::builtin_laws()
                .into_iter()
                .find(|(name, _)| name == builtin)
                .map(|(_, law)| law)
                .ok_or_else(|| CliError::Config(format!("unknown built-in law {builtin:?}")));
        }
        LawSpec::Family(LawFamilySpec::Uniform { dimension }) => {
            let d = dimension.or(degree).ok_or_else(|| {
                CliError::Config("uniform law needs a dimension when no graph is given".into())
            })?;
            ReinforcementLaw::uniform(d)
        }
        LawSpec::Family(LawFamilySpec::Dirichlet { alpha }) => {
            ReinforcementLaw::dirichlet(alpha.clone())
        }
        LawSpec::Family(LawFamilySpec::PolynomialDirichlet {
            alpha,
            degree,
            coefficients,
        }) => polynomial(alpha, *degree, coefficients).map(ReinforcementLaw::polynomial_dirichlet),
        LawSpec::Family(LawFamilySpec::Tabulated {
            box_size,
            entries,
            fallback,
        }) => {
            let dimension = entries.first().map_or(0, |e| e.counts.len());
            entries
                .iter()
                .map(|e| {
                    SimplexPoint::new(e.weights.clone())
                        .map(|w| (VisitVector::new(e.counts.clone()), w))
                })
                .collect::<crate::Result<Vec<_>>>()
                .and_then(|entries| TabulatedLaw::new(dimension, *box_size, entries, *fallback))
                .map(ReinforcementLaw::tabulated)
        }
        LawSpec::Family(LawFamilySpec::Constant { weights }) => {
            SimplexPoint::closed(weights.clone()).map(ReinforcementLaw::constant)
        }
    };
    law.map_err(config_err)
}

fn build_env(spec: &EnvSpec) -> CliResult<VertexEnvLaw> {
    let env = match spec {
        EnvSpec::Builtin { builtin } => {
            return catalog::builtin_envs()
                .into_iter()
                .find(|(name, _)| name == builtin)
                .map(|(_, env)| env)
                .ok_or_else(|| {
                    CliError::Config(format!("unknown built-in environment law {builtin:?}"))
                });
        }
        EnvSpec::Family(EnvFamilySpec::Dirichlet { alpha }) => {
            VertexEnvLaw::dirichlet(alpha.clone())
        }
        EnvSpec::Family(EnvFamilySpec::PolynomialDirichlet {
            alpha,
            degree,
            coefficients,
        }) => polynomial(alpha, *degree, coefficients).map(VertexEnvLaw::polynomial_dirichlet),
        EnvSpec::Family(EnvFamilySpec::PointMass { weights }) => {
            SimplexPoint::closed(weights.clone()).map(VertexEnvLaw::point_mass)
        }
        EnvSpec::Family(EnvFamilySpec::Empirical { atoms }) => atoms
            .iter()
            .map(|a| SimplexPoint::closed(a.point.clone()).map(|p| (a.weight, p)))
            .collect::<crate::Result<Vec<_>>>()
            .and_then(Mixture::new)
            .map(VertexEnvLaw::empirical),
    };
    env.map_err(config_err)
}

fn check_dimension(x: usize, found: usize, degree: usize) -> CliResult<()> {
    if found != degree {
        return Err(CliError::Config(format!(
            "vertex {x} has {degree} neighbours but its law has dimension {found}"
        )));
    }
    Ok(())
}

fn check_vertex_keys<V>(graph: &Graph, map: &BTreeMap<usize, V>, what: &str) -> CliResult<()> {
    match map.keys().find(|&&x| x >= graph.vertex_count()) {
        Some(x) => Err(CliError::Config(format!(
            "{what} given for unknown vertex {x}"
        ))),
        None => Ok(()),
    }
}

fn has_law_specs(config: &RunConfig) -> bool {
    config.law.is_some() || !config.laws.is_empty()
}

fn has_env_specs(config: &RunConfig) -> bool {
    config.env.is_some() || !config.envs.is_empty()
}

/// Per-vertex environment laws.
fn resolve_envs(config: &RunConfig, graph: &Graph) -> CliResult<Vec<VertexEnvLaw>> {
    check_vertex_keys(graph, &config.envs, "environment law")?;
    (0..graph.vertex_count())
        .map(|x| {
            let spec =
                config.envs.get(&x).or(config.env.as_ref()).ok_or_else(|| {
                    CliError::Config(format!("no environment law for vertex {x}"))
                })?;
            let env = build_env(spec)?;
            check_dimension(x, env.dimension(), graph.degree(x))?;
            Ok(env)
        })
        .collect()
}

/// Per-vertex reinforcement laws; without law specs they are derived from
/// the environment laws.
fn resolve_laws(config: &RunConfig, graph: &Graph) -> CliResult<Vec<ReinforcementLaw>> {
    if !has_law_specs(config) {
        return Ok(resolve_envs(config, graph)?
            .iter()
            .map(law_from_env)
            .collect());
    }
    check_vertex_keys(graph, &config.laws, "law")?;
    (0..graph.vertex_count())
        .map(|x| {
            let law = match config.laws.get(&x).or(config.law.as_ref()) {
                Some(spec) => build_law(spec, Some(graph.degree(x)))?,
                None => {
                    let spec = config
                        .envs
                        .get(&x)
                        .or(config.env.as_ref())
                        .ok_or_else(|| CliError::Config(format!("no law for vertex {x}")))?;
                    law_from_env(&build_env(spec)?)
                }
            };
            check_dimension(x, law.dimension(), graph.degree(x))?;
            Ok(law)
        })
        .collect()
}

fn graph_of(config: &RunConfig) -> CliResult<Option<Graph>> {
    config.graph.as_ref().map(build_graph).transpose()
}

fn require_graph(config: &RunConfig) -> CliResult<Graph> {
    graph_of(config)?.ok_or_else(|| CliError::Config("this command needs a graph".into()))
}

/// The laws a law-level command works on: one per vertex with a graph,
/// otherwise the single configured law (or the law derived from `env`).
fn law_subjects(config: &RunConfig) -> CliResult<Vec<(Option<usize>, ReinforcementLaw)>> {
    if let Some(graph) = graph_of(config)? {
        return Ok(resolve_laws(config, &graph)?
            .into_iter()
            .enumerate()
            .map(|(x, law)| (Some(x), law))
            .collect());
    }
    if let Some(spec) = &config.law {
        return Ok(vec![(None, build_law(spec, None)?)]);
    }
    if let Some(spec) = &config.env {
        return Ok(vec![(None, law_from_env(&build_env(spec)?))]);
    }
    Err(CliError::Config(
        "configuration has neither a law nor an environment law".into(),
    ))
}

fn env_subjects(config: &RunConfig) -> CliResult<Vec<(Option<usize>, VertexEnvLaw)>> {
    if let Some(graph) = graph_of(config)? {
        return Ok(resolve_envs(config, &graph)?
            .into_iter()
            .enumerate()
            .map(|(x, env)| (Some(x), env))
            .collect());
    }
    match &config.env {
        Some(spec) => Ok(vec![(None, build_env(spec)?)]),
        None => Err(CliError::Config(
            "configuration has no environment law".into(),
        )),
    }
}

fn tolerance(config: &RunConfig) -> CliResult<f64> {
    let tol = config.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(CliError::Config(
            "tolerance must be finite and non-negative".into(),
        ));
    }
    Ok(tol)
}

fn vertex_cell(x: Option<usize>) -> String {
    x.map(|x| x.to_string()).unwrap_or_default()
}

fn dash(counts: &[u32]) -> String {
    counts
        .iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join("-")
}

fn cmd_check_admissibility(config: &RunConfig) -> CliResult<Outcome> {
    let tol = tolerance(config)?;
    let box_size = config.box_size.unwrap_or(DEFAULT_BOX_SIZE);
    if box_size == 0 {
        return Err(CliError::Config("box_size must be at least 1".into()));
    }
    let mut passed = true;
    let mut results = Vec::new();
    let mut csv = String::from("vertex,p,i,j,lhs,rhs,gap\n");
    for (x, law) in law_subjects(config)? {
        let report = check_admissible(&law, box_size, tol)?;
        passed &= report.admissible;
        for v in &report.violations {
            let _ = writeln!(
                csv,
                "{},{},{},{},{:e},{:e},{:e}",
                vertex_cell(x),
                dash(v.p.counts()),
                v.i,
                v.j,
                v.lhs,
                v.rhs,
                v.gap
            );
        }
        results.push(json!({ "vertex": x, "report": report }));
    }
    Ok(Outcome {
        passed,
        json: json!({ "results": results }),
        csv,
        meta: json!({ "box_size": box_size, "tolerance": tol }),
    })
}

fn moments_csv(csv: &mut String, x: Option<usize>, table: &MomentTable) {
    for (k, l) in table.entries() {
        let _ = writeln!(
            csv,
            "{},{},{:e},{:e}",
            vertex_cell(x),
            dash(k.counts()),
            l.exp(),
            l
        );
    }
}

fn apply_corruption(
    config: &RunConfig,
    x: Option<usize>,
    table: &mut MomentTable,
) -> CliResult<()> {
    if let Some(c) = &config.corrupt {
        if c.vertex.is_none() || c.vertex == x {
            table
                .overwrite(&VisitVector::new(c.k.clone()), c.value)
                .map_err(config_err)?;
        }
    }
    Ok(())
}

fn cmd_verify_moments(config: &RunConfig) -> CliResult<Outcome> {
    let tol = tolerance(config)?;
    let order = config.order.unwrap_or(DEFAULT_ORDER);
    let mut passed = true;
    let mut results = Vec::new();
    let mut csv = String::from("vertex,k,value,log_value\n");
    for (x, law) in law_subjects(config)? {
        let mut table = match build_moment_table(&law, order) {
            Ok(table) => table,
            Err(e @ Error::PathDependence { .. }) => {
                passed = false;
                results.push(json!({ "vertex": x, "passed": false, "error": e.to_string() }));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        apply_corruption(config, x, &mut table)?;
        let hs = hildebrandt_schoenberg_check(&table, tol)?;
        let mut masses = Vec::new();
        let mut mass_ok = true;
        for n in 0..=order {
            let deviation = simplex_mass(&table, n)? - 1.0;
            mass_ok &= deviation.abs() <= tol;
            masses.push(json!({ "n": n, "deviation": deviation }));
        }
        let ok = hs.passed && mass_ok;
        passed &= ok;
        moments_csv(&mut csv, x, &table);
        results.push(json!({
            "vertex": x,
            "passed": ok,
            "hildebrandt_schoenberg": hs,
            "mass_deviations": masses,
            "moments": table,
        }));
    }
    Ok(Outcome {
        passed,
        json: json!({ "results": results }),
        csv,
        meta: json!({ "order": order, "tolerance": tol }),
    })
}

fn cmd_recover_moments(config: &RunConfig) -> CliResult<Outcome> {
    let order = config.order.unwrap_or(DEFAULT_ORDER);
    let mut passed = true;
    let mut results = Vec::new();
    let mut csv = String::from("vertex,k,value,log_value\n");
    for (x, law) in law_subjects(config)? {
        match recover_env_moments(&law, order) {
            Ok(table) => {
                moments_csv(&mut csv, x, &table);
                results.push(json!({ "vertex": x, "moments": table }));
            }
            Err(e @ (Error::NonAdmissible { .. } | Error::PathDependence { .. })) => {
                passed = false;
                results.push(json!({ "vertex": x, "error": e.to_string() }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Outcome {
        passed,
        json: json!({ "results": results }),
        csv,
        meta: json!({ "order": order }),
    })
}

fn cmd_derive_law(config: &RunConfig) -> CliResult<Outcome> {
    let box_size = config.box_size.unwrap_or(DEFAULT_BOX_SIZE);
    let mut results = Vec::new();
    let mut csv = String::from("vertex,p,direction,probability\n");
    for (x, env) in env_subjects(config)? {
        let law = law_from_env(&env);
        let mut entries = Vec::new();
        for p in lattice::box_indices(env.dimension(), box_size) {
            let v = law.eval(&p)?;
            for (i, w) in v.weights().iter().enumerate() {
                let _ = writeln!(csv, "{},{},{i},{w:e}", vertex_cell(x), dash(p.counts()));
            }
            entries.push(json!({ "p": p, "v": v }));
        }
        results.push(json!({ "vertex": x, "entries": entries }));
    }
    Ok(Outcome {
        passed: true,
        json: json!({ "results": results }),
        csv,
        meta: json!({ "box_size": box_size }),
    })
}

fn require_seed(config: &RunConfig) -> CliResult<u64> {
    config.seed.ok_or_else(|| {
        CliError::Config("a seed is required for sampling (--seed or \"seed\")".into())
    })
}

fn require_steps(config: &RunConfig) -> CliResult<usize> {
    config
        .steps
        .ok_or_else(|| CliError::Config("\"steps\" is required".into()))
}

fn check_start(config: &RunConfig, graph: &Graph) -> CliResult<()> {
    if config.start >= graph.vertex_count() {
        return Err(CliError::Config(format!(
            "start vertex {} is not in the graph ({} vertices)",
            config.start,
            graph.vertex_count()
        )));
    }
    Ok(())
}

/// The quenched environment: inline when given, otherwise sampled once from
/// the environment laws on the reserved environment stream.
fn quenched_environment(
    config: &RunConfig,
    graph: &Graph,
    seed: u64,
) -> CliResult<(EnvironmentAssignment, bool)> {
    if let Some(inline) = &config.environment {
        let omegas = inline
            .iter()
            .map(|w| SimplexPoint::closed(w.clone()))
            .collect::<crate::Result<Vec<_>>>()
            .map_err(config_err)?;
        return Ok((
            EnvironmentAssignment::new(graph, omegas).map_err(config_err)?,
            false,
        ));
    }
    if !has_env_specs(config) {
        return Err(CliError::Config(
            "quenched mode needs an inline \"environment\" or environment laws to sample one"
                .into(),
        ));
    }
    let envs = resolve_envs(config, graph)?;
    let mut rng = stream_rng(seed, ENVIRONMENT_STREAM);
    Ok((EnvironmentAssignment::sample(graph, &envs, &mut rng)?, true))
}

fn sample_trajectories(
    config: &RunConfig,
    graph: &Graph,
    seed: u64,
    count: usize,
    steps: usize,
) -> CliResult<(Vec<Trajectory>, Value)> {
    let x0 = config.start;
    let mut meta = json!({ "mode": config.mode.name() });
    let trajectories = match config.mode {
        WalkMode::Reinforced => {
            let laws = resolve_laws(config, graph)?;
            run_batch(count, seed, |rng| {
                run_reinforced(graph, &laws, x0, steps, rng)
            })?
        }
        WalkMode::Annealed => {
            let envs = resolve_envs(config, graph)?;
            run_batch(count, seed, |rng| {
                run_annealed(graph, &envs, x0, steps, rng)
            })?
        }
        WalkMode::Quenched => {
            let (env, sampled) = quenched_environment(config, graph, seed)?;
            meta["environment"] = json!(env.omegas());
            meta["environment_sampled"] = json!(sampled);
            if sampled {
                meta["environment_stream"] = json!(ENVIRONMENT_STREAM);
            }
            run_batch(count, seed, |rng| run_quenched(graph, &env, x0, steps, rng))?
        }
    };
    Ok((trajectories, meta))
}

fn cmd_simulate(config: &RunConfig) -> CliResult<Outcome> {
    let graph = require_graph(config)?;
    check_start(config, &graph)?;
    let seed = require_seed(config)?;
    let steps = require_steps(config)?;
    let count = config.samples.unwrap_or(1);
    let (trajectories, mut meta) = sample_trajectories(config, &graph, seed, count, steps)?;
    meta["seed"] = json!(seed);
    meta["samples"] = json!(count);
    meta["steps"] = json!(steps);
    meta["start"] = json!(config.start);

    let mut csv = String::from("trajectory,path\n");
    for (j, t) in trajectories.iter().enumerate() {
        let _ = writeln!(csv, "{j},{}", t.key());
    }
    let rows: Vec<Value> = trajectories
        .iter()
        .map(|t| json!({ "vertices": t.vertices(), "moves": t.moves() }))
        .collect();
    Ok(Outcome {
        passed: true,
        json: json!({ "trajectories": rows }),
        csv,
        meta,
    })
}

fn cmd_compare(config: &RunConfig) -> CliResult<Outcome> {
    let graph = require_graph(config)?;
    check_start(config, &graph)?;
    let steps = require_steps(config)?;
    let tol = tolerance(config)?;
    let envs = resolve_envs(config, &graph)?;
    let annealed = enumerate_distribution(&graph, Model::Annealed(&envs), config.start, steps)?;
    match config.compare {
        CompareMode::Exact => {
            let laws = resolve_laws(config, &graph)?;
            let reinforced =
                enumerate_distribution(&graph, Model::Reinforced(&laws), config.start, steps)?;
            let report = compare_distributions(&reinforced, &annealed)?;
            let passed = report.total_variation <= tol;
            let mut csv = String::from("path,reinforced,annealed\n");
            for ((p, r), (_, a)) in reinforced.paths.iter().zip(&annealed.paths) {
                let _ = writeln!(csv, "{},{:e},{:e}", path_key(p), r.exp(), a.exp());
            }
            Ok(Outcome {
                passed,
                json: json!({
                    "report": report,
                    "reinforced_mass": reinforced.total_mass(),
                    "annealed_mass": annealed.total_mass(),
                    "paths": annealed.paths.len(),
                }),
                csv,
                meta: json!({ "compare": "exact", "steps": steps, "start": config.start, "tolerance": tol }),
            })
        }
        CompareMode::Empirical => {
            let seed = require_seed(config)?;
            let count = config.samples.ok_or_else(|| {
                CliError::Config("\"samples\" is required for empirical comparison".into())
            })?;
            let (samples, mut meta) = sample_trajectories(config, &graph, seed, count, steps)?;
            let report = compare_empirical(&samples, &annealed)?;
            let passed = report.chi_square.as_ref().is_some_and(|c| c.passed);
            let mut observed: BTreeMap<&[usize], u64> = BTreeMap::new();
            for s in &samples {
                *observed.entry(s.vertices()).or_default() += 1;
            }
            let mut csv = String::from("path,observed,expected\n");
            for (p, l) in &annealed.paths {
                let o = observed.get(p.as_slice()).copied().unwrap_or(0);
                let _ = writeln!(csv, "{},{o},{:e}", path_key(p), count as f64 * l.exp());
            }
            meta["compare"] = json!("empirical");
            meta["seed"] = json!(seed);
            meta["samples"] = json!(count);
            meta["steps"] = json!(steps);
            meta["start"] = json!(config.start);
            Ok(Outcome {
                passed,
                json: json!({ "report": report }),
                csv,
                meta,
            })
        }
    }
}
