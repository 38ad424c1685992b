//! Command-line front end. [`run_args`] parses and runs one command and
//! returns the exit code with everything that would be printed.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use protocheck::car::{
    car_guaranteed_for_all_priors, check_any, check_generalized_car, construct_car_joint, mre_car_fixed_point,
    CarReport, FixedPointResult,
};
use protocheck::protocol::{ObservationKind, SAMPLER_ALGORITHM};
use protocheck::scenario_file::load_scenario;
use protocheck::scenarios::{build, Built};
use protocheck::update::{apply_rule, Posterior};
use protocheck::{
    compare, ComparisonReport, Error, Event, FloatDistribution, NaiveDistribution, Observation, ObservationAlphabet,
    Protocol, Rational, Scenario, ScenarioFile, SolverOptions, UpdateRule, WorldSet,
};
use serde::{Deserialize, Serialize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MATH: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "protocheck", version, about = "Check when naive probability updates match conditioning on the protocol")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Solver tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Update the prior on one observation with a naive-space rule.
    Update {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        obs: Option<String>,
        /// naive, jeffrey or mre; defaults to the rule matching the observation kind.
        #[arg(long)]
        rule: Option<UpdateRule>,
    },
    /// Check CAR (or its generalization) for each observation.
    CheckCar {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        obs: Option<String>,
    },
    /// Compare naive and sophisticated updates on every observation.
    Audit {
        #[command(flatten)]
        source: Source,
    },
    /// Build a joint over a partition that satisfies generalized CAR.
    Construct {
        /// JSON with worlds, cells, pr_o, alphas and conditionals.
        #[arg(long)]
        file: PathBuf,
    },
    /// Search for a prior whose MRE updates are CAR-compatible.
    FixedPoint {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        restarts: usize,
    },
    /// Sample runs and compare empirical with exact posteriors.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Print a scenario as a scenario file.
    Scenario {
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Args, Debug)]
#[group(skip)]
pub struct Source {
    /// Built-in scenario: monty-hall, three-prisoners or judy-benjamin.
    #[arg(long, required_unless_present = "file", conflicts_with = "file")]
    scenario: Option<String>,
    /// Scenario file.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Scenario parameter as key=p/q; repeatable.
    #[arg(long = "param", value_parser = parse_param, requires = "scenario")]
    params: Vec<(String, Rational)>,
}

fn parse_param(s: &str) -> Result<(String, Rational), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: Rational = v.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

/// Errors while reading input are usage errors whatever their kind.
fn input(e: Error) -> Failure {
    usage(e.to_string())
}

fn computed(e: Error) -> Failure {
    let code = match e {
        Error::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
        Error::RuleKindMismatch { .. }
        | Error::UnknownObservation(_)
        | Error::InvalidOptions(_)
        | Error::WrongAlphabetShape(_)
        | Error::ScenarioFormat(_)
        | Error::ParseRational(_) => EXIT_USAGE,
        _ => EXIT_MATH,
    };
    Failure { code, message: e.to_string() }
}

// ---- reports ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub observation: String,
    pub rule: UpdateRule,
    pub prior: NaiveDistribution,
    pub posterior: Posterior,
    pub posterior_f64: FloatDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckCarReport {
    pub reports: Vec<CarReport>,
    /// Observations with probability zero, which have no verdict.
    pub unobservable: Vec<String>,
    /// For event observations: whether CAR holds for every joint on the same runs.
    pub guaranteed_for_all_priors: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub comparison: ComparisonReport,
    pub car: CarReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub accurate: bool,
    pub observations: Vec<AuditEntry>,
    pub unobservable: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructSpec {
    pub worlds: Vec<String>,
    pub cells: Vec<Vec<String>>,
    pub pr_o: Vec<Rational>,
    pub alphas: Vec<Vec<Rational>>,
    /// One distribution per cell, by world label; missing worlds have mass 0.
    pub conditionals: Vec<BTreeMap<String, Rational>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructReport {
    pub scenario: ScenarioFile,
    pub car: Vec<CarReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub lambdas: Vec<f64>,
    pub seed: u64,
    pub result: FixedPointResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedObservation {
    pub name: String,
    pub count: usize,
    pub empirical_probability: f64,
    pub exact_probability: Rational,
    pub empirical_posterior: Vec<f64>,
    pub exact_posterior: Option<NaiveDistribution>,
    /// Largest `|empirical − exact|` over worlds; 0 when the observation never occurs.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub seed: u64,
    pub samples: usize,
    pub sampler: String,
    pub observations: Vec<SimulatedObservation>,
    pub max_deviation: f64,
}

// ---- formatting ----

/// `x` to 12 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=12).contains(&exp) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn fmt_exact(d: &NaiveDistribution) -> String {
    let labels = d.space().labels();
    labels.iter().zip(d.masses()).map(|(l, m)| format!("{l}={m}")).collect::<Vec<_>>().join("  ")
}

fn fmt_float(labels: &[String], masses: &[f64]) -> String {
    labels.iter().zip(masses).map(|(l, m)| format!("{l}={}", fmt_f64(*m))).collect::<Vec<_>>().join("  ")
}

fn fmt_posterior(p: &Posterior) -> String {
    match p {
        Posterior::Exact(d) => fmt_exact(d),
        Posterior::Approx(d) => fmt_float(d.space().labels(), d.masses()),
    }
}

fn fmt_car(r: &CarReport, out: &mut String) {
    let verdict = if r.holds { "holds" } else { "fails" };
    let _ = writeln!(out, "  {}: CAR {verdict}", r.observation_name);
    let values: Vec<String> =
        r.kernel_values.iter().map(|k| format!("{}={}", k.world, k.value)).collect();
    let _ = writeln!(out, "    kernel: {}", values.join("  "));
    if let Some(w) = &r.witness {
        let _ = writeln!(
            out,
            "    witness: {} has {} but {} has {}",
            w.first.world,
            w.first.value,
            w.second.world,
            w.second.value
        );
    }
}

// ---- input ----

fn load(source: &Source) -> Result<Scenario, Failure> {
    if let Some(path) = &source.file {
        return load_scenario(path).map_err(input);
    }
    let name = source.scenario.as_deref().ok_or_else(|| usage("give --scenario or --file"))?;
    let mut params = BTreeMap::new();
    for (k, v) in &source.params {
        if params.insert(k.clone(), v.clone()).is_some() {
            return Err(usage(format!("parameter `{k}` given twice")));
        }
    }
    match build(name, &params).map_err(input)? {
        Built::Protocol(p) => Ok(Scenario {
            prior: p.marginal_worlds(),
            alphabet: p.alphabet().clone(),
            accuracy: Some(p.validate_accuracy()),
            protocol: Some(p),
        }),
        Built::Update { prior, name, observation } => {
            let alphabet = ObservationAlphabet::new(vec![(name, observation)]).map_err(input)?;
            Ok(Scenario { prior, alphabet, protocol: None, accuracy: None })
        }
    }
}

fn protocol_of(s: &Scenario, verb: &str) -> Result<Protocol, Failure> {
    s.protocol.clone().ok_or_else(|| usage(format!("{verb} needs a scenario with a kernel (a full protocol)")))
}

fn pick_observation(alphabet: &ObservationAlphabet, obs: Option<&str>) -> Result<usize, Failure> {
    match obs {
        Some(name) => alphabet.index_of(name).map_err(input),
        None if alphabet.len() == 1 => Ok(0),
        None => Err(usage(format!("choose an observation with --obs ({})", alphabet.names().join(", ")))),
    }
}

fn default_rule(o: &Observation) -> UpdateRule {
    match o.kind() {
        ObservationKind::Event => UpdateRule::NaiveConditioning,
        ObservationKind::Jeffrey => UpdateRule::JeffreyConditioning,
        ObservationKind::Constraint => UpdateRule::Mre,
    }
}

fn observable(p: &Protocol) -> (Vec<usize>, Vec<String>) {
    let (yes, no): (Vec<usize>, Vec<usize>) =
        (0..p.alphabet().len()).partition(|&o| !p.marginal_observations()[o].is_zero());
    (yes, no.into_iter().map(|o| p.alphabet().name(o).to_string()).collect())
}

fn emit<T: Serialize>(format: Format, report: &T, text: impl FnOnce(&T) -> String) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        Format::Text => text(report),
    }
}

// ---- verbs ----

fn update(cli: &Cli, source: &Source, obs: Option<&str>, rule: Option<UpdateRule>) -> Result<String, Failure> {
    let s = load(source)?;
    let o = pick_observation(&s.alphabet, obs)?;
    let observation = &s.alphabet.items()[o];
    let rule = rule.unwrap_or_else(|| default_rule(observation));
    let opts = SolverOptions { tol: cli.tol, ..SolverOptions::default() };
    let posterior = apply_rule(rule, &s.prior, observation, &opts).map_err(computed)?;
    let report = UpdateReport {
        observation: s.alphabet.name(o).to_string(),
        rule,
        prior: s.prior.clone(),
        posterior_f64: FloatDistribution::new(s.prior.space().clone(), posterior.to_f64()),
        posterior,
    };
    Ok(emit(cli.format, &report, |r| {
        format!(
            "observation: {}\nrule: {}\nprior:     {}\nposterior: {}\n",
            r.observation,
            r.rule,
            fmt_exact(&r.prior),
            fmt_posterior(&r.posterior)
        )
    }))
}

fn check_car_verb(cli: &Cli, source: &Source, obs: Option<&str>) -> Result<String, Failure> {
    let s = load(source)?;
    let p = protocol_of(&s, "check-car")?;
    let (mut indices, unobservable) = observable(&p);
    if let Some(name) = obs {
        indices = vec![p.alphabet().index_of(name).map_err(input)?];
    }
    let reports = indices.iter().map(|&o| check_any(&p, o)).collect::<Result<Vec<_>, _>>().map_err(computed)?;
    let guaranteed = match p.alphabet().kind() {
        ObservationKind::Event => Some(car_guaranteed_for_all_priors(&p).map_err(computed)?),
        _ => None,
    };
    let report = CheckCarReport { reports, unobservable, guaranteed_for_all_priors: guaranteed };
    Ok(emit(cli.format, &report, |r| {
        let mut out = String::new();
        for c in &r.reports {
            fmt_car(c, &mut out);
        }
        for name in &r.unobservable {
            let _ = writeln!(out, "  {name}: never observed");
        }
        if let Some(g) = r.guaranteed_for_all_priors {
            let _ = writeln!(out, "CAR for every joint on these runs: {}", if g { "yes" } else { "no" });
        }
        out
    }))
}

fn audit(cli: &Cli, source: &Source) -> Result<String, Failure> {
    let s = load(source)?;
    let p = protocol_of(&s, "audit")?;
    let opts = SolverOptions { tol: cli.tol, ..SolverOptions::default() };
    let (indices, unobservable) = observable(&p);
    let observations = indices
        .iter()
        .map(|&o| {
            let rule = default_rule(&p.alphabet().items()[o]);
            Ok(AuditEntry { comparison: compare(&p, o, rule, &opts)?, car: check_any(&p, o)? })
        })
        .collect::<Result<Vec<_>, Error>>()
        .map_err(computed)?;
    let report = AuditReport { accurate: p.validate_accuracy().ok(), observations, unobservable };
    Ok(emit(cli.format, &report, |r| {
        let mut out = format!("protocol accurate: {}\n", if r.accurate { "yes" } else { "no" });
        for e in &r.observations {
            let c = &e.comparison;
            let gap = match &c.tv_gap {
                protocheck::update::Gap::Exact(g) => g.to_string(),
                protocheck::update::Gap::Approx(g) => fmt_f64(*g),
            };
            let _ = writeln!(out, "{} ({} rule)", c.observation_name, c.rule);
            let _ = writeln!(out, "  naive:         {}", fmt_posterior(&c.naive_result));
            let _ = writeln!(out, "  sophisticated: {}", fmt_exact(&c.sophisticated_result));
            let _ = writeln!(out, "  agree: {}  tv_gap: {gap}", if c.agree { "yes" } else { "no" });
            fmt_car(&e.car, &mut out);
        }
        for name in &r.unobservable {
            let _ = writeln!(out, "{name}: never observed");
        }
        out
    }))
}

fn construct(cli: &Cli, file: &PathBuf) -> Result<String, Failure> {
    let text = std::fs::read_to_string(file).map_err(|e| usage(format!("{}: {e}", file.display())))?;
    let spec: ConstructSpec = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", file.display())))?;
    let space = WorldSet::new(spec.worlds.iter().cloned()).map_err(input)?;
    let cells = spec
        .cells
        .iter()
        .map(|c| space.event(c))
        .collect::<Result<Vec<Event>, _>>()
        .map_err(input)?;
    let conditionals = spec
        .conditionals
        .iter()
        .map(|m| {
            let mut mass = vec![Rational::zero(); space.len()];
            for (label, v) in m {
                mass[space.index_of(label)?] = v.clone();
            }
            NaiveDistribution::new(space.clone(), mass)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(input)?;
    let p = construct_car_joint(&space, &cells, &spec.pr_o, &spec.alphas, &conditionals).map_err(input)?;
    let (indices, _) = observable(&p);
    let car = indices.iter().map(|&o| check_generalized_car(&p, o)).collect::<Result<Vec<_>, _>>().map_err(computed)?;
    let report = ConstructReport { scenario: ScenarioFile::from_protocol(&p), car };
    Ok(emit(cli.format, &report, |r| {
        let mut out = r.scenario.to_json();
        out.push('\n');
        for c in &r.car {
            fmt_car(c, &mut out);
        }
        out
    }))
}

fn fixed_point(cli: &Cli, source: &Source, seed: u64, restarts: usize) -> Result<String, Failure> {
    let s = load(source)?;
    let p = protocol_of(&s, "fixed-point")?;
    let opts = SolverOptions { tol: cli.tol, restarts, ..SolverOptions::default() };
    opts.validate().map_err(input)?;
    let lambdas: Vec<f64> = p.marginal_observations().iter().map(Rational::to_f64).collect();
    let observations: Vec<_> = p.alphabet().items().iter().map(Observation::as_constraints).collect();
    let result = mre_car_fixed_point(p.space(), &lambdas, &observations, &opts, seed).map_err(computed)?;
    let report = FixedPointReport { lambdas, seed, result };
    Ok(emit(cli.format, &report, |r| {
        let res = &r.result;
        let mut out = format!(
            "compatible: {}\nresidual: {}\nrestarts used: {}\nbest prior: {}\n",
            if res.compatible { "yes" } else { "no fixed point found" },
            fmt_f64(res.residual),
            res.restarts_used,
            fmt_float(res.best_prior.space().labels(), res.best_prior.masses())
        );
        if let Some(c) = &res.certificate {
            let _ = writeln!(
                out,
                "certificate: accuracy residual {}, max gap {}, verified {}",
                fmt_f64(c.accuracy_residual),
                fmt_f64(c.max_gap),
                if c.verified { "yes" } else { "no" }
            );
        }
        out
    }))
}

fn simulate(cli: &Cli, source: &Source, seed: u64, samples: usize) -> Result<String, Failure> {
    if samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    let s = load(source)?;
    let p = protocol_of(&s, "simulate")?;
    let runs = p.sample_runs(seed, samples);
    let n = p.space().len();
    let mut counts = vec![vec![0usize; n]; p.alphabet().len()];
    for r in &runs {
        counts[r.observation][r.world] += 1;
    }
    let marginal = p.marginal_observations();
    let mut observations = Vec::new();
    for (o, row) in counts.iter().enumerate() {
        let count: usize = row.iter().sum();
        let empirical: Vec<f64> =
            row.iter().map(|&c| if count == 0 { 0.0 } else { c as f64 / count as f64 }).collect();
        let exact = if marginal[o].is_zero() { None } else { Some(p.sophisticated_posterior(o).map_err(computed)?) };
        let max_deviation = match (&exact, count) {
            (Some(d), c) if c > 0 => {
                d.masses().iter().zip(&empirical).map(|(a, b)| (a.to_f64() - b).abs()).fold(0.0, f64::max)
            }
            _ => 0.0,
        };
        observations.push(SimulatedObservation {
            name: p.alphabet().name(o).to_string(),
            count,
            empirical_probability: count as f64 / samples as f64,
            exact_probability: marginal[o].clone(),
            empirical_posterior: empirical,
            exact_posterior: exact,
            max_deviation,
        });
    }
    let max_deviation = observations.iter().map(|o| o.max_deviation).fold(0.0, f64::max);
    let report = SimulateReport { seed, samples, sampler: SAMPLER_ALGORITHM.to_string(), observations, max_deviation };
    Ok(emit(cli.format, &report, |r| {
        let mut out = format!("{} runs, seed {}, sampler {}\n", r.samples, r.seed, r.sampler);
        for o in &r.observations {
            let _ = writeln!(
                out,
                "{}: {} runs (frequency {}, exact {})",
                o.name,
                o.count,
                fmt_f64(o.empirical_probability),
                o.exact_probability
            );
            if let Some(d) = &o.exact_posterior {
                let _ = writeln!(out, "  empirical: {}", fmt_float(p.space().labels(), &o.empirical_posterior));
                let _ = writeln!(out, "  exact:     {}", fmt_exact(d));
            }
        }
        let _ = writeln!(out, "max deviation: {}", fmt_f64(r.max_deviation));
        out
    }))
}

fn scenario(source: &Source) -> Result<String, Failure> {
    let s = load(source)?;
    let file = match &s.protocol {
        Some(p) => ScenarioFile::from_protocol(p),
        None => ScenarioFile::from_prior(&s.prior, &s.alphabet),
    };
    Ok(file.to_json() + "\n")
}

pub fn run(cli: &Cli) -> Outcome {
    let result = match &cli.command {
        Command::Update { source, obs, rule } => update(cli, source, obs.as_deref(), *rule),
        Command::CheckCar { source, obs } => check_car_verb(cli, source, obs.as_deref()),
        Command::Audit { source } => audit(cli, source),
        Command::Construct { file } => construct(cli, file),
        Command::FixedPoint { source, seed, restarts } => fixed_point(cli, source, *seed, *restarts),
        Command::Simulate { source, seed, samples } => simulate(cli, source, *seed, *samples),
        Command::Scenario { source } => scenario(source),
    };
    match result {
        Ok(stdout) => Outcome { code: EXIT_OK, stdout, stderr: String::new() },
        Err(f) => Outcome { code: f.code, stdout: String::new(), stderr: format!("error: {}\n", f.message) },
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => {
            if !(cli.tol.is_finite() && cli.tol > 0.0) {
                return Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: "error: --tol must be positive\n".into() };
            }
            run(&cli)
        }
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: text }
            } else {
                Outcome { code: EXIT_OK, stdout: text, stderr: String::new() }
            }
        }
    }
}
