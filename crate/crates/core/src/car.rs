//! Coarsening at random (CAR) and its generalizations as executable checks.
//!
//! * [`check_car`]: for an event observation `U`, naive conditioning on `U`
//!   matches conditioning the joint exactly when `Pr(X_O = U | X_W = w)` is
//!   the same for every supported `w ∈ U`. Both sides of that equivalence are
//!   computed independently on every call.
//! * [`check_generalized_car`]: the Jeffrey analogue, with the kernel
//!   constant inside each cell of the partition.
//! * [`car_feasible_support`] / [`classify_three`]: exact LP decisions of
//!   whether any CAR mechanism exists for a given support.
//! * [`construct_car_joint`]: a joint satisfying generalized CAR for any
//!   positive distribution over Jeffrey observations on one partition.
//! * [`thm43_check`] and [`mre_car_fixed_point`]: the MRE side, where
//!   agreement with conditioning is the exception.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{tv_distance_f64, Event, FloatDistribution, NaiveDistribution, WorldSet};
use crate::error::{Error, Result};
use crate::lp::{LpOutcome, StandardForm};
use crate::mre::{
    is_jeffrey_like, maximal_support, to_linear_constraints, JeffreyLikeVerdict, LinearConstraintSet, MreSolver,
    SolverOptions,
};
use crate::protocol::{ConstraintObservation, JeffreyObservation, Observation, ObservationAlphabet, Protocol};
use crate::rational::Rational;
use crate::update::{compare, jeffrey_update, UpdateRule};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelValue {
    pub world: String,
    pub value: Rational,
}

/// Two supported worlds in the same cell with different observation probabilities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarWitness {
    pub first: KernelValue,
    pub second: KernelValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarReport {
    pub observation: usize,
    pub observation_name: String,
    pub holds: bool,
    /// `Pr(X_O = o | X_W = w)` for supported worlds inside the observation's set(s).
    pub kernel_values: Vec<KernelValue>,
    pub witness: Option<CarWitness>,
    /// Verdict of the independent posterior comparison.
    pub posterior_check: bool,
}

/// Per observation, the worlds where it occurs with positive probability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedSupport {
    pub supports: Vec<Event>,
}

impl ObservedSupport {
    pub fn pairwise_disjoint(&self) -> bool {
        let mut seen = Event::empty();
        for s in &self.supports {
            if !s.is_disjoint(seen) {
                return false;
            }
            seen = seen.union(*s);
        }
        true
    }
}

pub fn observed_supports(p: &Protocol) -> ObservedSupport {
    let supports = (0..p.alphabet().len())
        .map(|o| Event::from_indices((0..p.space().len()).filter(|&w| p.mass(w, o).is_positive())))
        .collect();
    ObservedSupport { supports }
}

fn ensure_checkable(p: &Protocol, o: usize) -> Result<()> {
    if p.observation_probability(o)?.is_zero() {
        return Err(Error::UnobservableObservation(o));
    }
    if !p.validate_accuracy().ok_for(o) {
        return Err(Error::AccuracyViolation(o));
    }
    Ok(())
}

/// Kernel values per cell and the lexicographically first unequal pair
/// `(w, w′)` within one cell, by world order.
fn kernel_constancy(p: &Protocol, o: usize, cells: &[Event]) -> (Vec<KernelValue>, Option<CarWitness>) {
    let column = p.kernel_column(o);
    let label = |w: usize| p.space().label(w).to_string();
    let covered = cells.iter().fold(Event::empty(), |acc, c| acc.union(*c));
    let kernel_values = (0..p.space().len())
        .filter(|&w| covered.contains(w))
        .filter_map(|w| column[w].clone().map(|value| KernelValue { world: label(w), value }))
        .collect();
    let mut witness = None;
    'outer: for w in 0..p.space().len() {
        let Some(cell) = cells.iter().find(|c| c.contains(w)) else { continue };
        let Some(vw) = &column[w] else { continue };
        for w2 in (w + 1)..p.space().len() {
            if !cell.contains(w2) {
                continue;
            }
            if let Some(v2) = &column[w2] {
                if v2 != vw {
                    witness = Some(CarWitness {
                        first: KernelValue { world: label(w), value: vw.clone() },
                        second: KernelValue { world: label(w2), value: v2.clone() },
                    });
                    break 'outer;
                }
            }
        }
    }
    (kernel_values, witness)
}

/// CAR for an event observation.
pub fn check_car(p: &Protocol, o: usize) -> Result<CarReport> {
    let Observation::Event(e) = p.observation(o)? else {
        return Err(Error::WrongAlphabetShape("check_car needs an event observation".into()));
    };
    ensure_checkable(p, o)?;
    let (kernel_values, witness) = kernel_constancy(p, o, &[e.set()]);
    let holds = witness.is_none();
    let posterior_check = p.sophisticated_posterior(o)? == p.marginal_worlds().condition(e.set())?;
    if holds != posterior_check {
        return Err(Error::InconsistentCarVerdict(o));
    }
    Ok(CarReport {
        observation: o,
        observation_name: p.alphabet().name(o).to_string(),
        holds,
        kernel_values,
        witness,
        posterior_check,
    })
}

/// Generalized CAR for a Jeffrey observation: the kernel is constant within
/// each cell on the support.
pub fn check_generalized_car(p: &Protocol, o: usize) -> Result<CarReport> {
    let Observation::Jeffrey(j) = p.observation(o)? else {
        return Err(Error::WrongAlphabetShape("check_generalized_car needs a Jeffrey observation".into()));
    };
    ensure_checkable(p, o)?;
    let (kernel_values, witness) = kernel_constancy(p, o, j.cells());
    let holds = witness.is_none();
    let posterior_check = p.sophisticated_posterior(o)? == jeffrey_update(&p.marginal_worlds(), j)?;
    if holds != posterior_check {
        return Err(Error::InconsistentCarVerdict(o));
    }
    Ok(CarReport {
        observation: o,
        observation_name: p.alphabet().name(o).to_string(),
        holds,
        kernel_values,
        witness,
        posterior_check,
    })
}

/// Runs whichever CAR check matches the observation kind.
pub fn check_any(p: &Protocol, o: usize) -> Result<CarReport> {
    match p.observation(o)? {
        Observation::Event(_) => check_car(p, o),
        Observation::Jeffrey(_) => check_generalized_car(p, o),
        Observation::Constraint(_) => Err(Error::WrongAlphabetShape(
            "CAR checks apply to event and Jeffrey observations".into(),
        )),
    }
}

/// Whether CAR holds for every observation under every distribution with
/// the same positive runs.
///
/// Disjoint observed supports are necessary but not sufficient: a supported
/// world of `U_i` outside `V_i` has kernel value 0 there. The exact condition
/// is that every supported world of `U_i` lies in `V_i`, and a world with
/// several possible observations is the only supported world of each of its
/// sets. With `U_i ∩ supp = V_i` for all `i` this is pairwise disjointness
/// up to that degenerate case.
pub fn car_guaranteed_for_all_priors(p: &Protocol) -> Result<bool> {
    if p.alphabet().kind() != crate::protocol::ObservationKind::Event {
        return Err(Error::WrongAlphabetShape("event alphabet required".into()));
    }
    let v = observed_supports(p).supports;
    let reached = v.iter().fold(Event::empty(), |acc, s| acc.union(*s));
    let runs = |w: usize| v.iter().filter(|s| s.contains(w)).count();
    for (o, item) in p.alphabet().items().iter().enumerate() {
        let Observation::Event(e) = item else { unreachable!() };
        if v[o].is_empty() {
            continue;
        }
        let covered = e.set().intersection(reached);
        if !covered.is_subset(v[o]) {
            return Ok(false);
        }
        if covered.len() > 1 && v[o].iter().any(|w| runs(w) > 1) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Redistributes mass over the protocol's positive atoms with random integer
/// weights until some CAR check fails. Returns the violating protocol and the
/// number of tries used.
pub fn find_car_violating_joint(p: &Protocol, seed: u64, max_tries: usize) -> Result<Option<(Protocol, usize)>> {
    let atoms: Vec<(usize, usize)> = (0..p.space().len())
        .flat_map(|w| (0..p.alphabet().len()).map(move |o| (w, o)))
        .filter(|&(w, o)| p.mass(w, o).is_positive())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=max_tries {
        let weights: Vec<i64> = atoms.iter().map(|_| rng.random_range(1..=20)).collect();
        let total: i64 = weights.iter().sum();
        let mut joint = vec![vec![Rational::zero(); p.alphabet().len()]; p.space().len()];
        for (&(w, o), &k) in atoms.iter().zip(&weights) {
            joint[w][o] = Rational::new(k, total);
        }
        let candidate = Protocol::new(p.space().clone(), p.alphabet().clone(), joint)?;
        // observations that never occur have no CAR condition
        for o in atoms.iter().map(|&(_, o)| o).collect::<BTreeSet<_>>() {
            if !check_car(&candidate, o)?.holds {
                return Ok(Some((candidate, attempt)));
            }
        }
    }
    Ok(None)
}

/// `c_U` per observation: the probability that a supported world in `U` is
/// coarsened to `U`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseningKernel {
    pub values: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarFeasibility {
    /// A CAR mechanism exists (with every observation strictly positive when required).
    pub feasible: bool,
    /// Witness kernel; when positivity is required this maximizes the smallest entry.
    pub kernel: Option<CoarseningKernel>,
    /// Largest achievable `min_U c_U` when positivity is required.
    pub max_min_kernel: Option<Rational>,
    /// Whether `c_U ≥ 1/D` is achievable for the configured bound `D`.
    pub feasible_at_bound: Option<bool>,
}

pub const DEFAULT_POSITIVITY_DENOMINATOR: i64 = 1_000_000;

/// Decides whether kernel values `c_U ≥ 0` with `Σ_{U∋w} c_U = 1` for every
/// supported `w` exist; with `require_positive`, every observation must also
/// occur with positive probability (`c_U > 0` and `U` meets the support).
pub fn car_feasible_support(
    space: &WorldSet,
    support: Event,
    sets: &[Event],
    require_positive: bool,
) -> Result<CarFeasibility> {
    car_feasible_support_with_bound(space, support, sets, require_positive, DEFAULT_POSITIVITY_DENOMINATOR)
}

pub fn car_feasible_support_with_bound(
    space: &WorldSet,
    support: Event,
    sets: &[Event],
    require_positive: bool,
    denominator: i64,
) -> Result<CarFeasibility> {
    space.check_event(support)?;
    if support.is_empty() {
        return Err(Error::InvalidDistribution("empty support".into()));
    }
    for w in support.iter() {
        if !sets.iter().any(|u| u.contains(w)) {
            return Err(Error::UncoveredWorld(space.label(w).to_string()));
        }
    }
    let n = sets.len();
    // one row per distinct membership pattern among supported worlds
    let mut patterns: Vec<Vec<bool>> = Vec::new();
    for w in support.iter() {
        let pat: Vec<bool> = sets.iter().map(|u| u.contains(w)).collect();
        if !patterns.contains(&pat) {
            patterns.push(pat);
        }
    }
    let indicator = |pat: &[bool]| -> Vec<Rational> {
        pat.iter().map(|&b| if b { Rational::one() } else { Rational::zero() }).collect()
    };
    let infeasible = CarFeasibility {
        feasible: false,
        kernel: None,
        max_min_kernel: require_positive.then(Rational::zero),
        feasible_at_bound: require_positive.then_some(false),
    };
    if !require_positive {
        let mut lp = StandardForm::new(n);
        for pat in &patterns {
            lp.add_row(indicator(pat), Rational::one());
        }
        return Ok(match lp.feasible_point() {
            Some(values) => CarFeasibility {
                feasible: true,
                kernel: Some(CoarseningKernel { values }),
                max_min_kernel: None,
                feasible_at_bound: None,
            },
            None => infeasible,
        });
    }
    if sets.iter().any(|u| u.is_disjoint(support)) {
        return Ok(infeasible);
    }
    // variables: c_1..c_n, t, s_1..s_n, s_t
    // maximize t subject to c_i − t − s_i = 0, t + s_t = 1
    let width = 2 * n + 2;
    let t = n;
    let mut lp = StandardForm::new(width);
    for pat in &patterns {
        let mut row = indicator(pat);
        row.resize(width, Rational::zero());
        lp.add_row(row, Rational::one());
    }
    for i in 0..n {
        let mut row = vec![Rational::zero(); width];
        row[i] = Rational::one();
        row[t] = -Rational::one();
        row[n + 1 + i] = -Rational::one();
        lp.add_row(row, Rational::zero());
    }
    let mut cap = vec![Rational::zero(); width];
    cap[t] = Rational::one();
    cap[width - 1] = Rational::one();
    lp.add_row(cap, Rational::one());
    let mut objective = vec![Rational::zero(); width];
    objective[t] = Rational::one();
    match lp.maximize(&objective) {
        LpOutcome::Optimal { x, value } if value.is_positive() => Ok(CarFeasibility {
            feasible: true,
            kernel: Some(CoarseningKernel { values: x[..n].to_vec() }),
            feasible_at_bound: Some(value >= Rational::new(1, denominator)),
            max_min_kernel: Some(value),
        }),
        LpOutcome::Optimal { .. } | LpOutcome::Infeasible => Ok(infeasible),
        LpOutcome::Unbounded => unreachable!("t is capped at 1"),
    }
}

/// Support-pattern classes for three event observations that all occur
/// with positive probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseLabel {
    /// support inside `U₁ ∩ U₂ ∩ U₃`
    A,
    /// every supported world lies in exactly two of the sets
    B,
    /// every supported world lies in exactly one of the sets
    C,
    /// support inside `(Uᵢ only) ∪ (Uⱼ ∩ Uₖ only)` for some `i`
    D,
    Infeasible,
}

/// Classifies the support of three positive event observations.
///
/// `Infeasible` exactly when the exact LP finds no CAR mechanism; feasible
/// supports are labelled by their Venn-region pattern.
pub fn classify_three(space: &WorldSet, support: Event, sets: [Event; 3]) -> Result<CaseLabel> {
    let lp = car_feasible_support(space, support, &sets, true)?;
    if !lp.feasible {
        return Ok(CaseLabel::Infeasible);
    }
    let membership = |w: usize| -> [bool; 3] { [sets[0].contains(w), sets[1].contains(w), sets[2].contains(w)] };
    let count = |m: [bool; 3]| m.iter().filter(|&&b| b).count();
    let worlds: Vec<[bool; 3]> = support.iter().map(membership).collect();
    if worlds.iter().all(|&m| count(m) == 3) {
        return Ok(CaseLabel::A);
    }
    if worlds.iter().all(|&m| count(m) == 2) {
        return Ok(CaseLabel::B);
    }
    if worlds.iter().all(|&m| count(m) == 1) {
        return Ok(CaseLabel::C);
    }
    for i in 0..3 {
        let only_i = |m: [bool; 3]| count(m) == 1 && m[i];
        let pair_without_i = |m: [bool; 3]| count(m) == 2 && !m[i];
        if worlds.iter().all(|&m| only_i(m) || pair_without_i(m)) {
            return Ok(CaseLabel::D);
        }
    }
    // every feasible pattern falls in one of the four classes
    Err(Error::InconsistentCarVerdict(usize::MAX))
}

/// Jeffrey observations `C_i = α_{i1}U_1; …; α_{in}U_n` over one partition,
/// generated by: pick `C_i` with probability `pr_o[i]`, then cell `U_j` with
/// probability `α_{ij}`, then a world from `conditionals[j]`.
pub fn construct_car_joint(
    space: &WorldSet,
    cells: &[Event],
    pr_o: &[Rational],
    alphas: &[Vec<Rational>],
    conditionals: &[NaiveDistribution],
) -> Result<Protocol> {
    let k = pr_o.len();
    let n = cells.len();
    if k == 0 || alphas.len() != k {
        return Err(Error::InvalidAlphas(format!("{} alpha rows for {k} observations", alphas.len())));
    }
    if pr_o.iter().any(|p| !p.is_positive()) || !pr_o.iter().sum::<Rational>().is_one() {
        return Err(Error::InvalidDistribution("observation probabilities must be positive and sum to 1".into()));
    }
    for (i, row) in alphas.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidAlphas(format!("row {i} has {} entries for {n} cells", row.len())));
        }
        if row.iter().any(|a| !a.is_positive()) {
            return Err(Error::InvalidAlphas(format!("row {i} has a non-positive entry")));
        }
        let s: Rational = row.iter().sum();
        if !s.is_one() {
            return Err(Error::InvalidAlphas(format!("row {i} sums to {s}")));
        }
    }
    if conditionals.len() != n {
        return Err(Error::InvalidDistribution(format!("{} conditionals for {n} cells", conditionals.len())));
    }
    for (j, c) in conditionals.iter().enumerate() {
        if c.space() != space {
            return Err(Error::SpaceMismatch);
        }
        if !c.prob(cells[j]).is_one() {
            return Err(Error::ConditionalOutsideCell(j));
        }
    }
    let items = alphas
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok((format!("C{}", i + 1), Observation::Jeffrey(JeffreyObservation::new(space, cells.to_vec(), row.clone())?)))
        })
        .collect::<Result<Vec<_>>>()?;
    let alphabet = ObservationAlphabet::new(items)?;
    let joint = (0..space.len())
        .map(|w| {
            let j = cells.iter().position(|c| c.contains(w)).expect("partition");
            (0..k).map(|i| &pr_o[i] * &alphas[i][j] * conditionals[j].mass(w)).collect()
        })
        .collect();
    let p = Protocol::new(space.clone(), alphabet, joint)?;
    assert!(p.validate_accuracy().ok(), "product construction is accurate");
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm43Report {
    /// The four Venn regions of `U₁, U₂` are nonempty.
    pub regions_nonempty: bool,
    /// Every target lies strictly between 0 and 1.
    pub alphas_interior: bool,
    pub preconditions_met: bool,
    /// Jeffrey-like verdict of each observation with respect to the world marginal.
    pub jeffrey_like: Vec<JeffreyLikeVerdict>,
    /// TV distance between the MRE update of the world marginal and the
    /// sophisticated posterior, per observation.
    pub discrepancies: Vec<f64>,
    /// When the preconditions hold and some observation is not Jeffrey-like:
    /// whether both discrepancies exceed the solver tolerance.
    pub strict_gap_confirmed: Option<bool>,
}

/// The two shared sets of a two-observation constraint alphabet.
fn shared_pair(p: &Protocol) -> Result<(Event, Event, Vec<[Rational; 2]>)> {
    let shape = || Error::WrongAlphabetShape("need two constraint observations over the same two sets".into());
    if p.alphabet().len() != 2 {
        return Err(shape());
    }
    let mut sets: Option<(Event, Event)> = None;
    let mut alphas = Vec::new();
    for o in p.alphabet().items() {
        let Observation::Constraint(c) = o else { return Err(shape()) };
        let terms = c.probability_terms();
        if c.has_odds() || terms.len() != 2 {
            return Err(shape());
        }
        let pair = (terms[0].0, terms[1].0);
        match sets {
            None => sets = Some(pair),
            Some(s) if s == pair => {}
            Some(_) => return Err(shape()),
        }
        alphas.push([terms[0].1.clone(), terms[1].1.clone()]);
    }
    let (u1, u2) = sets.expect("two observations");
    Ok((u1, u2, alphas))
}

/// MRE versus sophisticated conditioning for two observations
/// `C_i = α_{i1}U₁; α_{i2}U₂`.
pub fn thm43_check(p: &Protocol, opts: &SolverOptions) -> Result<Thm43Report> {
    let (u1, u2, alphas) = shared_pair(p)?;
    for o in 0..2 {
        if p.observation_probability(o)?.is_zero() {
            return Err(Error::UnobservableObservation(o));
        }
    }
    let full = p.space().full();
    let regions_nonempty = [u1.difference(u2), u1.intersection(u2), u2.difference(u1), full.difference(u1.union(u2))]
        .iter()
        .all(|r| !r.is_empty());
    let alphas_interior = alphas.iter().flatten().all(|a| a.is_positive() && a < &Rational::one());
    let preconditions_met = regions_nonempty && alphas_interior;
    let marginal = p.marginal_worlds();
    let mut jeffrey_like = Vec::new();
    let mut discrepancies = Vec::new();
    for o in 0..2 {
        let Observation::Constraint(c) = p.observation(o)? else { unreachable!() };
        jeffrey_like.push(is_jeffrey_like(&marginal, c, opts)?);
        discrepancies.push(compare(p, o, UpdateRule::Mre, opts)?.tv_gap_f64);
    }
    let strict_gap_confirmed = (preconditions_met && jeffrey_like.iter().any(|v| !v.jeffrey_like))
        .then(|| discrepancies.iter().all(|&g| g > opts.tol));
    Ok(Thm43Report {
        regions_nonempty,
        alphas_interior,
        preconditions_met,
        jeffrey_like,
        discrepancies,
        strict_gap_confirmed,
    })
}

/// Checks of the joint `λ_i · MRE(Q, C_i)` induced by a fixed point `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointCertificate {
    /// Largest violation of any observation's constraints under its posterior.
    pub accuracy_residual: f64,
    /// Largest TV gap between the MRE update of the induced world marginal
    /// and the induced posterior.
    pub max_gap: f64,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub compatible: bool,
    pub best_prior: FloatDistribution,
    /// `tv(Q, Σ_i λ_i·MRE(Q, C_i))` at the best point found.
    pub residual: f64,
    pub restarts_used: usize,
    pub certificate: Option<FixedPointCertificate>,
}

/// Sum of `λ_i · MRE(q, C_i)` together with the individual projections.
/// `warm` carries dual weights between calls.
fn mixture_map(
    solvers: &[MreSolver],
    lambdas: &[f64],
    q: &[f64],
    warm: &mut [Vec<f64>],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut out = vec![0.0; q.len()];
    let mut parts = Vec::with_capacity(solvers.len());
    for ((s, &l), start) in solvers.iter().zip(lambdas).zip(warm.iter_mut()) {
        let sol = s.solve_from(q, start, opts)?;
        *start = sol.dual_weights;
        let post = sol.posterior.masses().to_vec();
        for (o, p) in out.iter_mut().zip(&post) {
            *o += l * p;
        }
        parts.push(post);
    }
    Ok((out, parts))
}

fn certify(
    solvers: &[MreSolver],
    sets: &[LinearConstraintSet],
    lambdas: &[f64],
    q: &[f64],
    opts: &SolverOptions,
) -> Result<FixedPointCertificate> {
    let mut warm = vec![Vec::new(); solvers.len()];
    let (marginal, parts) = mixture_map(solvers, lambdas, q, &mut warm, opts)?;
    let accuracy_residual = sets
        .iter()
        .zip(&parts)
        .map(|(cs, post)| cs.residual(post))
        .fold(0.0, f64::max);
    let (_, naive) = mixture_map(solvers, lambdas, &marginal, &mut warm, opts)?;
    let max_gap = naive
        .iter()
        .zip(&parts)
        .map(|(a, b)| tv_distance_f64(a, b))
        .fold(0.0, f64::max);
    Ok(FixedPointCertificate {
        accuracy_residual,
        max_gap,
        verified: accuracy_residual <= opts.tol && max_gap <= 2.0 * opts.tol,
    })
}

/// Multi-start damped iteration `Q ← (1−η)Q + η·Σ_i λ_i·MRE(Q, C_i)` looking
/// for a prior whose MRE updates coincide with conditioning the joint they
/// induce. Restart `r` starts from a random prior seeded with `seed + r`.
///
/// `compatible = false` means no fixed point was found, not that none exists.
pub fn mre_car_fixed_point(
    space: &WorldSet,
    lambdas: &[f64],
    observations: &[ConstraintObservation],
    opts: &SolverOptions,
    seed: u64,
) -> Result<FixedPointResult> {
    opts.validate()?;
    if lambdas.len() != observations.len() || lambdas.is_empty() {
        return Err(Error::WrongAlphabetShape(format!(
            "{} weights for {} observations",
            lambdas.len(),
            observations.len()
        )));
    }
    if lambdas.iter().any(|&l| l.is_nan() || l < 0.0) || (lambdas.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidDistribution("weights must lie in the unit simplex".into()));
    }
    let full = space.full();
    let sets: Vec<LinearConstraintSet> = observations.iter().map(|o| to_linear_constraints(space, o)).collect();
    let mut solvers = Vec::with_capacity(sets.len());
    for cs in &sets {
        let (support, _) = maximal_support(full, cs).ok_or(Error::Infeasible)?;
        solvers.push(MreSolver::new(cs.clone(), full, support));
    }
    let n = space.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut restarts_used = 0;
    for r in 0..opts.restarts {
        restarts_used = r + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let mut q: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = q.iter().sum();
        q.iter_mut().for_each(|x| *x /= total);
        let (residual, point) = iterate_fixed_point(&solvers, lambdas, q, opts)?;
        if best.as_ref().is_none_or(|(b, _)| residual < *b) {
            best = Some((residual, point));
        }
        if residual <= opts.tol {
            break;
        }
    }
    let (residual, q) = best.expect("at least one restart");
    let certificate = if residual <= opts.tol {
        Some(certify(&solvers, &sets, lambdas, &q, opts)?)
    } else {
        None
    };
    Ok(FixedPointResult {
        compatible: certificate.as_ref().is_some_and(|c| c.verified),
        best_prior: FloatDistribution::new(space.clone(), q),
        residual,
        restarts_used,
        certificate,
    })
}

const DAMPING: f64 = 0.5;
/// A restart is abandoned when its residual shrank by less than 1% over this many steps.
const STALL_WINDOW: usize = 200;

fn iterate_fixed_point(
    solvers: &[MreSolver],
    lambdas: &[f64],
    mut q: Vec<f64>,
    opts: &SolverOptions,
) -> Result<(f64, Vec<f64>)> {
    let mut warm = vec![Vec::new(); solvers.len()];
    let mut best = (f64::INFINITY, q.clone());
    let mut history = Vec::with_capacity(opts.max_iters.min(1 << 16));
    for it in 0..opts.max_iters {
        let (image, _) = mixture_map(solvers, lambdas, &q, &mut warm, opts)?;
        let residual = tv_distance_f64(&q, &image);
        if residual < best.0 {
            best = (residual, q.clone());
        }
        if residual <= opts.tol {
            break;
        }
        history.push(residual);
        if it >= STALL_WINDOW && residual > 0.99 * history[it - STALL_WINDOW] {
            break;
        }
        for (x, y) in q.iter_mut().zip(&image) {
            *x = (1.0 - DAMPING) * *x + DAMPING * y;
        }
    }
    Ok(best)
}
