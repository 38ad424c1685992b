//! The sophisticated space: a joint distribution over (world, observation)
//! pairs, with accuracy validation, marginals, posteriors and run sampling.
//!
//! Runs have exactly one observation, so a run is a `(world, observation)`
//! pair and the prior over runs is a `|W| × |O|` table of exact masses.

use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Event, NaiveDistribution, WorldSet};
use crate::error::{Error, Result};
use crate::rational::Rational;

/// "The actual world is in `set`."
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventObservation {
    set: Event,
}

impl EventObservation {
    pub fn new(space: &WorldSet, set: Event) -> Result<Self> {
        space.check_event(set)?;
        if set.is_empty() {
            return Err(Error::InvalidObservation("event observation with empty set".into()));
        }
        Ok(EventObservation { set })
    }

    pub fn set(&self) -> Event {
        self.set
    }
}

/// `α₁U₁; …; αₙUₙ` over a partition of the world set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JeffreyObservation {
    cells: Vec<Event>,
    weights: Vec<Rational>,
}

impl JeffreyObservation {
    pub fn new(space: &WorldSet, cells: Vec<Event>, weights: Vec<Rational>) -> Result<Self> {
        if cells.is_empty() || cells.len() != weights.len() {
            return Err(Error::InvalidObservation(format!(
                "{} cells with {} weights",
                cells.len(),
                weights.len()
            )));
        }
        check_partition(space, &cells)
            .map_err(|e| Error::InvalidObservation(format!("cells are not a partition: {e}")))?;
        if let Some(w) = weights.iter().find(|w| w.is_negative()) {
            return Err(Error::InvalidObservation(format!("negative weight {w}")));
        }
        let total: Rational = weights.iter().sum();
        if !total.is_one() {
            return Err(Error::InvalidObservation(format!("weights sum to {total}")));
        }
        Ok(JeffreyObservation { cells, weights })
    }

    pub fn cells(&self) -> &[Event] {
        &self.cells
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    /// Index of the cell containing `world`.
    pub fn cell_of(&self, world: usize) -> usize {
        self.cells
            .iter()
            .position(|c| c.contains(world))
            .expect("partition covers every world")
    }
}

/// Checks that `cells` are nonempty, pairwise disjoint, and cover `space`.
pub(crate) fn check_partition(space: &WorldSet, cells: &[Event]) -> std::result::Result<(), String> {
    let mut seen = Event::empty();
    for c in cells {
        if c.is_empty() {
            return Err("empty cell".into());
        }
        if !c.is_subset(space.full()) {
            return Err("cell outside the world set".into());
        }
        if !c.is_disjoint(seen) {
            return Err("overlapping cells".into());
        }
        seen = seen.union(*c);
    }
    if seen != space.full() {
        return Err("cells do not cover the world set".into());
    }
    Ok(())
}

/// One linear constraint carried by a [`ConstraintObservation`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ConstraintTerm {
    /// `Pr(set) = target`
    Probability { set: Event, target: Rational },
    /// `Pr(numerator) = ratio · Pr(denominator)`, i.e. odds of `ratio : 1`.
    Odds {
        numerator: Event,
        denominator: Event,
        ratio: Rational,
    },
}

/// `α₁U₁; …; αₙUₙ` with arbitrary (possibly overlapping, non-covering) sets,
/// optionally extended with conditional-odds terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConstraintObservation {
    terms: Vec<ConstraintTerm>,
}

impl ConstraintObservation {
    pub fn new(space: &WorldSet, terms: Vec<ConstraintTerm>) -> Result<Self> {
        for (i, t) in terms.iter().enumerate() {
            match t {
                ConstraintTerm::Probability { set, target } => {
                    space.check_event(*set)?;
                    if set.is_empty() {
                        return Err(Error::InvalidObservation("constraint on an empty set".into()));
                    }
                    if !target.is_probability() {
                        return Err(Error::InvalidObservation(format!("target {target} outside [0,1]")));
                    }
                }
                ConstraintTerm::Odds { numerator, denominator, ratio } => {
                    space.check_event(*numerator)?;
                    space.check_event(*denominator)?;
                    if numerator.is_empty() || denominator.is_empty() {
                        return Err(Error::InvalidObservation("odds term on an empty set".into()));
                    }
                    if ratio.is_negative() {
                        return Err(Error::InvalidObservation(format!("negative odds ratio {ratio}")));
                    }
                }
            }
            if terms[..i].contains(t) {
                return Err(Error::InvalidObservation("duplicate constraint term".into()));
            }
        }
        Ok(ConstraintObservation { terms })
    }

    /// Probability-only observation from parallel `sets` and `targets`.
    pub fn from_sets(space: &WorldSet, sets: Vec<Event>, targets: Vec<Rational>) -> Result<Self> {
        if sets.len() != targets.len() {
            return Err(Error::InvalidObservation(format!(
                "{} sets with {} targets",
                sets.len(),
                targets.len()
            )));
        }
        let terms = sets
            .into_iter()
            .zip(targets)
            .map(|(set, target)| ConstraintTerm::Probability { set, target })
            .collect();
        ConstraintObservation::new(space, terms)
    }

    pub fn terms(&self) -> &[ConstraintTerm] {
        &self.terms
    }

    /// The `(set, target)` pairs of the probability terms.
    pub fn probability_terms(&self) -> Vec<(Event, Rational)> {
        self.terms
            .iter()
            .filter_map(|t| match t {
                ConstraintTerm::Probability { set, target } => Some((*set, target.clone())),
                ConstraintTerm::Odds { .. } => None,
            })
            .collect()
    }

    pub fn has_odds(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, ConstraintTerm::Odds { .. }))
    }

    /// Whether `d` meets every term exactly.
    pub fn satisfied_by(&self, d: &NaiveDistribution) -> bool {
        self.terms.iter().all(|t| match t {
            ConstraintTerm::Probability { set, target } => &d.prob(*set) == target,
            ConstraintTerm::Odds { numerator, denominator, ratio } => {
                d.prob(*numerator) == ratio * d.prob(*denominator)
            }
        })
    }
}

impl From<&JeffreyObservation> for ConstraintObservation {
    fn from(j: &JeffreyObservation) -> Self {
        ConstraintObservation {
            terms: j
                .cells
                .iter()
                .zip(&j.weights)
                .map(|(c, w)| ConstraintTerm::Probability { set: *c, target: w.clone() })
                .collect(),
        }
    }
}

impl From<&EventObservation> for ConstraintObservation {
    fn from(e: &EventObservation) -> Self {
        ConstraintObservation {
            terms: vec![ConstraintTerm::Probability { set: e.set, target: Rational::one() }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Observation {
    Event(EventObservation),
    Jeffrey(JeffreyObservation),
    Constraint(ConstraintObservation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservationKind {
    Event,
    Jeffrey,
    Constraint,
}

impl fmt::Display for ObservationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObservationKind::Event => "event",
            ObservationKind::Jeffrey => "jeffrey",
            ObservationKind::Constraint => "constraint",
        })
    }
}

impl Observation {
    pub fn kind(&self) -> ObservationKind {
        match self {
            Observation::Event(_) => ObservationKind::Event,
            Observation::Jeffrey(_) => ObservationKind::Jeffrey,
            Observation::Constraint(_) => ObservationKind::Constraint,
        }
    }

    /// The observation viewed as a set of linear constraints.
    pub fn as_constraints(&self) -> ConstraintObservation {
        match self {
            Observation::Event(e) => e.into(),
            Observation::Jeffrey(j) => j.into(),
            Observation::Constraint(c) => c.clone(),
        }
    }
}

/// The set `O` of possible observations, each with a display name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationAlphabet {
    names: Vec<String>,
    items: Vec<Observation>,
}

impl ObservationAlphabet {
    pub fn new(items: Vec<(String, Observation)>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::WrongAlphabetShape("empty alphabet".into()));
        }
        let (names, items): (Vec<String>, Vec<Observation>) = items.into_iter().unzip();
        for i in 0..items.len() {
            if names[..i].contains(&names[i]) {
                return Err(Error::WrongAlphabetShape(format!("duplicate name `{}`", names[i])));
            }
            if items[..i].contains(&items[i]) {
                return Err(Error::WrongAlphabetShape(format!("`{}` repeats an observation", names[i])));
            }
        }
        let kind = items[0].kind();
        if items.iter().any(|o| o.kind() != kind) {
            return Err(Error::WrongAlphabetShape("mixed observation kinds".into()));
        }
        if let Observation::Jeffrey(first) = &items[0] {
            let same = items.iter().all(|o| match o {
                Observation::Jeffrey(j) => j.cells == first.cells,
                _ => false,
            });
            if !same {
                return Err(Error::WrongAlphabetShape(
                    "Jeffrey observations must share one partition".into(),
                ));
            }
        }
        Ok(ObservationAlphabet { names, items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn kind(&self) -> ObservationKind {
        self.items[0].kind()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, o: usize) -> &str {
        &self.names[o]
    }

    pub fn items(&self) -> &[Observation] {
        &self.items
    }

    pub fn get(&self, o: usize) -> Result<&Observation> {
        self.items.get(o).ok_or_else(|| Error::UnknownObservation(o.to_string()))
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownObservation(name.to_string()))
    }
}

/// A single detected accuracy failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AccuracyViolation {
    /// An event observation co-occurs with a world outside its set.
    WorldOutsideEvent { observation: usize, world: String, mass: Rational },
    /// `Pr(X_W ∈ U_i | X_O = o)` differs from the stated target.
    TargetMismatch {
        observation: usize,
        term: usize,
        expected: Rational,
        actual: Rational,
    },
    /// `Pr(numerator | o) ≠ ratio · Pr(denominator | o)`.
    OddsMismatch {
        observation: usize,
        term: usize,
        numerator_prob: Rational,
        denominator_prob: Rational,
    },
}

impl AccuracyViolation {
    pub fn observation(&self) -> usize {
        match self {
            AccuracyViolation::WorldOutsideEvent { observation, .. }
            | AccuracyViolation::TargetMismatch { observation, .. }
            | AccuracyViolation::OddsMismatch { observation, .. } => *observation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub violations: Vec<AccuracyViolation>,
}

impl AccuracyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn ok_for(&self, observation: usize) -> bool {
        self.violations.iter().all(|v| v.observation() != observation)
    }
}

/// One sampled run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunSample {
    pub world: usize,
    pub observation: usize,
}

/// Identifier of the run sampler; stored in simulation reports.
pub const SAMPLER_ALGORITHM: &str = "chacha8-stream-per-index/u64-threshold/v1";

/// A joint distribution over `W × O`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Protocol {
    space: WorldSet,
    alphabet: ObservationAlphabet,
    /// `joint[w][o]`
    joint: Vec<Vec<Rational>>,
}

impl Protocol {
    pub fn new(space: WorldSet, alphabet: ObservationAlphabet, joint: Vec<Vec<Rational>>) -> Result<Self> {
        if joint.len() != space.len() || joint.iter().any(|row| row.len() != alphabet.len()) {
            return Err(Error::InvalidDistribution("joint table has the wrong shape".into()));
        }
        if joint.iter().flatten().any(Rational::is_negative) {
            return Err(Error::InvalidDistribution("negative joint mass".into()));
        }
        let total: Rational = joint.iter().flatten().sum();
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!("joint sums to {total}")));
        }
        Ok(Protocol { space, alphabet, joint })
    }

    /// `joint(w, o) = prior(w) · kernel[w][o]`.
    pub fn from_kernel(
        prior: &NaiveDistribution,
        alphabet: ObservationAlphabet,
        kernel: &[Vec<Rational>],
    ) -> Result<Self> {
        let space = prior.space().clone();
        if kernel.len() != space.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} kernel rows for {} worlds",
                kernel.len(),
                space.len()
            )));
        }
        let mut joint = Vec::with_capacity(space.len());
        for (w, row) in kernel.iter().enumerate() {
            if row.len() != alphabet.len() {
                return Err(Error::InvalidDistribution(format!(
                    "kernel row `{}` has {} entries for {} observations",
                    space.label(w),
                    row.len(),
                    alphabet.len()
                )));
            }
            if row.iter().any(Rational::is_negative) {
                return Err(Error::InvalidDistribution("negative kernel entry".into()));
            }
            let sum: Rational = row.iter().sum();
            if !sum.is_one() {
                return Err(Error::RowNotNormalized { world: space.label(w).to_string(), sum: sum.to_string() });
            }
            joint.push(row.iter().map(|k| prior.mass(w) * k).collect());
        }
        Ok(Protocol { space, alphabet, joint })
    }

    pub fn space(&self) -> &WorldSet {
        &self.space
    }

    pub fn alphabet(&self) -> &ObservationAlphabet {
        &self.alphabet
    }

    pub fn joint(&self) -> &[Vec<Rational>] {
        &self.joint
    }

    pub fn mass(&self, world: usize, observation: usize) -> &Rational {
        &self.joint[world][observation]
    }

    pub fn observation(&self, o: usize) -> Result<&Observation> {
        self.alphabet.get(o)
    }

    pub fn marginal_worlds(&self) -> NaiveDistribution {
        let mass = self.joint.iter().map(|row| row.iter().sum()).collect();
        NaiveDistribution::new(self.space.clone(), mass).expect("joint sums to one")
    }

    pub fn marginal_observations(&self) -> Vec<Rational> {
        (0..self.alphabet.len())
            .map(|o| self.joint.iter().map(|row| &row[o]).sum())
            .collect()
    }

    pub fn observation_probability(&self, o: usize) -> Result<Rational> {
        self.alphabet.get(o)?;
        Ok(self.joint.iter().map(|row| &row[o]).sum())
    }

    /// `Pr(X_W = · | X_O = o)`.
    pub fn sophisticated_posterior(&self, o: usize) -> Result<NaiveDistribution> {
        let col = self.observation_probability(o)?;
        if col.is_zero() {
            return Err(Error::UnobservableObservation(o));
        }
        let mass = self.joint.iter().map(|row| &row[o] / &col).collect();
        Ok(NaiveDistribution::new(self.space.clone(), mass).expect("column normalizes"))
    }

    /// `Pr(X_O = o | X_W = w)` for each world with positive marginal mass;
    /// `None` off the support.
    pub fn kernel_column(&self, o: usize) -> Vec<Option<Rational>> {
        self.joint
            .iter()
            .map(|row| {
                let m: Rational = row.iter().sum();
                if m.is_zero() {
                    None
                } else {
                    Some(&row[o] / &m)
                }
            })
            .collect()
    }

    /// The protocol conditioned on observing `o`.
    pub fn restrict_to_observation(&self, o: usize) -> Result<Protocol> {
        let col = self.observation_probability(o)?;
        if col.is_zero() {
            return Err(Error::UnobservableObservation(o));
        }
        let joint = self
            .joint
            .iter()
            .map(|row| {
                (0..self.alphabet.len())
                    .map(|j| if j == o { &row[o] / &col } else { Rational::zero() })
                    .collect()
            })
            .collect();
        Ok(Protocol { space: self.space.clone(), alphabet: self.alphabet.clone(), joint })
    }

    /// Exact accuracy check of every observation.
    pub fn validate_accuracy(&self) -> AccuracyReport {
        let mut violations = Vec::new();
        for (o, obs) in self.alphabet.items().iter().enumerate() {
            match obs {
                Observation::Event(e) => {
                    for (w, row) in self.joint.iter().enumerate() {
                        if row[o].is_positive() && !e.set().contains(w) {
                            violations.push(AccuracyViolation::WorldOutsideEvent {
                                observation: o,
                                world: self.space.label(w).to_string(),
                                mass: row[o].clone(),
                            });
                        }
                    }
                }
                Observation::Jeffrey(_) | Observation::Constraint(_) => {
                    let Ok(post) = self.sophisticated_posterior(o) else {
                        continue;
                    };
                    for (t, term) in obs.as_constraints().terms().iter().enumerate() {
                        match term {
                            ConstraintTerm::Probability { set, target } => {
                                let actual = post.prob(*set);
                                if &actual != target {
                                    violations.push(AccuracyViolation::TargetMismatch {
                                        observation: o,
                                        term: t,
                                        expected: target.clone(),
                                        actual,
                                    });
                                }
                            }
                            ConstraintTerm::Odds { numerator, denominator, ratio } => {
                                let n = post.prob(*numerator);
                                let d = post.prob(*denominator);
                                if n != ratio * &d {
                                    violations.push(AccuracyViolation::OddsMismatch {
                                        observation: o,
                                        term: t,
                                        numerator_prob: n,
                                        denominator_prob: d,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        AccuracyReport { violations }
    }

    /// `n` i.i.d. runs. Run `i` depends only on `(seed, i)`.
    pub fn sample_runs(&self, seed: u64, n: usize) -> Vec<RunSample> {
        self.sampler().sample_range(seed, 0..n)
    }

    pub fn sampler(&self) -> RunSampler {
        RunSampler::new(self)
    }
}

/// Inverse-CDF sampler over the positive atoms of a protocol.
///
/// Each atom's cumulative probability is scaled to `2^64` exactly and
/// floored, so a uniform `u64` selects an atom with error at most `2^-64`.
#[derive(Debug, Clone)]
pub struct RunSampler {
    atoms: Vec<RunSample>,
    thresholds: Vec<u128>,
}

impl RunSampler {
    pub fn new(p: &Protocol) -> Self {
        let scale = BigInt::from(1u128 << 64);
        let mut atoms = Vec::new();
        let mut thresholds = Vec::new();
        let mut cum = Rational::zero();
        for (w, row) in p.joint.iter().enumerate() {
            for (o, m) in row.iter().enumerate() {
                if m.is_positive() {
                    cum += m;
                    let scaled = cum.numer() * &scale / cum.denom();
                    atoms.push(RunSample { world: w, observation: o });
                    thresholds.push(scaled.to_u128().expect("cumulative mass at most one"));
                }
            }
        }
        RunSampler { atoms, thresholds }
    }

    pub fn sample_at(&self, seed: u64, index: u64) -> RunSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let u = rng.next_u64() as u128;
        let k = self.thresholds.partition_point(|&t| t <= u);
        self.atoms[k.min(self.atoms.len() - 1)]
    }

    /// Runs `range`; any chunking of `0..n` concatenates to `sample_runs(seed, n)`.
    pub fn sample_range(&self, seed: u64, range: std::ops::Range<usize>) -> Vec<RunSample> {
        range
            .into_par_iter()
            .map(|i| self.sample_at(seed, i as u64))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn prisoners(qb: Rational) -> Protocol {
        let w = WorldSet::new(["w_a", "w_b", "w_c"]).unwrap();
        let alphabet = ObservationAlphabet::new(vec![
            (
                "says-b".into(),
                Observation::Event(EventObservation::new(&w, w.event(&["w_a", "w_c"]).unwrap()).unwrap()),
            ),
            (
                "says-c".into(),
                Observation::Event(EventObservation::new(&w, w.event(&["w_a", "w_b"]).unwrap()).unwrap()),
            ),
        ])
        .unwrap();
        let prior = NaiveDistribution::uniform(w);
        let kernel = vec![
            vec![qb.clone(), Rational::one() - qb],
            vec![q(0, 1), q(1, 1)],
            vec![q(1, 1), q(0, 1)],
        ];
        Protocol::from_kernel(&prior, alphabet, &kernel).unwrap()
    }

    #[test]
    fn from_kernel_atoms() {
        let p = prisoners(q(1, 2));
        assert_eq!(p.mass(0, 0), &q(1, 6));
        assert_eq!(p.mass(0, 1), &q(1, 6));
        assert_eq!(p.mass(1, 1), &q(1, 3));
        assert_eq!(p.mass(2, 0), &q(1, 3));
        assert_eq!(p.joint().iter().flatten().filter(|m| m.is_positive()).count(), 4);
        assert!(p.validate_accuracy().ok());
        assert_eq!(p.marginal_worlds(), NaiveDistribution::uniform(p.space().clone()));
        assert_eq!(p.marginal_observations(), vec![q(1, 2), q(1, 2)]);
    }

    #[test]
    fn kernel_row_must_normalize() {
        let w = WorldSet::numbered(1).unwrap();
        let alphabet = ObservationAlphabet::new(vec![(
            "all".into(),
            Observation::Event(EventObservation::new(&w, w.full()).unwrap()),
        )])
        .unwrap();
        let prior = NaiveDistribution::uniform(w);
        let err = Protocol::from_kernel(&prior, alphabet, &[vec![q(9, 10)]]).unwrap_err();
        assert!(matches!(err, Error::RowNotNormalized { .. }));
    }

    #[test]
    fn posteriors() {
        let p = prisoners(q(1, 2));
        assert_eq!(
            p.sophisticated_posterior(0).unwrap().masses(),
            &[q(1, 3), q(0, 1), q(2, 3)]
        );
        let p1 = prisoners(q(1, 1));
        assert_eq!(
            p1.sophisticated_posterior(0).unwrap().masses(),
            &[q(1, 2), q(0, 1), q(1, 2)]
        );
        assert_eq!(
            p1.sophisticated_posterior(1).unwrap().masses(),
            &[q(0, 1), q(1, 1), q(0, 1)]
        );
    }

    #[test]
    fn unobservable_column() {
        let w = WorldSet::numbered(2).unwrap();
        let alphabet = ObservationAlphabet::new(vec![
            ("one".into(), Observation::Event(EventObservation::new(&w, Event::singleton(0)).unwrap())),
            ("all".into(), Observation::Event(EventObservation::new(&w, w.full()).unwrap())),
        ])
        .unwrap();
        let prior = NaiveDistribution::uniform(w);
        let p = Protocol::from_kernel(&prior, alphabet, &[vec![q(0, 1), q(1, 1)], vec![q(0, 1), q(1, 1)]]).unwrap();
        assert_eq!(p.sophisticated_posterior(0), Err(Error::UnobservableObservation(0)));
    }

    #[test]
    fn accuracy_violation_detected() {
        let p = prisoners(q(1, 2));
        let mut joint = p.joint().to_vec();
        // move 1/10 from (w_b, says-c) onto (w_b, says-b), which excludes w_b
        joint[1][1] = &joint[1][1] - &q(1, 10);
        joint[1][0] = q(1, 10);
        let bad = Protocol::new(p.space().clone(), p.alphabet().clone(), joint).unwrap();
        let report = bad.validate_accuracy();
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(
            &report.violations[0],
            AccuracyViolation::WorldOutsideEvent { observation: 0, world, .. } if world == "w_b"
        ));
        assert!(!report.ok_for(0));
        assert!(report.ok_for(1));
    }

    #[test]
    fn jeffrey_partition_validation() {
        let w = WorldSet::numbered(3).unwrap();
        let ok = JeffreyObservation::new(
            &w,
            vec![Event::from_indices([0, 1]), Event::singleton(2)],
            vec![q(1, 2), q(1, 2)],
        );
        assert!(ok.is_ok());
        assert!(JeffreyObservation::new(&w, vec![Event::from_indices([0, 1])], vec![q(1, 1)]).is_err());
        assert!(JeffreyObservation::new(
            &w,
            vec![Event::from_indices([0, 1]), Event::from_indices([1, 2])],
            vec![q(1, 2), q(1, 2)]
        )
        .is_err());
        assert!(JeffreyObservation::new(
            &w,
            vec![Event::from_indices([0, 1]), Event::singleton(2)],
            vec![q(1, 2), q(1, 3)]
        )
        .is_err());
    }

    #[test]
    fn sampling_edge_cases() {
        let p = prisoners(q(1, 2));
        assert!(p.sample_runs(7, 0).is_empty());
        let w = WorldSet::numbered(2).unwrap();
        let alphabet = ObservationAlphabet::new(vec![(
            "all".into(),
            Observation::Event(EventObservation::new(&w, w.full()).unwrap()),
        )])
        .unwrap();
        let point = NaiveDistribution::point_mass(w, 1);
        let pm = Protocol::from_kernel(&point, alphabet, &[vec![q(1, 1)], vec![q(1, 1)]]).unwrap();
        let runs = pm.sample_runs(3, 5);
        assert_eq!(runs, vec![RunSample { world: 1, observation: 0 }; 5]);
    }

    #[test]
    fn chunked_sampling_matches_sequential() {
        let p = prisoners(q(1, 3));
        let sampler = p.sampler();
        let all = p.sample_runs(42, 1000);
        let mut chunks = Vec::new();
        for start in (0..1000).step_by(137) {
            chunks.extend(sampler.sample_range(42, start..(start + 137).min(1000)));
        }
        assert_eq!(all, chunks);
        assert_eq!(all, p.sample_runs(42, 1000));
        assert_ne!(all, p.sample_runs(43, 1000));
    }
}
