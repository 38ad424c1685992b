//! Naive-space update rules and their comparison with conditioning in the
//! sophisticated space.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{tv_distance, tv_distance_f64, FloatDistribution, NaiveDistribution};
use crate::error::{Error, Result};
use crate::mre::{solve_mre, to_linear_constraints, SolverOptions};
use crate::protocol::{ConstraintObservation, EventObservation, JeffreyObservation, Observation, Protocol};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateRule {
    #[serde(rename = "naive")]
    NaiveConditioning,
    #[serde(rename = "jeffrey")]
    JeffreyConditioning,
    Mre,
}

impl UpdateRule {
    /// Whether the rule has a meaning for `o`. MRE generalizes the other two.
    pub fn applies_to(self, o: &Observation) -> bool {
        matches!(
            (self, o),
            (UpdateRule::NaiveConditioning, Observation::Event(_))
                | (UpdateRule::JeffreyConditioning, Observation::Jeffrey(_))
                | (UpdateRule::Mre, _)
        )
    }
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateRule::NaiveConditioning => "naive",
            UpdateRule::JeffreyConditioning => "jeffrey",
            UpdateRule::Mre => "mre",
        })
    }
}

impl FromStr for UpdateRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "naive" => Ok(UpdateRule::NaiveConditioning),
            "jeffrey" => Ok(UpdateRule::JeffreyConditioning),
            "mre" => Ok(UpdateRule::Mre),
            other => Err(format!("unknown rule `{other}` (expected naive, jeffrey or mre)")),
        }
    }
}

pub fn naive_condition(prior: &NaiveDistribution, o: &EventObservation) -> Result<NaiveDistribution> {
    prior.condition(o.set())
}

/// `Σ_i α_i · Pr(· | U_i)`, with `α_i·Pr(·|U_i) = 0` when `α_i = 0 = Pr(U_i)`.
pub fn jeffrey_update(prior: &NaiveDistribution, o: &JeffreyObservation) -> Result<NaiveDistribution> {
    let cell_mass: Vec<Rational> = o.cells().iter().map(|c| prior.prob(*c)).collect();
    for (i, (alpha, m)) in o.weights().iter().zip(&cell_mass).enumerate() {
        if alpha.is_positive() && m.is_zero() {
            return Err(Error::JeffreyUndefined(i));
        }
    }
    let mass = (0..prior.space().len())
        .map(|w| {
            let i = o.cell_of(w);
            if cell_mass[i].is_zero() {
                Rational::zero()
            } else {
                &o.weights()[i] * prior.mass(w) / &cell_mass[i]
            }
        })
        .collect();
    NaiveDistribution::new(prior.space().clone(), mass)
}

/// The KL projection of `prior` onto the constraints of `o`.
pub fn mre_update(
    prior: &NaiveDistribution,
    o: &ConstraintObservation,
    opts: &SolverOptions,
) -> Result<FloatDistribution> {
    let cs = to_linear_constraints(prior.space(), o);
    Ok(solve_mre(prior, &cs, opts)?.posterior)
}

/// Result of an update rule: exact for conditioning and Jeffrey, float for MRE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Posterior {
    Exact(NaiveDistribution),
    Approx(FloatDistribution),
}

impl Posterior {
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Posterior::Exact(d) => d.masses().iter().map(Rational::to_f64).collect(),
            Posterior::Approx(d) => d.masses().to_vec(),
        }
    }

    pub fn exact(&self) -> Option<&NaiveDistribution> {
        match self {
            Posterior::Exact(d) => Some(d),
            Posterior::Approx(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gap {
    Exact(Rational),
    Approx(f64),
}

impl Gap {
    pub fn to_f64(&self) -> f64 {
        match self {
            Gap::Exact(r) => r.to_f64(),
            Gap::Approx(x) => *x,
        }
    }
}

/// Naive update of the world marginal versus conditioning the joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub observation: usize,
    pub observation_name: String,
    pub rule: UpdateRule,
    pub exact: bool,
    pub naive_result: Posterior,
    pub sophisticated_result: NaiveDistribution,
    pub agree: bool,
    pub tv_gap: Gap,
    pub tv_gap_f64: f64,
}

pub fn apply_rule(
    rule: UpdateRule,
    prior: &NaiveDistribution,
    o: &Observation,
    opts: &SolverOptions,
) -> Result<Posterior> {
    match (rule, o) {
        (UpdateRule::NaiveConditioning, Observation::Event(e)) => Ok(Posterior::Exact(naive_condition(prior, e)?)),
        (UpdateRule::JeffreyConditioning, Observation::Jeffrey(j)) => {
            Ok(Posterior::Exact(jeffrey_update(prior, j)?))
        }
        (UpdateRule::Mre, o) => Ok(Posterior::Approx(mre_update(prior, &o.as_constraints(), opts)?)),
        (rule, o) => Err(Error::RuleKindMismatch { rule: rule.to_string(), kind: o.kind().to_string() }),
    }
}

pub fn compare(p: &Protocol, o: usize, rule: UpdateRule, opts: &SolverOptions) -> Result<ComparisonReport> {
    let obs = p.observation(o)?;
    if !rule.applies_to(obs) {
        return Err(Error::RuleKindMismatch { rule: rule.to_string(), kind: obs.kind().to_string() });
    }
    let sophisticated = p.sophisticated_posterior(o)?;
    let naive = apply_rule(rule, &p.marginal_worlds(), obs, opts)?;
    let (exact, agree, tv_gap, tv_gap_f64) = match &naive {
        Posterior::Exact(d) => {
            let gap = tv_distance(d, &sophisticated)?;
            let f = gap.to_f64();
            (true, gap.is_zero(), Gap::Exact(gap), f)
        }
        Posterior::Approx(d) => {
            let s: Vec<f64> = sophisticated.masses().iter().map(Rational::to_f64).collect();
            let gap = tv_distance_f64(d.masses(), &s);
            (false, gap <= opts.tol, Gap::Approx(gap), gap)
        }
    };
    Ok(ComparisonReport {
        observation: o,
        observation_name: p.alphabet().name(o).to_string(),
        rule,
        exact,
        naive_result: naive,
        sophisticated_result: sophisticated,
        agree,
        tv_gap,
        tv_gap_f64,
    })
}
