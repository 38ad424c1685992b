//! JSON scenario files.
//!
//! ```json
//! {
//!   "worlds": ["w_a", "w_b", "w_c"],
//!   "prior": {"w_a": "1/3", "w_b": "1/3", "w_c": "1/3"},
//!   "observations": [
//!     {"name": "says-b", "kind": "event", "set": ["w_a", "w_c"]},
//!     {"name": "rain", "kind": "jeffrey", "sets": [["w_a"], ["w_b", "w_c"]], "alphas": ["1/4", "3/4"]},
//!     {"name": "odds", "kind": "constraint", "sets": [], "alphas": [],
//!      "odds": [{"numerator": ["w_a"], "denominator": ["w_b"], "ratio": "3"}]}
//!   ],
//!   "kernel": {"w_a": {"says-b": "1/2", "says-c": "1/2"}}
//! }
//! ```
//!
//! `kernel` is optional; without it the file describes a prior and an
//! alphabet to update with. Missing kernel entries are zero, and rows of
//! zero-prior worlds may be omitted.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::{Event, NaiveDistribution, WorldSet};
use crate::error::{Error, Result};
use crate::protocol::{
    AccuracyReport, ConstraintObservation, ConstraintTerm, EventObservation, JeffreyObservation, Observation,
    ObservationAlphabet, ObservationKind, Protocol,
};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub worlds: Vec<String>,
    pub prior: BTreeMap<String, Rational>,
    pub observations: Vec<ObservationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<BTreeMap<String, BTreeMap<String, Rational>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: ObservationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<Rational>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub odds: Option<Vec<OddsSpec>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OddsSpec {
    pub numerator: Vec<String>,
    pub denominator: Vec<String>,
    pub ratio: Rational,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub prior: NaiveDistribution,
    pub alphabet: ObservationAlphabet,
    pub protocol: Option<Protocol>,
    /// Accuracy of the protocol, when there is one.
    pub accuracy: Option<AccuracyReport>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::ScenarioFormat(msg.into())
}

fn labels_event(space: &WorldSet, labels: &[String]) -> Result<Event> {
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    space.event(&refs)
}

fn build_observation(space: &WorldSet, spec: &ObservationSpec) -> Result<Observation> {
    let name = spec.name.as_deref().unwrap_or("?");
    let sets = |field: &str| -> Result<(Vec<Event>, Vec<Rational>)> {
        let sets = spec.sets.as_ref().ok_or_else(|| format_err(format!("observation `{name}` needs \"sets\"")))?;
        let alphas = spec.alphas.clone().ok_or_else(|| format_err(format!("observation `{name}` needs \"alphas\"")))?;
        if sets.len() != alphas.len() {
            return Err(format_err(format!("observation `{name}`: {} sets but {} {field}", sets.len(), alphas.len())));
        }
        let events = sets.iter().map(|s| labels_event(space, s)).collect::<Result<Vec<_>>>()?;
        Ok((events, alphas))
    };
    match spec.kind {
        ObservationKind::Event => {
            if spec.sets.is_some() || spec.alphas.is_some() || spec.odds.is_some() {
                return Err(format_err(format!("event observation `{name}` takes only \"set\"")));
            }
            let set = spec.set.as_ref().ok_or_else(|| format_err(format!("observation `{name}` needs \"set\"")))?;
            Ok(Observation::Event(EventObservation::new(space, labels_event(space, set)?)?))
        }
        ObservationKind::Jeffrey => {
            if spec.set.is_some() || spec.odds.is_some() {
                return Err(format_err(format!("Jeffrey observation `{name}` takes only \"sets\" and \"alphas\"")));
            }
            let (cells, alphas) = sets("alphas")?;
            Ok(Observation::Jeffrey(JeffreyObservation::new(space, cells, alphas)?))
        }
        ObservationKind::Constraint => {
            if spec.set.is_some() {
                return Err(format_err(format!("constraint observation `{name}` takes \"sets\", not \"set\"")));
            }
            let (events, alphas) = if spec.sets.is_none() && spec.alphas.is_none() {
                (Vec::new(), Vec::new())
            } else {
                sets("alphas")?
            };
            let mut terms: Vec<ConstraintTerm> = events
                .into_iter()
                .zip(alphas)
                .map(|(set, target)| ConstraintTerm::Probability { set, target })
                .collect();
            for o in spec.odds.iter().flatten() {
                terms.push(ConstraintTerm::Odds {
                    numerator: labels_event(space, &o.numerator)?,
                    denominator: labels_event(space, &o.denominator)?,
                    ratio: o.ratio.clone(),
                });
            }
            Ok(Observation::Constraint(ConstraintObservation::new(space, terms)?))
        }
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| format_err(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks labels, normalization and kernel rows.
    pub fn validate(&self) -> Result<Scenario> {
        let space = WorldSet::new(self.worlds.iter().cloned())?;
        let mut mass = vec![Rational::zero(); space.len()];
        for (label, m) in &self.prior {
            mass[space.index_of(label)?] = m.clone();
        }
        let prior = NaiveDistribution::new(space.clone(), mass)?;
        let items = self
            .observations
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let name = spec.name.clone().unwrap_or_else(|| format!("o{}", i + 1));
                Ok((name, build_observation(&space, spec)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let alphabet = ObservationAlphabet::new(items)?;
        let Some(kernel) = &self.kernel else {
            return Ok(Scenario { prior, alphabet, protocol: None, accuracy: None });
        };
        let mut rows: Vec<Option<Vec<Rational>>> = vec![None; space.len()];
        for (label, entries) in kernel {
            let w = space.index_of(label)?;
            let mut row = vec![Rational::zero(); alphabet.len()];
            for (obs, v) in entries {
                row[alphabet.index_of(obs)?] = v.clone();
            }
            rows[w] = Some(row);
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(w, row)| match row {
                Some(r) => Ok(r),
                // irrelevant to the joint; any normalized row will do
                None if prior.mass(w).is_zero() => {
                    let mut r = vec![Rational::zero(); alphabet.len()];
                    r[0] = Rational::one();
                    Ok(r)
                }
                None => Err(format_err(format!("missing kernel row for world `{}`", space.label(w)))),
            })
            .collect::<Result<Vec<_>>>()?;
        let protocol = Protocol::from_kernel(&prior, alphabet.clone(), &rows)?;
        let accuracy = protocol.validate_accuracy();
        Ok(Scenario { prior, alphabet, protocol: Some(protocol), accuracy: Some(accuracy) })
    }

    /// A file describing `p`: its world marginal and kernel rows on the support.
    pub fn from_protocol(p: &Protocol) -> Self {
        let mut file = Self::from_prior(&p.marginal_worlds(), p.alphabet());
        let mut kernel = BTreeMap::new();
        let columns: Vec<Vec<Option<Rational>>> = (0..p.alphabet().len()).map(|o| p.kernel_column(o)).collect();
        for w in 0..p.space().len() {
            let mut row = BTreeMap::new();
            for (o, col) in columns.iter().enumerate() {
                if let Some(v) = &col[w] {
                    if !v.is_zero() {
                        row.insert(p.alphabet().name(o).to_string(), v.clone());
                    }
                }
            }
            if !row.is_empty() {
                kernel.insert(p.space().label(w).to_string(), row);
            }
        }
        file.kernel = Some(kernel);
        file
    }

    pub fn from_prior(prior: &NaiveDistribution, alphabet: &ObservationAlphabet) -> Self {
        let space = prior.space();
        let labels = |e: Event| space.event_labels(e);
        let observations = alphabet
            .names()
            .iter()
            .zip(alphabet.items())
            .map(|(name, o)| {
                let mut spec = ObservationSpec {
                    name: Some(name.clone()),
                    kind: o.kind(),
                    set: None,
                    sets: None,
                    alphas: None,
                    odds: None,
                };
                match o {
                    Observation::Event(e) => spec.set = Some(labels(e.set())),
                    Observation::Jeffrey(j) => {
                        spec.sets = Some(j.cells().iter().map(|c| labels(*c)).collect());
                        spec.alphas = Some(j.weights().to_vec());
                    }
                    Observation::Constraint(c) => {
                        let (sets, alphas): (Vec<_>, Vec<_>) =
                            c.probability_terms().into_iter().map(|(s, t)| (labels(s), t)).unzip();
                        spec.sets = Some(sets);
                        spec.alphas = Some(alphas);
                        let odds: Vec<OddsSpec> = c
                            .terms()
                            .iter()
                            .filter_map(|t| match t {
                                ConstraintTerm::Odds { numerator, denominator, ratio } => Some(OddsSpec {
                                    numerator: labels(*numerator),
                                    denominator: labels(*denominator),
                                    ratio: ratio.clone(),
                                }),
                                ConstraintTerm::Probability { .. } => None,
                            })
                            .collect();
                        if !odds.is_empty() {
                            spec.odds = Some(odds);
                        }
                    }
                }
                spec
            })
            .collect();
        ScenarioFile {
            worlds: space.labels().to_vec(),
            prior: (0..space.len()).map(|w| (space.label(w).to_string(), prior.mass(w).clone())).collect(),
            observations,
            kernel: None,
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    ScenarioFile::from_json(text)?.validate()
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| format_err(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::scenarios::{judy_benjamin, three_prisoners};

    const PRISONERS: &str = r#"{
      "worlds": ["w_a", "w_b", "w_c"],
      "prior": {"w_a": "1/3", "w_b": "1/3", "w_c": "1/3"},
      "observations": [
        {"name": "says-b", "kind": "event", "set": ["w_a", "w_c"]},
        {"name": "says-c", "kind": "event", "set": ["w_a", "w_b"]}
      ],
      "kernel": {
        "w_a": {"says-b": "1/2", "says-c": "1/2"},
        "w_b": {"says-c": "1"},
        "w_c": {"says-b": "1"}
      }
    }"#;

    #[test]
    fn parses_prisoners() {
        let s = parse_scenario(PRISONERS).unwrap();
        assert_eq!(s.protocol.unwrap(), three_prisoners(&q(1, 2)).unwrap());
        assert!(s.accuracy.unwrap().ok());
    }

    #[test]
    fn round_trips() {
        let p = three_prisoners(&q(1, 4)).unwrap();
        let text = ScenarioFile::from_protocol(&p).to_json();
        assert_eq!(parse_scenario(&text).unwrap().protocol.unwrap(), p);

        let (prior, o) = judy_benjamin(&q(3, 1)).unwrap();
        let alphabet = ObservationAlphabet::new(vec![("hq".into(), Observation::Constraint(o))]).unwrap();
        let text = ScenarioFile::from_prior(&prior, &alphabet).to_json();
        let back = parse_scenario(&text).unwrap();
        assert_eq!((back.prior, back.alphabet, back.protocol), (prior, alphabet, None));
    }

    #[test]
    fn rejects_bad_input() {
        let bad_rational = PRISONERS.replace("\"1/2\", \"says-c\"", "\"1/0\", \"says-c\"");
        let err = parse_scenario(&bad_rational).unwrap_err();
        assert!(matches!(&err, Error::ScenarioFormat(m) if m.contains("line")), "{err}");
        let bad_prior = PRISONERS.replace("\"w_c\": \"1/3\"", "\"w_c\": \"1/2\"");
        assert!(matches!(parse_scenario(&bad_prior), Err(Error::InvalidDistribution(_))));
        let unknown = PRISONERS.replace("\"w_b\": {\"says-c\"", "\"w_b\": {\"says-d\"");
        assert_eq!(parse_scenario(&unknown).unwrap_err(), Error::UnknownObservation("says-d".into()));
        let missing = PRISONERS.replace("\"w_c\": {\"says-b\": \"1\"}", "\"w_x\": {}");
        assert_eq!(parse_scenario(&missing).unwrap_err(), Error::UnknownWorld("w_x".into()));
    }
}
