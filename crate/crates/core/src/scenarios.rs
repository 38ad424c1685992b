//! Built-in protocols for the classic puzzles and the sensor mechanism.

use std::collections::BTreeMap;

use crate::dist::{Event, NaiveDistribution, WorldSet};
use crate::error::{Error, Result};
use crate::protocol::{
    check_partition, ConstraintObservation, ConstraintTerm, EventObservation, Observation, ObservationAlphabet,
    Protocol,
};
use crate::rational::Rational;

fn check_unit(name: &str, q: &Rational) -> Result<()> {
    if !q.is_probability() {
        return Err(Error::InvalidDistribution(format!("{name} = {q} is outside [0, 1]")));
    }
    Ok(())
}

fn event_alphabet(space: &WorldSet, items: &[(&str, &[&str])]) -> Result<ObservationAlphabet> {
    let items = items
        .iter()
        .map(|(name, labels)| {
            let o = EventObservation::new(space, space.event(labels)?)?;
            Ok((name.to_string(), Observation::Event(o)))
        })
        .collect::<Result<Vec<_>>>()?;
    ObservationAlphabet::new(items)
}

/// The contestant picks door 1. `q` is the probability that the host opens
/// door 3 when the car is behind door 1.
pub fn monty_hall(q: &Rational) -> Result<Protocol> {
    check_unit("q", q)?;
    let space = WorldSet::new(["car-1", "car-2", "car-3"])?;
    let alphabet = event_alphabet(&space, &[("opens-2", &["car-1", "car-3"]), ("opens-3", &["car-1", "car-2"])])?;
    let kernel = vec![
        vec![Rational::one() - q, q.clone()],
        vec![Rational::zero(), Rational::one()],
        vec![Rational::one(), Rational::zero()],
    ];
    Protocol::from_kernel(&NaiveDistribution::uniform(space), alphabet, &kernel)
}

/// `w_x` is the world where prisoner x is spared; `q` is the probability the
/// jailer names b when a is spared.
pub fn three_prisoners(q: &Rational) -> Result<Protocol> {
    check_unit("q", q)?;
    let space = WorldSet::new(["w_a", "w_b", "w_c"])?;
    let alphabet = event_alphabet(&space, &[("says-b", &["w_a", "w_c"]), ("says-c", &["w_a", "w_b"])])?;
    let kernel = vec![
        vec![q.clone(), Rational::one() - q],
        vec![Rational::zero(), Rational::one()],
        vec![Rational::one(), Rational::zero()],
    ];
    Protocol::from_kernel(&NaiveDistribution::uniform(space), alphabet, &kernel)
}

/// Uniform prior over the four quadrants and the report that, given red
/// territory, the odds of headquarters are `alpha : 1`.
pub fn judy_benjamin(alpha: &Rational) -> Result<(NaiveDistribution, ConstraintObservation)> {
    if !alpha.is_positive() {
        return Err(Error::InvalidObservation(format!("odds {alpha} must be positive")));
    }
    let space = WorldSet::new(["blue-hq", "blue-2nd", "red-hq", "red-2nd"])?;
    let o = ConstraintObservation::new(
        &space,
        vec![ConstraintTerm::Odds {
            numerator: space.event(&["red-hq"])?,
            denominator: space.event(&["red-2nd"])?,
            ratio: alpha.clone(),
        }],
    )?;
    Ok((NaiveDistribution::uniform(space), o))
}

pub fn judy_benjamin_blue(space: &WorldSet) -> Event {
    space.event(&["blue-hq", "blue-2nd"]).expect("judy benjamin worlds")
}

/// Sensor `i` is chosen with probability `pr_s[i]` independently of the world
/// and reports the cell of its partition containing it. An event reported
/// by several sensors is one observation. Observations that cannot occur
/// are left out of the alphabet.
pub fn sensor_mar(partitions: &[Vec<Event>], pr_s: &[Rational], prior: &NaiveDistribution) -> Result<Protocol> {
    let space = prior.space();
    if partitions.is_empty() || partitions.len() != pr_s.len() {
        return Err(Error::InvalidDistribution(format!(
            "{} sensor weights for {} partitions",
            pr_s.len(),
            partitions.len()
        )));
    }
    for (i, cells) in partitions.iter().enumerate() {
        check_partition(space, cells).map_err(|_| Error::NotAPartition(i))?;
    }
    if pr_s.iter().any(Rational::is_negative) || !pr_s.iter().sum::<Rational>().is_one() {
        return Err(Error::InvalidDistribution("sensor weights must be nonnegative and sum to 1".into()));
    }
    // reporting weight of each event, in order of first appearance
    let mut order: Vec<Event> = Vec::new();
    let mut weight: BTreeMap<u64, Rational> = BTreeMap::new();
    for (cells, s) in partitions.iter().zip(pr_s) {
        for c in cells {
            if !order.contains(c) {
                order.push(*c);
            }
            *weight.entry(c.mask()).or_insert_with(Rational::zero) += s.clone();
        }
    }
    let events: Vec<Event> = order
        .into_iter()
        .filter(|e| weight[&e.mask()].is_positive() && prior.prob(*e).is_positive())
        .collect();
    let items = events
        .iter()
        .map(|&e| {
            let name = format!("{{{}}}", space.event_labels(e).join(","));
            Ok((name, Observation::Event(EventObservation::new(space, e)?)))
        })
        .collect::<Result<Vec<_>>>()?;
    let joint = (0..space.len())
        .map(|w| {
            events
                .iter()
                .map(|e| if e.contains(w) { prior.mass(w) * &weight[&e.mask()] } else { Rational::zero() })
                .collect()
        })
        .collect();
    Protocol::new(space.clone(), ObservationAlphabet::new(items)?, joint)
}

/// Names accepted by [`build`].
pub const BUILT_IN: [&str; 3] = ["monty-hall", "three-prisoners", "judy-benjamin"];

/// A built-in scenario: a full protocol, or a prior with one observation
/// when no protocol is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum Built {
    Protocol(Protocol),
    Update { prior: NaiveDistribution, name: String, observation: Observation },
}

/// Builds a named scenario from `key = rational` parameters. `q` defaults
/// to 1/2 and `alpha` to 3.
pub fn build(name: &str, params: &BTreeMap<String, Rational>) -> Result<Built> {
    let get = |key: &str, default: Rational| params.get(key).cloned().unwrap_or(default);
    let allowed: &[&str] = match name {
        "monty-hall" | "three-prisoners" => &["q"],
        "judy-benjamin" => &["alpha"],
        other => return Err(Error::ScenarioFormat(format!("unknown scenario `{other}`"))),
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::ScenarioFormat(format!("scenario `{name}` has no parameter `{k}`")));
    }
    match name {
        "monty-hall" => Ok(Built::Protocol(monty_hall(&get("q", Rational::new(1, 2)))?)),
        "three-prisoners" => Ok(Built::Protocol(three_prisoners(&get("q", Rational::new(1, 2)))?)),
        _ => {
            let (prior, o) = judy_benjamin(&get("alpha", Rational::from_integer(3)))?;
            Ok(Built::Update { prior, name: "hq-odds".into(), observation: Observation::Constraint(o) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::car::{car_guaranteed_for_all_priors, check_car};
    use crate::rational::q;
    use crate::update::{mre_update, naive_condition};
    use crate::SolverOptions;

    #[test]
    fn monty_switching() {
        let p = monty_hall(&q(1, 2)).unwrap();
        let opens3 = p.alphabet().index_of("opens-3").unwrap();
        let post = p.sophisticated_posterior(opens3).unwrap();
        assert_eq!(post.masses(), &[q(1, 3), q(2, 3), q(0, 1)]);
        let Observation::Event(e) = p.observation(opens3).unwrap() else { panic!() };
        assert_eq!(naive_condition(&p.marginal_worlds(), e).unwrap().masses(), &[q(1, 2), q(1, 2), q(0, 1)]);
        let p = monty_hall(&q(1, 1)).unwrap();
        assert!(check_car(&p, opens3).unwrap().holds);
        assert!(!check_car(&p, 0).unwrap().holds);
    }

    #[test]
    fn prisoners_and_monty_are_relabelings() {
        for qv in [q(0, 1), q(1, 4), q(1, 2), q(1, 1)] {
            let a = three_prisoners(&qv).unwrap();
            let b = monty_hall(&qv).unwrap();
            // w_a↔car-1, w_b↔car-3, w_c↔car-2; says-b↔opens-3, says-c↔opens-2
            let world = [0, 2, 1];
            let obs = [1, 0];
            for w in 0..3 {
                for o in 0..2 {
                    assert_eq!(a.mass(w, o), b.mass(world[w], obs[o]));
                }
            }
        }
        assert!(three_prisoners(&q(3, 2)).is_err());
    }

    #[test]
    fn judy_benjamin_blue_rises() {
        let (prior, o) = judy_benjamin(&q(3, 1)).unwrap();
        let post = mre_update(&prior, &o, &SolverOptions::default()).unwrap();
        assert!(post.prob(judy_benjamin_blue(prior.space())) > 0.5);
        let (prior, o) = judy_benjamin(&q(1, 1)).unwrap();
        let post = mre_update(&prior, &o, &SolverOptions::default()).unwrap();
        assert!((post.prob(judy_benjamin_blue(prior.space())) - 0.5).abs() < 1e-12);
        assert!(judy_benjamin(&q(0, 1)).is_err());
    }

    #[test]
    fn missing_at_random_sensor() {
        let w = WorldSet::numbered(3).unwrap();
        let prior = NaiveDistribution::normalize(w.clone(), vec![q(1, 1), q(2, 1), q(3, 1)]).unwrap();
        let partitions = vec![vec![w.full()], (0..3).map(Event::singleton).collect()];
        let p = sensor_mar(&partitions, &[q(1, 3), q(2, 3)], &prior).unwrap();
        assert_eq!(p.alphabet().len(), 4);
        assert_eq!(p.alphabet().name(0), "{w1,w2,w3}");
        assert!(p.validate_accuracy().ok());
        for o in 0..4 {
            assert!(check_car(&p, o).unwrap().holds);
        }
        let single = sensor_mar(&partitions[1..], &[q(1, 1)], &prior).unwrap();
        assert!(car_guaranteed_for_all_priors(&single).unwrap());
        let overlapping = vec![vec![Event::from_indices([0, 1]), Event::from_indices([1, 2])]];
        assert_eq!(sensor_mar(&overlapping, &[q(1, 1)], &prior).unwrap_err(), Error::NotAPartition(0));
    }

    #[test]
    fn build_by_name() {
        let mut params = BTreeMap::new();
        params.insert("q".to_string(), q(1, 4));
        assert_eq!(build("three-prisoners", &params).unwrap(), Built::Protocol(three_prisoners(&q(1, 4)).unwrap()));
        assert!(build("judy-benjamin", &params).is_err());
        assert!(build("newcomb", &BTreeMap::new()).is_err());
    }
}
