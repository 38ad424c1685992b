//! Seeded random instance generators shared by the integration tests.
#![allow(dead_code)]

use protocheck::protocol::{ConstraintObservation, EventObservation, Observation, ObservationAlphabet};
use protocheck::{Event, NaiveDistribution, Protocol, Rational, WorldSet};
use rand::Rng;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

/// Positive integer weights normalized to a distribution.
pub fn random_weights<R: Rng>(rng: &mut R, len: usize, max: i64) -> Vec<Rational> {
    let w: Vec<i64> = (0..len).map(|_| rng.random_range(1..=max)).collect();
    let total: i64 = w.iter().sum();
    w.into_iter().map(|k| Rational::new(k, total)).collect()
}

pub fn random_prior<R: Rng>(rng: &mut R, space: &WorldSet, max: i64) -> NaiveDistribution {
    NaiveDistribution::new(space.clone(), random_weights(rng, space.len(), max)).unwrap()
}

/// Two constraint observations over `U1 = {w1,w2}`, `U2 = {w2,w3}` on five
/// worlds, made accurate by construction: observation `i` is generated from a
/// positive `P_i` and states `P_i(U_j)`.
pub fn thm43_instance<R: Rng>(rng: &mut R) -> Protocol {
    let space = WorldSet::numbered(5).unwrap();
    let u1 = Event::from_indices([0, 1]);
    let u2 = Event::from_indices([1, 2]);
    loop {
        let lambda = random_weights(rng, 2, 9);
        let ps: Vec<NaiveDistribution> = (0..2).map(|_| random_prior(rng, &space, 9)).collect();
        let items: Vec<(String, Observation)> = ps
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let c = ConstraintObservation::from_sets(&space, vec![u1, u2], vec![p.prob(u1), p.prob(u2)]).unwrap();
                (format!("C{}", i + 1), Observation::Constraint(c))
            })
            .collect();
        let Ok(alphabet) = ObservationAlphabet::new(items) else { continue };
        let joint = (0..5).map(|w| (0..2).map(|i| &lambda[i] * ps[i].mass(w)).collect()).collect();
        return Protocol::new(space, alphabet, joint).unwrap();
    }
}

/// A random accurate event protocol: every world gets a random set of
/// candidate observations containing it, with random kernel weights.
pub fn random_event_protocol<R: Rng>(rng: &mut R, max_worlds: usize, max_obs: usize) -> Protocol {
    loop {
        let n = rng.random_range(2..=max_worlds);
        let space = WorldSet::numbered(n).unwrap();
        let full = (1u64 << n) - 1;
        let k = rng.random_range(1..=max_obs.min(full as usize));
        let mut sets: Vec<Event> = Vec::new();
        while sets.len() < k {
            let e = Event::from_mask(rng.random_range(1..=full));
            if !sets.contains(&e) {
                sets.push(e);
            }
        }
        let prior = random_weights(rng, n, 9);
        let mut joint = vec![vec![Rational::zero(); k]; n];
        let mut ok = true;
        for w in 0..n {
            let options: Vec<usize> = (0..k).filter(|&o| sets[o].contains(w)).collect();
            if options.is_empty() {
                ok = false;
                break;
            }
            // random nonempty subset of admissible observations
            let chosen: Vec<usize> = loop {
                let c: Vec<usize> = options.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
                if !c.is_empty() {
                    break c;
                }
            };
            let kw = random_weights(rng, chosen.len(), 4);
            for (o, v) in chosen.into_iter().zip(kw) {
                joint[w][o] = &prior[w] * v;
            }
        }
        if !ok {
            continue;
        }
        let items = sets
            .iter()
            .enumerate()
            .map(|(i, &e)| (format!("o{}", i + 1), Observation::Event(EventObservation::new(&space, e).unwrap())))
            .collect();
        let alphabet = ObservationAlphabet::new(items).unwrap();
        return Protocol::new(space, alphabet, joint).unwrap();
    }
}

/// Disjoint observed supports with `U_i ∩ supp = V_i`; zero-prior worlds may
/// be added to any set.
pub fn random_disjoint_protocol<R: Rng>(rng: &mut R) -> Protocol {
    loop {
        let n = rng.random_range(2..=5);
        let space = WorldSet::numbered(n).unwrap();
        let supported: Vec<bool> = (0..n).map(|w| w == 0 || rng.random_bool(0.8)).collect();
        let k = rng.random_range(1..=4.min(supported.iter().filter(|&&s| s).count()));
        let mut owner = vec![None; n];
        for w in 0..n {
            if supported[w] {
                owner[w] = Some(rng.random_range(0..k));
            }
        }
        let mut sets = vec![Event::empty(); k];
        for w in 0..n {
            match owner[w] {
                Some(o) => sets[o] = sets[o].with(w),
                None => {
                    for s in sets.iter_mut() {
                        if rng.random_bool(0.5) {
                            *s = s.with(w);
                        }
                    }
                }
            }
        }
        if (0..k).any(|o| !owner.contains(&Some(o))) {
            continue;
        }
        let weights = random_weights(rng, n, 9);
        let mass: Vec<Rational> =
            (0..n).map(|w| if supported[w] { weights[w].clone() } else { Rational::zero() }).collect();
        let total: Rational = mass.iter().sum();
        let mut joint = vec![vec![Rational::zero(); k]; n];
        for w in 0..n {
            if let Some(o) = owner[w] {
                joint[w][o] = &mass[w] / &total;
            }
        }
        return event_protocol(&space, &sets, joint);
    }
}

pub fn event_protocol(space: &WorldSet, sets: &[Event], joint: Vec<Vec<Rational>>) -> Protocol {
    let items = sets
        .iter()
        .enumerate()
        .map(|(i, &e)| (format!("o{}", i + 1), Observation::Event(EventObservation::new(space, e).unwrap())))
        .collect();
    Protocol::new(space.clone(), ObservationAlphabet::new(items).unwrap(), joint).unwrap()
}

/// `Pr(X_O = o | X_W = w)` for worlds with positive mass, straight from the joint.
pub fn kernel_entry(p: &Protocol, w: usize, o: usize) -> Option<Rational> {
    let row: Rational = (0..p.alphabet().len()).map(|j| p.mass(w, j).clone()).sum();
    (!row.is_zero()).then(|| p.mass(w, o) / row)
}

/// Posterior over worlds given `o`, by summing atoms.
pub fn enumerate_posterior(p: &Protocol, o: usize) -> Vec<Rational> {
    let col: Vec<Rational> = (0..p.space().len()).map(|w| p.mass(w, o).clone()).collect();
    let total: Rational = col.iter().sum();
    col.into_iter().map(|m| m / &total).collect()
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (i as f64 + 1.0);
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Projected gradient descent over the simplex with an Armijo step.
pub fn projected_gradient_min<F, G>(f: F, grad: G, start: Vec<f64>, iters: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = start;
    let mut step = 1.0;
    for _ in 0..iters {
        let g = grad(&x);
        let fx = f(&x);
        loop {
            let cand = project_simplex(&x.iter().zip(&g).map(|(a, b)| a - step * b).collect::<Vec<_>>());
            let decrease: f64 = x.iter().zip(&cand).zip(&g).map(|((a, c), gi)| gi * (a - c)).sum();
            if f(&cand) <= fx - 0.5 * decrease || step < 1e-16 {
                x = cand;
                break;
            }
            step *= 0.5;
        }
        step = (step * 2.0).min(1.0);
    }
    x
}
