//! Finite world sets, events, and distributions over them.
//!
//! Mass arithmetic is exact ([`Rational`]); only entropy values and the
//! outputs of the relative-entropy solver are binary64.

use std::fmt;
use std::sync::Arc;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::Rational;

pub const MAX_WORLDS: usize = 64;

/// An ordered set of distinct world labels. The order fixes the
/// index ↔ label mapping used by every other structure.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct WorldSet {
    labels: Arc<[String]>,
}

impl WorldSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidWorldSet("no worlds".into()));
        }
        if labels.len() > MAX_WORLDS {
            return Err(Error::TooManyWorlds(labels.len()));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::InvalidWorldSet("empty label".into()));
            }
            if labels[..i].contains(l) {
                return Err(Error::InvalidWorldSet(format!("duplicate label `{l}`")));
            }
        }
        Ok(WorldSet { labels: labels.into() })
    }

    /// Worlds labelled `w1..wn`.
    pub fn numbered(n: usize) -> Result<Self> {
        WorldSet::new((1..=n).map(|i| format!("w{i}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownWorld(label.to_string()))
    }

    pub fn full(&self) -> Event {
        Event::full(self.len())
    }

    pub fn event<S: AsRef<str>>(&self, labels: &[S]) -> Result<Event> {
        let mut e = Event::empty();
        for l in labels {
            e = e.with(self.index_of(l.as_ref())?);
        }
        Ok(e)
    }

    pub fn event_labels(&self, e: Event) -> Vec<String> {
        e.iter().map(|i| self.labels[i].clone()).collect()
    }

    pub fn check_event(&self, e: Event) -> Result<()> {
        if e.is_subset(self.full()) {
            Ok(())
        } else {
            Err(Error::InvalidObservation("event refers to worlds outside the world set".into()))
        }
    }
}

impl fmt::Debug for WorldSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.labels.iter()).finish()
    }
}

/// A subset of a world set, stored as a bitmask over world indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Event(u64);

impl Event {
    pub const fn empty() -> Self {
        Event(0)
    }

    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_WORLDS);
        if n == MAX_WORLDS {
            Event(u64::MAX)
        } else {
            Event((1u64 << n) - 1)
        }
    }

    pub fn from_mask(mask: u64) -> Self {
        Event(mask)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices.into_iter().fold(Event::empty(), Event::with)
    }

    pub fn singleton(i: usize) -> Self {
        Event::empty().with(i)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn with(self, i: usize) -> Self {
        assert!(i < MAX_WORLDS);
        Event(self.0 | (1u64 << i))
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_WORLDS && self.0 & (1u64 << i) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: Event) -> Event {
        Event(self.0 | other.0)
    }

    pub fn intersection(self, other: Event) -> Event {
        Event(self.0 & other.0)
    }

    pub fn difference(self, other: Event) -> Event {
        Event(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Event) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Event) -> bool {
        self.0 & other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut m = self.0;
        std::iter::from_fn(move || {
            if m == 0 {
                None
            } else {
                let i = m.trailing_zeros() as usize;
                m &= m - 1;
                Some(i)
            }
        })
    }
}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A probability distribution over a world set with exact rational masses.
///
/// Zero-mass worlds stay in the mass vector.
#[derive(Clone, PartialEq, Eq)]
pub struct NaiveDistribution {
    space: WorldSet,
    mass: Vec<Rational>,
}

impl NaiveDistribution {
    /// Builds a distribution from masses that already sum to one.
    pub fn new(space: WorldSet, mass: Vec<Rational>) -> Result<Self> {
        if mass.len() != space.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} masses for {} worlds",
                mass.len(),
                space.len()
            )));
        }
        if let Some(m) = mass.iter().find(|m| m.is_negative()) {
            return Err(Error::InvalidDistribution(format!("negative mass {m}")));
        }
        let total: Rational = mass.iter().sum();
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
        }
        Ok(NaiveDistribution { space, mass })
    }

    /// Rescales nonnegative weights to sum to one.
    pub fn normalize(space: WorldSet, weights: Vec<Rational>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} weights for {} worlds",
                weights.len(),
                space.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| w.is_negative()) {
            return Err(Error::InvalidDistribution(format!("negative weight {w}")));
        }
        let total: Rational = weights.iter().sum();
        if total.is_zero() {
            return Err(Error::AllZeroWeights);
        }
        let mass = weights.into_iter().map(|w| w / &total).collect();
        Ok(NaiveDistribution { space, mass })
    }

    pub fn uniform(space: WorldSet) -> Self {
        let n = space.len() as i64;
        let mass = vec![Rational::new(1, n); space.len()];
        NaiveDistribution { space, mass }
    }

    pub fn point_mass(space: WorldSet, world: usize) -> Self {
        let mut mass = vec![Rational::zero(); space.len()];
        mass[world] = Rational::one();
        NaiveDistribution { space, mass }
    }

    pub fn space(&self) -> &WorldSet {
        &self.space
    }

    pub fn masses(&self) -> &[Rational] {
        &self.mass
    }

    pub fn mass(&self, world: usize) -> &Rational {
        &self.mass[world]
    }

    pub fn mass_of(&self, label: &str) -> Result<&Rational> {
        Ok(&self.mass[self.space.index_of(label)?])
    }

    pub fn support(&self) -> Event {
        Event::from_indices(
            self.mass
                .iter()
                .enumerate()
                .filter(|(_, m)| m.is_positive())
                .map(|(i, _)| i),
        )
    }

    pub fn prob(&self, event: Event) -> Rational {
        event.iter().filter(|&i| i < self.mass.len()).map(|i| &self.mass[i]).sum()
    }

    /// Ordinary conditioning on `event`.
    pub fn condition(&self, event: Event) -> Result<Self> {
        let p = self.prob(event);
        if p.is_zero() {
            return Err(Error::ZeroProbabilityEvent);
        }
        let mass = self
            .mass
            .iter()
            .enumerate()
            .map(|(i, m)| if event.contains(i) { m / &p } else { Rational::zero() })
            .collect();
        Ok(NaiveDistribution { space: self.space.clone(), mass })
    }

    pub fn to_float(&self) -> FloatDistribution {
        FloatDistribution {
            space: self.space.clone(),
            mass: self.mass.iter().map(Rational::to_f64).collect(),
        }
    }

    pub fn same_space(&self, other: &NaiveDistribution) -> Result<()> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }
}

impl fmt::Debug for NaiveDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.space.labels().iter().zip(self.mass.iter()))
            .finish()
    }
}

impl Serialize for NaiveDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.mass.len()))?;
        for (l, m) in self.space.labels().iter().zip(&self.mass) {
            map.serialize_entry(l, m)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for NaiveDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let entries: Vec<(String, Rational)> = deserializer.deserialize_map(OrderedMap::default())?;
        let (labels, mass): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let space = WorldSet::new(labels).map_err(serde::de::Error::custom)?;
        NaiveDistribution::new(space, mass).map_err(serde::de::Error::custom)
    }
}

/// Map visitor that keeps entries in document order.
pub(crate) struct OrderedMap<V>(std::marker::PhantomData<V>);

impl<V> Default for OrderedMap<V> {
    fn default() -> Self {
        OrderedMap(std::marker::PhantomData)
    }
}

impl<'de, V: Deserialize<'de>> Visitor<'de> for OrderedMap<V> {
    type Value = Vec<(String, V)>;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a map")
    }

    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<Self::Value, A::Error> {
        let mut out = Vec::new();
        while let Some((k, v)) = access.next_entry::<String, V>()? {
            out.push((k, v));
        }
        Ok(out)
    }
}

/// A distribution with binary64 masses, produced by the relative-entropy solver.
#[derive(Clone, PartialEq)]
pub struct FloatDistribution {
    space: WorldSet,
    mass: Vec<f64>,
}

impl FloatDistribution {
    /// Wraps masses as-is; callers guarantee nonnegativity and unit sum up to rounding.
    pub fn new(space: WorldSet, mass: Vec<f64>) -> Self {
        assert_eq!(space.len(), mass.len());
        FloatDistribution { space, mass }
    }

    pub fn space(&self) -> &WorldSet {
        &self.space
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass(&self, world: usize) -> f64 {
        self.mass[world]
    }

    pub fn prob(&self, event: Event) -> f64 {
        event.iter().filter(|&i| i < self.mass.len()).map(|i| self.mass[i]).sum()
    }
}

impl fmt::Debug for FloatDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.space.labels().iter().zip(self.mass.iter()))
            .finish()
    }
}

impl Serialize for FloatDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.mass.len()))?;
        for (l, m) in self.space.labels().iter().zip(&self.mass) {
            map.serialize_entry(l, m)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for FloatDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let entries: Vec<(String, f64)> = deserializer.deserialize_map(OrderedMap::default())?;
        let (labels, mass): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let space = WorldSet::new(labels).map_err(serde::de::Error::custom)?;
        Ok(FloatDistribution { space, mass })
    }
}

/// Base-2 relative entropy `Σ p(w) log₂(p(w)/q(w))`, infinite when `p` is not
/// absolutely continuous with respect to `q`.
pub fn relative_entropy(p: &NaiveDistribution, q: &NaiveDistribution) -> Result<f64> {
    p.same_space(q)?;
    let mut total = 0.0;
    for (pw, qw) in p.mass.iter().zip(&q.mass) {
        if pw.is_zero() {
            continue;
        }
        if qw.is_zero() {
            return Ok(f64::INFINITY);
        }
        let ratio = (pw / qw).to_f64();
        total += pw.to_f64() * ratio.log2();
    }
    Ok(total.max(0.0))
}

/// Base-2 relative entropy on raw float mass vectors.
pub fn relative_entropy_f64(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    let mut total = 0.0;
    for (&pw, &qw) in p.iter().zip(q) {
        if pw <= 0.0 {
            continue;
        }
        if qw <= 0.0 {
            return f64::INFINITY;
        }
        total += pw * (pw / qw).log2();
    }
    total
}

/// Total variation distance `½ Σ |p(w) − q(w)|`, exact.
pub fn tv_distance(p: &NaiveDistribution, q: &NaiveDistribution) -> Result<Rational> {
    p.same_space(q)?;
    let sum: Rational = p.mass.iter().zip(&q.mass).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / Rational::from_integer(2))
}

pub fn tv_distance_f64(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
