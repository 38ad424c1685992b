//! Protocol-aware probability updating on finite spaces.
//!
//! An agent holds a distribution over a finite set of worlds (the naive
//! space). Observations are produced by a protocol, modelled as a joint
//! distribution over `(world, observation)` pairs (the sophisticated space).
//! This crate runs naive conditioning, Jeffrey conditioning and minimum
//! relative entropy updating in the naive space, and decides when each of
//! them agrees with conditioning the joint: the coarsening-at-random (CAR)
//! condition and its generalizations.

pub mod car;
pub mod dist;
pub mod error;
pub mod lp;
pub mod mre;
pub mod protocol;
pub mod rational;
pub mod scenario_file;
pub mod scenarios;
pub mod update;

pub use car::{
    car_feasible_support, car_guaranteed_for_all_priors, check_car, check_generalized_car, classify_three,
    construct_car_joint, mre_car_fixed_point, thm43_check, CarReport, CaseLabel, FixedPointResult,
};
pub use dist::{relative_entropy, tv_distance, Event, FloatDistribution, NaiveDistribution, WorldSet};
pub use error::{Error, Result};
pub use mre::{solve_mre, LinearConstraintSet, MreSolution, SolverOptions};
pub use protocol::{
    ConstraintObservation, ConstraintTerm, EventObservation, JeffreyObservation, Observation, ObservationAlphabet,
    Protocol,
};
pub use rational::Rational;
pub use scenario_file::{parse_scenario, Scenario, ScenarioFile};
pub use update::{compare, jeffrey_update, mre_update, naive_condition, ComparisonReport, UpdateRule};
