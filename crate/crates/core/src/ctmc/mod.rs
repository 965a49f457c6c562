//! Normalized CTMC of a junction: state space exploration, sparse generator
//! construction and PRISM export.

mod generator;
mod prism;
mod state;

pub use generator::{build_generator, Generator, Transition, DEFAULT_CHOICE_RATE};
pub use prism::{export_prism, parse_prism, PrismMetadata, PrismModel};
pub use state::{
    closure, feasible_state_count, SpaceOptions, State, StateSpace, Topology, TransitionKind,
    DEFAULT_STATE_CAP, MAX_ROUTES,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CtmcError {
    #[error("at least one waiting slot per route is required")]
    ZeroSlots,
    #[error("junction has no routes")]
    NoRoutes,
    #[error("{0} routes exceed the supported maximum of {MAX_ROUTES}")]
    TooManyRoutes(usize),
    #[error("state space exceeds the cap of {0} states")]
    StateCap(usize),
    #[error("routes {0} and {1} conflict but are both in service")]
    Infeasible(usize, usize),
    #[error("expected vectors of length {expected}, got queue {queue} and service {service}")]
    Shape {
        expected: usize,
        queue: usize,
        service: usize,
    },
    #[error("rate vectors must have {expected} entries, got {got}")]
    RateShape { expected: usize, got: usize },
    #[error("choice rate must be positive, got {0}")]
    ChoiceRate(f64),
    #[error("route {0} has a positive arrival rate but the state space was built without its arrivals")]
    ArrivalsPruned(usize),
    #[error("transition {from} -> {to} has invalid rate {rate}")]
    BadRate { from: usize, to: usize, rate: f64 },
    #[error("transition {from} -> {to} targets a state outside the chain")]
    TargetOutOfRange { from: usize, to: usize },
    #[error("PRISM input line {line}: {message}")]
    Prism { line: usize, message: String },
}
