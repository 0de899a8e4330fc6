//! End-points ride sharing: commuters pair up when both their homes and their
//! workplaces lie within delta of each other and their schedules agree.
//!
//! The solver is a capacitated facility-location heuristic: a b-matching seeds
//! the driver set, then a local search re-solves restricted transportation
//! problems to close or swap drivers.

mod assignment;
mod bmatching;
mod constraints;
mod instance;
mod local_search;
mod oracle;
mod state;
mod transport;

use std::time::{Duration, Instant};

use thiserror::Error;

pub use assignment::{
    success_ratio, total_cost, validate_endpoints, validate_with, Assignment, AssignmentDocument, CostBreakdown,
    Violation,
};
pub use constraints::{virtual_distance, ConstraintsSummary, MatchConstraints, PENALTY_EPSILON_KM};
pub use instance::{global_ordering, options, tighter_upper_bound, MatchingInstance};
pub use local_search::{LocalSearchParams, SearchStats};
pub use oracle::{brute_force_optimal, BRUTE_FORCE_LIMIT};
pub use transport::{solve_transportation, OpenDriver, TransportPlan};

pub(crate) use state::CarState;

use crate::population::{Commuter, CommuterId};

/// Best possible success when every car carries four people.
pub const ABSOLUTE_UPPER_BOUND: f64 = 75.0;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("invalid constraints: {0}")]
    Constraints(String),
    #[error("success ratio undefined without cars")]
    NoCars,
    #[error("duplicate commuter id {0}")]
    DuplicateId(CommuterId),
    #[error("unknown commuter {0}")]
    UnknownCommuter(CommuterId),
    #[error("brute force handles at most {max} commuters, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error("no feasible seat for passengers {unplaced:?}")]
    Infeasible { unplaced: Vec<CommuterId> },
    #[error("assignment violates {} constraint(s); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidAssignment(Vec<Violation>),
}

/// Greedy b-matching initial solution.
pub fn b_matching_init(inst: &MatchingInstance) -> Assignment {
    bmatching::b_matching(inst).to_assignment(inst)
}

/// Local search from a valid assignment. The result never costs more than `a0`.
pub fn local_search_improve(
    a0: &Assignment,
    inst: &MatchingInstance,
    params: &LocalSearchParams,
) -> Result<(Assignment, SearchStats), MatchError> {
    let state = CarState::from_assignment(inst, a0)?;
    let (state, stats) = local_search::improve(inst, state, params);
    Ok((state.to_assignment(inst), stats))
}

#[derive(Debug, Clone)]
pub struct EndpointsSolution {
    pub assignment: Assignment,
    pub initial_cars: usize,
    pub stats: SearchStats,
    pub elapsed: Duration,
}

/// b-matching followed by local search.
pub fn solve_endpoints(inst: &MatchingInstance, params: &LocalSearchParams) -> EndpointsSolution {
    let started = Instant::now();
    let init = bmatching::b_matching(inst);
    let initial_cars = init.car_count();
    let (state, stats) = local_search::improve(inst, init, params);
    EndpointsSolution { assignment: state.to_assignment(inst), initial_cars, stats, elapsed: started.elapsed() }
}

/// Convenience wrapper building the instance from raw commuters.
pub fn solve_endpoints_for(
    commuters: &[Commuter],
    c: &MatchConstraints,
    params: &LocalSearchParams,
) -> Result<EndpointsSolution, MatchError> {
    Ok(solve_endpoints(&MatchingInstance::new(commuters, c)?, params))
}
