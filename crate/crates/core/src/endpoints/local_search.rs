//! Fixed-size neighbourhood local search over the set of drivers.
//!
//! Cars that are already full are frozen. Each iteration samples closures
//! (a driver gives up the car and everybody in it is re-seated) and swaps (a
//! driver hands the wheel to another commuter) and re-solves the transportation
//! problem restricted to the cars around the change. The best strictly
//! improving candidate is applied.

use std::collections::{BTreeSet, HashSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::instance::MatchingInstance;
use super::state::CarState;
use super::transport::assign_min_cost;

const IMPROVEMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalSearchParams {
    pub neighborhood_size: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for LocalSearchParams {
    fn default() -> Self {
        Self { neighborhood_size: 32, max_iters: 50, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Move {
    Close(usize),
    Swap { close: usize, open: usize },
}

impl Move {
    fn closed(self) -> usize {
        match self {
            Move::Close(d) | Move::Swap { close: d, .. } => d,
        }
    }

    fn opened(self) -> Option<usize> {
        match self {
            Move::Close(_) => None,
            Move::Swap { open, .. } => Some(open),
        }
    }
}

struct Candidate {
    delta: f64,
    touched: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    pub iterations: usize,
    pub accepted: usize,
    /// Cost after initialisation and after every accepted move.
    pub cost_trace: Vec<f64>,
}

pub(crate) fn improve(inst: &MatchingInstance, mut state: CarState, params: &LocalSearchParams) -> (CarState, SearchStats) {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut stats = SearchStats { cost_trace: vec![state.cost(inst)], ..Default::default() };
    for _ in 0..params.max_iters {
        let frozen = frozen_members(&state, inst);
        let open: Vec<usize> = (0..inst.len()).filter(|&i| state.is_driver(i) && !frozen[i]).collect();
        if open.is_empty() || params.neighborhood_size == 0 {
            break;
        }
        stats.iterations += 1;
        let moves = sample_moves(inst, &state, &frozen, &open, params.neighborhood_size, &mut rng);
        let best = moves
            .par_iter()
            .enumerate()
            .filter_map(|(k, &mv)| evaluate(inst, &state, &frozen, mv).map(|c| (k, c)))
            .filter(|(_, c)| c.delta < -IMPROVEMENT_TOLERANCE)
            .min_by(|a, b| a.1.delta.total_cmp(&b.1.delta).then(a.0.cmp(&b.0)));
        let Some((k, cand)) = best else {
            break;
        };
        apply(&mut state, moves[k], &cand);
        stats.accepted += 1;
        let prev = *stats.cost_trace.last().unwrap();
        stats.cost_trace.push(prev + cand.delta);
    }
    (state, stats)
}

fn frozen_members(state: &CarState, inst: &MatchingInstance) -> Vec<bool> {
    let mut frozen = vec![false; inst.len()];
    for d in 0..inst.len() {
        if state.is_driver(d) && state.occupancy(d) >= inst.capacity(d) {
            frozen[d] = true;
            for &r in &state.riders[d] {
                frozen[r] = true;
            }
        }
    }
    frozen
}

fn sample_moves(
    inst: &MatchingInstance,
    state: &CarState,
    frozen: &[bool],
    open: &[usize],
    size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Move> {
    let closure_budget = size.div_ceil(2);
    let mut moves: Vec<Move> = if open.len() <= closure_budget {
        open.iter().map(|&d| Move::Close(d)).collect()
    } else {
        let mut picked: Vec<usize> = open.choose_multiple(rng, closure_budget).copied().collect();
        picked.sort_unstable();
        picked.into_iter().map(Move::Close).collect()
    };
    let mut seen: HashSet<Move> = moves.iter().copied().collect();
    let mut attempts = size * 8;
    while moves.len() < size && attempts > 0 {
        attempts -= 1;
        let d = open[rng.random_range(0..open.len())];
        let riders = &state.riders[d];
        let pool = riders.len() + inst.option_count(d);
        if pool == 0 {
            continue;
        }
        let k = rng.random_range(0..pool);
        let o = if k < riders.len() { riders[k] } else { inst.options_of(d).nth(k - riders.len()).unwrap().0 };
        if state.is_driver(o) || frozen[o] {
            continue;
        }
        let mv = Move::Swap { close: d, open: o };
        if seen.insert(mv) {
            moves.push(mv);
        }
    }
    moves
}

/// Re-seats everybody in the cars around `mv` with the new driver set and
/// reports the change in penalty plus distance.
fn evaluate(inst: &MatchingInstance, state: &CarState, frozen: &[bool], mv: Move) -> Option<Candidate> {
    let closed = mv.closed();
    let opened = mv.opened();
    let mut reach: Vec<usize> = std::iter::once(closed).chain(state.riders[closed].iter().copied()).collect();
    reach.extend(opened);

    let mut neighbours: BTreeSet<usize> = BTreeSet::new();
    for &x in &reach {
        for (e, _) in inst.options_of(x) {
            if e != closed && state.is_driver(e) && !frozen[e] {
                neighbours.insert(e);
            }
        }
    }
    if let Some(o) = opened {
        let home_car = state.driver_of[o];
        if home_car != closed {
            neighbours.insert(home_car);
        }
    }

    let mut slots: Vec<usize> = neighbours.iter().copied().collect();
    slots.extend(opened);
    let mut passengers: Vec<usize> = std::iter::once(closed).chain(state.riders[closed].iter().copied()).collect();
    for &e in &neighbours {
        passengers.extend(state.riders[e].iter().copied());
    }
    if let Some(o) = opened {
        passengers.retain(|&p| p != o);
    }
    let capacities: Vec<u32> = slots.iter().map(|&s| inst.capacity(s) as u32 - 1).collect();
    if capacities.iter().map(|&c| c as usize).sum::<usize>() < passengers.len() {
        return None;
    }

    let old_distance: f64 = state.car_distance(inst, closed) + neighbours.iter().map(|&e| state.car_distance(inst, e)).sum::<f64>();
    let mut arcs = Vec::new();
    for (p, &x) in passengers.iter().enumerate() {
        for (s, &driver) in slots.iter().enumerate() {
            if let Some(d) = inst.virtual_distance(driver, x) {
                arcs.push((p, s, d));
            }
        }
    }
    let seated = assign_min_cost(&capacities, passengers.len(), &arcs).ok()?;
    let penalty_change = opened.map_or(0.0, |o| inst.penalty(o)) - inst.penalty(closed);
    let delta = penalty_change + seated.total - old_distance;
    let mut touched = slots.clone();
    touched.push(closed);
    let pairs = passengers.iter().zip(&seated.driver_of).map(|(&p, &s)| (p, slots[s])).collect();
    Some(Candidate { delta, touched, pairs })
}

fn apply(state: &mut CarState, mv: Move, cand: &Candidate) {
    for &d in &cand.touched {
        state.riders[d].clear();
    }
    if let Some(o) = mv.opened() {
        state.driver_of[o] = o;
    }
    for &(p, d) in &cand.pairs {
        state.driver_of[p] = d;
        state.riders[d].push(p);
    }
    for &d in &cand.touched {
        state.riders[d].sort_unstable();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endpoints::{validate_endpoints, MatchConstraints};
    use crate::geo::GeoPoint;
    use crate::population::{Commuter, CommuterId};

    fn at(id: u64, north: f64) -> Commuter {
        let home = GeoPoint { lat: 40.4, lon: -3.7 }.offset_km(north, 0.0);
        Commuter {
            id: CommuterId(id),
            home,
            work: home.offset_km(8.0, 8.0),
            leave_home: 540,
            leave_work: 1020,
            capacity: 4,
            has_car: true,
        }
    }

    fn instance(all: &[Commuter], delta: f64) -> MatchingInstance {
        MatchingInstance::new(all, &MatchConstraints::new(delta, None).unwrap()).unwrap()
    }

    fn state_from_cars(n: usize, cars: &[&[usize]]) -> CarState {
        let mut s = CarState::solo(n);
        for car in cars {
            let d = car[0];
            for &m in *car {
                s.driver_of[m] = d;
            }
            s.riders[d] = car[1..].to_vec();
        }
        s
    }

    #[test]
    fn full_cars_untouched() {
        let all: Vec<_> = (0..8).map(|i| at(i, 0.0)).collect();
        let inst = instance(&all, 0.5);
        let s0 = state_from_cars(8, &[&[0, 1, 2, 3], &[4, 5, 6, 7]]);
        let (s, stats) = improve(&inst, s0.clone(), &LocalSearchParams::default());
        assert_eq!(s, s0);
        assert_eq!(stats.accepted, 0);
    }

    #[test]
    fn singleton_absorbed() {
        let all: Vec<_> = (0..3).map(|i| at(i, 0.0)).collect();
        let inst = instance(&all, 1.0);
        let s0 = state_from_cars(3, &[&[0, 1], &[2]]);
        let (s, stats) = improve(&inst, s0.clone(), &LocalSearchParams::default());
        assert_eq!(s.car_count(), 1);
        assert_eq!(s.occupancy(s.driver_of[0]), 3);
        assert!(stats.cost_trace.last().unwrap() < &s0.cost(&inst));
        assert!((stats.cost_trace.last().unwrap() - s.cost(&inst)).abs() < 1e-9);
    }

    #[test]
    fn zero_iterations_is_identity() {
        let all: Vec<_> = (0..3).map(|i| at(i, 0.0)).collect();
        let inst = instance(&all, 1.0);
        let s0 = state_from_cars(3, &[&[0, 1], &[2]]);
        let params = LocalSearchParams { max_iters: 0, ..Default::default() };
        assert_eq!(improve(&inst, s0.clone(), &params).0, s0);
    }

    #[test]
    fn chain_merges_after_bmatching() {
        let all = vec![at(0, 0.0), at(1, 0.6), at(2, 1.2)];
        let inst = instance(&all, 0.7);
        let (s, _) = improve(&inst, super::super::bmatching::b_matching(&inst), &LocalSearchParams::default());
        assert_eq!(s.car_count(), 1);
        assert!(validate_endpoints(&s.to_assignment(&inst), inst.commuters(), inst.constraints()).is_empty());
    }

    #[test]
    fn swap_reduces_pickup_distance() {
        // Driver 0 sits at the edge; handing the wheel to the middle commuter 1 is cheaper.
        let all = vec![at(0, 0.0), at(1, 0.4), at(2, 0.8)];
        let inst = instance(&all, 1.0);
        let s0 = state_from_cars(3, &[&[0, 1, 2]]);
        let (s, _) = improve(&inst, s0.clone(), &LocalSearchParams::default());
        assert!(s.is_driver(1));
        assert!(s.cost(&inst) < s0.cost(&inst));
    }

    #[test]
    fn cost_trace_monotone_on_random_city() {
        let cfg = crate::population::CityConfig::preset("clustered-metro", 1500, 3).unwrap();
        let all = crate::population::generate_city(&cfg).unwrap();
        let inst = MatchingInstance::new(&all, &MatchConstraints::new(1.0, Some(10)).unwrap()).unwrap();
        let s0 = super::super::bmatching::b_matching(&inst);
        let (s, stats) = improve(&inst, s0.clone(), &LocalSearchParams { seed: 7, ..Default::default() });
        assert!(stats.cost_trace.windows(2).all(|w| w[1] < w[0]));
        assert!(s.car_count() <= s0.car_count());
        assert!(validate_endpoints(&s.to_assignment(&inst), inst.commuters(), inst.constraints()).is_empty());
        let again = improve(&inst, s0, &LocalSearchParams { seed: 7, ..Default::default() }).0;
        assert_eq!(s, again);
    }
}
