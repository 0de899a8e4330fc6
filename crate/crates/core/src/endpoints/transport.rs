//! Min-cost assignment of unit passenger demands to driver seats.
//!
//! Successive shortest paths with Dijkstra on reduced costs. Costs are scaled
//! to integers so that ties resolve identically on every platform.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::constraints::{virtual_distance, MatchConstraints};
use super::MatchError;
use crate::population::{Commuter, CommuterId};

const COST_SCALE: f64 = 1e9;

struct Edge {
    to: usize,
    cap: i64,
    cost: i64,
}

struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self { edges: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    /// Pushes up to `limit` units from `s` to `t` along cheapest paths.
    fn min_cost_flow(&mut self, s: usize, t: usize, limit: i64) -> i64 {
        let n = self.adj.len();
        let mut potential = vec![0i64; n];
        let mut flow = 0;
        let mut dist = vec![i64::MAX; n];
        let mut prev_edge = vec![usize::MAX; n];
        while flow < limit {
            dist.fill(i64::MAX);
            prev_edge.fill(usize::MAX);
            dist[s] = 0;
            let mut heap = BinaryHeap::from([Reverse((0i64, s))]);
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &e in &self.adj[u] {
                    let edge = &self.edges[e];
                    if edge.cap <= 0 {
                        continue;
                    }
                    let nd = d + edge.cost + potential[u] - potential[edge.to];
                    if nd < dist[edge.to] {
                        dist[edge.to] = nd;
                        prev_edge[edge.to] = e;
                        heap.push(Reverse((nd, edge.to)));
                    }
                }
            }
            if dist[t] == i64::MAX {
                break;
            }
            for v in 0..n {
                if dist[v] != i64::MAX {
                    potential[v] += dist[v];
                }
            }
            let mut push = limit - flow;
            let mut v = t;
            while v != s {
                let e = prev_edge[v];
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let e = prev_edge[v];
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                v = self.edges[e ^ 1].to;
            }
            flow += push;
        }
        flow
    }
}

/// Result of [`assign_min_cost`]: one driver slot per passenger.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SlotAssignment {
    pub driver_of: Vec<usize>,
    pub total: f64,
}

/// Assigns passengers `0..n_passengers` to driver slots `0..capacities.len()`.
///
/// `arcs` lists the feasible `(passenger, slot, cost)` triples. On failure
/// returns the passengers left unplaced by a maximum flow.
pub(crate) fn assign_min_cost(
    capacities: &[u32],
    n_passengers: usize,
    arcs: &[(usize, usize, f64)],
) -> Result<SlotAssignment, Vec<usize>> {
    let n_drivers = capacities.len();
    let source = n_passengers + n_drivers;
    let sink = source + 1;
    let mut net = FlowNetwork::new(sink + 1);
    let supply: Vec<usize> = (0..n_passengers).map(|p| net.add_edge(source, p, 1, 0)).collect();
    let arc_edges: Vec<usize> = arcs
        .iter()
        .map(|&(p, d, cost)| net.add_edge(p, n_passengers + d, 1, (cost * COST_SCALE).round() as i64))
        .collect();
    for (d, &cap) in capacities.iter().enumerate() {
        net.add_edge(n_passengers + d, sink, cap as i64, 0);
    }
    let flow = net.min_cost_flow(source, sink, n_passengers as i64);
    if flow < n_passengers as i64 {
        return Err((0..n_passengers).filter(|&p| net.edges[supply[p]].cap > 0).collect());
    }
    let mut driver_of = vec![usize::MAX; n_passengers];
    let mut total = 0.0;
    for (&(p, d, cost), &e) in arcs.iter().zip(&arc_edges) {
        if net.edges[e].cap == 0 {
            driver_of[p] = d;
            total += cost;
        }
    }
    Ok(SlotAssignment { driver_of, total })
}

/// A driver already on the road with seats left.
#[derive(Debug, Clone, Copy)]
pub struct OpenDriver<'a> {
    pub commuter: &'a Commuter,
    pub residual: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `(passenger, driver)` pairs in passenger input order.
    pub pairs: Vec<(CommuterId, CommuterId)>,
    pub total_distance: f64,
}

/// Exact min-total-virtual-distance placement of passengers into open seats.
pub fn solve_transportation(
    open_drivers: &[OpenDriver<'_>],
    passengers: &[&Commuter],
    c: &MatchConstraints,
) -> Result<TransportPlan, MatchError> {
    let mut arcs = Vec::new();
    let mut stranded = Vec::new();
    for (p, passenger) in passengers.iter().enumerate() {
        let before = arcs.len();
        for (d, driver) in open_drivers.iter().enumerate() {
            if driver.residual == 0 {
                continue;
            }
            if let Some(cost) = virtual_distance(driver.commuter, passenger, c) {
                arcs.push((p, d, cost));
            }
        }
        if arcs.len() == before {
            stranded.push(passenger.id);
        }
    }
    if !stranded.is_empty() {
        return Err(MatchError::Infeasible { unplaced: stranded });
    }
    let capacities: Vec<u32> = open_drivers.iter().map(|d| d.residual).collect();
    let slots = assign_min_cost(&capacities, passengers.len(), &arcs).map_err(|unplaced| MatchError::Infeasible {
        unplaced: unplaced.into_iter().map(|p| passengers[p].id).collect(),
    })?;
    Ok(TransportPlan {
        pairs: slots
            .driver_of
            .iter()
            .enumerate()
            .map(|(p, &d)| (passengers[p].id, open_drivers[d].commuter.id))
            .collect(),
        total_distance: slots.total,
    })
}
