use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::constraints::{virtual_distance, ConstraintsSummary, MatchConstraints};
use super::MatchError;
use crate::geo::distance_km;
use crate::population::{Commuter, CommuterId};

/// Chosen drivers and the driver every commuter rides with.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub drivers: BTreeSet<CommuterId>,
    pub assigned: BTreeMap<CommuterId, CommuterId>,
}

impl Assignment {
    /// Everybody drives alone.
    pub fn solo(commuters: &[Commuter]) -> Self {
        Self {
            drivers: commuters.iter().map(|c| c.id).collect(),
            assigned: commuters.iter().map(|c| (c.id, c.id)).collect(),
        }
    }

    pub fn car_count(&self) -> usize {
        self.drivers.len()
    }

    pub fn person_count(&self) -> usize {
        self.assigned.len()
    }

    /// Members of each car keyed by driver, driver included, ascending ids.
    pub fn cars(&self) -> BTreeMap<CommuterId, Vec<CommuterId>> {
        let mut cars: BTreeMap<CommuterId, Vec<CommuterId>> =
            self.drivers.iter().map(|&d| (d, Vec::new())).collect();
        for (&v, &d) in &self.assigned {
            cars.entry(d).or_default().push(v);
        }
        cars
    }

    pub fn occupancy(&self, driver: CommuterId) -> usize {
        self.assigned.values().filter(|&&d| d == driver).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub penalty_cost: f64,
    pub distance_cost: f64,
    pub car_count: usize,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.penalty_cost + self.distance_cost
    }
}

/// Penalty of the chosen drivers plus every passenger's home and work
/// distance to their driver.
///
/// On an assignment that is feasible under `c` the distance term equals the
/// sum of virtual distances.
pub fn total_cost(a: &Assignment, commuters: &[Commuter], c: &MatchConstraints) -> CostBreakdown {
    let by_id: HashMap<CommuterId, &Commuter> = commuters.iter().map(|x| (x.id, x)).collect();
    let penalty_cost = a.drivers.iter().filter_map(|d| by_id.get(d)).map(|d| c.penalty(d)).sum();
    let distance_cost = a
        .assigned
        .iter()
        .filter(|(v, d)| v != d)
        .filter_map(|(v, d)| Some((by_id.get(v)?, by_id.get(d)?)))
        .map(|(v, d)| distance_km(v.home, d.home) + distance_km(v.work, d.work))
        .sum();
    CostBreakdown { penalty_cost, distance_cost, car_count: a.car_count() }
}

/// Percentage of cars removed: `100 * (before - after) / before`.
pub fn success_ratio(cars_before: usize, cars_after: usize) -> Result<f64, MatchError> {
    if cars_before == 0 {
        return Err(MatchError::NoCars);
    }
    Ok(100.0 * (cars_before as f64 - cars_after as f64) / cars_before as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Unassigned(CommuterId),
    UnknownCommuter(CommuterId),
    DriverNotSelf(CommuterId),
    NotADriver { passenger: CommuterId, driver: CommuterId },
    OverCapacity { driver: CommuterId, occupancy: usize, capacity: u32 },
    Infeasible { driver: CommuterId, passenger: CommuterId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unassigned(v) => write!(f, "commuter {v} has no car"),
            Violation::UnknownCommuter(v) => write!(f, "assignment mentions unknown commuter {v}"),
            Violation::DriverNotSelf(d) => write!(f, "driver {d} is not assigned to their own car"),
            Violation::NotADriver { passenger, driver } => {
                write!(f, "commuter {passenger} rides with {driver}, who is not a driver")
            }
            Violation::OverCapacity { driver, occupancy, capacity } => {
                write!(f, "car of {driver} carries {occupancy} people but has {capacity} seats")
            }
            Violation::Infeasible { driver, passenger } => {
                write!(f, "pair driver {driver} / passenger {passenger} violates the constraints")
            }
        }
    }
}

/// Structural checks plus a caller-supplied pair predicate `(driver, passenger)`.
pub fn validate_with<F>(a: &Assignment, commuters: &[Commuter], mut pair_ok: F) -> Vec<Violation>
where
    F: FnMut(&Commuter, &Commuter) -> bool,
{
    let by_id: HashMap<CommuterId, &Commuter> = commuters.iter().map(|x| (x.id, x)).collect();
    let mut out = Vec::new();
    for c in commuters {
        if !a.assigned.contains_key(&c.id) {
            out.push(Violation::Unassigned(c.id));
        }
    }
    for id in a.assigned.keys().chain(a.drivers.iter()) {
        if !by_id.contains_key(id) {
            out.push(Violation::UnknownCommuter(*id));
        }
    }
    for d in &a.drivers {
        if a.assigned.get(d) != Some(d) {
            out.push(Violation::DriverNotSelf(*d));
        }
    }
    let mut occupancy: BTreeMap<CommuterId, usize> = BTreeMap::new();
    for (&v, &d) in &a.assigned {
        if !a.drivers.contains(&d) {
            out.push(Violation::NotADriver { passenger: v, driver: d });
            continue;
        }
        *occupancy.entry(d).or_default() += 1;
        if v == d {
            continue;
        }
        if let (Some(dc), Some(vc)) = (by_id.get(&d), by_id.get(&v)) {
            if !pair_ok(dc, vc) {
                out.push(Violation::Infeasible { driver: d, passenger: v });
            }
        }
    }
    for (d, occ) in occupancy {
        if let Some(dc) = by_id.get(&d) {
            if occ > dc.capacity as usize {
                out.push(Violation::OverCapacity { driver: d, occupancy: occ, capacity: dc.capacity });
            }
        }
    }
    out
}

/// Full end-points validator: structure, capacity and pairwise feasibility.
pub fn validate_endpoints(a: &Assignment, commuters: &[Commuter], c: &MatchConstraints) -> Vec<Violation> {
    validate_with(a, commuters, |d, v| virtual_distance(d, v, c).is_some())
}

/// JSON document for an assignment.
///
/// `assigned` maps every commuter id to its driver id; ids are strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentDocument {
    pub drivers: Vec<CommuterId>,
    pub assigned: BTreeMap<CommuterId, CommuterId>,
    pub constraints: ConstraintsSummary,
    pub cost: CostBreakdown,
    /// Route of each car as `[row, col]` grid cells, keyed by driver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routes: Option<BTreeMap<CommuterId, Vec<[usize; 2]>>>,
}

impl AssignmentDocument {
    pub fn new(a: &Assignment, commuters: &[Commuter], c: &MatchConstraints) -> Self {
        Self {
            drivers: a.drivers.iter().copied().collect(),
            assigned: a.assigned.clone(),
            constraints: c.summary(),
            cost: total_cost(a, commuters, c),
            routes: None,
        }
    }

    pub fn assignment(&self) -> Assignment {
        Assignment { drivers: self.drivers.iter().copied().collect(), assigned: self.assigned.clone() }
    }
}
