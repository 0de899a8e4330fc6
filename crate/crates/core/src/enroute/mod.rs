//! En-route ride sharing: drivers may also collect commuters whose trips their
//! route covers. Cars with more people steal riders from cars with fewer until
//! nothing moves.

mod route;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use thiserror::Error;

pub use route::{compute_route, Route, RouteGrid, DEFAULT_ROUTE_CELL_KM};

use crate::endpoints::{success_ratio, validate_with, Assignment, MatchConstraints, MatchError, Violation};
use crate::geo::{GeoError, GridCell};
use crate::population::{Commuter, CommuterId};

#[derive(Debug, Error)]
pub enum EnrouteError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("cell ({}, {}) holds a home or workplace but is blocked", .cell.row, .cell.col)]
    BlockedEndpoint { cell: GridCell },
    #[error("no route from ({}, {}) to ({}, {})", .from.row, .from.col, .to.row, .to.col)]
    Unreachable { from: GridCell, to: GridCell },
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("starting assignment is invalid: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidStart(Vec<Violation>),
}

/// Whether `driver`, following `route`, can carry `passenger`.
///
/// Some route cell must lie within delta of the passenger's home and a later
/// or equal one within delta of their work; cell-to-point distances are
/// measured to the nearest point of the cell. Time and social constraints are
/// checked between driver and passenger.
pub fn can_pick_up(driver: &Commuter, route: &Route, passenger: &Commuter, c: &MatchConstraints, grid: &RouteGrid) -> bool {
    if driver.id == passenger.id {
        return true;
    }
    if !c.time_compatible(driver, passenger) || !c.socially_compatible(driver, passenger) {
        return false;
    }
    let near = |cell: &GridCell, p| grid.frame.cell_bounds(*cell).distance_km(p) <= c.delta_km;
    let Some(first_home) = route.cells.iter().position(|cell| near(cell, passenger.home)) else {
        return false;
    };
    route.cells[first_home..].iter().any(|cell| near(cell, passenger.work))
}

/// Validator for en-route assignments: structure, capacity and `can_pick_up`
/// for every passenger against their driver's route.
pub fn validate_enroute(a: &Assignment, commuters: &[Commuter], c: &MatchConstraints, grid: &RouteGrid) -> Vec<Violation> {
    let by_id: HashMap<CommuterId, &Commuter> = commuters.iter().map(|x| (x.id, x)).collect();
    let routes: HashMap<CommuterId, Option<Route>> = a
        .drivers
        .par_iter()
        .filter_map(|d| by_id.get(d))
        .map(|d| (d.id, compute_route(d.home, d.work, grid).ok()))
        .collect();
    validate_with(a, commuters, |d, p| {
        routes.get(&d.id).and_then(Option::as_ref).is_some_and(|r| can_pick_up(d, r, p, c, grid))
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnrouteParams {
    /// Require strictly more occupants to steal; the default also lets a car
    /// steal from an equally full one later in the routing order.
    pub strict_richer: bool,
}

#[derive(Debug, Clone)]
pub struct EnrouteOutcome {
    pub assignment: Assignment,
    /// Sweeps run, including the final one that changed nothing.
    pub sweeps: usize,
    pub initial_cars: usize,
    pub steals: usize,
    /// Route of every car in the final assignment, keyed by driver.
    pub routes: BTreeMap<CommuterId, Route>,
}

struct Cars {
    driver_of: Vec<usize>,
    riders: Vec<Vec<usize>>,
}

impl Cars {
    fn is_driver(&self, i: usize) -> bool {
        self.driver_of[i] == i
    }

    fn occupancy(&self, d: usize) -> usize {
        self.riders[d].len() + 1
    }
}

/// Rich-get-richer improvement of a valid end-points assignment.
pub fn enroute_solve(
    a0: &Assignment,
    all: &[Commuter],
    c: &MatchConstraints,
    grid: &RouteGrid,
    params: &EnrouteParams,
) -> Result<EnrouteOutcome, EnrouteError> {
    c.validate()?;
    grid.check_population(all)?;
    let violations = validate_enroute(a0, all, c, grid);
    if !violations.is_empty() {
        return Err(EnrouteError::InvalidStart(violations));
    }
    let mut people = all.to_vec();
    people.sort_by_key(|p| p.id);
    let index_of: HashMap<CommuterId, usize> = people.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
    let n = people.len();
    let mut cars = Cars { driver_of: (0..n).collect(), riders: vec![Vec::new(); n] };
    for (v, d) in &a0.assigned {
        let (vi, di) = (index_of[v], index_of[d]);
        cars.driver_of[vi] = di;
        if vi != di {
            cars.riders[di].push(vi);
        }
    }
    let initial_cars = a0.car_count();
    let index = HomeIndex::new(&people, grid, c.delta_km);
    let mut routes: HashMap<usize, Route> = HashMap::new();
    let mut reach: HashMap<usize, Vec<usize>> = HashMap::new();
    let capacity = |i: usize| people[i].capacity as usize;

    let mut sweeps = 0;
    let mut steals = 0;
    loop {
        sweeps += 1;
        let mut order: Vec<usize> = (0..n).filter(|&d| cars.is_driver(d) && cars.occupancy(d) < capacity(d)).collect();
        order.sort_by_key(|&d| (std::cmp::Reverse(cars.occupancy(d)), people[d].id));
        let mut position = vec![usize::MAX; n];
        for (k, &d) in order.iter().enumerate() {
            position[d] = k;
        }

        let missing: Vec<usize> = order.iter().copied().filter(|d| !routes.contains_key(d)).collect();
        let fresh: Vec<(usize, Route, Vec<usize>)> = missing
            .into_par_iter()
            .map(|d| {
                let driver = &people[d];
                let r = compute_route(driver.home, driver.work, grid)?;
                let mut found: Vec<usize> = index
                    .near_route(&r, grid)
                    .into_iter()
                    .filter(|&p| p != d && can_pick_up(driver, &r, &people[p], c, grid))
                    .collect();
                found.sort_unstable();
                Ok((d, r, found))
            })
            .collect::<Result<_, EnrouteError>>()?;
        for (d, r, found) in fresh {
            routes.insert(d, r);
            reach.insert(d, found);
        }

        let before = steals;
        for (k, &v) in order.iter().enumerate() {
            if !cars.is_driver(v) || cars.occupancy(v) >= capacity(v) {
                continue;
            }
            let mut candidates: Vec<(usize, bool, CommuterId, usize)> = reach[&v]
                .iter()
                .filter(|&&p| position[cars.driver_of[p]] != usize::MAX && position[cars.driver_of[p]] > k)
                .map(|&p| (position[cars.driver_of[p]], cars.is_driver(p), people[p].id, p))
                .collect();
            candidates.sort_unstable();
            loop {
                let mut moved = false;
                for &(_, _, _, p) in &candidates {
                    if cars.occupancy(v) >= capacity(v) {
                        break;
                    }
                    let from = cars.driver_of[p];
                    if from == v || (p == from && cars.occupancy(from) > 1) {
                        continue;
                    }
                    let (mine, theirs) = (cars.occupancy(v), cars.occupancy(from));
                    if mine < theirs || (params.strict_richer && mine == theirs) {
                        continue;
                    }
                    if p == from {
                        cars.riders[from].clear();
                    } else {
                        cars.riders[from].retain(|&x| x != p);
                    }
                    cars.driver_of[p] = v;
                    cars.riders[v].push(p);
                    steals += 1;
                    moved = true;
                }
                if !moved {
                    break;
                }
            }
            cars.riders[v].sort_unstable();
        }
        if steals == before {
            break;
        }
    }

    let id = |i: usize| people[i].id;
    let assignment = Assignment {
        drivers: (0..n).filter(|&d| cars.is_driver(d)).map(id).collect(),
        assigned: (0..n).map(|v| (id(v), id(cars.driver_of[v]))).collect(),
    };
    let final_routes = (0..n)
        .into_par_iter()
        .filter(|&d| cars.is_driver(d))
        .map(|d| match routes.get(&d) {
            Some(r) => Ok((id(d), r.clone())),
            None => compute_route(people[d].home, people[d].work, grid).map(|r| (id(d), r)),
        })
        .collect::<Result<_, EnrouteError>>()?;
    Ok(EnrouteOutcome { assignment, sweeps, initial_cars, steals, routes: final_routes })
}

/// Success ratio of an en-route result against the population's car count.
pub fn savings_report(cars_before: usize, a_end: &Assignment) -> Result<f64, MatchError> {
    success_ratio(cars_before, a_end.car_count())
}

/// Commuters bucketed by the grid cell of their home.
struct HomeIndex {
    by_cell: HashMap<GridCell, Vec<usize>>,
    reach_cells: usize,
}

impl HomeIndex {
    fn new(people: &[Commuter], grid: &RouteGrid, delta_km: f64) -> Self {
        let mut by_cell: HashMap<GridCell, Vec<usize>> = HashMap::new();
        for (i, p) in people.iter().enumerate() {
            if let Ok(cell) = grid.frame.to_cell(p.home) {
                by_cell.entry(cell).or_default().push(i);
            }
        }
        // Column boundaries shift slightly between rows; one spare ring covers it.
        let reach_cells = (delta_km / grid.frame.cell_km).ceil() as usize + 2;
        Self { by_cell, reach_cells }
    }

    /// Everybody whose home cell is within the search ring of some route cell.
    fn near_route(&self, route: &Route, grid: &RouteGrid) -> Vec<usize> {
        let k = self.reach_cells;
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for cell in &route.cells {
            for row in cell.row.saturating_sub(k)..=(cell.row + k).min(grid.frame.rows.saturating_sub(1)) {
                for col in cell.col.saturating_sub(k)..=(cell.col + k).min(grid.frame.cols.saturating_sub(1)) {
                    let here = GridCell::new(row, col);
                    if seen.insert(here) {
                        if let Some(list) = self.by_cell.get(&here) {
                            out.extend_from_slice(list);
                        }
                    }
                }
            }
        }
        out
    }
}
