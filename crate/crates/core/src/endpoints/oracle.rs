//! Exhaustive solver for tiny instances, used to check the heuristic.
//!
//! Shares only the pair predicate with the production path; the assignment
//! step is a depth-first search, not a flow computation.

use super::assignment::Assignment;
use super::constraints::{virtual_distance, MatchConstraints};
use super::MatchError;
use crate::population::Commuter;

pub const BRUTE_FORCE_LIMIT: usize = 12;

/// Optimal assignment by enumeration of driver sets.
///
/// Returns the cheapest (penalty plus distance) assignment among those using
/// the fewest cars. Driver sets are enumerated by size; for each set every
/// feasible passenger placement is searched with a distance bound.
pub fn brute_force_optimal(all: &[Commuter], c: &MatchConstraints) -> Result<Assignment, MatchError> {
    c.validate()?;
    let n = all.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(MatchError::TooLarge { n, max: BRUTE_FORCE_LIMIT });
    }
    if n == 0 {
        return Ok(Assignment::default());
    }
    let mut people = all.to_vec();
    people.sort_by_key(|p| p.id);
    let dist: Vec<Vec<Option<f64>>> =
        people.iter().map(|a| people.iter().map(|b| virtual_distance(a, b, c)).collect()).collect();

    for size in 1..=n {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for mask in 1u32..(1 << n) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let drivers: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            let penalty: f64 = drivers.iter().map(|&d| c.penalty(&people[d])).sum();
            if best.as_ref().is_some_and(|(b, _)| penalty >= *b) {
                continue;
            }
            let bound = best.as_ref().map_or(f64::INFINITY, |(b, _)| b - penalty);
            if let Some((d, seats)) = place_passengers(&people, &dist, &drivers, mask, bound) {
                best = Some((penalty + d, seats));
            }
        }
        if let Some((_, seats)) = best {
            let mut a = Assignment::default();
            for (v, &d) in seats.iter().enumerate() {
                if v == d {
                    a.drivers.insert(people[d].id);
                }
                a.assigned.insert(people[v].id, people[d].id);
            }
            return Ok(a);
        }
    }
    unreachable!("everybody driving alone is always feasible")
}

/// Cheapest placement of non-drivers into the given cars with total distance
/// strictly below `bound`.
fn place_passengers(
    people: &[Commuter],
    dist: &[Vec<Option<f64>>],
    drivers: &[usize],
    mask: u32,
    bound: f64,
) -> Option<(f64, Vec<usize>)> {
    let n = people.len();
    let mut riders: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
    for v in (0..n).filter(|&v| mask & (1 << v) == 0) {
        let mut choices: Vec<(usize, f64)> =
            drivers.iter().enumerate().filter_map(|(k, &d)| dist[d][v].map(|x| (k, x))).collect();
        if choices.is_empty() {
            return None;
        }
        choices.sort_by(|a, b| a.1.total_cmp(&b.1));
        riders.push((v, choices));
    }
    riders.sort_by_key(|(v, ch)| (ch.len(), *v));
    // Remaining-distance lower bound: suffix sums of each rider's cheapest option.
    let mut floor = vec![0.0; riders.len() + 1];
    for i in (0..riders.len()).rev() {
        floor[i] = floor[i + 1] + riders[i].1[0].1;
    }
    let mut seats_left: Vec<usize> = drivers.iter().map(|&d| people[d].capacity as usize - 1).collect();
    let mut current = vec![usize::MAX; riders.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut limit = bound;

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        i: usize,
        acc: f64,
        riders: &[(usize, Vec<(usize, f64)>)],
        floor: &[f64],
        seats_left: &mut [usize],
        current: &mut [usize],
        limit: &mut f64,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if acc + floor[i] >= *limit {
            return;
        }
        if i == riders.len() {
            *limit = acc;
            *best = Some((acc, current.to_vec()));
            return;
        }
        for &(k, d) in &riders[i].1 {
            if seats_left[k] == 0 {
                continue;
            }
            seats_left[k] -= 1;
            current[i] = k;
            dfs(i + 1, acc + d, riders, floor, seats_left, current, limit, best);
            seats_left[k] += 1;
        }
    }

    dfs(0, 0.0, &riders, &floor, &mut seats_left, &mut current, &mut limit, &mut best);
    let (total, slots) = best?;
    let mut seats: Vec<usize> = (0..n).collect();
    for ((v, _), &k) in riders.iter().zip(&slots) {
        seats[*v] = drivers[k];
    }
    Some((total, seats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endpoints::{total_cost, validate_endpoints};
    use crate::geo::GeoPoint;
    use crate::population::CommuterId;

    fn at(id: u64, north: f64, east: f64) -> Commuter {
        let home = GeoPoint { lat: 40.4, lon: -3.7 }.offset_km(north, east);
        Commuter {
            id: CommuterId(id),
            home,
            work: home.offset_km(6.0, 6.0),
            leave_home: 540,
            leave_work: 1020,
            capacity: 4,
            has_car: true,
        }
    }

    #[test]
    fn single_commuter() {
        let c = MatchConstraints::new(1.0, None).unwrap();
        let a = brute_force_optimal(&[at(1, 0.0, 0.0)], &c).unwrap();
        assert_eq!(a.car_count(), 1);
    }

    #[test]
    fn four_clones() {
        let all: Vec<_> = (0..4).map(|i| at(i, 0.0, 0.0)).collect();
        let c = MatchConstraints::new(1.0, None).unwrap();
        let a = brute_force_optimal(&all, &c).unwrap();
        assert_eq!(a.car_count(), 1);
        let cost = total_cost(&a, &all, &c);
        assert_eq!(cost.total(), c.penalty(&all[0]));
    }

    #[test]
    fn refuses_large_instances() {
        let all: Vec<_> = (0..13).map(|i| at(i, 0.0, 0.0)).collect();
        let c = MatchConstraints::new(1.0, None).unwrap();
        assert!(matches!(brute_force_optimal(&all, &c), Err(MatchError::TooLarge { n: 13, .. })));
    }

    #[test]
    fn picks_central_driver() {
        let all = vec![at(0, 0.0, 0.0), at(1, 0.45, 0.0), at(2, 0.9, 0.0)];
        let c = MatchConstraints::new(0.5, None).unwrap();
        let a = brute_force_optimal(&all, &c).unwrap();
        assert_eq!(a.drivers.iter().copied().collect::<Vec<_>>(), vec![CommuterId(1)]);
        assert!(validate_endpoints(&a, &all, &c).is_empty());
    }

    #[test]
    fn mixed_capacities() {
        // 5 clones; one has a 5-seat car.
        let mut all: Vec<_> = (0..5).map(|i| at(i, 0.0, 0.0)).collect();
        all[3].capacity = 5;
        let c = MatchConstraints::new(0.5, None).unwrap();
        let a = brute_force_optimal(&all, &c).unwrap();
        assert_eq!(a.car_count(), 1);
        assert!(a.drivers.contains(&CommuterId(3)));
    }
}
