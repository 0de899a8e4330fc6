use super::instance::MatchingInstance;
use super::state::CarState;

/// Greedy b-matching driven by the scarcity ordering.
///
/// Each still-unmatched commuter, in global order, becomes the hub of a group
/// and claims its nearest unmatched options until the hub's car is full. The
/// group member who can carry everybody with the fewest empty seats drives;
/// the hub always qualifies, so every group forms a valid car.
pub(crate) fn b_matching(inst: &MatchingInstance) -> CarState {
    let n = inst.len();
    let mut state = CarState::solo(n);
    let mut matched = vec![false; n];
    for hub in inst.global_ordering() {
        if matched[hub] {
            continue;
        }
        matched[hub] = true;
        let mut group = vec![hub];
        let seats = inst.capacity(hub);
        for (j, _) in inst.options_of(hub) {
            if group.len() >= seats {
                break;
            }
            if !matched[j] {
                matched[j] = true;
                group.push(j);
            }
        }
        let driver = pick_driver(inst, &group);
        for &m in &group {
            state.driver_of[m] = driver;
        }
        let mut riders: Vec<usize> = group.into_iter().filter(|&m| m != driver).collect();
        riders.sort_unstable();
        state.riders[driver] = riders;
    }
    state
}

fn pick_driver(inst: &MatchingInstance, group: &[usize]) -> usize {
    group
        .iter()
        .filter_map(|&m| {
            if inst.capacity(m) < group.len() {
                return None;
            }
            let mut total = 0.0;
            for &x in group {
                total += inst.virtual_distance(m, x)?;
            }
            Some((inst.capacity(m) - group.len(), total, inst.option_count(m), m))
        })
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(b.2.cmp(&a.2)).then(a.3.cmp(&b.3)))
        .map(|(_, _, _, m)| m)
        .expect("the hub can always carry its own group")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endpoints::MatchConstraints;
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

    fn solve(all: &[Commuter], delta: f64) -> (MatchingInstance, CarState) {
        let inst = MatchingInstance::new(all, &MatchConstraints::new(delta, None).unwrap()).unwrap();
        let state = b_matching(&inst);
        (inst, state)
    }

    #[test]
    fn two_compatible_commuters_share() {
        let (_, s) = solve(&[at(1, 0.0), at(2, 0.2)], 1.0);
        assert_eq!(s.car_count(), 1);
        assert_eq!(s.driver_of, vec![0, 0]);
    }

    #[test]
    fn four_clones_one_car() {
        let all: Vec<_> = (0..4).map(|i| at(i, 0.0)).collect();
        let (_, s) = solve(&all, 0.0);
        assert_eq!(s.car_count(), 1);
        assert_eq!(s.occupancy(0), 4);
    }

    #[test]
    fn isolated_commuters_drive_alone() {
        let all: Vec<_> = (0..6).map(|i| at(i, i as f64 * 5.0)).collect();
        let (_, s) = solve(&all, 1.0);
        assert_eq!(s.car_count(), 6);
    }

    #[test]
    fn capacity_respected_and_everyone_placed() {
        let all: Vec<_> = (0..11).map(|i| at(i, 0.01 * i as f64)).collect();
        let (inst, s) = solve(&all, 1.0);
        assert_eq!(s.car_count(), 3);
        for d in (0..inst.len()).filter(|&d| s.is_driver(d)) {
            assert!(s.occupancy(d) <= 4);
        }
        let a = s.to_assignment(&inst);
        assert!(crate::endpoints::validate_endpoints(&a, inst.commuters(), inst.constraints()).is_empty());
    }

    #[test]
    fn driver_must_reach_every_member() {
        // Chain 0 - 1 - 2 with 0 and 2 out of range: 0 is scarcest and claims 1,
        // leaving 2 alone. 1 has more options, so 1 drives.
        let all = vec![at(0, 0.0), at(1, 0.6), at(2, 1.2)];
        let (inst, s) = solve(&all, 0.7);
        let a = s.to_assignment(&inst);
        assert!(crate::endpoints::validate_endpoints(&a, inst.commuters(), inst.constraints()).is_empty());
        assert_eq!(s.car_count(), 2);
        assert_eq!(s.driver_of[0], s.driver_of[1]);
        assert!(s.is_driver(2));
        assert!(s.is_driver(1));
    }
}
