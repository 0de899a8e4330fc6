use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::CdrEvent;
use crate::geo::{distance_km, GeoPoint};

pub const DEFAULT_MERGE_RADIUS_KM: f64 = 1.0;

/// Home hours wrap midnight: [19:00, 07:00).
pub(crate) fn is_home_hour(minute: u32) -> bool {
    !(7 * 60..19 * 60).contains(&minute)
}

/// Work hours: [13:00, 17:00).
pub(crate) fn is_work_hour(minute: u32) -> bool {
    (13 * 60..17 * 60).contains(&minute)
}

/// Total order on tower locations, used as a map key.
pub(crate) fn tower_key(p: GeoPoint) -> (u64, u64) {
    // Shift into the non-negative range so bit patterns order like the values.
    ((p.lat + 90.0).to_bits(), (p.lon + 180.0).to_bits())
}

/// A group of towers a user frequents, with its activity features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceCluster {
    pub centroid: GeoPoint,
    /// Member towers in ascending coordinate order.
    pub towers: Vec<GeoPoint>,
    pub days_appeared: u32,
    pub duration_weeks: u32,
    /// 1 for the cluster seen on the most days.
    pub rank: u32,
    pub home_hour_events: u32,
    pub work_hour_events: u32,
    pub events: u32,
    pub first_day: i64,
    pub last_day: i64,
}

impl PlaceCluster {
    pub fn contains(&self, tower: GeoPoint) -> bool {
        self.towers.binary_search_by_key(&tower_key(tower), |&t| tower_key(t)).is_ok()
    }
}

#[derive(Default)]
struct TowerStats {
    days: BTreeSet<i64>,
    home: u32,
    work: u32,
    events: u32,
}

/// Single-linkage clustering of a user's towers.
///
/// Towers chained by hops of at most `merge_radius_km` share a cluster. The
/// result is sorted by rank.
pub fn cluster_events(events: &[CdrEvent], merge_radius_km: f64) -> Vec<PlaceCluster> {
    let mut per_tower: BTreeMap<(u64, u64), (GeoPoint, TowerStats)> = BTreeMap::new();
    for e in events {
        let (_, s) = per_tower.entry(tower_key(e.tower)).or_insert_with(|| (e.tower, TowerStats::default()));
        let minute = e.minute_of_day();
        s.days.insert(e.day());
        s.home += u32::from(is_home_hour(minute));
        s.work += u32::from(is_work_hour(minute));
        s.events += 1;
    }
    let towers: Vec<(GeoPoint, TowerStats)> = per_tower.into_values().collect();

    let mut parent: Vec<usize> = (0..towers.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..towers.len() {
        for j in (i + 1)..towers.len() {
            if distance_km(towers[i].0, towers[j].0) <= merge_radius_km {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..towers.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }

    let mut clusters: Vec<PlaceCluster> = groups
        .into_values()
        .map(|members| {
            let mut days = BTreeSet::new();
            let (mut lat, mut lon, mut weight) = (0.0, 0.0, 0.0);
            let (mut home, mut work, mut count) = (0, 0, 0);
            for &m in &members {
                let (p, s) = &towers[m];
                let w = s.days.len() as f64;
                lat += w * p.lat;
                lon += w * p.lon;
                weight += w;
                days.extend(s.days.iter().copied());
                home += s.home;
                work += s.work;
                count += s.events;
            }
            let first_day = *days.first().expect("clusters are non-empty");
            let last_day = *days.last().expect("clusters are non-empty");
            PlaceCluster {
                centroid: GeoPoint { lat: lat / weight, lon: lon / weight },
                towers: members.iter().map(|&m| towers[m].0).collect(),
                days_appeared: days.len() as u32,
                duration_weeks: ((last_day - first_day) / 7) as u32,
                rank: 0,
                home_hour_events: home,
                work_hour_events: work,
                events: count,
                first_day,
                last_day,
            }
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.days_appeared
            .cmp(&a.days_appeared)
            .then(b.events.cmp(&a.events))
            .then(tower_key(a.towers[0]).cmp(&tower_key(b.towers[0])))
    });
    for (i, c) in clusters.iter_mut().enumerate() {
        c.rank = i as u32 + 1;
    }
    clusters
}

/// At least one call per day on average, and two or more clusters seen on at
/// least 3 days spread over at least 2 weeks.
pub fn eligible(events: &[CdrEvent], clusters: &[PlaceCluster]) -> bool {
    let Some(first) = events.iter().map(CdrEvent::day).min() else {
        return false;
    };
    let last = events.iter().map(CdrEvent::day).max().unwrap_or(first);
    let span_days = (last - first + 1) as f64;
    if (events.len() as f64) < span_days {
        return false;
    }
    clusters.iter().filter(|c| c.days_appeared >= 3 && c.duration_weeks >= 2).count() >= 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdr::SECONDS_PER_DAY;
    use crate::population::CommuterId;
    use proptest::prelude::*;

    const BASE: GeoPoint = GeoPoint { lat: 40.4, lon: -3.7 };

    fn call(day: i64, hour: i64, tower: GeoPoint) -> CdrEvent {
        CdrEvent { user_id: CommuterId(1), timestamp: 1_357_516_800 + day * SECONDS_PER_DAY + hour * 3600, tower }
    }

    #[test]
    fn empty_events() {
        assert!(cluster_events(&[], 1.0).is_empty());
        assert!(!eligible(&[], &[]));
    }

    #[test]
    fn single_tower() {
        let events: Vec<_> = (0..5).map(|d| call(d, 20, BASE)).collect();
        let c = cluster_events(&events, 1.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].centroid, BASE);
        assert_eq!(c[0].days_appeared, 5);
        assert_eq!(c[0].home_hour_events, 5);
        assert_eq!(c[0].rank, 1);
    }

    #[test]
    fn distant_towers_stay_apart() {
        let far = BASE.offset_km(10.0, 0.0);
        let c = cluster_events(&[call(0, 20, BASE), call(1, 14, far)], 1.0);
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn chains_merge() {
        let events = [call(0, 20, BASE), call(1, 20, BASE.offset_km(0.8, 0.0)), call(2, 20, BASE.offset_km(1.6, 0.0))];
        let c = cluster_events(&events, 1.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].towers.len(), 3);
    }

    #[test]
    fn centroid_weighted_by_days() {
        let east = BASE.offset_km(0.0, 0.5);
        // BASE on 3 days, `east` on 1 day (twice).
        let events = [call(0, 20, BASE), call(1, 20, BASE), call(2, 20, BASE), call(3, 20, east), call(3, 21, east)];
        let c = cluster_events(&events, 1.0);
        let expected = (3.0 * BASE.lon + east.lon) / 4.0;
        assert!((c[0].centroid.lon - expected).abs() < 1e-12);
    }

    #[test]
    fn hour_windows() {
        assert!(is_home_hour(19 * 60));
        assert!(is_home_hour(6 * 60 + 59));
        assert!(!is_home_hour(7 * 60));
        assert!(is_work_hour(13 * 60));
        assert!(!is_work_hour(17 * 60));
    }

    #[test]
    fn eligibility_rules() {
        let work = BASE.offset_km(5.0, 5.0);
        // 90 calls over 60 days at two places.
        let mut events = Vec::new();
        for i in 0..90 {
            let day = i * 60 / 90;
            events.push(call(day, if i % 2 == 0 { 20 } else { 14 }, if i % 2 == 0 { BASE } else { work }));
        }
        let c = cluster_events(&events, 1.0);
        assert!(eligible(&events, &c));

        let home_only: Vec<_> = events.iter().filter(|e| e.tower == BASE).copied().collect();
        let many: Vec<_> = home_only.iter().chain(home_only.iter()).copied().collect();
        assert!(!eligible(&many, &cluster_events(&many, 1.0)));

        // Too few calls per day.
        let sparse: Vec<_> = events.iter().step_by(2).copied().collect();
        assert!(!eligible(&sparse, &cluster_events(&sparse, 1.0)));
    }

    proptest! {
        #[test]
        fn permutation_invariant(seed in any::<u64>(), n in 1usize..40) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let events: Vec<_> = (0..n)
                .map(|_| {
                    let t = BASE.offset_km(rng.random_range(0.0..4.0), rng.random_range(0.0..4.0));
                    call(rng.random_range(0..30), rng.random_range(0..24), t)
                })
                .collect();
            let mut shuffled = events.clone();
            shuffled.shuffle(&mut rng);
            prop_assert_eq!(cluster_events(&events, 1.0), cluster_events(&shuffled, 1.0));
        }

        #[test]
        fn counts_add_up_over_halves(seed in any::<u64>(), n in 2usize..40) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let towers = [BASE, BASE.offset_km(5.0, 0.0), BASE.offset_km(0.0, 5.0)];
            let events: Vec<_> = (0..n)
                .map(|_| call(rng.random_range(0..30), rng.random_range(0..24), towers[rng.random_range(0..3)]))
                .collect();
            let (a, b) = events.split_at(n / 2);
            let full = cluster_events(&events, 1.0);
            for c in &full {
                let part = |half: &[CdrEvent]| {
                    cluster_events(half, 1.0)
                        .into_iter()
                        .find(|h| h.towers == c.towers)
                        .map_or((0, 0, 0), |h| (h.home_hour_events, h.work_hour_events, h.events))
                };
                let (pa, pb) = (part(a), part(b));
                prop_assert_eq!(pa.0 + pb.0, c.home_hour_events);
                prop_assert_eq!(pa.1 + pb.1, c.work_hour_events);
                prop_assert_eq!(pa.2 + pb.2, c.events);
            }
        }
    }
}
