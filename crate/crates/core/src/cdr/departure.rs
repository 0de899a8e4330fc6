use super::cluster::PlaceCluster;
use super::CdrEvent;
use crate::enroute::{compute_route, RouteGrid, DEFAULT_ROUTE_CELL_KM};
use crate::geo::{distance_km, GeoPoint, GridFrame};

pub const DEFAULT_SPEED_KMH: f64 = 25.0;

/// Minimum number of samples for a departure estimate.
const MIN_SAMPLES: usize = 3;

/// Inclusive minute-of-day windows in which departures are looked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepartureWindows {
    pub home: (u32, u32),
    pub work: (u32, u32),
}

impl Default for DepartureWindows {
    fn default() -> Self {
        Self { home: (8 * 60, 10 * 60), work: (16 * 60, 18 * 60) }
    }
}

/// Driving time between two places over the synthetic road grid.
///
/// Never less than the time to cross one grid cell.
pub fn trip_time_minutes(home: GeoPoint, work: GeoPoint, speed_kmh: f64) -> f64 {
    let cell = DEFAULT_ROUTE_CELL_KM;
    let routed = GridFrame::covering([home, work], cell)
        .ok()
        .and_then(|frame| compute_route(home, work, &RouteGrid::new(frame, Default::default())).ok())
        .map_or(0.0, |r| r.length_km);
    let km = routed.max(distance_km(home, work)).max(cell);
    km / speed_kmh * 60.0
}

/// Median departure times from home and from work.
///
/// A home sample is a call from the home cluster inside the home window whose
/// next call from either place comes from work less than two trip times later.
/// Work samples mirror this. Fewer than three samples give `None`.
pub fn estimate_departure(
    events: &[CdrEvent],
    home: &PlaceCluster,
    work: &PlaceCluster,
    trip_time_min: f64,
    windows: &DepartureWindows,
) -> (Option<u32>, Option<u32>) {
    let mut sorted = events.to_vec();
    sorted.sort_by_key(|e| e.timestamp);
    let limit_s = 2.0 * trip_time_min * 60.0;
    let place = |e: &CdrEvent| {
        if home.contains(e.tower) {
            Some(true)
        } else if work.contains(e.tower) {
            Some(false)
        } else {
            None
        }
    };
    let samples = |from_home: bool, window: (u32, u32)| {
        let mut found = Vec::new();
        for (i, e) in sorted.iter().enumerate() {
            let minute = e.minute_of_day();
            if place(e) != Some(from_home) || minute < window.0 || minute > window.1 {
                continue;
            }
            let next = sorted[i + 1..].iter().find(|n| place(n).is_some());
            if let Some(n) = next {
                if place(n) == Some(!from_home) && ((n.timestamp - e.timestamp) as f64) < limit_s {
                    found.push(minute);
                }
            }
        }
        median(found)
    };
    (samples(true, windows.home), samples(false, windows.work))
}

fn median(mut xs: Vec<u32>) -> Option<u32> {
    if xs.len() < MIN_SAMPLES {
        return None;
    }
    xs.sort_unstable();
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 { xs[m] } else { (xs[m - 1] + xs[m]).div_ceil(2) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdr::cluster_events;
    use crate::cdr::SECONDS_PER_DAY;
    use crate::population::CommuterId;

    const HOME: GeoPoint = GeoPoint { lat: 40.40, lon: -3.70 };
    const WORK: GeoPoint = GeoPoint { lat: 40.45, lon: -3.62 };
    const MONDAY: i64 = 1_357_516_800;

    fn at(day: i64, minute: i64, tower: GeoPoint) -> CdrEvent {
        CdrEvent { user_id: CommuterId(1), timestamp: MONDAY + day * SECONDS_PER_DAY + minute * 60, tower }
    }

    fn places(events: &[CdrEvent]) -> (PlaceCluster, PlaceCluster) {
        let cs = cluster_events(events, 1.0);
        let h = cs.iter().find(|c| c.contains(HOME)).unwrap().clone();
        let w = cs.iter().find(|c| c.contains(WORK)).unwrap().clone();
        (h, w)
    }

    #[test]
    fn median_of_three_mornings() {
        let mut ev = Vec::new();
        for (day, m) in [(0, 530), (1, 540), (2, 550)] {
            ev.push(at(day, m, HOME));
            ev.push(at(day, m + 25, WORK));
        }
        let (h, w) = places(&ev);
        assert_eq!(estimate_departure(&ev, &h, &w, 20.0, &DepartureWindows::default()).0, Some(540));
    }

    #[test]
    fn two_samples_are_not_enough() {
        let mut ev = Vec::new();
        for (day, m) in [(0, 530), (1, 540)] {
            ev.push(at(day, m, HOME));
            ev.push(at(day, m + 25, WORK));
        }
        ev.push(at(2, 20 * 60, HOME));
        let (h, w) = places(&ev);
        assert_eq!(estimate_departure(&ev, &h, &w, 20.0, &DepartureWindows::default()), (None, None));
    }

    #[test]
    fn late_arrival_rejects_pair() {
        let trip = 20.0;
        let mut ev = Vec::new();
        for day in 0..3 {
            ev.push(at(day, 540, HOME));
            ev.push(at(day, 540 + 2 * trip as i64 + 1, WORK));
        }
        let (h, w) = places(&ev);
        assert_eq!(estimate_departure(&ev, &h, &w, trip, &DepartureWindows::default()).0, None);
        // Just inside the limit every pair counts.
        let ok: Vec<_> = (0..3).flat_map(|d| [at(d, 540, HOME), at(d, 540 + 2 * trip as i64 - 1, WORK)]).collect();
        assert_eq!(estimate_departure(&ok, &h, &w, trip, &DepartureWindows::default()).0, Some(540));
    }

    #[test]
    fn work_departures_mirror_home() {
        let ev: Vec<_> =
            (0..4).flat_map(|d| [at(d, 1015 + d, WORK), at(d, 1045 + d, HOME)]).collect();
        let (h, w) = places(&ev);
        assert_eq!(estimate_departure(&ev, &h, &w, 20.0, &DepartureWindows::default()).1, Some(1017));
    }

    #[test]
    fn trip_time_follows_grid_route() {
        let t = trip_time_minutes(HOME, WORK, 30.0);
        let straight = distance_km(HOME, WORK) / 30.0 * 60.0;
        assert!(t >= straight);
        assert!(t <= straight * 1.5 + 2.0);
        assert!((trip_time_minutes(HOME, HOME, 30.0) - 1.0).abs() < 1e-12);
    }
}
