use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::departure::trip_time_minutes;
use super::{CdrError, CdrEvent, SECONDS_PER_DAY};
use crate::geo::{distance_km, GeoPoint, EARTH_RADIUS_KM};
use crate::population::Commuter;

/// Monday 2013-01-07 00:00, the first day of every synthetic trace.
const EPOCH: i64 = 1_357_516_800;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthCdrConfig {
    pub calls_per_user: usize,
    pub days: u32,
    /// Share of calls made from a random tower at a random time.
    pub noise_fraction: f64,
    /// Commute call pairs per direction (leaving home, leaving work).
    pub departure_pairs: usize,
    pub tower_spacing_km: f64,
    pub speed_kmh: f64,
    pub seed: u64,
}

impl Default for SynthCdrConfig {
    fn default() -> Self {
        Self {
            calls_per_user: 50,
            days: 30,
            noise_fraction: 0.1,
            departure_pairs: 4,
            tower_spacing_km: 0.5,
            speed_kmh: super::DEFAULT_SPEED_KMH,
            seed: 0,
        }
    }
}

impl SynthCdrConfig {
    fn validate(&self) -> Result<(), CdrError> {
        let bad = |m: &str| Err(CdrError::Synth(m.to_string()));
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return bad("noise_fraction must lie in [0, 1]");
        }
        if self.days == 0 {
            return bad("days must be positive");
        }
        if !(self.tower_spacing_km > 0.0 && self.speed_kmh > 0.0) {
            return bad("tower spacing and speed must be positive");
        }
        let noise = (self.calls_per_user as f64 * self.noise_fraction).round() as usize;
        if noise + 4 * self.departure_pairs > self.calls_per_user {
            return bad("calls_per_user too small for the noise and commute calls");
        }
        if 2 * self.departure_pairs > self.days as usize {
            return bad("not enough days for the commute pairs");
        }
        Ok(())
    }
}

/// Towers on a square lattice with jittered positions.
#[derive(Debug, Clone)]
pub struct TowerNetwork {
    origin: GeoPoint,
    spacing_km: f64,
    cos_lat: f64,
    rows: usize,
    cols: usize,
    towers: Vec<GeoPoint>,
}

impl TowerNetwork {
    /// Lattice over the bounding box of `points` plus a margin of two spacings.
    pub fn covering(points: &[GeoPoint], spacing_km: f64, seed: u64) -> Self {
        let south = points.iter().map(|p| p.lat).fold(f64::INFINITY, f64::min);
        let north = points.iter().map(|p| p.lat).fold(f64::NEG_INFINITY, f64::max);
        let west = points.iter().map(|p| p.lon).fold(f64::INFINITY, f64::min);
        let east = points.iter().map(|p| p.lon).fold(f64::NEG_INFINITY, f64::max);
        let cos_lat = ((south + north) / 2.0).to_radians().cos();
        let margin = 2.0 * spacing_km;
        let origin = GeoPoint { lat: south, lon: west }.offset_km(-margin, 0.0);
        let origin = GeoPoint { lon: origin.lon - (margin / (EARTH_RADIUS_KM * cos_lat)).to_degrees(), ..origin };
        let height = (north - origin.lat).to_radians() * EARTH_RADIUS_KM + margin;
        let width = (east - origin.lon).to_radians() * EARTH_RADIUS_KM * cos_lat + margin;
        let rows = (height / spacing_km).ceil() as usize + 1;
        let cols = (width / spacing_km).ceil() as usize + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jitter = 0.25 * spacing_km;
        let mut net = Self { origin, spacing_km, cos_lat, rows, cols, towers: Vec::with_capacity(rows * cols) };
        for r in 0..rows {
            for c in 0..cols {
                let (n, e) = (rng.random_range(-jitter..=jitter), rng.random_range(-jitter..=jitter));
                net.towers.push(net.lattice_point(r as f64 * spacing_km + n, c as f64 * spacing_km + e));
            }
        }
        net
    }

    fn lattice_point(&self, north_km: f64, east_km: f64) -> GeoPoint {
        GeoPoint {
            lat: self.origin.lat + (north_km / EARTH_RADIUS_KM).to_degrees(),
            lon: self.origin.lon + (east_km / (EARTH_RADIUS_KM * self.cos_lat)).to_degrees(),
        }
    }

    pub fn towers(&self) -> &[GeoPoint] {
        &self.towers
    }

    /// Closest tower to `p`.
    pub fn nearest(&self, p: GeoPoint) -> GeoPoint {
        let r = ((p.lat - self.origin.lat).to_radians() * EARTH_RADIUS_KM / self.spacing_km).round() as i64;
        let c = ((p.lon - self.origin.lon).to_radians() * EARTH_RADIUS_KM * self.cos_lat / self.spacing_km).round() as i64;
        let mut best = (f64::INFINITY, self.towers[0]);
        for dr in -2..=2 {
            for dc in -2..=2 {
                let (rr, cc) = (r + dr, c + dc);
                if rr < 0 || cc < 0 || rr >= self.rows as i64 || cc >= self.cols as i64 {
                    continue;
                }
                let t = self.towers[rr as usize * self.cols + cc as usize];
                let d = distance_km(p, t);
                if d < best.0 {
                    best = (d, t);
                }
            }
        }
        best.1
    }
}

/// Call records for every commuter, with their homes, workplaces and
/// departure times as ground truth.
///
/// Each user makes `departure_pairs` morning commute pairs (a home call just
/// before leaving, a work call on arrival) and as many evening ones. The
/// remaining genuine calls are split between home during home hours and work
/// during work hours; a `noise_fraction` share goes to random towers at
/// random times. Output is sorted by user, then time.
pub fn synthesize_cdr(commuters: &[Commuter], config: &SynthCdrConfig) -> Result<(Vec<CdrEvent>, TowerNetwork), CdrError> {
    config.validate()?;
    if commuters.is_empty() {
        return Ok((Vec::new(), TowerNetwork::covering(&[GeoPoint { lat: 0.0, lon: 0.0 }], config.tower_spacing_km, config.seed)));
    }
    let points: Vec<GeoPoint> = commuters.iter().flat_map(|c| [c.home, c.work]).collect();
    let net = TowerNetwork::covering(&points, config.tower_spacing_km, config.seed);
    let mut users = commuters.to_vec();
    users.sort_by_key(|c| c.id);
    let per_user: Vec<Vec<CdrEvent>> = users
        .par_iter()
        .map(|u| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ u.id.0.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            user_calls(u, &net, config, &mut rng)
        })
        .collect();
    Ok((per_user.into_iter().flatten().collect(), net))
}

fn user_calls(u: &Commuter, net: &TowerNetwork, config: &SynthCdrConfig, rng: &mut ChaCha8Rng) -> Vec<CdrEvent> {
    let (home, work) = (net.nearest(u.home), net.nearest(u.work));
    let trip = trip_time_minutes(u.home, u.work, config.speed_kmh);
    let at = |day: u32, minute: f64, tower: GeoPoint| CdrEvent {
        user_id: u.id,
        timestamp: EPOCH + day as i64 * SECONDS_PER_DAY + (minute.clamp(0.0, 1439.0) * 60.0) as i64,
        tower,
    };
    let mut out = Vec::with_capacity(config.calls_per_user);

    let mut commute_days: Vec<u32> = (0..config.days).collect();
    commute_days.shuffle(rng);
    let (mornings, rest) = commute_days.split_at(config.departure_pairs);
    let evenings = &rest[..config.departure_pairs];
    for &d in mornings {
        let leave = u.leave_home as f64;
        out.push(at(d, leave - rng.random_range(0.0..4.0), home));
        out.push(at(d, leave + trip + rng.random_range(0.0..4.0), work));
    }
    for &d in evenings {
        let leave = u.leave_work as f64;
        out.push(at(d, leave - rng.random_range(0.0..4.0), work));
        out.push(at(d, leave + trip + rng.random_range(0.0..4.0), home));
    }

    let noise = (config.calls_per_user as f64 * config.noise_fraction).round() as usize;
    let genuine = config.calls_per_user - noise - out.len();
    for _ in 0..genuine {
        let day = rng.random_range(0..config.days);
        if rng.random_bool(0.5) {
            // Home hours: 19:00 to 07:00 the next morning, as 12 hours from 19:00.
            let m = (19.0 * 60.0 + rng.random_range(0.0..720.0)) % 1440.0;
            out.push(at(day, m, home));
        } else {
            out.push(at(day, rng.random_range(780.0..1020.0), work));
        }
    }
    for _ in 0..noise {
        let tower = net.towers[rng.random_range(0..net.towers.len())];
        out.push(at(rng.random_range(0..config.days), rng.random_range(0.0..1440.0), tower));
    }
    out.sort_by_key(|e| e.timestamp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{generate_city, CityConfig};

    #[test]
    fn nearest_matches_exhaustive_search() {
        let pts = [GeoPoint { lat: 40.3, lon: -3.8 }, GeoPoint { lat: 40.5, lon: -3.5 }];
        let net = TowerNetwork::covering(&pts, 0.5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p = GeoPoint { lat: rng.random_range(40.3..40.5), lon: rng.random_range(-3.8..-3.5) };
            let brute = net
                .towers()
                .iter()
                .copied()
                .min_by(|a, b| distance_km(p, *a).total_cmp(&distance_km(p, *b)))
                .unwrap();
            assert_eq!(net.nearest(p), brute);
        }
    }

    #[test]
    fn trace_shape() {
        let people = generate_city(&CityConfig::preset("clustered-metro", 20, 1).unwrap()).unwrap();
        let cfg = SynthCdrConfig::default();
        let (events, _) = synthesize_cdr(&people, &cfg).unwrap();
        assert_eq!(events.len(), 20 * cfg.calls_per_user);
        assert!(events.windows(2).all(|w| (w[0].user_id, w[0].timestamp) <= (w[1].user_id, w[1].timestamp)));
        let again = synthesize_cdr(&people, &cfg).unwrap().0;
        assert_eq!(events, again);
    }

    #[test]
    fn rejects_impossible_budgets() {
        let people = generate_city(&CityConfig::preset("uniform", 2, 1).unwrap()).unwrap();
        let cfg = SynthCdrConfig { calls_per_user: 10, ..Default::default() };
        assert!(synthesize_cdr(&people, &cfg).is_err());
    }
}
