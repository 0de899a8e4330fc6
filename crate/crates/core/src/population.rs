//! Commuter data model, synthetic city generation and the commuter CSV format.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;

pub const HOME_DEPARTURE_MEAN: f64 = 540.0;
pub const WORK_DEPARTURE_MEAN: f64 = 1020.0;
pub const LAST_MINUTE: u32 = 1439;
pub const DEFAULT_CAPACITY: u32 = 4;
const MAX_RESAMPLES: usize = 100;

pub const CSV_HEADER: [&str; 9] = [
    "id",
    "home_lat",
    "home_lon",
    "work_lat",
    "work_lon",
    "leave_home_min",
    "leave_work_min",
    "capacity",
    "has_car",
];

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("invalid city config: {0}")]
    Config(String),
    #[error("could not draw leave_home < leave_work in {MAX_RESAMPLES} attempts (sigma = {0} min)")]
    Departure(f64),
    #[error("line {line}: field `{field}`: {message}")]
    Row { line: u64, field: &'static str, message: String },
    #[error("line {line}: duplicate commuter id {id}")]
    DuplicateId { line: u64, id: CommuterId },
    #[error("commuter {id}: {message}")]
    Invalid { id: CommuterId, message: String },
    #[error("bad header: expected `{}`", CSV_HEADER.join(","))]
    Header,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Numeric user identifier. Serialized as a decimal string in JSON documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CommuterId(pub u64);

impl std::str::FromStr for CommuterId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse().map(CommuterId)
    }
}

impl Serialize for CommuterId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for CommuterId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(u64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(n) => Ok(CommuterId(n)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl fmt::Display for CommuterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One person with a car-capable commute between two distinct places.
///
/// Departure times are minutes since midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Commuter {
    pub id: CommuterId,
    pub home: GeoPoint,
    pub work: GeoPoint,
    pub leave_home: u32,
    pub leave_work: u32,
    pub capacity: u32,
    pub has_car: bool,
}

impl Commuter {
    pub fn validate(&self) -> Result<(), PopulationError> {
        let invalid = |message: String| PopulationError::Invalid { id: self.id, message };
        for (name, p) in [("home", self.home), ("work", self.work)] {
            if !p.is_valid() {
                return Err(invalid(format!("{name} ({}, {}) is not a valid coordinate", p.lat, p.lon)));
            }
        }
        if self.home == self.work {
            return Err(invalid("home and work coincide".into()));
        }
        if self.leave_work > LAST_MINUTE {
            return Err(invalid(format!("leave_work {} past end of day", self.leave_work)));
        }
        if self.leave_home >= self.leave_work {
            return Err(invalid(format!(
                "leave_home {} not before leave_work {}",
                self.leave_home, self.leave_work
            )));
        }
        if self.capacity < 1 {
            return Err(invalid("capacity must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CityMode {
    Uniform,
    Clustered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterKind {
    Home,
    Work,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub center: GeoPoint,
    pub weight: f64,
    pub spread_km: f64,
    pub kind: ClusterKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub south_west: GeoPoint,
    pub north_east: GeoPoint,
}

impl BoundingBox {
    pub fn is_empty(&self) -> bool {
        !(self.south_west.lat < self.north_east.lat && self.south_west.lon < self.north_east.lon)
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.south_west.lat..=self.north_east.lat).contains(&p.lat)
            && (self.south_west.lon..=self.north_east.lon).contains(&p.lon)
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            lat: (self.south_west.lat + self.north_east.lat) / 2.0,
            lon: (self.south_west.lon + self.north_east.lon) / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityConfig {
    pub n_commuters: usize,
    pub mode: CityMode,
    pub bounding_box: BoundingBox,
    #[serde(default)]
    pub clusters: Vec<Cluster>,
    pub sigma_minutes: f64,
    pub car_ownership: f64,
    pub seed: u64,
}

/// Names accepted by [`CityConfig::preset`].
pub const PRESETS: [&str; 2] = ["uniform", "clustered-metro"];

impl CityConfig {
    /// Madrid-sized (about 29 x 29 km) synthetic cities.
    ///
    /// `clustered-metro` segregates residential and working areas: five
    /// residential clusters around a mixed centre, and a dense business
    /// district plus two business parks.
    pub fn preset(name: &str, n_commuters: usize, seed: u64) -> Option<CityConfig> {
        let sw = GeoPoint { lat: 40.30, lon: -3.85 };
        let ne = GeoPoint { lat: 40.56, lon: -3.51 };
        let center = GeoPoint { lat: 40.43, lon: -3.69 };
        let base = CityConfig {
            n_commuters,
            mode: CityMode::Uniform,
            bounding_box: BoundingBox { south_west: sw, north_east: ne },
            clusters: Vec::new(),
            sigma_minutes: 30.0,
            car_ownership: 1.0,
            seed,
        };
        match name {
            "uniform" => Some(base),
            "clustered-metro" => {
                let c = |north: f64, east: f64, weight: f64, spread_km: f64, kind: ClusterKind| Cluster {
                    center: center.offset_km(north, east),
                    weight,
                    spread_km,
                    kind,
                };
                use ClusterKind::*;
                let clusters = vec![
                    c(0.0, 0.0, 0.20, 1.2, Mixed),
                    c(7.0, -2.0, 0.16, 0.9, Home),
                    c(-6.5, -5.0, 0.16, 0.9, Home),
                    c(-2.0, 8.0, 0.16, 0.9, Home),
                    c(5.0, 7.0, 0.16, 0.9, Home),
                    c(-8.0, 3.0, 0.16, 0.9, Home),
                    c(1.5, 1.0, 0.50, 0.6, Work),
                    c(9.0, 4.0, 0.15, 0.5, Work),
                    c(-4.0, -9.0, 0.15, 0.5, Work),
                ];
                Some(CityConfig { mode: CityMode::Clustered, clusters, ..base })
            }
            _ => None,
        }
    }

    fn mixture(&self, kind: ClusterKind) -> Vec<&Cluster> {
        self.clusters.iter().filter(|c| c.kind == kind || c.kind == ClusterKind::Mixed).collect()
    }

    pub fn validate(&self) -> Result<(), PopulationError> {
        let err = |m: String| Err(PopulationError::Config(m));
        let bb = &self.bounding_box;
        if !bb.south_west.is_valid() || !bb.north_east.is_valid() {
            return err("bounding box corners must be valid coordinates".into());
        }
        if bb.is_empty() {
            return err("bounding box is empty".into());
        }
        if !(0.0..=1.0).contains(&self.car_ownership) {
            return err(format!("car_ownership {} outside [0, 1]", self.car_ownership));
        }
        if !(self.sigma_minutes >= 0.0 && self.sigma_minutes.is_finite()) {
            return err(format!("sigma_minutes {} must be finite and non-negative", self.sigma_minutes));
        }
        if self.mode == CityMode::Clustered {
            for kind in [ClusterKind::Home, ClusterKind::Work] {
                let mix = self.mixture(kind);
                let total: f64 = mix.iter().map(|c| c.weight).sum();
                if mix.is_empty() || (total - 1.0).abs() > 1e-6 {
                    return err(format!("{kind:?} cluster weights sum to {total}, expected 1"));
                }
            }
            for c in &self.clusters {
                if !(c.weight.is_finite() && c.weight >= 0.0 && c.spread_km.is_finite() && c.spread_km > 0.0) || !c.center.is_valid() {
                    return err(format!("bad cluster {c:?}"));
                }
            }
        }
        Ok(())
    }
}

/// Draws `(leave_home, leave_work)` from Gaussians around 9:00 and 17:00.
///
/// Values are rounded to whole minutes and clamped to the day. Draws with
/// `leave_home >= leave_work` are redrawn a bounded number of times.
pub fn sample_departures<R: Rng + ?Sized>(sigma_minutes: f64, rng: &mut R) -> Result<(u32, u32), PopulationError> {
    if sigma_minutes == 0.0 {
        return Ok((HOME_DEPARTURE_MEAN as u32, WORK_DEPARTURE_MEAN as u32));
    }
    let bad = || PopulationError::Departure(sigma_minutes);
    let home = Normal::new(HOME_DEPARTURE_MEAN, sigma_minutes).map_err(|_| bad())?;
    let work = Normal::new(WORK_DEPARTURE_MEAN, sigma_minutes).map_err(|_| bad())?;
    let to_minute = |x: f64| x.round().clamp(0.0, LAST_MINUTE as f64) as u32;
    for _ in 0..MAX_RESAMPLES {
        let lh = to_minute(home.sample(rng));
        let lw = to_minute(work.sample(rng));
        if lh < lw {
            return Ok((lh, lw));
        }
    }
    Err(bad())
}

fn draw_uniform<R: Rng>(bb: &BoundingBox, rng: &mut R) -> GeoPoint {
    GeoPoint {
        lat: rng.random_range(bb.south_west.lat..bb.north_east.lat),
        lon: rng.random_range(bb.south_west.lon..bb.north_east.lon),
    }
}

struct Mixture<'a> {
    clusters: Vec<&'a Cluster>,
    index: WeightedIndex<f64>,
}

impl<'a> Mixture<'a> {
    fn new(clusters: Vec<&'a Cluster>) -> Result<Self, PopulationError> {
        let index = WeightedIndex::new(clusters.iter().map(|c| c.weight))
            .map_err(|e| PopulationError::Config(format!("cluster weights: {e}")))?;
        Ok(Self { clusters, index })
    }

    fn draw<R: Rng>(&self, bb: &BoundingBox, rng: &mut R) -> GeoPoint {
        let cluster = self.clusters[self.index.sample(rng)];
        let normal = Normal::new(0.0, cluster.spread_km).expect("spread validated positive");
        let mut p = cluster.center;
        for _ in 0..MAX_RESAMPLES {
            p = cluster.center.offset_km(normal.sample(rng), normal.sample(rng));
            if bb.contains(p) {
                return p;
            }
        }
        GeoPoint {
            lat: p.lat.clamp(bb.south_west.lat, bb.north_east.lat),
            lon: p.lon.clamp(bb.south_west.lon, bb.north_east.lon),
        }
    }
}

/// Generates `n_commuters` commuters with ids `0..n`, deterministic in `seed`.
///
/// A `floor(car_ownership * n)` subset chosen uniformly gets `has_car = true`.
pub fn generate_city(config: &CityConfig) -> Result<Vec<Commuter>, PopulationError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bb = &config.bounding_box;
    let mixtures = match config.mode {
        CityMode::Uniform => None,
        CityMode::Clustered => Some((
            Mixture::new(config.mixture(ClusterKind::Home))?,
            Mixture::new(config.mixture(ClusterKind::Work))?,
        )),
    };
    let mut out = Vec::with_capacity(config.n_commuters);
    for i in 0..config.n_commuters {
        let (home, work) = loop {
            let (h, w) = match &mixtures {
                None => (draw_uniform(bb, &mut rng), draw_uniform(bb, &mut rng)),
                Some((hm, wm)) => (hm.draw(bb, &mut rng), wm.draw(bb, &mut rng)),
            };
            if h != w {
                break (h, w);
            }
        };
        let (leave_home, leave_work) = sample_departures(config.sigma_minutes, &mut rng)?;
        out.push(Commuter {
            id: CommuterId(i as u64),
            home,
            work,
            leave_home,
            leave_work,
            capacity: DEFAULT_CAPACITY,
            has_car: false,
        });
    }
    let owners = owner_count(out.len(), config.car_ownership);
    for i in rand::seq::index::sample(&mut rng, out.len(), owners) {
        out[i].has_car = true;
    }
    Ok(out)
}

fn owner_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64) + 1e-9).floor().min(n as f64) as usize
}

/// Keeps a uniformly chosen `floor(fraction * n)` subset, in input order, marked as car owners.
pub fn subsample_owners(commuters: &[Commuter], fraction: f64, seed: u64) -> Vec<Commuter> {
    let fraction = fraction.clamp(0.0, 1.0);
    let k = owner_count(commuters.len(), fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, commuters.len(), k).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| Commuter { has_car: true, ..commuters[i].clone() })
        .collect()
}

/// Commuters eligible for matching.
pub fn car_owners(commuters: &[Commuter]) -> Vec<Commuter> {
    commuters.iter().filter(|c| c.has_car).cloned().collect()
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, line: u64) -> Result<T, PopulationError>
where
    T::Err: fmt::Display,
{
    let field = CSV_HEADER[idx];
    let raw = record.get(idx).ok_or(PopulationError::Row { line, field, message: "missing".into() })?;
    raw.trim().parse::<T>().map_err(|e| PopulationError::Row { line, field, message: format!("`{raw}`: {e}") })
}

pub fn read_commuters<R: Read>(reader: R) -> Result<Vec<Commuter>, PopulationError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers()?;
    if header.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(PopulationError::Header);
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != CSV_HEADER.len() {
            return Err(PopulationError::Row {
                line,
                field: CSV_HEADER[record.len().min(CSV_HEADER.len() - 1)],
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), record.len()),
            });
        }
        let point = |lat_idx: usize| -> Result<GeoPoint, PopulationError> {
            let lat: f64 = parse_field(&record, lat_idx, line)?;
            let lon: f64 = parse_field(&record, lat_idx + 1, line)?;
            GeoPoint::new(lat, lon).map_err(|e| PopulationError::Row {
                line,
                field: if matches!(e, crate::geo::GeoError::Latitude(_)) { CSV_HEADER[lat_idx] } else { CSV_HEADER[lat_idx + 1] },
                message: e.to_string(),
            })
        };
        let commuter = Commuter {
            id: CommuterId(parse_field(&record, 0, line)?),
            home: point(1)?,
            work: point(3)?,
            leave_home: parse_field(&record, 5, line)?,
            leave_work: parse_field(&record, 6, line)?,
            capacity: parse_field(&record, 7, line)?,
            has_car: parse_field(&record, 8, line)?,
        };
        commuter.validate().map_err(|e| PopulationError::Row { line, field: "id", message: e.to_string() })?;
        if !seen.insert(commuter.id) {
            return Err(PopulationError::DuplicateId { line, id: commuter.id });
        }
        out.push(commuter);
    }
    Ok(out)
}

pub fn write_commuters<W: Write>(commuters: &[Commuter], writer: W) -> Result<(), PopulationError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for c in commuters {
        w.write_record([
            c.id.to_string(),
            format!("{:.7}", c.home.lat),
            format!("{:.7}", c.home.lon),
            format!("{:.7}", c.work.lat),
            format!("{:.7}", c.work.lon),
            c.leave_home.to_string(),
            c.leave_work.to_string(),
            c.capacity.to_string(),
            c.has_car.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_commuters(path: impl AsRef<Path>) -> Result<Vec<Commuter>, PopulationError> {
    read_commuters(File::open(path)?)
}

pub fn save_commuters(commuters: &[Commuter], path: impl AsRef<Path>) -> Result<(), PopulationError> {
    write_commuters(commuters, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::distance_km;

    fn uniform(n: usize, seed: u64) -> CityConfig {
        CityConfig::preset("uniform", n, seed).unwrap()
    }

    #[test]
    fn zero_commuters() {
        assert!(generate_city(&uniform(0, 1)).unwrap().is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_city(&CityConfig::preset("clustered-metro", 500, 9).unwrap()).unwrap();
        let b = generate_city(&CityConfig::preset("clustered-metro", 500, 9).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = generate_city(&CityConfig::preset("clustered-metro", 500, 10).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_mean_near_center() {
        let cfg = uniform(10_000, 3);
        let city = generate_city(&cfg).unwrap();
        assert_eq!(city.len(), 10_000);
        let n = city.len() as f64;
        let mean_lat = city.iter().map(|c| c.home.lat).sum::<f64>() / n;
        let mean_lon = city.iter().map(|c| c.home.lon).sum::<f64>() / n;
        let center = cfg.bounding_box.center();
        assert!((mean_lat - center.lat).abs() <= 0.01 * center.lat.abs());
        assert!((mean_lon - center.lon).abs() <= 0.01 * center.lon.abs());
        for c in &city {
            c.validate().unwrap();
            assert!(cfg.bounding_box.contains(c.home) && cfg.bounding_box.contains(c.work));
        }
    }

    #[test]
    fn empty_box_is_config_error() {
        let mut cfg = uniform(10, 1);
        cfg.bounding_box.north_east = cfg.bounding_box.south_west;
        assert!(matches!(generate_city(&cfg), Err(PopulationError::Config(_))));
    }

    #[test]
    fn cluster_weights_must_sum_to_one() {
        let mut cfg = CityConfig::preset("clustered-metro", 10, 1).unwrap();
        cfg.clusters[1].weight = 0.5;
        assert!(matches!(cfg.validate(), Err(PopulationError::Config(_))));
    }

    #[test]
    fn clustered_mass_converges_to_weights() {
        // One home cluster at weight 0.3 plus a distant one at 0.7.
        let bb = BoundingBox {
            south_west: GeoPoint { lat: 40.0, lon: -4.0 },
            north_east: GeoPoint { lat: 41.0, lon: -3.0 },
        };
        let a = GeoPoint { lat: 40.3, lon: -3.7 };
        let b = GeoPoint { lat: 40.7, lon: -3.3 };
        let cfg = CityConfig {
            n_commuters: 20_000,
            mode: CityMode::Clustered,
            bounding_box: bb,
            clusters: vec![
                Cluster { center: a, weight: 0.3, spread_km: 1.0, kind: ClusterKind::Home },
                Cluster { center: b, weight: 0.7, spread_km: 1.0, kind: ClusterKind::Home },
                Cluster { center: bb.center(), weight: 1.0, spread_km: 2.0, kind: ClusterKind::Work },
            ],
            sigma_minutes: 10.0,
            car_ownership: 1.0,
            seed: 5,
        };
        let city = generate_city(&cfg).unwrap();
        let n = city.len() as f64;
        // Mass of an isotropic 2-D Gaussian within 2 sigma: 1 - exp(-2).
        let expected = 0.3 * (1.0 - (-2.0f64).exp());
        let got = city.iter().filter(|c| distance_km(c.home, a) <= 2.0).count() as f64 / n;
        let se = (expected * (1.0 - expected) / n).sqrt();
        assert!((got - expected).abs() <= 3.0 * se, "got {got}, expected {expected}");
    }

    #[test]
    fn degenerate_departures() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_departures(0.0, &mut rng).unwrap(), (540, 1020));
    }

    #[test]
    fn departure_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws: Vec<_> = (0..10_000).map(|_| sample_departures(30.0, &mut rng).unwrap()).collect();
        assert!(draws.iter().all(|(h, w)| h < w));
        let n = draws.len() as f64;
        let mean = draws.iter().map(|d| d.0 as f64).sum::<f64>() / n;
        let var = draws.iter().map(|d| (d.0 as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((27.0..=33.0).contains(&var.sqrt()), "std {}", var.sqrt());
    }

    #[test]
    fn huge_sigma_still_ordered_or_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            if let Ok((h, w)) = sample_departures(2000.0, &mut rng) {
                assert!(h < w && w <= LAST_MINUTE);
            }
        }
    }

    #[test]
    fn subsample_sizes() {
        let city = generate_city(&uniform(1000, 4)).unwrap();
        assert_eq!(subsample_owners(&city, 1.0, 1).len(), 1000);
        assert_eq!(subsample_owners(&city, 0.6, 1).len(), 600);
        assert!(subsample_owners(&city, 0.0, 1).is_empty());
        let sub = subsample_owners(&city, 0.6, 1);
        assert_eq!(sub, subsample_owners(&city, 0.6, 1));
        let ids: HashSet<_> = sub.iter().map(|c| c.id).collect();
        assert_eq!(ids.len(), sub.len());
        assert!(sub.iter().all(|c| c.has_car && city.iter().any(|o| o.id == c.id && o.home == c.home)));
    }

    #[test]
    fn car_ownership_marks_floor_fraction() {
        let mut cfg = uniform(1000, 4);
        cfg.car_ownership = 0.6;
        let city = generate_city(&cfg).unwrap();
        assert_eq!(city.iter().filter(|c| c.has_car).count(), 600);
    }

    #[test]
    fn header_only_file() {
        let text = format!("{}\n", CSV_HEADER.join(","));
        assert!(read_commuters(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn round_trip_is_canonical() {
        let city = generate_city(&CityConfig::preset("clustered-metro", 200, 7).unwrap()).unwrap();
        let mut first = Vec::new();
        write_commuters(&city, &mut first).unwrap();
        let loaded = read_commuters(first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_commuters(&loaded, &mut second).unwrap();
        assert_eq!(first, second);
        for (a, b) in city.iter().zip(&loaded) {
            assert_eq!(a.id, b.id);
            assert!((a.home.lat - b.home.lat).abs() <= 5e-8);
            assert_eq!((a.leave_home, a.leave_work, a.capacity, a.has_car), (b.leave_home, b.leave_work, b.capacity, b.has_car));
        }
    }

    #[test]
    fn invalid_latitude_names_line_and_field() {
        let text = format!("{}\n1,40.1,-3.7,40.2,-3.6,540,1020,4,true\n2,91.0,-3.7,40.2,-3.6,540,1020,4,true\n", CSV_HEADER.join(","));
        match read_commuters(text.as_bytes()) {
            Err(PopulationError::Row { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "home_lat");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_and_duplicate_rows() {
        let head = CSV_HEADER.join(",");
        let bad = format!("{head}\n1,40.1,-3.7,40.2,-3.6,nine,1020,4,true\n");
        assert!(matches!(read_commuters(bad.as_bytes()), Err(PopulationError::Row { line: 2, field: "leave_home_min", .. })));
        let dup = format!("{head}\n1,40.1,-3.7,40.2,-3.6,540,1020,4,true\n1,40.1,-3.7,40.2,-3.6,540,1020,4,false\n");
        assert!(matches!(read_commuters(dup.as_bytes()), Err(PopulationError::DuplicateId { line: 3, .. })));
        let short = format!("{head}\n1,40.1,-3.7\n");
        assert!(matches!(read_commuters(short.as_bytes()), Err(PopulationError::Row { line: 2, .. })));
        let order = format!("{head}\n1,40.1,-3.7,40.2,-3.6,1020,540,4,true\n");
        assert!(read_commuters(order.as_bytes()).is_err());
    }
}
