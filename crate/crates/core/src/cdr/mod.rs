//! Home, work and departure-time inference from call detail records.

mod classify;
mod cluster;
mod departure;
mod synth;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{
    classify_home_work, features, train_weights, HomeWorkResult, LabeledUser, LinearScorer, ScoreWeights,
    FEATURE_COUNT, MIN_TRAINING_USERS,
};
pub use cluster::{cluster_events, eligible, PlaceCluster, DEFAULT_MERGE_RADIUS_KM};
pub use departure::{estimate_departure, trip_time_minutes, DepartureWindows, DEFAULT_SPEED_KMH};
pub use synth::{synthesize_cdr, SynthCdrConfig, TowerNetwork};

use crate::geo::GeoPoint;
use crate::population::CommuterId;

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Error)]
pub enum CdrError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("expected header user_id,timestamp_unix,tower_lat,tower_lon")]
    Header,
    #[error("training needs at least {MIN_TRAINING_USERS} labelled users, got {0}")]
    TooFewUsers(usize),
    #[error("{0} labels are all of one class")]
    DegenerateLabels(&'static str),
    #[error("synthetic CDR: {0}")]
    Synth(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One call: who, when (Unix seconds, read as local wall-clock time) and the
/// serving tower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdrEvent {
    pub user_id: CommuterId,
    pub timestamp: i64,
    pub tower: GeoPoint,
}

impl CdrEvent {
    pub fn day(&self) -> i64 {
        self.timestamp.div_euclid(SECONDS_PER_DAY)
    }

    /// Minutes since midnight.
    pub fn minute_of_day(&self) -> u32 {
        (self.timestamp.rem_euclid(SECONDS_PER_DAY) / 60) as u32
    }

    pub fn is_weekend(&self) -> bool {
        // 1970-01-01 was a Thursday.
        (self.day() + 3).rem_euclid(7) >= 5
    }
}

/// Why a user produced no inferred commuter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    InsufficientActivity,
    AmbiguousHomeWork,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::InsufficientActivity => "insufficient-activity",
            Rejection::AmbiguousHomeWork => "ambiguous-home-work",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceParams {
    pub merge_radius_km: f64,
    pub speed_kmh: f64,
    pub windows: DepartureWindows,
}

impl Default for InferenceParams {
    fn default() -> Self {
        Self { merge_radius_km: DEFAULT_MERGE_RADIUS_KM, speed_kmh: DEFAULT_SPEED_KMH, windows: DepartureWindows::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferredUser {
    pub home_work: HomeWorkResult,
    pub leave_home: Option<u32>,
    pub leave_work: Option<u32>,
}

/// Full per-user pipeline: eligibility, clustering, classification, departures.
///
/// Trip time is the grid route between the two centroids at `params.speed_kmh`.
pub fn infer_user(events: &[CdrEvent], weights: &ScoreWeights, params: &InferenceParams) -> Result<InferredUser, Rejection> {
    let clusters = cluster_events(events, params.merge_radius_km);
    if !eligible(events, &clusters) {
        return Err(Rejection::InsufficientActivity);
    }
    let home_work = classify_home_work(&clusters, weights).ok_or(Rejection::AmbiguousHomeWork)?;
    let (home, work) = (&clusters[home_work.home_cluster], &clusters[home_work.work_cluster]);
    let trip = trip_time_minutes(home.centroid, work.centroid, params.speed_kmh);
    let (leave_home, leave_work) = estimate_departure(events, home, work, trip, &params.windows);
    Ok(InferredUser { home_work, leave_home, leave_work })
}

/// Groups events by user, each user's events sorted by time.
pub fn group_by_user(events: &[CdrEvent]) -> BTreeMap<CommuterId, Vec<CdrEvent>> {
    let mut users: BTreeMap<CommuterId, Vec<CdrEvent>> = BTreeMap::new();
    for e in events {
        users.entry(e.user_id).or_default().push(*e);
    }
    for list in users.values_mut() {
        list.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then(a.tower.lat.total_cmp(&b.tower.lat))
                .then(a.tower.lon.total_cmp(&b.tower.lon))
        });
    }
    users
}

/// Runs [`infer_user`] for every user in parallel; output ordered by user id.
pub fn infer_all(
    events: &[CdrEvent],
    weights: &ScoreWeights,
    params: &InferenceParams,
) -> Vec<(CommuterId, Result<InferredUser, Rejection>)> {
    let users: Vec<(CommuterId, Vec<CdrEvent>)> = group_by_user(events).into_iter().collect();
    users.into_par_iter().map(|(id, ev)| (id, infer_user(&ev, weights, params))).collect()
}

const HEADER: [&str; 4] = ["user_id", "timestamp_unix", "tower_lat", "tower_lon"];

pub fn read_cdr<R: Read>(reader: R) -> Result<Vec<CdrEvent>, CdrError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    if rdr.headers()?.iter().ne(HEADER) {
        return Err(CdrError::Header);
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| CdrError::Row { line, message };
        if rec.len() != 4 {
            return Err(err(format!("expected 4 fields, got {}", rec.len())));
        }
        let user_id = rec[0].parse().map_err(|_| err(format!("bad user_id {:?}", &rec[0])))?;
        let timestamp = rec[1].parse().map_err(|_| err(format!("bad timestamp {:?}", &rec[1])))?;
        let lat: f64 = rec[2].parse().map_err(|_| err(format!("bad tower_lat {:?}", &rec[2])))?;
        let lon: f64 = rec[3].parse().map_err(|_| err(format!("bad tower_lon {:?}", &rec[3])))?;
        let tower = GeoPoint::new(lat, lon).map_err(|e| err(e.to_string()))?;
        out.push(CdrEvent { user_id, timestamp, tower });
    }
    Ok(out)
}

pub fn write_cdr<W: Write>(events: &[CdrEvent], writer: W) -> Result<(), CdrError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for e in events {
        w.write_record([
            e.user_id.to_string(),
            e.timestamp.to_string(),
            format!("{:.7}", e.tower.lat),
            format!("{:.7}", e.tower.lon),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_cdr(path: impl AsRef<Path>) -> Result<Vec<CdrEvent>, CdrError> {
    read_cdr(BufReader::new(File::open(path)?))
}

pub fn save_cdr(events: &[CdrEvent], path: impl AsRef<Path>) -> Result<(), CdrError> {
    write_cdr(events, BufWriter::new(File::create(path)?))
}
