use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::cluster::PlaceCluster;
use super::CdrError;
use crate::geo::{distance_km, GeoPoint};

pub const FEATURE_COUNT: usize = 5;
pub const MIN_TRAINING_USERS: usize = 20;

const RIDGE: f64 = 1e-3;
const NEWTON_TOLERANCE: f64 = 1e-12;
const NEWTON_MAX_ITERS: usize = 200;

/// Per-cluster features, each scaled by the user's total:
/// days seen, active span, inverse rank, home-hour share and work-hour share.
pub fn features(clusters: &[PlaceCluster]) -> Vec<[f64; FEATURE_COUNT]> {
    let (Some(first), Some(last)) =
        (clusters.iter().map(|c| c.first_day).min(), clusters.iter().map(|c| c.last_day).max())
    else {
        return Vec::new();
    };
    let span = (last - first + 1) as f64;
    let days_total: u32 = clusters.iter().map(|c| c.days_appeared).sum();
    let home_total: u32 = clusters.iter().map(|c| c.home_hour_events).sum();
    let work_total: u32 = clusters.iter().map(|c| c.work_hour_events).sum();
    let share = |x: u32, total: u32| if total == 0 { 0.0 } else { x as f64 / total as f64 };
    clusters
        .iter()
        .map(|c| {
            [
                share(c.days_appeared, days_total),
                (c.last_day - c.first_day + 1) as f64 / span,
                1.0 / c.rank as f64,
                share(c.home_hour_events, home_total),
                share(c.work_hour_events, work_total),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearScorer {
    pub weights: [f64; FEATURE_COUNT],
    pub bias: f64,
}

impl LinearScorer {
    pub fn score(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Home and work scorers; a cluster qualifies when its score is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub home: LinearScorer,
    pub work: LinearScorer,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            home: LinearScorer { weights: [1.0, 1.0, 1.0, 6.0, -3.0], bias: -3.5 },
            work: LinearScorer { weights: [1.0, 1.0, 1.0, -3.0, 6.0], bias: -3.5 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomeWorkResult {
    pub home: GeoPoint,
    pub work: GeoPoint,
    /// Indices into the cluster list the result came from.
    pub home_cluster: usize,
    pub work_cluster: usize,
}

/// Exactly one cluster must score as home, and exactly one other as work.
pub fn classify_home_work(clusters: &[PlaceCluster], weights: &ScoreWeights) -> Option<HomeWorkResult> {
    let x = features(clusters);
    let only = |it: &mut dyn Iterator<Item = usize>| match (it.next(), it.next()) {
        (Some(i), None) => Some(i),
        _ => None,
    };
    let home = only(&mut (0..x.len()).filter(|&i| weights.home.score(&x[i]) > 0.0))?;
    let work = only(&mut (0..x.len()).filter(|&i| i != home && weights.work.score(&x[i]) > 0.0))?;
    Some(HomeWorkResult { home: clusters[home].centroid, work: clusters[work].centroid, home_cluster: home, work_cluster: work })
}

/// A user's clusters with their true home and workplace.
#[derive(Debug, Clone)]
pub struct LabeledUser {
    pub clusters: Vec<PlaceCluster>,
    pub home: GeoPoint,
    pub work: GeoPoint,
}

fn nearest(clusters: &[PlaceCluster], p: GeoPoint) -> Option<usize> {
    (0..clusters.len()).min_by(|&a, &b| distance_km(clusters[a].centroid, p).total_cmp(&distance_km(clusters[b].centroid, p)))
}

/// L2-regularised logistic regression for both scorers, by Newton's method
/// from zero weights.
///
/// The cluster nearest the true home is the home positive; likewise for work.
pub fn train_weights(labeled: &[LabeledUser]) -> Result<ScoreWeights, CdrError> {
    if labeled.len() < MIN_TRAINING_USERS {
        return Err(CdrError::TooFewUsers(labeled.len()));
    }
    let mut rows = Vec::new();
    let (mut home_y, mut work_y) = (Vec::new(), Vec::new());
    for u in labeled {
        let x = features(&u.clusters);
        let (h, w) = (nearest(&u.clusters, u.home), nearest(&u.clusters, u.work));
        for (i, xi) in x.into_iter().enumerate() {
            rows.push(xi);
            home_y.push(Some(i) == h);
            work_y.push(Some(i) == w);
        }
    }
    Ok(ScoreWeights { home: logistic(&rows, &home_y, "home")?, work: logistic(&rows, &work_y, "work")? })
}

const D: usize = FEATURE_COUNT + 1;

fn logistic(rows: &[[f64; FEATURE_COUNT]], y: &[bool], what: &'static str) -> Result<LinearScorer, CdrError> {
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(CdrError::DegenerateLabels(what));
    }
    let design = |x: &[f64; FEATURE_COUNT]| {
        let mut v = SVector::<f64, D>::zeros();
        v.fixed_rows_mut::<FEATURE_COUNT>(0).copy_from_slice(x);
        v[FEATURE_COUNT] = 1.0;
        v
    };
    let mut beta = SVector::<f64, D>::zeros();
    for _ in 0..NEWTON_MAX_ITERS {
        let mut grad = RIDGE * beta;
        let mut hess = SMatrix::<f64, D, D>::identity() * RIDGE;
        for (x, &label) in rows.iter().zip(y) {
            let v = design(x);
            let p = 1.0 / (1.0 + (-beta.dot(&v)).exp());
            grad += v * (p - f64::from(u8::from(label)));
            hess += v * v.transpose() * (p * (1.0 - p));
        }
        let step = hess.cholesky().expect("ridge keeps the Hessian positive definite").solve(&grad);
        beta -= step;
        if step.amax() < NEWTON_TOLERANCE {
            break;
        }
    }
    let mut weights = [0.0; FEATURE_COUNT];
    weights.copy_from_slice(beta.fixed_rows::<FEATURE_COUNT>(0).as_slice());
    Ok(LinearScorer { weights, bias: beta[FEATURE_COUNT] })
}
