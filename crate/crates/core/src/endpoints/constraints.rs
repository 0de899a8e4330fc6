use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::MatchError;
use crate::geo::distance_km;
use crate::population::Commuter;
use crate::social::{SocialGraph, SocialHops};

/// Slack added to every driver penalty so that `p(v) > 2 * delta * c(v)` strictly.
pub const PENALTY_EPSILON_KM: f64 = 0.001;

/// Feasibility parameters for pairing a driver with a passenger.
#[derive(Debug, Clone)]
pub struct MatchConstraints {
    pub delta_km: f64,
    /// Departure tolerance in minutes; `None` means unbounded.
    pub tau_min: Option<u32>,
    pub social_hops: Option<SocialHops>,
    pub social_graph: Option<Arc<SocialGraph>>,
}

/// Serializable view of [`MatchConstraints`] (the graph itself is not embedded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintsSummary {
    pub delta_km: f64,
    pub tau_min: Option<u32>,
    pub social_hops: Option<u32>,
}

impl MatchConstraints {
    pub fn new(delta_km: f64, tau_min: Option<u32>) -> Result<Self, MatchError> {
        if !(delta_km >= 0.0 && delta_km.is_finite()) {
            return Err(MatchError::Constraints(format!("delta {delta_km} km must be finite and non-negative")));
        }
        Ok(Self { delta_km, tau_min, social_hops: None, social_graph: None })
    }

    pub fn with_social(mut self, hops: SocialHops, graph: Arc<SocialGraph>) -> Self {
        self.social_hops = Some(hops);
        self.social_graph = Some(graph);
        self
    }

    pub fn validate(&self) -> Result<(), MatchError> {
        if !(self.delta_km >= 0.0 && self.delta_km.is_finite()) {
            return Err(MatchError::Constraints(format!("delta {} km must be finite and non-negative", self.delta_km)));
        }
        if self.social_hops.is_some() && self.social_graph.is_none() {
            return Err(MatchError::Constraints("a social hop limit needs a social graph".into()));
        }
        Ok(())
    }

    pub fn summary(&self) -> ConstraintsSummary {
        ConstraintsSummary {
            delta_km: self.delta_km,
            tau_min: self.tau_min,
            social_hops: self.social_hops.map(SocialHops::count),
        }
    }

    /// Driver penalty `p(v) = 2 * delta * c(v) + epsilon`.
    pub fn penalty(&self, driver: &Commuter) -> f64 {
        2.0 * self.delta_km * driver.capacity as f64 + PENALTY_EPSILON_KM
    }

    pub fn time_compatible(&self, a: &Commuter, b: &Commuter) -> bool {
        match self.tau_min {
            None => true,
            Some(tau) => a.leave_home.abs_diff(b.leave_home) <= tau && a.leave_work.abs_diff(b.leave_work) <= tau,
        }
    }

    pub fn socially_compatible(&self, a: &Commuter, b: &Commuter) -> bool {
        match (self.social_hops, &self.social_graph) {
            (None, _) => true,
            (Some(hops), Some(g)) => g.within_k_hops(a.id, b.id, hops),
            (Some(_), None) => false,
        }
    }
}

/// Home distance plus work distance when the pair is feasible, `None` otherwise.
///
/// Feasible means both distances are within delta, both departure gaps are
/// within tau and (when enabled) the two are close enough in the social graph.
pub fn virtual_distance(u: &Commuter, v: &Commuter, c: &MatchConstraints) -> Option<f64> {
    if u.id == v.id {
        return Some(0.0);
    }
    if !c.time_compatible(u, v) {
        return None;
    }
    let h = distance_km(u.home, v.home);
    if h > c.delta_km {
        return None;
    }
    let w = distance_km(u.work, v.work);
    if w > c.delta_km {
        return None;
    }
    if !c.socially_compatible(u, v) {
        return None;
    }
    Some(h + w)
}
