use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rideshare::endpoints::{LocalSearchParams, MatchConstraints};
use rideshare::social::{load_edge_list, SocialHops};

#[derive(Debug, Clone, Args)]
pub struct ConstraintArgs {
    /// Maximum home and work distance between driver and passenger.
    #[arg(long, default_value_t = 1.0)]
    pub delta_km: f64,
    /// Departure tolerance in minutes; omit for unbounded.
    #[arg(long)]
    pub tau_min: Option<u32>,
    /// Only match commuters within this many hops (1 or 2) in the social graph.
    #[arg(long, requires = "social_graph")]
    pub social_hops: Option<u32>,
    /// Edge-list CSV (`user_a,user_b`).
    #[arg(long)]
    pub social_graph: Option<PathBuf>,
}

impl ConstraintArgs {
    pub fn build(&self) -> Result<MatchConstraints> {
        let mut c = MatchConstraints::new(self.delta_km, self.tau_min)?;
        if let Some(k) = self.social_hops {
            let hops = parse_hops(k)?;
            let path = self.social_graph.as_ref().context("--social-hops needs --social-graph")?;
            c = c.with_social(hops, Arc::new(load_graph(path)?));
        }
        Ok(c)
    }
}

pub fn parse_hops(k: u32) -> Result<SocialHops> {
    SocialHops::from_count(k).with_context(|| format!("--social-hops must be 1 or 2, got {k}"))
}

pub fn load_graph(path: &PathBuf) -> Result<rideshare::social::SocialGraph> {
    load_edge_list(path).with_context(|| format!("reading social graph {}", path.display()))
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Candidate moves sampled per local-search iteration.
    #[arg(long, default_value_t = 32)]
    pub neighborhood: usize,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Only let a car take riders from cars holding strictly fewer people.
    #[arg(long)]
    pub strict_richer: bool,
    /// Side of the routing grid cells.
    #[arg(long, default_value_t = rideshare::enroute::DEFAULT_ROUTE_CELL_KM)]
    pub route_cell_km: f64,
}

impl SearchArgs {
    pub fn local_search(&self) -> Result<LocalSearchParams> {
        if self.neighborhood == 0 {
            bail!("--neighborhood must be positive");
        }
        Ok(LocalSearchParams { neighborhood_size: self.neighborhood, max_iters: self.max_iters, seed: self.seed })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Mode {
    Endpoints,
    Enroute,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Endpoints => "endpoints",
            Mode::Enroute => "enroute",
        }
    }
}

/// Comma-separated numbers; `inf` or `none` stand for unbounded.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<Option<T>>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "inf" | "none" | "unbounded" => Ok(None),
            _ => t.parse().map(Some).map_err(|e| anyhow::anyhow!("bad list item `{t}`: {e}")),
        })
        .collect()
}
