use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use rideshare::endpoints::{MatchConstraints, MatchingInstance, ABSOLUTE_UPPER_BOUND};
use rideshare::enroute::EnrouteParams;
use rideshare::population::{car_owners, generate_city, CityConfig, PRESETS};
use serde::{Deserialize, Serialize};

use crate::args::{load_graph, parse_hops, parse_list, Mode, SearchArgs};
use crate::io::{csv_writer, read_json, read_population};
use crate::solve::solve_owners;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepSolver {
    Endpoints,
    Enroute,
    TighterBound,
}

impl SweepSolver {
    fn as_str(self) -> &'static str {
        match self {
            SweepSolver::Endpoints => "endpoints",
            SweepSolver::Enroute => "enroute",
            SweepSolver::TighterBound => "tighter_bound",
        }
    }
}

/// Parameter grid of a sweep. `null` in `taus_min` means unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub deltas_km: Vec<f64>,
    pub taus_min: Vec<Option<u32>>,
    /// Departure spread used when the population comes from a preset.
    #[serde(default)]
    pub sigma_min: Option<f64>,
    #[serde(default)]
    pub social_hops: Option<u32>,
    pub solvers: Vec<SweepSolver>,
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if self.deltas_km.is_empty() || self.taus_min.is_empty() || self.solvers.is_empty() {
            bail!("sweep needs at least one delta, one tau and one solver");
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Commuter CSV; alternatively --preset.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub commuters: Option<PathBuf>,
    /// Generate the population from a built-in city.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Seed of the generated population.
    #[arg(long, default_value_t = 0)]
    pub city_seed: u64,
    /// Sweep spec JSON (see docs/sweep-spec.schema.json); overrides the list flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value = "1.0")]
    pub deltas_km: String,
    /// Comma-separated; `inf` for unbounded.
    #[arg(long, default_value = "10")]
    pub taus_min: String,
    #[arg(long, default_value = "endpoints,tighter_bound")]
    pub solvers: String,
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[arg(long, requires = "social_graph")]
    pub social_hops: Option<u32>,
    #[arg(long)]
    pub social_graph: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(short, long)]
    pub out: PathBuf,
}

fn spec_from_flags(args: &SweepArgs) -> Result<SweepSpec> {
    let deltas = parse_list::<f64>(&args.deltas_km)?
        .into_iter()
        .map(|d| d.context("--deltas-km entries must be finite"))
        .collect::<Result<_>>()?;
    let solvers = args
        .solvers
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| serde_json::from_value(serde_json::Value::String(s.to_string())).with_context(|| format!("unknown solver `{s}`")))
        .collect::<Result<_>>()?;
    Ok(SweepSpec {
        deltas_km: deltas,
        taus_min: parse_list(&args.taus_min)?,
        sigma_min: args.sigma_min,
        social_hops: args.social_hops,
        solvers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub solver: &'static str,
    pub delta_km: f64,
    pub tau_min: Option<u32>,
    pub social_hops: Option<u32>,
    pub cars_before: usize,
    pub cars_after: Option<usize>,
    pub success_percent: f64,
    pub tighter_bound_percent: f64,
    pub absolute_bound_percent: f64,
}

pub fn run(args: &SweepArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(path) => read_json::<SweepSpec>(path)?,
        None => spec_from_flags(args)?,
    };
    spec.validate()?;
    let people = match (&args.commuters, &args.preset) {
        (Some(path), _) => read_population(path)?,
        (None, Some(name)) => {
            let mut config = CityConfig::preset(name, args.n, args.city_seed)
                .with_context(|| format!("unknown preset `{name}` (known: {})", PRESETS.join(", ")))?;
            if let Some(sigma) = spec.sigma_min {
                config.sigma_minutes = sigma;
            }
            generate_city(&config)?
        }
        (None, None) => bail!("either --commuters or --preset is required"),
    };
    let social = match spec.social_hops {
        Some(k) => {
            let path = args.social_graph.as_ref().context("a social hop limit needs --social-graph")?;
            Some((parse_hops(k)?, Arc::new(load_graph(path)?)))
        }
        None => None,
    };
    let params = args.search.local_search()?;
    let enroute = EnrouteParams { strict_richer: args.search.strict_richer };

    let mut cells = Vec::new();
    for &solver in &spec.solvers {
        for &delta in &spec.deltas_km {
            for &tau in &spec.taus_min {
                cells.push((solver, delta, tau));
            }
        }
    }
    // Unbounded tau sorts after every finite value.
    let tau_key = |t: Option<u32>| t.map_or(u64::MAX, u64::from);
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(tau_key(a.2).cmp(&tau_key(b.2))));
    cells.dedup();

    let owners = car_owners(&people);
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(solver, delta, tau)| {
            let mut c = MatchConstraints::new(delta, tau)?;
            if let Some((hops, graph)) = &social {
                c = c.with_social(*hops, Arc::clone(graph));
            }
            let tighter = MatchingInstance::new(&owners, &c)?.tighter_upper_bound();
            let (cars_after, success) = match solver {
                SweepSolver::TighterBound => (None, tighter),
                SweepSolver::Endpoints | SweepSolver::Enroute => {
                    let mode = if solver == SweepSolver::Enroute { Mode::Enroute } else { Mode::Endpoints };
                    let solved = solve_owners(&people, mode, &c, &params, &enroute, args.search.route_cell_km)?;
                    (Some(solved.report.cars_after), solved.report.success_percent)
                }
            };
            Ok(SweepRow {
                solver: solver.as_str(),
                delta_km: delta,
                tau_min: tau,
                social_hops: spec.social_hops,
                cars_before: owners.len(),
                cars_after,
                success_percent: success,
                tighter_bound_percent: tighter,
                absolute_bound_percent: ABSOLUTE_UPPER_BOUND,
            })
        })
        .collect::<Result<_>>()?;

    let mut w = csv_writer(&args.out)?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    println!("rows={} commuters={} car_owners={}", rows.len(), people.len(), owners.len());
    Ok(())
}
