use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use rideshare::endpoints::{
    solve_endpoints, success_ratio, validate_endpoints, Assignment, AssignmentDocument, ConstraintsSummary,
    CostBreakdown, LocalSearchParams, MatchConstraints, MatchingInstance, ABSOLUTE_UPPER_BOUND,
};
use rideshare::enroute::{enroute_solve, validate_enroute, EnrouteParams, Route, RouteGrid};
use rideshare::population::{car_owners, Commuter, CommuterId};
use serde::Serialize;

use crate::args::{ConstraintArgs, Mode, SearchArgs};
use crate::io::{ensure_valid, read_json, read_population, write_json};

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub commuters: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Endpoints)]
    pub mode: Mode,
    #[command(flatten)]
    pub constraints: ConstraintArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Assignment JSON output.
    #[arg(long)]
    pub assignment: PathBuf,
    /// Report JSON output (see docs/report.schema.json).
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchSummary {
    pub iterations: usize,
    pub accepted_moves: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnrouteSummary {
    pub sweeps: usize,
    pub steals: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub mode: &'static str,
    pub commuters: usize,
    pub car_owners: usize,
    pub constraints: ConstraintsSummary,
    pub seed: u64,
    pub cars_before: usize,
    pub cars_after_initial: usize,
    pub cars_after_endpoints: usize,
    pub cars_after: usize,
    pub success_percent: f64,
    pub absolute_bound_percent: f64,
    pub tighter_bound_percent: f64,
    pub cost: CostBreakdown,
    pub local_search: SearchSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enroute: Option<EnrouteSummary>,
    pub violations: usize,
    pub runtime_seconds: f64,
}

/// A validated solve over car owners.
pub struct Solved {
    pub report: SolveReport,
    pub assignment: Assignment,
    pub routes: Option<Vec<(CommuterId, Route)>>,
}

pub fn solve_owners(
    people: &[Commuter],
    mode: Mode,
    c: &MatchConstraints,
    params: &LocalSearchParams,
    enroute: &EnrouteParams,
    route_cell_km: f64,
) -> Result<Solved> {
    let started = Instant::now();
    let owners = car_owners(people);
    let inst = MatchingInstance::new(&owners, c)?;
    let tighter = inst.tighter_upper_bound();
    let endpoints = solve_endpoints(&inst, params);
    ensure_valid("end-points assignment", validate_endpoints(&endpoints.assignment, &owners, c))?;
    let cars_after_endpoints = endpoints.assignment.car_count();

    let (assignment, summary, routes) = if mode == Mode::Enroute && !owners.is_empty() {
        let grid = RouteGrid::covering(&owners, route_cell_km)?;
        let out = enroute_solve(&endpoints.assignment, &owners, c, &grid, enroute)?;
        ensure_valid("en-route assignment", validate_enroute(&out.assignment, &owners, c, &grid))?;
        let summary = EnrouteSummary { sweeps: out.sweeps, steals: out.steals };
        (out.assignment, Some(summary), Some(out.routes.into_iter().collect()))
    } else {
        (endpoints.assignment, (mode == Mode::Enroute).then_some(EnrouteSummary { sweeps: 0, steals: 0 }), None)
    };

    let cars_before = owners.len();
    let success = if cars_before == 0 { 0.0 } else { success_ratio(cars_before, assignment.car_count())? };
    let report = SolveReport {
        mode: mode.as_str(),
        commuters: people.len(),
        car_owners: owners.len(),
        constraints: c.summary(),
        seed: params.seed,
        cars_before,
        cars_after_initial: endpoints.initial_cars,
        cars_after_endpoints,
        cars_after: assignment.car_count(),
        success_percent: success,
        absolute_bound_percent: ABSOLUTE_UPPER_BOUND,
        tighter_bound_percent: tighter,
        cost: rideshare::endpoints::total_cost(&assignment, &owners, c),
        local_search: SearchSummary { iterations: endpoints.stats.iterations, accepted_moves: endpoints.stats.accepted },
        enroute: summary,
        violations: 0,
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(Solved { report, assignment, routes })
}

pub fn run(args: &SolveArgs) -> Result<()> {
    let people = read_population(&args.commuters)?;
    let c = args.constraints.build()?;
    let enroute = EnrouteParams { strict_richer: args.search.strict_richer };
    let solved =
        solve_owners(&people, args.mode, &c, &args.search.local_search()?, &enroute, args.search.route_cell_km)?;
    let owners = car_owners(&people);
    let mut doc = AssignmentDocument::new(&solved.assignment, &owners, &c);
    doc.routes = solved.routes.map(|rs| rs.into_iter().map(|(d, r)| (d, r.as_pairs())).collect());
    write_json(&doc, &args.assignment)?;
    write_json(&solved.report, &args.report)?;
    let r = &solved.report;
    println!(
        "mode={} cars_before={} cars_after={} success={:.2}% tighter_bound={:.2}% runtime={:.2}s",
        r.mode, r.cars_before, r.cars_after, r.success_percent, r.tighter_bound_percent, r.runtime_seconds
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub commuters: PathBuf,
    #[arg(long)]
    pub assignment: PathBuf,
    /// `enroute` checks riders against the driver's route instead of end points.
    #[arg(long, value_enum, default_value_t = Mode::Endpoints)]
    pub mode: Mode,
    #[command(flatten)]
    pub constraints: ConstraintArgs,
    #[arg(long, default_value_t = rideshare::enroute::DEFAULT_ROUTE_CELL_KM)]
    pub route_cell_km: f64,
}

pub fn run_validate(args: &ValidateArgs) -> Result<()> {
    let owners = car_owners(&read_population(&args.commuters)?);
    let c = args.constraints.build()?;
    let doc: AssignmentDocument = read_json(&args.assignment)?;
    let a = doc.assignment();
    let violations = match args.mode {
        Mode::Endpoints => validate_endpoints(&a, &owners, &c),
        Mode::Enroute => {
            let grid = RouteGrid::covering(&owners, args.route_cell_km).context("building the routing grid")?;
            validate_enroute(&a, &owners, &c, &grid)
        }
    };
    ensure_valid(&format!("assignment {}", args.assignment.display()), violations)?;
    println!("ok: {} commuters in {} cars", a.person_count(), a.car_count());
    Ok(())
}
