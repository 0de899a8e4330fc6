use std::fs::File;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rideshare::enroute::EnrouteParams;
use rideshare::extrapolation::{
    fit_and_project, read_curve, sample_curve, write_curve, CurvePoint, CurveSolver, Projection, SolverKind,
};
use rideshare::population::car_owners;
use serde::Serialize;

use crate::args::{parse_list, ConstraintArgs, Mode, SearchArgs};
use crate::io::{read_population, write_json};

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Commuter CSV to subsample; alternatively --curve.
    #[arg(long, conflicts_with = "curve", required_unless_present = "curve")]
    pub commuters: Option<PathBuf>,
    /// Existing curve CSV (`fraction,savings_percent`).
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Ascending sample fractions in (0, 1].
    #[arg(long, default_value = "0.2,0.4,0.6,0.8,1.0")]
    pub fractions: String,
    /// Population multiple to project to.
    #[arg(long, default_value_t = 3.6)]
    pub target: f64,
    #[arg(long, value_enum, default_value_t = Mode::Endpoints)]
    pub mode: Mode,
    /// Subsamples averaged per fraction.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[command(flatten)]
    pub constraints: ConstraintArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Also write the sampled curve here.
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct ProjectionDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<&'static str>,
    curve: Vec<CurvePoint>,
    #[serde(flatten)]
    projection: Projection,
}

pub fn run(args: &ProjectArgs) -> Result<()> {
    if !(args.target.is_finite() && args.target > 0.0) {
        bail!("--target must be positive");
    }
    let (curve, solver) = match (&args.curve, &args.commuters) {
        (Some(path), _) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            (read_curve(file)?, None)
        }
        (None, Some(path)) => {
            let owners = car_owners(&read_population(path)?);
            let fractions = parse_list::<f64>(&args.fractions)?
                .into_iter()
                .map(|f| f.context("--fractions entries must be finite"))
                .collect::<Result<Vec<_>>>()?;
            let kind = match args.mode {
                Mode::Endpoints => SolverKind::Endpoints,
                Mode::Enroute => SolverKind::Enroute,
            };
            let solver = CurveSolver {
                local_search: args.search.local_search()?,
                enroute: EnrouteParams { strict_richer: args.search.strict_richer },
                route_cell_km: args.search.route_cell_km,
                ..CurveSolver::new(kind)
            };
            let c = args.constraints.build()?;
            (sample_curve(&owners, &fractions, &solver, &c, args.repeats, args.search.seed)?, Some(args.mode.as_str()))
        }
        (None, None) => bail!("either --commuters or --curve is required"),
    };
    if let Some(path) = &args.curve_out {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_curve(&curve, file)?;
    }
    let projection = fit_and_project(&curve, args.target)?;
    println!(
        "a={:.4} b={:.4} c={:.4} projected={:.2}% at {}x",
        projection.params.a,
        projection.params.b,
        projection.params.c,
        projection.projected_savings_percent,
        args.target
    );
    write_json(&ProjectionDocument { solver, curve, projection }, &args.out)
}
