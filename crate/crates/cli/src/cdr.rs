use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use rideshare::cdr::{
    cluster_events, eligible, group_by_user, infer_all, load_cdr, save_cdr, synthesize_cdr, train_weights,
    InferenceParams, LabeledUser, ScoreWeights, SynthCdrConfig, DEFAULT_MERGE_RADIUS_KM,
};
use rideshare::population::{save_commuters, Commuter, DEFAULT_CAPACITY};

use crate::io::{csv_writer, read_json, read_population, write_json};

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub commuters: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub calls_per_user: usize,
    #[arg(long, default_value_t = 30)]
    pub days: u32,
    /// Share of calls placed at random towers and times.
    #[arg(long, default_value_t = 0.1)]
    pub noise_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    pub tower_spacing_km: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub out: PathBuf,
}

pub fn run_synth(args: &SynthArgs) -> Result<()> {
    let people = read_population(&args.commuters)?;
    let config = SynthCdrConfig {
        calls_per_user: args.calls_per_user,
        days: args.days,
        noise_fraction: args.noise_fraction,
        tower_spacing_km: args.tower_spacing_km,
        seed: args.seed,
        ..SynthCdrConfig::default()
    };
    let (events, towers) = synthesize_cdr(&people, &config)?;
    save_cdr(&events, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("users={} events={} towers={}", people.len(), events.len(), towers.towers().len());
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub cdr: PathBuf,
    /// Commuter CSV holding the true homes and workplaces.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
}

pub fn run_train(args: &TrainArgs) -> Result<()> {
    let events = load_cdr(&args.cdr).with_context(|| format!("reading {}", args.cdr.display()))?;
    let truth: HashMap<_, Commuter> = read_population(&args.truth)?.into_iter().map(|c| (c.id, c)).collect();
    let mut labeled = Vec::new();
    for (id, ev) in group_by_user(&events) {
        let Some(t) = truth.get(&id) else { continue };
        let clusters = cluster_events(&ev, DEFAULT_MERGE_RADIUS_KM);
        if eligible(&ev, &clusters) {
            labeled.push(LabeledUser { clusters, home: t.home, work: t.work });
        }
    }
    let weights = train_weights(&labeled)?;
    write_json(&weights, &args.out)?;
    println!("trained on {} users", labeled.len());
    Ok(())
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub cdr: PathBuf,
    /// Classifier weights JSON written by `train`; built-in weights otherwise.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Receives homework.csv, departures.csv and rejected.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write users with both departures as a commuter CSV (every one a car owner).
    #[arg(long)]
    pub commuters_out: Option<PathBuf>,
}

pub fn run_infer(args: &InferArgs) -> Result<()> {
    let events = load_cdr(&args.cdr).with_context(|| format!("reading {}", args.cdr.display()))?;
    let weights = match &args.weights {
        Some(p) => read_json::<ScoreWeights>(p)?,
        None => ScoreWeights::default(),
    };
    let results = infer_all(&events, &weights, &InferenceParams::default());
    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;

    let mut places = csv_writer(&args.out_dir.join("homework.csv"))?;
    places.write_record(["user_id", "home_lat", "home_lon", "work_lat", "work_lon"])?;
    let mut departures = csv_writer(&args.out_dir.join("departures.csv"))?;
    departures.write_record(["user_id", "leave_home_min", "leave_work_min"])?;
    let mut rejected = csv_writer(&args.out_dir.join("rejected.csv"))?;
    rejected.write_record(["user_id", "reason"])?;

    let fmt = |x: f64| format!("{x:.7}");
    let opt = |m: Option<u32>| m.map(|v| v.to_string()).unwrap_or_default();
    let (mut accepted, mut commuters) = (0, Vec::new());
    for (id, r) in &results {
        match r {
            Ok(u) => {
                accepted += 1;
                let hw = &u.home_work;
                places.write_record([
                    id.to_string(),
                    fmt(hw.home.lat),
                    fmt(hw.home.lon),
                    fmt(hw.work.lat),
                    fmt(hw.work.lon),
                ])?;
                departures.write_record([id.to_string(), opt(u.leave_home), opt(u.leave_work)])?;
                if let (Some(leave_home), Some(leave_work)) = (u.leave_home, u.leave_work) {
                    commuters.push(Commuter {
                        id: *id,
                        home: hw.home,
                        work: hw.work,
                        leave_home,
                        leave_work,
                        capacity: DEFAULT_CAPACITY,
                        has_car: true,
                    });
                }
            }
            Err(reason) => rejected.write_record([id.to_string(), reason.as_str().to_string()])?,
        }
    }
    places.flush()?;
    departures.flush()?;
    rejected.flush()?;
    if let Some(path) = &args.commuters_out {
        save_commuters(&commuters, path).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("users={} inferred={} rejected={}", results.len(), accepted, results.len() - accepted);
    Ok(())
}
