use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rideshare::population::{generate_city, save_commuters, subsample_owners, CityConfig, CityMode, ClusterKind, PRESETS};
use rideshare::social::{save_edge_list, SocialGraph};

use crate::io::{read_json, read_population};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// City configuration JSON (see docs/city-config.schema.json).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in city: `uniform` or `clustered-metro`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Population size for a preset.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the departure spread of the configuration.
    #[arg(long)]
    pub sigma_min: Option<f64>,
    /// Overrides the share of commuters owning a car.
    #[arg(long)]
    pub car_ownership: Option<f64>,
    /// Also write the effective configuration here.
    #[arg(long)]
    pub config_out: Option<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
}

pub fn city_config(args: &GenerateArgs) -> Result<CityConfig> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => read_json::<CityConfig>(path)?,
        (None, Some(name)) => CityConfig::preset(name, args.n, 0)
            .with_context(|| format!("unknown preset `{name}` (known: {})", PRESETS.join(", ")))?,
        (None, None) => bail!("either --config or --preset is required"),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(sigma) = args.sigma_min {
        config.sigma_minutes = sigma;
    }
    if let Some(share) = args.car_ownership {
        config.car_ownership = share;
    }
    Ok(config)
}

pub fn run(args: &GenerateArgs) -> Result<()> {
    let config = city_config(args)?;
    let people = generate_city(&config)?;
    save_commuters(&people, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.config_out {
        crate::io::write_json(&config, path)?;
    }
    let owners = people.iter().filter(|c| c.has_car).count();
    let mode = match config.mode {
        CityMode::Uniform => "uniform",
        CityMode::Clustered => "clustered",
    };
    println!("n={} mode={mode} seed={} car_owners={owners}", people.len(), config.seed);
    if config.mode == CityMode::Clustered {
        let count = |k: ClusterKind| config.clusters.iter().filter(|c| c.kind == k).count();
        println!(
            "clusters={} home={} work={} mixed={}",
            config.clusters.len(),
            count(ClusterKind::Home),
            count(ClusterKind::Work),
            count(ClusterKind::Mixed)
        );
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub commuters: PathBuf,
    /// Share of commuters present in the graph.
    #[arg(long, default_value_t = 1.0)]
    pub coverage: f64,
    #[arg(long, default_value_t = 6.0)]
    pub mean_degree: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub out: PathBuf,
}

pub fn run_graph(args: &GraphArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.coverage) {
        bail!("--coverage must lie in [0, 1]");
    }
    let people = read_population(&args.commuters)?;
    let ids: Vec<_> = subsample_owners(&people, args.coverage, args.seed).iter().map(|c| c.id).collect();
    let graph = SocialGraph::preferential_attachment(&ids, args.mean_degree, args.seed)?;
    save_edge_list(&graph, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let cdf = graph.friendship_paradox_cdf();
    let paradox = if cdf.is_empty() { 0.0 } else { cdf.iter().filter(|&&r| r > 1.0).count() as f64 / cdf.len() as f64 };
    println!(
        "nodes={} edges={} max_degree={} paradox_share={:.3}",
        graph.node_count(),
        graph.edge_count(),
        graph.max_degree(),
        paradox
    );
    Ok(())
}
