use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use wecan::estimation::RestartSummary;
use wecan::eval::{cluster_summary_from_labels, noise_report_from_labels};
use wecan::{EdgeListFormat, FitOptions, FitResult, Network, PriorConfig, SimConfig, WecanError, WeightFamily};

use crate::files::{csv_error, csv_writer, prepare_outputs, read_labels, write_json};
use crate::CliError;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Family {
    Normal,
    Lognormal,
}

impl From<Family> for WeightFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Normal => WeightFamily::Normal,
            Family::Lognormal => WeightFamily::LogNormal,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Tsv,
}

/// How to read an edge list.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// Edge list delimiter; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// The edge list has no header row.
    #[arg(long)]
    no_header: bool,
}

impl InputArgs {
    fn load(&self, path: &Path) -> Result<Network, CliError> {
        if !path.is_file() {
            return Err(CliError::Usage(format!("input file {} does not exist", path.display())));
        }
        let format = match self.format {
            Some(Format::Csv) => EdgeListFormat::Csv,
            Some(Format::Tsv) => EdgeListFormat::Tsv,
            None => EdgeListFormat::from_path(path),
        };
        Network::load_edge_list(path, format, !self.no_header)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

// ---------------------------------------------------------------------------
// fit

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Edge list with columns sender, receiver, weight.
    input: PathBuf,
    #[command(flatten)]
    input_args: InputArgs,
    /// Weight family.
    #[arg(long, value_enum, default_value = "normal")]
    family: Family,
    /// Cluster budget K_max [default: 10].
    #[arg(long)]
    kmax: Option<usize>,
    /// Latent dimension [default: 4].
    #[arg(long)]
    p: Option<usize>,
    /// Number of random restarts [default: 15].
    #[arg(long)]
    seeds: Option<usize>,
    /// Restart r uses seed seed-base + r [default: 0].
    #[arg(long)]
    seed_base: Option<u64>,
    /// Rate of the exponential noise-weight law; chosen from the data when omitted.
    #[arg(long)]
    noise_rate: Option<f64>,
    /// TOML file with [prior] and [fit] tables; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for the restarts.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory for fit.json and assignments.csv.
    #[arg(long, default_value = "wecan-fit")]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    prior: toml::Table,
    #[serde(default)]
    fit: toml::Table,
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut toml::Table, top: &toml::Table) {
    for (key, value) in top {
        match (base.get_mut(key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            _ => {
                base.insert(key.clone(), value.clone());
            }
        }
    }
}

fn overlay<T>(base: &T, top: &toml::Table, path: &Path) -> Result<T, CliError>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("{}: {e}", path.display()));
    let mut table = toml::Table::try_from(base).map_err(|e| bad(&e))?;
    merge(&mut table, top);
    table.try_into().map_err(|e| bad(&e))
}

/// The fitted model together with the settings that produced it.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitOutput {
    pub input: PathBuf,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub prior: PriorConfig,
    pub options: FitOptions,
    pub result: FitResult,
}

fn resolve_fit_settings(args: &FitArgs) -> Result<(PriorConfig, FitOptions), CliError> {
    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let parsed: ConfigFile =
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            Some((path.clone(), parsed))
        }
        None => None,
    };
    let (cfg_path, cfg) = config.unwrap_or_default();
    let from_cfg = |key: &str| cfg.prior.get(key).and_then(|v| v.as_integer()).map(|v| v as usize);
    let k_max = args.kmax.or(from_cfg("k_max")).unwrap_or(10);
    let p = args.p.or(from_cfg("p")).unwrap_or(4);

    let mut prior = overlay(&PriorConfig::new(k_max, p), &cfg.prior, &cfg_path)?;
    prior.k_max = k_max;
    prior.p = p;
    if let Some(rate) = args.noise_rate {
        prior.lambda_a = Some(rate);
    }
    prior.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let mut options = overlay(&FitOptions::default(), &cfg.fit, &cfg_path)?;
    if let Some(s) = args.seeds {
        options.seeds = s;
    }
    if let Some(b) = args.seed_base {
        options.seed_base = b;
    }
    if args.threads.is_some() {
        options.threads = args.threads;
    }
    if options.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    if options.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    Ok((prior, options))
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let (prior, options) = resolve_fit_settings(&args)?;
    let net = args.input_args.load(&args.input)?;
    let paths = prepare_outputs(&args.out, &["fit.json", "assignments.csv"], args.force)?;
    let family = WeightFamily::from(args.family);

    let result = wecan::fit(&net, family, None, &prior, &options).map_err(|e| match e {
        WecanError::AllRestartsFailed(_) => CliError::Numerical(e.to_string()),
        WecanError::InvalidArgument(_) | WecanError::OutOfSupport { .. } => CliError::Usage(e.to_string()),
        other => CliError::Numerical(other.to_string()),
    })?;

    print_restarts(&result.restarts, result.seed);
    println!(
        "K_effective {} with {} noise edges of {} (noise rate {:.4})",
        result.k_effective,
        result.assignments.iter().filter(|&&z| z == 0).count(),
        net.n_edges(),
        result.noise_rate
    );

    let mut w = csv_writer(&paths[1])?;
    w.write_record(["edge", "sender", "receiver", "weight", "cluster"])
        .map_err(|e| csv_error(&paths[1], e))?;
    for (m, (e, z)) in net.edges().iter().zip(&result.assignments).enumerate() {
        w.write_record([
            m.to_string(),
            net.label(e.sender),
            net.label(e.receiver),
            wecan::graph::format_g17(e.weight),
            z.to_string(),
        ])
        .map_err(|e| csv_error(&paths[1], e))?;
    }
    w.flush().map_err(|e| csv_error(&paths[1], e))?;

    let output = FitOutput {
        input: args.input.clone(),
        n_nodes: net.n_nodes(),
        n_edges: net.n_edges(),
        prior,
        options,
        result,
    };
    write_json(&paths[0], &output)?;
    println!("wrote {} and {}", paths[0].display(), paths[1].display());
    Ok(())
}

fn print_restarts(restarts: &[RestartSummary], chosen: u64) {
    println!("{:>6} {:>14} {:>5} {:>6}  status", "seed", "ICL", "K_eff", "iters");
    for r in restarts {
        let mark = if r.seed == chosen { "*" } else { "" };
        match (&r.error, r.icl, r.k_effective) {
            (None, Some(icl), Some(k)) => println!(
                "{:>6} {:>14.3} {:>5} {:>6}  {}{}",
                r.seed,
                icl,
                k,
                r.iterations,
                if r.converged { "converged" } else { "iteration limit" },
                mark
            ),
            (err, _, _) => println!("{:>6} {:>14} {:>5} {:>6}  failed: {}", r.seed, "-", "-", "-", err.as_deref().unwrap_or("?")),
        }
    }
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Paper,
    Desk,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Base configuration.
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    /// Number of nodes.
    #[arg(long)]
    nodes: Option<usize>,
    /// Exact number of edges.
    #[arg(long)]
    edges: Option<usize>,
    /// Number of structural clusters.
    #[arg(long)]
    clusters: Option<usize>,
    /// Expected fraction of noise edges, in [0, 1).
    #[arg(long)]
    noise: Option<f64>,
    /// Latent dimension.
    #[arg(long)]
    p: Option<usize>,
    /// Weight family of structural edges.
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for edges.csv, truth.csv, params.json and manifest.json.
    #[arg(long, default_value = "wecan-sim")]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    preset: &'a str,
    config: &'a SimConfig,
    files: [&'a str; 3],
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let (name, mut config) = match args.preset {
        Preset::Paper => ("paper", SimConfig::paper()),
        Preset::Desk => ("desk", SimConfig::desk()),
    };
    if let Some(n) = args.nodes {
        config.n_nodes = n;
    }
    if let Some(m) = args.edges {
        config.n_edges = m;
    }
    if let Some(k) = args.clusters {
        config.k_true = k;
    }
    if let Some(noise) = args.noise {
        config.noise_proportion = noise;
    }
    if let Some(p) = args.p {
        config.p = p;
    }
    if let Some(f) = args.family {
        config.family = f.into();
    }
    config.seed = args.seed;
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let names = ["edges.csv", "truth.csv", "params.json", "manifest.json"];
    let paths = prepare_outputs(&args.out, &names, args.force)?;
    let sim = wecan::generate(&config).map_err(|e| CliError::Numerical(e.to_string()))?;

    sim.network
        .save_edge_list(&paths[0], EdgeListFormat::Csv, true)
        .map_err(|e| csv_error(&paths[0], e))?;
    let mut w = csv_writer(&paths[1])?;
    w.write_record(["edge", "cluster"]).map_err(|e| csv_error(&paths[1], e))?;
    for (m, z) in sim.truth.iter().enumerate() {
        w.write_record([m.to_string(), z.to_string()])
            .map_err(|e| csv_error(&paths[1], e))?;
    }
    w.flush().map_err(|e| csv_error(&paths[1], e))?;
    write_json(&paths[2], &sim.params)?;
    write_json(
        &paths[3],
        &Manifest {
            preset: name,
            config: &config,
            files: [names[0], names[1], names[2]],
        },
    )?;

    let noise = sim.truth.iter().filter(|&&z| z == 0).count();
    println!(
        "{} nodes, {} edges ({} noise), {} clusters; wrote {}",
        config.n_nodes,
        config.n_edges,
        noise,
        config.k_true,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// CSV with `edge` and `cluster` columns (0 marks noise).
    #[arg(long)]
    truth: PathBuf,
    /// fit.json written by `wecan fit`.
    #[arg(long)]
    fit: PathBuf,
    /// The fitted edge list; enables the cluster and noise summaries.
    #[arg(long)]
    network: Option<PathBuf>,
    #[command(flatten)]
    input_args: InputArgs,
    /// Weight cutoff of the noise cross-tabulation.
    #[arg(long, default_value_t = 1.0)]
    cutoff: f64,
    /// Nodes listed per cluster in clusters.csv.
    #[arg(long, default_value_t = 5)]
    top: usize,
    /// Output directory for the summary CSVs.
    #[arg(long, default_value = "wecan-eval")]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Deserialize)]
struct FitView {
    result: ResultView,
}

#[derive(Debug, Deserialize)]
struct ResultView {
    assignments: Vec<usize>,
    k_effective: usize,
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    for path in [&args.truth, &args.fit] {
        if !path.is_file() {
            return Err(CliError::Usage(format!("input file {} does not exist", path.display())));
        }
    }
    let truth = read_labels(&args.truth)?;
    let text = std::fs::read_to_string(&args.fit)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.fit.display())))?;
    let fit: FitView =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", args.fit.display())))?;
    let labels = fit.result.assignments;
    if labels.len() != truth.len() {
        return Err(CliError::Usage(format!(
            "{} labels {} edges but {} labels {}",
            args.fit.display(),
            labels.len(),
            args.truth.display(),
            truth.len()
        )));
    }
    let net = match &args.network {
        Some(path) => {
            let net = args.input_args.load(path)?;
            if net.n_edges() != labels.len() {
                return Err(CliError::Usage(format!(
                    "{} has {} edges but the fit has {}",
                    path.display(),
                    net.n_edges(),
                    labels.len()
                )));
            }
            Some(net)
        }
        None => None,
    };

    let score = wecan::nmi(&labels, &truth).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("NMI {score:.6}");
    println!("K_effective {}", fit.result.k_effective);

    let mut names = vec!["contingency.csv"];
    if net.is_some() {
        names.extend(["clusters.csv", "noise.csv"]);
    }
    let paths = prepare_outputs(&args.out, &names, args.force)?;
    write_contingency(&paths[0], &labels, &truth)?;
    if let Some(net) = net {
        write_clusters(&paths[1], &labels, &net, args.top)?;
        write_noise(&paths[2], &labels, &net, args.cutoff)?;
    }
    Ok(())
}

fn write_contingency(path: &Path, fit: &[usize], truth: &[usize]) -> Result<(), CliError> {
    let mut counts = std::collections::BTreeMap::<(usize, usize), usize>::new();
    for (&a, &b) in fit.iter().zip(truth) {
        *counts.entry((a, b)).or_default() += 1;
    }
    let mut w = csv_writer(path)?;
    w.write_record(["fit_cluster", "truth_cluster", "edges"])
        .map_err(|e| csv_error(path, e))?;
    for ((a, b), c) in counts {
        w.write_record([a.to_string(), b.to_string(), c.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| csv_error(path, e))
}

fn write_clusters(path: &Path, labels: &[usize], net: &Network, top: usize) -> Result<(), CliError> {
    let summary = cluster_summary_from_labels(labels, net, top).map_err(|e| CliError::Usage(e.to_string()))?;
    let nodes = |list: &[(usize, usize)]| {
        list.iter()
            .map(|(i, c)| format!("{}:{c}", net.label(*i)))
            .collect::<Vec<_>>()
            .join(";")
    };
    let mut w = csv_writer(path)?;
    w.write_record(["cluster", "edges", "weight_mean", "weight_sd", "top_senders", "top_receivers"])
        .map_err(|e| csv_error(path, e))?;
    for c in summary {
        w.write_record([
            c.label.to_string(),
            c.n_edges.to_string(),
            wecan::graph::format_g17(c.weight_mean),
            wecan::graph::format_g17(c.weight_sd),
            nodes(&c.top_senders),
            nodes(&c.top_receivers),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| csv_error(path, e))
}

fn write_noise(path: &Path, labels: &[usize], net: &Network, cutoff: f64) -> Result<(), CliError> {
    let r = noise_report_from_labels(labels, net, cutoff).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut w = csv_writer(path)?;
    let rows = [
        ("noise", r.noise_at_or_below, r.noise_above),
        ("structural", r.structural_at_or_below, r.structural_above),
    ];
    w.write_record(["label", "weight_at_or_below_cutoff", "weight_above_cutoff"])
        .map_err(|e| csv_error(path, e))?;
    for (name, low, high) in rows {
        w.write_record([name.to_string(), low.to_string(), high.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| csv_error(path, e))?;
    match r.mean_noise_weight {
        Some(mean) => println!("{} noise edges, mean weight {mean:.4}; cutoff {cutoff}", r.n_noise()),
        None => println!("no noise edges"),
    }
    Ok(())
}
