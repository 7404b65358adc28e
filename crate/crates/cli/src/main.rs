use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use erlab::experiment::{self, ExperimentConfig, ExperimentKind};
use erlab::graph::{sample_er_graph, write_edge_list};
use erlab::GraphParams;

#[derive(Parser)]
#[command(name = "erlab", version = erlab::VERSION, about = "Spectral experiments on sparse Erdős–Rényi graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// KS distance and moment errors of the ESD against the semicircle law.
    Semicircle(RunArgs),
    /// Monte Carlo ESD moments against exact walk-count expectations.
    Moments(RunArgs),
    /// Cavity-equation Stieltjes transforms and densities.
    Rde(RunArgs),
    /// Eigenvector delocalization over an (n, λ, ε) grid.
    Deloc(RunArgs),
    /// Delocalization along a diverging λ_n schedule.
    Diagonal(RunArgs),
    /// Write one sampled graph as an edge list.
    Graph {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seeds.master` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn run_experiment(kind: ExperimentKind, args: RunArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    // Validation happens after command-line overrides are applied.
    let mut cfg = ExperimentConfig::from_json_unvalidated(&text).context("parsing config")?;
    if cfg.kind != kind {
        bail!("config describes a `{}` experiment, not `{kind}`", cfg.kind);
    }
    if let Some(seed) = args.seed {
        cfg.seeds.master = seed;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    cfg.validate()?;
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring thread pool")?;
    }
    let rows = experiment::run(&cfg)?;
    experiment::emit_report(&rows, &cfg, &cfg.output_dir)?;
    eprintln!(
        "wrote {} rows to {}",
        rows.len(),
        cfg.output_dir.join("results.csv").display()
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Semicircle(a) => run_experiment(ExperimentKind::Semicircle, a),
        Command::Moments(a) => run_experiment(ExperimentKind::Moments, a),
        Command::Rde(a) => run_experiment(ExperimentKind::Rde, a),
        Command::Deloc(a) => run_experiment(ExperimentKind::Delocalization, a),
        Command::Diagonal(a) => run_experiment(ExperimentKind::Diagonal, a),
        Command::Graph {
            n,
            lambda,
            seed,
            out,
        } => {
            let params = GraphParams::new(n, lambda, seed)?;
            let m = sample_er_graph(&params)?;
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    write_edge_list(std::io::BufWriter::new(file), &params, &m)?;
                }
                None => write_edge_list(std::io::stdout().lock(), &params, &m)?,
            }
            Ok(())
        }
    }
}
