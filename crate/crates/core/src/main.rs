use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fracgfm::gfm::MultiStart;
use fracgfm::harness::{self, Algorithm, ExperimentConfig, GraphSpec, QSpec, SolverOverrides, OUT_DIR_ENV};
use fracgfm::{compute_modes, Result, WeightedDigraph};

#[derive(Parser)]
#[command(name = "fracgfm", version, about = "Directed-variation Fourier modes via proximal fractional programming")]
struct Cli {
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Rgg,
    Drgg,
    Community,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Identity,
    Degree,
}

impl From<Metric> for QSpec {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Identity => QSpec::Identity,
            Metric::Degree => QSpec::Degree,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Psa,
    PsDca,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random graph and write it as an edge list.
    Gen {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        clusters: usize,
        #[arg(long, default_value_t = 0.9)]
        p_in: f64,
        #[arg(long, default_value_t = 0.15)]
        p_out: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Compute the first K modes of a graph and write them as JSON.
    Modes {
        /// Edge-list file.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "identity")]
        q: Metric,
        #[arg(long, short = 'k')]
        k: usize,
        #[arg(long, value_enum, default_value = "ps-dca")]
        algorithm: Algo,
        /// JSON file with solver overrides.
        #[arg(long)]
        solver: Option<PathBuf>,
        #[arg(long, default_value_t = 15)]
        n_adv: usize,
        #[arg(long, default_value_t = 35)]
        n_rand: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run an experiment grid from a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "records.jsonl")]
        records: PathBuf,
        #[arg(long, default_value = "summary.csv")]
        summary: PathBuf,
    },
    /// Summarize JSON-lines run records into CSV.
    Summarize {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        split: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn output_path(out_dir: &Option<PathBuf>, path: &Path) -> PathBuf {
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let out_dir = cli.out_dir;
    match cli.command {
        Command::Gen {
            kind,
            n,
            seed,
            clusters,
            p_in,
            p_out,
            out,
        } => {
            let spec = match kind {
                Kind::Rgg => GraphSpec::Rgg { n, seed },
                Kind::Drgg => GraphSpec::Drgg { n, seed },
                Kind::Community => GraphSpec::Community {
                    n,
                    k_clusters: clusters,
                    p_in,
                    p_out,
                    seed,
                },
            };
            let g = spec.build()?;
            let path = output_path(&out_dir, &out);
            write(&path, &g.to_edge_list())?;
            eprintln!("{}: n={} entries={} -> {}", spec.id(), g.n(), g.edge_count(), path.display());
        }
        Command::Modes {
            graph,
            q,
            k,
            algorithm,
            solver,
            n_adv,
            n_rand,
            seed,
            out,
        } => {
            let g = WeightedDigraph::load(&graph)?;
            let metric = QSpec::from(q).metric(&g)?;
            let overrides: SolverOverrides = match solver {
                Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
                None => SolverOverrides::default(),
            };
            let algorithm = match algorithm {
                Algo::Psa => Algorithm::Psa,
                Algo::PsDca => Algorithm::PsDca,
            };
            let cfg = overrides.config_for(algorithm).with_seed(seed);
            let starts = MultiStart { n_adv, n_rand, seed };
            let modes = compute_modes(&g, &metric, k, &cfg, &starts)?;
            let path = output_path(&out_dir, &out);
            write(&path, &modes.to_json()?)?;
            eprintln!("{} modes -> {}", modes.count(), path.display());
        }
        Command::Bench {
            config,
            records,
            summary,
        } => {
            let cfg = ExperimentConfig::from_json(&fs::read_to_string(config)?)?;
            let recs = harness::run_experiment(&cfg)?;
            let failed = recs.iter().filter(|r| !r.is_ok()).count();
            let records_path = output_path(&out_dir, cfg.output.records.as_deref().unwrap_or(&records));
            let summary_path = output_path(&out_dir, cfg.output.summary.as_deref().unwrap_or(&summary));
            write(&records_path, &harness::records_to_json_lines(&recs)?)?;
            write(&summary_path, &harness::summary_to_csv(&harness::summarize(&recs, cfg.split)?)?)?;
            eprintln!(
                "{} runs ({failed} failed) -> {}, {}",
                recs.len(),
                records_path.display(),
                summary_path.display()
            );
        }
        Command::Summarize { records, split, out } => {
            let recs = harness::records_from_json_lines(&fs::read_to_string(records)?)?;
            let path = output_path(&out_dir, &out);
            write(&path, &harness::summary_to_csv(&harness::summarize(&recs, split)?)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
