//! `cgpt`: simulate MSR data, reconstruct CGPTs, build dictionaries and run
//! the matching and petal-counting studies.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cgpt", version, about = "Shape identification from multistatic response data via CGPTs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Scenario selection shared by the commands that simulate data. Flags
/// override the values of `--config`; without a config file the ellipse
/// acquisition setup (N = 51, R = 2, centred at the origin) is the base.
#[derive(Args, Debug, Clone, Default)]
pub struct ScenarioArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Shape: `ellipse:a,b`, `flower:p,eta`, `dflower:p,eta,t` or `letter:X`.
    #[arg(long)]
    pub shape: Option<String>,
    /// Inclusion conductivity.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Quadrature nodes on the boundary.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Normalize the base shape before applying the transform.
    #[arg(long)]
    pub normalize: bool,
    /// Number of array elements.
    #[arg(long)]
    pub elements: Option<usize>,
    /// Array radius (exclusive with --epsilon).
    #[arg(long, conflicts_with = "epsilon")]
    pub radius: Option<f64>,
    /// Array radius through `ε = δ/R`.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Array centre, `x,y`.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
    pub z0: Option<Vec<f64>>,
    /// Transform applied to the shape, `zx,zy,s,theta`.
    #[arg(long, value_delimiter = ',', num_args = 4, allow_hyphen_values = true)]
    pub transform: Option<Vec<f64>>,
}

/// Noise and trial settings.
#[derive(Args, Debug, Clone, Default)]
pub struct NoiseArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Noise levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sigma0: Option<Vec<f64>>,
    /// Tolerance for the resolving order.
    #[arg(long)]
    pub tau0: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate MSR data (one CSV per noisy trial).
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Output CSV; several trials are written as `<stem>_tNNN.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct CGPTs from MSR files (averaged when several are given).
    Reconstruct {
        /// MSR CSV files.
        #[arg(long, required = true, num_args = 1..)]
        msr: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        tau0: f64,
        /// Truncation order `K`; chosen from the noise level when omitted.
        #[arg(long)]
        order: Option<usize>,
        /// Output CGPT JSON, truncated at the resolving order.
        #[arg(long)]
        out: PathBuf,
        /// Per-order relative errors against the simulated shape.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Build a dictionary of normalized shapes.
    BuildDict {
        /// Shape spec, repeatable.
        #[arg(long)]
        shape: Vec<String>,
        /// Capital letters to add, e.g. `ABC` or `all`.
        #[arg(long)]
        letters: Option<String>,
        #[arg(long, default_value_t = 5)]
        order: usize,
        #[arg(long, default_value_t = 4.0 / 3.0)]
        kappa: f64,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match queries against a dictionary.
    Match {
        #[arg(long)]
        dict: PathBuf,
        /// CGPT JSON or MSR CSV query, repeatable.
        #[arg(long)]
        query: Vec<PathBuf>,
        /// Simulate letter queries with the letter acquisition setup.
        #[arg(long)]
        letters: Option<String>,
        /// 1 (CGPT matching) or 2 (descriptor matching).
        #[arg(long, default_value = "2")]
        algo: String,
        /// Comparison order `k`.
        #[arg(long, default_value_t = 1)]
        order: usize,
        /// True shape name, used for the success rate of a single query.
        #[arg(long)]
        truth: Option<String>,
        #[command(flatten)]
        noise: NoiseArgs,
        /// JSON report; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV of mean `e_n` per (query, entry) at the first noise level.
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Anti-diagonal means of the first descriptor and petal detection.
    Petal {
        /// CGPT JSON or MSR CSV query; the scenario is simulated otherwise.
        #[arg(long)]
        query: Option<PathBuf>,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long)]
        p_max: Option<usize>,
        /// Anti-diagonal table; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Table of detected petal counts per noise level.
        #[arg(long)]
        detections: Option<PathBuf>,
    },
    /// Reconstruction error against the oracle over noise levels.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Largest block order reported.
        #[arg(long)]
        order: Option<usize>,
        /// Fixed truncation order instead of the noise-dependent one.
        #[arg(long)]
        truncation: Option<usize>,
        /// Table; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { scenario, noise, out } => commands::simulate(&scenario, &noise, &out),
        Command::Reconstruct { msr, tau0, order, out, table } => {
            commands::reconstruct(&msr, tau0, order, &out, table.as_deref())
        }
        Command::BuildDict { shape, letters, order, kappa, nodes, out } => {
            commands::build_dict(&shape, letters.as_deref(), order, kappa, nodes, &out)
        }
        Command::Match { dict, query, letters, algo, order, truth, noise, out, confusion } => {
            commands::matching(&commands::MatchArgs { dict, query, letters, algo, order, truth, noise, out, confusion })
        }
        Command::Petal { query, scenario, noise, p_max, out, detections } => {
            commands::petal(query.as_deref(), &scenario, &noise, p_max, out.as_deref(), detections.as_deref())
        }
        Command::Sweep { scenario, noise, order, truncation, out } => {
            commands::sweep(&scenario, &noise, order, truncation, out.as_deref())
        }
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
