use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod cmd;
mod config;
mod error;
mod output;

use config::{parse_cells, parse_point};

#[derive(Debug, Parser)]
#[command(name = "crowd-mdp", version, about = "Pedestrian trajectory analysis, decision-model estimation and crowd evacuation planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Angle x length frequency table and direction density of trajectories.
    Analyze(AnalyzeArgs),
    /// Fit the sector mixture decision model to trajectories.
    Estimate(EstimateArgs),
    /// Run the floor-field particle dynamics and dump the occupancy trace.
    Simulate(SimulateArgs),
    /// Solve the finite-horizon planning problem for one agent in a crowd.
    Optimize(OptimizeArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// JSON file with parameter defaults; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trajectory CSV with header ped_id,t,x,y.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Exit position in meters, as x,y.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub exit: Option<[f64; 2]>,
    /// Discretization step in seconds [default: 1].
    #[arg(long)]
    pub dt: Option<f64>,
    /// Steps slower than this (m/s) are dropped from the filtered outputs [default: 0.5].
    #[arg(long)]
    pub speed_threshold: Option<f64>,
    /// [default: 36]
    #[arg(long)]
    pub angle_bins: Option<usize>,
    /// [default: 10]
    #[arg(long)]
    pub length_bins: Option<usize>,
    /// Upper edge of the length bins in meters [default: longest step].
    #[arg(long)]
    pub max_length: Option<f64>,
    /// Density grid size [default: 360].
    #[arg(long)]
    pub kde_points: Option<usize>,
    /// Kernel bandwidth in radians [default: Silverman's rule].
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// [default: .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trajectory CSV, or a directory of them fitted in file-name order.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Wall geometry JSON: {"polygons": [[[x,y],...],...]} in meters.
    #[arg(long)]
    pub walls: Option<PathBuf>,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub exit: Option<[f64; 2]>,
    /// [default: 1]
    #[arg(long)]
    pub dt: Option<f64>,
    /// [default: 0.5]
    #[arg(long)]
    pub speed_threshold: Option<f64>,
    /// Neighborhood radius in meters [default: 0.75].
    #[arg(long)]
    pub radius: Option<f64>,
    /// Wall coverage that marks a sector occupied [default: 0.4].
    #[arg(long)]
    pub wall_fraction: Option<f64>,
    /// Count pedestrians already past the exit as neighbors.
    #[arg(long)]
    pub include_exited: bool,
    /// [default: 1]
    #[arg(long)]
    pub prior_strength: Option<f64>,
    /// Forgetting factor in (0, 1] [default: 0.99].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// [default: .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Lattice JSON: {"width","height","exit":[col,row],"blocked":[[col,row],...],"metric"}.
    #[arg(long)]
    pub lattice: Option<PathBuf>,
    /// Initial particle cells, e.g. 2,9,14.
    // Fully qualified so clap parses one comma list instead of repeated values.
    #[arg(long, value_parser = parse_cells)]
    pub initial: Option<::std::vec::Vec<u32>>,
    /// [default: 100]
    #[arg(long)]
    pub steps: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// [default: trace.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lattice: Option<PathBuf>,
    /// Maximum crowd size of the dense state space [default: size of the initial crowd].
    #[arg(long)]
    pub particles: Option<usize>,
    /// Number of epochs T [default: 6].
    #[arg(long)]
    pub horizon: Option<usize>,
    /// time or co [default: time].
    #[arg(long)]
    pub reward: Option<crowd_mdp::RewardKind>,
    /// Start state as x:z1,z2,... e.g. 18:8,14,17,22.
    #[arg(long)]
    pub initial_state: Option<String>,
    /// [default: 2]
    #[arg(long)]
    pub terminal_factor: Option<f64>,
    /// Largest state space per epoch [default: 5000000].
    #[arg(long)]
    pub max_states: Option<u128>,
    /// Cross-check the initial value against exhaustive search.
    #[arg(long)]
    pub oracle_check: bool,
    /// [default: policy.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => cmd::analyze::run(args),
        Command::Estimate(args) => cmd::estimate::run(args),
        Command::Simulate(args) => cmd::simulate::run(args),
        Command::Optimize(args) => cmd::optimize::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
