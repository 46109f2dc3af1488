use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use safer_harness::MethodId;

#[derive(Debug, Parser)]
#[command(name = "safer", version, about = "SAFER collision avoidance: evaluation, training and teleoperation")]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// JSON config file; nested sections or dotted keys.
    #[arg(long, global = true, env = "SAFER_CONFIG")]
    pub config: Option<PathBuf>,
    /// Override one config value, e.g. `--set gate.beta=3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", env = "SAFER_SET", value_delimiter = ',')]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run seeded trials and write the metrics CSV.
    Eval(EvalArgs),
    /// Train a policy locally and save a checkpoint.
    Train(TrainArgs),
    /// Serve SAC training to remote workers.
    TrainServer(ServerArgs),
    /// Simulate episodes and stream experience to a training server.
    Worker(WorkerArgs),
    /// Compare standard and focused search on fixed scenes.
    Bench(BenchArgs),
    /// Serve the operator websocket bridge.
    Teleop(TeleopArgs),
    /// Replay a recorded teleop tape.
    Replay(ReplayArgs),
    /// Check a config for errors and tuning warnings.
    ValidateConfig(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Repeat or comma-separate to evaluate several methods.
    #[arg(long, required = true, value_delimiter = ',')]
    pub method: Vec<MethodId>,
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    pub scenario: String,
    /// Defaults to the scenario's trial count.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0, env = "SAFER_SEED")]
    pub seed: u64,
    /// Required for rl and safer.
    #[arg(long, env = "SAFER_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report zero latency so the CSV is byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training scenarios, used in turn.
    #[arg(long, value_delimiter = ',', default_value = "training_corridor")]
    pub scenario: Vec<String>,
    #[arg(long, default_value_t = 50_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1, env = "SAFER_SEED")]
    pub seed: u64,
    /// Continue from this checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServerArgs {
    #[arg(long, default_value = "127.0.0.1:7070", env = "SAFER_BIND")]
    pub bind: String,
    #[arg(long, env = "SAFER_CHECKPOINT_DIR")]
    pub checkpoint_dir: Option<PathBuf>,
    /// Published versions between checkpoints.
    #[arg(long, default_value_t = 10)]
    pub checkpoint_every: u64,
    /// Gradient steps between actor broadcasts.
    #[arg(long, env = "SAFER_PUBLISH_EVERY")]
    pub publish_every: Option<u64>,
    #[arg(long, env = "SAFER_WARMUP")]
    pub warmup: Option<usize>,
    #[arg(long, env = "SAFER_UPDATES_PER_EXPERIENCE")]
    pub updates_per_experience: Option<f64>,
    /// Serve exactly this many workers in a fixed order.
    #[arg(long)]
    pub lockstep: Option<usize>,
    /// Start from this checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WorkerArgs {
    #[arg(long, default_value = "127.0.0.1:7070", env = "SAFER_SERVER")]
    pub server: String,
    /// Scenario file (with its world), or a bundled scenario name.
    #[arg(long, default_value = "training_corridor", env = "SAFER_SCENARIO")]
    pub scenario: String,
    #[arg(long, default_value_t = 0, env = "SAFER_WORKER_ID")]
    pub id: u32,
    #[arg(long, default_value_t = 0, env = "SAFER_SEED")]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    /// Stop starting episodes after this many control cycles.
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub batch_cycles: usize,
    #[arg(long)]
    pub lockstep: bool,
    /// Train locally instead of connecting to a server.
    #[arg(long)]
    pub offline: bool,
    /// Offline only: continue from this checkpoint.
    #[arg(long, env = "SAFER_CHECKPOINT")]
    pub policy: Option<PathBuf>,
    /// Offline only: where to save the trained checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Timing repetitions per fixture; the fastest counts.
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TeleopArgs {
    #[arg(long, default_value = "127.0.0.1:8080", env = "SAFER_TELEOP_BIND")]
    pub bind: SocketAddr,
    #[arg(long, default_value = "training_corridor")]
    pub scenario: String,
    #[arg(long, default_value = "safer")]
    pub method: MethodId,
    #[arg(long, env = "SAFER_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0, env = "SAFER_SEED")]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub rate: f64,
    /// Save the session tape here on exit.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Velocities switch to the command instantly instead of ramping.
    #[arg(long)]
    pub instant_base: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub tape: PathBuf,
    #[arg(long, default_value = "training_corridor")]
    pub scenario: String,
    #[arg(long, env = "SAFER_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    /// Write every frame as a JSON line.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Metrics CSV; defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Measure per-candidate and policy cost on this machine for the
    /// search-time budget check.
    #[arg(long)]
    pub measure: bool,
    /// Checkpoint whose actor is timed; a fresh network otherwise.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}
