use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cascade_stab::ErrorClass;

mod commands;
mod output;

/// Modal stabilization of cascaded heat equations.
#[derive(Debug, Parser)]
#[command(name = "cascade-stab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize gains and write a gains file plus a report.
    Synthesize(SynthesizeArgs),
    /// Simulate the closed (or open) loop and write CSV trajectories.
    Simulate(SimulateArgs),
    /// Run the identity and certificate checks; exit code 4 on failure.
    Verify(VerifyArgs),
    /// Time the modal synthesis against the direct Riccati baseline.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct PlantArgs {
    /// Plant description (JSON).
    #[arg(long)]
    plant: PathBuf,
    /// Group diffusion coefficients within this relative tolerance.
    #[arg(long)]
    diffusion_tol: Option<f64>,
}

#[derive(Debug, Args)]
struct DesignArgs {
    /// Target decay rate δ.
    #[arg(long)]
    delta: Option<f64>,
    /// Number of stabilized modes (default: the smallest admissible).
    #[arg(long = "N")]
    n: Option<usize>,
    /// Offsets of the placed poles beyond the shifted target, comma separated.
    #[arg(long, value_delimiter = ',')]
    pole_offsets: Option<Vec<f64>>,
    /// Modes used for certificates and simulation.
    #[arg(long, default_value_t = 30)]
    m_modes: usize,
}

#[derive(Debug, Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    plant: PlantArgs,
    #[command(flatten)]
    design: DesignArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write the eigenvalue basis as JSON.
    #[arg(long)]
    dump_basis: bool,
    /// Also write the transform family and per-mode transforms as JSON.
    #[arg(long)]
    dump_transform: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    plant: PlantArgs,
    #[command(flatten)]
    design: DesignArgs,
    /// Gains file from `synthesize`; otherwise gains are synthesized from `--delta`.
    #[arg(long)]
    gains: Option<PathBuf>,
    /// Initial condition (JSON).
    #[arg(long)]
    initial: PathBuf,
    /// Simulate with the input forced to zero.
    #[arg(long)]
    open_loop: bool,
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    /// Output interval (default: t_final / 400).
    #[arg(long)]
    dt_out: Option<f64>,
    /// Number of spatial grid nodes in the field CSV.
    #[arg(long, default_value_t = 101)]
    grid_points: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    plant: PlantArgs,
    #[command(flatten)]
    design: DesignArgs,
    /// Simulation horizon of the target-coordinate check.
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    /// Debugging aid: add `value` to entry (row, col) of T̄_order, as `order,row,col,value`.
    #[arg(long, value_delimiter = ',', hide = true)]
    corrupt_tbar: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    plant: PlantArgs,
    #[arg(long, default_value_t = 9.0)]
    delta: f64,
    /// Mode counts to time.
    #[arg(long, value_delimiter = ',', default_value = "2,3,5,10,15")]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Width of the indicator shapes generated when the plant has too few.
    #[arg(long, default_value_t = 0.1)]
    shape_width: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synthesize(args) => commands::synthesize(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Verify(args) => commands::verify(args),
        Command::Bench(args) => commands::bench(args),
    };
    match result {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::ChecksFailed) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Input => 1,
                ErrorClass::Hypothesis => 2,
                ErrorClass::Internal => 3,
            })
        }
    }
}
