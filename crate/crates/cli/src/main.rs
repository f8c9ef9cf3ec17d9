//! `onticlab`: batch driver for the ontological-model experiments.
//!
//! Exit codes: 0 success, 1 invalid input or runtime error, 2 a statistical
//! or convergence check failed, 64 usage error.

mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use onticlab_core::rng::DEFAULT_SEED;

use args::{parse_f64_range, parse_u32_range, parse_vec3, Format, ModelArg, ProtocolArg};
use onticlab_core::Vec3;

const EXIT_VALIDATION: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "onticlab",
    version,
    about = "Ontological models of qubit channels: Born checks, overlaps, capacity, simulation cost and overlap bounds"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Master seed; every random quantity is derived from it.
    #[arg(long, global = true, env = "ONTICLAB_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Report format (default: csv for `bounds`, json otherwise).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that a model reproduces Born probabilities, by quadrature
    /// (tolerance --quad-tol, default 1e-6) and Monte Carlo (|z| ≤ --z-max,
    /// default 4).
    VerifyBorn(VerifyBornArgs),
    /// Overlap ω(ψ, ψ′) of two preparation distributions (grid refined until
    /// stable to 1e-4).
    Overlap(OverlapArgs),
    /// Weak ψ-ontic / ψ-epistemic verdict over random pairs (threshold
    /// --eps-onto, default 1e-9).
    Classify(ClassifyArgs),
    /// Capacity of the discretized ψ → x channel (certified gap ≤ --tol,
    /// default 1e-9 bits).
    Capacity(CapacityArgs),
    /// Run the plain simulation protocol and test outcomes against Born
    /// (chi-square p > --p-min, default 1e-4; |z| ≤ --z-max, default 4).
    Simulate(SimulateArgs),
    /// Communication cost of the plain or greedy protocol, with the
    /// information-versus-cost ordering check.
    Cost(CostArgs),
    /// Cap volumes, overlap-decay bounds and the collapse verdict for a
    /// communication-complexity growth law.
    Bounds(BoundsArgs),
    /// Mean and spread of ln ρ(x|ψ) under x ~ ρ(·|ψ).
    Equipartition(EquipartitionArgs),
}

#[derive(Debug, Args)]
pub struct VerifyBornArgs {
    #[arg(long, value_enum, default_value = "ks")]
    pub model: ModelArg,
    /// Bloch vector of ψ as x,y,z (random when omitted).
    #[arg(long, value_parser = parse_vec3)]
    pub state: Option<Vec3>,
    /// Measurement axis as x,y,z (random when omitted).
    #[arg(long, value_parser = parse_vec3)]
    pub measurement: Option<Vec3>,
    /// Number of random (ψ, M) pairs when --state/--measurement are omitted.
    #[arg(long, default_value_t = 1)]
    pub pairs: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub quad_tol: f64,
    #[arg(long, default_value_t = 4.0)]
    pub z_max: f64,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[arg(long, value_enum, default_value = "ks")]
    pub model: ModelArg,
    /// Bloch angle between the two states (radians).
    #[arg(long, conflicts_with_all = ["state_a", "state_b"])]
    pub angle: Option<f64>,
    #[arg(long, value_parser = parse_vec3, requires = "state_b")]
    pub state_a: Option<Vec3>,
    #[arg(long, value_parser = parse_vec3, requires = "state_a")]
    pub state_b: Option<Vec3>,
    /// Initial Fibonacci grid size.
    #[arg(long, default_value_t = onticlab_core::models::DEFAULT_OVERLAP_RESOLUTION)]
    pub resolution: usize,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, value_enum, default_value = "ks")]
    pub model: ModelArg,
    #[arg(long, default_value_t = 50)]
    pub pairs: usize,
    /// Fix the Bloch angle of every pair (random orientation).
    #[arg(long)]
    pub angle: Option<f64>,
    #[arg(long, default_value_t = onticlab_core::models::DEFAULT_EPS_ONTO)]
    pub eps_onto: f64,
    #[arg(long, default_value_t = onticlab_core::models::DEFAULT_OVERLAP_RESOLUTION)]
    pub resolution: usize,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[arg(long, value_enum, default_value = "ks")]
    pub model: ModelArg,
    #[arg(long, default_value_t = onticlab_core::capacity::DEFAULT_INPUTS)]
    pub n_in: usize,
    #[arg(long, default_value_t = onticlab_core::capacity::DEFAULT_OUTPUTS)]
    pub n_out: usize,
    #[arg(long, default_value_t = onticlab_core::capacity::DEFAULT_TOL_BITS)]
    pub tol: f64,
    #[arg(long, default_value_t = onticlab_core::capacity::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Also write the channel matrix as CSV.
    #[arg(long)]
    pub matrix_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "ks")]
    pub model: ModelArg,
    #[arg(long, value_parser = parse_vec3)]
    pub state: Option<Vec3>,
    #[arg(long, value_parser = parse_vec3)]
    pub measurement: Option<Vec3>,
    /// Number of random (ψ, M) pairs when --state/--measurement are omitted.
    #[arg(long, default_value_t = 1)]
    pub pairs: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub rounds: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub p_min: f64,
    #[arg(long, default_value_t = 4.0)]
    pub z_max: f64,
    /// Write per-round transcripts (pair, round, index, bits, outcome) as CSV.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[arg(long, value_enum, default_value = "plain")]
    pub protocol: ProtocolArg,
    #[arg(long, value_enum, default_value = "ks")]
    pub model: ModelArg,
    #[arg(long, default_value_t = 100_000)]
    pub rounds: u64,
    /// Haar-random states cycled through by the plain protocol.
    #[arg(long, default_value_t = 64)]
    pub states: usize,
    /// Measurement axis as x,y,z.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,1")]
    pub measurement: Vec3,
    /// Channel grid for the greedy protocol.
    #[arg(long, default_value_t = onticlab_core::capacity::DEFAULT_INPUTS)]
    pub n_in: usize,
    #[arg(long, default_value_t = onticlab_core::capacity::DEFAULT_OUTPUTS)]
    pub n_out: usize,
    #[arg(long, default_value_t = onticlab_core::capacity::DEFAULT_TOL_BITS)]
    pub tol: f64,
    /// Write per-round transcripts as CSV.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Growth preset: BCT, 0.293, 2^n or n2^n.
    #[arg(long, default_value = "n2^n", conflicts_with = "a")]
    pub growth: String,
    /// Custom growth C(n) = a·2^(b·n)·n^c (requires --b and --c).
    #[arg(long, requires_all = ["b", "c"])]
    pub a: Option<f64>,
    #[arg(long, requires = "a")]
    pub b: Option<f64>,
    #[arg(long, requires = "a")]
    pub c: Option<f64>,
    /// Qubit numbers, e.g. 1..20.
    #[arg(long, value_parser = parse_u32_range, default_value = "1..20")]
    pub n: std::ops::RangeInclusive<u32>,
    /// Cap angles in radians, e.g. 0.1..1.57.
    #[arg(long, value_parser = parse_f64_range, default_value = "0.1..1.5707963267948966")]
    pub theta: (f64, f64),
    #[arg(long, default_value_t = 8)]
    pub theta_steps: usize,
    /// Also estimate the cap fraction from this many Haar pairs (JSON only).
    #[arg(long)]
    pub haar_pairs: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub haar_n: u32,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_6)]
    pub haar_theta: f64,
}

#[derive(Debug, Args)]
pub struct EquipartitionArgs {
    #[arg(long, value_enum, default_value = "ks")]
    pub model: ModelArg,
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,1")]
    pub state: Vec3,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
}

/// What a command produced and whether its checks passed.
pub struct Outcome {
    pub report: String,
    pub summary: String,
    pub passed: bool,
}

pub struct Context {
    pub seed: u64,
    pub format: Option<Format>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    let ctx = Context {
        seed: cli.global.seed,
        format: cli.global.format,
    };
    let result = match &cli.command {
        Command::VerifyBorn(a) => commands::verify_born(&ctx, a),
        Command::Overlap(a) => commands::overlap(&ctx, a),
        Command::Classify(a) => commands::classify(&ctx, a),
        Command::Capacity(a) => commands::capacity(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Cost(a) => commands::cost(&ctx, a),
        Command::Bounds(a) => commands::bounds(&ctx, a),
        Command::Equipartition(a) => commands::equipartition(&ctx, a),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let written = match &cli.global.output {
        Some(path) => std::fs::write(path, &outcome.report),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(outcome.report.as_bytes())
        }
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    eprintln!("{}", outcome.summary);
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
