use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dirac_cli::commands::{self, ContinuousInput};
use dirac_cli::config::{ContinuousConfig, RunConfig, Tolerances};

/// Forward and inverse spectral problems for skew-self-adjoint Dirac systems.
///
/// Exit codes: 0 success, 1 output error, 2 invalid input, 3 not Weyl data,
/// 4 ill-conditioned, 5 quadrature budget exceeded, 6 round-trip check failed.
#[derive(Parser)]
#[command(name = "dirac", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Round-trip tolerance on C_k and alpha
    #[arg(long, global = true, default_value_t = Tolerances::default().residual)]
    tol: f64,
    /// Allowed drop of the smallest eigenvalue of the continuous S below 1
    #[arg(long, global = true, default_value_t = Tolerances::default().positivity)]
    positivity_tol: f64,
    /// Classifier threshold on sigma_min(S) / sigma_max(S)
    #[arg(long, global = true, default_value_t = Tolerances::default().admissibility)]
    margin: f64,
    /// Intervals of the continuous recovery grid
    #[arg(long = "grid", global = true, default_value_t = ContinuousConfig::default().grid)]
    grid: usize,
    /// eta - 2M for the Fourier recovery of s
    #[arg(long, global = true, default_value_t = ContinuousConfig::default().eta_offset)]
    eta_offset: f64,
    /// Frequency truncation Xi (default: grid / l)
    #[arg(long, global = true)]
    xi: Option<f64>,
    /// L2 budget for the Fourier truncation tail
    #[arg(long, global = true, default_value_t = ContinuousConfig::default().tail_tolerance)]
    tail_tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Main output file (default: stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON diagnostics/report file (default: stderr)
    #[arg(long, global = true)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Taylor data alpha_0..alpha_n of the Weyl function of a system file
    ForwardDiscrete { system: PathBuf },
    /// Reconstruct the system from a Taylor file
    InverseDiscrete { taylor: PathBuf },
    /// Seeded forward/inverse round trips, one CSV row per trial
    Roundtrip {
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        /// Perturb the Taylor data before inverting (negative control)
        #[arg(long)]
        corrupt: bool,
    },
    /// Classify Taylor data as Weyl, Marginal or NotWeyl
    Admissible { taylor: PathBuf },
    /// Recover v (p = 1) or beta^* beta (p > 1) on [0, l]
    Continuous {
        #[arg(
            long,
            conflicts_with = "phi_samples",
            required_unless_present = "phi_samples"
        )]
        potential: Option<PathBuf>,
        #[arg(long)]
        phi_samples: Option<PathBuf>,
        /// Reference potential for error metrics when recovering from samples
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Sample the Weyl function of a potential on the Fourier nodes
    SamplePhi {
        #[arg(long)]
        potential: PathBuf,
    },
    /// Seeded random system file
    RandomSystem {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
    },
}

fn config(g: &GlobalArgs) -> RunConfig {
    RunConfig {
        tolerances: Tolerances {
            positivity: g.positivity_tol,
            residual: g.tol,
            admissibility: g.margin,
        },
        continuous: ContinuousConfig {
            grid: g.grid,
            eta_offset: g.eta_offset,
            xi: g.xi,
            tail_tolerance: g.tail_tol,
        },
        out: g.out.clone(),
        report: g.report.clone(),
        seed: g.seed,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = config(&cli.global);
    let result = cfg.validate().and_then(|()| match &cli.command {
        Command::ForwardDiscrete { system } => commands::cmd_forward_discrete(&cfg, system),
        Command::InverseDiscrete { taylor } => commands::cmd_inverse_discrete(&cfg, taylor),
        Command::Roundtrip {
            trials,
            n,
            p,
            corrupt,
        } => commands::cmd_roundtrip(&cfg, *trials, *n, *p, *corrupt),
        Command::Admissible { taylor } => commands::cmd_admissible(&cfg, taylor),
        Command::Continuous {
            potential,
            phi_samples,
            truth,
        } => {
            let input = match (potential, phi_samples) {
                (Some(p), _) => ContinuousInput::Potential(p.clone()),
                (None, Some(s)) => ContinuousInput::PhiSamples(s.clone()),
                (None, None) => unreachable!("clap requires one input"),
            };
            commands::cmd_continuous(&cfg, &input, truth.as_deref())
        }
        Command::SamplePhi { potential } => commands::cmd_sample_phi(&cfg, potential),
        Command::RandomSystem { n, p } => commands::cmd_random_system(&cfg, *n, *p),
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code as u8)
        }
    }
}
