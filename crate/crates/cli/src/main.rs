use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use layercon::simfunc::SynthesisMethod;
use layercon_cli::commands::{self, Context};
use layercon_cli::error::{CliError, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "layercon", version, about = "Layered planning and tracking with guaranteed output precision")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Lyapunov,
    Sdp,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output directory, `out/<scenario name>` by default.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the synthesis method of the scenario.
    #[arg(long, value_enum)]
    method: Option<Method>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesise the simulation function and controller.
    Synth(Common),
    /// Build and check the planning sets.
    Propagate {
        #[command(flatten)]
        common: Common,
        /// Boundary samples per set for the condition check.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Run the mission in closed loop.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Treat low-level output excursions as failures.
        #[arg(long)]
        strict_lowlevel_output: bool,
    },
    /// Tracking precision against tracking frequency.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated frequencies in Hz.
        #[arg(long, default_value = "1,2,3,4,5,6,7,8,9,10")]
        freqs: String,
    },
}

fn context(c: &Common) -> Result<Context, CliError> {
    let out = match &c.out {
        Some(o) => o.clone(),
        None => {
            let sc = commands::load(&c.scenario)?;
            PathBuf::from("out").join(&sc.spec.name)
        }
    };
    let mut ctx = Context::new(out);
    ctx.method = c.method.map(|m| match m {
        Method::Lyapunov => SynthesisMethod::Lyapunov,
        Method::Sdp => SynthesisMethod::Sdp,
    });
    ctx.seed = commands::seed_from_env()?;
    Ok(ctx)
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Synth(c) => {
            let ctx = context(&c)?;
            let r = commands::cmd_synth(&c.scenario, &ctx)?;
            println!("gamma = {:.6e}", r.gamma);
            if let (Some(e), Some(u)) = (r.epsilon, r.u_bar_max) {
                println!("epsilon = {e:.6e}, u_bar_max = {u:.6e}");
            }
            println!("wrote {}", ctx.out.join("synthesis.toml").display());
        }
        Cmd::Propagate { common, samples } => {
            let mut ctx = context(&common)?;
            ctx.samples = samples;
            let r = commands::cmd_propagate(&common.scenario, &ctx)?;
            println!(
                "{} pieces, epsilon = {:.6e}, worst margin = {:.3e}",
                r.pieces.len(),
                r.epsilon.unwrap_or(f64::NAN),
                r.worst_margin.unwrap_or(f64::NAN)
            );
            println!("wrote {}", ctx.out.join("planning_sets.toml").display());
        }
        Cmd::Simulate {
            common,
            strict_lowlevel_output,
        } => {
            let mut ctx = context(&common)?;
            ctx.strict_lowlevel_output = strict_lowlevel_output;
            let o = commands::cmd_simulate(&common.scenario, &ctx)?;
            let r = &o.report;
            println!(
                "max distance {:.6e} <= epsilon {:.6e}, goal reached at {}",
                r.max_distance,
                r.epsilon,
                r.goal_reached_at.map_or("never".to_string(), |t| format!("{t} s"))
            );
            println!("wrote {}", ctx.out.display());
        }
        Cmd::Sweep { common, freqs } => {
            let ctx = context(&common)?;
            let freqs = commands::parse_freqs(&freqs)?;
            let rows = commands::cmd_sweep(&common.scenario, &freqs, &ctx)?;
            for r in &rows {
                println!(
                    "{:>6} Hz  epsilon {:>12}  feasible {}",
                    r.freq_hz,
                    r.epsilon.map_or("-".into(), |e| format!("{e:.4e}")),
                    r.feasible
                );
            }
            println!("wrote {}", ctx.out.join("sweep.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE as u8) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
