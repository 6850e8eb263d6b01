use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mimo_pareto::cli::{load_config, run, Command, Overrides};
use mimo_pareto::Error;

#[derive(Parser)]
#[command(
    name = "mimo-pareto",
    version,
    about = "Unicast/multicast power allocation and Pareto boundary for massive MIMO"
)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// JSON config; the embedded default when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Unicast power (normalized, or with a unit such as "4 W" or "36 dBm").
    #[arg(long = "p-un", global = true, allow_hyphen_values = true)]
    p_un: Option<String>,
    /// Multicast power.
    #[arg(long = "p-mu", global = true, allow_hyphen_values = true)]
    p_mu: Option<String>,
    /// Antenna count for every scenario and the sweep.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Points per Pareto sweep.
    #[arg(long, global = true)]
    points: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Pareto boundary sweep, convexity report and plot data.
    Pareto,
    /// Max-min-fair multicast allocation for a power split.
    Mmf,
    /// Weighted unicast sum-SE allocation for a power split.
    Wsse,
    /// Monte Carlo check of the closed forms.
    Validate,
    /// Brute-force comparison on the embedded tiny instances.
    OracleCheck,
}

fn fail(e: &Error) -> ExitCode {
    let field = match e {
        Error::InvalidConfig { field, .. } => Some(field.as_str()),
        _ => None,
    };
    let body = serde_json::json!({
        "error": { "kind": e.kind(), "field": field, "message": e.to_string() }
    });
    eprintln!("{body}");
    let config_error = matches!(e, Error::InvalidConfig { .. } | Error::Parse(_));
    ExitCode::from(if config_error { 2 } else { 1 })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match args.command {
        Cmd::Pareto => Command::Pareto,
        Cmd::Mmf => Command::Mmf,
        Cmd::Wsse => Command::Wsse,
        Cmd::Validate => Command::Validate,
        Cmd::OracleCheck => Command::OracleCheck,
    };
    let overrides = Overrides {
        p_un: args.p_un,
        p_mu: args.p_mu,
        n_antennas: args.n,
        points: args.points,
        seed: args.seed,
        out: args.out,
    };
    let result = load_config(args.config.as_deref()).and_then(|cfg| run(command, &cfg, &overrides));
    match result {
        Ok(summary) => {
            println!("{}: {}", summary.command, summary.headline);
            for f in &summary.files {
                println!("  wrote {}", f.display());
            }
            if summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => fail(&e),
    }
}
