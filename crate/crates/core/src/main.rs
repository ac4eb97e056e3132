use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ensemble_repeater::cli::{execute, Command, Manifest, Overrides, EXIT_BAD_CONFIG};
use ensemble_repeater::config::OutputFormat;
use ensemble_repeater::pattern::SchemeKind;

#[derive(Parser, Debug)]
#[command(name = "repeater", version, about = "Atomic-ensemble quantum repeater simulator")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for Monte-Carlo modes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    scheme: Option<SchemeArg>,
    /// Purification schedule: none, phase-after-2, bit@1,phase@2, ...
    #[arg(long, global = true)]
    enp: Option<String>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Check coefficient tables against the Fock oracle.
    OracleVerify,
    /// Run one chain.
    Simulate,
    /// Fastest configuration reaching the target fidelity.
    Optimize,
    /// Optimized time and parameters per distance.
    Table,
    /// Time-fidelity curves.
    Curve,
    /// Time against distance with p_c scaled as L0/L.
    Scaling,
    /// Print the default configuration.
    Defaults,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SchemeArg {
    Dlcz,
    New,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Csv,
    Json,
}

fn main() -> ExitCode {
    // Usage errors are configuration errors; clap's own code 2 means infeasible here.
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_BAD_CONFIG } else { 0 });
        }
    };
    let command = match args.command {
        Cmd::OracleVerify => Command::OracleVerify,
        Cmd::Simulate => Command::Simulate,
        Cmd::Optimize => Command::Optimize,
        Cmd::Table => Command::Table,
        Cmd::Curve => Command::Curve,
        Cmd::Scaling => Command::Scaling,
        Cmd::Defaults => Command::Defaults,
    };
    let over = Overrides {
        seed: args.seed,
        workers: args.workers,
        scheme: args.scheme.map(|s| match s {
            SchemeArg::Dlcz => SchemeKind::Dlcz,
            SchemeArg::New => SchemeKind::NewScheme,
        }),
        enp: args.enp,
        format: args.format.map(|f| match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }),
    };
    let result = Manifest::new(command, args.config.as_deref(), args.out, &over)
        .and_then(|m| execute(&m, &mut std::io::stdout()));
    match result {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_BAD_CONFIG)
        }
    }
}
