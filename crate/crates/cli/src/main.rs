use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use colxva_cli::{CliError, Run, Scenario};

#[derive(Parser)]
#[command(name = "colxva", version, about = "Pricing, XVA and collateral allocation under imperfect collateral")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of sweep points on [0, 1].
    #[arg(long, global = true)]
    points: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Price the scenario's option by PDE.
    Price,
    /// Sweep collateralization from 0 to 1.
    Sweep,
    /// Decomposition table for the scenario's portfolios.
    Xva,
    /// Break-even term repo curve.
    RepoCurve,
    /// Collateral allocation.
    Optimize,
}

fn run(cli: &Cli) -> Result<Run, CliError> {
    let path = cli.scenario.as_ref().ok_or_else(|| CliError::Input("--scenario is required".into()))?;
    let mut scenario = Scenario::load(path)?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    let out = match cli.command {
        Command::Price => colxva_cli::price(&scenario),
        Command::Sweep => colxva_cli::sweep(&scenario, cli.points),
        Command::Xva => colxva_cli::xva(&scenario),
        Command::RepoCurve => colxva_cli::repo(&scenario),
        Command::Optimize => colxva_cli::optimize(&scenario),
    }?;
    out.write_to(&cli.out)?;
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Input(e.to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out.summary).expect("json values serialize"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
