use std::path::PathBuf;
use std::process::ExitCode as ProcessExit;

use clap::{Args, Parser, Subcommand};

use evopiezo_cli::commands::{
    cmd_check, cmd_reduce, cmd_simulate, load, ExitCode, InputError, Outcome, Overrides,
};
use evopiezo_cli::SimulationSpec;

type Runner =
    fn(&SimulationSpec, &Overrides, &mut dyn std::io::Write) -> Result<Outcome, InputError>;

#[derive(Parser)]
#[command(
    name = "evopiezo",
    version,
    about = "Well-posedness checks and simulation for coupled piezo-electro-magneto-thermo-elastic systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check well-posedness and print the report.
    Check(Common),
    /// Check, then integrate in time.
    Simulate(Common),
    /// Assemble the quasi-static reduction, check it, and simulate if a schedule is given.
    Reduce(Common),
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    /// Largest ν tried by the doubling search.
    #[arg(long)]
    nu_cap: Option<f64>,
    /// Positivity tolerance for the check.
    #[arg(long)]
    tol: Option<f64>,
    /// Simulate without a certificate; the energy log is marked UNCERTIFIED.
    #[arg(long)]
    skip_check: bool,
    /// Directory for all output files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ProcessExit {
    let cli = Cli::parse();
    let (run, c): (Runner, Common) = match cli.command {
        Command::Check(c) => (cmd_check, c),
        Command::Simulate(c) => (cmd_simulate, c),
        Command::Reduce(c) => (cmd_reduce, c),
    };
    let overrides = Overrides {
        nu_cap: c.nu_cap,
        tol: c.tol,
        skip_check: c.skip_check,
        out_dir: c.out_dir,
    };
    let result =
        load(&c.config).and_then(|spec| run(&spec, &overrides, &mut std::io::stdout().lock()));
    let code = match result {
        Ok(outcome) => outcome.exit(),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::Input
        }
    };
    ProcessExit::from(code.code() as u8)
}
