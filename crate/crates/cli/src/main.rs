use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use erlang_rain_cli::commands;
use erlang_rain_cli::{resolve, CliError, Overrides, PolicyKind, Profile};

#[derive(Parser)]
#[command(name = "erlang-rain", version, about = "Loss-receiver sensor network model: analysis, policies, cost and simulation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Scenario file (TOML).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Built-in profile the file is layered on.
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,

    /// Override one key, e.g. `--set channel.gamma=2`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,

    /// Output directory.
    #[arg(short, long, global = true)]
    outputs: Option<PathBuf>,

    /// Simulation seed; takes precedence over ERLANG_RAIN_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Reception probability and its bounds along the radius.
    Prec,
    /// Admission policy and the density profile it delivers.
    Policy {
        #[arg(long, value_enum)]
        kind: Option<PolicyKind>,
    },
    /// Cheapest mix of cluster-heads and sensors, and the cost gain curve.
    Cost,
    /// Compare simulation with the closed forms.
    Validate {
        #[arg(long)]
        replications: Option<u64>,
        /// Corrupt the analytic side; the comparison must fail.
        #[arg(long)]
        self_test: bool,
    },
    /// Per-packet trace of one simulated replication.
    Trace,
    /// Print the resolved scenario as TOML.
    Config,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    let mut overrides = Overrides {
        sets: g.sets,
        profile: g.profile,
        outputs: g.outputs,
        seed: g.seed,
        ..Overrides::default()
    };
    match &cli.command {
        Command::Policy { kind } => overrides.policy_kind = *kind,
        Command::Validate { replications, .. } => overrides.replications = *replications,
        _ => {}
    }
    let scenario = resolve(g.config.as_deref(), &overrides)?;

    let written = match cli.command {
        Command::Prec => commands::prec(&scenario)?,
        Command::Policy { .. } => commands::policy(&scenario)?,
        Command::Cost => commands::cost(&scenario)?,
        Command::Trace => commands::trace(&scenario)?,
        Command::Config => {
            print!("{}", scenario.to_toml());
            Vec::new()
        }
        Command::Validate { self_test, .. } => {
            let checks = commands::validate(&scenario, self_test)?;
            for c in &checks {
                println!("{c}");
            }
            commands::validation_outcome(&checks)?;
            Vec::new()
        }
    };
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
