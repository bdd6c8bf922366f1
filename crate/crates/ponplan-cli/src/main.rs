//! Command-line front end for the migration planning engine.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ponplan::scenario_io::OutputFormat;

#[derive(Parser)]
#[command(
    name = "ponplan",
    about = "Techno-economic migration planner for access networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = OutputArg::Table)]
    output: OutputArg,

    /// Write output to a file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Evaluate by materializing the full search tree instead of the
    /// memoized evaluator.
    #[arg(long, global = true)]
    naive_tree: bool,

    /// Node cap for the naive search tree.
    #[arg(long, global = true, value_name = "N")]
    max_nodes: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputArg {
    Json,
    Csv,
    Table,
}

impl From<OutputArg> for OutputFormat {
    fn from(value: OutputArg) -> Self {
        match value {
            OutputArg::Json => OutputFormat::Json,
            OutputArg::Csv => OutputFormat::Csv,
            OutputArg::Table => OutputFormat::Table,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GoalArg {
    Flexible,
    Fixed,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the optimal migration plan for a scenario.
    Plan {
        scenario: PathBuf,
        /// Override the scenario's goal policy.
        #[arg(long, value_enum)]
        goal: Option<GoalArg>,
        /// Override the penetration curve (name of a bundled curve next to
        /// the scenario, or a path to a curve file).
        #[arg(long)]
        curve: Option<String>,
    },
    /// Run both goal policies over the three standard penetration curves.
    Compare { scenario: PathBuf },
    /// Re-plan while sweeping one parameter over a list of values.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        parameter: commands::SweepParameter,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Cross-check the tree evaluator, the memoized evaluator and the
    /// exhaustive oracle on a scenario.
    Verify { scenario: PathBuf },
    /// Validate a scenario file and report every violation.
    Validate { scenario: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = commands::Context {
        format: cli.output.into(),
        out: cli.out,
        naive_tree: cli.naive_tree,
        max_nodes: cli.max_nodes,
    };
    let result = match cli.command {
        Command::Plan {
            scenario,
            goal,
            curve,
        } => commands::plan(
            &ctx,
            &scenario,
            goal.map(|g| match g {
                GoalArg::Flexible => ponplan::model::GoalPolicy::FlexibleFttx,
                GoalArg::Fixed => ponplan::model::GoalPolicy::FixedFtth,
            }),
            curve.as_deref(),
        ),
        Command::Compare { scenario } => commands::compare(&ctx, &scenario),
        Command::Sweep {
            scenario,
            parameter,
            values,
        } => commands::sweep(&ctx, &scenario, parameter, &values),
        Command::Verify { scenario } => commands::verify(&ctx, &scenario),
        Command::Validate { scenario } => commands::validate(&ctx, &scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error [{}]: {err}", err.code());
            ExitCode::from(err.exit_code())
        }
    }
}
