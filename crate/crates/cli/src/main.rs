use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hlab_cli::{ExperimentKind, Overrides};

#[derive(Parser)]
#[command(name = "hlab", version, about = "Holonomy, invariant-section and leaf-conjugacy experiments on tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Random seed; overrides `numeric.seed`.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Bracketing rates on a grid and predicted Hölder exponents.
    Bunching(Common),
    /// Invariant section of a fiber contraction and its fitted exponent.
    Section(Common),
    /// Holonomy of a strong foliation between two transversals.
    Holonomy(Common),
    /// Leaf conjugacy on a grid, checked against the base conjugacy.
    Conjugacy(Common),
    /// Holonomy of the suspension loop compared with the center conjugacy.
    Suspension(Common),
    /// Leaf-expansivity probe of the quotient system.
    Leafexp(Common),
    /// Non-Hölder holonomy demonstrations.
    Gallery {
        /// `slanted-conjugacy` or `good-bad-intersection`; overrides `experiment.gallery`.
        name: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run whatever experiment the configuration names.
    Run(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common, gallery) = match cli.command {
        Command::Bunching(c) => (Some(ExperimentKind::Bunching), c, None),
        Command::Section(c) => (Some(ExperimentKind::Section), c, None),
        Command::Holonomy(c) => (Some(ExperimentKind::Holonomy), c, None),
        Command::Conjugacy(c) => (Some(ExperimentKind::Conjugacy), c, None),
        Command::Suspension(c) => (Some(ExperimentKind::Suspension), c, None),
        Command::Leafexp(c) => (Some(ExperimentKind::Leafexp), c, None),
        Command::Gallery { name, common } => (Some(ExperimentKind::Gallery), common, name),
        Command::Run(c) => (None, c, None),
    };
    let overrides = Overrides { kind, out: common.out, seed: common.seed, plots: common.plots, gallery };
    match hlab_cli::run(common.config.as_deref(), &overrides) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            println!("wrote {} files to {}", report.files.len() + 1, report.out_dir.display());
            if report.verified {
                println!("artifacts match the previous run recorded in the manifest");
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("hlab: {failure}");
            ExitCode::from(failure.code)
        }
    }
}
