use std::path::{Path, PathBuf};
use std::process::ExitCode;

use augopt_cli::commands::{cmd_check, cmd_run, cmd_sweep, EXIT_FAIL, EXIT_OK, EXIT_USAGE};
use augopt_cli::validate::{run_suite, write_validation_csv, Fault, ValidateOptions};
use augopt_cli::{ConfigError, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "augopt", version, about = "Augmented gradient descent experiments on overparameterized linear regression")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides run.master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for trajectory ensembles.
    #[arg(long, env = "AUGOPT_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble and write trajectory.csv and report.txt.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write SVG charts.
        #[arg(long)]
        plots: bool,
    },
    /// Print the convergence conditions for the configured schedule.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Classify and simulate a grid of schedule exponents.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Simulate plans without a convergence guarantee as well.
        #[arg(long)]
        force: bool,
    },
    /// Run the acceptance criteria and write validation.csv.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "validation")]
        out: PathBuf,
        #[arg(long, env = "AUGOPT_WORKERS")]
        workers: Option<usize>,
        /// Comma-separated criterion ids (default: all).
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<usize>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.run.master_seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn with_config(common: &Common, f: impl FnOnce(&ExperimentConfig) -> anyhow::Result<i32>) -> i32 {
    let cfg = match load(common) {
        Ok(c) => c,
        Err(e) => {
            let at = common.config.as_deref().map(Path::display);
            match at {
                Some(p) => eprintln!("error: {p}: {e}"),
                None => eprintln!("error: {e}"),
            }
            return EXIT_USAGE;
        }
    };
    match f(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let code = match cli.cmd {
        Command::Run { common, plots } => {
            let workers = common.workers;
            with_config(&common, |c| cmd_run(c, &c.output_dir, plots, workers))
        }
        Command::Check { common } => with_config(&common, cmd_check),
        Command::Sweep { common, force } => {
            let workers = common.workers;
            with_config(&common, |c| cmd_sweep(c, &c.output_dir, force, workers))
        }
        Command::Validate { seed, out, workers, criteria, inject_fault } => {
            let opts = ValidateOptions {
                master_seed: seed,
                workers,
                criteria,
                fault: inject_fault.then_some(Fault::MomentFormula),
            };
            let results = run_suite(&opts, |r, secs| {
                println!("{}  [{secs:.1} s]", r.line());
                if !r.passed {
                    println!("    {}", r.detail);
                }
            });
            let write = std::fs::create_dir_all(&out)
                .map_err(anyhow::Error::from)
                .and_then(|_| write_validation_csv(&out.join("validation.csv"), &results));
            if let Err(e) = write {
                eprintln!("error: {e:#}");
                return ExitCode::from(EXIT_USAGE as u8);
            }
            let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| format!("{} ({})", r.id, r.name)).collect();
            if failed.is_empty() {
                println!("all {} criteria passed", results.len());
                EXIT_OK
            } else {
                println!("failed criteria: {}", failed.join(", "));
                EXIT_FAIL
            }
        }
    };
    ExitCode::from(code as u8)
}
