use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpbo_cli::bench::{Builtin, BUILTIN_NAMES};
use gpbo_cli::config::{parse_config, Objective, Overrides, RunConfig, DEFAULT_TOTAL_TRIALS};
use gpbo_cli::run::{run, RunReport, EXIT_CONFIG, EXIT_OK};

#[derive(Parser)]
#[command(
    name = "gpbo",
    version,
    about = "Bayesian optimization with a Gaussian-process surrogate"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimize the objective described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Check a config file without running anything.
    Validate { config: PathBuf },
    /// Run a built-in benchmark on its default space.
    Bench {
        name: String,
        #[command(flatten)]
        flags: RunFlags,
    },
}

#[derive(Args)]
struct RunFlags {
    /// Output directory (overrides the config).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Trial budget (overrides the config).
    #[arg(long)]
    trials: Option<usize>,
}

impl RunFlags {
    fn overrides(self) -> Overrides {
        Overrides {
            out_dir: self.out_dir,
            seed: self.seed,
            total_trials: self.trials,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let code = match cli.command {
        Cmd::Run { config, flags } => match parse_config(&config, &flags.overrides()) {
            Ok(cfg) => execute(&cfg),
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
        Cmd::Validate { config } => match parse_config(&config, &Overrides::default()) {
            Ok(cfg) => {
                println!(
                    "ok: {} parameters ({} tunable), {} trials",
                    cfg.space.params().len(),
                    cfg.space.dim(),
                    cfg.total_trials
                );
                for w in cfg.space.validate().warnings {
                    println!("warning: {w}");
                }
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
        Cmd::Bench { name, flags } => match bench_config(&name, flags.overrides()) {
            Some(cfg) => execute(&cfg),
            None => {
                eprintln!(
                    "error: unknown benchmark `{name}` or zero trials (benchmarks: {})",
                    BUILTIN_NAMES.join(", ")
                );
                EXIT_CONFIG
            }
        },
    };
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}

fn bench_config(name: &str, o: Overrides) -> Option<RunConfig> {
    if o.total_trials == Some(0) {
        return None;
    }
    let seed = o.seed.unwrap_or(0);
    let builtin = Builtin::from_config(name, None, seed).ok()?;
    Some(RunConfig {
        space: builtin.default_space(),
        out_dir: o
            .out_dir
            .unwrap_or_else(|| PathBuf::from(format!("bench-{name}"))),
        total_trials: o.total_trials.unwrap_or(DEFAULT_TOTAL_TRIALS),
        objective: Objective::Builtin(builtin),
        minimize: true,
        seed,
    })
}

fn execute(cfg: &RunConfig) -> i32 {
    match run(cfg) {
        Ok(report) => {
            print_report(cfg, &report);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn print_report(cfg: &RunConfig, r: &RunReport) {
    println!("best configuration:");
    for (k, v) in &r.best_arm {
        println!("  {k} = {v}");
    }
    println!(
        "objective {} (model {} +/- {})",
        r.observed_objective, r.predicted_mean, r.predicted_sd
    );
    println!(
        "{} trials, {} failed, {} ms; artifacts in {}",
        r.n_trials,
        r.n_failed,
        r.wall_ms,
        cfg.out_dir.display()
    );
}
