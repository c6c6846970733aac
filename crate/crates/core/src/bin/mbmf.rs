use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mbmf::env::EnvKind;
use mbmf::harness::{
    aggregate_dir, run_experiment, write_outputs, write_summary, ExperimentConfig, ExperimentResult, Method,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_ALL_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "mbmf",
    version,
    about = "Policy search with learned-dynamics priors: experiments and tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's method (MBMF, MB, MF, MB_MF_SWITCH).
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Recompute the final-cost table from a results directory.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one configuration per value of F or K.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<usize>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Print a desk-scale config for one of the reference environments.
    PrintConfig {
        #[arg(long, value_enum, default_value = "point-mass")]
        env: EnvChoice,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    #[value(name = "F")]
    F,
    #[value(name = "K")]
    K,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvChoice {
    PointMass,
    Pusher,
}

fn load(path: &Path, trials: Option<usize>, seed: Option<u64>) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| e.to_string())?;
    if let Some(t) = trials {
        cfg.n_trials = t;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn finish(out: &Path, results: &[ExperimentResult]) -> ExitCode {
    let agg = match write_outputs(out, results) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: writing results to {}: {e}", out.display());
            return ExitCode::FAILURE;
        }
    };
    for row in &agg.summary {
        println!(
            "{:<14} mean {:>10.4}  std {:>9.4}  valid {}",
            row.label, row.mean, row.std, row.n_valid_trials
        );
    }
    for res in results {
        for o in res.outcomes.iter().filter(|o| !o.is_valid()) {
            let f = o.failure.as_ref().expect("invalid trial has a failure");
            eprintln!(
                "{} trial {} failed at iteration {}: {}",
                res.label(),
                o.trial,
                f.iteration,
                f.message
            );
        }
    }
    if results.iter().all(|r| r.n_valid() == 0) {
        eprintln!("error: every trial failed");
        return ExitCode::from(EXIT_ALL_FAILED);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            method,
            trials,
            seed,
            out,
        } => {
            let mut cfg = match load(&config, trials, seed) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            if let Some(m) = method {
                match m.parse::<Method>() {
                    Ok(m) => cfg.method = m,
                    Err(e) => {
                        eprintln!("{e}");
                        return ExitCode::from(EXIT_CONFIG);
                    }
                }
                if let Err(e) = cfg.validate() {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            }
            let result = run_experiment(&cfg);
            finish(&out, &[result])
        }
        Command::Sweep {
            param,
            values,
            config,
            trials,
            seed,
            out,
        } => {
            let base = match load(&config, trials, seed) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let mut cfgs = Vec::with_capacity(values.len());
            for v in values {
                let mut cfg = base.clone();
                match param {
                    SweepParam::F => {
                        cfg.method = Method::Mbmf;
                        cfg.f = v;
                    }
                    SweepParam::K => {
                        cfg.method = Method::MbMfSwitch;
                        cfg.k = v;
                    }
                }
                if let Err(e) = cfg.validate() {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
                cfgs.push(cfg);
            }
            let results: Vec<ExperimentResult> = cfgs.iter().map(run_experiment).collect();
            finish(&out, &results)
        }
        Command::Aggregate { input, out } => {
            let written = aggregate_dir(&input).and_then(|agg| {
                let file = std::fs::File::create(&out)?;
                write_summary(file, &agg.summary)
            });
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::PrintConfig { env } => {
            let kind = match env {
                EnvChoice::PointMass => EnvKind::PointMass,
                EnvChoice::Pusher => EnvKind::Pusher,
            };
            match ExperimentConfig::desk(kind).to_toml_string() {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
