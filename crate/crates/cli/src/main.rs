//! `gxnor`: train, evaluate, sweep and cost-model discrete-weight networks.

mod fetch;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use gxnor::experiment::{self, checkpoint, RunConfig, SweepParam};
use gxnor::Error;

/// Environment variable naming the MNIST directory.
const DATA_ENV: &str = "GXNOR_DATA";
const DEFAULT_DATA_DIR: &str = "data/mnist";

#[derive(Parser)]
#[command(name = "gxnor", version, about = "Discrete-weight, discrete-activation network toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes metrics.csv, timing.csv and model.gxnr.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs/train")]
        out_dir: PathBuf,
    },
    /// Report test accuracy of a checkpoint, using the packed kernel where possible.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Config naming the dataset (defaults to MNIST).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// One training run per value of a parameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// One of m, a, r, n1, n2.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs/sweep")]
        out_dir: PathBuf,
    },
    /// Operation counts per architecture, from uniform state assumptions or a checkpoint.
    Costmodel {
        /// Use the state frequencies of this trained model instead of uniform ones.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Dataset for activation frequencies when a checkpoint is given.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fan-in M for the uniform table.
        #[arg(long, default_value_t = 100)]
        fan_in: usize,
        /// Also write the table here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Download and verify the four MNIST IDX files.
    FetchMnist {
        /// Target directory (defaults to $GXNOR_DATA or data/mnist).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Base URL or local directory holding the gzipped files.
        #[arg(long, default_value = fetch::DEFAULT_MIRROR)]
        mirror: String,
    },
}

/// A failure tagged with its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const CONFIG: u8 = 2;
const DATA: u8 = 3;
const RUNTIME: u8 = 4;

fn fail<E: Into<anyhow::Error>>(code: u8) -> impl FnOnce(E) -> Failure {
    move |e| Failure { code, error: e.into() }
}

/// Map a library error to the exit status of the stage it surfaced in.
fn classify(e: Error) -> Failure {
    let code = match &e {
        Error::Config(_) => CONFIG,
        Error::Data(_) => DATA,
        _ => RUNTIME,
    };
    Failure { code, error: e.into() }
}

fn data_dir() -> PathBuf {
    std::env::var_os(DATA_ENV).map_or_else(|| PathBuf::from(DEFAULT_DATA_DIR), PathBuf::from)
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p).map_err(fail(CONFIG))?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    for w in cfg.validate().map_err(fail(CONFIG))? {
        log::warn!("{w}");
    }
    Ok(cfg)
}

fn load_data(cfg: &RunConfig) -> Result<experiment::Splits, Failure> {
    experiment::load_data(cfg, Some(&data_dir())).map_err(fail(DATA))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train { config, seed, out_dir } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let data = load_data(&cfg)?;
            let out = experiment::train(&cfg, &data, Some(&out_dir)).map_err(classify)?;
            let last = out.last();
            println!(
                "epochs {} test_accuracy {:.4} sparsity {:.4} out_dir {}",
                last.epoch,
                last.test_accuracy,
                last.sparsity,
                out_dir.display()
            );
        }
        Command::Eval { checkpoint: path, config } => {
            let cfg = load_config(config.as_deref(), None)?;
            let model = checkpoint::load(&path).map_err(fail(RUNTIME))?;
            let data = load_data(&cfg)?;
            let ev = experiment::evaluate(&model, &data.test).map_err(classify)?;
            if ev.packed != ev.reference {
                return Err(Failure {
                    code: RUNTIME,
                    error: anyhow!("packed and reference inference disagree: {:?} vs {:?}", ev.packed, ev.reference),
                });
            }
            println!(
                "accuracy {:.4} ({}/{}) sparsity {:.4} packed_layers {}",
                ev.packed.accuracy, ev.packed.correct, ev.packed.total, ev.packed.sparsity, ev.packed_layers
            );
        }
        Command::Sweep { config, param, values, seed, out_dir } => {
            let param: SweepParam = param.parse().map_err(fail(CONFIG))?;
            let cfg = load_config(config.as_deref(), seed)?;
            let data = load_data(&cfg)?;
            let rows = experiment::sweep(&cfg, param, &values, &data, Some(&out_dir)).map_err(classify)?;
            print!("{}", experiment::render_sweep(param, &rows));
        }
        Command::Costmodel { checkpoint: path, config, fan_in, out_dir } => {
            let (name, table) = match path {
                None => {
                    let rows = experiment::uniform_costs(fan_in).map_err(fail(CONFIG))?;
                    ("costmodel-uniform.csv", experiment::render_uniform_costs(&rows))
                }
                Some(path) => {
                    let cfg = load_config(config.as_deref(), None)?;
                    let model = checkpoint::load(&path).map_err(fail(RUNTIME))?;
                    let data = load_data(&cfg)?;
                    let rows = experiment::empirical_costs(&model, &data.test).map_err(classify)?;
                    for r in &rows {
                        if let Some(m) = r.measured_resting {
                            log::info!("layer {}: measured resting fraction {:.4}", r.layer, m);
                        }
                    }
                    ("costmodel-empirical.csv", experiment::render_empirical_costs(&rows))
                }
            };
            print!("{table}");
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)
                    .with_context(|| format!("creating {}", dir.display()))
                    .map_err(fail(RUNTIME))?;
                experiment::write_atomic(&dir.join(name), table.as_bytes()).map_err(fail(RUNTIME))?;
            }
        }
        Command::FetchMnist { out_dir, mirror } => {
            let dir = out_dir.unwrap_or_else(data_dir);
            fetch::fetch_mnist(&dir, &mirror).map_err(fail(DATA))?;
            println!("MNIST ready in {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
