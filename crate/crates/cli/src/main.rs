use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use botnet_ids::{Error, Result};
use botnet_ids_cli::{cmd_eval, cmd_infer, cmd_prepare, cmd_train, exit_code, RunConfig};

/// Botnet traffic classifier: prepare data, train, evaluate and classify.
#[derive(Parser)]
#[command(name = "botnet-ids", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Key = value configuration file, applied over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Any configuration key, as key=value; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Load, balance, split and scale the CSV corpus into a dataset artifact.
    Prepare {
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        test_fraction: Option<f64>,
        /// Comma-separated device name filters.
        #[arg(long)]
        devices: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Train on a prepared dataset.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a checkpoint on a dataset partition.
    Eval {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// text, csv, json, a comma list of them, or all.
        #[arg(long)]
        format: Option<String>,
        /// test or train.
        #[arg(long)]
        split: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Classify the rows of a feature CSV.
    Infer {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        input_csv: Option<PathBuf>,
        #[arg(long)]
        output_csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn opt<T: ToString>(key: &str, v: &Option<T>) -> Option<(String, String)> {
    v.as_ref().map(|v| (key.to_string(), v.to_string()))
}

fn path(key: &str, v: &Option<PathBuf>) -> Option<(String, String)> {
    v.as_ref().map(|v| (key.to_string(), v.display().to_string()))
}

fn resolve(common: &Common, flags: Vec<Option<(String, String)>>) -> Result<RunConfig> {
    let mut overrides = Vec::new();
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    overrides.extend(flags.into_iter().flatten());
    overrides.extend(path("out", &common.out));
    overrides.extend(opt("seed", &common.seed));
    RunConfig::resolve(common.config.as_deref(), &overrides)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare { data_dir, per_class, test_fraction, devices, common } => {
            let cfg = resolve(
                &common,
                vec![
                    path("data_dir", &data_dir),
                    opt("per_class", &per_class),
                    opt("test_fraction", &test_fraction),
                    opt("devices", &devices),
                ],
            )?;
            cmd_prepare(&cfg).map(drop)
        }
        Command::Train { dataset, epochs, batch_size, common } => {
            let cfg = resolve(
                &common,
                vec![path("dataset", &dataset), opt("epochs", &epochs), opt("batch_size", &batch_size)],
            )?;
            cmd_train(&cfg).map(drop)
        }
        Command::Eval { dataset, checkpoint, format, split, common } => {
            let cfg = resolve(
                &common,
                vec![
                    path("dataset", &dataset),
                    path("checkpoint", &checkpoint),
                    opt("format", &format),
                    opt("split", &split),
                ],
            )?;
            cmd_eval(&cfg).map(drop)
        }
        Command::Infer { checkpoint, input_csv, output_csv, common } => {
            let cfg = resolve(
                &common,
                vec![
                    path("checkpoint", &checkpoint),
                    path("input_csv", &input_csv),
                    path("output_csv", &output_csv),
                ],
            )?;
            cmd_infer(&cfg).map(drop)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
