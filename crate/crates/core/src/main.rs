use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use modeforge::config::{parse_override_value, resolve_config, ConfigError, PipelineConfig};
use modeforge::pipeline::{run_stage, sweep, PipelineError, Stage, SweepParam};

#[derive(Parser)]
#[command(
    name = "modeforge",
    about = "Synthesize reasoning training data by decomposing verified solutions \
             into thought modes, retrieving compatible modes for new seeds, and \
             converting judged-correct rollouts into SFT records.",
    version
)]
struct Cli {
    /// JSON config file (defaults < file < env < flags).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base rng seed for the whole run.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Use the deterministic offline providers.
    #[arg(long, global = true)]
    mock: bool,

    /// Directory holding all pipeline artifacts.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,

    /// Source rollout-bundle JSONL consumed by `extract`.
    #[arg(long, global = true)]
    sources: Option<PathBuf>,

    #[arg(long, global = true)]
    alpha: Option<f64>,

    #[arg(long, global = true)]
    tau: Option<f64>,

    /// K-means cluster count.
    #[arg(long, global = true)]
    clusters: Option<usize>,

    /// Reverse-engineering window length w.
    #[arg(long, global = true)]
    window_length: Option<usize>,

    /// Evolution steps n per seed.
    #[arg(long, global = true)]
    evolution_steps: Option<usize>,

    #[arg(long, global = true)]
    top_m: Option<usize>,

    /// Margin for the ranking loss.
    #[arg(long, global = true)]
    margin: Option<f64>,

    #[arg(long, global = true)]
    negatives_per_sample: Option<usize>,

    #[arg(long, global = true)]
    refresh_interval: Option<u64>,

    #[arg(long, global = true)]
    learning_rate: Option<f64>,

    #[arg(long, global = true)]
    rollout_count: Option<usize>,

    #[arg(long, global = true)]
    chat_temperature: Option<f64>,

    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Any other config key, repeatable: --set key=value.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reverse-engineer eligible sources into thought-mode chains.
    Extract,
    /// Train the retrieval adapter on extracted pairs.
    TrainRetriever,
    /// Compose new questions under distribution-aligned sampling.
    Synthesize,
    /// Run multi-rollout inference and judging over generated questions.
    Rollout,
    /// Filter by provenance and convert to SFT records.
    Convert,
    /// Emit stage-count and cluster-coverage reports.
    Report,
    /// Run synthesize+report across values of one parameter.
    Sweep {
        /// `alpha` or `window_w`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

fn collect_overrides(cli: &Cli) -> Result<Vec<(String, Value)>, ConfigError> {
    let mut overrides: Vec<(String, Value)> = Vec::new();
    let mut push = |key: &str, value: Value| overrides.push((key.to_string(), value));
    if let Some(v) = cli.seed {
        push("seed", v.into());
    }
    if cli.mock {
        push("mock", true.into());
    }
    if let Some(v) = &cli.data_dir {
        push("data_dir", v.display().to_string().into());
    }
    if let Some(v) = &cli.sources {
        push("sources", v.display().to_string().into());
    }
    if let Some(v) = cli.alpha {
        push("alpha", v.into());
    }
    if let Some(v) = cli.tau {
        push("tau", v.into());
    }
    if let Some(v) = cli.clusters {
        push("clusters", v.into());
    }
    if let Some(v) = cli.window_length {
        push("window_length", v.into());
    }
    if let Some(v) = cli.evolution_steps {
        push("evolution_steps", v.into());
    }
    if let Some(v) = cli.top_m {
        push("top_m", v.into());
    }
    if let Some(v) = cli.margin {
        push("margin", v.into());
    }
    if let Some(v) = cli.negatives_per_sample {
        push("negatives_per_sample", v.into());
    }
    if let Some(v) = cli.refresh_interval {
        push("refresh_interval", v.into());
    }
    if let Some(v) = cli.learning_rate {
        push("learning_rate", v.into());
    }
    if let Some(v) = cli.rollout_count {
        push("rollout_count", v.into());
    }
    if let Some(v) = cli.chat_temperature {
        push("chat_temperature", v.into());
    }
    if let Some(v) = cli.workers {
        push("workers", v.into());
    }
    for entry in &cli.set {
        let (key, raw) = entry.split_once('=').ok_or_else(|| ConfigError::InvalidValue {
            field: entry.clone(),
            message: "expected KEY=VALUE".into(),
        })?;
        overrides.push((key.to_string(), parse_override_value(raw)));
    }
    Ok(overrides)
}

fn run(cli: &Cli, cfg: &PipelineConfig) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Extract => println!("{}", run_stage(Stage::Extract, cfg)?.one_line()),
        Command::TrainRetriever => {
            println!("{}", run_stage(Stage::TrainRetriever, cfg)?.one_line())
        }
        Command::Synthesize => println!("{}", run_stage(Stage::Synthesize, cfg)?.one_line()),
        Command::Rollout => println!("{}", run_stage(Stage::Rollout, cfg)?.one_line()),
        Command::Convert => println!("{}", run_stage(Stage::Convert, cfg)?.one_line()),
        Command::Report => println!("{}", run_stage(Stage::Report, cfg)?.one_line()),
        Command::Sweep { param, values } => {
            let param = SweepParam::parse(param).ok_or_else(|| {
                PipelineError::Config(ConfigError::InvalidValue {
                    field: "param".into(),
                    message: "expected `alpha` or `window_w`".into(),
                })
            })?;
            let summary = sweep(param, values, cfg)?;
            print!("{}", summary.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = match collect_overrides(&cli) {
        Ok(o) => o,
        Err(err) => {
            eprintln!("config error: {err}");
            return ExitCode::from(2);
        }
    };
    let cfg = match resolve_config(
        cli.config.as_deref(),
        &|var| std::env::var(var).ok(),
        &overrides,
    ) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("config error: {err}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(PipelineError::Config(err)) => {
            eprintln!("config error: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("stage failed: {err}");
            ExitCode::from(1)
        }
    }
}
