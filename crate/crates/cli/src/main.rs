mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{variant_overrides, PipelineConfig};

#[derive(Parser, Debug)]
#[command(name = "highlight", version, about = "Highlight detection in transcripts")]
struct Cli {
    /// JSON config file; every key can also be set as --dotted.key VALUE.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// keep or strip
    #[arg(long, global = true)]
    punct: Option<String>,
    /// on or off
    #[arg(long, global = true)]
    stem: Option<String>,
    #[arg(long, global = true)]
    ni: Option<usize>,
    #[arg(long, global = true)]
    nf: Option<usize>,
    /// seq11, hscore, hscorelength or possum
    #[arg(long, global = true)]
    sampler: Option<String>,
    /// Positive integer or "oracle".
    #[arg(long, global = true)]
    r: Option<String>,
    /// gbm or lstm
    #[arg(long, global = true)]
    family: Option<String>,
    /// LSTM variant letters: a attention, b bidirectional, p punctuation, g/f pretrained vectors.
    #[arg(long, global = true)]
    variant: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus with planted highlights.
    Synth,
    /// Build the length-matched training set from the training transcripts.
    DatasetBuild,
    /// Print length and h-coverage histograms of the corpus.
    DatasetStats,
    /// Train a fold ensemble and save it.
    Train,
    /// Score free text with a trained model.
    Score {
        #[arg(long)]
        text: Vec<String>,
        /// One document per line; "-" reads stdin.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Select fragments from held-out transcripts.
    Extract,
    /// Evaluate sentence rankings on held-out transcripts.
    Eval,
    /// Group evaluation results by recording date.
    Drift {
        /// month, quarter, year or Nd
        #[arg(long)]
        bucket: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::DatasetBuild => "dataset-build",
            Command::DatasetStats => "dataset-stats",
            Command::Train => "train",
            Command::Score { .. } => "score",
            Command::Extract => "extract",
            Command::Eval => "eval",
            Command::Drift { .. } => "drift",
        }
    }
}

type Overrides = Vec<(String, String)>;

/// Pull `--a.b VALUE` and `--a.b=VALUE` pairs out of argv.
fn split_dotted(args: Vec<String>) -> Result<(Vec<String>, Overrides)> {
    let mut rest = Vec::new();
    let mut dotted = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        match arg.strip_prefix("--") {
            Some(flag) if flag.split('=').next().is_some_and(|k| k.contains('.')) => {
                if let Some((k, v)) = flag.split_once('=') {
                    dotted.push((k.to_string(), v.to_string()));
                } else {
                    let v = it.next().ok_or_else(|| anyhow::anyhow!("--{flag} needs a value"))?;
                    dotted.push((flag.to_string(), v));
                }
            }
            _ => rest.push(arg),
        }
    }
    Ok((rest, dotted))
}

fn overrides(cli: &Cli, dotted: Overrides) -> Result<Overrides> {
    let mut out = Vec::new();
    if let Some(v) = &cli.variant {
        out.extend(variant_overrides(v)?);
    }
    let named = [
        ("seed", cli.seed.map(|v| v.to_string())),
        ("train.preprocessing.punct", cli.punct.clone()),
        ("train.preprocessing.stem", cli.stem.clone()),
        ("sampling.n_i", cli.ni.map(|v| v.to_string())),
        ("sampling.n_f", cli.nf.map(|v| v.to_string())),
        ("sampling.sampler", cli.sampler.clone()),
        ("sampling.r", cli.r.clone()),
        ("train.family", cli.family.clone()),
    ];
    out.extend(named.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    if let Command::Drift { bucket: Some(b) } = &cli.command {
        out.push(("evaluation.drift_bucket".into(), b.clone()));
    }
    out.extend(dotted);
    Ok(out)
}

fn run(cli: &Cli, dotted: Overrides) -> Result<()> {
    let config = PipelineConfig::load(cli.config.as_deref(), &overrides(cli, dotted)?)?;
    match &cli.command {
        Command::Synth => commands::synth(&config),
        Command::DatasetBuild => commands::dataset_build(&config),
        Command::DatasetStats => commands::dataset_stats(&config),
        Command::Train => commands::train(&config),
        Command::Score { text, input } => commands::score(&config, text, input.as_deref()),
        Command::Extract => commands::extract_cmd(&config),
        Command::Eval => commands::eval(&config),
        Command::Drift { .. } => commands::drift(&config),
    }
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<highlight_core::Error>() {
            return e.kind();
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
        if cause.is::<serde_json::Error>() {
            return "format";
        }
    }
    "config"
}

fn report(err: &anyhow::Error, command: &str) -> ExitCode {
    let message = err.chain().map(ToString::to_string).collect::<Vec<_>>().join(": ");
    let body = serde_json::json!({"error": {"kind": error_kind(err), "message": message, "command": command}});
    eprintln!("{body}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let (args, dotted) = match split_dotted(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => return report(&e, "args"),
    };
    let cli = Cli::parse_from(args);
    match run(&cli, dotted) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e, cli.command.name()),
    }
}
