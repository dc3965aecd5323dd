//! `kge`: train, evaluate and analyse knowledge graph embedding models.
//!
//! Exit status: 0 success, 1 usage error, 2 data or runtime error, 3 a
//! requested check failed.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::UsageError;

#[derive(Parser, Debug)]
#[command(
    name = "kge",
    version,
    about = "Knowledge graph embeddings: CompGCN, InteractE and friends"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write its checkpoint, epoch log and resolved config.
    Train(Box<TrainArgs>),
    /// Rank a split with a trained model and print the report as JSON.
    Eval(EvalArgs),
    /// Verify the interaction-count propositions by exact enumeration.
    Analyze(AnalyzeArgs),
    /// Finite-difference check of every scorer and encoder layer.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory with train.txt, valid.txt and test.txt.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// transe, distmult, hole, conve, interacte or compgcn+{transe,distmult,conve}.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    layers: Option<String>,
    /// sub, mult or corr.
    #[arg(long)]
    comp: Option<String>,
    /// full, kipf, rgcn, dgcn or wgcn.
    #[arg(long)]
    reduction: Option<String>,
    #[arg(long)]
    bases: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    label_smoothing: Option<String>,
    /// bce or margin:<gamma>.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    filters: Option<String>,
    #[arg(long)]
    permutations: Option<String>,
    /// stacked, alternate, alternate:<tau> or chequer.
    #[arg(long)]
    reshape: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Any other config key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl TrainArgs {
    /// Flag overrides in the order they are applied.
    fn overrides(&self) -> Result<Vec<(String, String)>, UsageError> {
        let mut out = Vec::new();
        let mut add = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        };
        add("data", &self.data.as_ref().map(|p| p.display().to_string()));
        add("out", &self.out.as_ref().map(|p| p.display().to_string()));
        add("model", &self.model);
        add("dim", &self.dim);
        add("layers", &self.layers);
        add("comp", &self.comp);
        add("reduction", &self.reduction);
        add("bases", &self.bases);
        add("epochs", &self.epochs);
        add("lr", &self.lr);
        add("batch_size", &self.batch_size);
        add("label_smoothing", &self.label_smoothing);
        add("loss", &self.loss);
        add("kernel", &self.kernel);
        add("filters", &self.filters);
        add("permutations", &self.permutations);
        add("reshape", &self.reshape);
        add("seed", &self.seed);
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| UsageError(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Run directory holding config.txt and model.kge.
    #[arg(long)]
    run: PathBuf,
    /// Dataset directory; defaults to the one recorded in the run config.
    #[arg(long)]
    data: Option<PathBuf>,
    /// train, valid or test.
    #[arg(long, default_value = "test")]
    split: String,
    /// head, tail or both.
    #[arg(long, default_value = "both")]
    side: String,
    /// Tails-per-head and heads-per-tail threshold of the relation categories.
    #[arg(long, default_value_t = kge::kg::DEFAULT_CATEGORY_THRESHOLD)]
    category_threshold: f64,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Largest plane side of the alternate-versus-stacked grid.
    #[arg(long, default_value_t = 12)]
    max_n: usize,
    /// Random layouts per chequer-maximality point.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Block-size chains as n:k pairs.
    #[arg(long, value_delimiter = ',', default_value = "8:2,12:3")]
    chains: Vec<String>,
    /// Chequer-maximality and padding points as n:k pairs.
    #[arg(long, value_delimiter = ',', default_value = "4:3,6:3,6:5")]
    points: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Outcome of a command that completed without error.
pub enum Outcome {
    Ok,
    CheckFailed,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    if let Some(kge::KgeError::InvalidArgument(_) | kge::KgeError::Unsupported(_)) =
        err.downcast_ref::<kge::KgeError>()
    {
        return 1;
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(*a),
        Command::Eval(a) => commands::eval(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
