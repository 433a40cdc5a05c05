//! `latefuse`: batch pipelines from raw product records to fusion reports.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "latefuse", version, about = "Multi-label late fusion pipelines")]
struct Cli {
    /// Flat `key = value` config file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Set any config key, e.g. `--set lr=0.01`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_pair)]
    set: Vec<(String, String)>,
    #[command(subcommand)]
    command: Command,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

#[derive(Args, Default)]
struct DataArgs {
    /// Line-delimited JSON product records.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Label vocabulary written by `latefuse vocab`.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Records before this index form the training split.
    #[arg(long)]
    n_train: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TextModality {
    Title,
    Description,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Build the filtered label vocabulary.
    Vocab {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        min_count: Option<usize>,
    },
    /// Train a convolutional text classifier on titles or descriptions.
    TrainText {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        modality: Option<TextModality>,
        /// Pretrained `token v1 ... vD` word vectors.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Score a split with a trained text classifier.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Token vocabulary written next to the model.
        #[arg(long)]
        tokens: Option<PathBuf>,
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
    },
    /// Convert externally produced scores into a prediction matrix.
    ImportScores {
        #[command(flatten)]
        data: DataArgs,
        /// Headerless `<id>,<p1>,...,<pL>` file.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        modality: Option<String>,
    },
    /// Simulate a modality with per-class skill from the true labels.
    Synth {
        #[command(flatten)]
        data: DataArgs,
        /// `label<TAB>skill` lines, `*<TAB>skill` for the default.
        #[arg(long)]
        skill_profile: Option<PathBuf>,
        #[arg(long)]
        modality: Option<String>,
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Fuse two or more aligned prediction matrices.
    Fuse {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_parser = ["max", "mean", "ridge", "mlp"])]
        policy: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Training-split matrices for trainable policies, one per input.
        #[arg(long)]
        train: Vec<PathBuf>,
        /// Apply a previously trained fusion model instead of training.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output file stem (defaults to the policy name).
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(required = true, num_args = 2..)]
        inputs: Vec<PathBuf>,
    },
    /// Micro-F1 and the most-missed classes of a prediction matrix.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(short, long)]
        k: Option<usize>,
    },
    /// Finite-difference check of every layer kind's gradients.
    Gradcheck {
        #[arg(long)]
        configs: Option<usize>,
        /// Perturb analytic gradients; the check must then fail.
        #[arg(long, hide = true)]
        corrupt: bool,
    },
}

struct Overrides(Vec<(String, String)>);

impl Overrides {
    fn add(&mut self, key: &str, value: Option<impl ToString>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((key.to_string(), v.to_string()));
        }
        self
    }

    fn path(&mut self, key: &str, value: &Option<PathBuf>) -> &mut Self {
        self.add(key, value.as_ref().map(|p| p.display().to_string()))
    }

    fn data(&mut self, d: &DataArgs) -> &mut Self {
        self.path("dataset", &d.dataset).path("vocab", &d.vocab).add("n_train", d.n_train)
    }
}

fn split_name(s: Option<SplitArg>) -> Option<&'static str> {
    s.map(|s| match s {
        SplitArg::Train => "train",
        SplitArg::Test => "test",
        SplitArg::All => "all",
    })
}

fn run(cli: Cli) -> Result<bool> {
    let mut o = Overrides(cli.set.clone());
    o.add("seed", cli.seed).path("out", &cli.out);
    match &cli.command {
        Command::Vocab { dataset, min_count } => {
            o.path("dataset", dataset).add("min_count", *min_count);
        }
        Command::TrainText { data, modality, embeddings, epochs, lr, batch_size } => {
            let modality = modality.map(|m| match m {
                TextModality::Title => "title",
                TextModality::Description => "description",
            });
            o.data(data)
                .add("modality", modality)
                .path("embeddings", embeddings)
                .add("epochs", *epochs)
                .add("lr", *lr)
                .add("batch_size", *batch_size);
        }
        Command::Predict { data, model, tokens, split } => {
            o.data(data).path("model", model).path("tokens", tokens).add("split", split_name(*split));
        }
        Command::ImportScores { data, scores, modality } => {
            o.data(data).path("scores", scores).add("modality", modality.clone());
        }
        Command::Synth { data, skill_profile, modality, split, temperature } => {
            o.data(data)
                .path("skill_profile", skill_profile)
                .add("modality", modality.clone())
                .add("split", split_name(*split))
                .add("temperature", *temperature);
        }
        Command::Fuse { data, policy, alpha, model, epochs, .. } => {
            o.data(data)
                .add("policy", policy.clone())
                .add("alpha", *alpha)
                .path("model", model)
                .add("epochs", *epochs);
        }
        Command::Eval { data, tau, k, .. } => {
            o.data(data).add("tau", *tau).add("k", *k);
        }
        Command::Gradcheck { configs, .. } => {
            o.add("configs", *configs);
        }
    }
    let cfg = RunConfig::resolve(cli.config.as_deref(), &o.0)?;

    match &cli.command {
        Command::Vocab { .. } => commands::vocab(&cfg)?,
        Command::TrainText { .. } => commands::train_text(&cfg)?,
        Command::Predict { .. } => commands::predict(&cfg)?,
        Command::ImportScores { .. } => commands::import(&cfg)?,
        Command::Synth { .. } => commands::synth(&cfg)?,
        Command::Fuse { inputs, train, name, .. } => commands::fuse(&cfg, inputs, train, name.as_deref())?,
        Command::Eval { matrix, .. } => {
            commands::eval(&cfg, matrix).with_context(|| format!("evaluating {}", matrix.display()))?
        }
        Command::Gradcheck { corrupt, .. } => return commands::gradcheck(&cfg, *corrupt),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
