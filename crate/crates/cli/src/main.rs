//! `atp`: ingest reviews, train and evaluate the aspect sentiment model,
//! inspect distances and export attention heatmaps.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use atp_core::ingest::Span;
use atp_core::position::PositionKind;
use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "atp", version, about = "Aspect-term sentiment with dependency-distance attention")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pair review XML with CoNLL-U parses and write a JSONL dataset.
    Ingest {
        #[arg(long)]
        xml: PathBuf,
        #[arg(long)]
        conllu: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Dev set; without it a seeded share of the training data is held out.
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Flat `key = value` config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra `key=value` overrides applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Word vectors in GloVe / word2vec text format.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also append epoch reports to this file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Report accuracy of a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        /// Print one JSON object instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Classify one aspect of a parsed sentence.
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        conllu: PathBuf,
        #[arg(long)]
        span: Span,
        /// 1-based sentence number inside the CoNLL-U file.
        #[arg(long, default_value_t = 1)]
        sentence: usize,
    },
    /// Write one HTML/SVG attention heatmap per (sentence, aspect).
    AttnExport {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated sentence ids; all sentences when omitted.
        #[arg(long, value_delimiter = ',')]
        ids: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check analytic gradients of a small random model.
    Gradcheck {
        /// Sizes as `d_e=8,d_h=5,d_p=3,d_w=7,t=6`; missing keys keep these values.
        #[arg(long, default_value = "d_e=8,d_h=5,d_p=3,d_w=7,t=6")]
        dims: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Print the position vector of an aspect span.
    Distance {
        #[arg(long)]
        conllu: PathBuf,
        #[arg(long)]
        span: Span,
        #[arg(long, default_value_t = 1)]
        sentence: usize,
        /// `tree` for dependency distance, `offset` for word distance.
        #[arg(long, default_value = "tree")]
        kind: PositionKind,
        #[arg(long, default_value_t = atp_core::position::DEFAULT_CLAMP)]
        clamp: usize,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error(transparent)]
    Core(#[from] atp_core::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 4,
            CliError::Core(e) if e.is_numeric() => 4,
            _ => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self.code() {
            2 => "usage",
            4 => "numeric",
            _ => "data",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { xml, conllu, out } => commands::ingest(&xml, &conllu, &out),
        Command::Train {
            data,
            dev,
            config,
            overrides,
            embeddings,
            out,
            log,
        } => commands::train(commands::TrainArgs {
            data: &data,
            dev: dev.as_deref(),
            config: config.as_deref(),
            overrides: &overrides,
            embeddings: embeddings.as_deref(),
            out: &out,
            log: log.as_deref(),
        }),
        Command::Eval { data, ckpt, json } => commands::eval(&data, &ckpt, json),
        Command::Predict {
            ckpt,
            conllu,
            span,
            sentence,
        } => commands::predict(&ckpt, &conllu, span, sentence),
        Command::AttnExport { ckpt, data, ids, out } => commands::attn_export(&ckpt, &data, &ids, &out),
        Command::Gradcheck { dims, seed, eps, tol } => commands::gradcheck(&dims, seed, eps, tol),
        Command::Distance {
            conllu,
            span,
            sentence,
            kind,
            clamp,
        } => commands::distance(&conllu, span, sentence, kind, clamp),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("ATP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}] code={}: {msg}", e.kind(), e.code());
            ExitCode::from(e.code())
        }
    }
}
