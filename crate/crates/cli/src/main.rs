use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lvcprobe::commands::{self, EvaluateArgs, ReportFormat};
use lvcprobe::config::{ExperimentConfig, Overrides};
use lvcprobe::error::{CliError, Result};
use lvcprobe::formats::write_text;

/// Light-verb-construction probing pipeline over UD treebanks.
///
/// Log verbosity follows LVCPROBE_LOG (error, warn, info, debug, trace).
#[derive(Parser, Debug)]
#[command(name = "lvcprobe", version)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, short, global = true, env = "LVCPROBE_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for the stratified split.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Treebank file or directory of .conllu files (repeatable).
    #[arg(long = "treebank")]
    treebanks: Vec<PathBuf>,

    /// strict or lenient.
    #[arg(long)]
    parse_mode: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract LVC candidates and write the review sheet.
    Extract {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Apply the reviewed sheet and write the labeled dataset.
    Build {
        #[command(flatten)]
        data: DataArgs,
        /// Reviewed sheet (defaults to the one extract wrote).
        #[arg(long)]
        review_sheet: Option<PathBuf>,
    },
    /// Fit the feature space and the classifier on the training split.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// lemma_tfidf or grammar.
        #[arg(long)]
        representation: Option<String>,
        /// standard or turkish.
        #[arg(long)]
        casing: Option<String>,
        /// Vocabulary cap for lemma TF-IDF.
        #[arg(long)]
        max_features: Option<usize>,
        /// Longest lemma n-gram, 1 or 2.
        #[arg(long)]
        ngram_max: Option<usize>,
        /// L2 penalty strength.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Stop once the gradient infinity norm falls to this.
        #[arg(long)]
        tol: Option<f64>,
        /// Share of each class used for training.
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Tune the decision threshold on held-out scores.
    Calibrate {
        /// none, max_f1 or precision_floor.
        #[arg(long)]
        mode: Option<String>,
        /// Minimum precision for precision_floor.
        #[arg(long)]
        floor: Option<f64>,
    },
    /// Score the diagnostic set with a model or an external predictions file.
    Evaluate {
        /// Diagnostic items (JSONL).
        #[arg(long)]
        diagnostic: Option<PathBuf>,
        /// Companion CoNLL-U analyses of the diagnostic items.
        #[arg(long)]
        diagnostic_conllu: Option<PathBuf>,
        /// TSV with item_id, pred and optional score; skips the model.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Model JSON (defaults to the calibrated model when present).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Run label, "Model / Setting".
        #[arg(long)]
        label: Option<String>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Render one or more report JSON files as a table.
    Report {
        /// Report JSON written by evaluate (repeatable).
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn overrides(cli: &Cli) -> Overrides {
    let mut o = Overrides {
        output_dir: cli.out.clone(),
        seed: cli.seed,
        ..Overrides::default()
    };
    let data = match &cli.command {
        Command::Extract { data } | Command::Build { data, .. } | Command::Train { data, .. } => Some(data),
        Command::Evaluate { data, .. } => Some(data),
        _ => None,
    };
    if let Some(d) = data {
        o.treebanks = d.treebanks.clone();
        o.parse_mode = d.parse_mode.clone();
    }
    match &cli.command {
        Command::Build { review_sheet, .. } => o.review_sheet = review_sheet.clone(),
        Command::Train {
            representation,
            casing,
            max_features,
            ngram_max,
            lambda,
            max_iter,
            tol,
            train_fraction,
            ..
        } => {
            o.representation = representation.clone();
            o.casing = casing.clone();
            o.max_features = *max_features;
            o.ngram_max = *ngram_max;
            o.lambda = *lambda;
            o.max_iter = *max_iter;
            o.tol = *tol;
            o.train_fraction = *train_fraction;
        }
        Command::Calibrate { mode, floor } => {
            o.calibration_mode = mode.clone();
            o.floor = *floor;
        }
        Command::Evaluate {
            diagnostic,
            diagnostic_conllu,
            ..
        } => {
            o.diagnostic_items = diagnostic.clone();
            o.diagnostic_conllu = diagnostic_conllu.clone();
        }
        _ => {}
    }
    o
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Report { inputs, format, output } = &cli.command {
        let format = match format {
            Format::Text => ReportFormat::Text,
            Format::Json => ReportFormat::Json,
        };
        let doc = commands::cmd_report(inputs, format)?;
        match output {
            Some(p) => write_text(p, &doc)?,
            None => print!("{doc}"),
        }
        return Ok(());
    }
    let config = ExperimentConfig::load(cli.config.as_deref(), &overrides(&cli))?;
    log::debug!("config hash {}", config.hash());
    match cli.command {
        Command::Extract { .. } => commands::cmd_extract(&config).map(drop),
        Command::Build { .. } => commands::cmd_build(&config).map(drop),
        Command::Train { .. } => commands::cmd_train(&config).map(drop),
        Command::Calibrate { .. } => commands::cmd_calibrate(&config).map(drop),
        Command::Evaluate {
            predictions, model, label, ..
        } => commands::cmd_evaluate(&config, &EvaluateArgs { predictions, model, label }).map(drop),
        Command::Report { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LVCPROBE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Io { source, .. } = &e {
                log::debug!("{source:?}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
