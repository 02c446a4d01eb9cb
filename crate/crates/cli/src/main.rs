//! `weakpref`: split a preference dataset, write labeling functions
//! against it, fit a label model on the labeled baseline, weakly label the
//! rest and measure what the weak labels add.

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use config::{resolve, Overrides};
use stages::{Layout, Stage};

fn version() -> String {
    format!(
        "{} (dataset format {}, params format {})",
        env!("CARGO_PKG_VERSION"),
        weakpref::DATASET_FORMAT_VERSION,
        weakpref::labelmodel::PARAMS_FORMAT_VERSION
    )
}

#[derive(Parser, Debug)]
#[command(name = "weakpref", about = "Weak supervision for pairwise preference datasets")]
struct Cli {
    /// TOML pipeline config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (also WEAKPREF_OUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Top-level seed; every stage seed derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct SplitArgs {
    /// JSONL dataset (also WEAKPREF_INPUT).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    eval_frac: Option<f64>,
    #[arg(long)]
    baseline_frac: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct FilterArgs {
    /// Keep weak labels with at least this confidence; repeatable.
    #[arg(long = "min-confidence")]
    min_confidence: Vec<f64>,
    /// Keep the N most confident weak labels; repeatable.
    #[arg(long)]
    top_n: Vec<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split into eval, baseline and weak sets.
    Split(SplitArgs),
    /// Compare chosen and rejected responses of the baseline set.
    Analyze,
    /// Coverage and accuracy of each labeling function on the baseline set.
    LfStats,
    /// Fit the label model on the baseline set.
    Fit,
    /// Weakly label the weak set.
    Label,
    /// Confidence-filter the weak labels.
    Filter(FilterArgs),
    /// Train the proxy classifier on baseline plus filtered weak labels.
    Grid(FilterArgs),
    /// Label-model accuracy on the baseline and weak sets.
    Evaluate(FilterArgs),
    /// Every stage in order.
    All {
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        filter: FilterArgs,
    },
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let parsed = Cli::command()
        .version(&*Box::leak(version().into_boxed_str()))
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("WEAKPREF_LOG")
        .format_timestamp(None)
        .init();

    let mut overrides = Overrides {
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
        ..Default::default()
    };
    let (stages, split, filter): (Vec<Stage>, Option<&SplitArgs>, Option<&FilterArgs>) = match &cli.command {
        Command::Split(a) => (vec![Stage::Split], Some(a), None),
        Command::Analyze => (vec![Stage::Analyze], None, None),
        Command::LfStats => (vec![Stage::LfStats], None, None),
        Command::Fit => (vec![Stage::Fit], None, None),
        Command::Label => (vec![Stage::Label], None, None),
        Command::Filter(f) => (vec![Stage::Filter], None, Some(f)),
        Command::Grid(f) => (vec![Stage::Grid], None, Some(f)),
        Command::Evaluate(f) => (vec![Stage::Evaluate], None, Some(f)),
        Command::All { split, filter } => (Stage::PIPELINE.to_vec(), Some(split), Some(filter)),
    };
    if let Some(s) = split {
        overrides.input = s.input.clone();
        overrides.eval_frac = s.eval_frac;
        overrides.baseline_frac = s.baseline_frac;
    }
    if let Some(f) = filter {
        overrides.thresholds = f.min_confidence.clone();
        overrides.top_n = f.top_n.clone();
    }

    let resolved = match resolve(cli.config.as_deref(), &overrides) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    if stages.contains(&Stage::Split) && resolved.input.is_none() {
        eprintln!("error: no input dataset; pass --input, set WEAKPREF_INPUT or data.input");
        return ExitCode::from(EXIT_VALIDATION);
    }
    let layout = Layout {
        out: resolved.out_dir.clone(),
    };
    for stage in stages {
        if let Err(e) = stage.run(&resolved, &layout) {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    ExitCode::SUCCESS
}
