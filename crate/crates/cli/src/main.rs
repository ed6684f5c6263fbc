use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use xling_cli::commands;
use xling_cli::config::{Overrides, RunConfig};
use xling_core::report::Layout;
use xling_core::synthbench::DeskConfig;

#[derive(Parser)]
#[command(name = "xling", version, about = "Cross-lingual sentence embedding pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct RunFlags {
    /// TOML run configuration; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Comma-separated language tags (default: all manifest languages).
    #[arg(long, value_delimiter = ',')]
    languages: Option<Vec<String>>,
    /// vanilla | one_step | two_step
    #[arg(long)]
    recipe: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Root of run-stamped artifact directories
    /// (env override: XLING_OUTPUT_DIR).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// mean | cls
    #[arg(long)]
    pooling: Option<String>,
    /// Also evaluate the full language x language grid.
    #[arg(long)]
    crosslingual: bool,
}

impl RunFlags {
    fn resolve(&self) -> xling_core::error::Result<RunConfig> {
        let overrides = Overrides {
            manifest: self.manifest.clone(),
            languages: self.languages.clone(),
            recipe: self.recipe.clone(),
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            pooling: self.pooling.clone(),
            crosslingual: if self.crosslingual { Some(true) } else { None },
        };
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load, clean, triplet-build, and mix the training corpora.
    Prepare(RunFlags),
    /// Train the configured recipe on prepared artifacts.
    Train(RunFlags),
    /// Evaluate the trained model on STS test splits.
    Eval(RunFlags),
    /// Pseudo-language benchmark: vanilla vs one-step vs two-step.
    Synthbench {
        /// Directory for the benchmark report files.
        #[arg(long, default_value = "synthbench-out")]
        output_dir: PathBuf,
        /// Comma-separated training seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Restrict training to these languages (leakage control);
        /// evaluation still covers all languages.
        #[arg(long, value_delimiter = ',')]
        train_languages: Option<Vec<String>>,
    },
    /// Render a machine-readable row file as a table.
    Report {
        /// Row file (model/recipe/lang1/lang2/metric/value/n TSV).
        rows: PathBuf,
        /// similarity_table | crosslingual_matrix | zero_shot_table
        #[arg(long, default_value = "similarity_table")]
        layout: String,
    },
}

fn parse_layout(name: &str) -> xling_core::error::Result<Layout> {
    match name {
        "similarity_table" => Ok(Layout::SimilarityTable),
        "crosslingual_matrix" => Ok(Layout::CrosslingualMatrix),
        "zero_shot_table" => Ok(Layout::ZeroShotTable),
        other => Err(xling_core::CoreError::Config(format!(
            "unknown layout {other:?}"
        ))),
    }
}

fn run(cli: Cli) -> xling_core::error::Result<()> {
    match cli.command {
        Command::Prepare(flags) => {
            let dir = commands::cmd_prepare(&flags.resolve()?)?;
            println!("prepared: {}", dir.display());
        }
        Command::Train(flags) => {
            let dir = commands::cmd_train(&flags.resolve()?)?;
            println!("trained: {}", dir.display());
        }
        Command::Eval(flags) => {
            let dir = commands::cmd_eval(&flags.resolve()?)?;
            println!("evaluated: {}", dir.display());
        }
        Command::Synthbench {
            output_dir,
            seeds,
            train_languages,
        } => {
            let mut desk = DeskConfig::default();
            if let Some(seeds) = seeds {
                desk.seeds = seeds;
            }
            desk.train_languages = train_languages;
            let dir = commands::cmd_synthbench(&desk, &output_dir)?;
            println!("synthbench: {}", dir.display());
        }
        Command::Report { rows, layout } => {
            print!("{}", commands::cmd_report(&rows, parse_layout(&layout)?)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(xling_cli::exit_code(&err) as u8)
        }
    }
}
