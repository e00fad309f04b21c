use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use ieforge::eval::{render_table, run_manifest, EvalManifest};
use ieforge::generate::GenerationMode;
use ieforge::pipeline::{self, Overrides, PipelineConfig, RunSummary};

#[derive(Parser)]
#[command(
    name = "ieforge",
    version,
    about = "Build schema-batched IE instruction corpora and score predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest, clean and generate the instruction corpus.
    Build(RunArgs),
    /// Ingest and clean only; writes cleaning reports and records.
    Audit(RunArgs),
    /// Dump the hard-negative dictionary for each dataset.
    Dict(RunArgs),
    /// Score model predictions listed in an evaluation manifest.
    Score {
        manifest: PathBuf,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated dataset names to restrict the run to.
    #[arg(long, value_delimiter = ',')]
    datasets: Option<Vec<String>>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    HardNegative,
    Traditional,
}

impl RunArgs {
    fn config(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        cfg.apply(&Overrides {
            seed: self.seed,
            output_dir: self.out.clone(),
            datasets: self.datasets.clone(),
            mode: self.mode.map(|m| match m {
                Mode::HardNegative => GenerationMode::HardNegative,
                Mode::Traditional => GenerationMode::TraditionalFullSchema,
            }),
        })?;
        Ok(cfg)
    }
}

fn print_summary(s: &RunSummary) {
    println!(
        "{:<24} {:>10} {:>11} {:>10} {:>10}",
        "dataset", "samples_in", "samples_out", "instances", "tokens"
    );
    for d in &s.datasets {
        println!(
            "{:<24} {:>10} {:>11} {:>10} {:>10}",
            d.dataset, d.samples_in, d.samples_out, d.instances, d.tokens
        );
    }
    println!("wrote {}", s.output_dir.display());
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Build(a) => print_summary(&pipeline::build(&a.config()?)?),
        Command::Audit(a) => print_summary(&pipeline::audit(&a.config()?)?),
        Command::Dict(a) => print_summary(&pipeline::dictionaries(&a.config()?)?),
        Command::Score { manifest, out } => {
            let m = EvalManifest::load(&manifest)
                .with_context(|| format!("loading {}", manifest.display()))?;
            let report = run_manifest(&m)?;
            print!("{}", render_table(&report));
            if let Some(path) = out {
                fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
