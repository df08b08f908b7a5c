//! `evocad`: generate CAD programs from text, benchmark against a dataset,
//! or compare two meshes.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 the final
//! program did not compile, 3 the model backend could not be reached.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{BackendKind, Config, EngineKind, Overrides};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "evocad", version, about = "Evolutionary CAD program generation and mesh evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineKind>,
    /// Population size.
    #[arg(long, global = true)]
    pop: Option<usize>,
    /// Number of generations.
    #[arg(long, global = true)]
    gens: Option<usize>,
    /// Few-shot examples per initial program.
    #[arg(long, global = true)]
    shots: Option<usize>,
    /// Mutation probability.
    #[arg(long, global = true)]
    pm: Option<f64>,
    /// Selection temperature.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Individuals carried over unchanged.
    #[arg(long, global = true)]
    elites: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// More logging; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve one program for a text request.
    Generate {
        /// The request text.
        prompt: Option<String>,
        /// Read the request from a file instead.
        #[arg(long, conflicts_with = "prompt")]
        prompt_file: Option<PathBuf>,
    },
    /// Run the search on every sample of a dataset and aggregate.
    Bench {
        /// Directory with one `<id>/prompt.txt` + `<id>/ground_truth.stl` per sample.
        dataset: PathBuf,
        /// Independent runs; seeds are `seed`, `seed + 1`, ...
        #[arg(long)]
        runs: Option<usize>,
        /// Also save a multiview picture of each final program at this size.
        #[arg(long)]
        gallery: Option<usize>,
        /// Samples evaluated at once.
        #[arg(long)]
        workers: Option<usize>,
        /// Skip PCD, HDD, IoU and DSC.
        #[arg(long)]
        topology_only: bool,
    },
    /// Print every metric for a generated mesh against a reference.
    Compare {
        generated: PathBuf,
        reference: PathBuf,
    },
    /// Check the configuration and that the backend and engine respond.
    Validate,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            backend: self.backend,
            engine: self.engine,
            population: self.pop,
            generations: self.gens,
            few_shots: self.shots,
            mutation_prob: self.pm,
            lambda: self.lambda,
            elites: self.elites,
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.common.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    cfg.apply(&cli.common.overrides());
    if let Command::Bench { runs, gallery, workers, topology_only, .. } = &cli.command {
        if let Some(r) = runs {
            cfg.bench.runs = *r;
        }
        if gallery.is_some() {
            cfg.bench.gallery = *gallery;
        }
        if workers.is_some() {
            cfg.bench.workers = *workers;
        }
        if *topology_only {
            cfg.metrics.spatial = false;
        }
    }
    cfg.validate()?;
    match cli.command {
        Command::Generate { prompt, prompt_file } => commands::generate(&cfg, prompt, prompt_file),
        Command::Bench { dataset, .. } => commands::bench(&cfg, &dataset),
        Command::Compare { generated, reference } => commands::compare(&cfg, &generated, &reference),
        Command::Validate => commands::validate(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("evocad: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
