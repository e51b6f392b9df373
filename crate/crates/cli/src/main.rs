//! `debbie`: ingest a corpus, cluster it, then chat, serve or benchmark.
//!
//! Shared settings merge as flags > `DEBBIE_*` environment > `--config`
//! TOML file > defaults. Exit codes: 0 success, 1 runtime failure,
//! 2 usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use debbie_core::clustering::Linkage;
use debbie_core::config::{parse_thresholds, Config, ConfigError, ConfigLayer};
use debbie_core::corpus::{Stance, DEFAULT_AQ_THRESHOLD};
use debbie_core::retrieval::Strategy;
use debbie_core::similarity::ScorerKind;

#[derive(Debug, Parser)]
#[command(name = "debbie", version, about = "Counter-argument retrieval for a debate chatbot")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML file with default settings.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Similarity scorer: lexical, remote or table.
    #[arg(long, global = true)]
    scorer: Option<ScorerKind>,
    /// Base URL of the remote similarity service.
    #[arg(long, global = true, value_name = "URL")]
    scorer_endpoint: Option<String>,
    /// JSONL file of precomputed pair scores for the table scorer.
    #[arg(long, global = true, value_name = "PATH")]
    scorer_table: Option<PathBuf>,
    /// Clusters per (topic, stance) pool.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Graph thresholds as accept,high,low (low <= high <= accept).
    #[arg(long, global = true, value_name = "A,H,L")]
    thresholds: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Holds indexes/ and transcripts/.
    #[arg(long, global = true, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    /// Address for `serve`.
    #[arg(long, global = true, value_name = "HOST:PORT")]
    bind: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter a raw corpus by argument quality.
    Ingest {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Keep records with aq strictly above this.
        #[arg(long, default_value_t = DEFAULT_AQ_THRESHOLD)]
        aq_threshold: f64,
        #[arg(long, value_name = "PATH")]
        output: PathBuf,
    },
    /// Build one cluster index per (topic, stance) pool.
    Cluster {
        #[arg(long, value_name = "PATH")]
        corpus: PathBuf,
        /// Defaults to <data-dir>/indexes.
        #[arg(long, value_name = "DIR")]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = Linkage::Average)]
        linkage: Linkage,
    },
    /// Debate in the terminal. Type /quit (or end input) to finish.
    Chat {
        #[arg(long)]
        topic: String,
        /// Your stance; the bot argues the opposite.
        #[arg(long)]
        stance: Stance,
        #[arg(long, default_value = "graph")]
        strategy: Strategy,
        /// Defaults to <data-dir>/indexes.
        #[arg(long, value_name = "DIR")]
        index_dir: Option<PathBuf>,
    },
    /// Run the HTTP chat API.
    Serve {
        /// Defaults to <data-dir>/indexes.
        #[arg(long, value_name = "DIR")]
        index_dir: Option<PathBuf>,
        /// Do not log requests to stdout.
        #[arg(long)]
        quiet: bool,
    },
    /// Compare retrieval strategies on comparisons and wall-clock.
    Bench {
        /// Corpus file, or a spec such as synthetic:per_stance=2000,clusters=15.
        #[arg(long)]
        corpus: String,
        #[arg(long, value_delimiter = ',', default_value = "baseline,cluster,graph")]
        methods: Vec<Strategy>,
        #[arg(long, default_value_t = debbie_core::bench::DEFAULT_REPETITIONS)]
        reps: usize,
        /// table or csv.
        #[arg(long, default_value = "table")]
        format: debbie_core::bench::ReportFormat,
        /// JSONL probes ({topic, stance, text}); defaults to generated or head-based probes.
        #[arg(long, value_name = "PATH")]
        probes: Option<PathBuf>,
        /// Probes per pool when none are given.
        #[arg(long, default_value_t = debbie_core::bench::MIN_PROBES)]
        probe_count: usize,
        /// Also write the report here.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn resolve_config(global: &GlobalArgs) -> Result<Config, CliError> {
    let flags = ConfigLayer {
        scorer: global.scorer,
        scorer_endpoint: global.scorer_endpoint.clone(),
        scorer_table: global.scorer_table.clone(),
        max_in_flight: None,
        k: global.k,
        thresholds: global.thresholds.as_deref().map(parse_thresholds).transpose().map_err(CliError::Usage)?,
        seed: global.seed,
        data_dir: global.data_dir.clone(),
        bind: global.bind.clone(),
    };
    let env = ConfigLayer::from_env(std::env::vars())?;
    let file = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("reading config file {}: {e}", path.display())))?;
            ConfigLayer::from_toml(&text, &path.display().to_string())?
        }
        None => ConfigLayer::default(),
    };
    Ok(Config::resolve(flags, env, file)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = resolve_config(&cli.global)?;
    match cli.command {
        Command::Ingest { input, aq_threshold, output } => commands::ingest(&input, aq_threshold, &output),
        Command::Cluster { corpus, output, linkage } => {
            let output = output.unwrap_or_else(|| config.index_dir());
            commands::cluster(&config, &corpus, &output, linkage)
        }
        Command::Chat { topic, stance, strategy, index_dir } => {
            let index_dir = index_dir.unwrap_or_else(|| config.index_dir());
            commands::chat(&config, &index_dir, &topic, stance, strategy)
        }
        Command::Serve { index_dir, quiet } => {
            let index_dir = index_dir.unwrap_or_else(|| config.index_dir());
            commands::serve(&config, index_dir, !quiet)
        }
        Command::Bench { corpus, methods, reps, format, probes, probe_count, output } => {
            commands::bench(&config, commands::BenchArgs { corpus, methods, reps, format, probes, probe_count, output })
        }
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on parse errors and 0 for --help/--version
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}\n\n{}\n\nFor more information, try '--help'.", Cli::command().render_usage());
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
