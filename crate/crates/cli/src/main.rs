//! `cotforge` command line: one subcommand per pipeline stage.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 when a
//! stage fails (its ledger file records why).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cotforge::pipeline::{Pipeline, PipelineConfig, ProviderSetting, Stage};

#[derive(Debug, Parser)]
#[command(name = "cotforge", version, about = "Execution-grounded chain-of-thought data pipeline")]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Text-generation provider.
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderKind>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Wall-clock limit per solution x test run, in seconds.
    #[arg(long = "timeout-s", global = true)]
    timeout_s: Option<f64>,
    /// Minimum best-cluster score for a task to be verified.
    #[arg(long = "min-score", global = true)]
    min_score: Option<u64>,
    /// High-consensus threshold as a fraction of solutions x tests.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Output directory holding every stage file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concept list (JSONL) for `curate`; the built-in demo list otherwise.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Deduplicate, score and filter concepts.
    Curate,
    /// Generate task bundles from curated concepts.
    Synthesize,
    /// Build pass/fail matrices.
    Execute,
    /// Select verified solution/test pairs by dual agreement.
    Verify,
    /// Record execution traces of verified pairs.
    Trace,
    /// Generate questions and checked rationales.
    Forge,
    /// Write the forward, backward and bidirectional datasets.
    Assemble,
    /// Answerability and rated-difficulty subsetting.
    Filter,
    /// Simulate the consensus grid and write its CSV.
    ConsensusSim,
    /// Print item counts of every stage file.
    Stats,
    /// Run curate through filter.
    RunAll,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut c = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    match cli.provider {
        Some(ProviderKind::Mock) => c.provider = ProviderSetting::Named("mock".into()),
        Some(ProviderKind::Http) if !matches!(c.provider, ProviderSetting::Http(_)) => {
            bail!("--provider http needs a [provider] table in the config file");
        }
        Some(ProviderKind::Http) | None => {}
    }
    if let Some(v) = cli.seed {
        c.seed = v;
    }
    if let Some(v) = cli.workers {
        c.workers = v;
    }
    if let Some(v) = cli.timeout_s {
        c.limits.wall_timeout_s = v;
    }
    if let Some(v) = cli.min_score {
        c.min_score = v;
    }
    if let Some(v) = cli.tau {
        c.tau_fraction = v;
    }
    if let Some(v) = &cli.out {
        c.output_dir = v.clone();
    }
    c.validate()?;
    Ok(c)
}

fn stage_of(cmd: &Command) -> Option<Stage> {
    Some(match cmd {
        Command::Curate => Stage::Curate,
        Command::Synthesize => Stage::Synthesize,
        Command::Execute => Stage::Execute,
        Command::Verify => Stage::Verify,
        Command::Trace => Stage::Trace,
        Command::Forge => Stage::Forge,
        Command::Assemble => Stage::Assemble,
        Command::Filter => Stage::Filter,
        Command::ConsensusSim => Stage::ConsensusSim,
        Command::Stats | Command::RunAll => return None,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let pipeline = match load_config(&cli).and_then(|c| {
        let mut p = Pipeline::new(c).context("building pipeline")?;
        p.input = cli.input.clone();
        Ok(p)
    }) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let result = match (&cli.command, stage_of(&cli.command)) {
        (_, Some(stage)) => pipeline.run(stage).map(|r| vec![r]),
        (Command::RunAll, None) => pipeline.run_all(),
        _ => {
            for (name, n) in pipeline.stats() {
                println!("{name}\t{n}");
            }
            return ExitCode::SUCCESS;
        }
    };
    match result {
        Ok(reports) => {
            for r in reports {
                let counts: Vec<String> = r.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!("{}\t{}", r.stage, counts.join(" "));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
