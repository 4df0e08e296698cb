use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use geovqa_core::config::PipelineConfig;
use geovqa_core::pipeline;
use geovqa_core::Error;

/// Builds a remote-sensing visual question answering dataset from annotated imagery.
#[derive(Debug, Parser)]
#[command(name = "geovqa", version)]
struct Cli {
    /// Pipeline config document.
    #[arg(long, short, env = "GEOVQA_CONFIG", default_value = "config.json", global = true)]
    config: PathBuf,

    /// Worker threads; 0 uses every core. Outputs do not depend on this value.
    #[arg(long, short, default_value_t = 0, global = true)]
    jobs: usize,

    /// Overrides the configured output directory (relative to the working directory).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the config and check every referenced input.
    Validate,
    /// Cut VHR tiles into patches, locate them and choose MS context.
    Tile,
    /// Deburst SAR scenes and write normalized SAR patches.
    SarPrep {
        /// Reuse persisted clip statistics instead of recomputing them.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Generate candidate question/answer pairs.
    Generate,
    /// Select a balanced subset of the candidates.
    Balance,
    /// Assign patches to train/val/test.
    Split,
    /// Write the split files and the answer vocabulary.
    Export,
    /// Summarize the exported dataset.
    Stats,
    /// Run every step in order.
    All,
    /// Write the miniworld demo inputs into a directory.
    Fixture {
        dir: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn load_config(cli: &Cli) -> geovqa_core::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::from_file(&cli.config)?;
    if let Some(out) = &cli.output {
        let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
        cfg.output_dir = cwd.join(out);
    }
    Ok(cfg)
}

fn to_value<T: serde::Serialize>(v: T) -> geovqa_core::Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::json("summary", e))
}

fn execute(cli: &Cli) -> geovqa_core::Result<Value> {
    if let Command::Fixture { dir, seed } = &cli.command {
        let config = geovqa_core::fixture::write_miniworld(dir, *seed)?;
        return Ok(json!({"command": "fixture", "config": config}));
    }
    let cfg = load_config(cli)?;
    let summary = match &cli.command {
        Command::Validate => {
            cfg.validate()?;
            json!({"config_hash": cfg.hash()?})
        }
        Command::Tile => json!({"patches": pipeline::tile(&cfg)?.patches.len()}),
        Command::SarPrep { stats } => to_value(pipeline::sar_prep(&cfg, stats.as_deref())?)?,
        Command::Generate => json!({"candidates": pipeline::generate(&cfg)?.len()}),
        Command::Balance => {
            let (selected, report) = pipeline::run_balance(&cfg)?;
            json!({"selected": selected.len(), "candidates": report.candidates})
        }
        Command::Split => to_value(pipeline::run_split(&cfg)?.sizes)?,
        Command::Export => to_value(pipeline::run_export(&cfg)?)?,
        Command::Stats => {
            let s = pipeline::run_stats(&cfg)?;
            json!({"images": s.images, "questions": s.questions, "question_types": s.question_types, "unique_answers": s.unique_answers})
        }
        Command::All => {
            cfg.validate()?;
            let s = pipeline::run_all(&cfg)?;
            json!({"images": s.images, "questions": s.questions, "question_types": s.question_types, "unique_answers": s.unique_answers})
        }
        Command::Fixture { .. } => unreachable!("handled above"),
    };
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}", json!({"error": {"kind": "runtime", "message": e.to_string()}}));
            return ExitCode::from(3);
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            // 2: inputs failed validation, 3: failure while running.
            let code = if e.is_validation() { 2 } else { 3 };
            eprintln!("{}", json!({"error": {"kind": e.kind(), "message": e.to_string(), "exit_code": code}}));
            ExitCode::from(code)
        }
    }
}
