use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{cmd_eval, cmd_generate, cmd_report, cmd_train};
use crate::config::{ExperimentConfig, Overrides, Variant};
use crate::data::TARGET_TEST;
use crate::error::{CliError, Result};
use crate::record::{find_records, write_json, RunRecord};

#[derive(Debug, Parser)]
#[command(name = "crowdshift", version, about = "Cross-domain crowd counting experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// BASELINE, OURS-IMG, OURS-PIX, OURS, OURS-DUP, OURS-MIRROR, OURS-90 or OURS-270.
    #[arg(long, global = true, value_parser = |s: &str| s.parse::<Variant>().map_err(|e| e.to_string()))]
    pub variant: Option<Variant>,
    /// Dataset seed for `generate`, single training seed otherwise.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Dataset root (or, for `eval`, a single split directory).
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Model checkpoint for `eval`.
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the source/target train/test splits.
    Generate,
    /// Train the selected variant for every configured seed.
    Train,
    /// Evaluate a checkpoint on a labeled split.
    Eval {
        /// Split used when --dataset points at a dataset root.
        #[arg(long, default_value = TARGET_TEST)]
        split: String,
        /// Binary region-of-interest mask as a 16-bit graymap.
        #[arg(long)]
        roi: Option<PathBuf>,
    },
    /// Summarize run records into a CSV table and density-map images.
    Report {
        /// Record files; defaults to every record.json under the run root.
        records: Vec<PathBuf>,
        /// Skip rendering predicted density maps.
        #[arg(long)]
        no_maps: bool,
    },
}

pub fn run(cli: Cli, threads: usize) -> Result<()> {
    let is_generate = matches!(cli.command, Command::Generate);
    let flags = Overrides {
        variant: cli.variant,
        seed: if is_generate { None } else { cli.seed },
        out: cli.out.clone(),
        dataset: cli.dataset.clone(),
    };
    let mut config = ExperimentConfig::resolve(cli.config.as_deref(), &flags)?;
    match cli.command {
        Command::Generate => {
            if let Some(s) = cli.seed {
                config.dataset.seed = s;
            }
            let root = cli.out.as_ref().unwrap_or(&config.data_dir);
            for m in cmd_generate(&config, root)? {
                println!("{}\t{}", m.split, m.entries.len());
            }
        }
        Command::Train => {
            for r in cmd_train(&config, threads)? {
                println!(
                    "{}\tseed {}\ttarget-test MAE {:.4}\t{}",
                    r.variant,
                    r.seed,
                    r.metrics[TARGET_TEST].mae,
                    r.artifacts.run_dir.display()
                );
            }
        }
        Command::Eval { split, roi } => {
            let checkpoint = cli
                .checkpoint
                .ok_or_else(|| CliError::Invalid("eval needs --checkpoint".into()))?;
            let dir = if config.data_dir.join("manifest.json").is_file() {
                config.data_dir.clone()
            } else {
                config.data_dir.join(&split)
            };
            let report = cmd_eval(&checkpoint, &dir, roi.as_deref(), threads)?;
            if let Some(out) = &cli.out {
                write_json(&out.join("metrics.json"), &report)?;
            }
            println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::Invalid(e.to_string()))?);
        }
        Command::Report { records, no_maps } => {
            let paths = if records.is_empty() { find_records(&config.out)? } else { records };
            let records = paths.iter().map(|p| RunRecord::load(p)).collect::<Result<Vec<_>>>()?;
            let summary = cmd_report(&records, &config.out.join("report"), !no_maps)?;
            println!("{}\t{} rows\t{} maps", summary.csv.display(), summary.rows, summary.maps.len());
        }
    }
    Ok(())
}
