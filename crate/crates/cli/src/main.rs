//! Command-line engine for dynamic network connectedness measurement.
//!
//! One verb per pipeline boundary so pieces compose in shell pipelines:
//! `run` drives the whole configured pipeline, `table` produces a one-shot
//! connectedness table, `roll` the rolling paths, `graph` renders a saved
//! table, `risk` computes the tail-risk companion report, and `validate`
//! checks a config without touching data.
//!
//! Exit codes by failure category: 2 input, 3 estimation, 4 numerical, 5 io.

mod config;
mod pipeline;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spillnet::error::Error;
use spillnet::viz::GraphFormat;

use config::{Overrides, RunConfig, VizSection};
use pipeline::RunOutcome;

#[derive(Parser)]
#[command(
    name = "spillnet",
    version,
    about = "Dynamic network connectedness from VAR variance decompositions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file (a run manifest is also accepted)
    #[arg(long)]
    config: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the full configured pipeline and write a run manifest
    Run(CommonArgs),
    /// One-shot connectedness table from a panel
    Table {
        /// Cached model JSON from a previous run; skips ingestion and
        /// estimation entirely
        #[arg(long)]
        model: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Rolling connectedness paths over a sliding window
    Roll(CommonArgs),
    /// Render a connectedness table as a force-directed network
    Graph {
        /// Saved table JSON (from a previous run); computed from the
        /// pipeline flags when absent
        #[arg(long)]
        table: Option<String>,
        /// Extra graph exports: dot, gexf, edge_csv
        #[arg(long, value_delimiter = ',')]
        export: Vec<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Tail-risk estimators (MES, CoVaR) next to connectedness degrees
    Risk {
        /// Saved table JSON; computed from the pipeline flags when absent
        #[arg(long)]
        table: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Statically validate a config, listing every problem
    Validate(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(outcome) => {
            for line in outcome.summary {
                println!("{line}");
            }
            for artifact in outcome.artifacts {
                println!("  {artifact}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.category().exit_code() as u8)
        }
    }
}

fn resolve_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(std::path::Path::new(path), e))?;
            RunConfig::from_json(&text).map_err(Error::Input)?
        }
        None => RunConfig::default(),
    };
    common.overrides.apply(&mut config).map_err(Error::Input)?;
    Ok(config)
}

fn dispatch(command: Command) -> Result<RunOutcome, Error> {
    match command {
        Command::Run(common) => {
            let config = resolve_config(&common)?;
            pipeline::run(&config)
        }
        Command::Table { model, common } => {
            let mut config = resolve_config(&common)?;
            config.rolling = None;
            config.risk = None;
            match model {
                Some(path) => pipeline::table_from_model(&path, &config),
                None => pipeline::run(&config),
            }
        }
        Command::Roll(common) => {
            let config = resolve_config(&common)?;
            if config.rolling.is_none() {
                return Err(Error::Input(
                    "roll needs a window width (--window or a rolling config section)".into(),
                ));
            }
            pipeline::run(&config)
        }
        Command::Graph {
            table,
            export,
            common,
        } => {
            let config = resolve_config(&common)?;
            let mut viz = config.viz.clone().unwrap_or_else(VizSection::default);
            for name in &export {
                let format = match name.as_str() {
                    "dot" => GraphFormat::Dot,
                    "gexf" => GraphFormat::Gexf,
                    "edge_csv" => GraphFormat::EdgeCsv,
                    other => {
                        return Err(Error::Input(format!(
                            "unknown export format {other:?} (dot, gexf, edge_csv)"
                        )))
                    }
                };
                if !viz.graph_formats.contains(&format) {
                    viz.graph_formats.push(format);
                }
            }
            match table {
                Some(path) => pipeline::graph_from_table(&path, &config, &viz),
                None => {
                    let mut config = config;
                    config.viz = Some(viz);
                    config.rolling = None;
                    config.risk = None;
                    pipeline::run(&config)
                }
            }
        }
        Command::Risk { table, common } => {
            let config = resolve_config(&common)?;
            pipeline::risk_standalone(&config, table.as_deref())
        }
        Command::Validate(common) => {
            let config = resolve_config(&common)?;
            let problems = config.validate();
            if problems.is_empty() {
                Ok(RunOutcome {
                    summary: vec!["config is valid".to_string()],
                    artifacts: vec![],
                })
            } else {
                for problem in &problems {
                    eprintln!("problem: {problem}");
                }
                Err(Error::Input(format!(
                    "{} problem(s) found in the config",
                    problems.len()
                )))
            }
        }
    }
}
