//! Pipeline wiring: ingest -> transform -> (estimate | roll) -> decompose ->
//! measure -> export, plus the run manifest that makes every run replayable.

use std::path::{Path, PathBuf};

use serde::Serialize;
use spillnet::connectedness::ConnectednessReport;
use spillnet::error::{Error, Result};
use spillnet::fevd::{
    fevd_cholesky, fevd_generalized, normalize, ConnectednessTable, Identification,
};
use spillnet::ingest::{load_ohlc_panel, load_panel, log_returns, range_volatility, Panel};
use spillnet::lasso::estimate_lasso;
use spillnet::risk::risk_vs_connectedness;
use spillnet::rolling::{roll, Estimator, RollingConfig, RollingSeries};
use spillnet::var::{estimate_ols, select_lag, stability_check, VarModel, VarSpec};
use spillnet::viz::{
    anchor_sequence, export::write_graph, layout, svg::render_svg, LayoutConfig, NetworkLayout,
};

use crate::config::{OutputFormat, RunConfig, Transform, VizSection};

/// What a command produced: summary lines for stdout and the artifact names
/// written under the output directory.
pub struct RunOutcome {
    pub summary: Vec<String>,
    pub artifacts: Vec<String>,
}

/// Row drops and Garman-Klass floors surfaced from ingestion.
pub struct LoadStats {
    pub rows_dropped: usize,
    pub gk_floored: usize,
}

#[derive(Serialize)]
struct StabilityInfo {
    spectral_radius: f64,
    stable: bool,
}

#[derive(Serialize)]
struct RollingInfo {
    windows_succeeded: usize,
    windows_failed: usize,
    ridge_dates: Vec<String>,
    failures: Vec<(String, String)>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config: &'a RunConfig,
    input_checksum: String,
    rows_dropped: usize,
    gk_floored: usize,
    chosen_lags: usize,
    stability: Option<StabilityInfo>,
    rolling: Option<RollingInfo>,
    artifacts: Vec<String>,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    Path::new(&config.out_dir).join(name)
}

fn write_text(
    config: &RunConfig,
    name: &str,
    text: &str,
    artifacts: &mut Vec<String>,
) -> Result<()> {
    let path = out_path(config, name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    artifacts.push(name.to_string());
    Ok(())
}

/// Ingest and transform the configured input into the analysis panel.
pub fn load_input(config: &RunConfig) -> Result<(Panel, LoadStats)> {
    let path = Path::new(&config.input);
    Ok(match config.transform {
        Transform::None => {
            let loaded = load_panel(path)?;
            (
                loaded.panel,
                LoadStats {
                    rows_dropped: loaded.rows_dropped,
                    gk_floored: 0,
                },
            )
        }
        Transform::LogReturns => {
            let loaded = load_panel(path)?;
            (
                log_returns(&loaded.panel)?,
                LoadStats {
                    rows_dropped: loaded.rows_dropped,
                    gk_floored: 0,
                },
            )
        }
        Transform::Parkinson | Transform::GarmanKlass => {
            let loaded = load_ohlc_panel(path)?;
            let estimator = config
                .transform
                .range_estimator()
                .expect("transform is range based");
            let vol = range_volatility(&loaded.ohlc, estimator)?;
            (
                vol.panel,
                LoadStats {
                    rows_dropped: loaded.rows_dropped,
                    gk_floored: vol.floored,
                },
            )
        }
    })
}

fn resolve_spec(panel: &Panel, config: &RunConfig) -> Result<VarSpec> {
    let lags = match (config.lags, &config.select_lag) {
        (Some(p), None) => p,
        (None, Some(sel)) => select_lag(panel, sel.max_lags, sel.criterion, config.intercept)?,
        _ => return Err(Error::Input("set exactly one of lags / select_lag".into())),
    };
    VarSpec::new(lags, config.intercept)
}

fn estimate(panel: &Panel, spec: VarSpec, config: &RunConfig) -> Result<VarModel> {
    match &config.estimator {
        Estimator::Ols => estimate_ols(panel, spec),
        Estimator::Lasso(lasso) => estimate_lasso(panel, spec, lasso),
    }
}

fn decompose(model: &VarModel, config: &RunConfig) -> Result<ConnectednessTable> {
    let fevd = match &config.identification {
        Identification::Generalized => fevd_generalized(model, config.horizon)?,
        Identification::Cholesky { ordering } => fevd_cholesky(model, config.horizon, ordering)?,
    };
    normalize(&fevd)
}

fn layout_config(config: &RunConfig, viz: &VizSection) -> LayoutConfig {
    // the master seed governs layout initialization
    LayoutConfig {
        seed: config.seed,
        ..viz.layout
    }
}

fn write_table_artifacts(
    config: &RunConfig,
    table: &ConnectednessTable,
    report: &ConnectednessReport,
    artifacts: &mut Vec<String>,
) -> Result<()> {
    if config.wants(OutputFormat::Csv) {
        write_text(config, "table.csv", &report.to_table_csv(), artifacts)?;
    }
    if config.wants(OutputFormat::Json) {
        write_text(config, "table.json", &table.to_json(), artifacts)?;
        write_text(config, "report.json", &report.to_json(), artifacts)?;
    }
    Ok(())
}

fn write_viz_artifacts(
    config: &RunConfig,
    viz: &VizSection,
    table: &ConnectednessTable,
    network: &NetworkLayout,
    artifacts: &mut Vec<String>,
) -> Result<()> {
    let svg_path = out_path(config, "network.svg");
    render_svg(network, &svg_path)?;
    artifacts.push("network.svg".to_string());
    for &format in &viz.graph_formats {
        let threshold = match viz.layout.edge_filter {
            spillnet::viz::EdgeFilter::MinWeight(t) => t,
            _ => 0.0,
        };
        let name = match format {
            spillnet::viz::GraphFormat::Dot => "network.dot",
            spillnet::viz::GraphFormat::Gexf => "network.gexf",
            spillnet::viz::GraphFormat::EdgeCsv => "edges.csv",
        };
        write_graph(table, format, threshold, &out_path(config, name))?;
        artifacts.push(name.to_string());
    }
    Ok(())
}

fn write_risk_artifacts(
    config: &RunConfig,
    panel: &Panel,
    table: &ConnectednessTable,
    artifacts: &mut Vec<String>,
    summary: &mut Vec<String>,
) -> Result<()> {
    if let Some(risk) = &config.risk {
        let report = risk_vs_connectedness(panel, table, &risk.mkt, &risk.tail)?;
        if config.wants(OutputFormat::Csv) {
            write_text(config, "risk.csv", &report.to_csv(), artifacts)?;
        }
        if config.wants(OutputFormat::Json) {
            write_text(config, "risk.json", &report.to_json(), artifacts)?;
        }
        summary.push(format!(
            "risk: MES~from rank correlation {:.3}, CoVaR~to rank correlation {:.3}{}",
            report.mes_from_rank_correlation,
            report.covar_to_rank_correlation,
            if report.rank_correlations_reliable {
                ""
            } else {
                " (too few labels to be reliable)"
            }
        ));
    }
    Ok(())
}

/// The full `run` pipeline. Deterministic for a fixed config, input, and seed.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(Error::Input(problems.join("; ")));
    }
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::io(Path::new(&config.out_dir), e))?;
    let input_bytes =
        std::fs::read(&config.input).map_err(|e| Error::io(Path::new(&config.input), e))?;
    let checksum = format!("fnv1a64:{:016x}", fnv1a64(&input_bytes));

    let (panel, stats) = load_input(config)?;
    let spec = resolve_spec(&panel, config)?;

    let mut artifacts = Vec::new();
    let mut summary = Vec::new();
    summary.push(format!(
        "panel: {} variables, {} observations ({} rows dropped)",
        panel.n_vars(),
        panel.n_obs(),
        stats.rows_dropped
    ));

    let mut stability_info = None;
    let mut rolling_info = None;

    if let Some(rolling_section) = &config.rolling {
        let rolling_config = RollingConfig {
            window_width: rolling_section.window,
            step: rolling_section.step,
            estimator: config.estimator.clone(),
            spec,
            horizon: config.horizon,
            identification: config.identification.clone(),
            on_failure: rolling_section.on_failure,
        };
        let series = roll(&panel, &rolling_config)?;
        summary.push(format!(
            "rolling: {} windows succeeded, {} failed, {} ridge fallbacks",
            series.tables.len(),
            series.failures.len(),
            series.ridge_dates.len()
        ));
        write_rolling_artifacts(config, &series, &mut artifacts)?;
        if let Some(viz) = &config.viz {
            let frames = anchor_sequence(&series, &layout_config(config, viz))?;
            for (idx, frame) in frames.iter().enumerate() {
                let name = format!(
                    "frames/frame_{idx:04}_{date}.svg",
                    date = series.window_end_dates[idx]
                );
                let path = out_path(config, &name);
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                render_svg(frame, &path)?;
                artifacts.push(name);
            }
        }
        let last_table = series.tables.last().expect("roll yields a table").clone();
        let last_report = series.reports.last().expect("roll yields a report").clone();
        write_table_artifacts(config, &last_table, &last_report, &mut artifacts)?;
        if let Some(viz) = &config.viz {
            let network = layout(&last_table, &layout_config(config, viz), None)?;
            write_viz_artifacts(config, viz, &last_table, &network, &mut artifacts)?;
        }
        write_risk_artifacts(config, &panel, &last_table, &mut artifacts, &mut summary)?;
        rolling_info = Some(RollingInfo {
            windows_succeeded: series.tables.len(),
            windows_failed: series.failures.len(),
            ridge_dates: series.ridge_dates.clone(),
            failures: series
                .failures
                .iter()
                .map(|f| (f.date.clone(), f.reason.clone()))
                .collect(),
        });
    } else {
        let model = estimate(&panel, spec, config)?;
        let stability = stability_check(&model);
        if !stability.stable {
            eprintln!(
                "warning: estimated model is unstable (spectral radius {:.4}); \
                 long-horizon decompositions may not settle",
                stability.spectral_radius
            );
        }
        stability_info = Some(StabilityInfo {
            spectral_radius: stability.spectral_radius,
            stable: stability.stable,
        });
        let table = decompose(&model, config)?;
        let report = ConnectednessReport::from_table(table.clone())?;
        summary.push(format!(
            "total connectedness index: {:.2}%",
            100.0 * report.total_index
        ));
        if config.wants(OutputFormat::Json) {
            write_text(config, "model.json", &model.to_json(), &mut artifacts)?;
        }
        write_table_artifacts(config, &table, &report, &mut artifacts)?;
        if let Some(viz) = &config.viz {
            let network = layout(&table, &layout_config(config, viz), None)?;
            write_viz_artifacts(config, viz, &table, &network, &mut artifacts)?;
        }
        write_risk_artifacts(config, &panel, &table, &mut artifacts, &mut summary)?;
    }

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config,
        input_checksum: checksum,
        rows_dropped: stats.rows_dropped,
        gk_floored: stats.gk_floored,
        chosen_lags: spec.lag_order,
        stability: stability_info,
        rolling: rolling_info,
        artifacts: artifacts.clone(),
    };
    let manifest_text =
        serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail");
    write_text(config, "manifest.json", &manifest_text, &mut artifacts)?;

    summary.push(format!(
        "wrote {} artifacts to {}",
        artifacts.len(),
        config.out_dir
    ));
    Ok(RunOutcome { summary, artifacts })
}

fn write_rolling_artifacts(
    config: &RunConfig,
    series: &RollingSeries,
    artifacts: &mut Vec<String>,
) -> Result<()> {
    if config.wants(OutputFormat::Csv) {
        let include_pairwise = series
            .tables
            .first()
            .map(|t| t.n_vars() <= 20)
            .unwrap_or(false);
        write_text(
            config,
            "rolling_long.csv",
            &series.to_long_csv(include_pairwise),
            artifacts,
        )?;
        for (date, table) in series.window_end_dates.iter().zip(&series.tables) {
            write_text(
                config,
                &format!("windows/table_{date}.csv"),
                &table.to_table_csv(),
                artifacts,
            )?;
        }
    }
    if config.wants(OutputFormat::Json) {
        write_text(
            config,
            "rolling.json",
            &series.to_manifest_json(),
            artifacts,
        )?;
    }
    Ok(())
}

/// `table` verb on a cached model JSON: decompose and write table artifacts
/// without re-estimating.
pub fn table_from_model(model_path: &str, config: &RunConfig) -> Result<RunOutcome> {
    if config.horizon == 0 {
        return Err(Error::Input(
            "horizon: must be set to at least 1 (there is no default)".into(),
        ));
    }
    let text =
        std::fs::read_to_string(model_path).map_err(|e| Error::io(Path::new(model_path), e))?;
    let model = VarModel::from_json(&text)?;
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::io(Path::new(&config.out_dir), e))?;
    let table = decompose(&model, config)?;
    let report = ConnectednessReport::from_table(table.clone())?;
    let mut artifacts = Vec::new();
    write_table_artifacts(config, &table, &report, &mut artifacts)?;
    if let Some(viz) = &config.viz {
        let network = layout(&table, &layout_config(config, viz), None)?;
        write_viz_artifacts(config, viz, &table, &network, &mut artifacts)?;
    }
    Ok(RunOutcome {
        summary: vec![format!(
            "total connectedness index: {:.2}% (from cached model)",
            100.0 * report.total_index
        )],
        artifacts,
    })
}

/// `graph` verb on a saved table JSON.
pub fn graph_from_table(
    table_path: &str,
    config: &RunConfig,
    viz: &VizSection,
) -> Result<RunOutcome> {
    let text =
        std::fs::read_to_string(table_path).map_err(|e| Error::io(Path::new(table_path), e))?;
    let table = ConnectednessTable::from_json(&text)?;
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::io(Path::new(&config.out_dir), e))?;
    let network = layout(&table, &layout_config(config, viz), None)?;
    let mut artifacts = Vec::new();
    write_viz_artifacts(config, viz, &table, &network, &mut artifacts)?;
    Ok(RunOutcome {
        summary: vec![format!(
            "laid out {} nodes, {} edges ({})",
            table.n_vars(),
            network.edges.len(),
            if network.converged {
                format!("converged in {} iterations", network.iterations_used)
            } else {
                "did not converge".to_string()
            }
        )],
        artifacts,
    })
}

/// `risk` verb: panel from the config, table either saved or recomputed.
pub fn risk_standalone(config: &RunConfig, table_path: Option<&str>) -> Result<RunOutcome> {
    // a saved table stands in for the whole estimation stage
    let problems: Vec<String> = config
        .validate()
        .into_iter()
        .filter(|p| table_path.is_none() || !(p.starts_with("lags:") || p.starts_with("horizon:")))
        .collect();
    if !problems.is_empty() {
        return Err(Error::Input(problems.join("; ")));
    }
    let risk = config
        .risk
        .as_ref()
        .ok_or_else(|| Error::Input("risk: no market label given (--mkt)".into()))?;
    let (panel, _) = load_input(config)?;
    let table = match table_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(Path::new(path), e))?;
            ConnectednessTable::from_json(&text)?
        }
        None => {
            let spec = resolve_spec(&panel, config)?;
            let model = estimate(&panel, spec, config)?;
            decompose(&model, config)?
        }
    };
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::io(Path::new(&config.out_dir), e))?;
    let report = risk_vs_connectedness(&panel, &table, &risk.mkt, &risk.tail)?;
    let mut artifacts = Vec::new();
    if config.wants(OutputFormat::Csv) {
        write_text(config, "risk.csv", &report.to_csv(), &mut artifacts)?;
    }
    if config.wants(OutputFormat::Json) {
        write_text(config, "risk.json", &report.to_json(), &mut artifacts)?;
    }
    Ok(RunOutcome {
        summary: vec![format!(
            "risk: MES~from rank correlation {:.3}, CoVaR~to rank correlation {:.3}",
            report.mes_from_rank_correlation, report.covar_to_rank_correlation
        )],
        artifacts,
    })
}
