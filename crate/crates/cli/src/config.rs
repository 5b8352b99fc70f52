//! Run configuration: JSON schema, static validation, and CLI flag overlay.
//!
//! Configs come from a JSON file, from CLI flags, or both; flags win. A run
//! manifest embeds the resolved config under a `config` key, and the loader
//! accepts either shape, so a manifest can be replayed directly.

use serde::{Deserialize, Serialize};
use spillnet::fevd::Identification;
use spillnet::ingest::RangeEstimator;
use spillnet::lasso::{LassoConfig, Penalty};
use spillnet::risk::TailConfig;
use spillnet::rolling::{Estimator, FailurePolicy};
use spillnet::var::LagCriterion;
use spillnet::viz::{EdgeFilter, GraphFormat, LayoutConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    None,
    LogReturns,
    Parkinson,
    GarmanKlass,
}

impl Transform {
    pub fn range_estimator(self) -> Option<RangeEstimator> {
        match self {
            Transform::Parkinson => Some(RangeEstimator::Parkinson),
            Transform::GarmanKlass => Some(RangeEstimator::GarmanKlass),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    #[default]
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectLagConfig {
    pub max_lags: usize,
    pub criterion: LagCriterion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollingSection {
    pub window: usize,
    #[serde(default = "default_step")]
    pub step: usize,
    #[serde(default)]
    pub on_failure: FailurePolicy,
}

fn default_step() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct VizSection {
    pub layout: LayoutConfig,
    /// Additional graph exports (dot, gexf, edge_csv) alongside the SVG.
    pub graph_formats: Vec<GraphFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSection {
    pub mkt: String,
    #[serde(default)]
    pub tail: TailConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: String,
    pub format: InputFormat,
    pub transform: Transform,
    /// Fixed lag order; exactly one of `lags` / `select_lag` must be set.
    pub lags: Option<usize>,
    pub select_lag: Option<SelectLagConfig>,
    pub intercept: bool,
    pub estimator: Estimator,
    /// Decomposition horizon; always caller-chosen, like the window width.
    pub horizon: usize,
    pub identification: Identification,
    pub rolling: Option<RollingSection>,
    pub out_dir: String,
    pub formats: Vec<OutputFormat>,
    pub viz: Option<VizSection>,
    pub risk: Option<RiskSection>,
    /// Master seed for every stochastic component (layout initialization).
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: String::new(),
            format: InputFormat::Csv,
            transform: Transform::None,
            lags: None,
            select_lag: None,
            intercept: true,
            estimator: Estimator::Ols,
            horizon: 0,
            identification: Identification::Generalized,
            rolling: None,
            out_dir: "out".into(),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
            viz: None,
            risk: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Parse a config document, accepting either a bare `RunConfig` or a run
    /// manifest wrapping one under `config`.
    pub fn from_json(text: &str) -> Result<Self, String> {
        #[derive(Deserialize)]
        struct ManifestShape {
            config: RunConfig,
        }
        if let Ok(m) = serde_json::from_str::<ManifestShape>(text) {
            return Ok(m.config);
        }
        serde_json::from_str(text).map_err(|e| format!("bad config JSON: {e}"))
    }

    /// Full static validation; every problem is reported, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.input.is_empty() {
            problems.push("input: no input path given".to_string());
        }
        match (self.lags, &self.select_lag) {
            (None, None) => {
                problems.push("lags: set either a fixed lag order (lags) or select_lag".to_string())
            }
            (Some(_), Some(_)) => {
                problems.push("lags: fixed lags and select_lag are mutually exclusive".to_string())
            }
            (Some(0), None) => problems.push("lags: lag order must be at least 1".to_string()),
            (None, Some(sel)) if sel.max_lags == 0 => {
                problems.push("select_lag.max_lags: must be at least 1".to_string())
            }
            _ => {}
        }
        if self.horizon == 0 {
            problems.push("horizon: must be set to at least 1 (there is no default)".to_string());
        }
        if let Estimator::Lasso(lasso) = &self.estimator {
            if let Penalty::Fixed(v) = lasso.lambda {
                if v.is_nan() || v < 0.0 {
                    problems.push(format!(
                        "estimator.lasso.lambda: must be nonnegative, got {v}"
                    ));
                }
            }
            if lasso.max_iter < 1 {
                problems.push("estimator.lasso.max_iter: must be at least 1".to_string());
            }
            if lasso.tol.is_nan() || lasso.tol <= 0.0 {
                problems.push("estimator.lasso.tol: must be positive".to_string());
            }
        }
        if let Identification::Cholesky { ordering } = &self.identification {
            if ordering.is_empty() {
                problems
                    .push("identification: cholesky requires a full explicit ordering".to_string());
            }
        }
        if let Some(rolling) = &self.rolling {
            if rolling.window == 0 {
                problems.push("rolling.window: must be at least 1".to_string());
            }
            if rolling.step == 0 {
                problems.push("rolling.step: must be at least 1".to_string());
            }
            if let FailurePolicy::RidgeFallback { epsilon } = rolling.on_failure {
                if epsilon.is_nan() || epsilon <= 0.0 {
                    problems.push("rolling.on_failure.epsilon: must be positive".to_string());
                }
            }
        }
        if self.out_dir.is_empty() {
            problems.push("out_dir: no output directory given".to_string());
        }
        if self.formats.is_empty() {
            problems.push("formats: at least one of csv/json".to_string());
        }
        if let Some(viz) = &self.viz {
            if viz.layout.repulsion_constant.is_nan() || viz.layout.repulsion_constant <= 0.0 {
                problems.push("viz.layout.repulsion_constant: must be positive".to_string());
            }
            if viz.layout.gravity.is_nan() || viz.layout.gravity < 0.0 {
                problems.push("viz.layout.gravity: must be nonnegative".to_string());
            }
            if viz.layout.max_iterations == 0 {
                problems.push("viz.layout.max_iterations: must be at least 1".to_string());
            }
            if viz.layout.convergence_tol.is_nan() || viz.layout.convergence_tol <= 0.0 {
                problems.push("viz.layout.convergence_tol: must be positive".to_string());
            }
            if let EdgeFilter::MinWeight(w) = viz.layout.edge_filter {
                if !(0.0..1.0).contains(&w) {
                    problems.push(format!(
                        "viz.layout.edge_filter: threshold must be in [0,1), got {w}"
                    ));
                }
            }
        }
        if let Some(risk) = &self.risk {
            if risk.mkt.is_empty() {
                problems.push("risk.mkt: no market label given".to_string());
            }
            if risk.tail.p.is_nan() || risk.tail.p <= 0.0 || risk.tail.p > 0.5 {
                problems.push(format!(
                    "risk.tail.p: must be in (0, 0.5], got {}",
                    risk.tail.p
                ));
            }
            if risk.tail.min_tail_obs < 5 {
                problems.push("risk.tail.min_tail_obs: must be at least 5".to_string());
            }
        }
        problems
    }

    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }
}

/// CLI flag overrides shared by every subcommand; any flag that is set wins
/// over the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Input CSV path
    #[arg(long)]
    pub input: Option<String>,
    /// Transform: none, log_returns, parkinson, garman_klass
    #[arg(long)]
    pub transform: Option<String>,
    /// Fixed VAR lag order
    #[arg(long)]
    pub lags: Option<usize>,
    /// Select the lag order by information criterion instead of fixing it
    #[arg(long, default_value_t = false)]
    pub select_lag: bool,
    /// Largest lag order to consider with --select-lag
    #[arg(long)]
    pub max_lags: Option<usize>,
    /// Lag selection criterion: aic or bic
    #[arg(long)]
    pub criterion: Option<String>,
    /// Exclude the intercept from the model
    #[arg(long, default_value_t = false)]
    pub no_intercept: bool,
    /// Estimator: ols or lasso
    #[arg(long)]
    pub estimator: Option<String>,
    /// LASSO penalty: a number or "auto"
    #[arg(long)]
    pub lambda: Option<String>,
    /// Decomposition horizon H
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Identification: generalized or cholesky
    #[arg(long)]
    pub ident: Option<String>,
    /// Comma-separated variable ordering for cholesky identification
    #[arg(long)]
    pub ordering: Option<String>,
    /// Rolling window width in observations
    #[arg(long)]
    pub window: Option<usize>,
    /// Rolling step in observations
    #[arg(long)]
    pub step: Option<usize>,
    /// Edge weight threshold for rendering and exports
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Market label for the risk report
    #[arg(long)]
    pub mkt: Option<String>,
    /// Master seed for stochastic components
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Restrict output formats: csv or json
    #[arg(long)]
    pub format: Option<String>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) -> Result<(), String> {
        if let Some(input) = &self.input {
            config.input = input.clone();
        }
        if let Some(t) = &self.transform {
            config.transform = match t.as_str() {
                "none" => Transform::None,
                "log_returns" => Transform::LogReturns,
                "parkinson" => Transform::Parkinson,
                "garman_klass" => Transform::GarmanKlass,
                other => return Err(format!("unknown transform {other:?}")),
            };
        }
        if let Some(lags) = self.lags {
            config.lags = Some(lags);
            config.select_lag = None;
        }
        if self.select_lag || self.max_lags.is_some() || self.criterion.is_some() {
            let mut section = config.select_lag.unwrap_or(SelectLagConfig {
                max_lags: 8,
                criterion: LagCriterion::Bic,
            });
            if let Some(m) = self.max_lags {
                section.max_lags = m;
            }
            if let Some(c) = &self.criterion {
                section.criterion = match c.as_str() {
                    "aic" => LagCriterion::Aic,
                    "bic" => LagCriterion::Bic,
                    other => return Err(format!("unknown criterion {other:?}")),
                };
            }
            config.select_lag = Some(section);
            config.lags = None;
        }
        if self.no_intercept {
            config.intercept = false;
        }
        if let Some(e) = &self.estimator {
            config.estimator = match e.as_str() {
                "ols" => Estimator::Ols,
                "lasso" => match &config.estimator {
                    Estimator::Lasso(existing) => Estimator::Lasso(*existing),
                    _ => Estimator::Lasso(LassoConfig::default()),
                },
                other => return Err(format!("unknown estimator {other:?}")),
            };
        }
        if let Some(lambda) = &self.lambda {
            let penalty = if lambda == "auto" {
                Penalty::Auto
            } else {
                let v: f64 = lambda
                    .parse()
                    .map_err(|_| format!("lambda must be a number or \"auto\", got {lambda:?}"))?;
                Penalty::Fixed(v)
            };
            let mut lasso = match &config.estimator {
                Estimator::Lasso(existing) => *existing,
                _ => LassoConfig::default(),
            };
            lasso.lambda = penalty;
            config.estimator = Estimator::Lasso(lasso);
        }
        if let Some(h) = self.horizon {
            config.horizon = h;
        }
        match (self.ident.as_deref(), &self.ordering) {
            (Some("generalized"), _) => config.identification = Identification::Generalized,
            (Some("cholesky"), ordering) => {
                let ordering = ordering
                    .as_ref()
                    .map(|o| o.split(',').map(|s| s.trim().to_string()).collect())
                    .or_else(|| match &config.identification {
                        Identification::Cholesky { ordering } => Some(ordering.clone()),
                        _ => None,
                    })
                    .unwrap_or_default();
                config.identification = Identification::Cholesky { ordering };
            }
            (Some(other), _) => return Err(format!("unknown identification {other:?}")),
            (None, Some(ordering)) => {
                config.identification = Identification::Cholesky {
                    ordering: ordering.split(',').map(|s| s.trim().to_string()).collect(),
                };
            }
            (None, None) => {}
        }
        if self.window.is_some() || self.step.is_some() {
            let mut section = config.rolling.unwrap_or(RollingSection {
                window: 0,
                step: 1,
                on_failure: FailurePolicy::default(),
            });
            if let Some(w) = self.window {
                section.window = w;
            }
            if let Some(s) = self.step {
                section.step = s;
            }
            config.rolling = Some(section);
        }
        if let Some(t) = self.threshold {
            let mut viz = config.viz.clone().unwrap_or_default();
            viz.layout.edge_filter = EdgeFilter::MinWeight(t);
            config.viz = Some(viz);
        }
        if let Some(mkt) = &self.mkt {
            let tail = config.risk.as_ref().map(|r| r.tail).unwrap_or_default();
            config.risk = Some(RiskSection {
                mkt: mkt.clone(),
                tail,
            });
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            config.out_dir = dir.clone();
        }
        if let Some(f) = &self.format {
            config.formats = match f.as_str() {
                "csv" => vec![OutputFormat::Csv],
                "json" => vec![OutputFormat::Json],
                other => return Err(format!("unknown format {other:?} (csv or json)")),
            };
        }
        Ok(())
    }
}
