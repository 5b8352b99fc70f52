//! Rolling-window estimation: re-fit, decompose, and measure over a sliding
//! window to produce dynamic connectedness paths.
//!
//! Windows are aligned on observation count, not calendar spans, and width is
//! always caller-chosen: it is the single most results-sensitive knob and the
//! library refuses to guess it. Each window is an independent computation, so
//! results never depend on evaluation order.

use serde::{Deserialize, Serialize};

use crate::connectedness::ConnectednessReport;
use crate::error::{Error, Result};
use crate::fevd::{fevd_cholesky, fevd_generalized, normalize, ConnectednessTable, Identification};
use crate::ingest::Panel;
use crate::lasso::{estimate_lasso, LassoConfig};
use crate::var::{estimate_ols, estimate_ols_ridged, VarSpec};

/// Which estimator runs inside each window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Ols,
    Lasso(LassoConfig),
}

/// What to do when a window fails to estimate or decompose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Record the failure and move on, leaving a gap.
    Skip,
    /// Retry the window once with a Gram-matrix ridge of epsilon times the
    /// mean Gram diagonal (least-squares estimator only), then record a
    /// failure if the retry also fails. Near-singular windows are common in
    /// rolling financial panels and gaps mislead more than a tiny ridge.
    RidgeFallback { epsilon: f64 },
}

impl Default for FailurePolicy {
    fn default() -> Self {
        FailurePolicy::RidgeFallback { epsilon: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub window_width: usize,
    #[serde(default = "default_step")]
    pub step: usize,
    pub estimator: Estimator,
    pub spec: VarSpec,
    pub horizon: usize,
    pub identification: Identification,
    #[serde(default)]
    pub on_failure: FailurePolicy,
}

fn default_step() -> usize {
    1
}

/// A window that produced no table, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFailure {
    pub date: String,
    pub reason: String,
}

/// Per-window tables and reports indexed by window end date, plus failure and
/// ridge-use provenance.
#[derive(Debug, Clone)]
pub struct RollingSeries {
    pub config: RollingConfig,
    /// End dates of successful windows, strictly increasing.
    pub window_end_dates: Vec<String>,
    /// Aligned with `window_end_dates`.
    pub tables: Vec<ConnectednessTable>,
    /// Aligned with `window_end_dates`.
    pub reports: Vec<ConnectednessReport>,
    pub failures: Vec<WindowFailure>,
    /// End dates of windows where the ridge fallback was applied.
    pub ridge_dates: Vec<String>,
}

/// Statistic to extract as a (date, value) path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathStatistic {
    TotalIndex,
    From(String),
    To(String),
    Net(String),
    /// `d[i,j]`: the share of `i`'s variance from shocks to `j`.
    Pairwise(String, String),
}

/// Slide a window of `window_width` observations through the panel, stepping
/// by `step`; estimate, decompose, and measure each window.
pub fn roll(panel: &Panel, config: &RollingConfig) -> Result<RollingSeries> {
    let t = panel.n_obs();
    let w = config.window_width;
    if config.step == 0 {
        return Err(Error::Input("step must be at least 1".into()));
    }
    if t < w {
        return Err(Error::Input(format!(
            "window width {w} exceeds the panel length {t}"
        )));
    }
    let min_needed = minimum_window(config, panel.n_vars());
    if w < min_needed {
        return Err(Error::Input(format!(
            "window width {w} is below the minimum {min_needed} for the chosen estimator"
        )));
    }

    let mut series = RollingSeries {
        config: config.clone(),
        window_end_dates: Vec::new(),
        tables: Vec::new(),
        reports: Vec::new(),
        failures: Vec::new(),
        ridge_dates: Vec::new(),
    };

    let mut start = 0usize;
    while start + w <= t {
        let window = panel.window(start, w);
        let end_date = window.dates.last().expect("window is nonempty").clone();
        match run_window(&window, config, None) {
            Ok((table, report)) => {
                series.window_end_dates.push(end_date);
                series.tables.push(table);
                series.reports.push(report);
            }
            Err(first_error) => {
                let retried = match (&config.on_failure, &config.estimator) {
                    (FailurePolicy::RidgeFallback { epsilon }, Estimator::Ols) => {
                        Some(run_window(&window, config, Some(*epsilon)))
                    }
                    _ => None,
                };
                match retried {
                    Some(Ok((table, report))) => {
                        series.ridge_dates.push(end_date.clone());
                        series.window_end_dates.push(end_date);
                        series.tables.push(table);
                        series.reports.push(report);
                    }
                    Some(Err(retry_error)) => series.failures.push(WindowFailure {
                        date: end_date,
                        reason: format!("{first_error}; ridge retry: {retry_error}"),
                    }),
                    None => series.failures.push(WindowFailure {
                        date: end_date,
                        reason: first_error.to_string(),
                    }),
                }
            }
        }
        start += config.step;
    }

    if series.tables.is_empty() {
        let detail = series
            .failures
            .first()
            .map(|f| format!(" (first: {})", f.reason))
            .unwrap_or_default();
        return Err(Error::Estimation(format!(
            "every rolling window failed{detail}"
        )));
    }
    Ok(series)
}

fn minimum_window(config: &RollingConfig, n_vars: usize) -> usize {
    let p = config.spec.lag_order;
    match &config.estimator {
        // effective sample must cover the regressors plus one residual
        // degree of freedom
        Estimator::Ols => p + n_vars * p + usize::from(config.spec.include_intercept) + 1,
        Estimator::Lasso(_) => p + 10,
    }
}

fn run_window(
    window: &Panel,
    config: &RollingConfig,
    ridge: Option<f64>,
) -> Result<(ConnectednessTable, ConnectednessReport)> {
    let model = match (&config.estimator, ridge) {
        (Estimator::Ols, None) => estimate_ols(window, config.spec)?,
        (Estimator::Ols, Some(eps)) => estimate_ols_ridged(window, config.spec, eps)?,
        (Estimator::Lasso(lasso_config), _) => estimate_lasso(window, config.spec, lasso_config)?,
    };
    let fevd = match &config.identification {
        Identification::Cholesky { ordering } => fevd_cholesky(&model, config.horizon, ordering)?,
        Identification::Generalized => fevd_generalized(&model, config.horizon)?,
    };
    let table = normalize(&fevd)?;
    let report = ConnectednessReport::from_table(table.clone())?;
    Ok((table, report))
}

/// Pull one statistic's (date, value) path; skipped windows are simply absent.
pub fn extract_path(
    series: &RollingSeries,
    statistic: &PathStatistic,
) -> Result<Vec<(String, f64)>> {
    let labels = match series.tables.first() {
        Some(t) => &t.labels,
        None => return Ok(Vec::new()),
    };
    let index_of = |label: &str| -> Result<usize> {
        labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Input(format!("unknown label {label:?}")))
    };
    let mut out = Vec::with_capacity(series.reports.len());
    for (date, report) in series.window_end_dates.iter().zip(&series.reports) {
        let value = match statistic {
            PathStatistic::TotalIndex => report.total_index,
            PathStatistic::From(label) => report.from_degrees[index_of(label)?],
            PathStatistic::To(label) => report.to_degrees[index_of(label)?],
            PathStatistic::Net(label) => report.net[index_of(label)?],
            PathStatistic::Pairwise(i, j) => report.table.d[[index_of(i)?, index_of(j)?]],
        };
        out.push((date.clone(), value));
    }
    Ok(out)
}

impl RollingSeries {
    /// Long-format CSV: date,statistic,from_label,to_label,value.
    ///
    /// Directional semantics: a pairwise row (from_label=j, to_label=i)
    /// carries `d[i,j]`, the flow of variance from shocks in j into i. Degree
    /// rows put the subject label on the side matching their direction.
    pub fn to_long_csv(&self, include_pairwise: bool) -> String {
        let mut out = String::from("date,statistic,from_label,to_label,value\n");
        for (date, report) in self.window_end_dates.iter().zip(&self.reports) {
            let labels = &report.table.labels;
            out.push_str(&format!(
                "{date},total_index,,,{v}\n",
                v = report.total_index
            ));
            for (i, label) in labels.iter().enumerate() {
                out.push_str(&format!(
                    "{date},from_degree,,{label},{v}\n",
                    v = report.from_degrees[i]
                ));
                out.push_str(&format!(
                    "{date},to_degree,{label},,{v}\n",
                    v = report.to_degrees[i]
                ));
                out.push_str(&format!("{date},net,{label},,{v}\n", v = report.net[i]));
            }
            if include_pairwise {
                for i in 0..labels.len() {
                    for j in 0..labels.len() {
                        if i != j {
                            out.push_str(&format!(
                                "{date},pairwise,{from},{to},{v}\n",
                                from = labels[j],
                                to = labels[i],
                                v = report.table.d[[i, j]]
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    /// Provenance manifest: config plus which windows failed or needed ridge.
    pub fn to_manifest_json(&self) -> String {
        #[derive(Serialize)]
        struct Manifest<'a> {
            config: &'a RollingConfig,
            windows_succeeded: usize,
            windows_failed: usize,
            window_end_dates: &'a [String],
            ridge_dates: &'a [String],
            failures: &'a [WindowFailure],
        }
        serde_json::to_string_pretty(&Manifest {
            config: &self.config,
            windows_succeeded: self.tables.len(),
            windows_failed: self.failures.len(),
            window_end_dates: &self.window_end_dates,
            ridge_dates: &self.ridge_dates,
            failures: &self.failures,
        })
        .expect("manifest serialization cannot fail")
    }
}
