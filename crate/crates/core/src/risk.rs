//! Empirical tail-risk estimators for side-by-side comparison with
//! directional connectedness: marginal expected shortfall next to
//! from-degrees, CoVaR next to to-degrees.
//!
//! Everything is nonparametric: tail events are breaches of empirical
//! quantiles (type-7, linear interpolation) and MES is a plain conditional
//! mean. VaR and CoVaR are reported as positive losses.

use serde::{Deserialize, Serialize};

use crate::connectedness::degrees;
use crate::error::{Error, Result};
use crate::fevd::ConnectednessTable;
use crate::ingest::Panel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TailConfig {
    /// Tail probability for the conditioning event (a VaR breach).
    pub p: f64,
    /// Minimum number of conditioning observations before estimating.
    pub min_tail_obs: usize,
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig {
            p: 0.05,
            min_tail_obs: 20,
        }
    }
}

impl TailConfig {
    fn validate(&self) -> Result<()> {
        if self.p.is_nan() || self.p <= 0.0 || self.p > 0.5 {
            return Err(Error::Input(format!(
                "tail probability must be in (0, 0.5], got {}",
                self.p
            )));
        }
        if self.min_tail_obs < 5 {
            return Err(Error::Input("min_tail_obs must be at least 5".into()));
        }
        Ok(())
    }
}

/// Empirical quantile, type-7 convention (linear interpolation between order
/// statistics).
pub fn quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("values must not be NaN"));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Marginal expected shortfall: the mean of the firm's return on days when
/// the market return breaches its lower p-quantile.
pub fn mes(returns_firm: &[f64], returns_market: &[f64], config: &TailConfig) -> Result<f64> {
    config.validate()?;
    if returns_firm.len() != returns_market.len() {
        return Err(Error::Input(format!(
            "series length mismatch: {} vs {}",
            returns_firm.len(),
            returns_market.len()
        )));
    }
    if returns_market.is_empty() {
        return Err(Error::Input("empty return series".into()));
    }
    let threshold = quantile(returns_market, config.p);
    let tail: Vec<f64> = returns_firm
        .iter()
        .zip(returns_market)
        .filter(|(_, &m)| m <= threshold)
        .map(|(&f, _)| f)
        .collect();
    if tail.len() < config.min_tail_obs {
        return Err(Error::Estimation(format!(
            "only {} tail observations, need at least {}",
            tail.len(),
            config.min_tail_obs
        )));
    }
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// CoVaR of the target conditional on the conditioning series being in
/// distress, all with the positive-loss sign convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarResult {
    /// Unconditional VaR of the target over the full sample.
    pub var_unconditional: f64,
    /// VaR of the target restricted to the conditioning series' breach days.
    pub covar: f64,
    /// covar minus the median-state covar (conditioning series between its
    /// 25% and 75% quantiles).
    pub delta_covar: f64,
}

pub fn covar(
    returns_target: &[f64],
    returns_conditioning: &[f64],
    config: &TailConfig,
) -> Result<CovarResult> {
    config.validate()?;
    if returns_target.len() != returns_conditioning.len() {
        return Err(Error::Input(format!(
            "series length mismatch: {} vs {}",
            returns_target.len(),
            returns_conditioning.len()
        )));
    }
    if returns_target.is_empty() {
        return Err(Error::Input("empty return series".into()));
    }
    let breach_threshold = quantile(returns_conditioning, config.p);
    let breach: Vec<f64> = paired(returns_target, returns_conditioning, |c| {
        c <= breach_threshold
    });
    if breach.len() < config.min_tail_obs {
        return Err(Error::Estimation(format!(
            "only {} breach days, need at least {}",
            breach.len(),
            config.min_tail_obs
        )));
    }
    let q25 = quantile(returns_conditioning, 0.25);
    let q75 = quantile(returns_conditioning, 0.75);
    let median_state: Vec<f64> = paired(returns_target, returns_conditioning, |c| {
        c >= q25 && c <= q75
    });
    if median_state.len() < config.min_tail_obs {
        return Err(Error::Estimation(format!(
            "only {} median-state days, need at least {}",
            median_state.len(),
            config.min_tail_obs
        )));
    }

    let var_unconditional = -quantile(returns_target, config.p);
    let covar = -quantile(&breach, config.p);
    let covar_median = -quantile(&median_state, config.p);
    Ok(CovarResult {
        var_unconditional,
        covar,
        delta_covar: covar - covar_median,
    })
}

fn paired(target: &[f64], conditioning: &[f64], keep: impl Fn(f64) -> bool) -> Vec<f64> {
    target
        .iter()
        .zip(conditioning)
        .filter(|(_, &c)| keep(c))
        .map(|(&t, _)| t)
        .collect()
}

/// Per-label MES and CoVaR next to the table's from-/to-degrees, with
/// Spearman rank correlations between each pair of columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskComparison {
    pub labels: Vec<String>,
    pub mes: Vec<f64>,
    pub from_degrees: Vec<f64>,
    pub covar: Vec<f64>,
    pub to_degrees: Vec<f64>,
    /// Spearman correlation of MES against from-degree across labels.
    pub mes_from_rank_correlation: f64,
    /// Spearman correlation of CoVaR against to-degree across labels.
    pub covar_to_rank_correlation: f64,
    /// False when there are too few labels for the rank correlations to
    /// distinguish agreement from chance (fewer than five points).
    pub rank_correlations_reliable: bool,
}

pub fn risk_vs_connectedness(
    panel: &Panel,
    table: &ConnectednessTable,
    mkt_label: &str,
    config: &TailConfig,
) -> Result<RiskComparison> {
    config.validate()?;
    let mkt_idx = panel
        .label_index(mkt_label)
        .ok_or_else(|| Error::Input(format!("market label {mkt_label:?} not in panel")))?;
    let market: Vec<f64> = (0..panel.n_obs())
        .map(|t| panel.values[[t, mkt_idx]])
        .collect();

    let (from_degrees, to_degrees) = degrees(table);
    let mut mes_values = Vec::with_capacity(table.n_vars());
    let mut covar_values = Vec::with_capacity(table.n_vars());
    for label in &table.labels {
        let idx = panel
            .label_index(label)
            .ok_or_else(|| Error::Input(format!("table label {label:?} not in panel")))?;
        let series: Vec<f64> = (0..panel.n_obs()).map(|t| panel.values[[t, idx]]).collect();
        mes_values.push(mes(&series, &market, config)?);
        covar_values.push(covar(&market, &series, config)?.covar);
    }

    let n = table.n_vars();
    let mes_from_rank_correlation = spearman(&mes_values, &from_degrees);
    let covar_to_rank_correlation = spearman(&covar_values, &to_degrees);
    Ok(RiskComparison {
        labels: table.labels.clone(),
        mes: mes_values,
        from_degrees,
        covar: covar_values,
        to_degrees,
        mes_from_rank_correlation,
        covar_to_rank_correlation,
        rank_correlations_reliable: n >= 5,
    })
}

impl RiskComparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,mes,from_degree,covar,to_degree\n");
        for i in 0..self.labels.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.labels[i],
                self.mes[i],
                self.from_degrees[i],
                self.covar[i],
                self.to_degrees[i]
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Spearman rank correlation with average ranks for ties; 0 when either side
/// has no rank variation.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = ranks(a);
    let rb = ranks(b);
    pearson(&ra, &rb)
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).expect("NaN in rank input"));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let average = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[order[k]] = average;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}
