//! Directional, net, and total connectedness statistics derived from a
//! row-stochastic table.
//!
//! The trade-analogy names are presentation aliases for the same numbers:
//! a from-degree is "total imports", a to-degree is "total exports", net
//! connectedness is the "multilateral trade balance", and the grand
//! off-diagonal sum is "total world exports". Internally everything is a
//! fraction in `[0,1]`; percent formatting is a display concern only.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fevd::{ConnectednessTable, Identification};

/// Display alias for the from-degree (row off-diagonal sum).
pub const FROM_DEGREE_ALIAS: &str = "total imports";
/// Display alias for the to-degree (column off-diagonal sum).
pub const TO_DEGREE_ALIAS: &str = "total exports";
/// Display alias for net connectedness (to-degree minus from-degree).
pub const NET_ALIAS: &str = "multilateral trade balance";
/// Display alias for the grand off-diagonal sum.
pub const TOTAL_ALIAS: &str = "total world exports";

/// Every table statistic in one place.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectednessReport {
    pub table: ConnectednessTable,
    /// Row off-diagonal sums: variance received from others.
    pub from_degrees: Vec<f64>,
    /// Column off-diagonal sums: variance transmitted to others.
    pub to_degrees: Vec<f64>,
    /// to-degree minus from-degree per variable; sums to zero.
    pub net: Vec<f64>,
    /// Entry (i, j) is the net transmission from i to j: `d[j,i] - d[i,j]`.
    pub pairwise_net: Array2<f64>,
    /// Grand sum of off-diagonal entries.
    pub total_sum: f64,
    /// total_sum / N: the 0-100% spillover index, the default display form.
    pub total_index: f64,
}

/// Pairwise directional connectedness from j to i: `d[i,j]`, the share of i's
/// forecast-error variance due to shocks in j ("i's imports from j").
pub fn pairwise(table: &ConnectednessTable, i: usize, j: usize) -> Result<f64> {
    let n = table.n_vars();
    if i >= n || j >= n {
        return Err(Error::Input(format!(
            "pairwise index ({i},{j}) out of bounds for {n} variables"
        )));
    }
    if i == j {
        return Err(Error::Input(
            "pairwise connectedness is defined for i != j; read d[i,i] for self-connectedness"
                .into(),
        ));
    }
    Ok(table.d[[i, j]])
}

/// Row-wise and column-wise off-diagonal sums (from-degrees, to-degrees).
pub fn degrees(table: &ConnectednessTable) -> (Vec<f64>, Vec<f64>) {
    let n = table.n_vars();
    let mut from = vec![0.0; n];
    let mut to = vec![0.0; n];
    for ((i, j), &value) in table.d.indexed_iter() {
        if i != j {
            from[i] += value;
            to[j] += value;
        }
    }
    (from, to)
}

/// Net connectedness per variable and the antisymmetric pairwise-net matrix.
pub fn net_measures(table: &ConnectednessTable) -> (Vec<f64>, Array2<f64>) {
    let n = table.n_vars();
    let (from, to) = degrees(table);
    let net: Vec<f64> = (0..n).map(|i| to[i] - from[i]).collect();
    let mut pairwise_net = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = table.d[[j, i]] - table.d[[i, j]];
            pairwise_net[[i, j]] = v;
            pairwise_net[[j, i]] = -v;
        }
    }
    (net, pairwise_net)
}

/// Grand off-diagonal sum and its scale-free index form (sum / N).
pub fn total(table: &ConnectednessTable) -> (f64, f64) {
    let (from, _) = degrees(table);
    let total_sum: f64 = from.iter().sum();
    (total_sum, total_sum / table.n_vars() as f64)
}

impl ConnectednessReport {
    pub fn from_table(table: ConnectednessTable) -> Result<Self> {
        let (from_degrees, to_degrees) = degrees(&table);
        let (net, pairwise_net) = net_measures(&table);
        let (total_sum, total_index) = total(&table);

        let net_sum: f64 = net.iter().sum();
        if net_sum.abs() > 1e-9 {
            return Err(Error::Numerical(format!(
                "net connectedness fails to balance: sum {net_sum:.3e}"
            )));
        }
        let to_total: f64 = to_degrees.iter().sum();
        if (total_sum - to_total).abs() > 1e-9 {
            return Err(Error::Numerical(
                "grand total disagrees between from- and to-degrees".into(),
            ));
        }
        Ok(ConnectednessReport {
            table,
            from_degrees,
            to_degrees,
            net,
            pairwise_net,
            total_sum,
            total_index,
        })
    }

    /// Table CSV bordered by the FROM column, TO row, NET row, and the grand
    /// off-diagonal sum in the corner cell. Percentages, two decimals.
    pub fn to_table_csv(&self) -> String {
        let n = self.table.n_vars();
        let mut out = self.table.to_table_csv();
        out.push_str("NET");
        for j in 0..n {
            out.push_str(&format!(",{:.2}", 100.0 * self.net[j]));
        }
        out.push_str(&format!(",{:.2}\n", 100.0 * self.total_index));
        out
    }

    pub fn to_json(&self) -> String {
        let doc = ReportJson {
            horizon: self.table.horizon,
            identification: self.table.identification.clone(),
            labels: self.table.labels.clone(),
            d: self
                .table
                .d
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            from_degrees: self.from_degrees.clone(),
            to_degrees: self.to_degrees.clone(),
            net: self.net.clone(),
            pairwise_net: self
                .pairwise_net
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            total_sum: self.total_sum,
            total_index: self.total_index,
            aliases: Aliases::default(),
        };
        serde_json::to_string_pretty(&doc).expect("report serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    horizon: usize,
    identification: Identification,
    labels: Vec<String>,
    d: Vec<Vec<f64>>,
    from_degrees: Vec<f64>,
    to_degrees: Vec<f64>,
    net: Vec<f64>,
    pairwise_net: Vec<Vec<f64>>,
    total_sum: f64,
    total_index: f64,
    aliases: Aliases,
}

#[derive(Serialize, Deserialize)]
struct Aliases {
    from_degrees: String,
    to_degrees: String,
    net: String,
    total_sum: String,
}

impl Default for Aliases {
    fn default() -> Self {
        Aliases {
            from_degrees: FROM_DEGREE_ALIAS.into(),
            to_degrees: TO_DEGREE_ALIAS.into(),
            net: NET_ALIAS.into(),
            total_sum: TOTAL_ALIAS.into(),
        }
    }
}
