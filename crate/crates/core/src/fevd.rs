//! H-step forecast-error variance decompositions and their row-normalized
//! connectedness tables.
//!
//! Two identification schemes are provided. Cholesky orthogonalizes shocks
//! with the lower-triangular factor of the residual covariance and therefore
//! depends on the variable ordering; its rows sum to one by construction.
//! The generalized scheme scales covariance-consistent shock responses and is
//! ordering-free, but its rows need not sum to one until [`normalize`] maps
//! the raw matrix to the row-stochastic table.
//!
//! Horizon convention: all sums run h = 0..H-1, so H = 1 is the one-step-ahead
//! decomposition.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::var::{ma_coefficients, VarModel};

/// How structural shocks are identified.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Identification {
    Cholesky {
        ordering: Vec<String>,
    },
    #[default]
    Generalized,
}

/// Raw H-step decomposition matrix, before row normalization.
///
/// Entry (i, j) is the share of variable i's H-step forecast-error variance
/// attributed to shocks in variable j (rows sum to one only under Cholesky
/// identification).
#[derive(Debug, Clone, PartialEq)]
pub struct FevdMatrix {
    pub horizon: usize,
    pub identification: Identification,
    pub theta: Array2<f64>,
    pub labels: Vec<String>,
}

impl FevdMatrix {
    fn new(
        horizon: usize,
        identification: Identification,
        mut theta: Array2<f64>,
        labels: Vec<String>,
    ) -> Result<Self> {
        for v in theta.iter_mut() {
            if *v < 0.0 {
                if *v >= -1e-12 {
                    *v = 0.0;
                } else {
                    return Err(Error::Numerical(format!(
                        "negative decomposition entry {v:.3e} (inputs are broken)"
                    )));
                }
            }
        }
        if let Identification::Cholesky { .. } = identification {
            for (i, row) in theta.rows().into_iter().enumerate() {
                let sum: f64 = row.sum();
                if (sum - 1.0).abs() > 1e-8 {
                    return Err(Error::Numerical(format!(
                        "cholesky decomposition row {i} sums to {sum}, expected 1"
                    )));
                }
            }
        }
        Ok(FevdMatrix {
            horizon,
            identification,
            theta,
            labels,
        })
    }
}

/// Row-stochastic connectedness table: the network adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectednessTable {
    pub horizon: usize,
    pub identification: Identification,
    pub d: Array2<f64>,
    pub labels: Vec<String>,
}

impl ConnectednessTable {
    pub fn new(
        horizon: usize,
        identification: Identification,
        d: Array2<f64>,
        labels: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if d.dim() != (n, n) {
            return Err(Error::Input("table dimension mismatch".into()));
        }
        for (i, row) in d.rows().into_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-10 {
                return Err(Error::Numerical(format!(
                    "table row {i} sums to {sum}, expected 1 within 1e-10"
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Numerical(format!(
                        "table entry ({i},{j}) = {v} outside [0,1]"
                    )));
                }
            }
        }
        Ok(ConnectednessTable {
            horizon,
            identification,
            d,
            labels,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.labels.len()
    }

    /// Full-precision JSON document.
    pub fn to_json(&self) -> String {
        let doc = TableJson {
            horizon: self.horizon,
            identification: self.identification.clone(),
            labels: self.labels.clone(),
            rows: self.d.rows().into_iter().map(|r| r.to_vec()).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("table serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TableJson =
            serde_json::from_str(text).map_err(|e| Error::Input(format!("bad table JSON: {e}")))?;
        let n = doc.labels.len();
        let mut d = Array2::<f64>::zeros((n, n));
        if doc.rows.len() != n {
            return Err(Error::Input("table JSON: row count mismatch".into()));
        }
        for (i, row) in doc.rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Input("table JSON: column count mismatch".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                d[[i, j]] = v;
            }
        }
        ConnectednessTable::new(doc.horizon, doc.identification, d, doc.labels)
    }

    /// CSV rendering of the connectedness table with a FROM column, TO row,
    /// and the grand off-diagonal sum in the bottom-right corner. Entries are
    /// percentages with two decimals.
    pub fn to_table_csv(&self) -> String {
        let n = self.n_vars();
        let mut out = String::new();
        for label in &self.labels {
            out.push(',');
            out.push_str(label);
        }
        out.push_str(",FROM\n");
        for i in 0..n {
            out.push_str(&self.labels[i]);
            let mut from = 0.0;
            for j in 0..n {
                out.push_str(&format!(",{:.2}", 100.0 * self.d[[i, j]]));
                if j != i {
                    from += self.d[[i, j]];
                }
            }
            out.push_str(&format!(",{:.2}\n", 100.0 * from));
        }
        out.push_str("TO");
        let mut grand = 0.0;
        for j in 0..n {
            let mut to = 0.0;
            for i in 0..n {
                if i != j {
                    to += self.d[[i, j]];
                }
            }
            grand += to;
            out.push_str(&format!(",{:.2}", 100.0 * to));
        }
        out.push_str(&format!(",{:.2}\n", 100.0 * grand));
        out
    }
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    horizon: usize,
    identification: Identification,
    labels: Vec<String>,
    rows: Vec<Vec<f64>>,
}

/// Decomposition under Cholesky-factor identification in the given variable
/// ordering. The residual covariance must be strictly positive definite.
pub fn fevd_cholesky(model: &VarModel, horizon: usize, ordering: &[String]) -> Result<FevdMatrix> {
    let n = model.n_vars();
    let perm = permutation_of(&model.labels, ordering)?;
    let sigma = linalg::symmetrize(&model.residual_cov);

    let (eigenvalues, _) = linalg::jacobi_eigh(&sigma)?;
    let largest = eigenvalues[n - 1];
    if eigenvalues[0] <= 1e-12 * largest.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "residual covariance not positive definite (min eigenvalue {:.3e}); \
             cholesky identification requires strict PD, generalized tolerates PSD",
            eigenvalues[0]
        )));
    }

    // permuted-space copies
    let mut sigma_p = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            sigma_p[[i, j]] = sigma[[perm[i], perm[j]]];
        }
    }
    let chol = linalg::cholesky_lower(&sigma_p, 1e-14)?;
    let ma = ma_coefficients(model, horizon)?;

    let mut numerator = Array2::<f64>::zeros((n, n));
    let mut denominator = vec![0.0f64; n];
    for a in &ma.matrices {
        let mut a_p = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                a_p[[i, j]] = a[[perm[i], perm[j]]];
            }
        }
        let impact = a_p.dot(&chol); // responses to orthogonalized unit shocks
        for i in 0..n {
            for j in 0..n {
                numerator[[i, j]] += impact[[i, j]] * impact[[i, j]];
            }
        }
        let propagated = a_p.dot(&sigma_p);
        for i in 0..n {
            let mut diag = 0.0;
            for k in 0..n {
                diag += propagated[[i, k]] * a_p[[i, k]];
            }
            denominator[i] += diag;
        }
    }

    let mut theta = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        if denominator[i] <= 0.0 {
            return Err(Error::Numerical(format!(
                "zero forecast-error variance for {}",
                model.labels[perm[i]]
            )));
        }
        for j in 0..n {
            theta[[perm[i], perm[j]]] = numerator[[i, j]] / denominator[i];
        }
    }
    FevdMatrix::new(
        horizon,
        Identification::Cholesky {
            ordering: ordering.to_vec(),
        },
        theta,
        model.labels.clone(),
    )
}

/// Decomposition under generalized identification: covariance-scaled shock
/// responses, invariant to variable ordering. Rows need not sum to one.
pub fn fevd_generalized(model: &VarModel, horizon: usize) -> Result<FevdMatrix> {
    let n = model.n_vars();
    let sigma = linalg::symmetrize(&model.residual_cov);
    for j in 0..n {
        if sigma[[j, j]] <= 0.0 {
            return Err(Error::Numerical(format!(
                "zero shock variance for {}; generalized decomposition undefined",
                model.labels[j]
            )));
        }
    }
    let ma = ma_coefficients(model, horizon)?;

    let mut numerator = Array2::<f64>::zeros((n, n));
    let mut denominator = vec![0.0f64; n];
    for a in &ma.matrices {
        let propagated = a.dot(&sigma);
        for i in 0..n {
            let mut diag = 0.0;
            for k in 0..n {
                diag += propagated[[i, k]] * a[[i, k]];
            }
            denominator[i] += diag;
            for j in 0..n {
                numerator[[i, j]] += propagated[[i, j]] * propagated[[i, j]] / sigma[[j, j]];
            }
        }
    }

    let mut theta = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        if denominator[i] <= 0.0 {
            return Err(Error::Numerical(format!(
                "zero forecast-error variance for {}",
                model.labels[i]
            )));
        }
        for j in 0..n {
            theta[[i, j]] = numerator[[i, j]] / denominator[i];
        }
    }
    FevdMatrix::new(
        horizon,
        Identification::Generalized,
        theta,
        model.labels.clone(),
    )
}

/// Row-normalize a raw decomposition into the row-stochastic table. Cholesky
/// input passes through unchanged up to rounding.
pub fn normalize(fevd: &FevdMatrix) -> Result<ConnectednessTable> {
    let n = fevd.labels.len();
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let sum: f64 = (0..n).map(|j| fevd.theta[[i, j]]).sum();
        if sum <= 0.0 {
            return Err(Error::Numerical(format!(
                "row {i} of the decomposition sums to {sum}; cannot normalize"
            )));
        }
        for j in 0..n {
            d[[i, j]] = (fevd.theta[[i, j]] / sum).clamp(0.0, 1.0);
        }
    }
    ConnectednessTable::new(
        fevd.horizon,
        fevd.identification.clone(),
        d,
        fevd.labels.clone(),
    )
}

fn permutation_of(labels: &[String], ordering: &[String]) -> Result<Vec<usize>> {
    if ordering.len() != labels.len() {
        return Err(Error::Input(format!(
            "ordering lists {} labels, model has {}",
            ordering.len(),
            labels.len()
        )));
    }
    let mut perm = Vec::with_capacity(labels.len());
    let mut seen = vec![false; labels.len()];
    for name in ordering {
        let idx = labels
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| Error::Input(format!("ordering label {name:?} not in model")))?;
        if seen[idx] {
            return Err(Error::Input(format!("ordering repeats label {name:?}")));
        }
        seen[idx] = true;
        perm.push(idx);
    }
    Ok(perm)
}
