//! VAR(p) specification, least-squares estimation, lag selection, and the
//! moving-average representation that variance decompositions consume.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Panel;
use crate::linalg;

/// Lag order and intercept switch for a VAR(p).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSpec {
    pub lag_order: usize,
    pub include_intercept: bool,
}

impl VarSpec {
    /// Default upper bound on the lag order; larger values are possible via
    /// [`VarSpec::with_max_lag`].
    pub const DEFAULT_MAX_LAG: usize = 12;

    pub fn new(lag_order: usize, include_intercept: bool) -> Result<Self> {
        Self::with_max_lag(lag_order, include_intercept, Self::DEFAULT_MAX_LAG)
    }

    pub fn with_max_lag(lag_order: usize, include_intercept: bool, max_lag: usize) -> Result<Self> {
        if lag_order == 0 || lag_order > max_lag {
            return Err(Error::Input(format!(
                "lag order must be in 1..={max_lag}, got {lag_order}"
            )));
        }
        Ok(VarSpec {
            lag_order,
            include_intercept,
        })
    }
}

/// An estimated VAR(p): per-lag coefficient matrices, intercept, and the
/// residual covariance with its effective sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    pub spec: VarSpec,
    pub labels: Vec<String>,
    /// Coefficient matrices for lags 1..=p.
    pub coefficients: Vec<Array2<f64>>,
    /// Zeros when the spec excludes the intercept.
    pub intercept: Array1<f64>,
    pub residual_cov: Array2<f64>,
    pub sample_size: usize,
}

impl VarModel {
    pub fn new(
        spec: VarSpec,
        labels: Vec<String>,
        coefficients: Vec<Array2<f64>>,
        intercept: Array1<f64>,
        residual_cov: Array2<f64>,
        sample_size: usize,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Input("model needs at least one variable".into()));
        }
        if coefficients.len() != spec.lag_order {
            return Err(Error::Input(format!(
                "expected {} coefficient matrices, got {}",
                spec.lag_order,
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|m| m.dim() != (n, n))
            || intercept.len() != n
            || residual_cov.dim() != (n, n)
        {
            return Err(Error::Input("model dimension mismatch".into()));
        }
        let finite = coefficients
            .iter()
            .flat_map(|m| m.iter())
            .chain(intercept.iter())
            .chain(residual_cov.iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Numerical(
                "model contains NaN or infinite entries".into(),
            ));
        }
        let scale = linalg::max_abs(&residual_cov).max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..n {
                if (residual_cov[[i, j]] - residual_cov[[j, i]]).abs() > 1e-12 * scale {
                    return Err(Error::Numerical(format!(
                        "residual covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let (eigenvalues, _) = linalg::jacobi_eigh(&residual_cov)?;
        let max_eig = eigenvalues[n - 1].max(0.0);
        if eigenvalues[0] < -1e-10 * max_eig.max(f64::MIN_POSITIVE) {
            return Err(Error::Numerical(format!(
                "residual covariance is indefinite: min eigenvalue {:.3e}",
                eigenvalues[0]
            )));
        }
        Ok(VarModel {
            spec,
            labels,
            coefficients,
            intercept,
            residual_cov,
            sample_size,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.labels.len()
    }

    /// Companion-form matrix (Np x Np): coefficient blocks in the first block
    /// row, shifted identities below.
    pub fn companion_matrix(&self) -> Array2<f64> {
        let n = self.n_vars();
        let p = self.spec.lag_order;
        let mut f = Array2::<f64>::zeros((n * p, n * p));
        for (lag, phi) in self.coefficients.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    f[[i, lag * n + j]] = phi[[i, j]];
                }
            }
        }
        for i in n..n * p {
            f[[i, i - n]] = 1.0;
        }
        f
    }

    pub fn to_json(&self) -> String {
        let n = self.n_vars();
        let doc = VarModelJson {
            labels: self.labels.clone(),
            lag_order: self.spec.lag_order,
            include_intercept: self.spec.include_intercept,
            n_vars: n,
            coefficients: self
                .coefficients
                .iter()
                .map(|m| m.iter().copied().collect())
                .collect(),
            intercept: self.intercept.to_vec(),
            residual_cov: self.residual_cov.iter().copied().collect(),
            sample_size: self.sample_size,
        };
        serde_json::to_string_pretty(&doc).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: VarModelJson =
            serde_json::from_str(text).map_err(|e| Error::Input(format!("bad model JSON: {e}")))?;
        let n = doc.n_vars;
        if doc.labels.len() != n {
            return Err(Error::Input("model JSON: label count mismatch".into()));
        }
        let spec = VarSpec::with_max_lag(doc.lag_order, doc.include_intercept, usize::MAX)?;
        let mut coefficients = Vec::with_capacity(doc.coefficients.len());
        for flat in &doc.coefficients {
            coefficients.push(unflatten(flat, n)?);
        }
        let residual_cov = unflatten(&doc.residual_cov, n)?;
        VarModel::new(
            spec,
            doc.labels,
            coefficients,
            Array1::from_vec(doc.intercept),
            residual_cov,
            doc.sample_size,
        )
    }
}

/// On-disk JSON layout: matrices flattened row-major.
#[derive(Serialize, Deserialize)]
struct VarModelJson {
    labels: Vec<String>,
    lag_order: usize,
    include_intercept: bool,
    n_vars: usize,
    coefficients: Vec<Vec<f64>>,
    intercept: Vec<f64>,
    residual_cov: Vec<f64>,
    sample_size: usize,
}

fn unflatten(flat: &[f64], n: usize) -> Result<Array2<f64>> {
    if flat.len() != n * n {
        return Err(Error::Input(format!(
            "model JSON: matrix has {} entries, expected {}",
            flat.len(),
            n * n
        )));
    }
    Ok(Array2::from_shape_vec((n, n), flat.to_vec()).expect("length checked"))
}

/// Moving-average matrices A_0..A_{H-1} of the Wold representation.
#[derive(Debug, Clone, PartialEq)]
pub struct MaCoefficients {
    pub horizon: usize,
    pub matrices: Vec<Array2<f64>>,
}

/// Equation-by-equation least squares on lagged regressors.
///
/// The residual covariance uses the 1/(T-p) divisor with no degrees-of-freedom
/// correction, so the OLS and LASSO paths share one scale convention.
pub fn estimate_ols(panel: &Panel, spec: VarSpec) -> Result<VarModel> {
    estimate_ols_impl(panel, spec, None)
}

/// Least squares with a ridge term added to the regressor Gram matrix:
/// epsilon times the mean Gram diagonal, on the identity. Used as the
/// rolling-window fallback for near-singular windows.
pub fn estimate_ols_ridged(panel: &Panel, spec: VarSpec, epsilon: f64) -> Result<VarModel> {
    estimate_ols_impl(panel, spec, Some(epsilon))
}

fn estimate_ols_impl(panel: &Panel, spec: VarSpec, ridge: Option<f64>) -> Result<VarModel> {
    let fit = fit_least_squares(panel, spec, spec.lag_order, ridge)?;
    VarModel::new(
        spec,
        panel.labels.clone(),
        fit.coefficients,
        fit.intercept,
        fit.residual_cov,
        fit.effective_sample,
    )
}

pub(crate) struct LsFit {
    pub coefficients: Vec<Array2<f64>>,
    pub intercept: Array1<f64>,
    pub residual_cov: Array2<f64>,
    pub effective_sample: usize,
}

/// Shared least-squares core. Targets are rows `align..T` so that lag
/// selection can compare different `p` on one common sample; plain estimation
/// passes `align == p`.
pub(crate) fn fit_least_squares(
    panel: &Panel,
    spec: VarSpec,
    align: usize,
    ridge: Option<f64>,
) -> Result<LsFit> {
    let n = panel.n_vars();
    let t = panel.n_obs();
    let p = spec.lag_order;
    assert!(align >= p, "alignment must cover the lag order");
    if t <= align {
        return Err(Error::Estimation(format!(
            "insufficient sample: T={t} observations with {align} lags leaves nothing to fit"
        )));
    }
    let rows = t - align;
    let q = n * p + usize::from(spec.include_intercept);
    // effective sample must leave at least one residual degree of freedom
    if rows < q + 1 {
        return Err(Error::Estimation(format!(
            "insufficient sample: {rows} effective observations for {q} regressors"
        )));
    }

    // design matrix: lag blocks first, intercept column last
    let mut z = Array2::<f64>::zeros((rows, q));
    for r in 0..rows {
        let target = align + r;
        for lag in 1..=p {
            for j in 0..n {
                z[[r, (lag - 1) * n + j]] = panel.values[[target - lag, j]];
            }
        }
        if spec.include_intercept {
            z[[r, q - 1]] = 1.0;
        }
    }

    let mut gram = z.t().dot(&z);
    if let Some(eps) = ridge {
        let mean_diag = (0..q).map(|i| gram[[i, i]]).sum::<f64>() / q as f64;
        for i in 0..q {
            gram[[i, i]] += eps * mean_diag;
        }
    }
    let chol = linalg::cholesky_lower(&gram, 1e-13).map_err(|e| {
        Error::Estimation(format!(
            "rank-deficient regressor matrix (collinear columns): {e}"
        ))
    })?;

    let mut beta = Array2::<f64>::zeros((q, n));
    let mut residuals = Array2::<f64>::zeros((rows, n));
    for eq in 0..n {
        let y = Array1::from_iter((0..rows).map(|r| panel.values[[align + r, eq]]));
        let rhs = z.t().dot(&y);
        let b = linalg::cholesky_solve_vec(&chol, &rhs);
        let fitted = z.dot(&b);
        for r in 0..rows {
            residuals[[r, eq]] = y[r] - fitted[r];
        }
        for k in 0..q {
            beta[[k, eq]] = b[k];
        }
    }

    // residual cross-product, mirrored for exact symmetry
    let mut sigma = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for r in 0..rows {
                s += residuals[[r, i]] * residuals[[r, j]];
            }
            s /= rows as f64;
            sigma[[i, j]] = s;
            sigma[[j, i]] = s;
        }
    }

    let mut coefficients = Vec::with_capacity(p);
    for lag in 0..p {
        let mut phi = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                phi[[i, j]] = beta[[lag * n + j, i]];
            }
        }
        coefficients.push(phi);
    }
    let intercept = if spec.include_intercept {
        Array1::from_iter((0..n).map(|i| beta[[q - 1, i]]))
    } else {
        Array1::zeros(n)
    };

    Ok(LsFit {
        coefficients,
        intercept,
        residual_cov: sigma,
        effective_sample: rows,
    })
}

/// Information criterion for lag selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagCriterion {
    Aic,
    Bic,
}

/// Pick the lag order in 1..=max_p minimizing the criterion, with all
/// candidates fit on the common sample aligned at `max_p` lags. Ties break
/// toward the smaller order.
pub fn select_lag(
    panel: &Panel,
    max_p: usize,
    criterion: LagCriterion,
    include_intercept: bool,
) -> Result<usize> {
    if max_p == 0 {
        return Err(Error::Input("max_p must be at least 1".into()));
    }
    let n = panel.n_vars() as f64;
    let rows = panel.n_obs().saturating_sub(max_p) as f64;
    let mut best: Option<(usize, f64)> = None;
    for p in 1..=max_p {
        let spec = VarSpec::with_max_lag(p, include_intercept, max_p)?;
        let fit = fit_least_squares(panel, spec, max_p, None)?;
        let log_det = linalg::log_det_spd(&fit.residual_cov)
            .map_err(|e| Error::Numerical(format!("singular residual covariance at p={p}: {e}")))?;
        let k = (p as f64) * n * n + if include_intercept { n } else { 0.0 };
        let value = match criterion {
            LagCriterion::Aic => log_det + 2.0 * k / rows,
            LagCriterion::Bic => log_det + rows.ln() * k / rows,
        };
        if best.is_none_or(|(_, v)| value < v) {
            best = Some((p, value));
        }
    }
    Ok(best.expect("loop runs at least once").0)
}

/// Moving-average matrices: A_0 = I and A_h = sum over lags j of
/// coefficient(j) * A_{h-j}, taking A_m = 0 for m < 0.
pub fn ma_coefficients(model: &VarModel, horizon: usize) -> Result<MaCoefficients> {
    if horizon == 0 {
        return Err(Error::Input("horizon must be at least 1".into()));
    }
    let n = model.n_vars();
    let p = model.spec.lag_order;
    let mut matrices: Vec<Array2<f64>> = Vec::with_capacity(horizon);
    matrices.push(Array2::eye(n));
    for h in 1..horizon {
        let mut a = Array2::<f64>::zeros((n, n));
        for j in 1..=p.min(h) {
            a = a + model.coefficients[j - 1].dot(&matrices[h - j]);
        }
        matrices.push(a);
    }
    Ok(MaCoefficients { horizon, matrices })
}

/// Stability assessment from the companion-matrix spectral radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub spectral_radius: f64,
    pub stable: bool,
}

pub fn stability_check(model: &VarModel) -> Stability {
    let radius = linalg::spectral_radius(&model.companion_matrix());
    Stability {
        spectral_radius: radius,
        stable: radius < 1.0,
    }
}
