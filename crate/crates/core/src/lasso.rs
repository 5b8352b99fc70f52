//! Per-equation LASSO estimation of VAR models by cyclic coordinate descent
//! with soft-thresholding, for panels too wide for least squares.
//!
//! All N equations share one lagged design matrix, so the Gram matrix is
//! computed once per fit and every equation descends on it independently
//! (covariance updates). The penalty path is log-spaced from the smallest
//! lambda that zeros every equation down to lambda_max/1000, warm-starting
//! each grid point from the previous solution with an active-set sweep
//! between full cycles. The intercept is never penalized: with an intercept
//! the problem is solved on centered data and the intercept recovered from
//! the sample means afterwards.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Panel;
use crate::linalg;
use crate::var::{VarModel, VarSpec};

/// Penalty setting: a fixed nonnegative value, or automatic selection along
/// the grid using the configured rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Fixed(f64),
    Auto,
}

impl Serialize for Penalty {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Penalty::Fixed(v) => s.serialize_f64(*v),
            Penalty::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for Penalty {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Penalty::Fixed(v)),
            Raw::Word(w) if w == "auto" => Ok(Penalty::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "lambda must be a number or \"auto\", got {w:?}"
            ))),
        }
    }
}

/// Rule for picking lambda when the penalty is `Auto`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Summed per-equation BIC; deterministic and fast.
    Bic,
    /// Cross-validation on contiguous time blocks (never shuffled folds,
    /// because observations are serially dependent).
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoConfig {
    pub lambda: Penalty,
    pub lambda_grid_size: usize,
    pub selection: Selection,
    pub cv_folds: usize,
    pub max_iter: usize,
    /// Convergence tolerance on the maximum coefficient change per cycle.
    pub tol: f64,
    /// Scale regressors to unit variance internally; coefficients are always
    /// returned on the original scale.
    pub standardize: bool,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            lambda: Penalty::Auto,
            lambda_grid_size: 50,
            selection: Selection::Bic,
            cv_folds: 5,
            max_iter: 10_000,
            tol: 1e-7,
            standardize: true,
        }
    }
}

impl LassoConfig {
    fn validate(&self) -> Result<()> {
        if let Penalty::Fixed(v) = self.lambda {
            if v.is_nan() || v < 0.0 {
                return Err(Error::Input(format!("lambda must be nonnegative, got {v}")));
            }
        }
        if self.max_iter < 1 {
            return Err(Error::Input("max_iter must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Input("tol must be positive".into()));
        }
        if self.lambda_grid_size < 2 {
            return Err(Error::Input("lambda_grid_size must be at least 2".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Input("cv_folds must be at least 2".into()));
        }
        Ok(())
    }
}

/// One grid point of the penalty path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    /// System objective: sum over equations of the penalized least-squares
    /// objective at the solution, on the working scale.
    pub objective: f64,
    /// Nonzero coefficients across all equations, intercepts included.
    pub nonzero_count: usize,
    /// Value of the configured selection criterion at this lambda.
    pub criterion_value: f64,
}

/// LASSO fit of the VAR. With `Penalty::Auto` the full path is fit and the
/// best grid point under the configured selection rule is kept.
pub fn estimate_lasso(panel: &Panel, spec: VarSpec, config: &LassoConfig) -> Result<VarModel> {
    config.validate()?;
    let design = Design::build(panel, spec, config)?;
    let lambda = match config.lambda {
        Penalty::Fixed(v) => v,
        Penalty::Auto => {
            let path = fit_path(&design, config)?;
            path.best_lambda(config.selection)
        }
    };
    let betas = solve_all_equations(&design, lambda, config, None)?;
    finish_model(panel, spec, &design, &betas.beta)
}

/// Penalty path: log-spaced grid from the system lambda_max down three
/// decades, one point per lambda with objective, sparsity, and criterion.
pub fn lambda_path(panel: &Panel, spec: VarSpec, config: &LassoConfig) -> Result<Vec<PathPoint>> {
    config.validate()?;
    let design = Design::build(panel, spec, config)?;
    let path = fit_path(&design, config)?;
    Ok(path.points)
}

// ---------------------------------------------------------------------------
// working-scale design shared by every equation
// ---------------------------------------------------------------------------

struct Design {
    /// rows x q regressors on the working scale (centered/standardized).
    x: Array2<f64>,
    /// q x q Gram matrix of `x`, row-major.
    gram: Vec<f64>,
    gram_diag: Vec<f64>,
    /// q x n cross products x_jᵀ y_i on the working scale.
    b: Array2<f64>,
    /// yᵀy per equation on the working scale.
    yy: Vec<f64>,
    /// centered targets, rows x n.
    y: Array2<f64>,
    /// raw regressor means (zeros without intercept).
    x_means: Vec<f64>,
    /// raw target means (zeros without intercept).
    y_means: Vec<f64>,
    /// per-column scale divisors (ones without standardization).
    scales: Vec<f64>,
    rows: usize,
    q: usize,
    n: usize,
    intercept: bool,
}

impl Design {
    fn build(panel: &Panel, spec: VarSpec, config: &LassoConfig) -> Result<Self> {
        let n = panel.n_vars();
        let t = panel.n_obs();
        let p = spec.lag_order;
        if t < p + 10 {
            return Err(Error::Estimation(format!(
                "insufficient sample: need T - p >= 10, got {}",
                t as isize - p as isize
            )));
        }
        let rows = t - p;
        let q = n * p;

        let mut x = Array2::<f64>::zeros((rows, q));
        for r in 0..rows {
            for lag in 1..=p {
                for j in 0..n {
                    x[[r, (lag - 1) * n + j]] = panel.values[[p + r - lag, j]];
                }
            }
        }
        let mut y = Array2::<f64>::zeros((rows, n));
        for r in 0..rows {
            for i in 0..n {
                y[[r, i]] = panel.values[[p + r, i]];
            }
        }

        let mut x_means = vec![0.0; q];
        let mut y_means = vec![0.0; n];
        if spec.include_intercept {
            for j in 0..q {
                x_means[j] = (0..rows).map(|r| x[[r, j]]).sum::<f64>() / rows as f64;
                for r in 0..rows {
                    x[[r, j]] -= x_means[j];
                }
            }
            for i in 0..n {
                y_means[i] = (0..rows).map(|r| y[[r, i]]).sum::<f64>() / rows as f64;
                for r in 0..rows {
                    y[[r, i]] -= y_means[i];
                }
            }
        }

        let mut scales = vec![1.0; q];
        if config.standardize {
            for j in 0..q {
                let ms = (0..rows).map(|r| x[[r, j]] * x[[r, j]]).sum::<f64>() / rows as f64;
                let s = ms.sqrt();
                if s <= 0.0 {
                    return Err(Error::Estimation(format!(
                        "zero-variance regressor column {j} (lag {} of variable {})",
                        j / n + 1,
                        panel.labels[j % n]
                    )));
                }
                scales[j] = s;
                for r in 0..rows {
                    x[[r, j]] /= s;
                }
            }
        }

        let gram_m = x.t().dot(&x);
        let gram: Vec<f64> = gram_m.iter().copied().collect();
        let gram_diag: Vec<f64> = (0..q).map(|j| gram_m[[j, j]]).collect();
        if let Some(j) = gram_diag.iter().position(|&g| g <= 0.0) {
            return Err(Error::Estimation(format!(
                "zero-variance regressor column {j} (lag {} of variable {})",
                j / n + 1,
                panel.labels[j % n]
            )));
        }
        let b = x.t().dot(&y);
        let yy: Vec<f64> = (0..n)
            .map(|i| (0..rows).map(|r| y[[r, i]] * y[[r, i]]).sum())
            .collect();

        Ok(Design {
            x,
            gram,
            gram_diag,
            b,
            yy,
            y,
            x_means,
            y_means,
            scales,
            rows,
            q,
            n,
            intercept: spec.include_intercept,
        })
    }

    /// Smallest lambda that zeros every penalized coefficient in the system.
    fn lambda_max(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.q {
                m = m.max(self.b[[j, i]].abs());
            }
        }
        m / self.rows as f64
    }
}

fn log_grid(lambda_max: f64, size: usize) -> Vec<f64> {
    let floor_ratio = 1e-3f64;
    (0..size)
        .map(|k| lambda_max * floor_ratio.powf(k as f64 / (size - 1) as f64))
        .collect()
}

// ---------------------------------------------------------------------------
// single-equation coordinate descent on the shared Gram matrix
// ---------------------------------------------------------------------------

fn soft_threshold(z: f64, threshold: f64) -> f64 {
    if z > threshold {
        z - threshold
    } else if z < -threshold {
        z + threshold
    } else {
        0.0
    }
}

/// One coordinate-descent problem on the shared Gram matrix.
struct CdProblem<'a> {
    gram: &'a [f64],
    diag: &'a [f64],
    b: &'a [f64],
    q: usize,
    scaled_lambda: f64,
}

/// One cyclic pass. `u` is the maintained product Gram * beta.
fn cd_sweep(problem: &CdProblem<'_>, beta: &mut [f64], u: &mut [f64], active_only: bool) -> f64 {
    let q = problem.q;
    let mut max_change = 0.0f64;
    for j in 0..q {
        if active_only && beta[j] == 0.0 {
            continue;
        }
        let rho = problem.b[j] - u[j] + problem.diag[j] * beta[j];
        let new = soft_threshold(rho, problem.scaled_lambda) / problem.diag[j];
        let change = new - beta[j];
        if change != 0.0 {
            let row = &problem.gram[j * q..(j + 1) * q];
            for (uk, gk) in u.iter_mut().zip(row.iter()) {
                *uk += gk * change;
            }
            beta[j] = new;
            let a = change.abs();
            if a > max_change {
                max_change = a;
            }
        }
    }
    max_change
}

fn cd_objective(b: &[f64], yy: f64, rows: usize, lambda: f64, beta: &[f64], u: &[f64]) -> f64 {
    let mut quad = yy;
    let mut l1 = 0.0;
    for j in 0..beta.len() {
        quad += beta[j] * (u[j] - 2.0 * b[j]);
        l1 += beta[j].abs();
    }
    0.5 * quad / rows as f64 + lambda * l1
}

fn cd_solve(
    design: &Design,
    equation: usize,
    lambda: f64,
    config: &LassoConfig,
    beta: &mut [f64],
) -> Result<Vec<f64>> {
    // returns the objective after every cycle, full and active-set alike
    let q = design.q;
    let rows = design.rows;
    let b: Vec<f64> = (0..q).map(|j| design.b[[j, equation]]).collect();
    let yy = design.yy[equation];
    let problem = CdProblem {
        gram: &design.gram,
        diag: &design.gram_diag,
        b: &b,
        q,
        scaled_lambda: lambda * rows as f64,
    };

    // rebuild u = Gram * beta from the warm start to cap drift
    let mut u = vec![0.0f64; q];
    for (j, &beta_j) in beta.iter().enumerate() {
        if beta_j != 0.0 {
            let row = &problem.gram[j * q..(j + 1) * q];
            for (uk, gk) in u.iter_mut().zip(row.iter()) {
                *uk += gk * beta_j;
            }
        }
    }

    let mut cycles = 0usize;
    let mut trace = Vec::new();
    let mut last_objective = f64::INFINITY;
    loop {
        let change = cd_sweep(&problem, beta, &mut u, false);
        cycles += 1;
        let objective = cd_objective(&b, yy, rows, lambda, beta, &u);
        debug_assert!(
            objective <= last_objective + 1e-12 * last_objective.abs().max(1.0),
            "coordinate descent objective increased: {last_objective} -> {objective}"
        );
        last_objective = objective;
        trace.push(objective);
        if change <= config.tol {
            return Ok(trace);
        }
        if cycles >= config.max_iter {
            return Err(Error::Estimation(format!(
                "equation {}: coordinate descent did not converge after {} cycles \
                 (last max coefficient change {change:.3e})",
                equation, config.max_iter
            )));
        }
        // refine on the active set until it settles, then re-verify in full
        loop {
            let change = cd_sweep(&problem, beta, &mut u, true);
            cycles += 1;
            let objective = cd_objective(&b, yy, rows, lambda, beta, &u);
            debug_assert!(objective <= last_objective + 1e-12 * last_objective.abs().max(1.0));
            last_objective = objective;
            trace.push(objective);
            if change <= config.tol {
                break;
            }
            if cycles >= config.max_iter {
                return Err(Error::Estimation(format!(
                    "equation {}: coordinate descent did not converge after {} cycles \
                     (last max coefficient change {change:.3e})",
                    equation, config.max_iter
                )));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// system-level fitting
// ---------------------------------------------------------------------------

struct SystemFit {
    /// q x n working-scale coefficients.
    beta: Array2<f64>,
    /// residual sum of squares per equation (working scale).
    rss: Vec<f64>,
    objective: f64,
    nonzero_count: usize,
}

fn solve_all_equations(
    design: &Design,
    lambda: f64,
    config: &LassoConfig,
    warm: Option<&Array2<f64>>,
) -> Result<SystemFit> {
    let (q, n, rows) = (design.q, design.n, design.rows);
    let mut beta = Array2::<f64>::zeros((q, n));
    let mut rss = vec![0.0; n];
    let mut objective = 0.0;
    let mut nonzero_count = 0usize;
    let mut work = vec![0.0f64; q];
    for eq in 0..n {
        for j in 0..q {
            work[j] = warm.map_or(0.0, |w| w[[j, eq]]);
        }
        cd_solve(design, eq, lambda, config, &mut work)?;
        // recompute u for exact bookkeeping of rss
        let mut u = vec![0.0f64; q];
        for (j, &beta_j) in work.iter().enumerate() {
            if beta_j != 0.0 {
                let row = &design.gram[j * q..(j + 1) * q];
                for (uk, gk) in u.iter_mut().zip(row.iter()) {
                    *uk += gk * beta_j;
                }
            }
        }
        let mut quad = design.yy[eq];
        let mut l1 = 0.0;
        for j in 0..q {
            quad += work[j] * (u[j] - 2.0 * design.b[[j, eq]]);
            l1 += work[j].abs();
            beta[[j, eq]] = work[j];
            if work[j] != 0.0 {
                nonzero_count += 1;
            }
        }
        rss[eq] = quad.max(0.0);
        objective += 0.5 * quad.max(0.0) / rows as f64 + lambda * l1;
        if design.intercept {
            // intercept on the original scale
            let mut c = design.y_means[eq];
            for (j, &beta_j) in work.iter().enumerate() {
                c -= beta_j / design.scales[j] * design.x_means[j];
            }
            if c != 0.0 {
                nonzero_count += 1;
            }
        }
    }
    Ok(SystemFit {
        beta,
        rss,
        objective,
        nonzero_count,
    })
}

struct PathFit {
    points: Vec<PathPoint>,
}

impl PathFit {
    fn best_lambda(&self, _selection: Selection) -> f64 {
        // criterion_value already reflects the configured rule; ties break
        // toward the larger (sparser) lambda, which comes first on the grid
        let mut best = &self.points[0];
        for p in &self.points[1..] {
            if p.criterion_value < best.criterion_value {
                best = p;
            }
        }
        best.lambda
    }
}

fn fit_path(design: &Design, config: &LassoConfig) -> Result<PathFit> {
    let lambda_max = design.lambda_max();
    if lambda_max.is_nan() || lambda_max <= 0.0 {
        return Err(Error::Estimation(
            "cannot build a penalty grid: all regressor-target correlations are zero".into(),
        ));
    }
    let grid = log_grid(lambda_max, config.lambda_grid_size);

    let cv_errors = match config.selection {
        Selection::Cv => Some(cross_validate(design, config, &grid)?),
        Selection::Bic => None,
    };

    let rows = design.rows as f64;
    let mut points = Vec::with_capacity(grid.len());
    let mut warm: Option<Array2<f64>> = None;
    for (gi, &lambda) in grid.iter().enumerate() {
        let fit = solve_all_equations(design, lambda, config, warm.as_ref())?;
        let criterion_value = match config.selection {
            Selection::Bic => {
                let mut bic = 0.0;
                for eq in 0..design.n {
                    let mut df = (0..design.q).filter(|&j| fit.beta[[j, eq]] != 0.0).count();
                    if design.intercept {
                        df += 1;
                    }
                    let mean_rss = (fit.rss[eq] / rows).max(1e-300);
                    bic += rows * mean_rss.ln() + df as f64 * rows.ln();
                }
                bic
            }
            Selection::Cv => cv_errors.as_ref().expect("computed above")[gi],
        };
        points.push(PathPoint {
            lambda,
            objective: fit.objective,
            nonzero_count: fit.nonzero_count,
            criterion_value,
        });
        warm = Some(fit.beta);
    }
    Ok(PathFit { points })
}

/// Contiguous-block cross-validation: fold k holds out one block of
/// consecutive rows; the Gram and cross products of the training set are the
/// full-sample ones minus the block's contribution. Returns the summed
/// held-out squared error per grid point.
fn cross_validate(design: &Design, config: &LassoConfig, grid: &[f64]) -> Result<Vec<f64>> {
    let (q, n, rows) = (design.q, design.n, design.rows);
    let folds = config.cv_folds;
    if rows < folds * 2 {
        return Err(Error::Estimation(format!(
            "insufficient sample for {folds}-fold cross-validation on {rows} rows"
        )));
    }
    let mut errors = vec![0.0f64; grid.len()];
    for k in 0..folds {
        let start = k * rows / folds;
        let end = (k + 1) * rows / folds;
        let held = end - start;
        let train_rows = rows - held;

        // training Gram and cross products by subtraction
        let mut gram = design.gram.clone();
        let mut b = design.b.clone();
        let mut yy = design.yy.clone();
        for r in start..end {
            for j in 0..q {
                let xj = design.x[[r, j]];
                if xj != 0.0 {
                    for l in 0..q {
                        gram[j * q + l] -= xj * design.x[[r, l]];
                    }
                }
            }
            for i in 0..n {
                let yi = design.y[[r, i]];
                for j in 0..q {
                    b[[j, i]] -= design.x[[r, j]] * yi;
                }
                yy[i] -= yi * yi;
            }
        }
        let diag: Vec<f64> = (0..q).map(|j| gram[j * q + j]).collect();
        if let Some(j) = diag.iter().position(|&g| g <= 0.0) {
            return Err(Error::Estimation(format!(
                "zero-variance regressor column {j} inside cross-validation fold {k}"
            )));
        }
        let train = Design {
            x: Array2::zeros((0, 0)), // not used by the solver
            gram,
            gram_diag: diag,
            b,
            yy,
            y: Array2::zeros((0, 0)),
            x_means: design.x_means.clone(),
            y_means: design.y_means.clone(),
            scales: design.scales.clone(),
            rows: train_rows,
            q,
            n,
            intercept: design.intercept,
        };

        let mut warm: Option<Array2<f64>> = None;
        for (gi, &lambda) in grid.iter().enumerate() {
            let fit = solve_all_equations(&train, lambda, config, warm.as_ref())?;
            // held-out squared error on the working scale
            let mut sse = 0.0;
            for r in start..end {
                for eq in 0..n {
                    let mut pred = 0.0;
                    for j in 0..q {
                        pred += design.x[[r, j]] * fit.beta[[j, eq]];
                    }
                    let e = design.y[[r, eq]] - pred;
                    sse += e * e;
                }
            }
            errors[gi] += sse;
            warm = Some(fit.beta);
        }
    }
    Ok(errors)
}

fn finish_model(
    panel: &Panel,
    spec: VarSpec,
    design: &Design,
    beta: &Array2<f64>,
) -> Result<VarModel> {
    let n = design.n;
    let p = spec.lag_order;
    let rows = design.rows;

    // back to the original scale
    let mut coefficients = Vec::with_capacity(p);
    for lag in 0..p {
        let mut phi = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let k = lag * n + j;
                phi[[i, j]] = beta[[k, i]] / design.scales[k];
            }
        }
        coefficients.push(phi);
    }
    let mut intercept = Array1::<f64>::zeros(n);
    if design.intercept {
        for i in 0..n {
            let mut c = design.y_means[i];
            for k in 0..design.q {
                c -= beta[[k, i]] / design.scales[k] * design.x_means[k];
            }
            intercept[i] = c;
        }
    }

    // residual covariance from original-scale residuals, PSD-projected
    let t = panel.n_obs();
    let mut residuals = Array2::<f64>::zeros((rows, n));
    for r in 0..rows {
        let target = t - rows + r;
        for i in 0..n {
            let mut fitted = intercept[i];
            for lag in 1..=p {
                for j in 0..n {
                    fitted += coefficients[lag - 1][[i, j]] * panel.values[[target - lag, j]];
                }
            }
            residuals[[r, i]] = panel.values[[target, i]] - fitted;
        }
    }
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
    let sigma = linalg::psd_project(&sigma)?;

    VarModel::new(
        spec,
        panel.labels.clone(),
        coefficients,
        intercept,
        sigma,
        rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::simulate_var;
    use crate::var::estimate_ols;
    use ndarray::array;

    fn well_conditioned_panel(seed: u64, t: usize) -> Panel {
        let phi = vec![array![[0.4, 0.1, 0.0], [0.05, 0.3, -0.1], [0.0, 0.2, 0.35]]];
        let sigma = array![[1.0, 0.2, 0.1], [0.2, 1.0, 0.0], [0.1, 0.0, 1.0]];
        simulate_var(&phi, &array![0.3, -0.1, 0.2], &sigma, t, 100, seed).unwrap()
    }

    #[test]
    fn zero_penalty_matches_ols() {
        let panel = well_conditioned_panel(3, 500);
        let spec = VarSpec::new(1, true).unwrap();
        let ols = estimate_ols(&panel, spec).unwrap();
        let config = LassoConfig {
            lambda: Penalty::Fixed(0.0),
            tol: 1e-10,
            max_iter: 100_000,
            ..LassoConfig::default()
        };
        let lasso = estimate_lasso(&panel, spec, &config).unwrap();
        for (a, b) in ols.coefficients[0].iter().zip(lasso.coefficients[0].iter()) {
            assert!((a - b).abs() < 1e-4, "ols {a} vs lasso {b}");
        }
        for i in 0..3 {
            assert!((ols.intercept[i] - lasso.intercept[i]).abs() < 1e-4);
        }
    }

    #[test]
    fn lambda_at_or_above_max_kills_everything() {
        let panel = well_conditioned_panel(7, 300);
        let spec = VarSpec::new(1, true).unwrap();
        let config = LassoConfig::default();
        let path = lambda_path(&panel, spec, &config).unwrap();
        let lambda_max = path[0].lambda;

        for factor in [1.0, 1.5] {
            let fit = estimate_lasso(
                &panel,
                spec,
                &LassoConfig {
                    lambda: Penalty::Fixed(lambda_max * factor),
                    ..config
                },
            )
            .unwrap();
            assert!(
                fit.coefficients[0].iter().all(|&v| v == 0.0),
                "penalized coefficients must be exactly zero at lambda >= lambda_max"
            );
        }
    }

    #[test]
    fn path_head_counts_only_intercepts() {
        let panel = well_conditioned_panel(11, 300);
        let spec = VarSpec::new(1, true).unwrap();
        let path = lambda_path(&panel, spec, &LassoConfig::default()).unwrap();
        // at lambda_max every penalized coefficient is zero, so the count is
        // exactly the number of nonzero intercepts; the simulated means are
        // away from zero so that is all three
        assert_eq!(path[0].nonzero_count, 3);
    }

    #[test]
    fn path_objective_beats_zero_vector() {
        let panel = well_conditioned_panel(13, 400);
        let spec = VarSpec::new(1, true).unwrap();
        let config = LassoConfig::default();
        let design = Design::build(&panel, spec, &config).unwrap();
        let path = lambda_path(&panel, spec, &config).unwrap();
        let zero_quadratic: f64 = design
            .yy
            .iter()
            .map(|&v| 0.5 * v / design.rows as f64)
            .sum();
        for point in &path {
            assert!(
                point.objective <= zero_quadratic + 1e-9,
                "objective {} exceeds zero-vector objective {zero_quadratic} at lambda {}",
                point.objective,
                point.lambda
            );
        }
    }

    #[test]
    fn objective_trace_is_monotone() {
        let panel = well_conditioned_panel(17, 400);
        let spec = VarSpec::new(1, true).unwrap();
        let config = LassoConfig::default();
        let design = Design::build(&panel, spec, &config).unwrap();
        for eq in 0..3 {
            let mut beta = vec![0.0; design.q];
            let trace =
                cd_solve(&design, eq, design.lambda_max() / 50.0, &config, &mut beta).unwrap();
            for w in trace.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0),
                    "objective increased from {} to {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn kkt_conditions_hold_along_path() {
        let panel = well_conditioned_panel(19, 400);
        let spec = VarSpec::new(1, true).unwrap();
        let config = LassoConfig::default();
        let design = Design::build(&panel, spec, &config).unwrap();
        let grid = log_grid(design.lambda_max(), 10);
        for &lambda in &grid {
            let fit = solve_all_equations(&design, lambda, &config, None).unwrap();
            for eq in 0..design.n {
                // gradient of the smooth part: (Gram beta - b) / rows
                let mut u = vec![0.0; design.q];
                for j in 0..design.q {
                    let beta_j = fit.beta[[j, eq]];
                    if beta_j != 0.0 {
                        let row = &design.gram[j * design.q..(j + 1) * design.q];
                        for (uk, gk) in u.iter_mut().zip(row.iter()) {
                            *uk += gk * beta_j;
                        }
                    }
                }
                for (j, &uj) in u.iter().enumerate() {
                    let grad = (design.b[[j, eq]] - uj) / design.rows as f64;
                    let beta_j = fit.beta[[j, eq]];
                    if beta_j == 0.0 {
                        assert!(
                            grad.abs() <= lambda + 1e-5,
                            "KKT violated for zero coefficient: |{grad}| > {lambda}"
                        );
                    } else {
                        assert!(
                            (grad - lambda * beta_j.signum()).abs() <= 1e-5,
                            "KKT violated for active coefficient"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn scale_equivariance_without_standardization() {
        // in a VAR the targets and the lagged regressors are the same data, so
        // doubling the panel doubles both: the objective scales by 4 at
        // lambda x 4, coefficients are unchanged, and the intercept doubles
        let panel = well_conditioned_panel(23, 300);
        let spec = VarSpec::new(1, true).unwrap();
        let lambda = 0.02;
        let base_cfg = LassoConfig {
            lambda: Penalty::Fixed(lambda),
            standardize: false,
            tol: 1e-10,
            ..LassoConfig::default()
        };
        let base = estimate_lasso(&panel, spec, &base_cfg).unwrap();

        let doubled_panel = Panel::new(
            panel.labels.clone(),
            panel.dates.clone(),
            panel.values.mapv(|v| 2.0 * v),
        )
        .unwrap();
        let doubled = estimate_lasso(
            &doubled_panel,
            spec,
            &LassoConfig {
                lambda: Penalty::Fixed(4.0 * lambda),
                ..base_cfg
            },
        )
        .unwrap();
        for (a, b) in base.coefficients[0]
            .iter()
            .zip(doubled.coefficients[0].iter())
        {
            assert!((a - b).abs() < 1e-7, "coefficients changed under rescaling");
        }
        for i in 0..3 {
            assert!((2.0 * base.intercept[i] - doubled.intercept[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_zero_variance_column() {
        let t = 60;
        let mut values = Array2::<f64>::zeros((t, 2));
        for r in 0..t {
            values[[r, 0]] = ((r * 37 % 11) as f64) / 11.0 - 0.5;
            values[[r, 1]] = 4.0; // constant column
        }
        let panel = Panel::new(
            vec!["a".into(), "b".into()],
            crate::sim::synthetic_dates(t),
            values,
        )
        .unwrap();
        let err = estimate_lasso(
            &panel,
            VarSpec::new(1, true).unwrap(),
            &LassoConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Estimation(_)));
    }

    #[test]
    fn reports_non_convergence_with_final_change() {
        let panel = well_conditioned_panel(29, 300);
        let config = LassoConfig {
            lambda: Penalty::Fixed(1e-6),
            max_iter: 1,
            tol: 1e-14,
            ..LassoConfig::default()
        };
        let err = estimate_lasso(&panel, VarSpec::new(1, true).unwrap(), &config).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("did not converge"), "{msg}");
        assert!(msg.contains("change"), "{msg}");
    }

    #[test]
    fn cv_selection_runs_and_returns_a_model() {
        let panel = well_conditioned_panel(31, 240);
        let config = LassoConfig {
            selection: Selection::Cv,
            lambda_grid_size: 12,
            ..LassoConfig::default()
        };
        let model = estimate_lasso(&panel, VarSpec::new(1, true).unwrap(), &config).unwrap();
        assert_eq!(model.n_vars(), 3);
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = LassoConfig {
            lambda: Penalty::Auto,
            ..LassoConfig::default()
        };
        let text = serde_json::to_string(&config).unwrap();
        let back: LassoConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(config, back);
        let fixed: LassoConfig =
            serde_json::from_str(r#"{"lambda": 0.25, "selection": "cv"}"#).unwrap();
        assert_eq!(fixed.lambda, Penalty::Fixed(0.25));
        assert_eq!(fixed.selection, Selection::Cv);
        assert_eq!(fixed.max_iter, 10_000);
    }
}
