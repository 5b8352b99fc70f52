//! Seeded simulation of Gaussian VAR processes, plus synthetic date grids.
//!
//! Used to generate reproducible panels for tests, demos, and calibration
//! runs. All randomness flows through a caller-provided seed.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ingest::Panel;
use crate::linalg;

/// Strictly increasing ISO-8601 dates starting 2000-01-03 (a Monday).
pub fn synthetic_dates(n: usize) -> Vec<String> {
    date_range(2000, 1, 3, n)
}

/// `n` consecutive calendar days from the given start, formatted YYYY-MM-DD.
pub fn date_range(start_year: i32, start_month: u32, start_day: u32, n: usize) -> Vec<String> {
    let (mut y, mut m, mut d) = (start_year, start_month, start_day);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(format!("{y:04}-{m:02}-{d:02}"));
        d += 1;
        if d > days_in_month(y, m) {
            d = 1;
            m += 1;
            if m > 12 {
                m = 1;
                y += 1;
            }
        }
    }
    out
}

fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 {
                29
            } else {
                28
            }
        }
        _ => unreachable!("month out of range"),
    }
}

/// Simulate `t` observations from a Gaussian VAR with the given coefficient
/// matrices, intercept, and shock covariance. The recursion starts from zeros
/// and `burn_in` initial draws are discarded.
pub fn simulate_var(
    coefficients: &[Array2<f64>],
    intercept: &Array1<f64>,
    sigma: &Array2<f64>,
    t: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Panel> {
    let n = sigma.nrows();
    if n < 2 {
        return Err(Error::Input(
            "simulate_var needs at least 2 variables".into(),
        ));
    }
    if intercept.len() != n || coefficients.iter().any(|m| m.dim() != (n, n)) {
        return Err(Error::Input("simulate_var: dimension mismatch".into()));
    }
    let chol = linalg::cholesky_lower(&linalg::symmetrize(sigma), 1e-14)?;
    let p = coefficients.len();
    let total = t + burn_in;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history: Vec<Array1<f64>> = vec![Array1::zeros(n); p.max(1)];
    let mut rows = Array2::<f64>::zeros((t, n));
    for step in 0..total {
        let mut x = intercept.clone();
        for (lag, phi) in coefficients.iter().enumerate() {
            // states before the start of the recursion are zero
            if step > lag {
                let prev = &history[(step - lag - 1) % history.len()];
                x = x + phi.dot(prev);
            }
        }
        let z: Array1<f64> = Array1::from_iter((0..n).map(|_| {
            let draw: f64 = StandardNormal.sample(&mut rng);
            draw
        }));
        x = x + chol.dot(&z);
        if step >= burn_in {
            for i in 0..n {
                rows[[step - burn_in, i]] = x[i];
            }
        }
        let slot = step % history.len();
        history[slot] = x;
    }
    let labels = (1..=n).map(|i| format!("v{i}")).collect();
    Panel::new(labels, synthetic_dates(t), rows)
}
