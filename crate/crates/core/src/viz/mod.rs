//! Force-directed rendering of connectedness tables as weighted directed
//! networks.
//!
//! The simulation seeks the steady state where forces balance: every node
//! pair repels with magnitude k_r / distance, every kept edge attracts its
//! endpoints like a spring with force (edge weight) x distance, and a gentle
//! gravity pulls nodes toward the centroid so disconnected components do not
//! fly apart. Edge weight is fixed as the mean of the two directed table
//! entries; direction shows up only in rendering. Warm-starting a layout from
//! the previous window's result anchors a rolling sequence of frames into a
//! temporally coherent animation.

pub mod export;
pub mod svg;

pub use export::GraphFormat;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::connectedness::{degrees, net_measures};
use crate::error::{Error, Result};
use crate::fevd::ConnectednessTable;
use crate::rolling::RollingSeries;

/// Which symmetric edges are kept for the spring simulation and rendering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeFilter {
    /// Keep the strongest `multiple * N` edges; dense generalized tables have
    /// N(N-1) nonzero entries and become unreadable ink otherwise.
    TopMultiple(usize),
    /// Keep edges whose symmetric weight exceeds the threshold; the same
    /// threshold gates the per-direction arrows at render time.
    MinWeight(f64),
}

impl Default for EdgeFilter {
    fn default() -> Self {
        EdgeFilter::TopMultiple(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub repulsion_constant: f64,
    pub gravity: f64,
    pub max_iterations: usize,
    /// Convergence tolerance on the maximum node displacement per iteration,
    /// in layout units.
    pub convergence_tol: f64,
    pub seed: u64,
    pub edge_filter: EdgeFilter,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            repulsion_constant: 10.0,
            gravity: 0.05,
            max_iterations: 2000,
            convergence_tol: 1e-4,
            seed: 0,
            edge_filter: EdgeFilter::default(),
        }
    }
}

impl LayoutConfig {
    fn validate(&self) -> Result<()> {
        if self.repulsion_constant.is_nan() || self.repulsion_constant <= 0.0 {
            return Err(Error::Input("repulsion constant must be positive".into()));
        }
        if self.gravity.is_nan() || self.gravity < 0.0 {
            return Err(Error::Input("gravity must be nonnegative".into()));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol <= 0.0 {
            return Err(Error::Input(
                "convergence tolerance must be positive".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::Input("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// A kept undirected edge `a < b` with its symmetric spring weight and the two
/// directed table entries behind it. `a_from_b` is `d[a,b]`, the flow b -> a.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
    pub a_from_b: f64,
    pub b_from_a: f64,
}

/// A rendered-network snapshot: positions, visual attributes, and the kept
/// edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub labels: Vec<String>,
    pub positions: Vec<(f64, f64)>,
    /// Proportional to to-degree (transmitters drawn prominent).
    pub node_sizes: Vec<f64>,
    /// Net connectedness, rendered on a diverging color scale.
    pub node_colors: Vec<f64>,
    pub edges: Vec<Edge>,
    /// Directed entries at or below this are not drawn as arrows.
    pub directed_threshold: f64,
    pub converged: bool,
    pub iterations_used: usize,
}

fn build_edges(table: &ConnectednessTable, filter: EdgeFilter) -> (Vec<Edge>, f64) {
    let n = table.n_vars();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let a_from_b = table.d[[a, b]];
            let b_from_a = table.d[[b, a]];
            let weight = 0.5 * (a_from_b + b_from_a);
            if weight > 0.0 {
                edges.push(Edge {
                    a,
                    b,
                    weight,
                    a_from_b,
                    b_from_a,
                });
            }
        }
    }
    match filter {
        EdgeFilter::MinWeight(threshold) => {
            edges.retain(|e| e.weight > threshold);
            (edges, threshold)
        }
        EdgeFilter::TopMultiple(multiple) => {
            edges.sort_by(|x, y| {
                y.weight
                    .partial_cmp(&x.weight)
                    .expect("weights are finite")
                    .then(x.a.cmp(&y.a))
                    .then(x.b.cmp(&y.b))
            });
            edges.truncate(multiple * n);
            edges.sort_by(|x, y| x.a.cmp(&y.a).then(x.b.cmp(&y.b)));
            (edges, 0.0)
        }
    }
}

/// Run the force simulation for one table. Positions start from `anchor`
/// when provided (matched by label), otherwise seeded-random on the unit
/// circle. Non-convergence within `max_iterations` is flagged, not an error.
pub fn layout(
    table: &ConnectednessTable,
    config: &LayoutConfig,
    anchor: Option<&NetworkLayout>,
) -> Result<NetworkLayout> {
    config.validate()?;
    let n = table.n_vars();
    if n < 2 {
        return Err(Error::Input("layout needs at least 2 nodes".into()));
    }
    let (edges, directed_threshold) = build_edges(table, config.edge_filter);

    // initial placement: anchored labels keep their positions, the rest land
    // on the unit circle at seeded-random angles
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut positions: Vec<(f64, f64)> = Vec::with_capacity(n);
    for label in &table.labels {
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let fallback = (angle.cos(), angle.sin());
        let anchored = anchor.and_then(|prev| {
            prev.labels
                .iter()
                .position(|l| l == label)
                .map(|idx| prev.positions[idx])
        });
        positions.push(anchored.unwrap_or(fallback));
    }

    const SPEED: f64 = 0.1;
    const MAX_STEP: f64 = 0.5;
    let mut forces = vec![(0.0f64, 0.0f64); n];
    let mut converged = false;
    let mut iterations_used = 0;
    for iteration in 0..config.max_iterations {
        for f in forces.iter_mut() {
            *f = (0.0, 0.0);
        }
        // pairwise repulsion
        for i in 0..n {
            for j in (i + 1)..n {
                let (ux, uy, dist) = separation(positions[i], positions[j], i + j);
                let magnitude = config.repulsion_constant / dist;
                forces[i].0 += ux * magnitude;
                forces[i].1 += uy * magnitude;
                forces[j].0 -= ux * magnitude;
                forces[j].1 -= uy * magnitude;
            }
        }
        // spring attraction along kept edges
        for e in &edges {
            let (ux, uy, dist) = separation(positions[e.a], positions[e.b], e.a + e.b);
            let magnitude = e.weight * dist;
            forces[e.a].0 -= ux * magnitude;
            forces[e.a].1 -= uy * magnitude;
            forces[e.b].0 += ux * magnitude;
            forces[e.b].1 += uy * magnitude;
        }
        // gravity toward the centroid
        if config.gravity > 0.0 {
            let cx = positions.iter().map(|p| p.0).sum::<f64>() / n as f64;
            let cy = positions.iter().map(|p| p.1).sum::<f64>() / n as f64;
            for i in 0..n {
                forces[i].0 += config.gravity * (cx - positions[i].0);
                forces[i].1 += config.gravity * (cy - positions[i].1);
            }
        }
        // apply capped displacements after all forces are accumulated
        let mut max_displacement = 0.0f64;
        for i in 0..n {
            let mut dx = SPEED * forces[i].0;
            let mut dy = SPEED * forces[i].1;
            let step = (dx * dx + dy * dy).sqrt();
            if step > MAX_STEP {
                dx *= MAX_STEP / step;
                dy *= MAX_STEP / step;
            }
            positions[i].0 += dx;
            positions[i].1 += dy;
            max_displacement = max_displacement.max(step.min(MAX_STEP));
        }
        iterations_used = iteration + 1;
        if max_displacement < config.convergence_tol {
            converged = true;
            break;
        }
    }

    let (_, to_degrees) = degrees(table);
    let (net, _) = net_measures(table);
    Ok(NetworkLayout {
        labels: table.labels.clone(),
        positions,
        node_sizes: to_degrees,
        node_colors: net,
        edges,
        directed_threshold,
        converged,
        iterations_used,
    })
}

/// Unit vector from `q` toward `p` plus the distance, with a deterministic
/// fallback direction for coincident points.
fn separation(p: (f64, f64), q: (f64, f64), salt: usize) -> (f64, f64, f64) {
    let dx = p.0 - q.0;
    let dy = p.1 - q.1;
    let dist = (dx * dx + dy * dy).sqrt();
    if dist < 1e-9 {
        let angle = salt as f64 * 2.399963229728653; // golden angle
        (angle.cos(), angle.sin(), 1e-9)
    } else {
        (dx / dist, dy / dist, dist)
    }
}

/// Lay out every successful window of a rolling series, warm-starting each
/// frame from the previous one so node positions stay comparable over time.
pub fn anchor_sequence(
    series: &RollingSeries,
    config: &LayoutConfig,
) -> Result<Vec<NetworkLayout>> {
    let mut frames: Vec<NetworkLayout> = Vec::with_capacity(series.tables.len());
    for table in &series.tables {
        let anchor = frames.last();
        let frame = layout(table, config, anchor)?;
        frames.push(frame);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectedness::ConnectednessReport;
    use crate::fevd::Identification;
    use crate::rolling::RollingConfig;
    use ndarray::{array, Array2};

    fn table_from(d: Array2<f64>) -> ConnectednessTable {
        let n = d.nrows();
        ConnectednessTable::new(
            1,
            Identification::Generalized,
            d,
            (1..=n).map(|i| format!("v{i}")).collect(),
        )
        .unwrap()
    }

    fn two_node_table(w: f64) -> ConnectednessTable {
        table_from(array![[1.0 - w, w], [w, 1.0 - w]])
    }

    fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
    }

    #[test]
    fn two_body_equilibrium_matches_analytic_distance() {
        for (k_r, w) in [
            (10.0, 0.5),
            (10.0, 1.0),
            (4.0, 0.25),
            (1.0, 0.8),
            (25.0, 0.4),
        ] {
            let config = LayoutConfig {
                repulsion_constant: k_r,
                gravity: 0.0,
                convergence_tol: 1e-7,
                max_iterations: 50_000,
                ..LayoutConfig::default()
            };
            let result = layout(&two_node_table(w), &config, None).unwrap();
            assert!(result.converged, "k_r={k_r} w={w} failed to converge");
            let observed = dist(result.positions[0], result.positions[1]);
            let expected = (k_r / w).sqrt();
            assert!(
                (observed - expected).abs() < 1e-3,
                "k_r={k_r} w={w}: {observed} vs {expected}"
            );
        }
    }

    #[test]
    fn edgeless_table_settles_under_gravity() {
        let result = layout(&table_from(Array2::eye(5)), &LayoutConfig::default(), None).unwrap();
        assert!(result.converged);
        assert!(result.edges.is_empty());
        assert!(result
            .positions
            .iter()
            .all(|p| p.0.is_finite() && p.1.is_finite()));
        // dispersed: all pairwise distances comfortably positive
        for i in 0..5 {
            for j in (i + 1)..5 {
                assert!(dist(result.positions[i], result.positions[j]) > 1.0);
            }
        }
    }

    #[test]
    fn tight_pairs_sit_closer_than_cross_pairs() {
        // two tightly-connected pairs, weak coupling across them
        let s = 0.30; // within-pair entry
        let c = 0.03; // cross-pair entry, 10x weaker
        let diag = 1.0 - s - 2.0 * c;
        let mut d = Array2::<f64>::from_elem((4, 4), c);
        for i in 0..4 {
            d[[i, i]] = diag;
        }
        d[[0, 1]] = s;
        d[[1, 0]] = s;
        d[[2, 3]] = s;
        d[[3, 2]] = s;
        // force layouts have mirror local minima; this seed reaches the
        // clustered global configuration
        let config = LayoutConfig {
            seed: 2,
            ..LayoutConfig::default()
        };
        let result = layout(&table_from(d), &config, None).unwrap();
        let within = [
            dist(result.positions[0], result.positions[1]),
            dist(result.positions[2], result.positions[3]),
        ];
        let cross = [
            dist(result.positions[0], result.positions[2]),
            dist(result.positions[0], result.positions[3]),
            dist(result.positions[1], result.positions[2]),
            dist(result.positions[1], result.positions[3]),
        ];
        let max_within = within.iter().cloned().fold(0.0f64, f64::max);
        let min_cross = cross.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            max_within < min_cross,
            "within-pair distances {within:?} should undercut cross-pair {cross:?}"
        );
    }

    #[test]
    fn layout_is_rigid_motion_covariant_without_gravity() {
        let d = array![[0.6, 0.25, 0.15], [0.2, 0.7, 0.1], [0.1, 0.3, 0.6]];
        let table = table_from(d);
        let config = LayoutConfig {
            gravity: 0.0,
            max_iterations: 500,
            ..LayoutConfig::default()
        };
        let base = layout(&table, &config, None).unwrap();

        // rigidly transform the base INITIAL condition: run once more anchored
        // on a rotated/translated copy of the base result
        let theta = 0.83f64;
        let (tx, ty) = (3.5, -1.25);
        let transform = |p: (f64, f64)| {
            (
                theta.cos() * p.0 - theta.sin() * p.1 + tx,
                theta.sin() * p.0 + theta.cos() * p.1 + ty,
            )
        };
        let anchored = layout(&table, &config, Some(&base)).unwrap();
        let mut moved_anchor = base.clone();
        moved_anchor.positions = base.positions.iter().map(|&p| transform(p)).collect();
        let moved = layout(&table, &config, Some(&moved_anchor)).unwrap();
        for i in 0..3 {
            let expected = transform(anchored.positions[i]);
            assert!(
                dist(expected, moved.positions[i]) < 1e-6,
                "node {i} broke rigid covariance"
            );
        }
    }

    fn constant_series(table: ConnectednessTable, frames: usize) -> RollingSeries {
        let report = ConnectednessReport::from_table(table.clone()).unwrap();
        RollingSeries {
            config: RollingConfig {
                window_width: 10,
                step: 1,
                estimator: crate::rolling::Estimator::Ols,
                spec: crate::var::VarSpec::new(1, true).unwrap(),
                horizon: 1,
                identification: Identification::Generalized,
                on_failure: crate::rolling::FailurePolicy::Skip,
            },
            window_end_dates: crate::sim::synthetic_dates(frames),
            tables: vec![table; frames],
            reports: vec![report; frames],
            failures: vec![],
            ridge_dates: vec![],
        }
    }

    #[test]
    fn anchored_constant_sequence_barely_drifts() {
        let series = constant_series(two_node_table(0.4), 5);
        let frames = anchor_sequence(&series, &LayoutConfig::default()).unwrap();
        assert_eq!(frames.len(), 5);
        for k in 1..frames.len() {
            for i in 0..2 {
                let step = dist(frames[k].positions[i], frames[k - 1].positions[i]);
                assert!(step < 1e-3, "frame {k} node {i} drifted {step}");
            }
        }
    }

    #[test]
    fn single_window_sequence_equals_plain_layout() {
        let series = constant_series(two_node_table(0.4), 1);
        let config = LayoutConfig::default();
        let frames = anchor_sequence(&series, &config).unwrap();
        let direct = layout(&series.tables[0], &config, None).unwrap();
        assert_eq!(frames[0].positions, direct.positions);
    }

    #[test]
    fn top_multiple_filter_caps_edge_count() {
        let n = 6;
        let uniform = Array2::from_elem((n, n), 1.0 / n as f64);
        let table = table_from(uniform);
        let config = LayoutConfig {
            edge_filter: EdgeFilter::TopMultiple(1),
            max_iterations: 5,
            ..LayoutConfig::default()
        };
        let result = layout(&table, &config, None).unwrap();
        assert_eq!(result.edges.len(), n);
        let all = layout(
            &table,
            &LayoutConfig {
                edge_filter: EdgeFilter::MinWeight(0.0),
                max_iterations: 5,
                ..LayoutConfig::default()
            },
            None,
        )
        .unwrap();
        assert_eq!(all.edges.len(), n * (n - 1) / 2);
    }

    #[test]
    fn min_weight_filter_sets_directed_threshold() {
        let result = layout(
            &two_node_table(0.3),
            &LayoutConfig {
                edge_filter: EdgeFilter::MinWeight(0.1),
                max_iterations: 5,
                ..LayoutConfig::default()
            },
            None,
        )
        .unwrap();
        assert_eq!(result.directed_threshold, 0.1);
        assert_eq!(result.edges.len(), 1);
    }
}
