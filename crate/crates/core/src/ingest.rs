//! Panel ingestion: CSV loading, validation, return and range-volatility
//! transforms.
//!
//! The CSV contract: UTF-8, comma-separated, first row headers, first column
//! ISO-8601 dates (YYYY-MM-DD), remaining columns decimal numbers with "."
//! separator, empty string = missing. Rows containing any missing or
//! unparseable cell are dropped and counted; nothing is imputed.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// A complete panel of observations: T rows (dates) by N columns (variables).
///
/// Dates are opaque ordering keys in ISO-8601 form; the library does no
/// calendar arithmetic on them.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub labels: Vec<String>,
    pub dates: Vec<String>,
    pub values: Array2<f64>,
}

impl Panel {
    pub fn new(labels: Vec<String>, dates: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Input(format!(
                "panel needs at least 2 variables, got {}",
                labels.len()
            )));
        }
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::Input(format!("empty label in column {}", i + 1)));
            }
            if labels[..i].contains(label) {
                return Err(Error::Input(format!("duplicate label {label:?}")));
            }
        }
        if dates.is_empty() {
            return Err(Error::Input("panel has no rows".into()));
        }
        if values.nrows() != dates.len() || values.ncols() != labels.len() {
            return Err(Error::Input(format!(
                "value matrix is {}x{}, expected {}x{}",
                values.nrows(),
                values.ncols(),
                dates.len(),
                labels.len()
            )));
        }
        for d in &dates {
            validate_iso_date(d)?;
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Input(format!(
                    "dates not strictly increasing: {} followed by {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Panel {
            labels,
            dates,
            values,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.labels.len()
    }

    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Sub-panel of `len` consecutive rows starting at `start`.
    pub fn window(&self, start: usize, len: usize) -> Panel {
        assert!(start + len <= self.n_obs(), "window out of range");
        Panel {
            labels: self.labels.clone(),
            dates: self.dates[start..start + len].to_vec(),
            values: self
                .values
                .slice(ndarray::s![start..start + len, ..])
                .to_owned(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str("date");
        for label in &self.labels {
            out.push(',');
            out.push_str(label);
        }
        out.push('\n');
        for (t, date) in self.dates.iter().enumerate() {
            out.push_str(date);
            for i in 0..self.n_vars() {
                out.push(',');
                out.push_str(&format!("{}", self.values[[t, i]]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// Result of loading a panel, carrying the number of dropped rows.
#[derive(Debug, Clone)]
pub struct PanelLoad {
    pub panel: Panel,
    pub rows_dropped: usize,
}

/// Load a panel from a CSV file. Rows with any missing or unparseable cell
/// are dropped and counted in the returned `rows_dropped`.
pub fn load_panel(path: &Path) -> Result<PanelLoad> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_panel_csv(&text)
}

/// Parse panel CSV text. See module docs for the format contract.
pub fn parse_panel_csv(text: &str) -> Result<PanelLoad> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Input("empty CSV".into()))?;
    let mut cols = header.split(',');
    let _date_col = cols
        .next()
        .ok_or_else(|| Error::Input("missing header row".into()))?;
    let labels: Vec<String> = cols.map(|s| s.trim().to_string()).collect();
    let n = labels.len();
    if n < 2 {
        return Err(Error::Input(format!(
            "panel needs at least 2 variables, got {n}"
        )));
    }

    let mut dates: Vec<String> = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut dropped = 0usize;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        match parse_row(line, n) {
            Some((date, cells)) => {
                dates.push(date);
                rows.extend_from_slice(&cells);
            }
            None => dropped += 1,
        }
    }
    if dates.is_empty() {
        return Err(Error::Input(
            "no usable rows after dropping incomplete ones".into(),
        ));
    }
    let values =
        Array2::from_shape_vec((dates.len(), n), rows).expect("row collection matches dimensions");
    let panel = Panel::new(labels, dates, values)?;
    Ok(PanelLoad {
        panel,
        rows_dropped: dropped,
    })
}

fn parse_row(line: &str, n_vars: usize) -> Option<(String, Vec<f64>)> {
    let mut cells = line.split(',');
    let date = cells.next()?.trim().to_string();
    validate_iso_date(&date).ok()?;
    let mut values = Vec::with_capacity(n_vars);
    for _ in 0..n_vars {
        let cell = cells.next()?.trim();
        if cell.is_empty() {
            return None;
        }
        let v: f64 = cell.parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        values.push(v);
    }
    if cells.next().is_some() {
        return None; // extra columns: malformed row
    }
    Some((date, values))
}

fn validate_iso_date(s: &str) -> Result<()> {
    let bytes = s.as_bytes();
    let ok = bytes.len() == 10
        && bytes[4] == b'-'
        && bytes[7] == b'-'
        && bytes
            .iter()
            .enumerate()
            .all(|(i, &b)| i == 4 || i == 7 || b.is_ascii_digit());
    if !ok {
        return Err(Error::Input(format!("invalid ISO-8601 date {s:?}")));
    }
    let month: u32 = s[5..7].parse().unwrap();
    let day: u32 = s[8..10].parse().unwrap();
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
        return Err(Error::Input(format!("invalid ISO-8601 date {s:?}")));
    }
    Ok(())
}

/// Log returns: output row t is `ln(v[t+1]) - ln(v[t])`; one fewer row than input.
pub fn log_returns(panel: &Panel) -> Result<Panel> {
    let t = panel.n_obs();
    let n = panel.n_vars();
    if t < 2 {
        return Err(Error::Input(
            "log returns need at least 2 observations".into(),
        ));
    }
    for row in 0..t {
        for col in 0..n {
            if panel.values[[row, col]] <= 0.0 {
                return Err(Error::Input(format!(
                    "nonpositive value {} for {} on {}",
                    panel.values[[row, col]],
                    panel.labels[col],
                    panel.dates[row]
                )));
            }
        }
    }
    let mut values = Array2::<f64>::zeros((t - 1, n));
    for row in 0..t - 1 {
        for col in 0..n {
            values[[row, col]] = panel.values[[row + 1, col]].ln() - panel.values[[row, col]].ln();
        }
    }
    Ok(Panel {
        labels: panel.labels.clone(),
        dates: panel.dates[1..].to_vec(),
        values,
    })
}

/// Open/high/low/close panel for range-based volatility proxies.
#[derive(Debug, Clone)]
pub struct OhlcPanel {
    pub labels: Vec<String>,
    pub dates: Vec<String>,
    pub open: Array2<f64>,
    pub high: Array2<f64>,
    pub low: Array2<f64>,
    pub close: Array2<f64>,
}

impl OhlcPanel {
    pub fn new(
        labels: Vec<String>,
        dates: Vec<String>,
        open: Array2<f64>,
        high: Array2<f64>,
        low: Array2<f64>,
        close: Array2<f64>,
    ) -> Result<Self> {
        let shape = open.dim();
        for (name, m) in [("high", &high), ("low", &low), ("close", &close)] {
            if m.dim() != shape {
                return Err(Error::Input(format!("{name} matrix shape mismatch")));
            }
        }
        let ohlc = OhlcPanel {
            labels,
            dates,
            open,
            high,
            low,
            close,
        };
        ohlc.validate()?;
        Ok(ohlc)
    }

    fn validate(&self) -> Result<()> {
        // reuse Panel validation for labels/dates/shape
        Panel::new(self.labels.clone(), self.dates.clone(), self.close.clone())?;
        for t in 0..self.dates.len() {
            for i in 0..self.labels.len() {
                let (o, h, l, c) = (
                    self.open[[t, i]],
                    self.high[[t, i]],
                    self.low[[t, i]],
                    self.close[[t, i]],
                );
                if o <= 0.0 || h <= 0.0 || l <= 0.0 || c <= 0.0 {
                    return Err(Error::Input(format!(
                        "nonpositive price for {} on {}",
                        self.labels[i], self.dates[t]
                    )));
                }
                if h < o.max(c) || l > o.min(c) {
                    return Err(Error::Input(format!(
                        "high/low bracket violated for {} on {}: o={o} h={h} l={l} c={c}",
                        self.labels[i], self.dates[t]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Range-based variance proxy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeEstimator {
    Parkinson,
    GarmanKlass,
}

/// Result of a range-volatility transform; `floored` counts Garman-Klass
/// cells clipped up to zero.
#[derive(Debug, Clone)]
pub struct RangeVolatility {
    pub panel: Panel,
    pub floored: usize,
}

/// Per-cell daily variance proxies from OHLC bars.
///
/// Parkinson: (1/(4 ln 2)) · ln(high/low)².
/// Garman-Klass: 0.5 · ln(high/low)² − (2 ln 2 − 1) · ln(close/open)²,
/// floored at zero (single pathological bars should not kill an ingestion).
pub fn range_volatility(ohlc: &OhlcPanel, estimator: RangeEstimator) -> Result<RangeVolatility> {
    ohlc.validate()?;
    let t = ohlc.dates.len();
    let n = ohlc.labels.len();
    let mut values = Array2::<f64>::zeros((t, n));
    let mut floored = 0usize;
    for row in 0..t {
        for col in 0..n {
            let hl = (ohlc.high[[row, col]] / ohlc.low[[row, col]]).ln();
            let v = match estimator {
                RangeEstimator::Parkinson => hl * hl / (4.0 * std::f64::consts::LN_2),
                RangeEstimator::GarmanKlass => {
                    let co = (ohlc.close[[row, col]] / ohlc.open[[row, col]]).ln();
                    let raw = 0.5 * hl * hl - (2.0 * std::f64::consts::LN_2 - 1.0) * co * co;
                    if raw < 0.0 {
                        floored += 1;
                        0.0
                    } else {
                        raw
                    }
                }
            };
            values[[row, col]] = v;
        }
    }
    let panel = Panel::new(ohlc.labels.clone(), ohlc.dates.clone(), values)?;
    Ok(RangeVolatility { panel, floored })
}

/// Load an OHLC panel from a single CSV whose variable columns are named
/// `<label>.open`, `<label>.high`, `<label>.low`, `<label>.close`.
pub fn load_ohlc_panel(path: &Path) -> Result<OhlcLoad> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ohlc_csv(&text)
}

#[derive(Debug, Clone)]
pub struct OhlcLoad {
    pub ohlc: OhlcPanel,
    pub rows_dropped: usize,
}

pub fn parse_ohlc_csv(text: &str) -> Result<OhlcLoad> {
    let loaded = parse_panel_csv(text)?;
    let wide = loaded.panel;

    // group columns by label prefix
    let mut labels: Vec<String> = Vec::new();
    let mut fields: Vec<[Option<usize>; 4]> = Vec::new();
    for (col, header) in wide.labels.iter().enumerate() {
        let (label, field) = header.rsplit_once('.').ok_or_else(|| {
            Error::Input(format!(
                "OHLC column {header:?} is not of the form <label>.<open|high|low|close>"
            ))
        })?;
        let slot = match field {
            "open" => 0,
            "high" => 1,
            "low" => 2,
            "close" => 3,
            other => {
                return Err(Error::Input(format!(
                    "unknown OHLC field {other:?} in column {header:?}"
                )))
            }
        };
        let idx = match labels.iter().position(|l| l == label) {
            Some(i) => i,
            None => {
                labels.push(label.to_string());
                fields.push([None; 4]);
                labels.len() - 1
            }
        };
        if fields[idx][slot].is_some() {
            return Err(Error::Input(format!("duplicate OHLC column {header:?}")));
        }
        fields[idx][slot] = Some(col);
    }

    let t = wide.n_obs();
    let n = labels.len();
    let mut open = Array2::<f64>::zeros((t, n));
    let mut high = Array2::<f64>::zeros((t, n));
    let mut low = Array2::<f64>::zeros((t, n));
    let mut close = Array2::<f64>::zeros((t, n));
    for (i, label) in labels.iter().enumerate() {
        let [o, h, l, c] = fields[i];
        let missing =
            |field: &str| Error::Input(format!("label {label:?} is missing its .{field} column"));
        let (o, h, l, c) = (
            o.ok_or_else(|| missing("open"))?,
            h.ok_or_else(|| missing("high"))?,
            l.ok_or_else(|| missing("low"))?,
            c.ok_or_else(|| missing("close"))?,
        );
        for row in 0..t {
            open[[row, i]] = wide.values[[row, o]];
            high[[row, i]] = wide.values[[row, h]];
            low[[row, i]] = wide.values[[row, l]];
            close[[row, i]] = wide.values[[row, c]];
        }
    }
    let ohlc = OhlcPanel::new(labels, wide.dates, open, high, low, close)?;
    Ok(OhlcLoad {
        ohlc,
        rows_dropped: loaded.rows_dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn dates(n: usize) -> Vec<String> {
        crate::sim::synthetic_dates(n)
    }

    #[test]
    fn parses_complete_csv() {
        let mut csv = String::from("date,a,b\n");
        for (i, d) in dates(100).iter().enumerate() {
            csv.push_str(&format!("{d},{},{}\n", i as f64, (i * 2) as f64));
        }
        let loaded = parse_panel_csv(&csv).unwrap();
        assert_eq!(loaded.panel.n_vars(), 2);
        assert_eq!(loaded.panel.n_obs(), 100);
        assert_eq!(loaded.rows_dropped, 0);
    }

    #[test]
    fn drops_row_with_missing_cell() {
        let ds = dates(100);
        let mut csv = String::from("date,a,b\n");
        for (i, d) in ds.iter().enumerate() {
            if i == 42 {
                csv.push_str(&format!("{d},1.0,\n"));
            } else {
                csv.push_str(&format!("{d},1.0,2.0\n"));
            }
        }
        let loaded = parse_panel_csv(&csv).unwrap();
        assert_eq!(loaded.panel.n_obs(), 99);
        assert_eq!(loaded.rows_dropped, 1);
    }

    #[test]
    fn rejects_duplicate_labels() {
        let csv = "date,SPX,SPX\n2020-01-01,1.0,2.0\n";
        assert!(matches!(parse_panel_csv(csv), Err(Error::Input(_))));
    }

    #[test]
    fn rejects_single_variable() {
        let csv = "date,a\n2020-01-01,1.0\n";
        assert!(parse_panel_csv(csv).is_err());
    }

    #[test]
    fn rejects_non_increasing_dates() {
        let csv = "date,a,b\n2020-01-02,1,2\n2020-01-01,1,2\n";
        assert!(parse_panel_csv(csv).is_err());
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let panel = Panel::new(
            vec!["a".into(), "b".into()],
            dates(3),
            array![[1.5, -2.25], [0.1, 3.0e-7], [1.0 / 3.0, 7.0]],
        )
        .unwrap();
        let reloaded = parse_panel_csv(&panel.to_csv_string()).unwrap();
        assert_eq!(reloaded.panel, panel);
        assert_eq!(reloaded.rows_dropped, 0);
    }

    #[test]
    fn log_returns_of_constant_series_are_zero() {
        let panel = Panel::new(
            vec!["a".into(), "b".into()],
            dates(3),
            array![[5.0, 1.0], [5.0, std::f64::consts::E], [5.0, 1.0]],
        )
        .unwrap();
        let r = log_returns(&panel).unwrap();
        assert_eq!(r.n_obs(), 2);
        assert_eq!(r.values[[0, 0]], 0.0);
        assert_eq!(r.values[[1, 0]], 0.0);
        assert!((r.values[[0, 1]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_returns_match_hand_values() {
        let panel = Panel::new(
            vec!["a".into(), "b".into()],
            dates(3),
            array![[100.0, 1.0], [110.0, 1.0], [99.0, 1.0]],
        )
        .unwrap();
        let r = log_returns(&panel).unwrap();
        assert!((r.values[[0, 0]] - 1.1f64.ln()).abs() < 1e-15);
        assert!((r.values[[1, 0]] - 0.9f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_returns_reject_nonpositive() {
        let panel = Panel::new(
            vec!["a".into(), "b".into()],
            dates(2),
            array![[1.0, 1.0], [0.0, 1.0]],
        )
        .unwrap();
        assert!(log_returns(&panel).is_err());
    }

    fn flat_ohlc(price: f64, t: usize) -> OhlcPanel {
        let n = 2;
        let m = Array2::from_elem((t, n), price);
        OhlcPanel::new(
            vec!["a".into(), "b".into()],
            dates(t),
            m.clone(),
            m.clone(),
            m.clone(),
            m,
        )
        .unwrap()
    }

    #[test]
    fn zero_range_bar_has_zero_volatility() {
        let ohlc = flat_ohlc(10.0, 3);
        for est in [RangeEstimator::Parkinson, RangeEstimator::GarmanKlass] {
            let rv = range_volatility(&ohlc, est).unwrap();
            assert!(rv.panel.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn unit_log_range_matches_constants() {
        // high/low = e so ln(high/low) = 1; close = open
        let t = 1;
        let e = std::f64::consts::E;
        let open = Array2::from_elem((t, 2), 1.0);
        let high = Array2::from_elem((t, 2), e);
        let low = Array2::from_elem((t, 2), 1.0);
        let close = Array2::from_elem((t, 2), 1.0);
        let ohlc = OhlcPanel::new(
            vec!["a".into(), "b".into()],
            dates(t),
            open,
            high,
            low,
            close,
        )
        .unwrap();
        let park = range_volatility(&ohlc, RangeEstimator::Parkinson).unwrap();
        assert!((park.panel.values[[0, 0]] - 1.0 / (4.0 * std::f64::consts::LN_2)).abs() < 1e-12);
        let gk = range_volatility(&ohlc, RangeEstimator::GarmanKlass).unwrap();
        assert!((gk.panel.values[[0, 0]] - 0.5).abs() < 1e-12);
        assert_eq!(gk.floored, 0);
    }

    #[test]
    fn garman_klass_stays_nonnegative_on_boundary_bar() {
        // close = high, open = low: the negative term is at its bracket limit
        let t = 1;
        let open = Array2::from_elem((t, 2), 1.0);
        let high = Array2::from_elem((t, 2), 1.0 + 1e-9);
        let low = Array2::from_elem((t, 2), 1.0);
        let close = Array2::from_elem((t, 2), 1.0 + 1e-9);
        let ohlc = OhlcPanel::new(
            vec!["a".into(), "b".into()],
            dates(t),
            open,
            high,
            low,
            close,
        )
        .unwrap();
        let gk = range_volatility(&ohlc, RangeEstimator::GarmanKlass).unwrap();
        assert!(gk.panel.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn ohlc_rejects_bracket_violation() {
        let t = 1;
        let open = Array2::from_elem((t, 2), 2.0);
        let high = Array2::from_elem((t, 2), 1.5); // high < open
        let low = Array2::from_elem((t, 2), 1.0);
        let close = Array2::from_elem((t, 2), 1.2);
        assert!(OhlcPanel::new(
            vec!["a".into(), "b".into()],
            dates(t),
            open,
            high,
            low,
            close
        )
        .is_err());
    }

    #[test]
    fn ohlc_csv_groups_suffixed_columns() {
        let csv = "date,x.open,x.high,x.low,x.close,y.open,y.high,y.low,y.close\n\
                   2020-01-01,1,2,0.5,1.5,10,20,5,15\n\
                   2020-01-02,1,2,0.5,1.5,10,20,5,15\n";
        let loaded = parse_ohlc_csv(csv).unwrap();
        assert_eq!(loaded.ohlc.labels, vec!["x", "y"]);
        assert_eq!(loaded.ohlc.high[[0, 1]], 20.0);
    }

    #[test]
    fn ohlc_csv_rejects_incomplete_group() {
        let csv = "date,x.open,x.high,x.low,x.close,y.open,y.high\n2020-01-01,1,2,0.5,1.5,10,20\n";
        assert!(parse_ohlc_csv(csv).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn csv_round_trip_is_lossless(
                n in 2usize..5,
                t in 1usize..15,
                raw in proptest::collection::vec(-1.0e12f64..1.0e12, 60)
            ) {
                let mut values = Array2::<f64>::zeros((t, n));
                for r in 0..t {
                    for c in 0..n {
                        values[[r, c]] = raw[r * n + c];
                    }
                }
                let panel = Panel::new(
                    (1..=n).map(|i| format!("v{i}")).collect(),
                    dates(t),
                    values,
                )
                .unwrap();
                let reloaded = parse_panel_csv(&panel.to_csv_string()).unwrap();
                prop_assert_eq!(reloaded.panel, panel);
                prop_assert_eq!(reloaded.rows_dropped, 0);
            }

            #[test]
            fn log_returns_drop_exactly_one_row(
                t in 2usize..20,
                raw in proptest::collection::vec(0.01f64..1.0e6, 40)
            ) {
                let n = 2;
                let mut values = Array2::<f64>::zeros((t, n));
                for r in 0..t {
                    for c in 0..n {
                        values[[r, c]] = raw[r * n + c];
                    }
                }
                let panel = Panel::new(
                    vec!["a".into(), "b".into()],
                    dates(t),
                    values,
                )
                .unwrap();
                let returns = log_returns(&panel).unwrap();
                prop_assert_eq!(returns.n_obs(), t - 1);
            }

            #[test]
            fn parkinson_is_nonnegative_on_valid_bars(
                base in 0.1f64..1000.0,
                close_move in -0.09f64..0.09,
                high_pad in 0.0f64..0.1,
                low_pad in 0.0f64..0.1
            ) {
                let open = base;
                let close = base * (1.0 + close_move);
                let high = open.max(close) * (1.0 + high_pad);
                let low = open.min(close) * (1.0 - low_pad);
                let t = 1;
                let ohlc = OhlcPanel::new(
                    vec!["a".into(), "b".into()],
                    dates(t),
                    Array2::from_elem((t, 2), open),
                    Array2::from_elem((t, 2), high),
                    Array2::from_elem((t, 2), low),
                    Array2::from_elem((t, 2), close),
                )
                .unwrap();
                let vol = range_volatility(&ohlc, RangeEstimator::Parkinson).unwrap();
                prop_assert!(vol.panel.values.iter().all(|&v| v >= 0.0));
            }
        }
    }
}
