//! Tick-data parsing, cleaning and resampling into intraday return panels.
//!
//! The cleaning procedure applies, in order: session filter, open/close
//! trimming, zero-price removal, median collapse of duplicate timestamps,
//! and a three-standard-deviation neighborhood outlier rule. Cleaned series
//! are synchronized across assets with the previous-tick method on a common
//! interval grid, from which log-return panels are built.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::DayId;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("no valid ticks for asset {asset} on day {day}")]
    EmptyDay { asset: String, day: DayId },
    #[error("only {got} ticks survive cleaning, need at least {needed}")]
    InsufficientTicks { needed: usize, got: usize },
    #[error("no tick at or before the first grid point {grid_start}")]
    NoOpeningPrice { grid_start: f64 },
    #[error("price sequences disagree in length: expected {expected}, got {got}")]
    GridMismatch { expected: usize, got: usize },
    #[error("non-positive price {price} at grid slot {index}")]
    NonPositivePrice { index: usize, price: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// One trade: time of day in seconds since midnight (fractional allowed)
/// and a transaction price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub timestamp_sec: f64,
    pub price: f64,
}

/// All ticks of one asset on one trading day, sorted by timestamp.
#[derive(Debug, Clone)]
pub struct TickSeries {
    pub asset_id: String,
    pub day_id: DayId,
    pub ticks: Vec<TickRecord>,
}

impl TickSeries {
    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.ticks.iter().map(|t| t.price).collect()
    }
}

/// Result of parsing raw text rows: the sorted series plus the number of
/// rows that failed to parse.
#[derive(Debug, Clone)]
pub struct ParsedTicks {
    pub series: TickSeries,
    pub parse_failures: usize,
}

/// Session window and cleaning parameters.
///
/// Defaults follow the usual US equity session: 09:30-16:00 with the first
/// and last 30 minutes trimmed.
#[derive(Debug, Clone)]
pub struct CleanConfig {
    /// Session open, seconds since midnight.
    pub session_open_sec: f64,
    /// Session close, seconds since midnight.
    pub session_close_sec: f64,
    /// Minutes removed from each end of the session.
    pub trim_minutes: u32,
    /// Neighborhood size `k` for the outlier rule; must be >= 2.
    pub outlier_window: usize,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            session_open_sec: 9.5 * 3600.0,
            session_close_sec: 16.0 * 3600.0,
            trim_minutes: 30,
            outlier_window: 30,
        }
    }
}

impl CleanConfig {
    /// First timestamp retained after trimming.
    pub fn retained_open(&self) -> f64 {
        self.session_open_sec + 60.0 * f64::from(self.trim_minutes)
    }

    /// Last timestamp retained after trimming.
    pub fn retained_close(&self) -> f64 {
        self.session_close_sec - 60.0 * f64::from(self.trim_minutes)
    }
}

/// Parse a timestamp field: either `HH:MM:SS[.fff]` or a plain number of
/// seconds. Numeric values of a day or more are reduced modulo 86400 so
/// that epoch-second stamps map onto the session clock.
pub fn parse_timestamp(field: &str) -> Option<f64> {
    let field = field.trim();
    if field.contains(':') {
        let mut parts = field.split(':');
        let h: f64 = parts.next()?.parse().ok()?;
        let m: f64 = parts.next()?.parse().ok()?;
        let s: f64 = parts.next()?.parse().ok()?;
        if parts.next().is_some() || !(0.0..24.0).contains(&h) || !(0.0..60.0).contains(&m) || !(0.0..60.0).contains(&s)
        {
            return None;
        }
        Some(h * 3600.0 + m * 60.0 + s)
    } else {
        let t: f64 = field.parse().ok()?;
        if !t.is_finite() || t < 0.0 {
            return None;
        }
        Some(if t >= 86_400.0 { t % 86_400.0 } else { t })
    }
}

/// Parse raw `(timestamp, price)` text rows into a tick series sorted by
/// timestamp. Malformed rows are dropped and counted.
pub fn parse_ticks<'a, I>(raw_rows: I, day: DayId, asset: &str) -> Result<ParsedTicks, MarketDataError>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut ticks = Vec::new();
    let mut failures = 0usize;
    for (ts, px) in raw_rows {
        let parsed = parse_timestamp(ts).and_then(|t| {
            px.trim()
                .parse::<f64>()
                .ok()
                .filter(|p| p.is_finite())
                .map(|p| TickRecord { timestamp_sec: t, price: p })
        });
        match parsed {
            Some(rec) => ticks.push(rec),
            None => failures += 1,
        }
    }
    if ticks.is_empty() {
        return Err(MarketDataError::EmptyDay { asset: asset.to_string(), day });
    }
    ticks.sort_by(|a, b| a.timestamp_sec.total_cmp(&b.timestamp_sec));
    Ok(ParsedTicks {
        series: TickSeries { asset_id: asset.to_string(), day_id: day, ticks },
        parse_failures: failures,
    })
}

/// Clean a tick series.
///
/// Steps, in order:
/// 1. drop ticks outside `[open, close]`;
/// 2. drop ticks inside the first and last `trim_minutes` of the session;
/// 3. drop non-positive prices;
/// 4. collapse ticks sharing a timestamp to their median price;
/// 5. drop outliers: price `i` is removed when `|p_i - mean| > 3 * sd` over a
///    neighborhood of `k` ticks around `i` (the tick itself excluded). Near
///    the series ends the neighborhood is extended one-sided to keep `k`
///    members. When the neighborhood is constant (`sd == 0`) a price is
///    flagged iff it differs from the neighborhood at all.
pub fn clean_ticks(series: &TickSeries, config: &CleanConfig) -> Result<TickSeries, MarketDataError> {
    if config.outlier_window < 2 {
        return Err(MarketDataError::InvalidParameter(format!(
            "outlier_window must be >= 2, got {}",
            config.outlier_window
        )));
    }
    let lo = config.retained_open();
    let hi = config.retained_close();
    if lo > hi {
        return Err(MarketDataError::InvalidParameter(
            "trim window exceeds the session".to_string(),
        ));
    }

    // Steps 1-3.
    let kept: Vec<TickRecord> = series
        .ticks
        .iter()
        .filter(|t| {
            t.timestamp_sec >= config.session_open_sec
                && t.timestamp_sec <= config.session_close_sec
                && t.timestamp_sec >= lo
                && t.timestamp_sec <= hi
                && t.price > 0.0
        })
        .copied()
        .collect();

    // Step 4: merge equal timestamps to the median price.
    let mut merged: Vec<TickRecord> = Vec::with_capacity(kept.len());
    let mut i = 0;
    while i < kept.len() {
        let mut j = i + 1;
        while j < kept.len() && kept[j].timestamp_sec == kept[i].timestamp_sec {
            j += 1;
        }
        let price = if j - i == 1 {
            kept[i].price
        } else {
            let mut group: Vec<f64> = kept[i..j].iter().map(|t| t.price).collect();
            group.sort_by(f64::total_cmp);
            let n = group.len();
            if n % 2 == 1 {
                group[n / 2]
            } else {
                0.5 * (group[n / 2 - 1] + group[n / 2])
            }
        };
        merged.push(TickRecord { timestamp_sec: kept[i].timestamp_sec, price });
        i = j;
    }

    if merged.len() < config.outlier_window {
        return Err(MarketDataError::InsufficientTicks {
            needed: config.outlier_window,
            got: merged.len(),
        });
    }

    // Step 5: flag all outliers on the merged series, then remove at once.
    let prices: Vec<f64> = merged.iter().map(|t| t.price).collect();
    let flagged = outlier_flags(&prices, config.outlier_window);
    let cleaned: Vec<TickRecord> = merged
        .into_iter()
        .zip(flagged.iter())
        .filter(|(_, &f)| !f)
        .map(|(t, _)| t)
        .collect();

    Ok(TickSeries {
        asset_id: series.asset_id.clone(),
        day_id: series.day_id,
        ticks: cleaned,
    })
}

/// Outlier flags for an ordered price series under the 3-sigma neighborhood
/// rule with window `k`.
fn outlier_flags(prices: &[f64], k: usize) -> Vec<bool> {
    let n = prices.len();
    let want_lo = k / 2;
    let want_hi = k - want_lo;
    let mut flags = vec![false; n];
    for i in 0..n {
        let avail_lo = i;
        let avail_hi = n - 1 - i;
        let mut lo = want_lo.min(avail_lo);
        let mut hi = want_hi.min(avail_hi);
        // One-sided extension when a boundary truncates the window.
        if lo < want_lo {
            hi = (k - lo).min(avail_hi);
        } else if hi < want_hi {
            lo = (k - hi).min(avail_lo);
        }
        let count = lo + hi;
        if count == 0 {
            continue;
        }
        let mut sum = 0.0;
        for j in (i - lo)..=(i + hi) {
            if j != i {
                sum += prices[j];
            }
        }
        let mean = sum / count as f64;
        let mut ss = 0.0;
        for j in (i - lo)..=(i + hi) {
            if j != i {
                ss += (prices[j] - mean).powi(2);
            }
        }
        let sd = if count >= 2 { (ss / (count - 1) as f64).sqrt() } else { 0.0 };
        let dev = (prices[i] - mean).abs();
        flags[i] = if sd > 0.0 { dev > 3.0 * sd } else { dev > 0.0 };
    }
    flags
}

/// Previous-tick resampling: the price at each grid point is the last tick
/// price with timestamp at or before that point.
pub fn previous_tick_resample(series: &TickSeries, grid: &[f64]) -> Result<Vec<f64>, MarketDataError> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    let first = grid[0];
    if series.is_empty() || series.ticks[0].timestamp_sec > first {
        return Err(MarketDataError::NoOpeningPrice { grid_start: first });
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut idx = 0usize;
    for &g in grid {
        while idx + 1 < series.ticks.len() && series.ticks[idx + 1].timestamp_sec <= g {
            idx += 1;
        }
        out.push(series.ticks[idx].price);
    }
    Ok(out)
}

/// Evenly spaced grid over the retained session: `M + 1` points where `M`
/// is the number of complete intervals of `interval_seconds`.
pub fn session_grid(open_sec: f64, close_sec: f64, interval_seconds: u32) -> Vec<f64> {
    let step = f64::from(interval_seconds);
    let m = ((close_sec - open_sec) / step).floor() as usize;
    (0..=m).map(|i| open_sec + step * i as f64).collect()
}

/// Intraday log-return panel for one day: row `j` holds the return vector of
/// interval `j`, columns follow the asset registry order.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    pub day_id: DayId,
    pub interval_seconds: u32,
    pub returns: DMatrix<f64>,
}

impl ReturnPanel {
    pub fn intervals(&self) -> usize {
        self.returns.nrows()
    }

    pub fn assets(&self) -> usize {
        self.returns.ncols()
    }
}

/// Build a return panel from per-asset price sequences on a common grid of
/// `M + 1` points: `returns[j][i] = ln p_i[j+1] - ln p_i[j]`.
pub fn build_return_panel(
    per_asset_prices: &[Vec<f64>],
    day: DayId,
    interval_seconds: u32,
) -> Result<ReturnPanel, MarketDataError> {
    let d = per_asset_prices.len();
    if d == 0 {
        return Err(MarketDataError::InvalidParameter("no assets".to_string()));
    }
    let len = per_asset_prices[0].len();
    if len < 2 {
        return Err(MarketDataError::InvalidParameter(format!(
            "need at least 2 grid prices per asset, got {len}"
        )));
    }
    for prices in per_asset_prices {
        if prices.len() != len {
            return Err(MarketDataError::GridMismatch { expected: len, got: prices.len() });
        }
        for (idx, &p) in prices.iter().enumerate() {
            if !(p > 0.0) {
                return Err(MarketDataError::NonPositivePrice { index: idx, price: p });
            }
        }
    }
    let m = len - 1;
    let mut returns = DMatrix::zeros(m, d);
    for (i, prices) in per_asset_prices.iter().enumerate() {
        for j in 0..m {
            returns[(j, i)] = prices[j + 1].ln() - prices[j].ln();
        }
    }
    Ok(ReturnPanel { day_id: day, interval_seconds, returns })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(ticks: &[(f64, f64)]) -> TickSeries {
        TickSeries {
            asset_id: "TEST".to_string(),
            day_id: DayId(20130503),
            ticks: ticks
                .iter()
                .map(|&(t, p)| TickRecord { timestamp_sec: t, price: p })
                .collect(),
        }
    }

    #[test]
    fn parse_sorts_by_time() {
        let parsed = parse_ticks(
            vec![("09:35:00", "10.0"), ("09:31:00", "10.1")],
            DayId(20130503),
            "TEST",
        )
        .unwrap();
        assert_eq!(parsed.parse_failures, 0);
        let t: Vec<f64> = parsed.series.ticks.iter().map(|x| x.timestamp_sec).collect();
        assert_eq!(t, vec![9.0 * 3600.0 + 31.0 * 60.0, 9.0 * 3600.0 + 35.0 * 60.0]);
    }

    #[test]
    fn parse_empty_is_error() {
        let err = parse_ticks(Vec::new(), DayId(1), "TEST").unwrap_err();
        assert!(matches!(err, MarketDataError::EmptyDay { .. }));
    }

    #[test]
    fn parse_counts_failures() {
        let parsed = parse_ticks(
            vec![("34200", "10.0"), ("34201", "oops"), ("34202", "10.2")],
            DayId(1),
            "TEST",
        )
        .unwrap();
        assert_eq!(parsed.series.len(), 2);
        assert_eq!(parsed.parse_failures, 1);
    }

    #[test]
    fn parse_timestamp_formats() {
        assert_eq!(parse_timestamp("09:30:00"), Some(34200.0));
        assert_eq!(parse_timestamp("10:00:30.5"), Some(36030.5));
        assert_eq!(parse_timestamp("34200"), Some(34200.0));
        // epoch seconds fold onto the session clock
        assert_eq!(parse_timestamp("1367571600"), Some(1367571600.0 % 86400.0));
        assert_eq!(parse_timestamp("25:00:00"), None);
        assert_eq!(parse_timestamp("-5"), None);
    }

    fn wide_config(k: usize) -> CleanConfig {
        CleanConfig {
            session_open_sec: 0.0,
            session_close_sec: 86_400.0,
            trim_minutes: 0,
            outlier_window: k,
        }
    }

    #[test]
    fn clean_removes_isolated_spike() {
        let mut ticks: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 10.0)).collect();
        ticks[50].1 = 50.0;
        let cleaned = clean_ticks(&series(&ticks), &wide_config(10)).unwrap();
        assert_eq!(cleaned.len(), 99);
        assert!(cleaned.ticks.iter().all(|t| t.price == 10.0));
    }

    #[test]
    fn clean_rejects_everything_outside_session() {
        let ticks: Vec<(f64, f64)> = (0..10).map(|i| (9.25 * 3600.0 + i as f64, 10.0)).collect();
        let config = CleanConfig { outlier_window: 5, ..CleanConfig::default() };
        let err = clean_ticks(&series(&ticks), &config).unwrap_err();
        assert!(matches!(err, MarketDataError::InsufficientTicks { got: 0, .. }));
    }

    #[test]
    fn clean_collapses_duplicate_timestamps_to_median() {
        let mut ticks: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 10.0)).collect();
        ticks.push((5.0, 9.0));
        ticks.push((5.0, 11.0));
        let mut s = series(&ticks);
        s.ticks.sort_by(|a, b| a.timestamp_sec.total_cmp(&b.timestamp_sec));
        let cleaned = clean_ticks(&s, &wide_config(4)).unwrap();
        assert_eq!(cleaned.len(), 20);
        let at5: Vec<f64> = cleaned
            .ticks
            .iter()
            .filter(|t| t.timestamp_sec == 5.0)
            .map(|t| t.price)
            .collect();
        assert_eq!(at5, vec![10.0]);
    }

    #[test]
    fn clean_median_of_even_group_averages_middle() {
        let ticks = vec![(0.0, 10.5), (1.0, 9.0), (1.0, 10.0), (1.0, 11.0), (1.0, 12.0), (2.0, 10.5)];
        let cleaned = clean_ticks(&series(&ticks), &wide_config(2)).unwrap();
        let at1: Vec<f64> = cleaned
            .ticks
            .iter()
            .filter(|t| t.timestamp_sec == 1.0)
            .map(|t| t.price)
            .collect();
        assert_eq!(at1, vec![10.5]);
    }

    #[test]
    fn clean_drops_zero_prices() {
        let mut ticks: Vec<(f64, f64)> = (0..30).map(|i| (i as f64, 10.0)).collect();
        ticks[3].1 = 0.0;
        let cleaned = clean_ticks(&series(&ticks), &wide_config(5)).unwrap();
        assert_eq!(cleaned.len(), 29);
        assert!(cleaned.ticks.iter().all(|t| t.price > 0.0));
    }

    #[test]
    fn resample_carries_last_price_forward() {
        let s = series(&[(0.0, 10.0), (5.0, 11.0)]);
        assert_eq!(previous_tick_resample(&s, &[4.0, 6.0]).unwrap(), vec![10.0, 11.0]);
        let single = series(&[(0.0, 10.0)]);
        assert_eq!(
            previous_tick_resample(&single, &[1.0, 2.0, 3.0]).unwrap(),
            vec![10.0, 10.0, 10.0]
        );
    }

    #[test]
    fn resample_needs_opening_price() {
        let s = series(&[(2.0, 10.0)]);
        let err = previous_tick_resample(&s, &[1.0]).unwrap_err();
        assert!(matches!(err, MarketDataError::NoOpeningPrice { .. }));
    }

    #[test]
    fn grid_counts_complete_intervals() {
        let g = session_grid(36_000.0, 55_800.0, 300);
        assert_eq!(g.len(), 67); // 66 five-minute intervals in 10:00-15:30
        assert_eq!(g[0], 36_000.0);
        assert_eq!(g[66], 55_800.0);
        // a ragged session keeps only complete intervals
        let g2 = session_grid(0.0, 949.0, 300);
        assert_eq!(g2, vec![0.0, 300.0, 600.0, 900.0]);
    }

    #[test]
    fn panel_log_identity() {
        let e = std::f64::consts::E;
        let panel = build_return_panel(&[vec![1.0, e, e * e]], DayId(1), 300).unwrap();
        assert_relative_eq!(panel.returns[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(panel.returns[(1, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn panel_constant_prices_zero_returns() {
        let panel = build_return_panel(&[vec![42.0; 5], vec![7.0; 5]], DayId(1), 300).unwrap();
        assert_eq!(panel.returns, DMatrix::zeros(4, 2));
    }

    #[test]
    fn panel_simple_return_value() {
        let panel = build_return_panel(&[vec![100.0, 101.0]], DayId(1), 300).unwrap();
        // ln(101/100) evaluated by hand
        assert_relative_eq!(panel.returns[(0, 0)], 0.009950330853155723, epsilon = 1e-12);
    }

    #[test]
    fn panel_rejects_mismatched_grids() {
        let err = build_return_panel(&[vec![1.0, 2.0], vec![1.0, 2.0, 3.0]], DayId(1), 300).unwrap_err();
        assert!(matches!(err, MarketDataError::GridMismatch { expected: 2, got: 3 }));
    }

    #[test]
    fn cleaning_is_idempotent_on_spiky_data() {
        let mut ticks: Vec<(f64, f64)> = (0..200).map(|i| (i as f64, 10.0 + 0.01 * (i % 7) as f64)).collect();
        ticks[40].1 = 80.0;
        ticks[120].1 = 0.5;
        let cfg = wide_config(12);
        let once = clean_ticks(&series(&ticks), &cfg).unwrap();
        let twice = clean_ticks(&once, &cfg).unwrap();
        assert_eq!(once.ticks, twice.ticks);
    }
}
