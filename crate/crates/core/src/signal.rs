//! Per-panel current signals on a uniform time grid.
//!
//! A [`PanelSeries`] stores one sample per grid slot `start_time + i * period`.
//! Slots that were never observed are kept as gaps until [`fill_missing`] or
//! [`align_to_grid`] removes them; every observed value is finite and
//! non-negative after ingestion.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// Default sampling period: one minute.
pub const DEFAULT_PERIOD: i64 = 60;

/// Readings in `[NEGATIVE_TOLERANCE, 0)` are clamped to zero; anything lower is a sensor fault.
pub const NEGATIVE_TOLERANCE: f64 = -0.1;

/// Default limit on interpolated gap length, in samples.
pub const DEFAULT_MAX_GAP: usize = 5;

/// One panel's current signal.
#[derive(Clone, PartialEq)]
pub struct PanelSeries {
    panel_id: String,
    start_time: i64,
    period: i64,
    // Gaps are stored as NaN; observed values are always finite.
    values: Vec<f64>,
}

impl PanelSeries {
    /// Builds a complete series. Every value must be finite.
    pub fn new(panel_id: impl Into<String>, start_time: i64, period: i64, values: Vec<f64>) -> Result<Self> {
        let panel_id = panel_id.into();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "panel {panel_id}: non-finite value at index {i}"
            )));
        }
        Self::build(panel_id, start_time, period, values)
    }

    /// Builds a series where `None` marks a grid slot with no observation.
    pub fn with_gaps(
        panel_id: impl Into<String>,
        start_time: i64,
        period: i64,
        samples: Vec<Option<f64>>,
    ) -> Result<Self> {
        let panel_id = panel_id.into();
        let mut values = Vec::with_capacity(samples.len());
        for (i, s) in samples.into_iter().enumerate() {
            match s {
                Some(v) if !v.is_finite() => {
                    return Err(Error::InvalidSeries(format!(
                        "panel {panel_id}: non-finite value at index {i}"
                    )))
                }
                Some(v) => values.push(v),
                None => values.push(f64::NAN),
            }
        }
        if values.iter().all(|v| v.is_nan()) {
            return Err(Error::InvalidSeries(format!("panel {panel_id}: no observed samples")));
        }
        Self::build(panel_id, start_time, period, values)
    }

    fn build(panel_id: String, start_time: i64, period: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSeries(format!("panel {panel_id}: no samples")));
        }
        if period <= 0 {
            return Err(Error::InvalidSeries(format!(
                "panel {panel_id}: period must be positive, got {period}"
            )));
        }
        Ok(Self {
            panel_id,
            start_time,
            period,
            values,
        })
    }

    pub fn panel_id(&self) -> &str {
        &self.panel_id
    }

    pub fn start_time(&self) -> i64 {
        self.start_time
    }

    pub fn period(&self) -> i64 {
        self.period
    }

    /// Time of the last grid slot.
    pub fn end_time(&self) -> i64 {
        self.time_at(self.values.len() - 1)
    }

    pub fn time_at(&self, index: usize) -> i64 {
        self.start_time + index as i64 * self.period
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Raw sample values. Gap slots read as NaN; check [`is_complete`](Self::is_complete) first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample(&self, index: usize) -> Option<f64> {
        self.values.get(index).copied().filter(|v| !v.is_nan())
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|v| !v.is_nan())
    }

    /// Observed `(time, value)` pairs in time order.
    pub fn observations(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_nan())
            .map(|(i, &v)| (self.time_at(i), v))
    }

    /// Sum of the samples, in ampere-samples.
    pub fn integrated_current(&self) -> f64 {
        self.values.iter().filter(|v| !v.is_nan()).sum()
    }

    /// Same grid and id with every value replaced by `f(value)`. Gaps stay gaps.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .map(|&v| if v.is_nan() { v } else { f(v) })
            .collect::<Vec<_>>();
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::InvalidSeries(format!(
                "panel {}: mapping produced a non-finite value",
                self.panel_id
            )));
        }
        Self::build(self.panel_id.clone(), self.start_time, self.period, values)
    }

    fn with_values(&self, start_time: i64, values: Vec<f64>) -> Self {
        Self {
            panel_id: self.panel_id.clone(),
            start_time,
            period: self.period,
            values,
        }
    }
}

impl fmt::Debug for PanelSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PanelSeries")
            .field("panel_id", &self.panel_id)
            .field("start_time", &self.start_time)
            .field("period", &self.period)
            .field("len", &self.values.len())
            .finish()
    }
}

/// An ordered set of panel signals.
#[derive(Clone, Debug, PartialEq)]
pub struct Fleet {
    series: Vec<PanelSeries>,
    grid_aligned: bool,
}

impl Fleet {
    /// Panel ids must be unique. `grid_aligned` is derived: every series is gap-free
    /// and all share start time, period and length.
    pub fn new(series: Vec<PanelSeries>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::InvalidFleet("no panels".into()));
        }
        let mut seen = HashSet::new();
        for s in &series {
            if !seen.insert(s.panel_id.as_str()) {
                return Err(Error::InvalidFleet(format!("duplicate panel id {}", s.panel_id)));
            }
        }
        let first = &series[0];
        let grid_aligned = series.iter().all(|s| {
            s.is_complete() && s.start_time == first.start_time && s.period == first.period && s.len() == first.len()
        });
        Ok(Self { series, grid_aligned })
    }

    pub fn series(&self) -> &[PanelSeries] {
        &self.series
    }

    pub fn into_series(self) -> Vec<PanelSeries> {
        self.series
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn is_grid_aligned(&self) -> bool {
        self.grid_aligned
    }

    pub fn panel_ids(&self) -> Vec<String> {
        self.series.iter().map(|s| s.panel_id.clone()).collect()
    }

    pub fn get(&self, panel_id: &str) -> Option<&PanelSeries> {
        self.series.iter().find(|s| s.panel_id == panel_id)
    }

    /// Number of samples per panel on an aligned fleet.
    pub fn series_len(&self) -> Result<usize> {
        self.require_aligned()?;
        Ok(self.series[0].len())
    }

    pub(crate) fn require_aligned(&self) -> Result<()> {
        if self.grid_aligned {
            Ok(())
        } else {
            Err(Error::NotGridAligned)
        }
    }

    /// Indices of the panels ordered by panel id.
    pub(crate) fn id_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.series.len()).collect();
        order.sort_by(|&a, &b| self.series[a].panel_id.cmp(&self.series[b].panel_id));
        order
    }

    /// Every panel multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let series = self
            .series
            .iter()
            .map(|s| s.map_values(|v| v * factor))
            .collect::<Result<Vec<_>>>()?;
        Fleet::new(series)
    }
}

/// A window over an aligned fleet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowSpec {
    /// Seconds from the series start; must land on a grid slot.
    pub start_offset: i64,
    /// Number of samples, at least 2.
    pub length: usize,
}

impl WindowSpec {
    pub fn new(start_offset: i64, length: usize) -> Self {
        Self { start_offset, length }
    }

    /// The window `inner`, expressed relative to a fleet already cut to `self`.
    pub fn compose(self, inner: WindowSpec) -> WindowSpec {
        WindowSpec {
            start_offset: self.start_offset + inner.start_offset,
            length: inner.length,
        }
    }
}

/// Resamples every series onto a shared grid by linear interpolation.
///
/// The grid starts at the latest first observation and covers the intersection
/// of all series' extents. Gaps in the input are bridged by the interpolation.
pub fn align_to_grid(fleet: &Fleet, period: i64) -> Result<Fleet> {
    if period <= 0 {
        return Err(Error::InvalidConfig(format!(
            "grid period must be positive, got {period}"
        )));
    }
    if fleet.is_grid_aligned() && fleet.series()[0].period == period {
        return Ok(fleet.clone());
    }
    let mut obs = Vec::with_capacity(fleet.len());
    for s in fleet.series() {
        let pts: Vec<(i64, f64)> = s.observations().collect();
        if pts.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "panel {}: need at least 2 samples to resample, got {}",
                s.panel_id,
                pts.len()
            )));
        }
        obs.push(pts);
    }
    let start = obs.iter().map(|p| p[0].0).max().unwrap();
    let end = obs.iter().map(|p| p[p.len() - 1].0).min().unwrap();
    if start > end {
        return Err(Error::EmptyIntersection);
    }
    let n = ((end - start) / period) as usize + 1;

    let series = fleet
        .series()
        .iter()
        .zip(&obs)
        .map(|(s, pts)| {
            let mut values = Vec::with_capacity(n);
            let mut seg = 0;
            for i in 0..n {
                let t = start + i as i64 * period;
                while seg + 1 < pts.len() - 1 && pts[seg + 1].0 <= t {
                    seg += 1;
                }
                values.push(interpolate(pts[seg], pts[seg + 1], t));
            }
            PanelSeries {
                panel_id: s.panel_id.clone(),
                start_time: start,
                period,
                values,
            }
        })
        .collect();
    Fleet::new(series)
}

fn interpolate((t0, v0): (i64, f64), (t1, v1): (i64, f64), t: i64) -> f64 {
    if t == t0 {
        v0
    } else if t == t1 {
        v1
    } else {
        v0 + (v1 - v0) * ((t - t0) as f64 / (t1 - t0) as f64)
    }
}

/// Linearly interpolates interior gaps of at most `max_gap` samples.
pub fn fill_missing(series: &PanelSeries, max_gap: usize) -> Result<PanelSeries> {
    let mut values = series.values.clone();
    let n = values.len();
    let mut i = 0;
    while i < n {
        if !values[i].is_nan() {
            i += 1;
            continue;
        }
        let gap_start = i;
        while i < n && values[i].is_nan() {
            i += 1;
        }
        let len = i - gap_start;
        if gap_start == 0 || i == n {
            return Err(Error::UnboundedGap {
                panel_id: series.panel_id.clone(),
            });
        }
        if len > max_gap {
            return Err(Error::GapTooLong {
                panel_id: series.panel_id.clone(),
                start_time: series.time_at(gap_start),
                len,
                max_gap,
            });
        }
        let left = values[gap_start - 1];
        let right = values[i];
        let span = (len + 1) as f64;
        for (k, slot) in values[gap_start..i].iter_mut().enumerate() {
            *slot = left + (right - left) * ((k + 1) as f64 / span);
        }
    }
    Ok(series.with_values(series.start_time, values))
}

/// Cuts every series of an aligned fleet down to `window`.
pub fn slice_window(fleet: &Fleet, window: WindowSpec) -> Result<Fleet> {
    fleet.require_aligned()?;
    if window.length < 2 {
        return Err(Error::InvalidWindow(format!(
            "length must be at least 2, got {}",
            window.length
        )));
    }
    let first = &fleet.series()[0];
    let period = first.period;
    if window.start_offset < 0 || window.start_offset % period != 0 {
        return Err(Error::InvalidWindow(format!(
            "offset {} s is not a non-negative multiple of the {} s period",
            window.start_offset, period
        )));
    }
    let from = (window.start_offset / period) as usize;
    let to = from + window.length;
    if to > first.len() {
        return Err(Error::InvalidWindow(format!(
            "samples {from}..{to} exceed series length {}",
            first.len()
        )));
    }
    let series = fleet
        .series()
        .iter()
        .map(|s| s.with_values(s.time_at(from), s.values[from..to].to_vec()))
        .collect();
    Fleet::new(series)
}

/// Rescales a series to zero mean and unit (population) standard deviation.
pub fn znormalize(series: &PanelSeries) -> Result<PanelSeries> {
    if !series.is_complete() {
        return Err(Error::InvalidSeries(format!(
            "panel {}: cannot normalize a series with gaps",
            series.panel_id
        )));
    }
    let n = series.len() as f64;
    if series.len() < 2 {
        return Err(Error::ZeroVariance {
            panel_id: series.panel_id.clone(),
        });
    }
    let mean = series.values.iter().sum::<f64>() / n;
    let var = series.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd.is_nan() || sd <= 0.0 || sd <= f64::EPSILON * mean.abs() {
        return Err(Error::ZeroVariance {
            panel_id: series.panel_id.clone(),
        });
    }
    let values = series.values.iter().map(|v| (v - mean) / sd).collect();
    Ok(series.with_values(series.start_time, values))
}

/// Drops the leading and trailing samples where the brightest panel reads below `threshold`.
///
/// Interior dark stretches are kept so the grid stays contiguous. Returns the fleet
/// unchanged when no sample reaches the threshold.
pub fn trim_dark(fleet: &Fleet, threshold: f64) -> Result<Fleet> {
    let len = fleet.series_len()?;
    let lit = |i: usize| {
        fleet
            .series()
            .iter()
            .map(|s| s.values[i])
            .fold(f64::NEG_INFINITY, f64::max)
            >= threshold
    };
    let Some(first) = (0..len).find(|&i| lit(i)) else {
        return Ok(fleet.clone());
    };
    let last = (0..len).rev().find(|&i| lit(i)).unwrap();
    // Keep at least two samples so the result is still a valid window.
    let last = last.max((first + 1).min(len - 1));
    let first = first.min(last.saturating_sub(1));
    let period = fleet.series()[0].period;
    slice_window(fleet, WindowSpec::new(first as i64 * period, last - first + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(id: &str, start: i64, values: &[f64]) -> PanelSeries {
        PanelSeries::new(id, start, 60, values.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(PanelSeries::new("a", 0, 60, vec![]).is_err());
        assert!(PanelSeries::new("a", 0, 60, vec![1.0, f64::NAN]).is_err());
        assert!(PanelSeries::new("a", 0, 0, vec![1.0]).is_err());
    }

    #[test]
    fn fleet_rejects_duplicate_ids() {
        let err = Fleet::new(vec![series("a", 0, &[1.0]), series("a", 0, &[2.0])]);
        assert!(matches!(err, Err(Error::InvalidFleet(_))));
    }

    #[test]
    fn alignment_flag() {
        let f = Fleet::new(vec![series("a", 0, &[1.0, 2.0]), series("b", 0, &[3.0, 4.0])]).unwrap();
        assert!(f.is_grid_aligned());
        let f = Fleet::new(vec![series("a", 0, &[1.0, 2.0]), series("b", 60, &[3.0, 4.0])]).unwrap();
        assert!(!f.is_grid_aligned());
    }

    #[test]
    fn align_identity_on_shared_grid() {
        let f = Fleet::new(vec![series("a", 0, &[1.0, 2.0, 3.0]), series("b", 0, &[4.0, 5.0, 6.0])]).unwrap();
        assert_eq!(align_to_grid(&f, 60).unwrap(), f);
    }

    #[test]
    fn align_linear_midpoint() {
        let s = PanelSeries::new("a", 0, 120, vec![4.0, 8.0]).unwrap();
        let f = align_to_grid(&Fleet::new(vec![s]).unwrap(), 60).unwrap();
        assert_eq!(f.series()[0].values(), &[4.0, 6.0, 8.0]);
    }

    #[test]
    fn align_uses_intersection_of_extents() {
        let a = series("a", 0, &[0.0; 11]);
        let b = series("b", 120, &[1.0; 11]);
        let f = align_to_grid(&Fleet::new(vec![a, b]).unwrap(), 60).unwrap();
        let s = &f.series()[0];
        assert_eq!(s.start_time(), 120);
        assert_eq!(s.end_time(), 600);
        assert!(f.is_grid_aligned());
    }

    #[test]
    fn align_empty_intersection() {
        let a = series("a", 0, &[0.0; 3]);
        let b = series("b", 600, &[1.0; 3]);
        assert!(matches!(
            align_to_grid(&Fleet::new(vec![a, b]).unwrap(), 60),
            Err(Error::EmptyIntersection)
        ));
    }

    #[test]
    fn align_bridges_gaps() {
        let s = PanelSeries::with_gaps("a", 0, 60, vec![Some(2.0), None, Some(4.0)]).unwrap();
        let f = align_to_grid(&Fleet::new(vec![s]).unwrap(), 60).unwrap();
        assert_eq!(f.series()[0].values(), &[2.0, 3.0, 4.0]);
    }

    #[test]
    fn fill_missing_cases() {
        let full = series("a", 0, &[1.0, 2.0]);
        assert_eq!(fill_missing(&full, 5).unwrap(), full);

        let s = PanelSeries::with_gaps("a", 0, 60, vec![Some(2.0), None, Some(4.0)]).unwrap();
        assert_eq!(fill_missing(&s, 5).unwrap().values(), &[2.0, 3.0, 4.0]);

        let mut samples = vec![Some(1.0)];
        samples.extend(std::iter::repeat_n(None, 10));
        samples.push(Some(1.0));
        let s = PanelSeries::with_gaps("p7", 0, 60, samples).unwrap();
        match fill_missing(&s, 5) {
            Err(Error::GapTooLong {
                panel_id,
                start_time,
                len,
                ..
            }) => {
                assert_eq!(panel_id, "p7");
                assert_eq!(start_time, 60);
                assert_eq!(len, 10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slice_cases() {
        let f = Fleet::new(vec![series("a", 0, &[1.0, 2.0, 3.0, 4.0])]).unwrap();
        assert_eq!(slice_window(&f, WindowSpec::new(0, 4)).unwrap(), f);
        let w = slice_window(&f, WindowSpec::new(60, 2)).unwrap();
        assert_eq!(w.series()[0].values(), &[2.0, 3.0]);
        assert_eq!(w.series()[0].start_time(), 60);
        assert!(slice_window(&f, WindowSpec::new(0, 1)).is_err());
        assert!(slice_window(&f, WindowSpec::new(180, 2)).is_err());
        assert!(slice_window(&f, WindowSpec::new(30, 2)).is_err());
    }

    #[test]
    fn midday_three_sample_window() {
        let f = Fleet::new(vec![series("a", 0, &vec![1.0; 1440]), series("b", 0, &vec![2.0; 1440])]).unwrap();
        let w = slice_window(&f, WindowSpec::new(720 * 60, 3)).unwrap();
        assert!(w.series().iter().all(|s| s.len() == 3));
        assert_eq!(w.panel_ids(), vec!["a", "b"]);
    }

    #[test]
    fn znormalize_cases() {
        let z = znormalize(&series("a", 0, &[1.0, 2.0, 3.0])).unwrap();
        let n = z.len() as f64;
        let mean = z.values().iter().sum::<f64>() / n;
        let sd = (z.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-12);
        assert!((sd - 1.0).abs() < 1e-12);

        let twice = znormalize(&z).unwrap();
        for (a, b) in z.values().iter().zip(twice.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(
            znormalize(&series("c", 0, &[2.0, 2.0, 2.0])),
            Err(Error::ZeroVariance { .. })
        ));
    }

    #[test]
    fn trim_dark_keeps_daylight() {
        let f = Fleet::new(vec![
            series("a", 0, &[0.0, 0.0, 1.0, 0.0, 2.0, 0.0]),
            series("b", 0, &[0.0, 0.0, 0.5, 0.0, 1.0, 0.0]),
        ])
        .unwrap();
        let t = trim_dark(&f, 0.5).unwrap();
        assert_eq!(t.series()[0].values(), &[1.0, 0.0, 2.0]);
        assert_eq!(t.series()[0].start_time(), 120);
    }
}
