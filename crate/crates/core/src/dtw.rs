//! Dynamic time warping over scalar sequences.
//!
//! Local cost is the squared difference and the reported distance is the square
//! root of the minimal accumulated cost, so a radius-0 band on equal lengths
//! gives the Euclidean distance. Steps are the classic `(i-1, j)`, `(i, j-1)`,
//! `(i-1, j-1)` without weights.

use std::collections::VecDeque;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Fleet;

/// Sakoe-Chiba band: alignments must satisfy `|i - j| <= radius`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandConstraint {
    #[default]
    Unconstrained,
    Radius(usize),
}

impl BandConstraint {
    pub fn radius(self) -> Option<usize> {
        match self {
            BandConstraint::Unconstrained => None,
            BandConstraint::Radius(r) => Some(r),
        }
    }

    pub(crate) fn check(self, len_x: usize, len_y: usize) -> Result<()> {
        if len_x == 0 || len_y == 0 {
            return Err(Error::EmptyInput);
        }
        if let BandConstraint::Radius(radius) = self {
            if radius < len_x.abs_diff(len_y) {
                return Err(Error::InfeasibleBand { radius, len_x, len_y });
            }
        }
        Ok(())
    }

    /// Columns `lo..=hi` of row `i` that lie inside the band, for `cols` columns.
    #[inline]
    fn columns(self, i: usize, cols: usize) -> (usize, usize) {
        match self {
            BandConstraint::Unconstrained => (0, cols - 1),
            BandConstraint::Radius(r) => (i.saturating_sub(r), (i + r).min(cols - 1)),
        }
    }

    pub fn contains(self, i: usize, j: usize) -> bool {
        self.radius().is_none_or(|r| i.abs_diff(j) <= r)
    }
}

impl std::fmt::Display for BandConstraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BandConstraint::Unconstrained => f.write_str("unconstrained"),
            BandConstraint::Radius(r) => write!(f, "radius {r}"),
        }
    }
}

#[inline]
fn cost(a: f64, b: f64) -> f64 {
    let d = a - b;
    d * d
}

/// DTW distance between `x` and `y`.
pub fn dtw(x: &[f64], y: &[f64], band: BandConstraint) -> Result<f64> {
    band.check(x.len(), y.len())?;
    Ok(accumulated_cost(x, y, band).sqrt())
}

/// Minimal accumulated squared cost, keeping two rows sized to the shorter input.
///
/// Transposing the problem leaves every cell's operands unchanged, so the result
/// is bit-identical to the full-matrix recurrence in [`dtw_path`] and symmetric.
pub(crate) fn accumulated_cost(x: &[f64], y: &[f64], band: BandConstraint) -> f64 {
    let (rows, cols) = if x.len() >= y.len() { (x, y) } else { (y, x) };
    let m = cols.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut curr = vec![f64::INFINITY; m];
    for (i, &a) in rows.iter().enumerate() {
        let (lo, hi) = band.columns(i, m);
        if lo > 0 {
            curr[lo - 1] = f64::INFINITY;
        }
        if hi + 1 < m {
            curr[hi + 1] = f64::INFINITY;
        }
        let mut diag = origin_or_diag(&prev, i, lo);
        let mut left = f64::INFINITY;
        for ((out, &b), &up) in curr[lo..=hi].iter_mut().zip(&cols[lo..=hi]).zip(&prev[lo..=hi]) {
            let v = cost(a, b) + min3(diag, up, left);
            *out = v;
            left = v;
            diag = up;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m - 1]
}

/// Smallest of three non-NaN costs, selected with the same comparisons as the path recurrence.
#[inline(always)]
fn min3(diag: f64, up: f64, left: f64) -> f64 {
    let mut best = diag;
    if up < best {
        best = up;
    }
    if left < best {
        best = left;
    }
    best
}

/// Diagonal predecessor of the first banded cell of row `i`; the origin reads as 0.
#[inline]
fn origin_or_diag(prev: &[f64], i: usize, lo: usize) -> f64 {
    if lo > 0 {
        prev[lo - 1]
    } else if i == 0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// An alignment between two sequences, as `(i, j)` index pairs from `(0, 0)` to the last pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WarpingPath(Vec<(usize, usize)>);

impl WarpingPath {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks boundary, step and band conditions for sequences of the given lengths.
    pub fn is_valid(&self, len_x: usize, len_y: usize, band: BandConstraint) -> bool {
        let p = &self.0;
        if p.first() != Some(&(0, 0)) || p.last() != Some(&(len_x - 1, len_y - 1)) {
            return false;
        }
        let steps_ok = p.windows(2).all(|w| {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
        });
        steps_ok && p.iter().all(|&(i, j)| band.contains(i, j))
    }

    /// Sum of squared differences along the path.
    pub fn cost(&self, x: &[f64], y: &[f64]) -> f64 {
        self.0.iter().map(|&(i, j)| cost(x[i], y[j])).sum()
    }
}

const STEP_DIAG: u8 = 0;
const STEP_I: u8 = 1;
const STEP_J: u8 = 2;

/// DTW distance together with an optimal warping path.
///
/// Ties are resolved in the order diagonal, then advancing `i`, then advancing `j`,
/// so the path is reproducible.
pub fn dtw_path(x: &[f64], y: &[f64], band: BandConstraint) -> Result<(f64, WarpingPath)> {
    let (total, path) = dtw_path_cost(x, y, band)?;
    Ok((total.sqrt(), path))
}

/// Like [`dtw_path`] but returns the accumulated squared cost instead of its root.
pub(crate) fn dtw_path_cost(x: &[f64], y: &[f64], band: BandConstraint) -> Result<(f64, WarpingPath)> {
    band.check(x.len(), y.len())?;
    let (n, m) = (x.len(), y.len());
    let mut steps = vec![STEP_DIAG; n * m];
    let mut prev = vec![f64::INFINITY; m];
    let mut curr = vec![f64::INFINITY; m];
    for i in 0..n {
        let (lo, hi) = band.columns(i, m);
        if lo > 0 {
            curr[lo - 1] = f64::INFINITY;
        }
        if hi + 1 < m {
            curr[hi + 1] = f64::INFINITY;
        }
        let row = &mut steps[i * m..(i + 1) * m];
        let a = x[i];
        let mut diag = origin_or_diag(&prev, i, lo);
        let mut left = f64::INFINITY;
        for (((out, step), &b), &up) in curr[lo..=hi]
            .iter_mut()
            .zip(&mut row[lo..=hi])
            .zip(&y[lo..=hi])
            .zip(&prev[lo..=hi])
        {
            let (mut best, mut s) = (diag, STEP_DIAG);
            if up < best {
                (best, s) = (up, STEP_I);
            }
            if left < best {
                (best, s) = (left, STEP_J);
            }
            *step = s;
            let v = cost(a, b) + best;
            *out = v;
            left = v;
            diag = up;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    let total = prev[m - 1];

    let mut pairs = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    pairs.push((i, j));
    while (i, j) != (0, 0) {
        match steps[i * m + j] {
            STEP_DIAG => {
                i -= 1;
                j -= 1;
            }
            STEP_I => i -= 1,
            _ => j -= 1,
        }
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok((total, WarpingPath(pairs)))
}

/// Euclidean distance between equal-length sequences.
pub fn euclidean(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(x.iter().zip(y).map(|(&a, &b)| cost(a, b)).sum::<f64>().sqrt())
}

/// Running minimum and maximum of a sequence over `[i - radius, i + radius]`.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Envelope {
    pub fn new(series: &[f64], radius: usize) -> Self {
        let n = series.len();
        let mut lower = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        // Monotone deques of indices: front holds the current extreme.
        let mut min_q: VecDeque<usize> = VecDeque::new();
        let mut max_q: VecDeque<usize> = VecDeque::new();
        let mut next = 0;
        for i in 0..n {
            let hi = (i + radius).min(n - 1);
            while next <= hi {
                let v = series[next];
                while min_q.back().is_some_and(|&b| series[b] >= v) {
                    min_q.pop_back();
                }
                min_q.push_back(next);
                while max_q.back().is_some_and(|&b| series[b] <= v) {
                    max_q.pop_back();
                }
                max_q.push_back(next);
                next += 1;
            }
            let lo = i.saturating_sub(radius);
            while min_q.front().is_some_and(|&f| f < lo) {
                min_q.pop_front();
            }
            while max_q.front().is_some_and(|&f| f < lo) {
                max_q.pop_front();
            }
            lower.push(series[min_q[0]]);
            upper.push(series[max_q[0]]);
        }
        Self { lower, upper }
    }

    /// LB_Keogh of `x` against the series this envelope was built from.
    pub fn lower_bound(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.lower.len() {
            return Err(Error::LengthMismatch {
                expected: self.lower.len(),
                actual: x.len(),
            });
        }
        Ok(self.lower_bound_cost(x).sqrt())
    }

    /// Squared form of [`lower_bound`](Self::lower_bound); `x` must match the envelope length.
    pub(crate) fn lower_bound_cost(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| {
                if v > hi {
                    cost(v, hi)
                } else if v < lo {
                    cost(v, lo)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// LB_Keogh lower bound on `dtw(x, y, Radius(radius))` for equal-length inputs.
pub fn lb_keogh(x: &[f64], y: &[f64], radius: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            actual: x.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    Envelope::new(y, radius).lower_bound(x)
}

/// Symmetric matrix of pairwise DTW distances, in fleet order.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    panel_ids: Vec<String>,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    panel_ids: Vec<String>,
    entries: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    /// Computes the upper triangle in parallel and mirrors it.
    pub fn from_series(panel_ids: Vec<String>, series: &[&[f64]], band: BandConstraint) -> Result<Self> {
        let n = series.len();
        if panel_ids.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: panel_ids.len(),
            });
        }
        for s in series {
            band.check(s.len(), series[0].len())?;
        }
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let values: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| accumulated_cost(series[i], series[j], band).sqrt())
            .collect();
        let mut entries = vec![0.0; n * n];
        for (&(i, j), d) in pairs.iter().zip(values) {
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
        Ok(Self { panel_ids, entries })
    }

    pub fn from_rows(panel_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = panel_ids.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidConfig(format!("distance matrix must be {n}x{n}")));
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                let b = rows[j][i];
                if a.is_nan() || a < 0.0 || a != b || (i == j && a != 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "distance matrix entry ({i}, {j}) breaks symmetry, sign or zero diagonal"
                    )));
                }
            }
        }
        Ok(Self {
            panel_ids,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.panel_ids.len()
    }

    pub fn panel_ids(&self) -> &[String] {
        &self.panel_ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.entries[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i).to_vec()).collect()
    }

    /// The sub-matrix over `indices`, in the given order.
    pub fn restrict(&self, indices: &[usize]) -> DistanceMatrix {
        let entries = indices
            .iter()
            .flat_map(|&i| indices.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        DistanceMatrix {
            panel_ids: indices.iter().map(|&i| self.panel_ids[i].clone()).collect(),
            entries,
        }
    }

    pub fn write_json(&self, writer: impl Write) -> Result<()> {
        let doc = MatrixJson {
            panel_ids: self.panel_ids.clone(),
            entries: self.rows(),
        };
        serde_json::to_writer_pretty(writer, &doc)?;
        Ok(())
    }

    pub fn read_json(reader: impl Read) -> Result<Self> {
        let doc: MatrixJson = serde_json::from_reader(reader)?;
        Self::from_rows(doc.panel_ids, doc.entries)
    }

    /// Header row of panel ids followed by one row per panel.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.panel_ids)?;
        for i in 0..self.n() {
            w.write_record(self.row(i).iter().map(|v| format_f64(*v)))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let panel_ids: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::InvalidConfig(format!("bad matrix entry `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(panel_ids, rows)
    }
}

/// Shortest representation that parses back to the same value.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// DTW distances between every pair of panels of an aligned fleet.
pub fn distance_matrix(fleet: &Fleet, band: BandConstraint) -> Result<DistanceMatrix> {
    fleet.require_aligned()?;
    if fleet.len() < 2 {
        return Err(Error::TooFewPanels {
            needed: 2,
            actual: fleet.len(),
        });
    }
    let series: Vec<&[f64]> = fleet.series().iter().map(|s| s.values()).collect();
    DistanceMatrix::from_series(fleet.panel_ids(), &series, band)
}
