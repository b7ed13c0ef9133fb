//! Reading and writing the panel-current CSV format.
//!
//! Columns (header required, any order): `timestamp`, `panel_id`, `current_a`.
//! Timestamps are integer epoch seconds or ISO-8601; rows of different panels
//! may be interleaved but each panel's rows must be in increasing time order.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};
use crate::signal::{Fleet, PanelSeries, DEFAULT_PERIOD, NEGATIVE_TOLERANCE};

pub const COL_TIMESTAMP: &str = "timestamp";
pub const COL_PANEL: &str = "panel_id";
pub const COL_CURRENT: &str = "current_a";

/// Reads a fleet from a CSV file.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Fleet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, path)
}

/// Reads a fleet from any reader; `origin` is only used in error messages.
pub fn read_csv(reader: impl Read, origin: impl AsRef<Path>) -> Result<Fleet> {
    let origin = origin.as_ref().to_path_buf();
    let malformed = |line: u64, message: String| Error::MalformedRow {
        path: origin.clone(),
        line,
        message,
    };

    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(malformed(1, e.to_string())),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::NoRecords { path: origin });
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| malformed(1, format!("missing column `{name}`")))
    };
    let (ts_col, id_col, cur_col) = (column(COL_TIMESTAMP)?, column(COL_PANEL)?, column(COL_CURRENT)?);

    // Panels in order of first appearance.
    let mut panels: Vec<(String, Vec<(i64, f64)>)> = Vec::new();
    let mut index = std::collections::HashMap::new();

    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");

        let timestamp = parse_timestamp(field(ts_col))
            .ok_or_else(|| malformed(line, format!("bad timestamp `{}`", field(ts_col))))?;
        let panel_id = field(id_col);
        if panel_id.is_empty() {
            return Err(malformed(line, "empty panel_id".into()));
        }
        let mut value: f64 = field(cur_col)
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| malformed(line, format!("bad current `{}`", field(cur_col))))?;
        if value < NEGATIVE_TOLERANCE {
            return Err(Error::NegativeCurrent {
                panel_id: panel_id.to_string(),
                timestamp,
                value,
            });
        }
        if value < 0.0 {
            value = 0.0;
        }

        let slot = *index.entry(panel_id.to_string()).or_insert_with(|| {
            panels.push((panel_id.to_string(), Vec::new()));
            panels.len() - 1
        });
        let rows = &mut panels[slot].1;
        if let Some(&(previous, _)) = rows.last() {
            if timestamp <= previous {
                return Err(Error::NonMonotonicTimestamps {
                    panel_id: panel_id.to_string(),
                    previous,
                    timestamp,
                });
            }
        }
        rows.push((timestamp, value));
    }

    if panels.is_empty() {
        return Err(Error::NoRecords { path: origin });
    }
    let series = panels
        .into_iter()
        .map(|(id, rows)| to_grid(id, &rows))
        .collect::<Result<Vec<_>>>()?;
    Fleet::new(series)
}

/// Places observations on the coarsest uniform grid that contains all of them.
fn to_grid(panel_id: String, rows: &[(i64, f64)]) -> Result<PanelSeries> {
    let start = rows[0].0;
    let period = rows.windows(2).map(|w| w[1].0 - w[0].0).fold(0, gcd);
    let period = if period == 0 { DEFAULT_PERIOD } else { period };
    let len = ((rows[rows.len() - 1].0 - start) / period) as usize + 1;
    let mut samples = vec![None; len];
    for &(t, v) in rows {
        samples[((t - start) / period) as usize] = Some(v);
    }
    PanelSeries::with_gaps(panel_id, start, period, samples)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn parse_timestamp(s: &str) -> Option<i64> {
    if let Ok(t) = s.parse::<i64>() {
        return Some(t);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    // Naive timestamps are read as UTC.
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|t| t.and_utc().timestamp())
}

/// Writes a fleet in the ingestion format, rows ordered by time then fleet order.
/// Gap slots are omitted.
pub fn write_csv(fleet: &Fleet, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([COL_TIMESTAMP, COL_PANEL, COL_CURRENT])?;
    let mut rows: Vec<(i64, usize, f64)> = fleet
        .series()
        .iter()
        .enumerate()
        .flat_map(|(p, s)| s.observations().map(move |(t, v)| (t, p, v)))
        .collect();
    rows.sort_by_key(|&(t, p, _)| (t, p));
    for (t, p, v) in rows {
        w.write_record([t.to_string(), fleet.series()[p].panel_id().to_string(), v.to_string()])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<csv output>"),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<Fleet> {
        read_csv(text.as_bytes(), "test.csv")
    }

    #[test]
    fn two_aligned_panels() {
        let f = read(
            "timestamp,panel_id,current_a\n\
             0,a,1.0\n0,b,2.0\n60,a,1.5\n60,b,2.5\n120,a,2.0\n120,b,3.0\n",
        )
        .unwrap();
        assert_eq!(f.len(), 2);
        assert!(f.is_grid_aligned());
        assert_eq!(f.series()[1].values(), &[2.0, 2.5, 3.0]);
        assert_eq!(f.series()[0].period(), 60);
    }

    #[test]
    fn empty_file() {
        assert!(matches!(read(""), Err(Error::NoRecords { .. })));
        assert!(matches!(
            read("timestamp,panel_id,current_a\n"),
            Err(Error::NoRecords { .. })
        ));
    }

    #[test]
    fn gap_is_retained() {
        let f = read("timestamp,panel_id,current_a\n0,a,1\n60,a,2\n180,a,4\n").unwrap();
        assert!(!f.is_grid_aligned());
        let s = &f.series()[0];
        assert_eq!(s.len(), 4);
        assert_eq!(s.sample(2), None);
        assert_eq!(s.sample(3), Some(4.0));
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = read("timestamp,panel_id,current_a\n0,a,1\n60,a,abc\n").unwrap_err();
        match err {
            Error::MalformedRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(
            read("time,panel,current\n0,a,1\n"),
            Err(Error::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn non_monotonic_timestamps() {
        let err = read("timestamp,panel_id,current_a\n60,a,1\n0,a,2\n").unwrap_err();
        assert!(matches!(err, Error::NonMonotonicTimestamps { .. }));
        let err = read("timestamp,panel_id,current_a\n60,a,1\n60,a,2\n").unwrap_err();
        assert!(matches!(err, Error::NonMonotonicTimestamps { .. }));
    }

    #[test]
    fn negative_current_handling() {
        let f = read("timestamp,panel_id,current_a\n0,a,-0.05\n60,a,1\n").unwrap();
        assert_eq!(f.series()[0].values(), &[0.0, 1.0]);
        let err = read("timestamp,panel_id,current_a\n0,a,-0.5\n").unwrap_err();
        assert!(matches!(err, Error::NegativeCurrent { .. }));
    }

    #[test]
    fn iso_timestamps() {
        let f = read(
            "panel_id,timestamp,current_a\n\
             a,2021-06-21T10:00:00Z,1\na,2021-06-21T10:01:00+00:00,2\na,2021-06-21 10:02:00,3\n",
        )
        .unwrap();
        let s = &f.series()[0];
        assert_eq!(s.start_time(), 1_624_269_600);
        assert_eq!(s.period(), 60);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn write_then_read() {
        let f = Fleet::new(vec![
            PanelSeries::new("a", 100, 60, vec![0.1, 1.0 / 3.0, 2.5]).unwrap(),
            PanelSeries::new("b", 100, 60, vec![7.0, 0.0, 1e-17]).unwrap(),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice(), "mem").unwrap(), f);
    }
}
