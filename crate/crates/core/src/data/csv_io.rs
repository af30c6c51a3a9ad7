//! Long-format panel CSV: `date,station_id,count`, one row per station-day.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use super::{CalendarSpec, DataError, Result, RidershipPanel};

/// What ingestion had to repair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub rows: usize,
    /// Station-day cells absent from the file, filled with 0.
    pub imputed_cells: usize,
    /// Dates with no rows at all.
    pub missing_dates: Vec<NaiveDate>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub panel: RidershipPanel,
    pub report: IngestReport,
}

pub fn ingest_csv(path: &Path, calendar: &CalendarSpec) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_panel_csv(file, calendar)
}

pub fn read_panel_csv<R: Read>(reader: R, calendar: &CalendarSpec) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let expected = ["date", "station_id", "count"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| !h.eq_ignore_ascii_case(e)) {
        return Err(DataError::Malformed {
            line: 1,
            message: format!("expected header `date,station_id,count`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut station_order: Vec<String> = Vec::new();
    let mut station_index: HashMap<String, usize> = HashMap::new();
    let mut cells: BTreeMap<(NaiveDate, usize), u64> = BTreeMap::new();
    let mut rows = 0usize;

    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(DataError::Malformed {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| DataError::Malformed {
            line,
            message: format!("invalid date {:?}: {e}", &record[0]),
        })?;
        let station = record[1].to_string();
        if station.is_empty() {
            return Err(DataError::Malformed {
                line,
                message: "empty station_id".into(),
            });
        }
        let count: i64 = record[2].parse().map_err(|e| DataError::Malformed {
            line,
            message: format!("invalid count {:?}: {e}", &record[2]),
        })?;
        if count < 0 {
            return Err(DataError::NegativeCount {
                line,
                station,
                date,
                count,
            });
        }
        let idx = *station_index.entry(station.clone()).or_insert_with(|| {
            station_order.push(station.clone());
            station_order.len() - 1
        });
        if cells.insert((date, idx), count as u64).is_some() {
            return Err(DataError::DuplicateCell { line, station, date });
        }
        rows += 1;
    }

    let (Some(&(first, _)), Some(&(last, _))) = (cells.keys().next(), cells.keys().next_back()) else {
        return Err(DataError::Empty);
    };
    let n_days = (last - first).num_days() as usize + 1;
    let n_stations = station_order.len();
    let mut counts = vec![vec![0u64; n_days]; n_stations];
    let mut present = vec![vec![false; n_days]; n_stations];
    for (&(date, s), &c) in &cells {
        let day = (date - first).num_days() as usize;
        counts[s][day] = c;
        present[s][day] = true;
    }

    let mut report = IngestReport {
        rows,
        ..Default::default()
    };
    for day in 0..n_days {
        let missing = (0..n_stations).filter(|&s| !present[s][day]).count();
        report.imputed_cells += missing;
        if missing == n_stations {
            report.missing_dates.push(first + chrono::Days::new(day as u64));
        }
    }
    if !report.missing_dates.is_empty() {
        report.warnings.push(format!(
            "dates are not contiguous: {} missing day(s) filled with 0, first {}",
            report.missing_dates.len(),
            report.missing_dates[0]
        ));
    }
    if report.imputed_cells > 0 {
        report
            .warnings
            .push(format!("{} cell(s) imputed with 0", report.imputed_cells));
    }

    let panel = RidershipPanel::new(station_order, first, counts, calendar)?;
    Ok(Ingested { panel, report })
}

/// Writes the panel in the same long format, date-major with stations in panel order.
pub fn write_panel_csv<W: Write>(panel: &RidershipPanel, writer: W) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(writer);
    writeln!(out, "date,station_id,count")?;
    for day in 0..panel.n_days() {
        let date = panel.date(day);
        for (s, name) in panel.stations().iter().enumerate() {
            writeln!(out, "{date},{name},{}", panel.count(s, day))?;
        }
    }
    out.flush()
}

fn csv_error(e: csv::Error, fallback_line: u64) -> DataError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    DataError::Malformed {
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(text: &str) -> Result<Ingested> {
        read_panel_csv(text.as_bytes(), &CalendarSpec::default())
    }

    #[test]
    fn minimal_panel() {
        let got = ingest("date,station_id,count\n2019-11-20,s1,10\n2019-11-21,s1,12\n2019-11-22,s1,9\n").unwrap();
        assert_eq!(got.panel.n_stations(), 1);
        assert_eq!(got.panel.n_days(), 3);
        assert_eq!(got.panel.series(0), &[10, 12, 9]);
        assert_eq!(got.report.imputed_cells, 0);
        assert!(got.report.warnings.is_empty());
    }

    #[test]
    fn missing_middle_day_is_imputed() {
        let got = ingest("date,station_id,count\n2019-11-20,s1,10\n2019-11-22,s1,9\n").unwrap();
        assert_eq!(got.panel.series(0), &[10, 0, 9]);
        assert_eq!(got.report.imputed_cells, 1);
        assert_eq!(got.report.missing_dates.len(), 1);
        assert!(got.report.warnings.iter().any(|w| w.contains("1 cell(s) imputed")));
    }

    #[test]
    fn missing_station_cell_is_imputed() {
        let got = ingest("date,station_id,count\n2019-11-20,a,1\n2019-11-20,b,2\n2019-11-21,a,3\n").unwrap();
        assert_eq!(got.panel.series(1), &[2, 0]);
        assert_eq!(got.report.imputed_cells, 1);
        assert!(got.report.missing_dates.is_empty());
    }

    #[test]
    fn negative_count_names_line() {
        let err = ingest("date,station_id,count\n2019-11-20,station_9,4\n2019-11-21,station_9,-5\n").unwrap_err();
        match err {
            DataError::NegativeCount { line, count, .. } => {
                assert_eq!(line, 3);
                assert_eq!(count, -5);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_rows_name_line() {
        let err = ingest("date,station_id,count\n2019-11-20,a,1\n2019-13-01,a,1\n").unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 3, .. }), "{err}");
        let err = ingest("date,station_id,count\n2019-11-20,a,x\n").unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 2, .. }), "{err}");
        let err = ingest("date,station_id,count\n2019-11-20,a\n").unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 2, .. }), "{err}");
        assert!(ingest("day,station,count\n").is_err());
        assert!(matches!(ingest("date,station_id,count\n"), Err(DataError::Empty)));
    }

    #[test]
    fn crlf_and_duplicates() {
        let got = ingest("date,station_id,count\r\n2019-11-20,a,1\r\n2019-11-21,a,2\r\n").unwrap();
        assert_eq!(got.panel.series(0), &[1, 2]);
        let err = ingest("date,station_id,count\n2019-11-20,a,1\n2019-11-20,a,2\n").unwrap_err();
        assert!(matches!(err, DataError::DuplicateCell { line: 3, .. }));
    }

    #[test]
    fn export_round_trip() {
        let text = "date,station_id,count\n2019-11-20,b,1\n2019-11-20,a,2\n2019-11-21,b,3\n2019-11-21,a,0\n";
        let first = ingest(text).unwrap().panel;
        let mut buf = Vec::new();
        write_panel_csv(&first, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), text);
        let second = ingest(std::str::from_utf8(&buf).unwrap()).unwrap().panel;
        assert_eq!(first, second);
    }
}
