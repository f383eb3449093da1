//! CDR ingestion: delimiter-separated text with a grid id, timestamp, and
//! traffic volume column. Gzip input is detected by magic bytes and
//! decompressed transparently.

use std::collections::BTreeMap;
use std::io::Read;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};

/// Names of the columns to extract.
#[derive(Debug, Clone)]
pub struct ColumnMap {
    pub grid: String,
    pub timestamp: String,
    pub traffic: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            grid: "grid_id".into(),
            timestamp: "timestamp".into(),
            traffic: "traffic".into(),
        }
    }
}

/// One parsed row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdrRecord {
    pub grid_id: u32,
    pub timestamp_ms: i64,
    pub traffic: f64,
}

/// Parse counters surfaced to the caller.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParseStats {
    pub rows: usize,
    pub skipped_missing_traffic: usize,
    pub aggregated_duplicates: usize,
}

/// Days from civil date (Howard Hinnant's algorithm), days since 1970-01-01.
fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = (y - era * 400) as u64;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy as u64;
    era * 146_097 + doe as i64 - 719_468
}

/// Parse a timestamp as epoch milliseconds. Accepts a bare integer (epoch
/// ms), `YYYY-MM-DD HH:MM:SS`, or `YYYY-MM-DDTHH:MM:SS` (UTC assumed).
pub fn parse_timestamp(text: &str) -> Result<i64> {
    let t = text.trim();
    if let Ok(ms) = t.parse::<i64>() {
        return Ok(ms);
    }
    let bad = || Error::Format(format!("unparseable timestamp `{t}`"));
    let (date, time) = t
        .split_once(' ')
        .or_else(|| t.split_once('T'))
        .ok_or_else(bad)?;
    let mut dp = date.split('-');
    let y: i64 = dp.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let mo: u32 = dp.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let d: u32 = dp.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    if dp.next().is_some() || !(1..=12).contains(&mo) || !(1..=31).contains(&d) {
        return Err(bad());
    }
    let mut tp = time.split(':');
    let h: i64 = tp.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let mi: i64 = tp.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let s: f64 = tp.next().unwrap_or("0").parse().map_err(|_| bad())?;
    if tp.next().is_some() || !(0..24).contains(&h) || !(0..60).contains(&mi) {
        return Err(bad());
    }
    let days = days_from_civil(y, mo, d);
    Ok(days * 86_400_000 + h * 3_600_000 + mi * 60_000 + (s * 1000.0).round() as i64)
}

fn detect_delimiter(header: &str) -> char {
    if header.contains('\t') {
        '\t'
    } else {
        ','
    }
}

/// Parse CDR rows from a byte stream.
///
/// Rows with a missing traffic field are skipped and counted; duplicate
/// (grid, timestamp) rows are aggregated by summation. Output is sorted by
/// (grid_id, timestamp).
pub fn parse_cdr(
    input: &mut dyn Read,
    columns: &ColumnMap,
    delimiter: Option<char>,
) -> Result<(Vec<CdrRecord>, ParseStats)> {
    let mut raw = Vec::new();
    input.read_to_end(&mut raw)?;
    // Gzip magic: 0x1f 0x8b.
    let text = if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = String::new();
        GzDecoder::new(&raw[..]).read_to_string(&mut out)?;
        out
    } else {
        String::from_utf8(raw).map_err(|_| Error::Format("input is not UTF-8".into()))?
    };
    parse_cdr_text(&text, columns, delimiter)
}

/// Parse CDR rows from already-decoded text.
pub fn parse_cdr_text(
    text: &str,
    columns: &ColumnMap,
    delimiter: Option<char>,
) -> Result<(Vec<CdrRecord>, ParseStats)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty CDR input".into()))?;
    let delim = delimiter.unwrap_or_else(|| detect_delimiter(header));
    let names: Vec<&str> = header.split(delim).map(str::trim).collect();
    let col = |name: &str| -> Result<usize> {
        names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::Format(format!("header is missing column `{name}`: {names:?}")))
    };
    let grid_col = col(&columns.grid)?;
    let ts_col = col(&columns.timestamp)?;
    let traffic_col = col(&columns.traffic)?;

    let mut stats = ParseStats::default();
    let mut merged: BTreeMap<(u32, i64), f64> = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delim).collect();
        let need = grid_col.max(ts_col).max(traffic_col);
        if fields.len() <= need {
            return Err(Error::Format(format!(
                "line {}: expected at least {} fields, got {}",
                lineno + 2,
                need + 1,
                fields.len()
            )));
        }
        let traffic_text = fields[traffic_col].trim();
        if traffic_text.is_empty() {
            stats.skipped_missing_traffic += 1;
            continue;
        }
        let grid_id: u32 = fields[grid_col].trim().parse().map_err(|_| {
            Error::Format(format!(
                "line {}: bad grid id `{}`",
                lineno + 2,
                fields[grid_col]
            ))
        })?;
        let timestamp_ms = parse_timestamp(fields[ts_col])?;
        let traffic: f64 = traffic_text.parse().map_err(|_| {
            Error::Format(format!("line {}: bad traffic `{traffic_text}`", lineno + 2))
        })?;
        stats.rows += 1;
        if let Some(existing) = merged.get_mut(&(grid_id, timestamp_ms)) {
            *existing += traffic;
            stats.aggregated_duplicates += 1;
        } else {
            merged.insert((grid_id, timestamp_ms), traffic);
        }
    }
    let records = merged
        .into_iter()
        .map(|((grid_id, timestamp_ms), traffic)| CdrRecord {
            grid_id,
            timestamp_ms,
            traffic,
        })
        .collect();
    Ok((records, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use flate2::Compression;
    use std::io::Write;

    const HEADER: &str = "grid_id\ttimestamp\ttraffic\n";

    #[test]
    fn parses_tab_separated_row() {
        let text = format!("{HEADER}0\t2013-11-01 00:00:00\t11.028366381681\n");
        let (recs, stats) = parse_cdr_text(&text, &ColumnMap::default(), None).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].grid_id, 0);
        assert_eq!(recs[0].traffic, 11.028366381681);
        assert_eq!(
            recs[0].timestamp_ms,
            parse_timestamp("2013-11-01 00:00:00").unwrap()
        );
        assert_eq!(stats.rows, 1);
    }

    #[test]
    fn missing_traffic_skipped_with_count() {
        let text = format!("{HEADER}0\t2013-11-01 00:00:00\t\n1\t2013-11-01 00:00:00\t2.5\n");
        let (recs, stats) = parse_cdr_text(&text, &ColumnMap::default(), None).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(stats.skipped_missing_traffic, 1);
    }

    #[test]
    fn duplicate_rows_sum() {
        let text = format!("{HEADER}5\t2013-11-01 00:10:00\t1.0\n5\t2013-11-01 00:10:00\t2.0\n");
        let (recs, stats) = parse_cdr_text(&text, &ColumnMap::default(), None).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].traffic, 3.0);
        assert_eq!(stats.aggregated_duplicates, 1);
    }

    #[test]
    fn bad_header_is_format_error() {
        let text = "a\tb\tc\n1\t2\t3\n";
        assert!(matches!(
            parse_cdr_text(text, &ColumnMap::default(), None),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn output_sorted_by_grid_then_time() {
        let text = format!(
            "{HEADER}2\t2013-11-01 00:10:00\t1\n1\t2013-11-01 00:20:00\t2\n1\t2013-11-01 00:00:00\t3\n"
        );
        let (recs, _) = parse_cdr_text(&text, &ColumnMap::default(), None).unwrap();
        let keys: Vec<(u32, i64)> = recs.iter().map(|r| (r.grid_id, r.timestamp_ms)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(recs[0].grid_id, 1);
        assert_eq!(recs[0].traffic, 3.0);
    }

    #[test]
    fn epoch_ms_and_iso_t_forms() {
        assert_eq!(parse_timestamp("86400000").unwrap(), 86_400_000);
        assert_eq!(parse_timestamp("1970-01-02T00:00:00").unwrap(), 86_400_000);
        assert_eq!(
            parse_timestamp("2013-11-01 00:00:00").unwrap(),
            1_383_264_000_000
        );
    }

    #[test]
    fn comma_delimiter_detected() {
        let text = "grid_id,timestamp,traffic\n7,0,4.5\n";
        let (recs, _) = parse_cdr_text(text, &ColumnMap::default(), None).unwrap();
        assert_eq!(recs[0].grid_id, 7);
    }

    #[test]
    fn gzip_transparent() {
        let text = format!("{HEADER}3\t0\t9.5\n");
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(text.as_bytes()).unwrap();
        let gz = enc.finish().unwrap();
        let (recs, _) = parse_cdr(&mut gz.as_slice(), &ColumnMap::default(), None).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].traffic, 9.5);
    }
}
