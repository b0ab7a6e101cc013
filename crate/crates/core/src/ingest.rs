//! Hourly station-record ingestion and monthly aggregation.
//!
//! The input CSV carries one row per station-hour: a `timestamp` column
//! (`YYYY-MM-DD HH:00`, local civil time), a `station` column, and one
//! column per variable. Empty or unparseable numeric cells become missing
//! readings; rows with broken timestamps are skipped with a diagnostic;
//! duplicate (station, timestamp) rows keep the first occurrence.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{MonthStamp, TimeSeries};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing mandatory column '{0}' in the CSV header")]
    MissingColumn(String),
    #[error("CSV read failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("no records for station '{0}'")]
    EmptySelection(String),
    #[error("unknown variable name '{0}'")]
    UnknownVariable(String),
    #[error("latitude/longitude out of range: ({latitude}, {longitude})")]
    BadCoordinates { latitude: f64, longitude: f64 },
}

/// The measured variables, with the column names and units used throughout
/// the file formats.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum VariableKind {
    So2,
    Co,
    O3,
    No2,
    Pm10,
    Pm25,
    Cai,
    Temperature,
    Precipitation,
    WindSpeed,
    Pressure,
    Visibility,
}

impl VariableKind {
    pub const ALL: [VariableKind; 12] = [
        VariableKind::So2,
        VariableKind::Co,
        VariableKind::O3,
        VariableKind::No2,
        VariableKind::Pm10,
        VariableKind::Pm25,
        VariableKind::Cai,
        VariableKind::Temperature,
        VariableKind::Precipitation,
        VariableKind::WindSpeed,
        VariableKind::Pressure,
        VariableKind::Visibility,
    ];

    /// The six pollutant columns.
    pub const POLLUTANTS: [VariableKind; 6] = [
        VariableKind::So2,
        VariableKind::Co,
        VariableKind::O3,
        VariableKind::No2,
        VariableKind::Pm10,
        VariableKind::Pm25,
    ];

    /// The meteorological columns.
    pub const METEOROLOGICAL: [VariableKind; 5] = [
        VariableKind::Temperature,
        VariableKind::Precipitation,
        VariableKind::WindSpeed,
        VariableKind::Pressure,
        VariableKind::Visibility,
    ];

    pub fn column_name(&self) -> &'static str {
        match self {
            VariableKind::So2 => "SO2",
            VariableKind::Co => "CO",
            VariableKind::O3 => "O3",
            VariableKind::No2 => "NO2",
            VariableKind::Pm10 => "PM10",
            VariableKind::Pm25 => "PM25",
            VariableKind::Cai => "CAI",
            VariableKind::Temperature => "TEMP",
            VariableKind::Precipitation => "PRECIP",
            VariableKind::WindSpeed => "WIND",
            VariableKind::Pressure => "PRESSURE",
            VariableKind::Visibility => "VISIBILITY",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            VariableKind::So2 | VariableKind::Co | VariableKind::O3 | VariableKind::No2 => "ppm",
            VariableKind::Pm10 | VariableKind::Pm25 => "ug/m3",
            VariableKind::Cai => "index",
            VariableKind::Temperature => "degC",
            VariableKind::Precipitation => "mm",
            VariableKind::WindSpeed => "m/s",
            VariableKind::Pressure => "hPa",
            VariableKind::Visibility => "10m",
        }
    }

    /// Pollutant concentrations and the air-quality index cannot be
    /// negative; such cells are treated as missing on ingestion.
    pub fn requires_non_negative(&self) -> bool {
        matches!(
            self,
            VariableKind::So2
                | VariableKind::Co
                | VariableKind::O3
                | VariableKind::No2
                | VariableKind::Pm10
                | VariableKind::Pm25
                | VariableKind::Cai
        )
    }

    fn index(&self) -> usize {
        Self::ALL.iter().position(|v| v == self).expect("member")
    }
}

impl fmt::Display for VariableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column_name())
    }
}

impl FromStr for VariableKind {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .find(|v| v.column_name().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| IngestError::UnknownVariable(s.to_string()))
    }
}

/// Monitoring-site metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMeta {
    pub name: String,
    pub address: String,
    pub longitude: f64,
    pub latitude: f64,
}

impl StationMeta {
    pub fn new(
        name: impl Into<String>,
        address: impl Into<String>,
        longitude: f64,
        latitude: f64,
    ) -> Result<Self, IngestError> {
        if !(-180.0..=180.0).contains(&longitude) || !(-90.0..=90.0).contains(&latitude) {
            return Err(IngestError::BadCoordinates {
                latitude,
                longitude,
            });
        }
        Ok(Self {
            name: name.into(),
            address: address.into(),
            longitude,
            latitude,
        })
    }
}

/// A calendar hour in local civil time; no zone arithmetic is performed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DateHour {
    pub year: i32,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
}

impl DateHour {
    pub fn month_stamp(&self) -> MonthStamp {
        MonthStamp::new(self.year, self.month).expect("validated on parse")
    }

    /// Parses `YYYY-MM-DD HH:00` (the minute field is accepted but
    /// ignored).
    pub fn parse(s: &str) -> Option<Self> {
        let (date, time) = s.trim().split_once(' ')?;
        let mut date_parts = date.split('-');
        let year: i32 = date_parts.next()?.parse().ok()?;
        let month: u32 = date_parts.next()?.parse().ok()?;
        let day: u32 = date_parts.next()?.parse().ok()?;
        if date_parts.next().is_some() {
            return None;
        }
        let hour: u32 = time.split(':').next()?.parse().ok()?;
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) || hour > 23
        {
            return None;
        }
        Some(Self {
            year,
            month,
            day,
            hour,
        })
    }
}

impl fmt::Display for DateHour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:04}-{:02}-{:02} {:02}:00",
            self.year, self.month, self.day, self.hour
        )
    }
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
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
        _ => 0,
    }
}

/// One station-hour observation. Readings are indexed by [`VariableKind`];
/// absent or unparseable cells are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyRecord {
    pub timestamp: DateHour,
    pub station: String,
    readings: [Option<f64>; 12],
}

impl HourlyRecord {
    pub fn new(timestamp: DateHour, station: impl Into<String>) -> Self {
        Self {
            timestamp,
            station: station.into(),
            readings: [None; 12],
        }
    }

    pub fn reading(&self, variable: VariableKind) -> Option<f64> {
        self.readings[variable.index()]
    }

    pub fn set_reading(&mut self, variable: VariableKind, value: Option<f64>) {
        self.readings[variable.index()] = value;
    }
}

/// Column mapping for [`parse_hourly_csv`]. `timestamp` and `station` are
/// mandatory; variable columns are picked up when present in the header.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub timestamp_column: String,
    pub station_column: String,
    pub variable_columns: Vec<(String, VariableKind)>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp_column: "timestamp".to_string(),
            station_column: "station".to_string(),
            variable_columns: VariableKind::ALL
                .iter()
                .map(|v| (v.column_name().to_string(), *v))
                .collect(),
        }
    }
}

/// Row-level diagnostics collected while parsing.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ParseReport {
    pub rows_read: usize,
    pub duplicate_rows: usize,
    pub skipped_rows: Vec<RowIssue>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowIssue {
    /// 1-based data-row number (header excluded).
    pub row: usize,
    pub message: String,
}

/// Parses hourly records from a CSV byte stream. Records come back sorted
/// by (station, timestamp) with duplicates dropped (first occurrence kept).
pub fn parse_hourly_csv<R: Read>(
    source: R,
    schema: &CsvSchema,
) -> Result<(Vec<HourlyRecord>, ParseReport), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let ts_col = find(&schema.timestamp_column)
        .ok_or_else(|| IngestError::MissingColumn(schema.timestamp_column.clone()))?;
    let station_col = find(&schema.station_column)
        .ok_or_else(|| IngestError::MissingColumn(schema.station_column.clone()))?;
    let var_cols: Vec<(usize, VariableKind)> = schema
        .variable_columns
        .iter()
        .filter_map(|(name, kind)| find(name).map(|i| (i, *kind)))
        .collect();

    let mut report = ParseReport::default();
    let mut seen: HashSet<(String, DateHour)> = HashSet::new();
    let mut records = Vec::new();
    for (row_num, row) in reader.records().enumerate() {
        let row_num = row_num + 1;
        let row = row?;
        report.rows_read += 1;

        let raw_ts = row.get(ts_col).unwrap_or("");
        let Some(timestamp) = DateHour::parse(raw_ts) else {
            report.skipped_rows.push(RowIssue {
                row: row_num,
                message: format!("malformed timestamp '{raw_ts}'"),
            });
            continue;
        };
        let station = row.get(station_col).unwrap_or("").to_string();
        if station.is_empty() {
            report.skipped_rows.push(RowIssue {
                row: row_num,
                message: "empty station identifier".to_string(),
            });
            continue;
        }
        if !seen.insert((station.clone(), timestamp)) {
            report.duplicate_rows += 1;
            continue;
        }

        let mut record = HourlyRecord::new(timestamp, station);
        for &(col, kind) in &var_cols {
            let cell = row.get(col).unwrap_or("");
            let value = if cell.is_empty() {
                None
            } else {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .filter(|v| !kind.requires_non_negative() || *v >= 0.0)
            };
            record.set_reading(kind, value);
        }
        records.push(record);
    }

    records.sort_by(|a, b| {
        a.station
            .cmp(&b.station)
            .then(a.timestamp.cmp(&b.timestamp))
    });
    Ok((records, report))
}

/// Aggregates one station/variable to a monthly mean series. A month's
/// entry is missing unless its non-missing hourly count reaches
/// `min_coverage` of the hours in that calendar month (and at least one
/// reading exists).
pub fn monthly_mean(
    records: &[HourlyRecord],
    station: &str,
    variable: VariableKind,
    min_coverage: f64,
) -> Result<TimeSeries, IngestError> {
    let mut sums: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    let mut months_present: Option<(i64, i64)> = None;
    let mut any = false;
    for record in records.iter().filter(|r| r.station == station) {
        any = true;
        let key = record.timestamp.month_stamp().index();
        months_present = Some(match months_present {
            None => (key, key),
            Some((lo, hi)) => (lo.min(key), hi.max(key)),
        });
        if let Some(v) = record.reading(variable) {
            let entry = sums.entry(key).or_insert((0.0, 0));
            entry.0 += v;
            entry.1 += 1;
        }
    }
    if !any {
        return Err(IngestError::EmptySelection(station.to_string()));
    }
    let (first, last) = months_present.expect("at least one record");

    let values: Vec<Option<f64>> = (first..=last)
        .map(|key| {
            let stamp = MonthStamp::from_index(key);
            let hours = f64::from(days_in_month(stamp.year(), stamp.month()) * 24);
            match sums.get(&key) {
                Some(&(sum, count)) if count > 0 && count as f64 >= min_coverage * hours => {
                    Some(sum / count as f64)
                }
                _ => None,
            }
        })
        .collect();
    Ok(TimeSeries::new(MonthStamp::from_index(first), 12, values).expect("period 12"))
}

/// Station-by-variable table of means over all non-missing hourly readings.
#[derive(Debug, Clone, Serialize)]
pub struct MeansTable {
    pub stations: Vec<String>,
    pub variables: Vec<VariableKind>,
    pub entries: Vec<Vec<Option<f64>>>,
}

pub fn descriptive_means(
    records: &[HourlyRecord],
    stations: &[String],
    variables: &[VariableKind],
) -> MeansTable {
    let mut sums: HashMap<(usize, usize), (f64, usize)> = HashMap::new();
    let station_index: HashMap<&str, usize> = stations
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    for record in records {
        let Some(&si) = station_index.get(record.station.as_str()) else {
            continue;
        };
        for (vi, &variable) in variables.iter().enumerate() {
            if let Some(v) = record.reading(variable) {
                let entry = sums.entry((si, vi)).or_insert((0.0, 0));
                entry.0 += v;
                entry.1 += 1;
            }
        }
    }
    let entries = (0..stations.len())
        .map(|si| {
            (0..variables.len())
                .map(|vi| {
                    sums.get(&(si, vi))
                        .filter(|(_, c)| *c > 0)
                        .map(|(s, c)| s / *c as f64)
                })
                .collect()
        })
        .collect();
    MeansTable {
        stations: stations.to_vec(),
        variables: variables.to_vec(),
        entries,
    }
}

/// Distinct stations in record order of first appearance.
pub fn station_ids(records: &[HourlyRecord]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for r in records {
        if seen.insert(r.station.clone()) {
            out.push(r.station.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> CsvSchema {
        CsvSchema::default()
    }

    #[test]
    fn variable_names_and_units() {
        assert_eq!("PM25".parse::<VariableKind>().unwrap(), VariableKind::Pm25);
        assert_eq!("pm10".parse::<VariableKind>().unwrap(), VariableKind::Pm10);
        assert!("PM2.5".parse::<VariableKind>().is_err());
        assert_eq!(VariableKind::Pm25.unit(), "ug/m3");
        assert_eq!(VariableKind::So2.unit(), "ppm");
        assert_eq!(VariableKind::WindSpeed.column_name(), "WIND");
    }

    #[test]
    fn station_meta_validates_coordinates() {
        assert!(StationMeta::new("a", "b", 126.97, 37.56).is_ok());
        assert!(StationMeta::new("a", "b", 200.0, 37.56).is_err());
        assert!(StationMeta::new("a", "b", 126.97, 95.0).is_err());
    }

    #[test]
    fn date_hour_parsing() {
        let d = DateHour::parse("2015-03-07 09:00").unwrap();
        assert_eq!((d.year, d.month, d.day, d.hour), (2015, 3, 7, 9));
        assert_eq!(d.to_string(), "2015-03-07 09:00");
        assert!(DateHour::parse("2015-02-29 00:00").is_none()); // not a leap year
        assert!(DateHour::parse("2016-02-29 00:00").is_some());
        assert!(DateHour::parse("2015-13-01 00:00").is_none());
        assert!(DateHour::parse("2015-01-01 24:00").is_none());
        assert!(DateHour::parse("garbage").is_none());
    }

    #[test]
    fn parse_happy_path() {
        let csv = "timestamp,station,PM25,PM10\n\
                   2015-01-01 00:00,ganseo,12.5,30.0\n\
                   2015-01-01 01:00,ganseo,13.5,31.0\n";
        let (records, report) = parse_hourly_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(report.duplicate_rows, 0);
        assert!(report.skipped_rows.is_empty());
        assert_eq!(records[0].reading(VariableKind::Pm25), Some(12.5));
        assert_eq!(records[0].reading(VariableKind::Pm10), Some(30.0));
        assert_eq!(records[0].reading(VariableKind::So2), None);
    }

    #[test]
    fn blank_cell_becomes_missing_reading() {
        let csv = "timestamp,station,PM25\n2015-01-01 00:00,ganseo,\n";
        let (records, report) = parse_hourly_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].reading(VariableKind::Pm25), None);
        assert!(report.skipped_rows.is_empty());
    }

    #[test]
    fn unparseable_cell_becomes_missing_not_dropped() {
        let csv = "timestamp,station,PM25\n2015-01-01 00:00,ganseo,not-a-number\n";
        let (records, _) = parse_hourly_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].reading(VariableKind::Pm25), None);
    }

    #[test]
    fn negative_pollutant_readings_become_missing() {
        let csv = "timestamp,station,PM25,TEMP\n2015-01-01 00:00,ganseo,-3.5,-3.5\n";
        let (records, _) = parse_hourly_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(records[0].reading(VariableKind::Pm25), None);
        // Temperatures below zero are fine.
        assert_eq!(records[0].reading(VariableKind::Temperature), Some(-3.5));
    }

    #[test]
    fn duplicate_station_hour_keeps_first() {
        let csv = "timestamp,station,PM25\n\
                   2015-01-01 00:00,ganseo,1.0\n\
                   2015-01-01 00:00,ganseo,99.0\n";
        let (records, report) = parse_hourly_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(report.duplicate_rows, 1);
        assert_eq!(records[0].reading(VariableKind::Pm25), Some(1.0));
    }

    #[test]
    fn malformed_timestamp_skips_row_with_diagnostic() {
        let csv = "timestamp,station,PM25\n\
                   2015-99-01 00:00,ganseo,1.0\n\
                   2015-01-01 00:00,ganseo,2.0\n";
        let (records, report) = parse_hourly_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(report.skipped_rows.len(), 1);
        assert_eq!(report.skipped_rows[0].row, 1);
        assert!(report.skipped_rows[0].message.contains("timestamp"));
    }

    #[test]
    fn missing_mandatory_column_is_schema_error() {
        let csv = "time,station,PM25\n2015-01-01 00:00,ganseo,1.0\n";
        match parse_hourly_csv(csv.as_bytes(), &schema()) {
            Err(IngestError::MissingColumn(c)) => assert_eq!(c, "timestamp"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn records_sorted_by_station_then_time() {
        let csv = "timestamp,station,PM25\n\
                   2015-01-01 05:00,b,1.0\n\
                   2015-01-01 00:00,b,2.0\n\
                   2015-01-01 03:00,a,3.0\n";
        let (records, _) = parse_hourly_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(records[0].station, "a");
        assert_eq!(records[1].station, "b");
        assert_eq!(records[1].timestamp.hour, 0);
        assert_eq!(records[2].timestamp.hour, 5);
    }

    fn record(y: i32, m: u32, d: u32, h: u32, station: &str, pm25: Option<f64>) -> HourlyRecord {
        let mut r = HourlyRecord::new(
            DateHour {
                year: y,
                month: m,
                day: d,
                hour: h,
            },
            station,
        );
        r.set_reading(VariableKind::Pm25, pm25);
        r
    }

    #[test]
    fn monthly_mean_constant_month() {
        // Every hour of January 2015 at 5.0: 31 * 24 = 744 readings.
        let mut records = Vec::new();
        for day in 1..=31 {
            for hour in 0..24 {
                records.push(record(2015, 1, day, hour, "s", Some(5.0)));
            }
        }
        let s = monthly_mean(&records, "s", VariableKind::Pm25, 1.0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.get(0), Some(5.0));
    }

    #[test]
    fn monthly_mean_two_point_month() {
        let records = vec![
            record(2015, 1, 1, 0, "s", Some(10.0)),
            record(2015, 1, 1, 1, "s", Some(20.0)),
        ];
        let s = monthly_mean(&records, "s", VariableKind::Pm25, 0.0).unwrap();
        assert_eq!(s.get(0), Some(15.0));
    }

    #[test]
    fn monthly_mean_enforces_coverage() {
        // 100 of 744 January hours is below 50% coverage.
        let mut records = Vec::new();
        for hour_index in 0..100u32 {
            records.push(record(
                2015,
                1,
                1 + hour_index / 24,
                hour_index % 24,
                "s",
                Some(7.0),
            ));
        }
        let s = monthly_mean(&records, "s", VariableKind::Pm25, 0.5).unwrap();
        assert_eq!(s.values(), &[None]);
        let relaxed = monthly_mean(&records, "s", VariableKind::Pm25, 0.0).unwrap();
        assert_eq!(relaxed.get(0), Some(7.0));
    }

    #[test]
    fn monthly_mean_spans_gap_months_as_missing() {
        let records = vec![
            record(2015, 1, 1, 0, "s", Some(1.0)),
            record(2015, 3, 1, 0, "s", Some(3.0)),
        ];
        let s = monthly_mean(&records, "s", VariableKind::Pm25, 0.0).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.get(0), Some(1.0));
        assert_eq!(s.get(1), None);
        assert_eq!(s.get(2), Some(3.0));
        assert_eq!(s.start(), MonthStamp::new(2015, 1).unwrap());
    }

    #[test]
    fn monthly_mean_unknown_station_errors() {
        let records = vec![record(2015, 1, 1, 0, "s", Some(1.0))];
        assert!(matches!(
            monthly_mean(&records, "nope", VariableKind::Pm25, 0.0),
            Err(IngestError::EmptySelection(_))
        ));
    }

    #[test]
    fn descriptive_means_basic() {
        let records = vec![
            record(2015, 1, 1, 0, "a", Some(10.0)),
            record(2015, 1, 1, 1, "a", Some(30.0)),
            record(2015, 1, 1, 0, "b", None),
        ];
        let table = descriptive_means(
            &records,
            &["a".to_string(), "b".to_string()],
            &[VariableKind::Pm25],
        );
        assert_eq!(table.entries[0][0], Some(20.0));
        assert_eq!(table.entries[1][0], None);
    }

    #[test]
    fn station_ids_in_first_appearance_order() {
        let records = vec![
            record(2015, 1, 1, 0, "b", None),
            record(2015, 1, 1, 0, "a", None),
            record(2015, 1, 1, 1, "b", None),
        ];
        assert_eq!(station_ids(&records), vec!["b", "a"]);
    }
}
