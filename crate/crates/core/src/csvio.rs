//! Readers and writers for the workbench's CSV formats. Every emitted CSV
//! parses back through the matching reader here.
//!
//! Formats:
//! - monthly series: `month,value` with `YYYY-MM` months, empty = missing
//! - decomposition: `observed,trend,seasonal,random`
//! - correlogram: `lag,value,bound`
//! - forecast: `month,point,lower,upper`

use std::io::{Read, Write};

use thiserror::Error;

use crate::correlogram::Correlogram;
use crate::decompose::Decomposition;
use crate::ets::ForecastBands;
use crate::ingest::VariableKind;
use crate::series::{MonthStamp, SeriesError, TimeSeries};

#[derive(Debug, Error)]
pub enum CsvFormatError {
    #[error("CSV read/write failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("months are not consecutive at row {0}")]
    CalendarGap(usize),
    #[error("series error: {0}")]
    Series(#[from] SeriesError),
    #[error("file is empty")]
    Empty,
}

fn row_err(row: usize, message: impl Into<String>) -> CsvFormatError {
    CsvFormatError::Row {
        row,
        message: message.into(),
    }
}

fn parse_cell(row: usize, cell: &str, what: &str) -> Result<f64, CsvFormatError> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| row_err(row, format!("cannot parse {what} '{cell}'")))
}

fn parse_optional(row: usize, cell: &str, what: &str) -> Result<Option<f64>, CsvFormatError> {
    let cell = cell.trim();
    if cell.is_empty() {
        Ok(None)
    } else {
        parse_cell(row, cell, what).map(Some)
    }
}

pub fn write_monthly_series<W: Write>(writer: W, series: &TimeSeries) -> Result<(), CsvFormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["month", "value"])?;
    for (month, value) in series.iter() {
        w.write_record([
            month.to_string(),
            value.map(|v| format!("{v}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_monthly_series<R: Read>(reader: R) -> Result<TimeSeries, CsvFormatError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut start: Option<MonthStamp> = None;
    let mut prev: Option<MonthStamp> = None;
    let mut values = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row_num = i + 1;
        let row = row?;
        let month: MonthStamp = row
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|e: SeriesError| row_err(row_num, e.to_string()))?;
        if let Some(p) = prev {
            if month.months_since(p) != 1 {
                return Err(CsvFormatError::CalendarGap(row_num));
            }
        }
        values.push(parse_optional(row_num, row.get(1).unwrap_or(""), "value")?);
        start.get_or_insert(month);
        prev = Some(month);
    }
    let start = start.ok_or(CsvFormatError::Empty)?;
    Ok(TimeSeries::new(start, 12, values)?)
}

pub fn write_decomposition<W: Write>(
    writer: W,
    observed: &TimeSeries,
    decomposition: &Decomposition,
) -> Result<(), CsvFormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["observed", "trend", "seasonal", "random"])?;
    let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for i in 0..observed.len() {
        w.write_record([
            cell(observed.get(i)),
            cell(decomposition.trend.get(i)),
            cell(decomposition.seasonal.get(i)),
            cell(decomposition.random.get(i)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Decomposition rows read back as (observed, trend, seasonal, random).
pub type DecompositionRows = Vec<(Option<f64>, Option<f64>, Option<f64>, Option<f64>)>;

pub fn read_decomposition<R: Read>(reader: R) -> Result<DecompositionRows, CsvFormatError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row_num = i + 1;
        let row = row?;
        rows.push((
            parse_optional(row_num, row.get(0).unwrap_or(""), "observed")?,
            parse_optional(row_num, row.get(1).unwrap_or(""), "trend")?,
            parse_optional(row_num, row.get(2).unwrap_or(""), "seasonal")?,
            parse_optional(row_num, row.get(3).unwrap_or(""), "random")?,
        ));
    }
    Ok(rows)
}

pub fn write_correlogram<W: Write>(
    writer: W,
    correlogram: &Correlogram,
) -> Result<(), CsvFormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["lag", "value", "bound"])?;
    for (i, value) in correlogram.coefficients.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            format!("{value}"),
            format!("{}", correlogram.confidence_bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Correlogram rows read back as (lag, value, bound).
pub fn read_correlogram<R: Read>(reader: R) -> Result<Vec<(usize, f64, f64)>, CsvFormatError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row_num = i + 1;
        let row = row?;
        let lag: usize = row
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|_| row_err(row_num, "cannot parse lag"))?;
        rows.push((
            lag,
            parse_cell(row_num, row.get(1).unwrap_or(""), "value")?,
            parse_cell(row_num, row.get(2).unwrap_or(""), "bound")?,
        ));
    }
    Ok(rows)
}

/// A station-by-variable table (means or correlations): header
/// `station,<VAR>,...`, one row per station, empty cell = missing.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableTable {
    pub stations: Vec<String>,
    pub variables: Vec<VariableKind>,
    pub entries: Vec<Vec<Option<f64>>>,
}

pub fn write_variable_table<W: Write>(
    writer: W,
    table: &VariableTable,
) -> Result<(), CsvFormatError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["station".to_string()];
    header.extend(table.variables.iter().map(|v| v.column_name().to_string()));
    w.write_record(&header)?;
    for (station, row) in table.stations.iter().zip(&table.entries) {
        let mut record = vec![station.clone()];
        record.extend(row.iter().map(|c| c.map(|v| format!("{v}")).unwrap_or_default()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_variable_table<R: Read>(reader: R) -> Result<VariableTable, CsvFormatError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = r.headers()?.clone();
    let mut variables = Vec::new();
    for name in headers.iter().skip(1) {
        let kind: VariableKind = name
            .parse()
            .map_err(|_| row_err(0, format!("unknown variable column '{name}'")))?;
        variables.push(kind);
    }
    let mut stations = Vec::new();
    let mut entries = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row_num = i + 1;
        let row = row?;
        stations.push(row.get(0).unwrap_or("").to_string());
        let mut cells = Vec::with_capacity(variables.len());
        for j in 0..variables.len() {
            cells.push(parse_optional(row_num, row.get(j + 1).unwrap_or(""), "cell")?);
        }
        entries.push(cells);
    }
    Ok(VariableTable {
        stations,
        variables,
        entries,
    })
}

pub fn write_forecast<W: Write>(writer: W, bands: &ForecastBands) -> Result<(), CsvFormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["month", "point", "lower", "upper"])?;
    for i in 0..bands.point.len() {
        w.write_record([
            bands.point.month_at(i).to_string(),
            format!("{}", bands.point.get(i).expect("dense")),
            format!("{}", bands.lower.get(i).expect("dense")),
            format!("{}", bands.upper.get(i).expect("dense")),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Forecast rows read back as (month, point, lower, upper).
pub fn read_forecast<R: Read>(
    reader: R,
) -> Result<Vec<(MonthStamp, f64, f64, f64)>, CsvFormatError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row_num = i + 1;
        let row = row?;
        let month: MonthStamp = row
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|e: SeriesError| row_err(row_num, e.to_string()))?;
        rows.push((
            month,
            parse_cell(row_num, row.get(1).unwrap_or(""), "point")?,
            parse_cell(row_num, row.get(2).unwrap_or(""), "lower")?,
            parse_cell(row_num, row.get(3).unwrap_or(""), "upper")?,
        ));
    }
    Ok(rows)
}
