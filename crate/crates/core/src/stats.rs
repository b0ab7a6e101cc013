//! Pearson correlations, monthly seasonal profiles, and per-station
//! correlation tables over the ingested records.

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{monthly_mean, HourlyRecord, IngestError, VariableKind};
use crate::series::TimeSeries;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("series are not aligned on the same calendar span")]
    Misaligned,
    #[error("need at least 3 pairwise-complete observations, have {0}")]
    InsufficientPairs(usize),
    #[error("correlation is undefined for a constant input")]
    UndefinedCorrelation,
    #[error("seasonal profile needs a span of at least 12 months, have {0}")]
    ShortSpan(usize),
}

/// Sample Pearson coefficient over an iterator of complete pairs.
pub fn pearson_pairs<I>(pairs: I) -> Result<f64, StatsError>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
    if pairs.len() < 3 {
        return Err(StatsError::InsufficientPairs(pairs.len()));
    }
    let n = pairs.len() as f64;
    let mean_x = pairs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &pairs {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::UndefinedCorrelation);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson coefficient of two calendar-aligned series over their
/// pairwise-complete entries.
pub fn pearson_correlation(x: &TimeSeries, y: &TimeSeries) -> Result<f64, StatsError> {
    if x.start() != y.start() || x.len() != y.len() {
        return Err(StatsError::Misaligned);
    }
    pearson_pairs(
        x.values()
            .iter()
            .zip(y.values())
            .filter_map(|(a, b)| a.zip(*b)),
    )
}

/// Mean of the non-missing values falling in each calendar month; slot `k`
/// is month `k + 1`. Months never observed stay missing.
pub fn seasonal_profile(series: &TimeSeries) -> Result<[Option<f64>; 12], StatsError> {
    if series.len() < 12 {
        return Err(StatsError::ShortSpan(series.len()));
    }
    let mut sums = [0.0f64; 12];
    let mut counts = [0usize; 12];
    for (month, value) in series.iter() {
        if let Some(v) = value {
            let slot = (month.month() - 1) as usize;
            sums[slot] += v;
            counts[slot] += 1;
        }
    }
    let mut out = [None; 12];
    for k in 0..12 {
        if counts[k] > 0 {
            out[k] = Some(sums[k] / counts[k] as f64);
        }
    }
    Ok(out)
}

/// Whether a correlation table is computed on raw hourly pairs or on
/// monthly aggregated series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationGranularity {
    Hourly,
    Monthly { min_coverage: f64 },
}

/// Station-by-variable correlations of one target variable against others.
/// Cells that cannot be computed (constant input, too few pairs) are
/// missing.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationTable {
    pub target: VariableKind,
    pub stations: Vec<String>,
    pub variables: Vec<VariableKind>,
    pub entries: Vec<Vec<Option<f64>>>,
}

pub fn correlation_table(
    records: &[HourlyRecord],
    stations: &[String],
    target: VariableKind,
    variables: &[VariableKind],
    granularity: CorrelationGranularity,
) -> Result<CorrelationTable, IngestError> {
    let mut entries = Vec::with_capacity(stations.len());
    for station in stations {
        let mut row = Vec::with_capacity(variables.len());
        for &variable in variables {
            let cell = match granularity {
                CorrelationGranularity::Hourly => pearson_pairs(
                    records
                        .iter()
                        .filter(|r| &r.station == station)
                        .filter_map(|r| r.reading(target).zip(r.reading(variable))),
                )
                .ok(),
                CorrelationGranularity::Monthly { min_coverage } => {
                    let x = monthly_mean(records, station, target, min_coverage)?;
                    let y = monthly_mean(records, station, variable, min_coverage)?;
                    pearson_correlation(&x, &y).ok()
                }
            };
            row.push(cell);
        }
        entries.push(row);
    }
    Ok(CorrelationTable {
        target,
        stations: stations.to_vec(),
        variables: variables.to_vec(),
        entries,
    })
}
