//! Calendar-indexed monthly time series with differencing, integration, and
//! splitting. Every analysis and model module consumes this substrate.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors produced by series construction and transforms.
#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("month must be in 1..=12, got {0}")]
    InvalidMonth(u32),
    #[error("insufficient data: need more than {needed} values, have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("series contains a missing value at index {0}")]
    MissingData(usize),
    #[error("expected {expected} pivot values, got {got}")]
    PivotArity { expected: usize, got: usize },
    #[error("split point {cut} is outside the series span ({start}..{end})")]
    SplitBounds {
        cut: MonthStamp,
        start: MonthStamp,
        end: MonthStamp,
    },
    #[error("cannot parse '{0}' as a YYYY-MM month")]
    ParseMonth(String),
    #[error("period must be >= 1")]
    InvalidPeriod,
}

/// A calendar month: year plus month-of-year in 1..=12.
///
/// Total order is chronological. Arithmetic goes through a flat month index
/// (`year * 12 + month - 1`) so adding and subtracting months never produces
/// an out-of-range month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthStamp {
    year: i32,
    month: u8,
}

impl MonthStamp {
    pub fn new(year: i32, month: u32) -> Result<Self, SeriesError> {
        if !(1..=12).contains(&month) {
            return Err(SeriesError::InvalidMonth(month));
        }
        Ok(Self {
            year,
            month: month as u8,
        })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        u32::from(self.month)
    }

    /// Flat month index since year 0. Two stamps differ by exactly the number
    /// of calendar months between them.
    pub fn index(&self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    pub fn from_index(index: i64) -> Self {
        let year = index.div_euclid(12) as i32;
        let month = index.rem_euclid(12) as u8 + 1;
        Self { year, month }
    }

    pub fn plus_months(&self, months: i64) -> Self {
        Self::from_index(self.index() + months)
    }

    /// Months from `other` to `self` (positive when `self` is later).
    pub fn months_since(&self, other: MonthStamp) -> i64 {
        self.index() - other.index()
    }
}

impl fmt::Display for MonthStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthStamp {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || SeriesError::ParseMonth(s.to_string());
        let (y, m) = s.split_once('-').ok_or_else(err)?;
        let year: i32 = y.parse().map_err(|_| err())?;
        let month: u32 = m.parse().map_err(|_| err())?;
        MonthStamp::new(year, month).map_err(|_| err())
    }
}

impl Serialize for MonthStamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonthStamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Ordinary (`d`) and seasonal (`D` at lag `m`) differencing orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifferenceSpec {
    pub d: usize,
    pub seasonal_d: usize,
    pub period: usize,
}

impl DifferenceSpec {
    pub fn new(d: usize, seasonal_d: usize, period: usize) -> Result<Self, SeriesError> {
        if period == 0 {
            return Err(SeriesError::InvalidPeriod);
        }
        Ok(Self {
            d,
            seasonal_d,
            period,
        })
    }

    /// Number of leading observations consumed by the full differencing pass.
    pub fn values_consumed(&self) -> usize {
        self.d + self.seasonal_d * self.period
    }
}

/// A monthly series: a start month, a nominal seasonal period, and a gap-free
/// sequence of slots. Missing observations keep their slot as `None`; index
/// `i` always maps to calendar month `start + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    start: MonthStamp,
    period: usize,
    values: Vec<Option<f64>>,
}

impl TimeSeries {
    pub fn new(
        start: MonthStamp,
        period: usize,
        values: Vec<Option<f64>>,
    ) -> Result<Self, SeriesError> {
        if period == 0 {
            return Err(SeriesError::InvalidPeriod);
        }
        Ok(Self {
            start,
            period,
            values,
        })
    }

    /// Builds a missing-free series.
    pub fn from_values(
        start: MonthStamp,
        period: usize,
        values: Vec<f64>,
    ) -> Result<Self, SeriesError> {
        Self::new(start, period, values.into_iter().map(Some).collect())
    }

    pub fn start(&self) -> MonthStamp {
        self.start
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.values.get(index).copied().flatten()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn month_at(&self, index: usize) -> MonthStamp {
        self.start.plus_months(index as i64)
    }

    /// First month past the series (exclusive end of the calendar span).
    pub fn end(&self) -> MonthStamp {
        self.start.plus_months(self.values.len() as i64)
    }

    pub fn iter(&self) -> impl Iterator<Item = (MonthStamp, Option<f64>)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (self.month_at(i), *v))
    }

    /// Extracts the raw values, failing on the first missing slot.
    pub fn dense(&self) -> Result<Vec<f64>, SeriesError> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v.ok_or(SeriesError::MissingData(i)))
            .collect()
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(Option::is_none)
    }

    /// Appends `other`'s values after this series. The caller is responsible
    /// for calendar continuity (`other.start == self.end()`).
    pub fn concat_values(&self, other: &TimeSeries) -> TimeSeries {
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        TimeSeries {
            start: self.start,
            period: self.period,
            values,
        }
    }
}

/// Iterated first difference of order `d`. The result starts `d` months
/// later and is `d` entries shorter.
pub fn difference(series: &TimeSeries, d: usize) -> Result<TimeSeries, SeriesError> {
    let dense = series.dense()?;
    if dense.len() <= d {
        return Err(SeriesError::InsufficientData {
            needed: d,
            have: dense.len(),
        });
    }
    let diffed = diff_vec(&dense, 1, d);
    TimeSeries::from_values(series.start.plus_months(d as i64), series.period, diffed)
}

/// Iterated lag-`m` difference of order `big_d`. The result starts
/// `big_d * m` months later.
pub fn seasonal_difference(
    series: &TimeSeries,
    m: usize,
    big_d: usize,
) -> Result<TimeSeries, SeriesError> {
    if m == 0 {
        return Err(SeriesError::InvalidPeriod);
    }
    let dense = series.dense()?;
    if dense.len() <= big_d * m {
        return Err(SeriesError::InsufficientData {
            needed: big_d * m,
            have: dense.len(),
        });
    }
    let diffed = diff_vec(&dense, m, big_d);
    TimeSeries::from_values(
        series.start.plus_months((big_d * m) as i64),
        series.period,
        diffed,
    )
}

/// Applies the full spec: seasonal differencing first, then ordinary.
pub fn apply_difference_spec(
    series: &TimeSeries,
    spec: DifferenceSpec,
) -> Result<TimeSeries, SeriesError> {
    let seasonal = seasonal_difference(series, spec.period, spec.seasonal_d)?;
    difference(&seasonal, spec.d)
}

/// Left-inverse of [`apply_difference_spec`]. `pivots` must hold the first
/// `d + D*m` values of the original series in calendar order.
pub fn integrate(
    diffed: &TimeSeries,
    spec: DifferenceSpec,
    pivots: &[f64],
) -> Result<TimeSeries, SeriesError> {
    let expected = spec.values_consumed();
    if pivots.len() != expected {
        return Err(SeriesError::PivotArity {
            expected,
            got: pivots.len(),
        });
    }
    let w = diffed.dense()?;

    // Undo the ordinary stage. Its prefix is the seasonal difference of the
    // pivot block, which is exactly `d` values long.
    let ordinary_prefix = diff_vec(pivots, spec.period, spec.seasonal_d);
    debug_assert_eq!(ordinary_prefix.len(), spec.d);
    let seasonal_scale = undiff_vec(&w, 1, &ordinary_prefix);

    // Undo the seasonal stage from the first D*m original values.
    let original = undiff_vec(&seasonal_scale, spec.period, &pivots[..spec.seasonal_d * spec.period]);

    TimeSeries::from_values(
        diffed.start.plus_months(-(expected as i64)),
        diffed.period,
        original,
    )
}

/// Splits at `cut`: first part covers `[start, cut)`, second `[cut, end)`.
pub fn split_at(
    series: &TimeSeries,
    cut: MonthStamp,
) -> Result<(TimeSeries, TimeSeries), SeriesError> {
    let offset = cut.months_since(series.start);
    if offset <= 0 || offset >= series.len() as i64 {
        return Err(SeriesError::SplitBounds {
            cut,
            start: series.start,
            end: series.end(),
        });
    }
    let offset = offset as usize;
    let head = TimeSeries {
        start: series.start,
        period: series.period,
        values: series.values[..offset].to_vec(),
    };
    let tail = TimeSeries {
        start: cut,
        period: series.period,
        values: series.values[offset..].to_vec(),
    };
    Ok((head, tail))
}

/// `order`-fold lag-`lag` differencing of a dense slice.
fn diff_vec(values: &[f64], lag: usize, order: usize) -> Vec<f64> {
    let mut cur = values.to_vec();
    for _ in 0..order {
        cur = cur.windows(lag + 1).map(|w| w[lag] - w[0]).collect();
    }
    cur
}

/// Inverse of `diff_vec`: rebuilds the original from the differenced values
/// and the first `order * lag` original values.
fn undiff_vec(diffed: &[f64], lag: usize, prefix: &[f64]) -> Vec<f64> {
    debug_assert_eq!(prefix.len() % lag, 0);
    let order = prefix.len() / lag;

    // Prefix chain: prefixes[j] holds the first (order - j) * lag values of
    // the j-times differenced series.
    let mut prefixes = Vec::with_capacity(order + 1);
    prefixes.push(prefix.to_vec());
    for j in 1..order {
        let prev = &prefixes[j - 1];
        prefixes.push(diff_vec(prev, lag, 1));
    }

    let mut cur = diffed.to_vec();
    for j in (0..order).rev() {
        let head = &prefixes[j][..lag];
        let mut rebuilt = Vec::with_capacity(cur.len() + lag);
        rebuilt.extend_from_slice(head);
        for i in 0..cur.len() {
            let prev = rebuilt[i];
            rebuilt.push(prev + cur[i]);
        }
        cur = rebuilt;
    }
    cur
}
