//! Classical additive decomposition into trend, seasonal, and random
//! components.
//!
//! Trend is a centered moving average (the 2xm half-weighted variant for
//! even periods), seasonal indices are re-centered month means of the
//! detrended values, and the random part is whatever remains. Endpoint
//! trend values are reported missing, never extrapolated.

use serde::Serialize;
use thiserror::Error;

use crate::series::{SeriesError, TimeSeries};

#[derive(Debug, Error, PartialEq)]
pub enum DecomposeError {
    #[error("series contains missing values")]
    MissingData,
    #[error("need at least two full periods ({needed} values), have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("period must be >= 2")]
    InvalidPeriod,
}

/// Additive split of a series: `observed = trend + seasonal + random`
/// wherever trend is defined.
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub trend: TimeSeries,
    pub seasonal: TimeSeries,
    pub random: TimeSeries,
    /// Zero-sum seasonal indices; slot `k` is calendar month `k + 1` when
    /// the period is 12, and `month_index mod period` in general.
    pub seasonal_indices: Vec<f64>,
}

/// Season slot of a calendar position, stable across windows of the same
/// series: months are numbered from year 0 and folded by the period.
fn season_slot(series: &TimeSeries, index: usize, period: usize) -> usize {
    (series.month_at(index).index().rem_euclid(period as i64)) as usize
}

/// Classical additive decomposition with seasonal period `m`.
pub fn classical_decompose(
    series: &TimeSeries,
    period: usize,
) -> Result<Decomposition, DecomposeError> {
    if period < 2 {
        return Err(DecomposeError::InvalidPeriod);
    }
    let values = series.dense().map_err(|e| match e {
        SeriesError::MissingData(_) => DecomposeError::MissingData,
        _ => DecomposeError::MissingData,
    })?;
    let n = values.len();
    if n < 2 * period {
        return Err(DecomposeError::InsufficientData {
            needed: 2 * period,
            have: n,
        });
    }

    // Centered moving average. For even m the window spans m+1 points with
    // half weight at both ends; for odd m it is the plain m-point mean.
    let half = period / 2;
    let mut trend: Vec<Option<f64>> = vec![None; n];
    if period % 2 == 0 {
        for i in half..n - half {
            let mut sum = 0.5 * (values[i - half] + values[i + half]);
            for j in (i - half + 1)..(i + half) {
                sum += values[j];
            }
            trend[i] = Some(sum / period as f64);
        }
    } else {
        for i in half..n - half {
            let sum: f64 = values[i - half..=i + half].iter().sum();
            trend[i] = Some(sum / period as f64);
        }
    }

    // Month means of the detrended series, re-centered to sum to zero.
    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for i in 0..n {
        if let Some(t) = trend[i] {
            let slot = season_slot(series, i, period);
            sums[slot] += values[i] - t;
            counts[slot] += 1;
        }
    }
    let mut indices: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let mean = indices.iter().sum::<f64>() / period as f64;
    for v in indices.iter_mut() {
        *v -= mean;
    }

    let seasonal: Vec<Option<f64>> = (0..n)
        .map(|i| Some(indices[season_slot(series, i, period)]))
        .collect();
    let random: Vec<Option<f64>> = (0..n)
        .map(|i| {
            trend[i].map(|t| values[i] - t - indices[season_slot(series, i, period)])
        })
        .collect();

    let make = |vals: Vec<Option<f64>>| {
        TimeSeries::new(series.start(), series.period(), vals).expect("period already valid")
    };
    Ok(Decomposition {
        trend: make(trend),
        seasonal: make(seasonal),
        random: make(random),
        seasonal_indices: indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::MonthStamp;

    fn ts(values: &[f64]) -> TimeSeries {
        TimeSeries::from_values(MonthStamp::new(2015, 1).unwrap(), 12, values.to_vec()).unwrap()
    }

    #[test]
    fn constant_series_decomposes_trivially() {
        let d = classical_decompose(&ts(&[5.0; 36]), 12).unwrap();
        for v in &d.seasonal_indices {
            assert!(v.abs() < 1e-12);
        }
        for i in 0..36 {
            match d.trend.get(i) {
                Some(t) => {
                    assert!((t - 5.0).abs() < 1e-12);
                    assert!(d.random.get(i).unwrap().abs() < 1e-12);
                }
                None => assert!(!(6..30).contains(&i), "trend missing at interior {i}"),
            }
        }
    }

    #[test]
    fn linear_ramp_yields_zero_seasonal() {
        let values: Vec<f64> = (0..48).map(|t| 2.0 + 0.31 * t as f64).collect();
        let d = classical_decompose(&ts(&values), 12).unwrap();
        for v in &d.seasonal_indices {
            assert!(v.abs() < 1e-9, "seasonal leaked {v} from a pure ramp");
        }
        for i in 6..42 {
            let t = d.trend.get(i).unwrap();
            assert!((t - values[i]).abs() < 1e-9, "MA of a line must be the line");
        }
    }

    #[test]
    fn recovers_planted_seasonal_vector() {
        // Zero-sum 12-vector on a gentle ramp; classical decomposition
        // must recover it because the centered MA annihilates the pattern.
        let planted = [
            3.0, -1.5, 4.0, 1.0, -5.5, 2.0, 0.5, -2.0, 3.5, -4.0, 1.5, -2.5,
        ];
        assert!(planted.iter().sum::<f64>().abs() < 1e-12);
        let values: Vec<f64> = (0..60)
            .map(|t| 0.1 * t as f64 + planted[t % 12])
            .collect();
        let d = classical_decompose(&ts(&values), 12).unwrap();
        for (k, want) in planted.iter().enumerate() {
            assert!(
                (d.seasonal_indices[k] - want).abs() < 1e-6,
                "slot {k}: {} vs {want}",
                d.seasonal_indices[k]
            );
        }
    }

    #[test]
    fn additive_identity_holds() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let values: Vec<f64> = (0..60)
            .map(|t| 20.0 + 0.2 * t as f64 + 5.0 * (t as f64 * 0.5).sin() + rng.gen_range(-1.0..1.0))
            .collect();
        let s = ts(&values);
        let d = classical_decompose(&s, 12).unwrap();
        for i in 0..s.len() {
            if let Some(t) = d.trend.get(i) {
                let sum = t + d.seasonal.get(i).unwrap() + d.random.get(i).unwrap();
                assert!((sum - values[i]).abs() < 1e-10, "identity broke at {i}");
            } else {
                assert!(d.random.get(i).is_none());
            }
        }
    }

    #[test]
    fn seasonal_is_periodic_and_zero_sum() {
        let values: Vec<f64> = (0..72)
            .map(|t| (t as f64 * 0.7).sin() * 4.0 + 0.05 * t as f64)
            .collect();
        let d = classical_decompose(&ts(&values), 12).unwrap();
        assert!(d.seasonal_indices.iter().sum::<f64>().abs() < 1e-9);
        for i in 12..72 {
            assert_eq!(d.seasonal.get(i), d.seasonal.get(i - 12));
        }
    }

    #[test]
    fn level_shift_moves_only_the_trend() {
        let values: Vec<f64> = (0..48)
            .map(|t| 10.0 + 3.0 * ((t % 12) as f64 - 5.5) + 0.1 * t as f64)
            .collect();
        let shifted: Vec<f64> = values.iter().map(|v| v + 42.0).collect();
        let d1 = classical_decompose(&ts(&values), 12).unwrap();
        let d2 = classical_decompose(&ts(&shifted), 12).unwrap();
        for k in 0..12 {
            assert!((d1.seasonal_indices[k] - d2.seasonal_indices[k]).abs() < 1e-10);
        }
        for i in 0..48 {
            if let (Some(a), Some(b)) = (d1.trend.get(i), d2.trend.get(i)) {
                assert!((b - a - 42.0).abs() < 1e-10);
                let r1 = d1.random.get(i).unwrap();
                let r2 = d2.random.get(i).unwrap();
                assert!((r1 - r2).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn endpoints_are_missing_not_extrapolated() {
        let values: Vec<f64> = (0..30).map(|t| t as f64).collect();
        let d = classical_decompose(&ts(&values), 12).unwrap();
        for i in 0..6 {
            assert!(d.trend.get(i).is_none());
            assert!(d.trend.get(29 - i).is_none());
            assert!(d.random.get(i).is_none());
        }
        assert!(d.trend.get(6).is_some());
        assert!(d.trend.get(23).is_some());
    }

    #[test]
    fn odd_period_uses_plain_moving_average() {
        let values: Vec<f64> = (0..15).map(|t| t as f64 * 2.0).collect();
        let s = TimeSeries::from_values(MonthStamp::new(2020, 1).unwrap(), 5, values.clone())
            .unwrap();
        let d = classical_decompose(&s, 5).unwrap();
        for i in 2..13 {
            assert!((d.trend.get(i).unwrap() - values[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn short_series_rejected() {
        let err = classical_decompose(&ts(&[1.0; 23]), 12).unwrap_err();
        assert!(matches!(err, DecomposeError::InsufficientData { .. }));
    }
}
