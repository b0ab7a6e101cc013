//! Synthetic hourly fixtures with a known monthly data-generating process:
//! linear trend plus a fixed zero-sum seasonal pattern plus Gaussian noise.
//! Stands in for the real monitoring feeds, which are not redistributable.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ingest::{days_in_month, DateHour, HourlyRecord, StationMeta, VariableKind};
use crate::series::{MonthStamp, TimeSeries};

/// Parameters of the monthly data-generating process.
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub start: MonthStamp,
    pub months: usize,
    pub base_level: f64,
    /// Level change per month.
    pub trend_per_month: f64,
    /// Zero-sum pattern indexed by calendar month - 1.
    pub seasonal: [f64; 12],
    /// Standard deviation of the monthly disturbance.
    pub noise_sd: f64,
    /// Standard deviation of the within-month hourly scatter.
    pub hourly_sd: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        // Winter-peaked pattern with spring shoulder, troughed in late
        // summer; sums to zero.
        let seasonal = [
            6.0, 7.5, 5.0, 2.5, -1.0, -4.0, -6.5, -7.0, -5.0, -1.5, 1.0, 3.0,
        ];
        debug_assert!(seasonal.iter().sum::<f64>().abs() < 1e-9);
        Self {
            start: MonthStamp::new(2015, 1).expect("valid month"),
            months: 60,
            base_level: 24.0,
            trend_per_month: 0.08,
            seasonal,
            noise_sd: 1.2,
            hourly_sd: 6.0,
        }
    }
}

/// The four bundled station sites.
pub fn default_stations() -> Vec<StationMeta> {
    vec![
        StationMeta::new(
            "City-hall",
            "15, Deoksugung-gil, Jung-gu, Seoul",
            126.9747,
            37.5643,
        )
        .expect("valid coordinates"),
        StationMeta::new(
            "Ganseo-gu",
            "71, Gangseo-ro 45da-gil, Gangseo-gu, Seoul",
            126.8351,
            37.5447,
        )
        .expect("valid coordinates"),
        StationMeta::new(
            "Seocho-gu",
            "16, Sinbanpo-ro 15-gil, Seocho-gu, Seoul",
            126.9945,
            37.5046,
        )
        .expect("valid coordinates"),
        StationMeta::new(
            "Songpa-gu",
            "59, Gucheonmyeon-ro 42-gil, Gangdong-gu, Seoul",
            127.1368,
            37.545,
        )
        .expect("valid coordinates"),
    ]
}

/// Monthly target values of the process (`level + trend + seasonal +
/// noise`), before hourly scatter.
pub fn monthly_targets(config: &SyntheticConfig, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..config.months)
        .map(|i| {
            let month = config.start.plus_months(i as i64);
            let slot = (month.month() - 1) as usize;
            let noise: f64 = rng.sample::<f64, _>(StandardNormal) * config.noise_sd;
            config.base_level + config.trend_per_month * i as f64 + config.seasonal[slot] + noise
        })
        .collect();
    TimeSeries::from_values(config.start, 12, values).expect("period 12")
}

/// Hourly PM2.5 records for one station whose monthly means track the
/// monthly targets (hourly scatter is mean-zero and averages out).
pub fn hourly_records(config: &SyntheticConfig, station: &str, seed: u64) -> Vec<HourlyRecord> {
    let targets = monthly_targets(config, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    let mut records = Vec::new();
    for i in 0..targets.len() {
        let month = targets.month_at(i);
        let target = targets.get(i).expect("dense");
        for day in 1..=days_in_month(month.year(), month.month()) {
            for hour in 0..24 {
                let scatter: f64 = rng.sample::<f64, _>(StandardNormal) * config.hourly_sd;
                let mut record = HourlyRecord::new(
                    DateHour {
                        year: month.year(),
                        month: month.month(),
                        day,
                        hour,
                    },
                    station,
                );
                record.set_reading(VariableKind::Pm25, Some((target + scatter).max(0.1)));
                // A correlated coarse-particle channel keeps the multi-
                // variable paths exercised.
                record.set_reading(
                    VariableKind::Pm10,
                    Some((target * 1.9 + scatter * 0.8 + 2.0).max(0.1)),
                );
                record.set_reading(
                    VariableKind::Temperature,
                    Some(12.0 - config.seasonal[(month.month() - 1) as usize] + scatter * 0.1),
                );
                records.push(record);
            }
        }
    }
    records
}

/// Writes a fixture CSV in the documented hourly schema.
pub fn write_hourly_csv<W: std::io::Write>(
    writer: W,
    records: &[HourlyRecord],
    variables: &[VariableKind],
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string(), "station".to_string()];
    header.extend(variables.iter().map(|v| v.column_name().to_string()));
    w.write_record(&header)?;
    for record in records {
        let mut row = vec![record.timestamp.to_string(), record.station.clone()];
        for &variable in variables {
            row.push(
                record
                    .reading(variable)
                    .map(|v| format!("{v}"))
                    .unwrap_or_default(),
            );
        }
        w.write_record(&row)?;
    }
    w.flush()
}
