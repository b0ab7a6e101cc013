//! Monthly time-series analysis and forecasting engine: ingestion and
//! aggregation of hourly station data, descriptive statistics, classical
//! decomposition, correlogram diagnostics, ETS and seasonal ARIMA models
//! with AICc selection, and five-metric holdout evaluation.

pub mod arima;
pub mod correlogram;
pub mod csvio;
pub mod decompose;
pub mod dist;
pub mod ets;
pub mod ingest;
pub mod metrics;
pub mod optim;
pub mod series;
pub mod stats;
pub mod synth;

pub use arima::{
    arima_fit, arima_forecast, default_candidates, fit_candidate_suite, simulate_arima, ArimaFit,
    ArimaSpec,
};
pub use correlogram::{acf, ljung_box, pacf, Correlogram, WhiteNoiseTest};
pub use decompose::{classical_decompose, Decomposition};
pub use ets::{ets_fit, ets_forecast, EtsFit, EtsSpec};
pub use ingest::{monthly_mean, parse_hourly_csv, CsvSchema, HourlyRecord, VariableKind};
pub use metrics::{
    aicc, compare_models, compute_metrics, holdout_evaluate, ComparisonEntry, ComparisonReport,
    Forecaster, MetricSet,
};
pub use series::{
    difference, integrate, seasonal_difference, split_at, DifferenceSpec, MonthStamp, TimeSeries,
};
pub use stats::{pearson_correlation, seasonal_profile, CorrelationTable};
