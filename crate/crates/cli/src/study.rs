//! The one-shot study pipeline: ingest hourly data, aggregate one station
//! and variable to monthly means, decompose, run correlogram diagnostics,
//! fit the ETS and ARIMA candidate sets on the training window, forecast
//! the holdout, and emit a cross-model comparison.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use airseries_core::arima::{arima_fit, arima_forecast_with_bands, ArimaFit};
use airseries_core::correlogram::{acf, ljung_box, pacf, WhiteNoiseTest};
use airseries_core::csvio;
use airseries_core::decompose::classical_decompose;
use airseries_core::ets::{ets_fit, ets_forecast_with_bands, EtsFit, ForecastBands};
use airseries_core::ingest::{parse_hourly_csv, monthly_mean, CsvSchema};
use airseries_core::metrics::{
    compare_models, compute_metrics, train_metrics, ComparisonEntry, ComparisonReport,
    MetricSet,
};
use airseries_core::series::{seasonal_difference, split_at, TimeSeries};

use crate::config::StudyConfig;
use crate::output::{envelope, to_json_string, write_text};
use crate::{CliError, OUTPUT_DIR_ENV};

/// Default lag depth for the emitted correlograms.
const CORRELOGRAM_LAGS: usize = 24;
/// Ljung-Box lag depth used for the residual verdicts.
const LJUNG_BOX_LAGS: usize = 12;

/// Per-candidate outcome recorded in the summary.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateStatus {
    pub label: String,
    pub family: String,
    pub ok: bool,
    pub error: Option<String>,
    pub aicc: Option<f64>,
    pub train: Option<MetricSet>,
    pub test: Option<MetricSet>,
}

/// What `run_study` produced.
#[derive(Debug, Serialize)]
pub struct StudySummary {
    pub station: String,
    pub variable: String,
    pub months: usize,
    pub train_months: usize,
    pub test_months: usize,
    pub candidates: Vec<CandidateStatus>,
    pub comparison: ComparisonReport,
    pub output_dir: PathBuf,
}

enum FittedModel {
    Ets(EtsFit),
    Arima(ArimaFit),
}

impl FittedModel {
    fn label(&self) -> String {
        match self {
            FittedModel::Ets(f) => f.spec.to_string(),
            FittedModel::Arima(f) => f.spec.to_string(),
        }
    }

    fn family(&self) -> String {
        match self {
            FittedModel::Ets(_) => "ets:d0:D0".to_string(),
            FittedModel::Arima(f) => format!("arima:d{}:D{}", f.spec.d, f.spec.seasonal_d),
        }
    }

    fn file_stem(&self) -> String {
        match self {
            FittedModel::Ets(f) => format!("ets_{}", f.spec.code()),
            FittedModel::Arima(f) => {
                let s = &f.spec;
                let mut stem = format!("arima_{}-{}-{}", s.p, s.d, s.q);
                if s.seasonal_p + s.seasonal_d + s.seasonal_q > 0 {
                    stem.push_str(&format!(
                        "_{}-{}-{}-{}",
                        s.seasonal_p, s.seasonal_d, s.seasonal_q, s.period
                    ));
                }
                stem
            }
        }
    }

    fn aicc(&self) -> f64 {
        match self {
            FittedModel::Ets(f) => f.aicc,
            FittedModel::Arima(f) => f.aicc,
        }
    }

    fn n_params(&self) -> usize {
        match self {
            FittedModel::Ets(f) => f.k,
            FittedModel::Arima(f) => f.k,
        }
    }

    /// Coefficients counted against the Ljung-Box degrees of freedom.
    fn ljung_box_params(&self) -> usize {
        match self {
            FittedModel::Ets(f) => {
                1 + usize::from(f.spec.has_trend())
                    + usize::from(f.spec.is_damped())
                    + usize::from(f.spec.has_seasonal())
            }
            FittedModel::Arima(f) => {
                f.spec.p + f.spec.q + f.spec.seasonal_p + f.spec.seasonal_q
            }
        }
    }

    fn residuals(&self) -> &TimeSeries {
        match self {
            FittedModel::Ets(f) => &f.residuals,
            FittedModel::Arima(f) => &f.residuals,
        }
    }

    fn forecast_bands(&self, horizon: usize) -> Result<ForecastBands, String> {
        match self {
            FittedModel::Ets(f) => {
                ets_forecast_with_bands(f, horizon, 1.96).map_err(|e| e.to_string())
            }
            FittedModel::Arima(f) => {
                arima_forecast_with_bands(f, horizon, 1.96).map_err(|e| e.to_string())
            }
        }
    }

    fn fit_json(&self) -> serde_json::Value {
        match self {
            FittedModel::Ets(f) => envelope("ets_fit", f),
            FittedModel::Arima(f) => envelope("arima_fit", f),
        }
    }
}

fn csv_to_string<F>(write: F) -> Result<String, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), csvio::CsvFormatError>,
{
    let mut buffer = Vec::new();
    write(&mut buffer).map_err(|e| CliError::Data(e.to_string()))?;
    String::from_utf8(buffer).map_err(|e| CliError::Data(e.to_string()))
}

/// Loads the monthly series for the configured station/variable from the
/// hourly input file.
pub fn load_monthly_series(config: &StudyConfig) -> Result<TimeSeries, CliError> {
    let file = File::open(&config.input_path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", config.input_path.display())))?;
    let (records, _report) = parse_hourly_csv(file, &CsvSchema::default())
        .map_err(|e| CliError::Data(e.to_string()))?;
    monthly_mean(&records, &config.station, config.variable, config.min_coverage)
        .map_err(|e| CliError::Data(e.to_string()))
}

fn fit_one(
    spec_label: &str,
    model: Result<FittedModel, String>,
    train: &TimeSeries,
    test: &TimeSeries,
    horizon: usize,
    family_fallback: &str,
) -> (CandidateStatus, Option<(FittedModel, ForecastBands, MetricSet, MetricSet)>) {
    let fail = |message: String| CandidateStatus {
        label: spec_label.to_string(),
        family: family_fallback.to_string(),
        ok: false,
        error: Some(message),
        aicc: None,
        train: None,
        test: None,
    };
    let model = match model {
        Ok(m) => m,
        Err(e) => return (fail(e), None),
    };
    let train_result = match &model {
        FittedModel::Ets(f) => train_metrics(train, f),
        FittedModel::Arima(f) => train_metrics(train, f),
    };
    let train_set = match train_result {
        Ok(m) => m,
        Err(e) => return (fail(format!("train metrics: {e}")), None),
    };
    let bands = match model.forecast_bands(horizon) {
        Ok(b) => b,
        Err(e) => return (fail(format!("forecast: {e}")), None),
    };
    let test_head = TimeSeries::new(
        test.start(),
        test.period(),
        test.values()[..horizon.min(test.len())].to_vec(),
    )
    .expect("valid period");
    let test_set = match compute_metrics(&test_head, &bands.point) {
        Ok(m) => m,
        Err(e) => return (fail(format!("test metrics: {e}")), None),
    };
    let status = CandidateStatus {
        label: model.label(),
        family: model.family(),
        ok: true,
        error: None,
        aicc: Some(model.aicc()),
        train: Some(train_set),
        test: Some(test_set),
    };
    (status, Some((model, bands, train_set, test_set)))
}

/// Runs the full pipeline and writes all artifacts into the output
/// directory (`AIRSERIES_OUTPUT_DIR` overrides the configured one).
pub fn run_study(config: &StudyConfig) -> Result<StudySummary, CliError> {
    config.validate()?;
    let output_dir = match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => config.output_dir.clone(),
    };

    let series = load_monthly_series(config)?;
    if series.has_missing() {
        return Err(CliError::Data(format!(
            "monthly series for station '{}' has months below the coverage threshold; \
             lower --min-coverage or repair the input",
            config.station
        )));
    }
    let (train, test) = split_at(&series, config.cut()).map_err(|e| CliError::Data(e.to_string()))?;
    let horizon = config.horizon.min(test.len());
    if horizon == 0 {
        return Err(CliError::Data("holdout window is empty".to_string()));
    }

    // Deferred writes: everything lands on disk in one pass at the end.
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let path = |name: &str| Path::new(&output_dir).join(name);

    files.push((
        path("monthly_series.csv"),
        csv_to_string(|w| csvio::write_monthly_series(w, &series))?,
    ));

    let decomposition = classical_decompose(&series, series.period())
        .map_err(|e| CliError::Data(e.to_string()))?;
    files.push((
        path("decomposition.csv"),
        csv_to_string(|w| csvio::write_decomposition(w, &series, &decomposition))?,
    ));

    let max_lag = CORRELOGRAM_LAGS.min(series.len().saturating_sub(2)).max(1);
    let raw_acf = acf(&series, max_lag).map_err(|e| CliError::Data(e.to_string()))?;
    let raw_pacf = pacf(&series, max_lag).map_err(|e| CliError::Data(e.to_string()))?;
    files.push((
        path("acf_raw.csv"),
        csv_to_string(|w| csvio::write_correlogram(w, &raw_acf))?,
    ));
    files.push((
        path("pacf_raw.csv"),
        csv_to_string(|w| csvio::write_correlogram(w, &raw_pacf))?,
    ));
    let diffed = seasonal_difference(&series, series.period(), 1)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let diff_lag = CORRELOGRAM_LAGS.min(diffed.len().saturating_sub(2)).max(1);
    let diff_acf = acf(&diffed, diff_lag).map_err(|e| CliError::Data(e.to_string()))?;
    let diff_pacf = pacf(&diffed, diff_lag).map_err(|e| CliError::Data(e.to_string()))?;
    files.push((
        path("acf_diff.csv"),
        csv_to_string(|w| csvio::write_correlogram(w, &diff_acf))?,
    ));
    files.push((
        path("pacf_diff.csv"),
        csv_to_string(|w| csvio::write_correlogram(w, &diff_pacf))?,
    ));

    // Candidate fits, ETS family then ARIMA family, in declared order.
    let mut statuses: Vec<CandidateStatus> = Vec::new();
    let mut fitted: Vec<(FittedModel, ForecastBands, MetricSet, MetricSet)> = Vec::new();
    for spec in &config.ets_candidates {
        let model = ets_fit(spec, &train)
            .map(FittedModel::Ets)
            .map_err(|e| e.to_string());
        let (status, success) = fit_one(
            &spec.to_string(),
            model,
            &train,
            &test,
            horizon,
            "ets:d0:D0",
        );
        statuses.push(status);
        fitted.extend(success);
    }
    for spec in &config.arima_candidates {
        let model = arima_fit(spec, &train)
            .map(FittedModel::Arima)
            .map_err(|e| e.to_string());
        let family = format!("arima:d{}:D{}", spec.d, spec.seasonal_d);
        let (status, success) = fit_one(&spec.to_string(), model, &train, &test, horizon, &family);
        statuses.push(status);
        fitted.extend(success);
    }

    // Every requested family must produce at least one usable fit.
    for (name, requested) in [
        ("ETS", !config.ets_candidates.is_empty()),
        ("ARIMA", !config.arima_candidates.is_empty()),
    ] {
        let family_ok = fitted.iter().any(|(m, ..)| {
            matches!(
                (name, m),
                ("ETS", FittedModel::Ets(_)) | ("ARIMA", FittedModel::Arima(_))
            )
        });
        if requested && !family_ok {
            let failures: Vec<String> = statuses
                .iter()
                .filter(|s| !s.ok)
                .map(|s| format!("{}: {}", s.label, s.error.clone().unwrap_or_default()))
                .collect();
            return Err(CliError::AllCandidatesFailed(format!(
                "every {name} candidate failed: {}",
                failures.join("; ")
            )));
        }
    }

    // Per-model artifacts: fit JSON, forecast CSV, residual verdict.
    let mut verdicts: Vec<serde_json::Value> = Vec::new();
    for (model, bands, _, _) in &fitted {
        let stem = model.file_stem();
        files.push((
            path(&format!("{stem}.json")),
            to_json_string(&model.fit_json()) + "\n",
        ));
        files.push((
            path(&format!("forecast_{stem}.csv")),
            csv_to_string(|w| csvio::write_forecast(w, bands))?,
        ));
        let residuals = model.residuals();
        let k = model.ljung_box_params();
        let h = LJUNG_BOX_LAGS
            .min(residuals.len().saturating_sub(1))
            .max(k + 1);
        let verdict: Option<WhiteNoiseTest> = ljung_box(residuals, h, k).ok();
        verdicts.push(json!({
            "model": model.label(),
            "lags": h,
            "fitted_params": k,
            "verdict": verdict,
        }));
    }
    files.push((
        path("ljung_box.json"),
        to_json_string(&envelope("ljung_box_verdicts", &verdicts)) + "\n",
    ));

    let entries: Vec<ComparisonEntry> = fitted
        .iter()
        .map(|(model, _, train_set, test_set)| ComparisonEntry {
            label: model.label(),
            family: model.family(),
            train: *train_set,
            test: *test_set,
            aicc: model.aicc(),
            n_params: model.n_params(),
        })
        .collect();
    let comparison =
        compare_models(entries, config.force_aicc).map_err(|e| CliError::Data(e.to_string()))?;
    files.push((
        path("comparison.json"),
        to_json_string(&envelope("comparison", &comparison)) + "\n",
    ));
    files.push((path("comparison.txt"), comparison.to_text_table()));

    let summary = StudySummary {
        station: config.station.clone(),
        variable: config.variable.to_string(),
        months: series.len(),
        train_months: train.len(),
        test_months: test.len(),
        candidates: statuses,
        comparison,
        output_dir: output_dir.clone(),
    };
    files.push((
        path("study.json"),
        to_json_string(&envelope("study_summary", &summary)) + "\n",
    ));

    for (file_path, content) in files {
        write_text(&file_path, &content)?;
    }
    Ok(summary)
}

/// Names of the artifacts a successful study writes (fit/forecast files
/// vary with the candidate list).
pub const FIXED_ARTIFACTS: [&str; 10] = [
    "monthly_series.csv",
    "decomposition.csv",
    "acf_raw.csv",
    "pacf_raw.csv",
    "acf_diff.csv",
    "pacf_diff.csv",
    "ljung_box.json",
    "comparison.json",
    "comparison.txt",
    "study.json",
];
