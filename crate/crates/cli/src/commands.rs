//! Subcommand implementations. Each wraps one library operation: series
//! and table data go to files or standard output, diagnostics go to
//! standard error.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use airseries_core::arima::{arima_fit, arima_forecast_with_bands, ArimaFit, ArimaSpec};
use airseries_core::correlogram::{acf, ljung_box, pacf, Correlogram};
use airseries_core::csvio;
use airseries_core::decompose::classical_decompose;
use airseries_core::ets::{ets_fit, ets_forecast_with_bands, EtsFit, EtsSpec};
use airseries_core::ingest::{
    descriptive_means, monthly_mean, parse_hourly_csv, station_ids, CsvSchema,
    VariableKind,
};
use airseries_core::metrics::{compare_models, compute_metrics, train_metrics, ComparisonEntry};
use airseries_core::series::{difference, seasonal_difference, split_at, MonthStamp, TimeSeries};
use airseries_core::stats::{correlation_table, CorrelationGranularity};
use airseries_core::synth::{hourly_records, write_hourly_csv, SyntheticConfig};

use crate::output::{envelope, to_json_string, write_text};
use crate::CliError;

fn data_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn config_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

/// Where a monthly series comes from: a 2-column monthly CSV, or the
/// hourly schema aggregated for one station/variable.
#[derive(Debug, Clone)]
pub struct SeriesSource {
    pub input: PathBuf,
    pub station: Option<String>,
    pub variable: VariableKind,
    pub min_coverage: f64,
}

impl SeriesSource {
    pub fn load(&self) -> Result<TimeSeries, CliError> {
        let file = File::open(&self.input)
            .map_err(|e| CliError::Data(format!("cannot open {}: {e}", self.input.display())))?;
        match &self.station {
            Some(station) => {
                let (records, report) =
                    parse_hourly_csv(file, &CsvSchema::default()).map_err(data_err)?;
                report_parse_issues(&report);
                monthly_mean(&records, station, self.variable, self.min_coverage)
                    .map_err(data_err)
            }
            None => csvio::read_monthly_series(file).map_err(data_err),
        }
    }
}

fn report_parse_issues(report: &airseries_core::ingest::ParseReport) {
    if report.duplicate_rows > 0 {
        eprintln!(
            "warning: dropped {} duplicate station-hour rows",
            report.duplicate_rows
        );
    }
    for issue in &report.skipped_rows {
        eprintln!("warning: row {} skipped: {}", issue.row, issue.message);
    }
}

fn emit(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(path) => write_text(path, content),
        None => {
            std::io::stdout()
                .write_all(content.as_bytes())
                .map_err(data_err)
        }
    }
}

fn csv_to_string<F>(write: F) -> Result<String, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), csvio::CsvFormatError>,
{
    let mut buffer = Vec::new();
    write(&mut buffer).map_err(data_err)?;
    String::from_utf8(buffer).map_err(data_err)
}

/// `synth`: write a seeded synthetic hourly fixture.
pub fn synth(
    output: &Path,
    seed: u64,
    months: usize,
    station: &str,
) -> Result<(), CliError> {
    let config = SyntheticConfig {
        months,
        ..Default::default()
    };
    let records = hourly_records(&config, station, seed);
    let mut buffer = Vec::new();
    write_hourly_csv(
        &mut buffer,
        &records,
        &[VariableKind::Pm25, VariableKind::Pm10, VariableKind::Temperature],
    )
    .map_err(data_err)?;
    write_text(output, &String::from_utf8(buffer).map_err(data_err)?)?;
    eprintln!(
        "wrote {} hourly rows for station '{station}' to {}",
        records.len(),
        output.display()
    );
    Ok(())
}

/// `ingest`: aggregate a station/variable to monthly means; optionally
/// emit descriptive-means and correlation tables.
#[allow(clippy::too_many_arguments)]
pub fn ingest(
    input: &Path,
    station: Option<&str>,
    variable: VariableKind,
    min_coverage: f64,
    output: Option<&Path>,
    means_out: Option<&Path>,
    correlations_out: Option<&Path>,
    hourly_correlations: bool,
) -> Result<(), CliError> {
    let file = File::open(input)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", input.display())))?;
    let (records, report) = parse_hourly_csv(file, &CsvSchema::default()).map_err(data_err)?;
    report_parse_issues(&report);
    let stations = station_ids(&records);
    if stations.is_empty() {
        return Err(CliError::Data("input contains no usable rows".to_string()));
    }

    let station = match station {
        Some(s) => s.to_string(),
        None => stations[0].clone(),
    };
    let series = monthly_mean(&records, &station, variable, min_coverage).map_err(data_err)?;
    emit(output, &csv_to_string(|w| csvio::write_monthly_series(w, &series))?)?;

    if let Some(path) = means_out {
        let table = descriptive_means(&records, &stations, &VariableKind::ALL);
        if wants_json(path) {
            write_text(path, &(to_json_string(&envelope("means_table", &table)) + "\n"))?;
        } else {
            let rows = csvio::VariableTable {
                stations: table.stations.clone(),
                variables: table.variables.clone(),
                entries: table.entries.clone(),
            };
            write_text(path, &csv_to_string(|w| csvio::write_variable_table(w, &rows))?)?;
        }
    }
    if let Some(path) = correlations_out {
        let granularity = if hourly_correlations {
            CorrelationGranularity::Hourly
        } else {
            CorrelationGranularity::Monthly { min_coverage }
        };
        let pollutants: Vec<VariableKind> = VariableKind::POLLUTANTS
            .iter()
            .copied()
            .filter(|v| *v != VariableKind::Pm25)
            .collect();
        let poll = correlation_table(&records, &stations, VariableKind::Pm25, &pollutants, granularity)
            .map_err(data_err)?;
        let meteo = correlation_table(
            &records,
            &stations,
            VariableKind::Pm25,
            &VariableKind::METEOROLOGICAL,
            granularity,
        )
        .map_err(data_err)?;
        if wants_json(path) {
            let payload = json!({ "pollutants": poll, "meteorological": meteo });
            write_text(path, &(to_json_string(&envelope("correlations", &payload)) + "\n"))?;
        } else {
            // One combined CSV: PM2.5 against every other variable.
            let variables: Vec<VariableKind> =
                poll.variables.iter().chain(&meteo.variables).copied().collect();
            let entries: Vec<Vec<Option<f64>>> = poll
                .entries
                .iter()
                .zip(&meteo.entries)
                .map(|(a, b)| a.iter().chain(b).copied().collect())
                .collect();
            let rows = csvio::VariableTable {
                stations: poll.stations.clone(),
                variables,
                entries,
            };
            write_text(path, &csv_to_string(|w| csvio::write_variable_table(w, &rows))?)?;
        }
    }
    Ok(())
}

fn wants_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// `decompose`: 4-column observed/trend/seasonal/random CSV.
pub fn decompose(source: &SeriesSource, period: usize, output: Option<&Path>) -> Result<(), CliError> {
    let series = source.load()?;
    let d = classical_decompose(&series, period).map_err(data_err)?;
    emit(output, &csv_to_string(|w| csvio::write_decomposition(w, &series, &d))?)
}

/// `acf` / `pacf`: lag,value,bound CSV, optionally after differencing.
pub fn correlogram(
    source: &SeriesSource,
    partial: bool,
    max_lag: usize,
    d: usize,
    seasonal_d: usize,
    period: usize,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let mut series = source.load()?;
    if seasonal_d > 0 {
        series = seasonal_difference(&series, period, seasonal_d).map_err(data_err)?;
    }
    if d > 0 {
        series = difference(&series, d).map_err(data_err)?;
    }
    let result: Correlogram = if partial {
        pacf(&series, max_lag).map_err(data_err)?
    } else {
        acf(&series, max_lag).map_err(data_err)?
    };
    emit(output, &csv_to_string(|w| csvio::write_correlogram(w, &result))?)
}

/// `ljung-box`: one-line JSON verdict on standard output.
pub fn ljung_box_command(
    source: &SeriesSource,
    lags: usize,
    fitted_params: usize,
) -> Result<(), CliError> {
    let series = source.load()?;
    let test = ljung_box(&series, lags, fitted_params).map_err(data_err)?;
    println!(
        "{}",
        serde_json::to_string(&envelope("ljung_box", &test)).map_err(data_err)?
    );
    Ok(())
}

/// `fit-ets`: fit one spec and serialize the model.
pub fn fit_ets(source: &SeriesSource, spec: &EtsSpec, output: Option<&Path>) -> Result<(), CliError> {
    let series = source.load()?;
    let fit = ets_fit(spec, &series).map_err(data_err)?;
    emit(output, &(to_json_string(&envelope("ets_fit", &fit)) + "\n"))
}

/// `fit-arima`: fit one order and serialize the model.
pub fn fit_arima(
    source: &SeriesSource,
    spec: &ArimaSpec,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let series = source.load()?;
    let fit = arima_fit(spec, &series).map_err(data_err)?;
    emit(output, &(to_json_string(&envelope("arima_fit", &fit)) + "\n"))
}

/// `forecast`: read a serialized fit (either family) and emit a
/// month,point,lower,upper CSV.
pub fn forecast(fit_path: &Path, horizon: usize, z: f64, output: Option<&Path>) -> Result<(), CliError> {
    if horizon < 1 {
        return Err(config_err("horizon must be >= 1"));
    }
    let text = std::fs::read_to_string(fit_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", fit_path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(data_err)?;
    let kind = value.get("kind").and_then(|v| v.as_str()).unwrap_or("");
    let payload = value
        .get("payload")
        .cloned()
        .ok_or_else(|| CliError::Data("fit file has no payload".to_string()))?;
    let bands = match kind {
        "ets_fit" => {
            let fit: EtsFit = serde_json::from_value(payload).map_err(data_err)?;
            ets_forecast_with_bands(&fit, horizon, z).map_err(data_err)?
        }
        "arima_fit" => {
            let fit: ArimaFit = serde_json::from_value(payload).map_err(data_err)?;
            arima_forecast_with_bands(&fit, horizon, z).map_err(data_err)?
        }
        other => {
            return Err(CliError::Data(format!(
                "{}: expected an ets_fit or arima_fit document, found '{other}'",
                fit_path.display()
            )))
        }
    };
    emit(output, &csv_to_string(|w| csvio::write_forecast(w, &bands))?)
}

/// `compare`: holdout-evaluate candidate models and emit a comparison.
#[allow(clippy::too_many_arguments)]
pub fn compare(
    source: &SeriesSource,
    train_end: MonthStamp,
    horizon: Option<usize>,
    ets_candidates: &[EtsSpec],
    arima_candidates: &[ArimaSpec],
    force_aicc: bool,
    output: Option<&Path>,
    table_out: Option<&Path>,
) -> Result<(), CliError> {
    if ets_candidates.is_empty() && arima_candidates.is_empty() {
        return Err(config_err("at least one candidate model is required"));
    }
    let series = source.load()?;
    let cut = train_end.plus_months(1);
    let (train, test) = split_at(&series, cut).map_err(data_err)?;
    let horizon = horizon.unwrap_or(test.len()).min(test.len());
    if horizon == 0 {
        return Err(CliError::Data("holdout window is empty".to_string()));
    }
    let test_head = TimeSeries::new(
        test.start(),
        test.period(),
        test.values()[..horizon].to_vec(),
    )
    .expect("valid period");

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for spec in ets_candidates {
        match ets_fit(spec, &train) {
            Ok(fit) => {
                let train_set = train_metrics(&train, &fit).map_err(data_err)?;
                let bands = ets_forecast_with_bands(&fit, horizon, 1.96).map_err(data_err)?;
                let test_set = compute_metrics(&test_head, &bands.point).map_err(data_err)?;
                entries.push(ComparisonEntry {
                    label: fit.spec.to_string(),
                    family: "ets:d0:D0".to_string(),
                    train: train_set,
                    test: test_set,
                    aicc: fit.aicc,
                    n_params: fit.k,
                });
            }
            Err(e) => failures.push(format!("{spec}: {e}")),
        }
    }
    for spec in arima_candidates {
        match arima_fit(spec, &train) {
            Ok(fit) => {
                let train_set = train_metrics(&train, &fit).map_err(data_err)?;
                let bands = arima_forecast_with_bands(&fit, horizon, 1.96).map_err(data_err)?;
                let test_set = compute_metrics(&test_head, &bands.point).map_err(data_err)?;
                entries.push(ComparisonEntry {
                    label: fit.spec.to_string(),
                    family: format!("arima:d{}:D{}", spec.d, spec.seasonal_d),
                    train: train_set,
                    test: test_set,
                    aicc: fit.aicc,
                    n_params: fit.k,
                });
            }
            Err(e) => failures.push(format!("{spec}: {e}")),
        }
    }
    for failure in &failures {
        eprintln!("warning: candidate failed: {failure}");
    }
    if entries.is_empty() {
        return Err(CliError::AllCandidatesFailed(format!(
            "no candidate produced a fit: {}",
            failures.join("; ")
        )));
    }
    let report = compare_models(entries, force_aicc).map_err(data_err)?;
    if let Some(path) = table_out {
        write_text(path, &report.to_text_table())?;
    } else {
        eprintln!("{}", report.to_text_table());
    }
    emit(output, &(to_json_string(&envelope("comparison", &report)) + "\n"))
}
