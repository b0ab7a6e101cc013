//! `airseries` - a workbench for monthly air-quality series: ingest hourly
//! station data, decompose, diagnose, fit ETS and seasonal ARIMA models,
//! forecast, and compare.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use airseries_cli::commands::{self, SeriesSource};
use airseries_cli::config::{
    apply_config_file, parse_arima_list, parse_arima_order, parse_ets_list, read_config_file,
    StudyConfig,
};
use airseries_cli::output::error_json;
use airseries_cli::{run_study, CliError};
use airseries_core::ets::EtsSpec;
use airseries_core::ingest::VariableKind;
use airseries_core::series::MonthStamp;

#[derive(Parser)]
#[command(name = "airseries", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command that reads a monthly series: either a
/// 2-column `month,value` CSV, or the hourly schema selected by station.
#[derive(Args, Clone)]
struct SeriesArgs {
    /// Input CSV (monthly 2-column, or hourly when --station is given)
    #[arg(long)]
    input: PathBuf,
    /// Treat the input as hourly data and aggregate this station
    #[arg(long)]
    station: Option<String>,
    /// Variable column to aggregate from hourly data
    #[arg(long, default_value = "PM25", value_parser = parse_variable)]
    variable: VariableKind,
    /// Minimum fraction of a month's hours that must be observed
    #[arg(long, default_value_t = 0.5)]
    min_coverage: f64,
}

impl SeriesArgs {
    fn source(&self) -> SeriesSource {
        SeriesSource {
            input: self.input.clone(),
            station: self.station.clone(),
            variable: self.variable,
            min_coverage: self.min_coverage,
        }
    }
}

fn parse_variable(s: &str) -> Result<VariableKind, String> {
    s.parse().map_err(|e: airseries_core::ingest::IngestError| e.to_string())
}

fn parse_month(s: &str) -> Result<MonthStamp, String> {
    s.parse().map_err(|e: airseries_core::series::SeriesError| e.to_string())
}

fn parse_ets_spec(s: &str) -> Result<EtsSpec, String> {
    s.parse().map_err(|e: airseries_core::ets::EtsError| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic hourly fixture with a known seasonal process
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        months: usize,
        #[arg(long, default_value = "Ganseo-gu")]
        station: String,
    },
    /// Parse hourly data and emit a monthly series (plus optional tables)
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Station to aggregate (defaults to the first in the file)
        #[arg(long)]
        station: Option<String>,
        #[arg(long, default_value = "PM25", value_parser = parse_variable)]
        variable: VariableKind,
        #[arg(long, default_value_t = 0.5)]
        min_coverage: f64,
        /// Monthly series CSV destination (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write a station-by-variable means CSV
        #[arg(long)]
        means_out: Option<PathBuf>,
        /// Also write PM2.5 correlation tables (JSON)
        #[arg(long)]
        correlations_out: Option<PathBuf>,
        /// Compute correlations on hourly pairs instead of monthly means
        #[arg(long)]
        hourly: bool,
    },
    /// Classical additive decomposition (observed,trend,seasonal,random)
    Decompose {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long, default_value_t = 12)]
        period: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Autocorrelations (lag,value,bound)
    Acf {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long, default_value_t = 24)]
        max_lag: usize,
        /// Ordinary differencing applied first
        #[arg(long, default_value_t = 0)]
        difference: usize,
        /// Seasonal differencing applied first
        #[arg(long, default_value_t = 0)]
        seasonal_difference: usize,
        #[arg(long, default_value_t = 12)]
        period: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Partial autocorrelations (lag,value,bound)
    Pacf {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long, default_value_t = 24)]
        max_lag: usize,
        #[arg(long, default_value_t = 0)]
        difference: usize,
        #[arg(long, default_value_t = 0)]
        seasonal_difference: usize,
        #[arg(long, default_value_t = 12)]
        period: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Ljung-Box white-noise test (one-line JSON verdict)
    LjungBox {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long, default_value_t = 12)]
        lags: usize,
        #[arg(long, default_value_t = 0)]
        fitted_params: usize,
    },
    /// Fit an additive ETS model (ANN, AAN, AAdN, AAA, AAdA)
    FitEts {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long, value_parser = parse_ets_spec)]
        spec: EtsSpec,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit a seasonal ARIMA model by conditional sum of squares
    FitArima {
        #[command(flatten)]
        series: SeriesArgs,
        /// Nonseasonal order as p,d,q
        #[arg(long)]
        order: String,
        /// Seasonal order as P,D,Q,m
        #[arg(long)]
        seasonal: Option<String>,
        /// Drop the constant term
        #[arg(long)]
        no_constant: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Forecast from a serialized fit (month,point,lower,upper)
    Forecast {
        /// A fit JSON produced by fit-ets or fit-arima
        #[arg(long)]
        fit: PathBuf,
        #[arg(long, default_value_t = 12)]
        horizon: usize,
        /// Gaussian band multiplier
        #[arg(long, default_value_t = 1.96)]
        z: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Holdout-evaluate candidate models and rank them per criterion
    Compare {
        #[command(flatten)]
        series: SeriesArgs,
        /// Last training month (YYYY-MM)
        #[arg(long, value_parser = parse_month)]
        train_end: MonthStamp,
        #[arg(long)]
        horizon: Option<usize>,
        /// Comma-separated ETS codes (e.g. ANN,AAdA)
        #[arg(long, default_value = "ANN,AAN,AAdN,AAA,AAdA")]
        ets: String,
        /// Semicolon-separated ARIMA orders (p,d,q or p,d,q/P,D,Q,m)
        #[arg(long, default_value = "2,0,0;3,0,0;2,1,0;2,2,0;2,1,1;2,1,2;0,0,0/0,1,0,12;0,0,0/0,1,2,12")]
        arima: String,
        /// Also rank AICc across model families
        #[arg(long)]
        force_aicc: bool,
        /// Comparison JSON destination (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
        /// Text table destination (stderr when omitted)
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Run the full study pipeline and write all artifacts
    RunStudy {
        /// Flat key=value config file; flags override its entries
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        station: Option<String>,
        #[arg(long, value_parser = parse_variable)]
        variable: Option<VariableKind>,
        /// Last training month (YYYY-MM)
        #[arg(long, value_parser = parse_month)]
        train_end: Option<MonthStamp>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        min_coverage: Option<f64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Comma-separated ETS codes; empty string disables the family
        #[arg(long)]
        ets: Option<String>,
        /// Semicolon-separated ARIMA orders; empty string disables
        #[arg(long)]
        arima: Option<String>,
        #[arg(long)]
        force_aicc: bool,
    },
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth {
            output,
            seed,
            months,
            station,
        } => commands::synth(&output, seed, months, &station),
        Command::Ingest {
            input,
            station,
            variable,
            min_coverage,
            output,
            means_out,
            correlations_out,
            hourly,
        } => commands::ingest(
            &input,
            station.as_deref(),
            variable,
            min_coverage,
            output.as_deref(),
            means_out.as_deref(),
            correlations_out.as_deref(),
            hourly,
        ),
        Command::Decompose {
            series,
            period,
            output,
        } => commands::decompose(&series.source(), period, output.as_deref()),
        Command::Acf {
            series,
            max_lag,
            difference,
            seasonal_difference,
            period,
            output,
        } => commands::correlogram(
            &series.source(),
            false,
            max_lag,
            difference,
            seasonal_difference,
            period,
            output.as_deref(),
        ),
        Command::Pacf {
            series,
            max_lag,
            difference,
            seasonal_difference,
            period,
            output,
        } => commands::correlogram(
            &series.source(),
            true,
            max_lag,
            difference,
            seasonal_difference,
            period,
            output.as_deref(),
        ),
        Command::LjungBox {
            series,
            lags,
            fitted_params,
        } => commands::ljung_box_command(&series.source(), lags, fitted_params),
        Command::FitEts {
            series,
            spec,
            output,
        } => commands::fit_ets(&series.source(), &spec, output.as_deref()),
        Command::FitArima {
            series,
            order,
            seasonal,
            no_constant,
            output,
        } => {
            let text = match seasonal {
                Some(seasonal) => format!("{order}/{seasonal}"),
                None => order,
            };
            let mut spec = parse_arima_order(&text)?;
            if no_constant {
                spec = spec.with_constant(false);
            }
            commands::fit_arima(&series.source(), &spec, output.as_deref())
        }
        Command::Forecast {
            fit,
            horizon,
            z,
            output,
        } => commands::forecast(&fit, horizon, z, output.as_deref()),
        Command::Compare {
            series,
            train_end,
            horizon,
            ets,
            arima,
            force_aicc,
            output,
            table,
        } => commands::compare(
            &series.source(),
            train_end,
            horizon,
            &parse_ets_list(&ets)?,
            &parse_arima_list(&arima)?,
            force_aicc,
            output.as_deref(),
            table.as_deref(),
        ),
        Command::RunStudy {
            config,
            input,
            station,
            variable,
            train_end,
            horizon,
            min_coverage,
            output_dir,
            ets,
            arima,
            force_aicc,
        } => {
            let mut study = StudyConfig::new(PathBuf::new(), PathBuf::from("study_out"));
            if let Some(path) = config {
                let entries = read_config_file(&path)?;
                apply_config_file(&mut study, &entries)?;
            }
            if let Some(v) = input {
                study.input_path = v;
            }
            if let Some(v) = station {
                study.station = v;
            }
            if let Some(v) = variable {
                study.variable = v;
            }
            if let Some(v) = train_end {
                study.train_end = v;
            }
            if let Some(v) = horizon {
                study.horizon = v;
            }
            if let Some(v) = min_coverage {
                study.min_coverage = v;
            }
            if let Some(v) = output_dir {
                study.output_dir = v;
            }
            if let Some(v) = ets {
                study.ets_candidates = parse_ets_list(&v)?;
            }
            if let Some(v) = arima {
                study.arima_candidates = parse_arima_list(&v)?;
            }
            study.force_aicc = force_aicc;
            if study.input_path.as_os_str().is_empty() {
                return Err(CliError::Config(
                    "an input file is required (--input or the config file)".to_string(),
                ));
            }
            let summary = run_study(&study)?;
            eprintln!(
                "study complete: {} candidates ({} ok) -> {}",
                summary.candidates.len(),
                summary.candidates.iter().filter(|c| c.ok).count(),
                summary.output_dir.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("{}", error_json(&error));
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
