//! Study configuration: defaults, a flat `key = value` file format, and
//! candidate-list parsing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use airseries_core::arima::{default_candidates, ArimaSpec};
use airseries_core::ets::EtsSpec;
use airseries_core::ingest::VariableKind;
use airseries_core::series::MonthStamp;

use crate::CliError;

/// Everything `run-study` needs. The defaults reproduce the reference
/// study shape: Ganseo-gu PM2.5, training through 2018-12, a 12-month
/// horizon, five ETS and eight ARIMA candidates.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub input_path: PathBuf,
    pub station: String,
    pub variable: VariableKind,
    /// Last training month; the holdout starts the month after.
    pub train_end: MonthStamp,
    pub horizon: usize,
    pub min_coverage: f64,
    pub output_dir: PathBuf,
    pub ets_candidates: Vec<EtsSpec>,
    pub arima_candidates: Vec<ArimaSpec>,
    /// Emit a cross-family AICc winner (off by default: AICc is only
    /// comparable within a family at matching differencing).
    pub force_aicc: bool,
}

pub fn default_ets_candidates() -> Vec<EtsSpec> {
    ["ANN", "AAN", "AAdN", "AAA", "AAdA"]
        .iter()
        .map(|c| c.parse().expect("built-in codes parse"))
        .collect()
}

impl StudyConfig {
    pub fn new(input_path: PathBuf, output_dir: PathBuf) -> Self {
        Self {
            input_path,
            station: "Ganseo-gu".to_string(),
            variable: VariableKind::Pm25,
            train_end: MonthStamp::new(2018, 12).expect("valid month"),
            horizon: 12,
            min_coverage: 0.5,
            output_dir,
            ets_candidates: default_ets_candidates(),
            arima_candidates: default_candidates(),
            force_aicc: false,
        }
    }

    /// First holdout month.
    pub fn cut(&self) -> MonthStamp {
        self.train_end.plus_months(1)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.horizon < 1 {
            return Err(CliError::Config("horizon must be >= 1".to_string()));
        }
        if self.ets_candidates.is_empty() && self.arima_candidates.is_empty() {
            return Err(CliError::Config(
                "at least one ETS or ARIMA candidate is required".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.min_coverage) {
            return Err(CliError::Config(format!(
                "min_coverage must be in [0, 1], got {}",
                self.min_coverage
            )));
        }
        if !self.input_path.exists() {
            return Err(CliError::Config(format!(
                "input file not found: {}",
                self.input_path.display()
            )));
        }
        Ok(())
    }
}

/// Parses a flat `key = value` file (# starts a comment). Unknown keys are
/// rejected so typos do not silently fall back to defaults.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "{}:{}: expected 'key = value'",
                path.display(),
                line_no + 1
            )));
        };
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

const CONFIG_KEYS: [&str; 9] = [
    "input",
    "station",
    "variable",
    "train_end",
    "horizon",
    "min_coverage",
    "output_dir",
    "ets",
    "arima",
];

/// Applies a parsed config file onto a config; flag overrides are applied
/// by the caller afterwards (flags win).
pub fn apply_config_file(config: &mut StudyConfig, entries: &BTreeMap<String, String>) -> Result<(), CliError> {
    for key in entries.keys() {
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!(
                "unknown config key '{key}' (expected one of: {})",
                CONFIG_KEYS.join(", ")
            )));
        }
    }
    let bad = |key: &str, value: &str, e: String| {
        CliError::Config(format!("config key '{key}' has invalid value '{value}': {e}"))
    };
    if let Some(v) = entries.get("input") {
        config.input_path = PathBuf::from(v);
    }
    if let Some(v) = entries.get("station") {
        config.station = v.clone();
    }
    if let Some(v) = entries.get("variable") {
        config.variable = v.parse().map_err(|e: airseries_core::ingest::IngestError| {
            bad("variable", v, e.to_string())
        })?;
    }
    if let Some(v) = entries.get("train_end") {
        config.train_end = v
            .parse()
            .map_err(|e: airseries_core::series::SeriesError| bad("train_end", v, e.to_string()))?;
    }
    if let Some(v) = entries.get("horizon") {
        config.horizon = v.parse().map_err(|e: std::num::ParseIntError| {
            bad("horizon", v, e.to_string())
        })?;
    }
    if let Some(v) = entries.get("min_coverage") {
        config.min_coverage = v.parse().map_err(|e: std::num::ParseFloatError| {
            bad("min_coverage", v, e.to_string())
        })?;
    }
    if let Some(v) = entries.get("output_dir") {
        config.output_dir = PathBuf::from(v);
    }
    if let Some(v) = entries.get("ets") {
        config.ets_candidates = parse_ets_list(v)?;
    }
    if let Some(v) = entries.get("arima") {
        config.arima_candidates = parse_arima_list(v)?;
    }
    Ok(())
}

/// Comma-separated spec codes, e.g. `ANN,AAN,AAdA`. An empty string means
/// no candidates.
pub fn parse_ets_list(text: &str) -> Result<Vec<EtsSpec>, CliError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|code| {
            code.trim()
                .parse()
                .map_err(|e: airseries_core::ets::EtsError| CliError::Config(e.to_string()))
        })
        .collect()
}

/// Semicolon-separated orders: `p,d,q` or `p,d,q/P,D,Q,m`, each optionally
/// suffixed with `!c` to force the constant off.
pub fn parse_arima_list(text: &str) -> Result<Vec<ArimaSpec>, CliError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(';').map(|s| parse_arima_order(s.trim())).collect()
}

pub fn parse_arima_order(text: &str) -> Result<ArimaSpec, CliError> {
    let (text, no_constant) = match text.strip_suffix("!c") {
        Some(t) => (t, true),
        None => (text, false),
    };
    let bad = || {
        CliError::Config(format!(
            "cannot parse ARIMA order '{text}' (expected p,d,q or p,d,q/P,D,Q,m)"
        ))
    };
    let (nonseasonal, seasonal) = match text.split_once('/') {
        Some((a, b)) => (a, Some(b)),
        None => (text, None),
    };
    let triple: Vec<usize> = nonseasonal
        .split(',')
        .map(|v| v.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    if triple.len() != 3 {
        return Err(bad());
    }
    let mut spec = ArimaSpec::new(triple[0], triple[1], triple[2]);
    if let Some(seasonal) = seasonal {
        let quad: Vec<usize> = seasonal
            .split(',')
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        if quad.len() != 4 || quad[3] < 2 {
            return Err(bad());
        }
        spec = spec.with_seasonal(quad[0], quad[1], quad[2], quad[3]);
    }
    if no_constant {
        spec = spec.with_constant(false);
    }
    Ok(spec)
}
