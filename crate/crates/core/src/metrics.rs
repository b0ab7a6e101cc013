//! Forecast accuracy metrics, the corrected Akaike criterion, holdout
//! evaluation, and cross-model comparison reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{split_at, MonthStamp, SeriesError, TimeSeries};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("actual and predicted series are not aligned (same start and length required)")]
    Misaligned,
    #[error("need at least one aligned observation")]
    Empty,
    #[error("series contains missing values")]
    MissingData,
    #[error("actual value is 0 at index {index}; percentage metrics are undefined")]
    PercentageUndefined { index: usize, partial: BaseMetrics },
    #[error("AICc needs n > k + 1 (n = {n}, k = {k})")]
    SmallSampleDof { n: usize, k: usize },
    #[error("holdout split failed: {0}")]
    Split(#[from] SeriesError),
    #[error("model fit failed: {0}")]
    Fit(String),
    #[error("comparison needs at least one entry")]
    NoEntries,
}

/// The scale-dependent subset (returned even when percentages are undefined).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseMetrics {
    pub me: f64,
    pub rmse: f64,
    pub mae: f64,
}

/// The five accuracy measures for one (model, data-split) pair. `mpe` and
/// `mape` are in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub me: f64,
    pub rmse: f64,
    pub mae: f64,
    pub mpe: f64,
    pub mape: f64,
}

fn base_metrics(errors: &[f64]) -> BaseMetrics {
    let n = errors.len() as f64;
    let me = errors.iter().sum::<f64>() / n;
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
    BaseMetrics { me, rmse, mae }
}

/// Computes the five metrics over two aligned, missing-free series, with
/// errors defined as `actual - predicted`.
pub fn compute_metrics(actual: &TimeSeries, predicted: &TimeSeries) -> Result<MetricSet, EvalError> {
    if actual.start() != predicted.start() || actual.len() != predicted.len() {
        return Err(EvalError::Misaligned);
    }
    if actual.is_empty() {
        return Err(EvalError::Empty);
    }
    let a = actual.dense().map_err(|_| EvalError::MissingData)?;
    let p = predicted.dense().map_err(|_| EvalError::MissingData)?;
    compute_metrics_slices(&a, &p)
}

/// Slice-level core of [`compute_metrics`] (alignment already established).
pub fn compute_metrics_slices(actual: &[f64], predicted: &[f64]) -> Result<MetricSet, EvalError> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(EvalError::Empty);
    }
    let errors: Vec<f64> = actual.iter().zip(predicted).map(|(a, p)| a - p).collect();
    let base = base_metrics(&errors);
    if let Some(index) = actual.iter().position(|&a| a == 0.0) {
        return Err(EvalError::PercentageUndefined {
            index,
            partial: base,
        });
    }
    let n = errors.len() as f64;
    let mpe = 100.0 * errors.iter().zip(actual).map(|(e, a)| e / a).sum::<f64>() / n;
    let mape = 100.0 * errors.iter().zip(actual).map(|(e, a)| (e / a).abs()).sum::<f64>() / n;
    Ok(MetricSet {
        me: base.me,
        rmse: base.rmse,
        mae: base.mae,
        mpe,
        mape,
    })
}

/// Corrected Akaike information criterion:
/// `AICc = -2 loglik + 2k + 2k(k+1)/(n-k-1)`.
pub fn aicc(loglik: f64, k: usize, n: usize) -> Result<f64, EvalError> {
    if n <= k + 1 {
        return Err(EvalError::SmallSampleDof { n, k });
    }
    let kf = k as f64;
    Ok(-2.0 * loglik + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (n as f64 - kf - 1.0))
}

/// A fitted model that can report in-sample one-step predictions and
/// extrapolate beyond its training window.
pub trait Forecaster {
    /// In-sample one-step fitted values, calendar-aligned with the training
    /// series. Warm-up positions may be missing.
    fn fitted_values(&self) -> TimeSeries;

    /// Point forecasts for the `horizon` months after the training window.
    fn forecast(&self, horizon: usize) -> TimeSeries;
}

/// Train metrics compare actuals with fitted values wherever the model
/// produced one (warm-up slots are skipped).
pub fn train_metrics<M: Forecaster>(train: &TimeSeries, model: &M) -> Result<MetricSet, EvalError> {
    let fitted = model.fitted_values();
    let offset = fitted.start().months_since(train.start());
    if offset < 0 {
        return Err(EvalError::Misaligned);
    }
    let mut a = Vec::new();
    let mut p = Vec::new();
    for i in 0..fitted.len() {
        let j = i + offset as usize;
        match (train.get(j), fitted.get(i)) {
            (Some(av), Some(pv)) => {
                a.push(av);
                p.push(pv);
            }
            (None, Some(_)) => return Err(EvalError::MissingData),
            _ => {}
        }
    }
    compute_metrics_slices(&a, &p)
}

/// Fits on the training part only and scores both splits. The test segment
/// never reaches the fitter.
pub fn holdout_evaluate<M, E, F>(
    fitter: F,
    series: &TimeSeries,
    cut: MonthStamp,
    horizon: Option<usize>,
) -> Result<(MetricSet, MetricSet), EvalError>
where
    F: FnOnce(&TimeSeries) -> Result<M, E>,
    E: std::fmt::Display,
    M: Forecaster,
{
    let (train, test) = split_at(series, cut)?;
    if test.is_empty() {
        return Err(EvalError::Empty);
    }
    let h = horizon.unwrap_or(test.len()).min(test.len());
    let model = fitter(&train).map_err(|e| EvalError::Fit(e.to_string()))?;
    let train_set = train_metrics(&train, &model)?;
    let forecast = model.forecast(h);
    let (test_head, _) = if h < test.len() {
        (
            TimeSeries::new(test.start(), test.period(), test.values()[..h].to_vec())
                .expect("period already validated"),
            (),
        )
    } else {
        (test, ())
    };
    let test_set = compute_metrics(&test_head, &forecast)?;
    Ok((train_set, test_set))
}

/// One model's row in a comparison: label, family tag used for AICc
/// grouping, metrics, and complexity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub label: String,
    /// Model family plus differencing orders, e.g. `ets:d0:D0` or
    /// `arima:d1:D0`. AICc is only ranked within a group.
    pub family: String,
    pub train: MetricSet,
    pub test: MetricSet,
    pub aicc: f64,
    pub n_params: usize,
}

/// Ranked comparison across candidate models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub entries: Vec<ComparisonEntry>,
    /// Criterion name ("test:rmse", "train:mape", ...) to winning label.
    pub winner_by: BTreeMap<String, String>,
    /// AICc winner per family group; cross-family AICc ranking is
    /// intentionally not produced unless `force_aicc` was set.
    pub aicc_winner_by_family: BTreeMap<String, String>,
}

type MetricGetter = fn(&MetricSet) -> f64;

const CRITERIA: [(&str, MetricGetter); 5] = [
    ("me", |m| m.me),
    ("rmse", |m| m.rmse),
    ("mae", |m| m.mae),
    ("mpe", |m| m.mpe),
    ("mape", |m| m.mape),
];

/// Picks the entry minimizing `value`, breaking ties by fewer parameters and
/// then declaration order.
fn winner(
    entries: &[ComparisonEntry],
    value: impl Fn(&ComparisonEntry) -> f64,
) -> &ComparisonEntry {
    entries
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            value(a)
                .total_cmp(&value(b))
                .then(a.n_params.cmp(&b.n_params))
                .then(ia.cmp(ib))
        })
        .map(|(_, e)| e)
        .expect("entries checked non-empty")
}

/// Ranks entries per criterion. AICc winners are reported per family group;
/// `force_aicc` additionally emits a cross-family AICc winner.
pub fn compare_models(
    entries: Vec<ComparisonEntry>,
    force_aicc: bool,
) -> Result<ComparisonReport, EvalError> {
    if entries.is_empty() {
        return Err(EvalError::NoEntries);
    }
    let mut winner_by = BTreeMap::new();
    for (name, get) in CRITERIA {
        for (split, pick) in [
            ("train", (|e: &ComparisonEntry| &e.train) as fn(&ComparisonEntry) -> &MetricSet),
            ("test", |e: &ComparisonEntry| &e.test),
        ] {
            let w = winner(&entries, |e| get(pick(e)));
            winner_by.insert(format!("{split}:{name}"), w.label.clone());
        }
    }

    let mut aicc_winner_by_family = BTreeMap::new();
    let mut families: Vec<&str> = entries.iter().map(|e| e.family.as_str()).collect();
    families.sort_unstable();
    families.dedup();
    for family in families {
        let group: Vec<ComparisonEntry> = entries
            .iter()
            .filter(|e| e.family == family)
            .cloned()
            .collect();
        let w = winner(&group, |e| e.aicc);
        aicc_winner_by_family.insert(family.to_string(), w.label.clone());
    }
    if force_aicc {
        let w = winner(&entries, |e| e.aicc);
        winner_by.insert("aicc".to_string(), w.label.clone());
    }

    Ok(ComparisonReport {
        entries,
        winner_by,
        aicc_winner_by_family,
    })
}

impl ComparisonReport {
    /// Aligned text table: one training row and one test row per model.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let label_width = self
            .entries
            .iter()
            .map(|e| e.label.len())
            .max()
            .unwrap_or(5)
            .max("Models".len());
        out.push_str(&format!(
            "{:<label_width$}  {:<12} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
            "Models", "Dataset", "ME", "RMSE", "MAE", "MPE", "MAPE"
        ));
        for e in &self.entries {
            for (name, m) in [("Training set", &e.train), ("Test set", &e.test)] {
                let label = if name == "Training set" { &e.label } else { "" };
                out.push_str(&format!(
                    "{:<label_width$}  {:<12} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>10.3}\n",
                    label, name, m.me, m.rmse, m.mae, m.mpe, m.mape
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::MonthStamp;

    fn ts(values: &[f64]) -> TimeSeries {
        TimeSeries::from_values(MonthStamp::new(2015, 1).unwrap(), 12, values.to_vec()).unwrap()
    }

    fn metric(me: f64, rmse: f64, mae: f64, mpe: f64, mape: f64) -> MetricSet {
        MetricSet {
            me,
            rmse,
            mae,
            mpe,
            mape,
        }
    }

    #[test]
    fn five_metric_hand_case() {
        let m = compute_metrics(&ts(&[10.0, 20.0]), &ts(&[12.0, 18.0])).unwrap();
        assert!((m.me - 0.0).abs() < 1e-12);
        assert!((m.rmse - 2.0).abs() < 1e-12);
        assert!((m.mae - 2.0).abs() < 1e-12);
        assert!((m.mpe - -5.0).abs() < 1e-12);
        assert!((m.mape - 15.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_forecast_is_all_zero() {
        let s = ts(&[3.0, 1.0, 4.0, 1.0, 5.0]);
        let m = compute_metrics(&s, &s).unwrap();
        assert_eq!(
            (m.me, m.rmse, m.mae, m.mpe, m.mape),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn zero_actual_returns_partial_metrics() {
        let err = compute_metrics(&ts(&[0.0, 2.0]), &ts(&[1.0, 1.0])).unwrap_err();
        match err {
            EvalError::PercentageUndefined { index, partial } => {
                assert_eq!(index, 0);
                assert!((partial.mae - 1.0).abs() < 1e-12);
                assert!((partial.me - 0.0).abs() < 1e-12);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn misaligned_series_rejected() {
        let a = ts(&[1.0, 2.0]);
        let b = TimeSeries::from_values(MonthStamp::new(2015, 2).unwrap(), 12, vec![1.0, 2.0])
            .unwrap();
        assert!(matches!(
            compute_metrics(&a, &b),
            Err(EvalError::Misaligned)
        ));
    }

    #[test]
    fn metric_inequalities_hold_randomized() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=24);
            let actual: Vec<f64> = (0..n)
                .map(|_| {
                    let v: f64 = rng.gen_range(0.5..100.0);
                    if rng.gen_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            let predicted: Vec<f64> = actual
                .iter()
                .map(|a| a + rng.gen_range(-10.0..10.0))
                .collect();
            let m = compute_metrics_slices(&actual, &predicted).unwrap();
            assert!(m.rmse >= m.mae - 1e-12);
            assert!(m.mae >= m.me.abs() - 1e-12);
            assert!(m.mape >= m.mpe.abs() - 1e-12);
            assert!(m.rmse >= 0.0 && m.mae >= 0.0 && m.mape >= 0.0);
        }
    }

    #[test]
    fn scale_equivariance() {
        let actual = [10.0, 22.0, 31.0, 44.0];
        let predicted = [11.0, 20.0, 35.0, 40.0];
        let m1 = compute_metrics_slices(&actual, &predicted).unwrap();
        let a2: Vec<f64> = actual.iter().map(|v| v * 7.5).collect();
        let p2: Vec<f64> = predicted.iter().map(|v| v * 7.5).collect();
        let m2 = compute_metrics_slices(&a2, &p2).unwrap();
        assert!((m2.me - 7.5 * m1.me).abs() < 1e-10);
        assert!((m2.rmse - 7.5 * m1.rmse).abs() < 1e-10);
        assert!((m2.mae - 7.5 * m1.mae).abs() < 1e-10);
        assert!((m2.mpe - m1.mpe).abs() < 1e-10);
        assert!((m2.mape - m1.mape).abs() < 1e-10);
    }

    #[test]
    fn aicc_formula_case() {
        let v = aicc(0.0, 2, 10).unwrap();
        assert!((v - (4.0 + 12.0 / 7.0)).abs() < 1e-12);
    }

    #[test]
    fn aicc_large_n_approaches_aic() {
        let v = aicc(0.0, 1, 1_000_000).unwrap();
        assert!((v - 2.0).abs() < 1e-5);
    }

    #[test]
    fn aicc_penalty_monotone_in_k() {
        let n = 50;
        let mut prev = aicc(-10.0, 1, n).unwrap();
        for k in 2..n - 1 {
            let cur = aicc(-10.0, k, n).unwrap();
            assert!(cur > prev, "penalty not increasing at k={k}");
            prev = cur;
        }
    }

    #[test]
    fn aicc_rejects_small_samples() {
        assert!(matches!(
            aicc(0.0, 5, 6),
            Err(EvalError::SmallSampleDof { .. })
        ));
        assert!(aicc(0.0, 5, 7).is_ok());
    }

    #[test]
    fn aicc_minus_aic_identity() {
        for (loglik, k, n) in [(-3.0, 2usize, 30usize), (5.0, 4, 48), (0.0, 7, 100)] {
            let aic = -2.0 * loglik + 2.0 * k as f64;
            let got = aicc(loglik, k, n).unwrap() - aic;
            let want = 2.0 * k as f64 * (k as f64 + 1.0) / (n as f64 - k as f64 - 1.0);
            assert!((got - want).abs() < 1e-12);
        }
    }

    /// Naive fitter: predicts the last training value everywhere.
    struct Naive {
        train: TimeSeries,
    }

    impl Forecaster for Naive {
        fn fitted_values(&self) -> TimeSeries {
            let last = self.train.get(self.train.len() - 1).unwrap();
            TimeSeries::from_values(
                self.train.start(),
                self.train.period(),
                vec![last; self.train.len()],
            )
            .unwrap()
        }

        fn forecast(&self, horizon: usize) -> TimeSeries {
            let last = self.train.get(self.train.len() - 1).unwrap();
            TimeSeries::from_values(self.train.end(), self.train.period(), vec![last; horizon])
                .unwrap()
        }
    }

    #[test]
    fn holdout_on_constant_series_is_exact() {
        let s = ts(&[7.0; 24]);
        let cut = MonthStamp::new(2016, 1).unwrap();
        let (train, test) = holdout_evaluate(
            |t: &TimeSeries| Ok::<_, SeriesError>(Naive { train: t.clone() }),
            &s,
            cut,
            None,
        )
        .unwrap();
        assert_eq!(train.rmse, 0.0);
        assert_eq!(test.rmse, 0.0);
        assert_eq!(test.mape, 0.0);
    }

    /// Seasonal-naive fitter: repeats the final observed season.
    struct SeasonalNaive {
        train: TimeSeries,
    }

    impl Forecaster for SeasonalNaive {
        fn fitted_values(&self) -> TimeSeries {
            let m = self.train.period();
            let vals: Vec<Option<f64>> = (0..self.train.len())
                .map(|i| if i >= m { self.train.get(i - m) } else { None })
                .collect();
            TimeSeries::new(self.train.start(), m, vals).unwrap()
        }

        fn forecast(&self, horizon: usize) -> TimeSeries {
            let m = self.train.period();
            let n = self.train.len();
            let vals: Vec<f64> = (0..horizon)
                .map(|h| {
                    let mut idx = n + h;
                    while idx >= n {
                        idx -= m;
                    }
                    self.train.get(idx).unwrap()
                })
                .collect();
            TimeSeries::from_values(self.train.end(), m, vals).unwrap()
        }
    }

    #[test]
    fn holdout_fitter_sees_exactly_the_training_window() {
        let values: Vec<f64> = (1..=60).map(f64::from).collect();
        let s = ts(&values);
        let cut = MonthStamp::new(2019, 1).unwrap();
        let seen = std::cell::RefCell::new(None);
        holdout_evaluate(
            |t: &TimeSeries| {
                *seen.borrow_mut() = Some(t.clone());
                Ok::<_, SeriesError>(Naive { train: t.clone() })
            },
            &s,
            cut,
            None,
        )
        .unwrap();
        let seen = seen.into_inner().unwrap();
        assert_eq!(seen.len(), 48);
        assert_eq!(seen.end(), cut);
        for i in 0..48 {
            assert_eq!(seen.get(i), Some(values[i]));
        }
    }

    #[test]
    fn holdout_seasonal_naive_on_periodic_series() {
        let pattern = [5.0, 8.0, 2.0, 9.0, 4.0, 7.0, 1.0, 3.0, 6.0, 2.5, 8.5, 4.5];
        let values: Vec<f64> = (0..48).map(|i| pattern[i % 12]).collect();
        let s = ts(&values);
        let cut = MonthStamp::new(2018, 1).unwrap();
        let (_, test) = holdout_evaluate(
            |t: &TimeSeries| Ok::<_, SeriesError>(SeasonalNaive { train: t.clone() }),
            &s,
            cut,
            Some(12),
        )
        .unwrap();
        assert!(test.rmse < 1e-12);
        assert!(test.mape < 1e-12);
    }

    #[test]
    fn single_entry_wins_everything() {
        let e = ComparisonEntry {
            label: "only".into(),
            family: "ets:d0:D0".into(),
            train: metric(0.1, 1.0, 0.8, 1.0, 5.0),
            test: metric(0.2, 2.0, 1.5, 2.0, 8.0),
            aicc: 100.0,
            n_params: 3,
        };
        let r = compare_models(vec![e], false).unwrap();
        assert!(r.winner_by.values().all(|v| v == "only"));
        assert_eq!(r.aicc_winner_by_family["ets:d0:D0"], "only");
    }

    #[test]
    fn test_rmse_winner_matches_reference_values() {
        let a = ComparisonEntry {
            label: "ETS(A,Ad,A)".into(),
            family: "ets:d0:D0".into(),
            train: metric(-0.605, 4.608, 3.190, -6.768, 15.791),
            test: metric(3.358, 5.837, 5.489, 12.043, 22.768),
            aicc: 0.0,
            n_params: 17,
        };
        let b = ComparisonEntry {
            label: "ARIMA(0,0,0)(0,1,0)[12]".into(),
            family: "arima:d0:D1".into(),
            train: metric(0.111, 3.651, 2.996, -2.698, 14.028),
            test: metric(5.073, 7.732, 6.148, 14.915, 21.189),
            aicc: 0.0,
            n_params: 1,
        };
        let r = compare_models(vec![a, b], false).unwrap();
        assert_eq!(r.winner_by["test:rmse"], "ETS(A,Ad,A)");
        assert_eq!(r.winner_by["test:mape"], "ARIMA(0,0,0)(0,1,0)[12]");
        assert_eq!(r.winner_by["train:rmse"], "ARIMA(0,0,0)(0,1,0)[12]");
        // No cross-family AICc key unless forced.
        assert!(!r.winner_by.contains_key("aicc"));
    }

    #[test]
    fn aicc_tie_breaks_to_fewer_parameters() {
        let mk = |label: &str, n_params: usize| ComparisonEntry {
            label: label.into(),
            family: "arima:d1:D0".into(),
            train: metric(0.0, 1.0, 1.0, 1.0, 1.0),
            test: metric(0.0, 1.0, 1.0, 1.0, 1.0),
            aicc: 580.73,
            n_params,
        };
        let r = compare_models(vec![mk("big", 5), mk("small", 4)], true).unwrap();
        assert_eq!(r.aicc_winner_by_family["arima:d1:D0"], "small");
        assert_eq!(r.winner_by["aicc"], "small");

        // Equal parameter counts fall back to declaration order.
        let r2 = compare_models(vec![mk("first", 4), mk("second", 4)], true).unwrap();
        assert_eq!(r2.winner_by["aicc"], "first");
    }

    #[test]
    fn text_table_has_two_rows_per_model() {
        let e = ComparisonEntry {
            label: "ETS(A,Ad,A)".into(),
            family: "ets:d0:D0".into(),
            train: metric(-0.605, 4.608, 3.190, -6.768, 15.791),
            test: metric(3.358, 5.837, 5.489, 12.043, 22.768),
            aicc: 1.0,
            n_params: 17,
        };
        let r = compare_models(vec![e], false).unwrap();
        let table = r.to_text_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("ME") && lines[0].contains("MAPE"));
        assert!(lines[1].contains("Training set") && lines[1].contains("4.608"));
        assert!(lines[2].contains("Test set") && lines[2].contains("5.837"));
    }
}
