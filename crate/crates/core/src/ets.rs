//! Additive-error ETS state-space models: filtering, sum-of-squares
//! estimation, and h-step forecasting.
//!
//! Only the additive family is implemented (error A; trend N, A, or damped
//! Ad; seasonal N or A), which covers the candidate set this workbench
//! fits: ANN, AAN, AAdN, AAA, AAdA.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{aicc, Forecaster};
use crate::optim::{nelder_mead_with_restart, NelderMeadOptions};
use crate::series::TimeSeries;

#[derive(Debug, Error, PartialEq)]
pub enum EtsError {
    #[error("series contains missing values")]
    MissingData,
    #[error("need at least {needed} observations to fit {spec}, have {have}")]
    InsufficientData {
        spec: EtsSpec,
        needed: usize,
        have: usize,
    },
    #[error("seasonal component requires period >= 2")]
    InvalidPeriod,
    #[error("parameter out of bounds: {0}")]
    ParameterBounds(String),
    #[error("initial seasonal state must have length {expected}, got {got}")]
    SeasonalArity { expected: usize, got: usize },
    #[error("initial seasonal state must sum to zero (sum = {0:.3e})")]
    SeasonalNotCentered(f64),
    #[error("cannot parse '{0}' as an ETS spec code (expected e.g. ANN, AAdA)")]
    ParseSpec(String),
    #[error("horizon must be >= 1")]
    BadHorizon,
    #[error("optimizer failed to produce a finite fit (best SSE = {best_sse})")]
    Convergence { best_sse: f64 },
}

/// Trend component of the state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrendComponent {
    None,
    Additive,
    AdditiveDamped,
}

/// Seasonal component of the state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeasonalComponent {
    None,
    Additive,
}

/// An additive-error model specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtsSpec {
    pub trend: TrendComponent,
    pub seasonal: SeasonalComponent,
    pub period: usize,
}

impl EtsSpec {
    pub fn new(
        trend: TrendComponent,
        seasonal: SeasonalComponent,
        period: usize,
    ) -> Result<Self, EtsError> {
        if seasonal == SeasonalComponent::Additive && period < 2 {
            return Err(EtsError::InvalidPeriod);
        }
        Ok(Self {
            trend,
            seasonal,
            period,
        })
    }

    pub fn has_trend(&self) -> bool {
        self.trend != TrendComponent::None
    }

    pub fn is_damped(&self) -> bool {
        self.trend == TrendComponent::AdditiveDamped
    }

    pub fn has_seasonal(&self) -> bool {
        self.seasonal == SeasonalComponent::Additive
    }

    /// Seasonal length when the component is present, else 0.
    fn seasonal_len(&self) -> usize {
        if self.has_seasonal() {
            self.period
        } else {
            0
        }
    }

    /// Free parameters counted toward AICc: smoothing weights plus free
    /// initial-state values (m-1 seasonal states are free; the last is
    /// pinned by the zero-sum constraint).
    pub fn parameter_count(&self) -> usize {
        let mut k = 2; // alpha + level0
        if self.has_trend() {
            k += 2; // beta + trend0
        }
        if self.is_damped() {
            k += 1; // phi
        }
        if self.has_seasonal() {
            k += 1 + (self.period - 1); // gamma + free seasonal states
        }
        k
    }

    /// Compact code: error, trend, seasonal letters with a `d` for damping
    /// (ANN, AAN, AAdN, AAA, AAdA).
    pub fn code(&self) -> String {
        let t = match self.trend {
            TrendComponent::None => "N",
            TrendComponent::Additive => "A",
            TrendComponent::AdditiveDamped => "Ad",
        };
        let s = match self.seasonal {
            SeasonalComponent::None => "N",
            SeasonalComponent::Additive => "A",
        };
        format!("A{t}{s}")
    }

    /// Minimum series length accepted by [`ets_fit`].
    pub fn min_observations(&self) -> usize {
        if self.has_seasonal() {
            2 * self.period + 4
        } else {
            8
        }
    }
}

impl fmt::Display for EtsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = match self.trend {
            TrendComponent::None => "N",
            TrendComponent::Additive => "A",
            TrendComponent::AdditiveDamped => "Ad",
        };
        let s = match self.seasonal {
            SeasonalComponent::None => "N",
            SeasonalComponent::Additive => "A",
        };
        write!(f, "ETS(A,{t},{s})")
    }
}

/// Parses codes like `ANN`, `AAdN`, `AAA`, `AAdA` with period 12; use
/// [`EtsSpec::new`] for other periods.
impl FromStr for EtsSpec {
    type Err = EtsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || EtsError::ParseSpec(s.to_string());
        let rest = s.strip_prefix('A').ok_or_else(err)?;
        let (trend, rest) = if let Some(r) = rest.strip_prefix("Ad") {
            (TrendComponent::AdditiveDamped, r)
        } else if let Some(r) = rest.strip_prefix('A') {
            (TrendComponent::Additive, r)
        } else if let Some(r) = rest.strip_prefix('N') {
            (TrendComponent::None, r)
        } else {
            return Err(err());
        };
        let seasonal = match rest {
            "N" => SeasonalComponent::None,
            "A" => SeasonalComponent::Additive,
            _ => return Err(err()),
        };
        EtsSpec::new(trend, seasonal, 12)
    }
}

/// Smoothing weights. Components absent from the model are carried as 0
/// (beta, gamma) or 1 (phi) and ignored by the recursions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtsParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub phi: f64,
}

impl EtsParams {
    pub fn level_only(alpha: f64) -> Self {
        Self {
            alpha,
            beta: 0.0,
            gamma: 0.0,
            phi: 1.0,
        }
    }

    /// Admissibility for filtering: the closed region where the recursions
    /// are meaningful. The tighter fit-search box lives in `ets_fit`.
    fn validate(&self, spec: &EtsSpec) -> Result<(), EtsError> {
        let check = |name: &str, v: f64, lo: f64, hi: f64| {
            if !(lo..=hi).contains(&v) || !v.is_finite() {
                Err(EtsError::ParameterBounds(format!(
                    "{name} = {v} outside [{lo}, {hi}]"
                )))
            } else {
                Ok(())
            }
        };
        check("alpha", self.alpha, 0.0, 1.0)?;
        if spec.has_trend() {
            check("beta", self.beta, 0.0, self.alpha)?;
        }
        if spec.has_seasonal() {
            check("gamma", self.gamma, 0.0, 1.0 - self.alpha)?;
        }
        if spec.is_damped() {
            check("phi", self.phi, PHI_LO, PHI_HI)?;
        }
        Ok(())
    }
}

/// Level, trend, and seasonal state carried through the recursions.
/// `seasonal[j]` is the component applied to observation `j mod m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsState {
    pub level: f64,
    pub trend: f64,
    pub seasonal: Vec<f64>,
}

impl EtsState {
    pub fn level_only(level: f64) -> Self {
        Self {
            level,
            trend: 0.0,
            seasonal: Vec::new(),
        }
    }

    fn validate(&self, spec: &EtsSpec) -> Result<(), EtsError> {
        if spec.has_seasonal() {
            if self.seasonal.len() != spec.period {
                return Err(EtsError::SeasonalArity {
                    expected: spec.period,
                    got: self.seasonal.len(),
                });
            }
            let sum: f64 = self.seasonal.iter().sum();
            let scale: f64 = 1.0 + self.seasonal.iter().map(|s| s.abs()).sum::<f64>();
            if sum.abs() > 1e-8 * scale {
                return Err(EtsError::SeasonalNotCentered(sum));
            }
        }
        Ok(())
    }
}

/// One filtering pass: one-step predictions, innovations, and the state
/// after the last observation.
#[derive(Debug, Clone)]
pub struct FilterRun {
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub final_state: EtsState,
}

const PHI_LO: f64 = 0.8;
const PHI_HI: f64 = 0.98;

fn effective_phi(spec: &EtsSpec, params: &EtsParams) -> f64 {
    if spec.is_damped() {
        params.phi
    } else {
        1.0
    }
}

/// Runs the additive innovations recursions over a dense value slice.
///
/// One-step prediction: `y_hat = l + phi*b + s`; update: `l' = l + phi*b +
/// alpha*e`, `b' = phi*b + beta*e`, `s' = s + gamma*e`. Absent components
/// contribute zero and are not updated.
pub fn ets_filter(
    spec: &EtsSpec,
    params: &EtsParams,
    init: &EtsState,
    series: &TimeSeries,
) -> Result<FilterRun, EtsError> {
    let values = series.dense().map_err(|_| EtsError::MissingData)?;
    params.validate(spec)?;
    init.validate(spec)?;
    Ok(filter_dense(spec, params, init, &values))
}

fn filter_dense(spec: &EtsSpec, params: &EtsParams, init: &EtsState, values: &[f64]) -> FilterRun {
    let phi = effective_phi(spec, params);
    let m = spec.seasonal_len();
    let mut level = init.level;
    let mut trend = if spec.has_trend() { init.trend } else { 0.0 };
    let mut seasonal = init.seasonal.clone();

    let mut fitted = Vec::with_capacity(values.len());
    let mut residuals = Vec::with_capacity(values.len());
    for (t, &y) in values.iter().enumerate() {
        let s = if m > 0 { seasonal[t % m] } else { 0.0 };
        let base = level + phi * trend;
        let prediction = base + s;
        let e = y - prediction;
        fitted.push(prediction);
        residuals.push(e);

        level = base + params.alpha * e;
        if spec.has_trend() {
            trend = phi * trend + params.beta * e;
        }
        if m > 0 {
            seasonal[t % m] = s + params.gamma * e;
        }
    }
    FilterRun {
        fitted,
        residuals,
        final_state: EtsState {
            level,
            trend,
            seasonal,
        },
    }
}

/// A fitted ETS model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtsFit {
    pub spec: EtsSpec,
    pub params: EtsParams,
    pub initial_state: EtsState,
    pub final_state: EtsState,
    pub fitted: TimeSeries,
    pub residuals: TimeSeries,
    pub sse: f64,
    pub sigma2: f64,
    pub loglik: f64,
    pub aicc: f64,
    pub n: usize,
    pub k: usize,
}

// Fit-search box for the smoothing weights. Trend and seasonal weights are
// searched as fractions of their admissible ranges (beta <= alpha,
// gamma <= 1 - alpha) so the constraints hold at every visited point.
const ALPHA_LO: f64 = 1e-4;
const ALPHA_HI: f64 = 0.9999;
const FRACTION_LO: f64 = 1e-4;

/// Coarse smoothing-weight grid probed before the simplex refinement:
/// alpha and the beta/gamma fractions over five points, phi over three.
const GRID_WEIGHTS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const GRID_PHI: [f64; 3] = [0.8, 0.9, 0.98];

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn to_box(u: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * logistic(u)
}

fn from_box(x: f64, lo: f64, hi: f64) -> f64 {
    logit(((x - lo) / (hi - lo)).clamp(1e-12, 1.0 - 1e-12))
}

/// Heuristic initial state used both as the optimizer start and by the
/// grid probe: first-period mean level, slope of the first two period
/// means, and re-centered first-period deviations.
fn heuristic_state(spec: &EtsSpec, values: &[f64]) -> EtsState {
    let m = spec.period;
    if spec.has_seasonal() {
        let first: f64 = values[..m].iter().sum::<f64>() / m as f64;
        let second: f64 = values[m..2 * m].iter().sum::<f64>() / m as f64;
        let mut seasonal: Vec<f64> = values[..m].iter().map(|v| v - first).collect();
        let mean = seasonal.iter().sum::<f64>() / m as f64;
        for s in seasonal.iter_mut() {
            *s -= mean;
        }
        EtsState {
            level: first,
            trend: if spec.has_trend() {
                (second - first) / m as f64
            } else {
                0.0
            },
            seasonal,
        }
    } else {
        EtsState {
            level: values[0],
            trend: if spec.has_trend() {
                values[1] - values[0]
            } else {
                0.0
            },
            seasonal: Vec::new(),
        }
    }
}

/// Optimization vector layout (all on the standardized data scale):
/// transformed weights first, then level, trend, and m-1 free seasonal
/// states.
struct Layout {
    spec: EtsSpec,
}

impl Layout {
    fn dim(&self) -> usize {
        let mut d = 2;
        if self.spec.has_trend() {
            d += 2;
        }
        if self.spec.is_damped() {
            d += 1;
        }
        if self.spec.has_seasonal() {
            d += 1 + (self.spec.period - 1);
        }
        d
    }

    fn pack(&self, params: &EtsParams, state: &EtsState) -> Vec<f64> {
        let mut x = vec![from_box(params.alpha, ALPHA_LO, ALPHA_HI)];
        if self.spec.has_trend() {
            let frac = (params.beta / params.alpha).clamp(FRACTION_LO, 1.0);
            x.push(from_box(frac, FRACTION_LO, 1.0));
        }
        if self.spec.has_seasonal() {
            let frac = (params.gamma / (1.0 - params.alpha)).clamp(FRACTION_LO, 1.0);
            x.push(from_box(frac, FRACTION_LO, 1.0));
        }
        if self.spec.is_damped() {
            x.push(from_box(params.phi, PHI_LO, PHI_HI));
        }
        x.push(state.level);
        if self.spec.has_trend() {
            x.push(state.trend);
        }
        if self.spec.has_seasonal() {
            x.extend_from_slice(&state.seasonal[..self.spec.period - 1]);
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> (EtsParams, EtsState) {
        let mut i = 0;
        let alpha = to_box(x[i], ALPHA_LO, ALPHA_HI);
        i += 1;
        let beta = if self.spec.has_trend() {
            let frac = to_box(x[i], FRACTION_LO, 1.0);
            i += 1;
            frac * alpha
        } else {
            0.0
        };
        let gamma = if self.spec.has_seasonal() {
            let frac = to_box(x[i], FRACTION_LO, 1.0);
            i += 1;
            frac * (1.0 - alpha)
        } else {
            0.0
        };
        let phi = if self.spec.is_damped() {
            let v = to_box(x[i], PHI_LO, PHI_HI);
            i += 1;
            v
        } else {
            1.0
        };
        let level = x[i];
        i += 1;
        let trend = if self.spec.has_trend() {
            let v = x[i];
            i += 1;
            v
        } else {
            0.0
        };
        let seasonal = if self.spec.has_seasonal() {
            let free = &x[i..i + self.spec.period - 1];
            let mut s = free.to_vec();
            s.push(-free.iter().sum::<f64>());
            s
        } else {
            Vec::new()
        };
        (
            EtsParams {
                alpha,
                beta,
                gamma,
                phi,
            },
            EtsState {
                level,
                trend,
                seasonal,
            },
        )
    }
}

fn sse_of(spec: &EtsSpec, params: &EtsParams, state: &EtsState, values: &[f64]) -> f64 {
    filter_dense(spec, params, state, values)
        .residuals
        .iter()
        .map(|e| e * e)
        .sum()
}

/// Fits by minimizing the innovation sum of squares jointly over smoothing
/// weights and initial state. The data is standardized internally, which
/// makes the fit equivariant under affine transforms of the input.
pub fn ets_fit(spec: &EtsSpec, series: &TimeSeries) -> Result<EtsFit, EtsError> {
    let values = series.dense().map_err(|_| EtsError::MissingData)?;
    let n = values.len();
    let needed = spec.min_observations();
    if n < needed {
        return Err(EtsError::InsufficientData {
            spec: *spec,
            needed,
            have: n,
        });
    }

    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    let z: Vec<f64> = values.iter().map(|v| (v - mean) / scale).collect();

    let layout = Layout { spec: *spec };
    let state0 = heuristic_state(spec, &z);

    // Grid probe over the smoothing weights with the heuristic state; the
    // best cell seeds the simplex, so the fit can never end up above the
    // coarse-grid minimum.
    let mut best_params = EtsParams {
        alpha: 0.3,
        beta: if spec.has_trend() { 0.03 } else { 0.0 },
        gamma: if spec.has_seasonal() { 0.07 } else { 0.0 },
        phi: if spec.is_damped() { 0.9 } else { 1.0 },
    };
    let mut best_sse = f64::INFINITY;
    let beta_fracs: &[f64] = if spec.has_trend() { &GRID_WEIGHTS } else { &[1.0] };
    let gamma_fracs: &[f64] = if spec.has_seasonal() { &GRID_WEIGHTS } else { &[1.0] };
    let phis: &[f64] = if spec.is_damped() { &GRID_PHI } else { &[1.0] };
    for &alpha in &GRID_WEIGHTS {
        for &bf in beta_fracs {
            for &gf in gamma_fracs {
                for &phi in phis {
                    let candidate = EtsParams {
                        alpha,
                        beta: if spec.has_trend() { bf * alpha } else { 0.0 },
                        gamma: if spec.has_seasonal() {
                            gf * (1.0 - alpha)
                        } else {
                            0.0
                        },
                        phi,
                    };
                    let sse = sse_of(spec, &candidate, &state0, &z);
                    if sse < best_sse {
                        best_sse = sse;
                        best_params = candidate;
                    }
                }
            }
        }
    }

    let x0 = layout.pack(&best_params, &state0);
    let mut steps = vec![0.25; layout.dim()];
    let state_offset = layout.dim() - (1 + usize::from(spec.has_trend()))
        - if spec.has_seasonal() { spec.period - 1 } else { 0 };
    for s in steps.iter_mut().skip(state_offset) {
        *s = 0.1; // state dimensions live on the standardized data scale
    }
    let opts = NelderMeadOptions {
        initial_steps: steps,
        max_evaluations: 2000,
        tolerance: 1e-8,
    };
    let objective = |x: &[f64]| {
        let (p, s) = layout.unpack(x);
        sse_of(spec, &p, &s, &z)
    };
    let result = nelder_mead_with_restart(objective, &x0, &opts);
    let (params, state_z) = if result.fx <= best_sse {
        layout.unpack(&result.x)
    } else {
        (best_params, state0)
    };

    // Back to the original scale.
    let initial_state = EtsState {
        level: state_z.level * scale + mean,
        trend: state_z.trend * scale,
        seasonal: state_z.seasonal.iter().map(|s| s * scale).collect(),
    };
    let run = filter_dense(spec, &params, &initial_state, &values);
    let sse: f64 = run.residuals.iter().map(|e| e * e).sum();
    if !sse.is_finite() {
        return Err(EtsError::Convergence { best_sse: sse });
    }
    let sigma2 = sse / n as f64;
    let mean_sq = sigma2.max(f64::MIN_POSITIVE);
    let loglik = -(n as f64) / 2.0 * ((2.0 * std::f64::consts::PI * mean_sq).ln() + 1.0);
    let k = spec.parameter_count();
    let aicc = aicc(loglik, k, n).map_err(|e| EtsError::ParameterBounds(e.to_string()))?;

    Ok(EtsFit {
        spec: *spec,
        params,
        initial_state,
        final_state: run.final_state.clone(),
        fitted: TimeSeries::from_values(series.start(), series.period(), run.fitted)
            .expect("period preserved"),
        residuals: TimeSeries::from_values(series.start(), series.period(), run.residuals)
            .expect("period preserved"),
        sse,
        sigma2,
        loglik,
        aicc,
        n,
        k,
    })
}

/// Iterates the state recursions with zero innovations from the final
/// state: level advances by the damped trend, seasonal repeats.
pub fn ets_forecast(fit: &EtsFit, horizon: usize) -> Result<TimeSeries, EtsError> {
    if horizon == 0 {
        return Err(EtsError::BadHorizon);
    }
    let spec = &fit.spec;
    let phi = effective_phi(spec, &fit.params);
    let m = spec.seasonal_len();
    let mut level = fit.final_state.level;
    let mut trend = fit.final_state.trend;
    let n = fit.n;

    let mut points = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let s = if m > 0 {
            fit.final_state.seasonal[(n + h) % m]
        } else {
            0.0
        };
        let base = level + phi * trend;
        points.push(base + s);
        level = base;
        trend *= phi;
    }
    TimeSeries::from_values(fit.fitted.end(), fit.fitted.period(), points)
        .map_err(|_| EtsError::BadHorizon)
}

/// Innovation weight of a one-step-old shock on the j-step-ahead forecast.
fn innovation_weight(spec: &EtsSpec, params: &EtsParams, j: usize) -> f64 {
    let phi = effective_phi(spec, params);
    let mut c = params.alpha;
    if spec.has_trend() {
        let mut phi_sum = 0.0;
        let mut p = phi;
        for _ in 0..j {
            phi_sum += p;
            p *= phi;
        }
        c += params.beta * phi_sum;
    }
    if spec.has_seasonal() && j % spec.period == 0 {
        c += params.gamma;
    }
    c
}

/// Point forecasts with symmetric Gaussian bands `point ± z·σ̂·sqrt(v_h)`,
/// where `v_h` accumulates the squared innovation weights.
#[derive(Debug, Clone, Serialize)]
pub struct ForecastBands {
    pub point: TimeSeries,
    pub lower: TimeSeries,
    pub upper: TimeSeries,
}

pub fn ets_forecast_with_bands(
    fit: &EtsFit,
    horizon: usize,
    z: f64,
) -> Result<ForecastBands, EtsError> {
    let point = ets_forecast(fit, horizon)?;
    let sigma = fit.sigma2.sqrt();
    let mut variance_factor = 1.0;
    let mut lower = Vec::with_capacity(horizon);
    let mut upper = Vec::with_capacity(horizon);
    for h in 1..=horizon {
        if h > 1 {
            let c = innovation_weight(&fit.spec, &fit.params, h - 1);
            variance_factor += c * c;
        }
        let half = z * sigma * variance_factor.sqrt();
        let p = point.get(h - 1).unwrap();
        lower.push(p - half);
        upper.push(p + half);
    }
    Ok(ForecastBands {
        lower: TimeSeries::from_values(point.start(), point.period(), lower).unwrap(),
        upper: TimeSeries::from_values(point.start(), point.period(), upper).unwrap(),
        point,
    })
}

impl Forecaster for EtsFit {
    fn fitted_values(&self) -> TimeSeries {
        self.fitted.clone()
    }

    fn forecast(&self, horizon: usize) -> TimeSeries {
        ets_forecast(self, horizon).expect("horizon >= 1")
    }
}
