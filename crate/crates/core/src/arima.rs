//! Seasonal ARIMA(p,d,q)(P,D,Q)_m modeling: simulation, conditional
//! sum-of-squares estimation, and h-step forecasting.
//!
//! Estimation minimizes the conditional sum of squares (pre-sample
//! innovations zero, the first p + P*m differenced observations conditioned
//! on), starting from a Hannan-Rissanen two-stage fit. AR and MA vectors
//! are optimized through the partial-autocorrelation transform, so every
//! visited point is stationary and invertible with the polynomial roots
//! kept a fixed margin outside the unit circle.

use std::fmt;

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlogram::durbin_levinson;
use crate::metrics::{aicc, Forecaster};
use crate::optim::{nelder_mead_with_restart, NelderMeadOptions};
use crate::series::{
    apply_difference_spec, integrate, DifferenceSpec, SeriesError, TimeSeries,
};

/// Root-modulus margin kept by the optimizer's parameterization.
pub const ROOT_MARGIN: f64 = 2e-3;

#[derive(Debug, Error)]
pub enum ArimaError {
    #[error("series contains missing values")]
    MissingData,
    #[error("need at least {needed} observations after differencing, have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("coefficients are not stationary/invertible: {0}")]
    InvalidCoefficients(String),
    #[error("horizon must be >= 1")]
    BadHorizon,
    #[error("differencing failed: {0}")]
    Differencing(#[from] SeriesError),
    #[error("AICc undefined: {0}")]
    Criterion(String),
}

/// Model orders: nonseasonal (p,d,q), seasonal (P,D,Q) at lag `period`,
/// and whether a constant term is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
    pub period: usize,
    pub include_constant: bool,
}

impl ArimaSpec {
    /// Nonseasonal spec; the constant defaults on exactly when no
    /// differencing is applied.
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            seasonal_p: 0,
            seasonal_d: 0,
            seasonal_q: 0,
            period: 1,
            include_constant: d == 0,
        }
    }

    pub fn with_seasonal(mut self, sp: usize, sd: usize, sq: usize, period: usize) -> Self {
        self.seasonal_p = sp;
        self.seasonal_d = sd;
        self.seasonal_q = sq;
        self.period = period.max(1);
        self.include_constant = self.d + sd == 0;
        self
    }

    pub fn with_constant(mut self, include: bool) -> Self {
        self.include_constant = include;
        self
    }

    pub fn difference_spec(&self) -> DifferenceSpec {
        DifferenceSpec {
            d: self.d,
            seasonal_d: self.seasonal_d,
            period: self.period,
        }
    }

    fn has_seasonal_terms(&self) -> bool {
        self.seasonal_p + self.seasonal_d + self.seasonal_q > 0
    }

    /// Leading differenced observations conditioned on (not scored).
    fn conditioning_len(&self) -> usize {
        self.p + self.seasonal_p * self.period
    }

    fn coefficient_count(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q
    }

    /// AICc parameter count: coefficients, the constant when present, and
    /// the innovation variance.
    pub fn parameter_count(&self) -> usize {
        self.coefficient_count() + usize::from(self.include_constant) + 1
    }
}

impl fmt::Display for ArimaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ARIMA({},{},{})", self.p, self.d, self.q)?;
        if self.has_seasonal_terms() {
            write!(
                f,
                "({},{},{})[{}]",
                self.seasonal_p, self.seasonal_d, self.seasonal_q, self.period
            )?;
        }
        Ok(())
    }
}

/// Coefficient values on the conventional signs: AR side
/// `w_t = c + Σ φ_i w_{t-i} + ...`, MA side `... + e_t + Σ θ_j e_{t-j}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArimaCoefficients {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub seasonal_ar: Vec<f64>,
    pub seasonal_ma: Vec<f64>,
    pub constant: f64,
}

/// A fitted model. Carries the training series so forecasts can be produced
/// from the serialized form alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArimaFit {
    pub spec: ArimaSpec,
    pub coefficients: ArimaCoefficients,
    pub sigma2: f64,
    pub css: f64,
    pub loglik: f64,
    pub aicc: f64,
    pub n_effective: usize,
    pub k: usize,
    pub fitted: TimeSeries,
    pub residuals: TimeSeries,
    pub series: TimeSeries,
}

// ---------------------------------------------------------------------------
// Polynomial helpers. AR-side polynomials are stored as coefficient vectors
// of 1 - φ1 B - ... (index 0 is 1); MA-side as 1 + θ1 B + ....
// ---------------------------------------------------------------------------

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn ar_polynomial(coeffs: &[f64], lag: usize) -> Vec<f64> {
    let mut poly = vec![0.0; coeffs.len() * lag + 1];
    poly[0] = 1.0;
    for (i, &c) in coeffs.iter().enumerate() {
        poly[(i + 1) * lag] = -c;
    }
    poly
}

fn ma_polynomial(coeffs: &[f64], lag: usize) -> Vec<f64> {
    let mut poly = vec![0.0; coeffs.len() * lag + 1];
    poly[0] = 1.0;
    for (i, &c) in coeffs.iter().enumerate() {
        poly[(i + 1) * lag] = c;
    }
    poly
}

/// Expanded product of the nonseasonal and seasonal AR polynomials.
fn full_ar_poly(spec: &ArimaSpec, coef: &ArimaCoefficients) -> Vec<f64> {
    poly_mul(
        &ar_polynomial(&coef.ar, 1),
        &ar_polynomial(&coef.seasonal_ar, spec.period),
    )
}

fn full_ma_poly(spec: &ArimaSpec, coef: &ArimaCoefficients) -> Vec<f64> {
    poly_mul(
        &ma_polynomial(&coef.ma, 1),
        &ma_polynomial(&coef.seasonal_ma, spec.period),
    )
}

/// All roots of `poly` (ascending powers) via Durand-Kerner iteration.
pub fn polynomial_roots(poly: &[f64]) -> Vec<Complex64> {
    let degree = match poly.iter().rposition(|c| c.abs() > 1e-300) {
        Some(d) if d > 0 => d,
        _ => return Vec::new(),
    };
    let lead = poly[degree];
    let monic: Vec<Complex64> = poly[..=degree]
        .iter()
        .map(|c| Complex64::new(c / lead, 0.0))
        .collect();

    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..degree).map(|i| seed.powu(i as u32 + 1)).collect();
    for _ in 0..200 {
        let mut max_step = 0.0f64;
        for i in 0..degree {
            let mut value = Complex64::new(0.0, 0.0);
            for c in monic.iter().rev() {
                value = value * roots[i] + c;
            }
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..degree {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                denom = Complex64::new(1e-300, 0.0);
            }
            let step = value / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-12 {
            break;
        }
    }
    roots
}

/// Smallest root modulus, or +inf for degree-zero polynomials.
pub fn min_root_modulus(poly: &[f64]) -> f64 {
    polynomial_roots(poly)
        .iter()
        .map(|r| r.norm())
        .fold(f64::INFINITY, f64::min)
}

fn check_valid(spec: &ArimaSpec, coef: &ArimaCoefficients) -> Result<(), ArimaError> {
    for (name, poly) in [
        ("AR", ar_polynomial(&coef.ar, 1)),
        ("seasonal AR", ar_polynomial(&coef.seasonal_ar, spec.period)),
        ("MA", ma_polynomial(&coef.ma, 1)),
        ("seasonal MA", ma_polynomial(&coef.seasonal_ma, spec.period)),
    ] {
        let min = min_root_modulus(&poly);
        if min <= 1.0 + 1e-9 {
            return Err(ArimaError::InvalidCoefficients(format!(
                "{name} polynomial has a root of modulus {min:.6}"
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Partial-autocorrelation transform between unconstrained space and
// stationary coefficient vectors.
// ---------------------------------------------------------------------------

/// Levinson step: partial autocorrelations in (-1,1) to AR coefficients.
fn pacf_to_ar(pacf: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(pacf.len());
    for (k, &r) in pacf.iter().enumerate() {
        let prev = phi.clone();
        phi.push(0.0);
        for j in 0..k {
            phi[j] = prev[j] - r * prev[k - 1 - j];
        }
        phi[k] = r;
    }
    phi
}

/// Reverse Levinson. Out-of-range pivots are clamped; this is only used to
/// seed the optimizer.
fn ar_to_pacf_clamped(phi: &[f64]) -> Vec<f64> {
    let mut work = phi.to_vec();
    let mut pacf = vec![0.0; phi.len()];
    for k in (0..phi.len()).rev() {
        let r = work[k].clamp(-0.95, 0.95);
        pacf[k] = r;
        if k > 0 {
            let prev = work.clone();
            let denom = 1.0 - r * r;
            for j in 0..k {
                work[j] = (prev[j] + r * prev[k - 1 - j]) / denom;
            }
        }
    }
    pacf
}

/// Shrinks a stationary coefficient vector so the polynomial roots gain a
/// modulus factor of (1 + ROOT_MARGIN).
fn shrink(coeffs: &mut [f64]) {
    let c = 1.0 / (1.0 + ROOT_MARGIN);
    let mut factor = c;
    for v in coeffs.iter_mut() {
        *v *= factor;
        factor *= c;
    }
}

fn unshrink(coeffs: &mut [f64]) {
    let c = 1.0 + ROOT_MARGIN;
    let mut factor = c;
    for v in coeffs.iter_mut() {
        *v *= factor;
        factor *= c;
    }
}

fn unconstrained_to_coeffs(u: &[f64]) -> Vec<f64> {
    let pacf: Vec<f64> = u.iter().map(|v| v.tanh()).collect();
    let mut coeffs = pacf_to_ar(&pacf);
    shrink(&mut coeffs);
    coeffs
}

fn coeffs_to_unconstrained(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    unshrink(&mut c);
    ar_to_pacf_clamped(&c)
        .iter()
        .map(|r| r.clamp(-0.98, 0.98).atanh())
        .collect()
}

// ---------------------------------------------------------------------------
// Conditional sum of squares.
// ---------------------------------------------------------------------------

/// Innovations of `w` under the expanded polynomials, conditioning on the
/// first `t0` observations with pre-sample innovations at zero.
fn css_residuals(w: &[f64], ar_poly: &[f64], ma_poly: &[f64], constant: f64, t0: usize) -> Vec<f64> {
    let n = w.len();
    let mut e = vec![0.0; n];
    for t in t0..n {
        // e_t = Σ_i ar_poly[i] w_{t-i} - c - Σ_{j>=1} ma_poly[j] e_{t-j}
        let mut acc = -constant;
        for (i, &a) in ar_poly.iter().enumerate() {
            if i > t {
                break;
            }
            acc += a * w[t - i];
        }
        for (j, &m) in ma_poly.iter().enumerate().skip(1) {
            if t >= j {
                acc -= m * e[t - j];
            }
        }
        e[t] = acc;
    }
    e[t0..].to_vec()
}

fn css_value(w: &[f64], ar_poly: &[f64], ma_poly: &[f64], constant: f64, t0: usize) -> f64 {
    css_residuals(w, ar_poly, ma_poly, constant, t0)
        .iter()
        .map(|e| e * e)
        .sum()
}

// ---------------------------------------------------------------------------
// Hannan-Rissanen initialization.
// ---------------------------------------------------------------------------

/// Solves a small dense linear system in place; `None` on singularity.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Ordinary least squares via normal equations.
fn least_squares(rows: &[Vec<f64>], targets: &[f64]) -> Option<Vec<f64>> {
    let cols = rows.first()?.len();
    if rows.len() < cols + 2 {
        return None;
    }
    let mut xtx = vec![vec![0.0; cols]; cols];
    let mut xty = vec![0.0; cols];
    for (row, &y) in rows.iter().zip(targets) {
        for i in 0..cols {
            xty[i] += row[i] * y;
            for j in 0..cols {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    solve_dense(xtx, xty)
}

/// Long-AR residual proxies via Yule-Walker, then least squares of w on its
/// own lags and the proxy innovations.
fn hannan_rissanen(spec: &ArimaSpec, w: &[f64]) -> ArimaCoefficients {
    let n = w.len();
    let fallback = ArimaCoefficients {
        ar: vec![0.0; spec.p],
        ma: vec![0.0; spec.q],
        seasonal_ar: vec![0.0; spec.seasonal_p],
        seasonal_ma: vec![0.0; spec.seasonal_q],
        constant: if spec.include_constant {
            w.iter().sum::<f64>() / n as f64
        } else {
            0.0
        },
    };
    if n < 12 {
        return fallback;
    }

    // Stage 1: AR(L) by Durbin-Levinson on the sample autocorrelations.
    let long_order = (2 * (spec.p + spec.q + spec.seasonal_p + spec.seasonal_q))
        .max(6)
        .min(n / 2 - 1);
    let mean = w.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = w.iter().map(|v| v - mean).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    if denom <= 0.0 {
        return fallback;
    }
    let rho: Vec<f64> = (1..=long_order)
        .map(|k| {
            centered[k..]
                .iter()
                .zip(centered.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom
        })
        .collect();
    let pacf = match durbin_levinson(&rho) {
        Ok(p) => p,
        Err(_) => return fallback,
    };
    let long_ar = pacf_to_ar(&pacf);
    let mut proxies = vec![0.0; n];
    for t in long_order..n {
        let mut pred = 0.0;
        for (i, &a) in long_ar.iter().enumerate() {
            pred += a * centered[t - 1 - i];
        }
        proxies[t] = centered[t] - pred;
    }

    // Stage 2: regress w_t on its lags and the proxy innovations.
    let m = spec.period;
    let t_start = long_order
        .max(spec.p)
        .max(spec.q)
        .max(spec.seasonal_p * m)
        .max(spec.seasonal_q * m);
    if t_start >= n {
        return fallback;
    }
    let mut rows = Vec::with_capacity(n - t_start);
    let mut targets = Vec::with_capacity(n - t_start);
    for t in t_start..n {
        let mut row = Vec::new();
        if spec.include_constant {
            row.push(1.0);
        }
        for i in 1..=spec.p {
            row.push(w[t - i]);
        }
        for i in 1..=spec.seasonal_p {
            row.push(w[t - i * m]);
        }
        for j in 1..=spec.q {
            row.push(proxies[t - j]);
        }
        for j in 1..=spec.seasonal_q {
            row.push(proxies[t - j * m]);
        }
        rows.push(row);
        targets.push(w[t]);
    }
    if rows.first().is_none_or(|r| r.is_empty()) {
        return fallback;
    }
    let Some(beta) = least_squares(&rows, &targets) else {
        return fallback;
    };

    let mut idx = 0;
    let constant = if spec.include_constant {
        idx += 1;
        beta[0]
    } else {
        0.0
    };
    let take = |idx: &mut usize, len: usize| -> Vec<f64> {
        let out = beta[*idx..*idx + len].to_vec();
        *idx += len;
        out
    };
    ArimaCoefficients {
        ar: take(&mut idx, spec.p),
        seasonal_ar: take(&mut idx, spec.seasonal_p),
        ma: take(&mut idx, spec.q),
        seasonal_ma: take(&mut idx, spec.seasonal_q),
        constant,
    }
}

// ---------------------------------------------------------------------------
// Optimizer packing: [ar pacs | ma pacs | seasonal ar | seasonal ma | c].
// ---------------------------------------------------------------------------

struct CoeffLayout {
    spec: ArimaSpec,
    scale: f64,
}

impl CoeffLayout {
    fn dim(&self) -> usize {
        self.spec.coefficient_count() + usize::from(self.spec.include_constant)
    }

    fn pack(&self, coef: &ArimaCoefficients) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        x.extend(coeffs_to_unconstrained(&coef.ar));
        let negated: Vec<f64> = coef.ma.iter().map(|v| -v).collect();
        x.extend(coeffs_to_unconstrained(&negated));
        x.extend(coeffs_to_unconstrained(&coef.seasonal_ar));
        let negated: Vec<f64> = coef.seasonal_ma.iter().map(|v| -v).collect();
        x.extend(coeffs_to_unconstrained(&negated));
        if self.spec.include_constant {
            x.push(coef.constant / self.scale);
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> ArimaCoefficients {
        let spec = &self.spec;
        let mut i = 0;
        let mut grab = |len: usize| {
            let slice = &x[i..i + len];
            i += len;
            unconstrained_to_coeffs(slice)
        };
        let ar = grab(spec.p);
        let ma: Vec<f64> = grab(spec.q).iter().map(|v| -v).collect();
        let seasonal_ar = grab(spec.seasonal_p);
        let seasonal_ma: Vec<f64> = grab(spec.seasonal_q).iter().map(|v| -v).collect();
        let constant = if spec.include_constant {
            x[i] * self.scale
        } else {
            0.0
        };
        ArimaCoefficients {
            ar,
            ma,
            seasonal_ar,
            seasonal_ma,
            constant,
        }
    }
}

/// Fits by conditional sum of squares. See the module docs for the
/// estimation pipeline.
pub fn arima_fit(spec: &ArimaSpec, series: &TimeSeries) -> Result<ArimaFit, ArimaError> {
    if series.has_missing() {
        return Err(ArimaError::MissingData);
    }
    let diff_spec = spec.difference_spec();
    let w_series = apply_difference_spec(series, diff_spec)?;
    let w = w_series.dense().expect("differencing preserves density");
    let needed = 3 * (spec.coefficient_count() + 1);
    let t0 = spec.conditioning_len();
    if w.len() < needed.max(t0 + 2) {
        return Err(ArimaError::InsufficientData {
            needed: needed.max(t0 + 2),
            have: w.len(),
        });
    }

    let sd = {
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w.len() as f64;
        var.sqrt().max(1e-6)
    };
    let layout = CoeffLayout { spec: *spec, scale: sd };

    let start = hannan_rissanen(spec, &w);
    let x0 = layout.pack(&start);
    // The packed start is the projection of the Hannan-Rissanen point into
    // the stationary region; its CSS is the monotonicity reference.
    let objective = |x: &[f64]| {
        let coef = layout.unpack(x);
        css_value(
            &w,
            &full_ar_poly(spec, &coef),
            &full_ma_poly(spec, &coef),
            coef.constant,
            t0,
        )
    };

    let coefficients = if layout.dim() == 0 {
        ArimaCoefficients::default()
    } else {
        let mut steps = vec![0.2; layout.dim()];
        if spec.include_constant {
            *steps.last_mut().unwrap() = 0.3;
        }
        let opts = NelderMeadOptions {
            initial_steps: steps,
            max_evaluations: 2000,
            tolerance: 1e-8,
        };
        let result = nelder_mead_with_restart(objective, &x0, &opts);
        layout.unpack(&result.x)
    };

    // Unreachable through the pacf parameterization, but guard anyway.
    check_valid(spec, &coefficients)?;

    let ar_poly = full_ar_poly(spec, &coefficients);
    let ma_poly = full_ma_poly(spec, &coefficients);
    let residuals = css_residuals(&w, &ar_poly, &ma_poly, coefficients.constant, t0);
    let n_effective = residuals.len();
    let css: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2 = (css / n_effective as f64).max(f64::MIN_POSITIVE);
    let loglik =
        -(n_effective as f64) / 2.0 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let k = spec.parameter_count();
    let aicc_value =
        aicc(loglik, k, n_effective).map_err(|e| ArimaError::Criterion(e.to_string()))?;

    // Align residuals to the original calendar: w index t0 corresponds to
    // original index d + D*m + t0. One-step fitted values on the original
    // scale are observation minus innovation.
    let offset = diff_spec.values_consumed() + t0;
    let start_month = series.start().plus_months(offset as i64);
    let fitted_values: Vec<f64> = residuals
        .iter()
        .enumerate()
        .map(|(i, e)| series.get(offset + i).expect("in range") - e)
        .collect();

    Ok(ArimaFit {
        spec: *spec,
        coefficients,
        sigma2,
        css,
        loglik,
        aicc: aicc_value,
        n_effective,
        k,
        fitted: TimeSeries::from_values(start_month, series.period(), fitted_values)
            .expect("period preserved"),
        residuals: TimeSeries::from_values(start_month, series.period(), residuals)
            .expect("period preserved"),
        series: series.clone(),
    })
}

/// Simulates a realization: ARMA recursion with Gaussian innovations on the
/// differenced scale (burn-in discarded), then integration per (d, D, m).
pub fn simulate_arima(
    spec: &ArimaSpec,
    coefficients: &ArimaCoefficients,
    n: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<TimeSeries, ArimaError> {
    check_valid(spec, coefficients)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = spec.period;
    let burn_in = 10 * (spec.p + spec.q + (spec.seasonal_p + spec.seasonal_q) * m + 1);
    let total = burn_in + n;

    let ar_poly = full_ar_poly(spec, coefficients);
    let ma_poly = full_ma_poly(spec, coefficients);
    let mut w = vec![0.0; total];
    let mut e = vec![0.0; total];
    for t in 0..total {
        let shock: f64 = rng.sample::<f64, _>(StandardNormal) * noise_sd;
        e[t] = shock;
        let mut value = coefficients.constant + shock;
        for (i, &a) in ar_poly.iter().enumerate().skip(1) {
            if t >= i {
                value -= a * w[t - i];
            }
        }
        for (j, &b) in ma_poly.iter().enumerate().skip(1) {
            if t >= j {
                value += b * e[t - j];
            }
        }
        w[t] = value;
    }
    let mut values = w[burn_in..].to_vec();

    // Integrate: ordinary running sums first, then seasonal.
    for _ in 0..spec.d {
        let mut acc = 0.0;
        for v in values.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    for _ in 0..spec.seasonal_d {
        for t in m..values.len() {
            values[t] += values[t - m];
        }
    }

    TimeSeries::from_values(
        crate::series::MonthStamp::new(2000, 1).expect("valid month"),
        if m > 1 { m } else { 12 },
        values,
    )
    .map_err(ArimaError::Differencing)
}

/// Iterates the model on the differenced scale with future innovations at
/// zero, then integrates back using the observed tail as pivots.
pub fn arima_forecast(fit: &ArimaFit, horizon: usize) -> Result<TimeSeries, ArimaError> {
    if horizon == 0 {
        return Err(ArimaError::BadHorizon);
    }
    let spec = &fit.spec;
    let diff_spec = spec.difference_spec();
    let w_series = apply_difference_spec(&fit.series, diff_spec)?;
    let w = w_series.dense().expect("dense");
    let n_w = w.len();
    let t0 = spec.conditioning_len();

    let ar_poly = full_ar_poly(spec, &fit.coefficients);
    let ma_poly = full_ma_poly(spec, &fit.coefficients);
    let residual_at = |idx: usize| -> f64 {
        if idx >= t0 {
            fit.residuals.get(idx - t0).unwrap_or(0.0)
        } else {
            0.0
        }
    };

    let mut extended = w.clone();
    for j in 0..horizon {
        let t = n_w + j;
        let mut value = fit.coefficients.constant;
        for (i, &a) in ar_poly.iter().enumerate().skip(1) {
            if t >= i {
                value -= a * extended[t - i];
            }
        }
        for (jj, &b) in ma_poly.iter().enumerate().skip(1) {
            if t >= jj && t - jj < n_w {
                value += b * residual_at(t - jj);
            }
        }
        extended.push(value);
    }
    let w_forecast = extended[n_w..].to_vec();

    // The last d + D*m observations pivot the integration back to levels.
    let consumed = diff_spec.values_consumed();
    if consumed == 0 {
        return TimeSeries::from_values(fit.series.end(), fit.series.period(), w_forecast)
            .map_err(ArimaError::Differencing);
    }
    let n = fit.series.len();
    let pivots: Vec<f64> = (n - consumed..n)
        .map(|i| fit.series.get(i).expect("dense"))
        .collect();
    let diffed_block = TimeSeries::from_values(
        fit.series.end(),
        fit.series.period(),
        w_forecast,
    )
    .map_err(ArimaError::Differencing)?;
    let rebuilt = integrate(&diffed_block, diff_spec, &pivots)?;
    let values: Vec<f64> = (consumed..consumed + horizon)
        .map(|i| rebuilt.get(i).expect("in range"))
        .collect();
    TimeSeries::from_values(fit.series.end(), fit.series.period(), values)
        .map_err(ArimaError::Differencing)
}

/// Psi weights of the full (differenced) transfer function, used for
/// forecast variance accumulation.
fn psi_weights(fit: &ArimaFit, count: usize) -> Vec<f64> {
    let spec = &fit.spec;
    // (1-B)^d expanded by repeated convolution, then the seasonal factor.
    let mut diff_poly = vec![1.0];
    for _ in 0..spec.d {
        diff_poly = poly_mul(&diff_poly, &[1.0, -1.0]);
    }
    let mut seasonal_unit = vec![0.0; spec.period + 1];
    seasonal_unit[0] = 1.0;
    seasonal_unit[spec.period] = -1.0;
    for _ in 0..spec.seasonal_d {
        diff_poly = poly_mul(&diff_poly, &seasonal_unit);
    }
    let phi_star = poly_mul(&full_ar_poly(spec, &fit.coefficients), &diff_poly);
    let ma_poly = full_ma_poly(spec, &fit.coefficients);

    let mut psi = vec![0.0; count + 1];
    psi[0] = 1.0;
    for j in 1..=count {
        let mut value = if j < ma_poly.len() { ma_poly[j] } else { 0.0 };
        for i in 1..=j.min(phi_star.len() - 1) {
            value -= phi_star[i] * psi[j - i];
        }
        psi[j] = value;
    }
    psi
}

/// Point forecasts with Gaussian bands from the accumulated psi weights.
pub fn arima_forecast_with_bands(
    fit: &ArimaFit,
    horizon: usize,
    z: f64,
) -> Result<crate::ets::ForecastBands, ArimaError> {
    let point = arima_forecast(fit, horizon)?;
    let psi = psi_weights(fit, horizon.saturating_sub(1));
    let sigma = fit.sigma2.sqrt();
    let mut acc = 0.0;
    let mut lower = Vec::with_capacity(horizon);
    let mut upper = Vec::with_capacity(horizon);
    for h in 0..horizon {
        acc += psi[h] * psi[h];
        let half = z * sigma * acc.sqrt();
        let p = point.get(h).unwrap();
        lower.push(p - half);
        upper.push(p + half);
    }
    Ok(crate::ets::ForecastBands {
        lower: TimeSeries::from_values(point.start(), point.period(), lower).unwrap(),
        upper: TimeSeries::from_values(point.start(), point.period(), upper).unwrap(),
        point,
    })
}

impl Forecaster for ArimaFit {
    fn fitted_values(&self) -> TimeSeries {
        self.fitted.clone()
    }

    fn forecast(&self, horizon: usize) -> TimeSeries {
        arima_forecast(self, horizon).expect("horizon >= 1")
    }
}

/// The workbench's standard candidate set: six nonseasonal orders plus the
/// two seasonal specifications compared against ETS.
pub fn default_candidates() -> Vec<ArimaSpec> {
    vec![
        ArimaSpec::new(2, 0, 0),
        ArimaSpec::new(3, 0, 0),
        ArimaSpec::new(2, 1, 0),
        ArimaSpec::new(2, 2, 0),
        ArimaSpec::new(2, 1, 1),
        ArimaSpec::new(2, 1, 2),
        ArimaSpec::new(0, 0, 0).with_seasonal(0, 1, 0, 12),
        ArimaSpec::new(0, 0, 0).with_seasonal(0, 1, 2, 12),
    ]
}

/// One candidate outcome; failures are recorded and do not abort the suite.
#[derive(Debug)]
pub struct CandidateFit {
    pub spec: ArimaSpec,
    pub outcome: Result<ArimaFit, ArimaError>,
}

/// Fits every candidate in declared order.
pub fn fit_candidate_suite(series: &TimeSeries, candidates: &[ArimaSpec]) -> Vec<CandidateFit> {
    candidates
        .iter()
        .map(|spec| CandidateFit {
            spec: *spec,
            outcome: arima_fit(spec, series),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlogram::ljung_box;
    use crate::series::{difference, seasonal_difference, MonthStamp};

    fn ts(values: &[f64]) -> TimeSeries {
        TimeSeries::from_values(MonthStamp::new(2015, 1).unwrap(), 12, values.to_vec()).unwrap()
    }

    fn coeffs(ar: &[f64], ma: &[f64]) -> ArimaCoefficients {
        ArimaCoefficients {
            ar: ar.to_vec(),
            ma: ma.to_vec(),
            ..Default::default()
        }
    }

    #[test]
    fn display_formats() {
        assert_eq!(ArimaSpec::new(2, 1, 1).to_string(), "ARIMA(2,1,1)");
        assert_eq!(
            ArimaSpec::new(0, 0, 0)
                .with_seasonal(0, 1, 0, 12)
                .to_string(),
            "ARIMA(0,0,0)(0,1,0)[12]"
        );
    }

    #[test]
    fn constant_defaults_follow_differencing() {
        assert!(ArimaSpec::new(2, 0, 0).include_constant);
        assert!(!ArimaSpec::new(2, 1, 0).include_constant);
        assert!(!ArimaSpec::new(0, 0, 0).with_seasonal(0, 1, 0, 12).include_constant);
    }

    #[test]
    fn polynomial_roots_of_quadratic() {
        // z^2 - 3z + 2 = (z-1)(z-2)
        let mut roots = polynomial_roots(&[2.0, -3.0, 1.0]);
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((roots[0] - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        assert!((roots[1] - Complex64::new(2.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn pacf_transform_round_trips() {
        let u = [0.3, -0.8, 0.5];
        let coeffs = unconstrained_to_coeffs(&u);
        let back = coeffs_to_unconstrained(&coeffs);
        for (a, b) in u.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn transform_always_lands_in_stationary_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let dim = rng.gen_range(1..=4);
            let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-6.0..6.0)).collect();
            let coeffs = unconstrained_to_coeffs(&u);
            let min = min_root_modulus(&ar_polynomial(&coeffs, 1));
            assert!(
                min > 1.0 + ROOT_MARGIN / 2.0,
                "root modulus {min} inside the margin for u={u:?}"
            );
        }
    }

    #[test]
    fn simulate_degenerate_noise_constant() {
        let spec = ArimaSpec::new(0, 0, 0);
        let c = ArimaCoefficients {
            constant: 3.5,
            ..Default::default()
        };
        let s = simulate_arima(&spec, &c, 20, 0.0, 1).unwrap();
        assert!(s.dense().unwrap().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn simulate_ar1_zero_noise_settles_at_mean() {
        let spec = ArimaSpec::new(1, 0, 0);
        let c = ArimaCoefficients {
            ar: vec![0.5],
            constant: 2.0,
            ..Default::default()
        };
        // With zero noise the recursion decays geometrically toward
        // c / (1 - phi) = 4.
        let values = simulate_arima(&spec, &c, 10, 0.0, 1).unwrap().dense().unwrap();
        let mut prev_gap = f64::INFINITY;
        for v in &values {
            let gap = (v - 4.0).abs();
            assert!(gap < prev_gap || gap < 1e-12, "gap {gap} did not shrink");
            prev_gap = gap;
        }
        assert!((values.last().unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn simulate_ar1_sample_acf_matches_theory() {
        let spec = ArimaSpec::new(1, 0, 0);
        let c = coeffs(&[0.7], &[]);
        let s = simulate_arima(&spec, &c, 5000, 1.0, 42).unwrap();
        let acf1 = crate::correlogram::acf(&s, 1).unwrap().at(1);
        assert!((acf1 - 0.7).abs() < 0.05, "lag-1 ACF {acf1}");
    }

    #[test]
    fn simulate_rejects_explosive_coefficients() {
        let spec = ArimaSpec::new(1, 0, 0);
        let c = coeffs(&[1.2], &[]);
        assert!(matches!(
            simulate_arima(&spec, &c, 10, 1.0, 1),
            Err(ArimaError::InvalidCoefficients(_))
        ));
    }

    #[test]
    fn simulate_is_deterministic_in_seed() {
        let spec = ArimaSpec::new(1, 0, 1);
        let c = coeffs(&[0.4], &[0.3]);
        let a = simulate_arima(&spec, &c, 50, 1.0, 9).unwrap();
        let b = simulate_arima(&spec, &c, 50, 1.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fit_white_noise_with_constant() {
        let spec = ArimaSpec::new(0, 0, 0);
        let s = simulate_arima(&spec, &ArimaCoefficients { constant: 5.0, ..Default::default() }, 500, 2.0, 7)
            .unwrap();
        let values = s.dense().unwrap();
        let sample_mean = values.iter().sum::<f64>() / values.len() as f64;
        let sample_var =
            values.iter().map(|v| (v - sample_mean).powi(2)).sum::<f64>() / values.len() as f64;
        let fit = arima_fit(&spec, &s).unwrap();
        let bound = 3.0 * 2.0 / (500.0f64).sqrt();
        assert!(
            (fit.coefficients.constant - sample_mean).abs() < bound,
            "constant {} vs mean {sample_mean}",
            fit.coefficients.constant
        );
        assert!((fit.sigma2 - sample_var).abs() / sample_var < 0.15);
    }

    #[test]
    fn fit_recovers_ar2() {
        let spec = ArimaSpec::new(2, 0, 0).with_constant(false);
        let truth = coeffs(&[0.5, -0.3], &[]);
        let mut hits = 0;
        for seed in 0..20 {
            let s = simulate_arima(&spec, &truth, 500, 1.0, 100 + seed).unwrap();
            let fit = arima_fit(&spec, &s).unwrap();
            if (fit.coefficients.ar[0] - 0.5).abs() <= 0.1
                && (fit.coefficients.ar[1] + 0.3).abs() <= 0.1
            {
                hits += 1;
            }
        }
        assert!(hits >= 16, "AR(2) recovered in only {hits}/20 seeds");
    }

    #[test]
    fn fit_recovers_ma1() {
        let spec = ArimaSpec::new(0, 0, 1).with_constant(false);
        let truth = coeffs(&[], &[0.6]);
        let mut hits = 0;
        for seed in 0..20 {
            let s = simulate_arima(&spec, &truth, 1000, 1.0, 300 + seed).unwrap();
            let fit = arima_fit(&spec, &s).unwrap();
            if (fit.coefficients.ma[0] - 0.6).abs() <= 0.1 {
                hits += 1;
            }
        }
        assert!(hits >= 16, "MA(1) recovered in only {hits}/20 seeds");
    }

    #[test]
    fn fit_css_not_worse_than_hannan_rissanen_start() {
        let spec = ArimaSpec::new(2, 0, 1).with_constant(false);
        let truth = coeffs(&[0.4, -0.2], &[0.5]);
        for seed in 0..5 {
            let s = simulate_arima(&spec, &truth, 300, 1.0, 400 + seed).unwrap();
            let w = s.dense().unwrap();
            let start = hannan_rissanen(&spec, &w);
            let layout = CoeffLayout { spec, scale: 1.0 };
            let projected = layout.unpack(&layout.pack(&start));
            let start_css = css_value(
                &w,
                &full_ar_poly(&spec, &projected),
                &full_ma_poly(&spec, &projected),
                projected.constant,
                spec.conditioning_len(),
            );
            let fit = arima_fit(&spec, &s).unwrap();
            assert!(
                fit.css <= start_css * (1.0 + 1e-9),
                "seed {seed}: CSS {} above start {start_css}",
                fit.css
            );
        }
    }

    #[test]
    fn fitted_plus_residual_reconstructs_observation() {
        let spec = ArimaSpec::new(1, 1, 0);
        let truth = coeffs(&[0.5], &[]);
        let s = simulate_arima(&spec, &truth, 120, 1.0, 11).unwrap();
        let fit = arima_fit(&spec, &s).unwrap();
        let offset = fit
            .fitted
            .start()
            .months_since(s.start()) as usize;
        for i in 0..fit.fitted.len() {
            let y = s.get(offset + i).unwrap();
            let f = fit.fitted.get(i).unwrap();
            let e = fit.residuals.get(i).unwrap();
            assert!((y - f - e).abs() < 1e-12);
        }
    }

    #[test]
    fn stationarity_guard_on_returned_fits() {
        let spec = ArimaSpec::new(2, 1, 1);
        let truth = coeffs(&[0.5, -0.3], &[0.5]);
        for seed in 0..5 {
            let s = simulate_arima(&spec, &truth, 150, 1.0, 500 + seed).unwrap();
            let fit = arima_fit(&spec, &s).unwrap();
            let ar = ar_polynomial(&fit.coefficients.ar, 1);
            let ma = ma_polynomial(&fit.coefficients.ma, 1);
            assert!(min_root_modulus(&ar) > 1.0 + 1e-3);
            assert!(min_root_modulus(&ma) > 1.0 + 1e-3);
        }
    }

    #[test]
    fn residuals_are_white_for_correct_spec() {
        let spec = ArimaSpec::new(2, 0, 0).with_constant(false);
        let truth = coeffs(&[0.5, -0.3], &[]);
        let mut passes = 0;
        for seed in 0..50 {
            let s = simulate_arima(&spec, &truth, 500, 1.0, 900 + seed).unwrap();
            let fit = arima_fit(&spec, &s).unwrap();
            let test = ljung_box(&fit.residuals, 12, 2).unwrap();
            if test.is_white_noise(0.05) {
                passes += 1;
            }
        }
        assert!(passes >= 43, "white residuals in only {passes}/50 seeds");
    }

    #[test]
    fn seasonal_random_walk_forecast_is_seasonal_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let values: Vec<f64> = (0..48).map(|_| rng.gen_range(5.0..25.0)).collect();
        let s = ts(&values);
        let spec = ArimaSpec::new(0, 0, 0).with_seasonal(0, 1, 0, 12);
        let fit = arima_fit(&spec, &s).unwrap();
        let f = arima_forecast(&fit, 12).unwrap();
        for h in 0..12 {
            assert_eq!(
                f.get(h).unwrap(),
                values[36 + h],
                "seasonal naive must be exact at h={h}"
            );
        }
    }

    #[test]
    fn ar1_with_constant_matches_closed_form() {
        let spec = ArimaSpec::new(1, 0, 0);
        let truth = ArimaCoefficients {
            ar: vec![0.6],
            constant: 1.0,
            ..Default::default()
        };
        let s = simulate_arima(&spec, &truth, 200, 1.0, 77).unwrap();
        let fit = arima_fit(&spec, &s).unwrap();
        let phi = fit.coefficients.ar[0];
        let c = fit.coefficients.constant;
        let y_last = s.get(s.len() - 1).unwrap();
        let f = arima_forecast(&fit, 8).unwrap();
        for h in 1..=8usize {
            let want = c * (1.0 - phi.powi(h as i32)) / (1.0 - phi) + phi.powi(h as i32) * y_last;
            assert!(
                (f.get(h - 1).unwrap() - want).abs() < 1e-12,
                "closed form mismatch at h={h}"
            );
        }
    }

    #[test]
    fn ma_forecast_reverts_to_mean_after_q_steps() {
        let spec = ArimaSpec::new(0, 0, 1);
        let truth = ArimaCoefficients {
            ma: vec![0.6],
            constant: 3.0,
            ..Default::default()
        };
        let s = simulate_arima(&spec, &truth, 300, 1.0, 21).unwrap();
        let fit = arima_fit(&spec, &s).unwrap();
        let f = arima_forecast(&fit, 6).unwrap();
        for h in 1..6 {
            assert!(
                (f.get(h).unwrap() - fit.coefficients.constant).abs() < 1e-12,
                "horizon {h} should equal the constant"
            );
        }
    }

    #[test]
    fn forecast_differencing_consistency() {
        // Differencing the forecasts joined to the observed tail must
        // reproduce the differenced-scale forecasts, which for a pure
        // AR(1)-on-differences model have the closed form phi^(j+1) * w_T.
        let spec = ArimaSpec::new(1, 1, 0);
        let truth = coeffs(&[0.4], &[]);
        let s = simulate_arima(&spec, &truth, 150, 1.0, 33).unwrap();
        let fit = arima_fit(&spec, &s).unwrap();
        let h = 12;
        let f = arima_forecast(&fit, h).unwrap();
        let joined = s.concat_values(&f);
        let rediffed = difference(&joined, 1).unwrap();
        let w = difference(&s, 1).unwrap();
        let n_w = w.len();
        assert_eq!(rediffed.len(), n_w + h);
        for j in 0..n_w {
            assert!((rediffed.get(j).unwrap() - w.get(j).unwrap()).abs() < 1e-10);
        }
        let phi = fit.coefficients.ar[0];
        let w_last = w.get(n_w - 1).unwrap();
        for j in 0..h {
            let want = phi.powi(j as i32 + 1) * w_last;
            assert!(
                (rediffed.get(n_w + j).unwrap() - want).abs() < 1e-10,
                "differenced forecast mismatch at step {j}"
            );
        }
    }

    #[test]
    fn seasonal_forecast_consistency_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let values: Vec<f64> = (0..60)
            .map(|t| 10.0 + ((t % 12) as f64) + rng.gen_range(-1.0..1.0))
            .collect();
        let s = ts(&values);
        let spec = ArimaSpec::new(0, 0, 0).with_seasonal(0, 1, 2, 12);
        let fit = arima_fit(&spec, &s).unwrap();
        let f = arima_forecast(&fit, 12).unwrap();
        let joined = s.concat_values(&f);
        let w_joined = seasonal_difference(&joined, 12, 1).unwrap();
        let w = seasonal_difference(&s, 12, 1).unwrap();
        for j in 0..w.len() {
            assert!((w_joined.get(j).unwrap() - w.get(j).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn candidate_suite_shape_and_order() {
        let candidates = default_candidates();
        assert_eq!(candidates.len(), 8);
        assert_eq!(candidates[0].to_string(), "ARIMA(2,0,0)");
        assert_eq!(candidates[4].to_string(), "ARIMA(2,1,1)");
        assert_eq!(candidates[6].to_string(), "ARIMA(0,0,0)(0,1,0)[12]");
        assert_eq!(candidates[7].to_string(), "ARIMA(0,0,0)(0,1,2)[12]");

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let values: Vec<f64> = (0..60).map(|_| rng.gen_range(10.0..30.0)).collect();
        let fits = fit_candidate_suite(&ts(&values), &candidates);
        assert_eq!(fits.len(), 8);
        for (c, f) in candidates.iter().zip(fits.iter()) {
            assert_eq!(*c, f.spec);
        }
    }

    #[test]
    fn suite_records_failures_and_continues() {
        // 12 observations cannot even be seasonally differenced at lag 12,
        // but the short nonseasonal fit still succeeds.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let values: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..10.0)).collect();
        let specs = vec![
            ArimaSpec::new(1, 0, 0),
            ArimaSpec::new(0, 0, 0).with_seasonal(0, 1, 0, 12),
        ];
        let fits = fit_candidate_suite(&ts(&values), &specs);
        assert!(fits[0].outcome.is_ok());
        assert!(fits[1].outcome.is_err());
    }

    #[test]
    fn aicc_selects_the_generating_order() {
        let truth = coeffs(&[0.5, -0.3], &[0.5]);
        let spec = ArimaSpec::new(2, 1, 1);
        let candidates: Vec<ArimaSpec> = default_candidates()[..6].to_vec();
        let mut wins = 0;
        for seed in 0..50 {
            let s = simulate_arima(&spec, &truth, 120, 1.0, 7000 + seed).unwrap();
            let fits = fit_candidate_suite(&s, &candidates);
            let best = fits
                .iter()
                .filter_map(|c| c.outcome.as_ref().ok().map(|f| (c.spec, f.aicc)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if best.0 == spec {
                wins += 1;
            }
        }
        assert!(wins >= 30, "(2,1,1) ranked first in only {wins}/50 seeds");
    }
}
