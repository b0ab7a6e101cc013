//! Autocorrelation, partial autocorrelation, and the Ljung-Box white-noise
//! test.
//!
//! The ACF uses the biased (full-sample denominator) estimator, which keeps
//! the autocorrelation sequence positive semi-definite and the
//! Durbin-Levinson recursion stable.

use serde::Serialize;
use thiserror::Error;

use crate::dist::chi_square_sf;
use crate::series::TimeSeries;

/// Default two-sided white-noise band multiplier.
pub const DEFAULT_BAND_Z: f64 = 1.96;

#[derive(Debug, Error, PartialEq)]
pub enum CorrelogramError {
    #[error("series contains missing values")]
    MissingData,
    #[error("series is constant; autocorrelation is undefined")]
    ConstantSeries,
    #[error("max lag {max_lag} must be positive and below the sample size {n}")]
    LagBounds { max_lag: usize, n: usize },
    #[error("Durbin-Levinson hit a unit pivot at lag {0}")]
    NumericalDegeneracy(usize),
    #[error("need more than {h} observations for {h} lags, have {n}")]
    InsufficientData { h: usize, n: usize },
    #[error("lags tested ({h}) must exceed the fitted parameter count ({k})")]
    DegreesOfFreedom { h: usize, k: usize },
}

/// Auto- or partial-autocorrelation coefficients for lags `1..=L`, with the
/// sample size and the white-noise confidence band `z / sqrt(n)`.
#[derive(Debug, Clone, Serialize)]
pub struct Correlogram {
    pub coefficients: Vec<f64>,
    pub n: usize,
    pub confidence_bound: f64,
}

impl Correlogram {
    /// Coefficient at `lag` (1-based).
    pub fn at(&self, lag: usize) -> f64 {
        self.coefficients[lag - 1]
    }

    pub fn max_lag(&self) -> usize {
        self.coefficients.len()
    }
}

/// Ljung-Box portmanteau test outcome.
#[derive(Debug, Clone, Serialize)]
pub struct WhiteNoiseTest {
    pub statistic: f64,
    pub lags_tested: usize,
    pub dof: usize,
    pub p_value: f64,
}

impl WhiteNoiseTest {
    /// True when the white-noise hypothesis survives at level `alpha`.
    pub fn is_white_noise(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

fn centered_dense(series: &TimeSeries) -> Result<(Vec<f64>, f64), CorrelogramError> {
    let values = series.dense().map_err(|_| CorrelogramError::MissingData)?;
    let n = values.len();
    if n == 0 {
        return Err(CorrelogramError::LagBounds { max_lag: 0, n: 0 });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let sum_sq = centered.iter().map(|v| v * v).sum::<f64>();
    if sum_sq == 0.0 {
        return Err(CorrelogramError::ConstantSeries);
    }
    Ok((centered, sum_sq))
}

/// Sample autocorrelations at lags `1..=max_lag`.
pub fn acf(series: &TimeSeries, max_lag: usize) -> Result<Correlogram, CorrelogramError> {
    let n = series.len();
    if max_lag == 0 || max_lag >= n {
        return Err(CorrelogramError::LagBounds { max_lag, n });
    }
    let (centered, sum_sq) = centered_dense(series)?;
    let coefficients = (1..=max_lag)
        .map(|k| {
            let num: f64 = centered[k..]
                .iter()
                .zip(centered.iter())
                .map(|(a, b)| a * b)
                .sum();
            num / sum_sq
        })
        .collect();
    Ok(Correlogram {
        coefficients,
        n,
        confidence_bound: DEFAULT_BAND_Z / (n as f64).sqrt(),
    })
}

/// Partial autocorrelations at lags `1..=max_lag` via the Durbin-Levinson
/// recursion on the sample ACF.
pub fn pacf(series: &TimeSeries, max_lag: usize) -> Result<Correlogram, CorrelogramError> {
    let rho = acf(series, max_lag)?;
    let pacf = durbin_levinson(&rho.coefficients)?;
    Ok(Correlogram {
        coefficients: pacf,
        n: rho.n,
        confidence_bound: rho.confidence_bound,
    })
}

/// Runs Durbin-Levinson on an autocorrelation sequence (`rho[k-1]` is the
/// lag-k coefficient) and returns the partial autocorrelations.
pub fn durbin_levinson(rho: &[f64]) -> Result<Vec<f64>, CorrelogramError> {
    let max_lag = rho.len();
    let mut pacf = Vec::with_capacity(max_lag);
    // phi[j] = coefficient j+1 of the current-order autoregression
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);

    for k in 1..=max_lag {
        let next = if k == 1 {
            rho[0]
        } else {
            let num = rho[k - 1]
                - (0..k - 1).map(|j| phi[j] * rho[k - 2 - j]).sum::<f64>();
            let den = 1.0 - (0..k - 1).map(|j| phi[j] * rho[j]).sum::<f64>();
            if den.abs() < 1e-12 {
                return Err(CorrelogramError::NumericalDegeneracy(k));
            }
            num / den
        };
        let prev = phi.clone();
        phi.push(0.0);
        for j in 0..k - 1 {
            phi[j] = prev[j] - next * prev[k - 2 - j];
        }
        phi[k - 1] = next;
        pacf.push(next);
    }
    Ok(pacf)
}

/// Ljung-Box test: `Q = n(n+2) Σ_{j=1..h} ρ̂_j² / (n−j)` against a
/// chi-square with `h − fitted_params` degrees of freedom.
pub fn ljung_box(
    residuals: &TimeSeries,
    h: usize,
    fitted_params: usize,
) -> Result<WhiteNoiseTest, CorrelogramError> {
    let n = residuals.len();
    if h == 0 || n <= h {
        return Err(CorrelogramError::InsufficientData { h, n });
    }
    if h <= fitted_params {
        return Err(CorrelogramError::DegreesOfFreedom {
            h,
            k: fitted_params,
        });
    }
    let rho = acf(residuals, h)?;
    let nf = n as f64;
    let statistic = nf
        * (nf + 2.0)
        * rho
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, r)| r * r / (nf - (i + 1) as f64))
            .sum::<f64>();
    let dof = h - fitted_params;
    Ok(WhiteNoiseTest {
        statistic,
        lags_tested: h,
        dof,
        p_value: chi_square_sf(statistic, dof),
    })
}
