//! Scalar risk-adjusted return measures and the sample statistics they consume.
//!
//! Everything here is a pure function of its arguments. Standard deviations use
//! the sample (n − 1) denominator; downside deviation averages squared
//! shortfalls over *all* observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample statistics of a return series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub mean: f64,
    pub std: f64,
    pub downside_dev: f64,
    pub count: usize,
}

/// Parameters of the regime coefficient and the market-adaptive ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioConfig {
    /// Steepness of the regime sigmoid.
    pub alpha: f64,
    /// Per-period risk-free rate.
    pub risk_free: f64,
    /// Trailing periods compounded into the regime return.
    pub regime_lookback: usize,
    /// When set, this regime return is used instead of the trailing one.
    pub regime_override: Option<f64>,
}

impl Default for RatioConfig {
    fn default() -> Self {
        Self {
            alpha: 5.0,
            risk_free: 0.0,
            regime_lookback: 21,
            regime_override: None,
        }
    }
}

impl RatioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must be positive and finite (got {})",
                self.alpha
            )));
        }
        if !self.risk_free.is_finite() {
            return Err(Error::InvalidInput("risk_free must be finite".into()));
        }
        if self.regime_lookback == 0 {
            return Err(Error::InvalidInput("regime_lookback must be at least 1".into()));
        }
        if let Some(r) = self.regime_override {
            if !r.is_finite() {
                return Err(Error::InvalidInput("regime_override must be finite".into()));
            }
        }
        Ok(())
    }

    /// Regime coefficient for a series, honouring `regime_override`.
    ///
    /// Series shorter than the lookback are compounded over their full length.
    pub fn rho_for(&self, returns: &[f64]) -> Result<f64> {
        let regime = match self.regime_override {
            Some(r) => r,
            None => {
                let lookback = self.regime_lookback.min(returns.len()).max(1);
                regime_return(returns, lookback)?
            }
        };
        rho(regime, self.alpha)
    }
}

/// Market statistics relative to a benchmark series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkStats {
    pub beta: f64,
    pub benchmark_return: f64,
    pub tracking_error: f64,
}

impl BenchmarkStats {
    pub fn compute(portfolio: &[f64], benchmark: &[f64]) -> Result<Self> {
        let beta = beta(portfolio, benchmark)?;
        let active: Vec<f64> = portfolio.iter().zip(benchmark).map(|(p, b)| p - b).collect();
        Ok(Self {
            beta,
            benchmark_return: mean(benchmark),
            tracking_error: sample_std(&active),
        })
    }
}

fn check_finite(returns: &[f64]) -> Result<()> {
    match returns.iter().position(|r| !r.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!("non-finite value at index {i}"))),
        None => Ok(()),
    }
}

fn is_constant(xs: &[f64]) -> bool {
    xs.iter().all(|x| *x == xs[0])
}

// Constant series are special-cased so their mean is exact and their
// dispersion exactly zero; summation rounding would otherwise leave ~1e-19.
pub(crate) fn mean(xs: &[f64]) -> f64 {
    if is_constant(xs) {
        return xs[0];
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; callers guarantee at least two elements.
pub(crate) fn sample_std(xs: &[f64]) -> f64 {
    if is_constant(xs) {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

pub fn compute_stats(returns: &[f64], downside_threshold: f64) -> Result<ReturnStats> {
    if returns.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 returns, got {}",
            returns.len()
        )));
    }
    check_finite(returns)?;
    check_finite(&[downside_threshold])?;
    let shortfall: f64 = returns
        .iter()
        .map(|r| (r - downside_threshold).min(0.0).powi(2))
        .sum();
    Ok(ReturnStats {
        mean: mean(returns),
        std: sample_std(returns),
        downside_dev: (shortfall / returns.len() as f64).sqrt(),
        count: returns.len(),
    })
}

pub fn sharpe(mu: f64, risk_free: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::DegenerateRisk(sigma));
    }
    Ok((mu - risk_free) / sigma)
}

pub fn treynor(mu: f64, risk_free: f64, beta: f64) -> Result<f64> {
    if beta == 0.0 {
        return Err(Error::DegenerateBeta);
    }
    Ok((mu - risk_free) / beta)
}

/// OLS slope of `portfolio` on `benchmark`.
pub fn beta(portfolio: &[f64], benchmark: &[f64]) -> Result<f64> {
    paired(portfolio, benchmark)?;
    let mp = mean(portfolio);
    let mb = mean(benchmark);
    let (cov, var) = portfolio
        .iter()
        .zip(benchmark)
        .fold((0.0, 0.0), |(c, v), (p, b)| {
            (c + (p - mp) * (b - mb), v + (b - mb) * (b - mb))
        });
    if var == 0.0 {
        return Err(Error::DegenerateBenchmark);
    }
    Ok(cov / var)
}

pub fn sortino(mu: f64, risk_free: f64, downside_dev: f64) -> Result<f64> {
    if !(downside_dev > 0.0) {
        return Err(Error::DegenerateDownside);
    }
    Ok((mu - risk_free) / downside_dev)
}

/// Mean active return over its sample standard deviation.
pub fn information_ratio(portfolio: &[f64], benchmark: &[f64]) -> Result<f64> {
    paired(portfolio, benchmark)?;
    let active: Vec<f64> = portfolio.iter().zip(benchmark).map(|(p, b)| p - b).collect();
    let te = sample_std(&active);
    if te == 0.0 {
        return Err(Error::DegenerateTracking);
    }
    Ok(mean(&active) / te)
}

fn paired(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 paired observations, got {}",
            a.len()
        )));
    }
    check_finite(a)?;
    check_finite(b)
}

/// Regime coefficient `2 / (1 + exp(-alpha * regime_return))`, always in (0, 2).
///
/// Values near 2 mark a rising market, values near 0 a falling one.
pub fn rho(regime_return: f64, alpha: f64) -> Result<f64> {
    if !regime_return.is_finite() || !alpha.is_finite() {
        return Err(Error::InvalidInput("rho inputs must be finite".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be positive (got {alpha})")));
    }
    // saturates to exactly 0 or 2 in f64 once |alpha * r| exceeds ~37 on the
    // upper side; keep the open interval
    let value = 2.0 / (1.0 + (-alpha * regime_return).exp());
    Ok(value.clamp(f64::MIN_POSITIVE, RHO_MAX))
}

/// Largest `f64` below 2.
const RHO_MAX: f64 = 2.0 - f64::EPSILON;

/// Market-adaptive ratio `sgn(x)·|x|^rho / sigma^(1/rho)` with `x = mu - risk_free`.
///
/// At `rho == 1` this is exactly the Sharpe ratio (bit for bit).
pub fn market_adaptive_ratio(mu: f64, risk_free: f64, sigma: f64, rho: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::DegenerateRisk(sigma));
    }
    if !(rho > 0.0 && rho < 2.0) {
        return Err(Error::InvalidRegime(rho));
    }
    if rho == 1.0 {
        return sharpe(mu, risk_free, sigma);
    }
    let excess = mu - risk_free;
    // f64::signum maps 0.0 to 1.0
    if excess == 0.0 {
        return Ok(0.0);
    }
    Ok(excess.signum() * excess.abs().powf(rho) / sigma.powf(1.0 / rho))
}

/// Trailing compounded return `prod(1 + r) - 1` over the last `lookback` periods.
pub fn regime_return(returns: &[f64], lookback: usize) -> Result<f64> {
    if lookback == 0 {
        return Err(Error::InvalidInput("lookback must be at least 1".into()));
    }
    if returns.len() < lookback {
        return Err(Error::InsufficientData(format!(
            "regime lookback {lookback} exceeds {} available returns",
            returns.len()
        )));
    }
    let tail = &returns[returns.len() - lookback..];
    check_finite(tail)?;
    Ok(tail.iter().map(|r| 1.0 + r).product::<f64>() - 1.0)
}
