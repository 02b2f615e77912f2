//! Recurrent reinforcement-learning allocator.
//!
//! The policy scores each asset from its own lagged returns, its previous
//! allocation and a bias, then takes a softmax, so every decision is long-only
//! and fully invested. The previous allocation feeds back into the next
//! decision. Training is full-batch gradient ascent on a window-level reward,
//! either the Sharpe ratio or the market-adaptive ratio, with the gradient taken
//! exactly through the unrolled recurrence.
//!
//! For the market-adaptive reward the regime coefficient is computed from the
//! trailing portfolio returns at the end of the window and then held constant:
//! the gradient does not flow through it. During [`train`] it is fixed once,
//! from the starting policy, so every epoch ascends the same objective.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocators::WeightVector;
use crate::data::ReturnTable;
use crate::error::{Error, Result};
use crate::ratios::{self, RatioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Sharpe,
    MarketAdaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub feature_lags: usize,
    pub reward_kind: RewardKind,
    pub ratio: RatioConfig,
    /// Proportional cost charged on the L1 turnover of each decision.
    pub cost_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 500,
            feature_lags: 21,
            reward_kind: RewardKind::Sharpe,
            ratio: RatioConfig::default(),
            cost_rate: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.feature_lags == 0 {
            return bad("feature_lags must be at least 1");
        }
        if !(self.cost_rate.is_finite() && self.cost_rate >= 0.0) {
            return bad("cost_rate must be non-negative");
        }
        self.ratio.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// Policy parameters. Row `i` of `feature_weights` scores asset `i`'s own lags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub feature_weights: Vec<Vec<f64>>,
    pub recurrence_weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(n_assets: usize, lags: usize) -> Self {
        Self {
            feature_weights: vec![vec![0.0; lags]; n_assets],
            recurrence_weights: vec![0.0; n_assets],
            bias: vec![0.0; n_assets],
        }
    }

    /// Uniform(−0.1, 0.1) initialization.
    pub fn random(n_assets: usize, lags: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || rng.random_range(-0.1..0.1);
        let feature_weights = (0..n_assets).map(|_| (0..lags).map(|_| draw()).collect()).collect();
        let recurrence_weights = (0..n_assets).map(|_| draw()).collect();
        let bias = (0..n_assets).map(|_| draw()).collect();
        Self { feature_weights, recurrence_weights, bias }
    }

    pub fn n_assets(&self) -> usize {
        self.bias.len()
    }

    pub fn n_lags(&self) -> usize {
        self.feature_weights.first().map_or(0, Vec::len)
    }

    fn check(&self) -> Result<()> {
        let n = self.n_assets();
        let l = self.n_lags();
        if n == 0
            || self.recurrence_weights.len() != n
            || self.feature_weights.len() != n
            || self.feature_weights.iter().any(|r| r.len() != l)
        {
            return Err(Error::InvalidInput("inconsistent policy parameter dimensions".into()));
        }
        if self.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite policy parameter".into()));
        }
        Ok(())
    }

    /// Parameters in a fixed order: feature weights row by row, recurrence, bias.
    pub fn to_flat(&self) -> Vec<f64> {
        self.feature_weights
            .iter()
            .flatten()
            .chain(&self.recurrence_weights)
            .chain(&self.bias)
            .copied()
            .collect()
    }

    pub fn from_flat(n_assets: usize, lags: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != n_assets * (lags + 2) {
            return Err(Error::InvalidInput("flat parameter length mismatch".into()));
        }
        let (fw, rest) = flat.split_at(n_assets * lags);
        let (rec, bias) = rest.split_at(n_assets);
        Ok(Self {
            feature_weights: fw.chunks(lags.max(1)).take(n_assets).map(<[f64]>::to_vec).collect(),
            recurrence_weights: rec.to_vec(),
            bias: bias.to_vec(),
        })
    }

    fn axpy(&mut self, step: f64, g: &PolicyParams) {
        for (row, grow) in self.feature_weights.iter_mut().zip(&g.feature_weights) {
            for (v, d) in row.iter_mut().zip(grow) {
                *v += step * d;
            }
        }
        for (v, d) in self.recurrence_weights.iter_mut().zip(&g.recurrence_weights) {
            *v += step * d;
        }
        for (v, d) in self.bias.iter_mut().zip(&g.bias) {
            *v += step * d;
        }
    }
}

/// Lagged returns ending at row `t`: column `k` holds row `t − k`.
pub fn features_at(returns: &ReturnTable, t: usize, lags: usize) -> Result<DMatrix<f64>> {
    if t + 1 < lags || t >= returns.n_rows() {
        return Err(Error::InsufficientData(format!(
            "row {t} has fewer than {lags} returns of history"
        )));
    }
    Ok(DMatrix::from_fn(returns.n_assets(), lags, |i, k| returns.returns[(t - k, i)]))
}

fn scores(params: &PolicyParams, features: &DMatrix<f64>, prev: &[f64]) -> DVector<f64> {
    DVector::from_fn(params.n_assets(), |i, _| {
        let fw: f64 = params.feature_weights[i]
            .iter()
            .zip(features.row(i).iter())
            .map(|(w, x)| w * x)
            .sum();
        fw + params.recurrence_weights[i] * prev[i] + params.bias[i]
    })
}

pub(crate) fn softmax(scores: &DVector<f64>) -> Vec<f64> {
    let max = scores.max();
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// One allocation decision: softmax of per-asset scores.
pub fn forward(params: &PolicyParams, features: &DMatrix<f64>, prev_weights: &WeightVector) -> Result<WeightVector> {
    params.check()?;
    let n = params.n_assets();
    if features.shape() != (n, params.n_lags()) || prev_weights.len() != n {
        return Err(Error::InvalidInput(format!(
            "features {:?} / previous weights {} do not match {n} assets x {} lags",
            features.shape(),
            prev_weights.len(),
            params.n_lags()
        )));
    }
    let w = softmax(&scores(params, features, prev_weights.as_slice()));
    // exact renormalization can still leave ~1 ulp of drift per entry
    WeightVector::normalized(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub weight_path: Vec<WeightVector>,
    pub portfolio_returns: Vec<f64>,
    pub reward: f64,
    /// Regime return and coefficient used by the market-adaptive reward.
    pub regime_return: Option<f64>,
    pub rho: Option<f64>,
}

struct Rollout {
    features: Vec<DMatrix<f64>>,
    weights: Vec<Vec<f64>>,
    portfolio_returns: Vec<f64>,
}

fn rollout(params: &PolicyParams, window: &ReturnTable, config: &TrainConfig) -> Result<Rollout> {
    params.check()?;
    let lags = config.feature_lags;
    let n = window.n_assets();
    let rows = window.n_rows();
    if params.n_assets() != n || params.n_lags() != lags {
        return Err(Error::InvalidInput(format!(
            "policy is {}x{} but window has {n} assets and config {lags} lags",
            params.n_assets(),
            params.n_lags()
        )));
    }
    if rows <= lags + 1 {
        return Err(Error::InsufficientData(format!(
            "training window of {rows} rows needs more than {} rows",
            lags + 1
        )));
    }
    let mut prev = vec![1.0 / n as f64; n];
    let mut features = Vec::with_capacity(rows - lags + 1);
    let mut weights = Vec::with_capacity(rows - lags + 1);
    for t in lags - 1..rows {
        let x = features_at(window, t, lags)?;
        let w = softmax(&scores(params, &x, &prev));
        features.push(x);
        weights.push(w.clone());
        prev = w;
    }
    let mut portfolio_returns = Vec::with_capacity(rows - lags);
    for k in 0..rows - lags {
        let r = window.returns.row(lags + k);
        let held = &weights[k];
        let gross: f64 = held.iter().zip(r.iter()).map(|(w, x)| w * x).sum();
        let turnover: f64 = weights[k + 1].iter().zip(held).map(|(a, b)| (a - b).abs()).sum();
        portfolio_returns.push(gross - config.cost_rate * turnover);
    }
    Ok(Rollout { features, weights, portfolio_returns })
}

struct Reward {
    value: f64,
    /// d reward / d portfolio return at each step.
    sensitivity: Vec<f64>,
    regime_return: Option<f64>,
    rho: Option<f64>,
}

fn reward(portfolio_returns: &[f64], config: &TrainConfig) -> Result<Reward> {
    let rf = config.ratio.risk_free;
    let stats = ratios::compute_stats(portfolio_returns, rf)?;
    let (mu, sigma) = (stats.mean, stats.std);
    let (regime_return, rho) = match config.reward_kind {
        RewardKind::Sharpe => (None, 1.0),
        RewardKind::MarketAdaptive => {
            let r = match config.ratio.regime_override {
                Some(r) => r,
                None => {
                    let lookback = config.ratio.regime_lookback.min(portfolio_returns.len());
                    ratios::regime_return(portfolio_returns, lookback)?
                }
            };
            (Some(r), ratios::rho(r, config.ratio.alpha)?)
        }
    };
    let (value, d_mu, d_sigma) = if rho == 1.0 {
        let s = ratios::sharpe(mu, rf, sigma)?;
        (s, 1.0 / sigma, -s / sigma)
    } else {
        let m = ratios::market_adaptive_ratio(mu, rf, sigma, rho)?;
        let excess = (mu - rf).abs();
        let d_mu = rho * excess.powf(rho - 1.0) / sigma.powf(1.0 / rho);
        (m, d_mu, -m / (rho * sigma))
    };
    let n = portfolio_returns.len() as f64;
    let sensitivity = portfolio_returns
        .iter()
        .map(|r| d_mu / n + d_sigma * (r - mu) / ((n - 1.0) * sigma))
        .collect();
    Ok(Reward { value, sensitivity, regime_return, rho: regime_return.map(|_| rho) })
}

/// Runs the policy through `window` and scores the realized portfolio returns.
///
/// The return at step `t` is earned by the weights decided at `t − 1`; the
/// decision at `t` only sees returns up to and including `t`.
pub fn episode(params: &PolicyParams, window: &ReturnTable, config: &TrainConfig) -> Result<EpisodeResult> {
    let roll = rollout(params, window, config)?;
    let r = reward(&roll.portfolio_returns, config)?;
    Ok(EpisodeResult {
        weight_path: roll.weights.into_iter().map(WeightVector::normalized).collect::<Result<_>>()?,
        portfolio_returns: roll.portfolio_returns,
        reward: r.value,
        regime_return: r.regime_return,
        rho: r.rho,
    })
}

/// Reward and its exact gradient with respect to every policy parameter.
pub fn value_and_gradient(
    params: &PolicyParams,
    window: &ReturnTable,
    config: &TrainConfig,
) -> Result<(f64, PolicyParams)> {
    let roll = rollout(params, window, config)?;
    let rew = reward(&roll.portfolio_returns, config)?;
    let n = params.n_assets();
    let lags = config.feature_lags;
    let decisions = roll.weights.len();

    let mut g_w = vec![vec![0.0; n]; decisions];
    for (k, &g) in rew.sensitivity.iter().enumerate() {
        let r = window.returns.row(lags + k);
        for i in 0..n {
            g_w[k][i] += g * r[i];
            if config.cost_rate > 0.0 {
                let s = sign(roll.weights[k + 1][i] - roll.weights[k][i]);
                g_w[k][i] += g * config.cost_rate * s;
                g_w[k + 1][i] -= g * config.cost_rate * s;
            }
        }
    }

    let mut grad = PolicyParams::zeros(n, lags);
    let initial = vec![1.0 / n as f64; n];
    for d in (0..decisions).rev() {
        let w = &roll.weights[d];
        let dot: f64 = w.iter().zip(&g_w[d]).map(|(a, b)| a * b).sum();
        let g_s: Vec<f64> = (0..n).map(|i| w[i] * (g_w[d][i] - dot)).collect();
        let prev = if d == 0 { &initial } else { &roll.weights[d - 1] };
        for i in 0..n {
            for k in 0..lags {
                grad.feature_weights[i][k] += g_s[i] * roll.features[d][(i, k)];
            }
            grad.recurrence_weights[i] += g_s[i] * prev[i];
            grad.bias[i] += g_s[i];
        }
        if d > 0 {
            for i in 0..n {
                g_w[d - 1][i] += g_s[i] * params.recurrence_weights[i];
            }
        }
    }
    if !rew.value.is_finite() || grad.to_flat().iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure { epoch: 0, what: "non-finite gradient".into() });
    }
    Ok((rew.value, grad))
}

pub fn gradient(params: &PolicyParams, window: &ReturnTable, config: &TrainConfig) -> Result<PolicyParams> {
    value_and_gradient(params, window, config).map(|(_, g)| g)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Parameters with the best reward seen during training.
    pub params: PolicyParams,
    /// Reward of the parameters evaluated at each epoch.
    pub reward_trace: Vec<f64>,
    pub best_reward: f64,
    /// Regime return the market-adaptive reward was held at.
    pub regime_return: Option<f64>,
}

impl TrainOutcome {
    /// Running maximum of the reward trace.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.reward_trace
            .iter()
            .scan(f64::NEG_INFINITY, |best, r| {
                *best = best.max(*r);
                Some(*best)
            })
            .collect()
    }
}

/// Full-batch gradient ascent for `config.epochs` steps from `params`.
pub fn train(params: &PolicyParams, window: &ReturnTable, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let mut config = config.clone();
    let regime_return = match config.reward_kind {
        RewardKind::Sharpe => None,
        RewardKind::MarketAdaptive => {
            let r = episode(params, window, &config)?.regime_return;
            config.ratio.regime_override = r;
            r
        }
    };
    let mut current = params.clone();
    let mut best = (f64::NEG_INFINITY, params.clone());
    let mut reward_trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (value, grad) = value_and_gradient(&current, window, &config).map_err(|e| match e {
            Error::NumericalFailure { what, .. } => Error::NumericalFailure { epoch, what },
            other => other,
        })?;
        reward_trace.push(value);
        if value > best.0 {
            best = (value, current.clone());
        }
        current.axpy(config.learning_rate, &grad);
    }
    Ok(TrainOutcome { params: best.1, reward_trace, best_reward: best.0, regime_return })
}

/// Trains from the seeded random initialization of `config`.
pub fn train_from_seed(window: &ReturnTable, config: &TrainConfig) -> Result<TrainOutcome> {
    let init = PolicyParams::random(window.n_assets(), config.feature_lags, config.seed);
    train(&init, window, config)
}
