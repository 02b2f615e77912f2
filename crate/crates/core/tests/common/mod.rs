#![allow(dead_code)]

use chrono::NaiveDate;
use market_adaptive::data::{synth_market, PriceTable, ReturnTable, SynthAsset, SynthConfig};
use market_adaptive::rrl::{episode, value_and_gradient, PolicyParams, RewardKind, TrainConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn d(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

/// Two-asset regime-switching market: an equity alternating between
/// 126-day bull and bear segments and a steady bond.
pub fn regime_market(n_days: usize, seed: u64) -> PriceTable {
    synth_market(&SynthConfig::new(
        n_days,
        seed,
        vec![
            SynthAsset::alternating("EQ", n_days, 126, (0.15, 0.2), (-0.15, 0.2)),
            SynthAsset::constant("BOND", n_days, 0.03, 0.05),
        ],
    ))
    .unwrap()
}

const STEP: f64 = 1e-6;
/// Components smaller than this are compared in absolute terms.
const FLOOR: f64 = 1e-6;

pub fn random_window(rng: &mut ChaCha8Rng, rows: usize, assets: usize) -> ReturnTable {
    let start = d("2020-01-01");
    ReturnTable {
        dates: (0..rows).map(|i| start + chrono::Days::new(i as u64)).collect(),
        assets: (0..assets).map(|i| format!("A{i}")).collect(),
        returns: DMatrix::from_fn(rows, assets, |_, c| {
            0.0005 * (c as f64 + 1.0) + rng.random_range(-0.03..0.03)
        }),
    }
}

pub fn random_params(rng: &mut ChaCha8Rng, assets: usize, lags: usize) -> PolicyParams {
    let flat: Vec<f64> = (0..assets * (lags + 2)).map(|_| rng.random_range(-2.0..2.0)).collect();
    PolicyParams::from_flat(assets, lags, &flat).unwrap()
}

/// Largest componentwise relative error between the analytic gradient and
/// central differences, with the regime coefficient frozen at its base value.
pub fn max_relative_error(params: &PolicyParams, window: &ReturnTable, config: &TrainConfig) -> f64 {
    let base = episode(params, window, config).unwrap();
    let mut frozen = config.clone();
    if config.reward_kind == RewardKind::MarketAdaptive {
        frozen.ratio.regime_override = base.regime_return;
    }
    let (_, grad) = value_and_gradient(params, window, &frozen).unwrap();
    let analytic = grad.to_flat();
    let flat = params.to_flat();
    let (n, l) = (params.n_assets(), params.n_lags());
    let reward_at = |v: &[f64]| {
        let p = PolicyParams::from_flat(n, l, v).unwrap();
        episode(&p, window, &frozen).unwrap().reward
    };
    let mut worst: f64 = 0.0;
    for j in 0..flat.len() {
        let mut up = flat.clone();
        let mut down = flat.clone();
        up[j] += STEP;
        down[j] -= STEP;
        let fd = (reward_at(&up) - reward_at(&down)) / (2.0 * STEP);
        let denom = analytic[j].abs().max(fd.abs()).max(FLOOR);
        worst = worst.max((analytic[j] - fd).abs() / denom);
    }
    worst
}

/// Worst gradient error over `seeds` random 2-asset, 30-step instances.
pub fn gradient_check(kind: RewardKind, cost_rate: f64, seeds: std::ops::Range<u64>) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lags = 3;
        let window = random_window(&mut rng, 30 + lags, 2);
        let params = random_params(&mut rng, 2, lags);
        let mut config = TrainConfig { feature_lags: lags, reward_kind: kind, cost_rate, ..Default::default() };
        config.ratio.regime_lookback = 10;
        worst = worst.max(max_relative_error(&params, &window, &config));
    }
    worst
}
