mod common;

use market_adaptive::data::{synth_market, to_returns, SynthAsset, SynthConfig};
use market_adaptive::rrl::{episode, train, train_from_seed, PolicyParams, RewardKind, TrainConfig};

fn dominance_window() -> market_adaptive::data::ReturnTable {
    let n = 504;
    let cfg = SynthConfig {
        correlation: 0.5,
        ..SynthConfig::new(
            n,
            17,
            vec![SynthAsset::constant("WIN", n, 0.40, 0.10), SynthAsset::constant("LOSE", n, -0.20, 0.10)],
        )
    };
    to_returns(&synth_market(&cfg).unwrap()).unwrap()
}

#[test]
fn trained_policy_prefers_dominant_asset() {
    let window = dominance_window();
    let col = |i: usize| window.column(i).iter().sum::<f64>();
    assert!(col(0) > col(1), "construction: first asset must dominate");
    for kind in [RewardKind::Sharpe, RewardKind::MarketAdaptive] {
        let cfg = TrainConfig { epochs: 100, feature_lags: 5, reward_kind: kind, seed: 2, ..TrainConfig::default() };
        let out = train_from_seed(&window, &cfg).unwrap();
        let ep = episode(&out.params, &window, &cfg).unwrap();
        let mean_w0 = ep.weight_path.iter().map(|w| w[0]).sum::<f64>() / ep.weight_path.len() as f64;
        assert!(mean_w0 > 0.5, "{kind:?}: mean weight {mean_w0}");
        assert!(out.best_reward >= out.reward_trace[0]);
    }
}

#[test]
fn training_is_deterministic() {
    let window = dominance_window();
    let cfg = TrainConfig { epochs: 25, feature_lags: 3, reward_kind: RewardKind::MarketAdaptive, seed: 5, ..TrainConfig::default() };
    let a = train_from_seed(&window, &cfg).unwrap();
    let b = train_from_seed(&window, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_regime_market_adaptive_training_equals_sharpe() {
    let window = to_returns(&common::regime_market(300, 8)).unwrap();
    let start = PolicyParams::random(2, 4, 99);
    let mut cfg = TrainConfig { epochs: 40, feature_lags: 4, learning_rate: 0.3, ..TrainConfig::default() };
    cfg.ratio.regime_override = Some(0.0);
    let sharpe = train(&start, &window, &cfg).unwrap();
    cfg.reward_kind = RewardKind::MarketAdaptive;
    let mar = train(&start, &window, &cfg).unwrap();
    assert_eq!(sharpe.reward_trace, mar.reward_trace);
    assert_eq!(sharpe.params, mar.params);
    assert_eq!(mar.regime_return, Some(0.0));
}
