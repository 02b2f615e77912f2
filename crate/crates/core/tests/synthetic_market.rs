mod common;

use market_adaptive::data::{synth_market, to_returns, SynthAsset, SynthConfig};
use market_adaptive::ratios::regime_return;

#[test]
fn long_single_regime_recovers_drift_and_vol() {
    let n = 100_000;
    let cfg = SynthConfig::new(n, 0, vec![SynthAsset::constant("X", n, 0.05, 0.2)]);
    let p = synth_market(&cfg).unwrap();
    let logs: Vec<f64> = (1..p.n_rows()).map(|r| (p.prices[(r, 0)] / p.prices[(r - 1, 0)]).ln()).collect();
    let mean = logs.iter().sum::<f64>() / n as f64;
    let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let drift = mean * 252.0;
    let vol = (var * 252.0).sqrt();
    assert!((drift - 0.05).abs() < 0.01, "drift {drift}");
    assert!((vol - 0.2).abs() < 0.005, "vol {vol}");
}

#[test]
fn same_seed_same_table() {
    assert_eq!(common::regime_market(400, 3), common::regime_market(400, 3));
    assert_ne!(common::regime_market(400, 3), common::regime_market(400, 4));
}

#[test]
fn strong_bull_segments_end_with_positive_regime_return() {
    let n = 126 * 8;
    let cfg = SynthConfig::new(n, 12, vec![SynthAsset::alternating("EQ", n, 126, (1.5, 0.1), (-1.5, 0.1))]);
    let r = to_returns(&synth_market(&cfg).unwrap()).unwrap().column(0);
    for seg in 0..8 {
        let end = (seg + 1) * 126;
        let trailing = regime_return(&r[..end], 21).unwrap();
        if seg % 2 == 0 {
            assert!(trailing > 0.0, "bull segment {seg}: {trailing}");
        } else {
            assert!(trailing < 0.0, "bear segment {seg}: {trailing}");
        }
    }
}
