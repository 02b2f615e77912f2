// Trains a softmax allocation policy by gradient ascent on a window-level
// Sharpe or market-adaptive reward.

use market_adaptive::data::{synth_market, to_returns, SynthAsset, SynthConfig};
use market_adaptive::rrl::{episode, train_from_seed, RewardKind, TrainConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let n_days = 504;
    let cfg = SynthConfig::new(
        n_days,
        3,
        vec![
            SynthAsset::alternating("EQ", n_days, 126, (0.15, 0.2), (-0.15, 0.2)),
            SynthAsset::constant("BOND", n_days, 0.03, 0.05),
        ],
    );
    let window = to_returns(&synth_market(&cfg)?)?;

    for kind in [RewardKind::Sharpe, RewardKind::MarketAdaptive] {
        let config = TrainConfig {
            epochs: 60,
            learning_rate: 0.2,
            reward_kind: kind,
            seed: 7,
            ..TrainConfig::default()
        };
        let outcome = train_from_seed(&window, &config)?;
        let first = outcome.reward_trace[0];
        println!(
            "{kind:?}: reward {first:.5} -> best {:.5} over {} epochs",
            outcome.best_reward,
            outcome.reward_trace.len()
        );
        if let Some(r) = outcome.regime_return {
            println!("  regime return held at {r:.4}");
        }
        let ep = episode(&outcome.params, &window, &config)?;
        let last = ep.weight_path.last().expect("non-empty path");
        println!("  final weights [{:.3}, {:.3}]", last[0], last[1]);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
