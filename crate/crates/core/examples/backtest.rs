// Rolling backtest of all five strategies on a synthetic regime-switching market.
//
// Pass `--full` for default training budgets; the quick default keeps the
// run to a few seconds.

use chrono::NaiveDate;
use market_adaptive::backtest::{run, BacktestConfig, DateRange, Strategy, StrategyKind};
use market_adaptive::cli::metrics_csv;
use market_adaptive::data::{synth_market, SynthAsset, SynthConfig};
use market_adaptive::rrl::TrainConfig;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let full = std::env::args().any(|a| a == "--full");
    let n_days = 252 * 5;
    let cfg = SynthConfig {
        correlation: 0.1,
        ..SynthConfig::new(
            n_days,
            5,
            vec![
                SynthAsset::alternating("EQ", n_days, 126, (0.15, 0.2), (-0.15, 0.2)),
                SynthAsset::constant("CREDIT", n_days, 0.05, 0.10),
                SynthAsset::constant("BOND", n_days, 0.03, 0.05),
            ],
        )
    };
    let prices = synth_market(&cfg)?;

    let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d");
    let train = TrainConfig {
        epochs: if full { 500 } else { 40 },
        ..TrainConfig::default()
    };
    let config = BacktestConfig::new(
        DateRange::new(d("2010-01-01")?, d("2011-12-31")?),
        DateRange::new(d("2012-01-01")?, *prices.dates.last().expect("non-empty")),
        vec![
            Strategy::new(StrategyKind::EqualWeight),
            Strategy::new(StrategyKind::Tangency { window: Some(252) }),
            Strategy::new(StrategyKind::RiskBudgeting {
                window: Some(252),
                budgets: None,
            }),
            Strategy::new(StrategyKind::RrlSharpe { train: train.clone() }),
            Strategy::new(StrategyKind::RrlMarketAdaptive { train }),
        ],
    );
    let report = run(&config, &prices)?;
    println!("{} retraining segments", report.schedule.len());
    print!("{}", metrics_csv(&report));
    for s in &report.strategies {
        let end = s.equity_curve.last().map_or(1.0, |p| p.value);
        println!("{:<20} final equity {end:.4}", s.name);
        for note in &s.notes {
            println!("  note: {note}");
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
