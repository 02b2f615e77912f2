// Classical risk-adjusted ratios of a portfolio against a benchmark.

use market_adaptive::ratios::{self, BenchmarkStats, RatioConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let benchmark = [
        0.010, -0.004, 0.006, -0.012, 0.008, 0.003, -0.002, 0.011, -0.007, 0.004,
    ];
    // a levered version of the benchmark plus a little noise
    let noise = [
        0.001, -0.0005, 0.0, 0.0008, -0.001, 0.0002, 0.0004, -0.0003, 0.0, 0.0006,
    ];
    let portfolio: Vec<f64> = benchmark
        .iter()
        .zip(noise)
        .map(|(b, e)| 1.5 * b + 0.0005 + e)
        .collect();
    let rf = 0.0001;

    let stats = ratios::compute_stats(&portfolio, rf)?;
    let bench = BenchmarkStats::compute(&portfolio, &benchmark)?;
    println!(
        "mean {:.6}  std {:.6}  downside {:.6}",
        stats.mean, stats.std, stats.downside_dev
    );
    println!(
        "beta {:.4}  tracking error {:.6}",
        bench.beta, bench.tracking_error
    );
    println!("sharpe   {:.4}", ratios::sharpe(stats.mean, rf, stats.std)?);
    println!("treynor  {:.6}", ratios::treynor(stats.mean, rf, bench.beta)?);
    println!(
        "sortino  {:.4}",
        ratios::sortino(stats.mean, rf, stats.downside_dev)?
    );
    println!(
        "info     {:.4}",
        ratios::information_ratio(&portfolio, &benchmark)?
    );

    let cfg = RatioConfig {
        regime_lookback: 5,
        ..RatioConfig::default()
    };
    let r = ratios::regime_return(&portfolio, cfg.regime_lookback)?;
    let rho = cfg.rho_for(&portfolio)?;
    let m = ratios::market_adaptive_ratio(stats.mean, rf, stats.std, rho)?;
    println!("trailing regime {r:.4}  rho {rho:.4}  market-adaptive {m:.4}");
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
