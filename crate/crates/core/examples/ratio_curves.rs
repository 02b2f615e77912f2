// Market-adaptive ratio along the fixed-Sharpe family `mu - rf = sigma`.
//
// Every point on the family has Sharpe 1. In a bull regime the ratio rewards
// taking more risk, in a bear regime it penalizes it.

use market_adaptive::cli::RatioGrid;
use market_adaptive::ratios::{market_adaptive_ratio, rho};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    println!("regime coefficient rho for alpha = 5");
    for r in [-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2] {
        println!("  R = {r:+.2}  rho = {:.4}", rho(r, 5.0)?);
    }

    let grid = RatioGrid {
        alpha: 5.0,
        risk_free: 0.0,
        regimes: vec![0.10, 0.02, -0.02, -0.10],
        sigma_min: 1.0,
        sigma_max: 8.0,
        steps: 8,
    };
    print!("\n{}", grid.to_csv()?);

    let bull = market_adaptive_ratio(8.0, 0.0, 8.0, rho(0.10, 5.0)?)?;
    let bear = market_adaptive_ratio(8.0, 0.0, 8.0, rho(-0.10, 5.0)?)?;
    println!("\nat sigma = 8: bull {bull:.2}, bear {bear:.2}");
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
