// Regime-switching synthetic prices written to and read back from CSV.

use market_adaptive::data::{load_csv, synth_market, to_returns, write_csv, SynthAsset, SynthConfig};
use market_adaptive::ratios::compute_stats;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let n_days = 1008;
    let cfg = SynthConfig {
        correlation: 0.2,
        ..SynthConfig::new(
            n_days,
            42,
            vec![
                SynthAsset::alternating("EQ", n_days, 126, (0.15, 0.2), (-0.15, 0.2)),
                SynthAsset::constant("BOND", n_days, 0.03, 0.05),
            ],
        )
    };
    let prices = synth_market(&cfg)?;
    let dir = std::env::temp_dir().join(format!("market-adaptive-synth-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("prices.csv");
    write_csv(&prices, &path)?;
    let back = load_csv(&path)?;
    assert_eq!(back, prices);
    println!(
        "{} rows, {} to {}",
        back.n_rows(),
        back.dates[0],
        back.dates[back.n_rows() - 1]
    );

    let returns = to_returns(&back)?;
    for (i, name) in returns.assets.iter().enumerate() {
        let col = returns.column(i);
        for (seg, chunk) in col.chunks(126).enumerate().take(4) {
            let s = compute_stats(chunk, 0.0)?;
            println!("{name} segment {seg}: annualized mean {:+.3}", s.mean * 252.0);
        }
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
