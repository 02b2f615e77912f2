// Equal weight, long-only tangency and risk budgeting on estimated moments.

use market_adaptive::allocators::{
    equal_budgets, equal_weight, estimate_moments, risk_budgeting, risk_contributions, tangency,
};
use market_adaptive::data::{synth_market, to_returns, SynthAsset, SynthConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let n_days = 750;
    let cfg = SynthConfig {
        correlation: 0.3,
        ..SynthConfig::new(
            n_days,
            11,
            vec![
                SynthAsset::constant("GROWTH", n_days, 0.12, 0.30),
                SynthAsset::constant("VALUE", n_days, 0.08, 0.18),
                SynthAsset::constant("BOND", n_days, 0.03, 0.06),
            ],
        )
    };
    let returns = to_returns(&synth_market(&cfg)?)?;
    let moments = estimate_moments(&returns, 500)?;

    let show = |label: &str, w: &[f64]| {
        let cells: Vec<String> = w.iter().map(|x| format!("{x:.4}")).collect();
        println!("{label:<15} [{}]", cells.join(", "));
    };
    show("equal weight", equal_weight(3)?.as_slice());
    show("tangency", tangency(&moments, 0.0)?.as_slice());

    let rb = risk_budgeting(&moments.covariance, &equal_budgets(3))?;
    show("risk parity", rb.as_slice());
    let rc = risk_contributions(&moments.covariance, &rb)?;
    let total: f64 = rc.iter().sum();
    let shares: Vec<f64> = rc.iter().map(|c| c / total).collect();
    show("  risk shares", &shares);

    let tilted = risk_budgeting(&moments.covariance, &[0.5, 0.3, 0.2])?;
    show("budget 5/3/2", tilted.as_slice());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
