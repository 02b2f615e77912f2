//! Analytic policy gradient against central finite differences.

mod common;

use common::gradient_check as check;
use market_adaptive::rrl::RewardKind;
#[test]
fn sharpe_gradient_matches_finite_differences() {
    let err = check(RewardKind::Sharpe, 0.0, 0..20);
    assert!(err < 1e-4, "max relative error {err:e}");
}

#[test]
fn market_adaptive_gradient_matches_finite_differences() {
    let err = check(RewardKind::MarketAdaptive, 0.0, 100..120);
    assert!(err < 1e-4, "max relative error {err:e}");
}

#[test]
fn gradient_with_turnover_cost_matches_finite_differences() {
    let err = check(RewardKind::MarketAdaptive, 0.002, 200..210);
    assert!(err < 1e-4, "max relative error {err:e}");
    let err = check(RewardKind::Sharpe, 0.002, 300..310);
    assert!(err < 1e-4, "max relative error {err:e}");
}
