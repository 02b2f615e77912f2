mod common;

use chrono::Days;
use common::d;
use market_adaptive::allocators::{
    equal_budgets, estimate_moments, risk_budgeting, risk_contributions, tangency, MomentEstimate, WeightVector,
};
use market_adaptive::data::{align, parse_csv, to_returns, PriceTable, ReturnTable};
use market_adaptive::ratios::{beta, market_adaptive_ratio, rho, sharpe, sortino, treynor};
use market_adaptive::rrl::{episode, forward, PolicyParams, RewardKind, TrainConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn cov_from(factors: &[f64], n: usize, ridge: f64) -> DMatrix<f64> {
    let a = DMatrix::from_column_slice(n, n, &factors[..n * n]);
    &a * a.transpose() * 0.01 + DMatrix::identity(n, n) * ridge
}

fn prices_from(rows: &[Vec<f64>], first: chrono::NaiveDate) -> PriceTable {
    let n = rows[0].len();
    let dates = (0..rows.len()).map(|i| first + Days::new(i as u64)).collect();
    let assets = (0..n).map(|i| format!("P{i}")).collect();
    let m = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
    PriceTable::new(dates, assets, m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rho_stays_in_open_interval(r in -5.0..5.0f64, alpha in 0.01..50.0f64, dr in 1e-6..1.0f64) {
        let a = rho(r, alpha).unwrap();
        prop_assert!(a > 0.0 && a < 2.0);
        prop_assert!((a + rho(-r, alpha).unwrap() - 2.0).abs() < 1e-12);
        prop_assert!(rho(r + dr, alpha).unwrap() >= a);
        prop_assert_eq!(rho(0.0, alpha).unwrap(), 1.0);
    }

    #[test]
    fn unit_rho_is_sharpe(mu in -1.0..1.0f64, rf in -0.1..0.1f64, sigma in 1e-4..10.0f64) {
        let m = market_adaptive_ratio(mu, rf, sigma, 1.0).unwrap();
        prop_assert!((m - sharpe(mu, rf, sigma).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fixed_sharpe_family_direction(rho_v in 0.05..1.95f64, s in 1.01..7.9f64) {
        prop_assume!((rho_v - 1.0).abs() > 1e-3);
        let m1 = market_adaptive_ratio(s, 0.0, s, rho_v).unwrap();
        let m2 = market_adaptive_ratio(s + 0.1, 0.0, s + 0.1, rho_v).unwrap();
        if rho_v > 1.0 { prop_assert!(m2 > m1) } else { prop_assert!(m2 < m1) }
        prop_assert!((market_adaptive_ratio(1.0, 0.0, 1.0, rho_v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn excess_sign_antisymmetry(x in 0.0..2.0f64, rf in -0.05..0.05f64, sigma in 0.01..5.0f64, rho_v in 0.1..1.9f64) {
        let up = market_adaptive_ratio(rf + x, rf, sigma, rho_v).unwrap();
        let down = market_adaptive_ratio(rf - x, rf, sigma, rho_v).unwrap();
        prop_assert!((up + down).abs() <= 1e-9 * up.abs().max(1.0));
    }

    #[test]
    fn classical_ratios_shift_invariant(mu in -0.5..0.5f64, rf in -0.05..0.05f64, c in -1.0..1.0f64, s in 0.01..2.0f64) {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        prop_assert!(close(sharpe(mu, rf, s).unwrap(), sharpe(mu + c, rf + c, s).unwrap()));
        prop_assert!(close(treynor(mu, rf, s).unwrap(), treynor(mu + c, rf + c, s).unwrap()));
        prop_assert!(close(sortino(mu, rf, s).unwrap(), sortino(mu + c, rf + c, s).unwrap()));
    }

    #[test]
    fn beta_of_affine_map(x in prop::collection::vec(-0.05..0.05f64, 10..60), a in prop_oneof![-3.0..-0.1f64, 0.1..3.0f64], b in -0.01..0.01f64) {
        let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        prop_assert!((beta(&y, &x).unwrap() - a).abs() < 1e-9);
    }

    #[test]
    fn tangency_ignores_excess_scale(f in prop::collection::vec(-1.0..1.0f64, 9), mu in prop::collection::vec(-0.02..0.05f64, 3), c in 0.1..10.0f64) {
        let cov = cov_from(&f, 3, 1e-3);
        let rf = 0.001;
        let base = MomentEstimate { mean: DVector::from_vec(mu.clone()), covariance: cov.clone(), window: 100 };
        let scaled = MomentEstimate { mean: DVector::from_iterator(3, mu.iter().map(|m| rf + c * (m - rf))), covariance: cov, window: 100 };
        match (tangency(&base, rf), tangency(&scaled, rf)) {
            (Ok(a), Ok(b)) => for i in 0..3 { prop_assert!((a[i] - b[i]).abs() < 1e-8) },
            (Err(ea), Err(eb)) => prop_assert_eq!(ea, eb),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn risk_parity_uncorrelated_is_inverse_vol(vols in prop::collection::vec(0.01..0.5f64, 2..6)) {
        let n = vols.len();
        let cov = DMatrix::from_diagonal(&DVector::from_iterator(n, vols.iter().map(|v| v * v)));
        let w = risk_budgeting(&cov, &equal_budgets(n)).unwrap();
        let inv: f64 = vols.iter().map(|v| 1.0 / v).sum();
        for i in 0..n {
            prop_assert!((w[i] - 1.0 / vols[i] / inv).abs() < 1e-8);
        }
    }

    #[test]
    fn risk_contributions_add_up(f in prop::collection::vec(-1.0..1.0f64, 16), raw in prop::collection::vec(0.01..1.0f64, 4)) {
        let cov = cov_from(&f, 4, 1e-4);
        let total: f64 = raw.iter().sum();
        let w = WeightVector::new(raw.iter().map(|x| x / total).collect()).unwrap();
        let rc = risk_contributions(&cov, &w).unwrap();
        let x = w.to_dvector();
        let vol = (x.transpose() * &cov * &x)[(0, 0)].sqrt();
        prop_assert!((rc.iter().sum::<f64>() - vol).abs() < 1e-12);
    }

    #[test]
    fn moment_covariance_is_psd(rows in prop::collection::vec(prop::collection::vec(-0.05..0.05f64, 3), 4..40)) {
        let n = rows.len();
        let table = ReturnTable {
            dates: (0..n).map(|i| d("2020-01-01") + Days::new(i as u64)).collect(),
            assets: vec!["a".into(), "b".into(), "c".into()],
            returns: DMatrix::from_fn(n, 3, |r, c| rows[r][c]),
        };
        let m = estimate_moments(&table, n).unwrap();
        prop_assert_eq!(&m.covariance, &m.covariance.transpose());
        prop_assert!(m.covariance.clone().symmetric_eigen().eigenvalues.min() > -1e-10);
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(0.01..1000.0f64, 2), 1..30)) {
        let t = prices_from(&rows, d("2019-03-01"));
        let text = t.to_csv_string();
        let back = parse_csv(&text).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(back.to_csv_string(), text);
    }

    #[test]
    fn align_is_idempotent(a in prop::collection::vec(prop::collection::vec(1.0..10.0f64, 1), 3..20), skip in 0..5u64) {
        let x = prices_from(&a, d("2020-01-01"));
        let mut y = prices_from(&a, d("2020-01-01") + Days::new(skip));
        y.assets = vec!["Q0".into()];
        let once = match align(&[x, y]) {
            Ok(t) => t,
            Err(e) => {
                prop_assert!(skip as usize >= a.len(), "{}", e);
                return Ok(());
            }
        };
        let twice = align(std::slice::from_ref(&once)).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn returns_compound_to_price_ratio(rows in prop::collection::vec(prop::collection::vec(0.5..2.0f64, 2), 2..60)) {
        let t = prices_from(&rows, d("2020-01-01"));
        let r = to_returns(&t).unwrap();
        for c in 0..2 {
            let g: f64 = r.column(c).iter().map(|x| 1.0 + x).product();
            let ratio = rows[rows.len() - 1][c] / rows[0][c];
            prop_assert!((g - ratio).abs() <= 1e-12 * ratio.max(1.0));
        }
    }

    #[test]
    fn softmax_ignores_common_shift(flat in prop::collection::vec(-3.0..3.0f64, 15), feats in prop::collection::vec(-0.1..0.1f64, 9), shift in -50.0..50.0f64) {
        let params = PolicyParams::from_flat(3, 3, &flat).unwrap();
        let mut shifted = params.clone();
        for b in &mut shifted.bias {
            *b += shift;
        }
        let features = DMatrix::from_row_slice(3, 3, &feats);
        let prev = WeightVector::equal(3).unwrap();
        let a = forward(&params, &features, &prev).unwrap();
        let b = forward(&shifted, &features, &prev).unwrap();
        for i in 0..3 {
            prop_assert!((a[i] - b[i]).abs() < 1e-12);
        }
        let argmax = |w: &WeightVector| (0..3).max_by(|i, j| w[*i].total_cmp(&w[*j])).unwrap();
        prop_assert_eq!(argmax(&a), argmax(&b));
    }

    #[test]
    fn episode_has_no_look_ahead(seed in 0..1000u64, cut in 0..20usize, cost in prop_oneof![Just(0.0), Just(0.003)]) {
        let params = PolicyParams::random(2, 4, seed);
        let n = 4 + 20;
        let table = |scramble: bool| ReturnTable {
            dates: (0..n).map(|i| d("2020-01-01") + Days::new(i as u64)).collect(),
            assets: vec!["a".into(), "b".into()],
            returns: DMatrix::from_fn(n, 2, |r, c| {
                let base = ((r * 7 + c * 3 + seed as usize) % 11) as f64 * 0.004 - 0.02;
                if scramble && r > 4 + cut { -base * 1.7 + 0.01 } else { base }
            }),
        };
        for kind in [RewardKind::Sharpe, RewardKind::MarketAdaptive] {
            let cfg = TrainConfig { feature_lags: 4, reward_kind: kind, cost_rate: cost, ..TrainConfig::default() };
            let a = episode(&params, &table(false), &cfg).unwrap();
            let b = episode(&params, &table(true), &cfg).unwrap();
            prop_assert_eq!(&a.portfolio_returns[..=cut], &b.portfolio_returns[..=cut]);
        }
    }
}
