//! Benchmark allocators: equal weight, long-only tangency and risk budgeting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::ReturnTable;
use crate::error::{Error, Result};

/// Condition number above which a covariance matrix is treated as singular.
pub const CONDITION_CAP: f64 = 1e12;

const SUM_TOLERANCE: f64 = 1e-10;

/// Supports are enumerated exhaustively by the long-only tangency fallback.
const MAX_TANGENCY_ASSETS: usize = 20;

/// Long-only, fully invested allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("weight vector is empty".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidInput(format!("weight {w} is negative or non-finite")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    /// Normalizes non-negative scores to sum to one.
    pub(crate) fn normalized(raw: Vec<f64>) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidInput("cannot normalize weights with zero sum".into()));
        }
        Self::new(raw.into_iter().map(|w| w / sum).collect())
    }

    pub fn equal(n: usize) -> Result<Self> {
        equal_weight(n)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Sample moments of asset returns over a trailing window.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub window: usize,
}

/// Sample mean vector and (n − 1) covariance of the last `window` rows.
pub fn estimate_moments(returns: &ReturnTable, window: usize) -> Result<MomentEstimate> {
    let rows = returns.n_rows();
    if window < 2 || window > rows {
        return Err(Error::InsufficientData(format!(
            "moment window {window} needs 2..={rows} rows"
        )));
    }
    let x = returns.returns.rows(rows - window, window);
    let mean = x.row_mean().transpose();
    let centered = DMatrix::from_fn(window, x.ncols(), |r, c| x[(r, c)] - mean[c]);
    let mut covariance = centered.transpose() * &centered / (window - 1) as f64;
    covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(MomentEstimate { mean, covariance, window })
}

pub fn equal_weight(n_assets: usize) -> Result<WeightVector> {
    if n_assets == 0 {
        return Err(Error::InvalidInput("equal weight needs at least one asset".into()));
    }
    Ok(WeightVector(vec![1.0 / n_assets as f64; n_assets]))
}

fn condition_number(cov: &DMatrix<f64>) -> f64 {
    let eig = cov.clone().symmetric_eigen().eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn portfolio_sharpe(w: &DVector<f64>, excess: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    w.dot(excess) / (w.dot(&(cov * w))).sqrt()
}

/// Long-only maximum-Sharpe portfolio.
///
/// When the unconstrained solution `Σ⁻¹(μ − r_f)` is already long-only it is
/// returned normalized. Otherwise every support set is solved on its own face
/// of the simplex and the best feasible candidate wins; the optimum lies on
/// exactly one such face, so this is exact.
pub fn tangency(moments: &MomentEstimate, risk_free: f64) -> Result<WeightVector> {
    let n = moments.mean.len();
    if n == 0 || moments.covariance.shape() != (n, n) {
        return Err(Error::InvalidInput("moment dimensions disagree".into()));
    }
    let excess = moments.mean.map(|m| m - risk_free);
    if excess.iter().all(|e| *e <= 0.0) {
        return Err(Error::NoTangency);
    }
    let cond = condition_number(&moments.covariance);
    if !(cond < CONDITION_CAP) {
        return Err(Error::SingularMatrix(cond));
    }
    let full = moments
        .covariance
        .clone()
        .lu()
        .solve(&excess)
        .ok_or(Error::SingularMatrix(cond))?;
    if full.iter().all(|w| *w >= 0.0) && full.sum() > 0.0 {
        return WeightVector::normalized(full.iter().copied().collect());
    }
    if n > MAX_TANGENCY_ASSETS {
        return Err(Error::InvalidInput(format!(
            "long-only tangency supports at most {MAX_TANGENCY_ASSETS} assets"
        )));
    }

    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let k = support.len();
        let sub_cov = DMatrix::from_fn(k, k, |a, b| moments.covariance[(support[a], support[b])]);
        let sub_excess = DVector::from_fn(k, |a, _| excess[support[a]]);
        let Some(y) = sub_cov.lu().solve(&sub_excess) else { continue };
        if y.iter().any(|v| *v <= 0.0) {
            continue;
        }
        let mut w = DVector::zeros(n);
        let total = y.sum();
        for (a, &i) in support.iter().enumerate() {
            w[i] = y[a] / total;
        }
        let s = portfolio_sharpe(&w, &excess, &moments.covariance);
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, w));
        }
    }
    let (_, w) = best.ok_or(Error::NoTangency)?;
    WeightVector::normalized(w.iter().copied().collect())
}

/// Per-asset contributions `w_i (Σw)_i / sqrt(wᵀΣw)`; they sum to the portfolio volatility.
pub fn risk_contributions(covariance: &DMatrix<f64>, weights: &WeightVector) -> Result<Vec<f64>> {
    let n = weights.len();
    if covariance.shape() != (n, n) {
        return Err(Error::InvalidInput(format!(
            "covariance is {:?} but there are {n} weights",
            covariance.shape()
        )));
    }
    let w = weights.to_dvector();
    let marginal = covariance * &w;
    let variance = w.dot(&marginal);
    if !(variance > 0.0) {
        return Err(Error::DegeneratePortfolio);
    }
    let vol = variance.sqrt();
    Ok((0..n).map(|i| w[i] * marginal[i] / vol).collect())
}

/// Solver settings for [`risk_budgeting_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskBudgetSolver {
    pub max_sweeps: usize,
    /// Stop once no weight moves by more than this in a sweep.
    pub weight_tolerance: f64,
    /// Required accuracy of the relative risk contributions.
    pub budget_tolerance: f64,
}

impl Default for RiskBudgetSolver {
    fn default() -> Self {
        Self { max_sweeps: 10_000, weight_tolerance: 1e-10, budget_tolerance: 1e-8 }
    }
}

/// Largest deviation between relative risk contributions and target budgets.
pub fn budget_residual(covariance: &DMatrix<f64>, weights: &WeightVector, budgets: &[f64]) -> Result<f64> {
    let rc = risk_contributions(covariance, weights)?;
    let vol: f64 = rc.iter().sum();
    Ok(rc
        .iter()
        .zip(budgets)
        .map(|(r, b)| (r / vol - b).abs())
        .fold(0.0, f64::max))
}

pub fn risk_budgeting(covariance: &DMatrix<f64>, budgets: &[f64]) -> Result<WeightVector> {
    risk_budgeting_with(covariance, budgets, RiskBudgetSolver::default())
}

/// Risk budgeting by cyclical coordinate descent.
///
/// Minimizes `½ yᵀΣy − Σ b_i ln y_i`, whose stationary point satisfies
/// `y_i (Σy)_i = b_i`; normalizing `y` then gives relative risk contributions
/// equal to the budgets. Each coordinate step is the positive root of a
/// quadratic. Starts from inverse-volatility weights.
pub fn risk_budgeting_with(
    covariance: &DMatrix<f64>,
    budgets: &[f64],
    solver: RiskBudgetSolver,
) -> Result<WeightVector> {
    let n = budgets.len();
    if n == 0 || covariance.shape() != (n, n) {
        return Err(Error::InvalidInput("covariance and budgets disagree in size".into()));
    }
    if budgets.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::InvalidInput("risk budgets must be strictly positive".into()));
    }
    let total: f64 = budgets.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidInput(format!("risk budgets sum to {total}, not 1")));
    }
    if covariance.iter().any(|v| !v.is_finite()) || covariance.clone().cholesky().is_none() {
        return Err(Error::InvalidCovariance);
    }

    let inv_vol = DVector::from_fn(n, |i, _| 1.0 / covariance[(i, i)].sqrt());
    let scale = (1.0 / inv_vol.dot(&(covariance * &inv_vol))).sqrt();
    let mut y = inv_vol * scale;
    let mut w = &y / y.sum();
    let mut residual = f64::INFINITY;
    for _ in 0..solver.max_sweeps {
        for i in 0..n {
            let sii = covariance[(i, i)];
            let cross: f64 = (0..n).filter(|&j| j != i).map(|j| covariance[(i, j)] * y[j]).sum();
            y[i] = (-cross + (cross * cross + 4.0 * sii * budgets[i]).sqrt()) / (2.0 * sii);
        }
        let next = &y / y.sum();
        let change = (&next - &w).amax();
        w = next;
        if change < solver.weight_tolerance {
            let candidate = WeightVector::normalized(w.iter().copied().collect())?;
            residual = budget_residual(covariance, &candidate, budgets)?;
            if residual < solver.budget_tolerance {
                return Ok(candidate);
            }
        }
    }
    if residual.is_infinite() {
        let candidate = WeightVector::normalized(w.iter().copied().collect())?;
        residual = budget_residual(covariance, &candidate, budgets)?;
    }
    Err(Error::ConvergenceFailure { sweeps: solver.max_sweeps, residual })
}

/// Equal budgets for `n` assets.
pub fn equal_budgets(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}
