//! Rolling-window backtesting.
//!
//! The protocol: fit every strategy on a pretraining span, trade it through
//! the next test segment, then extend the training span to the end of that
//! segment and repeat (an expanding window). Inside a test segment positions
//! are reset to the strategy's target weights on the first trading day of every
//! rebalance period and drift with prices in between.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Days, Months, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocators::{self, WeightVector};
use crate::data::{self, PriceTable, ReturnTable};
use crate::error::{Error, Result};
use crate::ratios;
use crate::rrl::{self, PolicyParams, RewardKind, TrainConfig};

/// Inclusive calendar date range, serialized as `["YYYY-MM-DD", "YYYY-MM-DD"]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(NaiveDate, NaiveDate)", into = "(NaiveDate, NaiveDate)")]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

impl From<(NaiveDate, NaiveDate)> for DateRange {
    fn from((start, end): (NaiveDate, NaiveDate)) -> Self {
        Self { start, end }
    }
}

impl From<DateRange> for (NaiveDate, NaiveDate) {
    fn from(r: DateRange) -> Self {
        (r.start, r.end)
    }
}

impl fmt::Display for DateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..={}", self.start, self.end)
    }
}

/// Calendar period written as `<n>M` or `<n>Y`, e.g. `1M`, `3M`, `1Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Period {
    months: u32,
}

impl Period {
    pub const MONTHLY: Period = Period { months: 1 };
    pub const ANNUAL: Period = Period { months: 12 };

    pub fn months(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("period must be at least one month".into()));
        }
        Ok(Self { months: n })
    }

    pub fn advance(&self, d: NaiveDate) -> NaiveDate {
        d.checked_add_months(Months::new(self.months)).expect("date in range")
    }

    /// Index of the period containing `d` when periods are anchored at `anchor`'s month.
    fn bucket(&self, anchor: NaiveDate, d: NaiveDate) -> i64 {
        let month_index = |x: NaiveDate| x.year() as i64 * 12 + x.month0() as i64;
        (month_index(d) - month_index(anchor)).div_euclid(self.months as i64)
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.months % 12 == 0 {
            write!(f, "{}Y", self.months / 12)
        } else {
            write!(f, "{}M", self.months)
        }
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad period `{s}` (expected e.g. 1M, 3M, 1Y)"));
        let (num, unit) = s.split_at(s.len().saturating_sub(1));
        let n: u32 = num.parse().map_err(|_| bad())?;
        match unit {
            "M" | "m" => Period::months(n),
            "Y" | "y" => Period::months(n.checked_mul(12).ok_or_else(bad)?),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for Period {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Period> for String {
    fn from(p: Period) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    EqualWeight,
    Tangency {
        /// Trailing rows for moment estimation; all history when absent.
        #[serde(default)]
        window: Option<usize>,
    },
    RiskBudgeting {
        #[serde(default)]
        window: Option<usize>,
        /// Per-asset risk budgets; equal when absent.
        #[serde(default)]
        budgets: Option<Vec<f64>>,
    },
    RrlSharpe {
        #[serde(default)]
        train: TrainConfig,
    },
    RrlMarketAdaptive {
        #[serde(default)]
        train: TrainConfig,
    },
}

impl StrategyKind {
    pub fn default_name(&self) -> &'static str {
        match self {
            StrategyKind::EqualWeight => "equal_weight",
            StrategyKind::Tangency { .. } => "tangency",
            StrategyKind::RiskBudgeting { .. } => "risk_budgeting",
            StrategyKind::RrlSharpe { .. } => "rrl_sharpe",
            StrategyKind::RrlMarketAdaptive { .. } => "rrl_market_adaptive",
        }
    }

    /// Training config with the reward fixed by the strategy kind.
    fn rrl_config(&self) -> Option<TrainConfig> {
        match self {
            StrategyKind::RrlSharpe { train } => {
                Some(TrainConfig { reward_kind: RewardKind::Sharpe, ..train.clone() })
            }
            StrategyKind::RrlMarketAdaptive { train } => {
                Some(TrainConfig { reward_kind: RewardKind::MarketAdaptive, ..train.clone() })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    /// Output name; defaults to the kind's snake-case name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub kind: StrategyKind,
}

impl Strategy {
    pub fn new(kind: StrategyKind) -> Self {
        Self { name: None, kind }
    }

    pub fn named(name: &str, kind: StrategyKind) -> Self {
        Self { name: Some(name.to_owned()), kind }
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or_else(|| self.kind.default_name())
    }
}

fn default_annualization() -> f64 {
    252.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestConfig {
    pub pretrain: DateRange,
    pub test: DateRange,
    #[serde(default = "annual")]
    pub retrain_every: Period,
    #[serde(default = "monthly")]
    pub rebalance_every: Period,
    #[serde(default)]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_annualization")]
    pub annualization_factor: f64,
    /// Annual risk-free rate.
    #[serde(default)]
    pub risk_free: f64,
    /// Proportional cost on rebalance turnover.
    #[serde(default)]
    pub cost_rate: f64,
}

fn annual() -> Period {
    Period::ANNUAL
}

fn monthly() -> Period {
    Period::MONTHLY
}

impl BacktestConfig {
    pub fn new(pretrain: DateRange, test: DateRange, strategies: Vec<Strategy>) -> Self {
        Self {
            pretrain,
            test,
            retrain_every: Period::ANNUAL,
            rebalance_every: Period::MONTHLY,
            strategies,
            annualization_factor: default_annualization(),
            risk_free: 0.0,
            cost_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.pretrain.start > self.pretrain.end || self.test.start > self.test.end {
            return bad("date ranges must be non-empty".into());
        }
        if self.pretrain.end >= self.test.start {
            return bad(format!(
                "pretraining ends {} but testing starts {}",
                self.pretrain.end, self.test.start
            ));
        }
        if !(self.annualization_factor.is_finite() && self.annualization_factor > 0.0) {
            return bad("annualization_factor must be positive".into());
        }
        if !self.risk_free.is_finite() {
            return bad("risk_free must be finite".into());
        }
        if !(self.cost_rate.is_finite() && self.cost_rate >= 0.0) {
            return bad("cost_rate must be non-negative".into());
        }
        let mut names = std::collections::HashSet::new();
        for s in &self.strategies {
            let name = s.name();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return bad(format!("strategy name `{name}` must be non-empty [A-Za-z0-9_-]"));
            }
            if !names.insert(name) {
                return bad(format!("duplicate strategy name `{name}`"));
            }
            match &s.kind {
                StrategyKind::Tangency { window: Some(0) } | StrategyKind::RiskBudgeting { window: Some(0), .. } => {
                    return bad(format!("strategy `{name}`: window must be at least 1"));
                }
                StrategyKind::RiskBudgeting { budgets: Some(b), .. }
                    if b.iter().any(|x| !(x.is_finite() && *x > 0.0)) =>
                {
                    return bad(format!("strategy `{name}`: risk budgets must be strictly positive"));
                }
                _ => {}
            }
            if let Some(t) = s.kind.rrl_config() {
                t.validate()?;
            }
        }
        Ok(())
    }
}

/// One training span and the test segment traded with its fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub train: DateRange,
    pub test: DateRange,
}

fn check_sorted(calendar: &[NaiveDate]) -> Result<()> {
    match calendar.windows(2).position(|p| p[0] >= p[1]) {
        Some(i) => Err(Error::InvalidCalendar(format!(
            "calendar not strictly increasing at {} -> {}",
            calendar[i],
            calendar[i + 1]
        ))),
        None => Ok(()),
    }
}

fn has_dates(calendar: &[NaiveDate], range: &DateRange) -> bool {
    let i = calendar.partition_point(|d| *d < range.start);
    i < calendar.len() && calendar[i] <= range.end
}

/// Expanding training spans paired with test segments that tile the test range.
pub fn rolling_schedule(calendar: &[NaiveDate], config: &BacktestConfig) -> Result<Vec<Segment>> {
    config.validate()?;
    check_sorted(calendar)?;
    let mut segments = Vec::new();
    let mut start = config.test.start;
    while start <= config.test.end {
        let next = config.retrain_every.advance(start);
        let end = (next - Days::new(1)).min(config.test.end);
        let train_end = if segments.is_empty() { config.pretrain.end } else { start - Days::new(1) };
        segments.push(Segment {
            train: DateRange::new(config.pretrain.start, train_end),
            test: DateRange::new(start, end),
        });
        start = next;
    }
    for s in &segments {
        for (what, range) in [("training", s.train), ("test", s.test)] {
            if !has_dates(calendar, &range) {
                return Err(Error::InvalidCalendar(format!("no trading dates in {what} range {range}")));
            }
        }
    }
    Ok(segments)
}

/// First trading date of each period inside `range`, periods anchored at the range's month.
pub fn rebalance_dates(calendar: &[NaiveDate], period: Period, range: DateRange) -> Result<Vec<NaiveDate>> {
    check_sorted(calendar)?;
    let first = calendar.partition_point(|d| *d < range.start);
    let last = calendar.partition_point(|d| *d <= range.end);
    if first >= last {
        return Err(Error::InvalidInput(format!("no trading dates in {range}")));
    }
    let mut out: Vec<NaiveDate> = Vec::new();
    let mut current = None;
    for &d in &calendar[first..last] {
        let b = period.bucket(range.start, d);
        if current != Some(b) {
            current = Some(b);
            out.push(d);
        }
    }
    Ok(out)
}

/// Annualized performance triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub profit: f64,
    pub risk: f64,
    pub sharpe: f64,
}

pub fn compute_metrics(portfolio_returns: &[f64], risk_free: f64, annualization_factor: f64) -> Result<Metrics> {
    let stats = ratios::compute_stats(portfolio_returns, 0.0)?;
    let profit = stats.mean * annualization_factor;
    let risk = stats.std * annualization_factor.sqrt();
    let sharpe = ratios::sharpe(profit, risk_free, risk)?;
    Ok(Metrics { profit, risk, sharpe })
}

/// Non-annualized statistics of the whole test period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WholePeriod {
    pub periods: usize,
    pub total_return: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatedValue {
    pub date: NaiveDate,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatedWeights {
    pub date: NaiveDate,
    pub weights: WeightVector,
}

/// Outcome of fitting an RRL strategy for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub train: DateRange,
    pub best_reward: f64,
    pub final_reward: f64,
    pub params: PolicyParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub name: String,
    pub kind: String,
    pub profit: f64,
    pub risk: f64,
    pub sharpe: f64,
    pub whole_period: WholePeriod,
    pub returns: Vec<DatedValue>,
    /// Wealth path starting at 1.0 on the last date before testing.
    pub equity_curve: Vec<DatedValue>,
    pub weight_trajectory: Vec<DatedWeights>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub training: Vec<TrainingRecord>,
    /// Non-fatal events such as an undefined tangency portfolio.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl StrategyReport {
    pub fn metrics(&self) -> Metrics {
        Metrics { profit: self.profit, risk: self.risk, sharpe: self.sharpe }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub assets: Vec<String>,
    /// Always `expanding`: each retrain keeps the full history from the pretraining start.
    pub window_scheme: String,
    pub annualization_factor: f64,
    pub risk_free: f64,
    pub schedule: Vec<Segment>,
    pub strategies: Vec<StrategyReport>,
}

const COVERAGE_SLACK_DAYS: u64 = 7;

fn check_coverage(prices: &PriceTable, config: &BacktestConfig) -> Result<()> {
    let assets = prices.assets.join(", ");
    let (Some(&first), Some(&last)) = (prices.dates.first(), prices.dates.last()) else {
        return Err(Error::InsufficientData("empty price table".into()));
    };
    if first > config.pretrain.start + Days::new(COVERAGE_SLACK_DAYS) {
        return Err(Error::InsufficientData(format!(
            "prices for {assets} start {first}, after pretraining start {}",
            config.pretrain.start
        )));
    }
    if last + Days::new(COVERAGE_SLACK_DAYS) < config.test.end {
        return Err(Error::InsufficientData(format!(
            "prices for {assets} end {last}, before test end {}",
            config.test.end
        )));
    }
    Ok(())
}

/// Runs every configured strategy through the rolling schedule.
///
/// Strategies are simulated in parallel; the report lists them in configured order.
pub fn run(config: &BacktestConfig, prices: &PriceTable) -> Result<BacktestReport> {
    config.validate()?;
    check_coverage(prices, config)?;
    let returns = data::to_returns(prices)?;
    let schedule = rolling_schedule(&returns.dates, config)?;
    let strategies = config
        .strategies
        .par_iter()
        .map(|s| simulate(s, &returns, &schedule, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(BacktestReport {
        assets: prices.assets.clone(),
        window_scheme: "expanding".into(),
        annualization_factor: config.annualization_factor,
        risk_free: config.risk_free,
        schedule,
        strategies,
    })
}

struct Decider<'a> {
    kind: &'a StrategyKind,
    per_period_rf: f64,
    policy: Option<(PolicyParams, usize)>,
    last_target: Option<WeightVector>,
    notes: Vec<String>,
}

impl Decider<'_> {
    /// Target weights at `date`, using only the rows in `history` (all dated before `date`).
    fn decide(&mut self, date: NaiveDate, history: &ReturnTable) -> Result<WeightVector> {
        let n = history.n_assets();
        let window = |w: Option<usize>| w.unwrap_or(history.n_rows()).min(history.n_rows());
        let target = match self.kind {
            StrategyKind::EqualWeight => allocators::equal_weight(n)?,
            StrategyKind::Tangency { window: w } => {
                let m = allocators::estimate_moments(history, window(*w))?;
                match allocators::tangency(&m, self.per_period_rf) {
                    Ok(w) => w,
                    Err(Error::NoTangency) => {
                        let keep = match &self.last_target {
                            Some(w) => w.clone(),
                            None => allocators::equal_weight(n)?,
                        };
                        self.notes.push(format!(
                            "{date}: no asset beats the risk-free rate, tangency undefined; kept {:?}",
                            keep.as_slice()
                        ));
                        keep
                    }
                    Err(e) => return Err(e),
                }
            }
            StrategyKind::RiskBudgeting { window: w, budgets } => {
                let m = allocators::estimate_moments(history, window(*w))?;
                let b = budgets.clone().unwrap_or_else(|| allocators::equal_budgets(n));
                allocators::risk_budgeting(&m.covariance, &b)?
            }
            StrategyKind::RrlSharpe { .. } | StrategyKind::RrlMarketAdaptive { .. } => {
                let (params, lags) = self.policy.as_ref().expect("policy trained before trading");
                let features = rrl::features_at(history, history.n_rows().wrapping_sub(1), *lags)?;
                let prev = match &self.last_target {
                    Some(w) => w.clone(),
                    None => allocators::equal_weight(n)?,
                };
                rrl::forward(params, &features, &prev)?
            }
        };
        self.last_target = Some(target.clone());
        Ok(target)
    }
}

fn simulate(
    strategy: &Strategy,
    returns: &ReturnTable,
    schedule: &[Segment],
    config: &BacktestConfig,
) -> Result<StrategyReport> {
    let n = returns.n_assets();
    let mut decider = Decider {
        kind: &strategy.kind,
        per_period_rf: config.risk_free / config.annualization_factor,
        policy: None,
        last_target: None,
        notes: Vec::new(),
    };
    let mut training = Vec::new();
    let mut dated_returns = Vec::new();
    let mut trajectory = Vec::new();
    let mut held: Option<Vec<f64>> = None;

    for segment in schedule {
        if let Some(train_cfg) = strategy.kind.rrl_config() {
            let window = returns.between(segment.train.start, segment.train.end);
            let outcome = rrl::train_from_seed(&window, &train_cfg)?;
            training.push(TrainingRecord {
                train: segment.train,
                best_reward: outcome.best_reward,
                final_reward: *outcome.reward_trace.last().expect("epochs >= 1"),
                params: outcome.params.clone(),
            });
            decider.policy = Some((outcome.params, train_cfg.feature_lags));
        }
        let rebalances = rebalance_dates(&returns.dates, config.rebalance_every, segment.test)?;
        let first = returns.rows_before(segment.test.start);
        let last = returns.rows_before(segment.test.end + Days::new(1));
        let mut next_rebalance = rebalances.iter().peekable();
        for t in first..last {
            let date = returns.dates[t];
            let mut turnover = 0.0;
            if next_rebalance.peek() == Some(&&date) {
                next_rebalance.next();
                let target = decider.decide(date, &returns.slice(0, t))?;
                if let Some(h) = &held {
                    turnover = h.iter().zip(target.as_slice()).map(|(a, b)| (a - b).abs()).sum();
                }
                held = Some(target.as_slice().to_vec());
                trajectory.push(DatedWeights { date, weights: target });
            }
            let w = held.as_mut().expect("first test date is a rebalance date");
            let r = returns.returns.row(t);
            let gross: f64 = (0..n).map(|i| w[i] * r[i]).sum();
            dated_returns.push(DatedValue { date, value: gross - config.cost_rate * turnover });
            for i in 0..n {
                w[i] *= (1.0 + r[i]) / (1.0 + gross);
            }
        }
    }

    let values: Vec<f64> = dated_returns.iter().map(|d| d.value).collect();
    let metrics = compute_metrics(&values, config.risk_free, config.annualization_factor)?;
    let start_row = returns.rows_before(schedule[0].test.start);
    let start_date = if start_row > 0 { returns.dates[start_row - 1] } else { config.pretrain.end };
    let mut equity_curve = vec![DatedValue { date: start_date, value: 1.0 }];
    let mut wealth = 1.0;
    for d in &dated_returns {
        wealth *= 1.0 + d.value;
        equity_curve.push(DatedValue { date: d.date, value: wealth });
    }
    Ok(StrategyReport {
        name: strategy.name().to_owned(),
        kind: strategy.kind.default_name().to_owned(),
        profit: metrics.profit,
        risk: metrics.risk,
        sharpe: metrics.sharpe,
        whole_period: WholePeriod {
            periods: values.len(),
            total_return: wealth - 1.0,
            mean: ratios::mean(&values),
            std: ratios::sample_std(&values),
        },
        returns: dated_returns,
        equity_curve,
        weight_trajectory: trajectory,
        training,
        notes: decider.notes,
    })
}
