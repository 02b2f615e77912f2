//! Batch commands behind the `market-adaptive` binary: run configuration,
//! report files and ratio grids.
//!
//! Every command computes all of its output in memory first and only then
//! writes files, each through a temporary file and a rename, so a failing
//! command leaves no partial output behind.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{Map, Value};

use crate::backtest::{self, BacktestConfig, BacktestReport, DateRange, Period, Strategy};
use crate::data::{self, PriceTable, SynthConfig};
use crate::error::{Error, Result};
use crate::ratios::{self, RatioConfig};
use crate::rrl::TrainConfig;

/// JSON run configuration for the `backtest` command.
///
/// `data` paths are resolved relative to the config file. `train` holds
/// defaults shared by every RRL strategy; a strategy's own `train` object
/// overrides individual fields on top of it.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Vec<PathBuf>,
    pub pretrain: DateRange,
    pub test: DateRange,
    #[serde(default = "annual")]
    pub retrain_every: Period,
    #[serde(default = "monthly")]
    pub rebalance_every: Period,
    #[serde(default = "default_annualization")]
    pub annualization_factor: f64,
    #[serde(default)]
    pub risk_free: f64,
    #[serde(default)]
    pub cost_rate: f64,
    #[serde(default)]
    pub ratio: RatioConfig,
    #[serde(default)]
    pub train: Map<String, Value>,
    #[serde(default)]
    pub strategies: Vec<Map<String, Value>>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn annual() -> Period {
    Period::ANNUAL
}

fn monthly() -> Period {
    Period::MONTHLY
}

fn default_annualization() -> f64 {
    252.0
}

fn merge(base: &mut Map<String, Value>, overrides: &Map<String, Value>) {
    for (k, v) in overrides {
        match (base.get_mut(k), v) {
            (Some(Value::Object(b)), Value::Object(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut cfg.data {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Resolves strategy entries into a validated backtest configuration.
    pub fn backtest_config(&self) -> Result<BacktestConfig> {
        let defaults = TrainConfig { ratio: self.ratio.clone(), ..TrainConfig::default() };
        let Value::Object(mut train_base) = serde_json::to_value(&defaults).map_err(config_err)? else {
            unreachable!("TrainConfig serializes to an object")
        };
        merge(&mut train_base, &self.train);

        let mut strategies = Vec::with_capacity(self.strategies.len());
        for entry in &self.strategies {
            let mut entry = entry.clone();
            let kind = entry.get("kind").and_then(Value::as_str).unwrap_or_default();
            if kind.starts_with("rrl_") {
                let mut train = train_base.clone();
                if let Some(Value::Object(o)) = entry.get("train") {
                    merge(&mut train, o);
                }
                entry.insert("train".into(), Value::Object(train));
            }
            let s: Strategy = serde_json::from_value(Value::Object(entry)).map_err(config_err)?;
            strategies.push(s);
        }
        let cfg = BacktestConfig {
            pretrain: self.pretrain,
            test: self.test,
            retrain_every: self.retrain_every,
            rebalance_every: self.rebalance_every,
            strategies,
            annualization_factor: self.annualization_factor,
            risk_free: self.risk_free,
            cost_rate: self.cost_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate_files(&self) -> Result<()> {
        if self.data.is_empty() {
            return Err(Error::Config("no data files configured".into()));
        }
        for p in &self.data {
            if !p.is_file() {
                return Err(Error::Config(format!("data file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

/// Writes `contents` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io { path: path.display().to_string(), msg: e.to_string() };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn metrics_csv(report: &BacktestReport) -> String {
    let mut out = String::from("strategy,profit,risk,sharpe\n");
    for s in &report.strategies {
        writeln!(out, "{},{:.6},{:.6},{:.6}", s.name, s.profit, s.risk, s.sharpe).unwrap();
    }
    out
}

/// Per-strategy CSV files keyed by file name.
pub fn report_files(report: &BacktestReport) -> Result<Vec<(String, String)>> {
    let mut files = vec![
        (
            "report.json".to_owned(),
            serde_json::to_string_pretty(report).map_err(config_err)? + "\n",
        ),
        ("metrics.csv".to_owned(), metrics_csv(report)),
    ];
    for s in &report.strategies {
        let mut equity = String::from("date,equity\n");
        for p in &s.equity_curve {
            writeln!(equity, "{},{:.6}", p.date, p.value).unwrap();
        }
        files.push((format!("equity_{}.csv", s.name), equity));

        let mut weights = String::from("date");
        for a in &report.assets {
            weights.push(',');
            weights.push_str(a);
        }
        weights.push('\n');
        for w in &s.weight_trajectory {
            write!(weights, "{}", w.date).unwrap();
            for v in w.weights.as_slice() {
                write!(weights, ",{v:.6}").unwrap();
            }
            weights.push('\n');
        }
        files.push((format!("weights_{}.csv", s.name), weights));
    }
    Ok(files)
}

fn load_prices(paths: &[PathBuf]) -> Result<PriceTable> {
    let tables = paths.iter().map(data::load_csv).collect::<Result<Vec<_>>>()?;
    data::align(&tables)
}

/// `backtest --config <path> --out <dir>`.
pub fn cmd_backtest(config_path: &Path, out_dir: Option<&Path>) -> Result<BacktestReport> {
    let run_cfg = RunConfig::load(config_path)?;
    run_cfg.validate_files()?;
    let cfg = run_cfg.backtest_config()?;
    let out_dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| run_cfg.out_dir.clone())
        .ok_or_else(|| Error::Config("no output directory given".into()))?;
    let prices = load_prices(&run_cfg.data)?;
    let report = backtest::run(&cfg, &prices)?;
    let files = report_files(&report)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
        path: out_dir.display().to_string(),
        msg: e.to_string(),
    })?;
    for (name, contents) in files {
        write_atomic(&out_dir.join(name), contents.as_bytes())?;
    }
    Ok(report)
}

/// Fixed-Sharpe family grid: `mu - risk_free = sigma`, so Sharpe is 1 on every row.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioGrid {
    pub alpha: f64,
    pub risk_free: f64,
    pub regimes: Vec<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub steps: usize,
}

impl RatioGrid {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha.is_finite()
            && self.alpha > 0.0
            && self.risk_free.is_finite()
            && self.sigma_min.is_finite()
            && self.sigma_max.is_finite()
            && self.sigma_min > 0.0
            && self.sigma_max > self.sigma_min
            && self.steps >= 2
            && self.regimes.iter().all(|r| r.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "ratio grid needs alpha > 0, 0 < sigma-min < sigma-max, steps >= 2, finite regimes".into(),
            ))
        }
    }

    pub fn sigmas(&self) -> Vec<f64> {
        let span = self.sigma_max - self.sigma_min;
        let last = self.steps - 1;
        (0..self.steps)
            .map(|k| if k == last { self.sigma_max } else { self.sigma_min + span * k as f64 / last as f64 })
            .collect()
    }

    /// Rows of `(sigma, sharpe, [m per regime])`.
    pub fn rows(&self) -> Result<Vec<(f64, f64, Vec<f64>)>> {
        self.validate()?;
        let rhos = self
            .regimes
            .iter()
            .map(|r| ratios::rho(*r, self.alpha))
            .collect::<Result<Vec<_>>>()?;
        self.sigmas()
            .into_iter()
            .map(|sigma| {
                let mu = self.risk_free + sigma;
                let sharpe = ratios::sharpe(mu, self.risk_free, sigma)?;
                let m = rhos
                    .iter()
                    .map(|rho| ratios::market_adaptive_ratio(mu, self.risk_free, sigma, *rho))
                    .collect::<Result<Vec<_>>>()?;
                Ok((sigma, sharpe, m))
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let rows = self.rows()?;
        let mut out = String::from("sigma,sharpe");
        for r in &self.regimes {
            write!(out, ",m_{r}").unwrap();
        }
        out.push('\n');
        for (sigma, sharpe, ms) in rows {
            write!(out, "{sigma:.6},{sharpe:.6}").unwrap();
            for m in ms {
                write!(out, ",{m:.6}").unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// `ratio-grid ... --out <path>`.
pub fn cmd_ratio_grid(grid: &RatioGrid, out: &Path) -> Result<()> {
    let csv = grid.to_csv()?;
    write_atomic(out, csv.as_bytes())
}

/// `synth --config <path> --out <path>`.
pub fn cmd_synth(config_path: &Path, out: &Path) -> Result<PriceTable> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let cfg: SynthConfig = serde_json::from_str(&text).map_err(config_err)?;
    let table = data::synth_market(&cfg)?;
    write_atomic(out, table.to_csv_string().as_bytes())?;
    Ok(table)
}

/// Summary printed by `validate`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSummary {
    pub rows: usize,
    pub assets: Vec<String>,
    pub first: chrono::NaiveDate,
    pub last: chrono::NaiveDate,
}

impl std::fmt::Display for DataSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ok: {} rows, {} assets ({}), {} to {}",
            self.rows,
            self.assets.len(),
            self.assets.join(", "),
            self.first,
            self.last
        )
    }
}

/// `validate <path>`.
pub fn cmd_validate(path: &Path) -> Result<DataSummary> {
    let t = data::load_csv(path)?;
    Ok(DataSummary {
        rows: t.n_rows(),
        assets: t.assets.clone(),
        first: t.dates[0],
        last: *t.dates.last().expect("at least one row"),
    })
}
