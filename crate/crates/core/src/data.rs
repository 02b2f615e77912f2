//! Price ingestion, calendar alignment, return computation and the synthetic
//! regime-switching market.
//!
//! The CSV layout is fixed: a `date,<ASSET>,...` header followed by
//! `YYYY-MM-DD,<decimal>,...` rows, LF line endings, no quoting.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Daily trading periods per year used by the synthetic generator.
pub const PERIODS_PER_YEAR: f64 = 252.0;

/// Adjusted close prices, one row per trading date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    pub prices: DMatrix<f64>,
}

/// Simple per-period returns; row `t` is dated at the later price of each pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnTable {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    pub returns: DMatrix<f64>,
}

impl PriceTable {
    pub fn new(dates: Vec<NaiveDate>, assets: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        let table = Self { dates, assets, prices };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        if self.prices.nrows() != self.dates.len() || self.prices.ncols() != self.assets.len() {
            return Err(Error::InvalidInput(format!(
                "price matrix is {}x{} but there are {} dates and {} assets",
                self.prices.nrows(),
                self.prices.ncols(),
                self.dates.len(),
                self.assets.len()
            )));
        }
        check_asset_names(&self.assets, 1)?;
        for (row, pair) in self.dates.windows(2).enumerate() {
            if pair[0] >= pair[1] {
                return Err(Error::Validation {
                    line: row + 3,
                    msg: format!("dates not strictly increasing at {}", pair[1]),
                });
            }
        }
        for (row, col) in (0..self.n_rows()).flat_map(|r| (0..self.n_assets()).map(move |c| (r, c))) {
            let p = self.prices[(row, col)];
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::Validation {
                    line: row + 2,
                    msg: format!("price {p} for {} on {} must be positive", self.assets[col], self.dates[row]),
                });
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Rows dated on or before `last`.
    pub fn truncate_after(&self, last: NaiveDate) -> PriceTable {
        let keep = self.dates.partition_point(|d| *d <= last);
        PriceTable {
            dates: self.dates[..keep].to_vec(),
            assets: self.assets.clone(),
            prices: self.prices.rows(0, keep).into_owned(),
        }
    }

    /// Serializes in canonical form: shortest round-trip decimal for every price.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date");
        for a in &self.assets {
            out.push(',');
            out.push_str(a);
        }
        out.push('\n');
        for (r, date) in self.dates.iter().enumerate() {
            write!(out, "{}", date.format(DATE_FORMAT)).unwrap();
            for c in 0..self.n_assets() {
                write!(out, ",{}", self.prices[(r, c)]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

impl ReturnTable {
    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Contiguous row range `[start, end)` as a new table.
    pub fn slice(&self, start: usize, end: usize) -> ReturnTable {
        ReturnTable {
            dates: self.dates[start..end].to_vec(),
            assets: self.assets.clone(),
            returns: self.returns.rows(start, end - start).into_owned(),
        }
    }

    /// Number of rows dated strictly before `date`.
    pub fn rows_before(&self, date: NaiveDate) -> usize {
        self.dates.partition_point(|d| *d < date)
    }

    /// Rows whose dates fall inside `[first, last]`.
    pub fn between(&self, first: NaiveDate, last: NaiveDate) -> ReturnTable {
        let start = self.rows_before(first);
        let end = self.dates.partition_point(|d| *d <= last);
        self.slice(start, end.max(start))
    }

    pub fn row(&self, t: usize) -> DVector<f64> {
        self.returns.row(t).transpose()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.returns.column(i).iter().copied().collect()
    }
}

fn check_asset_names(assets: &[String], header_line: usize) -> Result<()> {
    if assets.is_empty() {
        return Err(Error::Parse { line: header_line, msg: "no asset columns".into() });
    }
    let mut seen = HashSet::new();
    for a in assets {
        if a.is_empty() {
            return Err(Error::Parse { line: header_line, msg: "empty asset name".into() });
        }
        if !seen.insert(a.as_str()) {
            return Err(Error::Validation {
                line: header_line,
                msg: format!("duplicate asset column {a}"),
            });
        }
    }
    Ok(())
}

/// Parses CSV text into a validated table with rows sorted by date.
pub fn parse_csv(text: &str) -> Result<PriceTable> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "empty file".into() })?;
    let mut fields = header.split(',');
    if fields.next() != Some("date") {
        return Err(Error::Parse { line: 1, msg: "header must start with `date`".into() });
    }
    let assets: Vec<String> = fields.map(str::to_owned).collect();
    check_asset_names(&assets, 1)?;

    let mut rows: Vec<(NaiveDate, usize, Vec<f64>)> = Vec::new();
    for (line, text) in lines {
        if text.is_empty() {
            continue;
        }
        let mut fields = text.split(',');
        let date_str = fields.next().unwrap_or_default();
        let date = NaiveDate::parse_from_str(date_str, DATE_FORMAT).map_err(|e| Error::Parse {
            line,
            msg: format!("bad date `{date_str}`: {e}"),
        })?;
        let values: Vec<&str> = fields.collect();
        if values.len() != assets.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} prices, found {}", assets.len(), values.len()),
            });
        }
        let mut prices = Vec::with_capacity(values.len());
        for (v, asset) in values.iter().zip(&assets) {
            let p: f64 = v.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad price `{v}` for {asset}"),
            })?;
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::Validation {
                    line,
                    msg: format!("price {v} for {asset} on {date} must be positive and finite"),
                });
            }
            prices.push(p);
        }
        rows.push((date, line, prices));
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 2, msg: "no data rows".into() });
    }
    rows.sort_by_key(|(d, line, _)| (*d, *line));
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::Validation {
                line: pair[1].1,
                msg: format!("duplicate date {} (also on line {})", pair[1].0, pair[0].1),
            });
        }
    }
    let n = assets.len();
    let prices = DMatrix::from_fn(rows.len(), n, |r, c| rows[r].2[c]);
    Ok(PriceTable {
        dates: rows.into_iter().map(|(d, _, _)| d).collect(),
        assets,
        prices,
    })
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<PriceTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_csv(&text)
}

pub fn write_csv(table: &PriceTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, table.to_csv_string()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Inner-joins tables on date; columns are concatenated in input order.
pub fn align(tables: &[PriceTable]) -> Result<PriceTable> {
    let (first, rest) = tables
        .split_first()
        .ok_or_else(|| Error::InvalidInput("align needs at least one table".into()))?;
    let mut dates: Vec<NaiveDate> = first.dates.clone();
    for t in rest {
        let other: HashSet<NaiveDate> = t.dates.iter().copied().collect();
        dates.retain(|d| other.contains(d));
    }
    if dates.is_empty() {
        return Err(Error::NoOverlap);
    }
    let assets: Vec<String> = tables.iter().flat_map(|t| t.assets.iter().cloned()).collect();
    check_asset_names(&assets, 1)?;
    let mut columns: Vec<f64> = Vec::with_capacity(dates.len() * assets.len());
    for t in tables {
        let rows: Vec<usize> = dates
            .iter()
            .map(|d| t.dates.binary_search(d).expect("date present in every table"))
            .collect();
        for c in 0..t.n_assets() {
            columns.extend(rows.iter().map(|&r| t.prices[(r, c)]));
        }
    }
    Ok(PriceTable {
        prices: DMatrix::from_vec(dates.len(), assets.len(), columns),
        dates,
        assets,
    })
}

/// Simple returns `p_t / p_{t-1} - 1`.
pub fn to_returns(prices: &PriceTable) -> Result<ReturnTable> {
    let n = prices.n_rows();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 price rows for returns, got {n}"
        )));
    }
    let p = &prices.prices;
    let returns = DMatrix::from_fn(n - 1, prices.n_assets(), |r, c| p[(r + 1, c)] / p[(r, c)] - 1.0);
    Ok(ReturnTable {
        dates: prices.dates[1..].to_vec(),
        assets: prices.assets.clone(),
        returns,
    })
}

/// One constant-parameter stretch of a synthetic price path.
///
/// `annual_drift` is the expected annualized *log* return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regime {
    pub length_days: usize,
    pub annual_drift: f64,
    pub annual_vol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthAsset {
    pub name: String,
    #[serde(default = "default_initial_price")]
    pub initial_price: f64,
    pub regimes: Vec<Regime>,
}

fn default_initial_price() -> f64 {
    100.0
}

fn default_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 4).unwrap()
}

impl SynthAsset {
    /// Alternating up/down segments of equal length, starting with `first`.
    pub fn alternating(name: &str, n_days: usize, segment: usize, first: (f64, f64), second: (f64, f64)) -> Self {
        let mut regimes = Vec::new();
        let mut left = n_days;
        let mut flip = false;
        while left > 0 {
            let len = segment.min(left);
            let (annual_drift, annual_vol) = if flip { second } else { first };
            regimes.push(Regime { length_days: len, annual_drift, annual_vol });
            left -= len;
            flip = !flip;
        }
        Self { name: name.to_owned(), initial_price: 100.0, regimes }
    }

    /// A single regime covering the whole path.
    pub fn constant(name: &str, n_days: usize, annual_drift: f64, annual_vol: f64) -> Self {
        Self {
            name: name.to_owned(),
            initial_price: 100.0,
            regimes: vec![Regime { length_days: n_days, annual_drift, annual_vol }],
        }
    }
}

/// Correlated geometric Brownian motion with piecewise-constant drift and volatility.
///
/// `n_days` daily steps are generated on weekdays starting at `start_date`, so the
/// table has `n_days + 1` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_days: usize,
    #[serde(default = "default_start_date")]
    pub start_date: NaiveDate,
    /// Pairwise correlation of the Gaussian shocks, shared by every asset pair.
    #[serde(default)]
    pub correlation: f64,
    pub seed: u64,
    pub assets: Vec<SynthAsset>,
}

impl SynthConfig {
    /// Uncorrelated assets starting on the default start date.
    pub fn new(n_days: usize, seed: u64, assets: Vec<SynthAsset>) -> Self {
        Self { n_days, start_date: default_start_date(), correlation: 0.0, seed, assets }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_days == 0 {
            return bad("n_days must be positive".into());
        }
        if self.assets.is_empty() {
            return bad("at least one asset is required".into());
        }
        if !(self.correlation.abs() < 1.0) {
            return bad(format!("|correlation| must be < 1 (got {})", self.correlation));
        }
        for a in &self.assets {
            if !(a.initial_price.is_finite() && a.initial_price > 0.0) {
                return bad(format!("{}: initial_price must be positive", a.name));
            }
            let total: usize = a.regimes.iter().map(|r| r.length_days).sum();
            if total != self.n_days {
                return bad(format!(
                    "{}: regime lengths sum to {total}, expected n_days = {}",
                    a.name, self.n_days
                ));
            }
            for r in &a.regimes {
                if !r.annual_drift.is_finite() || !r.annual_vol.is_finite() || r.annual_vol < 0.0 {
                    return bad(format!("{}: regime drift/vol must be finite, vol >= 0", a.name));
                }
            }
        }
        let names: Vec<String> = self.assets.iter().map(|a| a.name.clone()).collect();
        check_asset_names(&names, 0).map_err(|e| Error::Config(e.to_string()))?;
        self.shock_factor().map(|_| ())
    }

    fn shock_factor(&self) -> Result<DMatrix<f64>> {
        let n = self.assets.len();
        let corr = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { self.correlation });
        corr.cholesky()
            .map(|c| c.l())
            .ok_or_else(|| Error::Config(format!(
                "correlation {} is not valid for {n} assets",
                self.correlation
            )))
    }
}

fn next_weekday(mut d: NaiveDate) -> NaiveDate {
    loop {
        d = d.succ_opt().expect("date in range");
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            return d;
        }
    }
}

pub fn synth_market(config: &SynthConfig) -> Result<PriceTable> {
    config.validate()?;
    let n = config.assets.len();
    let chol = config.shock_factor()?;
    let dt = 1.0 / PERIODS_PER_YEAR;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // per-asset, per-day (drift, vol) lookup
    let schedule: Vec<Vec<Regime>> = config
        .assets
        .iter()
        .map(|a| {
            a.regimes
                .iter()
                .flat_map(|r| std::iter::repeat_n(*r, r.length_days))
                .collect()
        })
        .collect();

    let mut dates = Vec::with_capacity(config.n_days + 1);
    let mut date = config.start_date;
    while matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
        date = next_weekday(date);
    }
    dates.push(date);
    let mut data = vec![0.0; (config.n_days + 1) * n];
    let rows = config.n_days + 1;
    let mut log_price: Vec<f64> = config.assets.iter().map(|a| a.initial_price.ln()).collect();
    for (c, lp) in log_price.iter().enumerate() {
        data[c * rows] = lp.exp();
    }
    let mut z = DVector::zeros(n);
    for day in 0..config.n_days {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let shocks = &chol * &z;
        for c in 0..n {
            let r = schedule[c][day];
            log_price[c] += r.annual_drift * dt + r.annual_vol * dt.sqrt() * shocks[c];
            data[c * rows + day + 1] = log_price[c].exp();
        }
        date = next_weekday(date);
        dates.push(date);
    }
    PriceTable::new(
        dates,
        config.assets.iter().map(|a| a.name.clone()).collect(),
        DMatrix::from_vec(rows, n, data),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, DATE_FORMAT).unwrap()
    }

    const SMALL: &str = "date,A,B\n2020-01-01,100,50\n2020-01-02,101,49.5\n2020-01-03,102.5,50.25\n";

    #[test]
    fn parses_well_formed_file() {
        let t = parse_csv(SMALL).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.n_assets(), 2);
        assert_eq!(t.assets, vec!["A", "B"]);
        assert_eq!(t.prices[(2, 1)], 50.25);
    }

    #[test]
    fn zero_price_names_the_line() {
        let err = parse_csv("date,A\n2020-01-01,1\n2020-01-02,0\n").unwrap_err();
        assert!(matches!(err, Error::Validation { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn shuffled_rows_sort() {
        let shuffled = "date,A,B\n2020-01-03,102.5,50.25\n2020-01-01,100,50\n2020-01-02,101,49.5\n";
        assert_eq!(parse_csv(shuffled).unwrap(), parse_csv(SMALL).unwrap());
    }

    #[test]
    fn duplicate_date_rejected() {
        let err = parse_csv("date,A\n2020-01-01,1\n2020-01-02,2\n2020-01-01,3\n").unwrap_err();
        assert!(matches!(err, Error::Validation { line: 4, .. }), "{err:?}");
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_csv(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_csv("day,A\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_csv("date,A\n2020-01-01,1,2\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_csv("date,A\n2020-13-01,1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_csv("date,A\n2020-01-01,abc\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_csv("date,A\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn canonical_round_trip() {
        let t = parse_csv(SMALL).unwrap();
        assert_eq!(t.to_csv_string(), SMALL);
    }

    fn table(start: &str, n: usize, name: &str) -> PriceTable {
        let mut dates = vec![d(start)];
        for _ in 1..n {
            dates.push(dates.last().unwrap().succ_opt().unwrap());
        }
        let prices = DMatrix::from_fn(n, 1, |r, _| 100.0 + r as f64);
        PriceTable::new(dates, vec![name.into()], prices).unwrap()
    }

    #[test]
    fn align_cases() {
        let a = table("2020-01-01", 10, "A");
        let b = table("2020-01-01", 10, "B");
        let ab = align(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(ab.n_rows(), 10);
        assert_eq!(ab.assets, vec!["A", "B"]);
        assert_eq!(ab.prices.column(1), b.prices.column(0));

        let c = table("2020-01-02", 10, "C");
        let ac = align(&[a.clone(), c]).unwrap();
        assert_eq!(ac.n_rows(), 9);
        assert_eq!(ac.dates[0], d("2020-01-02"));
        assert_eq!(ac.prices[(0, 0)], 101.0);
        assert_eq!(ac.prices[(0, 1)], 100.0);

        let far = table("2021-01-01", 5, "F");
        assert_eq!(align(&[a, far]), Err(Error::NoOverlap));
        assert!(align(&[]).is_err());
    }

    #[test]
    fn returns_cases() {
        let mk = |ps: &[f64]| {
            let dates: Vec<NaiveDate> = (0..ps.len()).map(|i| d("2020-01-01") + chrono::Days::new(i as u64)).collect();
            PriceTable::new(dates, vec!["A".into()], DMatrix::from_column_slice(ps.len(), 1, ps)).unwrap()
        };
        let r = to_returns(&mk(&[100.0, 110.0])).unwrap();
        assert_relative_eq!(r.returns[(0, 0)], 0.10, epsilon = 1e-15);
        assert_eq!(r.dates, vec![d("2020-01-02")]);
        let r = to_returns(&mk(&[5.0, 5.0, 5.0])).unwrap();
        assert!(r.returns.iter().all(|v| *v == 0.0));
        let r = to_returns(&mk(&[100.0, 50.0, 100.0])).unwrap();
        assert_eq!(r.column(0), vec![-0.5, 1.0]);
        assert!(matches!(to_returns(&mk(&[1.0])), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn zero_vol_synth_is_exponential() {
        let cfg = SynthConfig {
            n_days: 50,
            start_date: d("2020-01-01"),
            correlation: 0.0,
            seed: 1,
            assets: vec![SynthAsset::constant("X", 50, 0.1, 0.0)],
        };
        let t = synth_market(&cfg).unwrap();
        assert_eq!(t.n_rows(), 51);
        for r in 0..51 {
            assert_relative_eq!(t.prices[(r, 0)], 100.0 * (0.1 * r as f64 / 252.0).exp(), max_relative = 1e-12);
        }
        assert!(t.dates.iter().all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
    }

    #[test]
    fn synth_rejects_bad_configs() {
        let mut cfg = SynthConfig {
            n_days: 10,
            start_date: d("2020-01-01"),
            correlation: 0.0,
            seed: 1,
            assets: vec![SynthAsset::constant("X", 9, 0.1, 0.2)],
        };
        assert!(matches!(synth_market(&cfg), Err(Error::Config(_))));
        cfg.assets = vec![SynthAsset::constant("X", 10, 0.1, 0.2), SynthAsset::constant("Y", 10, 0.1, 0.2)];
        cfg.correlation = 1.0;
        assert!(synth_market(&cfg).is_err());
        cfg.correlation = 0.3;
        assert!(synth_market(&cfg).is_ok());
    }

    #[test]
    fn alternating_regimes_cover_n_days() {
        let a = SynthAsset::alternating("E", 300, 126, (0.15, 0.2), (-0.15, 0.2));
        let lens: Vec<usize> = a.regimes.iter().map(|r| r.length_days).collect();
        assert_eq!(lens, vec![126, 126, 48]);
        assert_eq!(a.regimes[1].annual_drift, -0.15);
    }
}
