//! Weekly indicator data: CSV ingestion, company-level aggregation, raw
//! indicator formulas, feature scaling and the random train/test split.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of explanatory indicators.
pub const N_INDICATORS: usize = 10;
/// Number of company-level (financial) indicators.
pub const N_FINANCIAL: usize = 6;
/// Minimum number of rows for any fitting operation.
pub const MIN_FIT_ROWS: usize = 30;
/// Default split seed: the first week of the reference data period.
pub const DEFAULT_SPLIT_SEED: u64 = 20170106;

/// The ten explanatory indicators, in model index order (X1..X10).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Indicator {
    Beta,
    FcfPerShare,
    PbRatio,
    PeRatio,
    PegRatio,
    DivYield,
    InterestRate,
    Ics,
    Psr,
    Gdp,
}

impl Indicator {
    pub const ALL: [Indicator; N_INDICATORS] = [
        Indicator::Beta,
        Indicator::FcfPerShare,
        Indicator::PbRatio,
        Indicator::PeRatio,
        Indicator::PegRatio,
        Indicator::DivYield,
        Indicator::InterestRate,
        Indicator::Ics,
        Indicator::Psr,
        Indicator::Gdp,
    ];

    /// Zero-based position in `ObservationRow::indicators`.
    pub fn index(self) -> usize {
        self as usize
    }

    /// One-based model index (the `i` in `Xi`).
    pub fn number(self) -> usize {
        self.index() + 1
    }

    pub fn from_number(i: usize) -> Option<Indicator> {
        i.checked_sub(1).and_then(|k| Self::ALL.get(k).copied())
    }

    /// CSV column name.
    pub fn column(self) -> &'static str {
        match self {
            Indicator::Beta => "beta",
            Indicator::FcfPerShare => "fcf_per_share",
            Indicator::PbRatio => "pb_ratio",
            Indicator::PeRatio => "pe_ratio",
            Indicator::PegRatio => "peg_ratio",
            Indicator::DivYield => "div_yield",
            Indicator::InterestRate => "interest_rate",
            Indicator::Ics => "ics",
            Indicator::Psr => "psr",
            Indicator::Gdp => "gdp",
        }
    }

    /// Human-readable label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Indicator::Beta => "Beta",
            Indicator::FcfPerShare => "FCF/Share",
            Indicator::PbRatio => "P/B Ratio",
            Indicator::PeRatio => "P/E Ratio",
            Indicator::PegRatio => "PEG Ratio",
            Indicator::DivYield => "Div_Yield",
            Indicator::InterestRate => "Int_Rate",
            Indicator::Ics => "ICS",
            Indicator::Psr => "PSR",
            Indicator::Gdp => "GDP",
        }
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

/// One week of index-level data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub week_start: NaiveDate,
    /// X1..X10 in `Indicator::ALL` order.
    pub indicators: [f64; N_INDICATORS],
    /// Weekly closing price, index points.
    pub wcp: f64,
}

impl ObservationRow {
    pub fn get(&self, indicator: Indicator) -> f64 {
        self.indicators[indicator.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<ObservationRow>,
    pub provenance: String,
}

impl Dataset {
    /// Validates and sorts `rows` by week. Row numbers in errors are
    /// 1-based positions in the given order.
    pub fn from_rows(mut rows: Vec<ObservationRow>, provenance: impl Into<String>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            for ind in Indicator::ALL {
                if !row.get(ind).is_finite() {
                    return Err(Error::NonFiniteValue {
                        row: i + 1,
                        column: ind.column().to_string(),
                    });
                }
            }
            if !row.wcp.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: i + 1,
                    column: "wcp".to_string(),
                });
            }
            if row.wcp <= 0.0 {
                return Err(Error::NonPositiveResponse {
                    row: i + 1,
                    value: row.wcp,
                });
            }
        }
        rows.sort_by_key(|r| r.week_start);
        if let Some(w) = rows.windows(2).find(|w| w[0].week_start == w[1].week_start) {
            return Err(Error::DuplicateWeek(w[0].week_start));
        }
        Ok(Dataset {
            rows,
            provenance: provenance.into(),
        })
    }

    pub fn rows(&self) -> &[ObservationRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, indicator: Indicator) -> Vec<f64> {
        self.rows.iter().map(|r| r.get(indicator)).collect()
    }

    pub fn wcp(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.wcp).collect()
    }

    pub fn features(&self) -> Vec<[f64; N_INDICATORS]> {
        self.rows.iter().map(|r| r.indicators).collect()
    }

    pub fn require_fittable(&self) -> Result<()> {
        if self.len() < MIN_FIT_ROWS {
            return Err(Error::DatasetTooSmall {
                required: MIN_FIT_ROWS,
                actual: self.len(),
            });
        }
        Ok(())
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Lower-cases a header cell and maps spaces and hyphens to underscores.
fn normalize_header(h: &str) -> String {
    h.trim()
        .to_ascii_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .collect()
}

/// Accepts both `beta` and `x1_beta` spellings.
fn indicator_for_header(h: &str) -> Option<Indicator> {
    Indicator::ALL.into_iter().find(|ind| {
        h == ind.column() || h == format!("x{}_{}", ind.number(), ind.column())
    })
}

struct HeaderMap {
    columns: HashMap<String, usize>,
}

impl HeaderMap {
    fn new(headers: &csv::StringRecord) -> Self {
        let mut columns = HashMap::new();
        for (i, h) in headers.iter().enumerate() {
            let norm = normalize_header(h);
            let key = indicator_for_header(&norm)
                .map(|ind| ind.column().to_string())
                .unwrap_or(norm);
            columns.entry(key).or_insert(i);
        }
        HeaderMap { columns }
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.columns.get(name).copied()
    }
}

fn cell(record: &csv::StringRecord, idx: usize) -> &str {
    record.get(idx).unwrap_or("").trim()
}

fn parse_number(record: &csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<f64> {
    let raw = cell(record, idx);
    let value: f64 = raw.parse().map_err(|_| Error::UnparseableValue {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })?;
    if !value.is_finite() {
        return Err(Error::NonFiniteValue {
            row,
            column: column.to_string(),
        });
    }
    Ok(value)
}

fn parse_date(record: &csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<NaiveDate> {
    let raw = cell(record, idx);
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|_| Error::UnparseableValue {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads an index-level CSV (`week_start`, ten indicators, `wcp`) in any
/// column order.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    parse_csv(open(path)?, path.display().to_string())
}

pub fn parse_csv<R: Read>(reader: R, provenance: impl Into<String>) -> Result<Dataset> {
    let mut rdr = csv_reader(reader);
    let headers = HeaderMap::new(rdr.headers()?);
    let week_col = headers.require("week_start")?;
    let ind_cols = Indicator::ALL
        .iter()
        .map(|ind| headers.require(ind.column()))
        .collect::<Result<Vec<_>>>()?;
    let wcp_col = headers.require("wcp")?;

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        let week_start = parse_date(&record, week_col, row_no, "week_start")?;
        let mut indicators = [0.0; N_INDICATORS];
        for (k, ind) in Indicator::ALL.iter().enumerate() {
            indicators[k] = parse_number(&record, ind_cols[k], row_no, ind.column())?;
        }
        let wcp = parse_number(&record, wcp_col, row_no, "wcp")?;
        rows.push(ObservationRow {
            week_start,
            indicators,
            wcp,
        });
    }
    Dataset::from_rows(rows, provenance)
}

/// Writes the canonical index-level CSV.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["week_start".to_string()];
    header.extend(Indicator::ALL.iter().map(|i| i.column().to_string()));
    header.push("wcp".to_string());
    wtr.write_record(&header)?;
    for row in data.rows() {
        let mut rec = vec![row.week_start.format("%Y-%m-%d").to_string()];
        rec.extend(row.indicators.iter().map(|v| v.to_string()));
        rec.push(row.wcp.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Indicator rows used for prediction: the ten indicators, with an
/// optional week and observed price.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorRow {
    pub week_start: Option<NaiveDate>,
    pub indicators: [f64; N_INDICATORS],
    pub wcp: Option<f64>,
}

/// Reads a prediction input CSV; `week_start` and `wcp` are optional and
/// row order is preserved.
pub fn load_indicator_rows(path: impl AsRef<Path>) -> Result<Vec<IndicatorRow>> {
    let path = path.as_ref();
    let mut rdr = csv_reader(open(path)?);
    let headers = HeaderMap::new(rdr.headers()?);
    let ind_cols = Indicator::ALL
        .iter()
        .map(|ind| headers.require(ind.column()))
        .collect::<Result<Vec<_>>>()?;
    let week_col = headers.optional("week_start");
    let wcp_col = headers.optional("wcp");
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        let mut indicators = [0.0; N_INDICATORS];
        for (k, ind) in Indicator::ALL.iter().enumerate() {
            indicators[k] = parse_number(&record, ind_cols[k], row_no, ind.column())?;
        }
        let week_start = week_col
            .map(|c| parse_date(&record, c, row_no, "week_start"))
            .transpose()?;
        let wcp = wcp_col
            .map(|c| parse_number(&record, c, row_no, "wcp"))
            .transpose()?;
        out.push(IndicatorRow {
            week_start,
            indicators,
            wcp,
        });
    }
    Ok(out)
}

/// One company's financial indicators for one week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyWeekRecord {
    pub ticker: String,
    pub week_start: NaiveDate,
    /// X1..X6 (beta through dividend yield).
    pub values: [f64; N_FINANCIAL],
}

/// Equal-weighted per-week average of the financial indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyAverage {
    pub week_start: NaiveDate,
    pub values: [f64; N_FINANCIAL],
    pub tickers: usize,
}

pub fn load_company_csv(path: impl AsRef<Path>) -> Result<Vec<CompanyWeekRecord>> {
    let path = path.as_ref();
    let mut rdr = csv_reader(open(path)?);
    let headers = HeaderMap::new(rdr.headers()?);
    let ticker_col = headers.require("ticker")?;
    let week_col = headers.require("week_start")?;
    let cols = Indicator::ALL[..N_FINANCIAL]
        .iter()
        .map(|ind| headers.require(ind.column()))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        let ticker = cell(&record, ticker_col);
        if ticker.is_empty() {
            return Err(Error::UnparseableValue {
                row: row_no,
                column: "ticker".to_string(),
                value: String::new(),
            });
        }
        let week_start = parse_date(&record, week_col, row_no, "week_start")?;
        let mut values = [0.0; N_FINANCIAL];
        for (k, ind) in Indicator::ALL[..N_FINANCIAL].iter().enumerate() {
            values[k] = parse_number(&record, cols[k], row_no, ind.column())?;
        }
        out.push(CompanyWeekRecord {
            ticker: ticker.to_string(),
            week_start,
            values,
        });
    }
    Ok(out)
}

/// Averages each financial indicator over the tickers reporting in each
/// week. Tickers are summed in sorted order, so the result does not
/// depend on record order.
pub fn aggregate_companies(records: &[CompanyWeekRecord]) -> Result<Vec<WeeklyAverage>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut by_week: BTreeMap<NaiveDate, BTreeMap<&str, &[f64; N_FINANCIAL]>> = BTreeMap::new();
    for rec in records {
        let week = by_week.entry(rec.week_start).or_default();
        if week.insert(rec.ticker.as_str(), &rec.values).is_some() {
            return Err(Error::DuplicateRecord {
                ticker: rec.ticker.clone(),
                week: rec.week_start,
            });
        }
    }
    Ok(by_week
        .into_iter()
        .map(|(week_start, tickers)| {
            let count = tickers.len();
            let mut sums = [0.0; N_FINANCIAL];
            for values in tickers.values() {
                for (s, v) in sums.iter_mut().zip(values.iter()) {
                    *s += v;
                }
            }
            WeeklyAverage {
                week_start,
                values: sums.map(|s| s / count as f64),
                tickers: count,
            }
        })
        .collect())
}

/// Economic indicators and the closing price for one week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroRow {
    pub week_start: NaiveDate,
    /// X7..X10 (interest rate, ICS, PSR, GDP).
    pub values: [f64; N_INDICATORS - N_FINANCIAL],
    pub wcp: f64,
}

pub fn load_macro_csv(path: impl AsRef<Path>) -> Result<Vec<MacroRow>> {
    let path = path.as_ref();
    let mut rdr = csv_reader(open(path)?);
    let headers = HeaderMap::new(rdr.headers()?);
    let week_col = headers.require("week_start")?;
    let econ = &Indicator::ALL[N_FINANCIAL..];
    let cols = econ
        .iter()
        .map(|ind| headers.require(ind.column()))
        .collect::<Result<Vec<_>>>()?;
    let wcp_col = headers.require("wcp")?;
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        let week_start = parse_date(&record, week_col, row_no, "week_start")?;
        let mut values = [0.0; N_INDICATORS - N_FINANCIAL];
        for (k, ind) in econ.iter().enumerate() {
            values[k] = parse_number(&record, cols[k], row_no, ind.column())?;
        }
        let wcp = parse_number(&record, wcp_col, row_no, "wcp")?;
        out.push(MacroRow {
            week_start,
            values,
            wcp,
        });
    }
    Ok(out)
}

/// Joins weekly company averages with the economic series on exact
/// week-start equality.
pub fn join_weekly(averages: &[WeeklyAverage], macro_rows: &[MacroRow], provenance: impl Into<String>) -> Result<Dataset> {
    let mut by_week = HashMap::new();
    for m in macro_rows {
        if by_week.insert(m.week_start, m).is_some() {
            return Err(Error::DuplicateWeek(m.week_start));
        }
    }
    let rows = averages
        .iter()
        .map(|avg| {
            let m = by_week
                .get(&avg.week_start)
                .ok_or(Error::MissingWeek(avg.week_start))?;
            let mut indicators = [0.0; N_INDICATORS];
            indicators[..N_FINANCIAL].copy_from_slice(&avg.values);
            indicators[N_FINANCIAL..].copy_from_slice(&m.values);
            Ok(ObservationRow {
                week_start: avg.week_start,
                indicators,
                wcp: m.wcp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::from_rows(rows, provenance)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Beta = Cov(stock, market) / Var(market), both with the n-1 estimator.
pub fn compute_beta(stock_returns: &[f64], market_returns: &[f64]) -> Result<f64> {
    if stock_returns.len() != market_returns.len() {
        return Err(Error::LengthMismatch {
            left: stock_returns.len(),
            right: market_returns.len(),
        });
    }
    if market_returns.len() < 2 {
        return Err(Error::SampleTooSmall {
            required: 2,
            actual: market_returns.len(),
        });
    }
    let ms = mean(stock_returns);
    let mm = mean(market_returns);
    let denom = (market_returns.len() - 1) as f64;
    let (mut cov, mut var) = (0.0, 0.0);
    for (s, m) in stock_returns.iter().zip(market_returns) {
        cov += (s - ms) * (m - mm);
        var += (m - mm) * (m - mm);
    }
    if var == 0.0 {
        return Err(Error::ZeroMarketVariance);
    }
    Ok((cov / denom) / (var / denom))
}

/// Shared helper for the per-share and valuation ratios.
pub fn safe_ratio(numerator: f64, denominator: f64) -> Result<f64> {
    if denominator == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(numerator / denominator)
}

/// Annual dividend over share price, in percent.
pub fn dividend_yield_percent(annual_dividend: f64, share_price: f64) -> Result<f64> {
    Ok(safe_ratio(annual_dividend, share_price)? * 100.0)
}

/// PEG = (P/E) / annual EPS growth (growth in percent).
pub fn peg_ratio(pe_ratio: f64, eps_growth_percent: f64) -> Result<f64> {
    safe_ratio(pe_ratio, eps_growth_percent)
}

/// Per-column z-score parameters for the ten indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: [f64; N_INDICATORS],
    pub std_dev: [f64; N_INDICATORS],
}

impl ScalerParams {
    /// Mean 0, stddev 1: leaves already-standardized inputs unchanged.
    pub fn identity() -> Self {
        ScalerParams {
            mean: [0.0; N_INDICATORS],
            std_dev: [1.0; N_INDICATORS],
        }
    }

    pub fn apply(&self, raw: &[f64; N_INDICATORS]) -> [f64; N_INDICATORS] {
        std::array::from_fn(|k| (raw[k] - self.mean[k]) / self.std_dev[k])
    }

    pub fn invert(&self, scaled: &[f64; N_INDICATORS]) -> [f64; N_INDICATORS] {
        std::array::from_fn(|k| scaled[k] * self.std_dev[k] + self.mean[k])
    }

    pub fn validate(&self) -> Result<()> {
        for (k, (&m, &s)) in self.mean.iter().zip(&self.std_dev).enumerate() {
            if !m.is_finite() || !s.is_finite() || s <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "scaler column {} has mean {m} and stddev {s}",
                    Indicator::ALL[k].column()
                )));
            }
        }
        Ok(())
    }
}

/// Z-scores every indicator column (sample stddev, n-1); `wcp` is left
/// untouched.
pub fn standardize(data: &Dataset) -> Result<(Dataset, ScalerParams)> {
    if data.len() < 2 {
        return Err(Error::DatasetTooSmall {
            required: 2,
            actual: data.len(),
        });
    }
    let n = data.len() as f64;
    let mut params = ScalerParams::identity();
    for ind in Indicator::ALL {
        let col = data.column(ind);
        let m = mean(&col);
        let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
        let sd = (ss / (n - 1.0)).sqrt();
        if sd == 0.0 || !sd.is_finite() {
            return Err(Error::ConstantColumn(ind.column().to_string()));
        }
        params.mean[ind.index()] = m;
        params.std_dev[ind.index()] = sd;
    }
    let rows = data
        .rows()
        .iter()
        .map(|r| ObservationRow {
            week_start: r.week_start,
            indicators: params.apply(&r.indicators),
            wcp: r.wcp,
        })
        .collect();
    Ok((
        Dataset {
            rows,
            provenance: data.provenance.clone(),
        },
        params,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: DEFAULT_SPLIT_SEED,
        }
    }
}

/// Row indices of a seeded random partition; both sides ascending.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train_fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    if n < 10 {
        return Err(Error::DatasetTooSmall {
            required: 10,
            actual: n,
        });
    }
    let n_train = ((spec.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data.len(), spec)?;
    Ok((data.subset(&train), data.subset(&test)))
}

/// Distinct weeks in a set of company records.
pub fn distinct_weeks(records: &[CompanyWeekRecord]) -> usize {
    records.iter().map(|r| r.week_start).collect::<HashSet<_>>().len()
}
