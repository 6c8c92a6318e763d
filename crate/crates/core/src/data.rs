//! Price and return CSV files.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ReturnSeries;

/// Column names of a two-column CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvFormat {
    pub date_column: String,
    pub value_column: String,
}

impl CsvFormat {
    pub fn prices() -> Self {
        Self { date_column: "date".into(), value_column: "close".into() }
    }

    pub fn returns() -> Self {
        Self { date_column: "date".into(), value_column: "return".into() }
    }
}

/// Daily closing prices with strictly increasing date labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    dates: Vec<String>,
    closes: Vec<f64>,
}

impl PriceSeries {
    pub fn new(dates: Vec<String>, closes: Vec<f64>) -> Result<Self> {
        if dates.len() != closes.len() {
            return Err(Error::Validation("dates and closes differ in length".into()));
        }
        if let Some(p) = closes.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::ParameterDomain(format!("prices must be positive and finite, got {p}")));
        }
        check_dates(&dates, |i| i + 1)?;
        Ok(Self { dates, closes })
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    /// Dates of the returns, i.e. all dates but the first.
    pub fn return_dates(&self) -> &[String] {
        &self.dates[1.min(self.dates.len())..]
    }
}

/// Dates must be nonempty and strictly increasing (ISO-8601 labels sort
/// lexicographically). `line` maps a row index to its line number.
fn check_dates(dates: &[String], line: impl Fn(usize) -> usize) -> Result<()> {
    for (i, d) in dates.iter().enumerate() {
        if d.trim().is_empty() {
            return Err(Error::Parse { line: line(i), message: "empty date".into() });
        }
        if i > 0 {
            let prev = &dates[i - 1];
            if d == prev {
                return Err(Error::Validation(format!("duplicate date {d} at line {}", line(i))));
            }
            if d < prev {
                return Err(Error::Validation(format!("date {d} at line {} is out of order", line(i))));
            }
        }
    }
    Ok(())
}

fn read_two_columns<R: Read>(reader: R, format: &CsvFormat) -> Result<(Vec<String>, Vec<f64>, Vec<usize>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column '{name}'") })
    };
    let (di, vi) = (col(&format.date_column)?, col(&format.value_column)?);
    let (mut dates, mut values, mut lines) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| {
            rec.get(i).ok_or_else(|| Error::Parse { line, message: format!("missing field {}", i + 1) })
        };
        let raw = field(vi)?;
        let v: f64 = raw.parse().map_err(|_| Error::Parse { line, message: format!("not a number: '{raw}'") })?;
        if !v.is_finite() {
            return Err(Error::Parse { line, message: format!("non-finite value '{raw}'") });
        }
        dates.push(field(di)?.to_string());
        values.push(v);
        lines.push(line);
    }
    if values.is_empty() {
        return Err(Error::Parse { line: 1, message: "no data rows".into() });
    }
    check_dates(&dates, |i| lines[i])?;
    Ok((dates, values, lines))
}

/// Parses `date,close` rows from any reader.
pub fn parse_prices<R: Read>(reader: R, format: &CsvFormat) -> Result<PriceSeries> {
    let (dates, closes, lines) = read_two_columns(reader, format)?;
    if let Some(i) = closes.iter().position(|p| !(*p > 0.0)) {
        return Err(Error::ParameterDomain(format!("non-positive price {} at line {}", closes[i], lines[i])));
    }
    Ok(PriceSeries { dates, closes })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn load_prices(path: impl AsRef<Path>, format: &CsvFormat) -> Result<PriceSeries> {
    parse_prices(open(path.as_ref())?, format)
}

/// Percentage log returns `100 ln(p_t / p_{t-1})`.
pub fn to_returns(prices: &PriceSeries) -> Result<ReturnSeries<f64>> {
    if prices.len() < 2 {
        return Err(Error::SampleTooSmall { required: 2, actual: prices.len() });
    }
    ReturnSeries::new(prices.closes.windows(2).map(|w| 100.0 * (w[1] / w[0]).ln()).collect())
}

/// Dated returns read from or written to a `date,return` file.
#[derive(Debug, Clone, PartialEq)]
pub struct DatedReturns {
    pub dates: Vec<String>,
    pub returns: ReturnSeries<f64>,
}

impl DatedReturns {
    pub fn from_prices(prices: &PriceSeries) -> Result<Self> {
        Ok(Self { dates: prices.return_dates().to_vec(), returns: to_returns(prices)? })
    }

    /// Zero-padded labels `1..=n` for series without dates, so that they
    /// sort in order.
    pub fn undated(returns: ReturnSeries<f64>) -> Self {
        let width = returns.len().to_string().len();
        Self { dates: (1..=returns.len()).map(|i| format!("{i:0width$}")).collect(), returns }
    }
}

pub fn parse_returns<R: Read>(reader: R, format: &CsvFormat) -> Result<DatedReturns> {
    let (dates, values, _) = read_two_columns(reader, format)?;
    Ok(DatedReturns { dates, returns: ReturnSeries::new(values)? })
}

pub fn load_returns(path: impl AsRef<Path>, format: &CsvFormat) -> Result<DatedReturns> {
    parse_returns(open(path.as_ref())?, format)
}

/// Writes `date,return` rows; values use the shortest round-trip formatting.
pub fn write_returns<W: Write>(writer: W, data: &DatedReturns) -> Result<()> {
    if data.dates.len() != data.returns.len() {
        return Err(Error::Validation("dates and returns differ in length".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "return"])?;
    for (d, r) in data.dates.iter().zip(data.returns.values()) {
        w.write_record([d.as_str(), &r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_returns(path: impl AsRef<Path>, data: &DatedReturns) -> Result<()> {
    write_returns(File::create(path)?, data)
}
