//! Daily price-index series: CSV ingestion, log transforms, returns and
//! descriptive statistics of log returns.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the values of a series are index levels or their natural log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Raw,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub date: NaiveDate,
    pub value: f64,
}

/// An ordered run of weekday observations.
///
/// Construction checks that dates are strictly increasing weekdays, that all
/// values are finite, and that raw values are positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    name: String,
    scale: Scale,
    observations: Vec<Observation>,
}

pub fn is_weekday(date: NaiveDate) -> bool {
    !matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Parses `YYYY-MM-DD` or `DD-Mon-YYYY` (e.g. `07-Dec-1987`).
pub fn parse_date(text: &str) -> Option<NaiveDate> {
    let text = text.trim();
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(text, "%d-%b-%Y"))
        .ok()
}

impl PriceSeries {
    pub fn new(
        name: impl Into<String>,
        scale: Scale,
        observations: Vec<Observation>,
    ) -> Result<Self> {
        for (i, obs) in observations.iter().enumerate() {
            if !is_weekday(obs.date) {
                return Err(Error::Data(format!("{} is not a weekday", obs.date)));
            }
            if !obs.value.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite value {} on {}",
                    obs.value, obs.date
                )));
            }
            if scale == Scale::Raw && obs.value <= 0.0 {
                return Err(Error::Data(format!(
                    "non-positive raw value {} on {}",
                    obs.value, obs.date
                )));
            }
            if i > 0 && observations[i - 1].date >= obs.date {
                return Err(Error::Data(format!(
                    "dates not strictly increasing at {}",
                    obs.date
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            scale,
            observations,
        })
    }

    /// Builds a series from parallel date/value slices.
    pub fn from_pairs(
        name: impl Into<String>,
        scale: Scale,
        dates: &[NaiveDate],
        values: &[f64],
    ) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Usage(format!(
                "{} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        let observations = dates
            .iter()
            .zip(values)
            .map(|(&date, &value)| Observation { date, value })
            .collect();
        Self::new(name, scale, observations)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.observations.iter().map(|o| o.date)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.value)
    }

    pub fn first(&self) -> Option<&Observation> {
        self.observations.first()
    }

    pub fn last(&self) -> Option<&Observation> {
        self.observations.last()
    }

    /// Position of an exact date.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.observations
            .binary_search_by_key(&date, |o| o.date)
            .ok()
    }

    /// Contiguous sub-series by observation index.
    pub fn slice(&self, range: Range<usize>) -> PriceSeries {
        PriceSeries {
            name: self.name.clone(),
            scale: self.scale,
            observations: self.observations[range].to_vec(),
        }
    }

    /// Natural log of every value.
    pub fn to_log(&self) -> Result<PriceSeries> {
        if self.scale != Scale::Raw {
            return Err(Error::Usage(format!(
                "series `{}` is already on the log scale",
                self.name
            )));
        }
        Ok(self.map_values(Scale::Log, f64::ln))
    }

    /// Inverse of [`PriceSeries::to_log`].
    pub fn to_raw(&self) -> Result<PriceSeries> {
        if self.scale != Scale::Log {
            return Err(Error::Usage(format!(
                "series `{}` is already on the raw scale",
                self.name
            )));
        }
        Ok(self.map_values(Scale::Raw, f64::exp))
    }

    fn map_values(&self, scale: Scale, f: impl Fn(f64) -> f64) -> PriceSeries {
        PriceSeries {
            name: self.name.clone(),
            scale,
            observations: self
                .observations
                .iter()
                .map(|o| Observation {
                    date: o.date,
                    value: f(o.value),
                })
                .collect(),
        }
    }

    /// Writes `date,value` rows with ISO dates, the schema [`read_csv`] accepts.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["date", "value"])?;
        for obs in &self.observations {
            out.write_record([obs.date.to_string(), format!("{}", obs.value)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// A parsed CSV plus what was discarded along the way.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub series: PriceSeries,
    pub weekend_rows_dropped: usize,
}

pub fn load_csv(path: &Path, date_column: &str, value_column: &str) -> Result<Ingested> {
    let file = std::fs::File::open(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, name, date_column, value_column)
}

/// Reads a headed CSV of raw index levels. Rows may come in any order;
/// Saturday and Sunday rows are dropped and counted.
pub fn read_csv<R: Read>(
    reader: R,
    name: impl Into<String>,
    date_column: &str,
    value_column: &str,
) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |column: &str| {
        headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| Error::Config(format!("column `{column}` not found in CSV header")))
    };
    let date_idx = find(date_column)?;
    let value_idx = find(value_column)?;

    let mut observations = Vec::new();
    let mut weekend_rows_dropped = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based data row; the header is line 1 of the file.
        let row = row + 1;
        let date_text = record.get(date_idx).unwrap_or("");
        let value_text = record.get(value_idx).unwrap_or("");
        let date = parse_date(date_text)
            .ok_or_else(|| Error::Data(format!("row {row}: unparseable date `{date_text}`")))?;
        let value: f64 = value_text
            .parse()
            .map_err(|_| Error::Data(format!("row {row}: unparseable value `{value_text}`")))?;
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::Data(format!(
                "row {row}: value {value} on {date} is not a positive number"
            )));
        }
        if !is_weekday(date) {
            weekend_rows_dropped += 1;
            continue;
        }
        observations.push(Observation { date, value });
    }
    observations.sort_by_key(|o| o.date);
    if let Some(pair) = observations.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(Error::Data(format!("duplicate date {}", pair[0].date)));
    }
    Ok(Ingested {
        series: PriceSeries::new(name, Scale::Raw, observations)?,
        weekend_rows_dropped,
    })
}

/// Consecutive log differences of a raw series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub observations: Vec<Observation>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.value)
    }
}

pub fn log_returns(series: &PriceSeries) -> Result<ReturnSeries> {
    if series.scale() != Scale::Raw {
        return Err(Error::Usage("log returns need a raw-scale series".into()));
    }
    if series.len() < 2 {
        return Err(Error::Usage(format!(
            "log returns need at least 2 observations, got {}",
            series.len()
        )));
    }
    let observations = series
        .observations()
        .windows(2)
        .map(|w| Observation {
            date: w[1].date,
            value: (w[1].value / w[0].value).ln(),
        })
        .collect();
    Ok(ReturnSeries { observations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jarque_bera: f64,
    pub jb_p_value: f64,
}

/// Moments use n-denominator (population) estimators throughout; the
/// Jarque-Bera p-value is the chi-squared(2) survival function, `exp(-JB/2)`.
pub fn descriptive_stats(returns: &ReturnSeries) -> Result<StatsReport> {
    let n = returns.len();
    if n < 4 {
        return Err(Error::Usage(format!(
            "descriptive statistics need at least 4 returns, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = returns.values().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in returns.values() {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    // Rounding in the mean leaves O(eps * |x|) deviations on constant input.
    let magnitude = returns.values().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = 4.0 * f64::EPSILON * magnitude;
    if m2 <= floor * floor {
        return Err(Error::Degenerate("returns have zero variance".into()));
    }
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let jarque_bera = nf / 6.0 * (skewness * skewness + excess_kurtosis * excess_kurtosis / 4.0);
    Ok(StatsReport {
        n,
        mean,
        variance: m2,
        skewness,
        excess_kurtosis,
        jarque_bera,
        jb_p_value: (-jarque_bera / 2.0).exp(),
    })
}
