//! Time-series value type, CSV ingestion and preprocessing operations.
//!
//! Missing observations are stored as `NaN`. Every analysis downstream
//! requires a complete series, so impute first.

use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{parse_timestamp, FieldType, InputSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("header mismatch: expected fields {expected:?}, found {found:?}")]
    HeaderMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("series has no data rows")]
    EmptySeries,
    #[error("every value is missing")]
    AllMissing,
    #[error("series is degenerate: {0}")]
    DegenerateSeries(String),
    #[error("window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("series of length {len} is too short: {needed}")]
    SeriesTooShort { len: usize, needed: String },
    #[error("Box-Cox with lambda {lambda} needs positive values, found {value}")]
    NonPositiveValue { lambda: f64, value: f64 },
    #[error("series contains {0} missing values; impute first")]
    MissingValues(usize),
    #[error("row {row}: cannot parse timestamp `{value}`")]
    InvalidTimestamp { row: usize, value: String },
    #[error("timestamps are not strictly increasing at row {0}")]
    UnorderedTimestamps(usize),
    #[error("source type {0} cannot be read")]
    UnsupportedSource(String),
}

/// Ordered observations with optional timestamps and seasonal frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub name: String,
    pub values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<Vec<NaiveDateTime>>,
    /// Observations per seasonal period; at least 2 when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency: Option<u32>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        TimeSeries {
            name: name.into(),
            values,
            timestamps: None,
            frequency: None,
        }
    }

    pub fn with_frequency(mut self, frequency: Option<u32>) -> Self {
        self.frequency = frequency.filter(|&f| f >= 2);
        self
    }

    /// Attaches timestamps; they must match the values in length and be
    /// strictly increasing.
    pub fn with_timestamps(mut self, ts: Vec<NaiveDateTime>) -> Result<Self, SeriesError> {
        if ts.len() != self.values.len() {
            return Err(SeriesError::Csv(format!(
                "{} timestamps for {} values",
                ts.len(),
                self.values.len()
            )));
        }
        if let Some(i) = ts.windows(2).position(|w| w[1] <= w[0]) {
            return Err(SeriesError::UnorderedTimestamps(i + 1));
        }
        self.timestamps = Some(ts);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// The values, or `MissingValues` when any is NaN.
    pub fn complete_values(&self) -> Result<&[f64], SeriesError> {
        match self.missing_count() {
            0 => Ok(&self.values),
            k => Err(SeriesError::MissingValues(k)),
        }
    }

    /// Same metadata, new values. Timestamps are kept only when the length
    /// is unchanged.
    pub fn map_values(&self, values: Vec<f64>) -> TimeSeries {
        let timestamps = self
            .timestamps
            .as_ref()
            .filter(|t| t.len() == values.len())
            .cloned();
        TimeSeries {
            name: self.name.clone(),
            values,
            timestamps,
            frequency: self.frequency,
        }
    }

    /// Drops the first `skip` observations, keeping timestamps aligned.
    fn tail(&self, skip: usize, values: Vec<f64>) -> TimeSeries {
        TimeSeries {
            name: self.name.clone(),
            timestamps: self
                .timestamps
                .as_ref()
                .map(|t| t[skip..skip + values.len()].to_vec()),
            values,
            frequency: self.frequency,
        }
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Variance with divisor `n - 1`.
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Variance with divisor `n`.
pub fn population_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

pub fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Finds the file a document locator refers to. Locators are tried as
/// given, relative to `data_root` with leading slashes removed, and finally
/// by file name alone under `data_root`.
pub fn resolve_locator(locator: &str, data_root: &Path) -> Option<PathBuf> {
    let trimmed = locator.strip_prefix("file:").unwrap_or(locator);
    let direct = Path::new(trimmed);
    if direct.is_absolute() && direct.is_file() {
        return Some(direct.to_path_buf());
    }
    let relative = trimmed.trim_start_matches('/');
    let candidate = data_root.join(relative);
    if candidate.is_file() {
        return Some(candidate);
    }
    let by_name = data_root.join(Path::new(relative).file_name()?);
    by_name.is_file().then_some(by_name)
}

/// Result of reading a CSV input: the series plus per-row warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub series: TimeSeries,
    pub warnings: Vec<String>,
}

/// Reads the CSV file named by `spec` (resolved under `data_root`).
pub fn ingest_input(spec: &InputSpec, data_root: &Path) -> Result<Ingested, SeriesError> {
    if !spec.source_kind.ends_with("/CSVFile") {
        return Err(SeriesError::UnsupportedSource(crate::vocabulary::compact(
            &spec.source_kind,
        )));
    }
    let path = resolve_locator(&spec.src, data_root).ok_or_else(|| SeriesError::Io {
        path: spec.src.clone(),
        message: format!("not found under {}", data_root.display()),
    })?;
    ingest_csv(&path, spec)
}

/// Reads a header-first CSV file. The datetime field, if declared, becomes
/// the timestamps; the first numeric field becomes the values. Unparseable
/// numbers become NaN with a warning.
pub fn ingest_csv(path: &Path, spec: &InputSpec) -> Result<Ingested, SeriesError> {
    let io_err = |e: &dyn std::fmt::Display| SeriesError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let file = std::fs::File::open(path).map_err(|e| io_err(&e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| SeriesError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let expected: Vec<String> = spec.fields.iter().map(|f| f.name.clone()).collect();
    let column = |name: &str| header.iter().position(|h| h == name);
    if expected.iter().any(|f| column(f).is_none()) {
        return Err(SeriesError::HeaderMismatch {
            expected,
            found: header,
        });
    }
    let value_field = spec
        .fields
        .iter()
        .find(|f| f.dtype.is_numeric())
        .ok_or_else(|| SeriesError::HeaderMismatch {
            expected: expected.clone(),
            found: header.clone(),
        })?;
    let value_col = column(&value_field.name).unwrap();
    let time_col = spec
        .fields
        .iter()
        .find(|f| f.dtype == FieldType::Datetime)
        .and_then(|f| column(&f.name));

    let mut values = Vec::new();
    let mut stamps = Vec::new();
    let mut warnings = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SeriesError::Csv(e.to_string()))?;
        let row = i + 2;
        let cell = record.get(value_col).unwrap_or("").trim();
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => {
                warnings.push(format!(
                    "row {row}: `{cell}` in {} is not a number; treated as missing",
                    value_field.name
                ));
                values.push(f64::NAN);
            }
        }
        if let Some(tc) = time_col {
            let raw = record.get(tc).unwrap_or("").trim();
            let ts = parse_timestamp(raw).ok_or_else(|| SeriesError::InvalidTimestamp {
                row,
                value: raw.to_string(),
            })?;
            stamps.push(ts);
        }
    }
    if values.is_empty() {
        return Err(SeriesError::EmptySeries);
    }
    let mut series = TimeSeries::new(value_field.name.clone(), values).with_frequency(spec.frequency());
    if time_col.is_some() {
        series = series.with_timestamps(stamps)?;
    }
    Ok(Ingested { series, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeMethod {
    Mean,
    Linear,
}

/// Fills missing values. Linear interpolation holds the nearest observed
/// value flat beyond either end.
pub fn impute(ts: &TimeSeries, method: ImputeMethod) -> Result<TimeSeries, SeriesError> {
    let known: Vec<usize> = (0..ts.len()).filter(|&i| !ts.values[i].is_nan()).collect();
    if known.is_empty() {
        return Err(SeriesError::AllMissing);
    }
    let mut out = ts.values.clone();
    match method {
        ImputeMethod::Mean => {
            let m = known.iter().map(|&i| ts.values[i]).sum::<f64>() / known.len() as f64;
            out.iter_mut().filter(|v| v.is_nan()).for_each(|v| *v = m);
        }
        ImputeMethod::Linear => {
            let first = known[0];
            let last = *known.last().unwrap();
            for v in &mut out[..first] {
                *v = ts.values[first];
            }
            for v in &mut out[last + 1..] {
                *v = ts.values[last];
            }
            for pair in known.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                let (ya, yb) = (ts.values[a], ts.values[b]);
                for (i, v) in out.iter_mut().enumerate().take(b).skip(a + 1) {
                    let t = (i - a) as f64 / (b - a) as f64;
                    *v = ya + t * (yb - ya);
                }
            }
        }
    }
    Ok(ts.map_values(out))
}

/// Indices whose z-score (sample standard deviation) exceeds `threshold`.
pub fn detect_outliers(ts: &TimeSeries, threshold: f64) -> Result<Vec<usize>, SeriesError> {
    let x = ts.complete_values()?;
    if x.len() < 3 {
        return Err(SeriesError::SeriesTooShort {
            len: x.len(),
            needed: "at least 3 observations".into(),
        });
    }
    let sd = sample_variance(x).sqrt();
    if !(sd > 0.0) {
        return Err(SeriesError::DegenerateSeries("zero variance".into()));
    }
    let m = mean(x);
    Ok((0..x.len())
        .filter(|&i| ((x[i] - m) / sd).abs() > threshold)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMethod {
    Zscore,
    Minmax,
}

pub fn scale(ts: &TimeSeries, method: ScaleMethod) -> Result<TimeSeries, SeriesError> {
    let x = ts.complete_values()?;
    if x.is_empty() {
        return Err(SeriesError::EmptySeries);
    }
    let out = match method {
        ScaleMethod::Zscore => {
            if x.len() < 2 {
                return Err(SeriesError::DegenerateSeries("single observation".into()));
            }
            let m = mean(x);
            let sd = sample_variance(x).sqrt();
            if !(sd > 0.0) {
                return Err(SeriesError::DegenerateSeries("zero variance".into()));
            }
            let centered: Vec<f64> = x.iter().map(|v| v - m).collect();
            // re-centre to cancel the rounding left by the first pass
            let drift = mean(&centered);
            centered.iter().map(|v| (v - drift) / sd).collect()
        }
        ScaleMethod::Minmax => {
            let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return Err(SeriesError::DegenerateSeries("max equals min".into()));
            }
            x.iter()
                .map(|&v| if v == hi { 1.0 } else { (v - lo) / (hi - lo) })
                .collect()
        }
    };
    Ok(ts.map_values(out))
}

/// Centred moving average; the result has `n - window + 1` points.
pub fn smooth_ma(ts: &TimeSeries, window: usize) -> Result<TimeSeries, SeriesError> {
    let x = ts.complete_values()?;
    if window == 0 || window > x.len() {
        return Err(SeriesError::WindowTooLarge {
            window,
            len: x.len(),
        });
    }
    if window == 1 {
        return Ok(ts.clone());
    }
    let out: Vec<f64> = x
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect();
    Ok(ts.tail((window - 1) / 2, out))
}

/// A chain of lag differences `(1 - B^k)` together with the values needed
/// to undo them.
#[derive(Debug, Clone, PartialEq)]
pub struct Differencing {
    lags: Vec<usize>,
    /// Input of each layer, outermost first.
    stages: Vec<Vec<f64>>,
}

impl Differencing {
    pub fn lags(d: usize, seasonal: usize, period: usize) -> Vec<usize> {
        let mut lags = vec![1; d];
        lags.extend(std::iter::repeat_n(period, seasonal));
        lags
    }

    /// Applies `(1-B)^d (1-B^s)^D` to `x`.
    pub fn apply(x: &[f64], lags: Vec<usize>) -> Result<(Vec<f64>, Differencing), SeriesError> {
        let total: usize = lags.iter().sum();
        if x.len() <= total {
            return Err(SeriesError::SeriesTooShort {
                len: x.len(),
                needed: format!("more than {total} observations for differencing"),
            });
        }
        let mut stages = Vec::with_capacity(lags.len());
        let mut cur = x.to_vec();
        for &k in &lags {
            let next: Vec<f64> = (k..cur.len()).map(|t| cur[t] - cur[t - k]).collect();
            stages.push(std::mem::replace(&mut cur, next));
        }
        Ok((cur, Differencing { lags, stages }))
    }

    /// Number of observations lost to differencing.
    pub fn shift(&self) -> usize {
        self.lags.iter().sum()
    }

    /// Rebuilds the original series from its differences and the stored
    /// initial values.
    pub fn integrate(&self, diffs: &[f64]) -> Vec<f64> {
        let mut cur = diffs.to_vec();
        for (k, stage) in self.lags.iter().zip(&self.stages).rev() {
            let mut z = stage[..*k].to_vec();
            for (i, w) in cur.iter().enumerate() {
                z.push(w + z[i]);
            }
            cur = z;
        }
        cur
    }

    /// Carries values that continue the differenced series forward onto the
    /// original scale.
    pub fn extend(&self, future: &[f64]) -> Vec<f64> {
        let mut cur = future.to_vec();
        for (k, stage) in self.lags.iter().zip(&self.stages).rev() {
            let mut z = stage.clone();
            let m = z.len();
            for (j, w) in cur.iter().enumerate() {
                let prev = z[m + j - k];
                z.push(w + prev);
            }
            cur = z[m..].to_vec();
        }
        cur
    }
}

/// `(1-B)^d (1-B^s)^D` applied to a series.
pub fn difference(ts: &TimeSeries, d: usize, seasonal: usize, period: usize) -> Result<TimeSeries, SeriesError> {
    let x = ts.complete_values()?;
    let lags = Differencing::lags(d, seasonal, period);
    let shift: usize = lags.iter().sum();
    let (out, _) = Differencing::apply(x, lags)?;
    Ok(ts.tail(shift, out))
}

/// Box-Cox transform; `lambda == 0` is the natural logarithm.
pub fn transform(ts: &TimeSeries, lambda: f64) -> Result<TimeSeries, SeriesError> {
    Ok(ts.map_values(box_cox(ts.complete_values()?, lambda)?))
}

pub fn box_cox(x: &[f64], lambda: f64) -> Result<Vec<f64>, SeriesError> {
    if lambda <= 0.0 {
        if let Some(&bad) = x.iter().find(|v| !(**v > 0.0)) {
            return Err(SeriesError::NonPositiveValue { lambda, value: bad });
        }
    }
    Ok(x.iter()
        .map(|&v| {
            if lambda == 0.0 {
                v.ln()
            } else {
                (v.powf(lambda) - 1.0) / lambda
            }
        })
        .collect())
}

pub fn inverse_box_cox(y: &[f64], lambda: f64) -> Vec<f64> {
    y.iter()
        .map(|&v| {
            if lambda == 0.0 {
                v.exp()
            } else {
                (lambda * v + 1.0).powf(1.0 / lambda)
            }
        })
        .collect()
}

pub fn inverse_transform(ts: &TimeSeries, lambda: f64) -> TimeSeries {
    ts.map_values(inverse_box_cox(&ts.values, lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub frequency: f64,
    pub power: f64,
}

/// Periodogram of the mean-removed series at the Fourier frequencies
/// `k/n`, `k = 1..=n/2`. Power is `|X_k|^2 / n`; the Nyquist bin of an
/// even-length series is shared with its mirror image and counts half, so
/// that the powers add up to `n/2` times the population variance.
pub fn periodogram(ts: &TimeSeries) -> Result<Vec<SpectrumPoint>, SeriesError> {
    let x = ts.complete_values()?;
    let n = x.len();
    if n < 4 {
        return Err(SeriesError::SeriesTooShort {
            len: n,
            needed: "at least 4 observations".into(),
        });
    }
    let m = mean(x);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - m, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok((1..=n / 2)
        .map(|k| {
            let mut power = buf[k].norm_sqr() / n as f64;
            if 2 * k == n {
                power /= 2.0;
            }
            SpectrumPoint {
                frequency: k as f64 / n as f64,
                power,
            }
        })
        .collect())
}
