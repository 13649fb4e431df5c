//! Dataset ingestion, seeded train/test splitting, and the three
//! performance indices (MAE, MSE, NLPD).
//!
//! Splits use a ChaCha8 stream seeded from the split spec, so identical
//! specs reproduce identical partitions across runs and platforms.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("column '{0}' not found in header")]
    MissingColumn(String),
    #[error("timestamps not strictly increasing at row {row}")]
    NonMonotonicTimestamps { row: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
}

/// A scalar time series with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    timestamps: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self, DataError> {
        if timestamps.len() != values.len() {
            return Err(DataError::LengthMismatch {
                left: timestamps.len(),
                right: values.len(),
            });
        }
        for (i, v) in timestamps.iter().chain(values.iter()).enumerate() {
            if !v.is_finite() {
                return Err(DataError::Parse {
                    row: i,
                    column: String::new(),
                    message: "non-finite value".into(),
                });
            }
        }
        for i in 1..timestamps.len() {
            if timestamps[i] <= timestamps[i - 1] {
                return Err(DataError::NonMonotonicTimestamps { row: i });
            }
        }
        Ok(TimeSeries { timestamps, values })
    }

    pub fn empty() -> Self {
        TimeSeries {
            timestamps: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.timestamps
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    fn take(&self, indices: &[usize]) -> TimeSeries {
        TimeSeries {
            timestamps: indices.iter().map(|&i| self.timestamps[i]).collect(),
            values: indices.iter().map(|&i| self.values[i]).collect(),
        }
    }
}

/// Loads a CSV with a header row. Rows with missing or unparseable entries
/// in the selected columns are rejected with their file row number.
pub fn load_csv(
    path: &Path,
    time_column: &str,
    value_column: &str,
) -> Result<TimeSeries, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => DataError::Io {
                path: path.display().to_string(),
                source,
            },
            other => DataError::Parse {
                row: 0,
                column: String::new(),
                message: format!("{other:?}"),
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| DataError::Parse {
            row: 1,
            column: String::new(),
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() {
        return Err(DataError::Parse {
            row: 1,
            column: String::new(),
            message: "empty file".into(),
        });
    }
    let time_idx = headers
        .iter()
        .position(|h| h == time_column)
        .ok_or_else(|| DataError::MissingColumn(time_column.to_string()))?;
    let value_idx = headers
        .iter()
        .position(|h| h == value_column)
        .ok_or_else(|| DataError::MissingColumn(value_column.to_string()))?;

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    // header is file row 1; data starts at row 2
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| DataError::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let parse = |idx: usize, column: &str| -> Result<f64, DataError> {
            let raw = record.get(idx).unwrap_or("").trim();
            if raw.is_empty() {
                return Err(DataError::Parse {
                    row,
                    column: column.to_string(),
                    message: "missing value".into(),
                });
            }
            raw.parse::<f64>().map_err(|e| DataError::Parse {
                row,
                column: column.to_string(),
                message: e.to_string(),
            })
        };
        let t = parse(time_idx, time_column)?;
        let v = parse(value_idx, value_column)?;
        if !t.is_finite() || !v.is_finite() {
            return Err(DataError::Parse {
                row,
                column: value_column.to_string(),
                message: "non-finite value".into(),
            });
        }
        if let Some(&last) = timestamps.last() {
            if t <= last {
                return Err(DataError::NonMonotonicTimestamps { row });
            }
        }
        timestamps.push(t);
        values.push(v);
    }
    if timestamps.is_empty() {
        return Err(DataError::Parse {
            row: 1,
            column: String::new(),
            message: "no data rows".into(),
        });
    }
    Ok(TimeSeries { timestamps, values })
}

/// How a series is partitioned into train and test sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SplitMode {
    /// Training points drawn uniformly without replacement inside
    /// `train_window`; the window complement is the reconstruction test set
    /// and everything after `forecast_from` the forecast test set.
    ReconstructForecast {
        train_window: [f64; 2],
        train_count: usize,
        forecast_from: f64,
    },
    /// Training points drawn uniformly from the whole series; the
    /// complement is the reconstruction test set. Exactly one of
    /// `train_count` and `fraction` must be given.
    RandomFraction {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_count: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fraction: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub seed: u64,
}

/// Disjoint partition of a series.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: TimeSeries,
    pub test_reconstruct: TimeSeries,
    pub test_forecast: TimeSeries,
}

/// Draws `count` indices uniformly without replacement from `0..n` by a
/// partial Fisher-Yates shuffle, returned in ascending order.
fn sample_indices(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.random_range(i..n);
        indices.swap(i, j);
    }
    let mut chosen = indices[..count].to_vec();
    chosen.sort_unstable();
    chosen
}

pub fn split(series: &TimeSeries, spec: &SplitSpec) -> Result<Split, DataError> {
    if series.is_empty() {
        return Err(DataError::Empty("series"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.mode {
        SplitMode::ReconstructForecast {
            train_window,
            train_count,
            forecast_from,
        } => {
            let [a, b] = train_window;
            if !(a <= b) {
                return Err(DataError::InvalidSplit(format!(
                    "train window [{a}, {b}] is empty"
                )));
            }
            if forecast_from < b {
                return Err(DataError::InvalidSplit(format!(
                    "forecast_from {forecast_from} precedes the window end {b}; \
                     partitions would overlap"
                )));
            }
            let window: Vec<usize> = (0..series.len())
                .filter(|&i| series.timestamps[i] >= a && series.timestamps[i] <= b)
                .collect();
            if window.is_empty() {
                return Err(DataError::InvalidSplit(format!(
                    "no points inside the train window [{a}, {b}]"
                )));
            }
            if train_count > window.len() {
                return Err(DataError::InvalidSplit(format!(
                    "train_count {train_count} exceeds the {} points in the window",
                    window.len()
                )));
            }
            let picks = sample_indices(&mut rng, window.len(), train_count);
            let train_idx: Vec<usize> = picks.iter().map(|&p| window[p]).collect();
            let mut in_train = vec![false; series.len()];
            for &i in &train_idx {
                in_train[i] = true;
            }
            let reconstruct_idx: Vec<usize> =
                window.iter().copied().filter(|&i| !in_train[i]).collect();
            let forecast_idx: Vec<usize> = (0..series.len())
                .filter(|&i| series.timestamps[i] > forecast_from)
                .collect();
            Ok(Split {
                train: series.take(&train_idx),
                test_reconstruct: series.take(&reconstruct_idx),
                test_forecast: series.take(&forecast_idx),
            })
        }
        SplitMode::RandomFraction {
            train_count,
            fraction,
        } => {
            let count = match (train_count, fraction) {
                (Some(c), None) => c,
                (None, Some(f)) => {
                    if !(0.0..=1.0).contains(&f) {
                        return Err(DataError::InvalidSplit(format!(
                            "fraction must lie in [0, 1], got {f}"
                        )));
                    }
                    (f * series.len() as f64).round() as usize
                }
                _ => {
                    return Err(DataError::InvalidSplit(
                        "specify exactly one of train_count and fraction".into(),
                    ))
                }
            };
            if count > series.len() {
                return Err(DataError::InvalidSplit(format!(
                    "train_count {count} exceeds the {} available points",
                    series.len()
                )));
            }
            let train_idx = sample_indices(&mut rng, series.len(), count);
            let mut in_train = vec![false; series.len()];
            for &i in &train_idx {
                in_train[i] = true;
            }
            let rest: Vec<usize> = (0..series.len()).filter(|&i| !in_train[i]).collect();
            Ok(Split {
                train: series.take(&train_idx),
                test_reconstruct: series.take(&rest),
                test_forecast: TimeSeries::empty(),
            })
        }
    }
}

/// The three performance indices; all are lower-is-better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub mae: f64,
    pub mse: f64,
    pub nlpd: f64,
}

/// MAE and MSE of point predictions plus the negative log predictive
/// density, `-mean(log p_i(y_i))`, from precomputed log-densities.
pub fn score(y_true: &[f64], y_point: &[f64], log_densities: &[f64]) -> Result<Scores, DataError> {
    let n = y_true.len();
    if n == 0 {
        return Err(DataError::Empty("score inputs"));
    }
    if y_point.len() != n {
        return Err(DataError::LengthMismatch {
            left: n,
            right: y_point.len(),
        });
    }
    if log_densities.len() != n {
        return Err(DataError::LengthMismatch {
            left: n,
            right: log_densities.len(),
        });
    }
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut ld_sum = 0.0;
    for i in 0..n {
        let d = y_true[i] - y_point[i];
        abs_sum += d.abs();
        sq_sum += d * d;
        ld_sum += log_densities[i];
    }
    Ok(Scores {
        mae: abs_sum / n as f64,
        mse: sq_sum / n as f64,
        nlpd: -ld_sum / n as f64,
    })
}
