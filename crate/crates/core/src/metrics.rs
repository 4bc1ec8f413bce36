//! Evaluation measures: forecast accuracy, similarity and binary
//! classification scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::median;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("series is empty")]
    EmptySeries,
    #[error("{measure} is undefined: actual value at index {index} is zero")]
    ZeroActual { measure: &'static str, index: usize },
    #[error("MASE needs a training series with at least two points")]
    MissingTraining,
    #[error("{measure} has a zero denominator{}", .index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    ZeroDenominator {
        measure: &'static str,
        index: Option<usize>,
    },
    #[error("band {band} is narrower than the length difference {diff}")]
    BandTooNarrow { band: usize, diff: usize },
    #[error("label {0} is not binary")]
    NonBinaryLabels(i64),
    #[error("`{0}` is not an executable measure")]
    UnknownMeasure(String),
}

/// The forecast-accuracy measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    ME,
    MSE,
    RMSE,
    MAE,
    MdAE,
    MPE,
    MAPE,
    #[serde(rename = "sMAPE")]
    SMAPE,
    MASE,
}

impl Measure {
    pub const ALL: [Measure; 9] = [
        Measure::ME,
        Measure::MSE,
        Measure::RMSE,
        Measure::MAE,
        Measure::MdAE,
        Measure::MPE,
        Measure::MAPE,
        Measure::SMAPE,
        Measure::MASE,
    ];

    pub fn local_name(self) -> &'static str {
        match self {
            Measure::ME => "ME",
            Measure::MSE => "MSE",
            Measure::RMSE => "RMSE",
            Measure::MAE => "MAE",
            Measure::MdAE => "MdAE",
            Measure::MPE => "MPE",
            Measure::MAPE => "MAPE",
            Measure::SMAPE => "sMAPE",
            Measure::MASE => "MASE",
        }
    }

    pub fn curie(self) -> String {
        format!("tswf:{}", self.local_name())
    }

    pub fn from_local(name: &str) -> Option<Self> {
        Measure::ALL.into_iter().find(|m| m.local_name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub measure: String,
    /// The model whose forecasts were scored, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub value: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    Ok(())
}

fn avg(it: impl Iterator<Item = f64>, n: usize) -> f64 {
    it.sum::<f64>() / n as f64
}

/// Evaluates each measure on `e = actual - predicted`.
pub fn forecast_accuracy(
    actual: &[f64],
    predicted: &[f64],
    measures: &[Measure],
    training: Option<&[f64]>,
) -> Result<Vec<MeasureValue>, MetricsError> {
    check_pair(actual, predicted)?;
    let n = actual.len();
    let e: Vec<f64> = actual.iter().zip(predicted).map(|(y, f)| y - f).collect();
    let abs: Vec<f64> = e.iter().map(|v| v.abs()).collect();
    let nonzero = |measure| match actual.iter().position(|y| *y == 0.0) {
        Some(index) => Err(MetricsError::ZeroActual { measure, index }),
        None => Ok(()),
    };

    measures
        .iter()
        .map(|&m| {
            let value = match m {
                Measure::ME => avg(e.iter().copied(), n),
                Measure::MSE => avg(e.iter().map(|v| v * v), n),
                Measure::RMSE => avg(e.iter().map(|v| v * v), n).sqrt(),
                Measure::MAE => avg(abs.iter().copied(), n),
                Measure::MdAE => median(&abs),
                Measure::MPE => {
                    nonzero("MPE")?;
                    avg(e.iter().zip(actual).map(|(e, y)| 100.0 * e / y), n)
                }
                Measure::MAPE => {
                    nonzero("MAPE")?;
                    avg(abs.iter().zip(actual).map(|(e, y)| 100.0 * e / y.abs()), n)
                }
                Measure::SMAPE => {
                    let mut total = 0.0;
                    for (i, ((y, f), a)) in actual.iter().zip(predicted).zip(&abs).enumerate() {
                        let den = y.abs() + f.abs();
                        if den == 0.0 {
                            return Err(MetricsError::ZeroDenominator {
                                measure: "sMAPE",
                                index: Some(i),
                            });
                        }
                        total += 200.0 * a / den;
                    }
                    total / n as f64
                }
                Measure::MASE => {
                    let train = training.filter(|t| t.len() >= 2).ok_or(MetricsError::MissingTraining)?;
                    let scale = avg(train.windows(2).map(|w| (w[1] - w[0]).abs()), train.len() - 1);
                    if scale == 0.0 {
                        return Err(MetricsError::ZeroDenominator {
                            measure: "MASE",
                            index: None,
                        });
                    }
                    avg(abs.iter().copied(), n) / scale
                }
            };
            Ok(MeasureValue {
                measure: m.curie(),
                model: None,
                value,
                n,
                confusion: None,
            })
        })
        .collect()
}

/// Dynamic time warping with absolute-difference cost and an optional
/// Sakoe-Chiba band of half-width `band`.
pub fn dtw(x: &[f64], y: &[f64], band: Option<usize>) -> Result<f64, MetricsError> {
    if x.is_empty() || y.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let (n, m) = (x.len(), y.len());
    if let Some(b) = band {
        let diff = n.abs_diff(m);
        if b < diff {
            return Err(MetricsError::BandTooNarrow { band: b, diff });
        }
    }
    let inside = |i: usize, j: usize| band.is_none_or(|b| i.abs_diff(j) <= b);
    // rolling rows over the (n+1) x (m+1) cost table
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            cur[j] = if inside(i, j) {
                let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
                (x[i - 1] - y[j - 1]).abs() + best
            } else {
                f64::INFINITY
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

pub fn euclidean(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pair(x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub confusion: ConfusionMatrix,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Binary scores with label 1 as the positive class; any 0/0 ratio is 0.
pub fn classification_scores(actual: &[i64], predicted: &[i64]) -> Result<ClassificationScores, MetricsError> {
    if actual.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    if let Some(bad) = actual.iter().chain(predicted).find(|v| !matches!(v, 0 | 1)) {
        return Err(MetricsError::NonBinaryLabels(*bad));
    }
    let mut c = ConfusionMatrix::default();
    for (a, p) in actual.iter().zip(predicted) {
        match (a, p) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (0, 0) => c.tn += 1,
            _ => c.fn_ += 1,
        }
    }
    let precision = ratio(c.tp as f64, (c.tp + c.fp) as f64);
    let recall = ratio(c.tp as f64, (c.tp + c.fn_) as f64);
    Ok(ClassificationScores {
        confusion: c,
        precision,
        recall,
        f1: ratio(2.0 * precision * recall, precision + recall),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_accuracy() {
        let out = forecast_accuracy(&[1.0, 2.0, 3.0], &[1.0, 3.0, 5.0], &[Measure::MSE, Measure::RMSE, Measure::MAE], None).unwrap();
        assert!((out[0].value - 5.0 / 3.0).abs() < 1e-15);
        assert!((out[1].value - 1.290_994_448_735_805_6).abs() < 1e-12);
        assert_eq!(out[2].value, 1.0);
        assert_eq!(out[0].measure, "tswf:MSE");
    }

    #[test]
    fn perfect_forecast_scores_zero() {
        let y = [3.0, 1.5, 8.0, 2.0];
        let out = forecast_accuracy(&y, &y, &Measure::ALL, Some(&[1.0, 2.0, 4.0])).unwrap();
        assert!(out.iter().all(|m| m.value == 0.0 && m.n == 4));
    }

    #[test]
    fn accuracy_errors() {
        let m = |ms: &[Measure], a: &[f64], p: &[f64], t: Option<&[f64]>| forecast_accuracy(a, p, ms, t).unwrap_err();
        assert_eq!(m(&[Measure::MSE], &[1.0], &[1.0, 2.0], None), MetricsError::LengthMismatch { left: 1, right: 2 });
        assert_eq!(m(&[Measure::MAPE], &[1.0, 0.0], &[1.0, 2.0], None), MetricsError::ZeroActual { measure: "MAPE", index: 1 });
        assert_eq!(m(&[Measure::MASE], &[1.0], &[1.0], Some(&[2.0])), MetricsError::MissingTraining);
        assert!(matches!(m(&[Measure::SMAPE], &[0.0], &[0.0], None), MetricsError::ZeroDenominator { .. }));
    }

    #[test]
    fn dtw_examples() {
        assert_eq!(dtw(&[0.0, 0.0, 1.0], &[0.0, 1.0], None).unwrap(), 0.0);
        assert_eq!(dtw(&[1.0, 2.0], &[2.0, 4.0], Some(0)).unwrap(), 3.0);
        assert!(matches!(dtw(&[1.0, 2.0, 3.0], &[2.0], Some(1)), Err(MetricsError::BandTooNarrow { .. })));
        assert_eq!(dtw(&[], &[1.0], None), Err(MetricsError::EmptySeries));
    }

    #[test]
    fn euclidean_three_four_five() {
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn classification_examples() {
        let s = classification_scores(&[1, 0, 1, 1, 0], &[1, 0, 1, 1, 0]).unwrap();
        assert_eq!(s.f1, 1.0);
        let s = classification_scores(&[1, 0, 1], &[0, 0, 0]).unwrap();
        assert_eq!((s.recall, s.f1), (0.0, 0.0));
        let s = classification_scores(&[1, 1, 0, 1], &[1, 1, 1, 0]).unwrap();
        assert_eq!(s.confusion, ConfusionMatrix { tp: 2, fp: 1, tn: 0, fn_: 1 });
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-15 && (s.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(classification_scores(&[2], &[1]), Err(MetricsError::NonBinaryLabels(2)));
    }
}
