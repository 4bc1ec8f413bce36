//! Predictive models: AR, seasonal ARIMA, exponential smoothing and linear
//! support vector regression, with h-step forecasting.

pub mod arima;
pub mod neldermead;

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::{acf, durbin_levinson, AnalysisError};
use crate::series::{mean, population_variance, Differencing, SeriesError};

pub use arima::{fit_arima, ArimaOrder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("series of length {len} is too short: {needed}")]
    SeriesTooShort { len: usize, needed: String },
    #[error("Toeplitz system is singular at order {0}")]
    SingularSystem(usize),
    #[error("model did not converge; pass allow_unconverged to forecast anyway")]
    UnconvergedModel,
    #[error("horizon must be at least 1")]
    InvalidHorizon,
}

/// Everything a model needs to keep forecasting after the fit.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ModelState {
    #[default]
    Empty,
    Ar {
        mean: f64,
        phi: Vec<f64>,
        history: Vec<f64>,
    },
    Arima {
        constant: f64,
        ar: Vec<f64>,
        ma: Vec<f64>,
        /// Differenced (and transformed) training series.
        w: Vec<f64>,
        e: Vec<f64>,
        diff: Differencing,
        lambda: Option<f64>,
    },
    Ets {
        level: f64,
        trend: Option<f64>,
    },
    Svr {
        weights: Vec<f64>,
        bias: f64,
        center: f64,
        spread: f64,
        history: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFit {
    pub model: String,
    pub params_resolved: BTreeMap<String, Value>,
    pub coefficients: IndexMap<String, f64>,
    /// In-sample one-step predictions on the modelling scale.
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub training_loss: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub state: ModelState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Forecast {
    /// Index of the last training observation.
    pub origin: usize,
    pub horizon: usize,
    pub point: Vec<f64>,
    pub model: String,
}

pub(crate) fn require_complete(x: &[f64]) -> Result<(), ModelError> {
    match x.iter().filter(|v| v.is_nan()).count() {
        0 => Ok(()),
        k => Err(SeriesError::MissingValues(k).into()),
    }
}

fn sse(e: &[f64]) -> f64 {
    e.iter().map(|v| v * v).sum()
}

/// Yule-Walker autoregression; `order = None` selects the order by AIC.
pub fn fit_ar(x: &[f64], order: Option<usize>) -> Result<ModelFit, ModelError> {
    require_complete(x)?;
    let n = x.len();
    let p_needed = order.unwrap_or(0);
    if n <= p_needed + 1 {
        return Err(ModelError::SeriesTooShort {
            len: n,
            needed: format!("more than {} observations", p_needed + 1),
        });
    }
    let mu = mean(x);
    let var = population_variance(x);
    let mut warnings = Vec::new();

    let (p, phi) = if !(var > 0.0) {
        // a constant series is its own forecast
        warnings.push("constant series: autoregressive coefficients set to zero".to_string());
        let p = order.unwrap_or(0);
        (p, vec![0.0; p])
    } else {
        let max_p = match order {
            Some(p) => p,
            None => 10.min(n / 10),
        };
        let rho = acf(x, max_p)?.rho;
        match order {
            Some(p) => {
                let dl = durbin_levinson(&rho, p).map_err(|_| ModelError::SingularSystem(p))?;
                (p, dl.phi)
            }
            None => {
                let mut best: Option<(f64, usize, Vec<f64>)> = None;
                for p in 0..=max_p {
                    let Ok(dl) = durbin_levinson(&rho, p) else { break };
                    let sigma2 = var * dl.variance_ratio;
                    if !(sigma2 > 0.0) {
                        break;
                    }
                    let aic = n as f64 * sigma2.ln() + 2.0 * p as f64;
                    if best.as_ref().is_none_or(|b| aic < b.0) {
                        best = Some((aic, p, dl.phi));
                    }
                }
                let (_, p, phi) = best.ok_or(ModelError::SingularSystem(0))?;
                (p, phi)
            }
        }
    };

    let fitted: Vec<f64> = (0..n)
        .map(|t| {
            mu + phi
                .iter()
                .enumerate()
                .filter(|(i, _)| t > *i)
                .map(|(i, f)| f * (x[t - i - 1] - mu))
                .sum::<f64>()
        })
        .collect();
    let residuals: Vec<f64> = x.iter().zip(&fitted).map(|(a, f)| a - f).collect();

    let mut coefficients = IndexMap::new();
    coefficients.insert("intercept".into(), mu * (1.0 - phi.iter().sum::<f64>()));
    for (i, f) in phi.iter().enumerate() {
        coefficients.insert(format!("phi.{}", i + 1), *f);
    }
    let mut params = BTreeMap::new();
    params.insert("order".into(), json!(p));

    Ok(ModelFit {
        model: "tswf:AR".into(),
        params_resolved: params,
        coefficients,
        training_loss: sse(&residuals),
        fitted,
        residuals,
        converged: true,
        iterations: 0,
        warnings,
        state: ModelState::Ar {
            mean: mu,
            phi,
            history: x.to_vec(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EtsVariant {
    Simple,
    Holt,
}

impl EtsVariant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "simple" => Some(EtsVariant::Simple),
            "holt" => Some(EtsVariant::Holt),
            _ => None,
        }
    }
}

/// Output of one pass of the smoothing recursions.
#[derive(Debug, Clone, PartialEq)]
pub struct EtsPass {
    pub fitted: Vec<f64>,
    pub level: f64,
    pub trend: Option<f64>,
    pub sse: f64,
}

/// Runs simple (`beta = None`) or Holt smoothing. The level starts at the
/// first observation and the trend at the first difference; the first
/// point (and for Holt the second) is reproduced exactly.
pub fn ets_filter(x: &[f64], alpha: f64, beta: Option<f64>) -> EtsPass {
    let mut level = x[0];
    let mut trend = beta.map(|_| x.get(1).map_or(0.0, |v| v - x[0]));
    let mut fitted = Vec::with_capacity(x.len());
    fitted.push(x[0]);
    let mut total = 0.0;
    for &obs in &x[1..] {
        let f = level + trend.unwrap_or(0.0);
        fitted.push(f);
        total += (obs - f) * (obs - f);
        let prev = level;
        level = alpha * obs + (1.0 - alpha) * f;
        if let (Some(b), Some(t)) = (beta, trend.as_mut()) {
            *t = b * (level - prev) + (1.0 - b) * *t;
        }
    }
    EtsPass {
        fitted,
        level,
        trend,
        sse: total,
    }
}

pub fn fit_ets(x: &[f64], variant: EtsVariant) -> Result<ModelFit, ModelError> {
    require_complete(x)?;
    if x.len() < 10 {
        return Err(ModelError::SeriesTooShort {
            len: x.len(),
            needed: "at least 10 observations".into(),
        });
    }
    let grid: Vec<f64> = (1..=99).map(|i| i as f64 / 100.0).collect();
    let betas: Vec<Option<f64>> = match variant {
        EtsVariant::Simple => vec![None],
        EtsVariant::Holt => grid.iter().map(|b| Some(*b)).collect(),
    };
    let mut best: Option<(f64, Option<f64>, EtsPass)> = None;
    for &alpha in &grid {
        for &beta in &betas {
            let pass = ets_filter(x, alpha, beta);
            if best.as_ref().is_none_or(|b| pass.sse < b.2.sse) {
                best = Some((alpha, beta, pass));
            }
        }
    }
    let (alpha, beta, pass) = best.expect("grid is not empty");
    let residuals: Vec<f64> = x.iter().zip(&pass.fitted).map(|(a, f)| a - f).collect();

    let mut coefficients = IndexMap::new();
    coefficients.insert("alpha".into(), alpha);
    if let Some(b) = beta {
        coefficients.insert("beta".into(), b);
    }
    coefficients.insert("level".into(), pass.level);
    if let Some(t) = pass.trend {
        coefficients.insert("trend".into(), t);
    }
    let mut params = BTreeMap::new();
    params.insert("variant".into(), json!(variant));

    Ok(ModelFit {
        model: "tswf:ETS".into(),
        params_resolved: params,
        coefficients,
        fitted: pass.fitted,
        residuals,
        training_loss: pass.sse,
        converged: true,
        iterations: grid.len() * betas.len(),
        warnings: Vec::new(),
        state: ModelState::Ets {
            level: pass.level,
            trend: pass.trend,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SvrOptions {
    pub embedding: usize,
    pub epsilon: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvrOptions {
    fn default() -> Self {
        SvrOptions {
            embedding: 5,
            epsilon: 0.1,
            c: 1.0,
            epochs: 200,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lag vector `(z[t-1], ..., z[t-p])`.
fn lags_at(z: &[f64], t: usize, p: usize) -> Vec<f64> {
    (1..=p).map(|i| z[t - i]).collect()
}

/// Linear epsilon-insensitive regression of each value on its `embedding`
/// predecessors, trained by subgradient descent on z-scored data.
pub fn fit_svr(x: &[f64], opts: SvrOptions) -> Result<ModelFit, ModelError> {
    require_complete(x)?;
    let n = x.len();
    let p = opts.embedding;
    if n <= p + 10 {
        return Err(ModelError::SeriesTooShort {
            len: n,
            needed: format!("more than {} observations", p + 10),
        });
    }
    let center = mean(x);
    let sd = population_variance(x).sqrt();
    let spread = if sd > 0.0 { sd } else { 1.0 };
    let z: Vec<f64> = x.iter().map(|v| (v - center) / spread).collect();
    let m = n - p;

    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut step = 0usize;
    for epoch in 1..=opts.epochs {
        let eta = 1.0 / (opts.c * epoch as f64);
        for t in p..n {
            step += 1;
            let xs = lags_at(&z, t, p);
            let r = z[t] - dot(&w, &xs) - b;
            let push = if r.abs() > opts.epsilon { r.signum() } else { 0.0 };
            for (wi, xi) in w.iter_mut().zip(&xs) {
                let g = *wi / (opts.c * m as f64) - push * xi;
                *wi -= eta * g;
            }
            b += eta * push;
        }
    }

    let mut fitted = Vec::with_capacity(m);
    let mut loss = 0.0;
    for t in p..n {
        let pred = dot(&w, &lags_at(&z, t, p)) + b;
        loss += ((z[t] - pred).abs() - opts.epsilon).max(0.0);
        fitted.push(center + spread * pred);
    }
    let residuals: Vec<f64> = x[p..].iter().zip(&fitted).map(|(a, f)| a - f).collect();

    let mut coefficients = IndexMap::new();
    coefficients.insert("intercept".into(), b);
    for (i, v) in w.iter().enumerate() {
        coefficients.insert(format!("w.{}", i + 1), *v);
    }
    let mut params = BTreeMap::new();
    params.insert("embedding".into(), json!(p));
    params.insert("epsilon".into(), json!(opts.epsilon));
    params.insert("C".into(), json!(opts.c));
    params.insert("epochs".into(), json!(opts.epochs));

    Ok(ModelFit {
        model: "tswf:SVM".into(),
        params_resolved: params,
        coefficients,
        fitted,
        residuals,
        training_loss: loss / m as f64,
        converged: true,
        iterations: step,
        warnings: Vec::new(),
        state: ModelState::Svr {
            weights: w,
            bias: b,
            center,
            spread,
            history: x.to_vec(),
        },
    })
}

/// Point forecasts for `h` steps past the end of the training series, on
/// the original data scale.
pub fn forecast(fit: &ModelFit, h: usize, allow_unconverged: bool) -> Result<Forecast, ModelError> {
    if h == 0 {
        return Err(ModelError::InvalidHorizon);
    }
    if !fit.converged && !allow_unconverged {
        return Err(ModelError::UnconvergedModel);
    }
    let (origin, point) = match &fit.state {
        ModelState::Empty => return Err(ModelError::UnconvergedModel),
        ModelState::Ar { mean, phi, history } => {
            let mut dev: Vec<f64> = history.iter().map(|v| v - mean).collect();
            let n = dev.len();
            for t in n..n + h {
                let next = phi
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| t > *i)
                    .map(|(i, f)| f * dev[t - i - 1])
                    .sum();
                dev.push(next);
            }
            (n - 1, dev[n..].iter().map(|d| d + mean).collect())
        }
        ModelState::Arima {
            constant,
            ar,
            ma,
            w,
            e,
            diff,
            lambda,
        } => {
            let point = arima::forecast_arima(*constant, ar, ma, w, e, diff, *lambda, h);
            (fit_origin(fit, diff), point)
        }
        ModelState::Ets { level, trend } => {
            let point = (1..=h).map(|k| level + k as f64 * trend.unwrap_or(0.0)).collect();
            (fit.fitted.len() - 1, point)
        }
        ModelState::Svr {
            weights,
            bias,
            center,
            spread,
            history,
        } => {
            let p = weights.len();
            let mut z: Vec<f64> = history.iter().map(|v| (v - center) / spread).collect();
            let n = z.len();
            for t in n..n + h {
                let next = dot(weights, &lags_at(&z, t, p)) + bias;
                z.push(next);
            }
            (n - 1, z[n..].iter().map(|v| center + spread * v).collect())
        }
    };
    Ok(Forecast {
        origin,
        horizon: h,
        point,
        model: fit.model.clone(),
    })
}

fn fit_origin(fit: &ModelFit, diff: &Differencing) -> usize {
    fit.fitted.len() + diff.shift() - 1
}
