//! Executes a workflow document stage by stage and records every step.
//!
//! Stage order is input, preprocessing, plots, information analysis,
//! stationary analysis, models (fit then forecast) and outputs. A failing
//! step is recorded as an error outcome and the run carries on; only an
//! unreadable input aborts the run.

mod plot;

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub use plot::{render_plot, PlotArtifact, PlotSource};

use crate::analysis::{self, AcfResult, Decomposition, LagRow, PacfResult, TestResult};
use crate::document::{validate, ModelSlot, OpSpec, OutputSpec, Stage, WorkflowDoc};
use crate::metrics::{self, Measure, MeasureValue};
use crate::models::{self, ArimaOrder, EtsVariant, Forecast, ModelFit, SvrOptions};
use crate::series::{self, ImputeMethod, ScaleMethod, SpectrumPoint, TimeSeries};
use crate::vocabulary::{load_vocabulary, ParamValue, Term};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("document is invalid: {0}")]
    InvalidDocument(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("cannot write `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("{plot} cannot be drawn from a {found}")]
    TypeMismatch { plot: String, found: String },
    #[error("no {0} values in the run")]
    NoSuchMetric(String),
}

impl EngineError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        EngineError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    pub horizon: usize,
    /// Forecast from models whose optimizer did not converge.
    pub allow_unconverged: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            horizon: 10,
            allow_unconverged: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "result", rename_all = "snake_case")]
pub enum StepOutcome {
    Series(TimeSeries),
    Outliers(Vec<usize>),
    Spectrum(Vec<SpectrumPoint>),
    Acf(AcfResult),
    Pacf(PacfResult),
    LagStudy(Vec<LagRow>),
    Decomposition(Decomposition),
    Test(TestResult),
    ModelFit(ModelFit),
    Forecast(Forecast),
    Measures(Vec<MeasureValue>),
    Plot(PlotArtifact),
    NoOp { note: String },
    Error { code: String, message: String },
}

impl StepOutcome {
    pub fn is_error(&self) -> bool {
        matches!(self, StepOutcome::Error { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResult {
    pub stage: Stage,
    pub op: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<ModelSlot>,
    pub params_resolved: BTreeMap<String, Value>,
    pub outcome: StepOutcome,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Succeeded,
    Partial,
    Failed,
}

/// Index ranges of the training and evaluation windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Holdout {
    pub train_len: usize,
    pub test_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunBundle {
    pub workflow_id: String,
    pub run_id: String,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub horizon: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout: Option<Holdout>,
    pub status: RunStatus,
    pub steps: Vec<StepResult>,
    pub warnings: Vec<String>,
}

impl RunBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes") + "\n"
    }

    pub fn run_dir(&self, out_dir: &Path) -> PathBuf {
        out_dir.join(format!("run_{}", self.run_id))
    }

    /// Steps of one stage, in execution order.
    pub fn stage(&self, stage: Stage) -> impl Iterator<Item = &StepResult> {
        self.steps.iter().filter(move |s| s.stage == stage)
    }

    /// Every measure value with the model it scores.
    pub fn measure_values(&self) -> impl Iterator<Item = &MeasureValue> {
        self.steps.iter().flat_map(|s| match &s.outcome {
            StepOutcome::Measures(v) => v.as_slice(),
            _ => &[],
        })
    }
}

/// Removes the fields that legitimately differ between two runs of the
/// same document: the run id, timestamps and step timings.
pub fn strip_volatile(bundle: &mut Value) {
    if let Some(obj) = bundle.as_object_mut() {
        for key in ["run_id", "started", "finished"] {
            obj.remove(key);
        }
        if let Some(Value::Array(steps)) = obj.get_mut("steps") {
            for s in steps {
                if let Some(o) = s.as_object_mut() {
                    o.remove("elapsed_ms");
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestModel {
    pub model: String,
    pub value: f64,
}

/// The model with the smallest value of `metric`; the first one listed
/// wins ties.
pub fn best_model(bundle: &RunBundle, metric: &str) -> Result<BestModel, EngineError> {
    best_of(bundle.measure_values(), metric)
}

/// [`best_model`] over measure values read back from a stored bundle.
pub fn best_of<'a>(
    values: impl IntoIterator<Item = &'a MeasureValue>,
    metric: &str,
) -> Result<BestModel, EngineError> {
    let metric = crate::vocabulary::compact(&crate::vocabulary::expand_default(metric));
    let mut best: Option<BestModel> = None;
    for m in values {
        let Some(model) = &m.model else { continue };
        if m.measure != metric {
            continue;
        }
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(BestModel {
                model: model.clone(),
                value: m.value,
            });
        }
    }
    best.ok_or(EngineError::NoSuchMetric(metric))
}

struct StepError {
    code: String,
    message: String,
}

/// Name of the innermost error variant, looking through wrapper variants.
fn code_of(e: &impl Debug) -> String {
    let text = format!("{e:?}");
    let mut rest = text.as_str();
    loop {
        let end = rest
            .find(|c: char| !c.is_alphanumeric())
            .unwrap_or(rest.len());
        let name = &rest[..end];
        if matches!(name, "Series" | "Analysis") && rest[end..].starts_with('(') {
            rest = &rest[end + 1..];
            continue;
        }
        return name.to_string();
    }
}

macro_rules! step_error_from {
    ($($t:ty),*) => {$(
        impl From<$t> for StepError {
            fn from(e: $t) -> Self {
                StepError { code: code_of(&e), message: e.to_string() }
            }
        }
    )*};
}
step_error_from!(
    series::SeriesError,
    analysis::AnalysisError,
    models::ModelError,
    metrics::MetricsError,
    EngineError
);

fn unsupported(curie: &str) -> StepError {
    let local = curie.strip_prefix("tswf:").unwrap_or(curie);
    let suggestion = match local {
        "NeuralNetwork" | "RandomForest" => Some("tswf:SVM"),
        "LASSO" | "MARS" => Some("tswf:AR"),
        "SARIMA" | "ARIMAX" => Some("tswf:ARIMA"),
        _ => None,
    };
    let message = match suggestion {
        Some(s) => format!("{curie} cannot be executed; use {s} instead"),
        None => format!("{curie} cannot be executed"),
    };
    StepError {
        code: "UnsupportedOperation".into(),
        message,
    }
}

type Params = BTreeMap<String, ParamValue>;

fn int(params: &Params, name: &str) -> Option<usize> {
    params.get(name).and_then(ParamValue::as_i64).map(|v| v.max(0) as usize)
}

fn real(params: &Params, name: &str) -> Option<f64> {
    params.get(name).and_then(ParamValue::as_f64)
}

fn text<'a>(params: &'a Params, name: &str) -> Option<&'a str> {
    params.get(name).and_then(ParamValue::as_str)
}

fn triple(params: &Params, name: &str) -> [usize; 3] {
    let v = params.get(name).and_then(ParamValue::as_int_list).unwrap_or(&[0, 0, 0]);
    [0, 1, 2].map(|i| v.get(i).copied().unwrap_or(0).max(0) as usize)
}

/// A fitted model kept for scoring against the holdout.
struct Scored {
    model: String,
    train: Vec<f64>,
    predicted: Vec<f64>,
}

struct Run<'a> {
    run_dir: PathBuf,
    opts: EngineOptions,
    frequency: Option<u32>,
    steps: Vec<StepResult>,
    warnings: Vec<String>,
    plot_names: BTreeMap<String, usize>,
    doc: &'a WorkflowDoc,
}

impl Run<'_> {
    fn record(
        &mut self,
        stage: Stage,
        op: &OpSpec,
        params: &Params,
        started: Instant,
        result: Result<StepOutcome, StepError>,
    ) -> bool {
        let outcome = result.unwrap_or_else(|e| StepOutcome::Error {
            code: e.code,
            message: e.message,
        });
        let ok = !outcome.is_error();
        self.steps.push(StepResult {
            stage,
            op: op.curie(),
            slot: op.slot,
            params_resolved: params.iter().map(|(k, v)| (k.clone(), v.to_json())).collect(),
            outcome,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        ok
    }

    fn resolve<'t>(&self, op: &OpSpec, n: usize) -> (Option<&'t Term>, Params) {
        match load_vocabulary().lookup(&op.term) {
            Some(term) => {
                let params = op
                    .resolve_params(term, n, self.frequency)
                    .into_iter()
                    .map(|(k, v)| (k, v.value))
                    .collect();
                (Some(term), params)
            }
            None => (None, Params::new()),
        }
    }

    fn plot_stem(&mut self, curie: &str) -> String {
        let base = curie.replace(':', "_");
        let count = self.plot_names.entry(base.clone()).or_insert(0);
        *count += 1;
        if *count == 1 {
            base
        } else {
            format!("{base}-{count}")
        }
    }

    fn preprocess(&mut self, op: &OpSpec, ts: &mut TimeSeries) {
        let started = Instant::now();
        let (term, params) = self.resolve(op, ts.len());
        let result = (|| -> Result<StepOutcome, StepError> {
            let term = term.filter(|t| t.executable).ok_or_else(|| unsupported(&op.curie()))?;
            let next = match term.local_name() {
                "Impute" => {
                    let method = match text(&params, "method") {
                        Some("mean") => ImputeMethod::Mean,
                        _ => ImputeMethod::Linear,
                    };
                    series::impute(ts, method)?
                }
                "Scale" => {
                    let method = match text(&params, "method") {
                        Some("minmax") => ScaleMethod::Minmax,
                        _ => ScaleMethod::Zscore,
                    };
                    series::scale(ts, method)?
                }
                "BoxCox" => series::transform(ts, real(&params, "lambda").unwrap_or(0.0))?,
                "MovingAverage" => series::smooth_ma(ts, int(&params, "window").unwrap_or(3))?,
                "Differencing" => series::difference(
                    ts,
                    int(&params, "order").unwrap_or(1),
                    int(&params, "seasonal").unwrap_or(0),
                    int(&params, "period").unwrap_or(1),
                )?,
                "OutlierDetection" => {
                    let idx = series::detect_outliers(ts, real(&params, "threshold").unwrap_or(3.0))?;
                    return Ok(StepOutcome::Outliers(idx));
                }
                "Periodogram" => return Ok(StepOutcome::Spectrum(series::periodogram(ts)?)),
                _ => return Err(unsupported(&op.curie())),
            };
            *ts = next.clone();
            Ok(StepOutcome::Series(next))
        })();
        self.record(Stage::Preprocessing, op, &params, started, result);
    }

    fn plot(&mut self, op: &OpSpec, ts: &TimeSeries) {
        let started = Instant::now();
        let (term, params) = self.resolve(op, ts.len());
        let curie = op.curie();
        let stem = self.plot_stem(&curie);
        let run_dir = self.run_dir.clone();
        let result = (|| -> Result<StepOutcome, StepError> {
            let term = term.filter(|t| t.executable).ok_or_else(|| unsupported(&curie))?;
            let x = ts.complete_values()?;
            let artifact = match term.local_name() {
                "PlotRegular" => render_plot(&curie, PlotSource::Series(ts), &run_dir, &stem)?,
                "PlotACF" => {
                    let a = analysis::acf(x, int(&params, "lag").unwrap_or(1))?;
                    render_plot(&curie, PlotSource::Acf(&a), &run_dir, &stem)?
                }
                "PlotPACF" => {
                    let p = analysis::pacf(x, int(&params, "lag").unwrap_or(1))?;
                    render_plot(&curie, PlotSource::Pacf(&p), &run_dir, &stem)?
                }
                "PlotSTL" => {
                    let d = analysis::decompose(x, int(&params, "period").unwrap_or(1))?;
                    render_plot(&curie, PlotSource::Decomposition(&d, ts), &run_dir, &stem)?
                }
                _ => return Err(unsupported(&curie)),
            };
            Ok(StepOutcome::Plot(artifact))
        })();
        self.record(Stage::Plots, op, &params, started, result);
    }

    fn analyse(&mut self, stage: Stage, op: &OpSpec, ts: &TimeSeries) {
        let started = Instant::now();
        let (term, params) = self.resolve(op, ts.len());
        let curie = op.curie();
        let mut note = None;
        let result = (|| -> Result<StepOutcome, StepError> {
            let term = term.filter(|t| t.executable).ok_or_else(|| unsupported(&curie))?;
            let x = ts.complete_values()?;
            let lag = || int(&params, "lag").unwrap_or(1);
            Ok(match term.local_name() {
                "LagStudy" => StepOutcome::LagStudy(analysis::lag_study(x, lag())?),
                "TrendSTL" => StepOutcome::Decomposition(analysis::decompose(
                    x,
                    int(&params, "period").unwrap_or(1),
                )?),
                "ACF" => StepOutcome::Acf(analysis::acf(x, lag())?),
                "PACF" => StepOutcome::Pacf(analysis::pacf(x, lag())?),
                "DickeyFuller" => StepOutcome::Test(analysis::adf_test(x, int(&params, "lags").unwrap_or(0))?),
                "JarqueBera" => StepOutcome::Test(analysis::jarque_bera(x)?),
                "JungBox" => StepOutcome::Test(analysis::ljung_box(x, lag())?),
                "RunsTest" => StepOutcome::Test(analysis::runs_test(x)?),
                "StatisticalTest" => {
                    note = Some(format!("{curie}: abstract test term"));
                    StepOutcome::NoOp {
                        note: "abstract test term".into(),
                    }
                }
                _ => return Err(unsupported(&curie)),
            })
        })();
        if let Some(n) = note {
            self.warnings.push(n);
        }
        self.record(stage, op, &params, started, result);
    }

    fn fit(&self, term: &Term, params: &Params, x: &[f64]) -> Result<ModelFit, StepError> {
        Ok(match term.local_name() {
            "AR" => models::fit_ar(x, int(params, "order"))?,
            "ARIMA" => {
                let period = self.frequency.map_or(1, |f| f as usize);
                let order = ArimaOrder::new(triple(params, "order"), triple(params, "seasonal"), period);
                models::fit_arima(x, order, real(params, "lambda"))?
            }
            "ETS" => {
                let variant = text(params, "variant")
                    .and_then(EtsVariant::parse)
                    .unwrap_or(EtsVariant::Simple);
                models::fit_ets(x, variant)?
            }
            "SVM" => {
                let d = SvrOptions::default();
                let opts = SvrOptions {
                    embedding: int(params, "embedding").unwrap_or(d.embedding),
                    epsilon: real(params, "epsilon").unwrap_or(d.epsilon),
                    c: real(params, "C").unwrap_or(d.c),
                    epochs: int(params, "epochs").unwrap_or(d.epochs),
                };
                models::fit_svr(x, opts)?
            }
            _ => return Err(unsupported(&compact_term(term))),
        })
    }

    /// Fits and forecasts one model; returns the holdout forecast when the
    /// model is scored.
    fn model(&mut self, op: &OpSpec, ts: &TimeSeries, holdout: Option<Holdout>) -> Option<Scored> {
        let started = Instant::now();
        let train_len = holdout.map_or(ts.len(), |h| h.train_len);
        let (term, params) = self.resolve(op, train_len);
        let curie = op.curie();
        let fit = (|| -> Result<ModelFit, StepError> {
            let term = term.filter(|t| t.executable).ok_or_else(|| unsupported(&curie))?;
            let x = ts.complete_values()?;
            if train_len < 2 {
                return Err(StepError {
                    code: "SeriesTooShort".into(),
                    message: format!("only {train_len} observations left for training"),
                });
            }
            // the evaluation window is never seen by the fit
            self.fit(term, &params, &x[..train_len])
        })();
        let fit_result = fit.as_ref().map(|f| StepOutcome::ModelFit(f.clone())).map_err(|e| StepError {
            code: e.code.clone(),
            message: e.message.clone(),
        });
        if let Ok(f) = &fit {
            self.warnings.extend(f.warnings.iter().map(|w| format!("{curie}: {w}")));
        }
        self.record(Stage::Models, op, &params, started, fit_result);

        let started = Instant::now();
        let horizon = self.opts.horizon;
        let forecast = match &fit {
            Ok(f) => models::forecast(f, horizon, self.opts.allow_unconverged).map_err(StepError::from),
            Err(e) => Err(StepError {
                code: e.code.clone(),
                message: format!("no fitted model: {}", e.message),
            }),
        };
        let ok = self.record(
            Stage::Models,
            op,
            &params,
            started,
            forecast.map(StepOutcome::Forecast),
        );

        let (fit, h) = (fit.ok()?, holdout?);
        if !ok {
            return None;
        }
        let predicted = models::forecast(&fit, h.test_len, self.opts.allow_unconverged).ok()?.point;
        let x = ts.complete_values().ok()?;
        Some(Scored {
            model: curie,
            train: x[..h.train_len].to_vec(),
            predicted,
        })
    }

    fn output(&mut self, out: &OutputSpec, ts: &TimeSeries, holdout: Option<Holdout>, scored: &[Scored]) {
        let started = Instant::now();
        let registry = load_vocabulary();
        let op = OpSpec {
            term: out.kind.clone(),
            params: BTreeMap::new(),
            slot: None,
            path: out.path.clone(),
            param_paths: BTreeMap::new(),
        };
        let result = (|| -> Result<StepOutcome, StepError> {
            let kind = registry
                .lookup(&out.kind)
                .filter(|t| t.executable)
                .ok_or_else(|| unsupported(&op.curie()))?;
            let h = holdout.ok_or_else(|| StepError {
                code: "NoModels".into(),
                message: format!("{} needs at least one model", compact_term(kind)),
            })?;
            let actual = &ts.complete_values()?[h.train_len..];
            let mut values = Vec::new();
            for s in scored {
                for m in &out.measures {
                    let term = registry
                        .lookup(&m.term)
                        .filter(|t| t.executable)
                        .ok_or_else(|| unsupported(&m.curie()))?;
                    let mut v = measure(term, m, actual, s)?;
                    v.model = Some(s.model.clone());
                    values.push(v);
                }
            }
            Ok(StepOutcome::Measures(values))
        })();
        self.record(Stage::Outputs, &op, &Params::new(), started, result);
    }
}

fn compact_term(term: &Term) -> String {
    term.curie.clone()
}

/// Up/down labels: 1 when a value exceeds the one before it.
fn directions(start: f64, x: &[f64]) -> Vec<i64> {
    let mut prev = start;
    x.iter()
        .map(|v| {
            let up = i64::from(*v > prev);
            prev = *v;
            up
        })
        .collect()
}

fn measure(term: &Term, op: &OpSpec, actual: &[f64], s: &Scored) -> Result<MeasureValue, StepError> {
    let local = term.local_name();
    let curie = term.curie.clone();
    let n = actual.len();
    let value = |value| MeasureValue {
        measure: curie.clone(),
        model: None,
        value,
        n,
        confusion: None,
    };
    if let Some(m) = Measure::from_local(local) {
        let mut v = metrics::forecast_accuracy(actual, &s.predicted, &[m], Some(&s.train))?;
        return Ok(v.remove(0));
    }
    match local {
        "DTW" => {
            let band = op
                .resolve_params(term, n, None)
                .get("band")
                .and_then(|p| p.value.as_i64())
                .map(|b| b as usize);
            Ok(value(metrics::dtw(actual, &s.predicted, band)?))
        }
        "Euclidean" => Ok(value(metrics::euclidean(actual, &s.predicted)?)),
        "F1Score" | "ConfusionMatrix" => {
            let last = *s.train.last().expect("training window is not empty");
            let scores = metrics::classification_scores(&directions(last, actual), &directions(last, &s.predicted))?;
            if local == "F1Score" {
                Ok(value(scores.f1))
            } else {
                let c = scores.confusion;
                let mut v = value((c.tp + c.tn) as f64 / n as f64);
                v.confusion = Some(c);
                Ok(v)
            }
        }
        _ => Err(unsupported(&curie)),
    }
}

/// Runs `doc` against data under `data_root`, writing
/// `out_dir/run_<id>/bundle.json` and any plots beside it.
pub fn execute(
    doc: &WorkflowDoc,
    data_root: &Path,
    out_dir: &Path,
    opts: EngineOptions,
) -> Result<RunBundle, EngineError> {
    let started = Utc::now();
    let report = validate(doc, load_vocabulary());
    if !report.valid {
        let first = report.errors().next().expect("invalid report has an error");
        return Err(EngineError::InvalidDocument(format!(
            "{} error(s), first {} at `{}`: {}",
            report.error_count(),
            first.code,
            first.path,
            first.message
        )));
    }
    let input = doc
        .input
        .as_ref()
        .ok_or_else(|| EngineError::Input("document has no input".into()))?;
    let ingested = series::ingest_input(input, data_root).map_err(|e| EngineError::Input(e.to_string()))?;

    let run_id = uuid::Uuid::new_v4().simple().to_string();
    let run_dir = out_dir.join(format!("run_{run_id}"));
    fs::create_dir_all(&run_dir).map_err(|e| EngineError::io(&run_dir, e))?;

    let mut warnings: Vec<String> = doc
        .parse_warnings
        .iter()
        .chain(report.warnings())
        .map(|d| format!("{} at `{}`: {}", d.code, d.path, d.message))
        .collect();
    warnings.extend(ingested.warnings);

    let mut run = Run {
        run_dir: run_dir.clone(),
        opts,
        frequency: input.frequency(),
        steps: Vec::new(),
        warnings,
        plot_names: BTreeMap::new(),
        doc,
    };

    let mut ts = ingested.series;
    for op in &doc.preprocessing {
        run.preprocess(op, &mut ts);
    }
    for op in &doc.plots {
        run.plot(op, &ts);
    }
    for op in &doc.info_analyses {
        run.analyse(Stage::InformationAnalysis, op, &ts);
    }
    for op in &doc.stationary_analyses {
        run.analyse(Stage::StationaryAnalysis, op, &ts);
    }

    let n = ts.len();
    let holdout = (!doc.models.is_empty() && !run.doc.outputs.is_empty()).then(|| {
        let test_len = opts.horizon.max((0.2 * n as f64).ceil() as usize).min(n);
        Holdout {
            train_len: n - test_len,
            test_len,
        }
    });
    let scored: Vec<Scored> = doc
        .models
        .iter()
        .filter_map(|op| run.model(op, &ts, holdout))
        .collect();
    for out in &doc.outputs {
        run.output(out, &ts, holdout, &scored);
    }

    let errors = run.steps.iter().filter(|s| s.outcome.is_error()).count();
    let status = if errors == 0 {
        RunStatus::Succeeded
    } else if errors < run.steps.len() {
        RunStatus::Partial
    } else {
        RunStatus::Failed
    };
    let bundle = RunBundle {
        workflow_id: doc.id.clone(),
        run_id,
        started,
        finished: Utc::now(),
        horizon: opts.horizon,
        holdout,
        status,
        steps: run.steps,
        warnings: run.warnings,
    };
    let path = run_dir.join("bundle.json");
    fs::write(&path, bundle.to_json()).map_err(|e| EngineError::io(&path, e))?;
    Ok(bundle)
}
