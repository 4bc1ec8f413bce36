//! Compiled-in registry of the tswf-schema vocabulary.
//!
//! Every class and property a workflow document may name is registered here
//! with its category, parent class, parameter schema and whether the engine
//! can execute it. Terms that are part of the vocabulary but have no
//! execution backend are registered with `executable == false`: documents
//! naming them validate, and the engine reports `UnsupportedOperation`.
//!
//! Parameter defaults live in the table below. Defaults that depend on the
//! data (for example the `floor(10 * log10(n))` lag rule) are expressed as
//! [`DerivedDefault`] and resolved by the engine once the series is known.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Namespace IRI of the schema.
pub const NAMESPACE: &str = "http://dicits.ugr.es/linkeddata/tswf-schema/";
/// Prefix bound to [`NAMESPACE`] in the default `@context`.
pub const PREFIX: &str = "tswf";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VocabularyError {
    #[error("unknown term `{0}`")]
    UnknownTerm(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Metadata,
    Input,
    Plot,
    InformationAnalysis,
    StationaryAnalysis,
    Preprocessing,
    PredictiveModel,
    EvaluationMeasure,
    Output,
    Property,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    Integer,
    Real,
    IntegerList,
    RealList,
    String,
    Boolean,
}

/// A parameter value after it has been checked against its [`ParamSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Integer(i64),
    Real(f64),
    IntegerList(Vec<i64>),
    RealList(Vec<f64>),
    String(String),
    Boolean(bool),
}

impl ParamValue {
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Integer(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Real(v) => Some(*v),
            ParamValue::Integer(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_int_list(&self) -> Option<&[i64]> {
        match self {
            ParamValue::IntegerList(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::String(v) => Some(v),
            _ => None,
        }
    }

    /// JSON form; integral reals are written without a fractional part so
    /// that a literal `0` in a document stays `0`.
    pub fn to_json(&self) -> Value {
        fn real(v: f64) -> Value {
            if v.fract() == 0.0 && v.abs() < 9.0e15 {
                Value::from(v as i64)
            } else {
                Value::from(v)
            }
        }
        match self {
            ParamValue::Integer(v) => Value::from(*v),
            ParamValue::Real(v) => real(*v),
            ParamValue::IntegerList(v) => Value::from(v.clone()),
            ParamValue::RealList(v) => Value::Array(v.iter().map(|x| real(*x)).collect()),
            ParamValue::String(v) => Value::from(v.clone()),
            ParamValue::Boolean(v) => Value::from(*v),
        }
    }
}

/// Defaults computed from the data at execution time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivedDefault {
    /// `floor(10 * log10(n))`, capped at `n - 1`.
    LogLag,
    /// `floor((n - 1)^(1/3))`.
    CubeRootLag,
    /// `min(10, n / 5)`, at least 1.
    PortmanteauLag,
    /// Observations per seasonal period of the input, or 1 when unset.
    InputFrequency,
}

impl DerivedDefault {
    pub fn rule(&self) -> &'static str {
        match self {
            DerivedDefault::LogLag => "floor(10*log10(n))",
            DerivedDefault::CubeRootLag => "floor((n-1)^(1/3))",
            DerivedDefault::PortmanteauLag => "min(10, n/5)",
            DerivedDefault::InputFrequency => "input frequency (1 when unset)",
        }
    }

    pub fn resolve(&self, n: usize, frequency: Option<u32>) -> i64 {
        match self {
            DerivedDefault::LogLag => {
                if n < 2 {
                    return 0;
                }
                let h = (10.0 * (n as f64).log10()).floor() as i64;
                h.min(n as i64 - 1)
            }
            DerivedDefault::CubeRootLag => {
                if n < 2 {
                    return 0;
                }
                // integer cube root, exact for perfect cubes
                let target = (n - 1) as i64;
                let mut r = ((target as f64).cbrt().round()) as i64;
                while r * r * r > target {
                    r -= 1;
                }
                while (r + 1) * (r + 1) * (r + 1) <= target {
                    r += 1;
                }
                r
            }
            DerivedDefault::PortmanteauLag => (n as i64 / 5).clamp(1, 10),
            DerivedDefault::InputFrequency => frequency.map(i64::from).unwrap_or(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "kebab-case")]
pub enum ParamDefault {
    Absent,
    Fixed(ParamValue),
    Derived(DerivedDefault),
}

/// Closed interval; applies element-wise to list parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub default: ParamDefault,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
    /// Required length for list kinds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    /// Allowed values for string kinds.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub choices: Vec<String>,
}

/// Why a raw value does not conform to a [`ParamSpec`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamIssue {
    Shape(String),
    Bounds(String),
    Choice(String),
}

impl ParamSpec {
    fn new(name: &str, kind: ParamKind) -> Self {
        ParamSpec {
            name: name.to_string(),
            kind,
            default: ParamDefault::Absent,
            bounds: None,
            length: None,
            choices: Vec::new(),
        }
    }

    fn default_value(mut self, v: ParamValue) -> Self {
        self.default = ParamDefault::Fixed(v);
        self
    }

    fn derived(mut self, d: DerivedDefault) -> Self {
        self.default = ParamDefault::Derived(d);
        self
    }

    fn bounded(mut self, min: f64, max: f64) -> Self {
        self.bounds = Some(Bounds { min, max });
        self
    }

    fn len(mut self, n: usize) -> Self {
        self.length = Some(n);
        self
    }

    fn choices(mut self, c: &[&str]) -> Self {
        self.choices = c.iter().map(|s| s.to_string()).collect();
        self
    }

    /// Checks a raw JSON value against this spec and converts it.
    pub fn coerce(&self, raw: &Value) -> Result<ParamValue, ParamIssue> {
        let value = match self.kind {
            ParamKind::Integer => ParamValue::Integer(as_integer(raw).ok_or_else(|| {
                ParamIssue::Shape(format!("`{}` expects an integer, got {raw}", self.name))
            })?),
            ParamKind::Real => ParamValue::Real(raw.as_f64().ok_or_else(|| {
                ParamIssue::Shape(format!("`{}` expects a number, got {raw}", self.name))
            })?),
            ParamKind::IntegerList => {
                let items = raw.as_array().ok_or_else(|| {
                    ParamIssue::Shape(format!("`{}` expects a list of integers", self.name))
                })?;
                let v: Option<Vec<i64>> = items.iter().map(as_integer).collect();
                ParamValue::IntegerList(v.ok_or_else(|| {
                    ParamIssue::Shape(format!("`{}` expects a list of integers", self.name))
                })?)
            }
            ParamKind::RealList => {
                let items = raw.as_array().ok_or_else(|| {
                    ParamIssue::Shape(format!("`{}` expects a list of numbers", self.name))
                })?;
                let v: Option<Vec<f64>> = items.iter().map(Value::as_f64).collect();
                ParamValue::RealList(v.ok_or_else(|| {
                    ParamIssue::Shape(format!("`{}` expects a list of numbers", self.name))
                })?)
            }
            ParamKind::String => ParamValue::String(
                raw.as_str()
                    .ok_or_else(|| {
                        ParamIssue::Shape(format!("`{}` expects a string, got {raw}", self.name))
                    })?
                    .to_string(),
            ),
            ParamKind::Boolean => ParamValue::Boolean(raw.as_bool().ok_or_else(|| {
                ParamIssue::Shape(format!("`{}` expects a boolean, got {raw}", self.name))
            })?),
        };
        self.check(&value)?;
        Ok(value)
    }

    fn check(&self, value: &ParamValue) -> Result<(), ParamIssue> {
        let scalars: Vec<f64> = match value {
            ParamValue::Integer(v) => vec![*v as f64],
            ParamValue::Real(v) => vec![*v],
            ParamValue::IntegerList(v) => v.iter().map(|x| *x as f64).collect(),
            ParamValue::RealList(v) => v.clone(),
            _ => Vec::new(),
        };
        if let (Some(n), ParamValue::IntegerList(_) | ParamValue::RealList(_)) =
            (self.length, value)
        {
            if scalars.len() != n {
                return Err(ParamIssue::Shape(format!(
                    "`{}` expects exactly {n} elements, got {}",
                    self.name,
                    scalars.len()
                )));
            }
        }
        if let Some(b) = self.bounds {
            if let Some(bad) = scalars.iter().find(|v| !v.is_finite() || !b.contains(**v)) {
                return Err(ParamIssue::Bounds(format!(
                    "`{}` value {bad} outside [{}, {}]",
                    self.name, b.min, b.max
                )));
            }
        }
        if let ParamValue::String(s) = value {
            if !self.choices.is_empty() && !self.choices.iter().any(|c| c == s) {
                return Err(ParamIssue::Choice(format!(
                    "`{}` must be one of {:?}, got `{s}`",
                    self.name, self.choices
                )));
            }
        }
        Ok(())
    }
}

fn as_integer(v: &Value) -> Option<i64> {
    if let Some(i) = v.as_i64() {
        return Some(i);
    }
    v.as_f64()
        .filter(|f| f.fract() == 0.0 && f.abs() < 9.0e15)
        .map(|f| f as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub iri: String,
    pub curie: String,
    pub category: Category,
    /// Curie of the parent class; `None` for category roots and properties.
    pub parent: Option<String>,
    pub params: Vec<ParamSpec>,
    pub executable: bool,
}

impl Term {
    pub fn local_name(&self) -> &str {
        &self.iri[NAMESPACE.len()..]
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Immutable term table. Obtain the shared instance with [`load_vocabulary`].
#[derive(Debug)]
pub struct TermRegistry {
    terms: Vec<Term>,
    by_iri: HashMap<String, usize>,
}

impl TermRegistry {
    fn build(defs: Vec<(&str, Category, Option<&str>, bool, Vec<ParamSpec>)>) -> Self {
        let mut terms = Vec::with_capacity(defs.len());
        let mut by_iri = HashMap::with_capacity(defs.len());
        for (local, category, parent, executable, params) in defs {
            let term = Term {
                iri: format!("{NAMESPACE}{local}"),
                curie: format!("{PREFIX}:{local}"),
                category,
                parent: parent.map(|p| format!("{PREFIX}:{p}")),
                params,
                executable,
            };
            let prev = by_iri.insert(term.iri.clone(), terms.len());
            assert!(prev.is_none(), "duplicate vocabulary term {local}");
            terms.push(term);
        }
        TermRegistry { terms, by_iri }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Looks up a term by curie (`tswf:ARIMA`) or absolute IRI.
    pub fn resolve(&self, name: &str) -> Result<&Term, VocabularyError> {
        self.lookup(&expand_default(name))
            .ok_or_else(|| VocabularyError::UnknownTerm(name.to_string()))
    }

    /// Looks up an already expanded IRI.
    pub fn lookup(&self, iri: &str) -> Option<&Term> {
        self.by_iri.get(iri).map(|&i| &self.terms[i])
    }

    pub fn param_schema_of<'a>(&self, term: &'a Term) -> &'a [ParamSpec] {
        &term.params
    }

    /// Walks `term` up to its category root, starting with `term` itself.
    pub fn ancestors<'a>(&'a self, term: &'a Term) -> impl Iterator<Item = &'a Term> + 'a {
        let mut cur = Some(term);
        std::iter::from_fn(move || {
            let t = cur?;
            cur = t.parent.as_deref().and_then(|p| self.resolve(p).ok());
            Some(t)
        })
    }

    pub fn is_a(&self, term: &Term, ancestor_local: &str) -> bool {
        self.ancestors(term).any(|t| t.local_name() == ancestor_local)
    }

    /// JSON dump used by external tooling.
    pub fn to_json(&self) -> Value {
        serde_json::to_value(&self.terms).expect("terms serialize")
    }
}

/// Expands `tswf:X` with the default context; anything else is returned as is.
pub fn expand_default(name: &str) -> String {
    match name.split_once(':') {
        Some((PREFIX, local)) if !local.starts_with("//") => format!("{NAMESPACE}{local}"),
        _ => name.to_string(),
    }
}

/// Compacts an IRI in the schema namespace to its curie.
pub fn compact(iri: &str) -> String {
    match iri.strip_prefix(NAMESPACE) {
        Some(local) if !local.is_empty() => format!("{PREFIX}:{local}"),
        _ => iri.to_string(),
    }
}

/// The process-wide registry.
pub fn load_vocabulary() -> &'static TermRegistry {
    static REGISTRY: OnceLock<TermRegistry> = OnceLock::new();
    REGISTRY.get_or_init(|| TermRegistry::build(definitions()))
}

fn definitions() -> Vec<(&'static str, Category, Option<&'static str>, bool, Vec<ParamSpec>)> {
    use Category::*;
    use ParamKind as K;

    let lag = || {
        ParamSpec::new("lag", K::Integer)
            .derived(DerivedDefault::LogLag)
            .bounded(1.0, 10_000.0)
    };
    let period = || {
        ParamSpec::new("period", K::Integer)
            .derived(DerivedDefault::InputFrequency)
            .bounded(1.0, 10_000.0)
    };
    let none = Vec::new;

    let mut d: Vec<(&str, Category, Option<&str>, bool, Vec<ParamSpec>)> = vec![
        // workflow metadata
        ("TSAnalysis", Metadata, None, false, none()),
        ("ServiceMeta", Metadata, Some("TSAnalysis"), false, none()),
        // data entry
        ("Data", Input, None, false, none()),
        ("CSVFile", Input, Some("Data"), true, none()),
        ("Database", Input, Some("Data"), false, none()),
        ("TSDatabase", Input, Some("Data"), false, none()),
        ("DataStream", Input, Some("Data"), false, none()),
        // visualization
        ("TSPlot", Plot, None, false, none()),
        ("PlotSTL", Plot, Some("TSPlot"), true, vec![period()]),
        ("PlotACF", Plot, Some("TSPlot"), true, vec![lag()]),
        ("PlotPACF", Plot, Some("TSPlot"), true, vec![lag()]),
        ("PlotRegular", Plot, Some("TSPlot"), true, none()),
        // information analysis
        ("InformationAnalysis", InformationAnalysis, None, false, none()),
        (
            "LagStudy",
            InformationAnalysis,
            Some("InformationAnalysis"),
            true,
            vec![ParamSpec::new("lag", K::Integer)
                .derived(DerivedDefault::LogLag)
                .bounded(0.0, 10_000.0)],
        ),
        ("TrendSTL", InformationAnalysis, Some("InformationAnalysis"), true, vec![period()]),
        ("ACF", InformationAnalysis, Some("InformationAnalysis"), true, vec![lag()]),
        ("PACF", InformationAnalysis, Some("InformationAnalysis"), true, vec![lag()]),
        // stationarity and statistical tests
        ("StatitionaryAnalysis", StationaryAnalysis, None, false, none()),
        ("StatisticalTest", StationaryAnalysis, Some("StatitionaryAnalysis"), true, none()),
        (
            "DickeyFuller",
            StationaryAnalysis,
            Some("StatisticalTest"),
            true,
            vec![ParamSpec::new("lags", K::Integer)
                .derived(DerivedDefault::CubeRootLag)
                .bounded(0.0, 1_000.0)],
        ),
        ("JarqueBera", StationaryAnalysis, Some("StatisticalTest"), true, none()),
        (
            "JungBox",
            StationaryAnalysis,
            Some("StatisticalTest"),
            true,
            vec![ParamSpec::new("lag", K::Integer)
                .derived(DerivedDefault::PortmanteauLag)
                .bounded(1.0, 10_000.0)],
        ),
        ("RunsTest", StationaryAnalysis, Some("StatisticalTest"), true, none()),
        ("NonLinearityTest", StationaryAnalysis, Some("StatisticalTest"), false, none()),
        // preprocessing
        ("Preprocessing", Preprocessing, None, false, none()),
        ("Imputation", Preprocessing, Some("Preprocessing"), false, none()),
        ("Outliers", Preprocessing, Some("Preprocessing"), false, none()),
        ("SpectralAnalysis", Preprocessing, Some("Preprocessing"), false, none()),
        ("Scaling", Preprocessing, Some("Preprocessing"), false, none()),
        ("NoiseReduction", Preprocessing, Some("Preprocessing"), false, none()),
        ("Smoothing", Preprocessing, Some("Preprocessing"), false, none()),
        (
            "Impute",
            Preprocessing,
            Some("Imputation"),
            true,
            vec![ParamSpec::new("method", K::String)
                .default_value(ParamValue::String("linear".into()))
                .choices(&["linear", "mean"])],
        ),
        (
            "OutlierDetection",
            Preprocessing,
            Some("Outliers"),
            true,
            vec![ParamSpec::new("threshold", K::Real)
                .default_value(ParamValue::Real(3.0))
                .bounded(0.0, f64::MAX)],
        ),
        ("Periodogram", Preprocessing, Some("SpectralAnalysis"), true, none()),
        (
            "Scale",
            Preprocessing,
            Some("Scaling"),
            true,
            vec![ParamSpec::new("method", K::String)
                .default_value(ParamValue::String("zscore".into()))
                .choices(&["zscore", "minmax"])],
        ),
        (
            "BoxCox",
            Preprocessing,
            Some("NoiseReduction"),
            true,
            vec![ParamSpec::new("lambda", K::Real)
                .default_value(ParamValue::Real(0.0))
                .bounded(-10.0, 10.0)],
        ),
        (
            "MovingAverage",
            Preprocessing,
            Some("Smoothing"),
            true,
            vec![ParamSpec::new("window", K::Integer)
                .default_value(ParamValue::Integer(3))
                .bounded(1.0, 100_000.0)],
        ),
        (
            "Differencing",
            Preprocessing,
            Some("Preprocessing"),
            true,
            vec![
                ParamSpec::new("order", K::Integer)
                    .default_value(ParamValue::Integer(1))
                    .bounded(0.0, 10.0),
                ParamSpec::new("seasonal", K::Integer)
                    .default_value(ParamValue::Integer(0))
                    .bounded(0.0, 10.0),
                period(),
            ],
        ),
        // predictive models
        ("PredictiveModel", PredictiveModel, None, false, none()),
        (
            "ARIMA",
            PredictiveModel,
            Some("PredictiveModel"),
            true,
            vec![
                ParamSpec::new("order", K::IntegerList)
                    .default_value(ParamValue::IntegerList(vec![1, 0, 0]))
                    .len(3)
                    .bounded(0.0, 10.0),
                ParamSpec::new("seasonal", K::IntegerList)
                    .default_value(ParamValue::IntegerList(vec![0, 0, 0]))
                    .len(3)
                    .bounded(0.0, 10.0),
                ParamSpec::new("lambda", K::Real).bounded(-10.0, 10.0),
            ],
        ),
        (
            "AR",
            PredictiveModel,
            Some("PredictiveModel"),
            true,
            vec![ParamSpec::new("order", K::Integer).bounded(0.0, 100.0)],
        ),
        (
            "ETS",
            PredictiveModel,
            Some("PredictiveModel"),
            true,
            vec![ParamSpec::new("variant", K::String)
                .default_value(ParamValue::String("simple".into()))
                .choices(&["simple", "holt"])],
        ),
        (
            "SVM",
            PredictiveModel,
            Some("PredictiveModel"),
            true,
            vec![
                ParamSpec::new("embedding", K::Integer)
                    .default_value(ParamValue::Integer(5))
                    .bounded(1.0, 1_000.0),
                ParamSpec::new("epsilon", K::Real)
                    .default_value(ParamValue::Real(0.1))
                    .bounded(0.0, f64::MAX),
                ParamSpec::new("C", K::Real)
                    .default_value(ParamValue::Real(1.0))
                    .bounded(1e-12, f64::MAX),
                ParamSpec::new("epochs", K::Integer)
                    .default_value(ParamValue::Integer(200))
                    .bounded(1.0, 1_000_000.0),
            ],
        ),
        ("NeuralNetwork", PredictiveModel, Some("PredictiveModel"), false, none()),
        ("RandomForest", PredictiveModel, Some("PredictiveModel"), false, none()),
        ("LASSO", PredictiveModel, Some("PredictiveModel"), false, none()),
        ("MARS", PredictiveModel, Some("PredictiveModel"), false, none()),
        ("SARIMA", PredictiveModel, Some("ARIMA"), false, none()),
        ("ARIMAX", PredictiveModel, Some("ARIMA"), false, none()),
        // evaluation measures
        ("ErrorMeasure", EvaluationMeasure, None, false, none()),
        ("SimilarityMeasure", EvaluationMeasure, None, false, none()),
        ("ClassificationMeasure", EvaluationMeasure, None, false, none()),
        ("ClusteringMeasure", EvaluationMeasure, None, false, none()),
    ];
    for m in ["RMSE", "MSE", "MAE", "MdAE", "MAPE", "sMAPE", "MASE", "ME", "MPE"] {
        d.push((m, EvaluationMeasure, Some("ErrorMeasure"), true, none()));
    }
    d.extend([
        (
            "DTW",
            EvaluationMeasure,
            Some("SimilarityMeasure"),
            true,
            vec![ParamSpec::new("band", K::Integer).bounded(0.0, 1_000_000.0)],
        ),
        ("Euclidean", EvaluationMeasure, Some("SimilarityMeasure"), true, none()),
        ("EditDistance", EvaluationMeasure, Some("SimilarityMeasure"), false, none()),
        ("Jaccard", EvaluationMeasure, Some("SimilarityMeasure"), false, none()),
        ("F1Score", EvaluationMeasure, Some("ClassificationMeasure"), true, none()),
        ("ConfusionMatrix", EvaluationMeasure, Some("ClassificationMeasure"), true, none()),
        ("ROC", EvaluationMeasure, Some("ClassificationMeasure"), false, none()),
        ("APN", EvaluationMeasure, Some("ClusteringMeasure"), false, none()),
        ("AD", EvaluationMeasure, Some("ClusteringMeasure"), false, none()),
        ("ADM", EvaluationMeasure, Some("ClusteringMeasure"), false, none()),
        ("SilhouetteW", EvaluationMeasure, Some("ClusteringMeasure"), false, none()),
        // workflow outputs
        ("EvaluationMeasures", Output, None, false, none()),
        ("ForecastAccuracy", Output, Some("EvaluationMeasures"), true, none()),
        ("SimilarityMeasurement", Output, Some("EvaluationMeasures"), true, none()),
        ("ClassificationPerformance", Output, Some("EvaluationMeasures"), true, none()),
        ("ClusteringPerformance", Output, Some("EvaluationMeasures"), false, none()),
    ]);
    for p in [
        "hasInput",
        "hasOutput",
        "hasPlot",
        "hasInformationAnalysis",
        "hasStationaryAnalysis",
        "hasPreprocessing",
        "hasMLAnalysis",
        "hasTSAnalysis",
        "hasTSRegression",
        "hasMeasures",
        "performs",
        "parameters",
        "source",
        "src",
        "fields",
        "frequency",
        "name",
        "description",
        "author",
        "dateCreated",
        "version",
        "codeRepository",
        "hasServiceMeta",
        "costPerRun",
        "amount",
        "currency",
        "authRequired",
        // literal datatypes
        "datetime",
        "integer",
        "real",
        "string",
        "boolean",
        "url",
    ] {
        d.push((p, Property, None, false, none()));
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contains_the_paper_terms() {
        let reg = load_vocabulary();
        assert_eq!(reg.resolve("tswf:ARIMA").unwrap().category, Category::PredictiveModel);
        let ts = reg.resolve("tswf:TSAnalysis").unwrap();
        assert_eq!(ts.category, Category::Metadata);
        assert!(ts.parent.is_none());
        assert_eq!(
            reg.resolve("tswf:JungBox").unwrap().category,
            Category::StationaryAnalysis
        );
    }

    #[test]
    fn resolve_by_curie_and_iri() {
        let reg = load_vocabulary();
        assert_eq!(
            reg.resolve("tswf:RMSE").unwrap().category,
            Category::EvaluationMeasure
        );
        let ar = reg.resolve("http://dicits.ugr.es/linkeddata/tswf-schema/AR").unwrap();
        assert_eq!(ar.curie, "tswf:AR");
        assert_eq!(
            reg.resolve("tswf:Bogus"),
            Err(VocabularyError::UnknownTerm("tswf:Bogus".into()))
        );
    }

    #[test]
    fn arima_and_plot_schemas() {
        let reg = load_vocabulary();
        let arima = reg.resolve("tswf:ARIMA").unwrap();
        let order = arima.param("order").unwrap();
        assert_eq!(order.kind, ParamKind::IntegerList);
        assert_eq!(order.length, Some(3));
        assert_eq!(order.default, ParamDefault::Fixed(ParamValue::IntegerList(vec![1, 0, 0])));
        assert_eq!(
            arima.param("seasonal").unwrap().default,
            ParamDefault::Fixed(ParamValue::IntegerList(vec![0, 0, 0]))
        );
        assert_eq!(arima.param("lambda").unwrap().default, ParamDefault::Absent);

        let pacf = reg.resolve("tswf:PlotPACF").unwrap();
        let lag = pacf.param("lag").unwrap();
        assert_eq!(lag.default, ParamDefault::Derived(DerivedDefault::LogLag));
        assert_eq!(lag.bounds.unwrap().min, 1.0);

        assert!(reg.param_schema_of(reg.resolve("tswf:RMSE").unwrap()).is_empty());
    }

    #[test]
    fn round_trip_and_namespace_closure() {
        let reg = load_vocabulary();
        for t in reg.terms() {
            assert_eq!(reg.resolve(&t.curie).unwrap(), t);
            assert_eq!(reg.resolve(&t.iri).unwrap(), t);
            assert_eq!(compact(&t.iri), t.curie);
            assert!(t.curie.starts_with("tswf:"));
        }
    }

    #[test]
    fn parent_chains_terminate_within_category() {
        let reg = load_vocabulary();
        for t in reg.terms() {
            let chain: Vec<_> = reg.ancestors(t).take(reg.len() + 1).collect();
            assert!(chain.len() <= reg.len(), "cycle at {}", t.curie);
            let root = chain.last().unwrap();
            assert!(root.parent.is_none());
            assert!(chain.iter().all(|c| c.category == t.category), "{}", t.curie);
        }
    }

    #[test]
    fn defaults_satisfy_their_specs() {
        for t in load_vocabulary().terms() {
            for p in &t.params {
                if let ParamDefault::Fixed(v) = &p.default {
                    assert_eq!(p.coerce(&v.to_json()).as_ref(), Ok(v), "{} {}", t.curie, p.name);
                }
            }
        }
    }

    #[test]
    fn out_of_scope_models_are_not_executable() {
        let reg = load_vocabulary();
        for name in [
            "NeuralNetwork",
            "RandomForest",
            "LASSO",
            "MARS",
            "SARIMA",
            "ARIMAX",
            "APN",
            "ADM",
            "SilhouetteW",
            "ROC",
            "EditDistance",
            "Jaccard",
        ] {
            assert!(!reg.resolve(&format!("tswf:{name}")).unwrap().executable, "{name}");
        }
    }

    #[test]
    fn coercion_reports_shape_and_bounds() {
        let reg = load_vocabulary();
        let order = reg.resolve("tswf:ARIMA").unwrap().param("order").unwrap();
        assert!(matches!(
            order.coerce(&serde_json::json!([0, 0])),
            Err(ParamIssue::Shape(_))
        ));
        assert!(matches!(
            order.coerce(&serde_json::json!([0, -1, 0])),
            Err(ParamIssue::Bounds(_))
        ));
        let lambda = reg.resolve("tswf:ARIMA").unwrap().param("lambda").unwrap();
        assert_eq!(lambda.coerce(&serde_json::json!(0)), Ok(ParamValue::Real(0.0)));
        assert_eq!(ParamValue::Real(0.0).to_json(), serde_json::json!(0));
    }

    #[test]
    fn derived_defaults() {
        assert_eq!(DerivedDefault::LogLag.resolve(98, None), 19);
        assert_eq!(DerivedDefault::LogLag.resolve(5, None), 4);
        assert_eq!(DerivedDefault::CubeRootLag.resolve(98, None), 4);
        assert_eq!(DerivedDefault::CubeRootLag.resolve(28, None), 3);
        assert_eq!(DerivedDefault::PortmanteauLag.resolve(98, None), 10);
        assert_eq!(DerivedDefault::PortmanteauLag.resolve(20, None), 4);
        assert_eq!(DerivedDefault::InputFrequency.resolve(98, None), 1);
        assert_eq!(DerivedDefault::InputFrequency.resolve(98, Some(12)), 12);
    }
}
