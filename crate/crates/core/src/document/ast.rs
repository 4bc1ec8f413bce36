use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::vocabulary::{
    compact, ParamDefault, ParamValue, Term, TermRegistry, NAMESPACE,
};

/// Typed view of a `tswf:TSAnalysis` document.
///
/// Equality is structural: source locations and parse warnings are carried
/// along for diagnostics but do not take part in `==`.
#[derive(Debug, Clone, Serialize)]
pub struct WorkflowDoc {
    pub id: String,
    pub name: Option<String>,
    pub description: Option<String>,
    pub author: Option<String>,
    pub version: Option<String>,
    pub date_created: Option<NaiveDateTime>,
    pub code_repository: Option<String>,
    pub input: Option<InputSpec>,
    pub preprocessing: Vec<OpSpec>,
    pub plots: Vec<OpSpec>,
    pub info_analyses: Vec<OpSpec>,
    pub stationary_analyses: Vec<OpSpec>,
    pub models: Vec<OpSpec>,
    pub outputs: Vec<OutputSpec>,
    pub service_meta: Option<ServiceMeta>,
    #[serde(skip)]
    pub parse_warnings: Vec<super::Diagnostic>,
}

impl PartialEq for WorkflowDoc {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.name == other.name
            && self.description == other.description
            && self.author == other.author
            && self.version == other.version
            && self.date_created == other.date_created
            && self.code_repository == other.code_repository
            && self.input == other.input
            && self.preprocessing == other.preprocessing
            && self.plots == other.plots
            && self.info_analyses == other.info_analyses
            && self.stationary_analyses == other.stationary_analyses
            && self.models == other.models
            && self.outputs == other.outputs
            && self.service_meta == other.service_meta
    }
}

/// Execution stages, in the order the engine runs them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Input,
    Preprocessing,
    Plots,
    InformationAnalysis,
    StationaryAnalysis,
    Models,
    Outputs,
}

impl WorkflowDoc {
    /// Stages present in this document, in execution order.
    pub fn flow(&self) -> Vec<Stage> {
        let mut flow = Vec::new();
        if self.input.is_some() {
            flow.push(Stage::Input);
        }
        let groups = [
            (Stage::Preprocessing, self.preprocessing.is_empty()),
            (Stage::Plots, self.plots.is_empty()),
            (Stage::InformationAnalysis, self.info_analyses.is_empty()),
            (Stage::StationaryAnalysis, self.stationary_analyses.is_empty()),
            (Stage::Models, self.models.is_empty()),
            (Stage::Outputs, self.outputs.is_empty()),
        ];
        flow.extend(groups.iter().filter(|(_, empty)| !empty).map(|(s, _)| *s));
        flow
    }

    /// Number of engine steps an all-successful run produces.
    pub fn operation_count(&self) -> usize {
        self.preprocessing.len()
            + self.plots.len()
            + self.info_analyses.len()
            + self.stationary_analyses.len()
            + self.models.len() * 2
            + self.outputs.len()
    }

    /// Every operation in the document, stage by stage.
    pub fn all_ops(&self) -> impl Iterator<Item = &OpSpec> {
        self.preprocessing
            .iter()
            .chain(&self.plots)
            .chain(&self.info_analyses)
            .chain(&self.stationary_analyses)
            .chain(&self.models)
            .chain(self.outputs.iter().flat_map(|o| o.measures.iter()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldType {
    Datetime,
    Integer,
    Real,
    String,
    #[serde(untagged)]
    Other(String),
}

impl FieldType {
    pub fn from_iri(iri: &str) -> Self {
        match iri.strip_prefix(NAMESPACE) {
            Some("datetime") => FieldType::Datetime,
            Some("integer") => FieldType::Integer,
            Some("real") => FieldType::Real,
            Some("string") => FieldType::String,
            _ => FieldType::Other(iri.to_string()),
        }
    }

    pub fn iri(&self) -> String {
        match self {
            FieldType::Datetime => format!("{NAMESPACE}datetime"),
            FieldType::Integer => format!("{NAMESPACE}integer"),
            FieldType::Real => format!("{NAMESPACE}real"),
            FieldType::String => format!("{NAMESPACE}string"),
            FieldType::Other(iri) => iri.clone(),
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, FieldType::Integer | FieldType::Real)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub dtype: FieldType,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputSpec {
    /// Expanded IRI of the source class, e.g. the CSVFile term.
    pub source_kind: String,
    pub src: String,
    pub fields: Vec<FieldSpec>,
    /// Observations per seasonal period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency: Option<i64>,
    #[serde(skip)]
    pub path: String,
}

impl PartialEq for InputSpec {
    fn eq(&self, other: &Self) -> bool {
        self.source_kind == other.source_kind
            && self.src == other.src
            && self.fields == other.fields
            && self.frequency == other.frequency
    }
}

impl InputSpec {
    pub fn frequency(&self) -> Option<u32> {
        self.frequency.and_then(|f| u32::try_from(f).ok())
    }
}

/// Which `performs` property a model was declared under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelSlot {
    #[serde(rename = "tswf:hasMLAnalysis")]
    MLAnalysis,
    #[serde(rename = "tswf:hasTSAnalysis")]
    TSAnalysis,
    #[serde(rename = "tswf:hasTSRegression")]
    TSRegression,
}

impl ModelSlot {
    pub fn local_name(&self) -> &'static str {
        match self {
            ModelSlot::MLAnalysis => "hasMLAnalysis",
            ModelSlot::TSAnalysis => "hasTSAnalysis",
            ModelSlot::TSRegression => "hasTSRegression",
        }
    }

    pub fn from_local(name: &str) -> Option<Self> {
        match name {
            "hasMLAnalysis" => Some(ModelSlot::MLAnalysis),
            "hasTSAnalysis" => Some(ModelSlot::TSAnalysis),
            "hasTSRegression" => Some(ModelSlot::TSRegression),
            _ => None,
        }
    }
}

/// One operation instance: a term plus the parameters set explicitly in the
/// document. Values are kept as written; they are typed against the term's
/// parameter schema during validation and resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpSpec {
    /// Expanded IRI of the operation's class.
    pub term: String,
    pub params: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<ModelSlot>,
    #[serde(skip)]
    pub path: String,
    #[serde(skip)]
    pub param_paths: BTreeMap<String, String>,
}

impl PartialEq for OpSpec {
    fn eq(&self, other: &Self) -> bool {
        self.term == other.term && self.params == other.params && self.slot == other.slot
    }
}

/// A parameter after defaults have been applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedParam {
    pub value: ParamValue,
    pub is_default: bool,
}

/// Parameter view that does not need the data: derived defaults are
/// reported by rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum DeclaredParam {
    Value {
        value: Value,
        is_default: bool,
    },
    Derived {
        rule: &'static str,
        is_default: bool,
    },
}

impl OpSpec {
    pub fn new(term: impl Into<String>) -> Self {
        OpSpec {
            term: crate::vocabulary::expand_default(&term.into()),
            params: BTreeMap::new(),
            slot: None,
            path: String::new(),
            param_paths: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, name: &str, value: Value) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn curie(&self) -> String {
        compact(&self.term)
    }

    pub fn path_of_param(&self, name: &str) -> String {
        self.param_paths
            .get(name)
            .cloned()
            .unwrap_or_else(|| self.path.clone())
    }

    /// Resolves every parameter of `term`, injecting defaults. Parameters
    /// whose default is absent are omitted. Values that do not conform are
    /// skipped here; validation reports them.
    pub fn resolve_params(
        &self,
        term: &Term,
        n: usize,
        frequency: Option<u32>,
    ) -> BTreeMap<String, ResolvedParam> {
        let mut out = BTreeMap::new();
        for spec in &term.params {
            if let Some(raw) = self.params.get(&spec.name) {
                if let Ok(value) = spec.coerce(raw) {
                    out.insert(spec.name.clone(), ResolvedParam { value, is_default: false });
                    continue;
                }
            }
            let value = match &spec.default {
                ParamDefault::Absent => continue,
                ParamDefault::Fixed(v) => v.clone(),
                ParamDefault::Derived(d) => ParamValue::Integer(d.resolve(n, frequency)),
            };
            out.insert(spec.name.clone(), ResolvedParam { value, is_default: true });
        }
        out
    }

    /// Parameters as declared, with fixed defaults filled in and derived
    /// defaults reported by rule.
    pub fn declared_params(&self, term: &Term) -> BTreeMap<String, DeclaredParam> {
        let mut out = BTreeMap::new();
        for spec in &term.params {
            if let Some(raw) = self.params.get(&spec.name) {
                let value = spec.coerce(raw).map(|v| v.to_json()).unwrap_or_else(|_| raw.clone());
                out.insert(spec.name.clone(), DeclaredParam::Value { value, is_default: false });
                continue;
            }
            match &spec.default {
                ParamDefault::Absent => {}
                ParamDefault::Fixed(v) => {
                    out.insert(
                        spec.name.clone(),
                        DeclaredParam::Value { value: v.to_json(), is_default: true },
                    );
                }
                ParamDefault::Derived(d) => {
                    out.insert(
                        spec.name.clone(),
                        DeclaredParam::Derived { rule: d.rule(), is_default: true },
                    );
                }
            }
        }
        out
    }

    /// Copy with every fixed default written in explicitly.
    pub fn with_defaults(&self, registry: &TermRegistry) -> OpSpec {
        let mut out = self.clone();
        if let Some(term) = registry.lookup(&self.term) {
            for spec in &term.params {
                if let ParamDefault::Fixed(v) = &spec.default {
                    out.params.entry(spec.name.clone()).or_insert_with(|| v.to_json());
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// Expanded IRI of the output kind, e.g. ForecastAccuracy.
    pub kind: String,
    pub measures: Vec<OpSpec>,
    #[serde(skip)]
    pub path: String,
}

impl PartialEq for OutputSpec {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.kind == other.kind && self.measures == other.measures
    }
}

impl OutputSpec {
    pub fn is_forecast_accuracy(&self) -> bool {
        self.kind == format!("{NAMESPACE}ForecastAccuracy")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cost {
    pub amount: f64,
    pub currency: String,
}

/// Minimal service-management block: price per run and authentication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ServiceMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_per_run: Option<Cost>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auth_required: Option<bool>,
}
