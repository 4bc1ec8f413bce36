use std::collections::HashSet;

use super::ast::*;
use super::{Diagnostic, ValidationReport};
use crate::vocabulary::{Category, ParamIssue, TermRegistry};

/// Checks a parsed document against the vocabulary. Never fails; every
/// finding goes into the report.
pub fn validate(doc: &WorkflowDoc, registry: &TermRegistry) -> ValidationReport {
    let mut v = Validator {
        registry,
        out: doc.parse_warnings.clone(),
    };
    v.check_id(doc);
    v.check_input(doc);
    let frequency = doc.input.as_ref().and_then(|i| i.frequency);
    for op in &doc.preprocessing {
        v.check_op(op, Category::Preprocessing);
    }
    for op in &doc.plots {
        v.check_op(op, Category::Plot);
    }
    for op in &doc.info_analyses {
        v.check_op(op, Category::InformationAnalysis);
    }
    for op in &doc.stationary_analyses {
        v.check_op(op, Category::StationaryAnalysis);
    }
    for op in &doc.models {
        v.check_op(op, Category::PredictiveModel);
        v.check_seasonal_period(op, frequency);
    }
    for out in &doc.outputs {
        v.check_output(out);
    }
    v.check_models_vs_outputs(doc);
    if let Some(meta) = &doc.service_meta {
        v.check_service_meta(meta);
    }
    ValidationReport::from_diagnostics(v.out)
}

struct Validator<'r> {
    registry: &'r TermRegistry,
    out: Vec<Diagnostic>,
}

fn type_path(path: &str) -> String {
    if path.is_empty() {
        String::new()
    } else {
        format!("{path}/@type")
    }
}

/// An absolute IRI has a scheme followed by a non-empty remainder.
fn is_absolute_iri(s: &str) -> bool {
    let Some((scheme, rest)) = s.split_once(':') else {
        return false;
    };
    let mut chars = scheme.chars();
    let first_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic());
    first_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
        && !rest.is_empty()
        && !s.chars().any(char::is_whitespace)
}

impl Validator<'_> {
    fn error(&mut self, path: &str, code: &str, message: String) {
        self.out.push(Diagnostic::error(path, code, message));
    }

    fn warning(&mut self, path: &str, code: &str, message: String) {
        self.out.push(Diagnostic::warning(path, code, message));
    }

    fn check_id(&mut self, doc: &WorkflowDoc) {
        if !is_absolute_iri(&doc.id) {
            self.error("/@id", "InvalidIri", format!("`{}` is not an absolute IRI", doc.id));
        }
    }

    fn check_input(&mut self, doc: &WorkflowDoc) {
        let Some(input) = &doc.input else {
            self.error("", "MissingInput", "document declares no tswf:hasInput".into());
            return;
        };
        let tp = type_path(&input.path);
        match self.registry.lookup(&input.source_kind) {
            None => self.error(&tp, "UnknownTerm", format!("unknown source type `{}`", input.source_kind)),
            Some(term) if term.category != Category::Input => self.error(
                &tp,
                "WrongCategory",
                format!("{} is a {} term, not a data source", term.curie, term.category),
            ),
            Some(term) if !term.executable => self.warning(
                &tp,
                "UnsupportedSource",
                format!("{} sources validate but cannot be executed", term.curie),
            ),
            Some(_) => {}
        }

        let mut seen = HashSet::new();
        let mut datetimes = 0;
        let mut numeric = 0;
        for f in &input.fields {
            if !seen.insert(f.name.as_str()) {
                self.error(&input.path, "DuplicateField", format!("field `{}` is declared twice", f.name));
            }
            match &f.dtype {
                FieldType::Datetime => datetimes += 1,
                FieldType::Integer | FieldType::Real => numeric += 1,
                FieldType::String => {}
                FieldType::Other(iri) => self.error(
                    &input.path,
                    "UnknownFieldType",
                    format!("field `{}` has unsupported type `{iri}`", f.name),
                ),
            }
        }
        if datetimes > 1 {
            self.error(&input.path, "InputFields", format!("{datetimes} datetime fields; at most one is allowed"));
        }
        if numeric == 0 {
            self.error(&input.path, "InputFields", "input declares no numeric field".into());
        }
        if let Some(f) = input.frequency {
            if f < 1 {
                self.error(&input.path, "InvalidFrequency", format!("frequency must be positive, got {f}"));
            }
        }
    }

    fn check_op(&mut self, op: &OpSpec, expected: Category) {
        let tp = type_path(&op.path);
        let Some(term) = self.registry.lookup(&op.term) else {
            self.error(&tp, "UnknownTerm", format!("unknown term `{}`", op.curie()));
            return;
        };
        if term.category != expected {
            self.error(
                &tp,
                "WrongCategory",
                format!("{} is a {} term, expected {expected}", term.curie, term.category),
            );
            return;
        }
        if !term.executable {
            let has_children = self
                .registry
                .terms()
                .iter()
                .any(|t| t.parent.as_deref() == Some(term.curie.as_str()));
            if has_children {
                self.warning(&tp, "AbstractTerm", format!("{} is an abstract class", term.curie));
            } else {
                self.warning(&tp, "NotExecutable", format!("{} validates but has no execution backend", term.curie));
            }
        }
        for (name, raw) in &op.params {
            let path = op.path_of_param(name);
            let Some(spec) = term.param(name) else {
                self.error(&path, "UnknownParam", format!("{} has no parameter `{name}`", term.curie));
                continue;
            };
            match spec.coerce(raw) {
                Ok(_) => {}
                Err(ParamIssue::Shape(m)) => self.error(&path, "ParamShape", m),
                Err(ParamIssue::Bounds(m)) => self.error(&path, "ParamBounds", m),
                Err(ParamIssue::Choice(m)) => self.error(&path, "ParamChoice", m),
            }
        }
    }

    fn check_seasonal_period(&mut self, op: &OpSpec, frequency: Option<i64>) {
        let Some(term) = self.registry.lookup(&op.term) else { return };
        let Some(spec) = term.param("seasonal") else { return };
        let Some(raw) = op.params.get("seasonal") else { return };
        let Ok(value) = spec.coerce(raw) else { return };
        let seasonal = value.as_int_list().unwrap_or_default();
        if seasonal.iter().any(|&o| o != 0) && frequency.unwrap_or(1) <= 1 {
            self.warning(
                &op.path_of_param("seasonal"),
                "SeasonalPeriod",
                format!(
                    "{} has seasonal orders {seasonal:?} but the input has no seasonal frequency; period 1 is used",
                    term.curie
                ),
            );
        }
    }

    fn check_output(&mut self, out: &OutputSpec) {
        let tp = type_path(&out.path);
        match self.registry.lookup(&out.kind) {
            None => self.error(&tp, "UnknownTerm", format!("unknown output type `{}`", out.kind)),
            Some(term) if term.category != Category::Output => self.error(
                &tp,
                "WrongCategory",
                format!("{} is a {} term, not an output", term.curie, term.category),
            ),
            Some(term) if !term.executable => self.warning(
                &tp,
                "NotExecutable",
                format!("{} validates but has no execution backend", term.curie),
            ),
            Some(_) => {}
        }
        if out.measures.is_empty() {
            self.error(&out.path, "EmptyMeasures", "output lists no measures".into());
        }
        for m in &out.measures {
            self.check_op(m, Category::EvaluationMeasure);
        }
    }

    fn check_models_vs_outputs(&mut self, doc: &WorkflowDoc) {
        let accuracy = doc.outputs.iter().find(|o| o.is_forecast_accuracy());
        match (doc.models.is_empty(), accuracy) {
            (true, Some(out)) => self.error(
                &out.path,
                "ModelsOutputMismatch",
                "a ForecastAccuracy output needs at least one model".into(),
            ),
            (false, None) => self.error(
                &doc.models[0].path,
                "ModelsOutputMismatch",
                "models are declared but no ForecastAccuracy output evaluates them".into(),
            ),
            _ => {}
        }
    }

    fn check_service_meta(&mut self, meta: &ServiceMeta) {
        if let Some(cost) = &meta.cost_per_run {
            if !(cost.amount >= 0.0) || !cost.amount.is_finite() {
                self.error("", "NegativeCost", format!("cost per run must be non-negative, got {}", cost.amount));
            }
            let c = &cost.currency;
            if c.len() != 3 || !c.bytes().all(|b| b.is_ascii_uppercase()) {
                self.error("", "InvalidCurrency", format!("`{c}` is not an ISO-4217 currency code"));
            }
        }
    }
}
