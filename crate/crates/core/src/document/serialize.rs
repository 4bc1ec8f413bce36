use serde_json::{json, Map, Value};

use super::ast::*;
use crate::vocabulary::{compact, NAMESPACE, PREFIX};

/// Canonical text form: pretty-printed, keys sorted, every schema IRI
/// compacted under the `tswf` prefix, only explicitly set parameters.
pub fn serialize(doc: &WorkflowDoc) -> String {
    let mut text = serde_json::to_string_pretty(&serialize_value(doc)).expect("JSON values serialize");
    text.push('\n');
    text
}

fn key(local: &str) -> String {
    format!("{PREFIX}:{local}")
}

pub fn serialize_value(doc: &WorkflowDoc) -> Value {
    let mut root = Map::new();
    root.insert("@context".into(), json!({ PREFIX: NAMESPACE }));
    root.insert("@id".into(), Value::from(doc.id.clone()));
    root.insert("@type".into(), Value::from(key("TSAnalysis")));
    let strings = [
        ("name", &doc.name),
        ("description", &doc.description),
        ("author", &doc.author),
        ("version", &doc.version),
    ];
    for (local, value) in strings {
        if let Some(v) = value {
            root.insert(key(local), Value::from(v.clone()));
        }
    }
    if let Some(date) = &doc.date_created {
        root.insert(
            key("dateCreated"),
            Value::from(date.format("%Y-%m-%dT%H:%M:%S%.f").to_string()),
        );
    }
    if let Some(url) = &doc.code_repository {
        root.insert(key("codeRepository"), json!({"@type": key("url"), "@value": url}));
    }

    let groups = [
        ("hasPreprocessing", "Preprocessing", &doc.preprocessing),
        ("hasPlot", "TSPlot", &doc.plots),
        ("hasInformationAnalysis", "InformationAnalysis", &doc.info_analyses),
        ("hasStationaryAnalysis", "StatitionaryAnalysis", &doc.stationary_analyses),
    ];
    match &doc.input {
        Some(input) => {
            let mut data = Map::new();
            data.insert("@type".into(), Value::from(key("Data")));
            data.insert(key("source"), source_value(input));
            if let Some(f) = input.frequency {
                data.insert(key("frequency"), Value::from(f));
            }
            for (prop, container, ops) in groups {
                if !ops.is_empty() {
                    data.insert(key(prop), op_set(container, ops));
                }
            }
            root.insert(key("hasInput"), Value::Object(data));
        }
        None => {
            for (prop, container, ops) in groups {
                if !ops.is_empty() {
                    root.insert(key(prop), op_set(container, ops));
                }
            }
        }
    }

    if !doc.models.is_empty() {
        root.insert(key("performs"), performs_value(&doc.models));
    }
    if !doc.outputs.is_empty() {
        let items: Vec<Value> = doc.outputs.iter().map(output_value).collect();
        root.insert(
            key("hasOutput"),
            json!({"@type": key("EvaluationMeasures"), "@set": items}),
        );
    }
    if let Some(meta) = &doc.service_meta {
        root.insert(key("hasServiceMeta"), service_meta_value(meta));
    }
    Value::Object(root)
}

fn source_value(input: &InputSpec) -> Value {
    let fields: Vec<Value> = input
        .fields
        .iter()
        .map(|f| json!({"@type": compact(&f.dtype.iri()), "@value": f.name}))
        .collect();
    let mut src = Map::new();
    src.insert("@type".into(), Value::from(compact(&input.source_kind)));
    src.insert(key("src"), Value::from(input.src.clone()));
    if !fields.is_empty() {
        src.insert(key("fields"), json!({ "@set": fields }));
    }
    Value::Object(src)
}

fn op_value(op: &OpSpec) -> Value {
    let mut obj = Map::new();
    obj.insert("@type".into(), Value::from(op.curie()));
    if !op.params.is_empty() {
        let params: Vec<Value> = op
            .params
            .iter()
            .map(|(name, value)| json!({ key("name"): name, "@value": value }))
            .collect();
        obj.insert(key("parameters"), json!({ "@set": params }));
    }
    Value::Object(obj)
}

fn op_set(container: &str, ops: &[OpSpec]) -> Value {
    let items: Vec<Value> = ops.iter().map(op_value).collect();
    json!({"@type": key(container), "@set": items})
}

fn performs_value(models: &[OpSpec]) -> Value {
    let mut obj = Map::new();
    obj.insert("@type".into(), Value::from(key("PredictiveModel")));
    let unslotted: Vec<Value> = models.iter().filter(|m| m.slot.is_none()).map(op_value).collect();
    if !unslotted.is_empty() {
        obj.insert("@set".into(), Value::Array(unslotted));
    }
    for slot in [ModelSlot::MLAnalysis, ModelSlot::TSAnalysis, ModelSlot::TSRegression] {
        let items: Vec<Value> = models
            .iter()
            .filter(|m| m.slot == Some(slot))
            .map(op_value)
            .collect();
        match items.len() {
            0 => {}
            1 => {
                obj.insert(key(slot.local_name()), items.into_iter().next().unwrap());
            }
            _ => {
                obj.insert(key(slot.local_name()), json!({ "@set": items }));
            }
        }
    }
    Value::Object(obj)
}

fn output_value(out: &OutputSpec) -> Value {
    let mut obj = Map::new();
    obj.insert("@type".into(), Value::from(compact(&out.kind)));
    if let Some(id) = &out.id {
        obj.insert("@id".into(), Value::from(compact(id)));
    }
    let measures: Vec<Value> = out.measures.iter().map(op_value).collect();
    obj.insert(key("hasMeasures"), Value::Array(measures));
    Value::Object(obj)
}

fn service_meta_value(meta: &ServiceMeta) -> Value {
    let mut obj = Map::new();
    obj.insert("@type".into(), Value::from(key("ServiceMeta")));
    if let Some(cost) = &meta.cost_per_run {
        obj.insert(
            key("costPerRun"),
            json!({ key("amount"): cost.amount, key("currency"): cost.currency }),
        );
    }
    if let Some(auth) = meta.auth_required {
        obj.insert(key("authRequired"), Value::from(auth));
    }
    Value::Object(obj)
}
