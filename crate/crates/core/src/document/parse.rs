//! Reader for the JSON-LD subset used by workflow documents: `@context`
//! prefix maps, `@id`, `@type`, `@value` and `@set`.

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde_json::{Map, Value};

use super::ast::*;
use super::{Diagnostic, DocumentError};
use crate::vocabulary::{NAMESPACE, PREFIX};

/// Keywords that belong to full JSON-LD but are not part of the supported
/// subset.
const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "@graph", "@reverse", "@list", "@index", "@language", "@nest", "@included", "@base",
    "@vocab", "@container", "@direction", "@json", "@none", "@prefix", "@propagate",
    "@protected", "@version", "@import",
];

pub fn parse_document(text: &str) -> Result<WorkflowDoc, DocumentError> {
    let root: Value = serde_json::from_str(text).map_err(|e| DocumentError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = root
        .as_object()
        .ok_or_else(|| structure("", "document root must be a JSON object"))?;
    let mut parser = Parser {
        prefixes: HashMap::new(),
        warnings: Vec::new(),
    };
    parser.read_context(obj)?;
    parser.read_root(obj)
}

fn structure(path: &str, reason: impl Into<String>) -> DocumentError {
    DocumentError::Structure {
        path: path.to_string(),
        reason: reason.into(),
    }
}

/// Appends one reference token to a JSON pointer.
pub(crate) fn child(path: &str, token: &str) -> String {
    format!("{path}/{}", token.replace('~', "~0").replace('/', "~1"))
}

fn index(path: &str, i: usize) -> String {
    format!("{path}/{i}")
}

struct Parser {
    prefixes: HashMap<String, String>,
    warnings: Vec<Diagnostic>,
}

impl Parser {
    fn read_context(&mut self, root: &Map<String, Value>) -> Result<(), DocumentError> {
        let ctx = root
            .get("@context")
            .ok_or_else(|| structure("", "missing @context"))?;
        let path = "/@context";
        match ctx {
            Value::Object(map) => {
                for (prefix, value) in map {
                    match value {
                        Value::String(iri) => {
                            self.prefixes.insert(prefix.clone(), iri.clone());
                        }
                        _ => self.warn(
                            &child(path, prefix),
                            "UnsupportedContextEntry",
                            format!("context entry `{prefix}` is not a prefix mapping; ignored"),
                        ),
                    }
                }
                Ok(())
            }
            Value::String(_) => Err(structure(path, "remote contexts are not supported")),
            _ => Err(structure(path, "@context must be an object of prefix mappings")),
        }
    }

    fn warn(&mut self, path: &str, code: &str, message: String) {
        self.warnings.push(Diagnostic::warning(path, code, message));
    }

    /// Expands a compact IRI using the document's prefixes.
    fn expand(&self, name: &str) -> String {
        if let Some((prefix, local)) = name.split_once(':') {
            if let Some(ns) = self.prefixes.get(prefix) {
                if !local.starts_with("//") {
                    return format!("{ns}{local}");
                }
            }
        }
        name.to_string()
    }

    /// Local name of a key in the schema namespace.
    fn schema_key(&self, key: &str) -> Option<String> {
        self.expand(key)
            .strip_prefix(NAMESPACE)
            .map(|s| s.to_string())
    }

    fn check_keyword(&self, key: &str, path: &str) -> Result<(), DocumentError> {
        if UNSUPPORTED_KEYWORDS.contains(&key) {
            Err(structure(&child(path, key), format!("keyword {key} is not supported")))
        } else {
            Err(structure(&child(path, key), format!("unexpected keyword {key} here")))
        }
    }

    fn unknown_key(&mut self, key: &str, path: &str) {
        self.warn(&child(path, key), "UnknownKey", format!("unrecognized key `{key}`"));
    }

    fn type_of(&self, obj: &Map<String, Value>, path: &str) -> Result<Option<String>, DocumentError> {
        match obj.get("@type") {
            None => Ok(None),
            Some(Value::String(t)) => Ok(Some(self.expand(t))),
            Some(_) => Err(structure(&child(path, "@type"), "@type must be a string")),
        }
    }

    fn require_type(&self, obj: &Map<String, Value>, path: &str) -> Result<String, DocumentError> {
        self.type_of(obj, path)?
            .ok_or_else(|| structure(path, "missing @type"))
    }

    fn expect_container_type(&mut self, obj: &Map<String, Value>, path: &str, expected: &str) -> Result<(), DocumentError> {
        if let Some(t) = self.type_of(obj, path)? {
            if t != format!("{NAMESPACE}{expected}") {
                self.warn(
                    &child(path, "@type"),
                    "UnexpectedContainerType",
                    format!("expected {PREFIX}:{expected}, found {t}"),
                );
            }
        }
        Ok(())
    }

    fn read_root(mut self, obj: &Map<String, Value>) -> Result<WorkflowDoc, DocumentError> {
        let id = match obj.get("@id") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            Some(Value::String(_)) => return Err(structure("/@id", "@id must not be empty")),
            Some(_) => return Err(structure("/@id", "@id must be a string")),
            None => return Err(structure("", "missing @id")),
        };
        match self.type_of(obj, "")? {
            Some(t) if t == format!("{NAMESPACE}TSAnalysis") => {}
            Some(t) => {
                return Err(structure("/@type", format!("root @type must be tswf:TSAnalysis, found {t}")))
            }
            None => return Err(structure("", "missing @type tswf:TSAnalysis")),
        }

        let mut doc = WorkflowDoc {
            id,
            name: None,
            description: None,
            author: None,
            version: None,
            date_created: None,
            code_repository: None,
            input: None,
            preprocessing: Vec::new(),
            plots: Vec::new(),
            info_analyses: Vec::new(),
            stationary_analyses: Vec::new(),
            models: Vec::new(),
            outputs: Vec::new(),
            service_meta: None,
            parse_warnings: Vec::new(),
        };
        // groups declared at top level are appended after the ones nested in hasInput
        let mut top_groups: Vec<(String, &Value, String)> = Vec::new();

        for (key, value) in obj {
            let path = child("", key);
            if key.starts_with('@') {
                match key.as_str() {
                    "@context" | "@id" | "@type" => continue,
                    _ => return Err(self.check_keyword(key, "").unwrap_err()),
                }
            }
            let Some(local) = self.schema_key(key) else {
                self.unknown_key(key, "");
                continue;
            };
            match local.as_str() {
                "name" => doc.name = Some(self.literal_string(value, &path)?),
                "description" => doc.description = Some(self.literal_string(value, &path)?),
                "author" => doc.author = Some(self.literal_string(value, &path)?),
                "version" => doc.version = Some(self.literal_string(value, &path)?),
                "dateCreated" => {
                    let raw = self.literal_string(value, &path)?;
                    doc.date_created = Some(
                        parse_timestamp(&raw)
                            .ok_or_else(|| structure(&path, format!("invalid date `{raw}`")))?,
                    );
                }
                "codeRepository" => doc.code_repository = Some(self.literal_string(value, &path)?),
                "hasInput" => {
                    let (input, groups) = self.read_input(value, &path)?;
                    doc.input = Some(input);
                    for (local, v, p) in groups {
                        self.read_group(&mut doc, &local, v, &p)?;
                    }
                }
                "hasPlot" | "hasInformationAnalysis" | "hasStationaryAnalysis"
                | "hasPreprocessing" => top_groups.push((local.clone(), value, path)),
                "performs" => doc.models = self.read_performs(value, &path)?,
                "hasOutput" => doc.outputs = self.read_outputs(value, &path)?,
                "hasServiceMeta" => doc.service_meta = Some(self.read_service_meta(value, &path)?),
                _ => self.unknown_key(key, ""),
            }
        }
        for (local, value, path) in top_groups {
            self.read_group(&mut doc, &local, value, &path)?;
        }
        doc.parse_warnings = self.warnings;
        Ok(doc)
    }

    fn read_group(&mut self, doc: &mut WorkflowDoc, local: &str, value: &Value, path: &str) -> Result<(), DocumentError> {
        let (target, container) = match local {
            "hasPlot" => (&mut doc.plots, "TSPlot"),
            "hasInformationAnalysis" => (&mut doc.info_analyses, "InformationAnalysis"),
            "hasStationaryAnalysis" => (&mut doc.stationary_analyses, "StatitionaryAnalysis"),
            "hasPreprocessing" => (&mut doc.preprocessing, "Preprocessing"),
            _ => unreachable!("not a group property: {local}"),
        };
        let ops = self.read_op_list(value, path, container)?;
        target.extend(ops);
        Ok(())
    }

    /// A string literal, either bare or as `{"@value": ..}`.
    fn literal_string(&mut self, value: &Value, path: &str) -> Result<String, DocumentError> {
        match value {
            Value::String(s) => Ok(s.clone()),
            Value::Object(map) => {
                for key in map.keys() {
                    if key != "@value" && key != "@type" {
                        if key.starts_with('@') {
                            return Err(self.check_keyword(key, path).unwrap_err());
                        }
                        self.unknown_key(key, path);
                    }
                }
                self.type_of(map, path)?;
                match map.get("@value") {
                    Some(Value::String(s)) => Ok(s.clone()),
                    Some(_) => Err(structure(&child(path, "@value"), "expected a string value")),
                    None => Err(structure(path, "missing @value")),
                }
            }
            _ => Err(structure(path, "expected a string literal")),
        }
    }

    fn literal_value<'v>(&self, value: &'v Value, path: &str) -> Result<&'v Value, DocumentError> {
        match value {
            Value::Object(map) => map
                .get("@value")
                .ok_or_else(|| structure(path, "missing @value")),
            other => Ok(other),
        }
    }

    fn as_object<'v>(&self, value: &'v Value, path: &str) -> Result<&'v Map<String, Value>, DocumentError> {
        value
            .as_object()
            .ok_or_else(|| structure(path, "expected a JSON object"))
    }

    /// Items of an `@set` container, a bare array, or a single node.
    fn set_items<'v>(&self, value: &'v Value, path: &str) -> Result<Vec<(&'v Value, String)>, DocumentError> {
        match value {
            Value::Array(items) => Ok(items.iter().enumerate().map(|(i, v)| (v, index(path, i))).collect()),
            Value::Object(map) => match map.get("@set") {
                Some(Value::Array(items)) => {
                    let set_path = child(path, "@set");
                    Ok(items.iter().enumerate().map(|(i, v)| (v, index(&set_path, i))).collect())
                }
                Some(_) => Err(structure(&child(path, "@set"), "@set must be an array")),
                None => Ok(vec![(value, path.to_string())]),
            },
            _ => Err(structure(path, "expected an object or array")),
        }
    }

    fn read_input<'v>(&mut self, value: &'v Value, path: &str) -> Result<(InputSpec, Vec<(String, &'v Value, String)>), DocumentError> {
        let obj = self.as_object(value, path)?;
        self.expect_container_type(obj, path, "Data")?;
        let mut source = None;
        let mut frequency = None;
        let mut groups = Vec::new();
        for (key, v) in obj {
            let p = child(path, key);
            if key.starts_with('@') {
                if key == "@type" {
                    continue;
                }
                return Err(self.check_keyword(key, path).unwrap_err());
            }
            match self.schema_key(key).as_deref() {
                Some("source") => source = Some((v, p)),
                Some("frequency") => frequency = Some(self.read_integer(v, &p)?),
                Some(
                    local @ ("hasPlot" | "hasInformationAnalysis" | "hasStationaryAnalysis"
                    | "hasPreprocessing"),
                ) => groups.push((local.to_string(), v, p)),
                _ => self.unknown_key(key, path),
            }
        }
        let (src_value, src_path) = source.ok_or_else(|| structure(path, "missing tswf:source"))?;
        let mut input = self.read_source(src_value, &src_path)?;
        if input.frequency.is_none() {
            input.frequency = frequency;
        }
        Ok((input, groups))
    }

    fn read_integer(&self, value: &Value, path: &str) -> Result<i64, DocumentError> {
        self.literal_value(value, path)?
            .as_i64()
            .ok_or_else(|| structure(path, "expected an integer"))
    }

    fn read_source(&mut self, value: &Value, path: &str) -> Result<InputSpec, DocumentError> {
        let obj = self.as_object(value, path)?;
        let source_kind = self.require_type(obj, path)?;
        let mut src = None;
        let mut fields = Vec::new();
        let mut frequency = None;
        for (key, v) in obj {
            let p = child(path, key);
            if key.starts_with('@') {
                if key == "@type" {
                    continue;
                }
                return Err(self.check_keyword(key, path).unwrap_err());
            }
            match self.schema_key(key).as_deref() {
                Some("src") => src = Some(self.literal_string(v, &p)?),
                Some("fields") => {
                    for (item, ip) in self.set_items(v, &p)? {
                        fields.push(self.read_field(item, &ip)?);
                    }
                }
                Some("frequency") => frequency = Some(self.read_integer(v, &p)?),
                _ => self.unknown_key(key, path),
            }
        }
        Ok(InputSpec {
            source_kind,
            src: src.ok_or_else(|| structure(path, "missing tswf:src"))?,
            fields,
            frequency,
            path: path.to_string(),
        })
    }

    fn read_field(&mut self, value: &Value, path: &str) -> Result<FieldSpec, DocumentError> {
        let obj = self.as_object(value, path)?;
        let dtype = self.require_type(obj, path)?;
        let mut name = None;
        for (key, v) in obj {
            match key.as_str() {
                "@type" => {}
                "@value" => {
                    name = Some(
                        v.as_str()
                            .ok_or_else(|| structure(&child(path, key), "field name must be a string"))?
                            .to_string(),
                    )
                }
                k if k.starts_with('@') => return Err(self.check_keyword(k, path).unwrap_err()),
                k => {
                    if self.schema_key(k).as_deref() == Some("name") {
                        name = Some(self.literal_string(v, &child(path, k))?);
                    } else {
                        self.unknown_key(k, path);
                    }
                }
            }
        }
        Ok(FieldSpec {
            name: name.ok_or_else(|| structure(path, "field without a name (@value)"))?,
            dtype: FieldType::from_iri(&dtype),
        })
    }

    fn read_op_list(&mut self, value: &Value, path: &str, container: &str) -> Result<Vec<OpSpec>, DocumentError> {
        if let Value::Object(map) = value {
            if map.contains_key("@set") {
                self.expect_container_type(map, path, container)?;
                for key in map.keys() {
                    if key.starts_with('@') && key != "@set" && key != "@type" {
                        return Err(self.check_keyword(key, path).unwrap_err());
                    }
                    if !key.starts_with('@') {
                        self.unknown_key(key, path);
                    }
                }
            }
        }
        let mut ops = Vec::new();
        for (item, p) in self.set_items(value, path)? {
            ops.push(self.read_op(item, &p)?);
        }
        Ok(ops)
    }

    fn read_op(&mut self, value: &Value, path: &str) -> Result<OpSpec, DocumentError> {
        let obj = self.as_object(value, path)?;
        let term = self.require_type(obj, path)?;
        let mut op = OpSpec {
            term,
            params: BTreeMap::new(),
            slot: None,
            path: path.to_string(),
            param_paths: BTreeMap::new(),
        };
        for (key, v) in obj {
            if key.starts_with('@') {
                if key == "@type" {
                    continue;
                }
                return Err(self.check_keyword(key, path).unwrap_err());
            }
            let p = child(path, key);
            if self.schema_key(key).as_deref() == Some("parameters") {
                for (item, ip) in self.set_items(v, &p)? {
                    let (name, value) = self.read_param(item, &ip)?;
                    if op.params.contains_key(&name) {
                        return Err(structure(&ip, format!("duplicate parameter `{name}`")));
                    }
                    op.params.insert(name.clone(), value);
                    op.param_paths.insert(name, ip);
                }
            } else {
                self.unknown_key(key, path);
            }
        }
        Ok(op)
    }

    fn read_param(&mut self, value: &Value, path: &str) -> Result<(String, Value), DocumentError> {
        let obj = self.as_object(value, path)?;
        let mut name = None;
        let mut val = None;
        for (key, v) in obj {
            match key.as_str() {
                "@value" => val = Some(v.clone()),
                "@type" => {
                    self.type_of(obj, path)?;
                }
                k if k.starts_with('@') => return Err(self.check_keyword(k, path).unwrap_err()),
                k => {
                    if self.schema_key(k).as_deref() == Some("name") {
                        name = Some(self.literal_string(v, &child(path, k))?);
                    } else {
                        self.unknown_key(k, path);
                    }
                }
            }
        }
        let name = name.ok_or_else(|| structure(path, "parameter without tswf:name"))?;
        let val = val.ok_or_else(|| structure(path, format!("parameter `{name}` without @value")))?;
        Ok((name, val))
    }

    fn read_performs(&mut self, value: &Value, path: &str) -> Result<Vec<OpSpec>, DocumentError> {
        let obj = self.as_object(value, path)?;
        self.expect_container_type(obj, path, "PredictiveModel")?;
        let mut models = Vec::new();
        for (key, v) in obj {
            let p = child(path, key);
            match key.as_str() {
                "@type" => continue,
                "@set" => {
                    for (item, ip) in self.set_items(v, &p)? {
                        models.push(self.read_op(item, &ip)?);
                    }
                    continue;
                }
                k if k.starts_with('@') => return Err(self.check_keyword(k, path).unwrap_err()),
                _ => {}
            }
            let slot = self.schema_key(key).as_deref().and_then(ModelSlot::from_local);
            match slot {
                Some(slot) => {
                    for (item, ip) in self.set_items(v, &p)? {
                        let mut op = self.read_op(item, &ip)?;
                        op.slot = Some(slot);
                        models.push(op);
                    }
                }
                None => self.unknown_key(key, path),
            }
        }
        // canonical order: unslotted models first, then slot by slot
        models.sort_by_key(|m| m.slot);
        Ok(models)
    }

    fn read_outputs(&mut self, value: &Value, path: &str) -> Result<Vec<OutputSpec>, DocumentError> {
        if let Value::Object(map) = value {
            if map.contains_key("@set") {
                self.expect_container_type(map, path, "EvaluationMeasures")?;
            }
        }
        let mut outputs = Vec::new();
        for (item, p) in self.set_items(value, path)? {
            outputs.push(self.read_output(item, &p)?);
        }
        Ok(outputs)
    }

    fn read_output(&mut self, value: &Value, path: &str) -> Result<OutputSpec, DocumentError> {
        let obj = self.as_object(value, path)?;
        let kind = self.require_type(obj, path)?;
        let mut id = None;
        let mut measures = Vec::new();
        for (key, v) in obj {
            let p = child(path, key);
            match key.as_str() {
                "@type" => {}
                // the published example writes the output identifier as a plain `id`
                "@id" | "id" => {
                    id = Some(self.expand(
                        v.as_str()
                            .ok_or_else(|| structure(&p, "output id must be a string"))?,
                    ))
                }
                k if k.starts_with('@') => return Err(self.check_keyword(k, path).unwrap_err()),
                k => {
                    if self.schema_key(k).as_deref() == Some("hasMeasures") {
                        for (item, ip) in self.set_items(v, &p)? {
                            measures.push(self.read_op(item, &ip)?);
                        }
                    } else {
                        self.unknown_key(k, path);
                    }
                }
            }
        }
        Ok(OutputSpec {
            id,
            kind,
            measures,
            path: path.to_string(),
        })
    }

    fn read_service_meta(&mut self, value: &Value, path: &str) -> Result<ServiceMeta, DocumentError> {
        let obj = self.as_object(value, path)?;
        self.expect_container_type(obj, path, "ServiceMeta")?;
        let mut meta = ServiceMeta::default();
        for (key, v) in obj {
            let p = child(path, key);
            if key.starts_with('@') {
                if key == "@type" {
                    continue;
                }
                return Err(self.check_keyword(key, path).unwrap_err());
            }
            match self.schema_key(key).as_deref() {
                Some("costPerRun") => {
                    let cost = self.as_object(v, &p)?;
                    let mut amount = None;
                    let mut currency = None;
                    for (ck, cv) in cost {
                        let cp = child(&p, ck);
                        if ck.starts_with('@') {
                            if ck == "@type" {
                                continue;
                            }
                            return Err(self.check_keyword(ck, &p).unwrap_err());
                        }
                        match self.schema_key(ck).as_deref() {
                            Some("amount") => {
                                amount = Some(
                                    self.literal_value(cv, &cp)?
                                        .as_f64()
                                        .ok_or_else(|| structure(&cp, "amount must be a number"))?,
                                )
                            }
                            Some("currency") => currency = Some(self.literal_string(cv, &cp)?),
                            _ => self.unknown_key(ck, &p),
                        }
                    }
                    meta.cost_per_run = Some(Cost {
                        amount: amount.ok_or_else(|| structure(&p, "missing tswf:amount"))?,
                        currency: currency.ok_or_else(|| structure(&p, "missing tswf:currency"))?,
                    });
                }
                Some("authRequired") => {
                    meta.auth_required = Some(
                        self.literal_value(v, &p)?
                            .as_bool()
                            .ok_or_else(|| structure(&p, "authRequired must be a boolean"))?,
                    )
                }
                _ => self.unknown_key(key, path),
            }
        }
        Ok(meta)
    }
}

/// Accepts ISO-8601 date-times with either `T` or a space separator, bare
/// dates, and bare years.
pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt);
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    if let Ok(d) = NaiveDate::parse_from_str(&format!("{raw}-01"), "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    if raw.len() == 4 && raw.bytes().all(|b| b.is_ascii_digit()) {
        let year: i32 = raw.parse().ok()?;
        return NaiveDate::from_ymd_opt(year, 1, 1)?.and_hms_opt(0, 0, 0);
    }
    None
}
