use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use serde_json::{json, Value};
use tsflow_core::document::{
    parse_document, pointer_exists, serialize, validate, DocumentError, ModelSlot, OpSpec,
    Severity, WorkflowDoc,
};
use tsflow_core::vocabulary::load_vocabulary;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn lakehuron_text() -> String {
    fs::read_to_string(fixtures().join("lakehuron.jsonld")).unwrap()
}

fn curies(ops: &[OpSpec]) -> Vec<String> {
    ops.iter().map(OpSpec::curie).collect()
}

#[test]
fn lakehuron_parses_into_expected_ast() {
    let doc = parse_document(&lakehuron_text()).unwrap();
    assert_eq!(doc.id, "http://dicits.ugr.es/tswf-marketplace/#TS_eb09t74");
    assert_eq!(doc.name.as_deref(), Some("TS Analysis base with code TS_eb09t74"));
    assert_eq!(
        curies(&doc.plots),
        ["tswf:PlotSTL", "tswf:PlotACF", "tswf:PlotPACF", "tswf:PlotRegular"]
    );
    assert_eq!(doc.info_analyses.len(), 4);
    assert_eq!(doc.stationary_analyses.len(), 4);
    assert_eq!(curies(&doc.models), ["tswf:SVM", "tswf:ARIMA", "tswf:AR"]);
    assert_eq!(doc.models[0].slot, Some(ModelSlot::MLAnalysis));
    assert_eq!(doc.outputs.len(), 1);
    assert_eq!(
        doc.outputs[0].id.as_deref(),
        Some("http://dicits.ugr.es/linkeddata/tswf-schema/TSFCastAccu")
    );
    assert_eq!(curies(&doc.outputs[0].measures), ["tswf:RMSE", "tswf:MSE"]);

    let arima = &doc.models[1];
    assert_eq!(arima.params["order"], json!([0, 0, 1]));
    assert_eq!(arima.params["seasonal"], json!([0, 0, 1]));
    assert_eq!(arima.params["lambda"], json!(0));
    assert_eq!(doc.plots[2].params["lag"], json!(10));

    let input = doc.input.as_ref().unwrap();
    assert_eq!(input.src, "///dicits/examples/lakehuron.csv");
    assert_eq!(input.fields.len(), 2);
    assert_eq!(
        doc.date_created.unwrap().format("%Y-%m-%d %H:%M:%S").to_string(),
        "2020-09-01 10:30:00"
    );
    assert_eq!(doc.operation_count(), 19);
}

#[test]
fn lakehuron_validates_with_only_the_seasonal_warning() {
    let doc = parse_document(&lakehuron_text()).unwrap();
    let report = validate(&doc, load_vocabulary());
    assert!(report.valid, "{:?}", report.diagnostics);
    assert_eq!(report.error_count(), 0);
    let codes: Vec<_> = report.warnings().map(|d| d.code.as_str()).collect();
    assert!(codes.contains(&"SeasonalPeriod"), "{codes:?}");
}

#[test]
fn minimal_document_has_empty_stages() {
    let text = r#"{
        "@context": {"tswf": "http://dicits.ugr.es/linkeddata/tswf-schema/"},
        "@id": "http://example.org/wf/minimal",
        "@type": "tswf:TSAnalysis",
        "tswf:hasInput": {"@type": "tswf:Data", "tswf:source": {
            "@type": "tswf:CSVFile", "tswf:src": "series.csv",
            "tswf:fields": {"@set": [{"@value": "y", "@type": "tswf:real"}]}}}
    }"#;
    let doc = parse_document(text).unwrap();
    assert!(doc.plots.is_empty() && doc.models.is_empty() && doc.outputs.is_empty());
    assert!(validate(&doc, load_vocabulary()).valid);
    let out = serialize(&doc);
    assert!(!out.contains("tswf:hasPlot"));
    assert!(!out.contains("tswf:performs"));
}

#[test]
fn custom_prefix_expands_to_the_same_terms() {
    let text = lakehuron_text().replace("\"tswf:", "\"ts:").replace(
        "\"tswf\": \"http://dicits.ugr.es/linkeddata/tswf-schema/\"",
        "\"ts\": \"http://dicits.ugr.es/linkeddata/tswf-schema/\"",
    );
    assert!(!text.contains("tswf:"));
    let a = parse_document(&text).unwrap();
    let b = parse_document(&lakehuron_text()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn serialization_is_canonical_and_reparses() {
    let doc = parse_document(&lakehuron_text()).unwrap();
    let text = serialize(&doc);
    assert_eq!(parse_document(&text).unwrap(), doc);
    assert_eq!(serialize(&parse_document(&text).unwrap()), text);
    let v: Value = serde_json::from_str(&text).unwrap();
    let params = v.pointer("/tswf:performs/tswf:hasTSAnalysis/tswf:parameters/@set").unwrap();
    assert!(params.as_array().unwrap().contains(&json!({"tswf:name": "lambda", "@value": 0})));
    assert_eq!(v["tswf:dateCreated"], json!("2020-09-01T10:30:00"));
    // sorted keys
    let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn defaults_are_not_written() {
    let doc = parse_document(&lakehuron_text()).unwrap();
    let text = serialize(&doc);
    // AR carries no explicit order and SVM no explicit embedding
    assert!(!text.contains("\"embedding\""));
    assert_eq!(text.matches("\"order\"").count(), 1);
}

#[test]
fn unknown_term_gives_one_error() {
    let text = fs::read_to_string(fixtures().join("invalid/unknown_model.jsonld")).unwrap();
    let report = validate(&parse_document(&text).unwrap(), load_vocabulary());
    let errors: Vec<_> = report.errors().collect();
    assert_eq!(errors.len(), 1, "{errors:?}");
    assert_eq!(errors[0].code, "UnknownTerm");
    assert_eq!(errors[0].path, "/tswf:performs/tswf:hasMLAnalysis/@type");
}

#[test]
fn short_arima_order_gives_param_shape() {
    let text = fs::read_to_string(fixtures().join("invalid/arima_order_length.jsonld")).unwrap();
    let report = validate(&parse_document(&text).unwrap(), load_vocabulary());
    let errors: Vec<_> = report.errors().collect();
    assert_eq!(errors.len(), 1, "{errors:?}");
    assert_eq!(errors[0].code, "ParamShape");
}

#[test]
fn invalid_fixtures_yield_located_diagnostics() {
    let mut seen = 0;
    for entry in fs::read_dir(fixtures().join("invalid")).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let report = match parse_document(&text) {
            Ok(doc) => validate(&doc, load_vocabulary()),
            Err(e) => e.to_report(),
        };
        let errors: Vec<_> = report.errors().collect();
        assert!(!errors.is_empty(), "{} produced no error", path.display());
        if let Ok(source) = serde_json::from_str::<Value>(&text) {
            for d in &report.diagnostics {
                assert!(pointer_exists(&source, &d.path), "{}: {}", path.display(), d.path);
            }
        }
        seen += 1;
    }
    assert!(seen >= 15);
}

#[test]
fn syntax_errors_carry_a_position() {
    let text = fs::read_to_string(fixtures().join("invalid/malformed.jsonld")).unwrap();
    match parse_document(&text) {
        Err(DocumentError::Syntax { line, column, .. }) => {
            assert_eq!(line, 71);
            assert!(column > 0);
        }
        other => panic!("expected syntax error, got {other:?}"),
    }
}

#[test]
fn structure_errors() {
    let cases = [
        ("missing_id.jsonld", ""),
        ("remote_context.jsonld", "/@context"),
        ("wrong_root_type.jsonld", "/@type"),
        ("graph_keyword.jsonld", "/tswf:hasInput/tswf:hasPlot/@set/1/@graph"),
    ];
    for (file, expected) in cases {
        let text = fs::read_to_string(fixtures().join("invalid").join(file)).unwrap();
        match parse_document(&text) {
            Err(DocumentError::Structure { path, .. }) => assert_eq!(path, expected, "{file}"),
            other => panic!("{file}: expected structure error, got {other:?}"),
        }
    }
    assert!(matches!(parse_document("[1, 2]"), Err(DocumentError::Structure { .. })));
}

#[test]
fn unknown_keys_are_warnings() {
    let text = lakehuron_text().replacen(
        "\"tswf:version\"",
        "\"comment\": \"hand written\", \"tswf:version\"",
        1,
    );
    let doc = parse_document(&text).unwrap();
    let report = validate(&doc, load_vocabulary());
    assert!(report.valid);
    let w = report.warnings().find(|d| d.code == "UnknownKey").unwrap();
    assert_eq!(w.path, "/comment");
    assert_eq!(w.severity, Severity::Warning);
}

#[test]
fn non_executable_models_validate_with_a_warning() {
    let text = lakehuron_text().replace("\"tswf:SVM\"", "\"tswf:RandomForest\"");
    let report = validate(&parse_document(&text).unwrap(), load_vocabulary());
    assert!(report.valid);
    assert!(report.warnings().any(|d| d.code == "NotExecutable"));
}

#[test]
fn service_meta_is_read_and_written() {
    let text = lakehuron_text().replacen(
        "\"tswf:version\"",
        "\"tswf:hasServiceMeta\": {\"@type\": \"tswf:ServiceMeta\", \"tswf:costPerRun\": {\"tswf:amount\": 0.25, \"tswf:currency\": \"EUR\"}, \"tswf:authRequired\": true}, \"tswf:version\"",
        1,
    );
    let doc = parse_document(&text).unwrap();
    let meta = doc.service_meta.as_ref().unwrap();
    assert_eq!(meta.cost_per_run.as_ref().unwrap().amount, 0.25);
    assert_eq!(meta.auth_required, Some(true));
    assert!(validate(&doc, load_vocabulary()).valid);
    assert_eq!(parse_document(&serialize(&doc)).unwrap(), doc);
}

#[test]
fn top_level_groups_are_accepted() {
    let mut v: Value = serde_json::from_str(&lakehuron_text()).unwrap();
    let plots = v["tswf:hasInput"].as_object_mut().unwrap().remove("tswf:hasPlot").unwrap();
    v["tswf:hasPlot"] = plots;
    let doc = parse_document(&v.to_string()).unwrap();
    assert_eq!(doc, parse_document(&lakehuron_text()).unwrap());
}

fn op_strategy(pool: &'static [&'static str]) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(pool), 0..5)
        .prop_map(|v| v.into_iter().map(str::to_string).collect())
}

prop_compose! {
    fn generated_doc()(
        n in 0u32..10_000,
        plots in op_strategy(&["PlotSTL", "PlotACF", "PlotPACF", "PlotRegular"]),
        info in op_strategy(&["LagStudy", "TrendSTL", "ACF", "PACF"]),
        stat in op_strategy(&["StatisticalTest", "DickeyFuller", "JarqueBera", "JungBox", "RunsTest"]),
        lag in 1i64..40,
        p in 0i64..3, d in 0i64..2, q in 0i64..3,
        with_models in any::<bool>(),
        freq in prop::option::of(2i64..13),
        measures in prop::collection::vec(prop::sample::select(&["RMSE", "MSE", "MAE", "MASE", "sMAPE"][..]), 1..4),
    ) -> Value {
        let op = |t: &String| {
            if t.contains("ACF") { json!({"@type": format!("tswf:{t}"), "tswf:parameters": {"@set": [{"tswf:name": "lag", "@value": lag}]}}) }
            else { json!({"@type": format!("tswf:{t}")}) }
        };
        let mut input = json!({
            "@type": "tswf:Data",
            "tswf:source": {"@type": "tswf:CSVFile", "tswf:src": format!("data/s{n}.csv"),
                "tswf:fields": {"@set": [{"@value": "t", "@type": "tswf:datetime"}, {"@value": "y", "@type": "tswf:real"}]}},
        });
        if let Some(f) = freq { input["tswf:frequency"] = json!(f); }
        if !plots.is_empty() { input["tswf:hasPlot"] = json!({"@type": "tswf:TSPlot", "@set": plots.iter().map(op).collect::<Vec<_>>()}); }
        if !info.is_empty() { input["tswf:hasInformationAnalysis"] = json!({"@type": "tswf:InformationAnalysis", "@set": info.iter().map(op).collect::<Vec<_>>()}); }
        if !stat.is_empty() { input["tswf:hasStationaryAnalysis"] = json!({"@type": "tswf:StatitionaryAnalysis", "@set": stat.iter().map(op).collect::<Vec<_>>()}); }
        let mut doc = json!({
            "@context": {"tswf": "http://dicits.ugr.es/linkeddata/tswf-schema/"},
            "@id": format!("http://example.org/wf/{n}"),
            "@type": "tswf:TSAnalysis",
            "tswf:name": format!("generated {n}"),
            "tswf:dateCreated": format!("2021-0{}-1{} 0{}:15:00", 1 + n % 9, n % 10, n % 10),
            "tswf:hasInput": input,
        });
        if with_models {
            doc["tswf:performs"] = json!({
                "@type": "tswf:PredictiveModel",
                "tswf:hasTSAnalysis": {"@type": "tswf:ARIMA", "tswf:parameters": {"@set": [{"tswf:name": "order", "@value": [p, d, q]}]}},
                "tswf:hasTSRegression": {"@type": "tswf:AR"},
            });
            let ms: Vec<Value> = measures.iter().map(|m| json!({"@type": format!("tswf:{m}")})).collect();
            doc["tswf:hasOutput"] = json!({"@type": "tswf:EvaluationMeasures", "@set": [{"@type": "tswf:ForecastAccuracy", "tswf:hasMeasures": ms}]});
        }
        doc
    }
}

fn roundtrip(doc: &WorkflowDoc) -> WorkflowDoc {
    parse_document(&serialize(doc)).unwrap()
}

proptest! {
    #[test]
    fn generated_documents_round_trip(v in generated_doc()) {
        let doc = parse_document(&v.to_string()).unwrap();
        let report = validate(&doc, load_vocabulary());
        prop_assert!(report.valid, "{:?}", report.diagnostics);
        prop_assert_eq!(roundtrip(&doc), doc.clone());
        let text = serialize(&doc);
        prop_assert_eq!(serialize(&roundtrip(&doc)), text);
    }

    #[test]
    fn diagnostics_point_into_the_source(mut v in generated_doc(), bad_lag in -5i64..0) {
        if let Some(plots) = v.pointer_mut("/tswf:hasInput/tswf:hasPlot/@set") {
            for plot in plots.as_array_mut().unwrap() {
                plot["x-note"] = json!("unknown key");
                if let Some(params) = plot.pointer_mut("/tswf:parameters/@set/0") {
                    params["@value"] = json!(bad_lag);
                }
            }
        }
        v["tswf:performs"] = json!({"@type": "tswf:PredictiveModel", "tswf:hasTSAnalysis": {"@type": "tswf:Bogus"}});
        let doc = parse_document(&v.to_string()).unwrap();
        let report = validate(&doc, load_vocabulary());
        prop_assert!(!report.valid);
        for d in &report.diagnostics {
            prop_assert!(pointer_exists(&v, &d.path), "{}", d.path);
        }
    }
}

#[test]
fn resolved_defaults_are_idempotent() {
    let doc = parse_document(&lakehuron_text()).unwrap();
    let reg = load_vocabulary();
    for op in doc.all_ops() {
        let term = reg.lookup(&op.term).unwrap();
        let values = |op: &OpSpec| -> Vec<_> {
            op.resolve_params(term, 98, None).into_iter().map(|(k, p)| (k, p.value)).collect()
        };
        let filled = op.with_defaults(reg);
        assert_eq!(values(&filled), values(op), "{}", op.curie());
        assert_eq!(values(&filled.with_defaults(reg)), values(op));
        assert!(validate(&doc, reg).valid);
    }
}

#[test]
fn declared_params_mark_defaults() {
    let doc = parse_document(&lakehuron_text()).unwrap();
    let reg = load_vocabulary();
    let ar = &doc.models[2];
    let declared = ar.declared_params(reg.lookup(&ar.term).unwrap());
    assert!(declared.is_empty());
    let svm = &doc.models[0];
    let declared = serde_json::to_value(svm.declared_params(reg.lookup(&svm.term).unwrap())).unwrap();
    assert_eq!(declared["embedding"], json!({"value": 5, "is_default": true}));
}
