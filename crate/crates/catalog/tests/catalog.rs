use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};
use tsflow_catalog::{CatalogError, CompetencyQuery, QueryArgs, Store};

const LAKE_HURON: &str = "http://dicits.ugr.es/tswf-marketplace/#TS_eb09t74";

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn lakehuron_text() -> String {
    fs::read_to_string(fixtures().join("lakehuron.jsonld")).unwrap()
}

/// Lake Huron with a different id, so many distinct documents can be made.
fn variant(k: usize) -> String {
    lakehuron_text().replace("#TS_eb09t74", &format!("#TS_variant{k:03}"))
}

fn with_meta(text: &str) -> String {
    text.replacen(
        "\"tswf:version\"",
        "\"tswf:hasServiceMeta\": {\"@type\": \"tswf:ServiceMeta\", \"tswf:costPerRun\": {\"tswf:amount\": 0.25, \"tswf:currency\": \"EUR\"}, \"tswf:authRequired\": true}, \"tswf:version\"",
        1,
    )
}

fn ask(store: &Store, q: CompetencyQuery) -> Value {
    store.answer(&q).unwrap()
}

fn id_args(id: &str) -> QueryArgs {
    QueryArgs { id: Some(id.into()), ..QueryArgs::default() }
}

#[test]
fn import_stores_under_document_iri() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let imported = store.import_document(&lakehuron_text(), false).unwrap();
    assert_eq!(imported.id, LAKE_HURON);
    assert!(imported.created);
    assert_eq!(imported.report.error_count(), 0);
    assert_eq!(store.require(LAKE_HURON).unwrap().raw, lakehuron_text());
}

#[test]
fn invalid_documents_are_not_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    for entry in fs::read_dir(fixtures().join("invalid")).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        match store.import_document(&text, false) {
            Err(CatalogError::Invalid(report)) => assert!(report.error_count() >= 1),
            other => panic!("expected a rejection, got {other:?}"),
        }
    }
    assert!(store.is_empty());
    assert_eq!(fs::read_dir(dir.path().join("entries")).unwrap().count(), 0);
    drop(store);
    assert!(Store::open(dir.path()).unwrap().is_empty());
}

#[test]
fn reimport_is_idempotent_and_conflicts_need_force() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let first = store.import_document(&lakehuron_text(), false).unwrap();
    let again = store.import_document(&lakehuron_text(), false).unwrap();
    assert!(first.created && !again.created);
    assert_eq!(store.len(), 1);
    let before = store.require(LAKE_HURON).unwrap().meta.imported_at;
    assert_eq!(store.require(LAKE_HURON).unwrap().meta.imported_at, before);

    let changed = with_meta(&lakehuron_text());
    assert!(matches!(
        store.import_document(&changed, false),
        Err(CatalogError::Conflict(id)) if id == LAKE_HURON
    ));
    assert_eq!(store.require(LAKE_HURON).unwrap().raw, lakehuron_text());
    let forced = store.import_document(&changed, true).unwrap();
    assert!(forced.created);
    assert_eq!(store.require(LAKE_HURON).unwrap().raw, changed);
    assert_eq!(store.len(), 1);
}

#[test]
fn raw_text_survives_reopen_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    // whitespace and key order that the canonical writer would change
    let text = format!("\n\n  {}  \n", lakehuron_text().replace("  ", "\t"));
    {
        let store = Store::open(dir.path()).unwrap();
        store.import_document(&text, false).unwrap();
        store.import_document(&variant(1), false).unwrap();
    }
    // debris from an interrupted write
    fs::create_dir_all(dir.path().join("tmp/leftover")).unwrap();
    fs::write(dir.path().join("tmp/leftover/raw.jsonld"), "{").unwrap();

    let store = Store::open(dir.path()).unwrap();
    assert_eq!(store.len(), 2);
    assert_eq!(store.require(LAKE_HURON).unwrap().raw.as_bytes(), text.as_bytes());
    assert_eq!(fs::read_dir(dir.path().join("tmp")).unwrap().count(), 0);
}

#[test]
fn listing_is_ordered_by_import_time_then_id() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    for k in [5, 3, 9, 1] {
        store.import_document(&variant(k), false).unwrap();
    }
    let ids: Vec<String> = store.list().into_iter().map(|e| e.id).collect();
    assert_eq!(ids.len(), 4);
    assert!(ids[0].ends_with("variant005") && ids[3].ends_with("variant001"));
    let list = store.list();
    for w in list.windows(2) {
        assert!((w[0].imported_at, &w[0].id) <= (w[1].imported_at, &w[1].id));
    }
    drop(store);
    let reopened = Store::open(dir.path()).unwrap();
    assert_eq!(reopened.list(), list);
}

#[test]
fn concurrent_imports_from_eight_clients() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let handles: Vec<_> = (0..8)
        .map(|client| {
            let store = store.clone();
            thread::spawn(move || {
                for k in (client..50).step_by(8) {
                    store.import_document(&variant(k), false).unwrap();
                    // readers must never see a half-built entry
                    for e in store.entries() {
                        assert_eq!(e.doc.id, e.meta.id);
                    }
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(store.len(), 50);
    drop(store);
    let store = Store::open(dir.path()).unwrap();
    assert_eq!(store.len(), 50);
    for k in 0..50 {
        let id = format!("http://dicits.ugr.es/tswf-marketplace/#TS_variant{k:03}");
        assert_eq!(store.require(&id).unwrap().raw, variant(k));
    }
}

#[test]
fn same_document_from_many_clients_is_stored_once() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let created: usize = (0..8)
        .map(|_| {
            let store = store.clone();
            thread::spawn(move || store.import_document(&lakehuron_text(), false).unwrap().created)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap() as usize)
        .sum();
    assert_eq!(created, 1);
    assert_eq!(fs::read_dir(dir.path().join("entries")).unwrap().count(), 1);
}

#[test]
fn competency_questions_over_the_example() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    store.import_document(&lakehuron_text(), false).unwrap();
    let id = LAKE_HURON.to_string();

    assert_eq!(ask(&store, CompetencyQuery::OperationsCount { id: id.clone() })["operations"], 19);
    assert_eq!(ask(&store, CompetencyQuery::ServicesWithTsFunctions)["services"], json!([id]));

    let provides = |term: &str| {
        ask(&store, CompetencyQuery::ProvidesAlgorithm { id: id.clone(), term: term.into() })["provided"]
            .clone()
    };
    assert_eq!(provides("tswf:NeuralNetwork"), json!(false));
    assert_eq!(provides("tswf:SVM"), json!(true));
    assert_eq!(provides("tswf:ETS"), json!(false));

    let input = ask(&store, CompetencyQuery::InputOf { id: id.clone() });
    assert_eq!(input["input"]["source"], "tswf:CSVFile");
    assert_eq!(input["input"]["fields"][1], json!({"name": "Level", "type": "tswf:integer"}));

    let outputs = ask(&store, CompetencyQuery::OutputsOf { id: id.clone() });
    assert_eq!(outputs["outputs"][0]["kind"], "tswf:ForecastAccuracy");
    assert_eq!(outputs["outputs"][0]["measures"], json!(["tswf:RMSE", "tswf:MSE"]));

    assert_eq!(ask(&store, CompetencyQuery::CostOf { id: id.clone() })["cost_per_run"], "unspecified");
    assert_eq!(ask(&store, CompetencyQuery::AuthOf { id: id.clone() })["auth_required"], "unspecified");

    let params = ask(&store, CompetencyQuery::ParametersOf { id: id.clone(), term: "tswf:ARIMA".into() });
    let p = &params["parameters"];
    assert_eq!(p["order"], json!({"value": [0, 0, 1], "is_default": false}));
    assert_eq!(p["seasonal"], json!({"value": [0, 0, 1], "is_default": false}));
    assert_eq!(p["lambda"]["value"].as_f64(), Some(0.0));
    assert_eq!(p["lambda"]["is_default"], false);

    assert!(matches!(
        store.answer(&CompetencyQuery::ParametersOf { id: id.clone(), term: "tswf:ETS".into() }),
        Err(CatalogError::NotFound(_))
    ));
    assert!(matches!(
        store.answer(&CompetencyQuery::OperationsCount { id: "urn:none".into() }),
        Err(CatalogError::NotFound(_))
    ));
}

#[test]
fn service_meta_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    store.import_document(&with_meta(&lakehuron_text()), false).unwrap();
    let id = LAKE_HURON.to_string();
    assert_eq!(
        ask(&store, CompetencyQuery::CostOf { id: id.clone() })["cost_per_run"],
        json!({"amount": 0.25, "currency": "EUR"})
    );
    assert_eq!(ask(&store, CompetencyQuery::AuthOf { id })["auth_required"], json!(true));
}

#[test]
fn runs_are_recorded_and_queryable() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    store.import_document(&lakehuron_text(), false).unwrap();
    let first = store.run_workflow(LAKE_HURON, 10, &fixtures()).unwrap();
    let second = store.run_workflow(LAKE_HURON, 10, &fixtures()).unwrap();
    assert_ne!(first.run_id, second.run_id);
    assert_eq!(store.require(LAKE_HURON).unwrap().meta.runs, vec![first.run_id.clone(), second.run_id.clone()]);

    let stored: Value = serde_json::from_str(&store.run_bundle(&first.run_id).unwrap()).unwrap();
    assert_eq!(stored["run_id"], first.run_id.as_str());
    let run_dir = store.run_dir(&first.run_id).unwrap();
    assert!(run_dir.join("plots").is_dir());

    let ops = ask(&store, CompetencyQuery::OperationsCount { id: LAKE_HURON.into() })["operations"].clone();
    assert_eq!(first.status, tsflow_core::engine::RunStatus::Succeeded);
    assert_eq!(ops, json!(first.steps.len()));

    // forecast prefix against the stored points
    let all = ask(&store, CompetencyQuery::ForecastOf { run_id: first.run_id.clone(), horizon: None });
    let three = ask(&store, CompetencyQuery::ForecastOf { run_id: first.run_id.clone(), horizon: Some(3) });
    let forecasts = all["forecasts"].as_array().unwrap();
    assert_eq!(forecasts.len(), 3);
    for (full, short) in forecasts.iter().zip(three["forecasts"].as_array().unwrap()) {
        let full = full["point"].as_array().unwrap();
        assert_eq!(full.len(), 10);
        assert_eq!(short["point"].as_array().unwrap()[..], full[..3]);
    }
    assert!(matches!(
        store.answer(&CompetencyQuery::ForecastOf { run_id: first.run_id.clone(), horizon: Some(11) }),
        Err(CatalogError::BadRequest(_))
    ));

    // lowest RMSE, read independently from the stored steps
    let mut rmse: Vec<(String, f64)> = Vec::new();
    for step in stored["steps"].as_array().unwrap() {
        if step["outcome"]["kind"] == "measures" {
            for m in step["outcome"]["result"].as_array().unwrap() {
                if m["measure"] == "tswf:RMSE" {
                    rmse.push((m["model"].as_str().unwrap().into(), m["value"].as_f64().unwrap()));
                }
            }
        }
    }
    assert_eq!(rmse.len(), 3);
    let oracle = rmse.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let best = ask(&store, CompetencyQuery::BestModelOf { run_id: first.run_id.clone(), metric: "tswf:RMSE".into() });
    assert_eq!(best["model"], oracle.0.as_str());
    assert_eq!(best["value"].as_f64(), Some(oracle.1));

    drop(store);
    let store = Store::open(dir.path()).unwrap();
    assert_eq!(store.require(LAKE_HURON).unwrap().meta.runs.len(), 2);
    assert_eq!(store.run_owner(&second.run_id).as_deref(), Some(LAKE_HURON));
}

#[test]
fn missing_csv_records_no_run() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    store.import_document(&lakehuron_text(), false).unwrap();
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(
        store.run_workflow(LAKE_HURON, 10, empty.path()),
        Err(CatalogError::Input(_))
    ));
    assert!(store.require(LAKE_HURON).unwrap().meta.runs.is_empty());
    assert_eq!(fs::read_dir(dir.path().join("tmp")).unwrap().count(), 0);
    assert!(matches!(
        store.run_workflow("urn:none", 10, &fixtures()),
        Err(CatalogError::NotFound(_))
    ));
}

#[test]
fn query_numbers_parse() {
    let q = CompetencyQuery::from_args("cq01", &id_args("x")).unwrap();
    assert_eq!(q, CompetencyQuery::OperationsCount { id: "x".into() });
    assert_eq!(CompetencyQuery::from_args("02", &QueryArgs::default()).unwrap(), CompetencyQuery::ServicesWithTsFunctions);
    assert!(matches!(CompetencyQuery::from_args("11", &id_args("x")), Err(CatalogError::BadRequest(_))));
    assert!(matches!(CompetencyQuery::from_args("03", &id_args("x")), Err(CatalogError::BadRequest(_))));
    let q = CompetencyQuery::from_args("10", &QueryArgs { run_id: Some("r".into()), ..QueryArgs::default() }).unwrap();
    assert_eq!(q, CompetencyQuery::BestModelOf { run_id: "r".into(), metric: "tswf:RMSE".into() });
}
