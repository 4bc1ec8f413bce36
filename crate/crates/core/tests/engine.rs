use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use tsflow_core::analysis::{acf, pacf};
use tsflow_core::document::{parse_document, OpSpec, Stage, WorkflowDoc};
use tsflow_core::engine::*;
use tsflow_core::metrics::MeasureValue;
use tsflow_core::series::TimeSeries;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn lakehuron_doc() -> WorkflowDoc {
    parse_document(&fs::read_to_string(fixtures().join("lakehuron.jsonld")).unwrap()).unwrap()
}

fn lakehuron_values() -> Vec<f64> {
    let mut r = csv::Reader::from_path(fixtures().join("lakehuron.csv")).unwrap();
    r.records().map(|rec| rec.unwrap()[1].parse().unwrap()).collect()
}

fn run(doc: &WorkflowDoc, out: &Path) -> RunBundle {
    execute(doc, &fixtures(), out, EngineOptions::default()).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn count(bundle: &RunBundle, stage: Stage) -> usize {
    bundle.stage(stage).count()
}

#[test]
fn lakehuron_run_has_expected_shape() {
    let out = tempfile::tempdir().unwrap();
    let bundle = run(&lakehuron_doc(), out.path());
    assert_eq!(bundle.status, RunStatus::Succeeded, "{:#?}", bundle.steps.iter().filter(|s| s.outcome.is_error()).collect::<Vec<_>>());
    assert_eq!(bundle.steps.len(), 19);
    assert_eq!(count(&bundle, Stage::Plots), 4);
    assert_eq!(count(&bundle, Stage::InformationAnalysis), 4);
    assert_eq!(count(&bundle, Stage::StationaryAnalysis), 4);
    let fits = bundle.steps.iter().filter(|s| matches!(s.outcome, StepOutcome::ModelFit(_))).count();
    let forecasts = bundle.steps.iter().filter(|s| matches!(s.outcome, StepOutcome::Forecast(_))).count();
    assert_eq!((fits, forecasts), (3, 3));
    let measures: Vec<&MeasureValue> = bundle.measure_values().collect();
    assert_eq!(measures.len(), 6);
    for model in ["tswf:SVM", "tswf:ARIMA", "tswf:AR"] {
        let mine: Vec<_> = measures.iter().filter(|m| m.model.as_deref() == Some(model)).collect();
        assert_eq!(mine.len(), 2, "{model}");
        let rmse = mine.iter().find(|m| m.measure == "tswf:RMSE").unwrap().value;
        let mse = mine.iter().find(|m| m.measure == "tswf:MSE").unwrap().value;
        assert!((rmse * rmse - mse).abs() < 1e-9);
    }
    assert!(bundle.warnings.iter().any(|w| w.contains("abstract test term")));
    assert!(bundle.warnings.iter().any(|w| w.contains("SeasonalPeriod")));

    let dir = bundle.run_dir(out.path());
    assert!(dir.join("bundle.json").is_file());
    for step in bundle.stage(Stage::Plots) {
        let StepOutcome::Plot(p) = &step.outcome else { panic!() };
        assert!(dir.join(&p.svg_path).is_file());
        assert!(dir.join(&p.data_path).is_file());
    }
}

#[test]
fn holdout_never_overlaps_training() {
    let out = tempfile::tempdir().unwrap();
    let bundle = run(&lakehuron_doc(), out.path());
    let h = bundle.holdout.unwrap();
    // 98 observations: max(10, ceil(0.2 * 98)) = 20 withheld
    assert_eq!((h.train_len, h.test_len), (78, 20));
    for step in &bundle.steps {
        match &step.outcome {
            StepOutcome::ModelFit(f) if f.model != "tswf:SVM" => assert_eq!(f.fitted.len(), h.train_len),
            StepOutcome::ModelFit(f) => assert_eq!(f.fitted.len(), h.train_len - 5),
            StepOutcome::Forecast(f) => {
                assert_eq!(f.origin, h.train_len - 1);
                assert_eq!(f.point.len(), 10);
            }
            StepOutcome::Measures(ms) => assert!(ms.iter().all(|m| m.n == h.test_len)),
            _ => {}
        }
    }
}

#[test]
fn measures_match_an_independent_recomputation() {
    let out = tempfile::tempdir().unwrap();
    let mut opts = EngineOptions::default();
    opts.horizon = 20;
    let bundle = execute(&lakehuron_doc(), &fixtures(), out.path(), opts).unwrap();
    let x = lakehuron_values();
    let actual = &x[78..];
    for step in &bundle.steps {
        let StepOutcome::Forecast(f) = &step.outcome else { continue };
        let e2: Vec<f64> = actual.iter().zip(&f.point).map(|(a, p)| (a - p) * (a - p)).collect();
        let mse = e2.iter().sum::<f64>() / e2.len() as f64;
        let reported = bundle
            .measure_values()
            .find(|m| m.model.as_deref() == Some(step.op.as_str()) && m.measure == "tswf:MSE")
            .unwrap();
        assert!((reported.value - mse).abs() < 1e-9 * mse.max(1.0), "{}", step.op);
    }
}

#[test]
fn plot_sidecars_carry_the_analysis_values() {
    let out = tempfile::tempdir().unwrap();
    let bundle = run(&lakehuron_doc(), out.path());
    let dir = bundle.run_dir(out.path());
    let x = lakehuron_values();
    let sidecar = |name: &str| read_json(&dir.join(format!("plots/{name}.json")));

    let acf_values: Vec<f64> = serde_json::from_value(sidecar("tswf_PlotACF")["values"].clone()).unwrap();
    let want = acf(&x, 19).unwrap().rho;
    assert_eq!(acf_values.len(), want.len());
    for (a, b) in acf_values.iter().zip(&want) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    let pacf_values: Vec<f64> = serde_json::from_value(sidecar("tswf_PlotPACF")["values"].clone()).unwrap();
    assert_eq!(pacf_values.len(), 10);
    let want = pacf(&x, 10).unwrap().phi_kk;
    for (a, b) in pacf_values.iter().zip(&want) {
        assert!((a - b).abs() < 1e-9);
    }
    let svg = fs::read_to_string(dir.join("plots/tswf_PlotPACF.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="stem""#).count(), 10);

    let regular: Vec<f64> = serde_json::from_value(sidecar("tswf_PlotRegular")["values"].clone()).unwrap();
    assert_eq!(regular, x);
    let svg = fs::read_to_string(dir.join("plots/tswf_PlotRegular.svg")).unwrap();
    let points = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    assert_eq!(points.split(' ').count(), x.len());

    let stl = sidecar("tswf_PlotSTL");
    assert_eq!(stl["period"], 1);
}

#[test]
fn two_runs_are_identical_after_stripping_volatile_fields() {
    let out = tempfile::tempdir().unwrap();
    let doc = lakehuron_doc();
    let a = run(&doc, out.path());
    let b = run(&doc, out.path());
    assert_ne!(a.run_id, b.run_id);
    let mut ja = read_json(&a.run_dir(out.path()).join("bundle.json"));
    let mut jb = read_json(&b.run_dir(out.path()).join("bundle.json"));
    strip_volatile(&mut ja);
    strip_volatile(&mut jb);
    assert_eq!(serde_json::to_string(&ja).unwrap(), serde_json::to_string(&jb).unwrap());
}

#[test]
fn unsupported_model_is_isolated() {
    let mut doc = lakehuron_doc();
    doc.models[0] = OpSpec::new("tswf:RandomForest");
    let out = tempfile::tempdir().unwrap();
    let bundle = run(&doc, out.path());
    assert_eq!(bundle.status, RunStatus::Partial);
    let errors: Vec<&StepResult> = bundle.steps.iter().filter(|s| s.outcome.is_error()).collect();
    assert_eq!(errors.len(), 2);
    let StepOutcome::Error { code, message } = &errors[0].outcome else { unreachable!() };
    assert_eq!(code, "UnsupportedOperation");
    assert!(message.contains("tswf:SVM"));
    // the other two models are still scored
    assert_eq!(bundle.measure_values().count(), 4);
}

#[test]
fn analysis_only_document_succeeds() {
    let mut doc = lakehuron_doc();
    doc.models.clear();
    doc.outputs.clear();
    let out = tempfile::tempdir().unwrap();
    let bundle = run(&doc, out.path());
    assert_eq!(bundle.status, RunStatus::Succeeded);
    assert_eq!(bundle.steps.len(), 12);
    assert!(bundle.holdout.is_none());
}

#[test]
fn preprocessing_feeds_later_stages() {
    let mut doc = lakehuron_doc();
    doc.preprocessing = vec![
        OpSpec::new("tswf:OutlierDetection"),
        OpSpec::new("tswf:BoxCox").with_param("lambda", serde_json::json!(-20)),
        OpSpec::new("tswf:Differencing"),
        OpSpec::new("tswf:Periodogram"),
    ];
    let out = tempfile::tempdir().unwrap();
    // lambda -20 is out of bounds, so the document must be rejected
    assert!(matches!(
        execute(&doc, &fixtures(), out.path(), EngineOptions::default()),
        Err(EngineError::InvalidDocument(_))
    ));
    doc.preprocessing[1] = OpSpec::new("tswf:BoxCox");
    let bundle = run(&doc, out.path());
    assert_eq!(bundle.steps.len(), 23);
    let pre: Vec<&StepResult> = bundle.stage(Stage::Preprocessing).collect();
    assert!(matches!(pre[0].outcome, StepOutcome::Outliers(_)));
    let StepOutcome::Series(diffed) = &pre[2].outcome else { panic!("{:?}", pre[2].outcome) };
    assert_eq!(diffed.len(), 97);
    let x = lakehuron_values();
    assert!((diffed.values[0] - (x[1].ln() - x[0].ln())).abs() < 1e-12);
    assert_eq!(pre[1].params_resolved["lambda"], 0.0);
    let StepOutcome::Plot(p) = &bundle.stage(Stage::Plots).last().unwrap().outcome else { panic!() };
    let regular = read_json(&bundle.run_dir(out.path()).join(&p.data_path));
    assert_eq!(regular["values"].as_array().unwrap().len(), 97);
}

#[test]
fn missing_input_file_fails_the_run() {
    let mut doc = lakehuron_doc();
    doc.input.as_mut().unwrap().src = "nowhere/missing.csv".into();
    let out = tempfile::tempdir().unwrap();
    assert!(matches!(
        execute(&doc, &fixtures(), out.path(), EngineOptions::default()),
        Err(EngineError::Input(_))
    ));
}

#[test]
fn similarity_and_classification_outputs() {
    let text = fs::read_to_string(fixtures().join("lakehuron.jsonld"))
        .unwrap()
        .replace(
            r#"{"@type": "tswf:RMSE"},"#,
            r#"{"@type": "tswf:RMSE"}]}, {"@type": "tswf:SimilarityMeasurement", "tswf:hasMeasures": [{"@type": "tswf:DTW"}, {"@type": "tswf:Euclidean"}]}, {"@type": "tswf:ClassificationPerformance", "tswf:hasMeasures": [{"@type": "tswf:F1Score"},{"@type": "tswf:ConfusionMatrix"},"#,
        );
    let doc = parse_document(&text).unwrap();
    assert_eq!(doc.outputs.len(), 3);
    let out = tempfile::tempdir().unwrap();
    let bundle = run(&doc, out.path());
    assert_eq!(bundle.status, RunStatus::Succeeded);
    let values: Vec<&MeasureValue> = bundle.measure_values().collect();
    let get = |model: &str, measure: &str| {
        *values
            .iter()
            .find(|m| m.model.as_deref() == Some(model) && m.measure == measure)
            .unwrap()
    };
    for model in ["tswf:AR", "tswf:ARIMA", "tswf:SVM"] {
        let dtw = get(model, "tswf:DTW").value;
        let euc = get(model, "tswf:Euclidean").value;
        assert!(dtw >= 0.0 && euc >= 0.0);
        let cm = get(model, "tswf:ConfusionMatrix").confusion.unwrap();
        assert_eq!(cm.tp + cm.fp + cm.tn + cm.fn_, 20);
        assert!((0.0..=1.0).contains(&get(model, "tswf:F1Score").value));
    }
}

#[test]
fn best_model_picks_the_minimum() {
    let out = tempfile::tempdir().unwrap();
    let mut bundle = run(&lakehuron_doc(), out.path());
    let best = best_model(&bundle, "tswf:RMSE").unwrap();
    let min = bundle
        .measure_values()
        .filter(|m| m.measure == "tswf:RMSE")
        .map(|m| m.value)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(best.value, min);
    assert!(matches!(best_model(&bundle, "tswf:MAE"), Err(EngineError::NoSuchMetric(_))));

    // hand-built bundle: AR 1.2, ARIMA 0.9, SVM 1.5
    let make = |model: &str, value| MeasureValue {
        measure: "tswf:RMSE".into(),
        model: Some(model.into()),
        value,
        n: 5,
        confusion: None,
    };
    let last = bundle.steps.last_mut().unwrap();
    last.outcome = StepOutcome::Measures(vec![make("tswf:AR", 1.2), make("tswf:ARIMA", 0.9), make("tswf:SVM", 1.5)]);
    assert_eq!(best_model(&bundle, "tswf:RMSE").unwrap().model, "tswf:ARIMA");
    last_mut_single(&mut bundle);
    assert_eq!(best_model(&bundle, "tswf:RMSE").unwrap().model, "tswf:SVM");
}

fn last_mut_single(bundle: &mut RunBundle) {
    let last = bundle.steps.last_mut().unwrap();
    last.outcome = StepOutcome::Measures(vec![MeasureValue {
        measure: "tswf:RMSE".into(),
        model: Some("tswf:SVM".into()),
        value: 3.0,
        n: 5,
        confusion: None,
    }]);
}

#[test]
fn render_plot_rejects_mismatched_sources() {
    let out = tempfile::tempdir().unwrap();
    let ts = TimeSeries::new("x", vec![1.0, 2.0, 3.0]);
    let err = render_plot("tswf:PlotACF", PlotSource::Series(&ts), out.path(), "p").unwrap_err();
    assert!(matches!(err, EngineError::TypeMismatch { .. }));
    let a = render_plot("tswf:PlotRegular", PlotSource::Series(&ts), out.path(), "p").unwrap();
    assert_eq!(a.svg_path, "plots/p.svg");
}
