//! The ten competency questions as typed queries.

use serde::Deserialize;
use serde_json::{json, Value};
use tsflow_core::document::DeclaredParam;
use tsflow_core::engine::best_of;
use tsflow_core::metrics::MeasureValue;
use tsflow_core::vocabulary::{compact, load_vocabulary, Category, Term};

use crate::store::Store;
use crate::CatalogError;

const UNSPECIFIED: &str = "unspecified";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompetencyQuery {
    /// How many operations does a workflow perform.
    OperationsCount { id: String },
    /// Which services contain time-series functions.
    ServicesWithTsFunctions,
    ProvidesAlgorithm { id: String, term: String },
    InputOf { id: String },
    OutputsOf { id: String },
    CostOf { id: String },
    AuthOf { id: String },
    ParametersOf { id: String, term: String },
    /// `None` asks for the stored horizon.
    ForecastOf { run_id: String, horizon: Option<usize> },
    BestModelOf { run_id: String, metric: String },
}

/// Query-string arguments shared by every question.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct QueryArgs {
    pub id: Option<String>,
    pub term: Option<String>,
    pub run_id: Option<String>,
    pub horizon: Option<usize>,
    pub metric: Option<String>,
}

fn need(value: &Option<String>, name: &str) -> Result<String, CatalogError> {
    value
        .clone()
        .ok_or_else(|| CatalogError::BadRequest(format!("missing argument `{name}`")))
}

impl CompetencyQuery {
    /// Builds a query from its number (`01`, `1`, `cq01`) and arguments.
    pub fn from_args(number: &str, args: &QueryArgs) -> Result<Self, CatalogError> {
        let digits = number.trim_start_matches(|c: char| c.is_ascii_alphabetic());
        let n: u32 = digits
            .parse()
            .map_err(|_| CatalogError::BadRequest(format!("unknown question `{number}`")))?;
        Ok(match n {
            1 => CompetencyQuery::OperationsCount { id: need(&args.id, "id")? },
            2 => CompetencyQuery::ServicesWithTsFunctions,
            3 => CompetencyQuery::ProvidesAlgorithm {
                id: need(&args.id, "id")?,
                term: need(&args.term, "term")?,
            },
            4 => CompetencyQuery::InputOf { id: need(&args.id, "id")? },
            5 => CompetencyQuery::OutputsOf { id: need(&args.id, "id")? },
            6 => CompetencyQuery::CostOf { id: need(&args.id, "id")? },
            7 => CompetencyQuery::AuthOf { id: need(&args.id, "id")? },
            8 => CompetencyQuery::ParametersOf {
                id: need(&args.id, "id")?,
                term: need(&args.term, "term")?,
            },
            9 => CompetencyQuery::ForecastOf {
                run_id: need(&args.run_id, "run_id")?,
                horizon: args.horizon,
            },
            10 => CompetencyQuery::BestModelOf {
                run_id: need(&args.run_id, "run_id")?,
                metric: args.metric.clone().unwrap_or_else(|| "tswf:RMSE".into()),
            },
            _ => return Err(CatalogError::BadRequest(format!("unknown question `{number}`"))),
        })
    }
}

fn term(name: &str) -> Result<&'static Term, CatalogError> {
    load_vocabulary()
        .resolve(name)
        .map_err(|e| CatalogError::BadRequest(e.to_string()))
}

fn stored_bundle(store: &Store, run_id: &str) -> Result<Value, CatalogError> {
    let text = store.run_bundle(run_id)?;
    serde_json::from_str(&text).map_err(|e| CatalogError::Storage {
        path: format!("runs/{run_id}/bundle.json"),
        message: e.to_string(),
    })
}

/// Step results of one outcome kind in a stored bundle.
fn results<'a>(bundle: &'a Value, kind: &'a str) -> impl Iterator<Item = &'a Value> + 'a {
    bundle["steps"]
        .as_array()
        .into_iter()
        .flatten()
        .filter(move |s| s["outcome"]["kind"] == kind)
        .map(|s| &s["outcome"]["result"])
}

impl Store {
    pub fn answer(&self, query: &CompetencyQuery) -> Result<Value, CatalogError> {
        use CompetencyQuery::*;
        match query {
            OperationsCount { id } => {
                let e = self.require(id)?;
                Ok(json!({"id": id, "operations": e.doc.operation_count()}))
            }
            ServicesWithTsFunctions => {
                let registry = load_vocabulary();
                let services: Vec<String> = self
                    .entries()
                    .iter()
                    .filter(|e| {
                        e.doc.all_ops().any(|op| {
                            registry.lookup(&op.term).is_some_and(|t| {
                                matches!(
                                    t.category,
                                    Category::InformationAnalysis
                                        | Category::StationaryAnalysis
                                        | Category::PredictiveModel
                                )
                            })
                        })
                    })
                    .map(|e| e.meta.id.clone())
                    .collect();
                Ok(json!({"services": services}))
            }
            ProvidesAlgorithm { id, term: name } => {
                let e = self.require(id)?;
                let t = term(name)?;
                let present = e.doc.all_ops().any(|op| op.term == t.iri);
                Ok(json!({"id": id, "term": t.curie, "provided": t.executable && present}))
            }
            InputOf { id } => {
                let e = self.require(id)?;
                let input = e.doc.input.as_ref().map(|i| {
                    json!({
                        "source": compact(&i.source_kind),
                        "src": i.src,
                        "fields": i.fields.iter().map(|f| json!({"name": f.name, "type": compact(&f.dtype.iri())})).collect::<Vec<_>>(),
                        "frequency": i.frequency,
                    })
                });
                Ok(json!({"id": id, "input": input}))
            }
            OutputsOf { id } => {
                let e = self.require(id)?;
                let outputs: Vec<Value> = e
                    .doc
                    .outputs
                    .iter()
                    .map(|o| {
                        json!({
                            "id": o.id,
                            "kind": compact(&o.kind),
                            "measures": o.measures.iter().map(|m| m.curie()).collect::<Vec<_>>(),
                        })
                    })
                    .collect();
                Ok(json!({"id": id, "outputs": outputs}))
            }
            CostOf { id } => {
                let e = self.require(id)?;
                let cost = e
                    .doc
                    .service_meta
                    .as_ref()
                    .and_then(|m| m.cost_per_run.as_ref())
                    .map_or(json!(UNSPECIFIED), |c| json!(c));
                Ok(json!({"id": id, "cost_per_run": cost}))
            }
            AuthOf { id } => {
                let e = self.require(id)?;
                let auth = e
                    .doc
                    .service_meta
                    .as_ref()
                    .and_then(|m| m.auth_required)
                    .map_or(json!(UNSPECIFIED), |a| json!(a));
                Ok(json!({"id": id, "auth_required": auth}))
            }
            ParametersOf { id, term: name } => {
                let e = self.require(id)?;
                let t = term(name)?;
                let op = e.doc.all_ops().find(|op| op.term == t.iri).ok_or_else(|| {
                    CatalogError::NotFound(format!("{} in workflow `{id}`", t.curie))
                })?;
                let params: serde_json::Map<String, Value> = op
                    .declared_params(t)
                    .into_iter()
                    .map(|(k, p)| {
                        let v = match p {
                            DeclaredParam::Value { value, is_default } => {
                                json!({"value": value, "is_default": is_default})
                            }
                            DeclaredParam::Derived { rule, is_default } => {
                                json!({"rule": rule, "is_default": is_default})
                            }
                        };
                        (k, v)
                    })
                    .collect();
                Ok(json!({"id": id, "term": t.curie, "parameters": params}))
            }
            ForecastOf { run_id, horizon } => {
                let bundle = stored_bundle(self, run_id)?;
                let stored = bundle["horizon"].as_u64().unwrap_or(0) as usize;
                let h = horizon.unwrap_or(stored);
                if h == 0 || h > stored {
                    return Err(CatalogError::BadRequest(format!(
                        "horizon {h} outside 1..={stored} stored for run `{run_id}`"
                    )));
                }
                let forecasts: Vec<Value> = results(&bundle, "forecast")
                    .map(|f| {
                        let point: Vec<Value> = f["point"]
                            .as_array()
                            .map(|p| p.iter().take(h).cloned().collect())
                            .unwrap_or_default();
                        json!({"model": f["model"], "origin": f["origin"], "point": point})
                    })
                    .collect();
                Ok(json!({"run_id": run_id, "horizon": h, "forecasts": forecasts}))
            }
            BestModelOf { run_id, metric } => {
                let bundle = stored_bundle(self, run_id)?;
                let values: Vec<MeasureValue> = results(&bundle, "measures")
                    .filter_map(|r| serde_json::from_value::<Vec<MeasureValue>>(r.clone()).ok())
                    .flatten()
                    .collect();
                let best = best_of(&values, metric)
                    .map_err(|e| CatalogError::NotFound(e.to_string()))?;
                Ok(json!({"run_id": run_id, "metric": term(metric)?.curie, "model": best.model, "value": best.value}))
            }
        }
    }
}
