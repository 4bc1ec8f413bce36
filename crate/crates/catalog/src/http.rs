//! JSON over HTTP/1.1.
//!
//! Workflow ids are IRIs, so they travel percent-encoded in path segments.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tsflow_core::document::serialize_value;

use crate::{CatalogError, CompetencyQuery, QueryArgs, Store};

#[derive(Clone)]
struct AppState {
    store: Arc<Store>,
    data_root: Arc<PathBuf>,
}

impl IntoResponse for CatalogError {
    fn into_response(self) -> Response {
        let status = match &self {
            CatalogError::Invalid(_) | CatalogError::Input(_) => StatusCode::UNPROCESSABLE_ENTITY,
            CatalogError::Conflict(_) => StatusCode::CONFLICT,
            CatalogError::NotFound(_) => StatusCode::NOT_FOUND,
            CatalogError::BadRequest(_) => StatusCode::BAD_REQUEST,
            CatalogError::Engine(_) | CatalogError::Storage { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        let body = match &self {
            CatalogError::Invalid(report) => json!({"error": self.code(), "report": report}),
            _ => json!({"error": self.code(), "message": self.to_string()}),
        };
        (status, Json(body)).into_response()
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, CatalogError> + Send + 'static,
) -> Result<T, CatalogError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| CatalogError::Storage {
            path: String::new(),
            message: e.to_string(),
        })?
}

#[derive(Debug, Default, Deserialize)]
struct ImportParams {
    #[serde(default)]
    force: bool,
}

async fn import(
    State(st): State<AppState>,
    Query(p): Query<ImportParams>,
    body: String,
) -> Result<Response, CatalogError> {
    let store = st.store.clone();
    let imported = blocking(move || store.import_document(&body, p.force)).await?;
    let status = if imported.created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(json!({"id": imported.id, "report": imported.report}))).into_response())
}

async fn list(State(st): State<AppState>) -> Response {
    Json(st.store.list()).into_response()
}

async fn fetch(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, CatalogError> {
    let e = st.store.require(&id)?;
    Ok(Json(json!({
        "id": e.meta.id,
        "name": e.doc.name,
        "imported_at": e.meta.imported_at,
        "runs": e.meta.runs,
        "service_meta": e.doc.service_meta,
        "document": serialize_value(&e.doc),
    }))
    .into_response())
}

async fn raw(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, CatalogError> {
    let e = st.store.require(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/ld+json")], e.raw.clone()).into_response())
}

#[derive(Debug, Deserialize)]
struct RunParams {
    horizon: Option<usize>,
}

async fn start_run(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(p): Query<RunParams>,
) -> Result<Response, CatalogError> {
    let store = st.store.clone();
    let data_root = st.data_root.clone();
    let horizon = p.horizon.unwrap_or(10);
    let bundle = blocking(move || store.run_workflow(&id, horizon, &data_root)).await?;
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({"run_id": bundle.run_id, "status": bundle.status})),
    )
        .into_response())
}

async fn run_bundle(
    State(st): State<AppState>,
    Path(run_id): Path<String>,
) -> Result<Response, CatalogError> {
    let text = st.store.run_bundle(&run_id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

async fn cq(
    State(st): State<AppState>,
    Path(number): Path<String>,
    Query(args): Query<QueryArgs>,
) -> Result<Response, CatalogError> {
    let q = CompetencyQuery::from_args(&number, &args)?;
    Ok(Json(st.store.answer(&q)?).into_response())
}

/// Routes of the catalog service. Runs read their CSV files under
/// `data_root`.
pub fn router(store: Arc<Store>, data_root: PathBuf) -> Router {
    Router::new()
        .route("/workflows", post(import).get(list))
        .route("/workflows/{id}", get(fetch))
        .route("/workflows/{id}/raw", get(raw))
        .route("/workflows/{id}/runs", post(start_run))
        .route("/runs/{run_id}", get(run_bundle))
        .route("/cq/{number}", get(cq))
        .with_state(AppState {
            store,
            data_root: Arc::new(data_root),
        })
}

/// Serves until Ctrl-C. Prints the bound address once listening.
pub async fn serve(store: Arc<Store>, data_root: PathBuf, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    println!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store, data_root))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
