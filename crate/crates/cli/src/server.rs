//! Stateless HTTP API. Every request carries its program and data; renders
//! run on the blocking pool under a time budget.

use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use linviz_core::gallery::{
    gallery_entry, list_gallery, Dataset, DEFAULT_ROWS, DEFAULT_SEED, FILETREE_DEPTH,
};
use linviz_core::program::{parse_program, Diagnostic};
use linviz_core::table::DataTable;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::render::{check, read_table, render_text, RenderError, RenderSettings, Stats};

pub const DEFAULT_BODY_LIMIT: usize = 64 * 1024 * 1024;
/// Largest synthetic table a request may ask for.
pub const MAX_GENERATED_ROWS: usize = 2_000_000;

#[derive(Debug, Clone, Copy)]
pub struct ServerConfig {
    pub body_limit: usize,
    pub render_timeout: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            body_limit: DEFAULT_BODY_LIMIT,
            render_timeout: Duration::from_secs(30),
        }
    }
}

/// Inline CSV, or a generated table named by gallery entry or dataset.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DataSource {
    Csv {
        csv: String,
    },
    Gallery {
        gallery: String,
        rows: Option<usize>,
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Svg,
    Text,
    Stats,
}

fn default_width() -> f64 {
    800.0
}
fn default_height() -> f64 {
    600.0
}
fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Svg, OutputKind::Stats]
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
pub struct RenderRequest {
    pub program: String,
    pub data: DataSource,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
    #[serde(default = "yes")]
    pub cache: bool,
    #[serde(default)]
    pub plan: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RenderResponse {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<Stats>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ValidateRequest {
    pub program: String,
    /// Without data only syntax is checked.
    pub data: Option<DataSource>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateResponse {
    pub valid: bool,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GalleryItem {
    pub name: &'static str,
    pub title: &'static str,
    pub dataset: &'static str,
    pub program: String,
    pub certified: bool,
}

#[derive(Debug, Deserialize)]
pub struct TableQuery {
    rows: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String, Vec<Diagnostic>),
    NotFound(String),
    Rejected(StatusCode, String),
    Timeout,
    Internal,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest(error, diagnostics) => (
                StatusCode::BAD_REQUEST,
                json!({ "error": error, "diagnostics": diagnostics }),
            ),
            ApiError::NotFound(error) => (StatusCode::NOT_FOUND, json!({ "error": error })),
            ApiError::Rejected(status, error) => (status, json!({ "error": error })),
            ApiError::Timeout => (
                StatusCode::SERVICE_UNAVAILABLE,
                json!({ "error": "render timed out" }),
            ),
            ApiError::Internal => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({ "error": "internal error" }),
            ),
        };
        (status, Json(body)).into_response()
    }
}

impl From<RenderError> for ApiError {
    fn from(e: RenderError) -> Self {
        ApiError::BadRequest(e.to_string(), e.diagnostics())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::Rejected(r.status(), r.body_text())
    }
}

pub fn router(config: ServerConfig) -> Router {
    Router::new()
        .route("/render", post(render))
        .route("/validate", post(validate))
        .route("/gallery", get(gallery))
        .route("/gallery/{name}/data.csv", get(gallery_data))
        .fallback(|| async { ApiError::NotFound("no such endpoint".into()) })
        .layer(DefaultBodyLimit::max(config.body_limit))
        .with_state(config)
}

pub async fn serve(addr: &str, config: ServerConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(config)).await
}

/// Runs `f` on the blocking pool. A panic becomes a bare 500; the render
/// thread is abandoned, not cancelled, when the budget runs out.
async fn blocking<T, F>(budget: Duration, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> T + Send + 'static,
{
    match tokio::time::timeout(budget, tokio::task::spawn_blocking(f)).await {
        Err(_) => Err(ApiError::Timeout),
        Ok(Err(_)) => Err(ApiError::Internal),
        Ok(Ok(v)) => Ok(v),
    }
}

fn generated(name: &str, rows: Option<usize>, seed: Option<u64>) -> Result<DataTable, ApiError> {
    let dataset = match name {
        "cities" => Dataset::Cities,
        "filetree" => Dataset::FileTree {
            max_depth: FILETREE_DEPTH,
        },
        _ => {
            gallery_entry(name)
                .ok_or_else(|| {
                    ApiError::NotFound(format!("no gallery entry or dataset named `{name}`"))
                })?
                .dataset
        }
    };
    let rows = rows.unwrap_or(DEFAULT_ROWS);
    if rows == 0 || rows > MAX_GENERATED_ROWS {
        return Err(ApiError::BadRequest(
            format!("rows must be between 1 and {MAX_GENERATED_ROWS}"),
            Vec::new(),
        ));
    }
    Ok(dataset.generate(rows, seed.unwrap_or(DEFAULT_SEED)))
}

fn load(source: &DataSource) -> Result<DataTable, ApiError> {
    match source {
        DataSource::Csv { csv } => {
            read_table(csv.as_bytes()).map_err(|e| RenderError::Table(e).into())
        }
        DataSource::Gallery {
            gallery,
            rows,
            seed,
        } => generated(gallery, *rows, *seed),
    }
}

async fn render(
    State(config): State<ServerConfig>,
    body: Result<Json<RenderRequest>, JsonRejection>,
) -> Result<Json<RenderResponse>, ApiError> {
    let Json(req) = body?;
    let out = blocking(config.render_timeout, move || {
        let table = load(&req.data)?;
        let settings = RenderSettings {
            width: req.width,
            height: req.height,
            cache: req.cache,
            plan: req.plan,
        };
        let r = render_text(&req.program, &table, &settings)?;
        let want = |k| req.outputs.contains(&k);
        Ok::<_, ApiError>(RenderResponse {
            svg: want(OutputKind::Svg).then_some(r.svg),
            text: want(OutputKind::Text).then_some(r.text),
            stats: want(OutputKind::Stats).then_some(r.stats),
            diagnostics: r.diagnostics,
        })
    })
    .await??;
    Ok(Json(out))
}

async fn validate(
    State(config): State<ServerConfig>,
    body: Result<Json<ValidateRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let diagnostics = blocking(config.render_timeout, move || match &req.data {
        Some(source) => Ok(check(&req.program, &load(source)?)),
        None => Ok::<_, ApiError>(match parse_program(&req.program) {
            Ok(_) => Vec::new(),
            Err(e) => RenderError::Parse(e).diagnostics(),
        }),
    })
    .await??;
    let status = if diagnostics.is_empty() {
        StatusCode::OK
    } else {
        StatusCode::BAD_REQUEST
    };
    let body = ValidateResponse {
        valid: diagnostics.is_empty(),
        diagnostics,
    };
    Ok((status, Json(body)).into_response())
}

async fn gallery() -> Json<Vec<GalleryItem>> {
    Json(
        list_gallery()
            .into_iter()
            .map(|e| GalleryItem {
                name: e.name,
                title: e.title,
                dataset: e.dataset.name(),
                certified: e.certified,
                program: e.program,
            })
            .collect(),
    )
}

async fn gallery_data(
    State(config): State<ServerConfig>,
    Path(name): Path<String>,
    Query(q): Query<TableQuery>,
) -> Result<Response, ApiError> {
    let entry = gallery_entry(&name)
        .ok_or_else(|| ApiError::NotFound(format!("no gallery entry named `{name}`")))?;
    let csv = blocking(config.render_timeout, move || {
        generated(entry.name, q.rows, q.seed)?
            .to_csv()
            .map_err(|_| ApiError::Internal)
    })
    .await??;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}
