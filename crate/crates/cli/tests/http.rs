//! HTTP endpoints exercised through the router without a socket.

use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use linviz_cli::render::{read_table, render_text, RenderSettings};
use linviz_cli::server::{router, ServerConfig};
use linviz_core::gallery::gallery_entry;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(config: ServerConfig, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = router(config).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}

fn post(uri: &str, body: &Value) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

async fn json_call(req: Request<Body>) -> (StatusCode, Value) {
    let (s, b) = call(ServerConfig::default(), req).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

#[tokio::test]
async fn render_gallery_treemap_is_certified() {
    let e = gallery_entry("treemap").unwrap();
    let (s, v) = json_call(post(
        "/render",
        &json!({ "program": e.program, "data": { "gallery": "treemap" } }),
    ))
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["stats"]["certifiedDataLinear"], true);
    assert!(v["svg"].as_str().unwrap().starts_with("<svg"));
    assert!(v.get("text").is_none());
}

#[tokio::test]
async fn http_matches_the_shared_pipeline() {
    let e = gallery_entry("grid_of").unwrap();
    let csv = e.table(80, 3).to_csv().unwrap();
    let req = json!({ "program": e.program, "data": { "csv": csv }, "width": 400, "height": 300, "outputs": ["svg", "text"] });
    let (s, v) = json_call(post("/render", &req)).await;
    assert_eq!(s, StatusCode::OK);
    let settings = RenderSettings {
        width: 400.0,
        height: 300.0,
        ..RenderSettings::default()
    };
    let local = render_text(&e.program, &read_table(csv.as_bytes()).unwrap(), &settings).unwrap();
    assert_eq!(v["svg"].as_str().unwrap(), local.svg);
    assert_eq!(v["text"].as_str().unwrap(), local.text);
    assert!(v.get("stats").is_none());
}

#[tokio::test]
async fn concurrent_identical_requests_agree() {
    let e = gallery_entry("state_grouping").unwrap();
    let req = json!({ "program": e.program, "data": { "gallery": "cities", "rows": 500, "seed": 9 }, "outputs": ["svg", "text", "stats"] });
    let app = router(ServerConfig::default());
    let calls = (0..8).map(|_| {
        let app = app.clone();
        let req = post("/render", &req);
        tokio::spawn(async move {
            let resp = app.oneshot(req).await.unwrap();
            resp.into_body().collect().await.unwrap().to_bytes()
        })
    });
    let mut bodies = Vec::new();
    for c in calls {
        bodies.push(c.await.unwrap());
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn bad_programs_get_diagnostics() {
    let (s, v) = json_call(post(
        "/render",
        &json!({ "program": "Visualization { X = }", "data": { "gallery": "cities" } }),
    ))
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["diagnostics"][0]["line"], 1);
    let body = json!({
        "program": "Visualization { FillEllipse { X = $Nope; Y = 0; Width = 1; Height = 1; } }",
        "data": { "gallery": "cities", "rows": 10 }
    });
    let (s, v) = json_call(post("/validate", &body)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["valid"], false);
    assert!(v["diagnostics"][0]["message"]
        .as_str()
        .unwrap()
        .contains("Nope"));
    let ok = json!({ "program": gallery_entry("plot2d").unwrap().program, "data": { "gallery": "plot2d" } });
    let (s, v) = json_call(post("/validate", &ok)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["valid"], true);
    let (s, _) = json_call(post("/validate", &json!({ "program": "Visualization {" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn request_problems_are_client_errors() {
    let (s, v) = json_call(post(
        "/render",
        &json!({ "program": "Visualization { }", "data": { "gallery": "nope" } }),
    ))
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND, "{v}");
    let (s, _) = json_call(post("/render", &json!({ "program": 3 }))).await;
    assert!(s.is_client_error());
    let (s, _) = json_call(post(
        "/render",
        &json!({ "program": "Visualization { }", "data": { "csv": "" } }),
    ))
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let req =
        json!({ "program": "Visualization { }", "data": { "gallery": "cities" }, "width": 0 });
    let (s, _) = json_call(post("/render", &req)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = json_call(post(
        "/render",
        &json!({ "program": "", "data": { "gallery": "cities", "rows": 0 } }),
    ))
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = json_call(get("/nowhere")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn oversized_payloads_are_refused() {
    let config = ServerConfig {
        body_limit: 1024,
        ..ServerConfig::default()
    };
    let body = json!({ "program": "x".repeat(4096), "data": { "gallery": "cities" } });
    let (s, _) = call(config, post("/render", &body)).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn slow_renders_time_out_without_leaking() {
    let config = ServerConfig {
        render_timeout: Duration::from_millis(1),
        ..ServerConfig::default()
    };
    let e = gallery_entry("treemap").unwrap();
    let body = json!({ "program": e.program, "data": { "gallery": "filetree", "rows": 200000 } });
    let (s, b) = call(config, post("/render", &body)).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v, json!({ "error": "render timed out" }));
}

#[tokio::test]
async fn gallery_listing_and_data() {
    let (s, v) = json_call(get("/gallery")).await;
    assert_eq!(s, StatusCode::OK);
    let entries = v.as_array().unwrap();
    assert!(entries.len() >= 10);
    assert!(entries
        .iter()
        .all(|e| e["program"].as_str().unwrap().starts_with("Visualization")));
    let (s, b) = call(
        ServerConfig::default(),
        get("/gallery/plot2d/data.csv?rows=7&seed=2"),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let csv = String::from_utf8(b).unwrap();
    assert_eq!(csv.lines().count(), 8);
    assert!(csv.starts_with("name,State,Population"));
    let (s, _) = call(ServerConfig::default(), get("/gallery/nope/data.csv")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}
