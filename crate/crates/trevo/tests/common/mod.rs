//! Helpers shared by the service-level tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;
use trevo::api::API_SCHEMA;
use trevo::{router, AppState};
use trevo_core::{Dataset, Strictness};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn load(name: &str) -> Dataset {
    Dataset::load_dir(&fixtures().join(name), Strictness::Strict).unwrap()
}

pub fn app_with(ds: Option<Dataset>) -> Router {
    router(Arc::new(AppState::new(ds)))
}

/// Sends one request through the router and returns the raw reply body.
pub async fn call_raw(app: &Router, method: Method, path: &str, body: Option<&str>) -> (StatusCode, Bytes) {
    let req = Request::builder()
        .method(method)
        .uri(path)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

/// Like [`call_raw`], decoding the JSON reply (`Value::Null` for an empty body).
pub async fn call(app: &Router, method: Method, path: &str, body: Option<&str>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(app, method, path, body).await;
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub async fn get(app: &Router, path: &str) -> (StatusCode, Value) {
    call(app, Method::GET, path, None).await
}

pub async fn post(app: &Router, path: &str, body: &Value) -> (StatusCode, Value) {
    call(app, Method::POST, path, Some(&body.to_string())).await
}

pub fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap()
}

/// Validator for one `$defs` entry of the published schema.
pub fn schema_for(def: &str) -> jsonschema::Validator {
    let mut schema: Value = serde_json::from_str(API_SCHEMA).unwrap();
    assert!(schema["$defs"].get(def).is_some(), "schema has no definition {def}");
    schema["$ref"] = Value::String(format!("#/$defs/{def}"));
    jsonschema::validator_for(&schema).unwrap()
}

pub fn assert_schema(def: &str, value: &Value) {
    let v = schema_for(def);
    let errors: Vec<String> = v.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{def}: {errors:#?}\n{value}");
}
