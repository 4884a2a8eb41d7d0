//! Scripted request sequences: a JSON list of steps run in order against a
//! router, with values captured from earlier responses substituted into later
//! paths and bodies as `{name}`.

use std::collections::BTreeMap;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tower::ServiceExt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub name: String,
    pub method: String,
    pub path: String,
    #[serde(default)]
    pub body: Option<Value>,
    /// Expected status; the run stops with an error on any other.
    pub expect: u16,
    /// Variable name → JSON pointer into the response body.
    #[serde(default)]
    pub capture: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub name: String,
    pub status: u16,
    pub body: Value,
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("step `{step}`: {message}")]
    Step { step: String, message: String },
    #[error("parsing script: {0}")]
    Parse(String),
}

impl Script {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        serde_json::from_str(text).map_err(|e| ScriptError::Parse(e.to_string()))
    }
}

fn substitute(text: &str, vars: &BTreeMap<String, String>) -> String {
    let mut out = text.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

fn substitute_value(value: &Value, vars: &BTreeMap<String, String>) -> Value {
    match value {
        Value::String(s) => Value::String(substitute(s, vars)),
        Value::Array(items) => Value::Array(items.iter().map(|v| substitute_value(v, vars)).collect()),
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| (k.clone(), substitute_value(v, vars)))
                .collect(),
        ),
        other => other.clone(),
    }
}

/// Run every step against `router`; the captured variables are returned with the outcomes.
pub async fn run(router: &Router, script: &Script) -> Result<(Vec<Outcome>, BTreeMap<String, String>), ScriptError> {
    let mut vars = BTreeMap::new();
    let mut outcomes = Vec::new();
    for step in &script.steps {
        let fail = |message: String| ScriptError::Step {
            step: step.name.clone(),
            message,
        };
        let method: Method = step
            .method
            .parse()
            .map_err(|_| fail(format!("bad method `{}`", step.method)))?;
        let path = substitute(&step.path, &vars);
        let body = match &step.body {
            Some(b) => Body::from(substitute_value(b, &vars).to_string()),
            None => Body::empty(),
        };
        let request = Request::builder()
            .method(method)
            .uri(&path)
            .header(header::CONTENT_TYPE, "application/json")
            .body(body)
            .map_err(|e| fail(e.to_string()))?;
        let response = router.clone().oneshot(request).await.map_err(|e| fail(e.to_string()))?;
        let status = response.status();
        let bytes = to_bytes(response.into_body(), usize::MAX)
            .await
            .map_err(|e| fail(e.to_string()))?;
        let body: Value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes)
                .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()))
        };
        if status != StatusCode::from_u16(step.expect).map_err(|e| fail(e.to_string()))? {
            return Err(fail(format!(
                "{} {path}: expected {}, got {status}: {body}",
                step.method, step.expect
            )));
        }
        for (name, pointer) in &step.capture {
            let value = body
                .pointer(pointer)
                .ok_or_else(|| fail(format!("nothing at `{pointer}` to capture as `{name}`")))?;
            let text = match value {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            vars.insert(name.clone(), text);
        }
        outcomes.push(Outcome {
            name: step.name.clone(),
            status: status.as_u16(),
            body,
        });
    }
    Ok((outcomes, vars))
}
