//! The line protocol spoken by external model backends, over stdio or HTTP.
//!
//! ```text
//! > {"op":"hello","proto":1}
//! < {"name":"m","version":"1","labels":["non_depressed","depressed"]}
//! > {"op":"predict","id":"a","text":"I feel fine."}
//! < {"id":"a","p_depressed":0.12}
//! ```
//!
//! A backend may answer a predict line with `{"id":..,"error":".."}` to
//! reject one item.

use deck_core::model::ModelDescriptor;
use serde::{Deserialize, Serialize};

pub const PROTO_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Request {
    Hello { proto: u32 },
    Predict { id: String, text: String },
}

impl Request {
    pub fn hello() -> Self {
        Request::Hello { proto: PROTO_VERSION }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("requests serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelloResponse {
    pub name: String,
    pub version: String,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proto: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_depressed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PredictResponse {
    pub fn ok(id: impl Into<String>, p: f64) -> Self {
        Self {
            id: id.into(),
            p_depressed: Some(p),
            error: None,
        }
    }

    pub fn error(id: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            p_depressed: None,
            error: Some(message.into()),
        }
    }
}

fn protocol(message: String) -> deck_core::Error {
    deck_core::Error::Protocol(message)
}

/// Parses and checks a greeting.
pub fn parse_hello(line: &str) -> deck_core::Result<ModelDescriptor> {
    let hello: HelloResponse = serde_json::from_str(line.trim())
        .map_err(|e| protocol(format!("malformed greeting {:?}: {e}", truncate(line))))?;
    if let Some(p) = hello.proto {
        if p != PROTO_VERSION {
            return Err(protocol(format!(
                "backend speaks protocol version {p}, expected {PROTO_VERSION}"
            )));
        }
    }
    let labels: [String; 2] = hello.labels.try_into().map_err(|l: Vec<String>| {
        protocol(format!("greeting lists {} labels, expected 2", l.len()))
    })?;
    let descriptor = ModelDescriptor {
        name: hello.name,
        version: hello.version,
        labels,
    };
    descriptor.validate()?;
    Ok(descriptor)
}

pub fn parse_predict(line: &str) -> deck_core::Result<PredictResponse> {
    let r: PredictResponse = serde_json::from_str(line.trim())
        .map_err(|e| protocol(format!("malformed prediction {:?}: {e}", truncate(line))))?;
    if r.p_depressed.is_none() && r.error.is_none() {
        return Err(protocol(format!("prediction for {:?} has neither p_depressed nor error", r.id)));
    }
    Ok(r)
}

fn truncate(s: &str) -> String {
    let s = s.trim();
    if s.chars().count() > 120 {
        format!("{}...", s.chars().take(120).collect::<String>())
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_field_names() {
        assert_eq!(Request::hello().to_line(), r#"{"op":"hello","proto":1}"#);
        let p = Request::Predict {
            id: "a".into(),
            text: "hi".into(),
        };
        assert_eq!(p.to_line(), r#"{"op":"predict","id":"a","text":"hi"}"#);
    }

    #[test]
    fn greeting_checks() {
        let ok = r#"{"name":"m","version":"1","labels":["non_depressed","depressed"]}"#;
        assert_eq!(parse_hello(ok).unwrap().name, "m");
        assert!(parse_hello("hello there").is_err());
        assert!(parse_hello(r#"{"name":"m","version":"1","labels":["depressed","non_depressed"]}"#).is_err());
        assert!(parse_hello(r#"{"name":"m","version":"1","labels":["non_depressed"]}"#).is_err());
        assert!(parse_hello(r#"{"name":"m","version":"1","labels":["non_depressed","depressed"],"proto":2}"#).is_err());
    }

    #[test]
    fn prediction_lines() {
        assert_eq!(parse_predict(r#"{"id":"a","p_depressed":0.7}"#).unwrap(), PredictResponse::ok("a", 0.7));
        assert!(parse_predict(r#"{"id":"a"}"#).is_err());
        assert_eq!(
            serde_json::to_string(&PredictResponse::ok("a", 0.25)).unwrap(),
            r#"{"id":"a","p_depressed":0.25}"#
        );
    }
}
