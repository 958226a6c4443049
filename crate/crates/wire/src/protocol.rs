use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use heprep::event::{Session, SessionError};
use heprep::query::QueryError;
use serde_json::{json, Map, Value};

use crate::json::{
    action_descriptor_to_json, action_from_json, instance_tree_to_json, report_to_json, request_from_map,
    tree_top_to_json, type_tree_to_json, ActionDecodeError, REQUEST_KEYS,
};

pub const PROTOCOL_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Parse = 1,
    UnknownMethod = 2,
    BadParams = 3,
    InvalidPath = 4,
    UnknownAction = 5,
    ActionFailed = 6,
    State = 7,
    Internal = 8,
}

impl ErrorCode {
    pub fn code(self) -> i64 {
        self as i64
    }

    pub fn from_code(code: i64) -> Option<Self> {
        use ErrorCode::*;
        [
            Parse,
            UnknownMethod,
            BadParams,
            InvalidPath,
            UnknownAction,
            ActionFailed,
            State,
            Internal,
        ]
        .into_iter()
        .find(|c| c.code() == code)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("error {}: {message}", code.code())]
pub struct WireError {
    pub code: ErrorCode,
    pub message: String,
}

impl WireError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        WireError {
            code,
            message: message.into(),
        }
    }

    fn bad_params(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadParams, message)
    }
}

impl From<SessionError> for WireError {
    fn from(e: SessionError) -> Self {
        let code = match &e {
            SessionError::NoEvent => ErrorCode::State,
            SessionError::Query(_) => ErrorCode::BadParams,
            SessionError::Path(_) => ErrorCode::InvalidPath,
            SessionError::UnknownAction(_) => ErrorCode::UnknownAction,
            SessionError::BadTarget(_)
            | SessionError::ActionArg(_)
            | SessionError::ActionPrecondition(_)
            | SessionError::UnknownAlgorithm(_)
            | SessionError::Fit(_) => ErrorCode::ActionFailed,
            SessionError::Build(_) => ErrorCode::Internal,
        };
        WireError::new(code, e.to_string())
    }
}

impl From<QueryError> for WireError {
    fn from(e: QueryError) -> Self {
        WireError::bad_params(e.to_string())
    }
}

/// Whether a method changes the session.
pub fn is_mutating(method: &str) -> bool {
    matches!(
        method,
        "heprep.getInstancesAfterAction" | "control.nextEvent" | "control.runAlgorithm"
    )
}

pub const METHODS: [&str; 9] = [
    "heprep.getTypeTree",
    "heprep.getInstanceTreeTop",
    "heprep.getInstances",
    "heprep.getInstancesAfterAction",
    "control.nextEvent",
    "control.runAlgorithm",
    "control.listActions",
    "control.listAlgorithms",
    "control.status",
];

/// Answers request frames against one shared session. Reads share a lock;
/// mutating methods take it exclusively, so concurrent connections see
/// some serial order of mutations.
#[derive(Clone)]
pub struct Dispatcher {
    session: Arc<RwLock<Session>>,
}

impl Dispatcher {
    pub fn new(session: Session) -> Self {
        Dispatcher {
            session: Arc::new(RwLock::new(session)),
        }
    }

    pub fn session(&self) -> &Arc<RwLock<Session>> {
        &self.session
    }

    fn read(&self) -> RwLockReadGuard<'_, Session> {
        self.session.read().unwrap_or_else(|p| p.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Session> {
        self.session.write().unwrap_or_else(|p| p.into_inner())
    }

    /// One request line in, one response line out (without the newline).
    pub fn handle_line(&self, line: &str) -> String {
        self.handle_frame(line).to_string()
    }

    pub fn handle_frame(&self, line: &str) -> Value {
        let (id, result) = match parse_frame(line) {
            Ok((id, method, params)) => (Value::from(id), self.call(&method, params)),
            Err((id, e)) => (id, Err(e)),
        };
        match result {
            Ok(result) => json!({"id": id, "result": result}),
            Err(e) => json!({"id": id, "error": {"code": e.code.code(), "message": e.message}}),
        }
    }

    /// Runs one method with already-decoded params.
    pub fn call(&self, method: &str, params: Map<String, Value>) -> Result<Value, WireError> {
        match method {
            "heprep.getTypeTree" => {
                no_params(&params)?;
                Ok(type_tree_to_json(&self.read().type_tree()?))
            }
            "heprep.getInstanceTreeTop" => {
                no_params(&params)?;
                Ok(tree_top_to_json(&self.read().instance_tree_top()?))
            }
            "heprep.getInstances" => {
                only(&params, &REQUEST_KEYS)?;
                let req = request_from_map(&params).map_err(|e| WireError::bad_params(e.0))?;
                Ok(instance_tree_to_json(&self.read().instances(&req)?))
            }
            "heprep.getInstancesAfterAction" => {
                let mut allowed = REQUEST_KEYS.to_vec();
                allowed.push("action");
                only(&params, &allowed)?;
                let req = request_from_map(&params).map_err(|e| WireError::bad_params(e.0))?;
                let action = params
                    .get("action")
                    .ok_or_else(|| WireError::bad_params("missing `action`"))?;
                let action = action_from_json(action).map_err(|e| match e {
                    ActionDecodeError::Shape(m) => WireError::bad_params(m),
                    ActionDecodeError::Path(_) => WireError::new(ErrorCode::InvalidPath, e.to_string()),
                })?;
                let mut s = self.write();
                let tree = s.instances_after_action(&action, &req)?;
                log::info!(
                    "action {} on {} (event {})",
                    action.action_name,
                    action.target_path,
                    s.event_id()
                );
                Ok(instance_tree_to_json(&tree))
            }
            "control.nextEvent" => {
                no_params(&params)?;
                let id = self.write().next_event();
                log::info!("next event: {id}");
                Ok(json!({"eventId": id}))
            }
            "control.runAlgorithm" => {
                only(&params, &["name"])?;
                let name = params
                    .get("name")
                    .and_then(Value::as_str)
                    .ok_or_else(|| WireError::bad_params("`name` must be a string"))?;
                let report = self.write().run_algorithm(name)?;
                log::info!("algorithm {name}: {}", report.status);
                Ok(report_to_json(&report))
            }
            "control.listActions" => {
                no_params(&params)?;
                let actions: Vec<Value> = self
                    .read()
                    .list_actions()
                    .iter()
                    .map(action_descriptor_to_json)
                    .collect();
                Ok(json!({"actions": actions}))
            }
            "control.listAlgorithms" => {
                no_params(&params)?;
                Ok(json!({"algorithms": self.read().list_algorithms()}))
            }
            "control.status" => {
                no_params(&params)?;
                let s = self.read();
                Ok(json!({
                    "eventId": s.event_id(),
                    "seed": s.seed(),
                    "protocolVersion": PROTOCOL_VERSION,
                }))
            }
            other => Err(WireError::new(
                ErrorCode::UnknownMethod,
                format!("unknown method `{other}`"),
            )),
        }
    }
}

fn no_params(params: &Map<String, Value>) -> Result<(), WireError> {
    only(params, &[])
}

fn only(params: &Map<String, Value>, allowed: &[&str]) -> Result<(), WireError> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(WireError::bad_params(format!("unknown parameter `{k}`"))),
        None => Ok(()),
    }
}

type FrameError = (Value, WireError);

/// Splits a request frame into id, method and params. An absent or null
/// `params` is an empty object.
pub fn parse_frame(line: &str) -> Result<(i64, String, Map<String, Value>), FrameError> {
    let parse = |m: String| (Value::Null, WireError::new(ErrorCode::Parse, m));
    let v: Value = serde_json::from_str(line).map_err(|e| parse(format!("malformed JSON: {e}")))?;
    let Value::Object(mut m) = v else {
        return Err(parse("a frame must be a JSON object".into()));
    };
    let id = m
        .get("id")
        .and_then(Value::as_i64)
        .ok_or_else(|| parse("`id` must be an integer".into()))?;
    let with_id = |e: WireError| (Value::from(id), e);
    let method = match m.remove("method") {
        Some(Value::String(s)) => s,
        _ => return Err(with_id(WireError::new(ErrorCode::Parse, "`method` must be a string"))),
    };
    if let Some(k) = m.keys().find(|k| !["id", "params"].contains(&k.as_str())) {
        return Err(with_id(WireError::new(
            ErrorCode::Parse,
            format!("unknown frame field `{k}`"),
        )));
    }
    let params = match m.remove("params") {
        None | Some(Value::Null) => Map::new(),
        Some(Value::Object(p)) => p,
        Some(_) => return Err(with_id(WireError::bad_params("`params` must be an object"))),
    };
    Ok((id, method, params))
}

/// The `result` of a response frame, or its error.
pub fn response_result(frame: &Value) -> Result<&Value, WireError> {
    if let Some(r) = frame.get("result") {
        return Ok(r);
    }
    let e = frame.get("error");
    let code = e
        .and_then(|e| e.get("code"))
        .and_then(Value::as_i64)
        .and_then(ErrorCode::from_code)
        .unwrap_or(ErrorCode::Internal);
    let message = e
        .and_then(|e| e.get("message"))
        .and_then(Value::as_str)
        .unwrap_or("malformed response")
        .to_string();
    Err(WireError { code, message })
}
