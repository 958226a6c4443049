//! JSON shapes of the HepRep trees. Field names follow the XML dialect:
//! elements become objects, nesting becomes the arrays `types`,
//! `instances`, `points`, `attvalues` and `attdefs`.

use heprep::event::{ActionDescriptor, ActionInvocation, AlgorithmReport};
use heprep::model::{
    AttDef, AttPayload, AttValue, AttValueKind, AttributeCategory, Color, HepRepDocument, HepRepInstance, HepRepPoint,
    HepRepType, InstancePath, InstanceTree, TypeTree,
};
use heprep::query::{InstanceRequest, InstanceTreeTop, Predicate, RootSummary};
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct DecodeError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, DecodeError> {
    Err(DecodeError(msg.into()))
}

pub fn payload_to_json(p: &AttPayload) -> Value {
    match p {
        AttPayload::Text(s) => Value::String(s.clone()),
        AttPayload::Integer(i) => json!(i),
        AttPayload::Real(r) => json!(r),
        AttPayload::Boolean(b) => Value::Bool(*b),
        AttPayload::Color(c) => json!([c.r, c.g, c.b]),
    }
}

/// Reads a payload of a known kind.
pub fn payload_from_json(kind: AttValueKind, v: &Value) -> Result<AttPayload, DecodeError> {
    let bad = || DecodeError(format!("{v} is not a valid {kind} value"));
    Ok(match kind {
        AttValueKind::Text => AttPayload::Text(v.as_str().ok_or_else(bad)?.to_string()),
        AttValueKind::Integer => AttPayload::Integer(v.as_i64().ok_or_else(bad)?),
        AttValueKind::Real => AttPayload::Real(v.as_f64().ok_or_else(bad)?),
        AttValueKind::Boolean => AttPayload::Boolean(v.as_bool().ok_or_else(bad)?),
        AttValueKind::Color => {
            let arr = v.as_array().filter(|a| a.len() == 3).ok_or_else(bad)?;
            let c: Vec<f64> = arr
                .iter()
                .map(|x| x.as_f64().ok_or_else(bad))
                .collect::<Result<_, _>>()?;
            let c = Color::new(c[0], c[1], c[2]);
            if !c.is_valid() {
                return Err(bad());
            }
            AttPayload::Color(c)
        }
    })
}

/// Reads a payload whose kind is implied by the JSON value: integers,
/// other numbers, strings, booleans and `[r, g, b]` arrays.
pub fn payload_from_untyped(v: &Value) -> Result<AttPayload, DecodeError> {
    match v {
        Value::Number(n) if n.is_i64() => Ok(AttPayload::Integer(n.as_i64().unwrap_or_default())),
        Value::Number(n) => n
            .as_f64()
            .map(AttPayload::Real)
            .ok_or_else(|| DecodeError(format!("bad number {n}"))),
        Value::String(s) => Ok(AttPayload::Text(s.clone())),
        Value::Bool(b) => Ok(AttPayload::Boolean(*b)),
        Value::Array(_) => payload_from_json(AttValueKind::Color, v),
        other => err(format!("unsupported value {other}")),
    }
}

fn obj<'a>(v: &'a Value, what: &str) -> Result<&'a Map<String, Value>, DecodeError> {
    v.as_object()
        .ok_or_else(|| DecodeError(format!("{what} must be an object")))
}

fn string(m: &Map<String, Value>, key: &str) -> Result<String, DecodeError> {
    match m.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        _ => err(format!("`{key}` must be a string")),
    }
}

fn array<'a>(m: &'a Map<String, Value>, key: &str) -> Result<&'a [Value], DecodeError> {
    match m.get(key) {
        Some(Value::Array(a)) => Ok(a),
        None => Ok(&[]),
        _ => err(format!("`{key}` must be an array")),
    }
}

fn number(m: &Map<String, Value>, key: &str) -> Result<f64, DecodeError> {
    m.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| DecodeError(format!("`{key}` must be a number")))
}

pub fn att_value_to_json(v: &AttValue) -> Value {
    json!({"name": v.name, "kind": v.value.kind().token(), "value": payload_to_json(&v.value)})
}

pub fn att_value_from_json(v: &Value) -> Result<AttValue, DecodeError> {
    let m = obj(v, "attvalue")?;
    let kind_token = string(m, "kind")?;
    let kind =
        AttValueKind::from_token(&kind_token).ok_or_else(|| DecodeError(format!("unknown kind `{kind_token}`")))?;
    let value = m
        .get("value")
        .ok_or_else(|| DecodeError("attvalue needs `value`".into()))?;
    Ok(AttValue::new(string(m, "name")?, payload_from_json(kind, value)?))
}

fn att_values(m: &Map<String, Value>) -> Result<Vec<AttValue>, DecodeError> {
    array(m, "attvalues")?.iter().map(att_value_from_json).collect()
}

pub fn att_def_to_json(d: &AttDef) -> Value {
    json!({
        "name": d.name,
        "desc": d.description,
        "category": d.category.as_str(),
        "kind": d.kind.token(),
        "units": d.units,
    })
}

pub fn att_def_from_json(v: &Value) -> Result<AttDef, DecodeError> {
    let m = obj(v, "attdef")?;
    let cat = string(m, "category")?;
    let kind = string(m, "kind")?;
    Ok(AttDef {
        name: string(m, "name")?,
        description: string(m, "desc")?,
        category: cat
            .parse::<AttributeCategory>()
            .map_err(|_| DecodeError(format!("unknown category `{cat}`")))?,
        kind: AttValueKind::from_token(&kind).ok_or_else(|| DecodeError(format!("unknown kind `{kind}`")))?,
        units: string(m, "units")?,
    })
}

fn type_to_json(t: &HepRepType) -> Value {
    json!({
        "name": t.name,
        "attdefs": t.att_defs.iter().map(att_def_to_json).collect::<Vec<_>>(),
        "attvalues": t.att_values.iter().map(att_value_to_json).collect::<Vec<_>>(),
        "types": t.sub_types.iter().map(type_to_json).collect::<Vec<_>>(),
    })
}

fn type_from_json(v: &Value) -> Result<HepRepType, DecodeError> {
    let m = obj(v, "type")?;
    Ok(HepRepType {
        name: string(m, "name")?,
        att_defs: array(m, "attdefs")?
            .iter()
            .map(att_def_from_json)
            .collect::<Result<_, _>>()?,
        att_values: att_values(m)?,
        sub_types: array(m, "types")?
            .iter()
            .map(type_from_json)
            .collect::<Result<_, _>>()?,
    })
}

pub fn type_tree_to_json(t: &TypeTree) -> Value {
    json!({
        "name": t.name,
        "version": t.version,
        "types": t.root_types.iter().map(type_to_json).collect::<Vec<_>>(),
    })
}

pub fn type_tree_from_json(v: &Value) -> Result<TypeTree, DecodeError> {
    let m = obj(v, "typetree")?;
    Ok(TypeTree {
        name: string(m, "name")?,
        version: string(m, "version")?,
        root_types: array(m, "types")?
            .iter()
            .map(type_from_json)
            .collect::<Result<_, _>>()?,
    })
}

fn point_to_json(p: &HepRepPoint) -> Value {
    json!({
        "x": p.x,
        "y": p.y,
        "z": p.z,
        "attvalues": p.att_values.iter().map(att_value_to_json).collect::<Vec<_>>(),
    })
}

fn point_from_json(v: &Value) -> Result<HepRepPoint, DecodeError> {
    let m = obj(v, "point")?;
    Ok(HepRepPoint {
        x: number(m, "x")?,
        y: number(m, "y")?,
        z: number(m, "z")?,
        att_values: att_values(m)?,
    })
}

fn instance_to_json(i: &HepRepInstance) -> Value {
    json!({
        "type": i.type_full_name,
        "attvalues": i.att_values.iter().map(att_value_to_json).collect::<Vec<_>>(),
        "points": i.points.iter().map(point_to_json).collect::<Vec<_>>(),
        "instances": i.sub_instances.iter().map(instance_to_json).collect::<Vec<_>>(),
    })
}

fn instance_from_json(v: &Value) -> Result<HepRepInstance, DecodeError> {
    let m = obj(v, "instance")?;
    Ok(HepRepInstance {
        type_full_name: string(m, "type")?,
        att_values: att_values(m)?,
        points: array(m, "points")?
            .iter()
            .map(point_from_json)
            .collect::<Result<_, _>>()?,
        sub_instances: array(m, "instances")?
            .iter()
            .map(instance_from_json)
            .collect::<Result<_, _>>()?,
    })
}

pub fn instance_tree_to_json(t: &InstanceTree) -> Value {
    json!({
        "name": t.name,
        "version": t.version,
        "typetreename": t.type_tree_name,
        "typetreeversion": t.type_tree_version,
        "instances": t.root_instances.iter().map(instance_to_json).collect::<Vec<_>>(),
    })
}

pub fn instance_tree_from_json(v: &Value) -> Result<InstanceTree, DecodeError> {
    let m = obj(v, "instancetree")?;
    Ok(InstanceTree {
        name: string(m, "name")?,
        version: string(m, "version")?,
        type_tree_name: string(m, "typetreename")?,
        type_tree_version: string(m, "typetreeversion")?,
        root_instances: array(m, "instances")?
            .iter()
            .map(instance_from_json)
            .collect::<Result<_, _>>()?,
    })
}

pub fn document_to_json(d: &HepRepDocument) -> Value {
    json!({
        "typetree": type_tree_to_json(&d.type_tree),
        "instancetree": instance_tree_to_json(&d.instance_tree),
    })
}

pub fn document_from_json(v: &Value) -> Result<HepRepDocument, DecodeError> {
    let m = obj(v, "document")?;
    let get = |k: &str| m.get(k).ok_or_else(|| DecodeError(format!("document needs `{k}`")));
    Ok(HepRepDocument {
        type_tree: type_tree_from_json(get("typetree")?)?,
        instance_tree: instance_tree_from_json(get("instancetree")?)?,
    })
}

pub fn tree_top_to_json(t: &InstanceTreeTop) -> Value {
    json!({
        "name": t.name,
        "version": t.version,
        "typetreename": t.type_tree_name,
        "typetreeversion": t.type_tree_version,
        "roots": t.roots.iter().map(|r| json!({"type": r.type_full_name, "count": r.descendant_count})).collect::<Vec<_>>(),
    })
}

pub fn tree_top_from_json(v: &Value) -> Result<InstanceTreeTop, DecodeError> {
    let m = obj(v, "instance tree top")?;
    let roots = array(m, "roots")?
        .iter()
        .map(|r| {
            let r = obj(r, "root")?;
            Ok(RootSummary {
                type_full_name: string(r, "type")?,
                descendant_count: r
                    .get("count")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| DecodeError("`count` must be a non-negative integer".into()))?
                    as usize,
            })
        })
        .collect::<Result<_, DecodeError>>()?;
    Ok(InstanceTreeTop {
        name: string(m, "name")?,
        version: string(m, "version")?,
        type_tree_name: string(m, "typetreename")?,
        type_tree_version: string(m, "typetreeversion")?,
        roots,
    })
}

pub const REQUEST_KEYS: [&str; 5] = ["typeNames", "attIncludes", "attExcludes", "predicates", "maxDepth"];

fn strings(v: &Value, key: &str) -> Result<Vec<String>, DecodeError> {
    v.as_array()
        .and_then(|a| {
            a.iter()
                .map(|s| s.as_str().map(String::from))
                .collect::<Option<Vec<_>>>()
        })
        .ok_or_else(|| DecodeError(format!("`{key}` must be an array of strings")))
}

/// Reads the request fields of `m`, ignoring keys not in [`REQUEST_KEYS`]
/// (callers check for strays).
pub fn request_from_map(m: &Map<String, Value>) -> Result<InstanceRequest, DecodeError> {
    let mut req = InstanceRequest::default();
    if let Some(v) = m.get("typeNames") {
        req.type_names = strings(v, "typeNames")?;
    }
    if let Some(v) = m.get("attIncludes") {
        req.att_includes = strings(v, "attIncludes")?;
    }
    if let Some(v) = m.get("attExcludes") {
        req.att_excludes = strings(v, "attExcludes")?;
    }
    if let Some(v) = m.get("predicates") {
        req.predicates = strings(v, "predicates")?
            .iter()
            .map(|s| s.parse::<Predicate>().map_err(|e| DecodeError(e.to_string())))
            .collect::<Result<_, _>>()?;
    }
    match m.get("maxDepth") {
        None | Some(Value::Null) => {}
        Some(v) => {
            let d = v
                .as_u64()
                .filter(|&d| d >= 1)
                .ok_or_else(|| DecodeError("`maxDepth` must be an integer >= 1".into()))?;
            req.max_depth = Some(d as usize);
        }
    }
    Ok(req)
}

pub fn request_to_json(r: &InstanceRequest) -> Value {
    let mut m = Map::new();
    if !r.type_names.is_empty() {
        m.insert("typeNames".into(), json!(r.type_names));
    }
    if !r.att_includes.is_empty() {
        m.insert("attIncludes".into(), json!(r.att_includes));
    }
    if !r.att_excludes.is_empty() {
        m.insert("attExcludes".into(), json!(r.att_excludes));
    }
    if !r.predicates.is_empty() {
        m.insert(
            "predicates".into(),
            json!(r.predicates.iter().map(|p| p.to_string()).collect::<Vec<_>>()),
        );
    }
    if let Some(d) = r.max_depth {
        m.insert("maxDepth".into(), json!(d));
    }
    Value::Object(m)
}

/// Failure to decode an action object. Bad paths are reported apart
/// from other shape errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionDecodeError {
    #[error("{0}")]
    Shape(String),
    #[error("invalid path `{0}`")]
    Path(String),
}

pub fn action_from_json(v: &Value) -> Result<ActionInvocation, ActionDecodeError> {
    let shape = |s: String| ActionDecodeError::Shape(s);
    let m = v
        .as_object()
        .ok_or_else(|| shape("`action` must be an object".into()))?;
    if let Some(k) = m.keys().find(|k| !["name", "targetPath", "args"].contains(&k.as_str())) {
        return Err(shape(format!("unknown action field `{k}`")));
    }
    let name = string(m, "name").map_err(|e| shape(e.0))?;
    let path_text = string(m, "targetPath").map_err(|e| shape(e.0))?;
    let target_path: InstancePath = path_text
        .parse()
        .map_err(|_| ActionDecodeError::Path(path_text.clone()))?;
    let mut inv = ActionInvocation::new(name, target_path);
    match m.get("args") {
        None | Some(Value::Null) => {}
        Some(Value::Object(args)) => {
            for (k, a) in args {
                let p = payload_from_untyped(a).map_err(|e| shape(format!("argument `{k}`: {e}")))?;
                inv.args.insert(k.clone(), p);
            }
        }
        Some(_) => return Err(shape("`args` must be an object".into())),
    }
    Ok(inv)
}

pub fn action_to_json(a: &ActionInvocation) -> Value {
    let args: Map<String, Value> = a.args.iter().map(|(k, v)| (k.clone(), payload_to_json(v))).collect();
    json!({"name": a.action_name, "targetPath": a.target_path.to_string(), "args": args})
}

pub fn action_descriptor_to_json(d: &ActionDescriptor) -> Value {
    json!({
        "name": d.name,
        "description": d.description,
        "args": d.args.iter().map(|a| json!({"name": a.name, "kind": a.kind.token()})).collect::<Vec<_>>(),
    })
}

pub fn report_to_json(r: &AlgorithmReport) -> Value {
    json!({"name": r.name, "status": r.status, "report": r.summary})
}
