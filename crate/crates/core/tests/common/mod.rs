//! Random documents, builder call sequences and requests, plus a
//! brute-force reference implementation of instance filtering.
#![allow(dead_code)]

use std::collections::BTreeSet;

use heprep::builder::{Builder, BuilderError};
use heprep::model::{
    AttDef, AttPayload, AttValue, AttValueKind, AttributeCategory, Color, HepRepDocument, HepRepInstance, HepRepPoint,
    HepRepType, InstanceTree, TypeTree,
};
use heprep::query::{InstanceRequest, Predicate, PredicateOp};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const TEXTS: &[&str] = &[
    "",
    "e-",
    "e+",
    "a<b&\"c\"",
    "tab\there\nnewline\r",
    "ünïcødé ✓",
    "  padded  ",
    "it's",
    "x>y",
    "plain",
];

const TYPE_NAMES: &[&str] = &["Track", "Cal", "Hit", "Vertex", "Tile", "Jet", "Cluster"];

/// Attribute names with the one kind each is always used with.
pub const ATTS: &[(&str, AttValueKind)] = &[
    ("Momentum", AttValueKind::Real),
    ("Energy", AttValueKind::Real),
    ("NHits", AttValueKind::Integer),
    ("Label", AttValueKind::Text),
    ("Flag", AttValueKind::Boolean),
    ("Tint", AttValueKind::Color),
    ("Color", AttValueKind::Color),
    ("DrawAs", AttValueKind::Text),
    ("LineWidth", AttValueKind::Real),
];

pub fn text(rng: &mut TestRng) -> String {
    TEXTS.choose(rng).unwrap().to_string()
}

pub fn real(rng: &mut TestRng) -> f64 {
    match rng.random_range(0..6) {
        0 => *[0.0, -0.0, 0.1, 1e21, 1e-300, 5e-324, f64::MAX, -2.5, 1.0 / 3.0, 100.0]
            .choose(rng)
            .unwrap(),
        1 => loop {
            let v = f64::from_bits(rng.random());
            if v.is_finite() {
                break v;
            }
        },
        2 => rng.random_range(-10i32..10) as f64,
        _ => rng.random_range(-1000.0..1000.0),
    }
}

pub fn payload(rng: &mut TestRng, kind: AttValueKind) -> AttPayload {
    match kind {
        AttValueKind::Text => AttPayload::Text(text(rng)),
        AttValueKind::Integer => AttPayload::Integer(match rng.random_range(0..4) {
            0 => *[i64::MIN, i64::MAX, 0, -1].choose(rng).unwrap(),
            _ => rng.random_range(-20..20),
        }),
        AttValueKind::Real => AttPayload::Real(real(rng)),
        AttValueKind::Boolean => AttPayload::Boolean(rng.random()),
        AttValueKind::Color => AttPayload::Color(Color::new(unit(rng), unit(rng), unit(rng))),
    }
}

fn unit(rng: &mut TestRng) -> f64 {
    match rng.random_range(0..3) {
        0 => *[0.0, 1.0, 0.5].choose(rng).unwrap(),
        _ => rng.random(),
    }
}

fn category(rng: &mut TestRng) -> AttributeCategory {
    *AttributeCategory::ALL.choose(rng).unwrap()
}

fn kind(rng: &mut TestRng) -> AttValueKind {
    *AttValueKind::ALL.choose(rng).unwrap()
}

/// Name from the pool, sometimes with its case changed.
fn att_name(rng: &mut TestRng, name: &str) -> String {
    if rng.random_ratio(1, 6) {
        name.to_lowercase()
    } else {
        name.to_string()
    }
}

pub fn att_value(rng: &mut TestRng) -> AttValue {
    let (name, k) = *ATTS.choose(rng).unwrap();
    AttValue::new(att_name(rng, name), payload(rng, k))
}

fn att_values(rng: &mut TestRng, max: usize) -> Vec<AttValue> {
    let n = rng.random_range(0..=max);
    (0..n).map(|_| att_value(rng)).collect()
}

fn random_type(rng: &mut TestRng, name: &str, depth: usize) -> HepRepType {
    let mut ty = HepRepType::new(name);
    let n_defs = rng.random_range(0..=3);
    for &(n, k) in ATTS.choose_multiple(rng, n_defs) {
        ty.att_defs.push(AttDef::new(n, text(rng), category(rng), k, text(rng)));
    }
    ty.att_values = att_values(rng, 3);
    if depth < 2 {
        let n_sub = rng.random_range(0..=2);
        for sub in TYPE_NAMES.choose_multiple(rng, n_sub) {
            ty.sub_types.push(random_type(rng, sub, depth + 1));
        }
    }
    ty
}

fn point(rng: &mut TestRng) -> HepRepPoint {
    let mut p = HepRepPoint::new(real(rng), real(rng), real(rng));
    if rng.random_ratio(1, 4) {
        p.att_values = att_values(rng, 2);
    }
    p
}

fn random_instance(rng: &mut TestRng, tt: &TypeTree, full: &str, depth: usize) -> HepRepInstance {
    let mut inst = HepRepInstance::new(full);
    inst.att_values = att_values(rng, 3);
    let n_pts = rng.random_range(0..=3);
    inst.points = (0..n_pts).map(|_| point(rng)).collect();
    let ty = heprep::model::find_type(tt, full).expect("instance type exists");
    if depth < 3 && !ty.sub_types.is_empty() {
        let n = rng.random_range(0..=3);
        for _ in 0..n {
            let sub = ty.sub_types.choose(rng).unwrap();
            let name = format!("{full}/{}", sub.name);
            inst.sub_instances.push(random_instance(rng, tt, &name, depth + 1));
        }
    }
    inst
}

/// A random document that validates cleanly.
pub fn random_document(rng: &mut TestRng) -> HepRepDocument {
    let n_roots = rng.random_range(1..=3);
    let root_types = TYPE_NAMES
        .choose_multiple(rng, n_roots)
        .map(|n| random_type(rng, n, 0))
        .collect();
    let type_tree = TypeTree {
        name: text(rng),
        version: text(rng),
        root_types,
    };
    let names = type_tree.full_names();
    let n_inst = rng.random_range(0..=5);
    let root_instances = (0..n_inst)
        .map(|_| {
            let full = names.choose(rng).unwrap().clone();
            random_instance(rng, &type_tree, &full, 0)
        })
        .collect();
    let instance_tree = InstanceTree {
        name: text(rng),
        version: text(rng),
        type_tree_name: type_tree.name.clone(),
        type_tree_version: type_tree.version.clone(),
        root_instances,
    };
    HepRepDocument {
        type_tree,
        instance_tree,
    }
}

/// Drives `b` through a random legal call sequence, short of `finish`.
/// The same seed always produces the same calls.
pub fn random_calls(rng: &mut TestRng, b: &mut dyn Builder) -> Result<(), BuilderError> {
    b.open_type_tree(&text(rng), &text(rng))?;
    let n = rng.random_range(0..=4);
    for _ in 0..n {
        random_type_calls(rng, b, 0)?;
    }
    b.close_type_tree()?;
    b.open_instance_tree(&text(rng), &text(rng), &text(rng), &text(rng))?;
    let n = rng.random_range(0..=5);
    for _ in 0..n {
        random_instance_calls(rng, b, 0)?;
    }
    b.close_instance_tree()
}

fn random_type_calls(rng: &mut TestRng, b: &mut dyn Builder, depth: usize) -> Result<(), BuilderError> {
    b.open_type(TYPE_NAMES.choose(rng).unwrap())?;
    let n = rng.random_range(0..=6);
    for _ in 0..n {
        match rng.random_range(0..5) {
            0 | 1 => {
                let (name, _) = *ATTS.choose(rng).unwrap();
                b.att_def(&AttDef::new(name, text(rng), category(rng), kind(rng), text(rng)))?
            }
            2 | 3 => {
                let k = kind(rng);
                let base = ATTS.choose(rng).unwrap().0;
                let name = att_name(rng, base);
                b.type_att_value(&AttValue::new(name, payload(rng, k)))?
            }
            _ if depth < 3 => random_type_calls(rng, b, depth + 1)?,
            _ => {}
        }
    }
    b.close_type()
}

fn random_instance_calls(rng: &mut TestRng, b: &mut dyn Builder, depth: usize) -> Result<(), BuilderError> {
    b.open_instance(TYPE_NAMES.choose(rng).unwrap())?;
    let n = rng.random_range(0..=8);
    let mut after_point = false;
    for _ in 0..n {
        match rng.random_range(0..6) {
            0 | 1 => {
                let k = kind(rng);
                b.instance_att_value(&AttValue::new("Label", payload(rng, k)))?;
                after_point = false;
            }
            2 | 3 => {
                b.point(real(rng), real(rng), real(rng))?;
                after_point = true;
            }
            4 if after_point => b.point_att_value(&att_value(rng))?,
            5 if depth < 3 => {
                random_instance_calls(rng, b, depth + 1)?;
                after_point = false;
            }
            _ => {}
        }
    }
    b.close_instance()
}

/// A random request over the names used in `doc`.
pub fn random_request(rng: &mut TestRng, doc: &HepRepDocument) -> InstanceRequest {
    let names = doc.type_tree.full_names();
    let mut req = InstanceRequest::default();
    if rng.random_bool(0.6) {
        let n = rng.random_range(1..=names.len().min(3));
        req.type_names = names
            .choose_multiple(rng, n)
            .map(|n| {
                if rng.random_ratio(1, 5) {
                    n.to_uppercase()
                } else {
                    n.clone()
                }
            })
            .collect();
    }
    let pool: Vec<&str> = ATTS.iter().map(|a| a.0).chain(["origPath", "Nope"]).collect();
    let mut picked: Vec<&str> = pool.choose_multiple(rng, 4).copied().collect();
    if rng.random_bool(0.3) {
        let k = rng.random_range(1..=2);
        req.att_includes = picked.drain(..k).map(String::from).collect();
    }
    if rng.random_bool(0.3) {
        let k = rng.random_range(1..=2);
        req.att_excludes = picked.drain(..k).map(String::from).collect();
    }
    let n_pred = rng.random_range(0..=2);
    for _ in 0..n_pred {
        req.predicates.push(random_predicate(rng));
    }
    if rng.random_bool(0.3) {
        req.max_depth = Some(rng.random_range(1..=3));
    }
    req
}

pub fn random_predicate(rng: &mut TestRng) -> Predicate {
    let (name, k) = *ATTS.choose(rng).unwrap();
    let name = att_name(rng, name);
    let op = *[
        PredicateOp::Exists,
        PredicateOp::Eq,
        PredicateOp::Ne,
        PredicateOp::Lt,
        PredicateOp::Le,
        PredicateOp::Gt,
        PredicateOp::Ge,
    ]
    .choose(rng)
    .unwrap();
    match op {
        PredicateOp::Exists => Predicate::exists(name),
        PredicateOp::Eq | PredicateOp::Ne => {
            let kind = if rng.random_bool(0.7) { k } else { kind(rng) };
            Predicate::compare(name, op, payload(rng, kind))
        }
        _ => {
            let operand = if rng.random_bool(0.5) {
                AttPayload::Integer(rng.random_range(-5..5))
            } else {
                AttPayload::Real(rng.random_range(-500.0..500.0))
            };
            Predicate::compare(name, op, operand)
        }
    }
}

// ---- reference filter -------------------------------------------------

fn eq_ci(a: &str, b: &str) -> bool {
    a.to_lowercase() == b.to_lowercase()
}

fn last_named<'a>(values: &'a [AttValue], name: &str) -> Option<&'a AttPayload> {
    let mut found = None;
    for v in values {
        if eq_ci(&v.name, name) {
            found = Some(&v.value);
        }
    }
    found
}

/// Types from the root down to `full`, located by splitting the name.
fn chain<'a>(tt: &'a TypeTree, full: &str) -> Vec<&'a HepRepType> {
    let mut out = Vec::new();
    let mut level = &tt.root_types;
    for part in full.split('/') {
        let Some(t) = level.iter().find(|t| eq_ci(&t.name, part)) else {
            return Vec::new();
        };
        out.push(t);
        level = &t.sub_types;
    }
    out
}

pub fn reference_resolve<'a>(tt: &'a TypeTree, inst: &'a HepRepInstance, name: &str) -> Option<&'a AttPayload> {
    if let Some(v) = last_named(&inst.att_values, name) {
        return Some(v);
    }
    let types = chain(tt, &inst.type_full_name);
    for t in types.iter().rev() {
        if let Some(v) = last_named(&t.att_values, name) {
            return Some(v);
        }
    }
    None
}

fn numeric(p: &AttPayload) -> Option<f64> {
    match p {
        AttPayload::Integer(i) => Some(*i as f64),
        AttPayload::Real(r) => Some(*r),
        _ => None,
    }
}

fn reference_match(p: &Predicate, value: Option<&AttPayload>) -> bool {
    let Some(v) = value else { return false };
    let Some(operand) = &p.operand else {
        return p.op == PredicateOp::Exists;
    };
    let ordering = match (v, operand) {
        (AttPayload::Integer(a), AttPayload::Integer(b)) => Some(a.cmp(b)),
        _ => match (numeric(v), numeric(operand)) {
            (Some(a), Some(b)) => a.partial_cmp(&b),
            _ => None,
        },
    };
    match p.op {
        PredicateOp::Exists => true,
        PredicateOp::Eq => match ordering {
            Some(o) => o.is_eq(),
            None => v == operand,
        },
        PredicateOp::Ne => match ordering {
            Some(o) => o.is_ne(),
            None => v.kind() == operand.kind() && v != operand,
        },
        PredicateOp::Lt => ordering.is_some_and(|o| o.is_lt()),
        PredicateOp::Le => ordering.is_some_and(|o| o.is_le()),
        PredicateOp::Gt => ordering.is_some_and(|o| o.is_gt()),
        PredicateOp::Ge => ordering.is_some_and(|o| o.is_ge()),
    }
}

fn flatten<'a>(list: &'a [HepRepInstance], prefix: &[usize], out: &mut Vec<(Vec<usize>, &'a HepRepInstance)>) {
    for (i, inst) in list.iter().enumerate() {
        let mut path = prefix.to_vec();
        path.push(i);
        out.push((path.clone(), inst));
        flatten(&inst.sub_instances, &path, out);
    }
}

fn path_text(p: &[usize]) -> String {
    p.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("/")
}

/// Paths the request selects, computed straight from the definition.
pub fn reference_selected(doc: &HepRepDocument, req: &InstanceRequest) -> Vec<Vec<usize>> {
    let mut all = Vec::new();
    flatten(&doc.instance_tree.root_instances, &[], &mut all);
    all.into_iter()
        .filter(|(path, inst)| {
            (req.type_names.is_empty() || req.type_names.iter().any(|t| eq_ci(t, &inst.type_full_name)))
                && req.max_depth.is_none_or(|d| path.len() <= d)
                && req
                    .predicates
                    .iter()
                    .all(|p| reference_match(p, reference_resolve(&doc.type_tree, inst, &p.att_name)))
        })
        .map(|(p, _)| p)
        .collect()
}

fn keep_att(req: &InstanceRequest, name: &str) -> bool {
    if eq_ci(name, "origPath") {
        return false;
    }
    let included = req.att_includes.is_empty() || req.att_includes.iter().any(|i| eq_ci(i, name));
    included && !req.att_excludes.iter().any(|e| eq_ci(e, name))
}

/// Brute-force `get_instances`: select by definition, then keep every
/// prefix of a selected path.
pub fn reference_filter(doc: &HepRepDocument, req: &InstanceRequest) -> InstanceTree {
    let selected: BTreeSet<Vec<usize>> = reference_selected(doc, req).into_iter().collect();
    let mut keep: BTreeSet<Vec<usize>> = BTreeSet::new();
    for p in &selected {
        for k in 1..=p.len() {
            keep.insert(p[..k].to_vec());
        }
    }
    fn rebuild(
        list: &[HepRepInstance],
        prefix: &[usize],
        selected: &BTreeSet<Vec<usize>>,
        keep: &BTreeSet<Vec<usize>>,
        req: &InstanceRequest,
    ) -> Vec<HepRepInstance> {
        let mut out = Vec::new();
        for (i, inst) in list.iter().enumerate() {
            let mut path = prefix.to_vec();
            path.push(i);
            if !keep.contains(&path) {
                continue;
            }
            let mut node = HepRepInstance::new(inst.type_full_name.clone());
            if selected.contains(&path) {
                node.att_values = inst
                    .att_values
                    .iter()
                    .filter(|v| keep_att(req, &v.name))
                    .cloned()
                    .collect();
                node.points = inst
                    .points
                    .iter()
                    .map(|p| HepRepPoint {
                        x: p.x,
                        y: p.y,
                        z: p.z,
                        att_values: p
                            .att_values
                            .iter()
                            .filter(|v| keep_att(req, &v.name))
                            .cloned()
                            .collect(),
                    })
                    .collect();
            }
            node.att_values.push(AttValue::text("origPath", path_text(&path)));
            node.sub_instances = rebuild(&inst.sub_instances, &path, selected, keep, req);
            out.push(node);
        }
        out
    }
    let it = &doc.instance_tree;
    InstanceTree {
        name: it.name.clone(),
        version: it.version.clone(),
        type_tree_name: it.type_tree_name.clone(),
        type_tree_version: it.type_tree_version.clone(),
        root_instances: rebuild(&it.root_instances, &[], &selected, &keep, req),
    }
}

/// Total instances in a tree.
pub fn count_instances(list: &[HepRepInstance]) -> usize {
    list.iter().map(|i| 1 + count_instances(&i.sub_instances)).sum()
}
