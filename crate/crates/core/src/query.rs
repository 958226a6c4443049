//! Incremental download: type selection, attribute include/exclude and
//! attribute predicates applied when fetching instances.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{
    find_att, names_eq, resolve_on, AttDef, AttPayload, AttValue, AttValueKind, AttributeCategory, Color,
    HepRepDocument, HepRepInstance, InstancePath, InstanceTree, TypeTree,
};

/// Name of the attribute recording where a filtered instance sits in the
/// unfiltered tree.
pub const ORIG_PATH: &str = "origPath";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("bad predicate `{text}`: {reason}")]
    PredicateSyntax { text: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredicateOp {
    Exists,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl PredicateOp {
    pub fn symbol(self) -> &'static str {
        match self {
            PredicateOp::Exists => "exists",
            PredicateOp::Eq => "=",
            PredicateOp::Ne => "!=",
            PredicateOp::Lt => "<",
            PredicateOp::Le => "<=",
            PredicateOp::Gt => ">",
            PredicateOp::Ge => ">=",
        }
    }

    fn is_ordering(self) -> bool {
        matches!(
            self,
            PredicateOp::Lt | PredicateOp::Le | PredicateOp::Gt | PredicateOp::Ge
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub att_name: String,
    pub op: PredicateOp,
    pub operand: Option<AttPayload>,
}

impl Predicate {
    pub fn exists(name: impl Into<String>) -> Self {
        Predicate {
            att_name: name.into(),
            op: PredicateOp::Exists,
            operand: None,
        }
    }

    pub fn compare(name: impl Into<String>, op: PredicateOp, operand: AttPayload) -> Self {
        Predicate {
            att_name: name.into(),
            op,
            operand: Some(operand),
        }
    }

    fn check(&self) -> Result<(), QueryError> {
        match (&self.operand, self.op) {
            (None, PredicateOp::Exists) => Ok(()),
            (Some(_), PredicateOp::Exists) => Err(QueryError::BadRequest(format!(
                "`exists` on `{}` takes no operand",
                self.att_name
            ))),
            (None, op) => Err(QueryError::BadRequest(format!(
                "`{}` on `{}` needs an operand",
                op.symbol(),
                self.att_name
            ))),
            (Some(v), op) if op.is_ordering() && v.as_f64().is_none() => Err(QueryError::BadRequest(format!(
                "ordering `{}` on `{}` needs a numeric operand",
                op.symbol(),
                self.att_name
            ))),
            _ => Ok(()),
        }
    }

    /// Evaluates against a resolved value (None when the attribute is absent).
    pub fn matches(&self, value: Option<&AttPayload>) -> bool {
        let Some(value) = value else {
            return false;
        };
        let Some(operand) = &self.operand else {
            return self.op == PredicateOp::Exists;
        };
        if let (Some(a), Some(b)) = (value.as_f64(), operand.as_f64()) {
            // Integer/Real mix compares numerically; two integers compare exactly.
            let ord = match (value, operand) {
                (AttPayload::Integer(x), AttPayload::Integer(y)) => Some(x.cmp(y)),
                _ => a.partial_cmp(&b),
            };
            let Some(ord) = ord else { return false };
            return match self.op {
                PredicateOp::Eq => ord.is_eq(),
                PredicateOp::Ne => ord.is_ne(),
                PredicateOp::Lt => ord.is_lt(),
                PredicateOp::Le => ord.is_le(),
                PredicateOp::Gt => ord.is_gt(),
                PredicateOp::Ge => ord.is_ge(),
                PredicateOp::Exists => true,
            };
        }
        if value.kind() != operand.kind() {
            return false;
        }
        match self.op {
            PredicateOp::Eq => value == operand,
            PredicateOp::Ne => value != operand,
            _ => false,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.operand {
            None => write!(f, "{} exists", self.att_name),
            Some(v) => write!(f, "{}{}{}", self.att_name, self.op.symbol(), literal_text(v)),
        }
    }
}

fn literal_text(v: &AttPayload) -> String {
    match v {
        AttPayload::Text(s) => s.clone(),
        AttPayload::Integer(i) => i.to_string(),
        AttPayload::Real(r) => crate::xml::format_real(*r),
        AttPayload::Boolean(b) => b.to_string(),
        AttPayload::Color(c) => format!(
            "{},{},{}",
            crate::xml::format_real(c.r),
            crate::xml::format_real(c.g),
            crate::xml::format_real(c.b)
        ),
    }
}

const OP_CHARS: &[char] = &['<', '>', '=', '!'];

impl FromStr for Predicate {
    type Err = QueryError;

    /// `NAME OP LITERAL` with OP one of `exists = != < <= > >=`.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| QueryError::PredicateSyntax {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let trimmed = text.trim();
        let Some(op_start) = trimmed.find(OP_CHARS) else {
            let mut words = trimmed.split_whitespace();
            return match (words.next(), words.next(), words.next()) {
                (Some(name), Some(kw), None) if kw.eq_ignore_ascii_case("exists") => Ok(Predicate::exists(name)),
                _ => Err(err("expected NAME OP LITERAL or NAME exists")),
            };
        };
        let name = trimmed[..op_start].trim();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(err("missing or malformed attribute name"));
        }
        let rest = &trimmed[op_start..];
        let (op, len) = [
            ("<=", PredicateOp::Le),
            (">=", PredicateOp::Ge),
            ("!=", PredicateOp::Ne),
            ("<", PredicateOp::Lt),
            (">", PredicateOp::Gt),
            ("=", PredicateOp::Eq),
        ]
        .into_iter()
        .find(|(sym, _)| rest.starts_with(sym))
        .map(|(sym, op)| (op, sym.len()))
        .ok_or_else(|| err("unknown operator"))?;
        let literal = rest[len..].trim();
        if literal.is_empty() {
            return Err(err("missing literal"));
        }
        if literal.starts_with(OP_CHARS) {
            return Err(err("malformed operator"));
        }
        let pred = Predicate::compare(name, op, parse_literal(literal));
        pred.check().map_err(|e| match e {
            QueryError::BadRequest(reason) => QueryError::PredicateSyntax {
                text: text.to_string(),
                reason,
            },
            other => other,
        })?;
        Ok(pred)
    }
}

fn parse_literal(s: &str) -> AttPayload {
    if let Ok(i) = s.parse::<i64>() {
        return AttPayload::Integer(i);
    }
    if let Some(r) = s.parse::<f64>().ok().filter(|r| r.is_finite()) {
        return AttPayload::Real(r);
    }
    match s {
        "true" => return AttPayload::Boolean(true),
        "false" => return AttPayload::Boolean(false),
        _ => {}
    }
    let parts: Vec<_> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    if let [Ok(r), Ok(g), Ok(b)] = parts[..] {
        let c = Color::new(r, g, b);
        if c.is_valid() {
            return AttPayload::Color(c);
        }
    }
    AttPayload::Text(s.to_string())
}

/// What a client wants to download. Empty `type_names` means every type.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InstanceRequest {
    pub type_names: Vec<String>,
    pub att_includes: Vec<String>,
    pub att_excludes: Vec<String>,
    pub predicates: Vec<Predicate>,
    pub max_depth: Option<usize>,
}

impl InstanceRequest {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn for_types<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        InstanceRequest {
            type_names: names.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    pub fn with_predicate(mut self, p: Predicate) -> Self {
        self.predicates.push(p);
        self
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if let Some(n) = self
            .att_includes
            .iter()
            .find(|i| self.att_excludes.iter().any(|e| names_eq(i, e)))
        {
            return Err(QueryError::BadRequest(format!(
                "attribute `{n}` is both included and excluded"
            )));
        }
        if self.max_depth == Some(0) {
            return Err(QueryError::BadRequest("maxDepth must be at least 1".into()));
        }
        self.predicates.iter().try_for_each(Predicate::check)
    }

    pub fn wants_type(&self, full_name: &str) -> bool {
        self.type_names.is_empty() || self.type_names.iter().any(|t| names_eq(t, full_name))
    }

    /// Whether an attribute survives the include/exclude filter.
    pub fn keeps_attribute(&self, name: &str) -> bool {
        (self.att_includes.is_empty() || self.att_includes.iter().any(|i| names_eq(i, name)))
            && !self.att_excludes.iter().any(|e| names_eq(e, name))
    }
}

pub fn get_type_tree(doc: &HepRepDocument) -> TypeTree {
    doc.type_tree.clone()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootSummary {
    pub type_full_name: String,
    pub descendant_count: usize,
}

/// Identity of the instance tree plus one summary per root instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTreeTop {
    pub name: String,
    pub version: String,
    pub type_tree_name: String,
    pub type_tree_version: String,
    pub roots: Vec<RootSummary>,
}

pub fn get_instance_tree_top(doc: &HepRepDocument) -> InstanceTreeTop {
    let it = &doc.instance_tree;
    InstanceTreeTop {
        name: it.name.clone(),
        version: it.version.clone(),
        type_tree_name: it.type_tree_name.clone(),
        type_tree_version: it.type_tree_version.clone(),
        roots: it
            .root_instances
            .iter()
            .map(|r| RootSummary {
                type_full_name: r.type_full_name.clone(),
                descendant_count: r.descendant_count(),
            })
            .collect(),
    }
}

fn is_selected(types: &TypeTree, inst: &HepRepInstance, depth: usize, req: &InstanceRequest) -> bool {
    req.wants_type(&inst.type_full_name)
        && req.max_depth.is_none_or(|d| depth <= d)
        && req
            .predicates
            .iter()
            .all(|p| p.matches(resolve_on(types, inst, None, &p.att_name).map(|v| &v.value)))
}

/// Paths of every instance the request selects, in document order.
pub fn select(doc: &HepRepDocument, request: &InstanceRequest) -> Result<Vec<InstancePath>, QueryError> {
    request.validate()?;
    let mut out = Vec::new();
    doc.instance_tree.walk(|path, inst| {
        if is_selected(&doc.type_tree, inst, path.depth(), request) {
            out.push(path.clone());
        }
    });
    Ok(out)
}

/// Filtered copy of the instance tree. Selected instances keep their points
/// and (filtered) attributes; unselected ancestors of selected instances are
/// kept as bare skeletons. Every surviving instance gets an `origPath`.
pub fn get_instances(doc: &HepRepDocument, request: &InstanceRequest) -> Result<InstanceTree, QueryError> {
    let identity: Vec<usize> = (0..doc.instance_tree.root_instances.len()).collect();
    get_instances_mapped(doc, request, &identity)
}

/// As [`get_instances`], for a document holding only part of a larger tree:
/// `root_origin[i]` is the index root `i` has in the full tree, and is used
/// for `origPath`.
pub fn get_instances_mapped(
    doc: &HepRepDocument,
    request: &InstanceRequest,
    root_origin: &[usize],
) -> Result<InstanceTree, QueryError> {
    request.validate()?;
    let it = &doc.instance_tree;
    let mut roots = Vec::new();
    for (i, inst) in it.root_instances.iter().enumerate() {
        let orig = InstancePath::root(root_origin.get(i).copied().unwrap_or(i));
        if let Some(kept) = filter_node(&doc.type_tree, inst, orig, request) {
            roots.push(kept);
        }
    }
    Ok(InstanceTree {
        name: it.name.clone(),
        version: it.version.clone(),
        type_tree_name: it.type_tree_name.clone(),
        type_tree_version: it.type_tree_version.clone(),
        root_instances: roots,
    })
}

fn filter_node(
    types: &TypeTree,
    inst: &HepRepInstance,
    orig: InstancePath,
    req: &InstanceRequest,
) -> Option<HepRepInstance> {
    let subs: Vec<_> = inst
        .sub_instances
        .iter()
        .enumerate()
        .filter_map(|(i, s)| filter_node(types, s, orig.child(i), req))
        .collect();
    let selected = is_selected(types, inst, orig.depth(), req);
    if !selected && subs.is_empty() {
        return None;
    }
    let mut out = HepRepInstance::new(inst.type_full_name.clone());
    if selected {
        out.att_values = filter_atts(&inst.att_values, req);
        out.points = inst
            .points
            .iter()
            .map(|p| {
                let mut p = p.clone();
                p.att_values = filter_atts(&p.att_values, req);
                p
            })
            .collect();
    }
    out.att_values.push(orig_path_value(&orig));
    out.sub_instances = subs;
    Some(out)
}

fn filter_atts(values: &[AttValue], req: &InstanceRequest) -> Vec<AttValue> {
    values
        .iter()
        .filter(|v| !names_eq(&v.name, ORIG_PATH) && req.keeps_attribute(&v.name))
        .cloned()
        .collect()
}

pub fn orig_path_value(path: &InstancePath) -> AttValue {
    AttValue::text(ORIG_PATH, path.to_string())
}

/// The `origPath` carried by a query result instance.
pub fn orig_path_of(inst: &HepRepInstance) -> Option<InstancePath> {
    match find_att(&inst.att_values, ORIG_PATH).map(|v| &v.value) {
        Some(AttPayload::Text(s)) => s.parse().ok(),
        _ => None,
    }
}

/// Definition types can declare so clients see `origPath` as an association.
pub fn orig_path_def() -> AttDef {
    AttDef::new(
        ORIG_PATH,
        "Path of this instance in the unfiltered instance tree",
        AttributeCategory::Association,
        AttValueKind::Text,
        "",
    )
}
