//! The hierarchical representable model: a type tree describing what kinds of
//! things exist, and an instance tree holding one event's concrete
//! representables (points plus attributes).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Name comparison used for types and attributes throughout the crate.
/// Storage keeps the original case.
pub fn names_eq(a: &str, b: &str) -> bool {
    if a.is_ascii() && b.is_ascii() {
        a.eq_ignore_ascii_case(b)
    } else {
        a.to_lowercase() == b.to_lowercase()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid instance path `{0}`")]
    InvalidPath(String),
    #[error("invalid point index {index} on instance `{path}`")]
    InvalidPoint { path: String, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttributeCategory {
    Draw,
    Physics,
    PickAction,
    Association,
}

impl AttributeCategory {
    pub const ALL: [AttributeCategory; 4] = [
        AttributeCategory::Draw,
        AttributeCategory::Physics,
        AttributeCategory::PickAction,
        AttributeCategory::Association,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeCategory::Draw => "Draw",
            AttributeCategory::Physics => "Physics",
            AttributeCategory::PickAction => "PickAction",
            AttributeCategory::Association => "Association",
        }
    }
}

impl FromStr for AttributeCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttributeCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown attribute category `{s}`"))
    }
}

impl fmt::Display for AttributeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttValueKind {
    Text,
    Integer,
    Real,
    Boolean,
    Color,
}

impl AttValueKind {
    pub const ALL: [AttValueKind; 5] = [
        AttValueKind::Text,
        AttValueKind::Integer,
        AttValueKind::Real,
        AttValueKind::Boolean,
        AttValueKind::Color,
    ];

    /// Token used by the XML and JSON encodings.
    pub fn token(self) -> &'static str {
        match self {
            AttValueKind::Text => "text",
            AttValueKind::Integer => "int",
            AttValueKind::Real => "real",
            AttValueKind::Boolean => "bool",
            AttValueKind::Color => "color",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        AttValueKind::ALL.into_iter().find(|k| k.token() == token)
    }
}

impl fmt::Display for AttValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// RGB colour, each component in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Color {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Color {
    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Color { r, g, b }
    }

    pub fn is_valid(&self) -> bool {
        [self.r, self.g, self.b]
            .iter()
            .all(|c| c.is_finite() && (0.0..=1.0).contains(c))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttPayload {
    Text(String),
    Integer(i64),
    Real(f64),
    Boolean(bool),
    Color(Color),
}

impl AttPayload {
    pub fn kind(&self) -> AttValueKind {
        match self {
            AttPayload::Text(_) => AttValueKind::Text,
            AttPayload::Integer(_) => AttValueKind::Integer,
            AttPayload::Real(_) => AttValueKind::Real,
            AttPayload::Boolean(_) => AttValueKind::Boolean,
            AttPayload::Color(_) => AttValueKind::Color,
        }
    }

    /// Numeric view used by predicates; integers widen to reals.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttPayload::Integer(i) => Some(*i as f64),
            AttPayload::Real(r) => Some(*r),
            _ => None,
        }
    }

    /// Whether the payload can be written out and read back (finite reals,
    /// colour components in range, text free of XML-forbidden characters).
    pub fn is_representable(&self) -> bool {
        match self {
            AttPayload::Text(s) => is_xml_safe(s),
            AttPayload::Real(r) => r.is_finite(),
            AttPayload::Color(c) => c.is_valid(),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttDef {
    pub name: String,
    pub description: String,
    pub category: AttributeCategory,
    pub kind: AttValueKind,
    pub units: String,
}

impl AttDef {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        category: AttributeCategory,
        kind: AttValueKind,
        units: impl Into<String>,
    ) -> Self {
        AttDef {
            name: name.into(),
            description: description.into(),
            category,
            kind,
            units: units.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttValue {
    pub name: String,
    pub value: AttPayload,
}

impl AttValue {
    pub fn new(name: impl Into<String>, value: AttPayload) -> Self {
        AttValue {
            name: name.into(),
            value,
        }
    }

    pub fn text(name: impl Into<String>, v: impl Into<String>) -> Self {
        Self::new(name, AttPayload::Text(v.into()))
    }

    pub fn int(name: impl Into<String>, v: i64) -> Self {
        Self::new(name, AttPayload::Integer(v))
    }

    pub fn real(name: impl Into<String>, v: f64) -> Self {
        Self::new(name, AttPayload::Real(v))
    }

    pub fn boolean(name: impl Into<String>, v: bool) -> Self {
        Self::new(name, AttPayload::Boolean(v))
    }

    pub fn color(name: impl Into<String>, c: Color) -> Self {
        Self::new(name, AttPayload::Color(c))
    }
}

/// Whether every character may appear in an XML 1.0 document.
pub fn is_xml_safe(s: &str) -> bool {
    s.chars()
        .all(|c| matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..))
}

/// Last match wins when a node carries the same name twice.
pub(crate) fn find_att<'a>(values: &'a [AttValue], name: &str) -> Option<&'a AttValue> {
    values.iter().rev().find(|v| names_eq(&v.name, name))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HepRepPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub att_values: Vec<AttValue>,
}

impl HepRepPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        HepRepPoint {
            x,
            y,
            z,
            att_values: Vec::new(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HepRepType {
    pub name: String,
    pub att_defs: Vec<AttDef>,
    pub att_values: Vec<AttValue>,
    pub sub_types: Vec<HepRepType>,
}

impl HepRepType {
    pub fn new(name: impl Into<String>) -> Self {
        HepRepType {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn att_def(&self, name: &str) -> Option<&AttDef> {
        self.att_defs.iter().find(|d| names_eq(&d.name, name))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TypeTree {
    pub name: String,
    pub version: String,
    pub root_types: Vec<HepRepType>,
}

impl TypeTree {
    /// Visits every type depth-first with its full name.
    pub fn walk<'a>(&'a self, mut f: impl FnMut(&str, &'a HepRepType)) {
        fn go<'a>(prefix: &str, ty: &'a HepRepType, f: &mut impl FnMut(&str, &'a HepRepType)) {
            let full = join_type_name(prefix, &ty.name);
            f(&full, ty);
            for sub in &ty.sub_types {
                go(&full, sub, f);
            }
        }
        for ty in &self.root_types {
            go("", ty, &mut f);
        }
    }

    /// All full names in depth-first order.
    pub fn full_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(|full, _| out.push(full.to_string()));
        out
    }

    /// The chain of types from the root down to `full_name`, if it resolves.
    pub fn type_chain(&self, full_name: &str) -> Option<Vec<&HepRepType>> {
        let mut chain = Vec::new();
        let mut level = &self.root_types;
        for segment in full_name.split('/') {
            let ty = level.iter().find(|t| names_eq(&t.name, segment))?;
            chain.push(ty);
            level = &ty.sub_types;
        }
        Some(chain)
    }
}

pub(crate) fn join_type_name(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}/{name}")
    }
}

/// Parent full name of `Track/TrackHit` is `Track`; roots have none.
pub fn parent_type_name(full_name: &str) -> Option<&str> {
    full_name.rsplit_once('/').map(|(p, _)| p)
}

pub fn find_type<'a>(tree: &'a TypeTree, full_name: &str) -> Option<&'a HepRepType> {
    tree.type_chain(full_name).and_then(|c| c.last().copied())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HepRepInstance {
    pub type_full_name: String,
    pub att_values: Vec<AttValue>,
    pub points: Vec<HepRepPoint>,
    pub sub_instances: Vec<HepRepInstance>,
}

impl HepRepInstance {
    pub fn new(type_full_name: impl Into<String>) -> Self {
        HepRepInstance {
            type_full_name: type_full_name.into(),
            ..Default::default()
        }
    }

    /// Number of instances below this one.
    pub fn descendant_count(&self) -> usize {
        self.sub_instances.iter().map(|s| 1 + s.descendant_count()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InstanceTree {
    pub name: String,
    pub version: String,
    pub type_tree_name: String,
    pub type_tree_version: String,
    pub root_instances: Vec<HepRepInstance>,
}

impl InstanceTree {
    /// Depth-first pre-order traversal with each instance's path.
    pub fn walk<'a>(&'a self, mut f: impl FnMut(&InstancePath, &'a HepRepInstance)) {
        fn go<'a>(
            path: &mut Vec<usize>,
            inst: &'a HepRepInstance,
            f: &mut impl FnMut(&InstancePath, &'a HepRepInstance),
        ) {
            f(&InstancePath(path.clone()), inst);
            for (i, sub) in inst.sub_instances.iter().enumerate() {
                path.push(i);
                go(path, sub, f);
                path.pop();
            }
        }
        for (i, inst) in self.root_instances.iter().enumerate() {
            go(&mut vec![i], inst, &mut f);
        }
    }

    pub fn instance_count(&self) -> usize {
        self.root_instances.iter().map(|r| 1 + r.descendant_count()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HepRepDocument {
    pub type_tree: TypeTree,
    pub instance_tree: InstanceTree,
}

/// Sibling indices from the instance-tree root, written `0/3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstancePath(pub Vec<usize>);

impl InstancePath {
    pub fn root(index: usize) -> Self {
        InstancePath(vec![index])
    }

    pub fn child(&self, index: usize) -> Self {
        let mut v = self.0.clone();
        v.push(index);
        InstancePath(v)
    }

    pub fn parent(&self) -> Option<InstancePath> {
        (self.0.len() > 1).then(|| InstancePath(self.0[..self.0.len() - 1].to_vec()))
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for InstancePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, idx) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{idx}")?;
        }
        Ok(())
    }
}

impl FromStr for InstancePath {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(ModelError::InvalidPath(s.to_string()));
        }
        s.split('/')
            .map(|seg| {
                if seg.is_empty() || !seg.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(ModelError::InvalidPath(s.to_string()));
                }
                seg.parse::<usize>().map_err(|_| ModelError::InvalidPath(s.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(InstancePath)
    }
}

pub fn instance_at<'a>(doc: &'a HepRepDocument, path: &InstancePath) -> Result<&'a HepRepInstance, ModelError> {
    instance_in_tree(&doc.instance_tree, path)
}

pub fn instance_in_tree<'a>(tree: &'a InstanceTree, path: &InstancePath) -> Result<&'a HepRepInstance, ModelError> {
    let invalid = || ModelError::InvalidPath(path.to_string());
    let (first, rest) = path.0.split_first().ok_or_else(invalid)?;
    let mut node = tree.root_instances.get(*first).ok_or_else(invalid)?;
    for idx in rest {
        node = node.sub_instances.get(*idx).ok_or_else(invalid)?;
    }
    Ok(node)
}

/// Resolves an attribute for an instance (or one of its points), looking at
/// point values, then the instance, then its type and each ancestor type.
pub fn resolve_attribute<'a>(
    doc: &'a HepRepDocument,
    path: &InstancePath,
    point_index: Option<usize>,
    name: &str,
) -> Result<Option<&'a AttValue>, ModelError> {
    let inst = instance_at(doc, path)?;
    let point = match point_index {
        Some(i) => Some(inst.points.get(i).ok_or_else(|| ModelError::InvalidPoint {
            path: path.to_string(),
            index: i,
        })?),
        None => None,
    };
    Ok(resolve_on(&doc.type_tree, inst, point, name))
}

/// Resolution against a type tree for an instance already in hand.
pub fn resolve_on<'a>(
    types: &'a TypeTree,
    inst: &'a HepRepInstance,
    point: Option<&'a HepRepPoint>,
    name: &str,
) -> Option<&'a AttValue> {
    if let Some(v) = point.and_then(|p| find_att(&p.att_values, name)) {
        return Some(v);
    }
    if let Some(v) = find_att(&inst.att_values, name) {
        return Some(v);
    }
    let chain = types.type_chain(&inst.type_full_name)?;
    chain.iter().rev().find_map(|ty| find_att(&ty.att_values, name))
}

/// Nearest AttDef in scope for a type: the type itself, its ancestors, then
/// the predefined draw attributes.
pub fn att_def_in_scope(chain: &[&HepRepType], name: &str) -> Option<AttDef> {
    chain
        .iter()
        .rev()
        .find_map(|ty| ty.att_def(name).cloned())
        .or_else(|| default_draw_definitions().into_iter().find(|d| names_eq(&d.name, name)))
}

/// Allowed values of the `DrawAs` attribute.
pub const DRAW_AS_SHAPES: [&str; 4] = ["Point", "Line", "Polygon", "Prism"];

/// The predefined drawing attributes every type may use without declaring.
pub fn default_draw_definitions() -> Vec<AttDef> {
    use AttValueKind::*;
    let draw = AttributeCategory::Draw;
    vec![
        AttDef::new(
            "DrawAs",
            "Shape drawn from the points: Point, Line, Polygon or Prism",
            draw,
            Text,
            "",
        ),
        AttDef::new("Color", "Drawing colour", draw, Color, ""),
        AttDef::new("LineWidth", "Line width", draw, Real, "pixels"),
        AttDef::new("MarkerSize", "Marker size", draw, Real, "pixels"),
        AttDef::new("Visibility", "Whether the instance is drawn", draw, Boolean, ""),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    TypeNotFound,
    BadSubtype,
    TreeMismatch,
    DupTypeName,
    DupAttDef,
    KindMismatch,
    NonfinitePoint,
}

impl ViolationKind {
    pub fn code(self) -> &'static str {
        match self {
            ViolationKind::TypeNotFound => "TYPE_NOT_FOUND",
            ViolationKind::BadSubtype => "BAD_SUBTYPE",
            ViolationKind::TreeMismatch => "TREE_MISMATCH",
            ViolationKind::DupTypeName => "DUP_TYPE_NAME",
            ViolationKind::DupAttDef => "DUP_ATTDEF",
            ViolationKind::KindMismatch => "KIND_MISMATCH",
            ViolationKind::NonfinitePoint => "NONFINITE_POINT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Type full name or instance path the violation was found at.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.kind.code(), self.location, self.message)
    }
}

pub fn validate_document(doc: &HepRepDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    let tt = &doc.type_tree;
    let it = &doc.instance_tree;

    if it.type_tree_name != tt.name || it.type_tree_version != tt.version {
        out.push(Violation {
            kind: ViolationKind::TreeMismatch,
            location: it.name.clone(),
            message: format!(
                "instance tree refers to type tree ({}, {}) but document has ({}, {})",
                it.type_tree_name, it.type_tree_version, tt.name, tt.version
            ),
        });
    }

    validate_types(&tt.root_types, "", &mut Vec::new(), &mut out);

    it.walk(|path, inst| {
        let loc = path.to_string();
        let chain = tt.type_chain(&inst.type_full_name);
        match &chain {
            None => out.push(Violation {
                kind: ViolationKind::TypeNotFound,
                location: loc.clone(),
                message: format!("type `{}` is not in the type tree", inst.type_full_name),
            }),
            Some(chain) => {
                check_kinds(chain, &inst.att_values, &loc, &mut out);
                for (i, p) in inst.points.iter().enumerate() {
                    check_kinds(chain, &p.att_values, &format!("{loc} point {i}"), &mut out);
                }
                for (i, sub) in inst.sub_instances.iter().enumerate() {
                    let is_child =
                        parent_type_name(&sub.type_full_name).is_some_and(|p| names_eq(p, &inst.type_full_name));
                    if !is_child && tt.type_chain(&sub.type_full_name).is_some() {
                        out.push(Violation {
                            kind: ViolationKind::BadSubtype,
                            location: path.child(i).to_string(),
                            message: format!(
                                "`{}` is not a subtype of parent type `{}`",
                                sub.type_full_name, inst.type_full_name
                            ),
                        });
                    }
                }
            }
        }
        for (i, p) in inst.points.iter().enumerate() {
            if !p.is_finite() {
                out.push(Violation {
                    kind: ViolationKind::NonfinitePoint,
                    location: format!("{loc} point {i}"),
                    message: format!("non-finite coordinates ({}, {}, {})", p.x, p.y, p.z),
                });
            }
        }
    });
    out
}

fn validate_types<'a>(
    level: &'a [HepRepType],
    prefix: &str,
    chain: &mut Vec<&'a HepRepType>,
    out: &mut Vec<Violation>,
) {
    for (i, ty) in level.iter().enumerate() {
        let full = join_type_name(prefix, &ty.name);
        if level[..i].iter().any(|s| names_eq(&s.name, &ty.name)) {
            out.push(Violation {
                kind: ViolationKind::DupTypeName,
                location: full.clone(),
                message: format!("type `{full}` is defined more than once"),
            });
        }
        for (j, def) in ty.att_defs.iter().enumerate() {
            if ty.att_defs[..j].iter().any(|d| names_eq(&d.name, &def.name)) {
                out.push(Violation {
                    kind: ViolationKind::DupAttDef,
                    location: full.clone(),
                    message: format!("attribute `{}` is defined more than once", def.name),
                });
            }
        }
        chain.push(ty);
        check_kinds(chain, &ty.att_values, &full, out);
        validate_types(&ty.sub_types, &full, chain, out);
        chain.pop();
    }
}

fn check_kinds(chain: &[&HepRepType], values: &[AttValue], loc: &str, out: &mut Vec<Violation>) {
    for v in values {
        if let Some(def) = att_def_in_scope(chain, &v.name) {
            if def.kind != v.value.kind() {
                out.push(Violation {
                    kind: ViolationKind::KindMismatch,
                    location: loc.to_string(),
                    message: format!(
                        "attribute `{}` is {} but its definition says {}",
                        v.name,
                        v.value.kind(),
                        def.kind
                    ),
                });
            }
        }
    }
}
