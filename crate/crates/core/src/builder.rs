//! The abstract HepRep builder that fillers talk to, the in-memory back end,
//! and the filler registry that decides which fillers run for a request.

use std::fmt;

use thiserror::Error;

use crate::model::{
    is_xml_safe, names_eq, AttDef, AttValue, HepRepDocument, HepRepInstance, HepRepPoint, HepRepType, InstanceTree,
    TypeTree,
};
use crate::query::InstanceRequest;

#[derive(Debug, Error)]
pub enum BuilderError {
    #[error("builder state: `{call}` not allowed {state}")]
    State { call: &'static str, state: String },
    #[error("builder state: `{call}`: {reason}")]
    InvalidArgument { call: &'static str, reason: String },
    #[error("builder i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("builder is poisoned by an earlier error")]
    Poisoned,
}

impl BuilderError {
    /// Whether this is a grammar/state violation (as opposed to I/O).
    pub fn is_state(&self) -> bool {
        matches!(
            self,
            BuilderError::State { .. } | BuilderError::InvalidArgument { .. } | BuilderError::Poisoned
        )
    }
}

/// Tree-construction calls emitted by fillers. Back ends decide what the
/// calls turn into: an in-memory document, streamed XML, a wire response.
pub trait Builder {
    fn open_type_tree(&mut self, name: &str, version: &str) -> Result<(), BuilderError>;
    fn open_type(&mut self, name: &str) -> Result<(), BuilderError>;
    fn att_def(&mut self, def: &AttDef) -> Result<(), BuilderError>;
    fn type_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError>;
    fn close_type(&mut self) -> Result<(), BuilderError>;
    fn close_type_tree(&mut self) -> Result<(), BuilderError>;
    fn open_instance_tree(
        &mut self,
        name: &str,
        version: &str,
        type_tree_name: &str,
        type_tree_version: &str,
    ) -> Result<(), BuilderError>;
    fn open_instance(&mut self, type_full_name: &str) -> Result<(), BuilderError>;
    fn instance_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError>;
    fn point(&mut self, x: f64, y: f64, z: f64) -> Result<(), BuilderError>;
    fn point_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError>;
    fn close_instance(&mut self) -> Result<(), BuilderError>;
    fn close_instance_tree(&mut self) -> Result<(), BuilderError>;
}

/// The terminal call, kept off [`Builder`] so fillers never see it.
pub trait FinishBuilder: Builder {
    type Output;
    fn finish(&mut self) -> Result<Self::Output, BuilderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Start,
    TypeTree,
    BetweenTrees,
    InstanceTree,
    Closed,
    Finished,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Start => "before the type tree",
            Phase::TypeTree => "inside the type tree",
            Phase::BetweenTrees => "between the type tree and the instance tree",
            Phase::InstanceTree => "inside the instance tree",
            Phase::Closed => "after the instance tree",
            Phase::Finished => "after finish",
        })
    }
}

/// Tracks position in the builder call grammar:
///
/// ```text
/// Document     := openTypeTree Type* closeTypeTree
///                 openInstanceTree Instance* closeInstanceTree finish
/// Type         := openType (attDef | typeAttValue | Type)* closeType
/// Instance     := openInstance (instanceAttValue | Point | Instance)* closeInstance
/// Point        := point pointAttValue*
/// ```
///
/// Every back end drives one of these, so they accept and reject exactly the
/// same sequences. State is O(depth).
#[derive(Debug, Clone)]
pub struct Grammar {
    phase: Phase,
    type_depth: usize,
    /// Per open instance: whether the latest thing emitted into it is a point
    /// (so `pointAttValue` still has a target).
    instances: Vec<bool>,
    poisoned: bool,
}

impl Default for Grammar {
    fn default() -> Self {
        Grammar {
            phase: Phase::Start,
            type_depth: 0,
            instances: Vec::new(),
            poisoned: false,
        }
    }
}

impl Grammar {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn type_depth(&self) -> usize {
        self.type_depth
    }

    pub fn instance_depth(&self) -> usize {
        self.instances.len()
    }

    pub fn poison(&mut self) {
        self.poisoned = true;
    }

    fn state_desc(&self) -> String {
        match self.phase {
            Phase::TypeTree if self.type_depth > 0 => {
                format!("inside a type (depth {})", self.type_depth)
            }
            Phase::TypeTree => "inside the type tree outside any type".into(),
            Phase::InstanceTree if !self.instances.is_empty() => {
                format!("inside an instance (depth {})", self.instances.len())
            }
            Phase::InstanceTree => "inside the instance tree outside any instance".into(),
            p => p.to_string(),
        }
    }

    fn reject(&mut self, call: &'static str) -> BuilderError {
        let err = BuilderError::State {
            call,
            state: self.state_desc(),
        };
        self.poisoned = true;
        err
    }

    fn enter(&mut self, call: &'static str, ok: bool) -> Result<(), BuilderError> {
        if self.poisoned {
            return Err(BuilderError::Poisoned);
        }
        if ok {
            Ok(())
        } else {
            Err(self.reject(call))
        }
    }

    /// Argument check; failures poison the grammar like state errors.
    pub fn require(
        &mut self,
        call: &'static str,
        ok: bool,
        reason: impl FnOnce() -> String,
    ) -> Result<(), BuilderError> {
        if ok {
            Ok(())
        } else {
            self.poisoned = true;
            Err(BuilderError::InvalidArgument { call, reason: reason() })
        }
    }

    fn safe_text(&mut self, call: &'static str, s: &str) -> Result<(), BuilderError> {
        self.require(call, is_xml_safe(s), || {
            format!("`{}` contains characters XML cannot carry", s.escape_debug())
        })
    }

    pub fn open_type_tree(&mut self, name: &str, version: &str) -> Result<(), BuilderError> {
        self.enter("openTypeTree", self.phase == Phase::Start)?;
        self.safe_text("openTypeTree", name)?;
        self.safe_text("openTypeTree", version)?;
        self.phase = Phase::TypeTree;
        Ok(())
    }

    pub fn open_type(&mut self, name: &str) -> Result<(), BuilderError> {
        self.enter("openType", self.phase == Phase::TypeTree)?;
        self.require("openType", !name.is_empty() && !name.contains('/'), || {
            format!("type name `{name}` must be non-empty and contain no `/`")
        })?;
        self.safe_text("openType", name)?;
        self.type_depth += 1;
        Ok(())
    }

    pub fn att_def(&mut self, def: &AttDef) -> Result<(), BuilderError> {
        self.enter("attDef", self.phase == Phase::TypeTree && self.type_depth > 0)?;
        self.require("attDef", !def.name.is_empty(), || "attribute name is empty".into())?;
        for s in [&def.name, &def.description, &def.units] {
            self.safe_text("attDef", s)?;
        }
        Ok(())
    }

    pub fn type_att_value(&mut self, v: &AttValue) -> Result<(), BuilderError> {
        self.enter("typeAttValue", self.phase == Phase::TypeTree && self.type_depth > 0)?;
        self.check_value("typeAttValue", v)
    }

    pub fn close_type(&mut self) -> Result<(), BuilderError> {
        self.enter("closeType", self.phase == Phase::TypeTree && self.type_depth > 0)?;
        self.type_depth -= 1;
        Ok(())
    }

    pub fn close_type_tree(&mut self) -> Result<(), BuilderError> {
        self.enter("closeTypeTree", self.phase == Phase::TypeTree && self.type_depth == 0)?;
        self.phase = Phase::BetweenTrees;
        Ok(())
    }

    pub fn open_instance_tree(&mut self, names: [&str; 4]) -> Result<(), BuilderError> {
        self.enter("openInstanceTree", self.phase == Phase::BetweenTrees)?;
        for n in names {
            self.safe_text("openInstanceTree", n)?;
        }
        self.phase = Phase::InstanceTree;
        Ok(())
    }

    pub fn open_instance(&mut self, type_full_name: &str) -> Result<(), BuilderError> {
        self.enter("openInstance", self.phase == Phase::InstanceTree)?;
        self.safe_text("openInstance", type_full_name)?;
        if let Some(last) = self.instances.last_mut() {
            *last = false;
        }
        self.instances.push(false);
        Ok(())
    }

    pub fn instance_att_value(&mut self, v: &AttValue) -> Result<(), BuilderError> {
        self.enter("instanceAttValue", !self.instances.is_empty())?;
        self.check_value("instanceAttValue", v)?;
        *self.instances.last_mut().expect("checked") = false;
        Ok(())
    }

    pub fn point(&mut self, x: f64, y: f64, z: f64) -> Result<(), BuilderError> {
        self.enter("point", !self.instances.is_empty())?;
        self.require("point", x.is_finite() && y.is_finite() && z.is_finite(), || {
            format!("non-finite point ({x}, {y}, {z})")
        })?;
        *self.instances.last_mut().expect("checked") = true;
        Ok(())
    }

    pub fn point_att_value(&mut self, v: &AttValue) -> Result<(), BuilderError> {
        self.enter("pointAttValue", self.instances.last() == Some(&true))?;
        self.check_value("pointAttValue", v)
    }

    pub fn close_instance(&mut self) -> Result<(), BuilderError> {
        self.enter("closeInstance", !self.instances.is_empty())?;
        self.instances.pop();
        Ok(())
    }

    pub fn close_instance_tree(&mut self) -> Result<(), BuilderError> {
        self.enter(
            "closeInstanceTree",
            self.phase == Phase::InstanceTree && self.instances.is_empty(),
        )?;
        self.phase = Phase::Closed;
        Ok(())
    }

    pub fn finish(&mut self) -> Result<(), BuilderError> {
        self.enter("finish", self.phase == Phase::Closed)?;
        self.phase = Phase::Finished;
        Ok(())
    }

    fn check_value(&mut self, call: &'static str, v: &AttValue) -> Result<(), BuilderError> {
        self.require(call, !v.name.is_empty(), || "attribute name is empty".into())?;
        self.safe_text(call, &v.name)?;
        self.require(call, v.value.is_representable(), || {
            format!("value of `{}` is not representable: {:?}", v.name, v.value)
        })
    }
}

/// Builds a [`HepRepDocument`] in memory.
#[derive(Debug, Default)]
pub struct MemoryBuilder {
    grammar: Grammar,
    doc: HepRepDocument,
    types: Vec<HepRepType>,
    instances: Vec<HepRepInstance>,
}

pub fn memory_builder() -> MemoryBuilder {
    MemoryBuilder::default()
}

impl MemoryBuilder {
    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }
}

impl Builder for MemoryBuilder {
    fn open_type_tree(&mut self, name: &str, version: &str) -> Result<(), BuilderError> {
        self.grammar.open_type_tree(name, version)?;
        self.doc.type_tree = TypeTree {
            name: name.to_string(),
            version: version.to_string(),
            root_types: Vec::new(),
        };
        Ok(())
    }

    fn open_type(&mut self, name: &str) -> Result<(), BuilderError> {
        self.grammar.open_type(name)?;
        self.types.push(HepRepType::new(name));
        Ok(())
    }

    fn att_def(&mut self, def: &AttDef) -> Result<(), BuilderError> {
        self.grammar.att_def(def)?;
        self.types.last_mut().expect("grammar").att_defs.push(def.clone());
        Ok(())
    }

    fn type_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError> {
        self.grammar.type_att_value(value)?;
        self.types.last_mut().expect("grammar").att_values.push(value.clone());
        Ok(())
    }

    fn close_type(&mut self) -> Result<(), BuilderError> {
        self.grammar.close_type()?;
        let ty = self.types.pop().expect("grammar");
        match self.types.last_mut() {
            Some(parent) => parent.sub_types.push(ty),
            None => self.doc.type_tree.root_types.push(ty),
        }
        Ok(())
    }

    fn close_type_tree(&mut self) -> Result<(), BuilderError> {
        self.grammar.close_type_tree()
    }

    fn open_instance_tree(
        &mut self,
        name: &str,
        version: &str,
        type_tree_name: &str,
        type_tree_version: &str,
    ) -> Result<(), BuilderError> {
        self.grammar
            .open_instance_tree([name, version, type_tree_name, type_tree_version])?;
        self.doc.instance_tree = InstanceTree {
            name: name.to_string(),
            version: version.to_string(),
            type_tree_name: type_tree_name.to_string(),
            type_tree_version: type_tree_version.to_string(),
            root_instances: Vec::new(),
        };
        Ok(())
    }

    fn open_instance(&mut self, type_full_name: &str) -> Result<(), BuilderError> {
        self.grammar.open_instance(type_full_name)?;
        self.instances.push(HepRepInstance::new(type_full_name));
        Ok(())
    }

    fn instance_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError> {
        self.grammar.instance_att_value(value)?;
        self.instances
            .last_mut()
            .expect("grammar")
            .att_values
            .push(value.clone());
        Ok(())
    }

    fn point(&mut self, x: f64, y: f64, z: f64) -> Result<(), BuilderError> {
        self.grammar.point(x, y, z)?;
        self.instances
            .last_mut()
            .expect("grammar")
            .points
            .push(HepRepPoint::new(x, y, z));
        Ok(())
    }

    fn point_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError> {
        self.grammar.point_att_value(value)?;
        let inst = self.instances.last_mut().expect("grammar");
        inst.points.last_mut().expect("grammar").att_values.push(value.clone());
        Ok(())
    }

    fn close_instance(&mut self) -> Result<(), BuilderError> {
        self.grammar.close_instance()?;
        let inst = self.instances.pop().expect("grammar");
        match self.instances.last_mut() {
            Some(parent) => parent.sub_instances.push(inst),
            None => self.doc.instance_tree.root_instances.push(inst),
        }
        Ok(())
    }

    fn close_instance_tree(&mut self) -> Result<(), BuilderError> {
        self.grammar.close_instance_tree()
    }
}

impl FinishBuilder for MemoryBuilder {
    type Output = HepRepDocument;

    fn finish(&mut self) -> Result<HepRepDocument, BuilderError> {
        self.grammar.finish()?;
        Ok(std::mem::take(&mut self.doc))
    }
}

/// Experiment-side component that represents one kind of data from the
/// transient store `S`.
pub trait Filler<S>: Send + Sync {
    /// Used in error messages and logs.
    fn name(&self) -> &str;

    /// Type full names this filler owns. Sub-types of owned names are owned
    /// too.
    fn type_names(&self) -> Vec<String>;

    fn fill_types(&self, builder: &mut dyn Builder) -> Result<(), BuilderError>;

    fn fill_instances(
        &self,
        builder: &mut dyn Builder,
        store: &S,
        request: &InstanceRequest,
    ) -> Result<(), BuilderError>;

    /// How many root instances `fill_instances` would emit for `store`,
    /// without emitting them. Lets partial builds report paths in the
    /// complete tree.
    fn root_instance_count(&self, store: &S) -> usize;
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("filler `{filler}` owns no types")]
    EmptyOwnership { filler: String },
    #[error("type `{type_name}` is already owned by filler `{owner}`")]
    DuplicateTypeOwner { type_name: String, owner: String },
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("filler `{filler}`: {source}")]
    Filler {
        filler: String,
        #[source]
        source: BuilderError,
    },
    #[error(transparent)]
    Builder(#[from] BuilderError),
}

impl BuildError {
    pub fn filler(&self) -> Option<&str> {
        match self {
            BuildError::Filler { filler, .. } => Some(filler),
            BuildError::Builder(_) => None,
        }
    }
}

struct Entry<S> {
    filler: Box<dyn Filler<S>>,
    owned: Vec<String>,
}

/// Ordered register of fillers; each type full name has at most one owner.
pub struct FillerRegistry<S> {
    entries: Vec<Entry<S>>,
    pub type_tree_name: String,
    pub type_tree_version: String,
}

impl<S> Default for FillerRegistry<S> {
    fn default() -> Self {
        Self::new("HepRep", "1")
    }
}

fn is_under(name: &str, owned: &str) -> bool {
    names_eq(name, owned)
        || (name.len() > owned.len() && name.as_bytes()[owned.len()] == b'/' && names_eq(&name[..owned.len()], owned))
}

fn related(a: &str, b: &str) -> bool {
    is_under(a, b) || is_under(b, a)
}

impl<S> FillerRegistry<S> {
    pub fn new(type_tree_name: impl Into<String>, type_tree_version: impl Into<String>) -> Self {
        FillerRegistry {
            entries: Vec::new(),
            type_tree_name: type_tree_name.into(),
            type_tree_version: type_tree_version.into(),
        }
    }

    pub fn register(&mut self, filler: Box<dyn Filler<S>>) -> Result<(), RegistryError> {
        let owned = filler.type_names();
        if owned.is_empty() {
            return Err(RegistryError::EmptyOwnership {
                filler: filler.name().to_string(),
            });
        }
        for name in &owned {
            if let Some(e) = self.entries.iter().find(|e| e.owned.iter().any(|o| related(o, name))) {
                return Err(RegistryError::DuplicateTypeOwner {
                    type_name: name.clone(),
                    owner: e.filler.name().to_string(),
                });
            }
        }
        self.entries.push(Entry { filler, owned });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn fillers(&self) -> impl Iterator<Item = &dyn Filler<S>> {
        self.entries.iter().map(|e| e.filler.as_ref())
    }

    fn selected(&self, request: &InstanceRequest) -> Vec<bool> {
        self.entries
            .iter()
            .map(|e| {
                request.type_names.is_empty()
                    || e.owned.iter().any(|o| request.type_names.iter().any(|t| related(t, o)))
            })
            .collect()
    }

    /// Fillers whose instances a request needs: all of them for an empty type
    /// selection, otherwise those owning a requested name or one related to
    /// it by ancestry.
    pub fn fillers_for_request(&self, request: &InstanceRequest) -> Vec<&dyn Filler<S>> {
        self.entries
            .iter()
            .zip(self.selected(request))
            .filter(|(_, s)| *s)
            .map(|(e, _)| e.filler.as_ref())
            .collect()
    }

    /// Emits one complete document: every filler's types, then instances from
    /// the fillers the request selects.
    pub fn build_event(
        &self,
        store: &S,
        request: &InstanceRequest,
        builder: &mut dyn Builder,
    ) -> Result<BuildReport, BuildError> {
        builder.open_type_tree(&self.type_tree_name, &self.type_tree_version)?;
        for e in &self.entries {
            let mut guard = Guard::new(builder, e);
            e.filler
                .fill_types(&mut guard)
                .and_then(|_| guard.check_balanced())
                .map_err(|source| BuildError::Filler {
                    filler: e.filler.name().to_string(),
                    source,
                })?;
        }
        builder.close_type_tree()?;
        builder.open_instance_tree("Event", "1", &self.type_tree_name, &self.type_tree_version)?;
        let mut report = BuildReport::default();
        for (e, selected) in self.entries.iter().zip(self.selected(request)) {
            if !selected {
                report.root_origin_skip.push(e.filler.root_instance_count(store));
                continue;
            }
            let mut guard = Guard::new(builder, e);
            e.filler
                .fill_instances(&mut guard, store, request)
                .and_then(|_| guard.check_balanced())
                .map_err(|source| BuildError::Filler {
                    filler: e.filler.name().to_string(),
                    source,
                })?;
            let emitted = guard.roots;
            let base = report.full_root_count();
            report.root_origin.extend(base..base + emitted);
            report.root_origin_skip.push(emitted);
            report.invoked.push(e.filler.name().to_string());
        }
        builder.close_instance_tree()?;
        Ok(report)
    }
}

/// What [`FillerRegistry::build_event`] did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    /// Names of fillers whose `fill_instances` ran, in order.
    pub invoked: Vec<String>,
    /// For each emitted root instance, its index in the unfiltered tree.
    pub root_origin: Vec<usize>,
    root_origin_skip: Vec<usize>,
}

impl BuildReport {
    fn full_root_count(&self) -> usize {
        self.root_origin_skip.iter().sum()
    }
}

/// Wraps the real builder while one filler runs: checks the filler stays
/// inside the types it owns, leaves nothing open, and counts its roots.
struct Guard<'a, 'b, S> {
    inner: &'a mut dyn Builder,
    entry: &'b Entry<S>,
    type_path: Vec<String>,
    instance_depth: usize,
    roots: usize,
}

impl<'a, 'b, S> Guard<'a, 'b, S> {
    fn new(inner: &'a mut dyn Builder, entry: &'b Entry<S>) -> Self {
        Guard {
            inner,
            entry,
            type_path: Vec::new(),
            instance_depth: 0,
            roots: 0,
        }
    }

    fn owns(&self, full_name: &str) -> bool {
        self.entry.owned.iter().any(|o| is_under(full_name, o))
    }

    fn owns_or_contains(&self, full_name: &str) -> bool {
        self.entry.owned.iter().any(|o| related(full_name, o))
    }

    fn check_balanced(&self) -> Result<(), BuilderError> {
        if !self.type_path.is_empty() || self.instance_depth != 0 {
            return Err(BuilderError::State {
                call: "return",
                state: format!(
                    "with {} type(s) and {} instance(s) still open",
                    self.type_path.len(),
                    self.instance_depth
                ),
            });
        }
        Ok(())
    }
}

impl<S> Builder for Guard<'_, '_, S> {
    fn open_type_tree(&mut self, _: &str, _: &str) -> Result<(), BuilderError> {
        Err(BuilderError::State {
            call: "openTypeTree",
            state: "from a filler".into(),
        })
    }

    fn open_type(&mut self, name: &str) -> Result<(), BuilderError> {
        let full = if self.type_path.is_empty() {
            name.to_string()
        } else {
            format!("{}/{}", self.type_path.join("/"), name)
        };
        if !self.owns_or_contains(&full) {
            return Err(BuilderError::InvalidArgument {
                call: "openType",
                reason: format!("type `{full}` is not owned by this filler"),
            });
        }
        self.inner.open_type(name)?;
        self.type_path.push(name.to_string());
        Ok(())
    }

    fn att_def(&mut self, def: &AttDef) -> Result<(), BuilderError> {
        self.inner.att_def(def)
    }

    fn type_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError> {
        self.inner.type_att_value(value)
    }

    fn close_type(&mut self) -> Result<(), BuilderError> {
        if self.type_path.is_empty() {
            return Err(BuilderError::State {
                call: "closeType",
                state: "with no type opened by this filler".into(),
            });
        }
        self.inner.close_type()?;
        self.type_path.pop();
        Ok(())
    }

    fn close_type_tree(&mut self) -> Result<(), BuilderError> {
        Err(BuilderError::State {
            call: "closeTypeTree",
            state: "from a filler".into(),
        })
    }

    fn open_instance_tree(&mut self, _: &str, _: &str, _: &str, _: &str) -> Result<(), BuilderError> {
        Err(BuilderError::State {
            call: "openInstanceTree",
            state: "from a filler".into(),
        })
    }

    fn open_instance(&mut self, type_full_name: &str) -> Result<(), BuilderError> {
        if !self.owns(type_full_name) {
            return Err(BuilderError::InvalidArgument {
                call: "openInstance",
                reason: format!("type `{type_full_name}` is not owned by this filler"),
            });
        }
        self.inner.open_instance(type_full_name)?;
        if self.instance_depth == 0 {
            self.roots += 1;
        }
        self.instance_depth += 1;
        Ok(())
    }

    fn instance_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError> {
        self.inner.instance_att_value(value)
    }

    fn point(&mut self, x: f64, y: f64, z: f64) -> Result<(), BuilderError> {
        self.inner.point(x, y, z)
    }

    fn point_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError> {
        self.inner.point_att_value(value)
    }

    fn close_instance(&mut self) -> Result<(), BuilderError> {
        if self.instance_depth == 0 {
            return Err(BuilderError::State {
                call: "closeInstance",
                state: "with no instance opened by this filler".into(),
            });
        }
        self.inner.close_instance()?;
        self.instance_depth -= 1;
        Ok(())
    }

    fn close_instance_tree(&mut self) -> Result<(), BuilderError> {
        Err(BuilderError::State {
            call: "closeInstanceTree",
            state: "from a filler".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_document;

    fn minimal(b: &mut impl FinishBuilder) -> Result<(), BuilderError> {
        b.open_type_tree("t", "1")?;
        b.open_type("Track")?;
        b.close_type()?;
        b.close_type_tree()?;
        b.open_instance_tree("e", "1", "t", "1")?;
        b.open_instance("Track")?;
        b.point(0.0, 0.0, 0.0)?;
        b.point(1.0, 1.0, 1.0)?;
        b.close_instance()?;
        b.close_instance_tree()
    }

    #[test]
    fn minimal_sequence() {
        let mut b = memory_builder();
        minimal(&mut b).unwrap();
        let doc = b.finish().unwrap();
        assert_eq!(doc.type_tree.root_types.len(), 1);
        assert_eq!(doc.instance_tree.root_instances.len(), 1);
        assert_eq!(doc.instance_tree.root_instances[0].points.len(), 2);
        assert!(validate_document(&doc).is_empty());
    }

    #[test]
    fn instance_before_tree_is_rejected() {
        let mut b = memory_builder();
        b.open_type_tree("t", "1").unwrap();
        b.close_type_tree().unwrap();
        assert!(matches!(
            b.open_instance("Track"),
            Err(BuilderError::State {
                call: "openInstance",
                ..
            })
        ));
        // poisoned afterwards
        assert!(matches!(
            b.open_instance_tree("e", "1", "t", "1"),
            Err(BuilderError::Poisoned)
        ));
    }

    #[test]
    fn finish_before_closing_instance_tree() {
        let mut b = memory_builder();
        b.open_type_tree("t", "1").unwrap();
        b.close_type_tree().unwrap();
        b.open_instance_tree("e", "1", "t", "1").unwrap();
        assert!(matches!(b.finish(), Err(BuilderError::State { call: "finish", .. })));
    }

    #[test]
    fn finish_is_terminal() {
        let mut b = memory_builder();
        minimal(&mut b).unwrap();
        b.finish().unwrap();
        assert!(b.finish().unwrap_err().is_state());
        assert!(b.open_type_tree("t", "1").unwrap_err().is_state());
    }

    #[test]
    fn point_att_value_needs_a_fresh_point() {
        let mut g = Grammar::default();
        g.open_type_tree("t", "1").unwrap();
        g.close_type_tree().unwrap();
        g.open_instance_tree(["e", "1", "t", "1"]).unwrap();
        g.open_instance("T").unwrap();
        let v = AttValue::int("n", 1);
        assert!(g.clone().point_att_value(&v).is_err());
        g.point(0.0, 0.0, 0.0).unwrap();
        g.point_att_value(&v).unwrap();
        g.point_att_value(&v).unwrap();
        let mut after_value = g.clone();
        after_value.instance_att_value(&v).unwrap();
        assert!(after_value.point_att_value(&v).is_err());
        let mut after_child = g.clone();
        after_child.open_instance("T").unwrap();
        after_child.close_instance().unwrap();
        assert!(after_child.point_att_value(&v).is_err());
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let mut g = Grammar::default();
        g.open_type_tree("t", "1").unwrap();
        assert!(g.clone().open_type("A/B").is_err());
        assert!(g.clone().open_type("").is_err());
        let mut g2 = Grammar::default();
        g2.open_type_tree("t", "1").unwrap();
        g2.close_type_tree().unwrap();
        g2.open_instance_tree(["e", "1", "t", "1"]).unwrap();
        g2.open_instance("T").unwrap();
        assert!(g2.clone().point(f64::NAN, 0.0, 0.0).is_err());
        assert!(g2
            .clone()
            .instance_att_value(&AttValue::real("x", f64::INFINITY))
            .is_err());
        assert!(g2
            .clone()
            .instance_att_value(&AttValue::color("c", crate::model::Color::new(2.0, 0.0, 0.0)))
            .is_err());
    }

    struct Dummy {
        name: &'static str,
        owns: Vec<&'static str>,
        misbehave: bool,
    }

    impl Filler<usize> for Dummy {
        fn name(&self) -> &str {
            self.name
        }
        fn type_names(&self) -> Vec<String> {
            self.owns.iter().map(|s| s.to_string()).collect()
        }
        fn fill_types(&self, b: &mut dyn Builder) -> Result<(), BuilderError> {
            for t in &self.owns {
                b.open_type(t)?;
                b.close_type()?;
            }
            Ok(())
        }
        fn fill_instances(&self, b: &mut dyn Builder, n: &usize, _: &InstanceRequest) -> Result<(), BuilderError> {
            if self.misbehave {
                return b.point(0.0, 0.0, 0.0);
            }
            for _ in 0..*n {
                b.open_instance(self.owns[0])?;
                b.close_instance()?;
            }
            Ok(())
        }
        fn root_instance_count(&self, n: &usize) -> usize {
            *n
        }
    }

    fn dummy(name: &'static str, owns: &[&'static str]) -> Box<Dummy> {
        Box::new(Dummy {
            name,
            owns: owns.to_vec(),
            misbehave: false,
        })
    }

    #[test]
    fn registration_rules() {
        let mut reg = FillerRegistry::<usize>::default();
        reg.register(dummy("tracks", &["Track"])).unwrap();
        reg.register(dummy("cal", &["CalCrystal"])).unwrap();
        assert_eq!(reg.len(), 2);
        let names: Vec<_> = reg.fillers().map(|f| f.name().to_string()).collect();
        assert_eq!(names, ["tracks", "cal"]);
        assert!(matches!(
            reg.register(dummy("again", &["track"])),
            Err(RegistryError::DuplicateTypeOwner { .. })
        ));
        assert!(matches!(
            reg.register(dummy("hits", &["Track/TrackHit"])),
            Err(RegistryError::DuplicateTypeOwner { .. })
        ));
        assert!(matches!(
            reg.register(dummy("none", &[])),
            Err(RegistryError::EmptyOwnership { .. })
        ));
        assert_eq!(reg.len(), 2);
    }

    #[test]
    fn request_selects_fillers() {
        let mut reg = FillerRegistry::<usize>::default();
        reg.register(dummy("tracks", &["Track"])).unwrap();
        reg.register(dummy("cal", &["CalCrystal"])).unwrap();
        let pick = |names: &[&str]| -> Vec<String> {
            reg.fillers_for_request(&InstanceRequest::for_types(names.iter().copied()))
                .iter()
                .map(|f| f.name().to_string())
                .collect()
        };
        assert_eq!(pick(&["Track"]), ["tracks"]);
        assert_eq!(pick(&["Track/TrackHit"]), ["tracks"]);
        assert_eq!(pick(&[]), ["tracks", "cal"]);
        assert!(pick(&["Foo"]).is_empty());
        assert!(pick(&["Tracks"]).is_empty());
    }

    #[test]
    fn build_event_keeps_types_complete_and_maps_roots() {
        let mut reg = FillerRegistry::<usize>::default();
        reg.register(dummy("tracks", &["Track"])).unwrap();
        reg.register(dummy("cal", &["CalCrystal"])).unwrap();
        let mut b = memory_builder();
        let report = reg
            .build_event(&3, &InstanceRequest::for_types(["CalCrystal"]), &mut b)
            .unwrap();
        let doc = b.finish().unwrap();
        assert_eq!(doc.type_tree.full_names(), ["Track", "CalCrystal"]);
        assert_eq!(doc.instance_tree.root_instances.len(), 3);
        assert_eq!(report.invoked, ["cal"]);
        assert_eq!(report.root_origin, [3, 4, 5]);
        assert!(validate_document(&doc).is_empty());
    }

    #[test]
    fn misbehaving_filler_is_named() {
        let mut reg = FillerRegistry::<usize>::default();
        reg.register(dummy("tracks", &["Track"])).unwrap();
        reg.register(Box::new(Dummy {
            name: "broken",
            owns: vec!["Cal"],
            misbehave: true,
        }))
        .unwrap();
        let err = reg
            .build_event(&1, &InstanceRequest::all(), &mut memory_builder())
            .unwrap_err();
        assert_eq!(err.filler(), Some("broken"));
        assert!(matches!(
            err,
            BuildError::Filler {
                source: BuilderError::State { call: "point", .. },
                ..
            }
        ));
    }

    #[test]
    fn filler_cannot_emit_foreign_types() {
        struct Rogue;
        impl Filler<usize> for Rogue {
            fn name(&self) -> &str {
                "rogue"
            }
            fn type_names(&self) -> Vec<String> {
                vec!["Mine".into()]
            }
            fn fill_types(&self, b: &mut dyn Builder) -> Result<(), BuilderError> {
                b.open_type("Yours")
            }
            fn fill_instances(&self, _: &mut dyn Builder, _: &usize, _: &InstanceRequest) -> Result<(), BuilderError> {
                Ok(())
            }
            fn root_instance_count(&self, _: &usize) -> usize {
                0
            }
        }
        let mut reg = FillerRegistry::<usize>::default();
        reg.register(Box::new(Rogue)).unwrap();
        let err = reg
            .build_event(&1, &InstanceRequest::all(), &mut memory_builder())
            .unwrap_err();
        assert_eq!(err.filler(), Some("rogue"));
    }
}
