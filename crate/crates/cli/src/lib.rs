//! Library half of the `heprep` binary: export, validation and offline query.

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use heprep::builder::FinishBuilder;
use heprep::event::{Session, SessionConfig, SessionError};
use heprep::model::{
    names_eq, resolve_on, validate_document, AttributeCategory, HepRepDocument, HepRepInstance, InstancePath,
    InstanceTree, TypeTree, Violation,
};
use heprep::query::{select, InstanceRequest, Predicate, QueryError};
use heprep::xml::{encode_value, parse_document, xml_builder, ParseError, XmlWriterConfig};
use thiserror::Error;

pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const VIOLATIONS: i32 = 2;
    pub const IO: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("event {event}: {source}")]
    Export { event: u64, source: SessionError },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            _ => exit::IO,
        }
    }
}

/// `event_000042.heprep.xml`
pub fn event_file_name(event_id: u64) -> String {
    format!("event_{event_id:06}.heprep.xml")
}

/// Writes events `1..=events` of `config.seed` to `out`, one file each,
/// through the streaming XML builder. Returns the paths written.
pub fn export(config: SessionConfig, events: u64, out: &Path, types: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(out).map_err(io_err(out))?;
    let request = InstanceRequest::for_types(types.iter().cloned());
    let mut session = Session::new(config);
    let mut written = Vec::new();
    for _ in 0..events {
        let id = session.next_event();
        let path = out.join(event_file_name(id));
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut b = xml_builder(BufWriter::new(file), XmlWriterConfig::default());
        let export_err = |source| CliError::Export { event: id, source };
        session.build_into(&request, &mut b).map_err(export_err)?;
        b.finish().map_err(|e| export_err(SessionError::Build(e.into())))?;
        log::debug!("wrote {}", path.display());
        written.push(path);
    }
    Ok(written)
}

pub fn read_document(path: &Path) -> Result<HepRepDocument, CliError> {
    let file = File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_document(io::BufReader::new(file)).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn validate_file(path: &Path) -> Result<Vec<Violation>, CliError> {
    Ok(validate_document(&read_document(path)?))
}

/// Request from `query` flags. A malformed predicate is a usage error.
pub fn request_from_flags(
    types: &[String],
    wheres: &[String],
    excludes: &[String],
) -> Result<InstanceRequest, CliError> {
    let mut req = InstanceRequest::for_types(types.iter().cloned());
    for w in wheres {
        let p: Predicate = w.parse().map_err(|e: QueryError| CliError::Usage(e.to_string()))?;
        req.predicates.push(p);
    }
    req.att_excludes = excludes.to_vec();
    req.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(req)
}

/// One output line per selected instance:
/// `path<TAB>typeFullName<TAB>Name=value...` with the Physics attributes in
/// scope, resolved, minus those the request drops.
pub fn query_lines(doc: &HepRepDocument, req: &InstanceRequest) -> Result<Vec<String>, QueryError> {
    let paths = select(doc, req)?;
    Ok(paths
        .iter()
        .map(|p| {
            let inst = heprep::model::instance_at(doc, p).expect("select returns live paths");
            instance_line(&doc.type_tree, p, inst, req)
        })
        .collect())
}

/// The same lines from a `getInstances` result: every instance that came
/// back with points is a selected one; bare skeletons are skipped.
pub fn result_lines(types: &TypeTree, tree: &InstanceTree, req: &InstanceRequest) -> Vec<String> {
    let mut out = Vec::new();
    for root in &tree.root_instances {
        collect_result(types, root, req, &mut out);
    }
    out
}

fn collect_result(types: &TypeTree, inst: &HepRepInstance, req: &InstanceRequest, out: &mut Vec<String>) {
    if !inst.points.is_empty() {
        let path = heprep::query::orig_path_of(inst).expect("query results carry origPath");
        out.push(instance_line(types, &path, inst, req));
    }
    for s in &inst.sub_instances {
        collect_result(types, s, req, out);
    }
}

fn physics_names(types: &TypeTree, full_name: &str) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for ty in types.type_chain(full_name).unwrap_or_default() {
        for d in &ty.att_defs {
            if d.category == AttributeCategory::Physics && !names.iter().any(|n| names_eq(n, &d.name)) {
                names.push(d.name.clone());
            }
        }
    }
    names
}

fn instance_line(types: &TypeTree, path: &InstancePath, inst: &HepRepInstance, req: &InstanceRequest) -> String {
    let mut line = format!("{path}\t{}", inst.type_full_name);
    for name in physics_names(types, &inst.type_full_name) {
        if !req.keeps_attribute(&name) {
            continue;
        }
        if let Some(v) = resolve_on(types, inst, None, &name) {
            line.push('\t');
            line.push_str(&name);
            line.push('=');
            line.push_str(&encode_value(&v.value));
        }
    }
    line
}
