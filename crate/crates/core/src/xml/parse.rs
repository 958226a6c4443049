use std::io::{BufRead, BufReader, Read};

use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};
use thiserror::Error;

use crate::builder::{memory_builder, Builder, BuilderError, FinishBuilder, MemoryBuilder};
use crate::model::{AttDef, AttValue, AttValueKind, AttributeCategory, HepRepDocument};

use super::{decode_value, parse_real, HEPREP_VERSION};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("XML syntax error at byte {position}: {message}")]
    XmlSyntax { position: u64, message: String },
    #[error("schema error at byte {position}: {message}")]
    Schema { position: u64, message: String },
    #[error("unsupported heprep version `{0}` (expected {HEPREP_VERSION})")]
    Version(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Elem {
    HepRep,
    TypeTree,
    Type,
    AttDef,
    AttValue,
    InstanceTree,
    Instance,
    Point,
}

impl Elem {
    fn from_name(name: &[u8]) -> Option<Elem> {
        Some(match name {
            b"heprep" => Elem::HepRep,
            b"typetree" => Elem::TypeTree,
            b"type" => Elem::Type,
            b"attdef" => Elem::AttDef,
            b"attvalue" => Elem::AttValue,
            b"instancetree" => Elem::InstanceTree,
            b"instance" => Elem::Instance,
            b"point" => Elem::Point,
            _ => return None,
        })
    }

    fn allowed_attrs(self) -> &'static [&'static str] {
        match self {
            Elem::HepRep => &["version"],
            Elem::TypeTree => &["name", "version"],
            Elem::Type => &["name"],
            Elem::AttDef => &["name", "desc", "category", "kind", "units"],
            Elem::AttValue => &["name", "kind", "value"],
            Elem::InstanceTree => &["name", "version", "typetreename", "typetreeversion"],
            Elem::Instance => &["type"],
            Elem::Point => &["x", "y", "z"],
        }
    }
}

struct Attrs {
    names: &'static [&'static str],
    values: Vec<Option<String>>,
}

impl Attrs {
    fn get(&self, name: &str) -> Option<&str> {
        let i = self.names.iter().position(|n| *n == name)?;
        self.values[i].as_deref()
    }
}

struct Parser<R> {
    reader: Reader<R>,
    builder: MemoryBuilder,
    stack: Vec<Elem>,
    /// Whether the typetree / instancetree sections have been seen.
    seen_type_tree: bool,
    seen_instance_tree: bool,
    root_done: bool,
}

impl<R: BufRead> Parser<R> {
    fn schema(&self, message: impl Into<String>) -> ParseError {
        ParseError::Schema {
            position: self.reader.buffer_position(),
            message: message.into(),
        }
    }

    fn syntax(&self, e: impl std::fmt::Display) -> ParseError {
        ParseError::XmlSyntax {
            position: self.reader.error_position(),
            message: e.to_string(),
        }
    }

    fn build(&self, r: Result<(), BuilderError>) -> Result<(), ParseError> {
        r.map_err(|e| self.schema(e.to_string()))
    }

    fn attrs(&self, elem: Elem, start: &BytesStart<'_>) -> Result<Attrs, ParseError> {
        let names = elem.allowed_attrs();
        let mut values = vec![None; names.len()];
        for a in start.attributes() {
            let a = a.map_err(|e| self.syntax(e))?;
            let key = a.key.into_inner();
            let i = names
                .iter()
                .position(|n| *n == key)
                .ok_or_else(|| self.schema(format!("unknown attribute `{key}` on <{}>", names_elem(elem))))?;
            if values[i].is_some() {
                return Err(self.syntax(format!("duplicate attribute `{key}`")));
            }
            let v = a
                .normalized_value(XmlVersion::Implicit1_0)
                .map_err(|e| self.syntax(e))?;
            values[i] = Some(v.into_owned());
        }
        Ok(Attrs { names, values })
    }

    fn required<'a>(&self, attrs: &'a Attrs, name: &str, elem: Elem) -> Result<&'a str, ParseError> {
        attrs
            .get(name)
            .ok_or_else(|| self.schema(format!("<{}> is missing `{name}`", names_elem(elem))))
    }

    fn real(&self, attrs: &Attrs, name: &str, elem: Elem) -> Result<f64, ParseError> {
        let s = self.required(attrs, name, elem)?;
        parse_real(s).ok_or_else(|| self.schema(format!("bad number `{s}` for `{name}`")))
    }

    fn att_value(&self, attrs: &Attrs) -> Result<AttValue, ParseError> {
        let name = self.required(attrs, "name", Elem::AttValue)?;
        let kind = self.required(attrs, "kind", Elem::AttValue)?;
        let kind = AttValueKind::from_token(kind).ok_or_else(|| self.schema(format!("bad kind `{kind}`")))?;
        let value = self.required(attrs, "value", Elem::AttValue)?;
        let payload =
            decode_value(kind, value).ok_or_else(|| self.schema(format!("bad {kind} value `{value}` for `{name}`")))?;
        Ok(AttValue::new(name, payload))
    }

    fn open(&mut self, start: &BytesStart<'_>, empty: bool) -> Result<(), ParseError> {
        let name = start.name();
        let elem = Elem::from_name(name.into_inner().as_bytes())
            .ok_or_else(|| self.schema(format!("unknown element <{}>", name.into_inner())))?;
        let parent = self.stack.last().copied();
        let placed = match (parent, elem) {
            (None, Elem::HepRep) => !self.root_done,
            (Some(Elem::HepRep), Elem::TypeTree) => !self.seen_type_tree,
            (Some(Elem::HepRep), Elem::InstanceTree) => self.seen_type_tree && !self.seen_instance_tree,
            (Some(Elem::TypeTree), Elem::Type)
            | (Some(Elem::Type), Elem::Type | Elem::AttDef | Elem::AttValue)
            | (Some(Elem::InstanceTree), Elem::Instance)
            | (Some(Elem::Instance), Elem::Instance | Elem::AttValue | Elem::Point)
            | (Some(Elem::Point), Elem::AttValue) => true,
            _ => false,
        };
        if !placed {
            return Err(self.schema(format!(
                "<{}> not allowed {}",
                names_elem(elem),
                parent.map_or("at top level".to_string(), |p| format!("inside <{}>", names_elem(p)))
            )));
        }
        let attrs = self.attrs(elem, start)?;
        match elem {
            Elem::HepRep => {
                let v = self.required(&attrs, "version", elem)?;
                if v != HEPREP_VERSION {
                    return Err(ParseError::Version(v.to_string()));
                }
            }
            Elem::TypeTree => {
                self.seen_type_tree = true;
                let n = self.required(&attrs, "name", elem)?;
                let v = self.required(&attrs, "version", elem)?;
                let r = self.builder.open_type_tree(n, v);
                self.build(r)?;
            }
            Elem::Type => {
                let n = self.required(&attrs, "name", elem)?;
                let r = self.builder.open_type(n);
                self.build(r)?;
            }
            Elem::AttDef => {
                let name = self.required(&attrs, "name", elem)?;
                let cat = self.required(&attrs, "category", elem)?;
                let category: AttributeCategory = cat.parse().map_err(|e: String| self.schema(e))?;
                let kind = self.required(&attrs, "kind", elem)?;
                let kind = AttValueKind::from_token(kind).ok_or_else(|| self.schema(format!("bad kind `{kind}`")))?;
                let def = AttDef::new(
                    name,
                    attrs.get("desc").unwrap_or(""),
                    category,
                    kind,
                    attrs.get("units").unwrap_or(""),
                );
                let r = self.builder.att_def(&def);
                self.build(r)?;
            }
            Elem::AttValue => {
                let v = self.att_value(&attrs)?;
                let r = match parent {
                    Some(Elem::Type) => self.builder.type_att_value(&v),
                    Some(Elem::Point) => self.builder.point_att_value(&v),
                    _ => self.builder.instance_att_value(&v),
                };
                self.build(r)?;
            }
            Elem::InstanceTree => {
                self.seen_instance_tree = true;
                let n = self.required(&attrs, "name", elem)?;
                let v = self.required(&attrs, "version", elem)?;
                let tn = self.required(&attrs, "typetreename", elem)?;
                let tv = self.required(&attrs, "typetreeversion", elem)?;
                let r = self.builder.open_instance_tree(n, v, tn, tv);
                self.build(r)?;
            }
            Elem::Instance => {
                let t = self.required(&attrs, "type", elem)?;
                let r = self.builder.open_instance(t);
                self.build(r)?;
            }
            Elem::Point => {
                let x = self.real(&attrs, "x", elem)?;
                let y = self.real(&attrs, "y", elem)?;
                let z = self.real(&attrs, "z", elem)?;
                let r = self.builder.point(x, y, z);
                self.build(r)?;
            }
        }
        self.stack.push(elem);
        if empty {
            self.close()?;
        }
        Ok(())
    }

    fn close(&mut self) -> Result<(), ParseError> {
        let elem = self.stack.pop().expect("reader checks end names");
        let r = match elem {
            Elem::HepRep => {
                if !self.seen_instance_tree {
                    return Err(self.schema(if self.seen_type_tree {
                        "missing <instancetree>"
                    } else {
                        "missing <typetree>"
                    }));
                }
                self.root_done = true;
                Ok(())
            }
            Elem::TypeTree => self.builder.close_type_tree(),
            Elem::Type => self.builder.close_type(),
            Elem::InstanceTree => self.builder.close_instance_tree(),
            Elem::Instance => self.builder.close_instance(),
            Elem::AttDef | Elem::AttValue | Elem::Point => Ok(()),
        };
        self.build(r)
    }

    fn run(mut self) -> Result<HepRepDocument, ParseError> {
        let mut buf = Vec::new();
        loop {
            let event = match self.reader.read_event_into(&mut buf) {
                Ok(e) => e,
                Err(e) => return Err(self.syntax(e)),
            };
            match event {
                Event::Start(s) => {
                    let s = s.into_owned();
                    self.open(&s, false)?
                }
                Event::Empty(s) => {
                    let s = s.into_owned();
                    self.open(&s, true)?
                }
                Event::End(_) => self.close()?,
                Event::Text(t) => {
                    if !t.xml10_content().chars().all(|c| c.is_ascii_whitespace()) {
                        return Err(self.schema("unexpected text content"));
                    }
                }
                Event::Decl(_) | Event::Comment(_) => {}
                Event::CData(_) | Event::GeneralRef(_) => return Err(self.schema("unexpected text content")),
                Event::PI(_) | Event::DocType(_) => {
                    return Err(self.schema("processing instructions and DTDs are not supported"))
                }
                Event::Eof => break,
            }
            buf.clear();
        }
        if !self.stack.is_empty() {
            return Err(ParseError::XmlSyntax {
                position: self.reader.buffer_position(),
                message: "unexpected end of input".into(),
            });
        }
        if !self.root_done {
            return Err(self.schema("missing <heprep> root element"));
        }
        let position = self.reader.buffer_position();
        self.builder.finish().map_err(|e| ParseError::Schema {
            position,
            message: e.to_string(),
        })
    }
}

fn names_elem(e: Elem) -> &'static str {
    match e {
        Elem::HepRep => "heprep",
        Elem::TypeTree => "typetree",
        Elem::Type => "type",
        Elem::AttDef => "attdef",
        Elem::AttValue => "attvalue",
        Elem::InstanceTree => "instancetree",
        Elem::Instance => "instance",
        Elem::Point => "point",
    }
}

/// Reads a `.heprep.xml` document. Unknown elements and attributes are
/// errors.
pub fn parse_document<R: Read>(source: R) -> Result<HepRepDocument, ParseError> {
    let mut reader = Reader::from_reader(BufReader::new(source));
    let cfg = reader.config_mut();
    cfg.check_end_names = true;
    cfg.check_comments = true;
    Parser {
        reader,
        builder: memory_builder(),
        stack: Vec::new(),
        seen_type_tree: false,
        seen_instance_tree: false,
        root_done: false,
    }
    .run()
}

pub fn parse_str(text: &str) -> Result<HepRepDocument, ParseError> {
    parse_document(text.as_bytes())
}
