use std::io::Write;

use crate::builder::{Builder, BuilderError, FinishBuilder, Grammar};
use crate::model::{AttDef, AttValue, HepRepDocument, HepRepInstance, HepRepType};

use super::{encode_value, format_real, HEPREP_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct XmlWriterConfig {
    /// Two spaces per depth and one element per line when set.
    pub indent: bool,
    pub max_buffered_bytes: usize,
}

impl Default for XmlWriterConfig {
    fn default() -> Self {
        XmlWriterConfig {
            indent: true,
            max_buffered_bytes: 65536,
        }
    }
}

/// Streaming XML back end. Elements go out as soon as they are complete
/// enough to write; the only retained state is the open-element stack and a
/// bounded output buffer.
pub struct XmlBuilder<W: Write> {
    sink: W,
    config: XmlWriterConfig,
    grammar: Grammar,
    buf: Vec<u8>,
    /// Open elements; the flag marks a start tag whose `>` is still pending.
    open: Vec<(&'static str, bool)>,
    bytes_written: u64,
    peak_buffered: usize,
}

pub fn xml_builder<W: Write>(sink: W, config: XmlWriterConfig) -> XmlBuilder<W> {
    XmlBuilder {
        sink,
        config,
        grammar: Grammar::default(),
        buf: Vec::with_capacity(config.max_buffered_bytes.min(8192)),
        open: Vec::new(),
        bytes_written: 0,
        peak_buffered: 0,
    }
}

impl<W: Write> XmlBuilder<W> {
    /// Bytes handed to the sink so far.
    pub fn bytes_written(&self) -> u64 {
        self.bytes_written
    }

    pub fn buffered_bytes(&self) -> usize {
        self.buf.len()
    }

    /// Largest buffer fill seen over the builder's lifetime.
    pub fn peak_buffered_bytes(&self) -> usize {
        self.peak_buffered
    }

    pub fn get_ref(&self) -> &W {
        &self.sink
    }

    pub fn into_inner(self) -> W {
        self.sink
    }

    fn flush_buf(&mut self) -> std::io::Result<()> {
        if !self.buf.is_empty() {
            self.sink.write_all(&self.buf)?;
            self.bytes_written += self.buf.len() as u64;
            self.buf.clear();
        }
        Ok(())
    }

    fn raw(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        let max = self.config.max_buffered_bytes;
        if self.buf.len() + bytes.len() > max {
            self.flush_buf()?;
        }
        if bytes.len() > max {
            self.sink.write_all(bytes)?;
            self.bytes_written += bytes.len() as u64;
        } else {
            self.buf.extend_from_slice(bytes);
            self.peak_buffered = self.peak_buffered.max(self.buf.len());
        }
        Ok(())
    }

    fn escaped(&mut self, s: &str) -> std::io::Result<()> {
        let mut start = 0;
        for (i, b) in s.bytes().enumerate() {
            let rep: &[u8] = match b {
                b'<' => b"&lt;",
                b'>' => b"&gt;",
                b'&' => b"&amp;",
                b'"' => b"&quot;",
                b'\'' => b"&apos;",
                b'\n' => b"&#10;",
                b'\r' => b"&#13;",
                b'\t' => b"&#9;",
                _ => continue,
            };
            self.raw(&s.as_bytes()[start..i])?;
            self.raw(rep)?;
            start = i + 1;
        }
        self.raw(&s.as_bytes()[start..])
    }

    fn attr(&mut self, name: &str, value: &str) -> std::io::Result<()> {
        self.raw(b" ")?;
        self.raw(name.as_bytes())?;
        self.raw(b"=\"")?;
        self.escaped(value)?;
        self.raw(b"\"")
    }

    fn newline_indent(&mut self) -> std::io::Result<()> {
        if self.config.indent {
            self.raw(b"\n")?;
            for _ in 0..self.open.len() {
                self.raw(b"  ")?;
            }
        }
        Ok(())
    }

    /// Completes a pending parent start tag before a child is written.
    fn seal_parent(&mut self) -> std::io::Result<()> {
        if let Some(top) = self.open.last_mut() {
            if top.1 {
                top.1 = false;
                self.raw(b">")?;
            }
        }
        Ok(())
    }

    fn start(&mut self, name: &'static str, attrs: &[(&str, &str)]) -> std::io::Result<()> {
        self.seal_parent()?;
        self.newline_indent()?;
        self.raw(b"<")?;
        self.raw(name.as_bytes())?;
        for (k, v) in attrs {
            self.attr(k, v)?;
        }
        self.open.push((name, true));
        Ok(())
    }

    fn end(&mut self) -> std::io::Result<()> {
        let (name, pending) = self.open.pop().expect("grammar keeps elements balanced");
        if pending {
            self.raw(b"/>")
        } else {
            self.newline_indent()?;
            self.raw(b"</")?;
            self.raw(name.as_bytes())?;
            self.raw(b">")
        }
    }

    /// Closes an open `<point>` left behind by the previous call.
    fn close_point(&mut self) -> std::io::Result<()> {
        if self.open.last().is_some_and(|(n, _)| *n == "point") {
            self.end()?;
        }
        Ok(())
    }

    fn empty(&mut self, name: &'static str, attrs: &[(&str, &str)]) -> std::io::Result<()> {
        self.start(name, attrs)?;
        self.end()
    }

    fn att_value_element(&mut self, v: &AttValue) -> std::io::Result<()> {
        let value = encode_value(&v.value);
        self.empty(
            "attvalue",
            &[("name", &v.name), ("kind", v.value.kind().token()), ("value", &value)],
        )
    }

    /// Runs an output step; an I/O failure poisons the builder.
    fn io(&mut self, f: impl FnOnce(&mut Self) -> std::io::Result<()>) -> Result<(), BuilderError> {
        f(self).map_err(|e| {
            self.grammar.poison();
            BuilderError::Io(e)
        })
    }
}

impl<W: Write> Builder for XmlBuilder<W> {
    fn open_type_tree(&mut self, name: &str, version: &str) -> Result<(), BuilderError> {
        self.grammar.open_type_tree(name, version)?;
        self.io(|w| {
            w.raw(br#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
            w.start("heprep", &[("version", HEPREP_VERSION)])?;
            w.start("typetree", &[("name", name), ("version", version)])
        })
    }

    fn open_type(&mut self, name: &str) -> Result<(), BuilderError> {
        self.grammar.open_type(name)?;
        self.io(|w| w.start("type", &[("name", name)]))
    }

    fn att_def(&mut self, def: &AttDef) -> Result<(), BuilderError> {
        self.grammar.att_def(def)?;
        self.io(|w| {
            let mut attrs = vec![("name", def.name.as_str())];
            if !def.description.is_empty() {
                attrs.push(("desc", &def.description));
            }
            attrs.push(("category", def.category.as_str()));
            attrs.push(("kind", def.kind.token()));
            if !def.units.is_empty() {
                attrs.push(("units", &def.units));
            }
            w.empty("attdef", &attrs)
        })
    }

    fn type_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError> {
        self.grammar.type_att_value(value)?;
        self.io(|w| w.att_value_element(value))
    }

    fn close_type(&mut self) -> Result<(), BuilderError> {
        self.grammar.close_type()?;
        self.io(|w| w.end())
    }

    fn close_type_tree(&mut self) -> Result<(), BuilderError> {
        self.grammar.close_type_tree()?;
        self.io(|w| w.end())
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
        self.io(|w| {
            w.start(
                "instancetree",
                &[
                    ("name", name),
                    ("version", version),
                    ("typetreename", type_tree_name),
                    ("typetreeversion", type_tree_version),
                ],
            )
        })
    }

    fn open_instance(&mut self, type_full_name: &str) -> Result<(), BuilderError> {
        self.grammar.open_instance(type_full_name)?;
        self.io(|w| {
            w.close_point()?;
            w.start("instance", &[("type", type_full_name)])
        })
    }

    fn instance_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError> {
        self.grammar.instance_att_value(value)?;
        self.io(|w| {
            w.close_point()?;
            w.att_value_element(value)
        })
    }

    fn point(&mut self, x: f64, y: f64, z: f64) -> Result<(), BuilderError> {
        self.grammar.point(x, y, z)?;
        self.io(|w| {
            w.close_point()?;
            let (x, y, z) = (format_real(x), format_real(y), format_real(z));
            w.start("point", &[("x", &x), ("y", &y), ("z", &z)])
        })
    }

    fn point_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError> {
        self.grammar.point_att_value(value)?;
        self.io(|w| w.att_value_element(value))
    }

    fn close_instance(&mut self) -> Result<(), BuilderError> {
        self.grammar.close_instance()?;
        self.io(|w| {
            w.close_point()?;
            w.end()
        })
    }

    fn close_instance_tree(&mut self) -> Result<(), BuilderError> {
        self.grammar.close_instance_tree()?;
        self.io(|w| w.end())
    }
}

impl<W: Write> FinishBuilder for XmlBuilder<W> {
    /// Total bytes written.
    type Output = u64;

    fn finish(&mut self) -> Result<u64, BuilderError> {
        self.grammar.finish()?;
        self.io(|w| {
            w.end()?;
            w.raw(b"\n")?;
            w.flush_buf()?;
            w.sink.flush()
        })?;
        Ok(self.bytes_written)
    }
}

/// Replays an in-memory document through a builder.
pub fn emit_document(doc: &HepRepDocument, b: &mut dyn Builder) -> Result<(), BuilderError> {
    fn ty(t: &HepRepType, b: &mut dyn Builder) -> Result<(), BuilderError> {
        b.open_type(&t.name)?;
        for d in &t.att_defs {
            b.att_def(d)?;
        }
        for v in &t.att_values {
            b.type_att_value(v)?;
        }
        for s in &t.sub_types {
            ty(s, b)?;
        }
        b.close_type()
    }
    fn inst(i: &HepRepInstance, b: &mut dyn Builder) -> Result<(), BuilderError> {
        b.open_instance(&i.type_full_name)?;
        for v in &i.att_values {
            b.instance_att_value(v)?;
        }
        for p in &i.points {
            b.point(p.x, p.y, p.z)?;
            for v in &p.att_values {
                b.point_att_value(v)?;
            }
        }
        for s in &i.sub_instances {
            inst(s, b)?;
        }
        b.close_instance()
    }
    let tt = &doc.type_tree;
    b.open_type_tree(&tt.name, &tt.version)?;
    for t in &tt.root_types {
        ty(t, b)?;
    }
    b.close_type_tree()?;
    let it = &doc.instance_tree;
    b.open_instance_tree(&it.name, &it.version, &it.type_tree_name, &it.type_tree_version)?;
    for i in &it.root_instances {
        inst(i, b)?;
    }
    b.close_instance_tree()
}

/// Serializes a whole document.
pub fn write_document<W: Write>(doc: &HepRepDocument, sink: W, config: XmlWriterConfig) -> Result<u64, BuilderError> {
    let mut b = xml_builder(sink, config);
    emit_document(doc, &mut b)?;
    b.finish()
}
