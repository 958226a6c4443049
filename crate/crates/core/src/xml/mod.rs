//! Persistent `.heprep.xml` format.
//!
//! ```text
//! <?xml version="1.0" encoding="UTF-8"?>
//! <heprep version="2.0">
//!   <typetree name=".." version="..">
//!     <type name="..">
//!       <attdef name=".." desc=".." category="Draw" kind="real" units=".."/>
//!       <attvalue name=".." kind=".." value=".."/>
//!       <type ..>...</type>
//!     </type>
//!   </typetree>
//!   <instancetree name=".." version=".." typetreename=".." typetreeversion="..">
//!     <instance type="Full/Name">
//!       <attvalue .../>
//!       <point x=".." y=".." z=".."><attvalue .../></point>
//!       <instance ...>...</instance>
//!     </instance>
//!   </instancetree>
//! </heprep>
//! ```
//!
//! All scalar data lives in attributes; `desc` and `units` are omitted when
//! empty.

mod parse;
mod writer;

pub use parse::{parse_document, parse_str, ParseError};
pub use writer::{emit_document, write_document, xml_builder, XmlBuilder, XmlWriterConfig};

use crate::model::{AttPayload, AttValueKind, Color};

pub const HEPREP_VERSION: &str = "2.0";
pub const FILE_EXTENSION: &str = ".heprep.xml";

/// Shortest decimal text that reads back to exactly `v`. Integral values
/// carry no fractional part (`0`, `-3`); large and small magnitudes use
/// exponent form (`1e21`).
pub fn format_real(v: f64) -> String {
    let mut buf = ryu::Buffer::new();
    let s = buf.format(v);
    s.strip_suffix(".0").unwrap_or(s).to_string()
}

pub(crate) fn parse_real(s: &str) -> Option<f64> {
    // Rust also accepts "inf"/"NaN"; the format only allows finite numbers.
    if !s.bytes().all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b)) {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Value attribute text for a payload.
pub fn encode_value(v: &AttPayload) -> String {
    match v {
        AttPayload::Text(s) => s.clone(),
        AttPayload::Integer(i) => i.to_string(),
        AttPayload::Real(r) => format_real(*r),
        AttPayload::Boolean(b) => if *b { "true" } else { "false" }.to_string(),
        AttPayload::Color(c) => format!("{},{},{}", format_real(c.r), format_real(c.g), format_real(c.b)),
    }
}

pub fn decode_value(kind: AttValueKind, s: &str) -> Option<AttPayload> {
    Some(match kind {
        AttValueKind::Text => AttPayload::Text(s.to_string()),
        AttValueKind::Integer => {
            if s.starts_with('+') {
                return None;
            }
            AttPayload::Integer(s.parse().ok()?)
        }
        AttValueKind::Real => AttPayload::Real(parse_real(s)?),
        AttValueKind::Boolean => match s {
            "true" => AttPayload::Boolean(true),
            "false" => AttPayload::Boolean(false),
            _ => return None,
        },
        AttValueKind::Color => {
            let mut it = s.split(',');
            let c = Color::new(
                parse_real(it.next()?)?,
                parse_real(it.next()?)?,
                parse_real(it.next()?)?,
            );
            if it.next().is_some() || !c.is_valid() {
                return None;
            }
            AttPayload::Color(c)
        }
    })
}
