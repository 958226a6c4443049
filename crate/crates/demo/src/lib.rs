//! In-browser event display. The whole session runs inside the page: the
//! standard fillers build each event, queries filter it, and a picked hit can
//! be removed and its track refitted.

use heprep::event::fillers::{REMOVE_HIT_AND_REFIT, TRACK, TRACK_HIT};
use heprep::event::{ActionInvocation, Session, SessionConfig};
use heprep::model::{
    instance_at, names_eq, resolve_on, AttPayload, AttributeCategory, HepRepInstance, InstancePath, TypeTree,
};
use heprep::query::{orig_path_of, InstanceRequest, Predicate};
use heprep::xml::encode_value;
use serde_json::{json, Map, Value};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Demo {
    session: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Demo {
        let mut session = Session::new(SessionConfig::with_seed(seed.into()));
        session.next_event();
        Demo { session }
    }

    #[wasm_bindgen(js_name = eventId)]
    pub fn event_id(&self) -> u32 {
        self.session.event_id() as u32
    }

    #[wasm_bindgen(js_name = nextEvent)]
    pub fn next_event(&mut self) -> u32 {
        self.session.next_event() as u32
    }

    /// Full type names of the catalog, as a JSON array.
    #[wasm_bindgen(js_name = typeNames)]
    pub fn type_names(&self) -> Result<String, String> {
        let tt = self.session.type_tree().map_err(|e| e.to_string())?;
        Ok(json!(tt.full_names()).to_string())
    }

    /// Drawable primitives for the selected types that pass every predicate.
    /// `types` and `predicates` are newline-separated; empty means no filter.
    pub fn scene(&self, types: &str, predicates: &str) -> Result<String, String> {
        let req = request(types, predicates)?;
        let tt = self.session.type_tree().map_err(|e| e.to_string())?;
        let tree = self.session.instances(&req).map_err(|e| e.to_string())?;
        let mut prims = Vec::new();
        for root in &tree.root_instances {
            flatten(&tt, root, &mut prims);
        }
        Ok(json!({"eventId": self.session.event_id(), "primitives": prims}).to_string())
    }

    /// Removes the picked TrackHit from its track and refits. Returns a one
    /// line description of the change.
    #[wasm_bindgen(js_name = removeHit)]
    pub fn remove_hit(&mut self, hit_path: &str) -> Result<String, String> {
        let path: InstancePath = hit_path.parse().map_err(|e: heprep::model::ModelError| e.to_string())?;
        let doc = self.session.document().map_err(|e| e.to_string())?;
        let hit = instance_at(&doc, &path).map_err(|e| e.to_string())?;
        if !names_eq(&hit.type_full_name, TRACK_HIT) {
            return Err(format!("{hit_path} is a {}, not a {TRACK_HIT}", hit.type_full_name));
        }
        let index = match resolve_on(&doc.type_tree, hit, None, "HitIndex").map(|v| &v.value) {
            Some(AttPayload::Integer(i)) => *i,
            _ => return Err(format!("{hit_path} has no HitIndex")),
        };
        let track_path = path.parent().ok_or("a hit always sits under a track")?;
        let chi2 = |doc: &heprep::model::HepRepDocument| {
            instance_at(doc, &track_path)
                .ok()
                .and_then(|t| resolve_on(&doc.type_tree, t, None, "Chi2"))
                .and_then(|v| v.value.as_f64())
        };
        let before = chi2(&doc);
        let action =
            ActionInvocation::new(REMOVE_HIT_AND_REFIT, track_path.clone()).arg("hitIndex", AttPayload::Integer(index));
        self.session.apply_action(&action).map_err(|e| e.to_string())?;
        let after = chi2(&*self.session.document().map_err(|e| e.to_string())?);
        Ok(match (before, after) {
            (Some(b), Some(a)) => format!("{TRACK} {track_path}: removed hit {index}, chi2 {b:.4} -> {a:.4} mm2"),
            _ => format!("{TRACK} {track_path}: removed hit {index}"),
        })
    }

    /// Energy bookkeeping of the current event.
    pub fn summary(&mut self) -> Result<String, String> {
        self.session
            .run_algorithm("summarize")
            .map(|r| r.summary)
            .map_err(|e| e.to_string())
    }
}

fn lines(s: &str) -> impl Iterator<Item = &str> {
    s.lines().map(str::trim).filter(|l| !l.is_empty())
}

fn request(types: &str, predicates: &str) -> Result<InstanceRequest, String> {
    let mut req = InstanceRequest::for_types(lines(types).map(String::from));
    for p in lines(predicates) {
        req.predicates.push(p.parse::<Predicate>().map_err(|e| e.to_string())?);
    }
    req.validate().map_err(|e| e.to_string())?;
    Ok(req)
}

fn flatten(tt: &TypeTree, inst: &HepRepInstance, out: &mut Vec<Value>) {
    if !inst.points.is_empty() {
        out.push(primitive(tt, inst));
    }
    for s in &inst.sub_instances {
        flatten(tt, s, out);
    }
}

fn primitive(tt: &TypeTree, inst: &HepRepInstance) -> Value {
    let get = |name| resolve_on(tt, inst, None, name).map(|v| &v.value);
    let color = match get("Color") {
        Some(AttPayload::Color(c)) => json!([c.r, c.g, c.b]),
        _ => json!([1.0, 1.0, 1.0]),
    };
    let mut attrs = Map::new();
    for ty in tt.type_chain(&inst.type_full_name).unwrap_or_default() {
        for d in ty.att_defs.iter().filter(|d| d.category == AttributeCategory::Physics) {
            if let Some(v) = get(&d.name) {
                attrs.insert(d.name.clone(), json!(encode_value(v)));
            }
        }
    }
    json!({
        "path": orig_path_of(inst).map(|p| p.to_string()),
        "type": inst.type_full_name,
        "drawAs": match get("DrawAs") { Some(AttPayload::Text(s)) => s.as_str(), _ => "Point" },
        "color": color,
        "lineWidth": get("LineWidth").and_then(AttPayload::as_f64).unwrap_or(1.0),
        "markerSize": get("MarkerSize").and_then(AttPayload::as_f64).unwrap_or(3.0),
        "visible": !matches!(get("Visibility"), Some(AttPayload::Boolean(false))),
        "points": inst.points.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>(),
        "attrs": attrs,
    })
}
