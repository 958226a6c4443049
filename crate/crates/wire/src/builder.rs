use heprep::builder::{Builder, BuilderError, FinishBuilder, Grammar};
use heprep::model::{AttDef, AttValue};
use serde_json::{json, Map, Value};

use crate::json::{att_def_to_json, att_value_to_json};

/// Builder back end that assembles the wire JSON shape directly, without an
/// intermediate document.
#[derive(Debug, Default)]
pub struct JsonBuilder {
    grammar: Grammar,
    type_tree: Map<String, Value>,
    instance_tree: Map<String, Value>,
    roots: Vec<Value>,
    stack: Vec<Map<String, Value>>,
}

pub fn json_builder() -> JsonBuilder {
    JsonBuilder::default()
}

fn push(m: &mut Map<String, Value>, key: &str, v: Value) {
    if let Some(Value::Array(a)) = m.get_mut(key) {
        a.push(v);
    }
}

impl JsonBuilder {
    fn top(&mut self) -> &mut Map<String, Value> {
        self.stack.last_mut().expect("grammar guarantees an open node")
    }

    fn close_node(&mut self) {
        let node = Value::Object(self.stack.pop().expect("grammar guarantees an open node"));
        let key = if node.get("type").is_some() {
            "instances"
        } else {
            "types"
        };
        match self.stack.last_mut() {
            Some(parent) => push(parent, key, node),
            None => self.roots.push(node),
        }
    }
}

impl Builder for JsonBuilder {
    fn open_type_tree(&mut self, name: &str, version: &str) -> Result<(), BuilderError> {
        self.grammar.open_type_tree(name, version)?;
        self.type_tree.insert("name".into(), json!(name));
        self.type_tree.insert("version".into(), json!(version));
        Ok(())
    }

    fn open_type(&mut self, name: &str) -> Result<(), BuilderError> {
        self.grammar.open_type(name)?;
        let node = json!({"name": name, "attdefs": [], "attvalues": [], "types": []});
        self.stack.push(node.as_object().cloned().unwrap_or_default());
        Ok(())
    }

    fn att_def(&mut self, def: &AttDef) -> Result<(), BuilderError> {
        self.grammar.att_def(def)?;
        push(self.top(), "attdefs", att_def_to_json(def));
        Ok(())
    }

    fn type_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError> {
        self.grammar.type_att_value(value)?;
        push(self.top(), "attvalues", att_value_to_json(value));
        Ok(())
    }

    fn close_type(&mut self) -> Result<(), BuilderError> {
        self.grammar.close_type()?;
        self.close_node();
        Ok(())
    }

    fn close_type_tree(&mut self) -> Result<(), BuilderError> {
        self.grammar.close_type_tree()?;
        self.type_tree
            .insert("types".into(), Value::Array(std::mem::take(&mut self.roots)));
        Ok(())
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
        let t = &mut self.instance_tree;
        t.insert("name".into(), json!(name));
        t.insert("version".into(), json!(version));
        t.insert("typetreename".into(), json!(type_tree_name));
        t.insert("typetreeversion".into(), json!(type_tree_version));
        Ok(())
    }

    fn open_instance(&mut self, type_full_name: &str) -> Result<(), BuilderError> {
        self.grammar.open_instance(type_full_name)?;
        let node = json!({"type": type_full_name, "attvalues": [], "points": [], "instances": []});
        self.stack.push(node.as_object().cloned().unwrap_or_default());
        Ok(())
    }

    fn instance_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError> {
        self.grammar.instance_att_value(value)?;
        push(self.top(), "attvalues", att_value_to_json(value));
        Ok(())
    }

    fn point(&mut self, x: f64, y: f64, z: f64) -> Result<(), BuilderError> {
        self.grammar.point(x, y, z)?;
        push(self.top(), "points", json!({"x": x, "y": y, "z": z, "attvalues": []}));
        Ok(())
    }

    fn point_att_value(&mut self, value: &AttValue) -> Result<(), BuilderError> {
        self.grammar.point_att_value(value)?;
        let v = att_value_to_json(value);
        if let Some(Value::Array(points)) = self.top().get_mut("points") {
            if let Some(p) = points.last_mut().and_then(Value::as_object_mut) {
                push(p, "attvalues", v);
            }
        }
        Ok(())
    }

    fn close_instance(&mut self) -> Result<(), BuilderError> {
        self.grammar.close_instance()?;
        self.close_node();
        Ok(())
    }

    fn close_instance_tree(&mut self) -> Result<(), BuilderError> {
        self.grammar.close_instance_tree()?;
        self.instance_tree
            .insert("instances".into(), Value::Array(std::mem::take(&mut self.roots)));
        Ok(())
    }
}

impl FinishBuilder for JsonBuilder {
    /// `{"typetree": ..., "instancetree": ...}`
    type Output = Value;

    fn finish(&mut self) -> Result<Value, BuilderError> {
        self.grammar.finish()?;
        Ok(json!({
            "typetree": Value::Object(std::mem::take(&mut self.type_tree)),
            "instancetree": Value::Object(std::mem::take(&mut self.instance_tree)),
        }))
    }
}
