use heprep::event::{Session, SessionConfig};
use heprep::model::InstancePath;
use heprep::query::{orig_path_of, InstanceRequest};
use heprep_wire::json::{instance_tree_from_json, type_tree_from_json};
use heprep_wire::Dispatcher;
use serde_json::{json, Value};

fn started(seed: u64) -> Dispatcher {
    let mut s = Session::new(SessionConfig::with_seed(seed));
    s.next_event();
    Dispatcher::new(s)
}

fn call(d: &Dispatcher, id: i64, method: &str, params: Value) -> Value {
    let line = json!({"id": id, "method": method, "params": params}).to_string();
    let resp: Value = serde_json::from_str(&d.handle_line(&line)).unwrap();
    assert_eq!(resp["id"], json!(id));
    resp
}

fn code(resp: &Value) -> i64 {
    resp["error"]["code"].as_i64().unwrap_or(0)
}

#[test]
fn framing_errors() {
    let d = started(1);
    let r: Value = serde_json::from_str(&d.handle_line("{oops")).unwrap();
    assert_eq!(r["id"], Value::Null);
    assert_eq!(code(&r), 1);
    let r: Value = serde_json::from_str(&d.handle_line("[1,2]")).unwrap();
    assert_eq!(code(&r), 1);
    let r: Value = serde_json::from_str(&d.handle_line(r#"{"id": 4}"#)).unwrap();
    assert_eq!((r["id"].as_i64(), code(&r)), (Some(4), 1));
    assert_eq!(code(&call(&d, 2, "heprep.frobnicate", json!({}))), 2);
    assert_eq!(code(&call(&d, 3, "heprep.getTypeTree", json!({"verbose": true}))), 3);
    assert_eq!(
        code(&call(&d, 5, "heprep.getInstances", json!({"typeNames": "Track"}))),
        3
    );
    assert_eq!(code(&call(&d, 6, "heprep.getInstances", json!({"maxDepth": 0}))), 3);
    assert_eq!(
        code(&call(&d, 7, "heprep.getInstances", json!({"predicates": ["Chi2>>1"]}))),
        3
    );
    let r: Value =
        serde_json::from_str(&d.handle_line(r#"{"id": 8, "method": "heprep.getInstances", "params": 3}"#)).unwrap();
    assert_eq!(code(&r), 3);
}

#[test]
fn no_event_is_a_state_error() {
    let d = Dispatcher::new(Session::new(SessionConfig::with_seed(1)));
    assert_eq!(code(&call(&d, 1, "heprep.getInstances", json!({}))), 7);
    assert_eq!(call(&d, 2, "control.status", json!({}))["result"]["eventId"], json!(0));
}

#[test]
fn catalog_and_status() {
    let d = started(42);
    let r = call(&d, 1, "heprep.getTypeTree", json!({}));
    let roots: Vec<&str> = r["result"]["types"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["name"].as_str().unwrap())
        .collect();
    assert_eq!(roots, ["Geometry", "Track", "CalCrystal", "AcdTile"]);
    let tt = type_tree_from_json(&r["result"]).unwrap();
    assert_eq!(tt, d.session().read().unwrap().type_tree().unwrap());

    let s = call(&d, 2, "control.status", json!({}));
    assert_eq!(s["result"], json!({"eventId": 1, "seed": 42, "protocolVersion": "1"}));
    assert_eq!(
        call(&d, 3, "control.nextEvent", json!({}))["result"],
        json!({"eventId": 2})
    );
    let a = call(&d, 4, "control.listActions", json!({}));
    assert_eq!(a["result"]["actions"][0]["name"], json!("removeHitAndRefit"));
    assert_eq!(
        a["result"]["actions"][0]["args"][0],
        json!({"name": "hitIndex", "kind": "int"})
    );
    let algs = call(&d, 5, "control.listAlgorithms", json!({}));
    assert_eq!(algs["result"]["algorithms"], json!(["refitAll", "summarize"]));
    let rep = call(&d, 6, "control.runAlgorithm", json!({"name": "summarize"}));
    assert!(!rep["result"]["report"].as_str().unwrap().is_empty());
    assert_eq!(code(&call(&d, 7, "control.runAlgorithm", json!({"name": "bogus"}))), 6);
    assert_eq!(code(&call(&d, 8, "control.runAlgorithm", json!({}))), 3);
}

#[test]
fn results_equal_in_process_calls() {
    let d = started(7);
    let cases = [
        json!({}),
        json!({"typeNames": ["Track"], "predicates": ["Chi2>0"]}),
        json!({"typeNames": ["Track/TrackHit"], "attExcludes": ["HitIndex"]}),
        json!({"predicates": ["Energy exists"], "maxDepth": 1}),
    ];
    for params in cases {
        let r = call(&d, 1, "heprep.getInstances", params.clone());
        let got = instance_tree_from_json(&r["result"]).unwrap();
        let req = heprep_wire::json::request_from_map(params.as_object().unwrap()).unwrap();
        let want = d.session().read().unwrap().instances(&req).unwrap();
        assert_eq!(got, want, "{params}");
    }
    // omitted params is the empty request
    let r: Value = serde_json::from_str(&d.handle_line(r#"{"id": 9, "method": "heprep.getInstances"}"#)).unwrap();
    let want = d.session().read().unwrap().instances(&InstanceRequest::all()).unwrap();
    assert_eq!(instance_tree_from_json(&r["result"]).unwrap(), want);
}

#[test]
fn chi2_cut_returns_only_qualifying_tracks() {
    let d = started(3);
    let r = call(
        &d,
        1,
        "heprep.getInstances",
        json!({"typeNames": ["Track"], "predicates": ["Chi2>0"]}),
    );
    let tree = instance_tree_from_json(&r["result"]).unwrap();
    let s = d.session().read().unwrap();
    let ev = s.event().unwrap();
    let want = ev.tracks.iter().filter(|t| t.fit.chi2 > 0.0).count();
    assert_eq!(tree.root_instances.len(), want);
    assert!(tree.root_instances.iter().all(|i| i.type_full_name == "Track"));
}

fn first_track(d: &Dispatcher) -> (String, usize) {
    let s = d.session().read().unwrap();
    let tree = s.instances(&InstanceRequest::for_types(["Track"])).unwrap();
    let t = &tree.root_instances[0];
    (orig_path_of(t).unwrap().to_string(), t.points.len())
}

#[test]
fn actions_over_the_wire() {
    let d = started(5);
    let (path, n) = first_track(&d);
    let before = d.session().read().unwrap().event().unwrap().clone();

    let bad = call(
        &d,
        1,
        "heprep.getInstancesAfterAction",
        json!({"typeNames": ["Track"], "action": {"name": "removeHitAndRefit", "targetPath": path, "args": {"hitIndex": 99}}}),
    );
    assert_eq!(code(&bad), 6);
    assert_eq!(d.session().read().unwrap().event().unwrap(), &before);
    let unknown = call(
        &d,
        2,
        "heprep.getInstancesAfterAction",
        json!({"action": {"name": "explode", "targetPath": path}}),
    );
    assert_eq!(code(&unknown), 5);
    let lost = call(
        &d,
        3,
        "heprep.getInstancesAfterAction",
        json!({"action": {"name": "removeHitAndRefit", "targetPath": "4000/1", "args": {"hitIndex": 0}}}),
    );
    assert_eq!(code(&lost), 4);
    let garbled = call(
        &d,
        4,
        "heprep.getInstancesAfterAction",
        json!({"action": {"name": "removeHitAndRefit", "targetPath": "x", "args": {"hitIndex": 0}}}),
    );
    assert_eq!(code(&garbled), 4);
    assert_eq!(code(&call(&d, 5, "heprep.getInstancesAfterAction", json!({}))), 3);
    assert_eq!(d.session().read().unwrap().event().unwrap(), &before);

    if n > 2 {
        let ok = call(
            &d,
            6,
            "heprep.getInstancesAfterAction",
            json!({"typeNames": ["Track"], "action": {"name": "removeHitAndRefit", "targetPath": path, "args": {"hitIndex": 0}}}),
        );
        let tree = instance_tree_from_json(&ok["result"]).unwrap();
        let target: InstancePath = path.parse().unwrap();
        let t = tree
            .root_instances
            .iter()
            .find(|i| orig_path_of(i) == Some(target.clone()))
            .unwrap();
        assert_eq!(t.points.len(), n - 1);
    } else {
        let pre = call(
            &d,
            6,
            "heprep.getInstancesAfterAction",
            json!({"action": {"name": "removeHitAndRefit", "targetPath": path, "args": {"hitIndex": 0}}}),
        );
        assert_eq!(code(&pre), 6);
    }
}
