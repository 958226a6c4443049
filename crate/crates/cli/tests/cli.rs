use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use heprep::event::generate_event;
use heprep::model::find_type;
use heprep_wire::Client;
use serde_json::json;

fn heprep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heprep"))
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn export(dir: &Path, seed: u64, events: u64, extra: &[&str]) {
    let (seed, n) = (seed.to_string(), events.to_string());
    let mut args = vec![
        "export",
        "--seed",
        &seed,
        "--events",
        &n,
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend(extra);
    let o = heprep(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn export_writes_valid_deterministic_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    export(a.path(), 42, 3, &[]);
    export(b.path(), 42, 3, &[]);
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "event_000001.heprep.xml",
            "event_000002.heprep.xml",
            "event_000003.heprep.xml"
        ]
    );
    for n in &names {
        let p = a.path().join(n);
        let o = heprep(&["validate", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(stdout(&o), "");
        assert_eq!(fs::read(&p).unwrap(), fs::read(b.path().join(n)).unwrap());
    }
}

#[test]
fn type_filtered_export_keeps_the_catalog() {
    let d = tempfile::tempdir().unwrap();
    export(d.path(), 7, 2, &["--types", "Track"]);
    for id in 1..=2 {
        let doc = heprep_cli::read_document(&d.path().join(heprep_cli::event_file_name(id))).unwrap();
        assert!(find_type(&doc.type_tree, "CalCrystal").is_some());
        assert!(find_type(&doc.type_tree, "Geometry").is_some());
        let mut types = Vec::new();
        doc.instance_tree.walk(|_, i| types.push(i.type_full_name.clone()));
        assert!(!types.is_empty());
        assert!(types.iter().all(|t| t == "Track" || t == "Track/TrackHit"), "{types:?}");
    }
}

#[test]
fn validate_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    export(d.path(), 3, 1, &[]);
    let good = fs::read_to_string(d.path().join("event_000001.heprep.xml")).unwrap();

    let dangling = good.replacen("<instance type=\"CalCrystal\">", "<instance type=\"Ghost\">", 1);
    assert_ne!(dangling, good);
    let p = d.path().join("dangling.xml");
    fs::write(&p, dangling).unwrap();
    let o = heprep(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let lines: Vec<_> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 1, "{lines:?}");
    assert!(lines[0].starts_with("TYPE_NOT_FOUND\t"));

    let p = d.path().join("truncated.xml");
    fs::write(&p, &good[..good.len() / 2]).unwrap();
    assert_eq!(heprep(&["validate", p.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(heprep(&["validate", "/definitely/not/here.xml"]).status.code(), Some(3));
    assert_eq!(heprep(&["validate"]).status.code(), Some(1));
}

#[test]
fn export_to_unwritable_dir_fails() {
    let d = tempfile::tempdir().unwrap();
    let file = d.path().join("plain");
    fs::write(&file, "x").unwrap();
    let o = heprep(&[
        "export",
        "--seed",
        "1",
        "--events",
        "1",
        "--out",
        file.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn chi2_cut_matches_regenerated_event() {
    let d = tempfile::tempdir().unwrap();
    export(d.path(), 11, 4, &[]);
    for id in 1..=4u64 {
        let p = d.path().join(heprep_cli::event_file_name(id));
        let o = heprep(&["query", p.to_str().unwrap(), "--type", "Track", "--where", "Chi2>0"]);
        assert_eq!(o.status.code(), Some(0));
        let got: Vec<(String, f64)> = stdout(&o)
            .lines()
            .map(|l| {
                let f: Vec<_> = l.split('\t').collect();
                assert_eq!(f[1], "Track");
                let chi2 = f.iter().find_map(|x| x.strip_prefix("Chi2=")).unwrap();
                (f[0].to_string(), chi2.parse().unwrap())
            })
            .collect();
        // brute force over the event itself
        let ev = generate_event(11, id);
        let want: Vec<f64> = ev.tracks.iter().map(|t| t.fit.chi2).filter(|c| *c > 0.0).collect();
        assert_eq!(got.iter().map(|g| g.1).collect::<Vec<_>>(), want);
        assert!(got.iter().all(|(path, _)| !path.contains('/')));
    }
}

#[test]
fn energy_exists_selects_calorimeter_and_acd() {
    let d = tempfile::tempdir().unwrap();
    export(d.path(), 5, 3, &[]);
    let mut seen = std::collections::BTreeSet::new();
    for id in 1..=3u64 {
        let p = d.path().join(heprep_cli::event_file_name(id));
        let o = heprep(&["query", p.to_str().unwrap(), "--where", "Energy exists"]);
        let ev = generate_event(5, id);
        let lines = stdout(&o);
        assert_eq!(lines.lines().count(), ev.cal_deposits.len() + ev.acd_hits.len());
        for l in lines.lines() {
            seen.insert(l.split('\t').nth(1).unwrap().to_string());
        }
    }
    assert!(seen.iter().all(|t| t == "CalCrystal" || t == "AcdTile"), "{seen:?}");
}

#[test]
fn exclusions_drop_columns_and_bad_predicates_are_usage_errors() {
    let d = tempfile::tempdir().unwrap();
    export(d.path(), 5, 1, &[]);
    let p = d.path().join("event_000001.heprep.xml");
    let p = p.to_str().unwrap();
    let o = heprep(&["query", p, "--type", "Track", "--exclude-att", "chi2"]);
    assert!(!stdout(&o).is_empty());
    assert!(!stdout(&o).contains("Chi2="));
    let o = heprep(&["query", p, "--where", "Chi2>>1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("usage"));
}

fn free_port_pair() -> u16 {
    loop {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        let p = l.local_addr().unwrap().port();
        if p < u16::MAX && TcpListener::bind(("127.0.0.1", p + 1)).is_ok() {
            return p;
        }
    }
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn spawn_serve(args: &[&str]) -> Server {
    Server(
        Command::new(env!("CARGO_BIN_EXE_heprep"))
            .arg("serve")
            .args(args)
            .env("RUST_LOG", "info")
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap(),
    )
}

fn connect(port: u16) -> Client {
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        match Client::connect(("127.0.0.1", port)) {
            Ok(c) => return c,
            Err(e) if Instant::now() > deadline => panic!("server never came up: {e}"),
            Err(_) => thread::sleep(Duration::from_millis(20)),
        }
    }
}

#[test]
fn serve_starts_at_event_one() {
    let port = free_port_pair();
    let _s = spawn_serve(&["--port", &port.to_string(), "--seed", "42"]);
    let mut c = connect(port);
    let st = c.call("control.status", json!({})).unwrap();
    assert_eq!((st["eventId"].as_u64(), st["seed"].as_u64()), (Some(1), Some(42)));
}

#[test]
fn serve_without_seed_logs_one() {
    let port = free_port_pair();
    let mut s = spawn_serve(&["--port", &port.to_string()]);
    let mut c = connect(port);
    let seed = c.call("control.status", json!({})).unwrap()["seed"].as_u64().unwrap();
    let _ = s.0.kill();
    let out = s.0.wait_with_output_ref();
    assert!(out.contains(&format!("using seed {seed}")), "{out}");
}

trait WaitRef {
    fn wait_with_output_ref(&mut self) -> String;
}

impl WaitRef for Child {
    fn wait_with_output_ref(&mut self) -> String {
        use std::io::Read;
        let _ = self.wait();
        let mut s = String::new();
        if let Some(mut e) = self.stderr.take() {
            let _ = e.read_to_string(&mut s);
        }
        s
    }
}

#[test]
fn serve_on_a_taken_port_exits_3() {
    let held = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port();
    let o = heprep(&["serve", "--port", &port.to_string(), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!o.stderr.is_empty());
}
