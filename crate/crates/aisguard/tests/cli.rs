//! The binary end to end: exit codes, output files and the synth/run/eval loop.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use geojson::{GeoJson, GeometryValue};
use serde_json::{json, Value};

fn aisguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aisguard"))
        .args(args)
        .env("AISGUARD_LOG", "error")
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

const GOOD: &str = r#"{"mmsi":440000001,"t":"2024-11-01T00:00:00Z","lat":33.5,"lon":126.0,"sog":5.0,"cog":90.0}"#;

#[test]
fn empty_input_gives_empty_collection() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("in.ndjson"), "").unwrap();
    let out = aisguard(&["run", "--input", &path(dir.path(), "in.ndjson"), "--out", &path(dir.path(), "out")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let events = fs::read_to_string(dir.path().join("out/events.geojson")).unwrap();
    assert_eq!(events, r#"{"type":"FeatureCollection","features":[]}"#);
    let manifest = read_json(dir.path().join("out/manifest.json"));
    assert_eq!(manifest["records_parsed"], 0);
    let csv = fs::read_to_string(dir.path().join("out/stage_report.csv")).unwrap();
    assert!(csv.starts_with("stage,process,cue_kind,points,mmsis,pct\n"));
}

#[test]
fn fatal_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("in.ndjson"), GOOD).unwrap();
    let input = path(dir.path(), "in.ndjson");
    let out_dir = path(dir.path(), "out");

    fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    let out = aisguard(&["run", "--input", &input, "--config", &path(dir.path(), "broken.json"), "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.json"));

    fs::write(dir.path().join("bad.json"), r#"{"min_pts": 0}"#).unwrap();
    let out = aisguard(&["run", "--input", &input, "--config", &path(dir.path(), "bad.json"), "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(1));

    fs::write(dir.path().join("typo.json"), r#"{"eps_s": 10000, "eps_z": 5}"#).unwrap();
    let out = aisguard(&["run", "--input", &input, "--config", &path(dir.path(), "typo.json"), "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(1));

    let out = aisguard(&["run", "--input", &path(dir.path(), "missing.ndjson"), "--out", &out_dir]);
    assert_eq!(out.status.code(), Some(1));

    let out = aisguard(&["run", "--input", &input, "--out", &out_dir, "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("out/manifest.json").exists());
}

#[test]
fn too_many_bad_lines_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from(GOOD);
    text.push('\n');
    for _ in 0..5 {
        text.push_str("{\"mmsi\": \"nope\"}\n");
    }
    fs::write(dir.path().join("in.ndjson"), text).unwrap();
    let out = aisguard(&["run", "--input", &path(dir.path(), "in.ndjson"), "--out", &path(dir.path(), "out")]);
    assert_eq!(out.status.code(), Some(2));
    let errors = fs::read_to_string(dir.path().join("out/parse_errors.ndjson")).unwrap();
    assert_eq!(errors.lines().count(), 5);
    assert!(dir.path().join("out/events.geojson").exists());

    // a tolerant configuration accepts the same file
    fs::write(dir.path().join("lenient.json"), r#"{"max_parse_error_ratio": 0.9}"#).unwrap();
    let out = aisguard(&[
        "run",
        "--input",
        &path(dir.path(), "in.ndjson"),
        "--config",
        &path(dir.path(), "lenient.json"),
        "--out",
        &path(dir.path(), "out"),
    ]);
    assert_eq!(out.status.code(), Some(0));
}

/// One 11-vessel fleet spoofed `n` times, each window far enough apart in
/// time to form its own event.
fn repeated_spoofing(n: usize) -> Value {
    let site = json!({ "lat": 33.75, "lon": 126.25 });
    let injections: Vec<Value> = (0..n)
        .map(|k| {
            json!({ "kind": "spoofing", "center": site, "radius_m": 18_000.0,
                    "start_s": 1_800.0 + 2_400.0 * k as f64, "duration_s": 20.0 })
        })
        .collect();
    json!({
        "seed": 3,
        "duration_s": 1_800.0 + 2_400.0 * n as f64,
        "n_vessels": 10,
        "fleets": [{ "center": site, "radius_m": 4_000.0, "n_vessels": 11 }],
        "injections": injections,
    })
}

#[test]
fn fifty_events_are_valid_geojson() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sc.json"), repeated_spoofing(50).to_string()).unwrap();
    let out = aisguard(&["synth", "--scenario", &path(dir.path(), "sc.json"), "--out", &path(dir.path(), "syn")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = aisguard(&["run", "--input", &path(dir.path(), "syn/records.ndjson"), "--out", &path(dir.path(), "run")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let text = fs::read_to_string(dir.path().join("run/events.geojson")).unwrap();
    let GeoJson::FeatureCollection(fc) = text.parse::<GeoJson>().unwrap() else { panic!("not a collection") };
    assert_eq!(fc.features.len(), 50);
    for (k, f) in fc.features.iter().enumerate() {
        let Some(GeometryValue::Point { coordinates: p }) = f.geometry.as_ref().map(|g| &g.value) else {
            panic!("feature {k} is not a point")
        };
        assert!((-180.0..=180.0).contains(&p[0]) && (-90.0..=90.0).contains(&p[1]));
        let props = f.properties.as_ref().unwrap();
        assert_eq!(props["category"], "spoofing");
        assert_eq!(props["mmsi_count"], 11);
        assert_eq!(props["mmsis"].as_array().unwrap().len(), 11);
        assert!(props["t_start"].as_str().unwrap() <= props["t_end"].as_str().unwrap());
        for key in ["id", "cluster_id", "cue_kind", "duration_s", "radius_m", "anomalous_ratio", "present_mmsis", "days"] {
            assert!(props.contains_key(key), "feature {k} lacks {key}");
        }
    }
    let ids: Vec<u64> = fc.features.iter().map(|f| f.properties.as_ref().unwrap()["id"].as_u64().unwrap()).collect();
    assert!(ids.windows(2).all(|w| w[0] < w[1]));

    let members = fs::read_to_string(dir.path().join("run/event_members.geojson")).unwrap();
    let GeoJson::FeatureCollection(mc) = members.parse::<GeoJson>().unwrap() else { panic!("not a collection") };
    assert_eq!(mc.features.len(), 50);
    for f in &mc.features {
        assert!(matches!(f.geometry.as_ref().map(|g| &g.value), Some(GeometryValue::MultiPoint { coordinates }) if coordinates.len() >= 5));
    }
}

#[test]
fn synth_run_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sc.json"), repeated_spoofing(2).to_string()).unwrap();
    let p = |name| path(dir.path(), name);
    assert!(aisguard(&["synth", "--scenario", &p("sc.json"), "--out", &p("syn")]).status.success());
    for (out, extra) in [("full", None), ("base", Some("--baseline"))] {
        let mut args = vec!["run", "--input", "", "--out", ""];
        let (input, out_dir) = (p("syn/records.ndjson"), p(out));
        args[2] = &input;
        args[4] = &out_dir;
        args.extend(extra);
        assert!(aisguard(&args).status.success());
    }
    let out = aisguard(&[
        "eval",
        "--events",
        &p("full/events.geojson"),
        "--truth",
        &p("syn/truth.ndjson"),
        "--baseline-events",
        &p("base/events.geojson"),
        "--out",
        &p("eval.json"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(dir.path().join("eval.json"));
    let spoof = &report["evaluation"]["per_label"]["spoofing"];
    assert_eq!(spoof["true_positives"], 2);
    assert_eq!(spoof["recall"], 1.0);
    assert_eq!(report["evaluation"]["false_alarms"], 0);
    assert_eq!(report["truth_events"], 2);

    // same inputs, same bytes
    let again = aisguard(&["run", "--input", &p("syn/records.ndjson"), "--out", &p("again")]);
    assert!(again.status.success());
    for name in ["events.geojson", "event_members.geojson", "stage_report.csv", "removed.ndjson"] {
        assert_eq!(fs::read(dir.path().join("full").join(name)).unwrap(), fs::read(dir.path().join("again").join(name)).unwrap());
    }

    let out = aisguard(&["eval", "--events", &p("full/events.geojson"), "--truth", &p("sc.json"), "--out", &p("x.json")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_scenario_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sc.json"), r#"{"seed": 1, "duration_s": 0, "n_vessels": 3}"#).unwrap();
    let out = aisguard(&["synth", "--scenario", &path(dir.path(), "sc.json"), "--out", &path(dir.path(), "syn")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}
