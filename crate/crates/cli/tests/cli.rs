mod common;

use std::path::Path;

use cochlea_feast::events::EventStream;
use cochlea_feast::io;
use cochlea_feast_cli::layout::EventIndex;
use cochlea_feast_cli::stages::Summary;
use common::{code, make_fixture, run, tree, tree_diff, write_config};
use tempfile::tempdir;

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["encode"])), 1);
    assert_eq!(code(&run(&["--threads", "0", "evaluate"])), 1);
    let dir = tempdir().unwrap();
    assert_eq!(code(&run(&["render", "--out", s(dir.path())])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn data_and_constraint_errors() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("out");
    let r = run(&["feast-train", "--out", s(&out)]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("encode"));

    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&run(&["encode", "--manifest", s(&missing), "--out", s(&out)])), 2);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[feast]\ndelta_i = -1.0\n").unwrap();
    let r = run(&["evaluate", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&r), 3);
    assert!(String::from_utf8_lossy(&r.stderr).contains("feast.delta_i"));

    std::fs::write(&bad, "[cochlea]\nbogus = 1\n").unwrap();
    assert_eq!(code(&run(&["evaluate", "--config", s(&bad), "--out", s(&out)])), 2);
}

#[test]
fn empty_event_file_renders_black() {
    let dir = tempdir().unwrap();
    let ev = dir.path().join("empty.aevt");
    io::write_events(&ev, &EventStream::new(16_000, 64)).unwrap();
    let out = dir.path().join("out");
    let r = run(&["render", "--events", s(&ev), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let pgm = std::fs::read_to_string(out.join("render/raster_empty.pgm")).unwrap();
    let mut lines = pgm.lines();
    assert_eq!(lines.next(), Some("P2"));
    assert_eq!(lines.next(), Some("512 64"));
    assert_eq!(lines.next(), Some("255"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| r.split(' ').count() == 512 && r.split(' ').all(|v| v == "0")));
    let max = std::fs::read_to_string(out.join("render/raster_empty.max.txt")).unwrap();
    assert_eq!(max.trim(), "0");

    let r = run(&["render", "--events", s(&ev), "--width", "0", "--out", s(&out)]);
    assert_eq!(code(&r), 1);
}

#[test]
fn bench_on_empty_dataset_is_a_data_error() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("out");
    let index = EventIndex {
        mode: "CAR-FAC".into(),
        n_channels: 64,
        utterances: Vec::new(),
    };
    io::write_json(&out.join("events/index.json"), &index).unwrap();
    let r = run(&["bench", "--out", s(&out)]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("empty dataset"));
}

#[test]
fn pipeline_equals_composed_stages() {
    let dir = tempdir().unwrap();
    let manifest = make_fixture(dir.path());
    let config = write_config(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let common = |out: &Path| {
        vec![
            "--config".to_string(),
            s(&config).to_string(),
            "--manifest".to_string(),
            s(&manifest).to_string(),
            "--out".to_string(),
            s(out).to_string(),
            "--seed".to_string(),
            "7".to_string(),
        ]
    };
    let exec = |cmd: &[&str], out: &Path| {
        let mut args: Vec<String> = cmd.iter().map(|c| c.to_string()).collect();
        args.extend(common(out));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let r = run(&refs);
        assert_eq!(code(&r), 0, "{cmd:?}: {}", String::from_utf8_lossy(&r.stderr));
        r
    };
    let piped = exec(&["pipeline"], &a);
    for cmd in [
        &["encode"][..],
        &["feast-train"],
        &["feast-apply"],
        &["featurize"],
        &["featurize", "--baseline"],
        &["train-classifier"],
    ] {
        exec(cmd, &b);
    }
    let evaluated = exec(&["evaluate"], &b);
    assert_eq!(piped.stdout, evaluated.stdout);
    let (ta, tb) = (tree(&a), tree(&b));
    assert!(tree_diff(&ta, &tb).is_empty(), "differs: {:?}", tree_diff(&ta, &tb));

    let summary: Summary = io::read_json(&a.join("reports/summary.json")).unwrap();
    assert_eq!(summary.mode, "CAR-FAC");
    let sets: Vec<&str> = summary.results.iter().map(|r| r.feature_set.as_str()).collect();
    assert_eq!(sets, vec!["baseline", "s1", "s5"]);
    for r in &summary.results {
        assert!(r.test_accuracy >= 0.75, "{r:?}");
    }

    let map = std::fs::read_dir(a.join("maps/s5")).unwrap().next().unwrap().unwrap().path();
    let wav = dir.path().join("wav/s0_t0_d0.wav");
    let model = a.join("models/feast_s5.fmdl");
    let r = run(&[
        "render", "--config", s(&config), "--wav", s(&wav), "--maps", s(&map), "--model", s(&model),
        "--width", "64", "--out", s(&a),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let pgm = std::fs::read_to_string(a.join("render/cochleagram_s0_t0_d0.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n64 32\n255\n"));
    let weights = std::fs::read_to_string(a.join("render/weights_feast_s5.pgm")).unwrap();
    assert!(weights.starts_with(&format!("P2\n{} 5\n", 8 * 32 + 7)));

    let r = run(&["bench", "--config", s(&config), "--out", s(&a), "--limit", "4"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let report: serde_json::Value = io::read_json(&a.join("reports/bench.json")).unwrap();
    assert_eq!(report["utterances"], 4);
    assert_eq!(report["encode_parallel_matches_sequential"], true);
    assert_eq!(report["feast"]["parallel_matches_sequential"], true);
}

#[test]
fn linear_mode_is_reported() {
    let dir = tempdir().unwrap();
    let manifest = make_fixture(dir.path());
    let config = dir.path().join("linear.toml");
    std::fs::write(&config, common::SMALL_CONFIG.replace("[cochlea]\n", "[cochlea]\nfac_enabled = false\n")).unwrap();
    let out = dir.path().join("out");
    let r = run(&["pipeline", "--config", s(&config), "--manifest", s(&manifest), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let summary: Summary = io::read_json(&out.join("reports/summary.json")).unwrap();
    assert_eq!(summary.mode, "linear CAR");
    let index: EventIndex = io::read_json(&out.join("events/index.json")).unwrap();
    assert_eq!(index.mode, "linear CAR");
}
