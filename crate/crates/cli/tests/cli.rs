use std::path::Path;
use std::process::{Command, Output};

fn mdisc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdisc"))
        .args(args)
        .current_dir(dir)
        .env("NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn lowdisc_round_trip_and_tamper() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = mdisc(d, &["lowdisc", "--m", "1000003", "--eps", "0.3", "--mode", "practical", "--seed", "7", "--out", "z.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = mdisc(d, &["verify", "z.json"]);
    assert_eq!(code(&v), 0, "{}", stdout(&v));
    assert!(!stdout(&v).contains("FAIL"));

    let text = std::fs::read_to_string(d.join("z.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let value = doc["report"]["certificate"]["value"].as_f64().unwrap();
    doc["report"]["certificate"]["value"] = serde_json::json!(value + 0.05);
    std::fs::write(d.join("t.json"), serde_json::to_string(&doc).unwrap()).unwrap();
    let v = mdisc(d, &["verify", "t.json"]);
    assert_eq!(code(&v), 1);
    assert!(stdout(&v).contains("FAIL certificate.value"));
}

#[test]
fn argument_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&mdisc(d, &["lowdisc", "--m", "1000", "--eps", "0.3"])), 2, "missing seed");
    assert_eq!(code(&mdisc(d, &["lowdisc", "--m", "1000", "--eps", "1.5", "--seed", "1"])), 2);
    assert_eq!(code(&mdisc(d, &["frobnicate"])), 2);
    assert_eq!(code(&mdisc(d, &["halfspace", "--n", "4", "--mode", "demo", "--c-prime", "1/8", "--seed", "1"])), 2);
    assert_eq!(code(&mdisc(d, &["verify", "missing.json"])), 3);
}

#[test]
fn expander_small() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = mdisc(d, &["expander", "--n", "5", "--eps", "0.9", "--seed", "1", "--out", "g.json", "--edges", "e.txt"]);
    assert_eq!(code(&o), 0);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("g.json")).unwrap()).unwrap();
    let lambda = doc["report"]["graph"]["lambda"].as_f64().unwrap();
    let degree = doc["report"]["graph"]["degree"].as_u64().unwrap();
    assert!(lambda <= 0.9 * degree as f64);
    let edges = std::fs::read_to_string(d.join("e.txt")).unwrap();
    assert_eq!(edges.lines().count() as u64, 5 * degree / 2);
    for line in edges.lines() {
        let (u, v) = line.split_once(' ').unwrap();
        assert!(u.parse::<u64>().unwrap() < v.parse::<u64>().unwrap());
    }
    assert_eq!(code(&mdisc(d, &["verify", "g.json"])), 0);
}

#[test]
fn halfspace_dist_approx_lift() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        vec!["halfspace", "--n", "100", "--out", "hp.json"],
        vec!["halfspace", "--n", "40", "--mode", "demo", "--c-prime", "1/4", "--seed", "3", "--out", "hd.json"],
        vec!["approx", "--builtin", "parity", "--n", "3", "--kind", "threshold-degree", "--out", "a1.json"],
        vec!["approx", "--builtin", "omb", "--n", "4", "--kind", "poly", "--degree", "2", "--out", "a2.json"],
        vec!["approx", "--builtin", "maj", "--n", "3", "--kind", "threshold-density", "--out", "a3.json"],
    ] {
        let o = mdisc(d, &args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let out = args.last().unwrap();
        let v = mdisc(d, &["verify", out]);
        assert_eq!(code(&v), 0, "{out}: {}", stdout(&v));
    }
    std::fs::write(d.join("z.txt"), "# fibonacci\n1, 2, 3, 5, 8\n13 21 # tail\n").unwrap();
    assert_eq!(code(&mdisc(d, &["dist", "--z", "z.txt", "--m", "16", "--out", "d.json"])), 0);
    assert_eq!(code(&mdisc(d, &["dist", "--z", "z.txt"])), 2, "plain list without --m");
    assert_eq!(code(&mdisc(d, &["verify", "d.json"])), 0);

    std::fs::write(d.join("f.txt"), "# and of two bits\n1\n1\n1\n-1\n").unwrap();
    assert_eq!(code(&mdisc(d, &["approx", "--fn", "f.txt", "--kind", "poly", "--degree", "1", "--out", "f.json"])), 0);
    assert_eq!(code(&mdisc(d, &["verify", "f.json"])), 0);

    let h = r#"{"schema_version":1,"kind":"halfspace","spec":{"n":3,"weights":["1","2","-4"],"threshold":{"num":"-1","den":"2"},"provenance":{"kind":"custom"}}}"#;
    std::fs::write(d.join("h.json"), h).unwrap();
    let o = mdisc(d, &["lift", "--halfspace", "h.json", "--k", "2", "--m-blk", "1", "--rectangles", "exhaustive", "--emit-matrix", "m.csv", "--out", "l.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.join("m.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
    assert!(csv.lines().all(|l| l.split(',').all(|c| c == "1" || c == "-1")));
    assert_eq!(code(&mdisc(d, &["verify", "l.json"])), 0);
    for kind in ["poly-linear", "rational-newman"] {
        assert_eq!(code(&mdisc(d, &["approx", "--halfspace", "h.json", "--kind", kind, "--degree", "2", "--out", "b.json"])), 0);
        assert_eq!(code(&mdisc(d, &["verify", "b.json"])), 0);
    }
}

#[test]
fn manifest_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = mdisc(
        d,
        &["--threads", "1", "expander", "--n", "1009", "--eps", "0.5", "--seed", "9", "--out", "g.json", "--edges", "e.txt", "--manifest", "run.json"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = mdisc(d, &["verify", "run.json"]);
    assert_eq!(code(&v), 0, "{}", stdout(&v));
    assert!(stdout(&v).contains("PASS output --edges byte-identical"));

    let text = std::fs::read_to_string(d.join("run.json")).unwrap();
    let bumped = text.replace("\"--seed\",\n    \"9\"", "\"--seed\",\n    \"10\"");
    assert_ne!(bumped, text);
    std::fs::write(d.join("run2.json"), bumped).unwrap();
    assert_eq!(code(&mdisc(d, &["verify", "run2.json"])), 1);
}
